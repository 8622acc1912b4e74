//! CSV formatting helpers.

/// Scientific notation with 17 significant digits (round-trips any `f64`).
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Roughly log-spaced indices in `0..len`, always keeping the first and last,
/// for downsampled plot data.
pub fn log_spaced_indices(len: usize, points: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    if points < 2 || len <= points {
        return (0..len).collect();
    }
    let last = (len - 1) as f64;
    let mut out: Vec<usize> = (0..points)
        .map(|i| ((1.0 + last).powf(i as f64 / (points - 1) as f64) - 1.0).round() as usize)
        .collect();
    out.push(0);
    out.push(len - 1);
    out.sort_unstable();
    out.dedup();
    out.retain(|&i| i < len);
    out
}
