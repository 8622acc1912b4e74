//! Small dense linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest absolute entry, zero for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Largest asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// True when `m` is square and symmetric to `rel_tol * max|m_ij|`.
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    m.is_square() && asymmetry(m) <= rel_tol * max_abs(m)
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix in ascending order (dense QR-based solver).
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// PSD test with roundoff slack: `min eigenvalue >= -rel_tol * spectral radius`.
pub fn is_psd(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let ev = symmetric_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => lo >= -rel_tol * hi.abs().max(lo.abs()),
        _ => true,
    }
}

/// `<x, m y>` without allocating.
pub fn bilinear(x: &DVector<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        let mut row = 0.0;
        for j in 0..m.ncols() {
            row += m[(i, j)] * y[j];
        }
        acc += x[i] * row;
    }
    acc
}

/// Dot product evaluated as if in twice the working precision
/// (Ogita, Rump and Oishi's `Dot2`, error-free transforms via `mul_add`).
pub fn dot2<I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut p, mut s) = (0.0_f64, 0.0_f64);
    for (x, y) in pairs {
        let h = x * y;
        let r = x.mul_add(y, -h);
        let t = p + h;
        let z = t - p;
        let q = (p - (t - z)) + (h - z);
        p = t;
        s += q + r;
    }
    p + s
}

/// `m x` with every row accumulated by [`dot2`].
pub fn mat_vec2(m: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows(), |i, _| {
        dot2((0..m.ncols()).map(|j| (m[(i, j)], x[j])))
    })
}

/// `<x, y>` accumulated by [`dot2`].
pub fn vec_dot2(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    dot2(x.iter().copied().zip(y.iter().copied()))
}

/// Block matrix `[[a, b], [c, d]]` from four equally sized square blocks.
pub fn block2(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, n), (n, n)).copy_from(b);
    out.view_mut((n, 0), (n, n)).copy_from(c);
    out.view_mut((n, n), (n, n)).copy_from(d);
    out
}
