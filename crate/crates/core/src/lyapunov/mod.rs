//! Lyapunov equations, the HBr Lyapunov function and its rate certificate.
//!
//! For HBr with friction `r >= 2` and step `h^2` on a convex quadratic,
//!
//! ```text
//! V_k = 2 (k+r-2)^2 h^2 (f(q_k) - f*)                          (V11)
//!       - h^2 (k+r-2) <grad f(q_k), m_k>                        (V12, cross-term)
//!       + |m_k|^2                                               (V2)
//! m_k = (k-1)(q_k - q_{k-1}) + (r-1)(q_k - q*)
//! ```
//!
//! is non-increasing whenever `B = A - (h^2/4) A^2` is PSD, constant when
//! `r = 2`, and bounds `f(q_k) - f* <= V_1 / (2 c h^2 (k+r-2)^2)` for any
//! `c in (0, 1)` with `h^2 <= 4 (1 - c) / lambda_max`.
//!
//! Iterates start at `k = 1` with `q_1 = q_0`, so the initial Lyapunov value of
//! a trace is `V_1 = (r-1)^2 |q_0 - q*|^2`.

pub mod symbolic;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::export::sci;
use crate::linalg;
use crate::optimizers::{StepSize, Trajectory};
use crate::problems::{QuadraticObjective, PSD_TOL, SYMMETRY_TOL};

/// Relative agreement required between closed-form and direct differences.
pub const LEMMA_TOL: f64 = 1e-9;
/// Allowed per-step increase `V_{k+1} - V_k <= MONOTONE_TOL (1 + |V_k|)`.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Allowed drift `|V_k - V_1| <= CONSERVATION_TOL max(1, V_1)` when `r = 2`.
pub const CONSERVATION_TOL: f64 = 1e-9;
/// Slack on the rate bound: `gap <= bound + RATE_SLACK (1 + bound)`.
pub const RATE_SLACK: f64 = 1e-12;
/// Largest state dimension accepted by [`solve_lyapunov_nullspace`].
pub const NULLSPACE_MAX_DIM: usize = 64;
/// Singular values below `NULLSPACE_TOL * max(1, sigma_max)` span the null space.
pub const NULLSPACE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("P is not symmetric (max asymmetry {0:e})")]
    AsymmetricP(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state dimension {0} exceeds the null-space solver cap of {NULLSPACE_MAX_DIM}")]
    TooLarge(usize),
    #[error("index k = {k} outside the usable range 1..={max}")]
    IndexOutOfRange { k: usize, max: usize },
    #[error("{which}: closed form {closed:e} vs direct difference {direct:e} at k = {k} (relative error {rel:e})")]
    CrossCheckFailed {
        which: &'static str,
        k: usize,
        closed: f64,
        direct: f64,
        rel: f64,
    },
    #[error("certificate refused: {0}")]
    Refused(String),
    #[error("rate window: {0}")]
    Window(String),
}

fn check_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<(), LyapunovError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(LyapunovError::Dimension(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_inputs(p: &DMatrix<f64>, f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<(), LyapunovError> {
    let n = p.nrows();
    check_square("P", p, n)?;
    check_square("F", f, n)?;
    check_square("Q", q, n)?;
    if !linalg::is_symmetric(p, SYMMETRY_TOL) {
        return Err(LyapunovError::AsymmetricP(linalg::asymmetry(p)));
    }
    Ok(())
}

/// `|| P F + F^T P + Q ||_F`.
pub fn verify_continuous_lyapunov(
    p: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<f64, LyapunovError> {
    check_inputs(p, f, q)?;
    Ok((p * f + f.transpose() * p + q).norm())
}

/// `|| F^T P F - P + Q ||_F`.
pub fn verify_discrete_lyapunov(
    p: &DMatrix<f64>,
    f: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<f64, LyapunovError> {
    check_inputs(p, f, q)?;
    Ok((f.transpose() * p * f - p + q).norm())
}

/// Orthonormal (Frobenius) basis of all symmetric `P` with
/// `F^T P F - P = 0` (discrete) or `P F + F^T P = 0` (continuous).
///
/// Vectorizes the equation over the `n(n+1)/2` symmetric coordinates and
/// reads the kernel off an SVD.
pub fn solve_lyapunov_nullspace(
    f: &DMatrix<f64>,
    discrete: bool,
) -> Result<Vec<DMatrix<f64>>, LyapunovError> {
    let n = f.nrows();
    check_square("F", f, n)?;
    if n > NULLSPACE_MAX_DIM {
        return Err(LyapunovError::TooLarge(n));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let unit = |(i, j): (usize, usize)| {
        let mut e = DMatrix::zeros(n, n);
        if i == j {
            e[(i, i)] = 1.0;
        } else {
            e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
        }
        e
    };
    let ft = f.transpose();
    let mut system = DMatrix::zeros(n * n, pairs.len());
    for (col, &pair) in pairs.iter().enumerate() {
        let e = unit(pair);
        let image = if discrete {
            &ft * &e * f - &e
        } else {
            &e * f + &ft * &e
        };
        system.column_mut(col).copy_from_slice(image.as_slice());
    }
    let svd = system.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    let threshold = NULLSPACE_TOL * sigma_max.max(1.0);
    let mut basis = Vec::new();
    for (idx, s) in svd.singular_values.iter().enumerate() {
        if *s <= threshold {
            let coeffs = v_t.row(idx);
            let mut p = DMatrix::zeros(n, n);
            for (c, &pair) in coeffs.iter().zip(&pairs) {
                p += unit(pair) * *c;
            }
            basis.push(p);
        }
    }
    Ok(basis)
}

/// Frobenius distance from `p` to the span of an orthonormal `basis`.
pub fn projection_error(p: &DMatrix<f64>, basis: &[DMatrix<f64>]) -> f64 {
    let mut proj = DMatrix::zeros(p.nrows(), p.ncols());
    for b in basis {
        proj += b * p.dot(b);
    }
    (p - proj).norm()
}

/// Generator `[[0, I], [-A, 0]]` of the continuous oscillator.
pub fn oscillator_generator(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let z = DMatrix::zeros(d, d);
    linalg::block2(&z, &DMatrix::identity(d, d), &(-a), &z)
}

/// `P = [[A, -hA/2], [-hA/2, I]]`, the Lyapunov matrix of the Verlet map.
/// At `h = 0` this is the energy matrix `blkdiag(A, I)`.
pub fn stormer_p(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let off = a * (-h / 2.0);
    linalg::block2(a, &off, &off, &DMatrix::identity(d, d))
}

/// `B = A - (h^2/4) A^2`.
pub fn b_matrix(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    linalg::symmetrize(&(a - a * a * (h * h / 4.0)))
}

/// `h^2 A ((1-c) I - (h^2/4) A)`.
pub fn tilde_b_matrix(a: &DMatrix<f64>, h: f64, c: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let h2 = h * h;
    let inner = DMatrix::identity(d, d) * (1.0 - c) - a * (h2 / 4.0);
    linalg::symmetrize(&(a * inner * h2))
}

/// `[[I - c h^2 A, -(I - h^2 A/2)], [-(I - h^2 A/2), I]]`, whose Schur
/// complement is [`tilde_b_matrix`].
pub fn tilde_p_matrix(a: &DMatrix<f64>, h: f64, c: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let h2 = h * h;
    let off = -(&id - a * (h2 / 2.0));
    linalg::block2(&(&id - a * (c * h2)), &off, &off, &id)
}

/// PSD classification with the crate-wide roundoff tolerance.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    linalg::is_psd(m, PSD_TOL)
}

/// One row of a Lyapunov trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRecord {
    pub k: usize,
    pub v11: f64,
    pub v12: f64,
    pub v2: f64,
    pub v: f64,
}

impl LyapunovRecord {
    /// `V1 = V11 + V12`.
    pub fn v1(&self) -> f64 {
        self.v11 + self.v12
    }

    /// The candidate without cross-term, `V11 + V2`.
    pub fn truncated(&self) -> f64 {
        self.v11 + self.v2
    }
}

/// Lyapunov terms at index `k` from `q_k`, `q_{k-1}`.
pub fn lyapunov_terms(
    obj: &QuadraticObjective,
    q: &DVector<f64>,
    q_prev: &DVector<f64>,
    k: usize,
    r: f64,
    h2: f64,
) -> LyapunovRecord {
    // Compensated products: near q* the plain `<e, A e>` carries an absolute
    // error of order eps |A| |e|^2, which the (k+r-2)^2 weight would amplify.
    let e = q - obj.minimizer();
    let g = linalg::mat_vec2(obj.hessian(), &e);
    let m = (q - q_prev) * (k as f64 - 1.0) + &e * (r - 1.0);
    let t = k as f64 + r - 2.0;
    let gap = 0.5 * linalg::vec_dot2(&e, &g);
    let v11 = 2.0 * t * t * h2 * gap;
    let v12 = -h2 * t * linalg::vec_dot2(&g, &m);
    let v2 = linalg::vec_dot2(&m, &m);
    LyapunovRecord {
        k,
        v11,
        v12,
        v2,
        v: v11 + v12 + v2,
    }
}

/// Per-iteration decomposition `V = V11 + V12 + V2` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub r: f64,
    pub h2: f64,
    pub records: Vec<LyapunovRecord>,
}

impl LyapunovTrace {
    /// Initial Lyapunov value (at `k = 1`).
    pub fn v0(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.v)
    }

    /// `V_{k+1} - V_k` for consecutive records.
    pub fn deltas(&self) -> Vec<f64> {
        self.records.windows(2).map(|w| w[1].v - w[0].v).collect()
    }

    /// Largest `(V_{k+1} - V_k) / (1 + |V_k|)`; non-positive for a monotone trace.
    pub fn max_relative_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[1].v - w[0].v) / (1.0 + w[0].v.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].v - w[0].v <= MONOTONE_TOL * (1.0 + w[0].v.abs()))
    }

    /// `max_k |V_k - V_1| / max(1, V_1)`.
    pub fn conservation_drift(&self) -> f64 {
        let v0 = self.v0();
        let scale = v0.abs().max(1.0);
        self.records
            .iter()
            .fold(0.0_f64, |m, r| m.max((r.v - v0).abs() / scale))
    }

    pub fn is_conserved(&self) -> bool {
        self.conservation_drift() <= CONSERVATION_TOL
    }

    /// First `k` at which `V11 + V2` strictly increases.
    pub fn truncated_increase(&self) -> Option<usize> {
        self.records
            .windows(2)
            .find(|w| w[1].truncated() > w[0].truncated())
            .map(|w| w[0].k)
    }

    /// Smallest `V_k`.
    pub fn min_value(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.v)
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `k,V11,V12,V2,V,dV`; `dV = V_{k+1} - V_k` (`nan` on the last row).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,V11,V12,V2,V,dV")?;
        for (i, rec) in self.records.iter().enumerate() {
            let dv = self.records.get(i + 1).map_or(f64::NAN, |n| n.v - rec.v);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rec.k,
                sci(rec.v11),
                sci(rec.v12),
                sci(rec.v2),
                sci(rec.v),
                sci(dv)
            )?;
        }
        Ok(())
    }
}

/// Evaluates the HBr Lyapunov function along any trajectory.
pub fn v_hbr(traj: &Trajectory, obj: &QuadraticObjective, r: f64, step: StepSize) -> LyapunovTrace {
    let h2 = step.h2();
    let records = (1..traj.iterates.len())
        .map(|k| lyapunov_terms(obj, traj.iterate(k), traj.iterate(k - 1), k, r, h2))
        .collect();
    LyapunovTrace { r, h2, records }
}

struct InnerProducts {
    e_ae: f64,
    e_ad: f64,
    ae_ae: f64,
}

fn inner_products(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    k: usize,
) -> Result<InnerProducts, LyapunovError> {
    let max = traj.last_k();
    if k == 0 || k > max {
        return Err(LyapunovError::IndexOutOfRange { k, max });
    }
    let e = traj.iterate(k) - obj.minimizer();
    let d = traj.iterate(k) - traj.iterate(k - 1);
    let ae = linalg::mat_vec2(obj.hessian(), &e);
    Ok(InnerProducts {
        e_ae: linalg::vec_dot2(&e, &ae),
        e_ad: linalg::vec_dot2(&ae, &d),
        ae_ae: linalg::vec_dot2(&ae, &ae),
    })
}

/// Closed form of `V2_{k+1} - V2_k` along HBr.
pub fn delta_v2_closed_form(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    step: StepSize,
    k: usize,
) -> Result<f64, LyapunovError> {
    let ip = inner_products(traj, obj, k)?;
    Ok(symbolic::v2_difference().apply(k, r, step.h2(), ip.e_ae, ip.e_ad, ip.ae_ae))
}

/// Closed form of `V1_{k+1} - V1_k` along HBr on a quadratic.
pub fn delta_v1_closed_form(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    step: StepSize,
    k: usize,
) -> Result<f64, LyapunovError> {
    let ip = inner_products(traj, obj, k)?;
    Ok(symbolic::v1_difference().apply(k, r, step.h2(), ip.e_ae, ip.e_ad, ip.ae_ae))
}

/// `V1_k = h^2 (k+r-2)(k-1) <q_{k-1} - q*, A (q_k - q*)>` on quadratics.
pub fn simplified_v1(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    step: StepSize,
    k: usize,
) -> Result<f64, LyapunovError> {
    let max = traj.last_k();
    if k == 0 || k > max {
        return Err(LyapunovError::IndexOutOfRange { k, max });
    }
    let e = traj.iterate(k) - obj.minimizer();
    let e_prev = traj.iterate(k - 1) - obj.minimizer();
    let kf = k as f64;
    Ok(step.h2()
        * (kf + r - 2.0)
        * (kf - 1.0)
        * linalg::vec_dot2(&e_prev, &linalg::mat_vec2(obj.hessian(), &e)))
}

/// `V_{k+1} - V_k = -h^2 (r-2)(2k+r-2) <q_k - q*, B (q_k - q*)>`.
pub fn delta_v_total(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    step: StepSize,
    k: usize,
) -> Result<f64, LyapunovError> {
    let ip = inner_products(traj, obj, k)?;
    let h2 = step.h2();
    let e_be = ip.e_ae - h2 / 4.0 * ip.ae_ae;
    Ok(-h2 * (r - 2.0) * (2.0 * k as f64 + r - 2.0) * e_be)
}

/// Worst relative errors found by [`lemma_cross_check`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LemmaReport {
    pub steps: usize,
    pub max_rel_v1: f64,
    pub max_rel_v2: f64,
    pub max_rel_total: f64,
    /// Closed-form lemma sum against the `B` form.
    pub max_rel_sum_vs_b: f64,
}

/// Compares every closed-form difference with the direct difference of the
/// trace for `k = 1..K-1`; fails on the first disagreement beyond [`LEMMA_TOL`].
pub fn lemma_cross_check(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    step: StepSize,
) -> Result<LemmaReport, LyapunovError> {
    let trace = v_hbr(traj, obj, r, step);
    let mut rep = LemmaReport::default();
    let check = |which: &'static str, k: usize, closed: f64, direct: f64, scale: f64| {
        let rel = (closed - direct).abs() / scale;
        if rel > LEMMA_TOL || !rel.is_finite() {
            Err(LyapunovError::CrossCheckFailed {
                which,
                k,
                closed,
                direct,
                rel,
            })
        } else {
            Ok(rel)
        }
    };
    for w in trace.records.windows(2) {
        let (cur, next) = (w[0], w[1]);
        let k = cur.k;
        let dv1 = delta_v1_closed_form(traj, obj, r, step, k)?;
        let dv2 = delta_v2_closed_form(traj, obj, r, step, k)?;
        let dv = delta_v_total(traj, obj, r, step, k)?;
        let rel1 = check(
            "delta V1",
            k,
            dv1,
            next.v1() - cur.v1(),
            1.0 + cur.v1().abs() + next.v1().abs(),
        )?;
        let rel2 = check(
            "delta V2",
            k,
            dv2,
            next.v2 - cur.v2,
            1.0 + cur.v2.abs() + next.v2.abs(),
        )?;
        let rel_t = check("delta V", k, dv, next.v - cur.v, 1.0 + cur.v.abs())?;
        let rel_s = check("lemma sum vs B form", k, dv1 + dv2, dv, 1.0 + cur.v.abs())?;
        rep.max_rel_v1 = rep.max_rel_v1.max(rel1);
        rep.max_rel_v2 = rep.max_rel_v2.max(rel2);
        rep.max_rel_total = rep.max_rel_total.max(rel_t);
        rep.max_rel_sum_vs_b = rep.max_rel_sum_vs_b.max(rel_s);
        rep.steps += 1;
    }
    Ok(rep)
}

/// The rate bound `f(q_k) - f* <= V_1 / (2 c h^2 (k + r - 2)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCertificate {
    pub r: f64,
    pub c: f64,
    pub h2: f64,
    pub lam_max: f64,
    pub v0: f64,
}

impl RateCertificate {
    /// Refuses parameters outside `r >= 2`, `0 < c < 1`, `h^2 <= 4(1-c)/lambda_max`.
    pub fn new(r: f64, c: f64, h2: f64, lam_max: f64, v0: f64) -> Result<Self, LyapunovError> {
        if !(r >= 2.0 && r.is_finite()) {
            return Err(LyapunovError::Refused(format!("r = {r} must be >= 2")));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(LyapunovError::Refused(format!(
                "c = {c} must lie in (0, 1)"
            )));
        }
        let limit = Self::max_step(c, lam_max);
        if !(h2 > 0.0 && h2 <= limit) {
            return Err(LyapunovError::Refused(format!(
                "step h^2 = {h2:e} exceeds 4(1-c)/lambda_max = {limit:e} (c = {c}, lambda_max = {lam_max:e})"
            )));
        }
        Ok(Self {
            r,
            c,
            h2,
            lam_max,
            v0,
        })
    }

    /// `4 (1 - c) / lambda_max`.
    pub fn max_step(c: f64, lam_max: f64) -> f64 {
        4.0 * (1.0 - c) / lam_max
    }

    pub fn bound(&self, k: usize) -> f64 {
        let t = k as f64 + self.r - 2.0;
        self.v0 / (2.0 * self.c * self.h2 * t * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateEntry {
    pub k: usize,
    pub gap: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub certificate: RateCertificate,
    pub entries: Vec<CertificateEntry>,
    /// `min_k (bound_k - gap_k)` and where it is attained.
    pub min_margin: f64,
    pub min_margin_k: usize,
    /// `max_k gap_k / bound_k`.
    pub tightest_ratio: f64,
}

impl CertificateReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }
}

/// Checks the rate bound at every `k >= 1` of the trajectory.
pub fn rate_certificate_check(
    traj: &Trajectory,
    obj: &QuadraticObjective,
    r: f64,
    c: f64,
    step: StepSize,
) -> Result<CertificateReport, LyapunovError> {
    let lam = obj
        .lambda_max()
        .map_err(|e| LyapunovError::Refused(e.to_string()))?;
    if traj.iterates.len() < 2 {
        return Err(LyapunovError::IndexOutOfRange {
            k: 1,
            max: traj.last_k(),
        });
    }
    let v0 = lyapunov_terms(obj, traj.iterate(1), traj.iterate(0), 1, r, step.h2()).v;
    let certificate = RateCertificate::new(r, c, step.h2(), lam, v0)?;
    let mut entries = Vec::with_capacity(traj.iterates.len() - 1);
    let (mut min_margin, mut min_margin_k, mut tightest) = (f64::INFINITY, 1, 0.0_f64);
    for k in 1..traj.iterates.len() {
        let gap = traj.f_gap[k];
        let bound = certificate.bound(k);
        let holds = gap <= bound + RATE_SLACK * (1.0 + bound);
        if bound - gap < min_margin {
            min_margin = bound - gap;
            min_margin_k = k;
        }
        if bound > 0.0 {
            tightest = tightest.max(gap / bound);
        }
        entries.push(CertificateEntry {
            k,
            gap,
            bound,
            holds,
        });
    }
    Ok(CertificateReport {
        certificate,
        entries,
        min_margin,
        min_margin_k,
        tightest_ratio: tightest,
    })
}

/// Least-squares fit of `log(f_gap)` against `log(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub k_lo: usize,
    pub k_hi: usize,
    /// The requested window was cut short at a non-positive gap.
    pub shrunk: bool,
}

/// Log-log slope of `f_gap[k]` over `k in [k_lo, k_hi]`.
pub fn rate_slope(f_gap: &[f64], k_lo: usize, k_hi: usize) -> Result<SlopeFit, LyapunovError> {
    if k_lo == 0 || k_hi <= k_lo {
        return Err(LyapunovError::Window(format!(
            "need 1 <= k_lo < k_hi, got [{k_lo}, {k_hi}]"
        )));
    }
    if k_hi >= f_gap.len() {
        return Err(LyapunovError::Window(format!(
            "k_hi = {k_hi} beyond the last index {}",
            f_gap.len().saturating_sub(1)
        )));
    }
    let mut end = k_hi;
    let mut shrunk = false;
    if let Some(bad) = (k_lo..=k_hi).find(|&k| !(f_gap[k] > 0.0 && f_gap[k].is_finite())) {
        shrunk = true;
        if bad < k_lo + 2 {
            return Err(LyapunovError::Window(format!(
                "gap vanishes at k = {bad}; fewer than two usable points"
            )));
        }
        end = bad - 1;
    }
    let pts: Vec<(f64, f64)> = (k_lo..=end)
        .map(|k| ((k as f64).ln(), f_gap[k].ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        k_lo,
        k_hi: end,
        shrunk,
    })
}
