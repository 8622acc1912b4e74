//! Convex quadratic objectives `f(q) = f* + 1/2 <q - q*, A (q - q*)>`.
//!
//! Every objective carries its minimizer and optimal value as oracle fields so
//! that suboptimality gaps and Lyapunov monitors can be evaluated exactly.

use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg;

/// Relative asymmetry tolerated in the Hessian.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues down to `-PSD_TOL * lambda_max` are treated as roundoff.
pub const PSD_TOL: f64 = 1e-10;
/// Power iteration cap before falling back to a dense solver.
pub const POWER_ITERATION_CAP: usize = 10_000;
/// Relative residual `||A x - lambda x|| / lambda` accepted by power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-10;
/// Largest dimension for which the dense eigensolver fallback is used.
pub const DENSE_FALLBACK_MAX_DIM: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: objective has d = {expected}, vector has length {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Hessian must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("Hessian is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("Hessian is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("power iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("malformed objective text: {0}")]
    Parse(String),
}

/// A convex quadratic with known minimizer `q_star` and optimal value `f_star`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    q_star: DVector<f64>,
    f_star: f64,
    lambda_max: OnceLock<f64>,
}

impl PartialEq for QuadraticObjective {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.q_star == other.q_star && self.f_star == other.f_star
    }
}

impl QuadraticObjective {
    /// Validates symmetry and positive semidefiniteness of `a`.
    pub fn new(a: DMatrix<f64>, q_star: DVector<f64>, f_star: f64) -> Result<Self, ProblemError> {
        if !a.is_square() {
            return Err(ProblemError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 {
            return Err(ProblemError::InvalidParameter(
                "dimension must be positive".into(),
            ));
        }
        if q_star.len() != a.nrows() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.nrows(),
                found: q_star.len(),
            });
        }
        if !linalg::is_symmetric(&a, SYMMETRY_TOL) {
            return Err(ProblemError::NotSymmetric {
                asymmetry: linalg::asymmetry(&a),
            });
        }
        let ev = linalg::symmetric_eigenvalues(&a);
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        if lo < -PSD_TOL * hi.abs().max(lo.abs()) {
            return Err(ProblemError::NotPsd {
                min_eigenvalue: lo,
                max_eigenvalue: hi,
            });
        }
        Ok(Self {
            a,
            q_star,
            f_star,
            lambda_max: OnceLock::new(),
        })
    }

    /// `A = diag(values)`, minimizer at the origin, `f* = 0`.
    pub fn diagonal(values: &[f64]) -> Result<Self, ProblemError> {
        let d = values.len();
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(values)),
            DVector::zeros(d),
            0.0,
        )
    }

    pub fn dim(&self) -> usize {
        self.q_star.len()
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn minimizer(&self) -> &DVector<f64> {
        &self.q_star
    }

    pub fn optimal_value(&self) -> f64 {
        self.f_star
    }

    fn check_dim(&self, q: &DVector<f64>) -> Result<(), ProblemError> {
        if q.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        Ok(())
    }

    /// `f(q)`.
    pub fn eval(&self, q: &DVector<f64>) -> Result<f64, ProblemError> {
        Ok(self.f_star + self.gap(q)?)
    }

    /// Suboptimality `f(q) - f*`, evaluated as `1/2 <e, A e>` with `e = q - q*`
    /// so that a large `f*` does not cancel digits.
    pub fn gap(&self, q: &DVector<f64>) -> Result<f64, ProblemError> {
        self.check_dim(q)?;
        Ok(self.gap_unchecked(q))
    }

    /// `A (q - q*)`.
    pub fn grad(&self, q: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        self.check_dim(q)?;
        Ok(self.grad_unchecked(q))
    }

    pub(crate) fn gap_unchecked(&self, q: &DVector<f64>) -> f64 {
        let e = q - &self.q_star;
        0.5 * linalg::bilinear(&e, &self.a, &e)
    }

    pub(crate) fn grad_unchecked(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.a * (q - &self.q_star)
    }

    /// Largest eigenvalue of `A` (the smoothness constant `L`).
    ///
    /// Power iteration from a fixed pseudo-random start; if it has not reached
    /// the residual tolerance within the cap, a dense symmetric eigensolver
    /// takes over for `d <= 512`. The value is cached.
    pub fn lambda_max(&self) -> Result<f64, ProblemError> {
        if let Some(&l) = self.lambda_max.get() {
            return Ok(l);
        }
        let l = match power_iteration(&self.a, POWER_ITERATION_CAP, POWER_ITERATION_TOL) {
            Ok(l) => l,
            Err(_) if self.dim() <= DENSE_FALLBACK_MAX_DIM => {
                *linalg::symmetric_eigenvalues(&self.a)
                    .last()
                    .expect("non-empty")
            }
            Err(e) => return Err(e),
        };
        Ok(*self.lambda_max.get_or_init(|| l))
    }

    /// Nesterov's worst-case quadratic: `A = (L/4) T` with `T = tridiag(-1, 2, -1)`
    /// and linear term `-(L/4) e_1`.
    ///
    /// The minimizer solves `T q* = e_1`, i.e. `q*_i = (d + 1 - i) / (d + 1)`, and
    /// `f* = -(L/8) d / (d + 1)`.
    pub fn nesterov_worst_case(d: usize, lipschitz: f64) -> Result<Self, ProblemError> {
        if d < 2 {
            return Err(ProblemError::InvalidParameter(format!(
                "worst-case instance needs d >= 2, got {d}"
            )));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "L must be positive, got {lipschitz}"
            )));
        }
        let s = lipschitz / 4.0;
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            a[(i, i)] = 2.0 * s;
            if i + 1 < d {
                a[(i, i + 1)] = -s;
                a[(i + 1, i)] = -s;
            }
        }
        let n1 = (d + 1) as f64;
        let q_star = DVector::from_fn(d, |i, _| (n1 - (i + 1) as f64) / n1);
        let f_star = -(lipschitz / 8.0) * (d as f64) / n1;
        Self::new(a, q_star, f_star)
    }

    /// `A = R^T D R` with a geometric spectrum from 1 down to `1/kappa` and a
    /// seeded random rotation `R`; random minimizer, `f* = 0`.
    pub fn ill_conditioned_regression(
        d: usize,
        kappa: f64,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        if d < 2 {
            return Err(ProblemError::InvalidParameter(format!(
                "regression instance needs d >= 2, got {d}"
            )));
        }
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(ProblemError::InvalidParameter(format!(
                "kappa must be >= 1, got {kappa}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rotation = random_orthogonal(d, &mut rng);
        let q_star = gaussian_vector(d, &mut rng);
        let a = if kappa == 1.0 {
            // R^T I R = I; skip the rotation so the identity is exact.
            DMatrix::identity(d, d)
        } else {
            let spectrum = DVector::from_fn(d, |i, _| kappa.powf(-(i as f64) / (d - 1) as f64));
            let scaled = DMatrix::from_fn(d, d, |i, j| spectrum[i] * rotation[(i, j)]);
            linalg::symmetrize(&(rotation.transpose() * scaled))
        };
        Self::new(a, q_star, 0.0)
    }

    /// Random convex quadratic `A = G G^T / rank` with `G` a `d x rank` Gaussian
    /// matrix (singular whenever `rank < d`), random minimizer and optimal value.
    pub fn random_psd(d: usize, rank: usize, seed: u64) -> Result<Self, ProblemError> {
        if d == 0 || rank == 0 {
            return Err(ProblemError::InvalidParameter(
                "dimension and rank must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: DMatrix<f64> = DMatrix::from_fn(d, rank, |_, _| StandardNormal.sample(&mut rng));
        let a = linalg::symmetrize(&(&g * g.transpose() / rank as f64));
        let q_star = gaussian_vector(d, &mut rng);
        let f_star: f64 = StandardNormal.sample(&mut rng);
        Self::new(a, q_star, f_star)
    }

    /// Plain-text form: dimension line, `d` rows of `A`, the minimizer, `f*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.dim());
        let row = |vals: &mut dyn Iterator<Item = f64>| {
            vals.map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for i in 0..self.dim() {
            let _ = writeln!(out, "{}", row(&mut self.a.row(i).iter().copied()));
        }
        let _ = writeln!(out, "{}", row(&mut self.q_star.iter().copied()));
        let _ = writeln!(out, "{:.16e}", self.f_star);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ProblemError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let parse_err = |m: String| ProblemError::Parse(m);
        let d: usize = lines
            .next()
            .ok_or_else(|| parse_err("missing dimension line".into()))?
            .parse()
            .map_err(|e| parse_err(format!("bad dimension: {e}")))?;
        let mut parse_row = |what: &str| -> Result<Vec<f64>, ProblemError> {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(format!("missing {what}")))?;
            line.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| parse_err(format!("{what}: {e}")))
                })
                .collect()
        };
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            let row = parse_row(&format!("matrix row {i}"))?;
            if row.len() != d {
                return Err(parse_err(format!(
                    "matrix row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        let q_star = parse_row("minimizer")?;
        if q_star.len() != d {
            return Err(parse_err(format!(
                "minimizer has {} entries, expected {d}",
                q_star.len()
            )));
        }
        let f_star = parse_row("optimal value")?;
        if f_star.len() != 1 {
            return Err(parse_err("optimal value line must hold one number".into()));
        }
        Self::new(
            DMatrix::from_row_slice(d, d, &entries),
            DVector::from_vec(q_star),
            f_star[0],
        )
    }
}

fn gaussian_vector(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the sign of
/// `R`'s diagonal folded into `Q`.
fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Power iteration for the dominant eigenvalue of a PSD matrix.
pub(crate) fn power_iteration(a: &DMatrix<f64>, cap: usize, tol: f64) -> Result<f64, ProblemError> {
    let d = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = gaussian_vector(d, &mut rng);
    x /= x.norm();
    let mut residual = f64::INFINITY;
    for _ in 0..cap {
        let y = a * &x;
        let lambda = x.dot(&y);
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        residual = (&y - &x * lambda).norm() / lambda.abs().max(f64::MIN_POSITIVE);
        if residual <= tol {
            return Ok(lambda);
        }
        x = y / ny;
    }
    Err(ProblemError::NotConverged {
        iterations: cap,
        residual,
    })
}
