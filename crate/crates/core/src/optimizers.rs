//! Gradient descent and the momentum family: Heavy-ball (constant or
//! `(k-1)/(k+2)` momentum), Nesterov's AGD, HB2, HBr and AGDr.
//!
//! Iterates are indexed from `k = 1` with the seed `q_1 = q_0` (zero initial
//! velocity). At `k = 1` every `(k-1)/(...)` momentum coefficient vanishes, so
//! the first step of every method is a (possibly rescaled) gradient step.

use std::io::{self, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::export::sci;
use crate::problems::{ProblemError, QuadraticObjective};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid step size h^2 = {0}")]
    InvalidStep(f64),
    #[error("invalid method parameters: {0}")]
    InvalidMethod(String),
    #[error("iteration count must be at least 1")]
    NoIterations,
}

/// Step size `h^2`. The root `h` is what the oscillator picture calls the
/// time step; the optimizer moves `h^2` along the negative gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    h2: f64,
}

impl StepSize {
    pub fn from_h2(h2: f64) -> Result<Self, OptimError> {
        if h2 > 0.0 && h2.is_finite() {
            Ok(Self { h2 })
        } else {
            Err(OptimError::InvalidStep(h2))
        }
    }

    pub fn from_h(h: f64) -> Result<Self, OptimError> {
        if h > 0.0 && h.is_finite() {
            Self::from_h2(h * h)
        } else {
            Err(OptimError::InvalidStep(h * h))
        }
    }

    /// `h^2 = fraction / L`.
    pub fn relative(fraction: f64, lipschitz: f64) -> Result<Self, OptimError> {
        Self::from_h2(fraction / lipschitz)
    }

    pub fn h2(self) -> f64 {
        self.h2
    }

    pub fn h(self) -> f64 {
        self.h2.sqrt()
    }
}

/// `(q_k, q_{k-1})` at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub k: usize,
    pub q_curr: DVector<f64>,
    pub q_prev: DVector<f64>,
    pub step: StepSize,
}

impl OptimizerState {
    /// `k = 1`, `q_1 = q_0`.
    pub fn seed(q0: DVector<f64>, step: StepSize) -> Self {
        Self {
            k: 1,
            q_prev: q0.clone(),
            q_curr: q0,
            step,
        }
    }

    /// `p_k = (q_k - q_{k-1}) / h`.
    pub fn velocity(&self) -> DVector<f64> {
        (&self.q_curr - &self.q_prev) / self.step.h()
    }

    fn advance(&self, next: DVector<f64>) -> Self {
        Self {
            k: self.k + 1,
            q_prev: self.q_curr.clone(),
            q_curr: next,
            step: self.step,
        }
    }

    fn check(&self, obj: &QuadraticObjective) -> Result<(), OptimError> {
        for q in [&self.q_curr, &self.q_prev] {
            if q.len() != obj.dim() {
                return Err(ProblemError::DimensionMismatch {
                    expected: obj.dim(),
                    found: q.len(),
                }
                .into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Gd,
    /// Heavy-ball with constant momentum `beta`.
    HbConst {
        beta: f64,
    },
    /// Heavy-ball with momentum `(k-1)/(k+2)`.
    HbNesterovMomentum,
    Agd,
    Hb2,
    Hbr {
        r: f64,
    },
    Agdr {
        r: f64,
    },
}

impl Method {
    /// Constant Heavy-ball with `beta = ((sqrt L - sqrt mu) / (sqrt L + sqrt mu))^2`.
    pub fn hb_const_from_strong_convexity(lipschitz: f64, mu: f64) -> Result<Self, OptimError> {
        if !(lipschitz > 0.0 && mu > 0.0 && mu <= lipschitz) {
            return Err(OptimError::InvalidMethod(format!(
                "need 0 < mu <= L, got mu = {mu}, L = {lipschitz}"
            )));
        }
        let (sl, sm) = (lipschitz.sqrt(), mu.sqrt());
        let beta = ((sl - sm) / (sl + sm)).powi(2);
        let m = Method::HbConst { beta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        match *self {
            Method::HbConst { beta } if !(0.0..1.0).contains(&beta) => Err(
                OptimError::InvalidMethod(format!("beta must lie in [0, 1), got {beta}")),
            ),
            Method::Hbr { r } | Method::Agdr { r } if !(r >= 2.0 && r.is_finite()) => Err(
                OptimError::InvalidMethod(format!("r must be >= 2, got {r}")),
            ),
            _ => Ok(()),
        }
    }

    /// Short label used in file names and reports.
    pub fn label(&self) -> String {
        match *self {
            Method::Gd => "gd".into(),
            Method::HbConst { beta } => format!("hb_const_beta{beta}"),
            Method::HbNesterovMomentum => "hb".into(),
            Method::Agd => "agd".into(),
            Method::Hb2 => "hb2".into(),
            Method::Hbr { r } => format!("hbr_r{r}"),
            Method::Agdr { r } => format!("agdr_r{r}"),
        }
    }

    /// Damping parameter of the Lyapunov function that matches this method, if any.
    pub fn lyapunov_r(&self) -> Option<f64> {
        match *self {
            Method::Hb2 => Some(2.0),
            Method::Hbr { r } => Some(r),
            _ => None,
        }
    }
}

/// `(k - 1) / (k + 2)`.
pub fn nesterov_momentum(k: usize) -> f64 {
    let k = k as f64;
    (k - 1.0) / (k + 2.0)
}

/// `(k - 1) / (k + r - 1)`, shared by HBr and AGDr.
pub fn hbr_momentum(k: usize, r: f64) -> f64 {
    let k = k as f64;
    (k - 1.0) / (k + r - 1.0)
}

/// `(k + (r - 2)/2) / (k + r - 1)`; rises from 1/2 towards 1.
pub fn hbr_gradient_factor(k: usize, r: f64) -> f64 {
    let k = k as f64;
    (k + (r - 2.0) / 2.0) / (k + r - 1.0)
}

/// `q + beta (q - q_prev) - scale * g`.
fn momentum_update(
    q: &DVector<f64>,
    q_prev: &DVector<f64>,
    beta: f64,
    scale: f64,
    g: &DVector<f64>,
) -> DVector<f64> {
    q.zip_zip_map(q_prev, g, |qi, pi, gi| (qi + beta * (qi - pi)) - scale * gi)
}

/// `y - h^2 grad(y)` with `y = q + beta (q - q_prev)`.
fn extrapolated_update(
    obj: &QuadraticObjective,
    state: &OptimizerState,
    beta: f64,
) -> DVector<f64> {
    let y = state
        .q_curr
        .zip_map(&state.q_prev, |qi, pi| qi + beta * (qi - pi));
    let g = obj.grad_unchecked(&y);
    let h2 = state.step.h2();
    y.zip_map(&g, |yi, gi| yi - h2 * gi)
}

/// `q_{k+1} = q_k - h^2 grad f(q_k)`.
pub fn gd_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    let g = obj.grad_unchecked(&state.q_curr);
    let h2 = state.step.h2();
    Ok(state.advance(state.q_curr.zip_map(&g, |qi, gi| qi - h2 * gi)))
}

/// `q_{k+1} = q_k + beta (q_k - q_{k-1}) - h^2 grad f(q_k)`.
pub fn hb_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
    momentum: f64,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    let g = obj.grad_unchecked(&state.q_curr);
    Ok(state.advance(momentum_update(
        &state.q_curr,
        &state.q_prev,
        momentum,
        state.step.h2(),
        &g,
    )))
}

/// Nesterov's method with `beta_k = (k-1)/(k+2)`.
pub fn agd_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    Ok(state.advance(extrapolated_update(obj, state, nesterov_momentum(state.k))))
}

/// `q_{k+1} = q_k + (k-1)/(k+1) (q_k - q_{k-1}) - h^2 k/(k+1) grad f(q_k)`.
pub fn hb2_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    let k = state.k as f64;
    let beta = (k - 1.0) / (k + 1.0);
    let scale = state.step.h2() * (k / (k + 1.0));
    let g = obj.grad_unchecked(&state.q_curr);
    Ok(state.advance(momentum_update(
        &state.q_curr,
        &state.q_prev,
        beta,
        scale,
        &g,
    )))
}

/// HBr: momentum `(k-1)/(k+r-1)` and gradient factor `(k+(r-2)/2)/(k+r-1)`.
pub fn hbr_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
    r: f64,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    let beta = hbr_momentum(state.k, r);
    let scale = state.step.h2() * hbr_gradient_factor(state.k, r);
    let g = obj.grad_unchecked(&state.q_curr);
    Ok(state.advance(momentum_update(
        &state.q_curr,
        &state.q_prev,
        beta,
        scale,
        &g,
    )))
}

/// AGDr: gradient at the extrapolated point with momentum `(k-1)/(k+r-1)`.
pub fn agdr_step(
    obj: &QuadraticObjective,
    state: &OptimizerState,
    r: f64,
) -> Result<OptimizerState, OptimError> {
    state.check(obj)?;
    Ok(state.advance(extrapolated_update(obj, state, hbr_momentum(state.k, r))))
}

/// One step of `method`.
pub fn step(
    method: &Method,
    obj: &QuadraticObjective,
    state: &OptimizerState,
) -> Result<OptimizerState, OptimError> {
    match *method {
        Method::Gd => gd_step(obj, state),
        Method::HbConst { beta } => hb_step(obj, state, beta),
        Method::HbNesterovMomentum => hb_step(obj, state, nesterov_momentum(state.k)),
        Method::Agd => agd_step(obj, state),
        Method::Hb2 => hb2_step(obj, state),
        Method::Hbr { r } => hbr_step(obj, state, r),
        Method::Agdr { r } => agdr_step(obj, state, r),
    }
}

/// Iterates `q_0, q_1 = q_0, q_2, ..., q_K` with per-iterate diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub step: StepSize,
    /// `iterates[k] = q_k`.
    pub iterates: Vec<DVector<f64>>,
    /// `f(q_k) - f*`.
    pub f_gap: Vec<f64>,
    /// `||grad f(q_k)||`.
    pub grad_norm: Vec<f64>,
    /// False once an iterate became non-finite; the trajectory stops before it.
    pub stable: bool,
}

impl Trajectory {
    /// Wraps externally produced iterates, recomputing the diagnostics.
    pub fn from_iterates(
        obj: &QuadraticObjective,
        method: Method,
        step: StepSize,
        iterates: Vec<DVector<f64>>,
    ) -> Result<Self, OptimError> {
        let mut f_gap = Vec::with_capacity(iterates.len());
        let mut grad_norm = Vec::with_capacity(iterates.len());
        for q in &iterates {
            f_gap.push(obj.gap(q)?);
            grad_norm.push(obj.grad_unchecked(q).norm());
        }
        let stable = iterates.iter().all(|q| q.iter().all(|x| x.is_finite()));
        Ok(Self {
            method,
            step,
            iterates,
            f_gap,
            grad_norm,
            stable,
        })
    }

    /// Largest iterate index `K` present.
    pub fn last_k(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn iterate(&self, k: usize) -> &DVector<f64> {
        &self.iterates[k]
    }

    /// CSV with columns `k,f_gap,grad_norm,stable`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,f_gap,grad_norm,stable")?;
        for k in 0..self.iterates.len() {
            writeln!(
                out,
                "{},{},{},{}",
                k,
                sci(self.f_gap[k]),
                sci(self.grad_norm[k]),
                self.stable
            )?;
        }
        Ok(())
    }
}

/// Runs `method` for `iterations` = `K` from `q0` with zero initial velocity.
pub fn run(
    method: &Method,
    obj: &QuadraticObjective,
    q0: &DVector<f64>,
    step_size: StepSize,
    iterations: usize,
) -> Result<Trajectory, OptimError> {
    method.validate()?;
    if iterations == 0 {
        return Err(OptimError::NoIterations);
    }
    let gap0 = obj.gap(q0)?;
    let gn0 = obj.grad_unchecked(q0).norm();
    let mut traj = Trajectory {
        method: *method,
        step: step_size,
        iterates: Vec::with_capacity(iterations + 1),
        f_gap: Vec::with_capacity(iterations + 1),
        grad_norm: Vec::with_capacity(iterations + 1),
        stable: true,
    };
    for _ in 0..2 {
        traj.iterates.push(q0.clone());
        traj.f_gap.push(gap0);
        traj.grad_norm.push(gn0);
    }
    let mut state = OptimizerState::seed(q0.clone(), step_size);
    while state.k < iterations {
        state = step(method, obj, &state)?;
        let q = &state.q_curr;
        let gap = obj.gap_unchecked(q);
        let gn = obj.grad_unchecked(q).norm();
        if !(q.iter().all(|x| x.is_finite()) && gap.is_finite() && gn.is_finite()) {
            traj.stable = false;
            break;
        }
        traj.iterates.push(q.clone());
        traj.f_gap.push(gap);
        traj.grad_norm.push(gn);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn scalar(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn unit_1d() -> QuadraticObjective {
        QuadraticObjective::diagonal(&[1.0]).unwrap()
    }

    fn state_1d(k: usize, q: f64, q_prev: f64, h2: f64) -> OptimizerState {
        OptimizerState {
            k,
            q_curr: scalar(q),
            q_prev: scalar(q_prev),
            step: StepSize::from_h2(h2).unwrap(),
        }
    }

    #[test]
    fn step_size_validation() {
        assert!(StepSize::from_h2(0.0).is_err());
        assert!(StepSize::from_h2(f64::NAN).is_err());
        assert!(StepSize::from_h(-1.0).is_err());
        let s = StepSize::relative(2.0, 4.0).unwrap();
        assert_eq!(s.h2(), 0.5);
    }

    #[test]
    fn gd_hand_values() {
        let obj = unit_1d();
        assert_eq!(
            gd_step(&obj, &state_1d(1, 1.0, 1.0, 1.0)).unwrap().q_curr[0],
            0.0
        );
        assert_eq!(
            gd_step(&obj, &state_1d(1, 1.0, 1.0, 0.5)).unwrap().q_curr[0],
            0.5
        );
        let next = gd_step(&obj, &state_1d(4, 0.0, 3.0, 0.5)).unwrap();
        assert_eq!(next.q_curr[0], 0.0);
        assert_eq!(next.q_prev[0], 0.0);
        assert_eq!(next.k, 5);
    }

    #[test]
    fn hb_hand_values() {
        let obj = unit_1d();
        let s1 = state_1d(1, 1.0, 1.0, 1.0);
        let s2 = hb_step(&obj, &s1, nesterov_momentum(1)).unwrap();
        assert_eq!(s2.q_curr[0], 0.0);
        assert_eq!(s2, gd_step(&obj, &s1).unwrap());
        let s3 = hb_step(&obj, &s2, nesterov_momentum(2)).unwrap();
        assert_eq!(s3.q_curr[0], -0.25);
    }

    #[test]
    fn agd_hand_values() {
        let obj = unit_1d();
        let s1 = state_1d(1, 1.0, 1.0, 1.0);
        let s2 = agd_step(&obj, &s1).unwrap();
        assert_eq!(s2, gd_step(&obj, &s1).unwrap());
        let s3 = agd_step(&obj, &s2).unwrap();
        assert_eq!(s3.q_curr[0], 0.0);
    }

    #[test]
    fn zero_field_is_pure_extrapolation() {
        let obj = QuadraticObjective::diagonal(&[0.0, 0.0]).unwrap();
        let st = OptimizerState {
            k: 4,
            q_curr: DVector::from_vec(vec![1.0, 2.0]),
            q_prev: DVector::from_vec(vec![0.0, 3.0]),
            step: StepSize::from_h2(0.7).unwrap(),
        };
        let beta = nesterov_momentum(4);
        let y = &st.q_curr + (&st.q_curr - &st.q_prev) * beta;
        assert_eq!(agd_step(&obj, &st).unwrap().q_curr, y);
        let beta_r = hbr_momentum(4, 5.0);
        let y_r = &st.q_curr + (&st.q_curr - &st.q_prev) * beta_r;
        assert_eq!(agdr_step(&obj, &st, 5.0).unwrap().q_curr, y_r);
    }

    #[test]
    fn hb2_hand_values() {
        let obj = unit_1d();
        let s2 = hb2_step(&obj, &state_1d(1, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(s2.q_curr[0], 0.5);
        let s3 = hb2_step(&obj, &s2).unwrap();
        assert!(s3.q_curr[0].abs() < 1e-16);
    }

    #[test]
    fn hbr_hand_values() {
        let obj = unit_1d();
        let s2 = hbr_step(&obj, &state_1d(1, 1.0, 1.0, 1.0), 3.0).unwrap();
        assert_eq!(s2.q_curr[0], 0.5);
        for r in [2.0, 3.0, 10.0] {
            let f = hbr_gradient_factor(1, r);
            assert!((0.5..1.0).contains(&f));
            assert!((hbr_gradient_factor(10_000_000, r) - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn method_validation() {
        assert!(Method::Hbr { r: 1.5 }.validate().is_err());
        assert!(Method::Agdr { r: f64::NAN }.validate().is_err());
        assert!(Method::HbConst { beta: 1.0 }.validate().is_err());
        assert!(Method::HbConst { beta: 0.0 }.validate().is_ok());
        let m = Method::hb_const_from_strong_convexity(1.0, 0.01).unwrap();
        assert_eq!(
            m,
            Method::HbConst {
                beta: (0.9f64 / 1.1).powi(2)
            }
        );
        assert!(Method::hb_const_from_strong_convexity(1.0, 2.0).is_err());
    }

    #[test]
    fn run_seeding_and_lengths() {
        let obj = QuadraticObjective::diagonal(&[1.0, 2.0]).unwrap();
        let q0 = DVector::from_vec(vec![1.0, -1.0]);
        let step = StepSize::from_h2(0.25).unwrap();
        let t1 = run(&Method::Gd, &obj, &q0, step, 1).unwrap();
        assert_eq!(t1.iterates, vec![q0.clone(), q0.clone()]);
        assert!(t1.stable);
        let t = run(&Method::Hbr { r: 3.0 }, &obj, &q0, step, 50).unwrap();
        assert_eq!(t.last_k(), 50);
        assert_eq!(t.f_gap.len(), 51);
        assert!(matches!(
            run(&Method::Gd, &obj, &q0, step, 0),
            Err(OptimError::NoIterations)
        ));
        assert!(run(&Method::Gd, &obj, &scalar(1.0), step, 5).is_err());
    }

    #[test]
    fn gd_beyond_two_over_l_diverges() {
        let obj = QuadraticObjective::diagonal(&[3.0]).unwrap();
        let step = StepSize::relative(2.1, 3.0).unwrap();
        let t = run(&Method::Gd, &obj, &scalar(1.0), step, 10_000).unwrap();
        assert!(!t.stable);
        assert!(t.last_k() < 10_000);
        assert!(t.iterates.iter().all(|q| q[0].is_finite()));
        assert!(t.f_gap.last().unwrap() > &1e100);
    }

    #[test]
    fn trajectory_csv_layout() {
        let obj = unit_1d();
        let t = run(
            &Method::Gd,
            &obj,
            &scalar(1.0),
            StepSize::from_h2(0.5).unwrap(),
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,f_gap,grad_norm,stable");
        assert_eq!(
            lines[1],
            "0,5.0000000000000000e-1,1.0000000000000000e0,true"
        );
        assert_eq!(
            lines[3],
            "2,1.2500000000000000e-1,5.0000000000000000e-1,true"
        );
    }

    fn arb_problem(
    ) -> impl Strategy<Value = (QuadraticObjective, DVector<f64>, DVector<f64>, usize, f64)> {
        (1usize..6, any::<u64>(), 1usize..40, 0.05f64..3.9).prop_flat_map(|(d, seed, k, frac)| {
            (
                proptest::collection::vec(-3.0f64..3.0, d),
                proptest::collection::vec(-3.0f64..3.0, d),
            )
                .prop_map(move |(a, b)| {
                    let obj = QuadraticObjective::random_psd(d, d.max(2) - 1, seed).unwrap();
                    let l = obj.lambda_max().unwrap();
                    (obj, DVector::from_vec(a), DVector::from_vec(b), k, frac / l)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reduction_identities_are_bitwise((obj, q, qp, k, h2) in arb_problem()) {
            let st = OptimizerState { k, q_curr: q, q_prev: qp, step: StepSize::from_h2(h2).unwrap() };
            prop_assert_eq!(hbr_step(&obj, &st, 2.0).unwrap(), hb2_step(&obj, &st).unwrap());
            prop_assert_eq!(agdr_step(&obj, &st, 3.0).unwrap(), agd_step(&obj, &st).unwrap());
            prop_assert_eq!(hb_step(&obj, &st, 0.0).unwrap(), gd_step(&obj, &st).unwrap());
        }

        #[test]
        fn minimizer_is_a_fixed_point((obj, _q, _qp, k, h2) in arb_problem(), r in 2.0f64..12.0) {
            let qs = obj.minimizer().clone();
            let st = OptimizerState { k, q_curr: qs.clone(), q_prev: qs.clone(), step: StepSize::from_h2(h2).unwrap() };
            for m in [Method::Gd, Method::HbConst { beta: 0.5 }, Method::HbNesterovMomentum, Method::Agd,
                      Method::Hb2, Method::Hbr { r }, Method::Agdr { r }] {
                prop_assert_eq!(&step(&m, &obj, &st).unwrap().q_curr, &qs);
            }
        }

        #[test]
        fn translation_equivariance((obj, q0, shift, _k, h2) in arb_problem(), r in 2.0f64..6.0) {
            let moved = QuadraticObjective::new(
                obj.hessian().clone(),
                obj.minimizer() + &shift,
                obj.optimal_value(),
            ).unwrap();
            let step_size = StepSize::from_h2(h2).unwrap();
            for m in [Method::Gd, Method::HbNesterovMomentum, Method::Agd, Method::Hbr { r }] {
                let a = run(&m, &obj, &q0, step_size, 30).unwrap();
                let b = run(&m, &moved, &(&q0 + &shift), step_size, 30).unwrap();
                for (qa, qb) in a.iterates.iter().zip(&b.iterates) {
                    let diff = (qb - qa - &shift).norm();
                    prop_assert!(diff <= 1e-10 * (1.0 + qa.norm() + shift.norm()), "diff {}", diff);
                }
            }
        }
    }

    #[test]
    fn dimension_checked_in_steps() {
        let obj = QuadraticObjective::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let st = state_1d(1, 1.0, 1.0, 1.0);
        assert!(matches!(
            gd_step(&obj, &st),
            Err(OptimError::Problem(ProblemError::DimensionMismatch { .. }))
        ));
    }
}
