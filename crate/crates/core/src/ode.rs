//! Continuous-time companions: gradient flow `q' = -grad f(q)` and the damped
//! oscillator `q'' + (r/t) q' + grad f(q) = 0`, integrated with fixed-step RK4.

use std::io::{self, Write};

use nalgebra::DVector;
use thiserror::Error;

use crate::export::sci;
use crate::problems::QuadraticObjective;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("step dt = {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("dimension mismatch: field has d = {expected}, initial point has {found}")]
    Dimension { expected: usize, found: usize },
}

/// A vector field `q -> grad f(q)`.
pub trait GradientField {
    fn dim(&self) -> usize;
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64>;
    /// Lipschitz constant of the gradient when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
}

impl GradientField for QuadraticObjective {
    fn dim(&self) -> usize {
        QuadraticObjective::dim(self)
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.grad_unchecked(q)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lambda_max().ok()
    }
}

/// `grad f = 0` in `d` dimensions.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField(pub usize);

impl GradientField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Samples `(t_i, q(t_i), q'(t_i))` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    /// Damping `r` for the second-order flow, `None` for gradient flow.
    pub r: Option<f64>,
    pub dt: f64,
    pub t: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qdot: Vec<DVector<f64>>,
    pub stable: bool,
}

impl OdeTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `v_continuous` at every sample (`None` for gradient flow).
    pub fn lyapunov_values(&self, obj: &QuadraticObjective) -> Option<Vec<f64>> {
        let r = self.r?;
        Some(
            (0..self.len())
                .map(|i| v_continuous(&self.q[i], &self.qdot[i], self.t[i], r, obj))
                .collect(),
        )
    }

    /// CSV with columns `t,f_gap,V_continuous` (`NaN` in the last column for gradient flow).
    pub fn write_csv<W: Write>(&self, obj: &QuadraticObjective, mut out: W) -> io::Result<()> {
        writeln!(out, "t,f_gap,V_continuous")?;
        let v = self.lyapunov_values(obj);
        for i in 0..self.len() {
            let vi = v.as_ref().map_or(f64::NAN, |v| v[i]);
            writeln!(
                out,
                "{},{},{}",
                sci(self.t[i]),
                sci(obj.gap_unchecked(&self.q[i])),
                sci(vi)
            )?;
        }
        Ok(())
    }
}

/// `2 t^2 (f(q) - f*) + || t q' + (r - 1)(q - q*) ||^2`.
pub fn v_continuous(
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    t: f64,
    r: f64,
    obj: &QuadraticObjective,
) -> f64 {
    let e = q - obj.minimizer();
    2.0 * t * t * obj.gap_unchecked(q) + (qdot * t + e * (r - 1.0)).norm_squared()
}

fn grid_steps(t0: f64, t_end: f64, dt: f64) -> Result<usize, OdeError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OdeError::Grid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > t0 && t_end.is_finite()) {
        return Err(OdeError::Grid(format!(
            "need t_end > t0, got [{t0}, {t_end}]"
        )));
    }
    Ok(((t_end - t0) / dt).round() as usize)
}

fn check_limit(dt: f64, limit: f64) -> Result<(), OdeError> {
    if dt > limit * (1.0 + 1e-12) {
        Err(OdeError::StepTooLarge { dt, limit })
    } else {
        Ok(())
    }
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// RK4 on `q'' + (r/t) q' + grad f(q) = 0` from `q(t0) = q0`, `q'(t0) = 0`.
///
/// Requires `t0 > 0` and `dt <= t0 / 10`, plus `dt <= 0.1 / sqrt(L)` when the
/// field reports a Lipschitz constant.
pub fn integrate_agd_ode<F: GradientField + ?Sized>(
    field: &F,
    q0: &DVector<f64>,
    r: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory, OdeError> {
    if t0.is_nan() || t0 <= 0.0 {
        return Err(OdeError::Grid(format!(
            "t0 must be positive (r/t is singular at 0), got {t0}"
        )));
    }
    if !r.is_finite() {
        return Err(OdeError::Grid(format!("damping r must be finite, got {r}")));
    }
    if q0.len() != field.dim() {
        return Err(OdeError::Dimension {
            expected: field.dim(),
            found: q0.len(),
        });
    }
    let steps = grid_steps(t0, t_end, dt)?;
    check_limit(dt, t0 / 10.0)?;
    if let Some(l) = field.lipschitz().filter(|l| *l > 0.0) {
        check_limit(dt, 0.1 / l.sqrt())?;
    }

    let accel = |t: f64, q: &DVector<f64>, p: &DVector<f64>| -> DVector<f64> {
        -(p * (r / t)) - field.gradient(q)
    };

    let mut out = OdeTrajectory {
        r: Some(r),
        dt,
        t: vec![t0],
        q: vec![q0.clone()],
        qdot: vec![DVector::zeros(q0.len())],
        stable: true,
    };
    let (mut q, mut p) = (q0.clone(), DVector::zeros(q0.len()));
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        let half = t + 0.5 * dt;
        let k1q = p.clone();
        let k1p = accel(t, &q, &p);
        let q2 = &q + &k1q * (0.5 * dt);
        let p2 = &p + &k1p * (0.5 * dt);
        let k2p = accel(half, &q2, &p2);
        let q3 = &q + &p2 * (0.5 * dt);
        let p3 = &p + &k2p * (0.5 * dt);
        let k3p = accel(half, &q3, &p3);
        let q4 = &q + &p3 * dt;
        let p4 = &p + &k3p * dt;
        let k4p = accel(t + dt, &q4, &p4);
        q += (k1q + p2 * 2.0 + p3 * 2.0 + p4) * (dt / 6.0);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        if !(finite(&q) && finite(&p)) {
            out.stable = false;
            break;
        }
        out.t.push(t0 + (i + 1) as f64 * dt);
        out.q.push(q.clone());
        out.qdot.push(p.clone());
    }
    Ok(out)
}

/// RK4 on `q' = -grad f(q)` from `q(t0) = q0`. Requires `dt <= 0.1 / L`.
pub fn integrate_gd_ode<F: GradientField + ?Sized>(
    field: &F,
    q0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<OdeTrajectory, OdeError> {
    if q0.len() != field.dim() {
        return Err(OdeError::Dimension {
            expected: field.dim(),
            found: q0.len(),
        });
    }
    let steps = grid_steps(t0, t_end, dt)?;
    if let Some(l) = field.lipschitz().filter(|l| *l > 0.0) {
        check_limit(dt, 0.1 / l)?;
    }
    let vel = |q: &DVector<f64>| -> DVector<f64> { -field.gradient(q) };

    let mut out = OdeTrajectory {
        r: None,
        dt,
        t: vec![t0],
        q: vec![q0.clone()],
        qdot: vec![vel(q0)],
        stable: true,
    };
    let mut q = q0.clone();
    for i in 0..steps {
        let k1 = vel(&q);
        let k2 = vel(&(&q + &k1 * (0.5 * dt)));
        let k3 = vel(&(&q + &k2 * (0.5 * dt)));
        let k4 = vel(&(&q + &k3 * dt));
        q += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !finite(&q) {
            out.stable = false;
            break;
        }
        out.t.push(t0 + (i + 1) as f64 * dt);
        out.qdot.push(vel(&q));
        out.q.push(q.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run, Method, StepSize};

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn zero_field_stays_at_rest() {
        let q0 = DVector::from_vec(vec![1.0, -2.0]);
        let agd = integrate_agd_ode(&ZeroField(2), &q0, 3.0, 1.0, 2.0, 0.01).unwrap();
        assert!(agd.q.iter().all(|q| q == &q0));
        let gd = integrate_gd_ode(&ZeroField(2), &q0, 0.0, 1.0, 0.01).unwrap();
        assert!(gd.q.iter().all(|q| q == &q0));
        assert_eq!(gd.len(), 101);
    }

    #[test]
    fn preconditions() {
        let obj = QuadraticObjective::diagonal(&[100.0]).unwrap();
        assert!(matches!(
            integrate_agd_ode(&obj, &v1(1.0), 2.0, 0.0, 1.0, 1e-3),
            Err(OdeError::Grid(_))
        ));
        assert!(matches!(
            integrate_agd_ode(&obj, &v1(1.0), 2.0, 0.01, 1.0, 1e-2),
            Err(OdeError::StepTooLarge { .. })
        ));
        assert!(matches!(
            integrate_agd_ode(&obj, &v1(1.0), 2.0, 1.0, 2.0, 0.05),
            Err(OdeError::StepTooLarge { .. })
        ));
        assert!(matches!(
            integrate_gd_ode(&obj, &v1(1.0), 0.0, 1.0, 0.01),
            Err(OdeError::StepTooLarge { .. })
        ));
        assert!(matches!(
            integrate_gd_ode(&obj, &DVector::zeros(2), 0.0, 1.0, 1e-4),
            Err(OdeError::Dimension { .. })
        ));
        assert!(matches!(
            integrate_gd_ode(&obj, &v1(1.0), 1.0, 0.5, 1e-4),
            Err(OdeError::Grid(_))
        ));
    }

    #[test]
    fn gradient_flow_matches_exponential() {
        for lam in [0.5, 2.0, 10.0] {
            let obj = QuadraticObjective::diagonal(&[lam]).unwrap();
            let traj = integrate_gd_ode(&obj, &v1(1.5), 0.0, 1.0, 1e-4).unwrap();
            let exact = 1.5 * (-lam * 1.0f64).exp();
            let got = traj.q.last().unwrap()[0];
            assert!(((got - exact) / exact).abs() <= 1e-6);
        }
    }

    #[test]
    fn gradient_flow_decreases_f() {
        let obj = QuadraticObjective::random_psd(4, 3, 5).unwrap();
        let dt = 0.05 / obj.lambda_max().unwrap();
        let traj =
            integrate_gd_ode(&obj, &DVector::from_element(4, 2.0), 0.0, 200.0 * dt, dt).unwrap();
        let f: Vec<f64> = traj.q.iter().map(|q| obj.gap(q).unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn r_two_matches_oscillator_closed_form() {
        // u = t q solves u'' = -u with u(t0) = t0 q0 and u'(t0) = q0.
        let obj = QuadraticObjective::diagonal(&[1.0]).unwrap();
        let (t0, q0) = (1.0, 0.8);
        let traj = integrate_agd_ode(&obj, &v1(q0), 2.0, t0, 30.0, 1e-3).unwrap();
        let envelope = q0 * (t0 * t0 + 1.0f64).sqrt();
        for (t, q) in traj.t.iter().zip(&traj.q) {
            let exact = (t0 * q0 * (t - t0).cos() + q0 * (t - t0).sin()) / t;
            assert!((q[0] - exact).abs() <= 1e-9, "t={t}");
            assert!(q[0].abs() <= envelope / t + 1e-12);
        }
    }

    #[test]
    fn r_three_gap_below_lyapunov_envelope() {
        let obj = QuadraticObjective::random_psd(2, 2, 1).unwrap();
        let q0 = DVector::from_vec(vec![1.0, 2.0]);
        let t0 = 0.5;
        let traj = integrate_agd_ode(&obj, &q0, 3.0, t0, 40.0, 1e-3).unwrap();
        let v0 = v_continuous(&q0, &DVector::zeros(2), t0, 3.0, &obj);
        for (t, q) in traj.t.iter().zip(&traj.q) {
            assert!(obj.gap(q).unwrap() <= v0 / (2.0 * t * t) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn r_two_conserves_v() {
        let obj = QuadraticObjective::random_psd(2, 2, 11).unwrap();
        let q0 = DVector::from_vec(vec![0.5, -1.0]);
        let traj = integrate_agd_ode(&obj, &q0, 2.0, 1.0, 51.0, 1e-3).unwrap();
        let v = traj.lyapunov_values(&obj).unwrap();
        let drift = v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max) / v[0];
        assert!(drift <= 1e-6, "drift {drift:e}");
    }

    #[test]
    fn r_three_v_is_non_increasing() {
        let obj = QuadraticObjective::random_psd(3, 3, 12).unwrap();
        let q0 = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let traj = integrate_agd_ode(&obj, &q0, 3.0, 0.5, 30.0, 1e-3).unwrap();
        let v = traj.lyapunov_values(&obj).unwrap();
        assert!(v.windows(2).all(|w| w[1] - w[0] <= 1e-8 * (1.0 + w[0])));
        assert!(v.last().unwrap() < &v[0]);
    }

    #[test]
    fn v_continuous_special_cases() {
        let obj = QuadraticObjective::random_psd(3, 3, 4).unwrap();
        let qs = obj.minimizer().clone();
        assert_eq!(v_continuous(&qs, &DVector::zeros(3), 2.0, 3.0, &obj), 0.0);
        let q = &qs + DVector::from_vec(vec![0.1, -0.2, 0.3]);
        let qd = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let t = 1.7;
        let want = 2.0 * t * t * obj.gap(&q).unwrap() + (&qd * t + (&q - &qs)).norm_squared();
        assert!((v_continuous(&q, &qd, t, 2.0, &obj) - want).abs() < 1e-13);
    }

    #[test]
    fn change_of_variables_identity() {
        let obj = QuadraticObjective::random_psd(2, 2, 9).unwrap();
        let dt = 1e-3;
        let traj = integrate_agd_ode(
            &obj,
            &DVector::from_vec(vec![1.0, -1.0]),
            2.0,
            1.0,
            11.0,
            dt,
        )
        .unwrap();
        let u: Vec<DVector<f64>> = traj
            .t
            .iter()
            .zip(&traj.q)
            .map(|(t, q)| (q - obj.minimizer()) * *t)
            .collect();
        for i in 1..u.len() - 1 {
            let udd = (&u[i + 1] - &u[i] * 2.0 + &u[i - 1]) / (dt * dt);
            assert!((udd + obj.hessian() * &u[i]).norm() <= 1e-5, "i={i}");
        }
    }

    #[test]
    fn hbr_converges_to_ode_at_first_order() {
        let obj = QuadraticObjective::random_psd(2, 2, 3).unwrap();
        let href = (1.0 / obj.lambda_max().unwrap()).sqrt();
        let q0 = DVector::from_vec(vec![1.0, 0.5]);
        let t_final = 5.0 * href;
        let errs: Vec<f64> = [0.1, 0.01]
            .iter()
            .map(|s| {
                let h = s * href;
                let k_final = (t_final / h).round() as usize;
                let traj = run(
                    &Method::Hbr { r: 3.0 },
                    &obj,
                    &q0,
                    StepSize::from_h(h).unwrap(),
                    k_final,
                )
                .unwrap();
                let sub = 10;
                let ode = integrate_agd_ode(&obj, &q0, 3.0, h, h * k_final as f64, h / sub as f64)
                    .unwrap();
                (1..=k_final)
                    .map(|k| (traj.iterate(k) - &ode.q[(k - 1) * sub]).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((5.0..20.0).contains(&ratio), "errors {errs:?}");
    }

    #[test]
    fn csv_layout() {
        let obj = QuadraticObjective::diagonal(&[1.0]).unwrap();
        let traj = integrate_gd_ode(&obj, &v1(1.0), 0.0, 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&obj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text
            .starts_with("t,f_gap,V_continuous\n0.0000000000000000e0,5.0000000000000000e-1,NaN\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
