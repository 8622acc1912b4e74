//! Störmer–Verlet on the harmonic oscillator `u'' = -A u`.
//!
//! The velocity is the backward difference `v_k = (u_k - u_{k-1}) / h`, which
//! turns the three-term recurrence `u_{k+1} - 2 u_k + u_{k-1} = -h^2 A u_k`
//! into the linear one-step map
//!
//! ```text
//! [u_{k+1}]   [I - h^2 A   h I] [u_k]
//! [v_{k+1}] = [  -h A      I  ] [v_k]
//! ```
//!
//! Under this map the total energy `<u, A u> + |v|^2` oscillates while the
//! modified energy `<u, A u> + |v|^2 - h <v, A u>` is conserved exactly.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::export::sci;
use crate::linalg;
use crate::optimizers::Trajectory;
use crate::problems::QuadraticObjective;

/// Relative residual of the three-term recurrence accepted by [`hb2_to_oscillator`].
pub const BRIDGE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgeError {
    #[error("trajectory too short to map onto the oscillator ({0} iterates)")]
    TooShort(usize),
    #[error("recurrence residual {residual:e} at k = {k} exceeds {tolerance:e}; not an HB2 trajectory for this objective and step")]
    RecurrenceResidual {
        k: usize,
        residual: f64,
        tolerance: f64,
    },
}

/// Phase-space point `(u, v)` of the discretized oscillator with step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub h: f64,
}

/// Explicit `2d x 2d` matrix of one Verlet step.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepMap {
    pub f: DMatrix<f64>,
}

impl OneStepMap {
    pub fn new(a: &DMatrix<f64>, h: f64) -> Self {
        let d = a.nrows();
        let id = DMatrix::<f64>::identity(d, d);
        let f = linalg::block2(&(&id - a * (h * h)), &(&id * h), &(a * -h), &id);
        Self { f }
    }

    pub fn apply(&self, state: &OscillatorState) -> OscillatorState {
        let d = state.u.len();
        let y = &self.f * stack(&state.u, &state.v);
        OscillatorState {
            u: y.rows(0, d).into_owned(),
            v: y.rows(d, d).into_owned(),
            h: state.h,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.f.clone().lu().determinant()
    }
}

fn stack(u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let d = u.len();
    DVector::from_fn(2 * d, |i, _| if i < d { u[i] } else { v[i - d] })
}

/// One Verlet step in block form.
pub fn verlet_step(a: &DMatrix<f64>, state: &OscillatorState) -> OscillatorState {
    let h = state.h;
    let au = a * &state.u;
    let u = &state.u - &au * (h * h) + &state.v * h;
    let v = &state.v - au * h;
    OscillatorState { u, v, h: state.h }
}

/// `u_{k+1} = 2 u_k - u_{k-1} - h^2 A u_k`.
pub fn verlet_three_term(
    a: &DMatrix<f64>,
    u_prev: &DVector<f64>,
    u: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    u * 2.0 - u_prev - (a * u) * (h * h)
}

/// `steps + 1` states starting from `initial`.
pub fn simulate(a: &DMatrix<f64>, initial: OscillatorState, steps: usize) -> Vec<OscillatorState> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial);
    for i in 0..steps {
        let next = verlet_step(a, &out[i]);
        out.push(next);
    }
    out
}

/// `<u, A u> + |v|^2`.
pub fn total_energy(a: &DMatrix<f64>, state: &OscillatorState) -> f64 {
    linalg::bilinear(&state.u, a, &state.u) + state.v.norm_squared()
}

/// `<u, A u> + |v|^2 - h <v, A u>`.
pub fn modified_energy(a: &DMatrix<f64>, state: &OscillatorState) -> f64 {
    total_energy(a, state) - state.h * linalg::bilinear(&state.v, a, &state.u)
}

/// Upper bound on the total energy along an orbit with `h^2 lambda_max < 4`:
/// the modified energy dominates `(1 - h sqrt(lambda_max) / 2)` times the total
/// energy, so `E_k <= V_0 / (1 - h sqrt(lambda_max) / 2)`.
pub fn total_energy_bound(a: &DMatrix<f64>, lambda_max: f64, initial: &OscillatorState) -> f64 {
    modified_energy(a, initial) / (1.0 - initial.h * lambda_max.sqrt() / 2.0)
}

/// Per-step total and modified energies.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub k: Vec<usize>,
    pub total: Vec<f64>,
    pub modified: Vec<f64>,
}

impl EnergyTrace {
    pub fn from_states(a: &DMatrix<f64>, states: &[OscillatorState], first_k: usize) -> Self {
        Self {
            k: (first_k..first_k + states.len()).collect(),
            total: states.iter().map(|s| total_energy(a, s)).collect(),
            modified: states.iter().map(|s| modified_energy(a, s)).collect(),
        }
    }

    /// `max_k E_k - min_k E_k`.
    pub fn total_amplitude(&self) -> f64 {
        spread(&self.total)
    }

    /// `max_k |V_k - V_0|` for the modified energy.
    pub fn modified_drift(&self) -> f64 {
        let v0 = self.modified.first().copied().unwrap_or(0.0);
        self.modified
            .iter()
            .fold(0.0_f64, |m, v| m.max((v - v0).abs()))
    }

    /// CSV with columns `k,total_energy,modified_energy`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "k,total_energy,modified_energy")?;
        for i in 0..self.k.len() {
            writeln!(
                out,
                "{},{},{}",
                self.k[i],
                sci(self.total[i]),
                sci(self.modified[i])
            )?;
        }
        Ok(())
    }
}

fn spread(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if xs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Oscillator states `(u_k, v_k)` for `k = first_k, first_k + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorTrajectory {
    pub first_k: usize,
    pub states: Vec<OscillatorState>,
    /// Largest `||u_{k+1} - 2u_k + u_{k-1} + h^2 A u_k|| / (1 + ||u_k||)` seen.
    pub max_residual: f64,
}

/// Maps an HB2 trajectory onto the Verlet oscillator via `u_k = k (q_k - q*)`,
/// `v_k = (u_k - u_{k-1}) / h`, and checks the three-term recurrence at every
/// step. States start at `k = 1` (`u_0 = 0`).
pub fn hb2_to_oscillator(
    traj: &Trajectory,
    obj: &QuadraticObjective,
) -> Result<OscillatorTrajectory, BridgeError> {
    let n = traj.iterates.len();
    if n < 2 {
        return Err(BridgeError::TooShort(n));
    }
    let h = traj.step.h();
    let h2 = traj.step.h2();
    let a = obj.hessian();
    let u: Vec<DVector<f64>> = traj
        .iterates
        .iter()
        .enumerate()
        .map(|(k, q)| (q - obj.minimizer()) * k as f64)
        .collect();
    let mut max_residual = 0.0_f64;
    for k in 1..n - 1 {
        let res = (&u[k + 1] - &u[k] * 2.0 + &u[k - 1] + (a * &u[k]) * h2).norm();
        let rel = res / (1.0 + u[k].norm());
        max_residual = max_residual.max(rel);
        if rel > BRIDGE_RESIDUAL_TOL {
            return Err(BridgeError::RecurrenceResidual {
                k,
                residual: rel,
                tolerance: BRIDGE_RESIDUAL_TOL,
            });
        }
    }
    let states = (1..n)
        .map(|k| OscillatorState {
            u: u[k].clone(),
            v: (&u[k] - &u[k - 1]) / h,
            h,
        })
        .collect();
    Ok(OscillatorTrajectory {
        first_k: 1,
        states,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::{run, Method, StepSize};

    fn s1(u: f64, v: f64, h: f64) -> OscillatorState {
        OscillatorState {
            u: DVector::from_element(1, u),
            v: DVector::from_element(1, v),
            h,
        }
    }

    fn one() -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0)
    }

    #[test]
    fn hand_orbit_period_six() {
        let orbit = simulate(&one(), s1(1.0, 0.0, 1.0), 6);
        let expected = [
            (1.0, 0.0),
            (0.0, -1.0),
            (-1.0, -1.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (1.0, 1.0),
            (1.0, 0.0),
        ];
        for (s, (u, v)) in orbit.iter().zip(expected) {
            assert_eq!((s.u[0], s.v[0]), (u, v));
        }
    }

    #[test]
    fn hand_orbit_energies() {
        let a = one();
        let orbit = simulate(&a, s1(1.0, 0.0, 1.0), 12);
        let total: Vec<f64> = orbit.iter().map(|s| total_energy(&a, s)).collect();
        assert_eq!(&total[..3], &[1.0, 1.0, 2.0]);
        assert!(orbit.iter().all(|s| modified_energy(&a, s) == 1.0));
        let trace = EnergyTrace::from_states(&a, &orbit, 0);
        assert_eq!(trace.total_amplitude(), 1.0);
        assert_eq!(trace.modified_drift(), 0.0);
    }

    #[test]
    fn free_motion() {
        let a = DMatrix::zeros(2, 2);
        let st = OscillatorState {
            u: DVector::from_vec(vec![1.0, 2.0]),
            v: DVector::from_vec(vec![0.5, -1.0]),
            h: 0.1,
        };
        let next = verlet_step(&a, &st);
        assert_eq!(next.v, st.v);
        assert_eq!(next.u, &st.u + &st.v * 0.1);
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let a = DMatrix::identity(3, 3);
        let st = OscillatorState {
            u: DVector::zeros(3),
            v: DVector::zeros(3),
            h: 0.3,
        };
        assert_eq!(total_energy(&a, &st), 0.0);
        assert_eq!(modified_energy(&a, &st), 0.0);
    }

    #[test]
    fn cross_term_is_first_order_in_h() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let u = DVector::from_vec(vec![1.0, -1.0]);
        let v = DVector::from_vec(vec![0.3, 0.7]);
        let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3]
            .iter()
            .map(|&h| {
                let st = OscillatorState {
                    u: u.clone(),
                    v: v.clone(),
                    h,
                };
                (modified_energy(&a, &st) - total_energy(&a, &st)).abs()
            })
            .collect();
        assert!((gaps[0] / gaps[1] - 10.0).abs() < 1e-8);
        assert!((gaps[1] / gaps[2] - 10.0).abs() < 1e-8);
    }

    #[test]
    fn matrix_form_matches_block_form() {
        let obj = QuadraticObjective::random_psd(5, 5, 3).unwrap();
        let a = obj.hessian();
        let h = (1.0 / obj.lambda_max().unwrap()).sqrt();
        let map = OneStepMap::new(a, h);
        let mut st = OscillatorState {
            u: DVector::from_fn(5, |i, _| i as f64 - 2.0),
            v: DVector::zeros(5),
            h,
        };
        for _ in 0..200 {
            let via_matrix = map.apply(&st);
            st = verlet_step(a, &st);
            let scale = 1.0 + st.u.norm() + st.v.norm();
            assert!((&via_matrix.u - &st.u).norm() <= 1e-12 * scale);
            assert!((&via_matrix.v - &st.v).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn unit_determinant() {
        for (seed, frac) in [(1u64, 0.5), (2, 2.0), (3, 3.9)] {
            let obj = QuadraticObjective::random_psd(4, 3, seed).unwrap();
            let h = (frac / obj.lambda_max().unwrap()).sqrt();
            let det = OneStepMap::new(obj.hessian(), h).determinant();
            assert!((det - 1.0).abs() <= 1e-8, "det = {det}");
        }
    }

    #[test]
    fn bridge_identity_for_velocity() {
        let obj = QuadraticObjective::random_psd(3, 3, 5).unwrap();
        let step = StepSize::relative(1.0, obj.lambda_max().unwrap()).unwrap();
        let q0 = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let traj = run(&Method::Hb2, &obj, &q0, step, 40).unwrap();
        let osc = hb2_to_oscillator(&traj, &obj).unwrap();
        let h = step.h();
        for (i, st) in osc.states.iter().enumerate() {
            let k = i + 1;
            let e = traj.iterate(k) - obj.minimizer();
            let p = (traj.iterate(k) - traj.iterate(k - 1)) / h;
            let rhs = p * (h * (k as f64 - 1.0)) + e;
            assert!((&st.v * h - rhs).norm() <= 1e-12 * (1.0 + st.v.norm()));
        }
    }

    #[test]
    fn bridge_zero_trajectory() {
        let obj = QuadraticObjective::diagonal(&[1.0, 2.0]).unwrap();
        let step = StepSize::from_h2(0.5).unwrap();
        let traj = run(&Method::Hb2, &obj, &DVector::zeros(2), step, 10).unwrap();
        let osc = hb2_to_oscillator(&traj, &obj).unwrap();
        assert!(osc.states.iter().all(|s| s.u.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn bridge_rejects_foreign_trajectory() {
        let obj = QuadraticObjective::diagonal(&[1.0, 2.0]).unwrap();
        let step = StepSize::from_h2(0.5).unwrap();
        let q0 = DVector::from_vec(vec![1.0, 1.0]);
        let traj = run(&Method::Hbr { r: 3.0 }, &obj, &q0, step, 10).unwrap();
        assert!(matches!(
            hb2_to_oscillator(&traj, &obj),
            Err(BridgeError::RecurrenceResidual { .. })
        ));
        let traj = run(&Method::Hb2, &obj, &q0, step, 1).unwrap();
        assert!(hb2_to_oscillator(&traj, &obj).is_ok());
    }

    #[test]
    fn energy_csv_layout() {
        let a = one();
        let orbit = simulate(&a, s1(1.0, 0.0, 1.0), 1);
        let mut buf = Vec::new();
        EnergyTrace::from_states(&a, &orbit, 0)
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "k,total_energy,modified_energy\n0,1.0000000000000000e0,1.0000000000000000e0\n1,1.0000000000000000e0,1.0000000000000000e0\n"
        );
    }
}
