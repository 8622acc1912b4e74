//! End-to-end runs through optimizers, the oscillator bridge and the monitors.

use momentum_lab::integrator::{hb2_to_oscillator, EnergyTrace};
use momentum_lab::lyapunov::{rate_certificate_check, v_hbr, LyapunovError};
use momentum_lab::{run, Method, QuadraticObjective, StepSize};
use nalgebra::DVector;

fn regression() -> QuadraticObjective {
    QuadraticObjective::ill_conditioned_regression(20, 1e4, 3).unwrap()
}

#[test]
fn text_round_trip_preserves_runs() {
    let obj = regression();
    let back = QuadraticObjective::from_text(&obj.to_text()).unwrap();
    assert_eq!(back, obj);
    let step = StepSize::relative(1.0, obj.lambda_max().unwrap()).unwrap();
    let q0 = DVector::from_element(20, 1.0);
    let a = run(&Method::Agd, &obj, &q0, step, 200).unwrap();
    let b = run(&Method::Agd, &back, &q0, step, 200).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bridge_energy_matches_lyapunov_value() {
    // With r = 2 the HBr Lyapunov value is the modified energy of the mapped oscillator.
    let obj = regression();
    let step = StepSize::relative(1.0, obj.lambda_max().unwrap()).unwrap();
    let q0 = DVector::from_fn(20, |i, _| (i as f64).cos());
    let traj = run(&Method::Hb2, &obj, &q0, step, 2_000).unwrap();
    let osc = hb2_to_oscillator(&traj, &obj).unwrap();
    let energy = EnergyTrace::from_states(obj.hessian(), &osc.states, osc.first_k);
    let trace = v_hbr(&traj, &obj, 2.0, step);
    let scale = trace.v0();
    for (rec, modified) in trace.records.iter().zip(&energy.modified).skip(1) {
        assert!(
            (rec.v - step.h2() * modified).abs() <= 1e-9 * scale,
            "k={}",
            rec.k
        );
    }
}

#[test]
fn certificate_holds_on_regression_and_refuses_large_steps() {
    let obj = regression();
    let lam = obj.lambda_max().unwrap();
    let q0 = DVector::zeros(20);
    for r in [3.0, 5.0] {
        let step = StepSize::relative(2.0, lam).unwrap();
        let traj = run(&Method::Hbr { r }, &obj, &q0, step, 3_000).unwrap();
        let rep = rate_certificate_check(&traj, &obj, r, 0.5, step).unwrap();
        assert!(
            rep.all_hold(),
            "r={r}: margin {} at {}",
            rep.min_margin,
            rep.min_margin_k
        );
        assert!(rep.tightest_ratio <= 1.0);
    }
    let step = StepSize::relative(4.5, lam).unwrap();
    let traj = run(&Method::Hbr { r: 3.0 }, &obj, &q0, step, 10).unwrap();
    assert!(matches!(
        rate_certificate_check(&traj, &obj, 3.0, 0.5, step),
        Err(LyapunovError::Refused(_))
    ));
}

#[test]
fn hbr_lyapunov_decreases_while_truncated_candidate_does_not() {
    let obj = QuadraticObjective::ill_conditioned_regression(50, 1e6, 0).unwrap();
    let step = StepSize::relative(1.0, obj.lambda_max().unwrap()).unwrap();
    let traj = run(
        &Method::Hbr { r: 3.0 },
        &obj,
        &DVector::zeros(50),
        step,
        10_000,
    )
    .unwrap();
    let trace = v_hbr(&traj, &obj, 3.0, step);
    assert!(trace.is_monotone());
    assert!(trace.truncated_increase().is_some());
    assert!(trace.records.last().unwrap().v < trace.v0());
}
