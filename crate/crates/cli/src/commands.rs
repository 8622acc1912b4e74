//! The `run`, `energy` and `certify` subcommands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use momentum_lab::export::{log_spaced_indices, sci};
use momentum_lab::integrator::{simulate, EnergyTrace, OscillatorState};
use momentum_lab::lyapunov::{
    lemma_cross_check, rate_certificate_check, rate_slope, v_hbr, LyapunovError, LyapunovTrace,
    RateCertificate,
};
use momentum_lab::optimizers::{run as run_method, Method, Trajectory};
use momentum_lab::QuadraticObjective;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CertifySpec, Config, EnergyExperiment, Experiment, MethodSpec};
use crate::CliError;

/// Points kept in `--plot-data` files.
pub const PLOT_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub r: f64,
    /// `conservation` for r = 2, `monotonicity` otherwise.
    pub mode: String,
    pub holds: bool,
    pub v0: f64,
    pub v_final: f64,
    pub max_relative_increase: f64,
    pub drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncated_increase_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub c: f64,
    pub holds: bool,
    pub min_margin: f64,
    pub min_margin_k: usize,
    pub tightest_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub label: String,
    pub h2: f64,
    pub stable: bool,
    pub last_k: usize,
    pub final_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub lambda_max: f64,
    pub methods: Vec<MethodResult>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyResult {
    pub name: String,
    pub initial_total: f64,
    pub total_amplitude: f64,
    pub modified_drift: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentResult>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub energy: Vec<EnergyResult>,
}

impl RunReport {
    pub fn violations(&self) -> Vec<String> {
        self.experiments
            .iter()
            .flat_map(|e| e.violations.iter().map(move |v| format!("{}: {v}", e.name)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub spec: CertifySpec,
    pub lambda_max: f64,
    pub h2: f64,
    pub checks: Vec<CheckLine>,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct Metadata<'a, R: Serialize> {
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<&'a str>,
    config: &'a Config,
    results: &'a R,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file<F>(out: &Path, name: &str, files: &mut Vec<String>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = out.join(name);
    let mut w = create(&path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    files.push(name.to_string());
    Ok(())
}

fn write_metadata<R: Serialize>(
    out: &Path,
    command: &str,
    preset: Option<&str>,
    config: &Config,
    results: &R,
) -> Result<(), CliError> {
    let text = toml::to_string(&Metadata {
        command,
        preset,
        config,
        results,
    })
    .map_err(|e| CliError::Io(format!("metadata: {e}")))?;
    let path = out.join("metadata.toml");
    fs::write(&path, text).map_err(io_err(&path))
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

fn lyapunov_summary(trace: &LyapunovTrace) -> LyapunovSummary {
    let conservation = trace.r == 2.0;
    LyapunovSummary {
        r: trace.r,
        mode: if conservation {
            "conservation"
        } else {
            "monotonicity"
        }
        .into(),
        holds: if conservation {
            trace.is_conserved()
        } else {
            trace.is_monotone()
        },
        v0: trace.v0(),
        v_final: trace.records.last().map_or(f64::NAN, |r| r.v),
        max_relative_increase: trace.max_relative_increase(),
        drift: trace.conservation_drift(),
        truncated_increase_k: trace.truncated_increase(),
    }
}

struct MethodRun<'a> {
    exp: &'a Experiment,
    obj: &'a QuadraticObjective,
    q0: &'a DVector<f64>,
    lambda_max: f64,
    out: &'a Path,
    plot_data: bool,
}

impl MethodRun<'_> {
    fn run(
        &self,
        spec: &MethodSpec,
        violations: &mut Vec<String>,
    ) -> Result<MethodResult, CliError> {
        let method = spec.method()?;
        let step = spec.step_size(self.lambda_max)?;
        let exp = self.exp;
        let traj = run_method(&method, self.obj, self.q0, step, exp.iterations)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", exp.name)))?;
        let label = method.label();
        let stem = format!("{}_{label}", exp.name);
        let mut files = Vec::new();
        write_file(self.out, &format!("{stem}.csv"), &mut files, |w| {
            traj.write_csv(w)
        })?;
        if self.plot_data {
            write_file(self.out, &format!("{stem}_plot.csv"), &mut files, |w| {
                write_plot(&traj, w)
            })?;
        }

        let slope = self.slope(spec, &traj, &label, violations);
        let mon = &exp.monitors;
        match mon.expect_stable {
            Some(true) => {
                let early = traj.f_gap[10.min(traj.last_k())];
                let last = *traj.f_gap.last().unwrap_or(&f64::NAN);
                if !traj.stable {
                    violations.push(format!(
                        "{label}: unstable, stopped at k = {}",
                        traj.last_k()
                    ));
                } else if last.is_nan() || last >= early {
                    violations.push(format!(
                        "{label}: f_gap at k = {} is {last:e}, not below {early:e} at k = 10",
                        traj.last_k()
                    ));
                }
            }
            Some(false) if traj.stable => {
                violations.push(format!("{label}: expected divergence, stayed finite"))
            }
            _ => {}
        }

        let mut lyapunov = None;
        let mut certificate = None;
        if let Some(r) = method.lyapunov_r() {
            if mon.lyapunov || mon.cross_term {
                let trace = v_hbr(&traj, self.obj, r, step);
                write_file(self.out, &format!("{stem}_lyapunov.csv"), &mut files, |w| {
                    trace.write_csv(w)
                })?;
                let summary = lyapunov_summary(&trace);
                if !summary.holds {
                    violations.push(format!(
                        "{label}: Lyapunov {} fails (max increase {:e}, drift {:e})",
                        summary.mode, summary.max_relative_increase, summary.drift
                    ));
                }
                if mon.cross_term && summary.truncated_increase_k.is_none() {
                    violations.push(format!("{label}: V11 + V2 never increases"));
                }
                lyapunov = Some(summary);
            }
            if let Some(c) = mon.c {
                let rep =
                    rate_certificate_check(&traj, self.obj, r, c, step).map_err(|e| match e {
                        LyapunovError::Refused(msg) => {
                            CliError::Refused(format!("{}/{label}: {msg}", exp.name))
                        }
                        other => CliError::Runtime(other.to_string()),
                    })?;
                if !rep.all_hold() {
                    violations.push(format!(
                        "{label}: rate bound violated at k = {}",
                        rep.min_margin_k
                    ));
                }
                certificate = Some(CertificateSummary {
                    c,
                    holds: rep.all_hold(),
                    min_margin: rep.min_margin,
                    min_margin_k: rep.min_margin_k,
                    tightest_ratio: rep.tightest_ratio,
                });
            }
        }

        Ok(MethodResult {
            label,
            h2: step.h2(),
            stable: traj.stable,
            last_k: traj.last_k(),
            final_gap: *traj.f_gap.last().unwrap_or(&f64::NAN),
            slope,
            lyapunov,
            certificate,
            files,
        })
    }

    fn slope(
        &self,
        spec: &MethodSpec,
        traj: &Trajectory,
        label: &str,
        violations: &mut Vec<String>,
    ) -> Option<f64> {
        let window = self.exp.monitors.slope?;
        let slope = rate_slope(&traj.f_gap, window.k_lo, window.k_hi)
            .ok()
            .map(|fit| fit.slope);
        let expected = spec.slope_min.is_some() || spec.slope_max.is_some();
        match slope {
            None if expected => violations.push(format!(
                "{label}: no slope over [{}, {}]",
                window.k_lo, window.k_hi
            )),
            Some(s)
                if spec.slope_min.is_some_and(|m| s < m)
                    || spec.slope_max.is_some_and(|m| s > m) =>
            {
                violations.push(format!(
                    "{label}: slope {s:.4} outside [{}, {}]",
                    spec.slope_min.map_or("-inf".into(), |m| m.to_string()),
                    spec.slope_max.map_or("inf".into(), |m| m.to_string())
                ));
            }
            _ => {}
        }
        slope
    }
}

fn write_plot<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,f_gap")?;
    for k in log_spaced_indices(traj.f_gap.len(), PLOT_POINTS) {
        writeln!(w, "{k},{}", sci(traj.f_gap[k]))?;
    }
    Ok(())
}

fn run_experiment(
    exp: &Experiment,
    out: &Path,
    plot_data: bool,
) -> Result<ExperimentResult, CliError> {
    let obj = exp.problem.build()?;
    let lambda_max = obj
        .lambda_max()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", exp.name)))?;
    let q0 = exp.start.build(obj.dim())?;
    let ctx = MethodRun {
        exp,
        obj: &obj,
        q0: &q0,
        lambda_max,
        out,
        plot_data,
    };
    let mut violations = Vec::new();
    let methods = exp
        .methods
        .iter()
        .map(|m| ctx.run(m, &mut violations))
        .collect::<Result<_, _>>()?;
    Ok(ExperimentResult {
        name: exp.name.clone(),
        lambda_max,
        methods,
        violations,
    })
}

fn run_energy(
    exp: &EnergyExperiment,
    out: &Path,
    plot_data: bool,
) -> Result<EnergyResult, CliError> {
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(&exp.diag));
    let initial = OscillatorState {
        u: DVector::from_column_slice(&exp.u0),
        v: DVector::from_column_slice(&exp.v0),
        h: exp.h,
    };
    let states = simulate(&a, initial, exp.steps);
    let trace = EnergyTrace::from_states(&a, &states, 0);
    let mut files = Vec::new();
    write_file(out, &format!("{}_energy.csv", exp.name), &mut files, |w| {
        trace.write_csv(w)
    })?;
    if plot_data {
        write_file(
            out,
            &format!("{}_energy_plot.csv", exp.name),
            &mut files,
            |w| {
                writeln!(w, "k,total_energy,modified_energy")?;
                for i in log_spaced_indices(trace.k.len(), PLOT_POINTS) {
                    writeln!(
                        w,
                        "{},{},{}",
                        trace.k[i],
                        sci(trace.total[i]),
                        sci(trace.modified[i])
                    )?;
                }
                Ok(())
            },
        )?;
    }
    Ok(EnergyResult {
        name: exp.name.clone(),
        initial_total: trace.total[0],
        total_amplitude: trace.total_amplitude(),
        modified_drift: trace.modified_drift(),
        files,
    })
}

/// Runs every `[[experiment]]` and `[[energy]]` entry; experiments run in parallel.
pub fn run(
    config: &Config,
    out: &Path,
    plot_data: bool,
    preset: Option<&str>,
) -> Result<RunReport, CliError> {
    prepare(out)?;
    let experiments = config
        .experiment
        .par_iter()
        .map(|e| run_experiment(e, out, plot_data))
        .collect::<Result<Vec<_>, _>>()?;
    let energy = config
        .energy
        .par_iter()
        .map(|e| run_energy(e, out, plot_data))
        .collect::<Result<Vec<_>, _>>()?;
    let report = RunReport {
        experiments,
        energy,
    };
    write_metadata(out, "run", preset, config, &report)?;
    Ok(report)
}

/// Runs only the `[[energy]]` entries.
pub fn energy(
    config: &Config,
    out: &Path,
    plot_data: bool,
    preset: Option<&str>,
) -> Result<Vec<EnergyResult>, CliError> {
    if config.energy.is_empty() {
        return Err(CliError::Config(
            "no [[energy]] entries in the configuration".into(),
        ));
    }
    prepare(out)?;
    let results = config
        .energy
        .par_iter()
        .map(|e| run_energy(e, out, plot_data))
        .collect::<Result<Vec<_>, _>>()?;
    #[derive(Serialize)]
    struct Energy<'a> {
        energy: &'a [EnergyResult],
    }
    write_metadata(out, "energy", preset, config, &Energy { energy: &results })?;
    Ok(results)
}

/// Certifies HBr on one problem: stability, Lyapunov monotonicity (conservation
/// for r = 2), closed-form differences and the rate bound.
pub fn certify(spec: &CertifySpec, out: Option<&Path>) -> Result<CertifyReport, CliError> {
    let obj = spec.problem.build()?;
    let lambda_max = obj
        .lambda_max()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let step = spec.step_size(lambda_max)?;
    let refuse = |e: LyapunovError| match e {
        LyapunovError::Refused(msg) => CliError::Refused(msg),
        other => CliError::Runtime(other.to_string()),
    };
    RateCertificate::new(spec.r, spec.c, step.h2(), lambda_max, 0.0).map_err(refuse)?;
    let q0 = spec.start.build(obj.dim())?;
    let traj = run_method(&Method::Hbr { r: spec.r }, &obj, &q0, step, spec.iterations)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut checks = vec![CheckLine {
        name: "stability".into(),
        pass: traj.stable && traj.last_k() == spec.iterations,
        detail: format!("{} of {} iterations finite", traj.last_k(), spec.iterations),
    }];
    let trace = v_hbr(&traj, &obj, spec.r, step);
    let summary = lyapunov_summary(&trace);
    checks.push(CheckLine {
        name: summary.mode.clone(),
        pass: summary.holds,
        detail: if summary.mode == "conservation" {
            format!("max |V_k - V_1| / max(1, V_1) = {:.3e}", summary.drift)
        } else {
            format!(
                "max (V_k+1 - V_k) / (1 + |V_k|) = {:.3e}",
                summary.max_relative_increase
            )
        },
    });
    checks.push(match lemma_cross_check(&traj, &obj, spec.r, step) {
        Ok(rep) => CheckLine {
            name: "closed-form differences".into(),
            pass: true,
            detail: format!(
                "max rel err dV1 {:.2e}, dV2 {:.2e}, dV {:.2e}",
                rep.max_rel_v1, rep.max_rel_v2, rep.max_rel_total
            ),
        },
        Err(e) => CheckLine {
            name: "closed-form differences".into(),
            pass: false,
            detail: e.to_string(),
        },
    });
    let rep = rate_certificate_check(&traj, &obj, spec.r, spec.c, step).map_err(refuse)?;
    checks.push(CheckLine {
        name: "rate bound".into(),
        pass: rep.all_hold(),
        detail: format!(
            "min margin {:.3e} at k = {}, max gap/bound {:.4}",
            rep.min_margin, rep.min_margin_k, rep.tightest_ratio
        ),
    });

    let report = CertifyReport {
        spec: spec.clone(),
        lambda_max,
        h2: step.h2(),
        checks,
    };
    if let Some(out) = out {
        prepare(out)?;
        let mut files = Vec::new();
        write_file(out, "certify_trajectory.csv", &mut files, |w| {
            traj.write_csv(w)
        })?;
        write_file(out, "certify_lyapunov.csv", &mut files, |w| {
            trace.write_csv(w)
        })?;
        write_file(out, "certify_rate.csv", &mut files, |w| {
            writeln!(w, "k,f_gap,bound")?;
            for e in &rep.entries {
                writeln!(w, "{},{},{}", e.k, sci(e.gap), sci(e.bound))?;
            }
            Ok(())
        })?;
        let config = Config {
            certify: Some(spec.clone()),
            ..Config::default()
        };
        write_metadata(out, "certify", None, &config, &report)?;
    }
    Ok(report)
}
