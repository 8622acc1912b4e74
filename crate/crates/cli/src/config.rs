//! TOML experiment configuration.

use momentum_lab::optimizers::Method;
use momentum_lab::{QuadraticObjective, StepSize};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A batch of experiments; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiment: Vec<Experiment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energy: Vec<EnergyExperiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub start: StartSpec,
    pub iterations: usize,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub monitors: Monitors,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    NesterovWorstCase {
        d: usize,
        #[serde(rename = "L", default = "one")]
        lipschitz: f64,
    },
    IllConditionedRegression {
        d: usize,
        kappa: f64,
        #[serde(default)]
        seed: u64,
    },
    RandomPsd {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    Diagonal {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<QuadraticObjective, CliError> {
        let obj = match *self {
            ProblemSpec::NesterovWorstCase { d, lipschitz } => {
                QuadraticObjective::nesterov_worst_case(d, lipschitz)
            }
            ProblemSpec::IllConditionedRegression { d, kappa, seed } => {
                QuadraticObjective::ill_conditioned_regression(d, kappa, seed)
            }
            ProblemSpec::RandomPsd { d, rank, seed } => {
                QuadraticObjective::random_psd(d, rank.unwrap_or(d), seed)
            }
            ProblemSpec::Diagonal { ref values } => QuadraticObjective::diagonal(values),
        };
        obj.map_err(|e| CliError::Config(format!("problem: {e}")))
    }
}

/// Initial point `q0`; the first step starts from rest (`q1 = q0`).
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    #[default]
    Zeros,
    Ones,
    Gaussian {
        seed: u64,
    },
    Vector {
        values: Vec<f64>,
    },
}

impl StartSpec {
    pub fn build(&self, d: usize) -> Result<DVector<f64>, CliError> {
        Ok(match self {
            StartSpec::Zeros => DVector::zeros(d),
            StartSpec::Ones => DVector::from_element(d, 1.0),
            StartSpec::Gaussian { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng))
            }
            StartSpec::Vector { values } => {
                if values.len() != d {
                    return Err(CliError::Config(format!(
                        "start: {} values for a problem of dimension {d}",
                        values.len()
                    )));
                }
                DVector::from_column_slice(values)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Gd,
    /// Constant momentum `beta`.
    Hb,
    /// Momentum `(k-1)/(k+2)`.
    HbNesterov,
    Agd,
    Hb2,
    Hbr,
    Agdr,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: MethodName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// `h^2` as a multiple of `1/L` (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    /// Absolute `h^2`; overrides `step`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    /// Expected log-log slope range over the monitor window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
}

impl MethodSpec {
    pub fn method(&self) -> Result<Method, CliError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::Config(format!("method {:?} needs `{key}`", self.method)))
        };
        let unused = |v: Option<f64>, key: &str| match v {
            Some(_) => Err(CliError::Config(format!(
                "method {:?} does not take `{key}`",
                self.method
            ))),
            None => Ok(()),
        };
        let m = match self.method {
            MethodName::Hb => {
                unused(self.r, "r")?;
                Method::HbConst {
                    beta: need(self.beta, "beta")?,
                }
            }
            MethodName::Hbr | MethodName::Agdr => {
                unused(self.beta, "beta")?;
                let r = need(self.r, "r")?;
                if self.method == MethodName::Hbr {
                    Method::Hbr { r }
                } else {
                    Method::Agdr { r }
                }
            }
            other => {
                unused(self.beta, "beta")?;
                unused(self.r, "r")?;
                match other {
                    MethodName::Gd => Method::Gd,
                    MethodName::HbNesterov => Method::HbNesterovMomentum,
                    MethodName::Agd => Method::Agd,
                    _ => Method::Hb2,
                }
            }
        };
        m.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(m)
    }

    pub fn step_size(&self, lipschitz: f64) -> Result<StepSize, CliError> {
        step_size(self.step, self.h2, lipschitz)
    }
}

fn step_size(fraction: Option<f64>, h2: Option<f64>, lipschitz: f64) -> Result<StepSize, CliError> {
    let s = match (fraction, h2) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "give either `step` or `h2`, not both".into(),
            ))
        }
        (_, Some(h2)) => StepSize::from_h2(h2),
        (f, None) => StepSize::relative(f.unwrap_or(1.0), lipschitz),
    };
    s.map_err(|e| CliError::Config(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Monitors {
    /// Evaluate the Lyapunov function for methods that have one (HB2, HBr).
    #[serde(default)]
    pub lyapunov: bool,
    /// Rate certificate constant `c`; checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<SlopeWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_stable: Option<bool>,
    /// Require `V11 + V2` to increase somewhere while `V` does not.
    #[serde(default)]
    pub cross_term: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeWindow {
    pub k_lo: usize,
    pub k_hi: usize,
}

/// Verlet oscillator `u'' = -A u` with `A = diag(diag)`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyExperiment {
    pub name: String,
    pub diag: Vec<f64>,
    pub h: f64,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default = "default_certify_problem")]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub start: StartSpec,
    #[serde(default = "three")]
    pub r: f64,
    #[serde(default = "half")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(default = "ten_thousand")]
    pub iterations: usize,
}

fn default_certify_problem() -> ProblemSpec {
    ProblemSpec::NesterovWorstCase {
        d: 50,
        lipschitz: 1.0,
    }
}

fn three() -> f64 {
    3.0
}

fn half() -> f64 {
    0.5
}

fn ten_thousand() -> usize {
    10_000
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self {
            problem: default_certify_problem(),
            start: StartSpec::Zeros,
            r: 3.0,
            c: 0.5,
            step: Some(2.0),
            h2: None,
            iterations: 10_000,
        }
    }
}

impl CertifySpec {
    /// Default step for certification is `h^2 = 2/L`.
    pub fn step_size(&self, lipschitz: f64) -> Result<StepSize, CliError> {
        let fraction = if self.h2.is_none() {
            Some(self.step.unwrap_or(2.0))
        } else {
            self.step
        };
        step_size(fraction, self.h2, lipschitz)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks that do not need the problems to be built.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut names = std::collections::BTreeSet::new();
        for e in &self.experiment {
            if !names.insert(e.name.as_str()) {
                return Err(CliError::Config(format!(
                    "duplicate experiment name `{}`",
                    e.name
                )));
            }
            check_name(&e.name)?;
            if e.iterations == 0 {
                return Err(CliError::Config(format!(
                    "experiment `{}`: iterations must be >= 1",
                    e.name
                )));
            }
            if e.methods.is_empty() {
                return Err(CliError::Config(format!(
                    "experiment `{}`: no methods",
                    e.name
                )));
            }
            for m in &e.methods {
                m.method()
                    .map_err(|err| CliError::Config(format!("experiment `{}`: {err}", e.name)))?;
            }
            if let Some(w) = e.monitors.slope {
                if w.k_lo == 0 || w.k_hi <= w.k_lo || w.k_hi > e.iterations {
                    return Err(CliError::Config(format!(
                        "experiment `{}`: slope window [{}, {}] must satisfy 1 <= k_lo < k_hi <= iterations",
                        e.name, w.k_lo, w.k_hi
                    )));
                }
            }
        }
        for e in &self.energy {
            if !names.insert(e.name.as_str()) {
                return Err(CliError::Config(format!(
                    "duplicate experiment name `{}`",
                    e.name
                )));
            }
            check_name(&e.name)?;
            let d = e.diag.len();
            if d == 0 || e.u0.len() != d || e.v0.len() != d {
                return Err(CliError::Config(format!(
                    "energy `{}`: diag, u0 and v0 need equal non-zero lengths ({}, {}, {})",
                    e.name,
                    d,
                    e.u0.len(),
                    e.v0.len()
                )));
            }
            if !(e.h > 0.0 && e.h.is_finite()) {
                return Err(CliError::Config(format!(
                    "energy `{}`: h must be positive",
                    e.name
                )));
            }
        }
        Ok(())
    }
}

fn check_name(name: &str) -> Result<(), CliError> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(CliError::Config(format!(
            "experiment name `{name}` must be non-empty [A-Za-z0-9_-]"
        )));
    }
    Ok(())
}
