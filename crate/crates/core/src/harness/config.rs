//! Experiment configuration and its flat TOML file format.
//!
//! Every key is optional; missing keys take the benchmark defaults.
//!
//! ```toml
//! # plant: A y = B u + C e
//! a = [1.0, -0.9062, 0.4344, -0.1829]
//! b = [0.0, 0.57, -0.38, 0.118]
//! c = [1.0, 0.2]
//! noise_std = 0.01
//! # controller u = (L/M)(r - y)
//! l = [0.005607, 0.005607]
//! m = [1.0, -1.0]
//! horizon = 50
//! d_min = -0.3
//! d_max = 0.3
//! yd_min = -0.1        # defaults to -yd_max
//! yd_max = 0.1         # number, inf, or "inf"
//! reference = 1.0      # or reference_samples = [...] (last sample is held)
//! steps = 5000
//! warm_up = 200
//! runs = 100
//! seed = 0
//! policy = "designed"  # designed | prbs | zero
//! prbs_amplitude = 0.3
//! prbs_switch_period = 1
//! prbs_order = 15
//! forgetting_initial = 0.02
//! forgetting_decay = 0.998
//! info_prior = 1e6
//! sample_period = 0.01
//! output_dir = "out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmark;
use crate::error::{Error, Result};
use crate::plant::{ArmaxModel, Controller};
use crate::poly::Polynomial;
use crate::rpem::{ForgettingSchedule, RpemOptions};
use crate::sensitivity::PerturbationLimits;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Designed,
    Prbs,
    Zero,
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "designed" => Ok(Policy::Designed),
            "prbs" => Ok(Policy::Prbs),
            "zero" | "none" => Ok(Policy::Zero),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Designed => "designed",
            Policy::Prbs => "prbs",
            Policy::Zero => "zero",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Constant(f64),
    /// Sample `t`, holding the last value past the end.
    Samples(Vec<f64>),
}

impl Reference {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Reference::Constant(r) => *r,
            Reference::Samples(v) => v[t.min(v.len() - 1)],
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrbsSettings {
    pub amplitude: f64,
    pub switch_period: usize,
    pub order: u32,
}

impl Default for PrbsSettings {
    fn default() -> Self {
        Self {
            amplitude: 0.3,
            switch_period: 1,
            order: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ArmaxModel,
    pub controller: Controller,
    pub horizon: usize,
    pub limits: PerturbationLimits,
    pub reference: Reference,
    pub steps: usize,
    pub warm_up: usize,
    pub runs: usize,
    pub seed: u64,
    pub policy: Policy,
    pub prbs: PrbsSettings,
    pub rpem: RpemOptions,
    /// `R_0 = info_prior * I`.
    pub info_prior: f64,
    pub sample_period: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: benchmark::reference_model(),
            controller: benchmark::reference_controller(),
            horizon: 50,
            limits: PerturbationLimits::symmetric(0.3, f64::INFINITY),
            reference: Reference::Constant(1.0),
            steps: 5000,
            warm_up: 200,
            runs: 100,
            seed: 0,
            policy: Policy::Designed,
            prbs: PrbsSettings::default(),
            rpem: RpemOptions::default(),
            info_prior: 1e6,
            sample_period: benchmark::SAMPLE_PERIOD,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn with_yd_max(mut self, yd_max: f64) -> Self {
        self.limits.yd_max = yd_max;
        self.limits.yd_min = -yd_max;
        self
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        self.limits
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.horizon == 0 {
            return cfg("horizon must be >= 1".into());
        }
        if self.warm_up >= self.steps {
            return cfg(format!(
                "warm_up ({}) must be smaller than steps ({})",
                self.warm_up, self.steps
            ));
        }
        if self.runs == 0 {
            return cfg("runs must be >= 1".into());
        }
        if self.model.b().degree() == 0 {
            return cfg("B needs at least one delayed coefficient".into());
        }
        if let Reference::Samples(v) = &self.reference {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return cfg("reference_samples must be non-empty and finite".into());
            }
        }
        if !(self.prbs.amplitude > 0.0) || self.prbs.switch_period == 0 {
            return cfg("prbs_amplitude must be > 0 and prbs_switch_period >= 1".into());
        }
        if crate::harness::prbs::taps(self.prbs.order).is_none() {
            return cfg(format!("unsupported prbs_order {}", self.prbs.order));
        }
        if !(self.info_prior > 0.0) || !(self.sample_period > 0.0) {
            return cfg("info_prior and sample_period must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.into_config()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Writes the config back in the file format accepted by [`load`](Self::load).
    pub fn to_toml_string(&self) -> String {
        fn list(p: &Polynomial) -> String {
            let items: Vec<String> = p.coeffs().iter().map(|c| format!("{c:?}")).collect();
            format!("[{}]", items.join(", "))
        }
        fn num(x: f64) -> String {
            if x.is_infinite() {
                if x > 0.0 { "inf".into() } else { "-inf".into() }
            } else {
                format!("{x:?}")
            }
        }
        let reference = match &self.reference {
            Reference::Constant(r) => format!("reference = {}", num(*r)),
            Reference::Samples(v) => format!(
                "reference_samples = [{}]",
                v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
            ),
        };
        format!(
            "a = {}\nb = {}\nc = {}\nnoise_std = {}\nl = {}\nm = {}\nhorizon = {}\n\
             d_min = {}\nd_max = {}\nyd_min = {}\nyd_max = {}\n{reference}\nsteps = {}\n\
             warm_up = {}\nruns = {}\nseed = {}\npolicy = \"{}\"\nprbs_amplitude = {}\n\
             prbs_switch_period = {}\nprbs_order = {}\nforgetting_initial = {}\n\
             forgetting_decay = {}\ninfo_prior = {}\nsample_period = {}\noutput_dir = {:?}\n",
            list(self.model.a()),
            list(self.model.b()),
            list(self.model.c()),
            num(self.model.noise_std()),
            list(self.controller.l()),
            list(self.controller.m()),
            self.horizon,
            num(self.limits.d_min),
            num(self.limits.d_max),
            num(self.limits.yd_min),
            num(self.limits.yd_max),
            self.steps,
            self.warm_up,
            self.runs,
            self.seed,
            self.policy,
            num(self.prbs.amplitude),
            self.prbs.switch_period,
            self.prbs.order,
            num(self.rpem.forgetting.initial_deficit),
            num(self.rpem.forgetting.decay),
            num(self.info_prior),
            num(self.sample_period),
            self.output_dir.display().to_string(),
        )
    }
}

/// Accepts a TOML float (including `inf`) or the strings "inf"/"-inf".
#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Bound {
    Number(f64),
    Text(BoundText),
}

#[derive(Copy, Clone, Debug, Deserialize)]
#[serde(try_from = "String")]
struct BoundText(f64);

impl TryFrom<String> for BoundText {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        parse_bound(&s).map(BoundText)
    }
}

/// Parses a number or `inf`/`infinity`/`-inf`.
pub fn parse_bound(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|_| format!("not a number: {s:?}")),
    }
}

impl Bound {
    fn value(self) -> f64 {
        match self {
            Bound::Number(x) => x,
            Bound::Text(BoundText(x)) => x,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    c: Option<Vec<f64>>,
    noise_std: Option<f64>,
    l: Option<Vec<f64>>,
    m: Option<Vec<f64>>,
    horizon: Option<usize>,
    d_min: Option<f64>,
    d_max: Option<f64>,
    yd_min: Option<Bound>,
    yd_max: Option<Bound>,
    reference: Option<f64>,
    reference_samples: Option<Vec<f64>>,
    steps: Option<usize>,
    warm_up: Option<usize>,
    runs: Option<usize>,
    seed: Option<u64>,
    policy: Option<String>,
    prbs_amplitude: Option<f64>,
    prbs_switch_period: Option<usize>,
    prbs_order: Option<u32>,
    forgetting_initial: Option<f64>,
    forgetting_decay: Option<f64>,
    info_prior: Option<f64>,
    sample_period: Option<f64>,
    output_dir: Option<PathBuf>,
}

impl ConfigFile {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let poly = |name: &str, v: Option<Vec<f64>>, default: &Polynomial| -> Result<Polynomial> {
            match v {
                Some(v) => Polynomial::new(v).map_err(|e| Error::Config(format!("{name}: {e}"))),
                None => Ok(default.clone()),
            }
        };
        let model = ArmaxModel::new(
            poly("b", self.b, cfg.model.b())?,
            poly("a", self.a, cfg.model.a())?,
            poly("c", self.c, cfg.model.c())?,
            self.noise_std.unwrap_or(cfg.model.noise_std()),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let controller = Controller::new(
            poly("l", self.l, cfg.controller.l())?,
            poly("m", self.m, cfg.controller.m())?,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        cfg.model = model;
        cfg.controller = controller;
        if let Some(k) = self.horizon {
            cfg.horizon = k;
        }
        if let Some(x) = self.d_min {
            cfg.limits.d_min = x;
        }
        if let Some(x) = self.d_max {
            cfg.limits.d_max = x;
        }
        if let Some(x) = self.yd_max {
            cfg.limits.yd_max = x.value();
            cfg.limits.yd_min = -x.value();
        }
        if let Some(x) = self.yd_min {
            cfg.limits.yd_min = x.value();
        }
        match (self.reference, self.reference_samples) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either reference or reference_samples, not both".into(),
                ))
            }
            (Some(r), None) => cfg.reference = Reference::Constant(r),
            (None, Some(v)) => cfg.reference = Reference::Samples(v),
            (None, None) => {}
        }
        if let Some(x) = self.steps {
            cfg.steps = x;
        }
        if let Some(x) = self.warm_up {
            cfg.warm_up = x;
        }
        if let Some(x) = self.runs {
            cfg.runs = x;
        }
        if let Some(x) = self.seed {
            cfg.seed = x;
        }
        if let Some(p) = self.policy {
            cfg.policy = p.parse()?;
        }
        if let Some(x) = self.prbs_amplitude {
            cfg.prbs.amplitude = x;
        }
        if let Some(x) = self.prbs_switch_period {
            cfg.prbs.switch_period = x;
        }
        if let Some(x) = self.prbs_order {
            cfg.prbs.order = x;
        }
        cfg.rpem.forgetting = ForgettingSchedule {
            initial_deficit: self
                .forgetting_initial
                .unwrap_or(cfg.rpem.forgetting.initial_deficit),
            decay: self.forgetting_decay.unwrap_or(cfg.rpem.forgetting.decay),
        };
        if let Some(x) = self.info_prior {
            cfg.info_prior = x;
        }
        if let Some(x) = self.sample_period {
            cfg.sample_period = x;
        }
        if let Some(x) = self.output_dir {
            cfg.output_dir = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
