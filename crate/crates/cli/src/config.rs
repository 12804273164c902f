//! Study configuration, read from TOML and overridden by command-line flags.
//!
//! Every field is optional; an empty file gives the AV@R table setup.
//!
//! ```toml
//! measure = "avar:0.025"
//! partition = "equidistant"      # or "inclusive"
//! mode = "auto"                  # auto | left | right | general
//! ns = [250, 500, 1000, 2000]
//! ms = [1, 2, 4, 8, 16, 32, 64]
//! alternatives = ["N", "T3", "T5", "ST"]   # "ST:nu:gamma" sets the shape
//! reps = 20000
//! kappa = 0.05
//! construction_level = 0.05      # defaults to kappa
//! seed = 1
//! streams_per_replication = 4294967296
//!
//! [rvar]
//! alpha = 0.025
//! betas = [0.015, 0.005, 0.001]
//!
//! [alm]
//! measure = "gluevar"
//! claims = ["null", "nb", "par", "logn"]
//! forecast = "semi-analytic"     # or "inner-mc"
//! inner_n = 100000
//! b = 0.05                       # any AlmParams field may be overridden
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use drmtest_core::alm::{AlmParams, DEFAULT_INNER_SAMPLES};
use drmtest_core::measure::PartitionRule;
use drmtest_core::rng::DEFAULT_STREAMS_PER_REPLICATION;
use drmtest_core::sampler::{Alternative, ClaimModel};
use drmtest_core::study::{AlmForecastMethod, DEFAULT_REPLICATIONS};
use drmtest_core::{Mode, RiskMeasure};
use serde::Deserialize;

/// Smallest replication count accepted.
pub const MIN_REPLICATIONS: u64 = 100;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub measure: String,
    pub partition: String,
    pub mode: String,
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub alternatives: Vec<String>,
    pub reps: u64,
    pub kappa: f64,
    pub construction_level: Option<f64>,
    pub seed: u64,
    pub streams_per_replication: u64,
    pub rvar: RvarConfig,
    pub alm: AlmConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            measure: "avar:0.025".into(),
            partition: "equidistant".into(),
            mode: "auto".into(),
            ns: vec![250, 500, 1000, 2000],
            ms: vec![1, 2, 4, 8, 16, 32, 64],
            alternatives: ["N", "T3", "T5", "ST"].map(String::from).to_vec(),
            reps: DEFAULT_REPLICATIONS,
            kappa: 0.05,
            construction_level: None,
            seed: 1,
            streams_per_replication: DEFAULT_STREAMS_PER_REPLICATION,
            rvar: RvarConfig::default(),
            alm: AlmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RvarConfig {
    pub alpha: f64,
    pub betas: Vec<f64>,
}

impl Default for RvarConfig {
    fn default() -> Self {
        Self {
            alpha: 0.025,
            betas: vec![0.015, 0.005, 0.001],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlmConfig {
    pub measure: String,
    pub claims: Vec<String>,
    pub forecast: String,
    pub inner_n: usize,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub riskless: Option<f64>,
    pub b: Option<f64>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub premium: Option<f64>,
    pub reserve: Option<f64>,
    pub e0: Option<f64>,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            measure: "gluevar".into(),
            claims: ["null", "nb", "par", "logn"].map(String::from).to_vec(),
            forecast: "semi-analytic".into(),
            inner_n: DEFAULT_INNER_SAMPLES,
            mu: None,
            sigma: None,
            riskless: None,
            b: None,
            lambda: None,
            theta: None,
            premium: None,
            reserve: None,
            e0: None,
        }
    }
}

impl AlmConfig {
    pub fn params(&self) -> AlmParams {
        let d = AlmParams::default();
        AlmParams {
            mu: self.mu.unwrap_or(d.mu),
            sigma: self.sigma.unwrap_or(d.sigma),
            riskless: self.riskless.unwrap_or(d.riskless),
            b: self.b.unwrap_or(d.b),
            lambda: self.lambda.unwrap_or(d.lambda),
            theta: self.theta.unwrap_or(d.theta),
            premium: self.premium.unwrap_or(d.premium),
            reserve: self.reserve.unwrap_or(d.reserve),
            e0: self.e0.unwrap_or(d.e0),
            horizon: d.horizon,
        }
    }

    pub fn forecast_method(&self) -> Result<AlmForecastMethod> {
        match self.forecast.as_str() {
            "semi-analytic" => Ok(AlmForecastMethod::SemiAnalytic),
            "inner-mc" => Ok(AlmForecastMethod::InnerMc {
                inner_n: self.inner_n,
            }),
            other => bail!("unknown ALM forecast method '{other}' (semi-analytic or inner-mc)"),
        }
    }

    pub fn claim_models(&self) -> Result<Vec<ClaimModel>> {
        self.claims
            .iter()
            .map(|c| c.parse().map_err(Into::into))
            .collect()
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing study configuration")?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn measure(&self) -> Result<RiskMeasure> {
        Ok(self.measure.parse()?)
    }

    pub fn partition_rule(&self) -> Result<PartitionRule> {
        Ok(self.partition.parse()?)
    }

    pub fn mode(&self) -> Result<Mode> {
        Ok(self.mode.parse()?)
    }

    pub fn alternatives(&self) -> Result<Vec<Alternative>> {
        self.alternatives
            .iter()
            .map(|a| a.parse().map_err(Into::into))
            .collect()
    }

    /// Level the rejection thresholds are built for.
    pub fn construction(&self) -> f64 {
        self.construction_level.unwrap_or(self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ms.is_empty() {
            bail!("the n and m grids must be non-empty");
        }
        if self.ns.contains(&0) {
            bail!("horizons must be positive");
        }
        if self.reps < MIN_REPLICATIONS {
            bail!(
                "at least {MIN_REPLICATIONS} replications are required, got {}",
                self.reps
            );
        }
        for (name, level) in [
            ("kappa", self.kappa),
            ("construction level", self.construction()),
        ] {
            if !(level > 0.0 && level < 1.0) {
                bail!("{name} must lie in (0, 1), got {level}");
            }
        }
        if self.streams_per_replication == 0 {
            bail!("streams per replication must be positive");
        }
        self.measure()?;
        self.partition_rule()?;
        self.mode()?;
        self.alternatives()?;
        self.alm.forecast_method()?;
        self.alm.claim_models()?;
        self.alm.params().validate()?;
        Ok(())
    }
}
