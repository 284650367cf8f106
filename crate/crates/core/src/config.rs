//! Run configuration, stored as a flat TOML file.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::model::{rho_from_cv, RhoEstimate};
use crate::bayes::{BayesConfig, PriorOverrides, SamplerConfig, ThetaMode, DEFAULT_ROPE, DEFAULT_THRESHOLD};
use crate::data::{ColumnMapping, CvGeometry, MetricSpec};
use crate::error::{Error, Result};

/// Output formats a run can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Md,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Md),
            "svg" => Ok(Format::Svg),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}` (expected json, md or svg)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Md => "md",
            Format::Svg => "svg",
        })
    }
}

/// Folds used for the correlation when neither `rho` nor `cv_train_frac` is
/// given.
pub const DEFAULT_CV_FOLDS: u32 = 10;

/// Everything that determines a run's output, together with the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// `value,resample,dataset,model`; see [`ColumnMapping::parse`].
    pub columns: String,
    pub metric: String,
    pub higher_is_better: bool,
    pub bounded: bool,
    pub alpha: f64,
    pub rope: f64,
    pub threshold: f64,
    /// Explicit fold correlation; excludes `cv_train_frac`.
    pub rho: Option<f64>,
    /// Training share of each fold, giving `rho = (1 − f) / f`.
    pub cv_train_frac: Option<f64>,
    pub chains: usize,
    /// Retained draws summed over chains.
    pub total_draws: usize,
    pub burn_in: usize,
    pub theta_mode: ThetaMode,
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    /// Worker threads for pairwise comparisons; all cores when unset.
    pub jobs: Option<usize>,
    /// Build the NHST family even when the omnibus test retains.
    pub force_posthoc: bool,
    /// Pairs `x:y` to draw posterior simplex plots for, or `all`.
    pub simplex_pairs: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let metric = MetricSpec::auc();
        RunConfig {
            input: None,
            columns: "value,resample,dataset,model".into(),
            metric: metric.name,
            higher_is_better: metric.higher_is_better,
            bounded: metric.bounded,
            alpha: 0.05,
            rope: DEFAULT_ROPE,
            threshold: DEFAULT_THRESHOLD,
            rho: None,
            cv_train_frac: None,
            chains: 4,
            total_draws: 50_000,
            burn_in: 2_500,
            theta_mode: ThetaMode::Predictive,
            seed: 0,
            out: PathBuf::from("modelcmp-out"),
            formats: vec![Format::Json, Format::Md, Format::Svg],
            jobs: None,
            force_posthoc: false,
            simplex_pairs: Vec::new(),
        }
    }
}

fn bad(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(format!("config: {e}")))
    }

    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        self.mapping()?;
        if self.metric.trim().is_empty() {
            return Err(bad("metric name must not be empty".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.rho.is_some() && self.cv_train_frac.is_some() {
            return Err(bad("give either rho or cv_train_frac, not both".into()));
        }
        if let Some(f) = self.cv_train_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(bad(format!("cv_train_frac must lie in (0, 1), got {f}")));
            }
        }
        if self.chains == 0 {
            return Err(bad("chains must be at least 1".into()));
        }
        if self.total_draws < 4 * self.chains {
            return Err(bad(format!(
                "total_draws must be at least 4 per chain, got {} for {} chains",
                self.total_draws, self.chains
            )));
        }
        if self.formats.is_empty() {
            return Err(bad("at least one output format is required".into()));
        }
        if self.jobs == Some(0) {
            return Err(bad("jobs must be at least 1".into()));
        }
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(bad(format!("seed must be at most {}, got {}", i64::MAX, self.seed)));
        }
        for p in &self.simplex_pairs {
            if p != "all" && p.split_once(':').is_none_or(|(a, b)| a.is_empty() || b.is_empty()) {
                return Err(bad(format!("simplex pair `{p}` must be `x:y` or `all`")));
            }
        }
        self.bayes_config()?.0.validate()
    }

    /// Copy for provenance records: thread count and output directory are
    /// dropped because they never change a result.
    pub fn recorded(&self) -> RunConfig {
        RunConfig {
            jobs: None,
            out: PathBuf::new(),
            ..self.clone()
        }
    }

    pub fn mapping(&self) -> Result<ColumnMapping> {
        ColumnMapping::parse(&self.columns)
    }

    pub fn metric_spec(&self) -> MetricSpec {
        MetricSpec {
            name: self.metric.clone(),
            higher_is_better: self.higher_is_better,
            bounded: self.bounded,
        }
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Fold correlation from the explicit value, the training fraction, or
    /// 10-fold cross-validation, in that order.
    pub fn rho(&self) -> Result<RhoEstimate> {
        match (self.rho, self.cv_train_frac) {
            (Some(rho), _) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(bad(format!("rho must lie in (0, 1), got {rho}")));
                }
                Ok(RhoEstimate {
                    rho,
                    clamped: false,
                    nominal: rho,
                })
            }
            (None, Some(f)) => Ok(rho_from_cv(&CvGeometry::from_train_fraction(f)?)),
            (None, None) => Ok(rho_from_cv(&CvGeometry::k_fold(DEFAULT_CV_FOLDS, 1.0)?)),
        }
    }

    pub fn bayes_config(&self) -> Result<(BayesConfig, RhoEstimate)> {
        let rho = self.rho()?;
        let chains = self.chains.max(1);
        let config = BayesConfig {
            rope: self.rope,
            threshold: self.threshold,
            rho: rho.rho,
            sampler: SamplerConfig {
                chains,
                draws_per_chain: self.total_draws.div_ceil(chains),
                burn_in: self.burn_in,
                ..SamplerConfig::default()
            },
            theta_mode: self.theta_mode,
            priors: PriorOverrides::default(),
        };
        Ok((config, rho))
    }
}
