//! Bayesian hierarchical correlated t-test over many datasets, with a region
//! of practical equivalence (ROPE) and pairwise decisions.

pub mod diagnostics;
pub mod model;
pub mod sampler;

use rand::Rng;
use rand_distr::StudentT;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::{pair_differences_by_index, PairDifferences, PerfTable};
use crate::decision::{DecisionMatrix, Verdict};
use crate::error::{Error, Result};
use crate::family::{FamilyOfBest, Method};

pub use diagnostics::{diagnostics, Diagnostics, ParamDiagnostic, RHAT_LIMIT};
pub use model::{
    cs_gaussian_logpdf, hier_log_posterior, rho_from_cv, HierPriors, HierState, Interval, RhoEstimate,
};
pub use sampler::{run_mcmc, ChainTrace, Chains, Param, SamplerConfig};

/// Default ROPE half-width on metric differences.
pub const DEFAULT_ROPE: f64 = 0.01;
/// Default posterior probability needed for a verdict.
pub const DEFAULT_THRESHOLD: f64 = 0.95;

/// `θ = (P(x better), P(practically equivalent), P(y better))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
}

impl Theta {
    pub fn swapped(self) -> Theta {
        Theta {
            p_left: self.p_right,
            p_rope: self.p_rope,
            p_right: self.p_left,
        }
    }

    /// The component above `threshold`, if any.
    pub fn verdict(self, threshold: f64) -> Verdict {
        if self.p_left > threshold {
            Verdict::XBetter
        } else if self.p_right > threshold {
            Verdict::YBetter
        } else if self.p_rope > threshold {
            Verdict::Rope
        } else {
            Verdict::NoDecision
        }
    }

    pub fn from_samples(samples: &[f64], rope: f64) -> Theta {
        let (mut left, mut right) = (0usize, 0usize);
        for &d in samples {
            if d > rope {
                left += 1;
            } else if d < -rope {
                right += 1;
            }
        }
        let total = samples.len() as f64;
        let inside = samples.len() - left - right;
        Theta {
            p_left: left as f64 / total,
            p_rope: inside as f64 / total,
            p_right: right as f64 / total,
        }
    }
}

/// Which posterior quantity θ is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Mean difference on a new dataset, μ̃ ~ t(μ₀, σ₀, ν).
    #[default]
    Predictive,
    /// The population mean difference μ₀ itself.
    Mu0,
}

/// Samples of the difference θ is counted over, one per retained draw.
///
/// Predictive draws use their own seed-derived stream, so they are
/// reproducible and do not perturb the chains.
pub fn predictive_samples(chains: &Chains, mode: ThetaMode, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(chains.total_draws());
    match mode {
        ThetaMode::Mu0 => {
            for t in &chains.chains {
                out.extend_from_slice(&t.mu_0);
            }
        }
        ThetaMode::Predictive => {
            let mut rng = sampler::chain_rng(seed, u64::MAX);
            for t in &chains.chains {
                for ((&mu, &sigma), &nu) in t.mu_0.iter().zip(&t.sigma_0).zip(&t.nu) {
                    let z: f64 = rng.sample(StudentT::new(nu).expect("nu > 0"));
                    out.push(mu + sigma * z);
                }
            }
        }
    }
    out
}

pub fn posterior_theta(chains: &Chains, rope: f64, mode: ThetaMode, seed: u64) -> Theta {
    Theta::from_samples(&predictive_samples(chains, mode, seed), rope)
}

/// θ implied by single retained draws: where the mean difference on a new
/// dataset falls given that draw's (μ₀, σ₀, ν). These are the points of a
/// posterior simplex plot. At most `max_points` draws are used, evenly spaced.
pub fn draw_thetas(chains: &Chains, rope: f64, max_points: usize) -> Vec<Theta> {
    let total = chains.total_draws();
    let stride = total.div_ceil(max_points.max(1)).max(1);
    chains
        .chains
        .iter()
        .flat_map(|t| t.mu_0.iter().zip(&t.sigma_0).zip(&t.nu))
        .step_by(stride)
        .map(|((&mu, &sigma), &nu)| {
            let t = StudentsT::new(0.0, 1.0, nu).expect("nu > 0");
            let p_left = t.cdf((mu - rope) / sigma);
            let p_right = t.cdf((-rope - mu) / sigma);
            Theta {
                p_left,
                p_rope: (1.0 - p_left - p_right).max(0.0),
                p_right,
            }
        })
        .collect()
}

/// Optional replacements for the data-derived prior bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorOverrides {
    pub sigma0_upper: Option<f64>,
    pub sigma_i_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesConfig {
    pub rope: f64,
    pub threshold: f64,
    pub rho: f64,
    pub sampler: SamplerConfig,
    pub theta_mode: ThetaMode,
    pub priors: PriorOverrides,
}

impl BayesConfig {
    pub fn new(rho: f64) -> Self {
        BayesConfig {
            rope: DEFAULT_ROPE,
            threshold: DEFAULT_THRESHOLD,
            rho,
            sampler: SamplerConfig::default(),
            theta_mode: ThetaMode::default(),
            priors: PriorOverrides::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rope > 0.0 && self.rope.is_finite()) {
            return Err(Error::InvalidArgument(format!("rope must be positive, got {}", self.rope)));
        }
        if !(self.threshold > 0.5 && self.threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "decision threshold must lie in (0.5, 1], got {}",
                self.threshold
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        self.sampler.validate()
    }

    pub fn priors_for(&self, diffs: &PairDifferences) -> Result<HierPriors> {
        let mut p = HierPriors::from_data(diffs, self.rho)?;
        if let Some(v) = self.priors.sigma0_upper {
            p.sigma0_upper = v;
        }
        if let Some(v) = self.priors.sigma_i_upper {
            p.sigma_i_upper = v;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Full result of one pairwise comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPosterior {
    pub model_x: String,
    pub model_y: String,
    pub priors: HierPriors,
    pub chains: Chains,
    /// Differences θ was counted over, oriented as `x − y`.
    pub samples: Vec<f64>,
    pub theta: Theta,
    pub rope_halfwidth: f64,
    pub diagnostics: Diagnostics,
    pub seed: u64,
}

impl PairPosterior {
    pub fn reliable(&self) -> bool {
        self.diagnostics.converged()
    }

    pub fn summary(&self) -> PairSummary {
        PairSummary {
            model_x: self.model_x.clone(),
            model_y: self.model_y.clone(),
            theta: self.theta,
            max_rhat: self.diagnostics.max_rhat(),
            min_ess: self.diagnostics.min_ess(),
            reliable: self.reliable(),
            seed: self.seed,
        }
    }
}

/// Compact per-pair record kept for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub model_x: String,
    pub model_y: String,
    pub theta: Theta,
    pub max_rhat: Option<f64>,
    pub min_ess: f64,
    pub reliable: bool,
    pub seed: u64,
}

/// Seed of the unordered pair `{a, b}`: the master seed XOR a stable hash of
/// the two ids.
pub fn pair_seed(seed: u64, a: &str, b: &str) -> u64 {
    let (first, second) = if a <= b { (a, b) } else { (b, a) };
    let mut h = Sha256::new();
    h.update(first.as_bytes());
    h.update([0u8]);
    h.update(second.as_bytes());
    let digest = h.finalize();
    seed ^ u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Samples the posterior for one pair.
///
/// The chain always runs on the pair in table order, so comparing `(y, x)`
/// gives exactly the mirrored result of `(x, y)`.
pub fn compare_pair(table: &PerfTable, x: &str, y: &str, config: &BayesConfig, seed: u64) -> Result<PairPosterior> {
    if x == y {
        return Err(Error::SameModel(x.to_string()));
    }
    let xi = table.model_index(x).ok_or_else(|| Error::UnknownModel(x.to_string()))?;
    let yi = table.model_index(y).ok_or_else(|| Error::UnknownModel(y.to_string()))?;
    let (a, b) = if xi < yi { (xi, yi) } else { (yi, xi) };
    let diffs = pair_differences_by_index(table, a, b);
    let pair_seed = pair_seed(seed, x, y);
    let posterior = compare_differences(&diffs, config, pair_seed)?;
    Ok(if xi < yi { posterior } else { posterior.swapped() })
}

/// Posterior for an explicit set of differences, with `seed` used as given.
pub fn compare_differences(diffs: &PairDifferences, config: &BayesConfig, seed: u64) -> Result<PairPosterior> {
    config.validate()?;
    let priors = config.priors_for(diffs)?;
    let chains = run_mcmc(diffs, &priors, &config.sampler, seed)?;
    let diagnostics = diagnostics(&chains);
    let samples = predictive_samples(&chains, config.theta_mode, seed);
    let theta = Theta::from_samples(&samples, config.rope);
    Ok(PairPosterior {
        model_x: diffs.model_x.clone(),
        model_y: diffs.model_y.clone(),
        priors,
        chains,
        samples,
        theta,
        rope_halfwidth: config.rope,
        diagnostics,
        seed,
    })
}

impl PairPosterior {
    /// The same posterior seen from the other model's side.
    pub fn swapped(self) -> PairPosterior {
        PairPosterior {
            model_x: self.model_y,
            model_y: self.model_x,
            samples: self.samples.iter().map(|d| -d).collect(),
            theta: self.theta.swapped(),
            chains: Chains {
                n_datasets: self.chains.n_datasets,
                chains: self
                    .chains
                    .chains
                    .into_iter()
                    .map(|mut t| {
                        t.mu_0.iter_mut().for_each(|m| *m = -*m);
                        t.mu_i.iter_mut().for_each(|m| *m = -*m);
                        t
                    })
                    .collect(),
            },
            ..self
        }
    }
}

/// Decision matrix plus the per-pair records behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesAnalysis {
    pub matrix: DecisionMatrix,
    /// Upper-triangle pairs `(i, j)`, `i < j`, in row-major order.
    pub pairs: Vec<PairSummary>,
    /// Pairs whose verdict was forced to no-decision by R̂.
    pub unreliable: Vec<(String, String)>,
}

/// Compares every pair of models.
///
/// Pairs run independently on `jobs` threads (all cores when `None`); each
/// uses [`pair_seed`], so results do not depend on scheduling.
pub fn bayes_decision_matrix(
    table: &PerfTable,
    config: &BayesConfig,
    seed: u64,
    jobs: Option<usize>,
) -> Result<BayesAnalysis> {
    config.validate()?;
    let k = table.n_models();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two models".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let models = table.models();
    let run = || {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let diffs = pair_differences_by_index(table, i, j);
                compare_differences(&diffs, config, pair_seed(seed, &models[i], &models[j]))
                    .map(|p| p.summary())
            })
            .collect::<Result<Vec<_>>>()
    };
    let summaries = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let mut cells = vec![vec![Verdict::Rope; k]; k];
    let mut unreliable = Vec::new();
    for (&(i, j), s) in pairs.iter().zip(&summaries) {
        let v = if s.reliable {
            s.theta.verdict(config.threshold)
        } else {
            unreliable.push((s.model_x.clone(), s.model_y.clone()));
            Verdict::NoDecision
        };
        cells[i][j] = v;
        cells[j][i] = v.transposed();
    }
    Ok(BayesAnalysis {
        matrix: DecisionMatrix {
            models: models.to_vec(),
            cells,
            threshold: config.threshold,
        },
        pairs: summaries,
        unreliable,
    })
}

/// The model with the best overall mean plus every model decided to be
/// practically equivalent to it, best first.
pub fn bayes_family(matrix: &DecisionMatrix, means: &[f64], higher_is_better: bool) -> FamilyOfBest {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| {
        let c = means[b].total_cmp(&means[a]);
        if higher_is_better { c } else { c.reverse() }
    });
    let top = order[0];
    let members = order
        .into_iter()
        .filter(|&j| j == top || matrix.cells[top][j] == Verdict::Rope)
        .map(|j| matrix.models[j].clone())
        .collect();
    FamilyOfBest::new(Method::Bayes, members)
}
