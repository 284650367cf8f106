//! Synthetic data with known ground truth, and calibration experiments built
//! on it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bayes::{compare_differences, BayesConfig, Param, Theta};
use crate::data::{FoldId, MetricSpec, PairDifferences, PerfTable};
use crate::decision::Verdict;
use crate::error::{Error, Result};
use crate::nhst::friedman_statistic;
use crate::rank::{naive_best, table_ranks};

/// Parameters of the hierarchical generative model for one pair of models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_datasets: usize,
    pub n_folds: usize,
    pub mu_0: f64,
    pub sigma_0: f64,
    /// Degrees of freedom of the t law of μ_i; above 2.
    pub nu: f64,
    /// σ_i is drawn uniformly from `(0.5, 1.5) · sigma_i_scale`.
    pub sigma_i_scale: f64,
    pub rho: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            n_datasets: 20,
            n_folds: 10,
            mu_0: 0.0,
            sigma_0: 0.01,
            nu: 5.0,
            sigma_i_scale: 0.02,
            rho: 0.1,
            seed: 0,
        }
    }
}

impl GenSpec {
    /// Zero scales are allowed and give the noiseless limits.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        if self.n_datasets == 0 || self.n_folds < 2 {
            return bad(format!(
                "need at least 1 dataset and 2 folds, got {} and {}",
                self.n_datasets, self.n_folds
            ));
        }
        if !(self.nu > 2.0 && self.nu.is_finite()) {
            return bad(format!("nu must exceed 2, got {}", self.nu));
        }
        if !(self.sigma_0 >= 0.0 && self.sigma_0.is_finite()) {
            return bad(format!("sigma_0 must be non-negative, got {}", self.sigma_0));
        }
        if !(self.sigma_i_scale >= 0.0 && self.sigma_i_scale.is_finite()) {
            return bad(format!("sigma_i_scale must be non-negative, got {}", self.sigma_i_scale));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !self.mu_0.is_finite() {
            return bad("mu_0 must be finite".into());
        }
        Ok(())
    }
}

/// The latent values behind one generated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mu_0: f64,
    pub sigma_0: f64,
    pub nu: f64,
    pub mu_i: Vec<f64>,
    pub sigma_i: Vec<f64>,
    pub rho: f64,
}

/// Fills `out` with one draw of `MVN(mu·1, σ²[(1−ρ)I + ρJ])` using a shared
/// scalar shock plus independent noise.
pub(crate) fn draw_cs_vector<R: Rng + ?Sized>(rng: &mut R, mu: f64, sigma: f64, rho: f64, out: &mut [f64]) {
    let g: f64 = rng.sample(StandardNormal);
    let shared = rho.sqrt() * g;
    let own = (1.0 - rho).sqrt();
    for x in out.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *x = mu + sigma * (shared + own * e);
    }
}

/// One draw from t(loc, scale, ν) as a normal over the root of a scaled χ².
fn draw_t<R: Rng + ?Sized>(rng: &mut R, loc: f64, scale: f64, nu: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let c: f64 = ChiSquared::new(nu).expect("nu > 0").sample(rng);
    loc + scale * z / (c / nu).sqrt()
}

/// Differences for one synthetic pair, named `x` and `y`, plus the truth.
pub fn generate_pair_differences(spec: &GenSpec) -> Result<(PairDifferences, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_datasets;
    let mut mu_i = Vec::with_capacity(n);
    let mut sigma_i = Vec::with_capacity(n);
    let mut per_dataset = Vec::with_capacity(n);
    for _ in 0..n {
        let mu = draw_t(&mut rng, spec.mu_0, spec.sigma_0, spec.nu);
        let sigma = spec.sigma_i_scale * rng.random_range(0.5..1.5);
        let mut x = vec![0.0; spec.n_folds];
        draw_cs_vector(&mut rng, mu, sigma, spec.rho, &mut x);
        mu_i.push(mu);
        sigma_i.push(sigma);
        per_dataset.push(x);
    }
    let diffs = PairDifferences {
        model_x: "x".into(),
        model_y: "y".into(),
        per_dataset,
    };
    let truth = GroundTruth {
        mu_0: spec.mu_0,
        sigma_0: spec.sigma_0,
        nu: spec.nu,
        mu_i,
        sigma_i,
        rho: spec.rho,
    };
    Ok((diffs, truth))
}

/// Noise SD of the null tables.
pub const NULL_NOISE_SD: f64 = 0.02;

/// An AUC table where every model's scores are exchangeable: a per-dataset
/// baseline from U(0.6, 0.9) plus i.i.d. normal noise, clamped to [0, 1].
pub fn generate_null_table(n_datasets: usize, n_models: usize, n_folds: usize, seed: u64) -> Result<PerfTable> {
    if n_datasets == 0 || n_models < 2 || n_folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "null table needs N >= 1, k >= 2, r >= 2; got {n_datasets}, {n_models}, {n_folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n_datasets)
        .map(|_| {
            let base = rng.random_range(0.6..0.9);
            (0..n_models)
                .map(|_| {
                    (0..n_folds)
                        .map(|_| {
                            let e: f64 = rng.sample(StandardNormal);
                            (base + NULL_NOISE_SD * e).clamp(0.0, 1.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    PerfTable::from_grid(
        (1..=n_datasets).map(|i| format!("d{i}")).collect(),
        (1..=n_models).map(|j| format!("m{j}")).collect(),
        (1..=n_folds)
            .map(|f| FoldId::new(f as u32, 1).expect("positive"))
            .collect(),
        values,
        MetricSpec::auc(),
    )
}

/// Seed of replicate `index` of an experiment seeded with `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// How often each method "finds" something on tables with no real
/// differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullCalibration {
    pub runs: usize,
    pub n_datasets: usize,
    pub n_models: usize,
    pub n_folds: usize,
    pub alpha: f64,
    pub seed: u64,
    pub friedman_rejections: usize,
    pub friedman_rejection_rate: f64,
    /// Tables where the naive method named a single best model.
    pub naive_unique_best: usize,
    pub naive_unique_best_rate: f64,
}

pub fn null_calibration(
    n_datasets: usize,
    n_models: usize,
    n_folds: usize,
    runs: usize,
    alpha: f64,
    seed: u64,
) -> Result<NullCalibration> {
    if runs == 0 {
        return Err(Error::InvalidArgument("at least one run is required".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let outcomes = (0..runs as u64)
        .into_par_iter()
        .map(|j| {
            let table = generate_null_table(n_datasets, n_models, n_folds, replicate_seed(seed, j))?;
            let friedman = friedman_statistic(&table_ranks(&table))?;
            Ok((friedman.rejects(alpha), naive_best(&table).is_ok()))
        })
        .collect::<Result<Vec<(bool, bool)>>>()?;
    let rejections = outcomes.iter().filter(|o| o.0).count();
    let unique = outcomes.iter().filter(|o| o.1).count();
    Ok(NullCalibration {
        runs,
        n_datasets,
        n_models,
        n_folds,
        alpha,
        seed,
        friedman_rejections: rejections,
        friedman_rejection_rate: rejections as f64 / runs as f64,
        naive_unique_best: unique,
        naive_unique_best_rate: unique as f64 / runs as f64,
    })
}

/// Outcome of one synthetic run of the Bayesian test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRun {
    pub index: usize,
    pub true_mu_0: f64,
    pub interval: (f64, f64),
    pub covered: bool,
    pub theta: Theta,
    pub verdict: Verdict,
    pub max_rhat: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub spec: GenSpec,
    pub runs: usize,
    /// Runs where sampling itself failed; excluded from every rate below.
    pub failures: usize,
    pub credible_level: f64,
    /// Fraction of runs whose central credible interval for μ₀ holds the truth.
    pub coverage: f64,
    /// Fraction of runs with all R̂ at or below the limit.
    pub converged_fraction: f64,
    /// Fraction of runs with any verdict other than no-decision.
    pub decided_fraction: f64,
    pub x_better_fraction: f64,
    pub y_better_fraction: f64,
    pub rope_fraction: f64,
    pub mean_p_left: f64,
    pub mean_p_rope: f64,
    pub mean_p_right: f64,
    pub details: Vec<CoverageRun>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Generates `runs` data sets from `spec` (replicate seeds derived from
/// `spec.seed`), fits each with `config`, and summarizes interval coverage of
/// μ₀ and the verdicts reached.
pub fn coverage_experiment(spec: &GenSpec, runs: usize, config: &BayesConfig) -> Result<CoverageSummary> {
    const LEVEL: f64 = 0.90;
    spec.validate()?;
    config.validate()?;
    if runs == 0 {
        return Err(Error::InvalidArgument("at least one run is required".into()));
    }
    let results: Vec<Option<CoverageRun>> = (0..runs)
        .into_par_iter()
        .map(|j| {
            let mut seeds = ChaCha8Rng::seed_from_u64(replicate_seed(spec.seed, j as u64));
            let run_spec = GenSpec {
                seed: seeds.next_u64(),
                ..spec.clone()
            };
            let (diffs, truth) = generate_pair_differences(&run_spec).ok()?;
            let post = compare_differences(&diffs, config, seeds.next_u64()).ok()?;
            let mut mu0: Vec<f64> = post.chains.scalar(Param::Mu0).concat();
            mu0.sort_unstable_by(f64::total_cmp);
            let tail = (1.0 - LEVEL) / 2.0;
            let interval = (quantile_sorted(&mu0, tail), quantile_sorted(&mu0, 1.0 - tail));
            Some(CoverageRun {
                index: j,
                true_mu_0: truth.mu_0,
                interval,
                covered: interval.0 <= truth.mu_0 && truth.mu_0 <= interval.1,
                theta: post.theta,
                verdict: post.theta.verdict(config.threshold),
                max_rhat: post.diagnostics.max_rhat(),
                converged: post.diagnostics.converged(),
            })
        })
        .collect();
    let details: Vec<CoverageRun> = results.into_iter().flatten().collect();
    let done = details.len();
    let rate = |f: &dyn Fn(&CoverageRun) -> bool| {
        if done == 0 {
            0.0
        } else {
            details.iter().filter(|r| f(r)).count() as f64 / done as f64
        }
    };
    let mean = |f: &dyn Fn(&CoverageRun) -> f64| {
        if done == 0 {
            0.0
        } else {
            details.iter().map(f).sum::<f64>() / done as f64
        }
    };
    Ok(CoverageSummary {
        spec: spec.clone(),
        runs,
        failures: runs - done,
        credible_level: LEVEL,
        coverage: rate(&|r| r.covered),
        converged_fraction: rate(&|r| r.converged),
        decided_fraction: rate(&|r| r.verdict.is_decided()),
        x_better_fraction: rate(&|r| r.verdict == Verdict::XBetter),
        y_better_fraction: rate(&|r| r.verdict == Verdict::YBetter),
        rope_fraction: rate(&|r| r.verdict == Verdict::Rope),
        mean_p_left: mean(&|r| r.theta.p_left),
        mean_p_rope: mean(&|r| r.theta.p_rope),
        mean_p_right: mean(&|r| r.theta.p_right),
        details,
    })
}

/// Closed-form θ of the correlated t-test on a single dataset: the mean
/// difference has a Student posterior with location x̄, squared scale
/// `(1/r + ρ/(1−ρ)) s²` and `r − 1` degrees of freedom.
///
/// With zero sample variance the posterior collapses onto x̄ and θ is an
/// indicator.
pub fn single_dataset_oracle(x: &[f64], rho: f64, rope: f64) -> Result<Theta> {
    let r = x.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, found {r}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(rope >= 0.0 && rope.is_finite()) {
        return Err(Error::InvalidArgument(format!("rope must be non-negative, got {rope}")));
    }
    let rf = r as f64;
    let mean = x.iter().sum::<f64>() / rf;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rf - 1.0);
    if var == 0.0 {
        let (p_left, p_right) = (f64::from(u8::from(mean > rope)), f64::from(u8::from(mean < -rope)));
        return Ok(Theta {
            p_left,
            p_rope: 1.0 - p_left - p_right,
            p_right,
        });
    }
    let scale = ((1.0 / rf + rho / (1.0 - rho)) * var).sqrt();
    let t = StudentsT::new(0.0, 1.0, rf - 1.0).expect("valid t");
    let p_left = t.cdf((mean - rope) / scale);
    let p_right = t.cdf((-rope - mean) / scale);
    Ok(Theta {
        p_left,
        p_rope: (1.0 - p_left - p_right).max(0.0),
        p_right,
    })
}
