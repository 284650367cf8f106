//! The hierarchical correlated model for per-dataset fold differences.
//!
//! ```text
//! x_i | μ_i, σ_i  ~ MVN(μ_i·1, Σ_i),  Σ_i = σ_i² [(1−ρ) I + ρ J]
//! μ_i | μ₀, σ₀, ν ~ t(μ₀, σ₀, ν)
//! σ_i             ~ Uniform(σ_floor, σ̄)
//! μ₀              ~ Uniform(−1, 1)
//! σ₀              ~ Uniform(0, s̄₀)
//! ν | α, β        ~ Gamma(α, β)         (shape α, rate β)
//! α               ~ Uniform(0.5, 5)
//! β               ~ Uniform(0.05, 0.15)
//! ```

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{CvGeometry, PairDifferences};
use crate::error::{Error, Result};

/// Largest correlation accepted; `n_test >= n_train` would make Σ singular.
pub const RHO_MAX: f64 = 1.0 - 1e-3;

/// Lower bound of every σ_i; keeps the likelihood proper on constant data.
pub const SIGMA_FLOOR: f64 = 1e-6;

/// Multiplier turning an observed spread into an (effectively flat) upper
/// bound for a scale prior.
pub const SCALE_BOUND_FACTOR: f64 = 1000.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho: f64,
    /// The nominal `n_test / n_train` was at least [`RHO_MAX`] and was clamped.
    pub clamped: bool,
    pub nominal: f64,
}

/// Correlation between fold estimates, `n_test / n_train`, clamped to
/// [`RHO_MAX`].
pub fn rho_from_cv(geometry: &CvGeometry) -> RhoEstimate {
    let nominal = geometry.n_test / geometry.n_train;
    if nominal > RHO_MAX {
        log_warning(&format!(
            "n_test/n_train = {nominal} makes the fold covariance singular; using rho = {RHO_MAX}"
        ));
        RhoEstimate {
            rho: RHO_MAX,
            clamped: true,
            nominal,
        }
    } else {
        RhoEstimate {
            rho: nominal,
            clamped: false,
            nominal,
        }
    }
}

fn log_warning(msg: &str) {
    eprintln!("warning: {msg}");
}

/// Log-density of `MVN(μ·1, σ²[(1−ρ)I + ρJ])` at `x`, in O(r).
pub fn cs_gaussian_logpdf(x: &[f64], mu: f64, sigma2: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(DatasetStats::new(x).logpdf(mu, sigma2, rho))
}

/// Sufficient statistics of one dataset's fold differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub r: usize,
    pub mean: f64,
    /// Σ (x_f − mean)².
    pub within_ss: f64,
}

impl DatasetStats {
    pub fn new(x: &[f64]) -> Self {
        let r = x.len();
        let mean = x.iter().sum::<f64>() / r as f64;
        let within_ss = x.iter().map(|v| (v - mean).powi(2)).sum();
        DatasetStats { r, mean, within_ss }
    }

    pub fn sample_sd(&self) -> f64 {
        if self.r < 2 {
            return 0.0;
        }
        (self.within_ss / (self.r - 1) as f64).sqrt()
    }

    pub fn logpdf(&self, mu: f64, sigma2: f64, rho: f64) -> f64 {
        let r = self.r as f64;
        let consts = CsConstants::new(self.r, rho);
        let delta = self.mean - mu;
        let quad = (self.within_ss + r * delta * delta * (1.0 - consts.shrink * r)) / (sigma2 * (1.0 - rho));
        -0.5 * (r * LN_2PI + r * sigma2.ln() + consts.log_det_unit + quad)
    }
}

/// ρ-dependent pieces of the compound-symmetric inverse and determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsConstants {
    /// ρ / (1 + (r−1)ρ): Σ⁻¹ = [I − shrink·J] / (σ²(1−ρ)).
    pub shrink: f64,
    /// log|Σ| − r·log σ².
    pub log_det_unit: f64,
}

impl CsConstants {
    pub fn new(r: usize, rho: f64) -> Self {
        let r = r as f64;
        let denom = 1.0 + (r - 1.0) * rho;
        CsConstants {
            shrink: rho / denom,
            log_det_unit: (r - 1.0) * (1.0 - rho).ln() + denom.ln(),
        }
    }
}

/// Log-density of the location-scale Student t.
pub fn student_t_logpdf(x: f64, loc: f64, scale: f64, nu: f64) -> f64 {
    let z = (x - loc) / scale;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln() - scale.ln()
        - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
}

/// Log-density of Gamma with shape `alpha` and rate `beta`.
pub fn gamma_logpdf(x: f64, alpha: f64, beta: f64) -> f64 {
    alpha * beta.ln() - ln_gamma(alpha) + (alpha - 1.0) * x.ln() - beta * x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// Open interval membership.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn log_uniform_density(&self, x: f64) -> f64 {
        if self.contains(x) {
            -self.width().ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Prior bounds and the fold correlation for one pair comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierPriors {
    pub mu0_bounds: Interval,
    /// s̄₀, upper bound of σ₀.
    pub sigma0_upper: f64,
    /// σ̄, upper bound of every σ_i.
    pub sigma_i_upper: f64,
    pub alpha_bounds: Interval,
    pub beta_bounds: Interval,
    pub rho: f64,
}

impl HierPriors {
    /// Priors scaled to the data.
    ///
    /// σ̄ is 1000 times the mean per-dataset sample standard deviation of the
    /// fold differences; s̄₀ is 1000 times the standard deviation of the
    /// per-dataset mean differences (σ̄ when there is a single dataset). Both
    /// are floored at `1000 · SIGMA_FLOOR` so constant data still yields a
    /// proper prior.
    pub fn from_data(diffs: &PairDifferences, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1), got {rho}")));
        }
        let stats: Vec<DatasetStats> = diffs.per_dataset.iter().map(|x| DatasetStats::new(x)).collect();
        let n = stats.len() as f64;
        let floor = SCALE_BOUND_FACTOR * SIGMA_FLOOR;
        let mean_sd = stats.iter().map(DatasetStats::sample_sd).sum::<f64>() / n;
        let sigma_i_upper = (SCALE_BOUND_FACTOR * mean_sd).max(floor);
        let sigma0_upper = if stats.len() >= 2 {
            let grand = stats.iter().map(|s| s.mean).sum::<f64>() / n;
            let var = stats.iter().map(|s| (s.mean - grand).powi(2)).sum::<f64>() / (n - 1.0);
            (SCALE_BOUND_FACTOR * var.sqrt()).max(floor)
        } else {
            sigma_i_upper
        };
        Ok(HierPriors {
            mu0_bounds: Interval::new(-1.0, 1.0),
            sigma0_upper,
            sigma_i_upper,
            alpha_bounds: Interval::new(0.5, 5.0),
            beta_bounds: Interval::new(0.05, 0.15),
            rho,
        })
    }

    pub fn sigma_i_bounds(&self) -> Interval {
        Interval::new(SIGMA_FLOOR, self.sigma_i_upper)
    }

    pub fn sigma0_bounds(&self) -> Interval {
        Interval::new(0.0, self.sigma0_upper)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0_bounds.lo < self.mu0_bounds.hi
            && self.alpha_bounds.lo < self.alpha_bounds.hi
            && self.beta_bounds.lo > 0.0
            && self.beta_bounds.lo < self.beta_bounds.hi
            && self.alpha_bounds.lo > 0.0
            && self.sigma0_upper > 0.0
            && self.sigma_i_upper > SIGMA_FLOOR
            && self.rho > 0.0
            && self.rho < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("inconsistent prior bounds: {self:?}")))
        }
    }
}

/// One point of the joint parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierState {
    pub mu_i: Vec<f64>,
    pub sigma_i: Vec<f64>,
    pub mu_0: f64,
    pub sigma_0: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl HierState {
    pub fn in_support(&self, priors: &HierPriors) -> bool {
        let si = priors.sigma_i_bounds();
        self.mu_i.iter().all(|m| m.is_finite())
            && self.sigma_i.iter().all(|&s| si.contains(s))
            && priors.mu0_bounds.contains(self.mu_0)
            && priors.sigma0_bounds().contains(self.sigma_0)
            && self.nu > 0.0
            && self.nu.is_finite()
            && priors.alpha_bounds.contains(self.alpha)
            && priors.beta_bounds.contains(self.beta)
    }
}

/// Unnormalized joint log-posterior; `−∞` outside the prior support.
pub fn hier_log_posterior(state: &HierState, diffs: &PairDifferences, priors: &HierPriors) -> f64 {
    if state.mu_i.len() != diffs.n_datasets()
        || state.sigma_i.len() != diffs.n_datasets()
        || !state.in_support(priors)
    {
        return f64::NEG_INFINITY;
    }
    let likelihood: f64 = diffs
        .per_dataset
        .iter()
        .zip(&state.mu_i)
        .zip(&state.sigma_i)
        .map(|((x, &mu), &sigma)| DatasetStats::new(x).logpdf(mu, sigma * sigma, priors.rho))
        .sum();
    let local: f64 = state
        .mu_i
        .iter()
        .map(|&mu| student_t_logpdf(mu, state.mu_0, state.sigma_0, state.nu))
        .sum::<f64>()
        + state
            .sigma_i
            .iter()
            .map(|&s| priors.sigma_i_bounds().log_uniform_density(s))
            .sum::<f64>();
    let hyper = priors.mu0_bounds.log_uniform_density(state.mu_0)
        + priors.sigma0_bounds().log_uniform_density(state.sigma_0)
        + gamma_logpdf(state.nu, state.alpha, state.beta)
        + priors.alpha_bounds.log_uniform_density(state.alpha)
        + priors.beta_bounds.log_uniform_density(state.beta);
    likelihood + local + hyper
}
