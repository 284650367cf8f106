//! Adaptive one-coordinate-at-a-time random-walk Metropolis for the
//! hierarchical model.
//!
//! Locations (μ_i, μ₀, α, β) are proposed on their natural scale; the scales
//! σ_i, σ₀ and ν are proposed on the log scale with the matching Jacobian.
//! Each sweep ends with two joint moves that shift all of μ₀, μ_i together and
//! rescale σ₀ with every μ_i − μ₀; they keep the sampler moving when σ₀ is
//! small and the μ_i are tied tightly to μ₀.
//! Step sizes adapt in batches during burn-in only and are frozen afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::model::{CsConstants, DatasetStats, HierPriors, HierState, SIGMA_FLOOR};
use crate::data::PairDifferences;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Retained draws per chain, after burn-in.
    pub draws_per_chain: usize,
    pub burn_in: usize,
    /// Iterations between step-size adjustments during burn-in.
    pub adapt_batch: usize,
    /// Keep μ_i and σ_i traces (memory grows with the number of datasets).
    pub retain_local: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            draws_per_chain: 12_500,
            burn_in: 2_500,
            adapt_batch: 50,
            retain_local: false,
        }
    }
}

impl SamplerConfig {
    /// Splits `total_draws` evenly across `chains`.
    pub fn with_total_draws(chains: usize, total_draws: usize, burn_in: usize) -> Self {
        SamplerConfig {
            chains,
            draws_per_chain: total_draws.div_ceil(chains.max(1)),
            burn_in,
            ..SamplerConfig::default()
        }
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.draws_per_chain
    }

    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws_per_chain < 4 || self.adapt_batch == 0 {
            return Err(Error::InvalidArgument(format!(
                "sampler needs >= 1 chain, >= 4 draws per chain and a positive adaptation batch: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Retained draws of one chain, one vector per scalar hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub mu_0: Vec<f64>,
    pub sigma_0: Vec<f64>,
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `draws × N`, row-major; empty unless local traces were requested.
    pub mu_i: Vec<f64>,
    pub sigma_i: Vec<f64>,
    /// Post-burn-in acceptance rate of each coordinate, in update order
    /// (μ_1..μ_N, σ_1..σ_N, μ₀, σ₀, ν, α, β, joint shift, joint scale).
    pub acceptance: Vec<f64>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.mu_0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_0.is_empty()
    }
}

/// Draws from every chain of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    pub n_datasets: usize,
    pub chains: Vec<ChainTrace>,
}

impl Chains {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, ChainTrace::len)
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(ChainTrace::len).sum()
    }

    pub fn has_local(&self) -> bool {
        self.chains.first().is_some_and(|c| !c.mu_i.is_empty())
    }

    /// Draw `s` of chain `c` as a full state; local parameters are empty
    /// unless retained.
    pub fn state(&self, c: usize, s: usize) -> HierState {
        let t = &self.chains[c];
        let n = self.n_datasets;
        let local = |v: &Vec<f64>| {
            if v.is_empty() {
                Vec::new()
            } else {
                v[s * n..(s + 1) * n].to_vec()
            }
        };
        HierState {
            mu_i: local(&t.mu_i),
            sigma_i: local(&t.sigma_i),
            mu_0: t.mu_0[s],
            sigma_0: t.sigma_0[s],
            nu: t.nu[s],
            alpha: t.alpha[s],
            beta: t.beta[s],
        }
    }

    /// Pooled draws of one named scalar parameter, chain by chain.
    pub fn scalar(&self, param: Param) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|t| match param {
                Param::Mu0 => t.mu_0.clone(),
                Param::Sigma0 => t.sigma_0.clone(),
                Param::Nu => t.nu.clone(),
                Param::Alpha => t.alpha.clone(),
                Param::Beta => t.beta.clone(),
                Param::MuI(i) => t.mu_i.iter().skip(i).step_by(self.n_datasets).copied().collect(),
                Param::SigmaI(i) => t.sigma_i.iter().skip(i).step_by(self.n_datasets).copied().collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    Mu0,
    Sigma0,
    Nu,
    Alpha,
    Beta,
    MuI(usize),
    SigmaI(usize),
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Param::Mu0 => f.write_str("mu_0"),
            Param::Sigma0 => f.write_str("sigma_0"),
            Param::Nu => f.write_str("nu"),
            Param::Alpha => f.write_str("alpha"),
            Param::Beta => f.write_str("beta"),
            Param::MuI(i) => write!(f, "mu_{}", i + 1),
            Param::SigmaI(i) => write!(f, "sigma_{}", i + 1),
        }
    }
}

/// Generator used inside the sampler.
pub(crate) type ChainRng = Xoshiro256PlusPlus;

/// RNG for chain `chain` of a run seeded with `seed`: a fast generator keyed
/// from stream `chain` of ChaCha8, so chains never share a sequence.
pub(crate) fn chain_rng(seed: u64, chain: u64) -> ChainRng {
    let mut keyed = ChaCha8Rng::seed_from_u64(seed);
    keyed.set_stream(chain);
    Xoshiro256PlusPlus::from_rng(&mut keyed)
}

/// `Σ ln(1 + t)` over non-negative terms with one logarithm per block of
/// terms instead of one per term.
fn sum_ln_1p(terms: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    let mut prod = 1.0;
    for t in terms {
        prod *= 1.0 + t;
        if prod > 1e250 {
            acc += prod.ln();
            prod = 1.0;
        }
    }
    acc + prod.ln()
}

/// Per-dataset constants of the likelihood as a function of (μ_i, σ_i²).
#[derive(Debug, Clone, Copy)]
struct Local {
    mean: f64,
    within: f64,
    /// r (1 − c r) / (1 − ρ): weight of (mean − μ)² in the quadratic form.
    between_weight: f64,
    r: f64,
}

impl Local {
    fn new(stats: &DatasetStats, rho: f64) -> Self {
        let cs = CsConstants::new(stats.r, rho);
        let r = stats.r as f64;
        Local {
            mean: stats.mean,
            within: stats.within_ss / (1.0 - rho),
            between_weight: r * (1.0 - cs.shrink * r) / (1.0 - rho),
            r,
        }
    }

    fn quad(&self, mu: f64) -> f64 {
        let d = self.mean - mu;
        self.within + self.between_weight * d * d
    }
}

/// Metropolis test: accept with probability min(1, exp(log_ratio)).
fn metropolis(rng: &mut ChainRng, log_ratio: f64) -> bool {
    if log_ratio >= 0.0 {
        true
    } else if log_ratio.is_nan() {
        false
    } else {
        let e: f64 = rng.sample(Exp1);
        log_ratio > -e
    }
}

struct Sampler<'a> {
    priors: &'a HierPriors,
    locals: Vec<Local>,
    state: HierState,
    /// σ_i² of the current state.
    var_i: Vec<f64>,
    /// Σ_i ln(1 + (μ_i − μ₀)² / (ν σ₀²)) of the current state.
    t_sum: f64,
    ln_nu: f64,
    log_steps: Vec<f64>,
    accepted: Vec<u32>,
    /// exp(log_steps), refreshed after every adaptation.
    steps: Vec<f64>,
    rng: ChainRng,
}

const IDX_MU0: usize = 0;
const IDX_SIGMA0: usize = 1;
const IDX_NU: usize = 2;
const IDX_ALPHA: usize = 3;
const IDX_BETA: usize = 4;
const IDX_SHIFT: usize = 5;
const IDX_SCALE: usize = 6;

impl<'a> Sampler<'a> {
    fn n(&self) -> usize {
        self.locals.len()
    }

    fn hyper_slot(&self, idx: usize) -> usize {
        2 * self.n() + idx
    }

    fn t_terms_sum(&self, mu_0: f64, sigma_0: f64, nu: f64) -> f64 {
        let scale = 1.0 / (nu * sigma_0 * sigma_0);
        sum_ln_1p(self.state.mu_i.iter().map(|&m| {
            let d = m - mu_0;
            d * d * scale
        }))
    }

    /// N · [lnΓ((ν+1)/2) − lnΓ(ν/2) − ½ ln ν] + Gamma(ν; α, β) without the
    /// α, β normalizer, plus the log-scale Jacobian.
    fn nu_terms(&self, nu: f64, ln_nu: f64) -> f64 {
        let n = self.n() as f64;
        n * (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * ln_nu)
            + self.state.alpha * ln_nu
            - self.state.beta * nu
    }

    fn accept(&mut self, log_ratio: f64, slot: usize) -> bool {
        let ok = metropolis(&mut self.rng, log_ratio);
        if ok {
            self.accepted[slot] += 1;
        }
        ok
    }

    fn proposal_step(&mut self, slot: usize) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.steps[slot] * z
    }

    fn sweep(&mut self) {
        let n = self.n();
        let nu = self.state.nu;
        let half_nu1 = 0.5 * (nu + 1.0);

        // μ_i
        let nu_s2 = nu * self.state.sigma_0 * self.state.sigma_0;
        let mu_0 = self.state.mu_0;
        let rng = &mut self.rng;
        let mut t_delta = 0.0;
        for ((((mu, l), &var), &step), acc) in self
            .state
            .mu_i
            .iter_mut()
            .zip(&self.locals)
            .zip(&self.var_i)
            .zip(&self.steps[..n])
            .zip(&mut self.accepted[..n])
        {
            let z: f64 = rng.sample(StandardNormal);
            let prop = *mu + step * z;
            let d_cur = *mu - mu_0;
            let d_prop = prop - mu_0;
            let t_ratio = ((nu_s2 + d_prop * d_prop) / (nu_s2 + d_cur * d_cur)).ln();
            let lik = -0.5 * (l.quad(prop) - l.quad(*mu)) / var;
            if metropolis(rng, lik - half_nu1 * t_ratio) {
                *mu = prop;
                t_delta += t_ratio;
                *acc += 1;
            }
        }
        self.t_sum += t_delta;

        // σ_i on the log scale:
        // −(r/2)·Δ ln σ² − (q/2)·Δ(1/σ²) + Δ ln σ
        let bounds = self.priors.sigma_i_bounds();
        for ((((sigma, var), (l, &mu)), &scale), acc) in self
            .state
            .sigma_i
            .iter_mut()
            .zip(self.var_i.iter_mut())
            .zip(self.locals.iter().zip(&self.state.mu_i))
            .zip(&self.steps[n..2 * n])
            .zip(&mut self.accepted[n..2 * n])
        {
            let z: f64 = rng.sample(StandardNormal);
            let step = scale * z;
            let prop = *sigma * step.exp();
            if !bounds.contains(prop) {
                continue;
            }
            let var_prop = prop * prop;
            let q = l.quad(mu);
            let lr = (1.0 - l.r) * step - 0.5 * q * (1.0 / var_prop - 1.0 / *var);
            if metropolis(rng, lr) {
                *sigma = prop;
                *var = var_prop;
                *acc += 1;
            }
        }

        // μ₀
        let slot = self.hyper_slot(IDX_MU0);
        let step = self.proposal_step(slot);
        let prop = self.state.mu_0 + step;
        if self.priors.mu0_bounds.contains(prop) {
            let sum = self.t_terms_sum(prop, self.state.sigma_0, nu);
            if self.accept(-half_nu1 * (sum - self.t_sum), slot) {
                self.state.mu_0 = prop;
                self.t_sum = sum;
            }
        }

        // σ₀ on the log scale
        let slot = self.hyper_slot(IDX_SIGMA0);
        let step = self.proposal_step(slot);
        let prop = self.state.sigma_0 * step.exp();
        if self.priors.sigma0_bounds().contains(prop) {
            let sum = self.t_terms_sum(self.state.mu_0, prop, nu);
            let lr = -(n as f64) * step - half_nu1 * (sum - self.t_sum) + step;
            if self.accept(lr, slot) {
                self.state.sigma_0 = prop;
                self.t_sum = sum;
            }
        }

        // ν on the log scale
        let slot = self.hyper_slot(IDX_NU);
        let step = self.proposal_step(slot);
        let ln_prop = self.ln_nu + step;
        let prop = ln_prop.exp();
        if prop > 0.0 && prop.is_finite() {
            let sum = self.t_terms_sum(self.state.mu_0, self.state.sigma_0, prop);
            let lr = self.nu_terms(prop, ln_prop) - 0.5 * (prop + 1.0) * sum
                - (self.nu_terms(nu, self.ln_nu) - half_nu1 * self.t_sum);
            if self.accept(lr, slot) {
                self.state.nu = prop;
                self.ln_nu = ln_prop;
                self.t_sum = sum;
            }
        }

        // α
        let slot = self.hyper_slot(IDX_ALPHA);
        let step = self.proposal_step(slot);
        let prop = self.state.alpha + step;
        if self.priors.alpha_bounds.contains(prop) {
            let ln_beta = self.state.beta.ln();
            let term = |a: f64| a * ln_beta - ln_gamma(a) + (a - 1.0) * self.ln_nu;
            let lr = term(prop) - term(self.state.alpha);
            if self.accept(lr, slot) {
                self.state.alpha = prop;
            }
        }

        // β
        let slot = self.hyper_slot(IDX_BETA);
        let step = self.proposal_step(slot);
        let prop = self.state.beta + step;
        if self.priors.beta_bounds.contains(prop) {
            let lr = self.state.alpha * (prop / self.state.beta).ln() - (prop - self.state.beta) * self.state.nu;
            if self.accept(lr, slot) {
                self.state.beta = prop;
            }
        }

        // μ₀ and every μ_i shifted together; the t terms do not change
        let slot = self.hyper_slot(IDX_SHIFT);
        let delta = self.proposal_step(slot);
        if self.priors.mu0_bounds.contains(self.state.mu_0 + delta) {
            let lr = self.joint_loglik_change(|m| m + delta);
            if self.accept(lr, slot) {
                self.state.mu_0 += delta;
                self.state.mu_i.iter_mut().for_each(|m| *m += delta);
            }
        }

        // σ₀ and every μ_i − μ₀ scaled together by e^s; the t terms do not
        // change and the Jacobian e^{(N+1)s} against σ₀^{-N} leaves e^s
        let slot = self.hyper_slot(IDX_SCALE);
        let step = self.proposal_step(slot);
        let factor = step.exp();
        let prop = self.state.sigma_0 * factor;
        if self.priors.sigma0_bounds().contains(prop) {
            let mu_0 = self.state.mu_0;
            let lr = self.joint_loglik_change(|m| mu_0 + factor * (m - mu_0)) + step;
            if self.accept(lr, slot) {
                self.state.sigma_0 = prop;
                self.state.mu_i.iter_mut().for_each(|m| *m = mu_0 + factor * (*m - mu_0));
            }
        }
    }

    /// Change of the summed likelihood when every μ_i is mapped by `f`.
    fn joint_loglik_change(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.locals
            .iter()
            .zip(&self.state.mu_i)
            .zip(&self.var_i)
            .map(|((l, &m), &var)| -0.5 * (l.quad(f(m)) - l.quad(m)) / var)
            .sum()
    }

    fn adapt(&mut self, batch: usize, batch_index: usize) {
        let delta = (1.0 / (batch_index as f64).sqrt()).max(0.05);
        for (log_step, acc) in self.log_steps.iter_mut().zip(self.accepted.iter_mut()) {
            let rate = f64::from(*acc) / batch as f64;
            if rate < 0.25 {
                *log_step -= delta;
            } else if rate > 0.45 {
                *log_step += delta;
            }
            *acc = 0;
        }
        for (s, l) in self.steps.iter_mut().zip(&self.log_steps) {
            *s = l.exp();
        }
    }
}

/// Overdispersed starting point around per-dataset summaries, and initial
/// step sizes (log scale) for every coordinate.
fn initial_point(
    stats: &[DatasetStats],
    priors: &HierPriors,
    rng: &mut ChainRng,
) -> (HierState, Vec<f64>) {
    let rho = priors.rho;
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let n = stats.len();
    let se_factor = (1.0 / stats[0].r as f64 + rho / (1.0 - rho)).sqrt();
    let si = priors.sigma_i_bounds();

    let mut mu_i = Vec::with_capacity(n);
    let mut sigma_i = Vec::with_capacity(n);
    let mut mu_steps = Vec::with_capacity(n);
    for s in stats {
        let sd = s.sample_sd().max(SIGMA_FLOOR);
        let se = sd * se_factor;
        mu_i.push(s.mean + 2.0 * se * normal());
        let sigma = (sd / (1.0 - rho).sqrt() * (0.3 * normal()).exp()).clamp(2.0 * si.lo, 0.5 * si.hi);
        sigma_i.push(sigma);
        mu_steps.push(se.ln());
    }
    let mean_mu = mu_i.iter().sum::<f64>() / n as f64;
    let spread = if n >= 2 {
        (mu_i.iter().map(|m| (m - mean_mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        mu_steps[0].exp()
    };
    let mu_0 = (mean_mu + 2.0 * spread / (n as f64).sqrt() * normal()).clamp(-0.99, 0.99);
    let sigma_0 = (spread.max(1e-9) * (0.5 * normal()).exp()).min(0.5 * priors.sigma0_upper);
    let nu = (10.0_f64.ln() + 0.5 * normal()).exp();
    let a = priors.alpha_bounds;
    let b = priors.beta_bounds;
    let alpha = a.lo + a.width() * rng.random_range(0.1..0.9);
    let beta = b.lo + b.width() * rng.random_range(0.1..0.9);

    let mut steps = mu_steps;
    steps.extend(std::iter::repeat_n(0.25_f64.ln(), n));
    steps.push((spread.max(1e-9) / (n as f64).sqrt()).ln());
    steps.push(0.3_f64.ln());
    steps.push(0.5_f64.ln());
    steps.push((0.3 * a.width()).ln());
    steps.push((0.3 * b.width()).ln());
    steps.push((spread.max(1e-9) / (n as f64).sqrt()).ln());
    steps.push(0.3_f64.ln());

    let state = HierState {
        mu_i,
        sigma_i,
        mu_0,
        sigma_0,
        nu,
        alpha,
        beta,
    };
    (state, steps)
}

fn run_chain(
    diffs: &PairDifferences,
    locals: &[Local],
    stats: &[DatasetStats],
    priors: &HierPriors,
    config: &SamplerConfig,
    seed: u64,
    chain: usize,
) -> Result<ChainTrace> {
    let mut rng = chain_rng(seed, chain as u64);
    let (state, log_steps) = initial_point(stats, priors, &mut rng);
    if !super::model::hier_log_posterior(&state, diffs, priors).is_finite() {
        return Err(Error::BadInitialization { chain });
    }
    let n = locals.len();
    let var_i = state.sigma_i.iter().map(|s| s * s).collect();
    let ln_nu = state.nu.ln();
    let n_slots = log_steps.len();
    let mut sampler = Sampler {
        priors,
        locals: locals.to_vec(),
        state,
        var_i,
        t_sum: 0.0,
        ln_nu,
        steps: log_steps.iter().map(|l| l.exp()).collect(),
        log_steps,
        accepted: vec![0; n_slots],
        rng,
    };
    sampler.t_sum = sampler.t_terms_sum(sampler.state.mu_0, sampler.state.sigma_0, sampler.state.nu);

    let batch = config.adapt_batch;
    for it in 0..config.burn_in {
        sampler.sweep();
        if (it + 1) % batch == 0 {
            sampler.adapt(batch, (it + 1) / batch);
        }
    }
    sampler.accepted.iter_mut().for_each(|a| *a = 0);

    let s = config.draws_per_chain;
    let mut trace = ChainTrace {
        mu_0: Vec::with_capacity(s),
        sigma_0: Vec::with_capacity(s),
        nu: Vec::with_capacity(s),
        alpha: Vec::with_capacity(s),
        beta: Vec::with_capacity(s),
        mu_i: Vec::with_capacity(if config.retain_local { s * n } else { 0 }),
        sigma_i: Vec::with_capacity(if config.retain_local { s * n } else { 0 }),
        acceptance: Vec::new(),
    };
    for _ in 0..s {
        sampler.sweep();
        let st = &sampler.state;
        trace.mu_0.push(st.mu_0);
        trace.sigma_0.push(st.sigma_0);
        trace.nu.push(st.nu);
        trace.alpha.push(st.alpha);
        trace.beta.push(st.beta);
        if config.retain_local {
            trace.mu_i.extend_from_slice(&st.mu_i);
            trace.sigma_i.extend_from_slice(&st.sigma_i);
        }
    }
    trace.acceptance = sampler
        .accepted
        .iter()
        .map(|&a| f64::from(a) / s as f64)
        .collect();
    Ok(trace)
}

/// Runs `config.chains` independent chains; bit-identical for a given seed.
pub fn run_mcmc(
    diffs: &PairDifferences,
    priors: &HierPriors,
    config: &SamplerConfig,
    seed: u64,
) -> Result<Chains> {
    config.validate()?;
    priors.validate()?;
    if diffs.per_dataset.is_empty() || diffs.per_dataset.iter().any(|x| x.len() < 2) {
        return Err(Error::InvalidArgument(
            "every dataset needs at least two fold differences".into(),
        ));
    }
    let stats: Vec<DatasetStats> = diffs.per_dataset.iter().map(|x| DatasetStats::new(x)).collect();
    let locals: Vec<Local> = stats.iter().map(|s| Local::new(s, priors.rho)).collect();
    let chains = (0..config.chains)
        .map(|c| run_chain(diffs, &locals, &stats, priors, config, seed, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Chains {
        n_datasets: stats.len(),
        chains,
    })
}

#[cfg(test)]
mod tests {
    use super::super::model::hier_log_posterior;
    use super::*;

    fn diffs() -> PairDifferences {
        PairDifferences {
            model_x: "x".into(),
            model_y: "y".into(),
            per_dataset: vec![
                vec![0.011, 0.02, 0.031, 0.015, 0.022],
                vec![0.0, -0.012, 0.021, 0.004, 0.001],
                vec![0.05, 0.041, 0.062, 0.048, 0.055],
            ],
        }
    }

    #[test]
    fn block_log_sum_matches_direct() {
        let terms = [0.0, 1e-12, 0.5, 3.0, 1e100, 1e200, 7.0];
        let direct: f64 = terms.iter().map(|t: &f64| t.ln_1p()).sum();
        let fast = sum_ln_1p(terms.iter().copied());
        assert!((direct - fast).abs() < 1e-9 * direct.abs());
    }

    // The local-difference expressions used by the sweep must agree with
    // differences of the full joint density.
    #[test]
    fn incremental_terms_match_full_density() {
        let d = diffs();
        let priors = HierPriors::from_data(&d, 0.15).unwrap();
        let stats: Vec<DatasetStats> = d.per_dataset.iter().map(|x| DatasetStats::new(x)).collect();
        let locals: Vec<Local> = stats.iter().map(|s| Local::new(s, priors.rho)).collect();
        let mut rng = chain_rng(7, 0);
        let (state, steps) = initial_point(&stats, &priors, &mut rng);
        let var_i = state.sigma_i.iter().map(|s| s * s).collect();
        let mut s = Sampler {
            priors: &priors,
            locals,
            ln_nu: state.nu.ln(),
            state,
            var_i,
            t_sum: 0.0,
            accepted: vec![0; steps.len()],
            steps: steps.iter().map(|l| l.exp()).collect(),
            log_steps: steps,
            rng,
        };
        s.t_sum = s.t_terms_sum(s.state.mu_0, s.state.sigma_0, s.state.nu);
        for _ in 0..200 {
            s.sweep();
            let fresh = s.t_terms_sum(s.state.mu_0, s.state.sigma_0, s.state.nu);
            assert!((fresh - s.t_sum).abs() < 1e-8 * (1.0 + fresh.abs()));
            assert!(s.state.in_support(&priors));
        }
        let base = hier_log_posterior(&s.state, &d, &priors);

        // μ_0 move through the sampler's expression
        let mut moved = s.state.clone();
        moved.mu_0 += 0.003;
        let half = 0.5 * (s.state.nu + 1.0);
        let sum = s.t_terms_sum(moved.mu_0, moved.sigma_0, moved.nu);
        let fast = -half * (sum - s.t_sum);
        let full = hier_log_posterior(&moved, &d, &priors) - base;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");

        // ν move (without Jacobian)
        let mut moved = s.state.clone();
        moved.nu *= 1.3;
        let sum = s.t_terms_sum(moved.mu_0, moved.sigma_0, moved.nu);
        let fast = s.nu_terms(moved.nu, moved.nu.ln()) - 0.5 * (moved.nu + 1.0) * sum
            - (s.nu_terms(s.state.nu, s.ln_nu) - half * s.t_sum)
            - (moved.nu.ln() - s.ln_nu);
        let full = hier_log_posterior(&moved, &d, &priors) - base;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");

        // joint shift: no Jacobian
        let mut moved = s.state.clone();
        moved.mu_0 += 0.002;
        moved.mu_i.iter_mut().for_each(|m| *m += 0.002);
        let fast = s.joint_loglik_change(|m| m + 0.002);
        let full = hier_log_posterior(&moved, &d, &priors) - base;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");

        // joint scale: the sampler's ratio equals the density ratio times the
        // Jacobian e^{(N+1)s}
        let step: f64 = 0.2;
        let f = step.exp();
        let mu_0 = s.state.mu_0;
        let mut moved = s.state.clone();
        moved.sigma_0 *= f;
        moved.mu_i.iter_mut().for_each(|m| *m = mu_0 + f * (*m - mu_0));
        let fast = s.joint_loglik_change(|m| mu_0 + f * (m - mu_0)) + step;
        let n = s.state.mu_i.len() as f64;
        let full = hier_log_posterior(&moved, &d, &priors) - base + (n + 1.0) * step;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");

        // μ_1 move
        let mut moved = s.state.clone();
        moved.mu_i[1] += 0.002;
        let l = s.locals[1];
        let nu_s2 = s.state.nu * s.state.sigma_0.powi(2);
        let dc = s.state.mu_i[1] - s.state.mu_0;
        let dp = moved.mu_i[1] - s.state.mu_0;
        let fast = -0.5 * (l.quad(moved.mu_i[1]) - l.quad(s.state.mu_i[1])) / s.var_i[1]
            - half * ((nu_s2 + dp * dp) / (nu_s2 + dc * dc)).ln();
        let full = hier_log_posterior(&moved, &d, &priors) - base;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");

        // σ_2 move (without Jacobian)
        let mut moved = s.state.clone();
        let step = 0.1;
        moved.sigma_i[2] *= f64::exp(step);
        let l = s.locals[2];
        let q = l.quad(s.state.mu_i[2]);
        let fast = -l.r * step - 0.5 * q * (1.0 / moved.sigma_i[2].powi(2) - 1.0 / s.var_i[2]);
        let full = hier_log_posterior(&moved, &d, &priors) - base;
        assert!((fast - full).abs() < 1e-8, "{fast} vs {full}");
    }

    #[test]
    fn deterministic_per_seed() {
        let d = diffs();
        let priors = HierPriors::from_data(&d, 0.1).unwrap();
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 500,
            burn_in: 200,
            retain_local: true,
            ..SamplerConfig::default()
        };
        let a = run_mcmc(&d, &priors, &cfg, 11).unwrap();
        let b = run_mcmc(&d, &priors, &cfg, 11).unwrap();
        let c = run_mcmc(&d, &priors, &cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chains[0].mu_0, c.chains[0].mu_0);
        assert_eq!(a.state(1, 499).mu_i.len(), 3);
    }

    #[test]
    fn draws_stay_in_support() {
        let d = diffs();
        let priors = HierPriors::from_data(&d, 0.1).unwrap();
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 1000,
            burn_in: 500,
            retain_local: true,
            ..SamplerConfig::default()
        };
        let chains = run_mcmc(&d, &priors, &cfg, 3).unwrap();
        for c in 0..2 {
            for s in 0..1000 {
                assert!(chains.state(c, s).in_support(&priors));
            }
            for &rate in &chains.chains[c].acceptance {
                assert!(rate > 0.05 && rate < 0.95, "{rate}");
            }
        }
    }

    #[test]
    fn constant_data_initializes() {
        let d = PairDifferences {
            model_x: "x".into(),
            model_y: "y".into(),
            per_dataset: vec![vec![0.0; 6]; 4],
        };
        let priors = HierPriors::from_data(&d, 0.1).unwrap();
        let cfg = SamplerConfig {
            chains: 2,
            draws_per_chain: 200,
            burn_in: 200,
            ..SamplerConfig::default()
        };
        run_mcmc(&d, &priors, &cfg, 1).unwrap();
    }
}
