//! Rank-normalized split-R̂ and effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sampler::{Chains, Param};

/// R̂ above which a pair's verdict is treated as unreliable.
pub const RHAT_LIMIT: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostic {
    pub param: String,
    /// `None` with a single chain.
    pub rhat: Option<f64>,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub params: Vec<ParamDiagnostic>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.params
            .iter()
            .filter_map(|p| p.rhat)
            .fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    /// False when R̂ is unavailable or any R̂ exceeds [`RHAT_LIMIT`].
    pub fn converged(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.rhat.is_some_and(|r| r <= RHAT_LIMIT))
    }

    pub fn min_ess(&self) -> f64 {
        self.params.iter().map(|p| p.ess).fold(f64::INFINITY, f64::min)
    }
}

/// Diagnostics of the hyperparameters, plus every μ_i and σ_i when local
/// traces were retained.
pub fn diagnostics(chains: &Chains) -> Diagnostics {
    let mut params = vec![Param::Mu0, Param::Sigma0, Param::Nu, Param::Alpha, Param::Beta];
    if chains.has_local() {
        params.extend((0..chains.n_datasets).map(Param::MuI));
        params.extend((0..chains.n_datasets).map(Param::SigmaI));
    }
    Diagnostics {
        params: params
            .into_iter()
            .map(|p| {
                let draws = chains.scalar(p);
                if !usable(&draws) {
                    return ParamDiagnostic {
                        param: p.to_string(),
                        rhat: None,
                        ess: 0.0,
                    };
                }
                let z = rank_normalize(&split(&draws));
                ParamDiagnostic {
                    param: p.to_string(),
                    rhat: (draws.len() >= 2).then(|| psrf(&z)),
                    ess: normalized_ess(&z),
                }
            })
            .collect(),
    }
}

fn usable(chains: &[Vec<f64>]) -> bool {
    !chains.is_empty() && chains.iter().all(|c| c.len() >= 4)
}

/// Splits every chain in half, dropping the middle draw of odd lengths.
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    chains
        .iter()
        .flat_map(|c| [c[..half].to_vec(), c[n - half..n].to_vec()])
        .collect()
}

/// Replaces pooled draws by normal scores of their (average) ranks.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pooled: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(s, &x)| (x, c, s)))
        .collect();
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let total = pooled.len() as f64;
    let normal = Normal::standard();
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        let z = normal.inverse_cdf((rank - 0.375) / (total + 0.25));
        for &(_, c, s) in &pooled[start..end] {
            out[c][s] = z;
        }
        start = end;
    }
    out
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Classic potential scale reduction of already-prepared chains.
fn psrf(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let within = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let between = n / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

/// Rank-normalized split-R̂; `None` for fewer than two chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.len() < 2 || !usable(chains) {
        return None;
    }
    Some(psrf(&rank_normalize(&split(chains))))
}

fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag.min(n - 1))
        .map(|lag| {
            centred[..n - lag]
                .iter()
                .zip(&centred[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Effective sample size of the rank-normalized split chains, using Geyer's
/// initial monotone sequence on the multi-chain autocorrelation.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    if !usable(chains) {
        return 0.0;
    }
    normalized_ess(&rank_normalize(&split(chains)))
}

fn normalized_ess(z: &[Vec<f64>]) -> f64 {
    let m = z.len() as f64;
    let n = z[0].len();
    let total = m * n as f64;
    let stats: Vec<(f64, f64)> = z.iter().map(|c| mean_var(c)).collect();
    let within = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let between_over_n = if m > 1.0 {
        stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * within + between_over_n;
    if var_plus <= 0.0 {
        return total;
    }

    // grow the lag window until the pair sums turn negative
    let mut max_lag = 64.min(n - 1);
    loop {
        let acov: Vec<Vec<f64>> = z.iter().map(|c| autocovariance(c, max_lag)).collect();
        let rho_at = |t: usize| {
            if t == 0 {
                return 1.0;
            }
            let mean_acov = acov.iter().map(|a| a[t]).sum::<f64>() / m;
            1.0 - (within - mean_acov) / var_plus
        };
        let mut sum_pairs = 0.0;
        let mut prev_pair = f64::INFINITY;
        let mut t = 0;
        let mut terminated = false;
        while t + 1 <= max_lag {
            let mut pair = rho_at(t) + rho_at(t + 1);
            if pair < 0.0 {
                terminated = true;
                break;
            }
            pair = pair.min(prev_pair);
            prev_pair = pair;
            sum_pairs += pair;
            t += 2;
        }
        if terminated || max_lag >= n - 1 {
            let tau = (2.0 * sum_pairs - 1.0).max(1.0 / total.log10().max(1.0));
            return total / tau;
        }
        max_lag = (max_lag * 4).min(n - 1);
    }
}
