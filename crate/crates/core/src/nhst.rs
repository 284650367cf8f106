//! Friedman omnibus test and Nemenyi post-hoc comparison of average ranks.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::decision::{DecisionMatrix, Verdict};
use crate::error::{Error, Result};
use crate::family::{FamilyOfBest, Method};
use crate::rank::RankMatrix;
use crate::special::{chi_square_upper_tail, integrate, normal_cdf, normal_pdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanOutcome {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub n_datasets: usize,
    pub n_models: usize,
}

impl FriedmanOutcome {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

pub fn friedman_statistic(ranks: &RankMatrix) -> Result<FriedmanOutcome> {
    let (n, k) = (ranks.n_datasets(), ranks.n_models());
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "the Friedman test needs at least 2 datasets and 2 models, got {n} and {k}"
        )));
    }
    let (nf, kf) = (n as f64, k as f64);
    // Σ R_j² − k(k+1)²/4 rewritten as Σ (R_j − (k+1)/2)², using Σ R_j = k(k+1)/2;
    // exactly zero when every average rank is central.
    let centre = (kf + 1.0) / 2.0;
    let spread: f64 = ranks.avg_ranks.iter().map(|r| (r - centre).powi(2)).sum();
    let statistic = 12.0 * nf / (kf * (kf + 1.0)) * spread;
    let dof = (k - 1) as u32;
    Ok(FriedmanOutcome {
        statistic,
        dof,
        p_value: chi_square_upper_tail(statistic, dof),
        n_datasets: n,
        n_models: k,
    })
}

/// CDF of the range of `k` independent standard normals.
pub fn normal_range_cdf(range: f64, k: u32) -> f64 {
    if range <= 0.0 {
        return 0.0;
    }
    let kf = f64::from(k);
    let inner = |z: f64| {
        let width = normal_cdf(z) - normal_cdf(z - range);
        if width <= 0.0 {
            return 0.0;
        }
        normal_pdf(z) * width.powi(k as i32 - 1)
    };
    // φ underflows the integrand outside [-12, 12]
    (kf * integrate(inner, -12.0, 12.0, 1e-11)).clamp(0.0, 1.0)
}

fn quantile_cache() -> &'static Mutex<HashMap<(u32, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Critical value `q_α` of the Nemenyi test: the `1 − α` quantile of the
/// studentized range for `k` groups with infinite error degrees of freedom,
/// divided by √2.
pub fn studentized_range_quantile(k: u32, alpha: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("studentized range needs k >= 2, got {k}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let key = (k, alpha.to_bits());
    if let Some(&q) = quantile_cache().lock().unwrap().get(&key) {
        return Ok(q);
    }
    let target = 1.0 - alpha;
    let mut hi = 4.0;
    while normal_range_cdf(hi, k) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if normal_range_cdf(mid, k) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi) / std::f64::consts::SQRT_2;
    quantile_cache().lock().unwrap().insert(key, q);
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiOutcome {
    pub alpha: f64,
    pub q_alpha: f64,
    pub cd: f64,
    /// `significant[i][j]` iff `|R_i − R_j| > cd`.
    pub significant: Vec<Vec<bool>>,
}

/// `sqrt(k(k+1) / 6N)`, the standard error of an average-rank difference.
pub fn rank_difference_scale(k: usize, n: usize) -> f64 {
    let (k, n) = (k as f64, n as f64);
    (k * (k + 1.0) / (6.0 * n)).sqrt()
}

pub fn nemenyi(ranks: &RankMatrix, alpha: f64) -> Result<NemenyiOutcome> {
    let (n, k) = (ranks.n_datasets(), ranks.n_models());
    if n < 2 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "the Nemenyi test needs at least 2 datasets and 2 models, got {n} and {k}"
        )));
    }
    let q_alpha = studentized_range_quantile(k as u32, alpha)?;
    let cd = q_alpha * rank_difference_scale(k, n);
    let r = &ranks.avg_ranks;
    let significant = (0..k)
        .map(|i| (0..k).map(|j| (r[i] - r[j]).abs() > cd).collect())
        .collect();
    Ok(NemenyiOutcome {
        alpha,
        q_alpha,
        cd,
        significant,
    })
}

/// Top-ranked model plus every model whose average rank is within `cd` of it.
///
/// Refuses when the omnibus test did not reject at the post-hoc `alpha`; use
/// [`nhst_family_ungated`] to override.
pub fn nhst_family(
    models: &[String],
    ranks: &RankMatrix,
    omnibus: &FriedmanOutcome,
    outcome: &NemenyiOutcome,
) -> Result<FamilyOfBest> {
    if !omnibus.rejects(outcome.alpha) {
        return Err(Error::OmnibusRetained {
            p_value: omnibus.p_value,
            alpha: outcome.alpha,
        });
    }
    Ok(nhst_family_ungated(models, ranks, outcome))
}

pub fn nhst_family_ungated(
    models: &[String],
    ranks: &RankMatrix,
    outcome: &NemenyiOutcome,
) -> FamilyOfBest {
    let r = &ranks.avg_ranks;
    let mut order: Vec<usize> = (0..models.len()).collect();
    // ties on average rank: lexicographically first model id leads
    order.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then_with(|| models[a].cmp(&models[b])));
    let top = order[0];
    let members = order
        .into_iter()
        .filter(|&j| (r[j] - r[top]).abs() < outcome.cd)
        .map(|j| models[j].clone())
        .collect();
    FamilyOfBest::new(Method::Nhst, members)
}

/// Whether two or more models share the best average rank.
pub fn top_rank_shared(ranks: &RankMatrix) -> bool {
    let best = ranks.avg_ranks.iter().copied().fold(f64::INFINITY, f64::min);
    ranks.avg_ranks.iter().filter(|&&r| r == best).count() > 1
}

/// Binary pairwise verdicts: the better-ranked model wins wherever the rank
/// gap exceeds the critical difference.
pub fn nhst_decision_matrix(models: &[String], ranks: &RankMatrix, outcome: &NemenyiOutcome) -> DecisionMatrix {
    let k = models.len();
    let r = &ranks.avg_ranks;
    let cells = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        Verdict::Rope
                    } else if !outcome.significant[i][j] {
                        Verdict::NoDecision
                    } else if r[i] < r[j] {
                        Verdict::XBetter
                    } else {
                        Verdict::YBetter
                    }
                })
                .collect()
        })
        .collect();
    DecisionMatrix {
        models: models.to_vec(),
        cells,
        threshold: 1.0 - outcome.alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::rank_matrix;

    fn ranks_from_avg(avg: &[f64], n: usize) -> RankMatrix {
        RankMatrix {
            per_dataset_ranks: vec![avg.to_vec(); n],
            avg_ranks: avg.to_vec(),
        }
    }

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|j| format!("m{j}")).collect()
    }

    #[test]
    fn all_tied_gives_zero_statistic() {
        let r = rank_matrix(&vec![vec![0.5; 4]; 6], true);
        let f = friedman_statistic(&r).unwrap();
        assert_eq!(f.statistic, 0.0);
        assert_eq!(f.p_value, 1.0);
        assert_eq!(f.dof, 3);
    }

    #[test]
    fn perfect_separation_with_two_models() {
        let r = rank_matrix(&vec![vec![0.9, 0.1]; 10], true);
        let f = friedman_statistic(&r).unwrap();
        assert!((f.statistic - 10.0).abs() < 1e-12);
        assert_eq!(f.dof, 1);
        assert!((f.p_value - 0.001_565_402_258).abs() < 1e-9);
    }

    #[test]
    fn friedman_rejects_small_inputs() {
        assert!(friedman_statistic(&rank_matrix(&[vec![0.9, 0.1]], true)).is_err());
    }

    #[test]
    fn quantile_for_two_groups_is_normal_quantile() {
        let q = studentized_range_quantile(2, 0.05).unwrap();
        assert!((q - 1.959_964).abs() < 1e-6, "{q}");
    }

    #[test]
    fn quantile_argument_checks() {
        assert!(studentized_range_quantile(1, 0.05).is_err());
        assert!(studentized_range_quantile(3, 0.0).is_err());
        assert!(studentized_range_quantile(3, 1.0).is_err());
    }

    #[test]
    fn quantile_matches_common_table() {
        // q_0.05 for k = 2..10, infinite dof, divided by sqrt(2)
        let table = [1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164];
        for (k, expected) in (2..=10).zip(table) {
            let q = studentized_range_quantile(k, 0.05).unwrap();
            assert!((q - expected).abs() < 1.5e-3, "k={k}: {q} vs {expected}");
        }
    }

    #[test]
    fn quantile_for_many_groups() {
        // reference values from an independent studentized range implementation
        let q96 = studentized_range_quantile(96, 0.05).unwrap();
        assert!((q96 - 4.284_798).abs() < 1e-5, "{q96}");
        let q48 = studentized_range_quantile(48, 0.05).unwrap();
        assert!((q48 - 3.973_379).abs() < 1e-5, "{q48}");
    }

    #[test]
    fn cd_for_two_models() {
        let r = ranks_from_avg(&[1.0, 2.0], 8);
        let out = nemenyi(&r, 0.05).unwrap();
        assert!((out.cd - 1.959_964 * (6.0_f64 / 48.0).sqrt()).abs() < 1e-6);
        assert!((out.cd - 0.6930).abs() < 1e-4);
        assert!(out.significant[0][1] && out.significant[1][0]);
        assert!(!out.significant[0][0]);
    }

    #[test]
    fn family_rule() {
        let r = ranks_from_avg(&[1.0, 1.2, 3.0], 5);
        let out = NemenyiOutcome {
            alpha: 0.05,
            q_alpha: 1.0,
            cd: 0.5,
            significant: vec![vec![false; 3]; 3],
        };
        assert_eq!(nhst_family_ungated(&names(3), &r, &out).members, ["m1", "m2"]);
    }

    #[test]
    fn shared_top_rank_takes_lexicographic_first() {
        let models = vec!["b".to_string(), "a".to_string(), "c".to_string()];
        let r = ranks_from_avg(&[1.5, 1.5, 3.0], 5);
        let out = NemenyiOutcome {
            alpha: 0.05,
            q_alpha: 1.0,
            cd: 0.1,
            significant: vec![vec![false; 3]; 3],
        };
        assert!(top_rank_shared(&r));
        assert_eq!(nhst_family_ungated(&models, &r, &out).members, ["a", "b"]);
    }

    #[test]
    fn family_is_gated_on_omnibus() {
        let r = rank_matrix(&vec![vec![0.5; 3]; 6], true);
        let f = friedman_statistic(&r).unwrap();
        let out = nemenyi(&r, 0.05).unwrap();
        assert!(matches!(
            nhst_family(&names(3), &r, &f, &out),
            Err(Error::OmnibusRetained { .. })
        ));
    }

    #[test]
    fn decision_matrix_orients_by_rank() {
        let r = ranks_from_avg(&[1.0, 3.0, 1.1], 20);
        let out = NemenyiOutcome {
            alpha: 0.05,
            q_alpha: 1.0,
            cd: 1.0,
            significant: vec![
                vec![false, true, false],
                vec![true, false, true],
                vec![false, true, false],
            ],
        };
        let m = nhst_decision_matrix(&names(3), &r, &out);
        assert_eq!(m.cells[0][1], Verdict::XBetter);
        assert_eq!(m.cells[1][0], Verdict::YBetter);
        assert_eq!(m.cells[0][2], Verdict::NoDecision);
        assert_eq!(m.cells[1][1], Verdict::Rope);
    }
}
