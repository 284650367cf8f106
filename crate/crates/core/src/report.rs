//! The unified report: all three methods' results plus provenance, and its
//! JSON, Markdown and SVG renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bayes::model::RhoEstimate;
use crate::bayes::{bayes_decision_matrix, bayes_family, BayesAnalysis, PairSummary, ThetaMode};
use crate::config::RunConfig;
use crate::data::{MetricSpec, PerfTable};
use crate::decision::{DecisionMatrix, Verdict};
use crate::error::{Error, Result};
use crate::family::FamilyOfBest;
use crate::nhst::{friedman_statistic, nemenyi, nhst_decision_matrix, nhst_family_ungated, top_rank_shared};
use crate::plot::{cd_diagram, windowpane};
use crate::rank::{naive_best, overall_means, table_ranks};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub input_sha256: String,
    pub seed: u64,
    pub config: RunConfig,
    pub version: String,
    pub metric: MetricSpec,
    pub n_datasets: usize,
    pub n_models: usize,
    pub n_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveSection {
    /// `None` when several models share the best mean; see `tie`.
    pub family: Option<FamilyOfBest>,
    pub tie: Option<Vec<String>>,
    /// Overall mean of each model, in model order.
    pub means: Vec<f64>,
    pub avg_ranks: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyStatus {
    Defined,
    /// The omnibus test retained; no post-hoc family.
    OmnibusRetained,
    /// Built despite retention because the user asked for it.
    Forced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanSection {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub alpha: f64,
    pub rejected: bool,
    pub q_alpha: f64,
    pub cd: f64,
    pub avg_ranks: Vec<f64>,
    pub family: Option<FamilyOfBest>,
    pub family_status: FamilyStatus,
    pub top_rank_shared: bool,
    pub decisions: Vec<Vec<Verdict>>,
    pub decided_fraction: f64,
}

/// A pair whose chains did not pass the R̂ check; its verdict was forced to
/// no-decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticFlag {
    pub model_x: String,
    pub model_y: String,
    pub max_rhat: Option<f64>,
    pub min_ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesSection {
    pub threshold: f64,
    pub rope: f64,
    pub rho: RhoEstimate,
    pub theta_mode: ThetaMode,
    pub decisions: Vec<Vec<Verdict>>,
    /// Upper-triangle pairs in row-major order.
    pub theta_summaries: Vec<PairSummary>,
    /// Family of best models.
    pub family: FamilyOfBest,
    /// For each model (best mean first), the models decided practically
    /// equivalent to it.
    pub families: Vec<FamilyOfBest>,
    pub diagnostics_flags: Vec<DiagnosticFlag>,
    pub decided_fraction: f64,
}

/// The three families side by side, with the nesting usually observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyComparison {
    pub naive: Option<Vec<String>>,
    pub nhst: Option<Vec<String>>,
    pub bayes: Option<Vec<String>>,
    pub naive_within_bayes: Option<bool>,
    pub bayes_within_nhst: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub meta: Meta,
    pub models: Vec<String>,
    pub naive: NaiveSection,
    /// `None` with fewer than two datasets.
    pub friedman: Option<FriedmanSection>,
    /// `None` for a frequentist-only run.
    pub bayes: Option<BayesSection>,
    pub families: FamilyComparison,
}

pub fn naive_section(table: &PerfTable) -> Result<NaiveSection> {
    let (family, tie) = match naive_best(table) {
        Ok(f) => (Some(f), None),
        Err(Error::NaiveTie(t)) => (None, Some(t)),
        Err(e) => return Err(e),
    };
    Ok(NaiveSection {
        family,
        tie,
        means: overall_means(table),
        avg_ranks: table_ranks(table).avg_ranks,
    })
}

pub fn friedman_section(table: &PerfTable, alpha: f64, force_posthoc: bool) -> Result<FriedmanSection> {
    let ranks = table_ranks(table);
    let omnibus = friedman_statistic(&ranks)?;
    let post = nemenyi(&ranks, alpha)?;
    let rejected = omnibus.rejects(alpha);
    let status = match (rejected, force_posthoc) {
        (true, _) => FamilyStatus::Defined,
        (false, true) => FamilyStatus::Forced,
        (false, false) => FamilyStatus::OmnibusRetained,
    };
    let family = (status != FamilyStatus::OmnibusRetained).then(|| nhst_family_ungated(table.models(), &ranks, &post));
    let matrix = nhst_decision_matrix(table.models(), &ranks, &post);
    Ok(FriedmanSection {
        statistic: omnibus.statistic,
        dof: omnibus.dof,
        p_value: omnibus.p_value,
        alpha,
        rejected,
        q_alpha: post.q_alpha,
        cd: post.cd,
        avg_ranks: ranks.avg_ranks.clone(),
        family,
        family_status: status,
        top_rank_shared: top_rank_shared(&ranks),
        decided_fraction: matrix.decided_fraction(),
        decisions: matrix.cells,
    })
}

fn mean_order(means: &[f64], higher_is_better: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| {
        let c = means[b].total_cmp(&means[a]);
        if higher_is_better { c } else { c.reverse() }
    });
    order
}

pub fn bayes_section(table: &PerfTable, analysis: &BayesAnalysis, rope: f64, rho: RhoEstimate, theta_mode: ThetaMode) -> BayesSection {
    let means = overall_means(table);
    let hib = table.metric().higher_is_better;
    let m = &analysis.matrix;
    let families = mean_order(&means, hib)
        .into_iter()
        .map(|a| {
            let members = mean_order(&means, hib)
                .into_iter()
                .filter(|&j| j == a || m.cells[a][j] == Verdict::Rope)
                .map(|j| m.models[j].clone());
            // the anchor leads its own list
            let mut members: Vec<String> = members.collect();
            let pos = members.iter().position(|s| *s == m.models[a]).expect("anchor present");
            let anchor = members.remove(pos);
            members.insert(0, anchor);
            FamilyOfBest::new(crate::family::Method::Bayes, members)
        })
        .collect();
    let diagnostics_flags = analysis
        .pairs
        .iter()
        .filter(|p| !p.reliable)
        .map(|p| DiagnosticFlag {
            model_x: p.model_x.clone(),
            model_y: p.model_y.clone(),
            max_rhat: p.max_rhat,
            min_ess: p.min_ess,
        })
        .collect();
    BayesSection {
        threshold: m.threshold,
        rope,
        rho,
        theta_mode,
        decisions: m.cells.clone(),
        theta_summaries: analysis.pairs.clone(),
        family: bayes_family(m, &means, hib),
        families,
        diagnostics_flags,
        decided_fraction: m.decided_fraction(),
    }
}

fn subset(a: &[String], b: &[String]) -> bool {
    a.iter().all(|x| b.contains(x))
}

pub fn compare_families(naive: &NaiveSection, friedman: Option<&FriedmanSection>, bayes: Option<&BayesSection>) -> FamilyComparison {
    let naive = naive.family.as_ref().map(|f| f.members.clone());
    let nhst = friedman.and_then(|f| f.family.as_ref()).map(|f| f.members.clone());
    let bayes = bayes.map(|b| b.family.members.clone());
    FamilyComparison {
        naive_within_bayes: naive.as_ref().zip(bayes.as_ref()).map(|(a, b)| subset(a, b)),
        bayes_within_nhst: bayes.as_ref().zip(nhst.as_ref()).map(|(a, b)| subset(a, b)),
        naive,
        nhst,
        bayes,
    }
}

impl ReportBundle {
    /// Runs the naive and rank methods, and the Bayesian one when `analysis`
    /// is given (from [`run_bayes`]).
    pub fn build(
        table: &PerfTable,
        input_sha256: String,
        config: &RunConfig,
        analysis: Option<&BayesAnalysis>,
    ) -> Result<ReportBundle> {
        let naive = naive_section(table)?;
        let friedman = if table.n_datasets() >= 2 {
            Some(friedman_section(table, config.alpha, config.force_posthoc)?)
        } else {
            None
        };
        let bayes = match analysis {
            Some(a) => Some(bayes_section(table, a, config.rope, config.rho()?, config.theta_mode)),
            None => None,
        };
        Ok(ReportBundle::assemble(table, input_sha256, config, naive, friedman, bayes))
    }

    /// Bundles sections computed elsewhere; the recorded config omits the
    /// fields that cannot change any result.
    pub fn assemble(
        table: &PerfTable,
        input_sha256: String,
        config: &RunConfig,
        naive: NaiveSection,
        friedman: Option<FriedmanSection>,
        bayes: Option<BayesSection>,
    ) -> ReportBundle {
        let families = compare_families(&naive, friedman.as_ref(), bayes.as_ref());
        ReportBundle {
            meta: Meta {
                input_sha256,
                seed: config.seed,
                config: config.recorded(),
                version: TOOL_VERSION.to_string(),
                metric: table.metric().clone(),
                n_datasets: table.n_datasets(),
                n_models: table.n_models(),
                n_folds: table.n_folds(),
            },
            models: table.models().to_vec(),
            naive,
            friedman,
            bayes,
            families,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<ReportBundle> {
        Ok(serde_json::from_str(text)?)
    }

    /// Model indices by overall mean, best first.
    pub fn performance_order(&self) -> Vec<usize> {
        mean_order(&self.naive.means, self.meta.metric.higher_is_better)
    }

    /// Figures derivable from the bundle alone, as `(file name, svg)`.
    pub fn figures(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let order = self.performance_order();
        if let Some(f) = &self.friedman {
            out.push(("cd_diagram.svg".into(), cd_diagram(&f.avg_ranks, f.cd, &self.models)));
            let m = DecisionMatrix {
                models: self.models.clone(),
                cells: f.decisions.clone(),
                threshold: 1.0 - f.alpha,
            };
            out.push(("windowpane_nhst.svg".into(), windowpane(&m, &order)));
        }
        if let Some(b) = &self.bayes {
            let m = DecisionMatrix {
                models: self.models.clone(),
                cells: b.decisions.clone(),
                threshold: b.threshold,
            };
            out.push(("windowpane_bayes.svg".into(), windowpane(&m, &order)));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let metric = &self.meta.metric.name;
        let _ = writeln!(s, "# Model comparison\n");
        let _ = writeln!(
            s,
            "{} models, {} datasets, {} folds per dataset, metric {metric} ({} is better).\n",
            self.meta.n_models,
            self.meta.n_datasets,
            self.meta.n_folds,
            if self.meta.metric.higher_is_better { "higher" } else { "lower" }
        );
        let _ = writeln!(s, "- input sha256: `{}`", self.meta.input_sha256);
        let _ = writeln!(s, "- seed: {}", self.meta.seed);
        let _ = writeln!(s, "- version: {}\n", self.meta.version);

        let _ = writeln!(s, "## Naive average\n");
        match (&self.naive.family, &self.naive.tie) {
            (Some(f), _) => {
                let _ = writeln!(s, "Best model: **{}**. {}\n", f.top(), f.epistemic_note.describe());
                s.push_str(&self.family_table(&f.members));
            }
            (None, Some(t)) => {
                let _ = writeln!(s, "Tie for the best mean between {}; no naive winner.", t.join(", "));
            }
            (None, None) => {}
        }
        s.push('\n');

        if let Some(f) = &self.friedman {
            let _ = writeln!(s, "## Friedman test with Nemenyi post-hoc\n");
            let _ = writeln!(
                s,
                "Statistic {:.4} on {} degrees of freedom, p = {:.4e}; alpha = {}, q = {:.6}, CD = {:.4}. {:.2}% of pairs decided.\n",
                f.statistic,
                f.dof,
                f.p_value,
                f.alpha,
                f.q_alpha,
                f.cd,
                100.0 * f.decided_fraction
            );
            match (&f.family, f.family_status) {
                (Some(fam), status) => {
                    if status == FamilyStatus::Forced {
                        let _ = writeln!(s, "The omnibus test retained; family built on request.\n");
                    }
                    let _ = writeln!(s, "{} members. {}\n", fam.members.len(), fam.epistemic_note.describe());
                    s.push_str(&self.family_table(&fam.members));
                }
                (None, _) => {
                    let _ = writeln!(s, "The omnibus test retained H0; the family of best models is undefined.");
                }
            }
            if f.top_rank_shared {
                let _ = writeln!(s, "\nSeveral models share the best average rank.");
            }
            s.push('\n');
        }

        if let Some(b) = &self.bayes {
            let _ = writeln!(s, "## Hierarchical Bayesian comparison\n");
            let _ = writeln!(
                s,
                "ROPE ±{}, decision threshold {}, rho {:.6}. {:.2}% of pairs decided.\n",
                b.rope,
                b.threshold,
                b.rho.rho,
                100.0 * b.decided_fraction
            );
            let _ = writeln!(s, "{} members. {}\n", b.family.members.len(), b.family.epistemic_note.describe());
            s.push_str(&self.family_table(&b.family.members));
            if !b.diagnostics_flags.is_empty() {
                let _ = writeln!(s, "\n{} pairs failed the R-hat check and were left undecided:\n", b.diagnostics_flags.len());
                for d in &b.diagnostics_flags {
                    let rhat = d.max_rhat.map_or("n/a".to_string(), |r| format!("{r:.4}"));
                    let _ = writeln!(s, "- {} vs {}: R-hat {rhat}, ESS {:.0}", d.model_x, d.model_y, d.min_ess);
                }
            }
            s.push('\n');
        }

        let _ = writeln!(s, "## Families side by side\n");
        let show = |f: &Option<Vec<String>>| f.as_ref().map_or("undefined".to_string(), |m| format!("{} ({})", m.len(), m.join(", ")));
        let _ = writeln!(s, "| Method | Family |\n|---|---|");
        let _ = writeln!(s, "| Naive | {} |", show(&self.families.naive));
        let _ = writeln!(s, "| NHST | {} |", show(&self.families.nhst));
        let _ = writeln!(s, "| Bayes | {} |", show(&self.families.bayes));
        s
    }

    /// Rows in the given order, differences taken against the first member.
    fn family_table(&self, members: &[String]) -> String {
        let metric = &self.meta.metric.name;
        let mut s = format!(
            "| Algorithm | Avg. Rank | Avg. {metric} | Diff. In Ranks | Diff. In {metric} |\n|---|---:|---:|---:|---:|\n"
        );
        let idx = |name: &str| self.models.iter().position(|m| m == name).expect("member is a model");
        let Some(first) = members.first().map(|m| idx(m)) else {
            return s;
        };
        let (r0, m0) = (self.naive.avg_ranks[first], self.naive.means[first]);
        for (n, name) in members.iter().enumerate() {
            let j = idx(name);
            let (r, m) = (self.naive.avg_ranks[j], self.naive.means[j]);
            if n == 0 {
                let _ = writeln!(s, "| {name} | {r:.3} | {m:.4} | NA | NA |");
            } else {
                let _ = writeln!(s, "| {name} | {r:.3} | {m:.4} | {:.3} | {:.4} |", r0 - r, m0 - m);
            }
        }
        s
    }
}

/// Bayesian analysis of every pair under `config`.
pub fn run_bayes(table: &PerfTable, config: &RunConfig) -> Result<BayesAnalysis> {
    let (bayes, _) = config.bayes_config()?;
    bayes_decision_matrix(table, &bayes, config.seed, config.jobs)
}
