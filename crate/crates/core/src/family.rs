use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Nhst,
    Bayes,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Naive => "naive",
            Method::Nhst => "nhst",
            Method::Bayes => "bayes",
        })
    }
}

/// What membership in a family licenses a reader to conclude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpistemicNote {
    /// Every observed difference was treated as real; no uncertainty was
    /// considered.
    AllDifferencesAssumedReal,
    /// Members could not be distinguished from the top model; the data are
    /// not sufficient to reach any conclusion about them.
    NoConclusion,
    /// Members are, with high posterior probability, practically equivalent
    /// to the top model.
    PositivelyEquivalent,
}

impl EpistemicNote {
    pub fn describe(self) -> &'static str {
        match self {
            EpistemicNote::AllDifferencesAssumedReal => {
                "every observed difference is assumed genuine; no statistical claim is made"
            }
            EpistemicNote::NoConclusion => {
                "members are not distinguishable from the top model; no conclusion about their differences is possible"
            }
            EpistemicNote::PositivelyEquivalent => {
                "members are practically equivalent to the top model with posterior probability above the threshold"
            }
        }
    }
}

/// Ordered set of best models under one method, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOfBest {
    pub method: Method,
    pub members: Vec<String>,
    pub epistemic_note: EpistemicNote,
}

impl FamilyOfBest {
    pub fn new(method: Method, members: Vec<String>) -> Self {
        debug_assert!(!members.is_empty());
        let epistemic_note = match method {
            Method::Naive => EpistemicNote::AllDifferencesAssumedReal,
            Method::Nhst => EpistemicNote::NoConclusion,
            Method::Bayes => EpistemicNote::PositivelyEquivalent,
        };
        FamilyOfBest {
            method,
            members,
            epistemic_note,
        }
    }

    pub fn top(&self) -> &str {
        &self.members[0]
    }

    pub fn contains(&self, model: &str) -> bool {
        self.members.iter().any(|m| m == model)
    }
}
