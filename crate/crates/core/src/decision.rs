use serde::{Deserialize, Serialize};

/// Verdict for the ordered pair (row model `x`, column model `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    XBetter,
    YBetter,
    Rope,
    NoDecision,
}

impl Verdict {
    /// The same verdict read from the other model's side.
    pub fn transposed(self) -> Verdict {
        match self {
            Verdict::XBetter => Verdict::YBetter,
            Verdict::YBetter => Verdict::XBetter,
            v => v,
        }
    }

    pub fn is_decided(self) -> bool {
        self != Verdict::NoDecision
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Verdict::XBetter => "<",
            Verdict::YBetter => ">",
            Verdict::Rope => "=",
            Verdict::NoDecision => "?",
        }
    }
}

/// `k × k` grid of pairwise verdicts; the diagonal is [`Verdict::Rope`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    pub models: Vec<String>,
    pub cells: Vec<Vec<Verdict>>,
    pub threshold: f64,
}

impl DecisionMatrix {
    pub fn k(&self) -> usize {
        self.models.len()
    }

    /// Fraction of off-diagonal pairs with a verdict other than no-decision.
    pub fn decided_fraction(&self) -> f64 {
        let k = self.k();
        if k < 2 {
            return 0.0;
        }
        let decided = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.cells[i][j].is_decided())
            .count();
        decided as f64 / (k * (k - 1) / 2) as f64
    }

    pub fn is_antisymmetric(&self) -> bool {
        let k = self.k();
        (0..k).all(|i| {
            self.cells[i][i] == Verdict::Rope
                && (0..k).all(|j| self.cells[j][i] == self.cells[i][j].transposed())
        })
    }

    /// Reorders rows and columns by `order` (indices into `models`).
    pub fn permuted(&self, order: &[usize]) -> DecisionMatrix {
        DecisionMatrix {
            models: order.iter().map(|&i| self.models[i].clone()).collect(),
            cells: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.cells[i][j]).collect())
                .collect(),
            threshold: self.threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decided_fraction_counts_upper_triangle() {
        use Verdict::*;
        let m = DecisionMatrix {
            models: vec!["a".into(), "b".into(), "c".into()],
            cells: vec![
                vec![Rope, XBetter, NoDecision],
                vec![YBetter, Rope, Rope],
                vec![NoDecision, Rope, Rope],
            ],
            threshold: 0.95,
        };
        assert!((m.decided_fraction() - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.is_antisymmetric());
        let p = m.permuted(&[2, 1, 0]);
        assert_eq!(p.cells[1][2], XBetter.transposed());
        assert!(p.is_antisymmetric());
    }
}
