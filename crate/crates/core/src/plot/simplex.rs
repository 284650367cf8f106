use serde::{Deserialize, Serialize};

use super::{verdict_fill, Svg, INK};
use crate::bayes::Theta;
use crate::decision::Verdict;
use crate::error::{Error, Result};

/// Most points drawn in one simplex plot; larger inputs are thinned with a
/// fixed stride. Proportions are always computed from every point.
pub const SIMPLEX_MAX_POINTS: usize = 5_000;

const SIDE: f64 = 420.0;
const MARGIN: f64 = 70.0;

/// A probability triple to be placed on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
}

impl SimplexPoint {
    pub fn new(p_left: f64, p_rope: f64, p_right: f64) -> Result<Self> {
        let parts = [p_left, p_rope, p_right];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "simplex point needs components in [0, 1] summing to 1, got {parts:?}"
            )));
        }
        Ok(SimplexPoint { p_left, p_rope, p_right })
    }
}

impl From<Theta> for SimplexPoint {
    fn from(t: Theta) -> Self {
        SimplexPoint {
            p_left: t.p_left,
            p_rope: t.p_rope,
            p_right: t.p_right,
        }
    }
}

fn vertices() -> [(f64, f64); 3] {
    let h = SIDE * 3f64.sqrt() / 2.0;
    [
        (MARGIN, MARGIN + h),
        (MARGIN + SIDE / 2.0, MARGIN),
        (MARGIN + SIDE, MARGIN + h),
    ]
}

/// Barycentric image of `p` in the plot's coordinates: (1,0,0) is the lower
/// left vertex, (0,1,0) the top and (0,0,1) the lower right.
pub fn project(p: SimplexPoint) -> (f64, f64) {
    let [l, r, rt] = vertices();
    (
        p.p_left * l.0 + p.p_rope * r.0 + p.p_right * rt.0,
        p.p_left * l.1 + p.p_rope * r.1 + p.p_right * rt.1,
    )
}

/// Region of the simplex a point falls in: the largest component, with the
/// ROPE winning ties.
pub fn sector(p: SimplexPoint) -> Verdict {
    if p.p_rope >= p.p_left && p.p_rope >= p.p_right {
        Verdict::Rope
    } else if p.p_left >= p.p_right {
        Verdict::XBetter
    } else {
        Verdict::YBetter
    }
}

/// Posterior simplex plot of one pair: every point projected onto the
/// triangle, the three regions separated, and the share of points in each
/// region printed beside its vertex.
pub fn simplex_plot(points: &[SimplexPoint], rope: f64, x_name: &str, y_name: &str) -> String {
    let [l, r, rt] = vertices();
    let h = SIDE * 3f64.sqrt() / 2.0;
    let mut svg = Svg::new(SIDE + 2.0 * MARGIN, h + 2.0 * MARGIN + 30.0);
    svg.polygon(&[l, r, rt], "#fafafa", INK);

    // region boundaries run from the centroid to the edge midpoints
    let c = project(SimplexPoint {
        p_left: 1.0 / 3.0,
        p_rope: 1.0 / 3.0,
        p_right: 1.0 / 3.0,
    });
    for (a, b) in [(l, r), (r, rt), (rt, l)] {
        svg.line(c.0, c.1, (a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, "#999999", 1.0);
    }

    let stride = points.len().div_ceil(SIMPLEX_MAX_POINTS).max(1);
    for p in points.iter().step_by(stride) {
        let (x, y) = project(*p);
        svg.circle(x, y, 1.6, verdict_fill(sector(*p)), 0.35);
    }

    let total = points.len().max(1) as f64;
    let share = |v: Verdict| points.iter().filter(|p| sector(**p) == v).count() as f64 / total;
    svg.text(l.0, l.1 + 20.0, 12.0, "middle", &format!("{x_name} better"));
    svg.text(l.0, l.1 + 36.0, 12.0, "middle", &format!("{:.4}", share(Verdict::XBetter)));
    svg.text(rt.0, rt.1 + 20.0, 12.0, "middle", &format!("{y_name} better"));
    svg.text(rt.0, rt.1 + 36.0, 12.0, "middle", &format!("{:.4}", share(Verdict::YBetter)));
    svg.text(r.0, r.1 - 24.0, 12.0, "middle", &format!("ROPE (±{rope})"));
    svg.text(r.0, r.1 - 8.0, 12.0, "middle", &format!("{:.4}", share(Verdict::Rope)));
    svg.text(
        MARGIN,
        h + 2.0 * MARGIN + 18.0,
        10.0,
        "start",
        &format!("{} posterior draws", points.len()),
    );
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9
    }

    #[test]
    fn vertices_and_centroid() {
        let [l, r, rt] = vertices();
        assert!(close(project(SimplexPoint::new(1.0, 0.0, 0.0).unwrap()), l));
        assert!(close(project(SimplexPoint::new(0.0, 1.0, 0.0).unwrap()), r));
        assert!(close(project(SimplexPoint::new(0.0, 0.0, 1.0).unwrap()), rt));
        let third = 1.0 / 3.0;
        let c = project(SimplexPoint::new(third, third, third).unwrap());
        assert!(close(c, ((l.0 + r.0 + rt.0) / 3.0, (l.1 + r.1 + rt.1) / 3.0)));
    }

    #[test]
    fn rejects_non_probabilities() {
        assert!(SimplexPoint::new(0.5, 0.5, 0.1).is_err());
        assert!(SimplexPoint::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn rope_concentrated_draws_land_in_the_rope_sector() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<SimplexPoint> = (0..10_000)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..0.08);
                let b: f64 = rng.random_range(0.0..0.08);
                SimplexPoint::new(a, 1.0 - a - b, b).unwrap()
            })
            .collect();
        let inside = pts.iter().filter(|p| sector(**p) == Verdict::Rope).count();
        assert!(inside as f64 > 0.95 * 10_000.0);
        let svg = simplex_plot(&pts, 0.01, "a", "b");
        assert!(svg.contains(">1.0000</text>"));
        assert_eq!(svg.matches("<circle").count(), SIMPLEX_MAX_POINTS);
        assert_eq!(svg, simplex_plot(&pts, 0.01, "a", "b"));
    }
}
