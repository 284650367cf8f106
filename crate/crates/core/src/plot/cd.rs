use super::{Svg, HIGHLIGHT, INK};

/// Above this many models the diagram lists labels in columns instead of
/// drawing one leader line per model.
pub const CONDENSED_ABOVE: usize = 40;

const FONT: f64 = 12.0;
const AXIS_WIDTH: f64 = 600.0;

fn order_by_rank(avg_ranks: &[f64], labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..avg_ranks.len()).collect();
    order.sort_by(|&a, &b| avg_ranks[a].total_cmp(&avg_ranks[b]).then_with(|| labels[a].cmp(&labels[b])));
    order
}

/// Maximal groups of at least two models whose pairwise rank gaps are all
/// at most `cd`, each listed best first. On a line such groups are runs of
/// consecutive models, so one pass over the sorted ranks finds them.
pub fn cd_groups(avg_ranks: &[f64], cd: f64) -> Vec<Vec<usize>> {
    let labels: Vec<String> = (0..avg_ranks.len()).map(|i| format!("{i:08}")).collect();
    let order = order_by_rank(avg_ranks, &labels);
    groups_in_order(avg_ranks, cd, &order)
}

fn groups_in_order(avg_ranks: &[f64], cd: f64, order: &[usize]) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut last_end = 0;
    for start in 0..order.len() {
        let mut end = start;
        while end + 1 < order.len() && avg_ranks[order[end + 1]] - avg_ranks[order[start]] <= cd {
            end += 1;
        }
        if end > start && (groups.is_empty() || end > last_end) {
            groups.push(order[start..=end].to_vec());
            last_end = end;
        }
    }
    groups
}

fn text_width(s: &str, size: f64) -> f64 {
    s.chars().count() as f64 * size * 0.6
}

/// Critical-difference diagram: models on a rank line from 1 to k, with a
/// bar joining every maximal group whose members are within `cd` of each
/// other. The group holding the best-ranked model is highlighted.
pub fn cd_diagram(avg_ranks: &[f64], cd: f64, labels: &[String]) -> String {
    assert_eq!(avg_ranks.len(), labels.len(), "one label per model");
    let k = avg_ranks.len();
    let order = order_by_rank(avg_ranks, labels);
    let groups = groups_in_order(avg_ranks, cd, &order);
    if k > CONDENSED_ABOVE {
        condensed(avg_ranks, cd, labels, &order, &groups)
    } else {
        classic(avg_ranks, cd, labels, &order, &groups)
    }
}

struct Axis {
    left: f64,
    y: f64,
    k: usize,
}

impl Axis {
    fn x(&self, rank: f64) -> f64 {
        let span = (self.k.max(2) - 1) as f64;
        self.left + (rank - 1.0) / span * AXIS_WIDTH
    }

    fn draw(&self, svg: &mut Svg, tick_every: usize, cd: f64) {
        svg.line(self.x(1.0), self.y, self.x(self.k as f64), self.y, INK, 1.5);
        for t in 1..=self.k {
            if t == 1 || t == self.k || t % tick_every == 0 {
                let x = self.x(t as f64);
                svg.line(x, self.y - 5.0, x, self.y, INK, 1.0);
                svg.text(x, self.y - 8.0, FONT - 2.0, "middle", &t.to_string());
            }
        }
        // CD reference bracket above the axis
        let y = self.y - 32.0;
        let (x1, x2) = (self.x(1.0), self.x(1.0 + cd.min((self.k - 1) as f64)));
        svg.line(x1, y, x2, y, INK, 1.5);
        svg.line(x1, y - 4.0, x1, y + 4.0, INK, 1.0);
        svg.line(x2, y - 4.0, x2, y + 4.0, INK, 1.0);
        svg.text((x1 + x2) / 2.0, y - 6.0, FONT - 2.0, "middle", &format!("CD = {cd:.4}"));
    }
}

fn draw_bars(svg: &mut Svg, axis: &Axis, avg_ranks: &[f64], groups: &[Vec<usize>], best: usize, top: f64) -> f64 {
    for (g, members) in groups.iter().enumerate() {
        let y = top + 8.0 * g as f64;
        let lo = axis.x(avg_ranks[members[0]]) - 3.0;
        let hi = axis.x(avg_ranks[*members.last().expect("non-empty")]) + 3.0;
        let colour = if members.contains(&best) { HIGHLIGHT } else { INK };
        svg.line(lo, y, hi, y, colour, 4.0);
    }
    top + 8.0 * groups.len() as f64
}

fn classic(avg_ranks: &[f64], cd: f64, labels: &[String], order: &[usize], groups: &[Vec<usize>]) -> String {
    let k = order.len();
    let name = |j: usize| format!("{} ({:.2})", labels[j], avg_ranks[j]);
    let margin = order.iter().map(|&j| text_width(&name(j), FONT)).fold(0.0, f64::max) + 40.0;
    let axis = Axis {
        left: margin,
        y: 70.0,
        k,
    };
    let rows_top = axis.y + 14.0 + 8.0 * groups.len() as f64 + 10.0;
    let half = k.div_ceil(2);
    let height = rows_top + 20.0 * half as f64 + 20.0;
    let mut svg = Svg::new(2.0 * margin + AXIS_WIDTH, height);
    axis.draw(&mut svg, 1, cd);

    let left_edge = margin - 10.0;
    let right_edge = margin + AXIS_WIDTH + 10.0;
    for (pos, &j) in order.iter().enumerate() {
        let x = axis.x(avg_ranks[j]);
        let (row, edge, anchor, tx) = if pos < half {
            (pos, left_edge, "end", left_edge - 4.0)
        } else {
            (k - 1 - pos, right_edge, "start", right_edge + 4.0)
        };
        let y = rows_top + 20.0 * row as f64;
        svg.polyline(&[(x, axis.y), (x, y), (edge, y)], INK, 1.0);
        svg.text(tx, y + 4.0, FONT, anchor, &name(j));
    }
    draw_bars(&mut svg, &axis, avg_ranks, groups, order[0], axis.y + 14.0);
    svg.finish()
}

fn condensed(avg_ranks: &[f64], cd: f64, labels: &[String], order: &[usize], groups: &[Vec<usize>]) -> String {
    const PER_COLUMN: usize = 25;
    const SMALL: f64 = 8.0;
    let k = order.len();
    let entry = |pos: usize| format!("{:>3}. {} ({:.2})", pos + 1, labels[order[pos]], avg_ranks[order[pos]]);
    let col_width = (0..k).map(|p| text_width(&entry(p), FONT - 2.0)).fold(0.0, f64::max) + 24.0;
    let columns = k.div_ceil(PER_COLUMN);
    let axis = Axis { left: 40.0, y: 70.0, k };
    let width = (AXIS_WIDTH + 80.0).max(columns as f64 * col_width + 40.0);

    // position numbers below the axis, staggered over four rows
    let stagger = 4;
    let numbers_top = axis.y + 14.0;
    let bars_top = numbers_top + 10.0 * stagger as f64 + 8.0;
    let table_top = bars_top + 8.0 * groups.len() as f64 + 24.0;
    let height = table_top + 14.0 * PER_COLUMN.min(k) as f64 + 20.0;
    let mut svg = Svg::new(width, height);
    axis.draw(&mut svg, 5, cd);

    let in_best_group: Vec<bool> = {
        let best = groups.iter().find(|g| g.contains(&order[0]));
        (0..k).map(|j| best.is_some_and(|g| g.contains(&j))).collect()
    };
    for (pos, &j) in order.iter().enumerate() {
        let x = axis.x(avg_ranks[j]);
        let y = numbers_top + 10.0 * (pos % stagger) as f64;
        svg.line(x, axis.y, x, y - SMALL, "#999999", 0.5);
        let colour = if in_best_group[j] || pos == 0 { HIGHLIGHT } else { INK };
        svg.text_styled(x, y, SMALL, "middle", colour, "", &(pos + 1).to_string());
    }
    draw_bars(&mut svg, &axis, avg_ranks, groups, order[0], bars_top);

    for pos in 0..k {
        let j = order[pos];
        let x = 20.0 + (pos / PER_COLUMN) as f64 * col_width;
        let y = table_top + 14.0 * (pos % PER_COLUMN) as f64;
        let (colour, extra) = if in_best_group[j] || pos == 0 {
            (HIGHLIGHT, r#" font-weight="bold""#)
        } else {
            (INK, "")
        };
        svg.text_styled(x, y, FONT - 2.0, "start", colour, extra, &entry(pos));
    }
    svg.finish()
}
