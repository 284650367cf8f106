use super::{verdict_fill, Svg};
use crate::decision::{DecisionMatrix, Verdict};

fn legend_text(v: Verdict) -> &'static str {
    match v {
        Verdict::XBetter => "row model better",
        Verdict::YBetter => "column model better",
        Verdict::Rope => "practically equivalent",
        Verdict::NoDecision => "no decision",
    }
}

/// k × k grid of pairwise verdicts with models on both axes in the order
/// given (best first). Each cell shows the verdict glyph and is labelled with
/// the rank of its column model.
pub fn windowpane(matrix: &DecisionMatrix, order: &[usize]) -> String {
    let k = matrix.k();
    assert_eq!(order.len(), k, "order must list every model once");
    let m = matrix.permuted(order);
    let cell: f64 = if k <= 12 { 36.0 } else if k <= 40 { 18.0 } else { 9.0 };
    let font = cell * 0.42;
    let label_font = (cell * 0.6).clamp(6.0, 12.0);
    let name = |pos: usize| format!("{}. {}", pos + 1, m.models[pos]);
    let label_width = (0..k)
        .map(|p| name(p).chars().count() as f64 * label_font * 0.6)
        .fold(0.0, f64::max)
        + 12.0;
    let left = label_width;
    let top = label_width;
    let grid = cell * k as f64;
    let legend_top = top + grid + 20.0;
    let width = left + grid + 20.0;
    let width = width.max(260.0);
    let height = legend_top + 4.0 * 18.0 + 30.0;

    let mut svg = Svg::new(width, height);
    for pos in 0..k {
        // row labels to the left, column labels rotated above
        let y = top + cell * (pos as f64 + 0.5) + label_font * 0.35;
        svg.text(left - 6.0, y, label_font, "end", &name(pos));
        let x = left + cell * (pos as f64 + 0.5) + label_font * 0.35;
        svg.text_styled(
            x,
            top - 6.0,
            label_font,
            "start",
            "#222222",
            &format!(r#" transform="rotate(-90 {x:.2} {:.2})""#, top - 6.0),
            &name(pos),
        );
    }
    for (i, row) in m.cells.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            svg.rect(x, y, cell, cell, verdict_fill(v), "#ffffff");
            let ink = if v == Verdict::NoDecision { "#555555" } else { "#ffffff" };
            let text = if cell >= 18.0 {
                format!("{}{}", j + 1, v.glyph())
            } else {
                v.glyph().to_string()
            };
            svg.text_styled(x + cell / 2.0, y + cell / 2.0 + font * 0.35, font, "middle", ink, "", &text);
        }
    }
    for (n, v) in [Verdict::XBetter, Verdict::YBetter, Verdict::Rope, Verdict::NoDecision]
        .into_iter()
        .enumerate()
    {
        let y = legend_top + 18.0 * n as f64;
        svg.rect(12.0, y, 14.0, 14.0, verdict_fill(v), "#999999");
        svg.text(32.0, y + 11.0, 11.0, "start", &format!("{}  {}", v.glyph(), legend_text(v)));
    }
    svg.text(
        12.0,
        legend_top + 4.0 * 18.0 + 14.0,
        10.0,
        "start",
        &format!("decided: {:.2}% of pairs", 100.0 * matrix.decided_fraction()),
    );
    svg.finish()
}
