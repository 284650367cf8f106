//! Deterministic SVG figures: critical-difference diagrams, windowpane
//! decision grids and posterior simplex plots.
//!
//! Coordinates are printed with two decimals, so identical inputs give
//! byte-identical documents.

mod cd;
mod simplex;
mod windowpane;

pub use cd::{cd_diagram, cd_groups, CONDENSED_ABOVE};
pub use simplex::{project, sector, simplex_plot, SimplexPoint, SIMPLEX_MAX_POINTS};
pub use windowpane::windowpane;

use std::fmt::Write;

use crate::decision::Verdict;

/// Fill colour of each verdict. Glyphs carry the same information for
/// readers without colour.
pub fn verdict_fill(v: Verdict) -> &'static str {
    match v {
        Verdict::XBetter => "#1b9e77",
        Verdict::YBetter => "#d95f02",
        Verdict::Rope => "#7570b3",
        Verdict::NoDecision => "#f2f2f2",
    }
}

/// Colour of the highlighted group in a CD diagram.
pub const HIGHLIGHT: &str = "#e6550d";
const INK: &str = "#222222";

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Minimal SVG 1.1 writer.
pub(crate) struct Svg {
    buf: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut buf = String::new();
        writeln!(
            buf,
            r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}" font-family="Helvetica, Arial, sans-serif">
<rect x="0" y="0" width="{w:.2}" height="{h:.2}" fill="#ffffff"/>"##,
            w = width,
            h = height
        )
        .unwrap();
        Svg { buf }
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        writeln!(
            self.buf,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width:.2}"/>"#
        )
        .unwrap();
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, width: f64) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.buf,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width:.2}"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }

    pub fn polygon(&mut self, points: &[(f64, f64)], fill: &str, stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.buf,
            r#"<polygon points="{}" fill="{fill}" stroke="{stroke}" stroke-width="1.00"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, stroke: &str) {
        writeln!(
            self.buf,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="{stroke}" stroke-width="0.50"/>"#
        )
        .unwrap();
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str, opacity: f64) {
        writeln!(
            self.buf,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{fill}" fill-opacity="{opacity:.2}"/>"#
        )
        .unwrap();
    }

    /// `anchor` is one of start, middle, end.
    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str) {
        self.text_styled(x, y, size, anchor, INK, "", content);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn text_styled(&mut self, x: f64, y: f64, size: f64, anchor: &str, fill: &str, extra: &str, content: &str) {
        writeln!(
            self.buf,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size:.2}" text-anchor="{anchor}" fill="{fill}"{extra}>{}</text>"#,
            escape(content)
        )
        .unwrap();
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}
