//! Grouped bar charts as standalone SVG 1.1.
//!
//! One panel per result, one group of bars per selected layer, a blue
//! `Con.` bar and a red `Fun.` bar per group. The y axis is fixed to
//! `[0, Y_MAX]` so charts from different runs line up; taller bars are
//! clipped at the top and marked with a triangle.

use std::fmt::Write as _;

use super::{LayerSelector, ReportError, REPORTED};
use crate::extract::{AnalysisResult, Measure};
use crate::lexcat::LexicalCategory;

pub const Y_MAX: f64 = 1.5;

const PLOT_HEIGHT: f64 = 240.0;
const MARGIN_LEFT: f64 = 48.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 40.0;
const BAR_WIDTH: f64 = 18.0;
const GROUP_WIDTH: f64 = 56.0;
const LEGEND_WIDTH: f64 = 72.0;
const Y_TICKS: [f64; 4] = [0.0, 0.5, 1.0, 1.5];

const CONTENT_COLOR: &str = "#1f3fbf";
const FUNCTION_COLOR: &str = "#c8202a";

pub struct ChartPanel<'a> {
    pub title: &'a str,
    pub result: &'a AnalysisResult,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn color(category: LexicalCategory) -> &'static str {
    match category {
        LexicalCategory::Function => FUNCTION_COLOR,
        _ => CONTENT_COLOR,
    }
}

fn legend_label(category: LexicalCategory) -> &'static str {
    match category {
        LexicalCategory::Function => "Fun.",
        _ => "Con.",
    }
}

fn y_of(value: f64) -> f64 {
    MARGIN_TOP + PLOT_HEIGHT * (1.0 - value.clamp(0.0, Y_MAX) / Y_MAX)
}

/// Draws one panel with its top-left corner at `x0`.
fn draw_panel(
    out: &mut String,
    x0: f64,
    panel: &ChartPanel<'_>,
    layers: &[usize],
    measure: Measure,
) -> f64 {
    let plot_width = GROUP_WIDTH * layers.len() as f64;
    let left = x0 + MARGIN_LEFT;
    let bottom = MARGIN_TOP + PLOT_HEIGHT;

    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" font-size="14" font-weight="bold" text-anchor="middle">{}</text>"#,
        left + plot_width / 2.0,
        escape(panel.title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="36" font-size="10" text-anchor="middle">{} ({})</text>"#,
        left + plot_width / 2.0,
        escape(&panel.result.model_id),
        measure
    );

    for tick in Y_TICKS {
        let y = y_of(tick);
        let _ = writeln!(
            out,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            left + plot_width
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{tick:.1}</text>"#,
            left - 4.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        out,
        r##"<line x1="{left:.2}" y1="{MARGIN_TOP:.2}" x2="{left:.2}" y2="{bottom:.2}" stroke="#000000"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{left:.2}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="#000000"/>"##,
        left + plot_width
    );

    for (g, &layer) in layers.iter().enumerate() {
        let gx = left + GROUP_WIDTH * g as f64 + (GROUP_WIDTH - 2.0 * BAR_WIDTH) / 2.0;
        for (b, category) in REPORTED.into_iter().enumerate() {
            let x = gx + BAR_WIDTH * b as f64;
            let cx = x + BAR_WIDTH / 2.0;
            match panel.result.value(layer, measure, category) {
                Some(value) => {
                    let top = y_of(value);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{x:.2}" y="{top:.2}" width="{BAR_WIDTH:.2}" height="{:.2}" fill="{}"/>"#,
                        bottom - top,
                        color(category)
                    );
                    let label_y = if value > Y_MAX {
                        let _ = writeln!(
                            out,
                            r##"<polygon class="overflow" points="{:.2},{:.2} {:.2},{:.2} {cx:.2},{:.2}" fill="#000000"/>"##,
                            x,
                            top,
                            x + BAR_WIDTH,
                            top,
                            top - 7.0
                        );
                        top - 10.0
                    } else {
                        top - 3.0
                    };
                    let _ = writeln!(
                        out,
                        r#"<text x="{cx:.2}" y="{label_y:.2}" font-size="9" text-anchor="middle">{value:.2}</text>"#
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        r#"<text x="{cx:.2}" y="{:.2}" font-size="9" text-anchor="middle">n/a</text>"#,
                        bottom - 3.0
                    );
                }
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">L{layer}</text>"#,
            gx + BAR_WIDTH,
            bottom + 16.0
        );
    }

    let lx = left + plot_width + 12.0;
    for (i, category) in REPORTED.into_iter().enumerate() {
        let ly = MARGIN_TOP + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{ly:.2}" width="10" height="10" fill="{}"/>"#,
            color(category)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 14.0,
            ly + 9.0,
            legend_label(category)
        );
    }
    let _ = writeln!(out, "</g>");
    MARGIN_LEFT + plot_width + LEGEND_WIDTH
}

/// Renders one or two panels side by side.
pub fn render_bar_chart(
    panels: &[ChartPanel<'_>],
    layer: LayerSelector,
    measure: Measure,
) -> Result<Vec<u8>, ReportError> {
    if panels.is_empty() || panels.len() > 2 {
        return Err(ReportError::PanelCount(panels.len()));
    }
    let mut resolved = Vec::with_capacity(panels.len());
    for p in panels {
        resolved.push(layer.resolve(p.result.n_layers)?);
    }

    let mut body = String::new();
    let mut x = 0.0;
    for (panel, layers) in panels.iter().zip(&resolved) {
        x += draw_panel(&mut body, x, panel, layers, measure);
    }
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{x:.0}" height="{height:.0}" viewBox="0 0 {x:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    out.push_str(&body);
    out.push_str("</svg>\n");
    Ok(out.into_bytes())
}
