//! Minimal SVG emission for the congruence scatter and sorted-trend plots.
//! Output is plain deterministic markup with no embedded metadata, so
//! identical inputs produce byte-identical files.

use std::fmt::Write;

use crate::congruence::{CongruenceReport, DeltaRecord, Dot};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

fn color(dot: Dot) -> &'static str {
    match dot {
        Dot::Blue => "#1f77b4",
        Dot::Green => "#2ca02c",
        Dot::Red => "#d62728",
        Dot::Yellow => "#e6c229",
    }
}

struct Axis {
    min: f64,
    max: f64,
    span_px: f64,
    offset_px: f64,
    flip: bool,
}

impl Axis {
    fn to_px(&self, v: f64) -> f64 {
        let t = (v - self.min) / (self.max - self.min);
        let t = if self.flip { 1.0 - t } else { t };
        self.offset_px + t * self.span_px
    }
}

fn sym_limit(values: impl Iterator<Item = f64>) -> f64 {
    let max_abs = values.fold(0.0f64, |a, v| a.max(v.abs()));
    (max_abs * 1.1).max(0.3)
}

fn svg_header(out: &mut String) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Scatter of (metric delta, consensus delta) dots with the indifference
/// band shaded on both axes and the y = x diagonal drawn through the
/// origin.
pub fn scatter_svg(records: &[DeltaRecord], tau: f64, title: &str) -> String {
    let limit = sym_limit(
        records
            .iter()
            .flat_map(|r| [r.delta_metric, r.delta_ccs])
            .chain([tau * 1.5]),
    );
    let x = Axis {
        min: -limit,
        max: limit,
        span_px: WIDTH - 2.0 * MARGIN,
        offset_px: MARGIN,
        flip: false,
    };
    let y = Axis {
        min: -limit,
        max: limit,
        span_px: HEIGHT - 2.0 * MARGIN,
        offset_px: MARGIN,
        flip: true,
    };

    let mut out = String::new();
    svg_header(&mut out);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        title
    );

    // indifference bands
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fff3b0\" fill-opacity=\"0.6\"/>",
        x.to_px(-tau),
        y.to_px(limit),
        x.to_px(tau) - x.to_px(-tau),
        y.to_px(-limit) - y.to_px(limit),
    );
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fff3b0\" fill-opacity=\"0.6\"/>",
        x.to_px(-limit),
        y.to_px(tau),
        x.to_px(limit) - x.to_px(-limit),
        y.to_px(-tau) - y.to_px(tau),
    );

    // axes and diagonal
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>",
        x.to_px(-limit),
        y.to_px(0.0),
        x.to_px(limit),
        y.to_px(0.0)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>",
        x.to_px(0.0),
        y.to_px(-limit),
        x.to_px(0.0),
        y.to_px(limit)
    );
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>",
        x.to_px(-limit),
        y.to_px(-limit),
        x.to_px(limit),
        y.to_px(limit)
    );

    for r in records {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            x.to_px(r.delta_metric),
            y.to_px(r.delta_ccs),
            color(r.dot)
        );
    }

    // axis labels
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">metric delta (range +-{})</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        fmt(limit)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {})\">consensus delta</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    out.push_str("</svg>\n");
    out
}

/// Decisive deltas sorted by metric delta, both series drawn over the sort
/// index to expose the monotone trend.
pub fn sorted_trend_svg(report: &CongruenceReport, title: &str) -> String {
    let n = report.sorted_trend.len();
    let mut out = String::new();
    svg_header(&mut out);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        WIDTH / 2.0,
        title
    );
    if n == 0 {
        out.push_str(
            "<text x=\"320\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">no decisive images</text>\n",
        );
        out.push_str("</svg>\n");
        return out;
    }
    let limit = sym_limit(report.sorted_trend.iter().flat_map(|&(a, b)| [a, b]));
    let x = Axis {
        min: 0.0,
        max: (n.max(2) - 1) as f64,
        span_px: WIDTH - 2.0 * MARGIN,
        offset_px: MARGIN,
        flip: false,
    };
    let y = Axis {
        min: -limit,
        max: limit,
        span_px: HEIGHT - 2.0 * MARGIN,
        offset_px: MARGIN,
        flip: true,
    };
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>",
        x.to_px(0.0),
        y.to_px(0.0),
        x.to_px((n.max(2) - 1) as f64),
        y.to_px(0.0)
    );
    let polyline = |out: &mut String, series: Vec<f64>, stroke: &str| {
        let pts: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x.to_px(i as f64), y.to_px(v)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            pts.join(" "),
            stroke
        );
    };
    polyline(
        &mut out,
        report.sorted_trend.iter().map(|p| p.0).collect(),
        "#1f77b4",
    );
    polyline(
        &mut out,
        report.sorted_trend.iter().map(|p| p.1).collect(),
        "#ff7f0e",
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">images sorted by metric delta (blue: metric, orange: consensus)</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    out.push_str("</svg>\n");
    out
}
