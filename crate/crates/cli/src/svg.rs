//! Hand-rolled SVG plots: ROC curves per scenario kind and an MAE bar
//! chart. No rendering dependency, deterministic output, byte-diffable in
//! tests.

use std::fmt::Write as _;

use bargebench::metrics::EvalReport;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

const W: f64 = 480.0;
const H: f64 = 400.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_T: f64 = 24.0;
const PLOT_W: f64 = 380.0;
const PLOT_H: f64 = 320.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn header(s: &mut String) {
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
}

fn line(s: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, style: &str) {
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>",
        fmt(x1),
        fmt(y1),
        fmt(x2),
        fmt(y2)
    );
}

fn text(s: &mut String, x: f64, y: f64, anchor: &str, extra: &str, body: &str) {
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\"{extra}>{body}</text>",
        fmt(x),
        fmt(y)
    );
}

/// ROC polylines for every kind that has curve points; `None` when no kind
/// does (e.g. a self-referencing-only report).
pub fn roc_curves(report: &EvalReport) -> Option<String> {
    let curves: Vec<_> = report.kinds.iter().filter(|k| !k.roc.is_empty()).collect();
    if curves.is_empty() {
        return None;
    }
    let x = |fpr: f64| MARGIN_L + fpr * PLOT_W;
    let y = |tpr: f64| MARGIN_T + (1.0 - tpr) * PLOT_H;

    let mut s = String::new();
    header(&mut s);
    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(PLOT_W),
        fmt(PLOT_H)
    );
    // Chance diagonal.
    line(
        &mut s,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0),
        "stroke=\"#bbb\" stroke-dasharray=\"4 3\"",
    );
    for t in [0.0, 0.5, 1.0] {
        text(
            &mut s,
            x(t),
            MARGIN_T + PLOT_H + 16.0,
            "middle",
            "",
            &t.to_string(),
        );
        text(&mut s, MARGIN_L - 6.0, y(t) + 4.0, "end", "", &t.to_string());
    }
    text(
        &mut s,
        MARGIN_L + PLOT_W / 2.0,
        H - 8.0,
        "middle",
        "",
        "false positive rate",
    );
    let ylab = fmt(MARGIN_T + PLOT_H / 2.0);
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{ylab}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 14 {ylab})\">true positive rate</text>"
    );

    for (i, k) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = k
            .roc
            .iter()
            .map(|&(f, t)| format!("{},{}", fmt(x(f)), fmt(y(t))))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 16.0 * i as f64;
        line(
            &mut s,
            MARGIN_L + 10.0,
            ly - 4.0,
            MARGIN_L + 30.0,
            ly - 4.0,
            &format!("stroke=\"{color}\" stroke-width=\"1.5\""),
        );
        text(&mut s, MARGIN_L + 36.0, ly, "start", "", k.kind.as_str());
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Bar chart of one value per label; values are expected in [0, 1]
/// (MAE scale) and the axis is fixed to that range.
pub fn mae_bars(title: &str, labels: &[String], values: &[f64]) -> String {
    assert_eq!(labels.len(), values.len());
    let n = labels.len().max(1) as f64;
    let slot = PLOT_W / n;
    let bar_w = slot * 0.6;
    let base = MARGIN_T + PLOT_H;

    let mut s = String::new();
    header(&mut s);
    text(&mut s, MARGIN_L + PLOT_W / 2.0, 16.0, "middle", "", title);
    line(
        &mut s,
        MARGIN_L,
        base,
        MARGIN_L + PLOT_W,
        base,
        "stroke=\"#333\"",
    );
    for t in [0.0, 0.5, 1.0] {
        let ty = base - t * PLOT_H;
        text(
            &mut s,
            MARGIN_L - 6.0,
            ty + 4.0,
            "end",
            "",
            &t.to_string(),
        );
        line(&mut s, MARGIN_L, ty, MARGIN_L + PLOT_W, ty, "stroke=\"#eee\"");
    }
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let cx = MARGIN_L + slot * (i as f64 + 0.5);
        let h = v.clamp(0.0, 1.0) * PLOT_H;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>",
            fmt(cx - bar_w / 2.0),
            fmt(base - h),
            fmt(bar_w),
            fmt(h)
        );
        text(
            &mut s,
            cx,
            base - h - 6.0,
            "middle",
            "",
            &format!("{v:.4}"),
        );
        text(&mut s, cx, base + 16.0, "middle", "", label);
    }
    s.push_str("</svg>\n");
    s
}
