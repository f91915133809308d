//! Minimal standalone SVG charts: a T² control chart and a contribution bar
//! chart.

use std::fmt::Write;

use crate::diagnose::Diagnosis;
use crate::monitor::MonitorPoint;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Above this many points the chart keeps the per-column maximum.
const MAX_POLYLINE_POINTS: usize = 4000;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
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

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{:.1}" y2="{y0}" stroke="black"/>
<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>
<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        WIDTH - MARGIN_RIGHT,
        (x0 + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        (MARGIN_TOP + y0) / 2.0,
        (MARGIN_TOP + y0) / 2.0,
        escape(y_label)
    );
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// T² against slice index with the UCL drawn as a dashed red line.
pub fn t2_chart(points: &[MonitorPoint], ucl: f64, title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "second of day (k)", "Hotelling T²");

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let k_min = points.first().map_or(0, |p| p.k) as f64;
    let k_max = points.last().map_or(1, |p| p.k).max(k_min as usize + 1) as f64;
    let y_max = points
        .iter()
        .map(|p| p.t2)
        .fold(ucl, f64::max)
        .max(1e-12)
        * 1.05;
    let sx = |k: f64| MARGIN_LEFT + (k - k_min) / (k_max - k_min) * plot_w;
    let sy = |v: f64| HEIGHT - MARGIN_BOTTOM - v / y_max * plot_h;

    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(v) + 4.0,
            tick_label(v)
        );
        let k = k_min + (k_max - k_min) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            sx(k),
            HEIGHT - MARGIN_BOTTOM + 16.0,
            k
        );
    }

    let decimated: Vec<(f64, f64)> = if points.len() > MAX_POLYLINE_POINTS {
        let bucket = points.len().div_ceil(MAX_POLYLINE_POINTS);
        points
            .chunks(bucket)
            .map(|c| {
                let peak = c.iter().max_by(|a, b| a.t2.total_cmp(&b.t2)).expect("non-empty chunk");
                (peak.k as f64, peak.t2)
            })
            .collect()
    } else {
        points.iter().map(|p| (p.k as f64, p.t2)).collect()
    };
    if !decimated.is_empty() {
        out.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points=""#);
        for (i, (k, v)) in decimated.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.2},{:.2}", sx(*k), sy(*v));
        }
        out.push_str("\"/>\n");
    }
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="red" stroke-dasharray="6,4"/>
<text x="{:.1}" y="{:.2}" fill="red" text-anchor="end">UCL = {}</text>"#,
        WIDTH - MARGIN_RIGHT,
        WIDTH - MARGIN_RIGHT,
        sy(ucl) - 4.0,
        tick_label(ucl),
        y = sy(ucl)
    );
    out.push_str("</svg>\n");
    out
}

/// Signed contribution per variable; the root cause is highlighted.
pub fn contribution_chart(diag: &Diagnosis, names: &[String], title: &str) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "variable", "contribution to T²");

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let hi = diag.contributions.iter().copied().fold(0.0, f64::max);
    let lo = diag.contributions.iter().copied().fold(0.0, f64::min);
    let span = (hi - lo).max(1e-12) * 1.1;
    let top = hi + 0.05 * span;
    let sy = |v: f64| MARGIN_TOP + (top - v) / span * plot_h;
    let n = diag.contributions.len().max(1);
    let slot = plot_w / n as f64;

    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="gray"/>"#,
        WIDTH - MARGIN_RIGHT,
        y = sy(0.0)
    );
    for (j, &c) in diag.contributions.iter().enumerate() {
        let x = MARGIN_LEFT + slot * j as f64 + slot * 0.15;
        let (y, h) = if c >= 0.0 {
            (sy(c), sy(0.0) - sy(c))
        } else {
            (sy(0.0), sy(c) - sy(0.0))
        };
        let fill = if j == diag.root_cause { "firebrick" } else { "steelblue" };
        let name = names.get(j).map_or_else(|| format!("#{j}"), |s| s.clone());
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{fill}"><title>{}: {}</title></rect>
<text x="{:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            slot * 0.7,
            escape(&name),
            tick_label(c),
            x + slot * 0.35,
            HEIGHT - MARGIN_BOTTOM + 16.0,
            escape(&name)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">k = {}, T² = {}, UCL = {}</text>"#,
        WIDTH - MARGIN_RIGHT,
        MARGIN_TOP + 12.0,
        diag.k,
        tick_label(diag.t2),
        tick_label(diag.ucl)
    );
    out.push_str("</svg>\n");
    out
}
