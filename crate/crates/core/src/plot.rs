//! Minimal SVG line charts for simulation logs.
//!
//! Every chart is a pure function of the log (plus `sigma` for the
//! estimation-error chart, whose targets depend on it).

use std::fmt::Write as _;

use crate::duffing::{true_coeffs, Channel};
use crate::sim::SimLog;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 140.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in self.series.iter().flat_map(|s| s.points.iter()) {
            if x.is_finite() && y.is_finite() {
                b = (b.0.min(*x), b.1.max(*x), b.2.min(*y), b.3.max(*y));
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, -1.0, 1.0);
        }
        if b.1 - b.0 <= 0.0 {
            b.1 = b.0 + 1.0;
        }
        if b.3 - b.2 <= 1e-300 {
            let pad = if b.2 == 0.0 { 1.0 } else { b.2.abs() * 0.1 };
            b.2 -= pad;
            b.3 += pad;
        } else {
            let pad = 0.05 * (b.3 - b.2);
            b.2 -= pad;
            b.3 += pad;
        }
        b
    }

    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        for t in ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_T + ph,
                MARGIN_T + ph + 16.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y0, y1) {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_L + pw,
                MARGIN_L - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let stride = series.points.len().div_ceil(MAX_POINTS).max(1);
            let mut path = String::new();
            let mut pen_down = false;
            let last = series.points.len().saturating_sub(1);
            for (j, &(x, y)) in series.points.iter().enumerate() {
                if j % stride != 0 && j != last {
                    continue;
                }
                if !(x.is_finite() && y.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                pen_down = true;
            }
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.4"/>"#, path.trim_end());
            let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
            let lx = MARGIN_L + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn series(log: &SimLog, label: &str, f: impl Fn(&crate::sim::Record) -> f64) -> Series {
    Series { label: label.to_string(), points: log.records.iter().map(|r| (r.t, f(r))).collect() }
}

pub fn trajectory_chart(log: &SimLog) -> LineChart {
    LineChart {
        title: "State trajectory".into(),
        x_label: "t [s]".into(),
        y_label: "state".into(),
        series: vec![series(log, "x1", |r| r.x1), series(log, "x2", |r| r.x2)],
    }
}

pub fn tracking_chart(log: &SimLog) -> LineChart {
    LineChart {
        title: "Tracking error".into(),
        x_label: "t [s]".into(),
        y_label: "e = x1 - v1".into(),
        series: vec![series(log, "e", |r| r.e)],
    }
}

pub fn estimation_chart(log: &SimLog, sigma: f64) -> LineChart {
    let a1 = true_coeffs(Channel::Velocity, sigma);
    let a2 = true_coeffs(Channel::Input, sigma);
    let (t11, t21, t23) = (a1.as_slice()[0], a2.as_slice()[0], a2.as_slice()[2]);
    LineChart {
        title: "Coefficient estimation error".into(),
        x_label: "t [s]".into(),
        y_label: "estimate - true value".into(),
        series: vec![
            series(log, "a11 error", |r| r.a11 - t11),
            series(log, "a21 error", |r| r.a21 - t21),
            series(log, "a23 error", |r| r.a23 - t23),
        ],
    }
}

pub fn k_hat_chart(log: &SimLog) -> Option<LineChart> {
    if log.records.iter().all(|r| r.k_hat.is_none()) {
        return None;
    }
    Some(LineChart {
        title: "Adaptive gain".into(),
        x_label: "t [s]".into(),
        y_label: "k_hat".into(),
        series: vec![series(log, "k_hat", |r| r.k_hat.unwrap_or(f64::NAN))],
    })
}

/// `(file name, svg)` for every chart that applies to this log.
pub fn render_all(log: &SimLog, sigma: f64) -> Vec<(&'static str, String)> {
    let mut out = vec![
        ("trajectory.svg", trajectory_chart(log).to_svg()),
        ("tracking_error.svg", tracking_chart(log).to_svg()),
        ("estimation_error.svg", estimation_chart(log, sigma).to_svg()),
    ];
    if let Some(c) = k_hat_chart(log) {
        out.push(("khat.svg", c.to_svg()));
    }
    out
}
