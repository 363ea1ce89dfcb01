use std::fmt::Write as _;

use super::summary::BoxStats;

pub const TRUTH_COLOR: &str = "#d62728";
pub const ESTIMATE_COLOR: &str = "#1f77b4";
pub const RAW_COLOR: &str = "#7f7f7f";

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    /// Vertical segments from zero, as for Dirac amplitudes.
    Stem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn line(name: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            color: color.into(),
            style: SeriesStyle::Line,
            points,
        }
    }

    pub fn stem(name: &str, color: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            style: SeriesStyle::Stem,
            ..Series::line(name, color, points)
        }
    }
}

/// Affine map from data to canvas coordinates.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(
    out: &mut String,
    f: &Frame,
    x_label: &str,
    y_label: &str,
    x_ticks: &[(f64, String)],
    y_ticks: &[(f64, String)],
) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for (v, label) in y_ticks {
        let y = f.py(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0,
            escape(label)
        );
    }
    for (v, label) in x_ticks {
        let x = f.px(*v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 4.0,
            y0 + 17.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    (0..=4)
        .map(|i| {
            let v = lo + (hi - lo) * i as f64 / 4.0;
            (v, format!("{v:.3}"))
        })
        .collect()
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Line and stem plot with a legend.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let mut xr = extent(all().map(|p| p.0));
    let mut yr = extent(all().map(|p| p.1).chain(std::iter::once(0.0)));
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
    }
    if !yr.0.is_finite() {
        yr = (0.0, 1.0);
    }
    let f = Frame::new(xr, yr);
    let mut out = String::new();
    header(&mut out, title);
    axes(
        &mut out,
        &f,
        x_label,
        y_label,
        &linear_ticks(f.x.0, f.x.1),
        &linear_ticks(f.y.0, f.y.1),
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<&(f64, f64)> = s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        match s.style {
            SeriesStyle::Line => {
                let d: Vec<String> = pts
                    .iter()
                    .enumerate()
                    .map(|(j, p)| format!("{}{:.2},{:.2}", if j == 0 { 'M' } else { 'L' }, f.px(p.0), f.py(p.1)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    d.join(" "),
                    s.color
                );
            }
            SeriesStyle::Stem => {
                for p in pts {
                    let (x, y, base) = (f.px(p.0), f.py(p.1), f.py(0.0));
                    let _ = writeln!(
                        out,
                        r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{y:.2}" stroke="{c}" stroke-width="1.5"/><circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{c}"/>"#,
                        c = s.color
                    );
                }
            }
        }
        let ly = TOP + 14.0 * i as f64;
        let lx = WIDTH - RIGHT - 170.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            s.color,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Boxplots on a log10 axis (errors span orders of magnitude). Boxes whose
/// statistics are missing are drawn as empty slots.
pub fn box_plot(title: &str, y_label: &str, boxes: &[(String, Option<BoxStats>)]) -> String {
    let floor = 1e-18;
    let log = |v: f64| v.max(floor).log10();
    let yr = extent(
        boxes
            .iter()
            .filter_map(|(_, b)| b.as_ref())
            .flat_map(|b| [log(b.min), log(b.max)]),
    );
    let yr = if yr.0.is_finite() {
        (yr.0.floor(), yr.1.ceil())
    } else {
        (-1.0, 0.0)
    };
    let n = boxes.len().max(1) as f64;
    let f = Frame::new((0.0, n), yr);
    let ticks: Vec<(f64, String)> = (yr.0 as i64..=yr.1 as i64)
        .map(|e| (e as f64, format!("1e{e}")))
        .collect();
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "", y_label, &[], &ticks);
    let half = 0.25 * (f.px(1.0) - f.px(0.0));
    for (i, (label, b)) in boxes.iter().enumerate() {
        let cx = f.px(i as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 16.0,
            escape(label)
        );
        let Some(b) = b else { continue };
        let (q1, q3, med) = (f.py(log(b.q1)), f.py(log(b.q3)), f.py(log(b.median)));
        let (lw, uw) = (f.py(log(b.lower_whisker)), f.py(log(b.upper_whisker)));
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{lw:.2}" x2="{cx:.2}" y2="{q1:.2}" stroke="black"/><line x1="{cx:.2}" y1="{q3:.2}" x2="{cx:.2}" y2="{uw:.2}" stroke="black"/>"#
        );
        for w in [lw, uw] {
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{w:.2}" x2="{:.2}" y2="{w:.2}" stroke="black"/>"#,
                cx - half / 2.0,
                cx + half / 2.0
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="{ESTIMATE_COLOR}" fill-opacity="0.3" stroke="{ESTIMATE_COLOR}"/>"#,
            cx - half,
            2.0 * half,
            (q1 - q3).max(0.5)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{med:.2}" x2="{:.2}" y2="{med:.2}" stroke="{TRUTH_COLOR}" stroke-width="2"/>"#,
            cx - half,
            cx + half
        );
        for o in &b.outliers {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.2}" cy="{:.2}" r="3" fill="none" stroke="black"/>"#,
                f.py(log(*o))
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
