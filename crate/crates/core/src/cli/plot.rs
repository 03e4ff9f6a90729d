//! Static SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, dashed: false }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    /// Same scale on both axes (for planar trajectories).
    pub equal_aspect: bool,
    pub series: Vec<Series>,
    /// Filled disks `(x, y, radius)`.
    pub disks: Vec<(f64, f64, f64)>,
    /// Horizontal reference lines.
    pub h_lines: Vec<f64>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let stride = ((b - a) / 6 + 1).max(1);
            return (a..=b).step_by(stride as usize).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
        }
        let raw = (self.hi - self.lo) / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut v = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while v <= self.hi + 1e-9 * step {
            let label = format!("{}", (v / step).round() * step);
            out.push((v, trim_float(&label)));
            v += step;
        }
        out
    }
}

fn trim_float(s: &str) -> String {
    let x: f64 = s.parse().unwrap_or(0.0);
    let r = format!("{:.6}", x);
    let r = r.trim_end_matches('0').trim_end_matches('.');
    if r == "-0" { "0".into() } else { r.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let points = || self.series.iter().flat_map(|s| s.points.iter());
        let log_ok = |y: f64| !self.log_y || y > 0.0;
        let mut xa = Axis::fit(
            points().map(|p| p.0).chain(self.disks.iter().flat_map(|d| [d.0 - d.2, d.0 + d.2])),
            false,
        );
        let mut ya = Axis::fit(
            points()
                .map(|p| p.1)
                .filter(|y| log_ok(*y))
                .chain(self.disks.iter().flat_map(|d| [d.1 - d.2, d.1 + d.2]))
                .chain(self.h_lines.iter().copied()),
            self.log_y,
        );
        let (l, r, t, b) = MARGIN;
        let (pw, ph) = (WIDTH - l - r, HEIGHT - t - b);
        if self.equal_aspect {
            // Widen whichever axis is tighter so one unit has one length.
            let sx = (xa.hi - xa.lo) / pw;
            let sy = (ya.hi - ya.lo) / ph;
            if sx > sy {
                let extra = sx * ph - (ya.hi - ya.lo);
                ya.lo -= extra / 2.0;
                ya.hi += extra / 2.0;
            } else {
                let extra = sy * pw - (xa.hi - xa.lo);
                xa.lo -= extra / 2.0;
                xa.hi += extra / 2.0;
            }
        }
        let px = |x: f64| l + xa.frac(x) * pw;
        let py = |y: f64| t + (1.0 - ya.frac(y)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(s, r##"<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
        for (v, label) in xa.ticks() {
            let x = px(v);
            let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, t + ph);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#, t + ph + 16.0);
        }
        for (v, label) in ya.ticks() {
            let y = py(v);
            let _ = writeln!(s, r##"<line x1="{l}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, l + pw);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, l - 6.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, l + pw / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            t + ph / 2.0,
            escape(&self.y_label)
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        let _ = writeln!(s, r#"<clipPath id="plot"><rect x="{l}" y="{t}" width="{pw}" height="{ph}"/></clipPath>"#);
        for &(cx, cy, rad) in &self.disks {
            let rx = px(cx + rad) - px(cx);
            let ry = py(cy) - py(cy + rad);
            let _ = writeln!(
                s,
                r##"<ellipse cx="{:.2}" cy="{:.2}" rx="{rx:.2}" ry="{ry:.2}" fill="#999" fill-opacity="0.5" stroke="#555"/>"##,
                px(cx),
                py(cy)
            );
        }
        for &h in &self.h_lines {
            if log_ok(h) {
                let y = py(h);
                let _ = writeln!(s, r##"<line x1="{l}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#000" stroke-dasharray="2 3"/>"##, l + pw);
            }
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite() && log_ok(p.1))
                .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(s, "</g>");
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let y = t + 14.0 + 16.0 * i as f64;
            let x = l + pw - 150.0;
            let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="1.5"{dash}/>"#, x + 24.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 30.0, y + 4.0, escape(&series.label));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_labels() {
        let chart = Chart {
            title: "error <decay>".into(),
            x_label: "t".into(),
            y_label: "err".into(),
            log_y: true,
            series: vec![Series::new("err", (0..50).map(|i| (i as f64 * 0.1, (-(i as f64) * 0.1).exp())).collect())],
            ..Default::default()
        };
        let svg = chart.to_svg();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("error &lt;decay&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("1e0"));
    }

    #[test]
    fn log_axis_drops_nonpositive_values() {
        let chart = Chart {
            log_y: true,
            series: vec![Series::new("e", vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.01)])],
            ..Default::default()
        };
        let svg = chart.to_svg();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }

    #[test]
    fn ticks_are_round_numbers() {
        let ax = Axis { lo: -0.3, hi: 2.7, log: false };
        let labels: Vec<String> = ax.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, ["0", "0.5", "1", "1.5", "2", "2.5"]);
    }

    #[test]
    fn equal_aspect_draws_circles() {
        let chart = Chart {
            equal_aspect: true,
            disks: vec![(0.0, 0.0, 1.0)],
            series: vec![Series::new("p", vec![(-3.0, 0.0), (3.0, 0.5)])],
            ..Default::default()
        };
        let svg = chart.to_svg();
        let e = svg.lines().find(|l| l.starts_with("<ellipse")).unwrap();
        let grab = |k: &str| -> f64 {
            let i = e.find(&format!("{k}=\"")).unwrap() + k.len() + 2;
            e[i..].split('"').next().unwrap().parse().unwrap()
        };
        assert!((grab("rx") - grab("ry")).abs() < 0.05);
    }
}
