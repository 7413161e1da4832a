//! Minimal dependency-free SVG charts: log-scaled n axis, the bound as an
//! orange dashed polyline, estimates as markers with error bars.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;

#[derive(Debug, Clone, Copy)]
pub struct Marker {
    pub n: f64,
    pub value: f64,
    /// half-length of the error bar
    pub half_width: f64,
}

#[derive(Debug, Default)]
pub struct Chart {
    pub title: String,
    pub bound: Vec<(f64, f64)>,
    pub markers: Vec<Marker>,
    /// Horizontal reference line, e.g. `1 - rho`.
    pub level: Option<f64>,
}

impl Chart {
    pub fn render(&self) -> String {
        let xs = self
            .bound
            .iter()
            .map(|p| p.0)
            .chain(self.markers.iter().map(|m| m.n));
        let (mut xmin, mut xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        if !xmin.is_finite() {
            (xmin, xmax) = (1.0, 10.0);
        }
        let (lx0, mut lx1) = (xmin.log10(), xmax.log10());
        if lx1 - lx0 < 1e-9 {
            lx1 = lx0 + 1.0;
        }
        let ys = self
            .bound
            .iter()
            .map(|p| p.1)
            .chain(self.markers.iter().map(|m| m.value + m.half_width))
            .chain(self.level)
            .filter(|y| y.is_finite());
        let ymax = ys.fold(1.0f64, f64::max) * 1.05;
        let px = |n: f64| LEFT + (n.log10() - lx0) / (lx1 - lx0) * (WIDTH - LEFT - RIGHT);
        let py = |y: f64| TOP + (1.0 - y.clamp(0.0, ymax) / ymax) * (HEIGHT - TOP - BOTTOM);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // axes
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
        );
        let mut decade = lx0.floor() as i32;
        while decade as f64 <= lx1 {
            let n = 10f64.powi(decade);
            if n >= xmin * (1.0 - 1e-12) && n <= xmax * (1.0 + 1e-12) {
                let x = px(n);
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
                    y0 + 5.0
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{decade}</text>"#,
                    y0 + 18.0
                );
            }
            decade += 1;
        }
        for i in 0..=4 {
            let y = ymax * i as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{:.2}" x2="{x0}" y2="{:.2}" stroke="black"/>"#,
                x0 - 5.0,
                py(y),
                py(y)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{y:.2}</text>"#,
                x0 - 8.0,
                py(y) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 10.0
        );

        if let Some(level) = self.level {
            let _ = writeln!(
                s,
                r#"<line x1="{x0}" y1="{:.2}" x2="{x1}" y2="{:.2}" stroke="gray" stroke-width="1"/>"#,
                py(level),
                py(level)
            );
        }
        if !self.bound.is_empty() {
            let pts: Vec<String> = self
                .bound
                .iter()
                .filter(|p| p.1.is_finite())
                .map(|&(n, y)| format!("{:.2},{:.2}", px(n), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="orange" stroke-width="2" stroke-dasharray="6,4"/>"#,
                pts.join(" ")
            );
        }
        for m in &self.markers {
            let (x, y) = (px(m.n), py(m.value));
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="steelblue"/>"#,
                py(m.value - m.half_width),
                py(m.value + m.half_width)
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="steelblue"/>"#
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
