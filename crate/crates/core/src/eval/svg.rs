//! Minimal standalone SVG line and scatter plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = x;
        for (px, py) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        let widen = |(lo, hi): (f64, f64)| {
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str, x_label: &str, y_label: &str, frame: &Frame) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
"#,
        WIDTH / 2.0,
        escape(title),
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label),
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    );
    for j in 0..=4 {
        let f = j as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            frame.px(xv),
            HEIGHT - MARGIN + 14.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            MARGIN - 4.0,
            frame.py(yv) + 3.0,
            tick(yv)
        );
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    for (j, label) in labels.iter().enumerate() {
        let y = MARGIN + 16.0 * j as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - MARGIN - 120.0,
            y - 9.0,
            PALETTE[j % PALETTE.len()],
            WIDTH - MARGIN - 105.0,
            y,
            escape(label)
        );
    }
}

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    header(&mut out, title, x_label, y_label, &frame);
    for (j, s) in series.iter().enumerate() {
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            PALETTE[j % PALETTE.len()],
            path.join(" ")
        );
    }
    legend(&mut out, &series.iter().map(|s| s.label).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// One colour per distinct label, in order of first appearance.
pub fn scatter_plot(title: &str, points: &[(f64, f64)], labels: &[String]) -> String {
    let frame = Frame::fit(points.iter().copied());
    let mut out = String::new();
    header(&mut out, title, "component 1", "component 2", &frame);
    let mut seen: Vec<&str> = Vec::new();
    for (&(x, y), label) in points.iter().zip(labels) {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let colour = match seen.iter().position(|s| s == label) {
            Some(j) => j,
            None => {
                seen.push(label);
                seen.len() - 1
            }
        };
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            frame.px(x),
            frame.py(y),
            PALETTE[colour % PALETTE.len()]
        );
    }
    legend(&mut out, &seen);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_has_one_polyline_per_series() {
        let a = Series {
            label: "isotropic",
            points: vec![(1.0, 2.0), (2.0, 1.0)],
        };
        let b = Series {
            label: "directional",
            points: vec![(1.0, 3.0), (2.0, 2.5)],
        };
        let svg = line_plot("snr", "step", "ratio", &[a, b]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">directional<"));
    }

    #[test]
    fn scatter_colours_by_label() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)];
        let labels = ["a".to_string(), "b<".to_string(), "a".to_string()];
        let svg = scatter_plot("svd", &pts, &labels);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("b&lt;"));
        assert_eq!(svg.matches(PALETTE[0]).count(), 3, "two points and one legend swatch");
    }

    #[test]
    fn flat_and_empty_inputs_render() {
        let svg = line_plot("flat", "x", "y", &[Series { label: "c", points: vec![(1.0, 1.0)] }]);
        assert!(!svg.contains("NaN"));
        let empty = scatter_plot("none", &[], &[]);
        assert!(!empty.contains("NaN"));
    }
}
