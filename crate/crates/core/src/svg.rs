//! Minimal deterministic SVG line charts: polylines, optional shaded
//! bands, axes with ticks, and a text legend. No external dependencies;
//! output bytes depend only on the input data.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

/// A shaded region between two curves sharing x coordinates, drawn behind
/// the lines (e.g. mean +- std).
#[derive(Debug, Clone)]
pub struct Band {
    pub color: String,
    pub upper: Vec<(f64, f64)>,
    pub lower: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub bands: Vec<Band>,
}

fn fmt(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (0.01..1e6).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.2e}")
    }
}

impl Chart {
    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
        }
        for b in &self.bands {
            for &(x, y) in b.upper.iter().chain(b.lower.iter()) {
                xs.push(x);
                ys.push(y);
            }
        }
        let min_max = |v: &[f64]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in v {
                if x.is_finite() {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        (min_max(&xs), min_max(&ys))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        for band in &self.bands {
            if band.upper.is_empty() {
                continue;
            }
            let mut d = String::from("M");
            for &(x, y) in &band.upper {
                d.push_str(&format!(" {:.2},{:.2}", px(x), py(y)));
            }
            for &(x, y) in band.lower.iter().rev() {
                d.push_str(&format!(" L {:.2},{:.2}", px(x), py(y)));
            }
            d.push_str(" Z");
            out.push_str(&format!(
                "<path d=\"{d}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                band.color
            ));
        }

        // Axes.
        out.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" stroke=\"black\"/>\n",
            MARGIN_L,
            HEIGHT - MARGIN_B,
            WIDTH - MARGIN_R
        ));
        out.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\n",
            MARGIN_L,
            HEIGHT - MARGIN_B,
            MARGIN_T
        ));
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            out.push_str(&format!(
                "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\n",
                px(fx),
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                px(fx),
                HEIGHT - MARGIN_B + 18.0,
                fmt(fx)
            ));
            out.push_str(&format!(
                "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" stroke=\"black\"/>\n",
                MARGIN_L - 5.0,
                py(fy),
                MARGIN_L
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                MARGIN_L - 8.0,
                py(fy) + 4.0,
                fmt(fy)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            escape(&self.y_label)
        ));

        for s in &self.series {
            if s.points.is_empty() {
                continue;
            }
            let pts: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                pts.join(" "),
                s.color
            ));
        }

        for (i, s) in self.series.iter().enumerate() {
            let y = MARGIN_T + 6.0 + 16.0 * i as f64;
            out.push_str(&format!(
                "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{2:.2}\" y2=\"{1:.2}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                WIDTH - MARGIN_R - 150.0,
                y,
                WIDTH - MARGIN_R - 126.0,
                s.color
            ));
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                WIDTH - MARGIN_R - 120.0,
                y + 4.0,
                escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
