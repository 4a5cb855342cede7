//! Minimal SVG emitter: line plots and a correlation heatmap. The CSV files
//! written alongside carry the exact numbers.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
    /// Dashed y = x reference.
    pub diagonal: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    format!("{:.2}", v)
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// Data range padded so flat series remain visible.
pub fn padded_range(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

impl LinePlot {
    pub fn render(&self) -> String {
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut out = String::new();
        header(&mut out, W, H);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            num(LEFT + pw / 2.0),
            esc(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                out,
                r#"<line x1="{px}" y1="{b}" x2="{px}" y2="{b2}" stroke="black"/><text x="{px}" y="{t}" text-anchor="middle">{lab}</text>"#,
                px = num(px),
                b = num(TOP + ph),
                b2 = num(TOP + ph + 5.0),
                t = num(TOP + ph + 18.0),
                lab = format!("{xv:.3}")
            );
            let _ = writeln!(
                out,
                r#"<line x1="{l}" y1="{py}" x2="{LEFT}" y2="{py}" stroke="black"/><text x="{t}" y="{py4}" text-anchor="end">{lab}</text>"#,
                l = num(LEFT - 5.0),
                py = num(py),
                t = num(LEFT - 8.0),
                py4 = num(py + 4.0),
                lab = format!("{yv:.3}")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(LEFT + pw / 2.0),
            num(H - 12.0),
            esc(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
            esc(&self.y_label),
            y = num(TOP + ph / 2.0)
        );
        if self.diagonal {
            let lo = x0.max(y0);
            let hi = x1.min(y1);
            if lo < hi {
                let _ = writeln!(
                    out,
                    r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="5,4"/>"##,
                    num(sx(lo)),
                    num(sy(lo)),
                    num(sx(hi)),
                    num(sy(hi))
                );
            }
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y))))
                .collect();
            if pts.len() == 1 {
                let (cx, cy) = pts[0].split_once(',').unwrap();
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
            } else if !pts.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = W - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                num(lx),
                num(lx + 20.0),
                num(lx + 26.0),
                num(ly + 4.0),
                esc(&s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Diverging blue/white/red fill for a value in [-1, 1]; grey for NaN.
fn heat_color(v: f64) -> String {
    if !v.is_finite() {
        return "#cccccc".into();
    }
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Square matrix heatmap. `groups` gives the group index of every row, in
/// order; a thick line separates consecutive groups.
pub fn heatmap(title: &str, labels: &[String], matrix: &[Vec<f64>], groups: &[usize]) -> String {
    let n = labels.len();
    let cell = 36.0;
    let left = 110.0;
    let top = 40.0;
    let w = left + cell * n as f64 + 20.0;
    let h = top + cell * n as f64 + 110.0;
    let mut out = String::new();
    header(&mut out, w, h);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        num(w / 2.0),
        esc(title)
    );
    for (i, row) in matrix.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let y = top + cell * i as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}" stroke="white"/><text x="{}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
                num(x),
                num(y),
                heat_color(v),
                num(x + cell / 2.0),
                num(y + cell / 2.0 + 3.0),
                if v.is_finite() { format!("{v:.2}") } else { "nan".into() }
            );
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let c = cell * i as f64 + cell / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(left - 6.0),
            num(top + c + 4.0),
            esc(l)
        );
        let (tx, ty) = (left + c + 4.0, top + cell * n as f64 + 8.0);
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="end" transform="rotate(-60 {x} {y})">{}</text>"#,
            esc(l),
            x = num(tx),
            y = num(ty)
        );
    }
    let span = cell * n as f64;
    for i in 1..n {
        if groups.get(i) != groups.get(i - 1) {
            let p = cell * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2.5"/><line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2.5"/>"#,
                num(left + p),
                num(top),
                num(left + p),
                num(top + span),
                num(left),
                num(top + p),
                num(left + span),
                num(top + p)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
