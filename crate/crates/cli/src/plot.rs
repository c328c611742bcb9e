//! Minimal standalone SVG charts. Coordinates are printed with two decimals, so the same
//! inputs always give the same bytes.

use std::fmt::Write as _;

use nalgebra::DMatrix;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Points of the kernel density outline of each violin.
const DENSITY_POINTS: usize = 40;

struct Frame {
    lo: f64,
    hi: f64,
}

impl Frame {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Frame { lo: lo - pad, hi: hi + pad }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (HEIGHT - TOP - BOTTOM) * (self.hi - v) / (self.hi - self.lo)
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn y_axis(s: &mut String, frame: &Frame) {
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.2}" stroke="#333"/>"##,
        HEIGHT - BOTTOM
    );
    for i in 0..=4 {
        let v = frame.lo + (frame.hi - frame.lo) * i as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"##,
            LEFT,
            WIDTH - RIGHT,
            LEFT - 4.0,
            y + 4.0
        );
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Gaussian kernel density on `grid`, with Silverman's bandwidth.
fn density(x: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let h = (1.06 * sd * n.powf(-0.2)).max(1e-9);
    grid.iter()
        .map(|g| x.iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>() / (n * h * (2.0 * std::f64::consts::PI).sqrt()))
        .collect()
}

/// Side-by-side violins: one slot per label, one violin per group inside each slot.
/// `marks` draws a short black tick at the true value of each slot.
pub fn violins(title: &str, labels: &[String], groups: &[(String, Vec<Vec<f64>>)], marks: Option<&[f64]>) -> String {
    let frame = Frame::new(
        groups.iter().flat_map(|(_, series)| series.iter().flatten().copied()).chain(marks.unwrap_or(&[]).iter().copied()),
    );
    let mut s = String::new();
    header(&mut s, title);
    y_axis(&mut s, &frame);
    let slots = labels.len().max(1) as f64;
    let slot = (WIDTH - LEFT - RIGHT) / slots;
    let lanes = groups.len().max(1) as f64;
    let half = 0.45 * slot / lanes;
    for (i, label) in labels.iter().enumerate() {
        let x0 = LEFT + slot * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x0 + slot / 2.0,
            HEIGHT - BOTTOM + 16.0,
            escape(label)
        );
        for (g, (_, series)) in groups.iter().enumerate() {
            let Some(x) = series.get(i).filter(|x| x.len() > 1) else { continue };
            let cx = x0 + slot * (g as f64 + 0.5) / lanes;
            let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let grid: Vec<f64> =
                (0..DENSITY_POINTS).map(|k| lo + (hi - lo) * k as f64 / (DENSITY_POINTS - 1) as f64).collect();
            let d = density(x, &grid);
            let peak = d.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut pts = String::new();
            for (v, dv) in grid.iter().zip(&d) {
                let _ = write!(pts, "{:.2},{:.2} ", cx + half * dv / peak, frame.y(*v));
            }
            for (v, dv) in grid.iter().zip(&d).rev() {
                let _ = write!(pts, "{:.2},{:.2} ", cx - half * dv / peak, frame.y(*v));
            }
            let color = PALETTE[g % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.45" stroke="{color}"/>"#,
                pts.trim_end()
            );
        }
        if let Some(t) = marks.and_then(|m| m.get(i)) {
            let y = frame.y(*t);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000" stroke-width="2"/>"##,
                x0 + 0.1 * slot,
                x0 + 0.9 * slot
            );
        }
    }
    legend(&mut s, groups.iter().map(|(n, _)| n.as_str()));
    s.push_str("</svg>\n");
    s
}

fn legend<'a>(s: &mut String, names: impl Iterator<Item = &'a str>) {
    for (g, name) in names.enumerate() {
        let x = WIDTH - RIGHT - 90.0;
        let y = TOP + 14.0 * g as f64;
        let color = PALETTE[g % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            y - 9.0,
            x + 14.0,
            y,
            escape(name)
        );
    }
}

/// Line chart of several curves sampled at `0, 1, 2, ...`.
pub fn curves(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<f64>)]) -> String {
    let frame = Frame::new(series.iter().flat_map(|(_, c)| c.iter().copied()).chain([0.0]));
    let len = series.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(2);
    let x = |k: usize| LEFT + (WIDTH - LEFT - RIGHT) * k as f64 / (len - 1) as f64;
    let mut s = String::new();
    header(&mut s, title);
    y_axis(&mut s, &frame);
    for k in 0..len {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#, x(k), HEIGHT - BOTTOM + 16.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for (g, (_, c)) in series.iter().enumerate() {
        let pts: Vec<String> =
            c.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(k, v)| format!("{:.2},{:.2}", x(k), frame.y(*v))).collect();
        let color = PALETTE[g % PALETTE.len()];
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
    }
    legend(&mut s, series.iter().map(|(n, _)| n.as_str()));
    s.push_str("</svg>\n");
    s
}

/// Square heatmap of a nonnegative matrix, white at zero and dark blue at the maximum.
pub fn heatmap(title: &str, m: &DMatrix<f64>) -> String {
    let peak = m.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let side = (HEIGHT - TOP - BOTTOM) / m.nrows().max(m.ncols()).max(1) as f64;
    let mut s = String::new();
    header(&mut s, title);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let t = (m[(i, j)] / peak).clamp(0.0, 1.0);
            let shade = |full: f64| (255.0 - t * (255.0 - full)).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="rgb({},{},{})"><title>{i},{j}: {:.3}</title></rect>"#,
                LEFT + side * j as f64,
                TOP + side * i as f64,
                shade(8.0),
                shade(48.0),
                shade(107.0),
                m[(i, j)]
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">max {peak:.3}</text>"#,
        LEFT + side * m.ncols() as f64 + 16.0,
        TOP + 12.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_closed_svg_documents() {
        let v = violins("t", &["a".into()], &[("g".into(), vec![vec![0.0, 1.0, 2.0]])], Some(&[1.0]));
        let c = curves("t", "x", "y", &[("a".into(), vec![1.0, 0.5, 0.25])]);
        let h = heatmap("t", &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        for doc in [v, c, h] {
            assert!(doc.starts_with("<svg") && doc.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn density_integrates_to_about_one() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 / 199.0) - 0.5).collect();
        let grid: Vec<f64> = (0..2001).map(|k| -2.0 + 4.0 * k as f64 / 2000.0).collect();
        let d = density(&x, &grid);
        let area: f64 = d.iter().sum::<f64>() * 4.0 / 2000.0;
        assert!((area - 1.0).abs() < 1e-3, "{area}");
    }
}
