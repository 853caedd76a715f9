//! Static SVG line plots and heatmaps. Coordinates are printed with fixed
//! precision so identical data gives identical files.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title)).unwrap();
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn axes(s: &mut String, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    writeln!(s, r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#).unwrap();
    let font = r#"font-family="sans-serif" font-size="11""#;
    writeln!(s, r#"<text x="{x0:.1}" y="{:.1}" {font} text-anchor="start">{:.3e}</text>"#, y0 + 16.0, xr.0).unwrap();
    writeln!(s, r#"<text x="{x1:.1}" y="{:.1}" {font} text-anchor="end">{:.3e}</text>"#, y0 + 16.0, xr.1).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{y0:.1}" {font} text-anchor="end">{:.3e}</text>"#, x0 - 4.0, yr.0).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" {font} text-anchor="end">{:.3e}</text>"#, x0 - 4.0, y1 + 10.0, yr.1).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" {font} text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.1}" {font} text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

/// Line plot; with `log_y` nonpositive values are dropped and `log10` is plotted.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let tf = |y: f64| if log_y { if y > 0.0 { y.log10() } else { f64::NAN } } else { y };
    let mut s = header(title);
    let xr = range(series.iter().flat_map(|se| se.points.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|se| se.points.iter().map(|p| tf(p.1))));
    if let (Some(xr), Some(yr)) = (xr, yr) {
        let ylabel = if log_y { format!("log10 {ylabel}") } else { ylabel.to_string() };
        axes(&mut s, xr, yr, xlabel, &ylabel);
        let px = |x: f64| LEFT + (x - xr.0) / (xr.1 - xr.0) * (W - LEFT - RIGHT);
        let py = |y: f64| H - BOTTOM - (y - yr.0) / (yr.1 - yr.0) * (H - TOP - BOTTOM);
        for (i, se) in series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in &se.points {
                let y = tf(y);
                if !x.is_finite() || !y.is_finite() {
                    pen_down = false;
                    continue;
                }
                write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(x), py(y)).unwrap();
                pen_down = true;
            }
            writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end()).unwrap();
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{color}" text-anchor="end">{}</text>"#,
                W - RIGHT - 4.0,
                TOP + 14.0 * (i as f64 + 1.0),
                escape(se.label)
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of `values[(i, j)]` with rows along the horizontal axis.
pub fn heatmap(title: &str, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str, values: &ndarray::Array2<f64>) -> String {
    let mut s = header(title);
    axes(&mut s, xr, yr, xlabel, ylabel);
    let (ni, nj) = values.dim();
    let vmax = values.iter().copied().filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    let cw = (W - LEFT - RIGHT) / ni as f64;
    let ch = (H - TOP - BOTTOM) / nj as f64;
    for ((i, j), v) in values.indexed_iter() {
        let level = if vmax > 0.0 && v.is_finite() { (v / vmax).clamp(0.0, 1.0) } else { 0.0 };
        if level < 1e-3 {
            continue;
        }
        let shade = (255.0 * (1.0 - level)).round() as u8;
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
            LEFT + i as f64 * cw,
            H - BOTTOM - (j as f64 + 1.0) * ch,
            cw + 0.05,
            ch + 0.05
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_well_formed() {
        let se = Series {
            label: "r<1",
            points: vec![(0.0, 1.0), (1.0, 0.1), (2.0, 0.0), (3.0, 0.01)],
        };
        let s = line_plot("decay", "t", "r", &[se], true);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("r&lt;1"));
        // the zero sample breaks the log line into two pieces
        let data = s.lines().find(|l| l.contains("stroke-width")).unwrap();
        assert_eq!(data.matches('M').count(), 2);
    }

    #[test]
    fn heatmap_skips_empty_cells() {
        let mut v = ndarray::Array2::zeros((4, 3));
        v[[1, 2]] = 2.0;
        v[[3, 0]] = 1.0;
        let s = heatmap("rho", (-1.0, 1.0), (-2.0, 2.0), "x", "p", &v);
        assert_eq!(s.matches("<rect").count(), 3);
        assert!(s.contains("rgb(0,0,255)") && s.contains("rgb(128,128,255)"));
    }

    #[test]
    fn empty_input() {
        let s = line_plot("none", "t", "y", &[], false);
        assert!(s.ends_with("</svg>\n"));
    }
}
