//! Minimal SVG charts for sweep summaries and PNG export of rasters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{EvaluationRecord, Method, Regime, SaType};
use crate::raster::TemperatureRaster;

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// A named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line chart with axis labels, min/max tick values, and a legend.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let (x0, x1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = span(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let y0 = y0.min(0.0);
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{v:.4}</text>"#, h - m + 16.0);
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.4}</text>"#, m - 4.0);
    }
    for (k, series) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
        let ly = m + 16.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, w - m - 120.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, w - m - 105.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of `values[row][col]` with a blue-to-red scale and per-cell labels.
pub fn heatmap_svg(title: &str, row_labels: &[String], col_labels: &[String], values: &[Vec<f64>]) -> String {
    let cell = 48.0;
    let (left, top) = (90.0, 40.0);
    let w = left + cell * col_labels.len() as f64 + 20.0;
    let h = top + cell * row_labels.len() as f64 + 40.0;
    let (lo, hi) = span(values.iter().flatten().copied().filter(|v| v.is_finite()));
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for (r, row) in values.iter().enumerate() {
        let y = top + cell * r as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            escape(&row_labels[r])
        );
        for (c, &v) in row.iter().enumerate() {
            let x = left + cell * c as f64;
            let fill = if v.is_finite() {
                let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                format!("rgb({},{},{})", (255.0 * t) as u8, 64, (255.0 * (1.0 - t)) as u8)
            } else {
                "#ccc".to_string()
            };
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}"/>"#);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="white">{v:.1}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + cell * c as f64 + cell / 2.0,
            top + cell * row_labels.len() as f64 + 16.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn method_label(sa: SaType, method: Method) -> String {
    let sa = match sa {
        SaType::None => "",
        SaType::TwoD => " 2D",
        SaType::OneDRow => " 1D row",
        SaType::OneDCol => " 1D col",
    };
    let m = match method {
        Method::Single => "single",
        Method::Integral => "integral",
        Method::Corrected => "corrected",
    };
    format!("{m}{sa}")
}

/// Mean RMSE against forest density, one line per method and aperture.
pub fn density_chart(records: &[EvaluationRecord], regime: Regime) -> String {
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.regime == regime) {
        let e = groups
            .entry(method_label(r.sa_type, r.method))
            .or_default()
            .entry(r.density_tpha.to_bits())
            .or_insert((0.0, 0));
        e.0 += r.rmse;
        e.1 += 1;
    }
    let series: Vec<Series> = groups
        .into_iter()
        .map(|(label, by_density)| {
            let mut points: Vec<(f64, f64)> = by_density
                .into_iter()
                .map(|(d, (s, n))| (f64::from_bits(d), s / n as f64))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect();
    let title = match regime {
        Regime::Full => "Mean RMSE, full regime [0, 300) °C",
        Regime::Fire => "Mean RMSE, fire regime [50, 300) °C",
    };
    line_chart_svg(title, "forest density (trees/ha)", "RMSE (°C)", &series)
}

/// Mean RMSE of each method (rows) per density (columns).
pub fn method_heatmap(records: &[EvaluationRecord], regime: Regime) -> String {
    let mut densities: Vec<f64> = records.iter().map(|r| r.density_tpha).collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    let mut rows: BTreeMap<String, Vec<(f64, usize)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.regime == regime) {
        let col = densities.iter().position(|&d| d == r.density_tpha).expect("density listed");
        let row = rows
            .entry(method_label(r.sa_type, r.method))
            .or_insert_with(|| vec![(0.0, 0); densities.len()]);
        row[col].0 += r.rmse;
        row[col].1 += 1;
    }
    let labels: Vec<String> = rows.keys().cloned().collect();
    let values: Vec<Vec<f64>> = rows
        .values()
        .map(|row| row.iter().map(|&(s, n)| if n == 0 { f64::NAN } else { s / n as f64 }).collect())
        .collect();
    let cols: Vec<String> = densities.iter().map(|d| format!("{d}")).collect();
    heatmap_svg("Mean RMSE (°C) by density (trees/ha)", &labels, &cols, &values)
}

/// Grayscale PNG of a raster over `[lo, hi]` °C; no-data pixels are black.
pub fn write_png(r: &TemperatureRaster, lo: f32, hi: f32, path: impl AsRef<Path>) -> Result<()> {
    if !(hi > lo) {
        return Err(Error::param("display range must be increasing"));
    }
    let pixels: Vec<u8> = r
        .data()
        .iter()
        .map(|&t| {
            if t.is_nan() {
                0
            } else {
                (((t - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as u8
            }
        })
        .collect();
    let img = image::GrayImage::from_raw(r.width(), r.height(), pixels).expect("buffer matches dimensions");
    let path = path.as_ref();
    img.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_lists_every_series() {
        let svg = line_chart_svg(
            "t",
            "x",
            "y",
            &[
                Series {
                    label: "a".into(),
                    points: vec![(0.0, 1.0), (1.0, 2.0)],
                },
                Series {
                    label: "b<c".into(),
                    points: vec![(0.0, 3.0)],
                },
            ],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let svg = heatmap_svg(
            "h",
            &["r0".into(), "r1".into()],
            &["c0".into(), "c1".into(), "c2".into()],
            &[vec![1.0, 2.0, 3.0], vec![4.0, f64::NAN, 6.0]],
        );
        // background plus six cells
        assert_eq!(svg.matches("<rect").count(), 7);
        assert!(svg.contains("#ccc"));
    }
}
