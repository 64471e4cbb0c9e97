//! Standalone SVG line plots of two CSV columns.
//!
//! One polyline per value of the group column, a circle marker per point,
//! and a legend on the right. When the x column is `lambda` the axis is
//! logarithmic with one tick per decade; zero is drawn one decade below the
//! smallest positive value and labelled `0`. Rows whose x or y cell is
//! empty or not a number are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotRequest<'a> {
    pub x_column: &'a str,
    pub y_column: &'a str,
    pub group_by: Option<&'a str>,
    /// `(column, value)` pairs a row must match exactly.
    pub filters: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Invalid(format!("unknown column {name:?}")))
}

/// Reads the requested series from a CSV file.
pub fn load_series(csv_path: &Path, req: &PlotRequest<'_>) -> Result<Vec<Series>> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| CliError::csv(csv_path, e))?;
    let headers = reader.headers().map_err(|e| CliError::csv(csv_path, e))?.clone();
    let xi = column(&headers, req.x_column)?;
    let yi = column(&headers, req.y_column)?;
    let gi = req.group_by.map(|g| column(&headers, g)).transpose()?;
    let filters = req
        .filters
        .iter()
        .map(|(c, v)| Ok((column(&headers, c)?, v.as_str())))
        .collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| CliError::csv(csv_path, e))?;
        if filters.iter().any(|&(c, v)| row.get(c) != Some(v)) {
            continue;
        }
        let parse = |i: usize| row.get(i).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
        if let (Some(x), Some(y)) = (parse(xi), parse(yi)) {
            let key = gi.map(|g| row.get(g).unwrap_or("").to_string()).unwrap_or_default();
            groups.entry(key).or_default().push((x, y));
        }
    }
    if groups.is_empty() {
        return Err(CliError::Invalid(format!(
            "no rows with numeric {} and {} in {}",
            req.x_column,
            req.y_column,
            csv_path.display()
        )));
    }
    let mut keys: Vec<String> = groups.keys().cloned().collect();
    if keys.iter().all(|k| k.parse::<f64>().is_ok()) {
        keys.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    Ok(keys
        .into_iter()
        .map(|k| {
            let mut points = groups.remove(&k).expect("key present");
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = match req.group_by {
                Some(g) => format!("{g} = {k}"),
                None => req.y_column.to_string(),
            };
            Series { label, points }
        })
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    log: bool,
    zero_at: f64,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn transform(&self, v: f64) -> f64 {
        if !self.log {
            v
        } else if v <= 0.0 {
            self.zero_at
        } else {
            v.log10()
        }
    }

    fn build(values: &[f64], log: bool) -> Self {
        let positive = values.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        let zero_at = if positive.is_finite() {
            positive.log10().floor() - 1.0
        } else {
            0.0
        };
        let mut axis = Axis {
            log,
            zero_at,
            lo: 0.0,
            hi: 0.0,
        };
        let t: Vec<f64> = values.iter().map(|&v| axis.transform(v)).collect();
        let (mut lo, mut hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if !(hi > lo) {
            let pad = if log { 1.0 } else { lo.abs().max(1.0) * 0.5 };
            lo -= pad;
            hi += pad;
        }
        axis.lo = lo;
        axis.hi = hi;
        axis
    }

    fn frac(&self, v: f64) -> f64 {
        (self.transform(v) - self.lo) / (self.hi - self.lo)
    }

    /// (position in transformed units, label).
    fn ticks(&self, has_zero: bool) -> Vec<(f64, String)> {
        if self.log {
            let mut out = Vec::new();
            let mut d = self.lo.ceil();
            while d <= self.hi + 1e-9 {
                let label = if has_zero && d == self.zero_at {
                    "0".to_string()
                } else {
                    format!("1e{}", d as i64)
                };
                out.push((d, label));
                d += 1.0;
            }
            out
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format_number(v))
                })
                .collect()
        }
    }
}

fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" || s.is_empty() {
        format!("{v:.2e}")
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the series as an SVG 1.1 document.
pub fn render_svg(series: &[Series], x_label: &str, y_label: &str, log_x: bool) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).collect();
    let xa = Axis::build(&xs, log_x);
    let ya = Axis::build(&ys, false);
    let has_zero = log_x && xs.iter().any(|&v| v <= 0.0);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |v: f64| LEFT + xa.frac(v) * pw;
    let py = |v: f64| TOP + (1.0 - ya.frac(v)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (t, label) in xa.ticks(has_zero) {
        let x = LEFT + (t - xa.lo) / (xa.hi - xa.lo) * pw;
        let y = TOP + ph;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y + 5.0,
            y + 18.0,
            escape(&label)
        );
    }
    for (t, label) in ya.ticks(false) {
        let y = TOP + (1.0 - (t - ya.lo) / (ya.hi - ya.lo)) * ph;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            escape(&label)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(svg, r#"<g class="series" stroke="{color}" fill="{color}">"#);
        if s.points.len() > 1 {
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, px(x), py(y));
        }
        let _ = writeln!(svg, "</g>");
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Plots `y_column` against `x_column` from `csv_path`, one line per value
/// of `group_by`, and writes the SVG to `out_svg`.
pub fn plot_csv(csv_path: &Path, req: &PlotRequest<'_>, out_svg: &Path) -> Result<Vec<Series>> {
    let series = load_series(csv_path, req)?;
    let svg = render_svg(&series, req.x_column, req.y_column, req.x_column == "lambda");
    std::fs::write(out_svg, svg).map_err(|e| CliError::io(out_svg, e))?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(csv: &str, req: &PlotRequest<'_>) -> Result<(Vec<Series>, String)> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, csv).unwrap();
        let out = dir.path().join("p.svg");
        let series = plot_csv(&path, req, &out)?;
        Ok((series, std::fs::read_to_string(out).unwrap()))
    }

    fn req<'a>(x: &'a str, y: &'a str, g: Option<&'a str>) -> PlotRequest<'a> {
        PlotRequest {
            x_column: x,
            y_column: y,
            group_by: g,
            filters: vec![],
        }
    }

    #[test]
    fn two_groups_three_points() {
        let csv = "hidden,lambda,sparsity\n8,0.001,0.5\n8,0.01,0.6\n8,0.1,0.7\n16,0.001,0.2\n16,0.01,0.3\n16,0.1,0.4\n";
        let (series, svg) = plot(csv, &req("lambda", "sparsity", Some("hidden"))).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
        assert!(svg.contains("hidden = 8") && svg.contains("hidden = 16"));
        assert!(svg.starts_with("<?xml"));
    }

    #[test]
    fn single_point_has_marker_only() {
        let (_, svg) = plot("x,y\n1,2\n", &req("x", "y", None)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 0);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn lambda_decades_are_equally_spaced() {
        let csv = "lambda,acc\n0.00001,1\n0.0001,2\n0.001,3\n";
        let (series, _) = plot(csv, &req("lambda", "acc", None)).unwrap();
        let axis = Axis::build(&series[0].points.iter().map(|p| p.0).collect::<Vec<_>>(), true);
        let f: Vec<f64> = series[0].points.iter().map(|p| axis.frac(p.0)).collect();
        assert!(((f[1] - f[0]) - (f[2] - f[1])).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_sits_one_decade_below() {
        let axis = Axis::build(&[0.0, 1e-5, 1e-3], true);
        assert_eq!(axis.transform(0.0), -6.0);
        let ticks = axis.ticks(true);
        assert_eq!(ticks[0], (-6.0, "0".to_string()));
        assert_eq!(ticks.len(), 4);
    }

    #[test]
    fn unknown_column_and_empty_selection_fail() {
        assert!(plot("x,y\n1,2\n", &req("x", "z", None)).is_err());
        assert!(plot("x,y\n1,\n", &req("x", "y", None)).is_err());
        let filtered = PlotRequest {
            filters: vec![("x".into(), "5".into())],
            ..req("x", "y", None)
        };
        assert!(plot("x,y\n1,2\n", &filtered).is_err());
    }
}
