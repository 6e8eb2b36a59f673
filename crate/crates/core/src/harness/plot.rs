//! Minimal SVG line/scatter charts for the analysis tables.

use std::fmt::Write as _;
use std::path::Path;

use super::analyze::{
    CcdfRow, ThroughputRow, TrajectoryRow, CCDF_FILE, THROUGHPUT_FILE, TRADEOFF_FILE,
    TRAJECTORY_FILE,
};
use super::io::read_csv;
use crate::error::{Error, Result};
use crate::metrics::TradeoffPoint;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub line: bool,
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

impl Chart {
    pub fn to_svg(&self) -> String {
        let (x0, x1) = self
            .x_range
            .unwrap_or_else(|| span(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))));
        let (y0, y1) = self
            .y_range
            .unwrap_or_else(|| span(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                svg,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP,
                TOP + ph,
                TOP + ph + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let name = escape(&s.name);
            let _ = writeln!(svg, r#"<g class="series" data-name="{name}">"#);
            if s.line && s.points.len() > 1 {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            if s.markers || s.points.len() == 1 {
                for &(x, y) in &s.points {
                    let _ = writeln!(
                        svg,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    );
                }
            }
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = LEFT + pw + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{name}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0
            );
            let _ = writeln!(svg, "</g>");
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()).map_err(|e| Error::io(path, e))
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

fn distinct<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// WER against RTF, one chart per block size; each strategy family is one
/// series ordered by RTF. The reference appears on every chart.
pub fn tradeoff_charts(points: &[TradeoffPoint]) -> Vec<(String, Chart)> {
    let is_ar = |p: &TradeoffPoint| p.strategy == "ar" || p.strategy.ends_with("/ar");
    let blocks = distinct(points.iter().filter(|p| !is_ar(p)).map(|p| p.block));
    blocks
        .into_iter()
        .map(|b| {
            let mut series: Vec<Series> = distinct(
                points
                    .iter()
                    .filter(|p| !is_ar(p) && p.block == b)
                    .map(|p| p.strategy.clone()),
            )
            .into_iter()
            .map(|name| {
                let mut pts: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.block == b && p.strategy == name)
                    .map(|p| (p.rtf, p.wer * 100.0))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series {
                    name,
                    points: pts,
                    line: true,
                    markers: true,
                }
            })
            .collect();
            for ar in points.iter().filter(|p| is_ar(p)) {
                series.push(Series {
                    name: ar.strategy.clone(),
                    points: vec![(ar.rtf, ar.wer * 100.0)],
                    line: false,
                    markers: true,
                });
            }
            (
                format!("tradeoff_b{b}.svg"),
                Chart {
                    title: format!("WER vs RTF, block size {b}"),
                    x_label: "RTF (proxy)".into(),
                    y_label: "WER (%)".into(),
                    series,
                    x_range: None,
                    y_range: None,
                },
            )
        })
        .collect()
}

/// Mean cumulative NLL against progress, one chart per block size. The
/// reference trajectory is overlaid on each.
pub fn trajectory_charts(rows: &[TrajectoryRow]) -> Vec<(String, Chart)> {
    let is_ar = |r: &TrajectoryRow| r.strategy == "ar" || r.strategy.ends_with("/ar");
    let key = |r: &TrajectoryRow| (r.strategy.clone(), r.param.clone(), r.block);
    let make = |k: &(String, String, usize)| Series {
        name: if k.1.is_empty() {
            k.0.clone()
        } else {
            format!("{}:{}", k.0, k.1)
        },
        points: rows
            .iter()
            .filter(|r| key(r) == *k)
            .map(|r| (r.progress, r.cum_nll))
            .collect(),
        line: true,
        markers: false,
    };
    let ar_keys = distinct(rows.iter().filter(|r| is_ar(r)).map(key));
    distinct(rows.iter().filter(|r| !is_ar(r)).map(|r| r.block))
        .into_iter()
        .map(|b| {
            let mut series: Vec<Series> = distinct(
                rows.iter()
                    .filter(|r| !is_ar(r) && r.block == b)
                    .map(key),
            )
            .iter()
            .map(make)
            .collect();
            series.extend(ar_keys.iter().map(make));
            (
                format!("trajectory_b{b}.svg"),
                Chart {
                    title: format!("Cumulative uncertainty, block size {b}"),
                    x_label: "normalized progress".into(),
                    y_label: "cumulative NLL".into(),
                    series,
                    x_range: Some((0.0, 1.0)),
                    y_range: None,
                },
            )
        })
        .collect()
}

pub fn throughput_chart(rows: &[ThroughputRow]) -> Chart {
    let series = distinct(rows.iter().map(|r| r.strategy.clone()))
        .into_iter()
        .map(|name| Series {
            points: rows
                .iter()
                .filter(|r| r.strategy == name)
                .map(|r| (r.round as f64, r.mean_tokens))
                .collect(),
            name,
            line: true,
            markers: true,
        })
        .collect();
    Chart {
        title: "Tokens committed per round".into(),
        x_label: "round".into(),
        y_label: "mean newly unmasked tokens".into(),
        series,
        x_range: None,
        y_range: None,
    }
}

pub fn ccdf_chart(rows: &[CcdfRow]) -> Chart {
    let series = distinct(rows.iter().map(|r| r.profile.clone()))
        .into_iter()
        .map(|name| Series {
            points: rows
                .iter()
                .filter(|r| r.profile == name)
                .map(|r| (r.threshold, r.fraction))
                .collect(),
            name,
            line: true,
            markers: false,
        })
        .collect();
    Chart {
        title: "Confidence CCDF".into(),
        x_label: "threshold s".into(),
        y_label: "fraction with confidence >= s".into(),
        series,
        x_range: Some((0.0, 1.0)),
        y_range: Some((0.0, 1.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Tradeoff,
    Trajectory,
    Throughput,
    Ccdf,
    All,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tradeoff" => PlotKind::Tradeoff,
            "trajectory" => PlotKind::Trajectory,
            "throughput" => PlotKind::Throughput,
            "ccdf" => PlotKind::Ccdf,
            "all" => PlotKind::All,
            other => return Err(Error::invalid(format!("unknown plot kind {other:?}"))),
        })
    }
}

/// Renders charts from the tables in `input` into `out`. Returns the paths
/// written.
pub fn plot_dir(kind: PlotKind, input: &Path, out: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut charts: Vec<(String, Chart)> = Vec::new();
    if matches!(kind, PlotKind::Tradeoff | PlotKind::All) {
        charts.extend(tradeoff_charts(&read_csv(&input.join(TRADEOFF_FILE))?));
    }
    if matches!(kind, PlotKind::Trajectory | PlotKind::All) {
        charts.extend(trajectory_charts(&read_csv(&input.join(TRAJECTORY_FILE))?));
    }
    if matches!(kind, PlotKind::Throughput | PlotKind::All) {
        let rows: Vec<ThroughputRow> = read_csv(&input.join(THROUGHPUT_FILE))?;
        charts.push(("throughput.svg".into(), throughput_chart(&rows)));
    }
    if matches!(kind, PlotKind::Ccdf | PlotKind::All) {
        let rows: Vec<CcdfRow> = read_csv(&input.join(CCDF_FILE))?;
        charts.push(("ccdf.svg".into(), ccdf_chart(&rows)));
    }
    charts
        .into_iter()
        .map(|(name, chart)| {
            let path = out.join(name);
            chart.write(&path)?;
            Ok(path)
        })
        .collect()
}
