//! Static SVG line charts with a log-scaled `R` axis.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::theory_grid::TheoryGridRow;
use crate::randtest::PowerResult;
use crate::theory::TheoryMode;
use crate::{Error, Result, Strategy};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#a6761d"];

/// Column of the results table plotted against `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartMetric {
    Power,
    Se,
    MeanAbsR,
    MeanAbsBx,
}

impl ChartMetric {
    pub fn name(self) -> &'static str {
        match self {
            ChartMetric::Power => "power",
            ChartMetric::Se => "se",
            ChartMetric::MeanAbsR => "mean_abs_r",
            ChartMetric::MeanAbsBx => "mean_abs_Bx",
        }
    }

    fn label(self) -> &'static str {
        match self {
            ChartMetric::Power => "power",
            ChartMetric::Se => "SE of power",
            ChartMetric::MeanAbsR => "mean |r|",
            ChartMetric::MeanAbsBx => "mean |B_x|",
        }
    }

    fn value(self, r: &PowerResult) -> f64 {
        match self {
            ChartMetric::Power => r.power,
            ChartMetric::Se => r.se,
            ChartMetric::MeanAbsR => r.mean_abs_r,
            ChartMetric::MeanAbsBx => r.mean_abs_bx,
        }
    }
}

impl std::str::FromStr for ChartMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ChartMetric::Power, ChartMetric::Se, ChartMetric::MeanAbsR, ChartMetric::MeanAbsBx]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid("metric", format!("unknown chart metric {s:?}")))
    }
}

struct Series {
    label: String,
    color: &'static str,
    /// `(R, value, half-width of the error bar)`.
    points: Vec<(f64, f64, f64)>,
    /// Dashed horizontal line instead of a polyline.
    level: Option<f64>,
}

/// Writes one SVG per `(beta_x, n)` panel of the results with the given
/// `beta`, one polyline per design. Power charts carry +-2 SE error bars
/// and a dashed line at the test level. Returns the written paths in
/// panel order.
pub fn emit_charts(
    results: &[PowerResult],
    beta: f64,
    metric: ChartMetric,
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let rows: Vec<&PowerResult> = results.iter().filter(|r| r.beta == beta).collect();
    if rows.is_empty() {
        return Err(Error::NoData(format!("no results with beta = {beta}")));
    }
    let mut panels: Vec<(f64, usize)> = rows.iter().map(|r| (r.beta_x, r.n)).collect();
    panels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    panels.dedup();
    fs::create_dir_all(output_dir)?;

    let mut paths = Vec::new();
    for (beta_x, n) in panels {
        let mut series = Vec::new();
        for design in Strategy::ALL {
            let mut points: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter(|r| r.design == design && r.beta_x == beta_x && r.n == n)
                .map(|r| {
                    let err = if metric == ChartMetric::Power { 2.0 * r.se } else { 0.0 };
                    (r.r as f64, metric.value(r), err)
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            series.push(Series {
                label: design.name().to_string(),
                color: PALETTE[design.id() as usize],
                points,
                level: None,
            });
        }
        let alpha = rows[0].alpha;
        let reference = (metric == ChartMetric::Power).then_some(alpha);
        let title = format!("beta = {beta}, beta_x = {beta_x}, n = {n}");
        let svg = render(&title, metric.label(), &series, reference);
        let path = output_dir.join(format!("{}_beta{}_betax{}_n{}.svg", metric.name(), beta, beta_x, n));
        fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One SVG per `n`: finite-`R` power per `rho` with +-2 SE error bars and the
/// asymptotic power as a dashed line of the same color.
pub fn emit_theory_charts(rows: &[TheoryGridRow], output_dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::NoData("empty theory table".into()));
    }
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort();
    ns.dedup();
    fs::create_dir_all(output_dir)?;
    let mut paths = Vec::new();
    for n in ns {
        let mut rhos: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.rho).collect();
        rhos.sort_by(f64::total_cmp);
        rhos.dedup();
        let mut series = Vec::new();
        for (k, &rho) in rhos.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut points: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter(|r| r.n == n && r.rho == rho && r.mode == TheoryMode::Finite)
                .filter_map(|r| r.r.map(|rr| (rr as f64, r.power, 2.0 * r.se)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            series.push(Series {
                label: format!("rho = {rho}"),
                color,
                points,
                level: None,
            });
            if let Some(a) = rows
                .iter()
                .find(|r| r.n == n && r.rho == rho && r.mode == TheoryMode::Asymptotic)
            {
                series.push(Series {
                    label: format!("rho = {rho}, R = inf"),
                    color,
                    points: Vec::new(),
                    level: Some(a.power),
                });
            }
        }
        let gamma = rows.iter().find(|r| r.n == n).map_or(0.0, |r| r.gamma);
        let title = format!("n = {n}, gamma = {gamma:.4}");
        let svg = render(&title, "power", &series, None);
        let path = output_dir.join(format!("theory_n{n}.svg"));
        fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

fn render(title: &str, y_label: &str, series: &[Series], reference: Option<f64>) -> String {
    let xs: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let (mut x_lo, mut x_hi) = bounds(xs.iter().map(|x| x.log10()));
    if !(x_hi > x_lo) {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let ys = series.iter().flat_map(|s| {
        s.points
            .iter()
            .flat_map(|p| [p.1 - p.2, p.1 + p.2])
            .chain(s.level)
    });
    let (mut y_lo, mut y_hi) = bounds(ys.chain(reference));
    if !(y_hi > y_lo) {
        let pad = if y_lo.abs() > 0.0 { 0.1 * y_lo.abs() } else { 0.5 };
        y_lo -= pad;
        y_hi += pad;
    } else {
        let pad = 0.05 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |r: f64| LEFT + (r.log10() - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |v: f64| TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    );

    let mut ticks: Vec<f64> = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for &t in &ticks {
        let x = px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
    }
    for k in 0..=5 {
        let v = y_lo + (y_hi - y_lo) * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT + plot_w,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v, y_hi - y_lo)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">R (log scale)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    if let Some(v) = reference {
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="gray" stroke-dasharray="2 3"/>"#,
            LEFT + plot_w
        );
    }

    for (k, series) in series.iter().enumerate() {
        if let Some(v) = series.level {
            let y = py(v);
            let _ = writeln!(
                s,
                r#"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-dasharray="6 4"/>"#,
                LEFT + plot_w,
                series.color
            );
        }
        let finite: Vec<&(f64, f64, f64)> = series.points.iter().filter(|p| p.1.is_finite()).collect();
        if !finite.is_empty() {
            let pts: Vec<String> = finite.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                pts.join(" "),
                series.color
            );
            for p in &finite {
                let (x, y) = (px(p.0), py(p.1));
                if p.2 > 0.0 {
                    let _ = writeln!(
                        s,
                        r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}"/>"#,
                        py(p.1 + p.2),
                        py(p.1 - p.2),
                        series.color
                    );
                }
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, series.color);
            }
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let dash = if series.level.is_some() { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            series.color,
            lx + 26.0,
            ly + 4.0,
            escape(&series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn tick_label(v: f64, span: f64) -> String {
    if span < 1e-3 {
        format!("{v:.2e}")
    } else {
        let digits = (2.0 - span.log10().floor()).clamp(0.0, 6.0) as usize;
        format!("{v:.digits$}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(design: Strategy, n: usize, r: usize, beta: f64, beta_x: f64, power: f64) -> PowerResult {
        PowerResult {
            design,
            n,
            r,
            beta,
            beta_x,
            alpha: 0.05,
            power,
            se: 0.01,
            n_designs: 20,
            n_z: 200,
            mean_abs_r: 0.2,
            mean_abs_bx: 0.01,
            seed: 1,
        }
    }

    fn grid() -> Vec<PowerResult> {
        let mut v = Vec::new();
        for beta in [0.0, 0.25] {
            for beta_x in [0.0, 1.0] {
                for n in [26, 50] {
                    for (k, d) in Strategy::ALL.into_iter().enumerate() {
                        for r in [10, 100, 1000] {
                            v.push(result(d, n, r, beta, beta_x, 0.1 * k as f64 + r as f64 / 1e4));
                        }
                    }
                }
            }
        }
        v
    }

    #[test]
    fn empty_filter_is_no_data() {
        let dir = tempfile::tempdir().unwrap();
        let e = emit_charts(&grid(), 0.5, ChartMetric::Power, dir.path()).unwrap_err();
        assert!(matches!(e, Error::NoData(_)));
        assert!(matches!(emit_charts(&[], 0.0, ChartMetric::Power, dir.path()), Err(Error::NoData(_))));
    }

    #[test]
    fn one_file_per_panel_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_charts(&grid(), 0.25, ChartMetric::Power, dir.path()).unwrap();
        assert_eq!(paths.len(), 2 * 2);
        let first: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        let again = emit_charts(&grid(), 0.25, ChartMetric::Power, dir.path()).unwrap();
        assert_eq!(paths, again);
        for (p, bytes) in again.iter().zip(&first) {
            assert_eq!(&fs::read(p).unwrap(), bytes);
        }
        let svg = String::from_utf8(first[0].clone()).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(!svg.contains("href"));
    }

    #[test]
    fn degenerate_and_missing_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = vec![result(Strategy::Best, 26, 10, 0.0, 0.0, 0.05)];
        rows[0].mean_abs_r = f64::NAN;
        emit_charts(&rows, 0.0, ChartMetric::Power, dir.path()).unwrap();
        let p = emit_charts(&rows, 0.0, ChartMetric::MeanAbsR, dir.path()).unwrap();
        assert!(!fs::read_to_string(&p[0]).unwrap().contains("NaN"));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [ChartMetric::Power, ChartMetric::Se, ChartMetric::MeanAbsR, ChartMetric::MeanAbsBx] {
            assert_eq!(m.name().parse::<ChartMetric>().unwrap(), m);
        }
    }

    #[test]
    fn theory_chart_per_n() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = Vec::new();
        for n in [26, 50] {
            for rho in [0.0, 0.1] {
                for (mode, r) in [(TheoryMode::Finite, Some(10)), (TheoryMode::Finite, Some(100)), (TheoryMode::Asymptotic, None)] {
                    rows.push(TheoryGridRow {
                        n,
                        beta: 0.25,
                        mode,
                        r,
                        rho,
                        gamma: 1.0,
                        alpha: 0.05,
                        power: 0.3,
                        se: 0.001,
                        mc_samples: 10_000,
                        seed: 0,
                    });
                }
            }
        }
        let paths = emit_theory_charts(&rows, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let svg = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(emit_theory_charts(&[], dir.path()).is_err());
    }
}
