//! Experiment grids: empirical power over designs, sample sizes and numbers
//! of allocations, the matching theoretical curves, and their charts.
//!
//! Cell seeds are `derive(root_seed, [design id, n, R, beta bits, beta_x bits])`
//! (see [`crate::seed`]); replicates within a cell fold in further
//! coordinates in [`power_metric`]. No cell's stream depends on any other
//! coordinate of the grid.

mod chart;
mod results;
mod theory_grid;

pub use chart::{emit_charts, emit_theory_charts, ChartMetric};
pub use results::{panel_key, read_results, write_results, RESULTS_HEADER};
pub use theory_grid::{read_theory_grid, run_theory_grid, write_theory_grid, TheoryGridRow, THEORY_GRID_HEADER};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::alloc::normal_quantile_covariate;
use crate::designs::{calibrate_threshold, DesignGenerator, BEST_MAX_N};
use crate::randtest::{power_metric, ExperimentScenario, PowerResult};
use crate::seed::{self, stream};
use crate::table::{format_real, parse_real};
use crate::{par, Error, Result, Strategy};

/// One empirical power experiment over the cross product of its value sets.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub n_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub beta_values: Vec<f64>,
    pub beta_x_values: Vec<f64>,
    pub designs: Vec<Strategy>,
    pub n_design_reps: usize,
    pub n_z_reps: usize,
    pub alpha: f64,
    pub root_seed: u64,
    /// BCRD draws used to calibrate the rerandomization threshold.
    pub calibration_draws: usize,
    /// Accepted fraction of BCRD draws under rerandomization.
    pub calibration_quantile: f64,
    /// Directory holding calibrated thresholds between runs.
    pub threshold_cache: Option<PathBuf>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::paper()
    }
}

impl GridSpec {
    /// The full published grid.
    pub fn paper() -> Self {
        GridSpec {
            n_values: vec![26, 50, 100, 200],
            r_values: vec![10, 30, 100, 320, 1000, 3160],
            beta_values: vec![0.0, 0.25],
            beta_x_values: vec![0.0, 1.0],
            designs: Strategy::ALL.to_vec(),
            n_design_reps: 50,
            n_z_reps: 500,
            alpha: 0.05,
            root_seed: 0,
            calibration_draws: 1_000_000,
            calibration_quantile: 0.001,
            threshold_cache: None,
        }
    }

    /// Two sample sizes and 20 x 200 replicates.
    pub fn desk() -> Self {
        GridSpec {
            n_values: vec![26, 50],
            n_design_reps: 20,
            n_z_reps: 200,
            ..GridSpec::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty()
            || self.r_values.is_empty()
            || self.beta_values.is_empty()
            || self.beta_x_values.is_empty()
            || self.designs.is_empty()
        {
            return Err(Error::invalid("grid", "every value set must be nonempty"));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n < 2 || n % 2 == 1) {
            return Err(Error::invalid("n", format!("{n} must be even and at least 2")));
        }
        if self.r_values.contains(&0) {
            return Err(Error::invalid("R", "must be at least 1"));
        }
        if let Some(b) = self.beta_values.iter().chain(&self.beta_x_values).find(|b| !b.is_finite()) {
            return Err(Error::invalid("beta", format!("{b} is not finite")));
        }
        if self.n_design_reps == 0 || self.n_z_reps == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid("alpha", format!("{} is outside (0, 0.5)", self.alpha)));
        }
        if self.designs.contains(&Strategy::Rerandomization) {
            if self.calibration_draws < 1000 {
                return Err(Error::invalid("calibration_draws", format!("{} < 1000", self.calibration_draws)));
            }
            if !(self.calibration_quantile > 0.0 && self.calibration_quantile <= 1.0) {
                return Err(Error::invalid(
                    "calibration_quantile",
                    format!("{} is outside (0, 1]", self.calibration_quantile),
                ));
            }
        }
        Ok(())
    }

    /// Cells in run order: by beta, beta_x, n, design, then R. The best
    /// design appears only for `n <= 26`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &beta in &sorted_reals(&self.beta_values) {
            for &beta_x in &sorted_reals(&self.beta_x_values) {
                for &n in &sorted(&self.n_values) {
                    for &design in &sorted(&self.designs) {
                        if design == Strategy::Best && n > BEST_MAX_N {
                            continue;
                        }
                        for &r in &sorted(&self.r_values) {
                            cells.push(Cell { design, n, r, beta, beta_x });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn cell_seed(&self, cell: &Cell) -> u64 {
        seed::derive(
            self.root_seed,
            &[
                cell.design.id(),
                cell.n as u64,
                cell.r as u64,
                cell.beta.to_bits(),
                cell.beta_x.to_bits(),
            ],
        )
    }
}

fn sorted<T: Ord + Copy>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort();
    v.dedup();
    v
}

fn sorted_reals(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Coordinates of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub design: Strategy,
    pub n: usize,
    pub r: usize,
    pub beta: f64,
    pub beta_x: f64,
}

/// A cell whose design could not be generated or evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub cell: Cell,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridReport {
    pub results: Vec<PowerResult>,
    pub failures: Vec<CellFailure>,
}

/// Runs every cell of `spec`. Failing cells are reported and skipped.
pub fn run_grid(spec: &GridSpec) -> Result<GridReport> {
    run_grid_with(spec, |_, _| {})
}

/// [`run_grid`] with a callback after each cell, given the cell index and
/// the total.
pub fn run_grid_with<F>(spec: &GridSpec, mut progress: F) -> Result<GridReport>
where
    F: FnMut(usize, usize),
{
    spec.validate()?;
    let cells = spec.cells();
    let mut thresholds: BTreeMap<usize, std::result::Result<f64, String>> = BTreeMap::new();
    if spec.designs.contains(&Strategy::Rerandomization) {
        for &n in &sorted(&spec.n_values) {
            thresholds.insert(n, rerandomization_threshold(spec, n).map_err(|e| e.to_string()));
        }
    }

    let mut report = GridReport::default();
    for (k, cell) in cells.iter().enumerate() {
        let threshold = match (cell.design, thresholds.get(&cell.n)) {
            (Strategy::Rerandomization, Some(Err(msg))) => {
                report.failures.push(CellFailure {
                    cell: *cell,
                    message: format!("threshold calibration failed: {msg}"),
                });
                progress(k + 1, cells.len());
                continue;
            }
            (Strategy::Rerandomization, Some(Ok(a))) => Some(*a),
            _ => None,
        };
        match run_cell(spec, cell, threshold) {
            Ok(r) => report.results.push(r),
            Err(e) => report.failures.push(CellFailure {
                cell: *cell,
                message: e.to_string(),
            }),
        }
        progress(k + 1, cells.len());
    }
    Ok(report)
}

fn run_cell(spec: &GridSpec, cell: &Cell, threshold: Option<f64>) -> Result<PowerResult> {
    let x = normal_quantile_covariate(cell.n)?;
    let generator = DesignGenerator::new(cell.design, x.values(), threshold)?;
    let scenario = ExperimentScenario::new(x, cell.beta, cell.beta_x, spec.alpha)?;
    power_metric(
        &generator,
        &scenario,
        cell.r,
        spec.n_design_reps,
        spec.n_z_reps,
        spec.cell_seed(cell),
    )
}

/// Rerandomization threshold for the normal-quantile covariate of size `n`,
/// from `derive(root_seed, [CALIBRATION, n])`. Read from and written to the
/// spec's cache directory when one is set.
pub fn rerandomization_threshold(spec: &GridSpec, n: usize) -> Result<f64> {
    let path = spec.threshold_cache.as_deref().map(|dir| threshold_path(dir, spec, n));
    if let Some(path) = &path {
        if let Ok(text) = fs::read_to_string(path) {
            return parse_real(text.trim(), 1);
        }
    }
    let x = normal_quantile_covariate(n)?;
    let seed = seed::derive(spec.root_seed, &[stream::CALIBRATION, n as u64]);
    let a = calibrate_threshold(x.values(), spec.calibration_draws, spec.calibration_quantile, seed)?.a;
    if let Some(path) = &path {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, format!("{}\n", format_real(a)))?;
    }
    Ok(a)
}

fn threshold_path(dir: &Path, spec: &GridSpec, n: usize) -> PathBuf {
    dir.join(format!(
        "threshold_n{}_seed{}_draws{}_q{}.txt",
        n, spec.root_seed, spec.calibration_draws, spec.calibration_quantile
    ))
}

/// Runs `cells` independently in parallel; used where cell order is
/// irrelevant to the caller.
pub fn run_cells(spec: &GridSpec, cells: &[Cell]) -> Vec<Result<PowerResult>> {
    let mut thresholds = BTreeMap::new();
    for c in cells.iter().filter(|c| c.design == Strategy::Rerandomization) {
        thresholds
            .entry(c.n)
            .or_insert_with(|| rerandomization_threshold(spec, c.n).map_err(|e| e.to_string()));
    }
    par::map_indexed(cells.len(), |k| {
        let cell = &cells[k];
        let threshold = match thresholds.get(&cell.n) {
            Some(Ok(a)) => Some(*a),
            Some(Err(msg)) => return Err(Error::Numerical(msg.clone())),
            None => None,
        };
        run_cell(spec, cell, threshold)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GridSpec {
        GridSpec {
            n_values: vec![8, 6],
            r_values: vec![4, 2],
            beta_values: vec![0.0, 0.5],
            beta_x_values: vec![1.0],
            designs: Strategy::ALL.to_vec(),
            n_design_reps: 3,
            n_z_reps: 5,
            alpha: 0.25,
            root_seed: 11,
            calibration_draws: 2000,
            calibration_quantile: 0.2,
            threshold_cache: None,
        }
    }

    #[test]
    fn presets() {
        let p = GridSpec::paper();
        assert_eq!(p.r_values, [10, 30, 100, 320, 1000, 3160]);
        assert_eq!((p.n_design_reps, p.n_z_reps), (50, 500));
        assert_eq!(p.alpha, 0.05);
        let d = GridSpec::desk();
        assert_eq!(d.n_values, [26, 50]);
        assert_eq!((d.n_design_reps, d.n_z_reps), (20, 200));
        p.validate().unwrap();
        d.validate().unwrap();
    }

    #[test]
    fn validation() {
        let mut s = tiny();
        s.n_values = vec![7];
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.r_values.clear();
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.alpha = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn best_only_for_small_n() {
        let mut s = tiny();
        s.n_values = vec![26, 28];
        let cells = s.cells();
        assert!(cells.iter().all(|c| c.design != Strategy::Best || c.n == 26));
        assert_eq!(cells.len(), 2 * 2 * (5 + 4));
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let s = tiny();
        let mut seeds: Vec<u64> = s.cells().iter().map(|c| s.cell_seed(c)).collect();
        let total = seeds.len();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), total);
    }

    #[test]
    fn failures_are_recorded_and_the_run_continues() {
        let mut s = tiny();
        // n = 6 has 10 mirrored pairs in total and 4 under matching
        s.r_values = vec![4, 8];
        let report = run_grid(&s).unwrap();
        assert_eq!(report.results.len() + report.failures.len(), s.cells().len());
        assert!(report
            .failures
            .iter()
            .any(|f| f.cell.design == Strategy::Matching && f.cell.n == 6 && f.cell.r == 8));
        assert!(report.results.iter().all(|r| (0.0..=1.0).contains(&r.power) && r.se >= 0.0));
        let best: Vec<_> = report.results.iter().filter(|r| r.design == Strategy::Best).collect();
        assert!(!best.is_empty() && best.iter().all(|r| r.n_designs == 1));
    }

    #[test]
    fn reproducible() {
        let s = tiny();
        let a = run_grid(&s).unwrap();
        let b = run_grid(&s).unwrap();
        assert_eq!(a, b);
        let mut s2 = tiny();
        s2.root_seed = 12;
        assert_ne!(a.results, run_grid(&s2).unwrap().results);
    }

    #[test]
    fn parallel_cells_match_the_serial_run() {
        let s = tiny();
        let serial = run_grid(&s).unwrap();
        let cells: Vec<Cell> = s.cells().into_iter().filter(|c| c.r == 2).collect();
        let par: Vec<PowerResult> = run_cells(&s, &cells).into_iter().map(|r| r.unwrap()).collect();
        for r in &par {
            assert!(serial.results.contains(r));
        }
    }

    #[test]
    fn threshold_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny();
        s.threshold_cache = Some(dir.path().join("cache"));
        let a = rerandomization_threshold(&s, 8).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path().join("cache")).unwrap().collect();
        assert_eq!(files.len(), 1);
        assert_eq!(rerandomization_threshold(&s, 8).unwrap(), a);
        s.threshold_cache = None;
        assert_eq!(rerandomization_threshold(&s, 8).unwrap(), a);
    }

    #[test]
    fn null_cells_have_exact_size() {
        let mut s = tiny();
        s.beta_values = vec![0.0];
        s.n_values = vec![8];
        s.r_values = vec![4];
        for r in run_grid(&s).unwrap().results {
            // floor(2 * 0.25 * 4) / 8
            assert!((r.power - 0.25).abs() < 1e-12, "{r:?}");
        }
    }
}
