mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use randpower::alloc::normal_quantile_covariate;
use randpower::designs::{calibrate_threshold, DesignGenerator};
use randpower::randtest::{power_metric, POWER_HEADER};
use randpower::seed::{self, stream};
use randpower::sim::{
    emit_charts, emit_theory_charts, read_results, read_theory_grid, run_grid_with,
    run_theory_grid, write_results, write_theory_grid, ChartMetric, GridSpec, THEORY_GRID_HEADER,
};
use randpower::theory::{
    asymptotic_power, finite_power, power_se, toy_power_r2, QuadratureSpec, TheoryMode,
    TheoryParams, TheoryRow, THEORY_HEADER,
};
use randpower::{Error, ExperimentScenario, Strategy};

#[derive(Parser, Debug)]
#[command(
    name = "randpower",
    version,
    about = "Power of randomization tests under restricted randomization designs",
    args_override_self = true
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "RANDPOWER_THREADS")]
    threads: Option<usize>,

    /// Write CSV here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Flat key=value file of flags; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a design of R mirrored pairs
    Design(DesignArgs),
    /// Empirical power of the randomization test, averaged over designs and noise
    PowerSim(PowerSimArgs),
    /// Finite-R power under the equicorrelated model (Monte Carlo)
    PowerTheory(PowerTheoryArgs),
    /// Power as R grows without bound
    PowerAsymptotic(AsymptoticArgs),
    /// Exact power with two mirrored pairs at level 1/4
    ToyR2(ToyArgs),
    /// Standard deviation of power across draws of the unobserved covariate
    Se(SeArgs),
    /// Run an experiment grid
    Grid(GridArgs),
    /// Render SVG charts from a grid CSV
    Charts(ChartArgs),
}

const SUBCOMMANDS: [&str; 8] = [
    "design",
    "power-sim",
    "power-theory",
    "power-asymptotic",
    "toy-r2",
    "se",
    "grid",
    "charts",
];

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Rerandomization threshold on |B_x|; calibrated from BCRD draws if absent
    #[arg(long)]
    threshold: Option<f64>,
    /// BCRD draws for threshold calibration
    #[arg(long, default_value_t = 1_000_000)]
    calibration_draws: usize,
    /// Accepted fraction of BCRD draws
    #[arg(long, default_value_t = 0.001)]
    calibration_quantile: f64,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    /// Sample size (even); the covariate is the standardized normal quantile vector
    #[arg(long)]
    n: usize,
    /// Number of mirrored pairs
    #[arg(long = "R")]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

#[derive(Args, Debug)]
struct PowerSimArgs {
    #[arg(long, value_parser = parse_strategy)]
    design: Strategy,
    #[arg(long)]
    n: usize,
    #[arg(long = "R")]
    r: usize,
    /// Treatment effect
    #[arg(long)]
    beta: f64,
    /// Coefficient of the observed covariate
    #[arg(long, default_value_t = 0.0)]
    beta_x: f64,
    /// Standard deviation of the unobserved covariate
    #[arg(long, default_value_t = 1.0)]
    sigma_z: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Independent designs
    #[arg(long, default_value_t = 50)]
    design_reps: usize,
    /// Draws of the unobserved covariate per design
    #[arg(long, default_value_t = 500)]
    z_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

/// Standardized effect, given directly or as sqrt(n) beta.
#[derive(Args, Debug)]
struct EffectArgs {
    /// Standardized effect sqrt(n) beta
    #[arg(long, conflicts_with_all = ["beta", "n"], required_unless_present = "beta")]
    gamma: Option<f64>,
    /// Treatment effect, with --n
    #[arg(long, requires = "n")]
    beta: Option<f64>,
    /// Sample size, with --beta
    #[arg(long, requires = "beta")]
    n: Option<usize>,
}

impl EffectArgs {
    fn gamma(&self) -> f64 {
        match (self.gamma, self.beta, self.n) {
            (Some(g), _, _) => g,
            (None, Some(b), Some(n)) => (n as f64).sqrt() * b,
            _ => unreachable!("clap enforces gamma or beta with n"),
        }
    }
}

#[derive(Args, Debug)]
struct PowerTheoryArgs {
    #[arg(long = "R")]
    r: usize,
    /// Uniform absolute allocation correlation
    #[arg(long)]
    rho: f64,
    #[command(flatten)]
    effect: EffectArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Monte Carlo samples
    #[arg(long, default_value_t = 1_000_000)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct AsymptoticArgs {
    #[arg(long)]
    rho: f64,
    #[command(flatten)]
    effect: EffectArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long)]
    rho: f64,
    #[command(flatten)]
    effect: EffectArgs,
}

#[derive(Args, Debug)]
struct SeArgs {
    #[arg(long = "R")]
    r: usize,
    #[arg(long)]
    rho: f64,
    #[command(flatten)]
    effect: EffectArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// n in {26, 50, 100, 200}, 50 designs x 500 noise draws
    Paper,
    /// n in {26, 50}, 20 designs x 200 noise draws
    Desk,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
    /// Theoretical power over R and rho instead of simulation
    #[arg(long)]
    theory: bool,
    /// Override the sample sizes
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Override the numbers of mirrored pairs
    #[arg(long = "R", value_delimiter = ',')]
    r: Option<Vec<usize>>,
    /// Override the treatment effects
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    /// Override the covariate coefficients
    #[arg(long, value_delimiter = ',', conflicts_with = "theory")]
    beta_x: Option<Vec<f64>>,
    /// Override the designs
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, conflicts_with = "theory")]
    designs: Option<Vec<Strategy>>,
    #[arg(long, conflicts_with = "theory")]
    design_reps: Option<usize>,
    #[arg(long, conflicts_with = "theory")]
    z_reps: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cache directory for rerandomization thresholds
    #[arg(long, conflicts_with = "theory")]
    cache_dir: Option<PathBuf>,
    /// Correlations for the theory grid
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3", requires = "theory")]
    rho: Vec<f64>,
    /// Monte Carlo samples per theory cell
    #[arg(long, default_value_t = 1_000_000, requires = "theory")]
    mc: usize,
    /// Also render charts into this directory
    #[arg(long)]
    charts: Option<PathBuf>,
    /// Suppress progress on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct ChartArgs {
    /// Results or theory CSV written by `grid`
    #[arg(long)]
    input: PathBuf,
    /// Directory for the SVG files
    #[arg(long)]
    out_dir: PathBuf,
    /// Treatment effect to plot (results tables only)
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    #[arg(long, default_value = "power", value_parser = parse_metric)]
    metric: ChartMetric,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<ChartMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => Failure {
                code: 2,
                message: format!("invalid value for --{}: {reason}", flag_name(name)),
            },
            Error::CapacityExceeded { .. } => Failure {
                code: 2,
                message: format!("invalid value for --R: {e}"),
            },
            e => Failure {
                code: 1,
                message: e.to_string(),
            },
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn flag_name(name: &str) -> String {
    match name {
        "mc_samples" => "mc".into(),
        "replicates" => "design-reps/--z-reps".into(),
        "grid" => "n/--R/--beta".into(),
        other => other.replace('_', "-"),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("invalid value for --threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure {
                code: 1,
                message: e.to_string(),
            })?;
    }
    let mut out: Box<dyn Write> = match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            usage(format!("invalid value for --out: {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cli.command {
        Command::Design(a) => design(a, &mut out)?,
        Command::PowerSim(a) => power_sim(a, &mut out)?,
        Command::PowerTheory(a) => {
            let params = TheoryParams::new(a.effect.gamma(), a.rho, a.r, a.alpha)?;
            let quad = QuadratureSpec::with_mc(a.mc)?;
            let e = finite_power(&params, &quad, a.seed)?;
            theory_rows(&mut out, &[row(TheoryMode::Finite, &params, Some(a.r), e.value, e.se, e.samples, a.seed)])?;
        }
        Command::PowerAsymptotic(a) => {
            let params = TheoryParams::new(a.effect.gamma(), a.rho, 1, a.alpha)?;
            let p = asymptotic_power(&params, &QuadratureSpec::default())?;
            theory_rows(&mut out, &[row(TheoryMode::Asymptotic, &params, None, p, 0.0, 0, 0)])?;
        }
        Command::ToyR2(a) => {
            let gamma = a.effect.gamma();
            let p = toy_power_r2(a.rho, gamma)?;
            let params = TheoryParams::new(gamma, a.rho, 2, 0.25)?;
            theory_rows(&mut out, &[row(TheoryMode::ToyR2, &params, Some(2), p, 0.0, 0, 0)])?;
        }
        Command::Se(a) => {
            let params = TheoryParams::new(a.effect.gamma(), a.rho, a.r, a.alpha)?;
            let s = power_se(&params, &QuadratureSpec::default())?;
            theory_rows(
                &mut out,
                &[
                    row(TheoryMode::Se, &params, Some(a.r), s.p, s.se_finite, 0, 0),
                    row(TheoryMode::Se, &params, None, s.p, s.se_limit, 0, 0),
                ],
            )?;
        }
        Command::Grid(a) => grid(a, &mut out)?,
        Command::Charts(a) => charts(a, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn row(
    mode: TheoryMode,
    p: &TheoryParams,
    r: Option<usize>,
    power: f64,
    se: f64,
    mc_samples: usize,
    seed: u64,
) -> TheoryRow {
    TheoryRow {
        mode,
        r,
        rho: p.rho,
        gamma: p.gamma,
        alpha: p.alpha,
        power,
        se,
        mc_samples,
        seed,
    }
}

fn theory_rows(out: &mut dyn Write, rows: &[TheoryRow]) -> io::Result<()> {
    writeln!(out, "{THEORY_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_fields())?;
    }
    Ok(())
}

/// Calibrates from `derive(seed, [CALIBRATION, n])`, as the grid does.
fn threshold(strategy: Strategy, x: &[f64], a: &ThresholdArgs, seed: u64) -> Result<Option<f64>, Failure> {
    if strategy != Strategy::Rerandomization {
        return Ok(None);
    }
    if let Some(t) = a.threshold {
        if !(t > 0.0) {
            return Err(usage(format!("invalid value for --threshold: {t} must be positive")));
        }
        return Ok(Some(t));
    }
    let s = seed::derive(seed, &[stream::CALIBRATION, x.len() as u64]);
    Ok(Some(calibrate_threshold(x, a.calibration_draws, a.calibration_quantile, s)?.a))
}

fn design(a: DesignArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let x = normal_quantile_covariate(a.n)?;
    let t = threshold(a.strategy, x.values(), &a.threshold, a.seed)?;
    let generator = DesignGenerator::new(a.strategy, x.values(), t)?;
    let design = generator.generate(a.r, a.seed)?;
    design.write_csv(out)?;
    Ok(())
}

fn power_sim(a: PowerSimArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let x = normal_quantile_covariate(a.n)?;
    let scenario = ExperimentScenario::new(x.clone(), a.beta, a.beta_x, a.alpha)?.with_sigma_z(a.sigma_z)?;
    if a.r == 0 {
        return Err(usage("invalid value for --R: must be at least 1".into()));
    }
    let t = threshold(a.design, x.values(), &a.threshold, a.seed)?;
    let generator = DesignGenerator::new(a.design, x.values(), t)?;
    let result = power_metric(&generator, &scenario, a.r, a.design_reps, a.z_reps, a.seed)?;
    writeln!(out, "{POWER_HEADER}")?;
    writeln!(out, "{}", result.csv_fields())?;
    Ok(())
}

fn grid(a: GridArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = match a.preset {
        Preset::Paper => GridSpec::paper(),
        Preset::Desk => GridSpec::desk(),
    };
    if let Some(v) = a.n {
        spec.n_values = v;
    }
    if let Some(v) = a.r {
        spec.r_values = v;
    }
    if a.theory {
        let quad = QuadratureSpec::with_mc(a.mc)?;
        let beta = match a.beta.as_deref() {
            None => 0.25,
            Some([b]) => *b,
            Some(_) => return Err(usage("invalid value for --beta: the theory grid takes one effect".into())),
        };
        let rows = run_theory_grid(&spec.r_values, &a.rho, &spec.n_values, beta, a.alpha, &quad, a.seed)?;
        write_theory_grid(&rows, out)?;
        if let Some(dir) = a.charts {
            emit_theory_charts(&rows, &dir)?;
        }
        return Ok(());
    }
    if let Some(v) = a.beta {
        spec.beta_values = v;
    }
    if let Some(v) = a.beta_x {
        spec.beta_x_values = v;
    }
    if let Some(v) = a.designs {
        spec.designs = v;
    }
    if let Some(v) = a.design_reps {
        spec.n_design_reps = v;
    }
    if let Some(v) = a.z_reps {
        spec.n_z_reps = v;
    }
    spec.alpha = a.alpha;
    spec.root_seed = a.seed;
    spec.threshold_cache = a.cache_dir;
    let quiet = a.quiet;
    let report = run_grid_with(&spec, |done, total| {
        if !quiet {
            eprintln!("[{done}/{total}] cells done");
        }
    })?;
    for f in &report.failures {
        let c = f.cell;
        eprintln!(
            "warning: {} n={} R={} beta={} beta_x={}: {}",
            c.design, c.n, c.r, c.beta, c.beta_x, f.message
        );
    }
    write_results(&report.results, out)?;
    if let Some(dir) = a.charts {
        write_charts(&report.results, &dir)?;
    }
    Ok(())
}

fn write_charts(results: &[randpower::PowerResult], dir: &std::path::Path) -> Result<Vec<PathBuf>, Failure> {
    let mut betas: Vec<f64> = results.iter().map(|r| r.beta).collect();
    betas.sort_by(f64::total_cmp);
    betas.dedup();
    let mut paths = Vec::new();
    for beta in betas {
        for metric in [ChartMetric::Power, ChartMetric::Se] {
            paths.extend(emit_charts(results, beta, metric, dir)?);
        }
    }
    for metric in [ChartMetric::MeanAbsR, ChartMetric::MeanAbsBx] {
        if let Some(&b) = results.first().map(|r| &r.beta) {
            paths.extend(emit_charts(results, b, metric, dir)?);
        }
    }
    Ok(paths)
}

fn charts(a: ChartArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let file = File::open(&a.input)
        .map_err(|e| usage(format!("invalid value for --input: {}: {e}", a.input.display())))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let body = BufReader::new(header.as_bytes().chain(reader));
    let paths = if header.trim_end() == THEORY_GRID_HEADER {
        emit_theory_charts(&read_theory_grid(body)?, &a.out_dir)?
    } else {
        emit_charts(&read_results(body)?, a.beta, a.metric, &a.out_dir)?
    };
    for p in paths {
        writeln!(out, "{}", p.display())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
        let names: Vec<String> = Cli::command()
            .get_subcommands()
            .map(|c| c.get_name().to_string())
            .collect();
        assert_eq!(names, SUBCOMMANDS);
    }
}
