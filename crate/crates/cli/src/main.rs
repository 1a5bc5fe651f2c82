use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use sphemu_core::grid::{
    load_field_series, save_field_series, synth_bandlimited, upsample_spline, write_csv_slice, FieldSeries, GridSpec,
};
use sphemu_core::mpchol::{self, CholeskyOptions, ConversionSite, PrecisionMap, Variant};
use sphemu_core::par;
use sphemu_core::pipeline::{self, synthetic_model, EmulatorModel, SyntheticSpec, TrainConfig};
use sphemu_core::sht::{load_coefficients, save_coefficients, CoefficientSet, ShtPlan};
use sphemu_core::stochastic::{self, InnovationConfig, DEFAULT_ORDER};
use sphemu_core::trend::{ForcingTrajectory, DEFAULT_K};

/// Exit code for a completed validation that did not pass.
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser)]
#[command(name = "sphemu", version, about = "Spherical harmonic climate emulator")]
struct Cli {
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit trend, VAR, innovation covariance and noise field from a field series.
    Train(TrainArgs),
    /// Draw emulations from a trained model bundle.
    Emulate(EmulateArgs),
    /// Score a holdout series against emulations of a model.
    Validate(ValidateArgs),
    /// Forward or inverse spherical harmonic transform of a file.
    Sht(ShtArgs),
    /// Time a tiled mixed-precision Cholesky factorization of a random SPD matrix.
    Chol(CholArgs),
    /// Write a synthetic series: band-limited noise, or draws from a known model.
    Synth(SynthArgs),
    /// Spline-upsample a series onto a finer grid.
    Upsample(UpsampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Dp,
    Dpsp,
    Dpsphp,
    Dphp,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Dp => Variant::Dp,
            VariantArg::Dpsp => Variant::DpSp,
            VariantArg::Dpsphp => Variant::DpSpHp,
            VariantArg::Dphp => Variant::DpHp,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct PrecisionArgs {
    #[arg(long, value_enum, default_value = "dp")]
    variant: VariantArg,
    /// Tile-distance from the diagonal kept in DP.
    #[arg(long, default_value_t = 1)]
    band: usize,
    /// Share of off-band tiles kept SP by the dpsphp variant.
    #[arg(long, default_value_t = 0.05)]
    sp_fraction: f64,
}

impl PrecisionArgs {
    fn map(&self) -> Result<PrecisionMap> {
        Ok(PrecisionMap::new(self.variant.into(), self.band, self.sp_fraction)?)
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum OutputFormat {
    Sphf,
    Csv,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Annual forcing as `year,value` rows.
    #[arg(long)]
    forcing: Option<PathBuf>,
    /// Calendar year containing the first time step.
    #[arg(long, default_value_t = 1)]
    forcing_start: i64,
    #[arg(long = "P", default_value_t = DEFAULT_ORDER)]
    p: usize,
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k: usize,
    /// Time steps per year (12, 365 or 8760 in practice).
    #[arg(long, default_value_t = 12)]
    tau: usize,
    #[command(flatten)]
    precision: PrecisionArgs,
    /// Tile size for the innovation covariance factorization.
    #[arg(long, default_value_t = 16)]
    tile: usize,
    /// Seed recorded in the provenance.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 1)]
    ensembles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "sphf")]
    format: OutputFormat,
    /// Time step (from 1) written when `--format csv`.
    #[arg(long, default_value_t = 1)]
    slice: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    holdout: PathBuf,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Direction {
    Forward,
    Inverse,
}

#[derive(Args)]
struct ShtArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    direction: Direction,
    #[arg(long)]
    out: PathBuf,
    /// Grid for the inverse transform (defaults to the minimal grid for L).
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_phi: Option<usize>,
    #[arg(long, value_enum, default_value = "sphf")]
    format: OutputFormat,
    #[arg(long, default_value_t = 1)]
    slice: usize,
}

#[derive(Args)]
struct CholArgs {
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, default_value_t = mpchol::DEFAULT_TILE_SIZE)]
    tile: usize,
    #[command(flatten)]
    precision: PrecisionArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value = "sender")]
    site: SiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the O(n³) residual check.
    #[arg(long)]
    no_residual: bool,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SiteArg {
    Sender,
    Receiver,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    n_phi: Option<usize>,
    #[arg(long = "T", default_value_t = 1)]
    t: usize,
    #[arg(long = "R", default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw from a synthetic known-truth model instead of white band-limited noise,
    /// writing its bundle here and its forcing next to the output.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UpsampleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    n_theta: usize,
    #[arg(long)]
    n_phi: usize,
    /// Band limit recorded for the target grid (defaults to the source's).
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the generic failure code so that 2 always means a failed validation.
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match par::with_threads(cli.threads, || run(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VALIDATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns `Ok(false)` only for a validation that ran but failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Train(a) => train(a),
        Command::Emulate(a) => emulate(a),
        Command::Validate(a) => return validate(a),
        Command::Sht(a) => sht(a),
        Command::Chol(a) => chol(a),
        Command::Synth(a) => synth(a),
        Command::Upsample(a) => upsample(a),
    }?;
    Ok(true)
}

fn load_series(path: &Path) -> Result<FieldSeries> {
    load_field_series(path).with_context(|| format!("reading {}", path.display()))
}

fn write_series(series: &FieldSeries, out: &Path, format: OutputFormat, slice: usize) -> Result<()> {
    match format {
        OutputFormat::Sphf => save_field_series(series, out)?,
        OutputFormat::Csv => {
            if slice == 0 || slice > series.n_times() {
                bail!("--slice {slice} is outside 1..={}", series.n_times());
            }
            write_csv_slice(series.get(0, slice - 1), out)?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let series = load_series(&a.input)?;
    let forcing = match &a.forcing {
        Some(p) => ForcingTrajectory::from_csv(p, a.forcing_start)?,
        None => ForcingTrajectory::none(),
    };
    let config = TrainConfig {
        k: a.k,
        tau: a.tau,
        order: a.p,
        innovation: InnovationConfig {
            map: a.precision.map()?,
            tile_size: a.tile,
            ..InnovationConfig::default()
        },
        seed: a.seed,
    };
    info!(
        "training on {} x {} grid, T={}, R={}",
        series.spec().n_theta(),
        series.spec().n_phi(),
        series.n_times(),
        series.n_ensembles()
    );
    let model = pipeline::train(&series, &forcing, &config)?;
    model.save(&a.out)?;
    println!(
        "model written to {} (nugget {:e}, factor error {:e})",
        a.out.display(),
        model.provenance.nugget,
        model.provenance.factor_error
    );
    Ok(())
}

fn emulate(a: EmulateArgs) -> Result<()> {
    let model = EmulatorModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let series = stochastic::emulate(&model, a.t, a.ensembles, a.seed)?;
    write_series(&series, &a.out, a.format, a.slice)?;
    println!("wrote {} steps x {} members to {}", a.t, a.ensembles, a.out.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<bool> {
    let model = EmulatorModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let holdout = load_series(&a.holdout)?;
    let report = pipeline::validate(&model, &holdout, a.reps, a.seed)?;
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "{} reps, {} holdout values per location: flagged |z| > 3 {:.4}% (limit {:.2}%) -> {}",
        report.n_reps,
        report.n_times * report.n_ensembles,
        100.0 * report.flagged_fraction,
        100.0 * report.flag_limit,
        if report.passed { "PASS" } else { "FAIL" }
    );
    Ok(report.passed)
}

fn sht(a: ShtArgs) -> Result<()> {
    match a.direction {
        Direction::Forward => {
            let series = load_series(&a.input)?;
            let plan = ShtPlan::new(*series.spec())?;
            let vectors = plan.forward_batch(&series)?;
            let set = CoefficientSet {
                band_limit: series.spec().band_limit(),
                n_times: series.n_times(),
                n_ensembles: series.n_ensembles(),
                vectors,
            };
            save_coefficients(&set, &a.out)?;
        }
        Direction::Inverse => {
            let set = load_coefficients(&a.input)?;
            let l = set.band_limit;
            let spec = match (a.n_theta, a.n_phi) {
                (None, None) => GridSpec::from_band_limit(l)?,
                (t, p) => {
                    let base = GridSpec::from_band_limit(l)?;
                    GridSpec::new(t.unwrap_or(base.n_theta()), p.unwrap_or(base.n_phi()), l)?
                }
            };
            let plan = ShtPlan::new(spec)?;
            let series = plan.inverse_batch(&set.vectors, set.n_times, set.n_ensembles)?;
            write_series(&series, &a.out, a.format, a.slice)?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn chol(a: CholArgs) -> Result<()> {
    let map = a.precision.map()?;
    let matrix = mpchol::random_spd(a.n, a.seed);
    let options = CholeskyOptions {
        workers: a.workers,
        site: match a.site {
            SiteArg::Sender => ConversionSite::Sender,
            SiteArg::Receiver => ConversionSite::Receiver,
        },
    };
    let grid = mpchol::assign_precisions(mpchol::TiledMatrix::n_tiles_for(a.n, a.tile), &map);
    let mut tiled = mpchol::TiledMatrix::from_dense(a.n, a.tile, &matrix, grid)?;
    let mut stats = mpchol::tiled_cholesky(&mut tiled, &map, options)?;
    if !a.no_residual {
        stats.relative_residual = Some(mpchol::relative_residual(&matrix, &tiled.to_dense_lower(), a.n));
    }
    let json = stats.to_json()?;
    match &a.stats {
        Some(p) => {
            stats.save(p)?;
            println!(
                "{} n={} b={} workers={}: {:.3} s, residual {}, saved {:.1}% storage",
                stats.variant,
                stats.n,
                stats.tile_size,
                stats.workers,
                stats.wall_clock_s,
                stats.relative_residual.map_or("n/a".to_string(), |r| format!("{r:.3e}")),
                100.0 * stats.saved_fraction
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match (a.n_theta, a.n_phi) {
        (None, None) => GridSpec::from_band_limit(a.l)?,
        (t, p) => {
            let base = GridSpec::from_band_limit(a.l)?;
            GridSpec::new(t.unwrap_or(base.n_theta()), p.unwrap_or(base.n_phi()), a.l)?
        }
    };
    let series = match &a.truth {
        None => {
            let fields = par::map_range(a.t * a.r, |k| synth_bandlimited(spec, a.seed.wrapping_add(k as u64)))
                .into_iter()
                .collect::<sphemu_core::Result<Vec<_>>>()?;
            FieldSeries::new(spec, a.t, a.r, fields)?
        }
        Some(dir) => {
            let s = SyntheticSpec {
                seed: a.seed,
                n_years: a.t.div_ceil(12) + 1,
                ..SyntheticSpec::default()
            };
            let model = synthetic_model(spec, &s)?;
            model.save(dir)?;
            model.forcing.to_csv(&a.out.with_extension("forcing.csv"))?;
            stochastic::emulate(&model, a.t, a.r, a.seed)?
        }
    };
    save_field_series(&series, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn upsample(a: UpsampleArgs) -> Result<()> {
    let series = load_series(&a.input)?;
    let target = GridSpec::new(a.n_theta, a.n_phi, a.l.unwrap_or(series.spec().band_limit()))?;
    let up = upsample_spline(&series, target)?;
    save_field_series(&up, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}
