//! Command-line frontend.
//!
//! Every subcommand validates its parameters before doing any work, writes
//! comma-delimited text with `#` metadata lines, and reports failures as a
//! single `error[<category>]: <message>` line on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    gen_dataset, render_dataset, run_grid, run_table1, run_table2, Dimension, ExperimentConfig,
    DEFAULT_SEED,
};
use crate::kernels::{KernelFamily, ThetaParams};
use crate::ridge::{spaced, GridSpec, Spacing};
use crate::teoae::{
    error_histogram, parse_curves, render_curves, render_histogram, render_predictions,
    select_lambda, synth_cohort,
};

#[derive(Debug, Parser)]
#[command(name = "distreg", version, about = "Kernel ridge regression on probability distributions")]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// 1-D study: Wasserstein vs Legendre and histogram baselines.
    Table1(TableArgs),
    /// 2-D study: Wasserstein vs sliced Wasserstein across noise levels.
    Table2(Table2Args),
    /// Leave-one-out age prediction from response curves.
    Teoae(TeoaeArgs),
    /// Exhaustive grid search for one kernel family.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
    Teoae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Wasserstein,
    Legendre,
    Histogram,
    Sliced,
}

impl From<FamilyArg> for KernelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Wasserstein => KernelFamily::Wasserstein,
            FamilyArg::Legendre => KernelFamily::Legendre,
            FamilyArg::Histogram => KernelFamily::Histogram,
            FamilyArg::Sliced => KernelFamily::Sliced,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 700)]
    pub n_test: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// `lo,hi`; default depends on the dimension.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub mean_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub sigma_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub cov_entry_range: Option<(f64, f64)>,
    #[arg(long)]
    pub cov_floor: Option<f64>,
}

impl ExperimentArgs {
    fn config(&self, dimension: Dimension) -> ExperimentConfig {
        let base = match dimension {
            Dimension::One => ExperimentConfig::one_dimensional(),
            Dimension::Two => ExperimentConfig::two_dimensional(),
        };
        ExperimentConfig {
            seed: self.seed,
            n_train: self.n_train,
            n_test: self.n_test,
            noise_sigma: self.noise_sigma,
            mean_range: self.mean_range.unwrap_or(base.mean_range),
            sigma_range: self.sigma_range.unwrap_or(base.sigma_range),
            cov_entry_range: self.cov_entry_range.unwrap_or(base.cov_entry_range),
            cov_floor: self.cov_floor.unwrap_or(base.cov_floor),
            ..base
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridFlags {
    #[arg(long, default_value_t = 0.005)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 30.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 30)]
    pub lambda_count: usize,
    #[arg(long, default_value_t = 0.005)]
    pub l_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub l_max: f64,
    #[arg(long, default_value_t = 25)]
    pub l_count: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub gammas: Vec<f64>,
    /// Legendre truncation orders (the 1-D study always runs 5 and 10).
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub orders: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub zeta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zeta_max: f64,
    #[arg(long, default_value_t = 20)]
    pub zeta_count: usize,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 0.05)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 200.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 10)]
    pub xi_count: usize,
    /// Slice indices; default 0..=50.
    #[arg(long, value_delimiter = ',')]
    pub cs: Option<Vec<usize>>,
    #[arg(long, default_value = "geometric", value_parser = parse_spacing)]
    pub spacing: Spacing,
}

impl GridFlags {
    fn grid(&self) -> Result<GridSpec> {
        let base = GridSpec::standard();
        Ok(GridSpec {
            lambdas: spaced(self.lambda_min, self.lambda_max, self.lambda_count, self.spacing)?,
            ls: spaced(self.l_min, self.l_max, self.l_count, self.spacing)?,
            gammas: self.gammas.clone(),
            orders: self.orders.clone(),
            zetas: spaced(self.zeta_min, self.zeta_max, self.zeta_count, self.spacing)?,
            bins: self.bins,
            xis: spaced(self.xi_min, self.xi_max, self.xi_count, self.spacing)?,
            cs: self.cs.clone().unwrap_or(base.cs),
            spacing: self.spacing,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "1d")]
    pub kind: Kind,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Cohort size for `--kind teoae`.
    #[arg(long, default_value_t = 48)]
    pub subjects: usize,
    /// Frequency bins per curve for `--kind teoae`.
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub grid: GridFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Table2Args {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    pub noise_levels: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TeoaeArgs {
    /// Curve file with header `name,age,v0,...`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    pub l: f64,
    /// Fixed λ; when absent λ is chosen by leave-one-out over the λ grid.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.005)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 30.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 30)]
    pub lambda_count: usize,
    #[arg(long, default_value = "geometric", value_parser = parse_spacing)]
    pub spacing: Spacing,
    /// Width in years of the absolute-error histogram bins.
    #[arg(long, default_value_t = 1.0)]
    pub hist_width: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Histogram file; appended to the main output when absent.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, value_enum, default_value = "wasserstein")]
    pub family: FamilyArg,
    /// Input dimension; defaults to 2 for sliced and 1 otherwise.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dimension: Option<u8>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[command(flatten)]
    pub grid: GridFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

fn parse_spacing(s: &str) -> std::result::Result<Spacing, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let text = match args.kind {
        Kind::OneD | Kind::TwoD => {
            let dim = if args.kind == Kind::OneD { Dimension::One } else { Dimension::Two };
            let cfg = args.experiment.config(dim);
            cfg.validate()?;
            render_dataset(&cfg, &gen_dataset(&cfg)?)?
        }
        Kind::Teoae => {
            let seed = args.experiment.seed;
            let ds = synth_cohort(args.subjects, args.m, seed)?;
            let meta = [
                format!("seed={seed}"),
                format!("kind=teoae subjects={} m={}", args.subjects, args.m),
            ];
            render_curves(&ds, &meta)
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn cmd_table1(args: &TableArgs) -> Result<()> {
    let cfg = args.experiment.config(Dimension::One);
    cfg.validate()?;
    let grid = args.grid.grid()?;
    for family in [KernelFamily::Wasserstein, KernelFamily::Histogram] {
        grid.validate(family)?;
    }
    let report = run_table1(&cfg, &grid)?;
    write_output(args.out.as_deref(), &report.render())
}

fn cmd_table2(args: &Table2Args) -> Result<()> {
    let cfg = ExperimentConfig {
        noise_levels: args.noise_levels.clone(),
        ..args.table.experiment.config(Dimension::Two)
    };
    cfg.validate()?;
    let grid = args.table.grid.grid()?;
    for family in [KernelFamily::Wasserstein, KernelFamily::Sliced] {
        grid.validate(family)?;
    }
    let report = run_table2(&cfg, &grid)?;
    write_output(args.table.out.as_deref(), &report.render())
}

fn cmd_teoae(args: &TeoaeArgs) -> Result<()> {
    let theta = ThetaParams::new(args.gamma, args.l)?;
    let lambdas = match args.lambda {
        Some(l) => vec![l],
        None => spaced(args.lambda_min, args.lambda_max, args.lambda_count, args.spacing)?,
    };
    if !(args.hist_width > 0.0 && args.hist_width.is_finite()) {
        return Err(Error::Parameter(format!(
            "hist-width must be positive, got {}",
            args.hist_width
        )));
    }
    let text = fs::read_to_string(&args.input).map_err(|source| Error::Io {
        path: args.input.clone(),
        source,
    })?;
    let ds = parse_curves(&text)?;
    let sel = select_lambda(&ds, theta, &lambdas)?;
    let lambda_note = match args.lambda {
        Some(_) => "fixed".to_string(),
        None => format!(
            "loo-selected over {} {} values in [{}, {}]",
            lambdas.len(),
            args.spacing,
            args.lambda_min,
            args.lambda_max
        ),
    };
    let meta = vec![
        format!("input={}", args.input.display()),
        format!("records={} m={}", ds.len(), ds.bins()),
        format!("gamma={} l={} lambda={} ({lambda_note})", args.gamma, args.l, sel.lambda),
        format!("loo_rmse={}", sel.rmse),
    ];
    let hist = error_histogram(&sel.predictions, args.hist_width)?;
    let hist_meta = [format!("abs_error_histogram width={}", args.hist_width)];
    let preds = render_predictions(&sel.predictions, &meta);
    match &args.hist_out {
        Some(p) => {
            write_output(args.out.as_deref(), &preds)?;
            write_output(Some(p), &render_histogram(&hist, &hist_meta))
        }
        None => {
            let both = format!("{preds}\n{}", render_histogram(&hist, &hist_meta));
            write_output(args.out.as_deref(), &both)
        }
    }
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let family = KernelFamily::from(args.family);
    let dim = match args.dimension {
        Some(2) => Dimension::Two,
        Some(_) => Dimension::One,
        None if family == KernelFamily::Sliced => Dimension::Two,
        None => Dimension::One,
    };
    let cfg = args.experiment.config(dim);
    let grid = args.grid.grid()?;
    let report = run_grid(&cfg, &grid, family)?;
    write_output(args.out.as_deref(), &report.render())
}

pub fn run(cli: &Cli) -> Result<()> {
    let work = || match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Table1(a) => cmd_table1(a),
        Command::Table2(a) => cmd_table2(a),
        Command::Teoae(a) => cmd_teoae(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match cli.threads {
        Some(0) => Err(Error::Parameter("threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `std::env::args`, runs, and maps failures to exit status 1 with
/// one `error[<category>]:` line (`error[usage]:` for bad flags).
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn ranges_parse_with_negative_ends() {
        assert_eq!(parse_range("-0.5,0.5").unwrap(), (-0.5, 0.5));
        assert!(parse_range("1").is_err());
    }

    #[test]
    fn default_grid_flags_match_standard_grid() {
        let cli = Cli::try_parse_from(["distreg", "table1"]).unwrap();
        let Command::Table1(args) = cli.command else { unreachable!() };
        assert_eq!(args.grid.grid().unwrap(), GridSpec::standard());
        assert_eq!(args.experiment.config(Dimension::One), ExperimentConfig::one_dimensional());
    }
}
