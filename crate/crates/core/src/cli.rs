//! Command-line front end: `gen-fdm`, `reduce`, `eval`, `compare`.
//!
//! Exit status is 0 on success, 1 when the numerics fail (breakdown,
//! singular shift, ...) and 2 for usage, input and IO problems.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adaptive::{run_abtl, AbtlOptions, AbtlOutput, IterationRecord, DEFAULT_TOLERANCE};
use crate::error::{MorError, Result};
use crate::evaluation::{
    compare, compare_with_full, log_grid, sample_full, write_csv, FrequencyGrid, DEFAULT_GRID_COUNT,
    DEFAULT_GRID_MAX, DEFAULT_GRID_MIN,
};
use crate::problems::{
    load_bundle, load_matrix_market, load_reduced, save_bundle, save_reduced, BenchmarkBundle, BundleSystem,
    FdmSpec, LoadOptions, ReducedMetadata, SavedModel, SystemPaths,
};
use crate::second_order::reduce_second_order;
use crate::system::TransferFunction;

pub const HISTORY_FILE: &str = "history.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const COMPARE_FILE: &str = "compare.csv";

#[derive(Debug, Parser)]
#[command(name = "tangent-mor", version, about = "Adaptive block tangential Lanczos model reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Generate the convection-diffusion FDM benchmark
    GenFdm(GenFdmArgs),
    /// Reduce a system and write the reduced model
    Reduce(ReduceArgs),
    /// Compare a saved reduced model with the full system on a frequency grid
    Eval(EvalArgs),
    /// Reduce to several orders and tabulate time and sampled H-infinity error
    Compare(CompareArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenFdmArgs {
    /// interior grid points per direction (n = n0^2)
    #[arg(long, default_value_t = 20)]
    pub n0: usize,
    #[arg(long, default_value_t = 6)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// bundle directory from gen-fdm, or a Matrix Market file holding A
    #[arg(long, conflicts_with = "mdk")]
    pub input: Option<PathBuf>,
    /// M, D and K of a second-order system; pass `none` for M = I
    #[arg(long, num_args = 3, value_names = ["M", "D", "K"])]
    pub mdk: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long)]
    pub c: Option<PathBuf>,
    /// port count when both B and C are generated
    #[arg(long)]
    pub p: Option<usize>,
    /// seed for generated B and C
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReductionArgs {
    #[arg(long, default_value_t = 10)]
    pub m_max: usize,
    /// tangential block width
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// keep the second-order structure (requires an M/D/K system)
    #[arg(long)]
    pub second_order: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = DEFAULT_GRID_MIN)]
    pub grid_min: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_MAX)]
    pub grid_max: f64,
    #[arg(long, default_value_t = DEFAULT_GRID_COUNT)]
    pub grid_count: usize,
}

impl GridArgs {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        log_grid(self.grid_min, self.grid_max, self.grid_count)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub reduction: ReductionArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// directory written by `reduce`
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// directory for eval.csv; the CSV goes to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub m_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    #[arg(long)]
    pub second_order: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    /// directory for compare.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Everything needed to repeat a run; stored in the reduced model metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MorError::InvalidArgument(m));
        let check_reduction = |s: usize, tol: f64| {
            if s == 0 {
                return bad("--s must be at least 1".into());
            }
            if !(tol >= 0.0) {
                return bad(format!("--tol {tol} must be nonnegative"));
            }
            Ok(())
        };
        match &self.command {
            Command::GenFdm(a) => {
                if a.n0 < 2 {
                    return bad(format!("--n0 {} must be at least 2", a.n0));
                }
                if a.p == 0 || a.p > a.n0 * a.n0 {
                    return bad(format!("--p {} must be in 1..={}", a.p, a.n0 * a.n0));
                }
            }
            Command::Reduce(a) => {
                a.input.validate()?;
                check_reduction(a.reduction.s, a.reduction.tol)?;
                if a.reduction.m_max == 0 {
                    return bad("--m-max must be at least 1".into());
                }
            }
            Command::Eval(a) => {
                a.input.validate()?;
                a.grid.grid()?;
            }
            Command::Compare(a) => {
                a.input.validate()?;
                check_reduction(a.s, a.tol)?;
                a.grid.grid()?;
                if a.m_list.is_empty() || a.m_list.contains(&0) {
                    return bad("--m-list needs positive orders".into());
                }
            }
        }
        Ok(())
    }
}

impl InputArgs {
    fn validate(&self) -> Result<()> {
        if self.input.is_none() && self.mdk.is_none() {
            return Err(MorError::InvalidArgument("one of --input or --mdk is required".into()));
        }
        Ok(())
    }

    pub fn load(&self) -> Result<BenchmarkBundle> {
        let opts = LoadOptions {
            b: self.b.clone(),
            c: self.c.clone(),
            p: self.p,
            seed: self.seed,
            name: None,
            s: None,
        };
        match (&self.input, &self.mdk) {
            (Some(dir), None) if dir.is_dir() => {
                if self.b.is_some() || self.c.is_some() {
                    return Err(MorError::InvalidArgument("--b/--c cannot override a bundle directory".into()));
                }
                load_bundle(dir)
            }
            (Some(a), None) => load_matrix_market(&SystemPaths::FirstOrder { a: a.clone() }, &opts),
            (None, Some(mdk)) => {
                let m = (mdk[0].as_os_str() != "none").then(|| mdk[0].clone());
                let paths = SystemPaths::SecondOrder {
                    m,
                    d: mdk[1].clone(),
                    k: mdk[2].clone(),
                };
                load_matrix_market(&paths, &opts)
            }
            _ => Err(MorError::InvalidArgument("give exactly one of --input or --mdk".into())),
        }
    }
}

fn full_transfer(bundle: &BenchmarkBundle) -> &dyn TransferFunction {
    match &bundle.system {
        BundleSystem::FirstOrder(s) => s,
        BundleSystem::SecondOrder(s) => s,
    }
}

pub struct ReductionRun {
    pub model: SavedModel,
    pub metadata: ReducedMetadata,
    /// wall seconds spent in the reduction proper
    pub seconds: f64,
}

/// Runs the first- or second-order path on a loaded system.
pub fn reduce_bundle(bundle: &BenchmarkBundle, opts: &AbtlOptions, second_order: bool) -> Result<ReductionRun> {
    let started = Instant::now();
    let (model, out, coupling): (SavedModel, AbtlOutput, Option<f64>) = match (&bundle.system, second_order) {
        (BundleSystem::FirstOrder(_), true) => {
            return Err(MorError::InvalidArgument(format!(
                "--second-order needs an M/D/K system, '{}' is first order",
                bundle.metadata.name
            )))
        }
        (BundleSystem::FirstOrder(sys), false) => {
            let out = run_abtl(sys, opts)?;
            (SavedModel::FirstOrder(out.model.clone()), out, None)
        }
        (BundleSystem::SecondOrder(sos), true) => {
            let r = reduce_second_order(sos, opts)?;
            (SavedModel::SecondOrder(r.model), r.abtl, Some(r.coupling_condition))
        }
        (BundleSystem::SecondOrder(sos), false) => {
            let out = run_abtl(&sos.linearize()?, opts)?;
            (SavedModel::FirstOrder(out.model.clone()), out, None)
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let mut metadata = ReducedMetadata::from_output(&out, model.kind(), model.order());
    metadata.coupling_condition = coupling;
    Ok(ReductionRun {
        model,
        metadata,
        seconds,
    })
}

fn fmt_complex(z: Complex64) -> String {
    if z.re.is_infinite() {
        return "inf".into();
    }
    format!("{:.6e}{:+.6e}i", z.re, z.im)
}

pub fn write_history<W: Write>(out: &mut W, history: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(out, "iteration,sigma_re,sigma_im,mu_re,mu_im,right_residual,left_residual,candidates,biorthogonality")?;
    for r in history {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.6e}",
            r.iteration,
            r.sigma.re,
            r.sigma.im,
            r.mu.re,
            r.mu.im,
            r.right_residual,
            r.left_residual,
            r.candidates,
            r.biorthogonality
        )?;
    }
    Ok(())
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| MorError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    io(path, f(&mut buf))?;
    io(path, fs::write(path, buf))
}

fn print_table(history: &[IterationRecord], timings: &[f64]) {
    println!(
        "{:>4}  {:>29}  {:>29}  {:>11}  {:>11}  {:>8}",
        "iter", "sigma", "mu", "right res", "left res", "time[s]"
    );
    for (k, r) in history.iter().enumerate() {
        println!(
            "{:>4}  {:>29}  {:>29}  {:>11.4e}  {:>11.4e}  {:>8.3}",
            r.iteration,
            fmt_complex(r.sigma),
            fmt_complex(r.mu),
            r.right_residual,
            r.left_residual,
            timings.get(k).copied().unwrap_or(f64::NAN)
        );
    }
}

fn cmd_gen_fdm(a: &GenFdmArgs) -> Result<()> {
    let bundle = BenchmarkBundle::fdm(&FdmSpec::new(a.n0, a.p, a.seed))?;
    save_bundle(&a.out, &bundle)?;
    println!(
        "{}: n = {}, p = {}, seed = {} -> {}",
        bundle.metadata.name,
        bundle.metadata.n,
        bundle.metadata.p,
        a.seed,
        a.out.display()
    );
    Ok(())
}

fn cmd_reduce(a: &ReduceArgs, config: &RunConfig) -> Result<()> {
    let bundle = a.input.load()?;
    let mut opts = AbtlOptions::new(a.reduction.s, a.reduction.m_max);
    opts.tol = a.reduction.tol;
    let mut run = reduce_bundle(&bundle, &opts, a.reduction.second_order)?;
    run.metadata.config = Some(serde_json::to_value(config).expect("config serializes"));
    print_table(&run.metadata.history, &run.metadata.timings);
    save_reduced(&a.out, &run.model, &run.metadata)?;
    write_file(&a.out.join(HISTORY_FILE), |b| write_history(b, &run.metadata.history))?;
    println!(
        "{}: order {} after {} iterations ({}), {:.3} s -> {}",
        bundle.metadata.name,
        run.model.order(),
        run.metadata.m,
        if run.metadata.converged { "converged" } else { "not converged" },
        run.seconds,
        a.out.display()
    );
    Ok(())
}

fn check_ports(full: &dyn TransferFunction, reduced: &dyn TransferFunction) -> Result<()> {
    if full.ports() != reduced.ports() {
        return Err(MorError::DimensionMismatch(format!(
            "system has {} ports, reduced model {}",
            full.ports(),
            reduced.ports()
        )));
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let bundle = a.input.load()?;
    let (model, meta) = load_reduced(&a.model)?;
    let full = full_transfer(&bundle);
    check_ports(full, &model)?;
    let grid = a.grid.grid()?;
    let started = Instant::now();
    let cmp = compare(full, &model, &grid);
    let eval_seconds = started.elapsed().as_secs_f64();
    let skipped = cmp.error.skipped().len();
    match &a.out {
        Some(dir) => {
            io(dir, fs::create_dir_all(dir))?;
            write_file(&dir.join(EVAL_FILE), |b| write_csv(b, &cmp))?;
        }
        None => {
            let stdout = std::io::stdout();
            io(Path::new("<stdout>"), write_csv(&mut stdout.lock(), &cmp))?;
        }
    }
    let summary = format!(
        "{}: order {} hinf_estimate {:.6e} reduction_time {:.3} s eval_time {:.3} s skipped {}",
        bundle.metadata.name,
        model.order(),
        cmp.hinf_estimate(),
        meta.timings.iter().sum::<f64>(),
        eval_seconds,
        skipped
    );
    if a.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let bundle = a.input.load()?;
    let grid = a.grid.grid()?;
    let full = full_transfer(&bundle);
    let samples = sample_full(full, &grid);
    let mut rows = Vec::with_capacity(a.m_list.len());
    println!("{:>6}  {:>6}  {:>6}  {:>10}  {:>12}", "m", "iters", "order", "time[s]", "Err-Hinf");
    for &m in &a.m_list {
        let mut opts = AbtlOptions::new(a.s, m);
        opts.tol = a.tol;
        let run = reduce_bundle(&bundle, &opts, a.second_order)?;
        let err = compare_with_full(&samples, &run.model, &grid).hinf_estimate();
        println!(
            "{:>6}  {:>6}  {:>6}  {:>10.3}  {:>12.4e}",
            m,
            run.metadata.m,
            run.model.order(),
            run.seconds,
            err
        );
        rows.push((m, run.metadata.m, run.model.order(), run.seconds, err));
    }
    if let Some(dir) = &a.out {
        io(dir, fs::create_dir_all(dir))?;
        write_file(&dir.join(COMPARE_FILE), |b| {
            writeln!(b, "m,iterations,order,time,hinf_error")?;
            for (m, it, order, t, e) in &rows {
                writeln!(b, "{m},{it},{order},{t:.6e},{e:.16e}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::new(cli.command);
    config.validate()?;
    match &config.command {
        Command::GenFdm(a) => cmd_gen_fdm(a),
        Command::Reduce(a) => cmd_reduce(a, &config),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

pub fn exit_code(err: &MorError) -> u8 {
    if err.is_numerical() {
        1
    } else {
        2
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_json() {
        let cli = Cli::try_parse_from([
            "tangent-mor", "reduce", "--input", "sys", "--m-max", "3", "--s", "2", "--out", "o",
        ])
        .unwrap();
        let config = RunConfig::new(cli.command);
        config.validate().unwrap();
        let json = serde_json::to_value(&config).unwrap();
        assert_eq!(json["command"], "reduce");
        assert_eq!(serde_json::from_value::<RunConfig>(json).unwrap(), config);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let parse = |args: &[&str]| RunConfig::new(Cli::try_parse_from(args).unwrap().command).validate();
        assert!(parse(&["t", "reduce", "--out", "o"]).is_err());
        assert!(parse(&["t", "reduce", "--input", "x", "--s", "0", "--out", "o"]).is_err());
        assert!(parse(&["t", "eval", "--input", "x", "--model", "m", "--grid-min", "0"]).is_err());
        assert!(parse(&["t", "compare", "--input", "x", "--m-list", "10,0"]).is_err());
        assert!(parse(&["t", "gen-fdm", "--n0", "1", "--out", "o"]).is_err());
        assert!(Cli::try_parse_from(["t", "reduce", "--input", "a", "--mdk", "m", "d", "k", "--out", "o"]).is_err());
    }

    #[test]
    fn numerical_errors_exit_with_one() {
        assert_eq!(exit_code(&MorError::EmptyRegion), 1);
        assert_eq!(exit_code(&MorError::InvalidArgument(String::new())), 2);
    }
}
