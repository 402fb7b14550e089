use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hpsg::bench::FunctionKind;
use hpsg::experiment::{parse_config, run_with, ConfigValues};
use hpsg::refine::Strategy;

/// Build adaptive sparse grid interpolants of benchmark functions and
/// record error/cost results as CSV.
#[derive(Debug, Parser)]
#[command(name = "hpsg", version)]
struct Args {
    /// Benchmark function: curve2d, genz-c, sobol-g or kink1d.
    #[arg(long)]
    function: Option<FunctionKind>,
    #[arg(long)]
    dim: Option<usize>,
    /// Degree strategy: linear, highest, greedy or kink. Repeatable; all four by default.
    #[arg(long = "strategy", value_delimiter = ',')]
    strategies: Vec<Strategy>,
    /// Surplus threshold. Repeatable; one row per value and strategy.
    #[arg(long = "wmax", value_delimiter = ',')]
    w_max: Vec<f64>,
    /// Jump threshold of the kink strategy [default: 1].
    #[arg(long)]
    wkink: Option<f64>,
    /// Maximum polynomial degree [default: 6].
    #[arg(long)]
    pmax: Option<u8>,
    /// Stages accepted unconditionally [default: 1].
    #[arg(long)]
    qmin: Option<u32>,
    /// Maximum level sum [default: 25, 30 for curve2d].
    #[arg(long)]
    qmax: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random test points [default: 1e5].
    #[arg(long = "test-points")]
    test_points: Option<String>,
    /// Points on the kink locus [default: 1e3].
    #[arg(long = "kink-points")]
    kink_points: Option<String>,
    /// Builds per row; timings are averaged.
    #[arg(long)]
    repeats: Option<usize>,
    /// CSV file to append rows to.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the grid dump here (suffixed per row when sweeping).
    #[arg(long = "dump-grid")]
    dump_grid: Option<PathBuf>,
    /// Flat key = value file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn flag_values(args: &Args) -> Result<ConfigValues, String> {
    let mut text = String::new();
    if let Some(v) = &args.test_points {
        text.push_str(&format!("test-points = {v}\n"));
    }
    if let Some(v) = &args.kink_points {
        text.push_str(&format!("kink-points = {v}\n"));
    }
    let counts = ConfigValues::parse(&text).map_err(|e| e.to_string())?;
    Ok(ConfigValues {
        function: args.function,
        dim: args.dim,
        strategies: args.strategies.clone(),
        w_max: args.w_max.clone(),
        w_kink: args.wkink,
        p_max: args.pmax,
        q_min: args.qmin,
        q_max: args.qmax,
        seed: args.seed,
        test_points: counts.test_points,
        kink_points: counts.kink_points,
        repeats: args.repeats,
        out: args.out.clone(),
        dump_grid: args.dump_grid.clone(),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let flags = match flag_values(&args) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let spec = match parse_config(text.as_deref(), flags) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    println!(
        "{:<8} {:>9} {:>9} {:>9} {:>11} {:>11} {:>9}",
        "strategy", "w_max", "knots", "evals", "err_inf", "err_l2", "build_s"
    );
    let mut failed = 0;
    let result = run_with(&spec, |row, failure| {
        println!(
            "{:<8} {:>9.1e} {:>9} {:>9} {:>11.4e} {:>11.4e} {:>9.3}",
            row.strategy,
            row.w_max,
            row.num_knots,
            row.num_evals,
            row.err_inf,
            row.err_l2,
            row.build_seconds
        );
        if let Some(msg) = failure {
            failed += 1;
            eprintln!("warning: {} w_max={:e}: {msg}", row.strategy, row.w_max);
        }
    });
    match result {
        Ok(_) if failed == 0 => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
