// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end for cubic smoothing splines with discontinuities.

mod error;
mod io;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use cssd::signals::{bench_densified, bench_repeated, sample, Signal, Sites, BENCH_GAMMA, BENCH_P};
use cssd::{
    bin_closest, check_mesh_ratio, kfold_split, select_params_with_folds, solve_cssd, DataSeries64,
    Gamma, Hyperparams64, DEFAULT_MESH_RATIO_THRESHOLD,
};

pub use error::CliError;
pub use report::{CvJson, SolutionJson, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "cssd",
    version,
    about = "Cubic smoothing splines with discontinuities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct InputArgs {
    /// CSV file with columns x, y (or y1..yD) and optional delta; `-` reads stdin.
    #[arg(long)]
    input: String,
    /// Merge the closest sites until the mesh ratio drops below the threshold.
    #[arg(long)]
    bin: bool,
    /// Mesh ratio above which a warning is logged.
    #[arg(long, default_value_t = DEFAULT_MESH_RATIO_THRESHOLD)]
    mesh_threshold: f64,
}

#[derive(Debug, clap::Args)]
struct OutputArgs {
    /// Destination of the JSON solution; stdout by default.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of equidistant evaluation points written to --grid-output.
    #[arg(long, requires = "grid_output")]
    grid: Option<usize>,
    /// CSV destination for the evaluation grid.
    #[arg(long, requires = "grid")]
    grid_output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit with fixed parameters.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        p: f64,
        /// Jump penalty, or `inf` for the classical smoothing spline.
        #[arg(long, value_parser = parse_gamma)]
        gamma: Gamma<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Choose parameters by K-fold cross-validation, then fit.
    Auto {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum number of cross-validation scores per search.
        #[arg(long, default_value_t = 60)]
        budget: usize,
        /// Additional searches started from the best parameters so far.
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        #[arg(long, default_value_t = 0.99)]
        p0: f64,
        #[arg(long, default_value = "1", value_parser = parse_gamma)]
        gamma0: Gamma<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Time the solver on densified and repeated HeaviSine data.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "200,400,800,1600,3200")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
    },
    /// Write a sampled test signal as CSV.
    Gen {
        #[arg(long, value_enum)]
        signal: SignalArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SitesArg::Equidistant)]
        sites: SitesArg,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SignalArg {
    #[value(alias = "bessel")]
    G1,
    #[value(alias = "g2")]
    Heavisine,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SitesArg {
    Equidistant,
    Uniform,
}

fn parse_gamma(s: &str) -> Result<Gamma<f64>, String> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(Gamma::Infinite);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| format!("'{s}' is neither a number nor 'inf'"))?;
    if v.is_finite() && v > 0.0 {
        Ok(Gamma::Finite(v))
    } else if v == f64::INFINITY {
        Ok(Gamma::Infinite)
    } else {
        Err(format!("gamma must be positive, got {s}"))
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var("CSSD_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "CSSD_THREADS must be a positive integer, got '{text}'"
        ))
    })?;
    // A pool may already exist when `run` is called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn load(args: &InputArgs) -> Result<DataSeries64, CliError> {
    if !(args.mesh_threshold > 1.0) {
        return Err(CliError::Usage(format!(
            "--mesh-threshold must exceed 1, got {}",
            args.mesh_threshold
        )));
    }
    let series = io::read_series(&args.input)?;
    if args.bin {
        let binned = bin_closest(&series, args.mesh_threshold)?;
        log::info!("binned {} sites into {}", series.len(), binned.len());
        Ok(binned)
    } else {
        check_mesh_ratio(&series, args.mesh_threshold)?;
        Ok(series)
    }
}

fn write_solution(
    series: &DataSeries64,
    params: &Hyperparams64,
    cv: Option<CvJson>,
    out: &OutputArgs,
) -> Result<(), CliError> {
    let sol = solve_cssd(series, params)?;
    let json = SolutionJson::new(series, &sol, cv);
    let mut bytes =
        serde_json::to_vec_pretty(&json).map_err(|e| CliError::Numerical(e.to_string()))?;
    bytes.push(b'\n');
    io::write_output(out.output.as_deref(), &bytes)?;
    if let (Some(m), Some(path)) = (out.grid, out.grid_output.as_deref()) {
        if m < 2 {
            return Err(CliError::Usage(format!(
                "--grid needs at least 2 points, got {m}"
            )));
        }
        let xs = series.xs();
        let (a, b) = (xs[0], xs[xs.len() - 1]);
        let rows = (0..m).map(|i| {
            let t = if i + 1 == m {
                b
            } else {
                a + (b - a) * i as f64 / (m - 1) as f64
            };
            let mut row = vec![t];
            row.extend(sol.evaluate(t));
            row
        });
        let mut header = vec!["x".to_string()];
        header.extend(io::y_headers(series.dim()));
        io::write_output(Some(path), &io::csv_bytes(&header, rows)?)?;
    }
    Ok(())
}

fn median_seconds(
    runs: usize,
    mut f: impl FnMut() -> Result<(), CliError>,
) -> Result<f64, CliError> {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t0 = Instant::now();
        f()?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

fn bench(sizes: &[usize], runs: usize) -> Result<(), CliError> {
    if runs == 0 || sizes.is_empty() {
        return Err(CliError::Usage(
            "bench needs at least one size and one run".into(),
        ));
    }
    let params = Hyperparams64::finite(BENCH_P, BENCH_GAMMA)?;
    let mut text = format!("{:>8} {:>14} {:>14}\n", "n", "densified_s", "repeated_s");
    for &n in sizes {
        let dense = bench_densified(n)?;
        let repeated = bench_repeated(n)?;
        let td = median_seconds(runs, || {
            solve_cssd(&dense, &params).map(drop).map_err(Into::into)
        })?;
        let tr = median_seconds(runs, || {
            solve_cssd(&repeated, &params).map(drop).map_err(Into::into)
        })?;
        text.push_str(&format!("{n:>8} {td:>14.6} {tr:>14.6}\n"));
    }
    io::write_output(None, text.as_bytes())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            input,
            p,
            gamma,
            output,
        } => {
            let params =
                Hyperparams64::new(p, gamma).map_err(|e| CliError::Usage(e.to_string()))?;
            let series = load(&input)?;
            write_solution(&series, &params, None, &output)
        }
        Command::Auto {
            input,
            folds,
            seed,
            budget,
            restarts,
            p0,
            gamma0,
            output,
        } => {
            let start =
                Hyperparams64::new(p0, gamma0).map_err(|e| CliError::Usage(e.to_string()))?;
            if budget == 0 {
                return Err(CliError::Usage("--budget must be positive".into()));
            }
            let series = load(&input)?;
            if folds < 2 || folds > series.len() {
                return Err(CliError::Usage(format!(
                    "--folds must lie in [2, {}], got {folds}",
                    series.len()
                )));
            }
            let split = kfold_split(series.len(), folds, seed)?;
            let mut best = select_params_with_folds(&series, &split, &start, budget)?;
            let start_score = best.start_score;
            let mut used = best.evaluations;
            for _ in 0..restarts {
                let next = select_params_with_folds(&series, &split, &best.params, budget)?;
                used += next.evaluations;
                if next.score < best.score {
                    best = next;
                }
            }
            log::info!(
                "selected p = {}, gamma = {:?}",
                best.params.p(),
                best.params.gamma()
            );
            let cv = CvJson {
                cv_score: best.score,
                start_score,
                folds,
                seed,
                evaluations_used: used,
                restarts,
            };
            write_solution(&series, &best.params, Some(cv), &output)
        }
        Command::Bench { sizes, runs } => bench(&sizes, runs),
        Command::Gen {
            signal,
            n,
            sigma,
            seed,
            sites,
            output,
        } => {
            if n == 0 {
                return Err(CliError::Usage("--n must be positive".into()));
            }
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--sigma must be finite and non-negative, got {sigma}"
                )));
            }
            let signal = match signal {
                SignalArg::G1 => Signal::G1,
                SignalArg::Heavisine => Signal::HeaviSine,
            };
            let sites = match sites {
                SitesArg::Equidistant => Sites::Equidistant,
                SitesArg::Uniform => Sites::UniformRandom,
            };
            let s = sample(signal, n, sigma, sites, seed)?;
            let header = ["x", "y", "delta"].map(String::from);
            let rows = (0..s.len()).map(|i| vec![s.xs()[i], s.y(i, 0), s.deltas()[i]]);
            io::write_output(output.as_deref(), &io::csv_bytes(&header, rows)?)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Errors are reported on stderr as one JSON object.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                eprintln!(
                    "{}",
                    CliError::Usage(e.render().to_string().trim_end().to_string()).to_json()
                );
            }
            return code;
        }
    };
    match init_threads().and_then(|()| execute(cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
