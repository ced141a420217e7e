//! `spod` — generate benchmark data, run a decomposition, report results.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for I/O or format
//! errors, 4 when the solver diverges (the history is still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use spod_cli::{
    load_matrix, read_manifest, read_shifts, read_summary, write_manifest, write_matrix,
    write_shifts, write_summary, CliError, RunManifest, RunSummary,
};
use spod_core::metrics::{self, RunReport};
use spod_core::solver::{self, ConvergenceHistory, Method, SolverConfig, SpodProblem};
use spod_core::synth::{gen_multilinear, gen_sine_noise, BenchmarkSpec};
use spod_core::{SnapshotMatrix, SpatialGrid, SpodError, TransportOperator};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

/// Default output directory: `--out` flag, then the `SPOD_OUT_DIR`
/// environment variable, then the working directory.
fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SPOD_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Parser)]
#[command(
    name = "spod",
    about = "Shifted proper orthogonal decomposition: transported low-rank fields plus sparse noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic benchmark (snapshot matrix, shift files, ground truth)
    Generate(GenerateArgs),
    /// Decompose a snapshot matrix into transported low-rank frames
    Decompose(DecomposeArgs),
    /// Tabulate finished runs into a comparison report
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Benchmark name: multilinear or sine_noise
    spec: String,
    /// Override the corrupted-entry fraction
    #[arg(long)]
    noise: Option<f64>,
    /// Override the generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Snapshot matrix (SPODM1 binary, or .csv for the plain-text importer)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Shift trajectory file, one per frame (one value per snapshot, in grid cells)
    #[arg(long = "shifts")]
    shift_files: Vec<PathBuf>,
    /// Solver: jfb, bfb or alm
    #[arg(long)]
    method: Option<String>,
    /// Nuclear-norm weight; repeat for per-frame values
    #[arg(long = "lambda")]
    lambdas: Vec<f64>,
    /// l1 weight of the sparse noise term (0 disables the noise block)
    #[arg(long)]
    lambda_noise: Option<f64>,
    /// ALM penalty parameter (default M*N / (4 ||Q||_1))
    #[arg(long)]
    mu: Option<f64>,
    /// Forward-backward step size (default 1/K)
    #[arg(long)]
    alpha: Option<f64>,
    /// Relative-decrease stopping tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Recorded for replay; the solvers themselves are deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Row label used in reports (defaults to the input file stem)
    #[arg(long)]
    label: Option<String>,
    /// Replay configuration from a manifest; explicit flags take precedence
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories written by `decompose`
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Output directory for report.txt and report.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CliError::Usage(_) => ExitCode::from(EXIT_USAGE),
                CliError::Io { .. } | CliError::Format { .. } => ExitCode::from(EXIT_IO),
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, CliError> {
    let mut spec = match args.spec.as_str() {
        "multilinear" => BenchmarkSpec::multilinear(),
        "sine_noise" => BenchmarkSpec::sine_noise(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown benchmark '{other}' (expected multilinear or sine_noise)"
            )))
        }
    };
    if let Some(noise) = args.noise {
        spec.noise_fraction = noise;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (snapshot, transports, truth) = match spec.name.as_str() {
        "multilinear" => gen_multilinear(&spec),
        _ => gen_sine_noise(&spec),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let out = resolve_out_dir(args.out);
    ensure_dir(&out)?;
    write_matrix(&out.join("Q.matrix"), snapshot.values())?;
    let dx = snapshot.grid().dx();
    for (k, op) in transports.iter().enumerate() {
        let cells: Vec<f64> = op.shifts().iter().map(|s| s / dx).collect();
        write_shifts(&out.join(format!("shifts_{}.txt", k + 1)), &cells)?;
    }
    let ranks: Vec<String> = truth.true_ranks.iter().map(|r| r.to_string()).collect();
    let truth_text = format!(
        "benchmark={}\nm={}\nn={}\nseed={}\nranks={}\nnoise_count={}\n",
        spec.name,
        spec.m,
        spec.n,
        spec.seed,
        ranks.join(","),
        truth.noise_mask.len()
    );
    spod_cli::atomic_write(&out.join("truth.txt"), truth_text.as_bytes())?;
    println!(
        "wrote {}x{} snapshot, {} shift files and truth.txt to {}",
        spec.m,
        spec.n,
        transports.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Flag > manifest > built-in default.
fn pick<T>(flag: Option<T>, manifest: Option<T>, default: T) -> T {
    flag.or(manifest).unwrap_or(default)
}

fn cmd_decompose(args: DecomposeArgs) -> Result<ExitCode, CliError> {
    let manifest = args
        .manifest
        .as_deref()
        .map(read_manifest)
        .transpose()?;

    let input = args
        .input
        .clone()
        .or_else(|| manifest.as_ref().map(|m| m.input.clone()))
        .ok_or_else(|| CliError::Usage("--input (or --manifest) is required".into()))?;
    let shift_files = if !args.shift_files.is_empty() {
        args.shift_files.clone()
    } else {
        manifest
            .as_ref()
            .map(|m| m.shift_files.clone())
            .unwrap_or_default()
    };
    if shift_files.is_empty() {
        return Err(CliError::Usage(
            "at least one --shifts file is required".into(),
        ));
    }

    let method_name = args
        .method
        .clone()
        .or_else(|| manifest.as_ref().map(|m| m.method.clone()))
        .unwrap_or_else(|| "jfb".into());
    let method = Method::from_str(&method_name)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let q = load_matrix(&input)?;
    let (m, n) = q.dim();
    let k_frames = shift_files.len();

    // shifts are in grid cells; a unit-spacing grid makes them physical
    let grid = SpatialGrid::new(m, 0.0, 1.0).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut transports = Vec::with_capacity(k_frames);
    for path in &shift_files {
        let cells = read_shifts(path)?;
        if cells.len() != n {
            return Err(CliError::Usage(format!(
                "{} has {} shifts but the snapshot matrix has {} columns",
                path.display(),
                cells.len(),
                n
            )));
        }
        transports
            .push(TransportOperator::new(cells, grid).map_err(|e| CliError::Usage(e.to_string()))?);
    }

    let mut config = SolverConfig::new(method, k_frames);
    let mref = manifest.as_ref();
    config.lambdas = if !args.lambdas.is_empty() {
        match args.lambdas.len() {
            1 => vec![args.lambdas[0]; k_frames],
            len if len == k_frames => args.lambdas.clone(),
            len => {
                return Err(CliError::Usage(format!(
                    "{len} lambda values given for {k_frames} frames"
                )))
            }
        }
    } else if let Some(m) = mref {
        m.lambdas.clone()
    } else {
        config.lambdas
    };
    config.lambda_noise = pick(
        args.lambda_noise,
        mref.map(|m| m.lambda_noise),
        config.lambda_noise,
    );
    config.step_alpha = pick(args.alpha, mref.map(|m| m.step_alpha), config.step_alpha);
    config.delta_tol = pick(args.tol, mref.map(|m| m.delta_tol), config.delta_tol);
    config.max_iter = pick(args.max_iter, mref.map(|m| m.max_iter), config.max_iter);
    config.mu = pick(
        args.mu,
        mref.and_then(|m| m.mu),
        SolverConfig::mu_default(q.view()),
    );
    if let Some(m) = mref {
        config.rank_rel_tol = m.rank_rel_tol;
    }
    let seed = pick(args.seed, mref.map(|m| m.seed), 0);

    let out = resolve_out_dir(args.out.clone().or_else(|| mref.map(|m| m.out_dir.clone())));
    ensure_dir(&out)?;
    let label = args
        .label
        .clone()
        .or_else(|| mref.map(|m| m.benchmark.clone()))
        .unwrap_or_else(|| {
            input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into())
        });

    let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let snapshot = SnapshotMatrix::new(q.clone(), grid, times)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let problem = SpodProblem::new(snapshot, transports, config.lambda_noise > 0.0)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    write_manifest(
        &out.join("manifest.json"),
        &RunManifest {
            benchmark: label.clone(),
            input: input.clone(),
            shift_files,
            method: method.name().into(),
            lambdas: config.lambdas.clone(),
            lambda_noise: config.lambda_noise,
            step_alpha: config.step_alpha,
            mu: Some(config.mu),
            delta_tol: config.delta_tol,
            max_iter: config.max_iter,
            rank_rel_tol: config.rank_rel_tol,
            seed,
            out_dir: out.clone(),
        },
    )?;

    let start = Instant::now();
    let (decomposition, history) = match solver::solve(&problem, &config) {
        Ok(pair) => pair,
        Err(SpodError::Diverged { iteration, history }) => {
            write_history(&out.join("history.csv"), &history, k_frames)?;
            eprintln!("solver diverged at iteration {iteration}; history written");
            return Ok(ExitCode::from(EXIT_DIVERGED));
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    let cpu_seconds = start.elapsed().as_secs_f64();

    for (k, frame) in decomposition.frames.iter().enumerate() {
        write_matrix(&out.join(format!("frame_{}.matrix", k + 1)), frame.view())?;
    }
    write_matrix(&out.join("E.matrix"), decomposition.noise.view())?;

    let mut spectra_text = String::new();
    for (k, spectrum) in decomposition.spectra.iter().enumerate() {
        let values: Vec<String> = spectrum.values().iter().map(|v| format!("{v:?}")).collect();
        spectra_text.push_str(&format!("frame_{},{}\n", k + 1, values.join(",")));
    }
    spod_cli::atomic_write(&out.join("spectra.txt"), spectra_text.as_bytes())?;
    write_history(&out.join("history.csv"), &history, k_frames)?;

    let relative_error = metrics::relative_reconstruction_error(&problem, &decomposition)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let summary = RunSummary {
        benchmark: label,
        method: method.name().into(),
        relative_error,
        ranks: decomposition.ranks.clone(),
        iterations: decomposition.iterations,
        cpu_seconds,
        converged: decomposition.converged,
    };
    write_summary(&out.join("summary.json"), &summary)?;

    println!(
        "{}: {} iterations, rel_error = {:.6e}, ranks = {:?} -> {}",
        method.name(),
        decomposition.iterations,
        relative_error,
        decomposition.ranks,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_history(
    path: &Path,
    history: &ConvergenceHistory,
    k_frames: usize,
) -> Result<(), CliError> {
    let mut text = String::from("iteration,objective,rel_error");
    for k in 0..k_frames {
        text.push_str(&format!(",rank_{}", k + 1));
    }
    text.push_str(",noise_l1,seconds\n");
    for r in &history.records {
        text.push_str(&format!("{},{:?},{:?}", r.iteration, r.objective, r.rel_error));
        for rank in &r.ranks {
            text.push_str(&format!(",{rank}"));
        }
        text.push_str(&format!(",{:?},{:.6}\n", r.noise_l1, r.elapsed_secs));
    }
    spod_cli::atomic_write(path, text.as_bytes())
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode, CliError> {
    let mut reports = Vec::with_capacity(args.runs.len());
    for dir in &args.runs {
        let summary = read_summary(&dir.join("summary.json"))?;
        reports.push(RunReport {
            benchmark: summary.benchmark,
            method: summary.method,
            relative_error: summary.relative_error,
            ranks: summary.ranks,
            iterations: summary.iterations,
            cpu_seconds: summary.cpu_seconds,
            converged: summary.converged,
        });
    }
    let table = metrics::build_table(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    let csv = metrics::build_csv(&reports).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = resolve_out_dir(args.out);
    ensure_dir(&out)?;
    spod_cli::atomic_write(&out.join("report.txt"), table.as_bytes())?;
    spod_cli::atomic_write(&out.join("report.csv"), csv.as_bytes())?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}
