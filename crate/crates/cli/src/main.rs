//! `taxisfv` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 a convergence study flagged non-convergence (results are still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taxisfv::amr::MonitorKind;
use taxisfv::harness::{
    mass, run_2d, run_amr_benchmark, run_convergence_study, simulate_1d, write_json,
    write_metrics_csv, write_snapshot_csv, AmrBenchConfig, ExperimentPreset, MetricsRow, ModelParameters, PresetName, RunConfig,
    RunMetadata, Scale, Snapshot, StudyConfig, TwoDConfig,
};
use taxisfv::stability::{find_reaction_steady_state, scan_dispersion};
use taxisfv::time_integration::Method;
use taxisfv::Error;

#[derive(Parser)]
#[command(name = "taxisfv", version, about = "Finite-volume simulations of taxis-driven invasion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write snapshots, metrics and metadata.
    Run(RunArgs),
    /// Grid-convergence study of one or more methods against a fine reference.
    Convergence(ConvergenceArgs),
    /// Adaptive-mesh benchmark of Experiment I against uniform grids.
    AmrBench(AmrArgs),
    /// Dispersion relation of a homogeneous steady state.
    Dispersion(DispersionArgs),
    /// Two-dimensional run with windowed snapshots.
    Run2d(Run2dArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Preset: I, II, 2D or REDUCED.
    #[arg(long)]
    preset: Option<String>,
    /// Time integration method, e.g. IMEX3 (comma-separated list for `convergence`).
    #[arg(long)]
    method: Option<String>,
    /// Number of cells (per direction in 2D).
    #[arg(long)]
    cells: Option<usize>,
    /// Courant number.
    #[arg(long)]
    cfl: Option<f64>,
    /// Final time.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Flat key/value TOML file with model and numerical settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the full published problem sizes.
    #[arg(long = "paper-scale")]
    paper_scale: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Also write a snapshot every this many time units.
    #[arg(long = "snapshot-every")]
    snapshot_every: Option<f64>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated test cell counts.
    #[arg(long = "study-cells", value_delimiter = ',')]
    study_cells: Option<Vec<usize>>,
    #[arg(long = "reference-cells")]
    reference_cells: Option<usize>,
    /// Directory of cached reference solutions (default: <out>/cache).
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct AmrArgs {
    #[command(flatten)]
    common: Common,
    /// gradient or velocity-error.
    #[arg(long)]
    monitor: Option<String>,
    /// Keep neighbouring refinement levels within one of each other.
    #[arg(long)]
    smooth: bool,
    #[arg(long = "reference-cells")]
    reference_cells: Option<usize>,
}

#[derive(Args)]
struct DispersionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "k-max", default_value_t = 400.0)]
    k_max: f64,
    #[arg(long, default_value_t = 4001)]
    samples: usize,
}

#[derive(Args)]
struct Run2dArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated snapshot times.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
}

/// A failure together with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Parameter(_) | Error::Grid(_) | Error::ReferenceTooCoarse { .. } => 2,
            Error::Io { .. } | Error::Format { .. } | Error::Json(_) => 1,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::AmrBench(a) => cmd_amr(a),
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::Run2d(a) => cmd_run2d(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Config file settings overlaid with the command-line flags.
fn resolve(common: &Common, extra: RunConfig) -> Result<RunConfig, Error> {
    let file = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        preset: common.preset.as_deref().map(str::parse).transpose()?,
        method: match common.method.as_deref() {
            Some(m) if !m.contains(',') => Some(m.parse()?),
            _ => None,
        },
        cells: common.cells,
        cfl: common.cfl,
        t_end: common.t_end,
        paper_scale: common.paper_scale.then_some(true),
        ..Default::default()
    };
    Ok(file.overlay(extra).overlay(flags))
}

fn out_dir(common: &Common) -> Result<&Path, Error> {
    fs::create_dir_all(&common.out).map_err(|e| Error::Io {
        path: common.out.clone(),
        source: e,
    })?;
    Ok(&common.out)
}

fn metadata(preset: &ExperimentPreset, config: &RunConfig, cells: usize, cfl: f64) -> Result<RunMetadata, Error> {
    Ok(RunMetadata {
        version: env!("CARGO_PKG_VERSION").into(),
        preset: preset.name.to_string(),
        method: preset.method.to_string(),
        cells,
        t_end: preset.t_end,
        cfl,
        parameters: preset.parameters.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        config: serde_json::to_value(config)?,
        ..Default::default()
    })
}

fn cmd_run(args: RunArgs) -> CliResult {
    let config = resolve(&args.common, RunConfig::default())?;
    let preset = config.resolve_preset(PresetName::I)?;
    if preset.is_two_dimensional() {
        return cmd_run2d(Run2dArgs {
            common: args.common,
            snapshots: None,
        });
    }
    let controller = config.controller()?;
    let out = out_dir(&args.common)?;
    let system = preset.system()?;
    let names = system.names().to_vec();
    let n = names.len();
    let grid = preset.grid(preset.cells)?;
    let widths = grid.widths().to_vec();
    let every = args.snapshot_every.filter(|d| *d > 0.0);
    let mut rows = Vec::new();
    let mut next_snapshot = every.unwrap_or(f64::INFINITY);
    let mut snapshot_error = None;
    let run = simulate_1d(&preset, grid.clone(), preset.method, controller, preset.t_end, |t, dt, w| {
        rows.push(MetricsRow {
            t,
            dt,
            masses: (0..n).map(|s| mass(&widths, w, n, s)).collect(),
            error: None,
        });
        if t + 1e-12 >= next_snapshot {
            let path = out.join(format!("snapshot_t{t}.csv"));
            if let Err(e) = write_snapshot_csv(&path, &Snapshot::from_1d(&grid, w, &names)) {
                snapshot_error.get_or_insert(e);
            }
            next_snapshot += every.unwrap_or(f64::INFINITY);
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e.into());
    }
    write_snapshot_csv(&out.join("snapshot_initial.csv"), &Snapshot::from_1d(&grid, &preset.initial_state(&grid), &names))?;
    write_snapshot_csv(&out.join("snapshot_final.csv"), &Snapshot::from_1d(&run.grid, &run.w, &names))?;
    write_metrics_csv(&out.join("metrics.csv"), &names, &rows)?;
    let mut meta = metadata(&preset, &config, preset.cells, controller.cfl)?;
    meta.steps = run.stats.steps;
    meta.rejections = run.stats.rejections;
    meta.wall_time = run.wall_time;
    write_json(&out.join("metadata.json"), &meta)?;
    log::info!("{} steps to t = {} in {:.2} s", run.stats.steps, run.t, run.wall_time);
    Ok(())
}

fn cmd_convergence(args: ConvergenceArgs) -> CliResult {
    let extra = RunConfig {
        study_cells: args.study_cells.clone(),
        reference_cells: args.reference_cells,
        ..Default::default()
    };
    let config = resolve(&args.common, extra)?;
    let mut preset = config.resolve_preset(PresetName::II)?;
    let paper = config.scale() == Scale::Paper;
    let default_cells: Vec<usize> = match (preset.name, paper) {
        (PresetName::I, false) => vec![250, 500, 1000],
        (_, false) => vec![250, 500, 1000, 2000],
        (PresetName::I, true) => vec![100, 200, 400, 800, 1000, 2000, 3000, 4000, 5000],
        (_, true) => vec![100, 200, 400, 800, 1000, 2000, 3000, 4000],
    };
    let default_reference = match (preset.name, paper) {
        (PresetName::I, false) => 10_000,
        (_, false) => 20_000,
        (PresetName::I, true) => 50_000,
        (_, true) => 100_000,
    };
    let cells = config.study_cells.clone().unwrap_or(default_cells);
    let reference = config.reference_cells.unwrap_or(default_reference);
    let methods: Vec<Method> = match args.common.method.as_deref() {
        Some(list) => list.split(',').map(str::parse).collect::<Result<_, _>>()?,
        None => vec![preset.method],
    };
    let controller = config.controller()?;
    let out = out_dir(&args.common)?;
    let cache = args.cache.clone().unwrap_or_else(|| out.join("cache"));
    let mut all_converged = true;
    for method in methods {
        preset.method = method;
        let mut study = StudyConfig::new(preset.clone(), method, cells.clone(), reference);
        study.controller = controller;
        study.reference_method = config.reference_method.unwrap_or(Method::Imex3);
        study.cache_dir = Some(cache.clone());
        let outcome = run_convergence_study(&study)?;
        let mut csv = String::from("N,E,EOC,wall_time,steps\n");
        for r in &outcome.rows {
            let eoc = r.eoc.map(|e| format!("{e:e}")).unwrap_or_default();
            csv.push_str(&format!("{},{:e},{eoc},{:e},{}\n", r.cells, r.error, r.wall_time, r.steps));
        }
        let stem = format!("convergence_{}", method.label());
        fs::write(out.join(format!("{stem}.csv")), csv).map_err(|e| Error::Io {
            path: out.join(format!("{stem}.csv")),
            source: e,
        })?;
        write_json(&out.join(format!("{stem}.json")), &outcome)?;
        match &outcome.reason {
            None => println!("{method}: converged, terminal EOC {:?}", outcome.terminal_eoc()),
            Some(r) => {
                all_converged = false;
                println!("{method}: NOT converged: {r}");
            }
        }
    }
    if all_converged {
        Ok(())
    } else {
        Err(Failure {
            code: 4,
            message: "at least one study did not converge".into(),
        })
    }
}

fn cmd_amr(args: AmrArgs) -> CliResult {
    let monitor = match args.monitor.as_deref() {
        None => None,
        Some("gradient") => Some(MonitorKind::Gradient),
        Some("velocity-error" | "velocity_error") => Some(MonitorKind::VelocityError),
        Some(other) => {
            return Err(Error::Config(format!("unknown monitor `{other}` (gradient or velocity-error)")).into());
        }
    };
    let extra = RunConfig {
        monitor,
        smooth: args.smooth.then_some(true),
        reference_cells: args.reference_cells,
        ..Default::default()
    };
    let config = resolve(&args.common, extra)?;
    let paper = config.scale() == Scale::Paper;
    let t_end = config.t_end.unwrap_or(if paper { 60.0 } else { 20.0 });
    let reference = config.reference_cells.unwrap_or(if paper { 50_000 } else { 10_000 });
    let mut bench = AmrBenchConfig::new(config.amr_config()?, t_end, reference);
    bench.preset = config.resolve_preset(PresetName::I)?;
    bench.method = config.method.unwrap_or(Method::Imex3);
    bench.controller = config.controller()?;
    bench.initial_cells = config.initial_cells.or(config.cells).unwrap_or(400);
    if let Some(dt) = config.sample_interval {
        bench.sample_interval = dt;
    }
    let out = out_dir(&args.common)?;
    let result = run_amr_benchmark(&bench)?;
    let mut csv = String::from("t,E,cells,mass_c");
    for (n, _) in &result.uniform {
        csv.push_str(&format!(",E_uniform_{n}"));
    }
    csv.push('\n');
    for (k, s) in result.samples.iter().enumerate() {
        csv.push_str(&format!("{:e},{:e},{},{:e}", s.t, s.error, s.cells, s.mass_c));
        for (_, e) in &result.uniform {
            csv.push_str(&format!(",{:e}", e[k]));
        }
        csv.push('\n');
    }
    let path = out.join("amr_errors.csv");
    fs::write(&path, csv).map_err(|e| Error::Io { path, source: e })?;
    write_json(
        &out.join("amr_summary.json"),
        &serde_json::json!({
            "config": bench,
            "max_cells": result.max_cells(t_end),
            "average_cells": result.average_cells(t_end),
            "steps": result.steps,
            "adaptations": result.adaptations,
            "wall_time": result.wall_time,
            "cell_history": result.cell_history,
        }),
    )?;
    println!(
        "AMR: average cells {:.1}, max cells {}, {} adaptations",
        result.average_cells(t_end),
        result.max_cells(t_end),
        result.adaptations
    );
    Ok(())
}

fn cmd_dispersion(args: DispersionArgs) -> CliResult {
    let config = resolve(&args.common, RunConfig::default())?;
    let preset = config.resolve_preset(PresetName::Reduced)?;
    let system = preset.system()?;
    let guess = match &preset.parameters {
        ModelParameters::Reduced { parameters, .. } => parameters.steady_state().to_vec(),
        ModelParameters::Upa(_) => vec![1.0; system.n_species()],
    };
    let steady = find_reaction_steady_state(&system, &guess)?;
    let scan = scan_dispersion(&system, &steady, args.k_max, args.samples)?;
    let out = out_dir(&args.common)?;
    let mut csv = String::from("k,lambda\n");
    for (k, l) in scan.k.iter().zip(&scan.lambda) {
        csv.push_str(&format!("{k:e},{l:e}\n"));
    }
    let path = out.join("dispersion.csv");
    fs::write(&path, csv).map_err(|e| Error::Io { path, source: e })?;
    write_json(
        &out.join("dispersion.json"),
        &serde_json::json!({
            "preset": preset.name,
            "steady_state": steady,
            "unstable": scan.unstable,
            "peak": scan.peak(),
            "parameters": preset.parameters.entries(),
        }),
    )?;
    println!("steady state {steady:?}");
    for (a, b) in &scan.unstable {
        println!("unstable band: {a:.6} < k < {b:.6}");
    }
    Ok(())
}

fn cmd_run2d(args: Run2dArgs) -> CliResult {
    let extra = RunConfig {
        preset: Some(PresetName::TwoD),
        snapshot_times: args.snapshots.clone(),
        ..Default::default()
    };
    let config = resolve(&args.common, RunConfig::default())?.overlay(extra);
    let preset = config.resolve_preset(PresetName::TwoD)?;
    let mut run = TwoDConfig::new(preset.clone());
    run.controller = config.controller()?;
    if let Some(times) = &config.snapshot_times {
        run.snapshot_times = times.clone();
    }
    let out = out_dir(&args.common)?;
    let result = run_2d(&run)?;
    let names = preset.system()?.names().to_vec();
    let h = (preset.domain.1 - preset.domain.0) / run.cells_per_side as f64;
    let mut diagnostics = Vec::new();
    for snap in &result.snapshots {
        write_snapshot_csv(&out.join(format!("snapshot2d_t{}.csv", snap.t)), &Snapshot::from_2d(snap, &names, h))?;
        diagnostics.push(serde_json::json!({"t": snap.t, "mass": snap.mass, "min": snap.min, "max": snap.max}));
    }
    let mut meta = metadata(&preset, &config, run.cells_per_side, run.controller.cfl)?;
    meta.steps = result.stats.steps;
    meta.rejections = result.stats.rejections;
    meta.wall_time = result.wall_time;
    write_json(&out.join("metadata.json"), &meta)?;
    write_json(&out.join("diagnostics2d.json"), &diagnostics)?;
    log::info!("2D run: {} steps in {:.1} s", result.stats.steps, result.wall_time);
    Ok(())
}
