//! Command-line front end. Every run writes `manifest.json` next to its
//! outputs; exit status is 0 on success, 1 on configuration errors and 2 on
//! runtime errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::complexity::complexity_report;
use crate::empirical_process::{
    deviation_report, draw_sample, envelope_curve, project_point, symmetric_difference_sweep,
    DEVIATION_HEADER, DEVIATION_SCHEMA, ENVELOPE_SCHEMA,
};
use crate::error::{Error, Result};
use crate::experiments::{
    parse_override, rearrangement_rows, resolve_set, run_experiment, ExperimentConfig,
    ExperimentKind,
};
use crate::gaussian::{analytics_sweeps, check_delta};
use crate::point_sets::{density_example_max_delta, UnitPointSet};
use crate::rng::derive_seed;
use crate::transport::{w2_empirical_gaussian, W2Reference};

pub const REARRANGEMENT_SCHEMA: &str = "# schema: rearrangement/v1";
pub const TRANSPORT_SCHEMA: &str = "# schema: transport-trials/v1";

#[derive(Debug, Parser)]
#[command(
    name = "gaussdkw",
    version,
    about = "Uniform scale-sensitive DKW experiments for Gaussian marginals"
)]
pub struct Cli {
    /// Worker threads: a positive integer or `auto`.
    #[arg(long, global = true, default_value = "auto")]
    pub threads: String,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian analytics checks.
    Analytics {
        #[command(subcommand)]
        action: AnalyticsAction,
    },
    /// Generate a point set as CSV.
    Setgen(SetgenArgs),
    /// Metric complexity of a point set.
    Complexity {
        #[command(subcommand)]
        action: ComplexityAction,
    },
    /// Per-direction deviation statistics of Gaussian samples.
    Deviation {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Transport distance of Gaussian samples.
    Transport {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyticsAction {
    /// Run the numeric bound sweeps.
    Check {
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Monte Carlo samples for the symmetric-difference sweep.
        #[arg(long, default_value_t = 10_000_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SetKind {
    Sphere,
    Cap,
    Density,
    Single,
    Antipodal,
}

#[derive(Debug, Args)]
pub struct SetgenArgs {
    pub kind: SetKind,
    #[arg(long)]
    pub d: usize,
    /// Number of base directions (the symmetrized set has twice as many).
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Offset of the density example; defaults to `1/(2 log d)`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ComplexityAction {
    /// Complexity estimates of a point-set CSV, as JSON.
    Report {
        set: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value`, applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Rerun from a previous `manifest.json`.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RunAction {
    Run(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment name; may instead come from the config.
    pub name: Option<ExperimentKind>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    let result = thread_pool(&cli.threads).and_then(|pool| pool.install(|| dispatch(&cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                Error::Config { key, message } => eprintln!("config error: key `{key}`: {message}"),
                other => eprintln!("error: {other}"),
            }
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}

fn thread_pool(threads: &str) -> Result<rayon::ThreadPool> {
    let n = match threads {
        "auto" => 0,
        s => s.parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            Error::config(
                "threads",
                format!("expected a positive integer or `auto`, got {s:?}"),
            )
        })?,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Resource(e.to_string()))
}

/// Writes to standard output, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_manifest(dir: &Path, command: &str, config: Value, base_seed: Option<u64>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "base_seed": base_seed,
        "config": config,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

/// Resolves the configuration of a config-driven command.
fn load_config(args: &ConfigArgs, command: &str) -> Result<ExperimentConfig> {
    let overrides = args
        .overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>>>()?;
    let text =
        if let Some(path) = &args.manifest {
            let raw = std::fs::read_to_string(path).map_err(|e| {
                Error::config("manifest", format!("cannot read {}: {e}", path.display()))
            })?;
            let manifest: Value =
                serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
            if manifest.get("command").and_then(Value::as_str) != Some(command) {
                return Err(Error::config(
                    "manifest",
                    format!("manifest was not written by `{command}`"),
                ));
            }
            let config = manifest
                .get("config")
                .ok_or_else(|| Error::config("manifest", "manifest has no config"))?;
            Some(config.to_string())
        } else if let Some(path) = &args.config {
            Some(std::fs::read_to_string(path).map_err(|e| {
                Error::config("config", format!("cannot read {}: {e}", path.display()))
            })?)
        } else {
            None
        };
    ExperimentConfig::from_json_with_overrides(text.as_deref(), &overrides)
}

fn output_dir(cli_dir: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    cli_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_path))
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Analytics {
            action:
                AnalyticsAction::Check {
                    output_dir,
                    mc_samples,
                    seed,
                },
        } => run_analytics(output_dir.as_deref(), *mc_samples, *seed),
        Command::Setgen(args) => run_setgen(args),
        Command::Complexity {
            action: ComplexityAction::Report { set, output_dir },
        } => run_complexity(set, output_dir.as_deref()),
        Command::Deviation {
            action: RunAction::Run(args),
        } => run_deviation(args),
        Command::Transport {
            action: RunAction::Run(args),
        } => run_transport(args),
        Command::Experiment(args) => {
            let mut cfg = load_config(&args.config, "experiment")?;
            if let Some(name) = args.name {
                let named_in_config =
                    args.config.config.is_some() || args.config.manifest.is_some();
                if named_in_config
                    && cfg.experiment != name
                    && config_names_experiment(&args.config)?
                {
                    return Err(Error::config(
                        "experiment",
                        format!(
                            "command names {} but the config names {}",
                            name.name(),
                            cfg.experiment.name()
                        ),
                    ));
                }
                cfg.experiment = name;
            }
            let dir = output_dir(&args.config.output_dir, &cfg);
            let out = run_experiment(&cfg)?;
            out.write_to(&dir)?;
            write_manifest(&dir, "experiment", cfg.to_json(), Some(cfg.base_seed))?;
            emit(&(serde_json::to_string_pretty(&out.summary)? + "\n"));
            Ok(())
        }
    }
}

fn config_names_experiment(args: &ConfigArgs) -> Result<bool> {
    let text = match (&args.manifest, &args.config) {
        (Some(_), _) => return Ok(true),
        (None, Some(path)) => std::fs::read_to_string(path)?,
        (None, None) => return Ok(false),
    };
    Ok(serde_json::from_str::<Value>(&text)
        .ok()
        .and_then(|v| v.get("experiment").cloned())
        .is_some())
}

fn run_analytics(dir: Option<&Path>, mc_samples: usize, seed: u64) -> Result<()> {
    let report = analytics_sweeps();
    let sweep = symmetric_difference_sweep(mc_samples.max(1), seed);
    let ratio_max = sweep.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let max_z = sweep
        .iter()
        .map(|r| (r.exact - r.monte_carlo).abs() / r.standard_error.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let summary = json!({
        "analytics": report,
        "symmetric_difference_ratio_max": ratio_max,
        "symmetric_difference_max_z": max_z,
        "symmetric_difference": sweep,
    });
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = String::from(
            "# schema: symmetric-difference/v1\ndelta,t,exact,ratio,monte_carlo,standard_error\n",
        );
        for r in &sweep {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.delta, r.t, r.exact, r.ratio, r.monte_carlo, r.standard_error
            );
        }
        std::fs::write(dir.join("symmetric_difference.csv"), csv)?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)? + "\n",
        )?;
        write_manifest(
            dir,
            "analytics",
            json!({"mc_samples": mc_samples, "seed": seed}),
            Some(seed),
        )?;
    }
    emit(&(serde_json::to_string_pretty(&summary)? + "\n"));
    Ok(())
}

fn run_setgen(args: &SetgenArgs) -> Result<()> {
    let spec = match args.kind {
        SetKind::Sphere => format!("sphere:n={},seed={}", args.n, args.seed),
        SetKind::Cap => format!("cap:n={},seed={}", args.n, args.seed),
        SetKind::Density => format!(
            "density:delta={}",
            args.delta.unwrap_or(density_example_max_delta(args.d))
        ),
        SetKind::Single => "single".into(),
        SetKind::Antipodal => "antipodal".into(),
    };
    if args.d == 0 {
        return Err(Error::config("d", "dimension must be at least 1"));
    }
    let set = resolve_set(&spec, args.d)?;
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            set.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            let dir = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            write_manifest(
                dir,
                "setgen",
                json!({"set_spec": spec, "d": args.d, "file": path.file_name().map(|f| f.to_string_lossy())}),
                Some(args.seed),
            )?;
        }
        None => set.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_complexity(path: &Path, dir: Option<&Path>) -> Result<()> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::config("set", format!("cannot open {}: {e}", path.display())))?;
    let set = UnitPointSet::read_csv(std::io::BufReader::new(file))?;
    let report = complexity_report(&set)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("complexity.json"), &text)?;
        write_manifest(
            dir,
            "complexity",
            json!({"set": path.display().to_string()}),
            None,
        )?;
    }
    emit(&text);
    Ok(())
}

fn deviation_delta(cfg: &ExperimentConfig) -> Result<f64> {
    let delta = cfg
        .delta
        .ok_or_else(|| Error::config("delta", "deviation run needs delta"))?;
    check_delta(delta)?;
    Ok(delta)
}

fn run_deviation(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args, "deviation")?;
    let delta = deviation_delta(&cfg)?;
    if cfg.trials == 0 {
        return Err(Error::config("trials", "trials must be at least 1"));
    }
    let set = resolve_set(&cfg.set_spec, cfg.d)?;
    let dir = output_dir(&args.output_dir, &cfg);
    let mut csv = format!("{DEVIATION_SCHEMA}\n{DEVIATION_HEADER}\n");
    let mut maxima = Vec::new();
    let mut first = None;
    for trial in 0..cfg.trials {
        let seed = derive_seed(cfg.base_seed, trial as u64);
        let g = draw_sample(cfg.m, cfg.d, seed)?;
        let report = deviation_report(&g, &set, delta)?;
        for row in report.csv_rows(trial) {
            csv.push_str(&row);
            csv.push('\n');
        }
        maxima.push(json!({
            "trial": trial,
            "seed": seed,
            "ks_sup": report.ks_sup,
            "scale_sensitive_sup": report.scale_sensitive_sup,
            "ss_grid_sup": report.ss_grid_sup,
            "envelope_ratio": report.envelope_ratio,
            "w2": report.w2,
            "coordinate_stat": report.coordinate_stat,
            "worst_direction": report.worst_direction,
            "worst_t": report.worst_t,
        }));
        if first.is_none() {
            first = Some((g, report.worst_direction));
        }
    }
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("deviation.csv"), csv)?;
    if let Some((g, worst)) = first {
        let p = project_point(&g, &set, worst);
        let ts: Vec<f64> = (0..=800).map(|k| -4.0 + k as f64 * 0.01).collect();
        let mut env = format!(
            "{ENVELOPE_SCHEMA} direction={worst} delta={delta}\nt,ecdf,cdf,deviation,envelope\n"
        );
        for [t, fm, f, dev, e] in envelope_curve(&p, delta, &ts) {
            let _ = writeln!(env, "{t},{fm},{f},{dev},{e}");
        }
        std::fs::write(dir.join("envelope.csv"), env)?;
        let mut re = format!("{REARRANGEMENT_SCHEMA} direction={worst}\ni,sorted_value,lambda\n");
        for (i, (v, l)) in rearrangement_rows(&g, &set, worst).into_iter().enumerate() {
            let _ = writeln!(re, "{},{v},{l}", i + 1);
        }
        std::fs::write(dir.join("rearrangement.csv"), re)?;
    }
    let summary = json!({"delta": delta, "trials": maxima});
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    write_manifest(&dir, "deviation", cfg.to_json(), Some(cfg.base_seed))?;
    Ok(())
}

fn run_transport(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args, "transport")?;
    if cfg.trials == 0 {
        return Err(Error::config("trials", "trials must be at least 1"));
    }
    let set = resolve_set(&cfg.set_spec, cfg.d)?;
    let dir = output_dir(&args.output_dir, &cfg);
    let reference = W2Reference::cached(cfg.m);
    let mut csv = format!("{TRANSPORT_SCHEMA}\ntrial,seed,direction_index,w2,coord_stat\n");
    let mut cells = None;
    let mut sups = Vec::new();
    for trial in 0..cfg.trials {
        let seed = derive_seed(cfg.base_seed, trial as u64);
        let g = draw_sample(cfg.m, cfg.d, seed)?;
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut coord_sup = 0.0f64;
        for j in 0..set.len() {
            let p = project_point(&g, &set, j);
            let (w2, coord) = reference.w2_and_coordinate(&p.values);
            let _ = writeln!(csv, "{trial},{seed},{j},{w2},{coord}");
            if w2 > best.0 {
                best = (w2, j);
            }
            coord_sup = coord_sup.max(coord);
        }
        sups.push(json!({"trial": trial, "seed": seed, "w2_sup": best.0, "coord_sup": coord_sup, "argmax": best.1}));
        if cells.is_none() {
            cells = Some(w2_empirical_gaussian(&project_point(&g, &set, best.1))?.cells_csv());
        }
    }
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("transport.csv"), csv)?;
    if let Some(c) = cells {
        std::fs::write(dir.join("cells.csv"), c)?;
    }
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&json!({"trials": sups}))? + "\n",
    )?;
    write_manifest(&dir, "transport", cfg.to_json(), Some(cfg.base_seed))?;
    Ok(())
}
