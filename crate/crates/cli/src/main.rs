use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cclab_core::cumulant::{CumulantError, CumulantKind, CumulantTable};
use cclab_core::partition::{family, FamilyKind};
use cclab_core::runner::output::{format_values, parse_moments, write_atomic};
use cclab_core::runner::{parse_table, resolve_workers, run, Experiment, RunError};
use cclab_core::sim::{build_hamiltonian, ChainModel, GibbsEnsemble};

#[derive(Parser)]
#[command(name = "cclab", version, about = "Cumulants, partition lattices and clustering experiments on spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List all or non-crossing partitions of {1..n}
    Enumerate {
        #[arg(long, value_enum)]
        kind: PartitionKindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a moments file into cumulants
    Cumulants {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        moments: PathBuf,
        /// Largest order; every increasing index tuple up to this length is output
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a model's thermal state and check its invariants
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        check: Option<CheckArg>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cumulant of translated observables over a range of shifts
    ClusterScan(ExperimentArgs),
    /// Decay rates of cumulant orders against the covariance rate
    RateReport(ExperimentArgs),
    /// Commutator norms over space and time, with a velocity estimate
    Lightcone(ExperimentArgs),
    /// Cumulants sampled along a ray outside the light cone
    Spacelike(ExperimentArgs),
    /// Three-point clustering quantity and its commutator bound
    ThreePoint(ExperimentArgs),
    /// Time-averaged cumulants along a ray for growing horizons
    RayAverage(ExperimentArgs),
    /// Cumulants of random placements against their max-min distance
    Maxmin(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionKindArg {
    All,
    Nc,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Classical,
    Free,
}

impl From<KindArg> for CumulantKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Classical => CumulantKind::Classical,
            KindArg::Free => CumulantKind::Free,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Invariants,
}

// Flags override the matching keys of the configuration file.
#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Observable specs such as `Z@0`; comma separated or repeated
    #[arg(long, value_delimiter = ',')]
    obs: Vec<String>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    n: Option<usize>,
    /// Output directory, or a file path ending in .csv or .json
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    workers: Option<usize>,
}

/// Failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Enumerate { kind, n, out } => enumerate(kind, n, out.as_deref()),
        Command::Cumulants { kind, moments, k, out } => cumulants(kind.into(), &moments, k, out.as_deref()),
        Command::Simulate { model, check, json, out } => simulate(&model, check.is_some(), json, out.as_deref()),
        Command::ClusterScan(a) => experiment(Experiment::ClusterScan, a),
        Command::RateReport(a) => experiment(Experiment::RateReport, a),
        Command::Lightcone(a) => experiment(Experiment::Lightcone, a),
        Command::Spacelike(a) => experiment(Experiment::Spacelike, a),
        Command::ThreePoint(a) => experiment(Experiment::ThreePoint, a),
        Command::RayAverage(a) => experiment(Experiment::RayAverage, a),
        Command::Maxmin(a) => experiment(Experiment::Maxmin, a),
    }
}

fn emit(text: String, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => write_atomic(&[(path.to_path_buf(), text)]).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn enumerate(kind: PartitionKindArg, n: usize, out: Option<&Path>) -> Result<u8, Failure> {
    let kind = match kind {
        PartitionKindArg::All => FamilyKind::All,
        PartitionKindArg::Nc => FamilyKind::NonCrossing,
    };
    let fam = family(kind, n).map_err(|e| Failure::input(e.to_string()))?;
    let mut text = String::new();
    for p in fam.iter() {
        text.push_str(&p.to_string());
        text.push('\n');
    }
    text.push_str(&format!("count {}\n", fam.len()));
    emit(text, out)?;
    Ok(0)
}

fn cumulants(kind: CumulantKind, moments: &Path, k: usize, out: Option<&Path>) -> Result<u8, Failure> {
    let text = std::fs::read_to_string(moments).map_err(|e| Failure::input(format!("{}: {e}", moments.display())))?;
    let table = parse_moments(&text)
        .map_err(|errs| Failure::input(format!("{}:\n  {}", moments.display(), errs.join("\n  "))))?;
    let cumulants = CumulantTable::from_provider(&table, kind, k).map_err(|e| match e {
        CumulantError::MissingMoment(ops) => {
            let one_based: Vec<String> = ops.iter().map(|i| (i + 1).to_string()).collect();
            Failure::input(format!("{}: no moment given for `{}` (1-based)", moments.display(), one_based.join(",")))
        }
        other => Failure::input(other.to_string()),
    })?;
    emit(format_values(cumulants.iter()), out)?;
    Ok(0)
}

fn simulate(model: &Path, check: bool, json: bool, out: Option<&Path>) -> Result<u8, Failure> {
    let model = ChainModel::from_file(model).map_err(|e| Failure::input(format!("{}: {e}", model.display())))?;
    let hamiltonian = build_hamiltonian(&model).map_err(|e| Failure::input(e.to_string()))?;
    let ensemble = GibbsEnsemble::new(hamiltonian, model.beta).map_err(|e| Failure::input(e.to_string()))?;
    if !check {
        let e = ensemble.energies();
        emit(format!("dim={} E0={:.16e} Emax={:.16e}\n", e.len(), e[0], e[e.len() - 1]), out)?;
        return Ok(0);
    }
    let report = ensemble.check_invariants().map_err(|e| Failure::input(e.to_string()))?;
    let text = if json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        format!(
            "{} dim={} trace={:.3e} stationarity={:.3e} translation={:.3e} time={:.3e}\n",
            if report.passed { "PASS" } else { "FAIL" },
            report.dim,
            (report.trace_re - 1.0).abs().max(report.trace_im.abs()),
            report.stationarity,
            report.translation_spread,
            report.time_spread
        )
    };
    emit(text, out)?;
    Ok(if report.passed { 0 } else { 1 })
}

fn experiment(kind: Experiment, args: ExperimentArgs) -> Result<u8, Failure> {
    let cwd = std::env::current_dir().map_err(|e| Failure::input(e.to_string()))?;
    let (mut table, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            let table: toml::Table =
                text.parse().map_err(|e| Failure::input(format!("{}: malformed configuration: {e}", path.display())))?;
            let base = path.parent().map(|p| cwd.join(p)).unwrap_or_else(|| cwd.clone());
            (table, base)
        }
        None => (toml::Table::new(), cwd.clone()),
    };
    match table.get("experiment").and_then(|v| v.as_str()) {
        Some(name) if name != kind.name() => {
            return Err(Failure::input(format!("configuration is for `{name}` but the subcommand is `{}`", kind.name())));
        }
        _ => {
            table.insert("experiment".into(), kind.name().into());
        }
    }
    if let Some(model) = &args.model {
        table.insert("model".into(), cwd.join(model).display().to_string().into());
    }
    if !args.obs.is_empty() {
        table.insert("observables".into(), args.obs.iter().map(|s| toml::Value::from(s.as_str())).collect::<Vec<_>>().into());
    }
    if let Some(k) = args.kind {
        table.insert("kind".into(), CumulantKind::from(k).to_string().into());
    }
    if let Some(n) = args.n {
        table.insert("n".into(), (n as i64).into());
    }
    let output = table.entry("output").or_insert_with(|| toml::Table::new().into());
    if let Some(out_table) = output.as_table_mut() {
        if let Some(out) = &args.out {
            let out = cwd.join(out);
            match out.extension().and_then(|e| e.to_str()) {
                Some(ext @ ("csv" | "json")) => {
                    let dir = out.parent().unwrap_or(&cwd).display().to_string();
                    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    out_table.insert("dir".into(), dir.into());
                    out_table.insert("stem".into(), stem.into());
                    if ext == "json" {
                        out_table.insert("json".into(), true.into());
                    }
                }
                _ => {
                    out_table.insert("dir".into(), out.display().to_string().into());
                }
            }
        }
        if args.json {
            out_table.insert("json".into(), true.into());
        }
    }
    let config = parse_table(&table, &base).map_err(RunError::from)?;
    let workers = resolve_workers(args.workers, &config)?;
    let outcome = run(&config, workers)?;
    println!("{}", outcome.summary);
    Ok(outcome.status.exit_code() as u8)
}
