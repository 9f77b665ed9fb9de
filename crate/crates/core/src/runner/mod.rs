//! Runs experiments from configurations and writes their artifacts.

pub mod config;
pub mod output;

use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::harness::{
    fit_decay, lightcone_map, maxmin_bound_check, random_placements, ray_average, ray_average_convergence,
    rate_inheritance_report, scan_cumulant, spacelike_cumulant_check, three_point_cluster, HarnessError, LightconeMap,
    Observable, MAGNITUDE_FLOOR,
};
use crate::sim::{build_hamiltonian, GibbsEnsemble, SimError, DEFAULT_CACHE_BYTES};
pub use config::{parse_config, parse_table, ConfigError, Experiment, OutputSettings, RunConfig, Velocity};
use output::{complex_cells, f, module_versions, write_atomic, Csv};

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "CCLAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Report,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Report => 0,
            Status::Fail => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Input(String),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Every error is an input problem from the caller's point of view.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: Status,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Worker count: explicit argument, then `CCLAB_WORKERS`, then the
/// configuration, then the machine's parallelism.
pub fn resolve_workers(explicit: Option<usize>, config: &RunConfig) -> Result<usize, RunError> {
    if let Some(w) = explicit {
        return positive_workers(w);
    }
    if let Ok(text) = std::env::var(WORKERS_ENV) {
        let w = text
            .trim()
            .parse::<usize>()
            .map_err(|_| RunError::Input(format!("{WORKERS_ENV}=`{text}` is not a positive integer")))?;
        return positive_workers(w);
    }
    Ok(config.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

fn positive_workers(w: usize) -> Result<usize, RunError> {
    if w == 0 {
        return Err(RunError::Input("worker count must be positive".into()));
    }
    Ok(w)
}

/// The configuration with everything that does not affect the numbers
/// cleared: where and how results are written, and where the model came from.
fn normalized(config: &RunConfig) -> RunConfig {
    let mut resolved = config.clone();
    resolved.output = OutputSettings { dir: PathBuf::new(), stem: String::new(), json: false };
    resolved.model_path = None;
    resolved.workers = None;
    resolved
}

/// SHA-256 over the resolved configuration and the canonical model text.
pub fn config_hash(config: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(&normalized(config)).expect("configuration serializes").as_bytes());
    hasher.update(config.model_text().as_bytes());
    hex::encode(hasher.finalize())
}

/// Result of an experiment before it is written out.
struct Artifacts {
    status: Status,
    summary: String,
    csv: Csv,
    data: serde_json::Value,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    experiment: Experiment,
    status: Status,
    summary: &'a str,
    config_sha256: &'a str,
    versions: Vec<(&'static str, &'static str)>,
    config: RunConfig,
    model: String,
    data: &'a serde_json::Value,
}

/// Runs the experiment on a pool of `workers` threads and writes the CSV
/// (and the JSON document when requested) atomically.
pub fn run(config: &RunConfig, workers: usize) -> Result<RunOutcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Input(format!("cannot start {workers} workers: {e}")))?;
    let artifacts = pool.install(|| execute(config))?;
    let hash = config_hash(config);
    let dir = &config.output.dir;
    let mut files = vec![(dir.join(format!("{}.csv", config.output.stem)), artifacts.csv.render(&hash))];
    if config.output.json {
        let doc = JsonDocument {
            experiment: config.experiment,
            status: artifacts.status,
            summary: &artifacts.summary,
            config_sha256: &hash,
            versions: module_versions(),
            config: normalized(config),
            model: config.model_text(),
            data: &artifacts.data,
        };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| RunError::Input(e.to_string()))?;
        text.push('\n');
        files.push((dir.join(format!("{}.json", config.output.stem)), text));
    }
    write_atomic(&files)?;
    Ok(RunOutcome { status: artifacts.status, summary: artifacts.summary, files: files.into_iter().map(|f| f.0).collect() })
}

fn to_json(value: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("results serialize")
}

fn execute(config: &RunConfig) -> Result<Artifacts, RunError> {
    let hamiltonian = build_hamiltonian(&config.model)?;
    let cache = config.cache_mib.map_or(DEFAULT_CACHE_BYTES, |m| m << 20);
    let ensemble = GibbsEnsemble::with_cache_budget(hamiltonian, config.model.beta, cache)?;
    let space = ensemble.space().clone();
    let all: Vec<Observable> =
        config.observables.iter().map(|s| Observable::parse(&space, s)).collect::<Result<_, _>>()?;
    let observables = &all[..config.n];
    let kind = config.kind;
    match config.experiment {
        Experiment::ClusterScan => {
            let series = scan_cumulant(&ensemble, observables, kind, &config.translated, &config.xs, &config.times)?;
            let mut csv = Csv::new(&["z", "re", "im", "abs"]);
            for s in &series.samples {
                let [re, im, abs] = complex_cells(s.value);
                csv.push(vec![s.z.to_string(), re, im, abs]);
            }
            let fit = fit_decay(&series, config.law);
            let summary = match &fit {
                Ok(fit) => format!(
                    "REPORT n={} {kind} {} rate={} residual={}",
                    config.n,
                    config.law,
                    short(fit.rate),
                    short(fit.residual)
                ),
                Err(e) => format!("REPORT n={} {kind} no fit: {e}", config.n),
            };
            let data = serde_json::json!({ "series": to_json(&series), "fit": fit.ok().map(|f| to_json(&f)) });
            Ok(Artifacts { status: Status::Report, summary, csv, data })
        }
        Experiment::RateReport => {
            let report = rate_inheritance_report(
                &ensemble,
                &all,
                &config.orders,
                kind,
                &config.translated,
                &config.xs,
                config.law,
                config.tolerance,
            )?;
            let mut csv = Csv::new(&["n", "lambda", "residual", "pass"]);
            for row in &report.rows {
                let (lambda, residual) = match &row.fit {
                    Some(fit) => (f(fit.rate), f(fit.residual)),
                    None => ("nan".to_string(), "nan".to_string()),
                };
                csv.push(vec![row.n.to_string(), lambda, residual, row.pass.to_string()]);
            }
            let status = if report.degenerate {
                Status::Report
            } else if report.pass {
                Status::Pass
            } else {
                Status::Fail
            };
            Ok(Artifacts { status, summary: report.summary(), csv, data: to_json(&report) })
        }
        Experiment::Lightcone => {
            let map = lightcone_map(&ensemble, &all[0], &all[1], &config.xs, &config.ts, config.threshold)?;
            let summary = match (map.velocity, &map.note) {
                (Some(v), _) => format!("REPORT v_LR={} rows={}", short(v), map.contour.len()),
                (None, Some(note)) => format!("REPORT {note}"),
                (None, None) => "REPORT no estimate".to_string(),
            };
            Ok(Artifacts { status: Status::Report, summary, csv: lightcone_csv(&map), data: to_json(&map) })
        }
        Experiment::Spacelike => {
            let (velocity, lr, map) = ray_velocity(config, &ensemble, &all)?;
            let series =
                spacelike_cumulant_check(&ensemble, observables, kind, &config.translated, velocity, lr, &config.ts)?;
            let mut csv = Csv::new(&["t", "z", "re", "im", "abs"]);
            for s in &series.samples {
                let [re, im, abs] = complex_cells(s.value);
                csv.push(vec![f(s.t), s.z.to_string(), re, im, abs]);
            }
            let magnitudes: Vec<f64> =
                series.samples.iter().map(|s| s.value.norm()).filter(|&m| m >= MAGNITUDE_FLOOR).collect();
            let monotone = magnitudes.windows(2).all(|w| w[1] <= w[0]);
            let status = if monotone { Status::Pass } else { Status::Fail };
            let summary = format!(
                "{} n={} {kind} v={} points={} non-increasing={monotone}",
                label(status),
                config.n,
                short(velocity),
                magnitudes.len()
            );
            let fit = fit_decay(&series, config.law).ok();
            let data = serde_json::json!({
                "velocity": velocity, "lieb_robinson": lr, "series": to_json(&series),
                "fit": fit.map(|f| to_json(&f)), "lightcone": map.map(|m| to_json(&m)),
            });
            Ok(Artifacts { status, summary, csv, data })
        }
        Experiment::ThreePoint => {
            let mut rows = Vec::new();
            for &x in &config.xs {
                rows.push(three_point_cluster(&ensemble, &all[0], &all[1], &all[2], x, config.time)?);
            }
            let mut csv = Csv::new(&["x", "t", "re", "im", "abs", "bound", "holds"]);
            for r in &rows {
                let [re, im, abs] = complex_cells(r.value);
                csv.push(vec![r.x.to_string(), f(r.t), re, im, abs, f(r.bound), r.holds.to_string()]);
            }
            let holds = rows.iter().all(|r| r.holds);
            let status = if holds { Status::Pass } else { Status::Fail };
            let summary = format!("{} three-point bound at {} points", label(status), rows.len());
            Ok(Artifacts { status, summary, csv, data: to_json(&rows) })
        }
        Experiment::RayAverage => {
            let (velocity, _, map) = ray_velocity(config, &ensemble, &all)?;
            let moved = &config.translated;
            let (series, change) = if config.refine_check {
                let conv = ray_average_convergence(&ensemble, observables, kind, moved, velocity, &config.horizons, config.dt)?;
                let change = conv.max_relative_change;
                (conv.coarse, Some(change))
            } else {
                (ray_average(&ensemble, observables, kind, moved, velocity, &config.horizons, config.dt)?, None)
            };
            let mut csv = Csv::new(&["T", "re", "im", "abs"]);
            for (t, avg) in series.horizons.iter().zip(&series.averages) {
                let [re, im, abs] = complex_cells(*avg);
                csv.push(vec![f(*t), re, im, abs]);
            }
            let first = series.averages.first().map_or(0.0, |a| a.norm());
            let last = series.averages.last().map_or(0.0, |a| a.norm());
            let decreasing = series.averages.len() < 2 || last < first;
            let converged = change.is_none_or(|c| c < 0.01);
            let status = if decreasing && converged { Status::Pass } else { Status::Fail };
            let mut summary = format!(
                "{} n={} {kind} v={} |avg(T={})|={} |avg(T={})|={}",
                label(status),
                config.n,
                short(velocity),
                short(series.horizons[0]),
                short(first),
                short(*series.horizons.last().expect("non-empty")),
                short(last)
            );
            if let Some(c) = change {
                summary.push_str(&format!(" dt-halving change={}", short(c)));
            }
            let data = serde_json::json!({
                "averages": to_json(&series), "dt_halving_change": change, "lightcone": map.map(|m| to_json(&m)),
            });
            Ok(Artifacts { status, summary, csv, data })
        }
        Experiment::Maxmin => {
            let placements = random_placements(config.n, config.placements, space.sites(), config.seed);
            let velocity = match config.velocity {
                Some(Velocity::Absolute(v)) => v,
                _ => 0.0,
            };
            let report = maxmin_bound_check(&ensemble, observables, &placements, kind, velocity, config.law)?;
            let mut csv = Csv::new(&["z", "argmax", "x", "re", "im", "abs", "residual_abs"]);
            for s in &report.samples {
                let [re, im, abs] = complex_cells(s.value);
                let xs: Vec<String> = s.placement.x.iter().map(|x| x.to_string()).collect();
                csv.push(vec![
                    s.z.to_string(),
                    (s.argmax + 1).to_string(),
                    xs.join(";"),
                    re,
                    im,
                    abs,
                    f(s.factorization_residual.norm()),
                ]);
            }
            let status = if report.pass { Status::Pass } else { Status::Fail };
            let summary = format!(
                "{} n={} {kind} placements={} envelope-non-increasing={} max-excess={} residual-rate={}",
                label(status),
                config.n,
                report.samples.len(),
                report.envelope_nonincreasing,
                short(report.max_excess),
                report.residual_fit.as_ref().map_or_else(|| "none".to_string(), |f| short(f.rate))
            );
            Ok(Artifacts { status, summary, csv, data: to_json(&report) })
        }
    }
}

fn label(status: Status) -> &'static str {
    match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Report => "REPORT",
    }
}

/// Six significant digits for summary lines.
fn short(x: f64) -> String {
    format!("{x:.6e}")
}

fn lightcone_csv(map: &LightconeMap) -> Csv {
    let mut csv = Csv::new(&["t", "x", "norm"]);
    for (t, row) in map.ts.iter().zip(&map.norms) {
        for (x, v) in map.xs.iter().zip(row) {
            csv.push(vec![f(*t), x.to_string(), f(*v)]);
        }
    }
    csv
}

/// Ray velocity and the Lieb-Robinson estimate it is compared with,
/// computing a light-cone map when no estimate was supplied.
fn ray_velocity(
    config: &RunConfig,
    ensemble: &GibbsEnsemble,
    all: &[Observable],
) -> Result<(f64, f64, Option<LightconeMap>), RunError> {
    let (lr, map) = match config.lieb_robinson {
        Some(v) => (v, None),
        None => {
            if all.len() < 2 {
                return Err(RunError::Input("a Lieb-Robinson estimate needs two observables".into()));
            }
            let grid = &config.lightcone;
            let map = lightcone_map(ensemble, &all[0], &all[1], &grid.xs, &grid.ts, grid.threshold)?;
            let v = map.velocity.ok_or_else(|| {
                RunError::Harness(HarnessError::Precondition(format!(
                    "no Lieb-Robinson estimate ({}); give `lieb_robinson` or a `[lightcone]` grid whose crossings stay inside the window",
                    map.note.clone().unwrap_or_default()
                )))
            })?;
            (v, Some(map))
        }
    };
    let velocity = match config.velocity.expect("validated") {
        Velocity::Absolute(v) => v,
        Velocity::Factor(k) => k * lr,
    };
    Ok((velocity, lr, map))
}
