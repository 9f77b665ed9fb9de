//! Declarative run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use toml::{Table, Value};

use crate::cumulant::CumulantKind;
use crate::harness::{check_window, DecayLaw, Observable};
use crate::schema::{
    f64_list, int_list, opt_bool, opt_f64, opt_int, opt_str, opt_table, opt_usize, reject_unknown, req_str, str_list,
    Issues,
};
use crate::sim::{ChainModel, Space};

/// Default relative threshold of the light-cone contour.
pub const DEFAULT_THRESHOLD: f64 = 1e-2;
/// Default slack of the rate-inheritance test.
pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_DT: f64 = 0.025;
pub const DEFAULT_HORIZONS: [f64; 3] = [5.0, 10.0, 20.0];
pub const DEFAULT_LIGHTCONE_TIMES: [f64; 3] = [0.5, 1.0, 1.5];
pub const DEFAULT_PLACEMENTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ClusterScan,
    RateReport,
    Lightcone,
    Spacelike,
    ThreePoint,
    RayAverage,
    Maxmin,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ClusterScan,
        Experiment::RateReport,
        Experiment::Lightcone,
        Experiment::Spacelike,
        Experiment::ThreePoint,
        Experiment::RayAverage,
        Experiment::Maxmin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ClusterScan => "cluster-scan",
            Experiment::RateReport => "rate-report",
            Experiment::Lightcone => "lightcone",
            Experiment::Spacelike => "spacelike",
            Experiment::ThreePoint => "three-point",
            Experiment::RayAverage => "ray-average",
            Experiment::Maxmin => "maxmin",
        }
    }

    /// Keys that make sense for this experiment besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::ClusterScan => &["n", "translated", "x", "times", "law"],
            Experiment::RateReport => &["orders", "translated", "x", "law", "tolerance"],
            Experiment::Lightcone => &["x", "t", "threshold"],
            Experiment::Spacelike => &["n", "translated", "t", "velocity", "velocity_factor", "lieb_robinson", "lightcone", "law"],
            Experiment::ThreePoint => &["x", "time"],
            Experiment::RayAverage => {
                &["n", "translated", "velocity", "velocity_factor", "lieb_robinson", "lightcone", "horizons", "dt", "refine_check"]
            }
            Experiment::Maxmin => &["n", "placements", "seed", "velocity", "law"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            match crate::schema::nearest(s, &names) {
                Some(n) => format!("unknown experiment `{s}` (did you mean `{n}`?)"),
                None => format!("unknown experiment `{s}` (expected one of {})", names.join(", ")),
            }
        })
    }
}

const COMMON_KEYS: [&str; 8] = ["experiment", "model", "beta", "kind", "observables", "workers", "cache_mib", "output"];

/// How fast the ray moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Velocity {
    /// Sites per unit time.
    Absolute(f64),
    /// Multiple of the estimated Lieb-Robinson velocity.
    Factor(f64),
}

/// Grid used to estimate the Lieb-Robinson velocity when needed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightconeGrid {
    pub xs: Vec<i64>,
    pub ts: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub stem: String,
    pub json: bool,
}

/// A fully validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model_path: Option<PathBuf>,
    #[serde(skip)]
    pub model: ChainModel,
    pub kind: CumulantKind,
    /// Observables in `LETTERS@SITE` form; the first `n` enter the cumulant.
    pub observables: Vec<String>,
    pub n: usize,
    pub orders: Vec<usize>,
    /// Zero-based indices of the translated observables.
    pub translated: Vec<usize>,
    pub xs: Vec<i64>,
    pub times: Vec<f64>,
    pub time: f64,
    pub ts: Vec<f64>,
    pub law: DecayLaw,
    pub tolerance: f64,
    pub threshold: f64,
    pub velocity: Option<Velocity>,
    pub lieb_robinson: Option<f64>,
    pub lightcone: LightconeGrid,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub refine_check: bool,
    pub placements: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub cache_mib: Option<usize>,
    pub output: OutputSettings,
}

impl RunConfig {
    /// Text of the model in canonical form, part of the configuration hash.
    pub fn model_text(&self) -> String {
        self.model.to_toml_string()
    }

    /// The observables that enter the experiment.
    pub fn active_observables(&self) -> &[String] {
        &self.observables[..self.n]
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s):", self.issues.len())?;
        for issue in &self.issues {
            write!(f, "\n  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a configuration; relative paths resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let table: Table =
        text.parse().map_err(|e: toml::de::Error| ConfigError { issues: vec![format!("malformed configuration: {e}")] })?;
    parse_table(&table, base_dir)
}

/// Largest `x >= 0` such that translating `moved` by every `0..=x` is safe.
fn safe_reach(observables: &[Observable], moved: &[usize]) -> i64 {
    let l = observables.first().map_or(0, |o| o.space().sites() as i64);
    (1..=l).take_while(|&x| check_window(observables, moved, x).is_ok()).last().unwrap_or(0)
}

fn positive(value: f64, key: &str, issues: &mut Issues) -> bool {
    if value > 0.0 {
        true
    } else {
        issues.push(format!("`{key}` must be positive, found {value}"));
        false
    }
}

pub fn parse_table(table: &Table, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut issues = Issues::new();
    let experiment = req_str(table, "experiment", "", &mut issues).and_then(|s| match s.parse::<Experiment>() {
        Ok(e) => Some(e),
        Err(msg) => {
            issues.push(msg);
            None
        }
    });

    // unknown keys, and keys that the chosen experiment does not use
    let mut allowed: Vec<&str> = COMMON_KEYS.to_vec();
    match experiment {
        Some(e) => allowed.extend_from_slice(e.keys()),
        None => Experiment::ALL.iter().for_each(|e| allowed.extend_from_slice(e.keys())),
    }
    let mut known: Vec<&str> = COMMON_KEYS.to_vec();
    Experiment::ALL.iter().for_each(|e| known.extend_from_slice(e.keys()));
    for key in table.keys() {
        if known.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            issues.push(format!("key `{key}` is not used by experiment `{}`", experiment.map_or("?", |e| e.name())));
        }
    }
    reject_unknown(table, &known, "", &mut issues);

    let (model, model_path) = match table.get("model") {
        None => {
            issues.push("missing required key `model` (a model file path or an inline table)".to_string());
            (None, None)
        }
        Some(Value::String(p)) => {
            let path = base_dir.join(p);
            if !path.is_file() {
                issues.push(format!("model file `{}` does not exist", path.display()));
                (None, Some(path))
            } else {
                match ChainModel::from_file(&path) {
                    Ok(m) => (Some(m), Some(path)),
                    Err(e) => {
                        issues.push(format!("model file `{}`: {e}", path.display()));
                        (None, Some(path))
                    }
                }
            }
        }
        Some(Value::Table(t)) => match ChainModel::from_toml_str(&toml::to_string(t).unwrap_or_default()) {
            Ok(m) => (Some(m), None),
            Err(e) => {
                issues.push(format!("inline model: {e}"));
                (None, None)
            }
        },
        Some(other) => {
            issues.push(format!("`model` must be a path or a table, found {}", other.type_str()));
            (None, None)
        }
    };
    // a top-level `beta` overrides the model's inverse temperature
    let mut model = model;
    if let Some(beta) = opt_f64(table, "beta", "", &mut issues) {
        if beta.is_finite() && beta >= 0.0 {
            if let Some(m) = model.as_mut() {
                m.beta = beta;
            }
        } else {
            issues.push(format!("`beta` must be finite and non-negative, found {beta}"));
        }
    }
    let space: Option<Space> = model.as_ref().and_then(|m| m.space().ok());

    let kind = opt_str(table, "kind", "", &mut issues)
        .map(|s| {
            s.parse::<CumulantKind>().map_err(|_| issues.push(format!("`kind` must be classical or free, found `{s}`")))
        })
        .transpose()
        .ok()
        .flatten()
        .unwrap_or(CumulantKind::Classical);
    let law = opt_str(table, "law", "", &mut issues)
        .map(|s| s.parse::<DecayLaw>().map_err(|e| issues.push(format!("`law`: {e}"))))
        .transpose()
        .ok()
        .flatten()
        .unwrap_or_default();

    let observables = match (table.contains_key("observables"), str_list(table, "observables", "", &mut issues)) {
        (false, _) => {
            issues.push("missing required key `observables`".to_string());
            Vec::new()
        }
        (true, list) => list.unwrap_or_default(),
    };
    let parsed: Option<Vec<Observable>> = space.as_ref().map(|s| {
        observables
            .iter()
            .enumerate()
            .filter_map(|(i, spec)| match Observable::parse(s, spec) {
                Ok(o) => Some(o),
                Err(e) => {
                    issues.push(format!("`observables[{i}]` = `{spec}`: {e}"));
                    None
                }
            })
            .collect()
    });
    let parsed = parsed.filter(|p| p.len() == observables.len() && !p.is_empty());

    let count = observables.len();
    let n = opt_usize(table, "n", "", &mut issues).unwrap_or(match experiment {
        Some(Experiment::Lightcone) => 2.min(count),
        Some(Experiment::ThreePoint) => 3.min(count),
        _ => count,
    });
    if n > count {
        issues.push(format!("`n` = {n} exceeds the {count} observables given"));
    }
    let needed = match experiment {
        Some(Experiment::Lightcone) => Some((2, "exactly 2 observables (A, B)")),
        Some(Experiment::ThreePoint) => Some((3, "exactly 3 observables (A, B, C)")),
        _ => None,
    };
    if let Some((k, what)) = needed {
        if count != k {
            issues.push(format!("experiment `{}` needs {what}, found {count}", experiment.expect("set")));
        }
    } else if count > 0 && n < 2 && experiment.is_some() {
        issues.push(format!("cumulant order n = {n} must be at least 2"));
    }
    let n = n.min(count);

    let orders: Vec<usize> = match int_list(table, "orders", "", &mut issues) {
        Some(list) => {
            let mut out = Vec::new();
            for o in list {
                if o < 2 || o as usize > count {
                    issues.push(format!("`orders` entry {o} must lie in 2..={count}"));
                } else {
                    out.push(o as usize);
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        }
        None => (2..=count).collect(),
    };

    let translated: Vec<usize> = match experiment {
        Some(Experiment::Lightcone) | Some(Experiment::Maxmin) => vec![0],
        Some(Experiment::ThreePoint) => vec![1],
        _ => match int_list(table, "translated", "", &mut issues) {
            Some(list) if list.is_empty() => {
                issues.push("`translated` must not be empty".to_string());
                vec![0]
            }
            Some(list) => {
                let mut out = Vec::new();
                for i in list {
                    if i < 1 || i as usize > n.max(1) {
                        issues.push(format!("`translated` entry {i} must lie in 1..={n} (1-based)"));
                    } else {
                        out.push(i as usize - 1);
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
            None => vec![0],
        },
    };

    // translation grid, checked against the wraparound rule
    let window_obs: Option<Vec<Observable>> = parsed.as_ref().map(|p| p[..n.min(p.len())].to_vec());
    let xs: Vec<i64> = match int_list(table, "x", "", &mut issues) {
        Some(list) if list.is_empty() => {
            issues.push("`x` must not be empty".to_string());
            Vec::new()
        }
        Some(list) => list,
        None => match (&window_obs, experiment) {
            (Some(obs), Some(Experiment::Lightcone)) => (0..=safe_reach(obs, &translated)).collect(),
            (Some(obs), _) => (1..=safe_reach(obs, &translated)).collect(),
            _ => Vec::new(),
        },
    };
    let uses_x = matches!(
        experiment,
        Some(Experiment::ClusterScan | Experiment::RateReport | Experiment::Lightcone | Experiment::ThreePoint)
    );
    if uses_x {
        if let Some(obs) = &window_obs {
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                issues.push("`x` must be strictly increasing".to_string());
            }
            if let Some(x) = xs.iter().find(|&&x| x < 0) {
                issues.push(format!("`x` entries are separations and must be >= 0, found {x}"));
            }
            let moved: &[usize] = &translated;
            let check_obs: &[Observable] = if experiment == Some(Experiment::RateReport) {
                // the widest order decides the window
                &obs[..orders.iter().copied().max().unwrap_or(n).min(obs.len())]
            } else {
                obs
            };
            if let Some(err) = xs.iter().filter(|&&x| x >= 0).find_map(|&x| check_window(check_obs, moved, x).err()) {
                issues.push(format!(
                    "`x` range exceeds the wraparound-safe window (translations must keep every separation below L/2 and equal to the line distance): {err}"
                ));
            }
        }
    }

    let times = f64_list(table, "times", "", &mut issues).unwrap_or_default();
    if !times.is_empty() && times.len() != n {
        issues.push(format!("`times` must list one time per observable ({n}), found {}", times.len()));
    }
    let time = opt_f64(table, "time", "", &mut issues).unwrap_or(0.0);

    let ts = match f64_list(table, "t", "", &mut issues) {
        Some(t) => t,
        None if experiment == Some(Experiment::Lightcone) => DEFAULT_LIGHTCONE_TIMES.to_vec(),
        None if experiment == Some(Experiment::Spacelike) => {
            issues.push("missing required key `t` (ray times)".to_string());
            Vec::new()
        }
        None => Vec::new(),
    };
    if experiment == Some(Experiment::Spacelike) && (ts.windows(2).any(|w| w[0] >= w[1]) || ts.iter().any(|&t| t < 0.0)) {
        issues.push("`t` must be non-negative and strictly increasing along a ray".to_string());
    }
    if ts.is_empty() && experiment == Some(Experiment::Lightcone) {
        issues.push("`t` must not be empty".to_string());
    }

    let tolerance = opt_f64(table, "tolerance", "", &mut issues).unwrap_or(DEFAULT_TOLERANCE);
    positive(tolerance, "tolerance", &mut issues);
    let threshold = opt_f64(table, "threshold", "", &mut issues).unwrap_or(DEFAULT_THRESHOLD);
    positive(threshold, "threshold", &mut issues);

    let velocity = match (opt_f64(table, "velocity", "", &mut issues), opt_f64(table, "velocity_factor", "", &mut issues)) {
        (Some(_), Some(_)) => {
            issues.push("give either `velocity` or `velocity_factor`, not both".to_string());
            None
        }
        (Some(v), None) => positive(v, "velocity", &mut issues).then_some(Velocity::Absolute(v)),
        (None, Some(f)) => positive(f, "velocity_factor", &mut issues).then_some(Velocity::Factor(f)),
        (None, None) => None,
    };
    if velocity.is_none() && matches!(experiment, Some(Experiment::Spacelike | Experiment::RayAverage)) {
        issues.push("missing required key `velocity` or `velocity_factor`".to_string());
    }
    let lieb_robinson = opt_f64(table, "lieb_robinson", "", &mut issues);
    if let Some(v) = lieb_robinson {
        positive(v, "lieb_robinson", &mut issues);
    }

    let lightcone = {
        let lc = opt_table(table, "lightcone", "", &mut issues);
        let empty = Table::new();
        let lc = lc.unwrap_or(&empty);
        reject_unknown(lc, &["x", "t", "threshold"], "lightcone", &mut issues);
        let pair: Option<Vec<Observable>> = parsed.as_ref().filter(|p| p.len() >= 2).map(|p| p[..2].to_vec());
        let xs = int_list(lc, "x", "lightcone", &mut issues)
            .unwrap_or_else(|| pair.as_ref().map_or(Vec::new(), |p| (0..=safe_reach(p, &[0])).collect()));
        if let Some(p) = &pair {
            if let Some(err) = xs.iter().find_map(|&x| check_window(p, &[0], x).err()) {
                issues.push(format!("`lightcone.x` exceeds the wraparound-safe window: {err}"));
            }
        }
        let ts = f64_list(lc, "t", "lightcone", &mut issues).unwrap_or_else(|| DEFAULT_LIGHTCONE_TIMES.to_vec());
        let threshold = opt_f64(lc, "threshold", "lightcone", &mut issues).unwrap_or(DEFAULT_THRESHOLD);
        positive(threshold, "lightcone.threshold", &mut issues);
        LightconeGrid { xs, ts, threshold }
    };
    if matches!(velocity, Some(Velocity::Factor(_))) && lieb_robinson.is_none() && count < 2 {
        issues.push("estimating the Lieb-Robinson velocity needs at least two observables".to_string());
    }

    let horizons = f64_list(table, "horizons", "", &mut issues).unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
    if horizons.is_empty() || horizons[0] <= 0.0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        issues.push("`horizons` must be positive and strictly increasing".to_string());
    }
    let dt = opt_f64(table, "dt", "", &mut issues).unwrap_or(DEFAULT_DT);
    positive(dt, "dt", &mut issues);
    let refine_check = opt_bool(table, "refine_check", "", &mut issues).unwrap_or(true);
    let placements = opt_usize(table, "placements", "", &mut issues).unwrap_or(DEFAULT_PLACEMENTS);
    if placements == 0 {
        issues.push("`placements` must be positive".to_string());
    }
    let seed = opt_int(table, "seed", "", &mut issues).unwrap_or(0);
    let seed = u64::try_from(seed).unwrap_or_else(|_| {
        issues.push(format!("`seed` must be non-negative, found {seed}"));
        0
    });
    let workers = opt_usize(table, "workers", "", &mut issues);
    if workers == Some(0) {
        issues.push("`workers` must be positive".to_string());
    }
    let cache_mib = opt_usize(table, "cache_mib", "", &mut issues);
    if cache_mib == Some(0) {
        issues.push("`cache_mib` must be positive".to_string());
    }

    let output = {
        let out = opt_table(table, "output", "", &mut issues);
        let empty = Table::new();
        let out = out.unwrap_or(&empty);
        reject_unknown(out, &["dir", "stem", "json"], "output", &mut issues);
        let dir = base_dir.join(opt_str(out, "dir", "output", &mut issues).unwrap_or("."));
        let stem = opt_str(out, "stem", "output", &mut issues)
            .map(str::to_string)
            .unwrap_or_else(|| experiment.map_or_else(String::new, |e| e.name().to_string()));
        if stem.is_empty() || stem.contains(['/', '\\']) {
            issues.push(format!("`output.stem` must be a plain file name, found `{stem}`"));
        }
        let json = opt_bool(out, "json", "output", &mut issues).unwrap_or(false);
        OutputSettings { dir, stem, json }
    };

    if !issues.is_empty() {
        return Err(ConfigError { issues: issues.into_vec() });
    }
    Ok(RunConfig {
        experiment: experiment.expect("validated"),
        model_path,
        model: model.expect("validated"),
        kind,
        observables,
        n,
        orders,
        translated,
        xs,
        times,
        time,
        ts,
        law,
        tolerance,
        threshold,
        velocity,
        lieb_robinson,
        lightcone,
        horizons,
        dt,
        refine_check,
        placements,
        seed,
        workers,
        cache_mib,
        output,
    })
}
