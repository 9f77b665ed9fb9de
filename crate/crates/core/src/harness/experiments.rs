use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::fit::{fit_points, DecayFit, DecayLaw};
use super::{check_window, CorrelationSeries, HarnessError, Observable, Sample, SeriesDescriptor, MAGNITUDE_FLOOR};
use crate::cumulant::{cumulant, CumulantKind};
use crate::sim::{commutator_norm, GibbsEnsemble, LocalOperator};
use crate::C64;

fn validate_moved(n: usize, moved: &[usize]) -> Result<(), HarnessError> {
    if moved.is_empty() {
        return Err(HarnessError::InvalidInput("the translated set must not be empty".into()));
    }
    if let Some(&i) = moved.iter().find(|&&i| i >= n) {
        return Err(HarnessError::InvalidInput(format!("translated index {} exceeds the {n} observables", i + 1)));
    }
    let mut sorted = moved.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != moved.len() {
        return Err(HarnessError::InvalidInput("translated set has repeated indices".into()));
    }
    Ok(())
}

fn time_of(times: &[f64], i: usize) -> f64 {
    times.get(i).copied().unwrap_or(0.0)
}

fn validate_times(n: usize, times: &[f64]) -> Result<(), HarnessError> {
    if !times.is_empty() && times.len() != n {
        return Err(HarnessError::InvalidInput(format!("{} times given for {n} observables", times.len())));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(HarnessError::InvalidInput("times must be finite".into()));
    }
    Ok(())
}

/// Operators with `moved` translated by `x`, each evolved by its own time.
pub(super) fn placed(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    moved: &[usize],
    x: i64,
    times: &[f64],
) -> Result<Vec<LocalOperator>, HarnessError> {
    observables
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let shift = if moved.contains(&i) { x } else { 0 };
            let (op, _) = obs.translated(shift)?;
            let t = time_of(times, i);
            Ok(if t == 0.0 { op } else { op.evolve(t, ensemble.basis())? })
        })
        .collect()
}

fn joint_cumulant(ensemble: &GibbsEnsemble, kind: CumulantKind, ops: Vec<LocalOperator>) -> Result<C64, HarnessError> {
    let n = ops.len();
    let provider = ensemble.moment_provider(ops)?;
    let indices: Vec<usize> = (0..n).collect();
    Ok(cumulant(kind, &provider, &indices)?)
}

/// Order-`n` cumulant of all observables, those in `moved` translated by
/// `x`, each evolved by its entry of `times` (empty means all zero).
pub fn cumulant_at(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    kind: CumulantKind,
    moved: &[usize],
    x: i64,
    times: &[f64],
) -> Result<C64, HarnessError> {
    validate_moved(observables.len(), moved)?;
    validate_times(observables.len(), times)?;
    joint_cumulant(ensemble, kind, placed(ensemble, observables, moved, x, times)?)
}

/// Cumulant of `observables` as the set `moved` is translated through
/// `xs` (non-negative, any order; duplicates are dropped).
pub fn scan_cumulant(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    kind: CumulantKind,
    moved: &[usize],
    xs: &[i64],
    times: &[f64],
) -> Result<CorrelationSeries, HarnessError> {
    let n = observables.len();
    validate_moved(n, moved)?;
    validate_times(n, times)?;
    let mut xs = xs.to_vec();
    xs.sort_unstable();
    xs.dedup();
    if xs.is_empty() {
        return Err(HarnessError::InvalidInput("empty translation range".into()));
    }
    if let Some(&x) = xs.iter().find(|&&x| x < 0) {
        return Err(HarnessError::InvalidInput(format!("translations are separations and must be >= 0, got {x}")));
    }
    for &x in &xs {
        check_window(observables, moved, x)?;
    }
    let samples = xs
        .par_iter()
        .map(|&x| {
            let value = joint_cumulant(ensemble, kind, placed(ensemble, observables, moved, x, times)?)?;
            Ok(Sample { z: x, t: 0.0, value })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let descriptor = SeriesDescriptor {
        kind,
        order: n,
        translated: moved.to_vec(),
        labels: observables.iter().map(|o| o.label().to_string()).collect(),
        beta: ensemble.beta(),
        velocity: None,
        times: if times.is_empty() { vec![0.0; n] } else { times.to_vec() },
    };
    CorrelationSeries::new(descriptor, samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    /// A decay law was fitted.
    Fitted,
    /// Every sample is below the magnitude floor.
    Vanishing,
    /// Some samples are non-zero but too few for a fit.
    Unfit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub series: CorrelationSeries,
    pub fit: Option<DecayFit>,
    pub status: RateStatus,
    pub pass: bool,
}

impl RateRow {
    pub fn rate(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub kind: CumulantKind,
    pub law: DecayLaw,
    pub tolerance: f64,
    pub rows: Vec<RateRow>,
    /// All orders vanish identically: the state factorizes exactly.
    pub degenerate: bool,
    pub pass: bool,
}

impl RateReport {
    fn orders(&self) -> String {
        self.rows.iter().map(|r| r.n.to_string()).collect::<Vec<_>>().join(",")
    }

    /// One-line outcome, e.g. `PASS n=2,3,4`.
    pub fn summary(&self) -> String {
        if self.degenerate {
            return format!("REPORT degenerate: exact factorization n={}", self.orders());
        }
        if self.pass {
            return format!("PASS n={}", self.orders());
        }
        let failed: Vec<String> = self.rows.iter().filter(|r| !r.pass).map(|r| r.n.to_string()).collect();
        format!("FAIL n={} (failing orders {})", self.orders(), failed.join(","))
    }
}

/// Scans every order in `orders` (using the first `n` observables for order
/// `n`), fits each series and checks that no order decays slower than the
/// lowest one by more than `tolerance`.
#[allow(clippy::too_many_arguments)]
pub fn rate_inheritance_report(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    orders: &[usize],
    kind: CumulantKind,
    moved: &[usize],
    xs: &[i64],
    law: DecayLaw,
    tolerance: f64,
) -> Result<RateReport, HarnessError> {
    if orders.is_empty() {
        return Err(HarnessError::InvalidInput("no orders requested".into()));
    }
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(HarnessError::InvalidInput(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let mut orders = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    let mut rows = Vec::with_capacity(orders.len());
    for &n in &orders {
        if n < 2 || n > observables.len() {
            return Err(HarnessError::InvalidInput(format!(
                "order {n} needs 2 <= n <= {} (number of observables)",
                observables.len()
            )));
        }
        let sub_moved: Vec<usize> = moved.iter().copied().filter(|&i| i < n).collect();
        let series = scan_cumulant(ensemble, &observables[..n], kind, &sub_moved, xs, &[])?;
        let (fit, status) = if series.is_negligible() {
            (None, RateStatus::Vanishing)
        } else {
            match fit_points(&series.magnitudes(), law) {
                Ok(fit) => (Some(fit), RateStatus::Fitted),
                Err(HarnessError::TooFewSamples { usable, .. }) => {
                    (None, RateStatus::Unfit(format!("only {usable} samples above the floor")))
                }
                Err(e) => return Err(e),
            }
        };
        rows.push(RateRow { n, series, fit, status, pass: false });
    }
    let degenerate = rows.iter().all(|r| r.status == RateStatus::Vanishing);
    let reference = rows[0].rate();
    for (i, row) in rows.iter_mut().enumerate() {
        row.pass = match (&row.status, reference) {
            (RateStatus::Vanishing, _) => true,
            (RateStatus::Unfit(_), _) => false,
            (RateStatus::Fitted, Some(r0)) if i > 0 => row.rate().is_some_and(|r| r >= r0 - tolerance),
            (RateStatus::Fitted, _) => i == 0,
        };
    }
    let pass = degenerate || rows.iter().all(|r| r.pass);
    Ok(RateReport { kind, law, tolerance, rows, degenerate, pass })
}

/// Cumulant along the ray `x = floor(v t)`: the observables in `moved` are
/// translated by `floor(v t)` and evolved by `t`, the rest stay put.
pub fn spacelike_cumulant_check(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    kind: CumulantKind,
    moved: &[usize],
    velocity: f64,
    lieb_robinson: f64,
    ts: &[f64],
) -> Result<CorrelationSeries, HarnessError> {
    let n = observables.len();
    validate_moved(n, moved)?;
    if !(velocity.is_finite() && lieb_robinson.is_finite() && velocity > lieb_robinson) {
        return Err(HarnessError::Precondition(format!(
            "ray velocity {velocity} must exceed the Lieb-Robinson estimate {lieb_robinson}"
        )));
    }
    if ts.is_empty() || ts.windows(2).any(|w| w[0] >= w[1]) || ts[0] < 0.0 {
        return Err(HarnessError::InvalidInput("ray times must be non-negative and strictly increasing".into()));
    }
    let points: Vec<(i64, f64)> = ts.iter().map(|&t| ((velocity * t).floor() as i64, t)).collect();
    for &(x, _) in &points {
        check_window(observables, moved, x)?;
    }
    let samples = points
        .par_iter()
        .map(|&(x, t)| {
            let times: Vec<f64> = (0..n).map(|i| if moved.contains(&i) { t } else { 0.0 }).collect();
            let value = joint_cumulant(ensemble, kind, placed(ensemble, observables, moved, x, &times)?)?;
            Ok(Sample { z: x, t, value })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let descriptor = SeriesDescriptor {
        kind,
        order: n,
        translated: moved.to_vec(),
        labels: observables.iter().map(|o| o.label().to_string()).collect(),
        beta: ensemble.beta(),
        velocity: Some(velocity),
        times: vec![0.0; n],
    };
    CorrelationSeries::new(descriptor, samples)
}

/// The three-point quantity `omega(A B(x,t) C) - omega(AC) omega(B(x,t))`
/// with the pieces of its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreePoint {
    pub x: i64,
    pub t: f64,
    pub value: C64,
    /// `omega(A C B(x,t)) - omega(AC) omega(B(x,t))`
    pub two_point: C64,
    /// `||[B(x,t), C]||`
    pub commutator: f64,
    pub norm_a: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Slack allowed in `|value| <= bound`.
const THREE_POINT_TOL: f64 = 1e-10;

pub fn three_point_cluster(
    ensemble: &GibbsEnsemble,
    a: &Observable,
    b: &Observable,
    c: &Observable,
    x: i64,
    t: f64,
) -> Result<ThreePoint, HarnessError> {
    let (bx, _) = b.translated(x)?;
    let bxt = if t == 0.0 { bx } else { bx.evolve(t, ensemble.basis())? };
    let (a, c) = (a.operator(), c.operator());
    let ac = ensemble.moment(&[a, c])?;
    let wb = ensemble.moment(&[&bxt])?;
    let value = ensemble.moment(&[a, &bxt, c])? - ac * wb;
    let two_point = ensemble.moment(&[a, c, &bxt])? - ac * wb;
    let commutator = commutator_norm(&bxt, c)?;
    let norm_a = a.norm()?;
    let bound = two_point.norm() + norm_a * commutator;
    let holds = value.norm() <= bound + THREE_POINT_TOL;
    Ok(ThreePoint { x, t, value, two_point, commutator, norm_a, bound, holds })
}

/// Positions and times of the observables in one max-min sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub x: Vec<i64>,
    pub t: Vec<f64>,
}

/// `count` placements of `n` observables at uniformly random sites, all at
/// time 0. Draws whose positions have a max-min ring distance of `sites / 2`
/// or more are redrawn, so that single-site observables stay inside the
/// wraparound-safe window.
pub fn random_placements(n: usize, count: usize, sites: usize, seed: u64) -> Vec<Placement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ring = sites as i64;
    let dist = |a: i64, b: i64| {
        let d = (a - b).rem_euclid(ring);
        d.min(ring - d)
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<i64> = (0..n).map(|_| rng.gen_range(0..ring)).collect();
        let z = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| dist(x[i], x[j])).min().unwrap_or(0))
            .max()
            .unwrap_or(0);
        if 2 * z < ring {
            out.push(Placement { x, t: vec![0.0; n] });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxMinSample {
    pub placement: Placement,
    /// `max_i min_{j != i} dist(A_i, A_j)`
    pub z: usize,
    /// Index attaining the max-min distance.
    pub argmax: usize,
    pub value: C64,
    /// `omega(A_1 ... A_n) - omega(A_m) omega(product of the others)`
    pub factorization_residual: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxMinReport {
    pub kind: CumulantKind,
    pub samples: Vec<MaxMinSample>,
    /// Fit through the largest `|value|` at each distance.
    pub envelope: Option<DecayFit>,
    pub envelope_nonincreasing: bool,
    /// Largest ratio of a sample to the envelope at its distance.
    pub max_excess: f64,
    /// Fit through the largest factorization residual at each distance.
    pub residual_fit: Option<DecayFit>,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Largest magnitude per distance, ascending in distance, floor applied.
fn per_distance_max(points: impl Iterator<Item = (usize, f64)>) -> Vec<(f64, f64)> {
    let mut best = std::collections::BTreeMap::<usize, f64>::new();
    for (z, m) in points {
        if m >= MAGNITUDE_FLOOR {
            let e = best.entry(z).or_insert(0.0);
            *e = e.max(m);
        }
    }
    best.into_iter().map(|(z, m)| (z as f64, m)).collect()
}

/// Evaluates each placement, then fits an envelope of `|c_n|` against the
/// max-min distance. Placements with non-zero times must satisfy
/// `|t_i| <= z / v - 1`.
pub fn maxmin_bound_check(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    placements: &[Placement],
    kind: CumulantKind,
    velocity: f64,
    law: DecayLaw,
) -> Result<MaxMinReport, HarnessError> {
    let n = observables.len();
    if n < 2 {
        return Err(HarnessError::InvalidInput("max-min distance needs at least two observables".into()));
    }
    let space = ensemble.space().clone();
    let mut prepared = Vec::with_capacity(placements.len());
    for p in placements {
        if p.x.len() != n || p.t.len() != n {
            return Err(HarnessError::InvalidInput(format!("placement {:?} does not have {n} entries", p.x)));
        }
        let supports: Vec<Vec<usize>> = observables
            .iter()
            .zip(&p.x)
            .map(|(o, &x)| o.anchor().iter().map(|&a| space.wrap(a + x)).collect())
            .collect();
        let nearest: Vec<usize> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| space.set_distance(&supports[i], &supports[j]))
                    .min()
                    .unwrap_or(0)
            })
            .collect();
        let z = *nearest.iter().max().expect("n >= 2");
        let argmax = nearest.iter().position(|&d| d == z).expect("max present");
        if 2 * z >= space.sites() {
            return Err(HarnessError::UnsafeWindow {
                x: p.x[argmax],
                reason: format!("max-min distance {z} is not below L/2 on L={}", space.sites()),
            });
        }
        if p.t.iter().any(|&t| t != 0.0) {
            let window = if velocity > 0.0 { z as f64 / velocity - 1.0 } else { f64::NEG_INFINITY };
            if let Some(t) = p.t.iter().find(|t| t.abs() > window) {
                return Err(HarnessError::Precondition(format!(
                    "time {t} outside |t| <= z/v - 1 = {window} for z={z}, v={velocity}"
                )));
            }
        }
        prepared.push((p, z, argmax));
    }
    let samples = prepared
        .par_iter()
        .map(|&(p, z, argmax)| {
            let ops: Vec<LocalOperator> = observables
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let (op, _) = o.translated(p.x[i])?;
                    Ok(if p.t[i] == 0.0 { op } else { op.evolve(p.t[i], ensemble.basis())? })
                })
                .collect::<Result<_, HarnessError>>()?;
            let refs: Vec<&LocalOperator> = ops.iter().collect();
            let rest: Vec<&LocalOperator> =
                refs.iter().enumerate().filter(|&(i, _)| i != argmax).map(|(_, o)| *o).collect();
            let factorization_residual =
                ensemble.moment(&refs)? - ensemble.moment(&[refs[argmax]])? * ensemble.moment(&rest)?;
            let value = joint_cumulant(ensemble, kind, ops)?;
            Ok(MaxMinSample { placement: p.clone(), z, argmax, value, factorization_residual })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let mut notes = Vec::new();
    let maxima = per_distance_max(samples.iter().map(|s| (s.z, s.value.norm())));
    let envelope = match fit_points(&maxima, law) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("no envelope: {e}"));
            None
        }
    };
    let envelope_nonincreasing = envelope.as_ref().is_some_and(|f| f.rate >= 0.0);
    let max_excess = envelope.as_ref().map_or(f64::INFINITY, |f| {
        samples
            .iter()
            .filter(|s| s.value.norm() >= MAGNITUDE_FLOOR)
            .map(|s| s.value.norm() / f.envelope(s.z as f64))
            .fold(0.0, f64::max)
    });
    let residuals = per_distance_max(samples.iter().map(|s| (s.z, s.factorization_residual.norm())));
    let residual_fit = match fit_points(&residuals, law) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("no residual fit: {e}"));
            None
        }
    };
    let residual_decays = residual_fit.as_ref().is_some_and(|f| f.rate > 0.0);
    let pass = envelope_nonincreasing && max_excess <= 2.0 && residual_decays;
    Ok(MaxMinReport { kind, samples, envelope, envelope_nonincreasing, max_excess, residual_fit, pass, notes })
}
