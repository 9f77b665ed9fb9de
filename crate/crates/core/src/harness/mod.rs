//! Clustering experiments on thermal states of spin chains.
//!
//! Every experiment sweeps lattice translations and/or Heisenberg times,
//! evaluates cumulants of the resulting observables with the cumulant
//! engine, and reports the raw series together with fitted decay laws.

mod experiments;
mod fit;
mod lightcone;
mod ray;

use serde::Serialize;
use thiserror::Error;

use crate::cumulant::{CumulantError, CumulantKind};
use crate::sim::{LocalOperator, ObservableSpec, SimError, Space};
use crate::C64;

pub use experiments::{
    cumulant_at, maxmin_bound_check, random_placements, rate_inheritance_report, scan_cumulant,
    spacelike_cumulant_check, three_point_cluster, MaxMinReport, MaxMinSample, Placement, RateReport, RateRow,
    RateStatus, ThreePoint,
};
pub use fit::{fit_decay, fit_points, DecayFit, DecayLaw};
pub use lightcone::{lightcone_map, LightconeMap};
pub use ray::{ray_average, ray_average_convergence, ray_quadrature, RayAverageSeries, RayConvergence};

/// Magnitudes below this are numerical zeros and never enter a fit.
pub const MAGNITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
    #[error("translation x={x} leaves the wraparound-safe window: {reason}")]
    UnsafeWindow { x: i64, reason: String },
    #[error("fit needs at least {needed} samples above {floor:e}, found {usable}")]
    TooFewSamples { usable: usize, needed: usize, floor: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// An observable with a label and an unwrapped anchor: the integer positions
/// of its support before reduction modulo the chain length. Anchors are what
/// line distances are measured with.
#[derive(Debug, Clone)]
pub struct Observable {
    label: String,
    op: LocalOperator,
    anchor: Vec<i64>,
}

impl Observable {
    /// Parses `LETTERS@SITE`, e.g. `ZZ@-1`.
    pub fn parse(space: &Space, spec: &str) -> Result<Self, HarnessError> {
        let parsed: ObservableSpec = spec.parse()?;
        let op = LocalOperator::pauli(space, &parsed.ops, parsed.site)?;
        let l = space.sites() as i64;
        // unwrapped copies of the support sites at or after the written position
        let mut anchor: Vec<i64> =
            op.support().into_iter().map(|s| parsed.site + (s as i64 - parsed.site).rem_euclid(l)).collect();
        anchor.sort_unstable();
        Ok(Observable { label: parsed.to_string(), op, anchor })
    }

    /// Wraps an arbitrary operator; its support is anchored at the copies of
    /// its sites closest to site 0.
    pub fn from_operator(label: impl Into<String>, op: LocalOperator) -> Self {
        let l = op.space().sites() as i64;
        let anchor = op
            .origin_support()
            .into_iter()
            .map(|s| {
                let s = s as i64;
                if 2 * s > l {
                    s - l
                } else {
                    s
                }
            })
            .collect();
        Observable { label: label.into(), op, anchor }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operator(&self) -> &LocalOperator {
        &self.op
    }

    pub fn anchor(&self) -> &[i64] {
        &self.anchor
    }

    pub fn space(&self) -> &Space {
        self.op.space()
    }

    pub(crate) fn translated(&self, x: i64) -> Result<(LocalOperator, Vec<i64>), HarnessError> {
        let op = if x == 0 { self.op.clone() } else { self.op.translate(x)? };
        Ok((op, self.anchor.iter().map(|a| a + x).collect()))
    }
}

/// Smallest line and periodic distances between two anchored site sets.
fn distances(a: &[i64], b: &[i64], l: i64) -> (i64, i64) {
    let mut line = i64::MAX;
    let mut periodic = i64::MAX;
    for &p in a {
        for &q in b {
            let d = (p - q).abs();
            let r = d.rem_euclid(l);
            line = line.min(d);
            periodic = periodic.min(r.min(l - r));
        }
    }
    (line, periodic)
}

/// Wraparound rule for translating the observables in `moved` by `x` away
/// from the others: the separation on the ring must be the separation on the
/// line, and strictly less than half the ring so that every periodic image
/// is farther away than the direct one.
pub fn check_window(observables: &[Observable], moved: &[usize], x: i64) -> Result<(), HarnessError> {
    let Some(first) = observables.first() else {
        return Ok(());
    };
    let l = first.space().sites() as i64;
    let shifted: Vec<i64> = moved.iter().flat_map(|&i| observables[i].anchor.iter().map(move |a| a + x)).collect();
    let fixed: Vec<i64> = (0..observables.len())
        .filter(|i| !moved.contains(i))
        .flat_map(|i| observables[i].anchor.iter().copied())
        .collect();
    if fixed.is_empty() || x == 0 {
        return Ok(());
    }
    let (line, periodic) = distances(&shifted, &fixed, l);
    if line != periodic {
        return Err(HarnessError::UnsafeWindow {
            x,
            reason: format!("ring distance {periodic} differs from line distance {line} on L={l}"),
        });
    }
    if 2 * line >= l {
        return Err(HarnessError::UnsafeWindow {
            x,
            reason: format!("separation {line} is not below L/2 = {} on L={l}, so a wrapped image is as close", l as f64 / 2.0),
        });
    }
    Ok(())
}

/// Identification of a series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDescriptor {
    pub kind: CumulantKind,
    pub order: usize,
    /// Zero-based positions of the translated observables.
    pub translated: Vec<usize>,
    pub labels: Vec<String>,
    pub beta: f64,
    pub velocity: Option<f64>,
    pub times: Vec<f64>,
}

/// One cumulant value at translation `z` and time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub z: i64,
    pub t: f64,
    pub value: C64,
}

/// Cumulant values along a sweep. Samples are ordered by translation for
/// space scans and by time along rays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries {
    pub descriptor: SeriesDescriptor,
    pub samples: Vec<Sample>,
}

impl CorrelationSeries {
    pub fn new(descriptor: SeriesDescriptor, samples: Vec<Sample>) -> Result<Self, HarnessError> {
        if let Some(s) = samples.iter().find(|s| !(s.value.re.is_finite() && s.value.im.is_finite())) {
            return Err(HarnessError::InvalidInput(format!("non-finite cumulant at z={} t={}", s.z, s.t)));
        }
        let by_time = descriptor.velocity.is_some();
        let increasing = samples.windows(2).all(|w| if by_time { w[0].t < w[1].t } else { w[0].z < w[1].z });
        if !increasing {
            return Err(HarnessError::InvalidInput("samples must be strictly increasing".into()));
        }
        Ok(CorrelationSeries { descriptor, samples })
    }

    /// `(z, |value|)` pairs.
    pub fn magnitudes(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.z as f64, s.value.norm())).collect()
    }

    pub fn is_negligible(&self) -> bool {
        self.samples.iter().all(|s| s.value.norm() < MAGNITUDE_FLOOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_follow_written_positions() {
        let space = Space::new(12, 2).unwrap();
        let a = Observable::parse(&space, "X@-1").unwrap();
        assert_eq!(a.anchor(), &[-1]);
        let b = Observable::parse(&space, "ZZ@11").unwrap();
        assert_eq!(b.anchor(), &[11, 12]);
        let c = Observable::from_operator("c", LocalOperator::parse(&space, "Z@11").unwrap());
        assert_eq!(c.anchor(), &[-1]);
    }

    #[test]
    fn window_rule() {
        let space = Space::new(12, 2).unwrap();
        let obs: Vec<Observable> =
            ["Z@0", "Z@0", "X@0", "X@-1"].iter().map(|s| Observable::parse(&space, s).unwrap()).collect();
        for x in 1..=5 {
            check_window(&obs, &[0], x).unwrap();
        }
        assert!(matches!(check_window(&obs, &[0], 6), Err(HarnessError::UnsafeWindow { .. })));
        // moving left towards X@-1 closes the gap sooner
        check_window(&obs, &[0], -4).unwrap();
        assert!(check_window(&obs, &[0], 13).is_err());
        let err = check_window(&obs[..2], &[0], 7).unwrap_err().to_string();
        assert!(err.contains("differs from line distance"), "{err}");
    }
}
