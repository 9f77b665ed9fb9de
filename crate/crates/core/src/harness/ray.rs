use rayon::prelude::*;
use serde::Serialize;

use super::experiments::{cumulant_at, placed};
use super::{check_window, HarnessError, Observable};
use crate::cumulant::CumulantKind;
use crate::sim::GibbsEnsemble;
use crate::C64;

/// Time averages `(1/T) int_0^T c_n(x = floor(v t), t) dt` per horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayAverageSeries {
    pub velocity: f64,
    pub horizons: Vec<f64>,
    /// Largest quadrature step actually used.
    pub step: f64,
    pub averages: Vec<C64>,
    pub evaluations: usize,
    pub warnings: Vec<String>,
}

/// An interval on which `floor(v t)` is constant.
#[derive(Debug, Clone, Copy)]
struct Piece {
    x: i64,
    start: f64,
    end: f64,
    steps: usize,
}

fn validate(velocity: f64, horizons: &[f64], dt: f64) -> Result<(), HarnessError> {
    if !(velocity.is_finite() && velocity >= 0.0) {
        return Err(HarnessError::InvalidInput(format!("velocity must be finite and >= 0, got {velocity}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(HarnessError::InvalidInput(format!("step must be positive, got {dt}")));
    }
    if horizons.is_empty() || horizons[0] <= 0.0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::InvalidInput("horizons must be positive and strictly increasing".into()));
    }
    if horizons.iter().any(|h| !h.is_finite()) {
        return Err(HarnessError::InvalidInput("horizons must be finite".into()));
    }
    Ok(())
}

/// Splits `[0, T_max]` at the jumps of `floor(v t)` and at every horizon,
/// with each piece cut into equal steps no longer than `dt`.
fn pieces(velocity: f64, horizons: &[f64], dt: f64) -> Vec<Piece> {
    let t_max = *horizons.last().expect("validated");
    let mut cuts: Vec<f64> = vec![0.0];
    if velocity > 0.0 {
        let jumps = (velocity * t_max).floor() as i64;
        cuts.extend((1..=jumps).map(|k| k as f64 / velocity).filter(|&t| t < t_max));
    }
    cuts.extend_from_slice(horizons);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            Piece { x: (velocity * mid).floor() as i64, start: w[0], end: w[1], steps: ((w[1] - w[0]) / dt).ceil().max(1.0) as usize }
        })
        .collect()
}

/// Trapezoid integrals on the pieces with every step split `refine` times,
/// evaluated from the integrand values at the finest nodes.
fn integrate(
    pieces: &[Piece],
    horizons: &[f64],
    refine: usize,
    finest: usize,
    values: &[Vec<C64>],
) -> Vec<C64> {
    let stride = finest / refine;
    let mut out = Vec::with_capacity(horizons.len());
    let mut acc = C64::new(0.0, 0.0);
    let mut next = 0;
    for (piece, vals) in pieces.iter().zip(values) {
        let m = piece.steps * refine;
        let h = (piece.end - piece.start) / m as f64;
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..m {
            sum += (vals[j * stride] + vals[(j + 1) * stride]) * 0.5;
        }
        acc += sum * h;
        while next < horizons.len() && horizons[next] <= piece.end {
            out.push(acc / horizons[next]);
            next += 1;
        }
    }
    out
}

/// Integrand values at the nodes of every piece, refined `finest` times,
/// evaluated in order of the translation modulo `period` so that cached
/// operators are reused. `prepare` sees each piece's nodes before the
/// integrand does.
fn node_values(
    pieces: &[Piece],
    finest: usize,
    period: i64,
    prepare: &(impl Fn(i64, &[f64]) -> Result<(), HarnessError> + Sync),
    integrand: &(impl Fn(i64, f64) -> Result<C64, HarnessError> + Sync),
) -> Result<Vec<Vec<C64>>, HarnessError> {
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by_key(|&i| (pieces[i].x.rem_euclid(period), i));
    let evaluated = order
        .par_iter()
        .map(|&i| {
            let p = pieces[i];
            let m = p.steps * finest;
            let h = (p.end - p.start) / m as f64;
            let ts: Vec<f64> = (0..=m).map(|j| if j == m { p.end } else { p.start + j as f64 * h }).collect();
            prepare(p.x, &ts)?;
            let vals = ts.iter().map(|&t| integrand(p.x, t)).collect::<Result<Vec<C64>, HarnessError>>()?;
            Ok((i, vals))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let mut values = vec![Vec::new(); pieces.len()];
    for (i, v) in evaluated {
        values[i] = v;
    }
    Ok(values)
}

/// Averages of an arbitrary integrand `f(x, t)` along the ray.
pub fn ray_quadrature(
    velocity: f64,
    horizons: &[f64],
    dt: f64,
    integrand: impl Fn(i64, f64) -> Result<C64, HarnessError> + Sync,
) -> Result<Vec<C64>, HarnessError> {
    validate(velocity, horizons, dt)?;
    let ps = pieces(velocity, horizons, dt);
    let values = node_values(&ps, 1, i64::MAX, &|_, _| Ok(()), &integrand)?;
    Ok(integrate(&ps, horizons, 1, 1, &values))
}

fn largest_step(ps: &[Piece], refine: usize) -> f64 {
    ps.iter().map(|p| (p.end - p.start) / (p.steps * refine) as f64).fold(0.0, f64::max)
}

struct RaySetup<'a> {
    ensemble: &'a GibbsEnsemble,
    observables: &'a [Observable],
    kind: CumulantKind,
    moved: &'a [usize],
    velocity: f64,
    horizons: &'a [f64],
}

impl RaySetup<'_> {
    fn period(&self) -> i64 {
        self.ensemble.space().sites() as i64
    }

    fn warnings(&self, step: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        let norm = self.ensemble.hamiltonian_norm();
        if norm > 0.0 && step > 0.5 / norm {
            warnings.push(format!("step {step} exceeds 0.5/||H|| = {}; refine dt", 0.5 / norm));
        }
        let reach = (self.velocity * self.horizons.last().copied().unwrap_or(0.0)).floor() as i64;
        if let Some(x) = (0..=reach).find(|&x| check_window(self.observables, self.moved, x).is_err()) {
            warnings.push(format!(
                "ray reaches x={reach} beyond the wraparound-safe window (first unsafe x={x}); translations wrap around the ring of L={}",
                self.ensemble.space().sites()
            ));
        }
        warnings
    }

    fn integrand(&self) -> impl Fn(i64, f64) -> Result<C64, HarnessError> + Sync + '_ {
        let n = self.observables.len();
        move |x, t| {
            let times: Vec<f64> = (0..n).map(|i| if self.moved.contains(&i) { t } else { 0.0 }).collect();
            cumulant_at(self.ensemble, self.observables, self.kind, self.moved, x, &times)
        }
    }

    /// With a single moving observable, every moment that contains it is
    /// computed for all of a piece's times at once.
    fn prefetch(&self) -> impl Fn(i64, &[f64]) -> Result<(), HarnessError> + Sync + '_ {
        move |x, ts| {
            let &[moved] = self.moved else { return Ok(()) };
            let ops = placed(self.ensemble, self.observables, self.moved, x, &[])?;
            for mask in 1u32..1 << ops.len() {
                if mask >> moved & 1 == 0 || mask.count_ones() < 2 {
                    continue;
                }
                let members: Vec<usize> = (0..ops.len()).filter(|i| mask >> i & 1 == 1).collect();
                let subset: Vec<_> = members.iter().map(|&i| &ops[i]).collect();
                let pivot = members.iter().position(|&i| i == moved).expect("moved is a member");
                self.ensemble.prefetch_moments(&subset, pivot, ts)?;
            }
            Ok(())
        }
    }

    fn series(&self, ps: &[Piece], refine: usize, averages: Vec<C64>) -> RayAverageSeries {
        let step = largest_step(ps, refine);
        RayAverageSeries {
            velocity: self.velocity,
            horizons: self.horizons.to_vec(),
            step,
            averages,
            evaluations: ps.iter().map(|p| p.steps * refine + 1).sum(),
            warnings: self.warnings(step),
        }
    }
}

/// Ray averages of the cumulant of `observables` with `moved` translated by
/// `floor(v t)` and evolved by `t`.
#[allow(clippy::too_many_arguments)]
pub fn ray_average(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    kind: CumulantKind,
    moved: &[usize],
    velocity: f64,
    horizons: &[f64],
    dt: f64,
) -> Result<RayAverageSeries, HarnessError> {
    validate(velocity, horizons, dt)?;
    let setup = RaySetup { ensemble, observables, kind, moved, velocity, horizons };
    let ps = pieces(velocity, horizons, dt);
    let values = node_values(&ps, 1, setup.period(), &setup.prefetch(), &setup.integrand())?;
    let averages = integrate(&ps, horizons, 1, 1, &values);
    Ok(setup.series(&ps, 1, averages))
}

/// Ray averages at step `dt` and `dt/2` from one set of evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayConvergence {
    pub coarse: RayAverageSeries,
    pub fine: RayAverageSeries,
    /// `max_k |fine_k - coarse_k| / |fine_k|`
    pub max_relative_change: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn ray_average_convergence(
    ensemble: &GibbsEnsemble,
    observables: &[Observable],
    kind: CumulantKind,
    moved: &[usize],
    velocity: f64,
    horizons: &[f64],
    dt: f64,
) -> Result<RayConvergence, HarnessError> {
    validate(velocity, horizons, dt)?;
    let setup = RaySetup { ensemble, observables, kind, moved, velocity, horizons };
    let ps = pieces(velocity, horizons, dt);
    let values = node_values(&ps, 2, setup.period(), &setup.prefetch(), &setup.integrand())?;
    let coarse = setup.series(&ps, 1, integrate(&ps, horizons, 1, 2, &values));
    let fine = setup.series(&ps, 2, integrate(&ps, horizons, 2, 2, &values));
    let max_relative_change = coarse
        .averages
        .iter()
        .zip(&fine.averages)
        .map(|(c, f)| if f.norm() > 0.0 { (c - f).norm() / f.norm() } else { (c - f).norm() })
        .fold(0.0, f64::max);
    Ok(RayConvergence { coarse, fine, max_relative_change })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrand_averages_to_itself() {
        let c = C64::new(0.3, -1.2);
        let avg = ray_quadrature(1.7, &[0.5, 2.0, 5.0], 0.1, |_, _| Ok(c)).unwrap();
        for a in avg {
            assert!((a - c).norm() < 1e-14);
        }
    }

    #[test]
    fn pieces_follow_the_floor() {
        let ps = pieces(2.0, &[1.0, 2.25], 0.2);
        let xs: Vec<i64> = ps.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0, 1, 2, 3, 4]);
        assert!((ps[0].end - 0.5).abs() < 1e-15);
        assert_eq!(ps[0].steps, 3);
        assert!((ps[4].end - 2.25).abs() < 1e-15);
    }

    #[test]
    fn piecewise_smooth_integrand_is_exact_for_linear_pieces() {
        // f = x + t: linear on every piece, so the trapezoid rule is exact
        let v = 3.0;
        let t_max = 2.0;
        let avg = ray_quadrature(v, &[t_max], 0.05, |x, t| Ok(C64::new(x as f64 + t, 0.0))).unwrap();
        // int_0^T floor(v t) dt = sum_k (T - k/v) over the jumps k/v < T
        let floor_integral: f64 = (1..=6).map(|k| (t_max - k as f64 / v).max(0.0)).sum();
        let exact = (floor_integral + t_max * t_max / 2.0) / t_max;
        assert!((avg[0].re - exact).abs() < 1e-12, "{} vs {exact}", avg[0].re);
    }

    #[test]
    fn refinement_shares_nodes() {
        let ps = pieces(1.0, &[3.0], 0.5);
        let f = |_: i64, t: f64| Ok(C64::new(t * t, 0.0));
        let values = node_values(&ps, 2, i64::MAX, &|_, _| Ok(()), &f).unwrap();
        let coarse = integrate(&ps, &[3.0], 1, 2, &values)[0].re * 3.0;
        let fine = integrate(&ps, &[3.0], 2, 2, &values)[0].re * 3.0;
        // trapezoid error for t^2 is h^2 (b - a) / 6
        assert!((coarse - (9.0 + 0.25 * 3.0 / 6.0)).abs() < 1e-12);
        assert!((fine - (9.0 + 0.0625 * 3.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let f = |_: i64, _: f64| Ok(C64::new(0.0, 0.0));
        assert!(ray_quadrature(1.0, &[], 0.1, f).is_err());
        assert!(ray_quadrature(1.0, &[2.0, 1.0], 0.1, f).is_err());
        assert!(ray_quadrature(1.0, &[2.0], 0.0, f).is_err());
        assert!(ray_quadrature(-1.0, &[2.0], 0.1, f).is_err());
    }
}
