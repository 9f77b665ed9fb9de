use rayon::prelude::*;
use serde::Serialize;

use super::{check_window, HarnessError, Observable};
use crate::sim::{commutator_norm, GibbsEnsemble};

/// `||[A(x,t), B]||` on a grid, with the contour estimate of the
/// Lieb-Robinson velocity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightconeMap {
    pub xs: Vec<i64>,
    pub ts: Vec<f64>,
    /// One row per time, one column per translation.
    pub norms: Vec<Vec<f64>>,
    pub threshold: f64,
    /// `(|t|, x)` where a row crosses the threshold.
    pub contour: Vec<(f64, f64)>,
    pub velocity: Option<f64>,
    pub note: Option<String>,
}

/// Last crossing of `theta` along a row, interpolated in `ln ||.||`.
fn crossing(xs: &[i64], row: &[f64], theta: f64) -> Option<f64> {
    let k = row.iter().rposition(|&v| v >= theta)?;
    if k + 1 == row.len() {
        return None;
    }
    let (x0, x1) = (xs[k] as f64, xs[k + 1] as f64);
    let (v0, v1) = (row[k], row[k + 1]);
    let frac = if v1 > 0.0 {
        (theta.ln() - v0.ln()) / (v1.ln() - v0.ln())
    } else {
        (v0 - theta) / v0
    };
    Some(x0 + frac.clamp(0.0, 1.0) * (x1 - x0))
}

/// Fills the commutator-norm map for `A` translated by each `x` (ascending,
/// non-negative) and evolved by each `t`; `theta_rel` scales the threshold
/// `theta_rel * ||A|| * ||B||`.
pub fn lightcone_map(
    ensemble: &GibbsEnsemble,
    a: &Observable,
    b: &Observable,
    xs: &[i64],
    ts: &[f64],
    theta_rel: f64,
) -> Result<LightconeMap, HarnessError> {
    if xs.is_empty() || ts.is_empty() {
        return Err(HarnessError::InvalidInput("light-cone grids must be non-empty".into()));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) || xs[0] < 0 {
        return Err(HarnessError::InvalidInput("x grid must be non-negative and strictly increasing".into()));
    }
    if !(theta_rel.is_finite() && theta_rel > 0.0) {
        return Err(HarnessError::InvalidInput(format!("threshold must be positive, got {theta_rel}")));
    }
    let pair = [a.clone(), b.clone()];
    for &x in xs {
        check_window(&pair, &[0], x)?;
    }
    let threshold = theta_rel * a.operator().norm()? * b.operator().norm()?;
    let cells: Vec<(usize, usize)> = (0..ts.len()).flat_map(|i| (0..xs.len()).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let (ax, _) = a.translated(xs[j])?;
            let axt = if ts[i] == 0.0 { ax } else { ax.evolve(ts[i], ensemble.basis())? };
            Ok(commutator_norm(&axt, b.operator())?)
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;
    let norms: Vec<Vec<f64>> = values.chunks(xs.len()).map(|c| c.to_vec()).collect();
    let contour: Vec<(f64, f64)> =
        ts.iter().zip(&norms).filter_map(|(&t, row)| crossing(xs, row, threshold).map(|x| (t.abs(), x))).collect();
    let (velocity, note) = contour_slope(&contour);
    Ok(LightconeMap { xs: xs.to_vec(), ts: ts.to_vec(), norms, threshold, contour, velocity, note })
}

fn contour_slope(contour: &[(f64, f64)]) -> (Option<f64>, Option<String>) {
    let mut times: Vec<f64> = contour.iter().map(|c| c.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 2 {
        return (None, Some(format!("contour absent: threshold crossed on {} distinct time rows", times.len())));
    }
    let n = contour.len() as f64;
    let mt = contour.iter().map(|c| c.0).sum::<f64>() / n;
    let mx = contour.iter().map(|c| c.1).sum::<f64>() / n;
    let stt: f64 = contour.iter().map(|c| (c.0 - mt).powi(2)).sum();
    let stx: f64 = contour.iter().map(|c| (c.0 - mt) * (c.1 - mx)).sum();
    let slope = stx / stt;
    if slope.is_finite() && slope > 0.0 {
        (Some(slope), None)
    } else {
        (None, Some(format!("contour does not advance (slope {slope})")))
    }
}
