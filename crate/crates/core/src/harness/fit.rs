//! Log-linear decay fits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CorrelationSeries, HarnessError, MAGNITUDE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLaw {
    /// `|c| = C e^{-lambda z}`
    #[default]
    Exponential,
    /// `|c| = C (1 + z)^{-p}`
    Power,
}

impl fmt::Display for DecayLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayLaw::Exponential => "exponential",
            DecayLaw::Power => "power",
        })
    }
}

impl FromStr for DecayLaw {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" | "exp" => Ok(DecayLaw::Exponential),
            "power" | "pow" => Ok(DecayLaw::Power),
            other => Err(format!("unknown decay law `{other}` (expected exponential or power)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub law: DecayLaw,
    /// `lambda` for exponential fits, `p` for power fits.
    pub rate: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of `ln|c|`.
    pub residual: f64,
    /// First and last sample index used (inclusive).
    pub window: (usize, usize),
    pub used: usize,
}

impl DecayFit {
    /// Fitted magnitude at separation `z`.
    pub fn envelope(&self, z: f64) -> f64 {
        self.prefactor * (-self.rate * self.abscissa(z)).exp()
    }

    fn abscissa(&self, z: f64) -> f64 {
        abscissa(self.law, z)
    }
}

fn abscissa(law: DecayLaw, z: f64) -> f64 {
    match law {
        DecayLaw::Exponential => z,
        DecayLaw::Power => (1.0 + z).ln(),
    }
}

/// Least-squares fit of `ln|c|` against `z` or `ln(1+z)` over the points
/// whose magnitude clears the floor.
pub fn fit_points(points: &[(f64, f64)], law: DecayLaw) -> Result<DecayFit, HarnessError> {
    let usable: Vec<(usize, f64, f64)> = points
        .iter()
        .enumerate()
        .filter(|(_, (_, m))| *m >= MAGNITUDE_FLOOR && m.is_finite())
        .map(|(i, &(z, m))| (i, abscissa(law, z), m.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(HarnessError::TooFewSamples { usable: usable.len(), needed: 3, floor: MAGNITUDE_FLOOR });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|u| u.1).sum::<f64>() / n;
    let my = usable.iter().map(|u| u.2).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|u| (u.1 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::InvalidInput("all usable samples share one separation".into()));
    }
    let sxy: f64 = usable.iter().map(|u| (u.1 - mx) * (u.2 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (usable.iter().map(|u| (u.2 - intercept - slope * u.1).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit {
        law,
        rate: -slope,
        prefactor: intercept.exp(),
        residual,
        window: (usable[0].0, usable[usable.len() - 1].0),
        used: usable.len(),
    })
}

/// Fits the magnitudes of a series against its separations.
pub fn fit_decay(series: &CorrelationSeries, law: DecayLaw) -> Result<DecayFit, HarnessError> {
    fit_points(&series.magnitudes(), law)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|z| (z as f64, 3.0 * (-0.7 * z as f64).exp())).collect();
        let fit = fit_points(&pts, DecayLaw::Exponential).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.window, (0, 5));
    }

    #[test]
    fn exact_power() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|z| (z as f64, 2.0 / (1.0 + z as f64).powi(3))).collect();
        let fit = fit_points(&pts, DecayLaw::Power).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-12);
        assert!((fit.envelope(4.0) - 2.0 / 125.0).abs() < 1e-14);
    }

    #[test]
    fn floor_excludes_numerical_zeros() {
        let pts = [(1.0, 1e-3), (2.0, 1e-4), (3.0, 1e-13), (4.0, 0.0)];
        assert!(matches!(
            fit_points(&pts, DecayLaw::Exponential),
            Err(HarnessError::TooFewSamples { usable: 2, needed: 3, .. })
        ));
        let pts = [(1.0, 1e-3), (2.0, 1e-14), (3.0, 1e-5), (5.0, 1e-7)];
        let fit = fit_points(&pts, DecayLaw::Exponential).unwrap();
        assert_eq!(fit.used, 3);
        assert_eq!(fit.window, (0, 3));
        assert!((fit.rate - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn laws_parse() {
        assert_eq!("exp".parse::<DecayLaw>().unwrap(), DecayLaw::Exponential);
        assert_eq!("power".parse::<DecayLaw>().unwrap(), DecayLaw::Power);
        assert!("gauss".parse::<DecayLaw>().is_err());
    }
}
