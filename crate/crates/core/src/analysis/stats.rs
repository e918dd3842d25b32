use serde::{Deserialize, Serialize};

use super::{AnalysisError, EnergyQuantity};
use crate::format::round_sig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub mean: EnergyQuantity,
    pub median: EnergyQuantity,
    pub min: EnergyQuantity,
    pub max: EnergyQuantity,
    pub n: usize,
}

impl EnergyStats {
    pub(crate) fn rounded(self, digits: usize) -> Self {
        let r = |e: EnergyQuantity| EnergyQuantity::from_kwh(round_sig(e.kwh(), digits)).unwrap_or(e);
        Self { mean: r(self.mean), median: r(self.median), min: r(self.min), max: r(self.max), n: self.n }
    }
}

/// Mean, median, min and max. For an even count the median is the mean of
/// the two middle values.
pub fn grouped_stats(values: &[EnergyQuantity]) -> Result<EnergyStats, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::InsufficientData("statistics need at least one value".into()));
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.kwh()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let min = sorted[0];
    let max = sorted[n - 1];
    // rounding in the sum can push the mean a hair past the extremes
    let mean = (sorted.iter().sum::<f64>() / n as f64).clamp(min, max);
    let q = |x: f64| EnergyQuantity::from_kwh(x);
    Ok(EnergyStats { mean: q(mean)?, median: q(median)?, min: q(min)?, max: q(max)?, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSpread {
    pub mean_abs_rel_deviation: f64,
    pub n_runs: usize,
}

/// Mean absolute deviation of repeated runs from their mean, as a fraction
/// of the mean.
pub fn repetition_spread(runs: &[EnergyQuantity]) -> Result<RepetitionSpread, AnalysisError> {
    if runs.len() < 2 {
        return Err(AnalysisError::InsufficientData(format!("spread needs at least 2 runs, got {}", runs.len())));
    }
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.kwh()).sum::<f64>() / n;
    let mad = runs.iter().map(|r| (r.kwh() - mean).abs()).sum::<f64>() / n;
    let value = if mean == 0.0 {
        if mad == 0.0 {
            0.0
        } else {
            return Err(AnalysisError::UndefinedSpread);
        }
    } else {
        mad / mean
    };
    Ok(RepetitionSpread { mean_abs_rel_deviation: value, n_runs: runs.len() })
}

/// Least-squares line `kwh = slope * seconds + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn predict(&self, duration_s: f64) -> f64 {
        self.slope * duration_s + self.intercept
    }
}

/// Ordinary least squares over `(duration_s, kwh)` points.
pub fn fit_energy_runtime(points: &[(f64, f64)]) -> Result<LinearFit, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::InsufficientData(format!("fit needs at least 2 points, got {}", points.len())));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(AnalysisError::DegenerateFit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateFit("all durations are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(LinearFit { slope, intercept, r2 })
}
