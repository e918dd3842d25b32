//! Phase and run energy from the cumulative counter, idle-baseline
//! subtraction, summary statistics and the energy/runtime regression.

mod interpolate;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::format::round_sig;
use crate::session::{BaselineRecord, MeterSession, Phase, SessionError};

pub use interpolate::{interpolate_counter, phase_energy, session_total, trapezoid_kwh};
pub use stats::{fit_energy_runtime, grouped_stats, repetition_spread, EnergyStats, LinearFit, RepetitionSpread};

pub const WH_PER_KWH: f64 = 1000.0;
/// Watt-seconds per kWh.
pub const JOULES_PER_KWH: f64 = 3.6e6;
/// Relative disagreement between counter and trapezoid energy that triggers a warning.
pub const TRAPEZOID_WARN_FRACTION: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("time {t_ms} ms is outside the sampled range [{first_ms}, {last_ms}] (tolerance {tol_ms} ms)")]
    OutOfRange { t_ms: i64, first_ms: i64, last_ms: i64, tol_ms: i64 },
    #[error("phase `{label}` cannot be measured: {reason}")]
    UnmeasurablePhase { label: String, reason: String },
    #[error("no phase labeled `{0}`")]
    UnknownLabel(String),
    #[error("spread is undefined when the mean is zero but runs differ")]
    UndefinedSpread,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid energy value {0}")]
    InvalidEnergy(f64),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// Energy in kWh, finite and nonnegative.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyQuantity {
    kwh: f64,
}

impl EnergyQuantity {
    pub const ZERO: Self = Self { kwh: 0.0 };

    pub fn from_kwh(kwh: f64) -> Result<Self, AnalysisError> {
        if kwh.is_finite() && kwh >= 0.0 {
            Ok(Self { kwh })
        } else {
            Err(AnalysisError::InvalidEnergy(kwh))
        }
    }

    pub fn from_wh(wh: f64) -> Result<Self, AnalysisError> {
        Self::from_kwh(wh / WH_PER_KWH)
    }

    pub fn kwh(self) -> f64 {
        self.kwh
    }

    pub fn wh(self) -> f64 {
        self.kwh * WH_PER_KWH
    }

    /// Multiplies by a nonnegative factor.
    pub fn scaled(self, factor: f64) -> Result<Self, AnalysisError> {
        Self::from_kwh(self.kwh * factor)
    }
}

impl std::ops::Add for EnergyQuantity {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self { kwh: self.kwh + rhs.kwh }
    }
}

impl std::iter::Sum for EnergyQuantity {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl std::fmt::Display for EnergyQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} kWh", crate::format::sig(self.kwh, 6))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEnergy {
    pub phase: Phase,
    /// Whole-machine energy over the phase.
    pub gross: EnergyQuantity,
    /// Gross minus idle draw over the same duration, floored at zero.
    pub net_of_idle: Option<EnergyQuantity>,
    pub duration_s: f64,
}

/// Summed energy of a run made of several phases.
#[derive(Clone, Debug, PartialEq)]
pub struct RunEnergy {
    pub total: EnergyQuantity,
    pub by_label: BTreeMap<String, EnergyQuantity>,
}

impl RunEnergy {
    /// `numerator / denominator` of two labels' energies, e.g. training over
    /// prediction.
    pub fn ratio(&self, numerator: &str, denominator: &str) -> Option<f64> {
        let n = self.by_label.get(numerator)?.kwh();
        let d = self.by_label.get(denominator)?.kwh();
        (d > 0.0).then(|| n / d)
    }
}

/// Sums gross energy of every phase whose label is in `labels`. Repeated
/// labels (several training phases, say) accumulate.
pub fn run_energy(phases: &[PhaseEnergy], labels: &[&str]) -> Result<RunEnergy, AnalysisError> {
    let mut by_label = BTreeMap::new();
    for label in labels {
        let sum: EnergyQuantity = phases.iter().filter(|p| p.phase.label == *label).map(|p| p.gross).sum();
        if !phases.iter().any(|p| p.phase.label == *label) {
            return Err(AnalysisError::UnknownLabel(label.to_string()));
        }
        by_label.insert(label.to_string(), sum);
    }
    Ok(RunEnergy { total: by_label.values().copied().sum(), by_label })
}

/// One phase in `analysis.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub label: String,
    pub start_ms: i64,
    pub end_ms: i64,
    pub gross_kwh: f64,
    pub net_kwh: Option<f64>,
    pub duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsBlock {
    pub all_phases: Option<EnergyStats>,
    pub by_label: BTreeMap<String, EnergyStats>,
}

/// Contents of `analysis.json`. Every float carries at most 9 significant
/// digits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionAnalysis {
    pub session_id: String,
    pub interval_ms: u64,
    pub offset_corrected: bool,
    pub baseline: Option<BaselineRecord>,
    pub sample_count: usize,
    pub epochs: usize,
    pub total_kwh: f64,
    pub phases: Vec<PhaseRecord>,
    pub stats: StatsBlock,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct AnalyzeOptions {
    /// Shift markers onto the device clock using the session's offset.
    pub correct_offset: bool,
    /// Report net-of-idle energy when the session has a baseline.
    pub net_of_idle: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { correct_offset: true, net_of_idle: true }
    }
}

const DIGITS: usize = 9;

pub fn analyze_session(session: &MeterSession, opts: AnalyzeOptions) -> Result<SessionAnalysis, AnalysisError> {
    if session.samples.len() < 2 {
        return Err(AnalysisError::InsufficientData(format!(
            "session `{}` has {} samples, need at least 2",
            session.session_id,
            session.samples.len()
        )));
    }
    let correct = opts.correct_offset && session.clock_offset.is_some();
    let phases = session.phases(correct)?;
    let baseline = if opts.net_of_idle { session.baseline.as_ref() } else { None };
    let mut warnings = Vec::new();
    if opts.correct_offset && session.clock_offset.is_none() && !phases.is_empty() {
        warnings.push("no clock offset recorded; marker times used as device times".to_string());
    }

    let mut energies = Vec::with_capacity(phases.len());
    for phase in &phases {
        let e = phase_energy(session, phase, baseline)?;
        let trap = trapezoid_kwh(session, phase)?;
        let gross = e.gross.kwh();
        if gross > 0.0 && (trap - gross).abs() > TRAPEZOID_WARN_FRACTION * gross {
            warnings.push(format!(
                "phase `{}` [{}, {}]: trapezoid power integral {} kWh differs from counter energy {} kWh by more than 2%",
                phase.label,
                phase.start_ms,
                phase.end_ms,
                crate::format::sig(trap, 6),
                crate::format::sig(gross, 6)
            ));
        }
        energies.push(e);
    }

    let mut by_label: BTreeMap<String, Vec<EnergyQuantity>> = BTreeMap::new();
    for e in &energies {
        by_label.entry(e.phase.label.clone()).or_default().push(e.gross);
    }
    let all: Vec<_> = energies.iter().map(|e| e.gross).collect();
    let stats = StatsBlock {
        all_phases: if all.is_empty() { None } else { Some(grouped_stats(&all)?.rounded(DIGITS)) },
        by_label: by_label
            .into_iter()
            .map(|(k, v)| grouped_stats(&v).map(|s| (k, s.rounded(DIGITS))))
            .collect::<Result<_, _>>()?,
    };

    Ok(SessionAnalysis {
        session_id: session.session_id.clone(),
        interval_ms: session.interval_ms,
        offset_corrected: correct,
        baseline: session.baseline,
        sample_count: session.samples.len(),
        epochs: session.epoch_ranges().len(),
        total_kwh: round_sig(session_total(session).kwh(), DIGITS),
        phases: energies
            .iter()
            .map(|e| PhaseRecord {
                label: e.phase.label.clone(),
                start_ms: e.phase.start_ms,
                end_ms: e.phase.end_ms,
                gross_kwh: round_sig(e.gross.kwh(), DIGITS),
                net_kwh: e.net_of_idle.map(|n| round_sig(n.kwh(), DIGITS)),
                duration_s: round_sig(e.duration_s, DIGITS),
            })
            .collect(),
        stats,
        warnings,
    })
}

impl SessionAnalysis {
    /// Pretty JSON with a trailing newline; stable key order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("analysis serializes");
        s.push('\n');
        s
    }

    /// Sum of phase gross energies.
    pub fn phase_total_kwh(&self) -> f64 {
        self.phases.iter().map(|p| p.gross_kwh).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe(label: &str, kwh: f64) -> PhaseEnergy {
        PhaseEnergy {
            phase: Phase { label: label.into(), start_ms: 0, end_ms: 0 },
            gross: EnergyQuantity::from_kwh(kwh).unwrap(),
            net_of_idle: None,
            duration_s: 0.0,
        }
    }

    #[test]
    fn training_and_prediction_make_a_run() {
        let phases = [pe("training", 0.41), pe("prediction", 0.04)];
        let run = run_energy(&phases, &["training", "prediction"]).unwrap();
        assert!((run.total.kwh() - 0.45).abs() < 1e-15);
        let ratio = run.ratio("training", "prediction").unwrap();
        assert!((ratio - 10.25).abs() < 1e-12);
        assert_eq!(ratio.round(), 10.0);
    }

    #[test]
    fn single_phase_run() {
        let run = run_energy(&[pe("training", 0.3)], &["training"]).unwrap();
        assert_eq!(run.total.kwh(), 0.3);
    }

    #[test]
    fn repeated_labels_accumulate() {
        let run = run_energy(&[pe("training", 0.25), pe("training", 0.5)], &["training"]).unwrap();
        assert_eq!(run.total.kwh(), 0.75);
    }

    #[test]
    fn missing_label_is_lookup_error() {
        assert!(matches!(
            run_energy(&[pe("training", 0.3)], &["evaluation"]),
            Err(AnalysisError::UnknownLabel(l)) if l == "evaluation"
        ));
    }

    #[test]
    fn energy_quantity_rejects_negative_and_nan() {
        assert!(EnergyQuantity::from_kwh(-0.1).is_err());
        assert!(EnergyQuantity::from_kwh(f64::NAN).is_err());
        assert_eq!(EnergyQuantity::from_wh(1500.0).unwrap().kwh(), 1.5);
        assert_eq!(EnergyQuantity::from_kwh(150.0).unwrap().to_string(), "150 kWh");
    }
}
