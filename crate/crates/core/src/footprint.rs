//! Multiplicative extrapolation from one measured run to a pipeline, a
//! paper (pipeline × overhead) and an event (paper × submissions).

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisError, EnergyQuantity};
use crate::carbon::published::{self, Deviation};
use crate::carbon::{convert, CarbonError, CarbonMass, EmissionFactor};

/// Median overhead multiplier from practitioner interviews: prototyping,
/// debugging and re-runs on top of one clean pipeline execution.
pub const DEFAULT_OVERHEAD: f64 = 40.0;

#[derive(Debug, thiserror::Error)]
pub enum FootprintError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Energy(#[from] AnalysisError),
    #[error(transparent)]
    Carbon(#[from] CarbonError),
    #[error("malformed estimate: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineShape {
    pub n_models: u64,
    pub n_datasets: u64,
    pub n_configs: u64,
    pub per_run: EnergyQuantity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverheadFactor(f64);

impl OverheadFactor {
    pub fn new(multiplier: f64) -> Result<Self, FootprintError> {
        if multiplier.is_finite() && multiplier >= 1.0 {
            Ok(Self(multiplier))
        } else {
            Err(FootprintError::Precondition(format!("overhead multiplier must be >= 1, got {multiplier}")))
        }
    }

    pub fn multiplier(self) -> f64 {
        self.0
    }
}

impl Default for OverheadFactor {
    fn default() -> Self {
        Self(DEFAULT_OVERHEAD)
    }
}

/// `models × datasets × configs × per-run energy`.
pub fn pipeline_energy(shape: &PipelineShape) -> EnergyQuantity {
    let runs = shape.n_models as f64 * shape.n_datasets as f64 * shape.n_configs as f64;
    shape.per_run.scaled(runs).expect("product of nonnegative finite values")
}

pub fn paper_energy(pipeline: EnergyQuantity, overhead: OverheadFactor) -> EnergyQuantity {
    pipeline.scaled(overhead.multiplier()).expect("product of nonnegative finite values")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventFootprint {
    pub per_paper: CarbonMass,
    pub event: CarbonMass,
}

pub fn event_footprint(paper: EnergyQuantity, factor: &EmissionFactor, submissions: u64) -> Result<EventFootprint, FootprintError> {
    if submissions == 0 {
        return Err(FootprintError::Precondition("submissions must be >= 1".into()));
    }
    let per_paper = convert(paper, factor);
    Ok(EventFootprint { per_paper, event: per_paper.scaled(submissions as f64)? })
}

/// One named input of an estimate and where it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub name: String,
    pub value: f64,
    pub source: String,
}

/// Contents of `estimate.json`. Values are kept at full precision; rounding
/// happens only when rendering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FootprintEstimate {
    pub pipeline_kwh: EnergyQuantity,
    pub paper_kwh: EnergyQuantity,
    pub per_paper_g: CarbonMass,
    pub event_g: CarbonMass,
    pub assumptions: Vec<Assumption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<Deviation>,
}

impl FootprintEstimate {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("estimate serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FootprintError> {
        serde_json::from_str(text).map_err(|e| FootprintError::Parse(e.to_string()))
    }

    pub fn assumption(&self, name: &str) -> Option<f64> {
        self.assumptions.iter().find(|a| a.name == name).map(|a| a.value)
    }
}

/// Every knob of the extrapolation chain with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateInputs {
    pub shape: PipelineShape,
    pub shape_source: String,
    pub per_run_source: String,
    pub overhead: OverheadFactor,
    pub overhead_source: String,
    pub factor: EmissionFactor,
    pub submissions: u64,
    pub submissions_source: String,
}

impl EstimateInputs {
    pub fn new(shape: PipelineShape, factor: EmissionFactor, submissions: u64) -> Self {
        Self {
            shape,
            shape_source: "caller".into(),
            per_run_source: "caller".into(),
            overhead: OverheadFactor::default(),
            overhead_source: "default: median overhead from practitioner interviews".into(),
            factor,
            submissions,
            submissions_source: "caller".into(),
        }
    }
}

/// Runs the whole chain and records the assumptions ledger.
pub fn estimate(inputs: &EstimateInputs) -> Result<FootprintEstimate, FootprintError> {
    let pipeline = pipeline_energy(&inputs.shape);
    let paper = paper_energy(pipeline, inputs.overhead);
    let fp = event_footprint(paper, &inputs.factor, inputs.submissions)?;
    let a = |name: &str, value: f64, source: &str| Assumption { name: name.into(), value, source: source.into() };
    let f = &inputs.factor;
    let assumptions = vec![
        a("n_models", inputs.shape.n_models as f64, &inputs.shape_source),
        a("n_datasets", inputs.shape.n_datasets as f64, &inputs.shape_source),
        a("n_configs", inputs.shape.n_configs as f64, &inputs.shape_source),
        a("per_run_kwh", inputs.shape.per_run.kwh(), &inputs.per_run_source),
        a("overhead", inputs.overhead.multiplier(), &inputs.overhead_source),
        a("gco2e_per_kwh", f.gco2e_per_kwh, &format!("{} {}: {}", f.region, f.year, f.source)),
        a("submissions", inputs.submissions as f64, &inputs.submissions_source),
    ];
    let deviations = published::check_event_mass(paper.kwh(), f.gco2e_per_kwh, inputs.submissions, fp.event)
        .into_iter()
        .collect();
    Ok(FootprintEstimate {
        pipeline_kwh: pipeline,
        paper_kwh: paper,
        per_paper_g: fp.per_paper,
        event_g: fp.event,
        assumptions,
        deviations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub overhead: f64,
    pub region: String,
    pub gco2e_per_kwh: f64,
    pub estimate: FootprintEstimate,
}

/// Estimates over every (overhead, factor) pair, ordered by event mass.
/// Ties keep overhead-major input order.
pub fn sensitivity(
    base: &EstimateInputs,
    overheads: &[f64],
    factors: &[EmissionFactor],
) -> Result<Vec<SensitivityRow>, FootprintError> {
    if overheads.is_empty() || factors.is_empty() {
        return Err(FootprintError::Precondition("sensitivity needs at least one overhead and one factor".into()));
    }
    let mut rows = Vec::with_capacity(overheads.len() * factors.len());
    for &o in overheads {
        for f in factors {
            let inputs = EstimateInputs {
                overhead: OverheadFactor::new(o)?,
                overhead_source: "sensitivity range".into(),
                factor: f.clone(),
                ..base.clone()
            };
            rows.push(SensitivityRow {
                overhead: o,
                region: f.region.clone(),
                gco2e_per_kwh: f.gco2e_per_kwh,
                estimate: estimate(&inputs)?,
            });
        }
    }
    rows.sort_by(|a, b| a.estimate.event_g.grams().total_cmp(&b.estimate.event_g.grams()));
    Ok(rows)
}
