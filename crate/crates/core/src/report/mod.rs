//! Human- and machine-readable reports over an analysis, a carbon
//! computation and a footprint estimate.

mod checklist;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::SessionAnalysis;
use crate::carbon::{CarbonReport, Deviation};
use crate::footprint::FootprintEstimate;

pub use checklist::{build_checklist, ChecklistData, ChecklistItem, ChecklistQuestion, ChecklistStatus, CHECKLIST_LEN};

pub const TOOL_NAME: &str = "wattline";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected md, json or csv)")]
    UnknownFormat(String),
    #[error("incomplete report bundle: {0}")]
    Incomplete(String),
    #[error("malformed report bundle: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

/// SHA-256 of one input artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> Self {
        Self { name: name.into(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub tool_version: String,
    /// Caller-supplied generation time; never read from the wall clock so
    /// that identical inputs render identically.
    pub generated_at_ms: Option<i64>,
    pub checklist_version: u32,
    pub inputs: Vec<InputDigest>,
}

impl ReportMetadata {
    pub fn new(generated_at_ms: Option<i64>, mut inputs: Vec<InputDigest>) -> Self {
        inputs.sort_by(|a, b| a.name.cmp(&b.name));
        Self {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            generated_at_ms,
            checklist_version: ChecklistData::bundled().version,
            inputs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: ReportMetadata,
    pub annotations: BTreeMap<String, String>,
    pub analysis: Option<SessionAnalysis>,
    pub carbon: Option<CarbonReport>,
    pub estimate: Option<FootprintEstimate>,
    pub deviations: Vec<Deviation>,
    pub checklist: Vec<ChecklistItem>,
}

impl ReportBundle {
    /// Collects deviations from the parts and fills in the checklist.
    pub fn new(
        metadata: ReportMetadata,
        annotations: BTreeMap<String, String>,
        analysis: Option<SessionAnalysis>,
        carbon: Option<CarbonReport>,
        estimate: Option<FootprintEstimate>,
    ) -> Self {
        let mut deviations: Vec<Deviation> = Vec::new();
        let found = carbon.iter().flat_map(|c| &c.deviations).chain(estimate.iter().flat_map(|e| &e.deviations));
        for d in found {
            if !deviations.contains(d) {
                deviations.push(d.clone());
            }
        }
        let checklist = build_checklist(&annotations, analysis.as_ref(), carbon.as_ref());
        Self { metadata, annotations, analysis, carbon, estimate, deviations, checklist }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.checklist.len() != CHECKLIST_LEN
            || self.checklist.iter().enumerate().any(|(i, c)| c.index as usize != i + 1)
        {
            return Err(ReportError::Incomplete("checklist must hold items 1..=19 in order".into()));
        }
        for c in &self.checklist {
            if let ChecklistStatus::NotApplicable { justification } = &c.status {
                if justification.trim().is_empty() {
                    return Err(ReportError::Incomplete(format!("item {} is not applicable without justification", c.index)));
                }
            }
        }
        if self.analysis.is_none() && self.carbon.is_none() && self.estimate.is_none() {
            return Err(ReportError::Incomplete("nothing to report: no analysis, carbon or estimate".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))
    }
}

/// Renders a bundle. Output depends only on the bundle.
pub fn render(bundle: &ReportBundle, format: Format) -> Result<String, ReportError> {
    bundle.validate()?;
    Ok(match format {
        Format::Markdown => render::markdown(bundle),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(bundle).expect("bundle serializes");
            s.push('\n');
            s
        }
        Format::Csv => render::csv(bundle),
    })
}

/// [`render`] with the format given by name.
pub fn render_named(bundle: &ReportBundle, format: &str) -> Result<String, ReportError> {
    render(bundle, format.parse()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::EnergyQuantity;
    use crate::carbon::{EmissionFactor, UsageLine};
    use crate::footprint::{estimate, EstimateInputs, PipelineShape};

    fn reference_bundle(factor_g: f64) -> ReportBundle {
        let f = EmissionFactor::new("world", 2023, factor_g, "grid average").unwrap();
        let shape = PipelineShape {
            n_models: 7,
            n_datasets: 3,
            n_configs: 16,
            per_run: EnergyQuantity::from_kwh(0.45).unwrap(),
        };
        let est = estimate(&EstimateInputs::new(shape, f.clone(), 269)).unwrap();
        let carbon = CarbonReport::from_usages(vec![UsageLine::new(est.paper_kwh, &f)]);
        let meta = ReportMetadata::new(Some(0), vec![InputDigest::of("estimate.json", est.to_json().as_bytes())]);
        ReportBundle::new(meta, BTreeMap::new(), None, Some(carbon), Some(est))
    }

    #[test]
    fn digest_is_sha256_hex() {
        let d = InputDigest::of("x", b"abc");
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn format_names() {
        assert_eq!("md".parse::<Format>().unwrap(), Format::Markdown);
        assert_eq!("JSON".parse::<Format>().unwrap(), Format::Json);
        assert!(matches!("pdf".parse::<Format>(), Err(ReportError::UnknownFormat(_))));
        assert!(render_named(&reference_bundle(481.0), "html").is_err());
    }

    #[test]
    fn markdown_carries_reference_figures() {
        let md = render(&reference_bundle(481.0), Format::Markdown).unwrap();
        assert!(md.contains("2,909"), "{md}");
        assert!(md.contains("782.5"), "{md}");
        assert!(md.contains("kWh"));
    }

    #[test]
    fn renders_are_deterministic() {
        let b = reference_bundle(481.0);
        for f in [Format::Markdown, Format::Json, Format::Csv] {
            assert_eq!(render(&b, f).unwrap(), render(&reference_bundle(481.0), f).unwrap());
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let json = render(&reference_bundle(45.0), Format::Json).unwrap();
        let back = ReportBundle::from_json(&json).unwrap();
        assert_eq!(render(&back, Format::Json).unwrap(), json);
    }

    #[test]
    fn deviations_are_collected_once() {
        let b = reference_bundle(45.0);
        assert_eq!(b.deviations.len(), 1);
        assert_eq!(b.deviations[0].published, 74.0);
        let md = render(&b, Format::Markdown).unwrap();
        assert!(md.contains("74"), "{md}");
        assert!(reference_bundle(481.0).deviations.is_empty());
    }

    #[test]
    fn empty_bundle_is_rejected() {
        let b = ReportBundle::new(ReportMetadata::new(None, vec![]), BTreeMap::new(), None, None, None);
        assert!(matches!(render(&b, Format::Json), Err(ReportError::Incomplete(_))));
    }
}
