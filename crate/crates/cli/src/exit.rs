//! Stable exit codes: 0 success, 2 validation, 3 transport, 4 data lookup.

use wattline_core::analysis::AnalysisError;
use wattline_core::carbon::CarbonError;
use wattline_core::footprint::FootprintError;
use wattline_core::report::ReportError;
use wattline_core::session::SessionError;
use wattline_core::telemetry::TelemetryError;

pub const VALIDATION: u8 = 2;
pub const TRANSPORT: u8 = 3;
pub const LOOKUP: u8 = 4;

/// A failure the command reports itself, with an explicit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: VALIDATION, message: message.into() }
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self { code: TRANSPORT, message: message.into() }
    }
}

fn telemetry_code(e: &TelemetryError) -> u8 {
    match e {
        TelemetryError::Transport { .. } | TelemetryError::Bind { .. } => TRANSPORT,
        _ => VALIDATION,
    }
}

fn carbon_code(e: &CarbonError) -> u8 {
    match e {
        CarbonError::MissingFactor { .. } => LOOKUP,
        _ => VALIDATION,
    }
}

/// Code for the first error in the chain that has a defined meaning.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<TelemetryError>() {
            return telemetry_code(e);
        }
        if let Some(e) = cause.downcast_ref::<CarbonError>() {
            return carbon_code(e);
        }
        if let Some(FootprintError::Carbon(e)) = cause.downcast_ref::<FootprintError>() {
            return carbon_code(e);
        }
        if cause.is::<SessionError>()
            || cause.is::<AnalysisError>()
            || cause.is::<FootprintError>()
            || cause.is::<ReportError>()
        {
            return VALIDATION;
        }
    }
    VALIDATION
}

/// The error chain joined with `: `, skipping causes whose text the
/// previous message already contains.
pub fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !prev.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        prev = text;
    }
    out
}
