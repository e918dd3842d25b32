//! Energy metering of experiment phases through a smart plug, conversion to
//! CO₂-equivalents, and extrapolation to project- and event-scale footprints.

pub mod analysis;
pub mod carbon;
pub mod clock;
pub mod footprint;
pub mod format;
pub mod reference;
pub mod report;
pub mod session;
pub mod telemetry;
