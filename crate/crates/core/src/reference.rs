//! Bundled reference tables: per-dataset and per-algorithm energy summaries
//! from a large benchmark, and measured power draw of common machines.

use serde::{Deserialize, Serialize};

use crate::analysis::{EnergyQuantity, EnergyStats};

const PAPER_STATS: &str = include_str!("../reference/paper_stats.csv");
const HARDWARE_POWER: &str = include_str!("../reference/hardware_power.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Dataset,
    Recommender,
}

/// Energy summary of one full pipeline run per configuration, grouped by
/// dataset or by algorithm. Values in kWh, as published (4 decimals).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceStats {
    pub group: String,
    pub kind: GroupKind,
    pub mean_kwh: f64,
    pub median_kwh: f64,
    pub min_kwh: f64,
    pub max_kwh: f64,
}

impl ReferenceStats {
    /// As [`EnergyStats`]; the group size is not published, so `n` is 0.
    pub fn as_stats(&self) -> EnergyStats {
        let q = |x| EnergyQuantity::from_kwh(x).expect("bundled value is valid");
        EnergyStats { mean: q(self.mean_kwh), median: q(self.median_kwh), min: q(self.min_kwh), max: q(self.max_kwh), n: 0 }
    }
}

pub fn reference_stats() -> Vec<ReferenceStats> {
    read(PAPER_STATS)
}

pub fn reference_stats_for(group: &str) -> Option<ReferenceStats> {
    reference_stats().into_iter().find(|r| r.group.eq_ignore_ascii_case(group))
}

/// Idle and peak wall power of one machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwarePower {
    pub machine: String,
    pub year: i32,
    pub idle_w: f64,
    pub idle_sigma_w: f64,
    pub max_w: f64,
}

pub fn hardware_power() -> Vec<HardwarePower> {
    read(HARDWARE_POWER)
}

fn read<T: serde::de::DeserializeOwned>(text: &str) -> Vec<T> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("bundled reference table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_rows_are_ordered() {
        let rows = reference_stats();
        assert_eq!(rows.iter().filter(|r| r.kind == GroupKind::Dataset).count(), 12);
        assert_eq!(rows.iter().filter(|r| r.kind == GroupKind::Recommender).count(), 19);
        for r in &rows {
            assert!(r.min_kwh <= r.median_kwh && r.median_kwh <= r.max_kwh, "{}", r.group);
            assert!(r.min_kwh <= r.mean_kwh && r.mean_kwh <= r.max_kwh, "{}", r.group);
        }
    }

    #[test]
    fn named_rows() {
        let d = reference_stats_for("dgcf^rb").unwrap();
        assert_eq!((d.mean_kwh, d.median_kwh, d.min_kwh, d.max_kwh), (1.4553, 1.2913, 0.0046, 6.5861));
        let y = reference_stats_for("Yelp-2018").unwrap();
        assert_eq!((y.mean_kwh, y.median_kwh, y.min_kwh, y.max_kwh), (1.3649, 0.5943, 0.0302, 6.5861));
        assert!(reference_stats_for("nope").is_none());
    }

    #[test]
    fn hardware_rows() {
        let hw = hardware_power();
        assert_eq!(hw.len(), 5);
        assert_eq!(hw[0].idle_w, 116.0);
        assert_eq!(hw[0].idle_sigma_w, 2.03);
        assert!(hw.iter().all(|h| h.idle_w < h.max_w));
    }
}
