use std::io::Read;

use serde::{Deserialize, Serialize};

use super::CarbonError;

const BUNDLED_LIFECYCLE: &str = include_str!("../../reference/lifecycle.csv");

/// Life-cycle emissions of one generation technology, gCO₂e/kWh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifecycleEntry {
    pub technology: String,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifecycleTable {
    pub entries: Vec<LifecycleEntry>,
}

impl LifecycleTable {
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_LIFECYCLE.as_bytes()).expect("bundled lifecycle table is valid")
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, CarbonError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for (i, rec) in rdr.deserialize::<LifecycleEntry>().enumerate() {
            let e = rec.map_err(|e| CarbonError::Table { row: i + 1, reason: e.to_string() })?;
            if !(e.min <= e.median && e.median <= e.max) {
                return Err(CarbonError::Table { row: i + 1, reason: format!("{}: need min <= median <= max", e.technology) });
            }
            entries.push(e);
        }
        Ok(Self { entries })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifecycleContext {
    pub factor: f64,
    /// Technologies whose [min, max] range contains the factor, closest
    /// median first.
    pub brackets: Vec<LifecycleEntry>,
    pub highest_median: LifecycleEntry,
    pub lowest_median: LifecycleEntry,
    /// Highest median over lowest median.
    pub dirtiest_to_cleanest: f64,
}

pub fn lifecycle_context(factor: f64, table: &LifecycleTable) -> Result<LifecycleContext, CarbonError> {
    let first = table
        .entries
        .first()
        .ok_or_else(|| CarbonError::Precondition("lifecycle table is empty".into()))?;
    let mut highest = first;
    let mut lowest = first;
    for e in &table.entries {
        if e.median > highest.median {
            highest = e;
        }
        if e.median < lowest.median {
            lowest = e;
        }
    }
    let mut brackets: Vec<LifecycleEntry> =
        table.entries.iter().filter(|e| e.min <= factor && factor <= e.max).cloned().collect();
    brackets.sort_by(|a, b| (a.median - factor).abs().total_cmp(&(b.median - factor).abs()));
    Ok(LifecycleContext {
        factor,
        brackets,
        dirtiest_to_cleanest: highest.median / lowest.median,
        highest_median: highest.clone(),
        lowest_median: lowest.clone(),
    })
}
