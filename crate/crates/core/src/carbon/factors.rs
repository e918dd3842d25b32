use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CarbonError;

const BUNDLED_FACTORS: &str = include_str!("../../reference/factors.csv");

/// Grams of CO₂e per kWh generated in `region` during `year`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionFactor {
    pub region: String,
    pub year: i32,
    pub gco2e_per_kwh: f64,
    pub source: String,
}

impl EmissionFactor {
    pub fn new(region: impl Into<String>, year: i32, gco2e_per_kwh: f64, source: impl Into<String>) -> Result<Self, CarbonError> {
        let f = Self { region: region.into(), year, gco2e_per_kwh, source: source.into() };
        f.validate()?;
        Ok(f)
    }

    /// A factor given directly on the command line rather than looked up.
    pub fn literal(gco2e_per_kwh: f64) -> Result<Self, CarbonError> {
        Self::new("custom", 2023, gco2e_per_kwh, "user-supplied factor")
    }

    pub fn validate(&self) -> Result<(), CarbonError> {
        if !(self.gco2e_per_kwh.is_finite() && self.gco2e_per_kwh > 0.0) {
            return Err(CarbonError::InvalidFactor(format!("{}: gco2e_per_kwh must be > 0", self.region)));
        }
        if !(1990..=2100).contains(&self.year) {
            return Err(CarbonError::InvalidFactor(format!("{}: year {} outside 1990..=2100", self.region, self.year)));
        }
        if self.region.trim().is_empty() {
            return Err(CarbonError::InvalidFactor("empty region".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    rows: Vec<EmissionFactor>,
}

impl FactorTable {
    /// The default table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_FACTORS.as_bytes()).expect("bundled factor table is valid")
    }

    pub fn from_rows(rows: Vec<EmissionFactor>) -> Result<Self, CarbonError> {
        for (i, r) in rows.iter().enumerate() {
            r.validate().map_err(|e| CarbonError::Table { row: i + 1, reason: e.to_string() })?;
        }
        Ok(Self { rows })
    }

    /// Parses `region,year,gco2e_per_kwh,source`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, CarbonError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<EmissionFactor>().enumerate() {
            let row = rec.map_err(|e| CarbonError::Table { row: i + 1, reason: e.to_string() })?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }

    pub fn from_path(path: &Path) -> Result<Self, CarbonError> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("factor row serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn rows(&self) -> &[EmissionFactor] {
        &self.rows
    }

    /// Case-insensitive region match.
    pub fn lookup(&self, region: &str, year: i32) -> Result<&EmissionFactor, CarbonError> {
        self.rows
            .iter()
            .find(|r| r.region.eq_ignore_ascii_case(region) && r.year == year)
            .ok_or_else(|| CarbonError::MissingFactor {
                region: region.to_string(),
                year,
                available: self.rows.iter().map(|r| format!("{}/{}", r.region, r.year)).collect(),
            })
    }
}
