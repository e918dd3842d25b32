//! Energy to CO₂-equivalent conversion with a (region, year) factor table,
//! regional comparisons, human-scale equivalents, offset plans and
//! generation-technology context.

mod factors;
mod lifecycle;
pub mod published;

use serde::{Deserialize, Serialize};

use crate::analysis::EnergyQuantity;
use crate::format::{grouped, sig};

pub use factors::{EmissionFactor, FactorTable};
pub use lifecycle::{lifecycle_context, LifecycleContext, LifecycleEntry, LifecycleTable};
pub use published::Deviation;

#[derive(Debug, thiserror::Error)]
pub enum CarbonError {
    #[error("no emission factor for region `{region}` year {year}; available: {}", available.join(", "))]
    MissingFactor { region: String, year: i32, available: Vec<String> },
    #[error("invalid emission factor: {0}")]
    InvalidFactor(String),
    #[error("invalid table row {row}: {reason}")]
    Table { row: usize, reason: String },
    #[error("invalid mass {0} g")]
    InvalidMass(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// CO₂-equivalent mass, stored in grams.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CarbonMass {
    grams: f64,
}

impl CarbonMass {
    pub const ZERO: Self = Self { grams: 0.0 };

    pub fn from_grams(grams: f64) -> Result<Self, CarbonError> {
        if grams.is_finite() && grams >= 0.0 {
            Ok(Self { grams })
        } else {
            Err(CarbonError::InvalidMass(grams))
        }
    }

    pub fn from_kg(kg: f64) -> Result<Self, CarbonError> {
        Self::from_grams(kg * 1e3)
    }

    pub fn grams(self) -> f64 {
        self.grams
    }

    pub fn kg(self) -> f64 {
        self.grams / 1e3
    }

    pub fn tonnes(self) -> f64 {
        self.grams / 1e6
    }

    pub fn scaled(self, factor: f64) -> Result<Self, CarbonError> {
        Self::from_grams(self.grams * factor)
    }
}

impl std::ops::Add for CarbonMass {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self { grams: self.grams + rhs.grams }
    }
}

impl std::iter::Sum for CarbonMass {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

/// Below 1 kg in grams, below 10 t in kilograms, tonnes above that.
impl std::fmt::Display for CarbonMass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let g = self.grams;
        if g < 1e3 {
            write!(f, "{} gCO₂e", sig(g, 4))
        } else if g < 1e7 {
            let kg = self.kg();
            let decimals = if kg >= 1000.0 { 0 } else { 1 };
            write!(f, "{} kgCO₂e", grouped(kg, decimals))
        } else {
            write!(f, "{} tCO₂e", grouped(self.tonnes(), 1))
        }
    }
}

/// `kwh × gCO₂e/kWh`.
pub fn convert(energy: EnergyQuantity, factor: &EmissionFactor) -> CarbonMass {
    CarbonMass { grams: energy.kwh() * factor.gco2e_per_kwh }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMass {
    pub region: String,
    pub year: i32,
    pub gco2e_per_kwh: f64,
    pub mass_g: CarbonMass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionalWhatIf {
    pub energy_kwh: f64,
    pub regions: Vec<RegionMass>,
    /// Largest over smallest mass.
    pub max_min_ratio: f64,
}

/// The same energy converted under each factor.
pub fn regional_whatif(energy: EnergyQuantity, factors: &[EmissionFactor]) -> Result<RegionalWhatIf, CarbonError> {
    if factors.is_empty() {
        return Err(CarbonError::Precondition("what-if needs at least one factor".into()));
    }
    let regions: Vec<_> = factors
        .iter()
        .map(|f| RegionMass {
            region: f.region.clone(),
            year: f.year,
            gco2e_per_kwh: f.gco2e_per_kwh,
            mass_g: convert(energy, f),
        })
        .collect();
    let lo = factors.iter().map(|f| f.gco2e_per_kwh).fold(f64::INFINITY, f64::min);
    let hi = factors.iter().map(|f| f.gco2e_per_kwh).fold(0.0, f64::max);
    Ok(RegionalWhatIf { energy_kwh: energy.kwh(), regions, max_min_ratio: hi / lo })
}

/// Rates for expressing a mass in relatable units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceFactors {
    /// kgCO₂e of one New York to Melbourne passenger flight.
    pub flight_kg: f64,
    /// kgCO₂ one tree sequesters per year.
    pub tree_kg_per_year: f64,
    pub source: String,
}

/// Event-scale reference mass the default rates are derived from, in kg.
const REFERENCE_EVENT_KG: f64 = 782_544.672;

impl Default for EquivalenceFactors {
    /// Rates back-computed from a published pairing: 782.5 tCO₂e stated as
    /// 338 NYC–Melbourne flights and 71,100 tree-years.
    fn default() -> Self {
        Self {
            flight_kg: REFERENCE_EVENT_KG / 338.0,
            tree_kg_per_year: REFERENCE_EVENT_KG / 71_100.0,
            source: "back-computed: 782,544.672 kg = 338 flights = 71,100 tree-years".into(),
        }
    }
}

impl EquivalenceFactors {
    pub fn validate(&self) -> Result<(), CarbonError> {
        if self.flight_kg > 0.0 && self.tree_kg_per_year > 0.0 && self.flight_kg.is_finite() && self.tree_kg_per_year.is_finite() {
            Ok(())
        } else {
            Err(CarbonError::Precondition("equivalence rates must be positive".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equivalents {
    pub flights: f64,
    pub tree_years: f64,
}

pub fn equivalents(mass: CarbonMass, factors: &EquivalenceFactors) -> Equivalents {
    Equivalents {
        flights: mass.grams() / (factors.flight_kg * 1e3),
        tree_years: mass.grams() / (factors.tree_kg_per_year * 1e3),
    }
}

/// Trees sequestering `tree_kg_per_year` each, and how long they need.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetPlan {
    pub trees: u32,
    pub tree_kg_per_year: f64,
    pub months: f64,
}

/// Default sequestration rate per tree used for offset plans, kg/year.
pub const DEFAULT_TREE_KG_PER_YEAR: f64 = 10.0;

pub fn offset_plan(mass: CarbonMass, trees: u32, tree_kg_per_year: f64) -> Result<OffsetPlan, CarbonError> {
    if trees == 0 {
        return Err(CarbonError::Precondition("offset plan needs at least one tree".into()));
    }
    if !(tree_kg_per_year > 0.0 && tree_kg_per_year.is_finite()) {
        return Err(CarbonError::Precondition("sequestration rate must be positive".into()));
    }
    let months = 12.0 * mass.grams() / (trees as f64 * tree_kg_per_year * 1e3);
    Ok(OffsetPlan { trees, tree_kg_per_year, months })
}

/// `later / earlier`.
pub fn era_ratio(earlier: CarbonMass, later: CarbonMass) -> Result<f64, CarbonError> {
    if earlier.grams() <= 0.0 {
        return Err(CarbonError::Precondition("era ratio needs a positive earlier mass".into()));
    }
    Ok(later.grams() / earlier.grams())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EraComparison {
    pub earlier_g: CarbonMass,
    pub later_g: CarbonMass,
    pub ratio: f64,
}

/// Energy drawn in one place, converted with that place's factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UsageLine {
    pub kwh: f64,
    pub region: String,
    pub year: i32,
    pub gco2e_per_kwh: f64,
    pub source: String,
    pub mass_g: CarbonMass,
}

impl UsageLine {
    pub fn new(energy: EnergyQuantity, factor: &EmissionFactor) -> Self {
        Self {
            kwh: energy.kwh(),
            region: factor.region.clone(),
            year: factor.year,
            gco2e_per_kwh: factor.gco2e_per_kwh,
            source: factor.source.clone(),
            mass_g: convert(energy, factor),
        }
    }
}

/// Everything the `carbon` command computes; written as `carbon.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CarbonReport {
    pub usages: Vec<UsageLine>,
    pub total_kwh: f64,
    pub total_g: CarbonMass,
    pub whatif: Option<RegionalWhatIf>,
    pub equivalence_factors: Option<EquivalenceFactors>,
    pub equivalents: Option<Equivalents>,
    pub offset: Option<OffsetPlan>,
    pub era: Option<EraComparison>,
    pub lifecycle: Option<LifecycleContext>,
    #[serde(default)]
    pub deviations: Vec<Deviation>,
}

impl CarbonReport {
    pub fn from_usages(usages: Vec<UsageLine>) -> Self {
        Self {
            total_kwh: usages.iter().map(|u| u.kwh).sum(),
            total_g: usages.iter().map(|u| u.mass_g).sum(),
            usages,
            ..Self::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("carbon report serializes");
        s.push('\n');
        s
    }
}
