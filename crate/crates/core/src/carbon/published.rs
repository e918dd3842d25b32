//! Known published figures for the reference scenarios. When a computation
//! reproduces one of those scenarios and lands away from the published
//! number, a [`Deviation`] is attached to the output instead of silently
//! disagreeing.

use serde::{Deserialize, Serialize};

use super::{CarbonMass, OffsetPlan, RegionalWhatIf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub quantity: String,
    pub computed: f64,
    pub published: f64,
    pub unit: String,
    pub note: String,
}

/// Relative difference below which a published figure counts as a rounding
/// of the computed one.
const ROUNDING_TOLERANCE: f64 = 1e-3;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// (per-paper kWh, gCO₂e/kWh, submissions, published event tonnes)
const EVENT_FIGURES: [(f64, f64, u64, f64); 3] = [
    (6048.0, 481.0, 269, 782.5),
    (6048.0, 45.0, 269, 74.0),
    (6048.0, 535.0, 269, 875.6),
];

/// Flags an event-scale mass that differs from the published figure for the
/// same inputs by more than rounding.
pub fn check_event_mass(paper_kwh: f64, gco2e_per_kwh: f64, submissions: u64, event: CarbonMass) -> Option<Deviation> {
    let (.., published) = EVENT_FIGURES.iter().find(|(kwh, g, subs, _)| {
        close(*kwh, paper_kwh, 1e-9) && close(*g, gco2e_per_kwh, 1e-9) && *subs == submissions
    })?;
    let computed = event.tonnes();
    if close(computed, *published, ROUNDING_TOLERANCE) {
        return None;
    }
    Some(Deviation {
        quantity: format!("event mass at {gco2e_per_kwh} gCO₂e/kWh"),
        computed,
        published: *published,
        unit: "tCO₂e".into(),
        note: format!(
            "{paper_kwh} kWh × {gco2e_per_kwh} g/kWh × {submissions} = {:.1} t; the published figure ({published} t) is not reproducible from the stated inputs",
            computed
        ),
    })
}

/// Event-scale checks for every region of a what-if whose energy equals a
/// known per-paper × submissions product.
pub fn check_whatif(whatif: &RegionalWhatIf) -> Vec<Deviation> {
    let mut out = Vec::new();
    for r in &whatif.regions {
        for (kwh, g, subs, _) in EVENT_FIGURES {
            if close(kwh * subs as f64, whatif.energy_kwh, 1e-9) && close(g, r.gco2e_per_kwh, 1e-9) {
                out.extend(check_event_mass(kwh, g, subs, r.mass_g));
            }
        }
    }
    out
}

/// Flags the published 42-tree offset duration, which the stated rate does
/// not support.
pub fn check_offset(mass: CarbonMass, plan: &OffsetPlan) -> Option<Deviation> {
    let matches = close(mass.kg(), 446.5, 1e-6) && plan.trees == 42 && close(plan.tree_kg_per_year, 10.0, 1e-9);
    if !matches || close(plan.months, 11.0, ROUNDING_TOLERANCE) {
        return None;
    }
    Some(Deviation {
        quantity: "offset duration".into(),
        computed: plan.months,
        published: 11.0,
        unit: "months".into(),
        note: format!(
            "12 × 446.5 kg / (42 trees × 10 kg/yr) = {:.2} months; the published duration of 11 months is not reproducible",
            plan.months
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carbon::offset_plan;

    #[test]
    fn world_event_is_only_rounding() {
        let m = CarbonMass::from_kg(782_544.672).unwrap();
        assert!(check_event_mass(6048.0, 481.0, 269, m).is_none());
    }

    #[test]
    fn sweden_event_is_flagged() {
        let m = CarbonMass::from_grams(6048.0 * 45.0 * 269.0).unwrap();
        let d = check_event_mass(6048.0, 45.0, 269, m).unwrap();
        assert_eq!(d.published, 74.0);
        assert!((d.computed - 73.21104).abs() < 1e-9);
    }

    #[test]
    fn asia_event_is_flagged() {
        let m = CarbonMass::from_grams(6048.0 * 535.0 * 269.0).unwrap();
        let d = check_event_mass(6048.0, 535.0, 269, m).unwrap();
        assert!((d.computed - 870.4).abs() < 0.05);
    }

    #[test]
    fn unrelated_inputs_are_not_checked() {
        let m = CarbonMass::from_grams(1.0).unwrap();
        assert!(check_event_mass(10.0, 45.0, 269, m).is_none());
    }

    #[test]
    fn offset_duration_flagged() {
        let mass = CarbonMass::from_kg(446.5).unwrap();
        let d = check_offset(mass, &offset_plan(mass, 42, 10.0).unwrap()).unwrap();
        assert_eq!(d.published, 11.0);
        assert!((d.computed - 12.76).abs() < 0.01);
        assert!(check_offset(mass, &offset_plan(mass, 40, 10.0).unwrap()).is_none());
    }

    #[test]
    fn whatif_on_event_energy_flags_sweden_only() {
        use crate::carbon::{regional_whatif, EmissionFactor};
        use crate::analysis::EnergyQuantity;
        let f = |r: &str, g| EmissionFactor::new(r, 2023, g, "t").unwrap();
        let e = EnergyQuantity::from_kwh(6048.0 * 269.0).unwrap();
        let w = regional_whatif(e, &[f("world", 481.0), f("sweden", 45.0)]).unwrap();
        let d = check_whatif(&w);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].published, 74.0);
        let small = regional_whatif(EnergyQuantity::from_kwh(1.0).unwrap(), &[f("sweden", 45.0)]).unwrap();
        assert!(check_whatif(&small).is_empty());
    }
}
