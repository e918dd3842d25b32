//! The 19-question documentation checklist, bundled as versioned data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{EnergyQuantity, SessionAnalysis};
use crate::carbon::CarbonReport;
use crate::format::{grouped_sig, sig};

const CHECKLIST_V1: &str = include_str!("../../reference/checklist_v1.json");

pub const CHECKLIST_LEN: usize = 19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChecklistQuestion {
    pub index: u8,
    pub question: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChecklistData {
    pub version: u32,
    pub title: String,
    pub items: Vec<ChecklistQuestion>,
}

impl ChecklistData {
    pub fn bundled() -> Self {
        let data: Self = serde_json::from_str(CHECKLIST_V1).expect("bundled checklist parses");
        debug_assert!(data.is_complete());
        data
    }

    /// Indices are exactly 1..=19 in order.
    pub fn is_complete(&self) -> bool {
        self.items.len() == CHECKLIST_LEN && self.items.iter().enumerate().all(|(i, q)| q.index as usize == i + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChecklistStatus {
    Answered,
    Unanswered,
    NotApplicable { justification: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChecklistItem {
    pub index: u8,
    pub question: String,
    pub answer: Option<String>,
    #[serde(flatten)]
    pub status: ChecklistStatus,
}

impl ChecklistItem {
    fn answered(q: &ChecklistQuestion, answer: String) -> Self {
        Self { index: q.index, question: q.question.clone(), answer: Some(answer), status: ChecklistStatus::Answered }
    }

    fn unanswered(q: &ChecklistQuestion) -> Self {
        Self { index: q.index, question: q.question.clone(), answer: None, status: ChecklistStatus::Unanswered }
    }

    pub fn is_answered(&self) -> bool {
        self.status == ChecklistStatus::Answered
    }
}

/// Answers what the measured and computed data can answer and leaves the
/// rest open.
///
/// Session annotations take precedence: `checklist.N` supplies an answer for
/// item N and `checklist.N.na` marks it not applicable with the value as
/// justification. Annotations `environment`, `location`, `hardware` and
/// `energy_mix` feed items 1, 3 and 4.
pub fn build_checklist(
    annotations: &BTreeMap<String, String>,
    analysis: Option<&SessionAnalysis>,
    carbon: Option<&CarbonReport>,
) -> Vec<ChecklistItem> {
    let data = ChecklistData::bundled();
    data.items
        .iter()
        .map(|q| {
            let na = annotations.get(&format!("checklist.{}.na", q.index)).map(|s| s.trim()).filter(|s| !s.is_empty());
            if let Some(why) = na {
                return ChecklistItem {
                    index: q.index,
                    question: q.question.clone(),
                    answer: None,
                    status: ChecklistStatus::NotApplicable { justification: why.to_string() },
                };
            }
            let explicit = annotations.get(&format!("checklist.{}", q.index)).filter(|s| !s.trim().is_empty()).cloned();
            match explicit.or_else(|| auto_answer(q.index, annotations, analysis, carbon)) {
                Some(a) => ChecklistItem::answered(q, a),
                None => ChecklistItem::unanswered(q),
            }
        })
        .collect()
}

fn auto_answer(
    index: u8,
    ann: &BTreeMap<String, String>,
    analysis: Option<&SessionAnalysis>,
    carbon: Option<&CarbonReport>,
) -> Option<String> {
    match index {
        1 => join(&[ann.get("environment"), ann.get("location")]),
        3 => {
            let hw = ann.get("hardware").cloned();
            let idle = analysis
                .and_then(|a| a.baseline)
                .map(|b| format!("idle draw {} W (σ {} W)", sig(b.mean_w, 4), sig(b.stddev_w, 3)));
            join(&[hw.as_ref(), idle.as_ref()])
        }
        4 => {
            if let Some(mix) = ann.get("energy_mix") {
                return Some(mix.clone());
            }
            let usages = &carbon?.usages;
            if usages.is_empty() {
                return None;
            }
            Some(
                usages
                    .iter()
                    .map(|u| format!("{} {}: {} gCO₂e/kWh ({})", u.region, u.year, sig(u.gco2e_per_kwh, 6), u.source))
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        }
        9 => {
            let a = analysis?;
            if a.phases.is_empty() {
                return None;
            }
            let mut by_label: BTreeMap<&str, f64> = BTreeMap::new();
            for p in &a.phases {
                *by_label.entry(&p.label).or_default() += p.duration_s;
            }
            Some(by_label.iter().map(|(l, s)| format!("{l}: {} s", grouped_sig(*s, 6))).collect::<Vec<_>>().join("; "))
        }
        11 => {
            let kwh = match (analysis, carbon) {
                (Some(a), _) => a.total_kwh,
                (None, Some(c)) if !c.usages.is_empty() => c.total_kwh,
                _ => return None,
            };
            Some(kwh_text(kwh))
        }
        12 => {
            let c = carbon?;
            if c.usages.is_empty() {
                return None;
            }
            Some(c.total_g.to_string())
        }
        14 => {
            let p = carbon?.offset?;
            Some(format!(
                "{} trees sequestering {} kg CO₂ per year each need {} months",
                p.trees,
                sig(p.tree_kg_per_year, 4),
                sig(p.months, 4)
            ))
        }
        15 => {
            let a = analysis?;
            Some(format!(
                "cumulative energy counter sampled every {} ms; energies reported per phase ({} phases)",
                a.interval_ms,
                a.phases.len()
            ))
        }
        _ => None,
    }
}

fn kwh_text(kwh: f64) -> String {
    match EnergyQuantity::from_kwh(kwh) {
        Ok(_) => format!("{} kWh", grouped_sig(kwh, 6)),
        Err(_) => format!("{kwh} kWh"),
    }
}

fn join(parts: &[Option<&String>]) -> Option<String> {
    let present: Vec<&str> = parts.iter().flatten().map(|s| s.as_str()).collect();
    if present.is_empty() {
        None
    } else {
        Some(present.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{PhaseRecord, StatsBlock};
    use crate::carbon::{offset_plan, CarbonMass, EmissionFactor, UsageLine};

    fn analysis_with_total(kwh: f64) -> SessionAnalysis {
        SessionAnalysis {
            session_id: "s".into(),
            interval_ms: 500,
            offset_corrected: true,
            baseline: None,
            sample_count: 10,
            epochs: 1,
            total_kwh: kwh,
            phases: vec![PhaseRecord {
                label: "training".into(),
                start_ms: 0,
                end_ms: 4000,
                gross_kwh: kwh,
                net_kwh: None,
                duration_s: 4.0,
            }],
            stats: StatsBlock { all_phases: None, by_label: BTreeMap::new() },
            warnings: vec![],
        }
    }

    #[test]
    fn bundled_data_is_complete() {
        let d = ChecklistData::bundled();
        assert!(d.is_complete());
        assert_eq!(d.version, 1);
        assert!(d.items[0].question.starts_with("Which computing environment and location"));
    }

    #[test]
    fn empty_inputs_leave_everything_open() {
        let items = build_checklist(&BTreeMap::new(), None, None);
        assert_eq!(items.len(), 19);
        assert!(items.iter().all(|i| i.status == ChecklistStatus::Unanswered && i.answer.is_none()));
        assert_eq!(items.iter().map(|i| i.index as usize).collect::<Vec<_>>(), (1..=19).collect::<Vec<_>>());
    }

    #[test]
    fn total_energy_answers_item_11() {
        let a = analysis_with_total(150.0);
        let items = build_checklist(&BTreeMap::new(), Some(&a), None);
        assert_eq!(items[10].answer.as_deref(), Some("150 kWh"));
        assert!(items[10].is_answered());
        assert_eq!(items[8].answer.as_deref(), Some("training: 4 s"));
    }

    #[test]
    fn carbon_answers_items_4_12_14() {
        let f = EmissionFactor::new("world", 2023, 481.0, "grid average").unwrap();
        let mut c = CarbonReport::from_usages(vec![UsageLine::new(EnergyQuantity::from_kwh(6048.0).unwrap(), &f)]);
        c.offset = Some(offset_plan(CarbonMass::from_kg(446.5).unwrap(), 42, 10.0).unwrap());
        let items = build_checklist(&BTreeMap::new(), None, Some(&c));
        assert_eq!(items[11].answer.as_deref(), Some("2,909 kgCO₂e"));
        assert_eq!(items[10].answer.as_deref(), Some("6,048 kWh"));
        let offset = items[13].answer.as_deref().unwrap();
        assert!(offset.contains("42 trees") && offset.contains("12.76 months"), "{offset}");
        assert!(items[3].answer.as_deref().unwrap().contains("481"));
    }

    #[test]
    fn annotations_override_and_mark_not_applicable() {
        let mut ann = BTreeMap::new();
        ann.insert("checklist.11".to_string(), "about 150 kWh".to_string());
        ann.insert("checklist.2.na".to_string(), "shared cluster, no purchases".to_string());
        ann.insert("checklist.5.na".to_string(), "   ".to_string());
        ann.insert("location".to_string(), "Gothenburg".to_string());
        let items = build_checklist(&ann, Some(&analysis_with_total(3.0)), None);
        assert_eq!(items[10].answer.as_deref(), Some("about 150 kWh"));
        assert_eq!(
            items[1].status,
            ChecklistStatus::NotApplicable { justification: "shared cluster, no purchases".into() }
        );
        assert_eq!(items[4].status, ChecklistStatus::Unanswered);
        assert_eq!(items[0].answer.as_deref(), Some("Gothenburg"));
    }

    #[test]
    fn status_serializes_flat() {
        let items = build_checklist(&BTreeMap::new(), Some(&analysis_with_total(1.0)), None);
        let v = serde_json::to_value(&items[10]).unwrap();
        assert_eq!(v["status"], "answered");
        let back: ChecklistItem = serde_json::from_value(v).unwrap();
        assert_eq!(back, items[10]);
    }
}
