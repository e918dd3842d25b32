use std::fmt::Write;

use super::{ChecklistItem, ChecklistStatus, ReportBundle};
use crate::analysis::{EnergyStats, SessionAnalysis};
use crate::carbon::CarbonReport;
use crate::footprint::FootprintEstimate;
use crate::format::{grouped_sig, sig};

fn kwh(x: f64) -> String {
    format!("{} kWh", grouped_sig(x, 6))
}

fn times(ratio: f64) -> String {
    format!("≈ {}×", grouped_sig(ratio.round(), 6))
}

pub(super) fn markdown(b: &ReportBundle) -> String {
    let mut out = String::new();
    let m = &b.metadata;
    writeln!(out, "# Energy and carbon report\n").unwrap();
    writeln!(out, "- Tool: {} {}", m.tool, m.tool_version).unwrap();
    match m.generated_at_ms {
        Some(t) => writeln!(out, "- Generated at: {t} ms since the Unix epoch").unwrap(),
        None => writeln!(out, "- Generated at: not recorded").unwrap(),
    }
    writeln!(out, "- Checklist version: {}", m.checklist_version).unwrap();
    if !m.inputs.is_empty() {
        writeln!(out, "\n## Inputs\n\n| File | SHA-256 |\n|---|---|").unwrap();
        for d in &m.inputs {
            writeln!(out, "| {} | `{}` |", d.name, d.sha256).unwrap();
        }
    }
    if !b.annotations.is_empty() {
        writeln!(out, "\n## Annotations\n").unwrap();
        for (k, v) in &b.annotations {
            writeln!(out, "- {k}: {v}").unwrap();
        }
    }
    if let Some(a) = &b.analysis {
        session_section(&mut out, a);
    }
    if let Some(c) = &b.carbon {
        carbon_section(&mut out, c);
    }
    if let Some(e) = &b.estimate {
        estimate_section(&mut out, e);
    }
    if !b.deviations.is_empty() {
        writeln!(out, "\n## Deviations from published figures\n").unwrap();
        for d in &b.deviations {
            writeln!(
                out,
                "- {}: computed {} {}, published {} {}. {}",
                d.quantity,
                sig(d.computed, 4),
                d.unit,
                sig(d.published, 6),
                d.unit,
                d.note
            )
            .unwrap();
        }
    }
    checklist_section(&mut out, &b.checklist);
    prose_section(&mut out, &b.checklist);
    out
}

fn session_section(out: &mut String, a: &SessionAnalysis) {
    writeln!(out, "\n## Session `{}`\n", a.session_id).unwrap();
    writeln!(out, "- Samples: {} at {} ms interval, {} counter epoch(s)", a.sample_count, a.interval_ms, a.epochs).unwrap();
    writeln!(out, "- Marker times corrected for clock offset: {}", if a.offset_corrected { "yes" } else { "no" }).unwrap();
    if let Some(bl) = &a.baseline {
        writeln!(
            out,
            "- Idle baseline: {} W (σ {} W, {} samples over {} ms)",
            sig(bl.mean_w, 6),
            sig(bl.stddev_w, 4),
            bl.sample_count,
            bl.window_ms
        )
        .unwrap();
    }
    writeln!(out, "- Total metered energy: {}", kwh(a.total_kwh)).unwrap();
    if !a.phases.is_empty() {
        writeln!(out, "\n### Phases\n\n| Label | Start (ms) | End (ms) | Duration (s) | Gross (kWh) | Net of idle (kWh) |").unwrap();
        writeln!(out, "|---|---|---|---|---|---|").unwrap();
        for p in &a.phases {
            let net = p.net_kwh.map(|n| sig(n, 9)).unwrap_or_else(|| "n/a".into());
            writeln!(out, "| {} | {} | {} | {} | {} | {} |", p.label, p.start_ms, p.end_ms, sig(p.duration_s, 9), sig(p.gross_kwh, 9), net)
                .unwrap();
        }
    }
    let groups: Vec<(&str, &EnergyStats)> = a
        .stats
        .all_phases
        .iter()
        .map(|s| ("all phases", s))
        .chain(a.stats.by_label.iter().map(|(k, s)| (k.as_str(), s)))
        .collect();
    if !groups.is_empty() {
        writeln!(out, "\n### Statistics (kWh)\n\n| Group | n | Mean | Median | Min | Max |\n|---|---|---|---|---|---|").unwrap();
        for (g, s) in groups {
            writeln!(
                out,
                "| {g} | {} | {} | {} | {} | {} |",
                s.n,
                sig(s.mean.kwh(), 9),
                sig(s.median.kwh(), 9),
                sig(s.min.kwh(), 9),
                sig(s.max.kwh(), 9)
            )
            .unwrap();
        }
    }
    for w in &a.warnings {
        writeln!(out, "\n> Warning: {w}").unwrap();
    }
}

fn carbon_section(out: &mut String, c: &CarbonReport) {
    writeln!(out, "\n## Carbon\n").unwrap();
    if !c.usages.is_empty() {
        writeln!(out, "| Region | Year | Energy | Factor | Emissions | Factor source |\n|---|---|---|---|---|---|").unwrap();
        for u in &c.usages {
            writeln!(
                out,
                "| {} | {} | {} | {} gCO₂e/kWh | {} | {} |",
                u.region,
                u.year,
                kwh(u.kwh),
                sig(u.gco2e_per_kwh, 6),
                u.mass_g,
                u.source
            )
            .unwrap();
        }
        writeln!(out, "\nTotal: {} emitting {}.", kwh(c.total_kwh), c.total_g).unwrap();
    }
    if let Some(w) = &c.whatif {
        writeln!(out, "\n### Same energy in other regions\n\n{} converted per region:\n", kwh(w.energy_kwh)).unwrap();
        for r in &w.regions {
            writeln!(out, "- {} {} at {} gCO₂e/kWh: {}", r.region, r.year, sig(r.gco2e_per_kwh, 6), r.mass_g).unwrap();
        }
        writeln!(out, "\nHighest over lowest: {} ({}).", times(w.max_min_ratio), sig(w.max_min_ratio, 4)).unwrap();
    }
    if let (Some(eq), Some(f)) = (&c.equivalents, &c.equivalence_factors) {
        writeln!(
            out,
            "\nEquivalent to {} long-haul passenger flights ({} kgCO₂e each) or {} tree-years of sequestration ({} kg per tree per year). Rates: {}.",
            grouped_sig(eq.flights.round(), 9),
            sig(f.flight_kg, 6),
            grouped_sig(eq.tree_years.round(), 9),
            sig(f.tree_kg_per_year, 6),
            f.source
        )
        .unwrap();
    }
    if let Some(p) = &c.offset {
        writeln!(
            out,
            "\nOffset plan: {} trees at {} kg CO₂ per tree per year absorb this in {} months.",
            p.trees,
            sig(p.tree_kg_per_year, 4),
            sig(p.months, 4)
        )
        .unwrap();
    }
    if let Some(e) = &c.era {
        writeln!(
            out,
            "\nEra comparison: {} now versus {} earlier, {} ({}).",
            e.later_g,
            e.earlier_g,
            times(e.ratio),
            sig(e.ratio, 4)
        )
        .unwrap();
    }
    if let Some(l) = &c.lifecycle {
        let within: Vec<&str> = l.brackets.iter().map(|b| b.technology.as_str()).collect();
        writeln!(
            out,
            "\nLife-cycle context for {} gCO₂e/kWh: within the range of {}. Medians span {} ({}) to {} ({}), {}.",
            sig(l.factor, 6),
            if within.is_empty() { "no listed technology".to_string() } else { within.join(", ") },
            l.lowest_median.technology,
            sig(l.lowest_median.median, 4),
            l.highest_median.technology,
            sig(l.highest_median.median, 4),
            times(l.dirtiest_to_cleanest)
        )
        .unwrap();
    }
}

fn estimate_section(out: &mut String, e: &FootprintEstimate) {
    writeln!(out, "\n## Extrapolated footprint\n").unwrap();
    writeln!(
        out,
        "The figures in this section are extrapolations from the assumptions listed below. They are estimates, not measurements.\n"
    )
    .unwrap();
    writeln!(out, "| Quantity | Value |\n|---|---|").unwrap();
    writeln!(out, "| One pipeline execution | {} |", kwh(e.pipeline_kwh.kwh())).unwrap();
    writeln!(out, "| One paper (with overhead) | {} |", kwh(e.paper_kwh.kwh())).unwrap();
    writeln!(out, "| Emissions per paper | {} |", e.per_paper_g).unwrap();
    writeln!(out, "| Emissions per event | {} |", e.event_g).unwrap();
    writeln!(out, "\n### Assumptions\n\n| Name | Value | Source |\n|---|---|---|").unwrap();
    for a in &e.assumptions {
        writeln!(out, "| {} | {} | {} |", a.name, sig(a.value, 9), a.source).unwrap();
    }
}

fn checklist_section(out: &mut String, items: &[ChecklistItem]) {
    writeln!(out, "\n## Documentation checklist\n").unwrap();
    for i in items {
        let answer = match (&i.status, &i.answer) {
            (ChecklistStatus::Answered, Some(a)) => a.clone(),
            (ChecklistStatus::NotApplicable { justification }, _) => format!("not applicable: {justification}"),
            _ => "_unanswered_".to_string(),
        };
        writeln!(out, "{}. {} {}", i.index, i.question, answer).unwrap();
    }
}

fn prose_section(out: &mut String, items: &[ChecklistItem]) {
    let get = |n: usize| -> String {
        match items.get(n - 1) {
            Some(ChecklistItem { status: ChecklistStatus::Answered, answer: Some(a), .. }) => a.clone(),
            _ => format!("[item {n}]"),
        }
    };
    writeln!(out, "\n## Prose template\n").unwrap();
    writeln!(
        out,
        "Experiments ran in {} on {}. Electricity came from {}. Computational tasks took {}. \
Measured at {}, the project consumed {} in total, for a carbon footprint of {}. Offsetting: {}.",
        get(1),
        get(3),
        get(4),
        get(9),
        get(15),
        get(11),
        get(12),
        get(14)
    )
    .unwrap();
}

pub(super) fn csv(b: &ReportBundle) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(["section", "label", "quantity", "value", "unit"]).unwrap();
    let mut row = |s: &str, l: &str, q: &str, v: String, u: &str| {
        w.write_record([s, l, q, v.as_str(), u]).unwrap();
    };
    row("metadata", "", "tool_version", b.metadata.tool_version.clone(), "");
    if let Some(t) = b.metadata.generated_at_ms {
        row("metadata", "", "generated_at_ms", t.to_string(), "ms");
    }
    for d in &b.metadata.inputs {
        row("input", &d.name, "sha256", d.sha256.clone(), "");
    }
    if let Some(a) = &b.analysis {
        row("session", &a.session_id, "total_energy", a.total_kwh.to_string(), "kWh");
        row("session", &a.session_id, "sample_count", a.sample_count.to_string(), "");
        if let Some(bl) = &a.baseline {
            row("session", &a.session_id, "baseline_mean", bl.mean_w.to_string(), "W");
            row("session", &a.session_id, "baseline_stddev", bl.stddev_w.to_string(), "W");
        }
        for p in &a.phases {
            row("phase", &p.label, "start", p.start_ms.to_string(), "ms");
            row("phase", &p.label, "end", p.end_ms.to_string(), "ms");
            row("phase", &p.label, "gross_energy", p.gross_kwh.to_string(), "kWh");
            if let Some(n) = p.net_kwh {
                row("phase", &p.label, "net_energy", n.to_string(), "kWh");
            }
        }
        for (label, s) in &a.stats.by_label {
            row("stats", label, "mean", s.mean.kwh().to_string(), "kWh");
            row("stats", label, "median", s.median.kwh().to_string(), "kWh");
            row("stats", label, "min", s.min.kwh().to_string(), "kWh");
            row("stats", label, "max", s.max.kwh().to_string(), "kWh");
        }
    }
    if let Some(c) = &b.carbon {
        for u in &c.usages {
            let l = format!("{} {}", u.region, u.year);
            row("carbon", &l, "energy", u.kwh.to_string(), "kWh");
            row("carbon", &l, "factor", u.gco2e_per_kwh.to_string(), "gCO2e/kWh");
            row("carbon", &l, "emissions", u.mass_g.grams().to_string(), "gCO2e");
        }
        row("carbon", "total", "emissions", c.total_g.grams().to_string(), "gCO2e");
        if let Some(wi) = &c.whatif {
            for r in &wi.regions {
                row("whatif", &format!("{} {}", r.region, r.year), "emissions", r.mass_g.grams().to_string(), "gCO2e");
            }
        }
        if let Some(p) = &c.offset {
            row("offset", &p.trees.to_string(), "months", p.months.to_string(), "months");
        }
        if let Some(e) = &c.era {
            row("era", "", "ratio", e.ratio.to_string(), "");
        }
    }
    if let Some(e) = &b.estimate {
        row("estimate", "", "pipeline_energy", e.pipeline_kwh.kwh().to_string(), "kWh");
        row("estimate", "", "paper_energy", e.paper_kwh.kwh().to_string(), "kWh");
        row("estimate", "", "per_paper_emissions", e.per_paper_g.grams().to_string(), "gCO2e");
        row("estimate", "", "event_emissions", e.event_g.grams().to_string(), "gCO2e");
        for a in &e.assumptions {
            row("assumption", &a.source, &a.name, a.value.to_string(), "");
        }
    }
    for d in &b.deviations {
        row("deviation", &d.quantity, "computed", d.computed.to_string(), &d.unit);
        row("deviation", &d.quantity, "published", d.published.to_string(), &d.unit);
    }
    for i in &b.checklist {
        let (status, value) = match &i.status {
            ChecklistStatus::Answered => ("answered", i.answer.clone().unwrap_or_default()),
            ChecklistStatus::Unanswered => ("unanswered", String::new()),
            ChecklistStatus::NotApplicable { justification } => ("not_applicable", justification.clone()),
        };
        row("checklist", &i.index.to_string(), status, value, "");
    }
    drop(row);
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}
