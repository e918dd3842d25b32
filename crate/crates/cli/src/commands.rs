use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use wattline_core::analysis::{analyze_session, AnalyzeOptions, EnergyQuantity, SessionAnalysis};
use wattline_core::carbon::{
    self, equivalents, era_ratio, lifecycle_context, offset_plan, published, regional_whatif, CarbonMass, CarbonReport,
    EmissionFactor, EquivalenceFactors, EraComparison, FactorTable, LifecycleTable, UsageLine,
};
use wattline_core::clock::Clock;
use wattline_core::footprint::{self, EstimateInputs, FootprintEstimate, OverheadFactor, PipelineShape};
use wattline_core::format::{grouped_sig, sig};
use wattline_core::reference;
use wattline_core::report::{self, Format, InputDigest, ReportBundle, ReportMetadata};
use wattline_core::session::{
    append_marker_line, load_session, read_markers, save_manifest, BaselineRecord, MarkerKind, MeterSession,
    PhaseMarker, SessionWriter, MANIFEST_FILE,
};
use wattline_core::telemetry::{
    run_sampler, serve_simulated_plug, PlugClient, PowerSample, SamplerConfig, SamplerHandle, SamplerOutcome,
    SampleSink, StatusMapping, TraceProfile,
};

use crate::exit::Failure;
use crate::{Cli, Command, FactorArgs, PlugArgs};

pub async fn run(cli: Cli) -> Result<()> {
    let dir = cli.session_dir.as_deref();
    match cli.command {
        Command::Simulate { profile, port, host, no_anchor } => simulate(&profile, &host, port, no_anchor).await,
        Command::Meter { plug, duration_s, probes } => meter(need_dir(dir)?, &plug, duration_s, probes).await,
        Command::Baseline { plug, window_s } => baseline(need_dir(dir)?, &plug, window_s).await,
        Command::Mark { label, kind, ts_ms } => mark(need_dir(dir)?, &label, &kind, ts_ms),
        Command::Sync { endpoint, mapping, probes } => sync(need_dir(dir)?, &endpoint, mapping.as_deref(), probes).await,
        Command::IngestMarkers { file } => ingest_markers(need_dir(dir)?, &file),
        Command::Annotate { pairs } => annotate(need_dir(dir)?, &pairs),
        Command::Analyze { out, no_offset_correction, gross_only } => {
            analyze(need_dir(dir)?, out, !no_offset_correction, !gross_only)
        }
        Command::Carbon {
            kwh,
            analysis,
            factor,
            usages,
            whatif,
            equivalents,
            flight_kg,
            tree_kg_per_year,
            offset_trees,
            offset_tree_kg,
            era_earlier_g,
            era_later_g,
            lifecycle,
            out,
        } => {
            let req = CarbonRequest {
                kwh,
                analysis,
                factor,
                usages,
                whatif,
                equivalents: equivalents.then_some((flight_kg, tree_kg_per_year)),
                offset: offset_trees.map(|t| (t, offset_tree_kg)),
                era: era_earlier_g.zip(era_later_g),
                lifecycle,
            };
            carbon_cmd(req, out.as_deref())
        }
        Command::Estimate {
            models,
            datasets,
            configs,
            per_run_kwh,
            analysis,
            label,
            overhead,
            factor,
            submissions,
            sensitivity_overheads,
            sensitivity_factors,
            out,
        } => {
            let req = EstimateRequest {
                models,
                datasets,
                configs,
                per_run_kwh,
                analysis,
                label,
                overhead,
                factor,
                submissions,
                sensitivity_overheads,
                sensitivity_factors,
            };
            estimate_cmd(req, out.as_deref())
        }
        Command::Report { analysis, carbon, estimate, format, out, generated_at_ms } => {
            report_cmd(dir, analysis, carbon, estimate, &format, out, generated_at_ms)
        }
        Command::Reference { table } => reference_cmd(&table),
    }
}

fn need_dir(dir: Option<&Path>) -> Result<&Path> {
    dir.ok_or_else(|| Failure::validation("no session directory: pass --session-dir or set WATTLINE_SESSION_DIR").into())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::validation(format!("cannot read {}: {e}", path.display())).into())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::validation(format!("cannot write {}: {e}", path.display())).into())
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Failure::validation(format!("{}: {e}", path.display())).into())
}

fn open_or_new(dir: &Path) -> Result<MeterSession> {
    if dir.join(MANIFEST_FILE).exists() {
        return Ok(load_session(dir)?);
    }
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "session".into());
    Ok(MeterSession::new(id))
}

fn mapping(path: Option<&Path>) -> Result<StatusMapping> {
    match path {
        Some(p) => StatusMapping::from_file(p).with_context(|| format!("loading mapping {}", p.display())),
        None => Ok(StatusMapping::canonical()),
    }
}

fn client(plug: &PlugArgs) -> Result<PlugClient> {
    Ok(PlugClient::new(&plug.endpoint, mapping(plug.mapping.as_deref())?, Clock::System)?)
}

fn duration_ms(seconds: f64, what: &str) -> Result<u64> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Failure::validation(format!("{what} must be a positive number of seconds, got {seconds}")).into());
    }
    Ok((seconds * 1000.0).round() as u64)
}

/// Resolves on Ctrl-C or, on Unix, SIGTERM.
async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// Waits for the sampler to finish or for a shutdown signal, then drains it.
async fn drive<S: SampleSink>(handle: SamplerHandle<S>) -> SamplerOutcome<S> {
    let finished = async {
        while !handle.is_finished() {
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
    };
    tokio::select! {
        _ = shutdown_signal() => {}
        _ = finished => {}
    }
    handle.stop().await
}

async fn simulate(profile: &Path, host: &str, port: u16, no_anchor: bool) -> Result<()> {
    let mut trace = TraceProfile::from_file(profile).with_context(|| format!("loading profile {}", profile.display()))?;
    if !no_anchor && trace.start_ts_ms == 0 {
        trace.start_ts_ms = Clock::System.now_ms();
    }
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::validation(format!("bad bind address {host}:{port}: {e}")))?;
    let plug = serve_simulated_plug(trace, addr, Clock::System).await?;
    println!("simulated plug listening on {}", plug.endpoint());
    shutdown_signal().await;
    plug.shutdown();
    Ok(())
}

async fn meter(dir: &Path, plug: &PlugArgs, duration_s: Option<f64>, probes: usize) -> Result<()> {
    let mut session = open_or_new(dir)?;
    let duration = duration_s.map(|s| duration_ms(s, "--duration-s")).transpose()?;
    let client = client(plug)?;
    if probes > 0 {
        let off = client.estimate_clock_offset(probes).await.context("synchronising with the plug")?;
        eprintln!("clock offset {} ms (rtt {} ms)", sig(off.offset_ms, 6), sig(off.rtt_ms, 4));
        session.clock_offset = Some(off);
    }
    session.interval_ms = plug.interval_ms;
    let writer = SessionWriter::open(dir, session)?;
    let config = SamplerConfig { interval_ms: plug.interval_ms, failure_limit: plug.failure_limit, duration_ms: duration };
    let outcome = drive(run_sampler(client, config, writer)?).await;
    let session = outcome.sink.finish()?;
    println!(
        "{} samples appended ({} in session), {} failed polls, largest gap {} ms",
        outcome.samples,
        session.samples.len(),
        outcome.failures,
        outcome.max_gap_ms
    );
    for g in &outcome.gaps {
        eprintln!("warning: {} ms without samples after t={} ms", g.gap_ms, g.after_ts_ms);
    }
    match outcome.abort {
        Some(reason) => Err(Failure::transport(format!("metering stopped: {reason}")).into()),
        None => Ok(()),
    }
}

async fn baseline(dir: &Path, plug: &PlugArgs, window_s: f64) -> Result<()> {
    let window = duration_ms(window_s, "--window-s")?;
    let mut session = open_or_new(dir)?;
    let config = SamplerConfig { interval_ms: plug.interval_ms, failure_limit: plug.failure_limit, duration_ms: Some(window) };
    let outcome = drive(run_sampler(client(plug)?, config, Vec::<PowerSample>::new())?).await;
    if let Some(reason) = outcome.abort {
        return Err(Failure::transport(format!("baseline aborted: {reason}")).into());
    }
    let record = BaselineRecord::from_samples(&outcome.sink)?;
    session.set_baseline(record)?;
    save_manifest(&session, dir)?;
    println!(
        "idle baseline {} W (σ {} W) from {} samples",
        sig(record.mean_w, 6),
        sig(record.stddev_w, 4),
        record.sample_count
    );
    Ok(())
}

fn mark(dir: &Path, label: &str, kind: &str, ts_ms: Option<i64>) -> Result<()> {
    let kind: MarkerKind = kind.parse()?;
    let marker = PhaseMarker::new(ts_ms.unwrap_or_else(|| Clock::System.now_ms()), label, kind)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    append_marker_line(dir, &marker)?;
    println!("{} {} at {}", marker.label, kind_name(kind), marker.ts_ms);
    Ok(())
}

fn kind_name(kind: MarkerKind) -> &'static str {
    match kind {
        MarkerKind::Begin => "begin",
        MarkerKind::End => "end",
    }
}

async fn sync(dir: &Path, endpoint: &str, mapping_path: Option<&Path>, probes: usize) -> Result<()> {
    let mut session = open_or_new(dir)?;
    let client = PlugClient::new(endpoint, mapping(mapping_path)?, Clock::System)?;
    let off = client.estimate_clock_offset(probes).await.context("synchronising with the plug")?;
    session.clock_offset = Some(off);
    save_manifest(&session, dir)?;
    println!("clock offset {} ms (rtt {} ms)", sig(off.offset_ms, 6), sig(off.rtt_ms, 4));
    Ok(())
}

fn ingest_markers(dir: &Path, file: &Path) -> Result<()> {
    if !file.exists() {
        return Err(Failure::validation(format!("marker file {} does not exist", file.display())).into());
    }
    let markers = read_markers(file).with_context(|| format!("reading {}", file.display()))?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for m in &markers {
        append_marker_line(dir, m)?;
    }
    println!("{} markers ingested from {}", markers.len(), file.display());
    Ok(())
}

fn annotate(dir: &Path, pairs: &[String]) -> Result<()> {
    let mut session = open_or_new(dir)?;
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .filter(|(k, _)| !k.trim().is_empty())
            .ok_or_else(|| Failure::validation(format!("annotation `{p}` is not key=value")))?;
        session.annotations.insert(k.trim().to_string(), v.trim().to_string());
    }
    save_manifest(&session, dir)?;
    println!("{} annotations on session `{}`", session.annotations.len(), session.session_id);
    Ok(())
}

fn analyze(dir: &Path, out: Option<PathBuf>, correct_offset: bool, net_of_idle: bool) -> Result<()> {
    let session = load_session(dir)?;
    let analysis = analyze_session(&session, AnalyzeOptions { correct_offset, net_of_idle })?;
    let out = out.unwrap_or_else(|| dir.join("analysis.json"));
    write_text(&out, &analysis.to_json())?;
    println!("session `{}`: {} total", analysis.session_id, kwh_text(analysis.total_kwh));
    for p in &analysis.phases {
        let net = p.net_kwh.map(|n| format!(", net {}", kwh_text(n))).unwrap_or_default();
        println!("  {} [{} .. {}] {} s: {}{}", p.label, p.start_ms, p.end_ms, sig(p.duration_s, 6), kwh_text(p.gross_kwh), net);
    }
    for w in &analysis.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn kwh_text(kwh: f64) -> String {
    format!("{} kWh", grouped_sig(kwh, 9))
}

fn factor_table(args: &FactorArgs) -> Result<FactorTable> {
    match &args.factors {
        Some(p) => FactorTable::from_path(p).with_context(|| format!("loading factors {}", p.display())),
        None => Ok(FactorTable::bundled()),
    }
}

fn resolve_factor(args: &FactorArgs, table: &FactorTable) -> Result<EmissionFactor> {
    match args.factor {
        Some(g) => Ok(EmissionFactor::literal(g)?),
        None => Ok(table.lookup(&args.region, args.year)?.clone()),
    }
}

/// `REGION[:YEAR]`.
fn lookup_region(spec: &str, default_year: i32, table: &FactorTable) -> Result<EmissionFactor> {
    let (region, year) = match spec.rsplit_once(':') {
        Some((r, y)) => (r, y.parse().map_err(|_| Failure::validation(format!("bad year in `{spec}`")))?),
        None => (spec, default_year),
    };
    Ok(table.lookup(region, year)?.clone())
}

fn energy(kwh: f64) -> Result<EnergyQuantity> {
    EnergyQuantity::from_kwh(kwh).map_err(|e| Failure::validation(e.to_string()).into())
}

struct CarbonRequest {
    kwh: Option<f64>,
    analysis: Option<PathBuf>,
    factor: FactorArgs,
    usages: Vec<String>,
    whatif: Vec<String>,
    equivalents: Option<(Option<f64>, Option<f64>)>,
    offset: Option<(u32, f64)>,
    era: Option<(f64, f64)>,
    lifecycle: bool,
}

fn carbon_cmd(req: CarbonRequest, out: Option<&Path>) -> Result<()> {
    let table = factor_table(&req.factor)?;
    let mut lines = Vec::new();
    if req.usages.is_empty() {
        let kwh = match (&req.kwh, &req.analysis) {
            (Some(k), _) => *k,
            (None, Some(p)) => parse_json::<SessionAnalysis>(p, &read_text(p)?)?.total_kwh,
            (None, None) => return Err(Failure::validation("give --kwh, --analysis or at least one --usage").into()),
        };
        lines.push(UsageLine::new(energy(kwh)?, &resolve_factor(&req.factor, &table)?));
    }
    for u in &req.usages {
        let (k, place) =
            u.split_once('@').ok_or_else(|| Failure::validation(format!("usage `{u}` is not KWH@REGION[:YEAR]")))?;
        let k: f64 = k.trim().parse().map_err(|_| Failure::validation(format!("bad energy in usage `{u}`")))?;
        lines.push(UsageLine::new(energy(k)?, &lookup_region(place.trim(), req.factor.year, &table)?));
    }
    let mut report = CarbonReport::from_usages(lines);
    let total = energy(report.total_kwh)?;

    if !req.whatif.is_empty() {
        let factors = req.whatif.iter().map(|w| lookup_region(w, req.factor.year, &table)).collect::<Result<Vec<_>>>()?;
        let w = regional_whatif(total, &factors)?;
        report.deviations.extend(published::check_whatif(&w));
        report.whatif = Some(w);
    }
    if let Some((flight_kg, tree_kg)) = req.equivalents {
        let mut f = EquivalenceFactors::default();
        if flight_kg.is_some() || tree_kg.is_some() {
            f.source = "command line".into();
        }
        f.flight_kg = flight_kg.unwrap_or(f.flight_kg);
        f.tree_kg_per_year = tree_kg.unwrap_or(f.tree_kg_per_year);
        f.validate()?;
        report.equivalents = Some(equivalents(report.total_g, &f));
        report.equivalence_factors = Some(f);
    }
    if let Some((trees, rate)) = req.offset {
        let plan = offset_plan(report.total_g, trees, rate)?;
        report.deviations.extend(published::check_offset(report.total_g, &plan));
        report.offset = Some(plan);
    }
    if let Some((earlier, later)) = req.era {
        let (earlier_g, later_g) = (CarbonMass::from_grams(earlier)?, CarbonMass::from_grams(later)?);
        report.era = Some(EraComparison { earlier_g, later_g, ratio: era_ratio(earlier_g, later_g)? });
    }
    if req.lifecycle {
        let g = report.usages.first().map(|u| u.gco2e_per_kwh).expect("at least one usage line");
        report.lifecycle = Some(lifecycle_context(g, &LifecycleTable::bundled())?);
    }

    print_carbon(&report);
    if let Some(p) = out {
        write_text(p, &report.to_json())?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_carbon(r: &CarbonReport) {
    for u in &r.usages {
        println!("{} at {} gCO₂e/kWh ({} {}): {}", kwh_text(u.kwh), sig(u.gco2e_per_kwh, 6), u.region, u.year, u.mass_g);
    }
    println!("emissions: {} ({} g)", r.total_g, grouped_sig(r.total_g.grams(), 12));
    if let Some(w) = &r.whatif {
        for m in &w.regions {
            println!("  what-if {} {}: {}", m.region, m.year, m.mass_g);
        }
        println!("  highest/lowest: {}", sig(w.max_min_ratio, 4));
    }
    if let Some(e) = &r.equivalents {
        println!("equivalent to {} flights or {} tree-years", sig(e.flights, 6), sig(e.tree_years, 6));
    }
    if let Some(p) = &r.offset {
        println!("offset: {} trees need {} months", p.trees, sig(p.months, 4));
    }
    if let Some(e) = &r.era {
        println!("era ratio: {} (≈ {}×)", sig(e.ratio, 4), e.ratio.round());
    }
    if let Some(l) = &r.lifecycle {
        let names: Vec<&str> = l.brackets.iter().map(|b| b.technology.as_str()).collect();
        println!("lifecycle: within {}; dirtiest/cleanest median {}", names.join(", "), sig(l.dirtiest_to_cleanest, 4));
    }
    for d in &r.deviations {
        println!("deviation: {} computed {} {}, published {} {}", d.quantity, sig(d.computed, 4), d.unit, d.published, d.unit);
    }
}

struct EstimateRequest {
    models: u64,
    datasets: u64,
    configs: u64,
    per_run_kwh: Option<f64>,
    analysis: Option<PathBuf>,
    label: Option<String>,
    overhead: f64,
    factor: FactorArgs,
    submissions: u64,
    sensitivity_overheads: Vec<f64>,
    sensitivity_factors: Vec<f64>,
}

fn estimate_cmd(req: EstimateRequest, out: Option<&Path>) -> Result<()> {
    let table = factor_table(&req.factor)?;
    let (per_run, per_run_source) = match (req.per_run_kwh, &req.analysis) {
        (Some(k), _) => (energy(k)?, "--per-run-kwh".to_string()),
        (None, Some(p)) => {
            let a: SessionAnalysis = parse_json(p, &read_text(p)?)?;
            let phases: Vec<_> = a.phases.iter().filter(|ph| req.label.as_ref().is_none_or(|l| &ph.label == l)).collect();
            if phases.is_empty() {
                return Err(Failure::validation(format!("{} has no matching phases", p.display())).into());
            }
            let kwh = phases.iter().map(|ph| ph.gross_kwh).sum();
            let which = req.label.as_deref().map(|l| format!("`{l}` phases")).unwrap_or_else(|| "all phases".into());
            (energy(kwh)?, format!("measured: {} ({which} of session `{}`)", p.display(), a.session_id))
        }
        (None, None) => return Err(Failure::validation("give --per-run-kwh or --analysis").into()),
    };
    let factor = resolve_factor(&req.factor, &table)?;
    let mut inputs = EstimateInputs::new(
        PipelineShape { n_models: req.models, n_datasets: req.datasets, n_configs: req.configs, per_run },
        factor.clone(),
        req.submissions,
    );
    inputs.shape_source = "--models/--datasets/--configs".into();
    inputs.per_run_source = per_run_source;
    inputs.overhead = OverheadFactor::new(req.overhead)?;
    if req.overhead != footprint::DEFAULT_OVERHEAD {
        inputs.overhead_source = "--overhead".into();
    }
    inputs.submissions_source = "--submissions".into();
    let est = footprint::estimate(&inputs)?;
    print_estimate(&est);

    if !req.sensitivity_overheads.is_empty() || !req.sensitivity_factors.is_empty() {
        let overheads = if req.sensitivity_overheads.is_empty() { vec![req.overhead] } else { req.sensitivity_overheads };
        let factors = if req.sensitivity_factors.is_empty() {
            vec![factor]
        } else {
            req.sensitivity_factors.iter().map(|&g| EmissionFactor::literal(g)).collect::<Result<_, _>>()?
        };
        println!("sensitivity (sorted by event mass):");
        for row in footprint::sensitivity(&inputs, &overheads, &factors)? {
            println!(
                "  overhead {:>6} factor {:>6} g/kWh: per paper {}, event {}",
                sig(row.overhead, 6),
                sig(row.gco2e_per_kwh, 6),
                row.estimate.per_paper_g,
                row.estimate.event_g
            );
        }
    }
    if let Some(p) = out {
        write_text(p, &est.to_json())?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_estimate(e: &FootprintEstimate) {
    println!("pipeline: {}", kwh_text(e.pipeline_kwh.kwh()));
    println!("paper: {}", kwh_text(e.paper_kwh.kwh()));
    println!("per paper: {} ({} kg)", e.per_paper_g, grouped_sig(e.per_paper_g.kg(), 12));
    println!("event: {} ({} kg)", e.event_g, grouped_sig(e.event_g.kg(), 12));
    for d in &e.deviations {
        println!("deviation: {} computed {} {}, published {} {}", d.quantity, sig(d.computed, 4), d.unit, d.published, d.unit);
    }
}

/// An explicit path, or the conventional file in the session directory if
/// that exists.
fn input_path(explicit: Option<PathBuf>, dir: Option<&Path>, name: &str) -> Option<PathBuf> {
    explicit.or_else(|| dir.map(|d| d.join(name)).filter(|p| p.exists()))
}

fn report_cmd(
    dir: Option<&Path>,
    analysis: Option<PathBuf>,
    carbon_path: Option<PathBuf>,
    estimate: Option<PathBuf>,
    format: &str,
    out: Option<PathBuf>,
    generated_at_ms: Option<i64>,
) -> Result<()> {
    let format: Format = format.parse()?;
    let mut digests = Vec::new();
    let mut load = |path: Option<PathBuf>| -> Result<Option<(PathBuf, String)>> {
        let Some(p) = path else { return Ok(None) };
        let text = read_text(&p)?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        digests.push(InputDigest::of(name, text.as_bytes()));
        Ok(Some((p, text)))
    };
    let analysis: Option<SessionAnalysis> =
        load(input_path(analysis, dir, "analysis.json"))?.map(|(p, t)| parse_json(&p, &t)).transpose()?;
    let carbon: Option<carbon::CarbonReport> =
        load(input_path(carbon_path, dir, "carbon.json"))?.map(|(p, t)| parse_json(&p, &t)).transpose()?;
    let estimate: Option<FootprintEstimate> =
        load(input_path(estimate, dir, "estimate.json"))?.map(|(p, t)| parse_json(&p, &t)).transpose()?;
    let annotations = match dir.map(|d| d.join(MANIFEST_FILE)).filter(|p| p.exists()) {
        Some(p) => {
            load(Some(p.clone()))?;
            load_session(p.parent().expect("manifest has a parent"))?.annotations
        }
        None => BTreeMap::new(),
    };
    let generated_at = generated_at_ms.or_else(source_date_epoch_ms);
    let bundle = ReportBundle::new(ReportMetadata::new(generated_at, digests), annotations, analysis, carbon, estimate);
    let text = report::render(&bundle, format)?;
    match out.or_else(|| dir.map(|d| d.join(format!("report.{}", format.extension())))) {
        Some(p) => {
            write_text(&p, &text)?;
            println!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn source_date_epoch_ms() -> Option<i64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse::<i64>().ok().map(|s| s * 1000)
}

fn reference_cmd(table: &str) -> Result<()> {
    match table {
        "factors" => print!("{}", FactorTable::bundled().to_csv()),
        "lifecycle" => {
            println!("technology,min,median,max");
            for e in LifecycleTable::bundled().entries {
                println!("{},{},{},{}", e.technology, e.min, e.median, e.max);
            }
        }
        "stats" => {
            println!("group,kind,mean_kwh,median_kwh,min_kwh,max_kwh");
            for r in reference::reference_stats() {
                let kind = match r.kind {
                    reference::GroupKind::Dataset => "dataset",
                    reference::GroupKind::Recommender => "recommender",
                };
                println!("{},{kind},{:.4},{:.4},{:.4},{:.4}", r.group, r.mean_kwh, r.median_kwh, r.min_kwh, r.max_kwh);
            }
        }
        "hardware" => {
            println!("machine,year,idle_w,idle_sigma_w,max_w");
            for h in reference::hardware_power() {
                println!("{},{},{},{},{}", h.machine, h.year, h.idle_w, h.idle_sigma_w, h.max_w);
            }
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown reference table `{other}` (expected factors, lifecycle, stats or hardware)"
            ))
            .into())
        }
    }
    Ok(())
}
