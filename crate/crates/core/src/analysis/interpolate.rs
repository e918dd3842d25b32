use std::ops::Range;

use super::{AnalysisError, EnergyQuantity, PhaseEnergy, JOULES_PER_KWH, WH_PER_KWH};
use crate::session::{BaselineRecord, MeterSession, Phase};
use crate::telemetry::PowerSample;

/// Counter value (Wh) at device time `t_ms`, linearly interpolated between
/// the two samples that bracket it.
///
/// `samples` must be one counter epoch. Times up to `tol_ms` outside the
/// sampled range are clamped to the nearest end.
pub fn interpolate_counter(samples: &[PowerSample], t_ms: i64, tol_ms: i64) -> Result<f64, AnalysisError> {
    if samples.len() < 2 {
        return Err(AnalysisError::InsufficientData(format!(
            "interpolation needs at least 2 samples in the epoch, got {}",
            samples.len()
        )));
    }
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if t_ms < first.ts_ms - tol_ms || t_ms > last.ts_ms + tol_ms {
        return Err(AnalysisError::OutOfRange { t_ms, first_ms: first.ts_ms, last_ms: last.ts_ms, tol_ms });
    }
    if t_ms <= first.ts_ms {
        return Ok(first.wh_total);
    }
    if t_ms >= last.ts_ms {
        return Ok(last.wh_total);
    }
    // first index with ts >= t
    let hi = samples.partition_point(|s| s.ts_ms < t_ms);
    let s1 = samples[hi];
    if s1.ts_ms == t_ms {
        return Ok(s1.wh_total);
    }
    let s0 = samples[hi - 1];
    Ok(s0.wh_total + (s1.wh_total - s0.wh_total) * (t_ms - s0.ts_ms) as f64 / (s1.ts_ms - s0.ts_ms) as f64)
}

enum Located {
    Epoch(usize),
    BetweenEpochs,
    Outside,
}

fn locate(session: &MeterSession, epochs: &[Range<usize>], t_ms: i64, tol: i64) -> Located {
    let span = |r: &Range<usize>| (session.samples[r.start].ts_ms, session.samples[r.end - 1].ts_ms);
    if let Some(i) = epochs.iter().position(|r| {
        let (a, b) = span(r);
        a <= t_ms && t_ms <= b
    }) {
        return Located::Epoch(i);
    }
    let near = epochs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let (a, b) = span(r);
            let dist = if t_ms < a { a - t_ms } else { t_ms - b };
            (dist <= tol).then_some((dist, i))
        })
        .min();
    if let Some((_, i)) = near {
        return Located::Epoch(i);
    }
    let first = session.samples[0].ts_ms;
    let last = session.samples[session.samples.len() - 1].ts_ms;
    if first <= t_ms && t_ms <= last {
        Located::BetweenEpochs
    } else {
        Located::Outside
    }
}

fn counter_at(
    session: &MeterSession,
    epochs: &[Range<usize>],
    phase: &Phase,
    t_ms: i64,
) -> Result<(usize, f64), AnalysisError> {
    let tol = session.interval_ms as i64;
    match locate(session, epochs, t_ms, tol) {
        Located::Epoch(i) => {
            let wh = interpolate_counter(&session.samples[epochs[i].clone()], t_ms, tol).map_err(|e| match e {
                AnalysisError::InsufficientData(reason) => {
                    AnalysisError::UnmeasurablePhase { label: phase.label.clone(), reason }
                }
                other => other,
            })?;
            Ok((i, wh))
        }
        Located::BetweenEpochs => Err(AnalysisError::UnmeasurablePhase {
            label: phase.label.clone(),
            reason: format!("time {t_ms} falls in the unsampled gap around a counter reset"),
        }),
        Located::Outside => {
            let first = session.samples[0].ts_ms;
            let last = session.samples[session.samples.len() - 1].ts_ms;
            Err(AnalysisError::OutOfRange { t_ms, first_ms: first, last_ms: last, tol_ms: tol })
        }
    }
}

/// Gross energy of `phase` from the interpolated counter; across counter
/// resets the per-epoch deltas are summed.
pub fn phase_energy(
    session: &MeterSession,
    phase: &Phase,
    baseline: Option<&BaselineRecord>,
) -> Result<PhaseEnergy, AnalysisError> {
    if phase.end_ms < phase.start_ms {
        return Err(AnalysisError::UnmeasurablePhase {
            label: phase.label.clone(),
            reason: format!("ends ({}) before it starts ({})", phase.end_ms, phase.start_ms),
        });
    }
    if session.samples.is_empty() {
        return Err(AnalysisError::InsufficientData("session has no samples".into()));
    }
    let epochs = session.epoch_ranges();
    let (ea, wa) = counter_at(session, &epochs, phase, phase.start_ms)?;
    let (eb, wb) = counter_at(session, &epochs, phase, phase.end_ms)?;
    let wh = if ea == eb {
        wb - wa
    } else {
        let last_of = |i: usize| session.samples[epochs[i].end - 1].wh_total;
        let first_of = |i: usize| session.samples[epochs[i].start].wh_total;
        let mut wh = last_of(ea) - wa;
        for k in ea + 1..eb {
            wh += last_of(k) - first_of(k);
        }
        wh + (wb - first_of(eb))
    };
    let gross = EnergyQuantity::from_kwh((wh / WH_PER_KWH).max(0.0))?;
    let duration_s = phase.duration_ms() as f64 / 1000.0;
    let net_of_idle = baseline
        .map(|b| EnergyQuantity::from_kwh((gross.kwh() - b.mean_w * duration_s / JOULES_PER_KWH).max(0.0)))
        .transpose()?;
    Ok(PhaseEnergy { phase: phase.clone(), gross, net_of_idle, duration_s })
}

/// Energy over the whole session: the sum of every epoch's counter rise.
pub fn session_total(session: &MeterSession) -> EnergyQuantity {
    let wh: f64 = session
        .epoch_ranges()
        .into_iter()
        .map(|r| session.samples[r.end - 1].wh_total - session.samples[r.start].wh_total)
        .sum();
    EnergyQuantity::from_kwh((wh / WH_PER_KWH).max(0.0)).unwrap_or(EnergyQuantity::ZERO)
}

/// Trapezoid integral of instantaneous power over `phase`, in kWh. Used only
/// to cross-check the counter.
pub fn trapezoid_kwh(session: &MeterSession, phase: &Phase) -> Result<f64, AnalysisError> {
    let s = &session.samples;
    if s.len() < 2 {
        return Err(AnalysisError::InsufficientData("trapezoid needs at least 2 samples".into()));
    }
    let watts_at = |t: i64| -> f64 {
        let t = t.clamp(s[0].ts_ms, s[s.len() - 1].ts_ms);
        let hi = s.partition_point(|x| x.ts_ms < t);
        if s[hi].ts_ms == t {
            return s[hi].watts;
        }
        let (a, b) = (s[hi - 1], s[hi]);
        a.watts + (b.watts - a.watts) * (t - a.ts_ms) as f64 / (b.ts_ms - a.ts_ms) as f64
    };
    let (a, b) = (phase.start_ms, phase.end_ms);
    if b <= a {
        return Ok(0.0);
    }
    let mut knots = vec![a];
    knots.extend(s.iter().map(|x| x.ts_ms).filter(|&t| t > a && t < b));
    knots.push(b);
    let joules: f64 = knots
        .windows(2)
        .map(|w| 0.5 * (watts_at(w[0]) + watts_at(w[1])) * (w[1] - w[0]) as f64 / 1000.0)
        .sum();
    Ok(joules / JOULES_PER_KWH)
}
