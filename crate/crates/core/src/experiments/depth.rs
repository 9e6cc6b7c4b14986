use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::control::{FishController, GaitCommand, PidGains, Timed};
use crate::error::{Error, Result};
use crate::hydro::{simulate, FishState};
use crate::telemetry::{decimate, TelemetryRecord};

/// Settling band as a fraction of the step size.
pub const SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub start: f64,
    pub from: f64,
    pub to: f64,
    /// Time after `start` of the last exit from the ±2% band; `None` if the
    /// segment ends outside it.
    pub settling_time: Option<f64>,
    /// Peak excursion past the target, percent of the step size.
    pub overshoot_pct: f64,
    pub final_depth: f64,
}

#[derive(Debug, Clone)]
pub struct DepthStepResult {
    pub telemetry: Vec<TelemetryRecord>,
    pub steps: Vec<StepReport>,
    pub peak_integral: f64,
}

fn analyse(records: &[TelemetryRecord], start: f64, end: f64, from: f64, to: f64) -> StepReport {
    let seg: Vec<&TelemetryRecord> = records
        .iter()
        .filter(|r| r.time >= start - 1e-9 && r.time <= end + 1e-9)
        .collect();
    let size = (to - from).abs();
    let dir = if to >= from { 1.0 } else { -1.0 };
    let band = SETTLING_BAND * size;
    let final_depth = seg.last().map_or(from, |r| r.depth);
    if size == 0.0 {
        return StepReport {
            start,
            from,
            to,
            settling_time: Some(0.0),
            overshoot_pct: 0.0,
            final_depth,
        };
    }
    let past = seg.iter().map(|r| dir * (r.depth - to)).fold(0.0_f64, f64::max);
    let settling_time = match seg.last() {
        Some(last) if (last.depth - to).abs() <= band => {
            let exit = seg.iter().rposition(|r| (r.depth - to).abs() > band);
            Some(exit.map_or(0.0, |i| seg[(i + 1).min(seg.len() - 1)].time - start))
        }
        _ => None,
    };
    StepReport {
        start,
        from,
        to,
        settling_time,
        overshoot_pct: 100.0 * past / size,
        final_depth,
    }
}

/// Hovering (tail off) closed-loop depth response to a schedule of target
/// depths, starting neutrally buoyant at `initial_depth`.
pub fn run_depth_step(
    cfg: &RunConfig,
    initial_depth: f64,
    schedule: &[Timed<f64>],
    duration: f64,
    gains: &PidGains,
) -> Result<DepthStepResult> {
    if schedule.is_empty() {
        return Err(Error::config("depth_step.schedule", "must not be empty"));
    }
    if !(initial_depth.is_finite() && initial_depth >= 0.0) {
        return Err(Error::config("depth_step.initial_depth", "must be finite and >= 0"));
    }
    let mut ctl = FishController::new(
        vec![Timed {
            start: 0.0,
            value: GaitCommand::off(),
        }],
        schedule.to_vec(),
        *gains,
        cfg.depth_hold,
        cfg.buoyancy,
    )?;
    let records = simulate(
        &cfg.plant(),
        FishState::at_depth(initial_depth),
        &mut ctl,
        duration,
        cfg.dt,
        cfg.seed,
    )?;
    let telemetry = decimate(&records, cfg.dt, cfg.telemetry_rate_hz);
    let end = telemetry.last().map_or(0.0, |r| r.time);
    let mut steps = Vec::new();
    let mut from = initial_depth;
    for (i, seg) in schedule.iter().enumerate() {
        if seg.start >= end {
            break;
        }
        let seg_end = schedule.get(i + 1).map_or(end, |n| n.start.min(end));
        steps.push(analyse(&telemetry, seg.start, seg_end, from, seg.value));
        from = seg.value;
    }
    Ok(DepthStepResult {
        telemetry,
        steps,
        peak_integral: ctl.peak_integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(time: f64, depth: f64) -> TelemetryRecord {
        TelemetryRecord {
            time,
            x: 0.0,
            y: 0.0,
            depth,
            yaw_deg: 0.0,
            yaw_rate_dps: 0.0,
            surge_mps: 0.0,
            sway_mps: 0.0,
            servo_deg: 0.0,
            torque_nm: 0.0,
            power_w: 0.0,
            erection: 0.0,
            syringe_ml: 30.0,
        }
    }

    #[test]
    fn analyse_hand_trace() {
        let depths = [0.0, 0.2, 0.33, 0.305, 0.299, 0.3, 0.3];
        let recs: Vec<_> = depths.iter().enumerate().map(|(i, &d)| rec(i as f64, d)).collect();
        let r = analyse(&recs, 0.0, 6.0, 0.0, 0.3);
        assert!((r.overshoot_pct - 10.0).abs() < 1e-9);
        // Last sample outside ±6 mm is t=2 (0.33); settled from t=3.
        assert_eq!(r.settling_time, Some(3.0));
        let r = analyse(&recs[..3], 0.0, 2.0, 0.0, 0.3);
        assert_eq!(r.settling_time, None);
    }

    #[test]
    fn holds_at_equilibrium() {
        let cfg = RunConfig::calibrated();
        let sched = vec![Timed { start: 0.0, value: 0.3 }];
        let r = run_depth_step(&cfg, 0.3, &sched, 20.0, &cfg.pid).unwrap();
        for rec in &r.telemetry {
            assert!(
                (rec.depth - 0.3).abs() <= cfg.depth_hold.sensor_resolution,
                "{}",
                rec.depth
            );
        }
    }

    #[test]
    fn surfacing_never_goes_negative() {
        let cfg = RunConfig::calibrated();
        let sched = vec![Timed { start: 0.0, value: 0.0 }];
        let r = run_depth_step(&cfg, 0.3, &sched, 60.0, &cfg.pid).unwrap();
        assert!(r.telemetry.iter().all(|x| x.depth >= 0.0));
        assert!(r.steps[0].final_depth < 0.3 * SETTLING_BAND);
    }
}
