use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::depth::run_depth_step;
use crate::config::RunConfig;
use crate::control::{PidGains, Timed};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningCandidate {
    pub kp: f64,
    pub kd: f64,
    pub settling_time: Option<f64>,
    pub overshoot_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub gains: PidGains,
    pub settling_time: f64,
    pub overshoot_pct: f64,
    pub candidates: Vec<TuningCandidate>,
}

pub const DEFAULT_KP_GRID: [f64; 6] = [1e-5, 2e-5, 5e-5, 1e-4, 2e-4, 5e-4];
pub const DEFAULT_KD_GRID: [f64; 6] = [5e-5, 1e-4, 2e-4, 5e-4, 1e-3, 2e-3];

/// Step-response grid search on the hovering heave plant: each (kp, kd)
/// pair drives a 0 → `step` m dive, and the fastest-settling pair whose
/// overshoot stays within `max_overshoot_pct` wins. Ties go to the earlier
/// grid entry. Integral gain, limits and everything else come from `base`.
pub fn tune_depth_gains(
    cfg: &RunConfig,
    base: &PidGains,
    kp_grid: &[f64],
    kd_grid: &[f64],
    step: f64,
    duration: f64,
    max_overshoot_pct: f64,
) -> Result<TuningReport> {
    let mut quiet = cfg.clone();
    quiet.noise.enabled = false;
    let schedule = [Timed {
        start: 0.0,
        value: step,
    }];
    let grid: Vec<(f64, f64)> = kp_grid
        .iter()
        .flat_map(|&kp| kd_grid.iter().map(move |&kd| (kp, kd)))
        .collect();
    let candidates = grid
        .par_iter()
        .map(|&(kp, kd)| {
            let gains = PidGains { kp, kd, ..*base };
            let r = run_depth_step(&quiet, 0.0, &schedule, duration, &gains)?;
            Ok(TuningCandidate {
                kp,
                kd,
                settling_time: r.steps[0].settling_time,
                overshoot_pct: r.steps[0].overshoot_pct,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some(t) = c.settling_time.filter(|_| c.overshoot_pct <= max_overshoot_pct) {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
    }
    let (i, t) = best.ok_or_else(|| Error::Validation("no candidate gains settle within the tuning horizon".into()))?;
    let win = candidates[i];
    Ok(TuningReport {
        gains: PidGains {
            kp: win.kp,
            kd: win.kd,
            ..*base
        },
        settling_time: t,
        overshoot_pct: win.overshoot_pct,
        candidates,
    })
}
