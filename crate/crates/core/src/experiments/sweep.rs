use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{member_seed, ExperimentKind, ExperimentSpec, FinState};
use crate::config::RunConfig;
use crate::control::{FishController, GaitCommand};
use crate::error::{Error, Result};
use crate::hydro::{simulate, FishState};
use crate::metrics::{improvement, run_metrics, RunMetrics};
use crate::telemetry::{decimate, TelemetryRecord};

/// One point of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Hz
    pub frequency: f64,
    /// deg
    pub amplitude: f64,
    pub fin: FinState,
}

impl Condition {
    pub fn new(frequency: f64, amplitude: f64, fin: FinState) -> Self {
        Self {
            frequency,
            amplitude,
            fin,
        }
    }

    pub fn label(&self) -> String {
        format!("f={}Hz A={}deg fin={}", self.frequency, self.amplitude, self.fin)
    }

    /// File-name friendly label, e.g. `f0.5_a20_folded`.
    pub fn slug(&self) -> String {
        format!("f{}_a{}_{}", self.frequency, self.amplitude, self.fin)
    }
}

/// A finished member run.
#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub condition: Condition,
    pub repeat: u32,
    pub seed: u64,
    pub metrics: RunMetrics,
    /// Decimated telemetry; empty unless requested.
    pub telemetry: Vec<TelemetryRecord>,
}

/// Straight swim at the configured cruising depth under one condition.
pub fn run_condition(
    cfg: &RunConfig,
    condition: Condition,
    duration: f64,
    seed: u64,
    keep_telemetry: bool,
) -> Result<ConditionRun> {
    let inner = || -> Result<(RunMetrics, Vec<TelemetryRecord>)> {
        let erection = condition.fin.erection(&cfg.linkage)?;
        let gait = GaitCommand::new(condition.frequency, condition.amplitude, 0.0, erection);
        let mut ctl = FishController::steady(gait, cfg.swim_depth, cfg.pid, cfg.depth_hold, cfg.buoyancy)?;
        let records = simulate(
            &cfg.plant(),
            FishState::at_depth(cfg.swim_depth),
            &mut ctl,
            duration,
            cfg.dt,
            seed,
        )?;
        let telemetry = decimate(&records, cfg.dt, cfg.telemetry_rate_hz);
        let metrics = run_metrics(&telemetry, condition.frequency, cfg.fish.mass, cfg.fish.gravity)?;
        Ok((metrics, telemetry))
    };
    let (metrics, telemetry) = inner().map_err(|e| Error::Condition {
        condition: condition.label(),
        source: Box::new(e),
    })?;
    Ok(ConditionRun {
        condition,
        repeat: 0,
        seed,
        metrics,
        telemetry: if keep_telemetry { telemetry } else { Vec::new() },
    })
}

/// Mean and sample standard deviation across repeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub condition: Condition,
    pub repeats: u32,
    pub mean_speed: Stat,
    pub mean_power: Stat,
    pub cot: Stat,
    pub p2p_yaw: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: ExperimentKind,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, frequency: f64, amplitude: f64, fin: FinState) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            (r.condition.frequency - frequency).abs() < 1e-9
                && (r.condition.amplitude - amplitude).abs() < 1e-9
                && r.condition.fin == fin
        })
    }

    /// (frequency, mean speed) points of one fin state at one amplitude.
    pub fn speed_curve(&self, amplitude: f64, fin: FinState) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.condition.fin == fin && (r.condition.amplitude - amplitude).abs() < 1e-9)
            .map(|r| (r.condition.frequency, r.mean_speed.mean))
            .collect()
    }
}

/// Runs every member of `spec` (in parallel) and aggregates in grid order.
/// The first faulting member in grid order aborts the sweep.
pub fn run_sweep(
    cfg: &RunConfig,
    spec: &ExperimentSpec,
    keep_telemetry: bool,
) -> Result<(SweepResult, Vec<ConditionRun>)> {
    spec.validate("experiment")?;
    let conditions = spec.conditions();
    let members: Vec<(usize, u32)> = (0..conditions.len())
        .flat_map(|c| (0..spec.repeats).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<Result<ConditionRun>> = members
        .par_iter()
        .map(|&(c, r)| {
            let seed = member_seed(spec.seed, c, r);
            run_condition(cfg, conditions[c], spec.duration, seed, keep_telemetry).map(|mut run| {
                run.repeat = r;
                run
            })
        })
        .collect();
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let rows = conditions
        .iter()
        .enumerate()
        .map(|(c, &condition)| {
            let members = &runs[c * spec.repeats as usize..(c + 1) * spec.repeats as usize];
            let pick = |f: fn(&RunMetrics) -> f64| Stat::of(&members.iter().map(|m| f(&m.metrics)).collect::<Vec<_>>());
            SweepRow {
                condition,
                repeats: spec.repeats,
                mean_speed: pick(|m| m.mean_speed),
                mean_power: pick(|m| m.mean_power),
                cot: pick(|m| m.cot),
                p2p_yaw: pick(|m| m.p2p_yaw),
            }
        })
        .collect();
    Ok((SweepResult { kind: spec.kind, rows }, runs))
}

pub fn run_speed_sweep(cfg: &RunConfig, spec: &ExperimentSpec) -> Result<SweepResult> {
    if spec.kind != ExperimentKind::SpeedSweep {
        return Err(Error::Domain(format!(
            "run_speed_sweep needs a speed_sweep spec, got {:?}",
            spec.kind
        )));
    }
    Ok(run_sweep(cfg, spec, false)?.0)
}

/// One line of the yaw-stability table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawRow {
    pub frequency: f64,
    pub amplitude: f64,
    pub folded_p2p: f64,
    pub erect_p2p: f64,
    /// Percent reduction of p2p yaw from folded to erect.
    pub improvement: f64,
}

pub fn yaw_rows(result: &SweepResult) -> Result<Vec<YawRow>> {
    let mut out = Vec::new();
    for r in result.rows.iter().filter(|r| r.condition.fin == FinState::Folded) {
        let c = r.condition;
        let Some(erect) = result.row(c.frequency, c.amplitude, FinState::Erect) else {
            continue;
        };
        out.push(YawRow {
            frequency: c.frequency,
            amplitude: c.amplitude,
            folded_p2p: r.p2p_yaw.mean,
            erect_p2p: erect.p2p_yaw.mean,
            improvement: improvement(r.p2p_yaw.mean, erect.p2p_yaw.mean)?,
        });
    }
    // Table order: amplitude, then frequency.
    out.sort_by(|a, b| {
        a.amplitude
            .total_cmp(&b.amplitude)
            .then(a.frequency.total_cmp(&b.frequency))
    });
    Ok(out)
}

/// Yaw-stability study. Member telemetry is kept for export.
pub fn run_yaw_study(cfg: &RunConfig, spec: &ExperimentSpec) -> Result<(SweepResult, Vec<YawRow>, Vec<ConditionRun>)> {
    if spec.kind != ExperimentKind::YawStudy {
        return Err(Error::Domain(format!(
            "run_yaw_study needs a yaw_study spec, got {:?}",
            spec.kind
        )));
    }
    let (result, runs) = run_sweep(cfg, spec, true)?;
    let rows = yaw_rows(&result)?;
    Ok((result, rows, runs))
}
