//! Declarative experiment protocols (speed/COT sweep, yaw-stability study,
//! depth steps) and calibration of the surrogate coefficients.

mod calibrate;
mod depth;
mod report;
mod sweep;
mod tuning;

pub use calibrate::{
    calibrate, default_bounds, default_targets, evaluate_targets, CalibrationOptions, CalibrationResult,
    CalibrationTarget, Observable, Param, ParamBound, TargetResidual,
};
pub use depth::{run_depth_step, DepthStepResult, StepReport, SETTLING_BAND};
pub use report::{
    step_csv, sweep_csv, write_step_reports, write_sweep_csv, write_yaw_table, yaw_csv, yaw_table_text, STEP_HEADER,
    SWEEP_HEADER, YAW_HEADER,
};
pub use sweep::{
    run_condition, run_speed_sweep, run_sweep, run_yaw_study, yaw_rows, Condition, ConditionRun, Stat, SweepResult,
    SweepRow, YawRow,
};
pub use tuning::{tune_depth_gains, TuningCandidate, TuningReport, DEFAULT_KD_GRID, DEFAULT_KP_GRID};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkage::{erection_fraction, LinkageGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SpeedSweep,
    YawStudy,
    DepthStep,
    SingleRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinState {
    Erect,
    Folded,
}

impl FinState {
    pub fn as_str(self) -> &'static str {
        match self {
            FinState::Erect => "erect",
            FinState::Folded => "folded",
        }
    }

    /// Erection fraction realized by the linkage at this end stop.
    pub fn erection(self, linkage: &LinkageGeometry) -> Result<f64> {
        let angle = match self {
            FinState::Erect => linkage.drive_angle_erect,
            FinState::Folded => linkage.drive_angle_folded,
        };
        Ok(erection_fraction(linkage, angle)?.value)
    }
}

impl std::fmt::Display for FinState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FinState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erect" => Ok(FinState::Erect),
            "folded" => Ok(FinState::Folded),
            other => Err(Error::Domain(format!(
                "unknown fin state `{other}` (expected erect or folded)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Hz
    pub frequencies: Vec<f64>,
    /// deg
    pub amplitudes: Vec<f64>,
    pub fin_states: Vec<FinState>,
    pub repeats: u32,
    /// Seconds per member run.
    pub duration: f64,
    pub seed: u64,
}

/// Ten evenly spaced frequencies from 0.80 Hz to 2.33 Hz (0.17 Hz apart).
pub fn default_sweep_frequencies() -> Vec<f64> {
    (0..10).map(|k| ((80 + 17 * k) as f64) / 100.0).collect()
}

impl ExperimentSpec {
    pub fn speed_sweep() -> Self {
        Self {
            kind: ExperimentKind::SpeedSweep,
            frequencies: default_sweep_frequencies(),
            amplitudes: vec![20.0],
            fin_states: vec![FinState::Erect, FinState::Folded],
            repeats: 5,
            duration: 40.0,
            seed: 1,
        }
    }

    pub fn yaw_study() -> Self {
        Self {
            kind: ExperimentKind::YawStudy,
            frequencies: vec![0.5, 1.0],
            amplitudes: vec![10.0, 20.0, 30.0],
            fin_states: vec![FinState::Erect, FinState::Folded],
            repeats: 1,
            duration: 30.0,
            seed: 1,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::config(format!("{prefix}.repeats"), "must be >= 1"));
        }
        if self.frequencies.is_empty() {
            return Err(Error::config(format!("{prefix}.frequencies"), "must not be empty"));
        }
        if let Some((i, f)) = self
            .frequencies
            .iter()
            .enumerate()
            .find(|(_, f)| !(f.is_finite() && **f > 0.0))
        {
            return Err(Error::config(
                format!("{prefix}.frequencies[{i}]"),
                format!("must be > 0, got {f}"),
            ));
        }
        if self.amplitudes.is_empty() {
            return Err(Error::config(format!("{prefix}.amplitudes"), "must not be empty"));
        }
        if let Some((i, a)) = self
            .amplitudes
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=crate::control::MAX_AMPLITUDE_DEG).contains(*a))
        {
            return Err(Error::config(
                format!("{prefix}.amplitudes[{i}]"),
                format!("must lie in [0, 45] deg, got {a}"),
            ));
        }
        if self.fin_states.is_empty() {
            return Err(Error::config(format!("{prefix}.fin_states"), "must not be empty"));
        }
        let lowest = self.frequencies.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.duration.is_finite() && self.duration * lowest >= 10.0 - 1e-9) {
            return Err(Error::config(
                format!("{prefix}.duration"),
                format!("{} s covers fewer than 10 cycles at {lowest} Hz", self.duration),
            ));
        }
        Ok(())
    }

    /// Conditions in grid order: frequency, then amplitude, then fin state.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = Vec::with_capacity(self.frequencies.len() * self.amplitudes.len() * self.fin_states.len());
        for &frequency in &self.frequencies {
            for &amplitude in &self.amplitudes {
                for &fin in &self.fin_states {
                    out.push(Condition {
                        frequency,
                        amplitude,
                        fin,
                    });
                }
            }
        }
        out
    }
}

/// Seed of one member run, distinct across conditions and repeats.
pub fn member_seed(base: u64, condition_index: usize, repeat: u32) -> u64 {
    base.wrapping_add(1000u64.wrapping_mul(condition_index as u64))
        .wrapping_add(repeat as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_counts() {
        let s = ExperimentSpec::speed_sweep();
        assert_eq!(s.frequencies.len(), 10);
        assert_eq!(s.frequencies[0], 0.80);
        assert_eq!(s.frequencies[9], 2.33);
        assert_eq!(s.repeats, 5);
        assert_eq!(s.conditions().len() * s.repeats as usize, 100);
        let y = ExperimentSpec::yaw_study();
        assert_eq!(y.conditions().len(), 12);
        assert_eq!(y.frequencies.len() * y.amplitudes.len(), 6);
        s.validate("s").unwrap();
        y.validate("y").unwrap();
    }

    #[test]
    fn grid_spacing_is_uniform() {
        let f = default_sweep_frequencies();
        for w in f.windows(2) {
            assert!((w[1] - w[0] - 0.17).abs() < 1e-12);
        }
    }

    #[test]
    fn short_duration_rejected() {
        let mut y = ExperimentSpec::yaw_study();
        y.duration = 19.0;
        assert!(y.validate("yaw_study").is_err());
        y.duration = 20.0;
        y.validate("yaw_study").unwrap();
    }

    #[test]
    fn fin_state_erection_through_linkage() {
        let g = LinkageGeometry::default();
        assert_eq!(FinState::Erect.erection(&g).unwrap(), 1.0);
        assert_eq!(FinState::Folded.erection(&g).unwrap(), 0.0);
        assert_eq!("erect".parse::<FinState>().unwrap(), FinState::Erect);
        assert!("half".parse::<FinState>().is_err());
    }
}
