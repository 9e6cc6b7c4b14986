//! JSON run configuration. Every section is validated at load time and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{validate_schedule, BuoyancyState, DepthHold, GaitCommand, PidGains, Timed};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentKind, ExperimentSpec};
use crate::hydro::{FishParams, Plant, SensorNoise, MAX_DT};
use crate::linkage::{FinGeometry, LinkageGeometry, MagneticCoupling};
use crate::metrics::PowerModel;

/// The committed calibrated configuration.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../config/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthStepConfig {
    pub initial_depth: f64,
    pub schedule: Vec<Timed<f64>>,
    pub duration: f64,
}

impl Default for DepthStepConfig {
    fn default() -> Self {
        Self {
            initial_depth: 0.0,
            schedule: vec![
                Timed { start: 0.0, value: 0.3 },
                Timed {
                    start: 90.0,
                    value: 0.0,
                },
            ],
            duration: 180.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub fish: FishParams,
    pub power: PowerModel,
    pub pid: PidGains,
    pub depth_hold: DepthHold,
    pub buoyancy: BuoyancyState,
    pub linkage: LinkageGeometry,
    pub fin: FinGeometry,
    pub coupling: MagneticCoupling,
    pub noise: SensorNoise,
    /// Cruising depth held during swimming experiments (m).
    pub swim_depth: f64,
    /// Gait schedule of the `run` subcommand.
    pub gait_schedule: Vec<Timed<GaitCommand>>,
    pub run_duration: f64,
    pub depth_step: DepthStepConfig,
    pub speed_sweep: ExperimentSpec,
    pub yaw_study: ExperimentSpec,
    pub seed: u64,
    /// Integration step (s).
    pub dt: f64,
    pub telemetry_rate_hz: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    /// Uncalibrated baseline.
    fn default() -> Self {
        Self {
            fish: FishParams::default(),
            power: PowerModel::default(),
            pid: PidGains {
                kp: 5e-5,
                ki: 0.0,
                kd: 2e-4,
                integral_limit: 0.05,
                output_limit: 30e-6,
            },
            depth_hold: DepthHold::default(),
            buoyancy: BuoyancyState::default(),
            linkage: LinkageGeometry::default(),
            fin: FinGeometry::default(),
            coupling: MagneticCoupling::default(),
            noise: SensorNoise::default(),
            swim_depth: 0.3,
            gait_schedule: vec![Timed {
                start: 0.0,
                value: GaitCommand::new(2.5, 20.0, 0.0, 1.0),
            }],
            run_duration: 30.0,
            depth_step: DepthStepConfig::default(),
            speed_sweep: ExperimentSpec::speed_sweep(),
            yaw_study: ExperimentSpec::yaw_study(),
            seed: 1,
            dt: 0.001,
            telemetry_rate_hz: 100.0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    /// The committed calibrated robot.
    pub fn calibrated() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("committed default config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(
                if path.is_empty() { ".".to_string() } else { path },
                e.into_inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.fish.validate("fish")?;
        self.power.validate("power")?;
        self.pid.validate("pid")?;
        self.depth_hold.validate("depth_hold")?;
        self.buoyancy.validate("buoyancy")?;
        self.linkage.validate("linkage")?;
        self.fin.validate("fin")?;
        if !(self.coupling.max_torque > 0.0 && self.coupling.max_torque.is_finite()) {
            return Err(Error::config("coupling.max_torque", "must be > 0"));
        }
        self.noise.validate("noise")?;
        if !(self.swim_depth.is_finite() && self.swim_depth >= 0.0) {
            return Err(Error::config("swim_depth", "must be finite and >= 0"));
        }
        validate_schedule(&self.gait_schedule, "gait_schedule")?;
        for (i, g) in self.gait_schedule.iter().enumerate() {
            g.value.validate(&format!("gait_schedule[{i}].value"))?;
        }
        if !(self.run_duration > 0.0 && self.run_duration.is_finite()) {
            return Err(Error::config("run_duration", "must be > 0"));
        }
        validate_schedule(&self.depth_step.schedule, "depth_step.schedule")?;
        for (i, t) in self.depth_step.schedule.iter().enumerate() {
            if !(t.value.is_finite() && t.value >= 0.0) {
                return Err(Error::config(
                    format!("depth_step.schedule[{i}].value"),
                    "target depth must be finite and >= 0",
                ));
            }
        }
        if !(self.depth_step.initial_depth.is_finite() && self.depth_step.initial_depth >= 0.0) {
            return Err(Error::config("depth_step.initial_depth", "must be finite and >= 0"));
        }
        if !(self.depth_step.duration > 0.0 && self.depth_step.duration.is_finite()) {
            return Err(Error::config("depth_step.duration", "must be > 0"));
        }
        self.speed_sweep.validate("speed_sweep")?;
        if self.speed_sweep.kind != ExperimentKind::SpeedSweep {
            return Err(Error::config("speed_sweep.kind", "must be `speed_sweep`"));
        }
        self.yaw_study.validate("yaw_study")?;
        if self.yaw_study.kind != ExperimentKind::YawStudy {
            return Err(Error::config("yaw_study.kind", "must be `yaw_study`"));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::config("dt", format!("must lie in (0, {MAX_DT}]")));
        }
        if !(self.telemetry_rate_hz > 0.0 && self.telemetry_rate_hz.is_finite()) {
            return Err(Error::config("telemetry_rate_hz", "must be > 0"));
        }
        Ok(())
    }

    pub fn plant(&self) -> Plant {
        Plant {
            fish: self.fish,
            power: self.power,
            noise: self.noise,
            buoyancy: self.buoyancy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_default_loads() {
        let cfg = RunConfig::calibrated();
        cfg.validate().unwrap();
        assert_eq!(cfg.fish.mass, 2.305);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    fn mutate(f: impl FnOnce(&mut serde_json::Value)) -> Result<RunConfig> {
        let mut v: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
        f(&mut v);
        RunConfig::from_json(&v.to_string())
    }

    fn path_of(err: Error) -> String {
        match err {
            Error::Config { path, .. } => path,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = mutate(|v| {
            v["fish"]["fin_colour"] = "blue".into();
        })
        .unwrap_err();
        assert!(path_of(err).starts_with("fish"));
        let err = mutate(|v| {
            v["bogus"] = 1.into();
        })
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }

    #[test]
    fn invariant_violations_name_the_field() {
        type Mutation = Box<dyn Fn(&mut serde_json::Value)>;
        let cases: Vec<(&str, Mutation)> = vec![
            ("fish.mass", Box::new(|v| v["fish"]["mass"] = (-1.0).into())),
            (
                "fish.yaw_damping_fin",
                Box::new(|v| v["fish"]["yaw_damping_fin"] = (-0.1).into()),
            ),
            ("power.efficiency", Box::new(|v| v["power"]["efficiency"] = 1.5.into())),
            ("pid.output_limit", Box::new(|v| v["pid"]["output_limit"] = 0.0.into())),
            ("pid.kp", Box::new(|v| v["pid"]["kp"] = (-1.0).into())),
            (
                "buoyancy.syringe_volume",
                Box::new(|v| v["buoyancy"]["syringe_volume"] = 1.0.into()),
            ),
            (
                "linkage.crank_len",
                Box::new(|v| v["linkage"]["crank_len"] = 0.0.into()),
            ),
            ("fin.height_erect", Box::new(|v| v["fin"]["height_erect"] = 0.1.into())),
            (
                "gait_schedule[0].value.amplitude",
                Box::new(|v| v["gait_schedule"][0]["value"]["amplitude"] = 50.0.into()),
            ),
            (
                "speed_sweep.repeats",
                Box::new(|v| v["speed_sweep"]["repeats"] = 0.into()),
            ),
            (
                "yaw_study.duration",
                Box::new(|v| v["yaw_study"]["duration"] = 5.0.into()),
            ),
            ("dt", Box::new(|v| v["dt"] = 0.5.into())),
            (
                "depth_step.schedule[0].value",
                Box::new(|v| v["depth_step"]["schedule"][0]["value"] = (-1.0).into()),
            ),
        ];
        for (expected, f) in cases {
            let err = mutate(|v| f(v)).unwrap_err();
            assert_eq!(path_of(err), expected);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = RunConfig::load(Path::new("/nonexistent/cfg.json")).unwrap_err();
        assert!(err.is_io());
    }
}
