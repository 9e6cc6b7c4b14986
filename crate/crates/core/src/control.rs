//! Actuation laws: caudal gait generation, PID depth hold and the syringe
//! buoyancy actuator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::{Actuation, Controller, FishParams, GaitState, Observation};

pub const MAX_AMPLITUDE_DEG: f64 = 45.0;
pub const MAX_BIAS_DEG: f64 = 30.0;

/// Caudal-fin oscillation law plus dorsal-fin erection setpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitCommand {
    /// Hz
    pub frequency: f64,
    /// deg
    pub amplitude: f64,
    /// deg, turning offset
    pub bias: f64,
    pub fin_erection_setpoint: f64,
}

impl GaitCommand {
    pub fn new(frequency: f64, amplitude: f64, bias: f64, fin_erection_setpoint: f64) -> Self {
        Self {
            frequency,
            amplitude,
            bias,
            fin_erection_setpoint,
        }
    }

    /// Tail held straight, fin folded.
    pub fn off() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency >= 0.0) {
            return Err(Error::config(
                format!("{prefix}.frequency"),
                format!("must be >= 0, got {}", self.frequency),
            ));
        }
        if !(0.0..=MAX_AMPLITUDE_DEG).contains(&self.amplitude) {
            return Err(Error::config(
                format!("{prefix}.amplitude"),
                format!("must lie in [0, {MAX_AMPLITUDE_DEG}] deg, got {}", self.amplitude),
            ));
        }
        if !(self.bias.abs() <= MAX_BIAS_DEG) {
            return Err(Error::config(
                format!("{prefix}.bias"),
                format!("|bias| must be <= {MAX_BIAS_DEG} deg, got {}", self.bias),
            ));
        }
        if !(0.0..=1.0).contains(&self.fin_erection_setpoint) {
            return Err(Error::config(
                format!("{prefix}.fin_erection_setpoint"),
                format!("must lie in [0, 1], got {}", self.fin_erection_setpoint),
            ));
        }
        Ok(())
    }

    /// Gait period in seconds, infinite when the tail is still.
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Instantaneous servo kinematics in radians.
    pub fn state_at(&self, t: f64) -> GaitState {
        let omega = std::f64::consts::TAU * self.frequency;
        let (s, c) = (omega * t).sin_cos();
        let amplitude = self.amplitude.to_radians();
        let bias = self.bias.to_radians();
        GaitState {
            frequency: self.frequency,
            amplitude,
            bias,
            angle: bias + amplitude * s,
            rate: amplitude * omega * c,
        }
    }
}

/// Commanded servo angle in degrees: `bias + amplitude·sin(2π·f·t)`.
pub fn servo_angle(gait: &GaitCommand, t: f64) -> f64 {
    gait.bias + gait.amplitude * (std::f64::consts::TAU * gait.frequency * t).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
    pub output_limit: f64,
}

impl PidGains {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("ki", self.ki), ("kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("gain must be >= 0, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("integral_limit", self.integral_limit),
            ("output_limit", self.output_limit),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("limit must be > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Integral accumulator and previous error carried between PID updates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidMemory {
    pub integral: f64,
    pub prev_error: f64,
}

/// One PID update with rectangle-rule integration and a clamped integral.
pub fn pid_step(gains: &PidGains, error: f64, dt: f64, memory: PidMemory) -> (f64, PidMemory) {
    let integral = (memory.integral + error * dt).clamp(-gains.integral_limit, gains.integral_limit);
    let derivative = (error - memory.prev_error) / dt;
    let u = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    (
        u.clamp(-gains.output_limit, gains.output_limit),
        PidMemory {
            integral,
            prev_error: error,
        },
    )
}

/// Syringe swim-bladder actuator. Drawing water in makes the fish heavier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuoyancyState {
    /// m³
    pub syringe_volume: f64,
    pub volume_min: f64,
    pub volume_max: f64,
    /// m³/s
    pub max_rate: f64,
    /// Volume at which the ballasted fish is neutrally buoyant (m³).
    pub neutral_volume: f64,
}

impl Default for BuoyancyState {
    /// 60 mL syringe, half full at neutral, 2 mL/s piston speed.
    fn default() -> Self {
        Self {
            syringe_volume: 30e-6,
            volume_min: 0.0,
            volume_max: 60e-6,
            max_rate: 2e-6,
            neutral_volume: 30e-6,
        }
    }
}

impl BuoyancyState {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let all = [
            ("syringe_volume", self.syringe_volume),
            ("volume_min", self.volume_min),
            ("volume_max", self.volume_max),
            ("max_rate", self.max_rate),
            ("neutral_volume", self.neutral_volume),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.{name}"),
                format!("must be finite, got {v}"),
            ));
        }
        if !(self.volume_min < self.volume_max) {
            return Err(Error::config(format!("{prefix}.volume_max"), "must exceed volume_min"));
        }
        if !(self.max_rate > 0.0) {
            return Err(Error::config(format!("{prefix}.max_rate"), "must be > 0"));
        }
        if !(self.volume_min..=self.volume_max).contains(&self.syringe_volume) {
            return Err(Error::config(
                format!("{prefix}.syringe_volume"),
                "must lie in [volume_min, volume_max]",
            ));
        }
        if !(self.volume_min..=self.volume_max).contains(&self.neutral_volume) {
            return Err(Error::config(
                format!("{prefix}.neutral_volume"),
                "must lie in [volume_min, volume_max]",
            ));
        }
        Ok(())
    }

    /// Moves the piston at `rate` (clamped to the motor limit) for `dt`
    /// seconds, stopping at the syringe end stops.
    pub fn apply_rate(&mut self, rate: f64, dt: f64) {
        let rate = rate.clamp(-self.max_rate, self.max_rate);
        self.syringe_volume = (self.syringe_volume + rate * dt).clamp(self.volume_min, self.volume_max);
    }
}

/// Net buoyant force of the syringe, positive up: `-ρ·g·(V - V_neutral)`.
pub fn buoyancy_force(params: &FishParams, buoy: &BuoyancyState) -> f64 {
    -params.water_density * params.gravity * (buoy.syringe_volume - buoy.neutral_volume)
}

/// Depth-hold loop settings that are not PID gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthHold {
    pub enabled: bool,
    /// Outer PID loop period (s).
    pub control_period: f64,
    /// Depth sensor quantum (m).
    pub sensor_resolution: f64,
    /// Piston position loop gain (1/s) turning a volume setpoint into a rate command.
    pub piston_gain: f64,
}

impl Default for DepthHold {
    fn default() -> Self {
        Self {
            enabled: true,
            control_period: 0.05,
            sensor_resolution: 0.001,
            piston_gain: 2.0,
        }
    }
}

impl DepthHold {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("control_period", self.control_period),
            ("sensor_resolution", self.sensor_resolution),
            ("piston_gain", self.piston_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn quantize(&self, depth: f64) -> f64 {
        (depth / self.sensor_resolution).round() * self.sensor_resolution
    }
}

/// PID on depth error producing a syringe volume setpoint around neutral,
/// tracked by the piston loop. Positive error (too deep) expels water.
///
/// Returns the PID output (volume offset, m³) with updated memory.
pub fn depth_pid(
    target_depth: f64,
    measured_depth: f64,
    gains: &PidGains,
    dt: f64,
    memory: PidMemory,
) -> (f64, PidMemory) {
    pid_step(gains, measured_depth - target_depth, dt, memory)
}

/// Piston rate command that drives the syringe toward `neutral - offset`,
/// clamped to the actuator rate limit.
pub fn piston_rate(buoy: &BuoyancyState, volume_offset: f64, piston_gain: f64) -> f64 {
    let setpoint = (buoy.neutral_volume - volume_offset).clamp(buoy.volume_min, buoy.volume_max);
    ((setpoint - buoy.syringe_volume) * piston_gain).clamp(-buoy.max_rate, buoy.max_rate)
}

/// Rate command of the full depth loop for one update of length `dt`.
pub fn depth_controller(
    target_depth: f64,
    measured_depth: f64,
    gains: &PidGains,
    buoy: &BuoyancyState,
    hold: &DepthHold,
    dt: f64,
    memory: PidMemory,
) -> (f64, PidMemory) {
    let (offset, memory) = depth_pid(target_depth, hold.quantize(measured_depth), gains, dt, memory);
    (piston_rate(buoy, offset, hold.piston_gain), memory)
}

/// Piecewise-constant schedule; the entry with the latest start time not
/// after `t` is active, and the first entry applies before its start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timed<T> {
    pub start: f64,
    pub value: T,
}

pub fn active_at<T>(schedule: &[Timed<T>], t: f64) -> &T {
    let idx = schedule.partition_point(|e| e.start <= t);
    &schedule[idx.saturating_sub(1)].value
}

pub fn validate_schedule<T>(schedule: &[Timed<T>], prefix: &str) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::config(prefix, "schedule must not be empty"));
    }
    for (i, w) in schedule.windows(2).enumerate() {
        if !(w[1].start > w[0].start) {
            return Err(Error::config(
                format!("{prefix}[{}].start", i + 1),
                "start times must be strictly increasing",
            ));
        }
    }
    if let Some((i, e)) = schedule.iter().enumerate().find(|(_, e)| !e.start.is_finite()) {
        return Err(Error::config(
            format!("{prefix}[{i}].start"),
            format!("must be finite, got {}", e.start),
        ));
    }
    Ok(())
}

/// Gait schedule plus optional PID depth hold, advanced by the simulation
/// clock. Yaw is deliberately left uncontrolled.
#[derive(Debug, Clone)]
pub struct FishController {
    gaits: Vec<Timed<GaitCommand>>,
    depth_targets: Vec<Timed<f64>>,
    gains: PidGains,
    hold: DepthHold,
    buoyancy: BuoyancyState,
    memory: PidMemory,
    offset: f64,
    next_update: f64,
    started: bool,
    /// Largest |integral| seen, for anti-windup checks.
    pub peak_integral: f64,
}

impl FishController {
    pub fn new(
        gaits: Vec<Timed<GaitCommand>>,
        depth_targets: Vec<Timed<f64>>,
        gains: PidGains,
        hold: DepthHold,
        buoyancy: BuoyancyState,
    ) -> Result<Self> {
        validate_schedule(&gaits, "gait_schedule")?;
        validate_schedule(&depth_targets, "depth_schedule")?;
        for (i, g) in gaits.iter().enumerate() {
            g.value.validate(&format!("gait_schedule[{i}].value"))?;
        }
        for (i, d) in depth_targets.iter().enumerate() {
            if !(d.value.is_finite() && d.value >= 0.0) {
                return Err(Error::config(
                    format!("depth_schedule[{i}].value"),
                    format!("target depth must be finite and >= 0, got {}", d.value),
                ));
            }
        }
        gains.validate("pid")?;
        hold.validate("depth_hold")?;
        Ok(Self {
            gaits,
            depth_targets,
            gains,
            hold,
            buoyancy,
            memory: PidMemory::default(),
            offset: 0.0,
            next_update: 0.0,
            started: false,
            peak_integral: 0.0,
        })
    }

    /// Constant gait with depth held at `depth`.
    pub fn steady(
        gait: GaitCommand,
        depth: f64,
        gains: PidGains,
        hold: DepthHold,
        buoyancy: BuoyancyState,
    ) -> Result<Self> {
        Self::new(
            vec![Timed {
                start: 0.0,
                value: gait,
            }],
            vec![Timed {
                start: 0.0,
                value: depth,
            }],
            gains,
            hold,
            buoyancy,
        )
    }

    pub fn target_depth(&self, t: f64) -> f64 {
        *active_at(&self.depth_targets, t)
    }
}

impl Controller for FishController {
    fn actuate(&mut self, obs: &Observation) -> Actuation {
        let gait = *active_at(&self.gaits, obs.time);
        if !self.hold.enabled {
            return Actuation {
                gait,
                syringe_rate: 0.0,
            };
        }
        self.buoyancy.syringe_volume = obs.syringe_volume;
        if obs.time + 1e-12 >= self.next_update {
            let target = self.target_depth(obs.time);
            let measured = self.hold.quantize(obs.measured_depth);
            if !self.started {
                // Bumpless start: no derivative kick on the first sample.
                self.memory.prev_error = measured - target;
                self.started = true;
            }
            let (offset, memory) = depth_pid(target, measured, &self.gains, self.hold.control_period, self.memory);
            self.offset = offset;
            self.memory = memory;
            self.peak_integral = self.peak_integral.max(memory.integral.abs());
            self.next_update += self.hold.control_period;
        }
        Actuation {
            gait,
            syringe_rate: piston_rate(&self.buoyancy, self.offset, self.hold.piston_gain),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains {
            kp,
            ki,
            kd,
            integral_limit: 10.0,
            output_limit: 10.0,
        }
    }

    #[test]
    fn servo_angle_examples() {
        let g = GaitCommand::new(1.0, 20.0, 5.0, 0.0);
        assert_eq!(servo_angle(&g, 0.0), 5.0);
        let g = GaitCommand::new(1.0, 20.0, 0.0, 0.0);
        assert_relative_eq!(servo_angle(&g, 0.25), 20.0, max_relative = 1e-12);
        assert!((servo_angle(&g, 0.125) - 14.142).abs() < 1e-3);
        assert_relative_eq!(
            g.state_at(0.125).angle.to_degrees(),
            servo_angle(&g, 0.125),
            max_relative = 1e-12
        );
    }

    #[test]
    fn symmetric_gait_has_zero_mean() {
        let g = GaitCommand::new(1.7, 30.0, 0.0, 1.0);
        let n = 10_000;
        let period = g.period();
        let mean: f64 = (0..n)
            .map(|k| servo_angle(&g, period * k as f64 / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() <= 1e-12 * g.amplitude, "{mean}");
    }

    #[test]
    fn gait_validation() {
        assert!(GaitCommand::new(1.0, 46.0, 0.0, 0.0).validate("g").is_err());
        assert!(GaitCommand::new(1.0, 20.0, 31.0, 0.0).validate("g").is_err());
        assert!(GaitCommand::new(-1.0, 20.0, 0.0, 0.0).validate("g").is_err());
        assert!(GaitCommand::new(1.0, 20.0, 0.0, 1.5).validate("g").is_err());
        assert!(GaitCommand::new(1.0, 45.0, -30.0, 1.0).validate("g").is_ok());
    }

    #[test]
    fn pid_examples() {
        let (u, _) = pid_step(&gains(1.0, 1.0, 1.0), 0.0, 0.1, PidMemory::default());
        assert_eq!(u, 0.0);
        let (u, _) = pid_step(&gains(2.0, 0.0, 0.0), 0.1, 0.1, PidMemory::default());
        assert_relative_eq!(u, 0.2, max_relative = 1e-12);
        let g = gains(0.0, 1.0, 0.0);
        let (u1, m) = pid_step(&g, 0.1, 0.5, PidMemory::default());
        let (u2, _) = pid_step(&g, 0.1, 0.5, m);
        assert_relative_eq!(u1, 0.05, max_relative = 1e-12);
        assert_relative_eq!(u2, 0.10, max_relative = 1e-12);
    }

    #[test]
    fn pid_output_and_integral_clamp() {
        let g = PidGains {
            kp: 100.0,
            ki: 1.0,
            kd: 0.0,
            integral_limit: 0.5,
            output_limit: 1.0,
        };
        let mut m = PidMemory::default();
        for _ in 0..1000 {
            let (u, next) = pid_step(&g, 1.0, 0.1, m);
            assert!(u.abs() <= 1.0);
            assert!(next.integral.abs() <= 0.5);
            m = next;
        }
    }

    #[test]
    fn buoyancy_examples() {
        let p = FishParams {
            water_density: 1000.0,
            gravity: 9.81,
            ..FishParams::default()
        };
        let mut b = BuoyancyState::default();
        assert_eq!(buoyancy_force(&p, &b), 0.0);
        b.syringe_volume = b.neutral_volume + 10e-6;
        assert_relative_eq!(buoyancy_force(&p, &b), -0.0981, max_relative = 1e-9);
        // Drive far past the end stop.
        for _ in 0..100_000 {
            b.apply_rate(1.0, 0.01);
        }
        assert_eq!(b.syringe_volume, b.volume_max);
        let saturated = -1000.0 * 9.81 * (b.volume_max - b.neutral_volume);
        assert_relative_eq!(buoyancy_force(&p, &b), saturated, max_relative = 1e-12);
    }

    #[test]
    fn depth_controller_signs() {
        let b = BuoyancyState::default();
        let hold = DepthHold::default();
        let g = PidGains {
            kp: 5e-5,
            ki: 0.0,
            kd: 2e-4,
            integral_limit: 0.05,
            output_limit: 30e-6,
        };
        let (rate, _) = depth_controller(0.3, 0.3, &g, &b, &hold, 0.05, PidMemory::default());
        assert_eq!(rate, 0.0);
        // Currently at 0.3 m, new target 0.1 m: too deep, expel at the cap.
        let mem = PidMemory {
            integral: 0.0,
            prev_error: 0.0,
        };
        let (rate, _) = depth_controller(0.1, 0.3, &g, &b, &hold, 0.05, mem);
        assert_eq!(rate, -b.max_rate);
        let (rate, _) = depth_controller(0.3, 0.1, &g, &b, &hold, 0.05, mem);
        assert_eq!(rate, b.max_rate);
    }

    #[test]
    fn schedule_lookup() {
        let s = vec![
            Timed { start: 0.0, value: 1 },
            Timed { start: 5.0, value: 2 },
            Timed { start: 9.0, value: 3 },
        ];
        assert_eq!(*active_at(&s, -1.0), 1);
        assert_eq!(*active_at(&s, 0.0), 1);
        assert_eq!(*active_at(&s, 4.99), 1);
        assert_eq!(*active_at(&s, 5.0), 2);
        assert_eq!(*active_at(&s, 100.0), 3);
        assert!(validate_schedule::<i32>(&[], "s").is_err());
        let bad = vec![Timed { start: 1.0, value: 1 }, Timed { start: 1.0, value: 2 }];
        assert!(validate_schedule(&bad, "s").is_err());
    }

    proptest::proptest! {
        #[test]
        fn actuator_is_rate_limited(rates in proptest::collection::vec(-1e-4f64..1e-4, 1..200)) {
            let mut b = BuoyancyState::default();
            let dt = 0.01;
            for r in rates {
                let before = b.syringe_volume;
                b.apply_rate(r, dt);
                proptest::prop_assert!((b.syringe_volume - before).abs() <= b.max_rate * dt * (1.0 + 1e-12));
                proptest::prop_assert!(b.syringe_volume >= b.volume_min && b.syringe_volume <= b.volume_max);
            }
        }
    }
}
