use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{net_forces, FishParams, FishState};
use crate::control::{BuoyancyState, GaitCommand};
use crate::error::{Error, Result};
use crate::metrics::{servo_power, PowerModel};
use crate::telemetry::TelemetryRecord;

/// Largest step the integrator accepts (s).
pub const MAX_DT: f64 = 0.01;

/// Seeded white noise on the yaw (IMU) and depth sensor channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNoise {
    pub enabled: bool,
    pub yaw_sigma_deg: f64,
    pub depth_sigma_m: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            enabled: false,
            yaw_sigma_deg: 0.1,
            depth_sigma_m: 0.001,
        }
    }
}

impl SensorNoise {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("yaw_sigma_deg", self.yaw_sigma_deg),
            ("depth_sigma_m", self.depth_sigma_m),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything about the robot that the controller cannot change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plant {
    pub fish: FishParams,
    pub power: PowerModel,
    pub noise: SensorNoise,
    /// Initial syringe state.
    pub buoyancy: BuoyancyState,
}

/// What a controller sees each step.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub time: f64,
    /// True state, for controllers that cheat (tests, open-loop schedules).
    pub state: FishState,
    /// Depth sensor reading (m).
    pub measured_depth: f64,
    /// IMU yaw reading (rad).
    pub measured_yaw: f64,
    /// m³
    pub syringe_volume: f64,
}

/// Controller outputs held for one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuation {
    pub gait: GaitCommand,
    /// Syringe volume rate command (m³/s); the actuator clamps it.
    pub syringe_rate: f64,
}

impl Actuation {
    fn is_finite(&self) -> bool {
        self.gait.frequency.is_finite()
            && self.gait.amplitude.is_finite()
            && self.gait.bias.is_finite()
            && self.gait.fin_erection_setpoint.is_finite()
            && self.syringe_rate.is_finite()
    }
}

pub trait Controller {
    fn actuate(&mut self, obs: &Observation) -> Actuation;
}

impl<F: FnMut(&Observation) -> Actuation> Controller for F {
    fn actuate(&mut self, obs: &Observation) -> Actuation {
        self(obs)
    }
}

/// Inputs held constant across one [`step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub gait: GaitCommand,
    /// Positive up (N).
    pub net_buoyancy: f64,
}

const DIM: usize = 8;
type Vector = [f64; DIM];

fn pack(s: &FishState) -> Vector {
    [
        s.x,
        s.y,
        s.depth,
        s.yaw,
        s.surge_vel,
        s.sway_vel,
        s.yaw_rate,
        s.heave_vel,
    ]
}

fn unpack(v: &Vector, time: f64, servo_angle: f64) -> FishState {
    FishState {
        x: v[0],
        y: v[1],
        depth: v[2],
        yaw: v[3],
        surge_vel: v[4],
        sway_vel: v[5],
        yaw_rate: v[6],
        heave_vel: v[7],
        servo_angle,
        time,
    }
}

fn derivative(params: &FishParams, v: &Vector, t: f64, controls: &Controls) -> Result<Vector> {
    let gait = controls.gait.state_at(t);
    let state = unpack(v, t, gait.angle);
    let f = net_forces(
        params,
        &state,
        &gait,
        controls.gait.fin_erection_setpoint,
        controls.net_buoyancy,
    )?;
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    let (u, w) = (state.surge_vel, state.sway_vel);
    Ok([
        u * cos_yaw - w * sin_yaw,
        u * sin_yaw + w * cos_yaw,
        state.heave_vel,
        state.yaw_rate,
        (f.thrust * gait.bias.cos() + f.drag) / params.mass,
        (f.sway_force + f.sway_drag) / params.mass,
        (f.tail_yaw_moment + f.thrust_yaw_moment + f.yaw_damping_moment) / params.yaw_inertia,
        (-f.net_buoyancy + f.heave_drag) / params.heave_mass(),
    ])
}

fn axpy(base: &Vector, k: &Vector, h: f64) -> Vector {
    std::array::from_fn(|i| base[i] + h * k[i])
}

/// Advances the state by exactly `dt` with classical fourth-order
/// Runge-Kutta. The free surface is a hard boundary: depth is clamped to
/// zero and upward heave velocity removed on contact.
pub fn step(params: &FishParams, state: &FishState, controls: &Controls, dt: f64) -> Result<FishState> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::config(
            "dt",
            format!("step size must lie in (0, {MAX_DT}] s, got {dt}"),
        ));
    }
    let t = state.time;
    let y = pack(state);
    let k1 = derivative(params, &y, t, controls)?;
    let k2 = derivative(params, &axpy(&y, &k1, 0.5 * dt), t + 0.5 * dt, controls)?;
    let k3 = derivative(params, &axpy(&y, &k2, 0.5 * dt), t + 0.5 * dt, controls)?;
    let k4 = derivative(params, &axpy(&y, &k3, dt), t + dt, controls)?;
    let mut next: Vector = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    if next[2] <= 0.0 {
        next[2] = 0.0;
        next[7] = next[7].max(0.0);
    }
    let time = t + dt;
    Ok(unpack(&next, time, controls.gait.state_at(time).angle))
}

fn record(
    plant: &Plant,
    state: &FishState,
    act: &Actuation,
    syringe_volume: f64,
    measured_depth: f64,
    measured_yaw: f64,
) -> TelemetryRecord {
    let gait = act.gait.state_at(state.time);
    let torque = plant.fish.tail_reaction_coeff * gait.rate * gait.rate;
    TelemetryRecord {
        time: state.time,
        x: state.x,
        y: state.y,
        depth: measured_depth,
        yaw_deg: measured_yaw.to_degrees(),
        yaw_rate_dps: state.yaw_rate.to_degrees(),
        surge_mps: state.surge_vel,
        sway_mps: state.sway_vel,
        servo_deg: gait.angle.to_degrees(),
        torque_nm: torque,
        power_w: servo_power(&plant.power, torque, gait.rate.abs()),
        erection: act.gait.fin_erection_setpoint,
        syringe_ml: syringe_volume * 1e6,
    }
}

struct Sensors {
    rng: ChaCha8Rng,
    yaw: Option<Normal<f64>>,
    depth: Option<Normal<f64>>,
}

impl Sensors {
    fn new(noise: &SensorNoise, seed: u64) -> Self {
        let channel =
            |sigma: f64| (noise.enabled && sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma validated"));
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            yaw: channel(noise.yaw_sigma_deg.to_radians()),
            depth: channel(noise.depth_sigma_m),
        }
    }

    fn read(&mut self, state: &FishState) -> (f64, f64) {
        let dz = self.depth.map_or(0.0, |n| n.sample(&mut self.rng));
        let dyaw = self.yaw.map_or(0.0, |n| n.sample(&mut self.rng));
        ((state.depth + dz).max(0.0), state.yaw + dyaw)
    }
}

/// Runs the closed loop for `duration` seconds and returns one record per
/// step, starting with the initial state: `ceil(duration/dt) + 1` records.
pub fn simulate(
    plant: &Plant,
    initial: FishState,
    controller: &mut dyn Controller,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<TelemetryRecord>> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::config("duration", format!("must be > 0, got {duration}")));
    }
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(Error::config(
            "dt",
            format!("step size must lie in (0, {MAX_DT}] s, got {dt}"),
        ));
    }
    if !initial.is_finite() || initial.depth < 0.0 {
        return Err(Error::Domain("initial state must be finite with depth >= 0".into()));
    }
    // Guard against duration/dt landing a hair above an integer.
    let steps = ((duration / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut sensors = Sensors::new(&plant.noise, seed);
    let mut buoyancy = plant.buoyancy;
    let mut state = initial;
    let mut out = Vec::with_capacity(steps + 1);

    let mut observe_and_act = |state: &FishState, volume: f64, out: &mut Vec<TelemetryRecord>| -> Result<Actuation> {
        let (measured_depth, measured_yaw) = sensors.read(state);
        let obs = Observation {
            time: state.time,
            state: *state,
            measured_depth,
            measured_yaw,
            syringe_volume: volume,
        };
        let act = controller.actuate(&obs);
        if !act.is_finite() {
            return Err(Error::SimulationFault {
                time: state.time,
                message: "controller returned non-finite actuation".into(),
            });
        }
        act.gait.validate("gait").map_err(|e| Error::SimulationFault {
            time: state.time,
            message: e.to_string(),
        })?;
        out.push(record(plant, state, &act, volume, measured_depth, measured_yaw));
        Ok(act)
    };

    let mut act = observe_and_act(&state, buoyancy.syringe_volume, &mut out)?;
    for _ in 0..steps {
        let controls = Controls {
            gait: act.gait,
            net_buoyancy: crate::control::buoyancy_force(&plant.fish, &buoyancy),
        };
        state = step(&plant.fish, &state, &controls, dt)?;
        buoyancy.apply_rate(act.syringe_rate, dt);
        if !state.is_finite() {
            return Err(Error::SimulationFault {
                time: state.time,
                message: "state diverged".into(),
            });
        }
        act = observe_and_act(&state, buoyancy.syringe_volume, &mut out)?;
    }
    Ok(out)
}
