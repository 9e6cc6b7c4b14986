//! Rigid-body dynamics of the fish in the horizontal plane (surge, sway,
//! yaw) plus heave, driven by quasi-steady hydrodynamic force laws.
//!
//! Conventions: `x`/`y` are world-frame positions, `depth` is positive down,
//! `yaw` is measured counter-clockwise from the world x-axis. Surge and sway
//! are body-frame velocities; heave velocity is positive down.

mod sim;

pub use sim::{simulate, step, Actuation, Controller, Controls, Observation, Plant, SensorNoise, MAX_DT};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants and surrogate-model coefficients of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FishParams {
    /// Dry mass (kg).
    pub mass: f64,
    /// Yaw moment of inertia including entrained water (kg·m²).
    pub yaw_inertia: f64,
    /// Overall length (m).
    pub body_length: f64,
    /// Nose to servo axis (m).
    pub head_length: f64,
    /// Servo axis to caudal fin trailing edge (m).
    pub tail_length: f64,
    /// Frontal (waterfront) area (m²).
    pub frontal_area: f64,
    pub frontal_drag_coeff: f64,
    /// kg/m³
    pub water_density: f64,
    /// Dimensionless gain of the mean-thrust surrogate.
    pub thrust_coeff: f64,
    pub thrust_freq_exponent: f64,
    pub thrust_amp_exponent: f64,
    /// Tail reaction moment per squared servo rate, N·m/(rad/s)².
    pub tail_reaction_coeff: f64,
    /// Quadratic yaw damping of the hull, N·m/(rad/s)².
    pub yaw_damping_body: f64,
    /// Additional quadratic yaw damping of the fully erect dorsal fin, N·m/(rad/s)².
    pub yaw_damping_fin: f64,
    /// Weight of the lateral head sweep `yaw_rate·head_length` in the
    /// relative flow speed that sets surge drag. Zero recovers plain
    /// quadratic drag on surge speed.
    pub yaw_drag_gain: f64,
    /// Quadratic sway damping, N/(m/s)².
    pub sway_drag_coeff: f64,
    /// Quadratic heave damping, N/(m/s)².
    pub heave_drag_coeff: f64,
    /// Added mass in heave (kg).
    pub heave_added_mass: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for FishParams {
    /// Uncalibrated defaults: dimensions and mass of the prototype, frontal
    /// area from an ellipse over the 290 mm × 128 mm hull section.
    fn default() -> Self {
        Self {
            mass: 2.305,
            yaw_inertia: 0.02,
            body_length: 0.544,
            head_length: 0.266,
            tail_length: 0.288,
            frontal_area: std::f64::consts::FRAC_PI_4 * 0.290 * 0.128,
            frontal_drag_coeff: 0.3,
            water_density: 1000.0,
            thrust_coeff: 0.1,
            thrust_freq_exponent: 2.0,
            thrust_amp_exponent: 2.0,
            tail_reaction_coeff: 0.05,
            yaw_damping_body: 0.28,
            yaw_damping_fin: 0.16,
            yaw_drag_gain: 0.1,
            sway_drag_coeff: 5.0,
            heave_drag_coeff: 60.0,
            heave_added_mass: 2.3,
            gravity: 9.81,
        }
    }
}

impl FishParams {
    /// Checks the parameter invariants, naming offending fields under `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("body_length", self.body_length),
            ("tail_length", self.tail_length),
            ("frontal_area", self.frontal_area),
            ("frontal_drag_coeff", self.frontal_drag_coeff),
            ("water_density", self.water_density),
            ("gravity", self.gravity),
        ];
        let non_negative = [
            ("head_length", self.head_length),
            ("thrust_coeff", self.thrust_coeff),
            ("thrust_freq_exponent", self.thrust_freq_exponent),
            ("thrust_amp_exponent", self.thrust_amp_exponent),
            ("tail_reaction_coeff", self.tail_reaction_coeff),
            ("yaw_damping_body", self.yaw_damping_body),
            ("yaw_damping_fin", self.yaw_damping_fin),
            ("yaw_drag_gain", self.yaw_drag_gain),
            ("sway_drag_coeff", self.sway_drag_coeff),
            ("heave_drag_coeff", self.heave_drag_coeff),
            ("heave_added_mass", self.heave_added_mass),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Mass used in the heave equation.
    pub fn heave_mass(&self) -> f64 {
        self.mass + self.heave_added_mass
    }
}

/// Kinematic state of the fish.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FishState {
    pub x: f64,
    pub y: f64,
    /// Positive down, never negative.
    pub depth: f64,
    /// rad
    pub yaw: f64,
    pub surge_vel: f64,
    pub sway_vel: f64,
    pub yaw_rate: f64,
    /// Positive down.
    pub heave_vel: f64,
    /// rad
    pub servo_angle: f64,
    pub time: f64,
}

impl FishState {
    /// Fish at rest at the given depth.
    pub fn at_depth(depth: f64) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.x,
            self.y,
            self.depth,
            self.yaw,
            self.surge_vel,
            self.sway_vel,
            self.yaw_rate,
            self.heave_vel,
            self.servo_angle,
            self.time,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Instantaneous state of the caudal servo together with the gait that
/// produces it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaitState {
    pub frequency: f64,
    /// rad
    pub amplitude: f64,
    /// rad
    pub bias: f64,
    /// rad
    pub angle: f64,
    /// rad/s
    pub rate: f64,
}

/// Force and moment components acting on the fish at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    /// Cycle-mean thrust magnitude of the active gait (N).
    pub thrust: f64,
    /// Surge drag (N), opposes surge velocity.
    pub drag: f64,
    /// Lateral thrust component from a biased gait (N).
    pub sway_force: f64,
    pub sway_drag: f64,
    /// Reaction moment of the oscillating tail (N·m).
    pub tail_yaw_moment: f64,
    /// Turning moment from the lateral thrust of a biased gait (N·m).
    pub thrust_yaw_moment: f64,
    pub yaw_damping_moment: f64,
    /// Positive up (N).
    pub net_buoyancy: f64,
    /// Opposes heave velocity (N, positive down).
    pub heave_drag: f64,
}

/// Quadratic drag `-(1/2)·ρ·U·|U|·C_d·A`, signed to oppose motion.
pub fn drag_force(params: &FishParams, speed: f64) -> f64 {
    -0.5 * params.water_density * speed * speed.abs() * params.frontal_drag_coeff * params.frontal_area
}

/// Surge drag with the relative flow speed augmented by the lateral sweep
/// of the head, `sqrt(u² + k·(r·l_head)²)`. Reduces to [`drag_force`] when
/// the gain or the yaw rate is zero.
pub fn surge_drag(params: &FishParams, surge_vel: f64, yaw_rate: f64) -> f64 {
    if params.yaw_drag_gain == 0.0 || yaw_rate == 0.0 {
        return drag_force(params, surge_vel);
    }
    let sweep = yaw_rate * params.head_length;
    let relative = (surge_vel * surge_vel + params.yaw_drag_gain * sweep * sweep).sqrt();
    -0.5 * params.water_density * surge_vel * relative * params.frontal_drag_coeff * params.frontal_area
}

/// Cycle-mean thrust `k_T·ρ·A·L_tail²·f^a·θ^b` of a caudal gait with
/// frequency `freq` (Hz) and amplitude `amp` (rad).
pub fn mean_thrust(params: &FishParams, freq: f64, amp: f64) -> Result<f64> {
    if !(freq >= 0.0) || !(amp >= 0.0) {
        return Err(Error::Domain(format!(
            "mean_thrust needs freq >= 0 and amp >= 0, got freq={freq}, amp={amp}"
        )));
    }
    if freq == 0.0 || amp == 0.0 {
        return Ok(0.0);
    }
    Ok(params.thrust_coeff
        * params.water_density
        * params.frontal_area
        * params.tail_length.powi(2)
        * freq.powf(params.thrust_freq_exponent)
        * amp.powf(params.thrust_amp_exponent))
}

/// Composes all force laws for the given state.
pub fn net_forces(
    params: &FishParams,
    state: &FishState,
    gait: &GaitState,
    erection: f64,
    net_buoyancy: f64,
) -> Result<ForceBreakdown> {
    if !(0.0..=1.0).contains(&erection) {
        return Err(Error::Domain(format!("erection must lie in [0, 1], got {erection}")));
    }
    let thrust = mean_thrust(params, gait.frequency, gait.amplitude)?;
    let (sin_b, _) = gait.bias.sin_cos();
    let lateral = thrust * sin_b;
    let r = state.yaw_rate;
    Ok(ForceBreakdown {
        thrust,
        drag: surge_drag(params, state.surge_vel, r),
        sway_force: -lateral,
        sway_drag: -params.sway_drag_coeff * state.sway_vel * state.sway_vel.abs(),
        tail_yaw_moment: params.tail_reaction_coeff * gait.rate * gait.rate.abs(),
        thrust_yaw_moment: lateral * params.tail_length,
        yaw_damping_moment: -(params.yaw_damping_body + erection * params.yaw_damping_fin) * r * r.abs(),
        net_buoyancy,
        heave_drag: -params.heave_drag_coeff * state.heave_vel * state.heave_vel.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eq2_params(rho: f64, cd: f64, area: f64) -> FishParams {
        FishParams {
            water_density: rho,
            frontal_drag_coeff: cd,
            frontal_area: area,
            ..FishParams::default()
        }
    }

    #[test]
    fn drag_hand_arithmetic() {
        let p = eq2_params(1000.0, 0.3, 0.01);
        assert_relative_eq!(drag_force(&p, 0.2), -0.06, max_relative = 1e-12);
        assert_eq!(drag_force(&p, 0.0), 0.0);
        assert_relative_eq!(drag_force(&p, -0.2), 0.06, max_relative = 1e-12);
        let ratio = drag_force(&p, 0.2) / drag_force(&p, 0.1);
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn surge_drag_without_sweep_matches_plain_drag() {
        let p = FishParams {
            yaw_drag_gain: 0.7,
            ..FishParams::default()
        };
        assert_eq!(surge_drag(&p, 0.2, 0.0), drag_force(&p, 0.2));
        let q = FishParams {
            yaw_drag_gain: 0.0,
            ..p
        };
        assert_eq!(surge_drag(&q, 0.2, 1.5), drag_force(&q, 0.2));
        // Sweep increases resistance and keeps the sign opposing surge.
        assert!(surge_drag(&p, 0.2, 1.5) < drag_force(&p, 0.2));
        assert!(surge_drag(&p, -0.2, 1.5) > 0.0);
        assert_eq!(surge_drag(&p, 0.0, 1.5), 0.0);
    }

    #[test]
    fn thrust_examples() {
        let p = FishParams {
            thrust_coeff: 1.0,
            water_density: 1000.0,
            frontal_area: 0.01,
            tail_length: 0.288,
            thrust_freq_exponent: 2.0,
            thrust_amp_exponent: 2.0,
            ..FishParams::default()
        };
        assert_eq!(mean_thrust(&p, 0.0, 0.3).unwrap(), 0.0);
        assert_eq!(mean_thrust(&p, 2.0, 0.0).unwrap(), 0.0);
        let expected = 1000.0 * 0.01 * 0.288f64.powi(2) * 2.5f64.powi(2) * 0.349f64.powi(2);
        let t = mean_thrust(&p, 2.5, 0.349).unwrap();
        assert_relative_eq!(t, expected, max_relative = 1e-12);
        assert!((t - 0.631).abs() < 1e-3, "{t}");
        assert!(mean_thrust(&p, -1.0, 0.3).is_err());
        assert!(mean_thrust(&p, 1.0, -0.3).is_err());
        assert!(mean_thrust(&p, 2.6, 0.349).unwrap() > t);
        assert!(mean_thrust(&p, 2.5, 0.36).unwrap() > t);
    }

    #[test]
    fn equilibrium_has_no_forces() {
        let p = FishParams::default();
        let s = FishState::at_depth(0.3);
        let f = net_forces(&p, &s, &GaitState::default(), 0.5, 0.0).unwrap();
        assert_eq!(f.thrust, 0.0);
        assert_eq!(f.drag, 0.0);
        assert_eq!(f.tail_yaw_moment, 0.0);
        assert_eq!(f.yaw_damping_moment, 0.0);
        assert_eq!(f.net_buoyancy, 0.0);
        assert_eq!(f.heave_drag, 0.0);
        assert_eq!(f.sway_force, 0.0);
        assert_eq!(f.thrust_yaw_moment, 0.0);
    }

    #[test]
    fn fin_damping_hand_arithmetic() {
        let p = FishParams {
            yaw_damping_body: 0.02,
            yaw_damping_fin: 0.01,
            ..FishParams::default()
        };
        let s = FishState {
            yaw_rate: 1.0,
            ..FishState::default()
        };
        let erect = net_forces(&p, &s, &GaitState::default(), 1.0, 0.0).unwrap();
        assert_relative_eq!(erect.yaw_damping_moment, -0.03, max_relative = 1e-12);
        let folded = net_forces(&p, &s, &GaitState::default(), 0.0, 0.0).unwrap();
        assert!(erect.yaw_damping_moment.abs() > folded.yaw_damping_moment.abs());
    }

    #[test]
    fn erection_out_of_range_is_rejected() {
        let p = FishParams::default();
        let s = FishState::default();
        assert!(net_forces(&p, &s, &GaitState::default(), 1.01, 0.0).is_err());
        assert!(net_forces(&p, &s, &GaitState::default(), -0.01, 0.0).is_err());
    }

    #[test]
    fn validate_names_field() {
        let p = FishParams {
            mass: 0.0,
            ..FishParams::default()
        };
        let err = p.validate("fish").unwrap_err().to_string();
        assert!(err.contains("fish.mass"), "{err}");
        let p = FishParams {
            yaw_damping_fin: -1.0,
            ..FishParams::default()
        };
        assert!(p.validate("fish").unwrap_err().to_string().contains("yaw_damping_fin"));
    }

    proptest::proptest! {
        #[test]
        fn force_signs_oppose_motion(
            u in -1.0f64..1.0, r in -5.0f64..5.0, w in -0.5f64..0.5, v in -0.5f64..0.5,
            e in 0.0f64..=1.0, gain in 0.0f64..2.0,
        ) {
            let p = FishParams { yaw_drag_gain: gain, ..FishParams::default() };
            let s = FishState { surge_vel: u, yaw_rate: r, heave_vel: w, sway_vel: v, ..FishState::default() };
            let f = net_forces(&p, &s, &GaitState::default(), e, 0.0).unwrap();
            proptest::prop_assert!(f.drag * u <= 0.0);
            proptest::prop_assert!(f.yaw_damping_moment * r <= 0.0);
            proptest::prop_assert!(f.heave_drag * w <= 0.0);
            proptest::prop_assert!(f.sway_drag * v <= 0.0);
        }
    }
}
