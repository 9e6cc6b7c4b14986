//! Derived quantities: servo power, cost of transport, peak-to-peak yaw,
//! yaw-stability improvement and quadratic curve fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::TelemetryRecord;

/// Electrical model of the caudal servo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModel {
    /// Mechanical-to-electrical efficiency in (0, 1].
    pub efficiency: f64,
    /// Electronics draw at standstill (W).
    pub idle_power: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            idle_power: 1.0,
        }
    }
}

impl PowerModel {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::config(
                format!("{prefix}.efficiency"),
                format!("must lie in (0, 1], got {}", self.efficiency),
            ));
        }
        if !(self.idle_power.is_finite() && self.idle_power >= 0.0) {
            return Err(Error::config(
                format!("{prefix}.idle_power"),
                format!("must be >= 0, got {}", self.idle_power),
            ));
        }
        Ok(())
    }
}

/// Electrical power drawn by the servo; back-driving is not regenerated.
pub fn servo_power(model: &PowerModel, torque: f64, angular_vel: f64) -> f64 {
    (torque * angular_vel).max(0.0) / model.efficiency + model.idle_power
}

/// Cost of transport `P / (m·g·U)`.
pub fn cot(mean_power: f64, mass: f64, gravity: f64, mean_speed: f64) -> Result<f64> {
    if !(mean_speed > 0.0) {
        return Err(Error::UndefinedCot { mean_speed });
    }
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("mass must be > 0, got {mass}")));
    }
    Ok(mean_power / (mass * gravity * mean_speed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotReport {
    pub mean_power: f64,
    pub mean_speed: f64,
    pub cot: f64,
}

impl CotReport {
    pub fn new(mean_power: f64, mean_speed: f64, mass: f64, gravity: f64) -> Result<Self> {
        Ok(Self {
            mean_power,
            mean_speed,
            cot: cot(mean_power, mass, gravity, mean_speed)?,
        })
    }
}

/// Max minus min of `values` over samples with `window.0 <= t <= window.1`.
/// The window must span at least three gait periods.
pub fn peak_to_peak(times: &[f64], values: &[f64], window: (f64, f64), period: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::Domain("times and values differ in length".into()));
    }
    if !(window.1 - window.0 >= 3.0 * period * (1.0 - 1e-9)) {
        return Err(Error::InsufficientData(format!(
            "window of {:.3} s is shorter than 3 cycles of {:.3} s",
            window.1 - window.0,
            period
        )));
    }
    let (lo, hi) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 - 1e-9 && **t <= window.1 + 1e-9)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
            (lo.min(*v), hi.max(*v))
        });
    if lo > hi {
        return Err(Error::InsufficientData("no samples in window".into()));
    }
    Ok(hi - lo)
}

/// Relative reduction of peak-to-peak yaw, in percent.
pub fn improvement(folded_p2p: f64, erect_p2p: f64) -> Result<f64> {
    if !(folded_p2p > 0.0) {
        return Err(Error::Domain(format!(
            "folded peak-to-peak must be > 0, got {folded_p2p}"
        )));
    }
    Ok((folded_p2p - erect_p2p) / folded_p2p * 100.0)
}

/// Least-squares parabola `c2·x² + c1·x + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub r_squared: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.c2 * x + self.c1) * x + self.c0
    }
}

/// Degree-2 least squares via modified Gram-Schmidt QR of the centred
/// Vandermonde matrix.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    let n = points.len();
    let xm = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mut cols: [Vec<f64>; 3] = [
        vec![1.0; n],
        points.iter().map(|p| p.0 - xm).collect(),
        points.iter().map(|p| (p.0 - xm).powi(2)).collect(),
    ];
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        let original = dot(&cols[j], &cols[j]).sqrt();
        for i in 0..j {
            let (left, right) = cols.split_at_mut(j);
            let q = &left[i];
            let rij = dot(q, &right[0]);
            r[i][j] = rij;
            right[0].iter_mut().zip(q).for_each(|(v, qv)| *v -= rij * qv);
        }
        let norm = dot(&cols[j], &cols[j]).sqrt();
        if !(norm > 1e-10 * original.max(1.0)) {
            return Err(Error::Rank(
                "abscissae do not support a quadratic (fewer than 3 distinct values)".into(),
            ));
        }
        r[j][j] = norm;
        cols[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: [f64; 3] = std::array::from_fn(|j| dot(&cols[j], &y));
    let mut b = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| r[i][k] * b[k]).sum();
        b[i] = (qty[i] - s) / r[i][i];
    }
    // Undo the centring: b0 + b1·(x-m) + b2·(x-m)².
    let c2 = b[2];
    let c1 = b[1] - 2.0 * b[2] * xm;
    let c0 = b[0] - b[1] * xm + b[2] * xm * xm;
    let fit = QuadraticFit {
        c2,
        c1,
        c0,
        r_squared: 0.0,
    };
    let ym = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|(x, v)| (v - fit.eval(*x)).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(QuadraticFit { r_squared, ..fit })
}

/// Seconds discarded at the start of every run: `max(5 s, 5 gait cycles)`.
pub fn transient_duration(frequency: f64) -> f64 {
    if frequency > 0.0 {
        (5.0f64).max(5.0 / frequency)
    } else {
        5.0
    }
}

/// End-anchored averaging window covering a whole number of gait cycles
/// after the transient.
pub fn steady_window(end_time: f64, frequency: f64) -> Result<(f64, f64)> {
    let start = transient_duration(frequency);
    let available = end_time - start;
    if frequency <= 0.0 {
        if available <= 0.0 {
            return Err(Error::InsufficientData("run ends inside the transient".into()));
        }
        return Ok((start, end_time));
    }
    let cycles = (available * frequency + 1e-9).floor();
    if cycles < 3.0 {
        return Err(Error::InsufficientData(format!(
            "only {cycles} whole cycles after the {start:.2} s transient; need 3"
        )));
    }
    Ok((end_time - cycles / frequency, end_time))
}

/// Steady-state metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub window_start: f64,
    pub window_end: f64,
    /// Net displacement over the window divided by its duration (m/s).
    pub mean_speed: f64,
    /// Time-averaged servo power (W).
    pub mean_power: f64,
    pub cot: f64,
    /// deg
    pub p2p_yaw: f64,
    /// Mean yaw over the window (deg).
    pub mean_yaw: f64,
}

pub fn run_metrics(records: &[TelemetryRecord], frequency: f64, mass: f64, gravity: f64) -> Result<RunMetrics> {
    let last = records
        .last()
        .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?;
    let (t0, _) = steady_window(last.time, frequency)?;
    let first_idx = records.partition_point(|r| r.time < t0 - 1e-9);
    let window = &records[first_idx..];
    if window.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two samples in the steady window".into(),
        ));
    }
    let (a, b) = (&window[0], &window[window.len() - 1]);
    let elapsed = b.time - a.time;
    let mean_speed = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt() / elapsed;
    let energy: f64 = window
        .windows(2)
        .map(|w| 0.5 * (w[0].power_w + w[1].power_w) * (w[1].time - w[0].time))
        .sum();
    let mean_power = energy / elapsed;
    let times: Vec<f64> = window.iter().map(|r| r.time).collect();
    let yaw: Vec<f64> = window.iter().map(|r| r.yaw_deg).collect();
    let period = if frequency > 0.0 { 1.0 / frequency } else { 0.0 };
    let p2p_yaw = peak_to_peak(&times, &yaw, (a.time, b.time), period)?;
    let mean_yaw = yaw.iter().sum::<f64>() / yaw.len() as f64;
    Ok(RunMetrics {
        window_start: a.time,
        window_end: b.time,
        mean_speed,
        mean_power,
        cot: cot(mean_power, mass, gravity, mean_speed)?,
        p2p_yaw,
        mean_yaw,
    })
}
