use std::fmt::Write as _;
use std::path::Path;

use super::depth::StepReport;
use super::sweep::{SweepResult, YawRow};
use crate::error::{Error, Result};
use crate::telemetry::format_sig9;

pub const SWEEP_HEADER: &str = "frequency_hz,amplitude_deg,fin_state,repeats,speed_mean_mps,speed_std_mps,power_mean_w,power_std_w,cot_mean,cot_std,p2p_yaw_mean_deg,p2p_yaw_std_deg";
pub const YAW_HEADER: &str = "amplitude_deg,frequency_hz,folded_p2p_deg,erect_p2p_deg,improvement_pct";
pub const STEP_HEADER: &str = "start_s,from_m,to_m,settling_time_s,overshoot_pct,final_depth_m";

fn join(fields: &[f64]) -> String {
    fields.iter().map(|v| format_sig9(*v)).collect::<Vec<_>>().join(",")
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &result.rows {
        let c = r.condition;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig9(c.frequency),
            format_sig9(c.amplitude),
            c.fin,
            r.repeats,
            join(&[
                r.mean_speed.mean,
                r.mean_speed.std,
                r.mean_power.mean,
                r.mean_power.std,
                r.cot.mean,
                r.cot.std,
                r.p2p_yaw.mean,
                r.p2p_yaw.std
            ])
        );
    }
    out
}

pub fn yaw_csv(rows: &[YawRow]) -> String {
    let mut out = String::from(YAW_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{}",
            join(&[r.amplitude, r.frequency, r.folded_p2p, r.erect_p2p, r.improvement])
        );
    }
    out
}

/// Human-readable yaw table.
pub fn yaw_table_text(rows: &[YawRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>9} {:>9} {:>12} {:>11} {:>13}",
        "amp(deg)", "freq(Hz)", "folded(deg)", "erect(deg)", "improvement"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>9} {:>9} {:>12.2} {:>11.2} {:>12.2}%",
            r.amplitude, r.frequency, r.folded_p2p, r.erect_p2p, r.improvement
        );
    }
    out
}

pub fn step_csv(steps: &[StepReport]) -> String {
    let mut out = String::from(STEP_HEADER);
    out.push('\n');
    for s in steps {
        let settle = s.settling_time.map_or_else(|| "nan".to_string(), format_sig9);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig9(s.start),
            format_sig9(s.from),
            format_sig9(s.to),
            settle,
            format_sig9(s.overshoot_pct),
            format_sig9(s.final_depth)
        );
    }
    out
}

fn write(text: &str, path: &Path) -> Result<usize> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(text.len())
}

pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<usize> {
    write(&sweep_csv(result), path)
}

pub fn write_yaw_table(rows: &[YawRow], path: &Path) -> Result<usize> {
    write(&yaw_csv(rows), path)
}

pub fn write_step_reports(steps: &[StepReport], path: &Path) -> Result<usize> {
    write(&step_csv(steps), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{Condition, ExperimentKind, FinState, Stat, SweepRow};

    #[test]
    fn sweep_csv_golden() {
        let s = |m| Stat { mean: m, std: 0.0 };
        let result = SweepResult {
            kind: ExperimentKind::SpeedSweep,
            rows: vec![SweepRow {
                condition: Condition::new(0.8, 20.0, FinState::Erect),
                repeats: 5,
                mean_speed: s(0.05),
                mean_power: s(1.5),
                cot: s(1.0 / 3.0),
                p2p_yaw: s(12.0),
            }],
        };
        let text = sweep_csv(&result);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_HEADER));
        assert_eq!(lines.next(), Some("0.8,20,erect,5,0.05,0,1.5,0,0.333333333,0,12,0"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn step_csv_marks_unsettled() {
        let steps = [StepReport {
            start: 0.0,
            from: 0.0,
            to: 0.3,
            settling_time: None,
            overshoot_pct: 0.0,
            final_depth: 0.2,
        }];
        assert!(step_csv(&steps).lines().nth(1).unwrap().contains(",nan,"));
    }
}
