use std::path::Path;

use tuna_sim::telemetry::{parse_telemetry, read_telemetry, write_telemetry, TelemetryRecord, HEADER};
use tuna_sim::Error;

const GOLDEN: &str = include_str!("fixtures/golden_telemetry.csv");

fn rec(values: [f64; 13]) -> TelemetryRecord {
    let [time, x, y, depth, yaw_deg, yaw_rate_dps, surge_mps, sway_mps, servo_deg, torque_nm, power_w, erection, syringe_ml] =
        values;
    TelemetryRecord {
        time,
        x,
        y,
        depth,
        yaw_deg,
        yaw_rate_dps,
        surge_mps,
        sway_mps,
        servo_deg,
        torque_nm,
        power_w,
        erection,
        syringe_ml,
    }
}

fn expected() -> Vec<TelemetryRecord> {
    vec![
        rec([0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5, 1.0, 30.0]),
        rec([
            0.01,
            0.00225,
            -1e-7,
            0.300001234,
            0.125,
            12.5,
            0.225,
            -1e-4,
            20.0,
            0.0123456789,
            6.5,
            1.0,
            30.0000001,
        ]),
        rec([
            0.02,
            0.0045,
            -2e-7,
            0.3,
            0.25,
            -3.25159265,
            0.225,
            0.0,
            -20.0,
            1e-5,
            7.25,
            0.5,
            29.9,
        ]),
    ]
}

#[test]
fn golden_file_parses_to_expected_records() {
    assert_eq!(parse_telemetry(GOLDEN).unwrap(), expected());
}

#[test]
fn expected_records_serialize_to_golden_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let n = write_telemetry(&expected(), &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, GOLDEN);
    assert_eq!(n, GOLDEN.len());
    assert_eq!(read_telemetry(&path).unwrap(), expected());
}

#[test]
fn one_record_is_two_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    write_telemetry(&expected()[..1], &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next(), Some(HEADER));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn unwritable_destination_names_the_path() {
    let path = Path::new("/nonexistent-dir/t.csv");
    match write_telemetry(&expected(), path) {
        Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(parse_telemetry(""), Err(Error::Parse { .. })));
    let swapped = GOLDEN.replacen("time_s,x_m", "x_m,time_s", 1);
    assert!(matches!(parse_telemetry(&swapped), Err(Error::Parse { line: 1, .. })));
    let bad_row = GOLDEN.replacen("0.01,0.00225", "0.01,abc", 1);
    assert!(matches!(parse_telemetry(&bad_row), Err(Error::Parse { line: 3, .. })));
    let mut lines: Vec<&str> = GOLDEN.lines().collect();
    lines.swap(2, 3);
    assert!(matches!(
        parse_telemetry(&(lines.join("\n") + "\n")),
        Err(Error::Validation(_))
    ));
}
