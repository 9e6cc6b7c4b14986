//! Planar four-bar linkage that erects and folds the dorsal fin.
//!
//! Joints are labelled A (crank ground pivot), B (crank tip), C (coupler /
//! rocker joint) and D (rocker ground pivot). The crank is the first fin
//! ray, turned by the magnetic coupling; the rocker is the rear ray. Angles
//! are measured from the ground line A→D.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// C lies to the left of the directed diagonal B→D.
    #[default]
    Open,
    Crossed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageGeometry {
    pub ground_len: f64,
    pub crank_len: f64,
    pub coupler_len: f64,
    pub rocker_len: f64,
    pub ground_pivot_a: Point,
    pub ground_pivot_b: Point,
    /// rad
    pub drive_angle_folded: f64,
    /// rad
    pub drive_angle_erect: f64,
    /// Free-text provenance of the chosen lengths.
    #[serde(default)]
    pub description: String,
}

impl Default for LinkageGeometry {
    /// Sweeping the crank from 25° to 100° lifts joint C by 73 mm, the
    /// difference between erect and folded body height.
    fn default() -> Self {
        Self {
            ground_len: 0.035,
            crank_len: 0.08,
            coupler_len: 0.05,
            rocker_len: 0.08,
            ground_pivot_a: Point::new(0.0, 0.0),
            ground_pivot_b: Point::new(0.035, 0.0),
            drive_angle_folded: 25f64.to_radians(),
            drive_angle_erect: 100f64.to_radians(),
            description: "Lengths in m. Crank 25 deg -> 100 deg (75 deg travel) lifts the coupler-rocker joint \
                          from 7.0 mm to 80.0 mm above the ground line, a 73 mm change matching erect-minus-folded \
                          body height (201 - 128 mm). Grashof, shortest link grounded."
                .to_string(),
        }
    }
}

impl LinkageGeometry {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("ground_len", self.ground_len),
            ("crank_len", self.crank_len),
            ("coupler_len", self.coupler_len),
            ("rocker_len", self.rocker_len),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("link length must be > 0, got {v}"),
                ));
            }
        }
        let span = self.ground_pivot_a.dist(self.ground_pivot_b);
        if !((span - self.ground_len).abs() <= 1e-9 * self.ground_len.max(1.0)) {
            return Err(Error::config(
                format!("{prefix}.ground_pivot_b"),
                format!("pivot separation {span} differs from ground_len {}", self.ground_len),
            ));
        }
        if !(self.drive_angle_folded.is_finite() && self.drive_angle_erect.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.drive_angle_folded"),
                "drive angles must be finite",
            ));
        }
        if self.drive_angle_folded == self.drive_angle_erect {
            return Err(Error::config(
                format!("{prefix}.drive_angle_erect"),
                "must differ from drive_angle_folded",
            ));
        }
        Ok(())
    }

    fn ground_direction(&self) -> f64 {
        let (a, b) = (self.ground_pivot_a, self.ground_pivot_b);
        (b.y - a.y).atan2(b.x - a.x)
    }

    pub fn lengths(&self) -> [f64; 4] {
        [self.ground_len, self.crank_len, self.coupler_len, self.rocker_len]
    }

    pub fn grashof(&self) -> GrashofClass {
        grashof_class(self.lengths())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrashofClass {
    /// Shortest link is the crank.
    CrankRocker,
    /// Shortest link is the ground.
    DoubleCrank,
    /// Shortest link is the coupler.
    GrashofDoubleRocker,
    /// s + l > p + q: no link fully rotates.
    NonGrashof,
    /// s + l = p + q: folding configurations exist.
    ChangePoint,
}

/// Classifies `[ground, crank, coupler, rocker]` lengths by the Grashof rule.
pub fn grashof_class(lengths: [f64; 4]) -> GrashofClass {
    let mut sorted = lengths;
    sorted.sort_by(f64::total_cmp);
    let lhs = sorted[0] + sorted[3];
    let rhs = sorted[1] + sorted[2];
    if (lhs - rhs).abs() <= 1e-12 * rhs {
        return GrashofClass::ChangePoint;
    }
    if lhs > rhs {
        return GrashofClass::NonGrashof;
    }
    let shortest = (0..4)
        .min_by(|&i, &j| lengths[i].total_cmp(&lengths[j]))
        .expect("four links");
    match shortest {
        0 => GrashofClass::DoubleCrank,
        1 | 3 => GrashofClass::CrankRocker,
        _ => GrashofClass::GrashofDoubleRocker,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageState {
    pub drive_angle: f64,
    /// A, B, C, D.
    pub joint_positions: [Point; 4],
    pub branch: Branch,
    /// Rocker angle from the ground line (rad).
    pub rocker_angle: f64,
    pub erection_fraction: f64,
}

impl LinkageState {
    /// Largest mismatch between a link's joint separation and its length.
    pub fn closure_residual(&self, geom: &LinkageGeometry) -> f64 {
        let [a, b, c, d] = self.joint_positions;
        [
            (a.dist(d) - geom.ground_len).abs(),
            (a.dist(b) - geom.crank_len).abs(),
            (b.dist(c) - geom.coupler_len).abs(),
            (d.dist(c) - geom.rocker_len).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Joint positions and rocker angle for a drive angle on one branch.
fn solve_positions(geom: &LinkageGeometry, drive_angle: f64, branch: Branch) -> Result<([Point; 4], f64)> {
    let g = geom.ground_direction();
    let a = geom.ground_pivot_a;
    let d = geom.ground_pivot_b;
    let (s, c) = (drive_angle + g).sin_cos();
    let b = Point::new(a.x + geom.crank_len * c, a.y + geom.crank_len * s);
    let (dx, dy) = (d.x - b.x, d.y - b.y);
    let diag = dx.hypot(dy);
    let (r1, r2) = (geom.coupler_len, geom.rocker_len);
    if diag > r1 + r2 || diag < (r1 - r2).abs() || diag == 0.0 {
        return Err(Error::Unreachable {
            angle_deg: drive_angle.to_degrees(),
        });
    }
    let along = (r1 * r1 - r2 * r2 + diag * diag) / (2.0 * diag);
    let h = (r1 * r1 - along * along).max(0.0).sqrt();
    let (ux, uy) = (dx / diag, dy / diag);
    let base = Point::new(b.x + along * ux, b.y + along * uy);
    let sign = match branch {
        Branch::Open => 1.0,
        Branch::Crossed => -1.0,
    };
    let joint_c = Point::new(base.x - sign * h * uy, base.y + sign * h * ux);
    let rocker = (joint_c.y - d.y).atan2(joint_c.x - d.x) - g;
    Ok(([a, b, joint_c, d], rocker))
}

/// Solves the loop-closure equations for `drive_angle` on `branch`.
pub fn solve_linkage(geom: &LinkageGeometry, drive_angle: f64, branch: Branch) -> Result<LinkageState> {
    let (joints, rocker) = solve_positions(geom, drive_angle, branch)?;
    let erection = erection_from_rocker(geom, rocker, branch)?;
    Ok(LinkageState {
        drive_angle,
        joint_positions: joints,
        branch,
        rocker_angle: rocker,
        erection_fraction: erection,
    })
}

fn erection_from_rocker(geom: &LinkageGeometry, rocker: f64, branch: Branch) -> Result<f64> {
    let (_, folded) = solve_positions(geom, geom.drive_angle_folded, branch)?;
    let (_, erect) = solve_positions(geom, geom.drive_angle_erect, branch)?;
    Ok(((rocker - folded) / (erect - folded)).clamp(0.0, 1.0))
}

/// Normalized fin deployment with a flag raised when the input angle lay
/// outside the folded/erect range and was clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Erection {
    pub value: f64,
    pub clamped: bool,
}

/// Fraction of the folded→erect rocker swing reached at `drive_angle` on
/// the open branch: 0 folded, 1 erect.
pub fn erection_fraction(geom: &LinkageGeometry, drive_angle: f64) -> Result<Erection> {
    let lo = geom.drive_angle_folded.min(geom.drive_angle_erect);
    let hi = geom.drive_angle_folded.max(geom.drive_angle_erect);
    let clamped = !(lo..=hi).contains(&drive_angle);
    let angle = drive_angle.clamp(lo, hi);
    if angle == geom.drive_angle_folded {
        return Ok(Erection { value: 0.0, clamped });
    }
    if angle == geom.drive_angle_erect {
        return Ok(Erection { value: 1.0, clamped });
    }
    let (_, rocker) = solve_positions(geom, angle, Branch::Open)?;
    Ok(Erection {
        value: erection_from_rocker(geom, rocker, Branch::Open)?,
        clamped,
    })
}

/// Drive angle that yields erection `e`, by bisection on the open branch.
pub fn drive_angle_for(geom: &LinkageGeometry, e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::Domain(format!("erection must lie in [0, 1], got {e}")));
    }
    let (mut lo, mut hi) = (geom.drive_angle_folded, geom.drive_angle_erect);
    if e == 0.0 {
        return Ok(lo);
    }
    if e == 1.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erection_fraction(geom, mid)?.value < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Erect and folded extents of the dorsal fin and hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinGeometry {
    /// Overall height with the fin erect (m).
    pub height_erect: f64,
    pub height_folded: f64,
    /// Exposed lateral fin area when fully erect (m²).
    pub lateral_area_max: f64,
    pub lateral_area_min: f64,
}

impl Default for FinGeometry {
    fn default() -> Self {
        Self {
            height_erect: 0.201,
            height_folded: 0.128,
            lateral_area_max: 0.004,
            lateral_area_min: 0.0,
        }
    }
}

impl FinGeometry {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.height_folded.is_finite() && self.height_erect > self.height_folded && self.height_folded > 0.0) {
            return Err(Error::config(
                format!("{prefix}.height_erect"),
                "need height_erect > height_folded > 0",
            ));
        }
        if !(self.lateral_area_min >= 0.0
            && self.lateral_area_max >= self.lateral_area_min
            && self.lateral_area_max.is_finite())
        {
            return Err(Error::config(
                format!("{prefix}.lateral_area_max"),
                "need lateral_area_max >= lateral_area_min >= 0",
            ));
        }
        Ok(())
    }
}

fn check_fraction(e: f64) -> Result<()> {
    if (0.0..=1.0).contains(&e) {
        Ok(())
    } else {
        Err(Error::Domain(format!("erection must lie in [0, 1], got {e}")))
    }
}

pub fn body_height(fin: &FinGeometry, e: f64) -> Result<f64> {
    check_fraction(e)?;
    Ok(fin.height_folded + e * (fin.height_erect - fin.height_folded))
}

pub fn exposed_lateral_area(fin: &FinGeometry, e: f64) -> Result<f64> {
    check_fraction(e)?;
    Ok(fin.lateral_area_min + e * (fin.lateral_area_max - fin.lateral_area_min))
}

/// Magnetic drive of the first fin ray, reduced to a torque limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagneticCoupling {
    /// Largest torque the magnets transmit before slipping (N·m).
    pub max_torque: f64,
}

impl Default for MagneticCoupling {
    fn default() -> Self {
        Self { max_torque: 0.05 }
    }
}

impl MagneticCoupling {
    /// Passes `torque` through or reports slip.
    pub fn transmit(&self, torque: f64) -> Result<f64> {
        if torque.abs() > self.max_torque {
            Err(Error::Slip {
                required: torque.abs(),
                limit: self.max_torque,
            })
        } else {
            Ok(torque)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(ground: f64, crank: f64, coupler: f64, rocker: f64) -> LinkageGeometry {
        LinkageGeometry {
            ground_len: ground,
            crank_len: crank,
            coupler_len: coupler,
            rocker_len: rocker,
            ground_pivot_a: Point::new(0.0, 0.0),
            ground_pivot_b: Point::new(ground, 0.0),
            drive_angle_folded: 45f64.to_radians(),
            drive_angle_erect: 135f64.to_radians(),
            description: String::new(),
        }
    }

    #[test]
    fn parallelogram_at_right_angle() {
        let g = geom(2.0, 1.0, 2.0, 1.0);
        let s = solve_linkage(&g, 90f64.to_radians(), Branch::Open).unwrap();
        let [_, b, c, _] = s.joint_positions;
        assert!((s.rocker_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((c.y - b.y).abs() < 1e-12, "coupler parallel to ground");
        assert!((c.x - 2.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crossed_branch_is_the_mirror_solution() {
        let g = geom(2.0, 1.0, 2.0, 1.0);
        let s = solve_linkage(&g, 90f64.to_radians(), Branch::Crossed).unwrap();
        let c = s.joint_positions[2];
        assert!((c.x - 1.2).abs() < 1e-12 && (c.y + 0.6).abs() < 1e-12, "{c:?}");
        assert!(s.closure_residual(&g) < 1e-12);
    }

    /// Finds C by scanning the rocker angle for |C(φ) - B| = coupler and
    /// refining each sign change by bisection.
    fn rocker_scan_oracle(g: &LinkageGeometry, drive: f64) -> Vec<Point> {
        let b = Point::new(g.crank_len * drive.cos(), g.crank_len * drive.sin());
        let c_of = |phi: f64| Point::new(g.ground_len + g.rocker_len * phi.cos(), g.rocker_len * phi.sin());
        let f = |phi: f64| c_of(phi).dist(b) - g.coupler_len;
        let n = 20_000;
        let mut roots = Vec::new();
        for k in 0..n {
            let (mut lo, mut hi) = (
                -std::f64::consts::PI + std::f64::consts::TAU * k as f64 / n as f64,
                -std::f64::consts::PI + std::f64::consts::TAU * (k + 1) as f64 / n as f64,
            );
            if f(lo).signum() == f(hi).signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(lo).signum() == f(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(c_of(0.5 * (lo + hi)));
        }
        roots
    }

    #[test]
    fn general_geometry_matches_circle_oracle() {
        let g = geom(0.06, 0.02, 0.05, 0.04);
        let drive = 60f64.to_radians();
        let roots = rocker_scan_oracle(&g, drive);
        assert_eq!(roots.len(), 2);
        for branch in [Branch::Open, Branch::Crossed] {
            let s = solve_linkage(&g, drive, branch).unwrap();
            let c = s.joint_positions[2];
            let best = roots.iter().map(|r| r.dist(c)).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9, "{branch:?}: {best}");
            assert!(s.closure_residual(&g) <= 1e-9);
        }
        let open = solve_linkage(&g, drive, Branch::Open).unwrap().joint_positions[2];
        let crossed = solve_linkage(&g, drive, Branch::Crossed).unwrap().joint_positions[2];
        assert!(open.dist(crossed) > 1e-3);
    }

    #[test]
    fn unreachable_configuration() {
        let g = geom(10.0, 1.0, 1.0, 1.0);
        let err = solve_linkage(&g, 0.0, Branch::Open).unwrap_err();
        assert!(matches!(err, Error::Unreachable { angle_deg } if angle_deg == 0.0));
    }

    #[test]
    fn erection_endpoints_and_midpoint() {
        let g = LinkageGeometry::default();
        assert_eq!(erection_fraction(&g, g.drive_angle_folded).unwrap().value, 0.0);
        assert_eq!(erection_fraction(&g, g.drive_angle_erect).unwrap().value, 1.0);
        let e = erection_fraction(&g, g.drive_angle_erect + 0.2).unwrap();
        assert!(e.clamped && e.value == 1.0);
        let e = erection_fraction(&g, g.drive_angle_folded - 0.2).unwrap();
        assert!(e.clamped && e.value == 0.0);

        // Symmetric geometry: a parallelogram swept 45°..135°.
        let sym = geom(2.0, 1.0, 2.0, 1.0);
        let mid = 0.5 * (sym.drive_angle_folded + sym.drive_angle_erect);
        let e = erection_fraction(&sym, mid).unwrap();
        // Dense sweep: fraction of rocker travel reached at the midpoint.
        let rockers: Vec<f64> = (0..=1000)
            .map(|k| sym.drive_angle_folded + (sym.drive_angle_erect - sym.drive_angle_folded) * k as f64 / 1000.0)
            .map(|a| solve_linkage(&sym, a, Branch::Open).unwrap().rocker_angle)
            .collect();
        let oracle = (rockers[500] - rockers[0]) / (rockers[1000] - rockers[0]);
        assert!((e.value - oracle).abs() < 1e-12);
        assert!((e.value - 0.5).abs() <= 0.05);
        assert!(!e.clamped);
    }

    #[test]
    fn default_geometry_lifts_fin_by_73_mm() {
        let g = LinkageGeometry::default();
        g.validate("linkage").unwrap();
        let folded = solve_linkage(&g, g.drive_angle_folded, Branch::Open).unwrap();
        let erect = solve_linkage(&g, g.drive_angle_erect, Branch::Open).unwrap();
        let lift = erect.joint_positions[2].y - folded.joint_positions[2].y;
        let fin = FinGeometry::default();
        assert!((lift - (fin.height_erect - fin.height_folded)).abs() < 1e-3, "{lift}");
        assert!((g.drive_angle_erect - g.drive_angle_folded).to_degrees() <= 120.0);
    }

    #[test]
    fn drive_angle_inverse() {
        let g = LinkageGeometry::default();
        for e in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let a = drive_angle_for(&g, e).unwrap();
            assert!((erection_fraction(&g, a).unwrap().value - e).abs() < 1e-9);
        }
        assert!(drive_angle_for(&g, 1.2).is_err());
    }

    #[test]
    fn grashof_classes() {
        assert_eq!(grashof_class([0.06, 0.02, 0.05, 0.04]), GrashofClass::CrankRocker);
        assert_eq!(grashof_class([2.0, 1.0, 2.0, 1.0]), GrashofClass::ChangePoint);
        assert_eq!(grashof_class([10.0, 1.0, 1.0, 1.0]), GrashofClass::NonGrashof);
        assert_eq!(grashof_class([0.02, 0.06, 0.05, 0.04]), GrashofClass::DoubleCrank);
        assert_eq!(
            grashof_class([0.06, 0.05, 0.02, 0.04]),
            GrashofClass::GrashofDoubleRocker
        );
        assert_eq!(LinkageGeometry::default().grashof(), GrashofClass::DoubleCrank);
    }

    #[test]
    fn heights_and_areas() {
        let fin = FinGeometry::default();
        assert_eq!(body_height(&fin, 1.0).unwrap(), 0.201);
        assert_eq!(body_height(&fin, 0.0).unwrap(), 0.128);
        assert!((body_height(&fin, 0.5).unwrap() - 0.1645).abs() < 1e-12);
        assert!(body_height(&fin, 1.1).is_err());
        let fin = FinGeometry {
            lateral_area_min: 0.0,
            lateral_area_max: 0.004,
            ..fin
        };
        assert_eq!(exposed_lateral_area(&fin, 0.0).unwrap(), 0.0);
        assert_eq!(exposed_lateral_area(&fin, 1.0).unwrap(), 0.004);
        assert!((exposed_lateral_area(&fin, 0.25).unwrap() - 0.001).abs() < 1e-15);
        assert!(exposed_lateral_area(&fin, -0.1).is_err());
    }

    #[test]
    fn coupling_slip() {
        let m = MagneticCoupling { max_torque: 0.05 };
        assert_eq!(m.transmit(0.04).unwrap(), 0.04);
        assert!(matches!(m.transmit(-0.06), Err(Error::Slip { .. })));
    }

    #[test]
    fn validation() {
        let g = LinkageGeometry {
            ground_pivot_b: Point::new(0.05, 0.0),
            ..LinkageGeometry::default()
        };
        assert!(g
            .validate("linkage")
            .unwrap_err()
            .to_string()
            .contains("linkage.ground_pivot_b"));
        let mut g = LinkageGeometry::default();
        g.drive_angle_erect = g.drive_angle_folded;
        assert!(g.validate("linkage").is_err());
        let g = LinkageGeometry {
            coupler_len: 0.0,
            ..LinkageGeometry::default()
        };
        assert!(g.validate("linkage").is_err());
    }
}
