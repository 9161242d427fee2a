//! Mobility traces: timestamped waypoints with piecewise-linear
//! interpolation.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{HexGrid, Point};
use crate::sim::SimTime;

/// An ordered waypoint list. Times are strictly increasing; queries outside
/// the trace clamp to the nearest endpoint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MobilityTrace {
    waypoints: Vec<(SimTime, Point)>,
}

impl MobilityTrace {
    pub fn new(waypoints: Vec<(SimTime, Point)>) -> Result<MobilityTrace, String> {
        if waypoints.is_empty() {
            return Err(String::from("trace needs at least one waypoint"));
        }
        for w in waypoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(alloc::format!(
                    "waypoint times must be strictly increasing ({} then {})",
                    w[0].0,
                    w[1].0
                ));
            }
        }
        Ok(MobilityTrace { waypoints })
    }

    /// Clamp every waypoint into the grid region; returns one warning per
    /// clipped waypoint.
    pub fn clipped_to(mut self, grid: &HexGrid) -> (MobilityTrace, Vec<String>) {
        let mut warnings = Vec::new();
        let reach = grid.cell_radius() * 1.5 * grid.extent() as f64;
        for (t, p) in self.waypoints.iter_mut() {
            if grid.cell_of_position(*p).is_err() {
                let scale = reach / libm::hypot(p.x - grid.origin().x, p.y - grid.origin().y);
                let clipped = Point::new(
                    grid.origin().x + (p.x - grid.origin().x) * scale,
                    grid.origin().y + (p.y - grid.origin().y) * scale,
                );
                warnings.push(alloc::format!("waypoint at {t} outside grid; clipped {p} -> {clipped}"));
                *p = clipped;
            }
        }
        (self, warnings)
    }

    pub fn waypoints(&self) -> &[(SimTime, Point)] {
        &self.waypoints
    }

    pub fn start_time(&self) -> SimTime {
        self.waypoints[0].0
    }

    pub fn end_time(&self) -> SimTime {
        self.waypoints[self.waypoints.len() - 1].0
    }

    /// Position at `t`: exact at waypoints, linear between them, clamped
    /// outside the trace.
    pub fn position_at(&self, t: SimTime) -> Point {
        if t <= self.start_time() {
            return self.waypoints[0].1;
        }
        if t >= self.end_time() {
            return self.waypoints[self.waypoints.len() - 1].1;
        }
        let idx = self.waypoints.partition_point(|(wt, _)| *wt <= t);
        let (t0, p0) = self.waypoints[idx - 1];
        let (t1, p1) = self.waypoints[idx];
        if t == t0 {
            return p0;
        }
        let frac = (t.micros() - t0.micros()) as f64 / (t1.micros() - t0.micros()) as f64;
        Point::new(p0.x + frac * (p1.x - p0.x), p0.y + frac * (p1.y - p0.y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs_f64(s)
    }

    fn trace() -> MobilityTrace {
        MobilityTrace::new(vec![
            (t(0.0), Point::new(0.0, 0.0)),
            (t(10.0), Point::new(100.0, 0.0)),
            (t(20.0), Point::new(100.0, 50.0)),
        ])
        .unwrap()
    }

    #[test]
    fn exact_at_waypoints() {
        let tr = trace();
        assert_eq!(tr.position_at(t(0.0)), Point::new(0.0, 0.0));
        assert_eq!(tr.position_at(t(10.0)), Point::new(100.0, 0.0));
        assert_eq!(tr.position_at(t(20.0)), Point::new(100.0, 50.0));
    }

    #[test]
    fn midpoint_in_time_is_spatial_midpoint() {
        let tr = trace();
        let mid = tr.position_at(t(5.0));
        assert!((mid.x - 50.0).abs() < 1e-9);
        assert!((mid.y - 0.0).abs() < 1e-9);
    }

    #[test]
    fn clamps_outside_range() {
        let tr = trace();
        assert_eq!(tr.position_at(t(100.0)), Point::new(100.0, 50.0));
        assert_eq!(tr.position_at(SimTime::ZERO), Point::new(0.0, 0.0));
    }

    #[test]
    fn speed_never_exceeds_max_segment_speed() {
        let tr = trace();
        // Segment speeds: 10 m/s then 5 m/s.
        let mut prev = tr.position_at(t(0.0));
        let mut worst: f64 = 0.0;
        let dt = 0.05;
        let mut s = dt;
        while s <= 20.0 {
            let p = tr.position_at(t(s));
            worst = worst.max(prev.distance(p) / dt);
            prev = p;
            s += dt;
        }
        assert!(worst <= 10.0 + 1e-6, "interpolated speed {worst}");
    }

    #[test]
    fn rejects_bad_waypoint_lists() {
        assert!(MobilityTrace::new(vec![]).is_err());
        assert!(MobilityTrace::new(vec![
            (t(1.0), Point::new(0.0, 0.0)),
            (t(1.0), Point::new(1.0, 0.0)),
        ])
        .is_err());
    }

    #[test]
    fn clipping_pulls_waypoints_into_grid() {
        let grid = HexGrid::new(100.0, Point::new(0.0, 0.0), 3).unwrap();
        let tr = MobilityTrace::new(vec![
            (t(0.0), Point::new(0.0, 0.0)),
            (t(10.0), Point::new(5000.0, 0.0)),
        ])
        .unwrap();
        let (clipped, warnings) = tr.clipped_to(&grid);
        assert_eq!(warnings.len(), 1);
        for (_, p) in clipped.waypoints() {
            assert!(grid.cell_of_position(*p).is_ok());
        }
    }
}
