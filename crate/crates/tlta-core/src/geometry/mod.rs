//! Planar geometry and the protected-zone compiler.
//!
//! Coordinates are metres in a flat plane. Cells are regular hexagons on an
//! axial grid; zones are simple polygons. [`compile_zones`] turns a protected
//! zone into the full layer structure used by the protocol: the covering cell
//! set, its boundary `c1`, the adjacent ring `c0`, further outer rings, the
//! surveillance perimeter (outer boundary of `c1`) and the outbound perimeter
//! (a scaled copy of the zone strictly containing `c1`).

mod hex;
mod polygon;
mod zones;

pub use hex::{CellId, HexGrid, NEIGHBOR_OFFSETS};
pub use polygon::{point_segment_distance, segment_distance, segments_intersect, Polygon};
pub use zones::{
    cell_intersects_polygon, compile_zones, compile_zones_with, cover_cells,
    dist_polygon_to_cells, OpMode, ZoneMap,
};

use core::fmt;

/// Tolerance for geometric predicates, in metres (or square metres for
/// areas). Coordinates are metre-scale, so this sits far below any physical
/// noise.
pub const GEOM_EPS: f64 = 1e-9;

/// A point in the plane, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3},{:.3})", self.x, self.y)
    }
}

/// Errors from grid and polygon operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryError {
    /// Polygon violates its invariants (too few vertices, self-intersecting,
    /// or area below tolerance).
    InvalidPolygon(&'static str),
    /// A position or polygon lies outside the grid extent.
    OutOfGrid,
    /// Grid parameters out of range.
    InvalidGrid(&'static str),
    /// Scale factor out of range.
    InvalidScale,
    /// No outbound perimeter containing `c1` fits within the grid extent.
    OpOutOfGrid,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidPolygon(why) => write!(f, "invalid polygon: {why}"),
            GeometryError::OutOfGrid => write!(f, "position outside the grid extent"),
            GeometryError::InvalidGrid(why) => write!(f, "invalid grid: {why}"),
            GeometryError::InvalidScale => write!(f, "scale factor must be positive"),
            GeometryError::OpOutOfGrid => {
                write!(f, "no outbound perimeter containing c1 fits the grid extent")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

#[cfg(test)]
pub(crate) mod testutil {
    use alloc::vec::Vec;

    use super::{Point, Polygon};
    use crate::sim::rng::SimRng;

    /// Random star-shaped polygon around `centre` (always simple).
    pub(crate) fn random_polygon(
        rng: &mut SimRng,
        centre: Point,
        r_min: f64,
        r_max: f64,
    ) -> Polygon {
        let n = 5 + (rng.next_u64() % 8) as usize;
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.uniform_range(0.0, core::f64::consts::TAU))
            .collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 1..n {
            if angles[i] - angles[i - 1] < 1e-3 {
                angles[i] += 2e-3;
            }
        }
        let vertices = angles
            .into_iter()
            .map(|th| {
                let r = rng.uniform_range(r_min, r_max);
                Point::new(centre.x + r * libm::cos(th), centre.y + r * libm::sin(th))
            })
            .collect();
        Polygon::new(vertices).expect("star polygon is simple")
    }
}
