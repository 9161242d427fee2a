//! Axial-coordinate hexagonal grid (pointy-top).

use alloc::vec::Vec;
use core::fmt;

use super::{GeometryError, Point, GEOM_EPS};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// The six axial offsets, counter-clockwise starting due east.
///
/// Offset `k` points at angle `60k` degrees from the cell centre.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Axial cell coordinate. `(q, r)` uniquely identifies a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellId {
    pub q: i32,
    pub r: i32,
}

impl CellId {
    pub const ORIGIN: CellId = CellId { q: 0, r: 0 };

    pub const fn new(q: i32, r: i32) -> Self {
        CellId { q, r }
    }

    /// The six adjacent cells, at axial distance 1.
    pub fn neighbors(self) -> [CellId; 6] {
        NEIGHBOR_OFFSETS.map(|(dq, dr)| CellId::new(self.q + dq, self.r + dr))
    }

    /// Hex (cube) distance between two cells.
    pub fn distance(self, other: CellId) -> u32 {
        let dq = self.q - other.q;
        let dr = self.r - other.r;
        let ds = dq + dr;
        (dq.unsigned_abs() + dr.unsigned_abs() + ds.unsigned_abs()) / 2
    }

    /// Cells on the straight hex line from `self` to `other`, inclusive.
    pub fn line_to(self, other: CellId) -> Vec<CellId> {
        let n = self.distance(other);
        if n == 0 {
            return alloc::vec![self];
        }
        let (aq, ar) = (self.q as f64, self.r as f64);
        let (bq, br) = (other.q as f64, other.r as f64);
        (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                // The tiny bias breaks rounding ties the same way everywhere.
                round_axial(aq + (bq - aq) * t + 1e-6, ar + (br - ar) * t + 1e-6)
            })
            .collect()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.q, self.r)
    }
}

fn round_axial(qf: f64, rf: f64) -> CellId {
    let sf = -qf - rf;
    let mut q = libm::round(qf);
    let mut r = libm::round(rf);
    let s = libm::round(sf);
    let dq = libm::fabs(q - qf);
    let dr = libm::fabs(r - rf);
    let ds = libm::fabs(s - sf);
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    CellId::new(q as i32, r as i32)
}

/// A finite hexagonal grid: all cells within `extent` hex steps of cell
/// (0,0), whose centre sits at `origin`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HexGrid {
    cell_radius: f64,
    origin: Point,
    extent: i32,
}

impl HexGrid {
    pub fn new(cell_radius: f64, origin: Point, extent: i32) -> Result<Self, GeometryError> {
        if !(cell_radius > 0.0) || !cell_radius.is_finite() {
            return Err(GeometryError::InvalidGrid("cell_radius must be positive"));
        }
        if extent < 1 {
            return Err(GeometryError::InvalidGrid("extent must be at least 1"));
        }
        Ok(HexGrid { cell_radius, origin, extent })
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn extent(&self) -> i32 {
        self.extent
    }

    /// Centre of a cell in metres.
    pub fn center(&self, cell: CellId) -> Point {
        let x = self.cell_radius * SQRT3 * (cell.q as f64 + cell.r as f64 / 2.0);
        let y = self.cell_radius * 1.5 * cell.r as f64;
        Point::new(self.origin.x + x, self.origin.y + y)
    }

    /// The six corners of a cell, counter-clockwise. Corner `j` sits at
    /// angle `60j + 30` degrees; the edge shared with neighbour `k` runs
    /// from corner `(k + 5) % 6` to corner `k`.
    pub fn corners(&self, cell: CellId) -> [Point; 6] {
        let c = self.center(cell);
        let r = self.cell_radius;
        [
            Point::new(c.x + r * SQRT3_2, c.y + r * 0.5),
            Point::new(c.x, c.y + r),
            Point::new(c.x - r * SQRT3_2, c.y + r * 0.5),
            Point::new(c.x - r * SQRT3_2, c.y - r * 0.5),
            Point::new(c.x, c.y - r),
            Point::new(c.x + r * SQRT3_2, c.y - r * 0.5),
        ]
    }

    pub fn contains_cell(&self, cell: CellId) -> bool {
        CellId::ORIGIN.distance(cell) <= self.extent as u32
    }

    /// The unique cell whose hexagon contains `p`.
    pub fn cell_of_position(&self, p: Point) -> Result<CellId, GeometryError> {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        let qf = (SQRT3 / 3.0 * dx - dy / 3.0) / self.cell_radius;
        let rf = (2.0 / 3.0 * dy) / self.cell_radius;
        let cell = round_axial(qf, rf);
        if self.contains_cell(cell) {
            Ok(cell)
        } else {
            Err(GeometryError::OutOfGrid)
        }
    }

    /// Every cell of the grid, in deterministic `(q, r)` order.
    pub fn cells(&self) -> Vec<CellId> {
        let e = self.extent;
        let mut out = Vec::new();
        for q in -e..=e {
            let lo = (-e).max(-q - e);
            let hi = e.min(-q + e);
            for r in lo..=hi {
                out.push(CellId::new(q, r));
            }
        }
        out
    }

    /// True if `p` lies inside (or on the boundary of) the hexagon of `cell`.
    pub fn cell_contains(&self, cell: CellId, p: Point) -> bool {
        // A pointy-top hexagon is the intersection of three slabs whose
        // normals point at 0, 60 and 120 degrees; the apothem is r * sqrt3/2.
        let c = self.center(cell);
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        let r = self.cell_radius;
        let eps = GEOM_EPS;
        libm::fabs(dx) <= r * SQRT3_2 + eps
            && libm::fabs(dx + SQRT3 * dy) <= r * SQRT3 + 2.0 * eps
            && libm::fabs(dx - SQRT3 * dy) <= r * SQRT3 + 2.0 * eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::rng::SimRng;
    use std::collections::BTreeSet;

    fn grid() -> HexGrid {
        HexGrid::new(100.0, Point::new(0.0, 0.0), 8).unwrap()
    }

    #[test]
    fn neighbors_of_origin() {
        let got: BTreeSet<_> = CellId::ORIGIN.neighbors().into_iter().collect();
        let want: BTreeSet<_> = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
            .into_iter()
            .map(|(q, r)| CellId::new(q, r))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn neighbors_translate() {
        let base = CellId::new(2, -1);
        let got: BTreeSet<_> = base.neighbors().into_iter().collect();
        let want: BTreeSet<_> = NEIGHBOR_OFFSETS
            .iter()
            .map(|(dq, dr)| CellId::new(2 + dq, -1 + dr))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn neighbor_symmetry_random_cells() {
        let mut rng = SimRng::substream(7, "hex-symmetry");
        for _ in 0..100 {
            let a = CellId::new(
                (rng.next_u64() % 41) as i32 - 20,
                (rng.next_u64() % 41) as i32 - 20,
            );
            for b in a.neighbors() {
                assert!(b.neighbors().contains(&a), "asymmetric adjacency {a} {b}");
                assert_eq!(a.distance(b), 1);
            }
        }
    }

    #[test]
    fn cell_of_position_roundtrips_centres() {
        let g = grid();
        for cell in [CellId::ORIGIN, CellId::new(3, -2), CellId::new(-4, 4)] {
            assert_eq!(g.cell_of_position(g.center(cell)).unwrap(), cell);
        }
    }

    #[test]
    fn cell_of_position_matches_nearest_centre() {
        let g = grid();
        let cells = g.cells();
        let mut rng = SimRng::substream(11, "hex-nearest");
        let reach = 0.8 * g.cell_radius() * SQRT3 * g.extent() as f64;
        for _ in 0..1000 {
            let p = Point::new(
                rng.uniform_range(-reach, reach),
                rng.uniform_range(-reach, reach),
            );
            let got = g.cell_of_position(p).unwrap();
            let nearest = cells
                .iter()
                .copied()
                .min_by(|a, b| {
                    g.center(*a)
                        .distance(p)
                        .partial_cmp(&g.center(*b).distance(p))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(got, nearest, "point {p}");
        }
    }

    #[test]
    fn out_of_grid_position_rejected() {
        let g = grid();
        let far = 2.0 * g.cell_radius() * SQRT3 * g.extent() as f64;
        assert_eq!(g.cell_of_position(Point::new(far, 0.0)), Err(GeometryError::OutOfGrid));
    }

    #[test]
    fn cells_count_matches_extent_formula() {
        let g = grid();
        let e = g.extent() as usize;
        assert_eq!(g.cells().len(), 1 + 3 * e * (e + 1));
    }

    #[test]
    fn cell_contains_agrees_with_cell_of_position() {
        let g = grid();
        let mut rng = SimRng::substream(13, "hex-contains");
        for _ in 0..500 {
            let p = Point::new(rng.uniform_range(-500.0, 500.0), rng.uniform_range(-500.0, 500.0));
            let cell = g.cell_of_position(p).unwrap();
            assert!(g.cell_contains(cell, p), "{p} not inside its own cell {cell}");
        }
    }

    #[test]
    fn line_endpoints_and_adjacency() {
        let a = CellId::new(-3, 1);
        let b = CellId::new(4, -2);
        let line = a.line_to(b);
        assert_eq!(*line.first().unwrap(), a);
        assert_eq!(*line.last().unwrap(), b);
        for w in line.windows(2) {
            assert_eq!(w[0].distance(w[1]), 1);
        }
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(HexGrid::new(0.0, Point::default(), 3).is_err());
        assert!(HexGrid::new(10.0, Point::default(), 0).is_err());
    }
}
