//! The zone compiler: cover set, boundary layers, and perimeters.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use super::polygon::{segment_distance, segments_intersect};
use super::{CellId, GeometryError, HexGrid, Point, Polygon, GEOM_EPS};

/// Increment applied to the outbound-perimeter scale until it clears `c1`.
const OP_INFLATE_STEP: f64 = 0.05;
const OP_INFLATE_MAX_STEPS: u32 = 10_000;

/// How the outbound perimeter is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpMode {
    /// Scale the protected zone about its centroid, inflating in steps of
    /// 0.05 until the perimeter strictly clears the `c1` cells.
    Scaled(f64),
    /// Collapse the outbound perimeter onto the surveillance perimeter.
    /// Degenerate by design: control configurations use it to demonstrate
    /// the judder that the sp/op separation avoids.
    CollapseToSp,
}

/// Compiled zone geometry.
///
/// * `cover` — connected cell set whose union contains the protected zone.
/// * `c1` — cells of `cover` adjacent to at least one non-cover cell.
/// * `c0` — non-cover cells adjacent to `c1`.
/// * `outer_layers` — successive rings beyond `c0` (`c-1`, `c-2`, ...).
/// * `sp` — the surveillance perimeter: the outer boundary polyline of the
///   `c1` cell region (closed; the last vertex connects to the first).
/// * `op` — the outbound perimeter, strictly containing the `c1` cells
///   unless collapsed onto `sp`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZoneMap {
    pub pz: Polygon,
    pub cover: BTreeSet<CellId>,
    pub c1: BTreeSet<CellId>,
    pub c0: BTreeSet<CellId>,
    pub outer_layers: Vec<BTreeSet<CellId>>,
    pub sp: Vec<Point>,
    pub op: Polygon,
    /// Effective scale of `op` relative to `pz`; zero when collapsed onto
    /// `sp`.
    pub op_scale: f64,
    /// The scale that was asked for before auto-inflation.
    pub op_scale_requested: f64,
}

impl ZoneMap {
    pub fn in_pz(&self, p: Point) -> bool {
        self.pz.contains(p)
    }

    pub fn in_op(&self, p: Point) -> bool {
        self.op.contains(p)
    }

    /// True when a handover from `from` to `to` crosses the surveillance
    /// perimeter inbound.
    pub fn sp_inbound(&self, from: CellId, to: CellId) -> bool {
        self.c0.contains(&from) && self.c1.contains(&to)
    }
}

/// A cell is covered when its centre or any corner lies in the polygon, any
/// polygon vertex lies in the cell, or any polygon edge crosses any cell
/// edge. Exact for simple polygons at hex granularity.
pub fn cell_intersects_polygon(grid: &HexGrid, cell: CellId, poly: &Polygon) -> bool {
    if poly.contains(grid.center(cell)) {
        return true;
    }
    let corners = grid.corners(cell);
    if corners.iter().any(|c| poly.contains(*c)) {
        return true;
    }
    if poly.vertices().iter().any(|v| grid.cell_contains(cell, *v)) {
        return true;
    }
    for i in 0..6 {
        let (h1, h2) = (corners[i], corners[(i + 1) % 6]);
        for (p1, p2) in poly.edges() {
            if segments_intersect(h1, h2, p1, p2) {
                return true;
            }
        }
    }
    false
}

/// The connected cell set whose union region contains `pz`.
///
/// The raw intersection set is connected for most zones; when a non-convex
/// zone produces islands, they are bridged along shortest hex lines toward
/// the component holding the zone centroid.
pub fn cover_cells(pz: &Polygon, grid: &HexGrid) -> Result<BTreeSet<CellId>, GeometryError> {
    let mut raw = BTreeSet::new();
    for cell in grid.cells() {
        if cell_intersects_polygon(grid, cell, pz) {
            raw.insert(cell);
        }
    }
    if raw.is_empty() {
        return Err(GeometryError::OutOfGrid);
    }
    // The zone must be fully servable: no intersecting cell may fall beyond
    // the grid extent. Checking the ring just outside catches polygons that
    // poke out between rim cells.
    for cell in ring_at(grid.extent() as u32 + 1) {
        if cell_intersects_polygon(grid, cell, pz) {
            return Err(GeometryError::OutOfGrid);
        }
    }

    let centroid = pz.centroid();
    let seed = match grid.cell_of_position(centroid) {
        Ok(c) if raw.contains(&c) => c,
        _ => nearest_cell(grid, &raw, centroid),
    };

    let mut cover = raw.clone();
    loop {
        let main = component_of(&cover, seed);
        if main.len() == cover.len() {
            return Ok(cover);
        }
        let stray: BTreeSet<CellId> = cover.difference(&main).copied().collect();
        // Bridge the closest stray/main pair with a hex line.
        let mut best: Option<(u32, CellId, CellId)> = None;
        for &s in &stray {
            for &m in &main {
                let d = s.distance(m);
                if best.map_or(true, |(bd, bs, bm)| (d, s, m) < (bd, bs, bm)) {
                    best = Some((d, s, m));
                }
            }
        }
        let (_, s, m) = best.expect("both components non-empty");
        for c in s.line_to(m) {
            if grid.contains_cell(c) {
                cover.insert(c);
            }
        }
    }
}

fn ring_at(radius: u32) -> Vec<CellId> {
    let mut out = Vec::new();
    let e = radius as i32;
    for q in -e..=e {
        for r in (-e).max(-q - e)..=e.min(-q + e) {
            let c = CellId::new(q, r);
            if CellId::ORIGIN.distance(c) == radius {
                out.push(c);
            }
        }
    }
    out
}

fn nearest_cell(grid: &HexGrid, cells: &BTreeSet<CellId>, p: Point) -> CellId {
    *cells
        .iter()
        .min_by(|a, b| {
            grid.center(**a)
                .distance(p)
                .partial_cmp(&grid.center(**b).distance(p))
                .unwrap()
                .then(a.cmp(b))
        })
        .expect("non-empty cell set")
}

fn component_of(cells: &BTreeSet<CellId>, seed: CellId) -> BTreeSet<CellId> {
    let mut seen = BTreeSet::new();
    if !cells.contains(&seed) {
        return seen;
    }
    let mut queue = VecDeque::new();
    seen.insert(seed);
    queue.push_back(seed);
    while let Some(c) = queue.pop_front() {
        for n in c.neighbors() {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Compile the full zone structure with a scaled outbound perimeter.
pub fn compile_zones(
    pz: &Polygon,
    grid: &HexGrid,
    op_scale: f64,
    n_outer_layers: usize,
) -> Result<ZoneMap, GeometryError> {
    compile_zones_with(pz, grid, OpMode::Scaled(op_scale), n_outer_layers)
}

/// Compile with an explicit outbound-perimeter mode.
pub fn compile_zones_with(
    pz: &Polygon,
    grid: &HexGrid,
    op_mode: OpMode,
    n_outer_layers: usize,
) -> Result<ZoneMap, GeometryError> {
    if n_outer_layers < 1 {
        return Err(GeometryError::InvalidGrid("n_outer_layers must be at least 1"));
    }
    let cover = cover_cells(pz, grid)?;

    let c1: BTreeSet<CellId> = cover
        .iter()
        .copied()
        .filter(|c| c.neighbors().iter().any(|n| !cover.contains(n)))
        .collect();

    let mut c0 = BTreeSet::new();
    for c in &c1 {
        for n in c.neighbors() {
            if !cover.contains(&n) && grid.contains_cell(n) {
                c0.insert(n);
            }
        }
    }

    let mut outer_layers = Vec::with_capacity(n_outer_layers);
    let mut claimed: BTreeSet<CellId> = cover.union(&c0).copied().collect();
    let mut frontier = c0.clone();
    for _ in 0..n_outer_layers {
        let mut layer = BTreeSet::new();
        for c in &frontier {
            for n in c.neighbors() {
                if !claimed.contains(&n) && grid.contains_cell(n) {
                    layer.insert(n);
                }
            }
        }
        claimed.extend(layer.iter().copied());
        frontier = layer.clone();
        outer_layers.push(layer);
    }

    let sp = surveillance_perimeter(grid, &cover, &c1);

    let (op, op_scale, op_scale_requested) = match op_mode {
        OpMode::Scaled(requested) => {
            if !(requested >= 1.0) {
                return Err(GeometryError::InvalidScale);
            }
            let (op, effective) = inflate_op(pz, grid, &c1, requested)?;
            (op, effective, requested)
        }
        OpMode::CollapseToSp => {
            let op = Polygon::new(sp.clone())
                .map_err(|_| GeometryError::InvalidPolygon("sp does not form a simple polygon"))?;
            (op, 0.0, 0.0)
        }
    };

    Ok(ZoneMap { pz: pz.clone(), cover, c1, c0, outer_layers, sp, op, op_scale, op_scale_requested })
}

/// Grow the requested scale in 0.05 steps until the scaled zone strictly
/// contains every `c1` hexagon with positive clearance.
fn inflate_op(
    pz: &Polygon,
    grid: &HexGrid,
    c1: &BTreeSet<CellId>,
    requested: f64,
) -> Result<(Polygon, f64), GeometryError> {
    let mut scale = requested;
    for _ in 0..OP_INFLATE_MAX_STEPS {
        let op = pz.scaled(scale)?;
        if op.vertices().iter().any(|v| grid.cell_of_position(*v).is_err()) {
            // Growing further only pushes the perimeter farther out.
            return Err(GeometryError::OpOutOfGrid);
        }
        if op_clears_c1(&op, grid, c1) {
            return Ok((op, scale));
        }
        scale += OP_INFLATE_STEP;
    }
    Err(GeometryError::OpOutOfGrid)
}

fn op_clears_c1(op: &Polygon, grid: &HexGrid, c1: &BTreeSet<CellId>) -> bool {
    // Corners inside plus positive boundary distance imply every c1 hexagon
    // lies strictly in the interior.
    for cell in c1 {
        if !grid.corners(*cell).iter().all(|p| op.contains(*p)) {
            return false;
        }
    }
    dist_polygon_to_cells(op, c1, grid) > GEOM_EPS
}

/// Minimum Euclidean distance between a polygon boundary and the union of
/// cell hexagons; zero if they overlap.
pub fn dist_polygon_to_cells(poly: &Polygon, cells: &BTreeSet<CellId>, grid: &HexGrid) -> f64 {
    let mut best = f64::INFINITY;
    for &cell in cells {
        let corners = grid.corners(cell);
        if corners.iter().any(|c| poly.contains(*c))
            || poly.vertices().iter().any(|v| grid.cell_contains(cell, *v))
        {
            return 0.0;
        }
        for i in 0..6 {
            let (h1, h2) = (corners[i], corners[(i + 1) % 6]);
            for (p1, p2) in poly.edges() {
                let d = segment_distance(h1, h2, p1, p2);
                if d <= 0.0 {
                    return 0.0;
                }
                best = best.min(d);
            }
        }
    }
    best
}

/// Stitch the c1/non-cover cell edges into closed loops and return the
/// outermost one (largest bounding box).
fn surveillance_perimeter(grid: &HexGrid, cover: &BTreeSet<CellId>, c1: &BTreeSet<CellId>) -> Vec<Point> {
    type Key = (i64, i64);
    let key = |p: Point| -> Key { (libm::round(p.x * 1000.0) as i64, libm::round(p.y * 1000.0) as i64) };

    let mut points: BTreeMap<Key, Point> = BTreeMap::new();
    let mut edges: Vec<(Key, Key)> = Vec::new();
    for &cell in c1 {
        let corners = grid.corners(cell);
        for (k, n) in cell.neighbors().into_iter().enumerate() {
            if !cover.contains(&n) {
                let a = corners[(k + 5) % 6];
                let b = corners[k];
                let (ka, kb) = (key(a), key(b));
                points.entry(ka).or_insert(a);
                points.entry(kb).or_insert(b);
                edges.push((ka, kb));
            }
        }
    }

    let mut incident: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (i, (a, b)) in edges.iter().enumerate() {
        incident.entry(*a).or_default().push(i);
        incident.entry(*b).or_default().push(i);
    }

    let mut used = alloc::vec![false; edges.len()];
    let mut best_loop: Vec<Point> = Vec::new();
    let mut best_span = -1.0;
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut lap: Vec<Key> = Vec::new();
        let origin = edges[start].0;
        let mut at = origin;
        loop {
            let next_edge = incident[&at]
                .iter()
                .copied()
                .find(|&e| !used[e]);
            let Some(e) = next_edge else { break };
            used[e] = true;
            lap.push(at);
            let (a, b) = edges[e];
            at = if a == at { b } else { a };
            if at == origin {
                break;
            }
        }
        if lap.len() < 3 {
            continue;
        }
        let pts: Vec<Point> = lap.iter().map(|k| points[k]).collect();
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let span = (hi.x - lo.x) * (hi.y - lo.y);
        if span > best_span {
            best_span = span;
            best_loop = pts;
        }
    }
    best_loop
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testutil::random_polygon;
    use crate::sim::rng::SimRng;
    use alloc::vec;

    const SQRT3_2_R: f64 = 86.602_540_378_443_86;

    fn grid(extent: i32) -> HexGrid {
        HexGrid::new(100.0, Point::new(0.0, 0.0), extent).unwrap()
    }

    fn square(cx: f64, cy: f64, half: f64) -> Polygon {
        Polygon::new(vec![
            Point::new(cx - half, cy - half),
            Point::new(cx + half, cy - half),
            Point::new(cx + half, cy + half),
            Point::new(cx - half, cy + half),
        ])
        .unwrap()
    }

    // --- independent oracle, used to freeze expected values ---

    fn oracle_pip(poly: &Polygon, p: Point) -> bool {
        for (a, b) in poly.edges() {
            if super::super::point_segment_distance(p, a, b) <= GEOM_EPS {
                return true;
            }
        }
        let mut w = 0i32;
        for (a, b) in poly.edges() {
            if a.y <= p.y {
                if b.y > p.y && (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) > 0.0 {
                    w += 1;
                }
            } else if b.y <= p.y && (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) < 0.0 {
                w -= 1;
            }
        }
        w != 0
    }

    /// Voronoi characterisation: p lies in the hex of `cell` iff no
    /// neighbouring centre is strictly closer.
    fn oracle_point_in_hex(g: &HexGrid, cell: CellId, p: Point) -> bool {
        let d0 = g.center(cell).distance(p);
        cell.neighbors().iter().all(|n| d0 <= g.center(*n).distance(p) + GEOM_EPS)
    }


    fn oracle_cell_intersects(g: &HexGrid, cell: CellId, poly: &Polygon) -> bool {
        if oracle_pip(poly, g.center(cell)) {
            return true;
        }
        let corners = g.corners(cell);
        if corners.iter().any(|c| oracle_pip(poly, *c)) {
            return true;
        }
        if poly.vertices().iter().any(|v| oracle_point_in_hex(g, cell, *v)) {
            return true;
        }
        for i in 0..6 {
            for (p1, p2) in poly.edges() {
                if oracle_segments_cross(corners[i], corners[(i + 1) % 6], p1, p2) {
                    return true;
                }
            }
        }
        false
    }

    /// Parametric segment intersection with tolerance.
    fn oracle_segments_cross(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
        let (rx, ry) = (a2.x - a1.x, a2.y - a1.y);
        let (sx, sy) = (b2.x - b1.x, b2.y - b1.y);
        let denom = rx * sy - ry * sx;
        let (qpx, qpy) = (b1.x - a1.x, b1.y - a1.y);
        if libm::fabs(denom) < 1e-12 {
            // Parallel: intersect only if collinear and overlapping.
            if libm::fabs(qpx * ry - qpy * rx) > 1e-6 {
                return false;
            }
            let len2 = rx * rx + ry * ry;
            let t0 = (qpx * rx + qpy * ry) / len2;
            let t1 = t0 + (sx * rx + sy * ry) / len2;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            return hi >= -1e-9 && lo <= 1.0 + 1e-9;
        }
        let t = (qpx * sy - qpy * sx) / denom;
        let u = (qpx * ry - qpy * rx) / denom;
        (-1e-9..=1.0 + 1e-9).contains(&t) && (-1e-9..=1.0 + 1e-9).contains(&u)
    }

    struct OracleLayers {
        cover: BTreeSet<CellId>,
        c1: BTreeSet<CellId>,
        c0: BTreeSet<CellId>,
        outer: Vec<BTreeSet<CellId>>,
    }

    fn oracle_layers(g: &HexGrid, poly: &Polygon, n_outer: usize) -> OracleLayers {
        let cover: BTreeSet<CellId> = g
            .cells()
            .into_iter()
            .filter(|c| oracle_cell_intersects(g, *c, poly))
            .collect();
        let c1: BTreeSet<CellId> = cover
            .iter()
            .copied()
            .filter(|c| c.neighbors().iter().any(|n| !cover.contains(n)))
            .collect();
        let mut c0 = BTreeSet::new();
        for c in &c1 {
            for n in c.neighbors() {
                if !cover.contains(&n) && g.contains_cell(n) {
                    c0.insert(n);
                }
            }
        }
        let mut outer = Vec::new();
        let mut claimed: BTreeSet<CellId> = cover.union(&c0).copied().collect();
        let mut frontier = c0.clone();
        for _ in 0..n_outer {
            let mut layer = BTreeSet::new();
            for c in &frontier {
                for n in c.neighbors() {
                    if !claimed.contains(&n) && g.contains_cell(n) {
                        layer.insert(n);
                    }
                }
            }
            claimed.extend(layer.iter().copied());
            frontier = layer.clone();
            outer.push(layer);
        }
        OracleLayers { cover, c1, c0, outer }
    }

    // --- tests ---

    #[test]
    fn single_cell_zone() {
        let g = grid(3);
        let pz = square(0.0, 0.0, 40.0);
        let zm = compile_zones(&pz, &g, 1.0, 1).unwrap();

        let origin: BTreeSet<CellId> = [CellId::ORIGIN].into_iter().collect();
        assert_eq!(zm.cover, origin);
        assert_eq!(zm.c1, origin);
        let ring: BTreeSet<CellId> = CellId::ORIGIN.neighbors().into_iter().collect();
        assert_eq!(zm.c0, ring);
        assert_eq!(zm.outer_layers.len(), 1);

        // Matches the independent layer construction.
        let oracle = oracle_layers(&g, &pz, 1);
        assert_eq!(zm.cover, oracle.cover);
        assert_eq!(zm.c0, oracle.c0);
        assert_eq!(zm.outer_layers[0], oracle.outer[0]);
    }

    #[test]
    fn single_cell_sp_is_hex_outline() {
        let g = grid(3);
        let zm = compile_zones(&square(0.0, 0.0, 40.0), &g, 1.0, 1).unwrap();
        assert_eq!(zm.sp.len(), 6);
        let key = |p: &Point| (libm::round(p.x * 1000.0) as i64, libm::round(p.y * 1000.0) as i64);
        let got: BTreeSet<_> = zm.sp.iter().map(key).collect();
        let want: BTreeSet<_> = g.corners(CellId::ORIGIN).iter().map(key).collect();
        assert_eq!(got, want);
        // Consecutive sp vertices are hex-edge length apart.
        for i in 0..zm.sp.len() {
            let d = zm.sp[i].distance(zm.sp[(i + 1) % zm.sp.len()]);
            assert!((d - 100.0).abs() < 1e-6, "edge {i} has length {d}");
        }
    }

    #[test]
    fn op_auto_inflates_until_it_clears_c1() {
        let g = grid(3);
        let zm = compile_zones(&square(0.0, 0.0, 40.0), &g, 1.0, 1).unwrap();
        assert!(zm.op_scale > 1.0, "op_scale stayed at {}", zm.op_scale);
        assert_eq!(zm.op_scale_requested, 1.0);
        assert!(dist_polygon_to_cells(&zm.op, &zm.c1, &g) > 0.0);
        for cell in &zm.c1 {
            for corner in g.corners(*cell) {
                assert!(zm.op.contains(corner));
            }
        }
        assert!(zm.in_op(Point::new(0.0, 0.0)));
    }

    #[test]
    fn collapsed_op_equals_sp() {
        let g = grid(3);
        let zm = compile_zones_with(&square(0.0, 0.0, 40.0), &g, OpMode::CollapseToSp, 1).unwrap();
        assert_eq!(zm.op.vertices().len(), zm.sp.len());
        assert_eq!(zm.op_scale, 0.0);
    }

    #[test]
    fn cover_spanning_two_cells() {
        let g = grid(3);
        let c10 = g.center(CellId::new(1, 0));
        let pz = square(c10.x / 2.0, 0.0, c10.x / 2.0 + 10.0);
        let cover = cover_cells(&pz, &g).unwrap();
        assert!(cover.contains(&CellId::ORIGIN));
        assert!(cover.contains(&CellId::new(1, 0)));
        let seed = *cover.iter().next().unwrap();
        assert_eq!(component_of(&cover, seed).len(), cover.len(), "cover disconnected");
    }

    #[test]
    fn zone_outside_grid_is_rejected() {
        let g = grid(3);
        assert_eq!(cover_cells(&square(10_000.0, 0.0, 40.0), &g), Err(GeometryError::OutOfGrid));
        // Pokes past the rim: intersects a cell beyond the extent.
        assert_eq!(cover_cells(&square(600.0, 0.0, 80.0), &g), Err(GeometryError::OutOfGrid));
    }

    #[test]
    fn distance_zero_on_overlap_and_exact_on_gap() {
        let g = grid(3);
        let cells: BTreeSet<CellId> = [CellId::ORIGIN].into_iter().collect();
        assert_eq!(dist_polygon_to_cells(&square(0.0, 0.0, 40.0), &cells, &g), 0.0);

        // Square whose left edge sits exactly 10 m right of the hexagon's
        // vertical east edge.
        let gap = square(SQRT3_2_R + 10.0 + 40.0, 0.0, 40.0);
        let d = dist_polygon_to_cells(&gap, &cells, &g);
        assert!((d - 10.0).abs() < 1e-9, "gap {d}");
    }

    #[test]
    fn distance_is_continuous_in_scale() {
        let g = grid(4);
        let pz = square(0.0, 0.0, 40.0);
        let cells: BTreeSet<CellId> = [CellId::new(2, 0)].into_iter().collect();
        let mut prev = None;
        let mut s = 1.0;
        while s < 4.0 {
            let d = dist_polygon_to_cells(&pz.scaled(s).unwrap(), &cells, &g);
            if let Some(p) = prev {
                // Vertices move at most ~57 m per unit of scale here.
                assert!((d - p as f64).abs() < 1.0, "jump at s={s}");
            }
            prev = Some(d);
            s += 0.01;
        }
    }

    #[test]
    fn compiler_matches_oracle_on_random_zones() {
        for (seed, extent) in [(101u64, 5), (202, 8), (303, 10)] {
            let g = grid(extent);
            let mut rng = SimRng::substream(seed, "zone-oracle");
            for case in 0..12 {
                let centre = Point::new(rng.uniform_range(-80.0, 80.0), rng.uniform_range(-80.0, 80.0));
                let pz = random_polygon(&mut rng, centre, 190.0, 420.0);
                let zm = compile_zones(&pz, &g, 1.0, 2).unwrap();
                let oracle = oracle_layers(&g, &pz, 2);
                let seed_cell = *oracle.cover.iter().next().unwrap();
                assert_eq!(
                    component_of(&oracle.cover, seed_cell).len(),
                    oracle.cover.len(),
                    "oracle cover disconnected; adjust generator (seed {seed} case {case})"
                );
                assert_eq!(zm.cover, oracle.cover, "cover (seed {seed} case {case})");
                assert_eq!(zm.c1, oracle.c1, "c1 (seed {seed} case {case})");
                assert_eq!(zm.c0, oracle.c0, "c0 (seed {seed} case {case})");
                assert_eq!(zm.outer_layers[0], oracle.outer[0], "c-1 (seed {seed} case {case})");
                assert_eq!(zm.outer_layers[1], oracle.outer[1], "c-2 (seed {seed} case {case})");

                // Zone nesting.
                assert!(zm.c1.is_subset(&zm.cover));
                assert!(zm.c0.is_disjoint(&zm.cover));
                for c in &zm.c1 {
                    assert!(c.neighbors().iter().any(|n| !zm.cover.contains(n)));
                }
                for c in &zm.c0 {
                    assert!(c.neighbors().iter().any(|n| zm.c1.contains(n)));
                }
                assert!(dist_polygon_to_cells(&zm.op, &zm.c1, &g) > 0.0);
            }
        }
    }

    #[test]
    fn hysteresis_band_sp_strictly_inside_op() {
        let g = grid(6);
        let mut rng = SimRng::substream(77, "sp-in-op");
        for _ in 0..6 {
            let pz = random_polygon(&mut rng, Point::new(0.0, 0.0), 190.0, 380.0);
            let zm = compile_zones(&pz, &g, 1.0, 1).unwrap();
            let n = zm.sp.len();
            for i in 0..n {
                let (a, b) = (zm.sp[i], zm.sp[(i + 1) % n]);
                let steps = libm::ceil(a.distance(b)) as usize;
                for k in 0..=steps {
                    let t = k as f64 / steps as f64;
                    let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
                    assert!(zm.op.contains(p), "sp sample {p} escaped op");
                    assert!(zm.op.boundary_distance(p) > GEOM_EPS, "no clearance at {p}");
                }
            }
        }
    }

    #[test]
    fn compilation_is_deterministic() {
        let g = grid(5);
        let mut rng = SimRng::substream(9, "zone-det");
        let pz = random_polygon(&mut rng, Point::new(20.0, -30.0), 190.0, 400.0);
        let a = compile_zones(&pz, &g, 1.2, 2).unwrap();
        let b = compile_zones(&pz, &g, 1.2, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonconvex_cover_stays_connected() {
        let g = grid(6);
        // A C-shaped zone whose centroid falls in the void.
        let pz = Polygon::new(vec![
            Point::new(-300.0, -300.0),
            Point::new(300.0, -300.0),
            Point::new(300.0, -180.0),
            Point::new(-180.0, -180.0),
            Point::new(-180.0, 180.0),
            Point::new(300.0, 180.0),
            Point::new(300.0, 300.0),
            Point::new(-300.0, 300.0),
        ])
        .unwrap();
        let cover = cover_cells(&pz, &g).unwrap();
        let seed = *cover.iter().next().unwrap();
        assert_eq!(component_of(&cover, seed).len(), cover.len(), "cover disconnected");
        // Every pz vertex is covered.
        for v in pz.vertices() {
            assert!(cover.contains(&g.cell_of_position(*v).unwrap()));
        }
    }
}
