//! Simple polygons and segment predicates.

use alloc::vec::Vec;

use super::{GeometryError, Point, GEOM_EPS};

/// A simple (non-self-intersecting) polygon with non-zero area, implicitly
/// closed. Validated at construction, so a held `Polygon` always satisfies
/// its invariants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon("fewer than 3 vertices"));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex"));
        }
        let poly = Polygon { vertices };
        if libm::fabs(poly.signed_area()) <= GEOM_EPS {
            return Err(GeometryError::InvalidPolygon("area below tolerance"));
        }
        if !poly.is_simple() {
            return Err(GeometryError::InvalidPolygon("self-intersecting"));
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Edges as vertex pairs, last vertex connecting back to the first.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area with sign (positive for counter-clockwise winding).
    pub fn signed_area(&self) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.edges() {
            acc += a.x * b.y - b.x * a.y;
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        libm::fabs(self.signed_area())
    }

    /// Area-weighted centroid.
    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        let mut cx = 0.0;
        let mut cy = 0.0;
        for (p, q) in self.edges() {
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Boundary-inclusive containment (even-odd rule; a point on an edge or
    /// vertex counts as inside, so entry events fire at the boundary).
    pub fn contains(&self, p: Point) -> bool {
        for (a, b) in self.edges() {
            if point_segment_distance(p, a, b) <= GEOM_EPS {
                return true;
            }
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Vertices mapped `v -> centroid + s * (v - centroid)`.
    pub fn scaled(&self, s: f64) -> Result<Polygon, GeometryError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(GeometryError::InvalidScale);
        }
        let c = self.centroid();
        let vertices = self
            .vertices
            .iter()
            .map(|v| Point::new(c.x + s * (v.x - c.x), c.y + s * (v.y - c.y)))
            .collect();
        Polygon::new(vertices)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Minimum distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // Skip edges sharing a vertex (consecutive, incl. wrap).
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a1, a2) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let (b1, b2) = (self.vertices[j], self.vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return false;
                }
            }
        }
        true
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Distance from a point to a segment.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let abx = b.x - a.x;
    let aby = b.y - a.y;
    let len2 = abx * abx + aby * aby;
    if len2 <= GEOM_EPS * GEOM_EPS {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * abx, a.y + t * aby))
}

/// Segment intersection, boundary-inclusive (touching endpoints and
/// collinear overlap count as intersecting).
pub fn segments_intersect(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    // Near-collinear or touching cases fall back to distance checks.
    point_segment_distance(a1, b1, b2) <= GEOM_EPS
        || point_segment_distance(a2, b1, b2) <= GEOM_EPS
        || point_segment_distance(b1, a1, a2) <= GEOM_EPS
        || point_segment_distance(b2, a1, a2) <= GEOM_EPS
}

/// Minimum distance between two segments; zero if they intersect.
pub fn segment_distance(a1: Point, a2: Point, b1: Point, b2: Point) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::testutil::random_polygon;
    use crate::sim::rng::SimRng;
    use alloc::vec;

    fn unit_square() -> Polygon {
        Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ])
        .unwrap()
    }

    /// Independent winding-number containment oracle.
    fn winding_contains(poly: &Polygon, p: Point) -> bool {
        for (a, b) in poly.edges() {
            if point_segment_distance(p, a, b) <= GEOM_EPS {
                return true;
            }
        }
        let mut winding = 0i32;
        for (a, b) in poly.edges() {
            if a.y <= p.y {
                if b.y > p.y && cross(a, b, p) > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && cross(a, b, p) < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }

    #[test]
    fn rejects_degenerate_polygons() {
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(GeometryError::InvalidPolygon("fewer than 3 vertices"))
        );
        // Zero area: three collinear points.
        assert!(matches!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)]),
            Err(GeometryError::InvalidPolygon(_))
        ));
        // Bowtie self-intersection.
        assert!(matches!(
            Polygon::new(vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ]),
            Err(GeometryError::InvalidPolygon("self-intersecting"))
        ));
    }

    #[test]
    fn contains_centre_and_vertices() {
        let sq = unit_square();
        assert!(sq.contains(Point::new(0.5, 0.5)));
        // Boundary-inclusive rule: vertices and edge points are inside.
        assert!(sq.contains(Point::new(0.0, 0.0)));
        assert!(sq.contains(Point::new(0.5, 1.0)));
        assert!(!sq.contains(Point::new(1.5, 0.5)));
    }

    #[test]
    fn contains_matches_winding_oracle() {
        let mut rng = SimRng::substream(3, "pip-oracle");
        for case in 0..10 {
            let poly = random_polygon(&mut rng, Point::new(0.0, 0.0), 2.0, 10.0);
            for _ in 0..100 {
                let p = Point::new(rng.uniform_range(-12.0, 12.0), rng.uniform_range(-12.0, 12.0));
                assert_eq!(
                    poly.contains(p),
                    winding_contains(&poly, p),
                    "case {case}, point {p}"
                );
            }
        }
    }

    #[test]
    fn scaled_identity_and_area_ratio() {
        let sq = unit_square();
        let same = sq.scaled(1.0).unwrap();
        assert_eq!(same.vertices(), sq.vertices());

        let double = sq.scaled(2.0).unwrap();
        assert!((double.area() - 4.0).abs() < 1e-9);

        let mut rng = SimRng::substream(5, "scale-area");
        let poly = random_polygon(&mut rng, Point::new(3.0, -2.0), 1.0, 6.0);
        let tripled = poly.scaled(3.0).unwrap();
        assert!((tripled.area() / poly.area() - 9.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_rejects_nonpositive_factor() {
        assert_eq!(unit_square().scaled(0.0), Err(GeometryError::InvalidScale));
        assert_eq!(unit_square().scaled(-1.0), Err(GeometryError::InvalidScale));
    }

    #[test]
    fn segment_predicates() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_intersect(
            o,
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(2.0, 0.0)
        ));
        // Shared endpoint counts.
        assert!(segments_intersect(o, Point::new(1.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 1.0)));
        let d = segment_distance(o, Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0));
        assert!((d - 1.0).abs() < 1e-12);
    }
}
