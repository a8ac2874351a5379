//! Planar geometry kernel.
//!
//! Coordinates are planar meters. Geometries are validated on construction and
//! immutable afterwards, so every predicate here is a pure function.

mod overlay;
mod predicates;
pub mod wkt;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use overlay::{area, intersection_area, overlap_ratio};
pub use predicates::{distance, inside, intersects, Location};

pub(crate) use predicates::{locate_in_region, orient, segments_intersect};

/// Tolerance (meters) used for predicate/measure agreement and boundary tests.
pub const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("polyline needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive duplicate vertex at index {0}")]
    DuplicateVertex(usize),
    #[error("ring needs at least 3 distinct vertices, got {0}")]
    TooFewRingVertices(usize),
    #[error("ring is self-intersecting")]
    SelfIntersecting,
    #[error("ring has zero area")]
    ZeroArea,
    #[error("hole {0} is not inside the outer ring")]
    HoleOutside(usize),
    #[error("holes {0} and {1} overlap")]
    HolesOverlap(usize, usize),
    #[error("invalid containment target: expected a region, got {0}")]
    InvalidContainmentTarget(GeomKind),
    #[error("degenerate region")]
    DegenerateRegion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeomKind {
    Point,
    Line,
    Region,
}

impl GeomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GeomKind::Point => "point",
            GeomKind::Line => "line",
            GeomKind::Region => "region",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "point" => Some(GeomKind::Point),
            "line" => Some(GeomKind::Line),
            "region" => Some(GeomKind::Region),
            _ => None,
        }
    }
}

impl fmt::Display for GeomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn check(&self) -> Result<(), GeometryError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(GeometryError::NonFinite(self.x, self.y))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        for p in &vertices {
            p.check()?;
        }
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(GeometryError::DuplicateVertex(i + 1));
        }
        Ok(Polyline { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + Clone + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.distance(&b)).sum()
    }
}

/// A closed ring stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<Point>,
}

impl Ring {
    fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        for p in &vertices {
            p.check()?;
        }
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if let Some(i) = vertices.windows(2).position(|w| w[0] == w[1]) {
            return Err(GeometryError::DuplicateVertex(i + 1));
        }
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewRingVertices(vertices.len()));
        }
        let ring = Ring { vertices };
        if !ring.is_simple() {
            return Err(GeometryError::SelfIntersecting);
        }
        if ring.signed_area().abs() <= EPSILON {
            return Err(GeometryError::ZeroArea);
        }
        Ok(ring)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Edges including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + Clone + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
    }

    fn is_simple(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Adjacent edges may only share their common vertex; a
                    // fold-back along the same line is a self-overlap.
                    let shared = if j == i + 1 { b } else { a };
                    let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                    if orient(p, shared, q) == 0.0 {
                        let u = (p.x - shared.x, p.y - shared.y);
                        let v = (q.x - shared.x, q.y - shared.y);
                        if u.0 * v.0 + u.1 * v.1 > 0.0 {
                            return false;
                        }
                    }
                } else if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    fn oriented(mut self, ccw: bool) -> Self {
        if (self.signed_area() > 0.0) != ccw {
            self.vertices.reverse();
        }
        self
    }
}

/// A polygon with an outer ring (counter-clockwise) and optional holes (clockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    outer: Ring,
    holes: Vec<Ring>,
}

impl Region {
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, GeometryError> {
        let outer = Ring::new(outer)?.oriented(true);
        let holes = holes
            .into_iter()
            .map(|h| Ring::new(h).map(|r| r.oriented(false)))
            .collect::<Result<Vec<_>, _>>()?;
        let shell = Region {
            outer: outer.clone(),
            holes: Vec::new(),
        };
        for (i, hole) in holes.iter().enumerate() {
            let crosses = hole
                .edges()
                .any(|(a, b)| outer.edges().any(|(c, d)| segments_intersect(a, b, c, d)));
            let outside = hole
                .vertices()
                .iter()
                .any(|p| locate_in_region(p, &shell) == Location::Outside);
            if crosses || outside {
                return Err(GeometryError::HoleOutside(i));
            }
        }
        for i in 0..holes.len() {
            for j in (i + 1)..holes.len() {
                let a = Region {
                    outer: holes[i].clone().oriented(true),
                    holes: Vec::new(),
                };
                let b = Region {
                    outer: holes[j].clone().oriented(true),
                    holes: Vec::new(),
                };
                if intersects(&Geometry::Region(a), &Geometry::Region(b)) {
                    return Err(GeometryError::HolesOverlap(i, j));
                }
            }
        }
        Ok(Region { outer, holes })
    }

    /// Axis-aligned rectangle, handy for fixtures.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeometryError> {
        Region::new(
            vec![
                Point::new(min_x, min_y),
                Point::new(max_x, min_y),
                Point::new(max_x, max_y),
                Point::new(min_x, max_y),
            ],
            Vec::new(),
        )
    }

    pub fn outer(&self) -> &Ring {
        &self.outer
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> + Clone {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + Clone + '_ {
        self.rings().flat_map(|r| r.edges())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Point),
    Line(Polyline),
    Region(Region),
}

impl Geometry {
    pub fn point(x: f64, y: f64) -> Result<Self, GeometryError> {
        let p = Point::new(x, y);
        p.check()?;
        Ok(Geometry::Point(p))
    }

    pub fn kind(&self) -> GeomKind {
        match self {
            Geometry::Point(_) => GeomKind::Point,
            Geometry::Line(_) => GeomKind::Line,
            Geometry::Region(_) => GeomKind::Region,
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Geometry::Point(p) => BoundingBox::from_point(*p),
            Geometry::Line(l) => BoundingBox::from_points(l.vertices()),
            Geometry::Region(r) => BoundingBox::from_points(r.outer.vertices()),
        }
    }

    pub fn as_point(&self) -> Option<Point> {
        match self {
            Geometry::Point(p) => Some(*p),
            _ => None,
        }
    }

    pub fn as_region(&self) -> Option<&Region> {
        match self {
            Geometry::Region(r) => Some(r),
            _ => None,
        }
    }

    /// Every vertex of the geometry, rings without closing repeats.
    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Geometry::Point(p) => vec![*p],
            Geometry::Line(l) => l.vertices().to_vec(),
            Geometry::Region(r) => r.rings().flat_map(|ring| ring.vertices().iter().copied()).collect(),
        }
    }
}

impl From<Point> for Geometry {
    fn from(p: Point) -> Self {
        Geometry::Point(p)
    }
}

impl From<Polyline> for Geometry {
    fn from(l: Polyline) -> Self {
        Geometry::Line(l)
    }
}

impl From<Region> for Geometry {
    fn from(r: Region) -> Self {
        Geometry::Region(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    /// Normalizes swapped corners so the box invariant always holds.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BoundingBox {
            min_x: x0.min(x1),
            min_y: y0.min(y1),
            max_x: x0.max(x1),
            max_y: y0.max(y1),
        }
    }

    pub fn from_point(p: Point) -> Self {
        BoundingBox {
            min_x: p.x,
            min_y: p.y,
            max_x: p.x,
            max_y: p.y,
        }
    }

    /// Panics on an empty slice; geometries always have vertices.
    pub fn from_points(points: &[Point]) -> Self {
        let mut bb = BoundingBox::from_point(points[0]);
        for p in &points[1..] {
            bb.min_x = bb.min_x.min(p.x);
            bb.min_y = bb.min_y.min(p.y);
            bb.max_x = bb.max_x.max(p.x);
            bb.max_y = bb.max_y.max(p.y);
        }
        bb
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point {
        Point::new((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.min_x
            && self.min_y <= other.min_y
            && self.max_x >= other.max_x
            && self.max_y >= other.max_y
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn expand(&self, by: f64) -> BoundingBox {
        BoundingBox {
            min_x: self.min_x - by,
            min_y: self.min_y - by,
            max_x: self.max_x + by,
            max_y: self.max_y + by,
        }
    }

    /// Minimum distance between the two boxes (0 when they overlap). A lower
    /// bound on the distance between any geometries they enclose.
    pub fn distance(&self, other: &BoundingBox) -> f64 {
        let dx = (other.min_x - self.max_x).max(self.min_x - other.max_x).max(0.0);
        let dy = (other.min_y - self.max_y).max(self.min_y - other.max_y).max(0.0);
        dx.hypot(dy)
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        self.distance(&BoundingBox::from_point(p))
    }
}
