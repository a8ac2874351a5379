use super::{Geometry, GeometryError, Point, Polyline, Region, Ring, EPSILON};

/// Twice the signed area of triangle (a, b, c); positive when c is left of a→b.
pub(crate) fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment_if_collinear(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching endpoints and collinear overlap count).
pub(crate) fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_if_collinear(c, d, a))
        || (d2 == 0.0 && on_segment_if_collinear(c, d, b))
        || (d3 == 0.0 && on_segment_if_collinear(a, b, c))
        || (d4 == 0.0 && on_segment_if_collinear(a, b, d))
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

fn segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

fn locate_in_ring(p: &Point, ring: &Ring) -> Location {
    let mut inside = false;
    for (a, b) in ring.edges() {
        if point_segment_distance(*p, a, b) <= EPSILON {
            return Location::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

/// Classifies a point against a region; points inside a hole are outside.
pub(crate) fn locate_in_region(p: &Point, region: &Region) -> Location {
    match locate_in_ring(p, region.outer()) {
        Location::Inside => {
            for hole in region.holes() {
                match locate_in_ring(p, hole) {
                    Location::Inside => return Location::Outside,
                    Location::Boundary => return Location::Boundary,
                    Location::Outside => {}
                }
            }
            Location::Inside
        }
        other => other,
    }
}

/// Parameters in [0, 1] where segment a→b meets the given edges, plus both ends.
/// Between consecutive parameters the segment lies entirely on one side of the
/// edge set (or on it).
pub(crate) fn split_parameters(a: Point, b: Point, edges: impl Iterator<Item = (Point, Point)>) -> Vec<f64> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let project = |p: Point| (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    let mut ts = vec![0.0, 1.0];
    for (c, d) in edges {
        if !segments_intersect(a, b, c, d) {
            continue;
        }
        let (ex, ey) = (d.x - c.x, d.y - c.y);
        let denom = dx * ey - dy * ex;
        if orient(a, b, c) == 0.0 && orient(a, b, d) == 0.0 || denom == 0.0 {
            ts.push(project(c));
            ts.push(project(d));
        } else {
            let t = ((c.x - a.x) * ey - (c.y - a.y) * ex) / denom;
            ts.push(t.clamp(0.0, 1.0));
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    ts
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
}

/// Pieces of a→b between consecutive split parameters, as (start, end, midpoint).
pub(crate) fn split_segment(a: Point, b: Point, edges: impl Iterator<Item = (Point, Point)>) -> Vec<(Point, Point, Point)> {
    let ts = split_parameters(a, b, edges);
    ts.windows(2)
        .map(|w| (lerp(a, b, w[0]), lerp(a, b, w[1]), lerp(a, b, (w[0] + w[1]) / 2.0)))
        .collect()
}

fn segment_within_region(a: Point, b: Point, region: &Region) -> bool {
    if locate_in_region(&a, region) == Location::Outside || locate_in_region(&b, region) == Location::Outside {
        return false;
    }
    split_segment(a, b, region.edges())
        .iter()
        .all(|(_, _, mid)| locate_in_region(mid, region) != Location::Outside)
}

fn point_line_distance(p: Point, line: &Polyline) -> f64 {
    line.segments()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn point_region_distance(p: Point, region: &Region) -> f64 {
    if locate_in_region(&p, region) != Location::Outside {
        return 0.0;
    }
    region
        .edges()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

fn edge_set_distance(
    xs: impl Iterator<Item = (Point, Point)>,
    ys: impl Iterator<Item = (Point, Point)> + Clone,
) -> f64 {
    let mut best = f64::INFINITY;
    for (a, b) in xs {
        for (c, d) in ys.clone() {
            best = best.min(segment_distance(a, b, c, d));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

fn line_region_distance(line: &Polyline, region: &Region) -> f64 {
    if line
        .vertices()
        .iter()
        .any(|p| locate_in_region(p, region) != Location::Outside)
    {
        return 0.0;
    }
    edge_set_distance(line.segments(), region.edges())
}

fn region_region_distance(a: &Region, b: &Region) -> f64 {
    let d = edge_set_distance(a.edges(), b.edges());
    if d == 0.0 {
        return 0.0;
    }
    // No boundary crossings: either one lies within the other or they are apart.
    let pa = a.outer().vertices()[0];
    let pb = b.outer().vertices()[0];
    if locate_in_region(&pa, b) != Location::Outside || locate_in_region(&pb, a) != Location::Outside {
        return 0.0;
    }
    d
}

/// Minimum Euclidean distance between the two point sets.
pub fn distance(a: &Geometry, b: &Geometry) -> f64 {
    use Geometry::*;
    match (a, b) {
        (Point(p), Point(q)) => p.distance(q),
        (Point(p), Line(l)) | (Line(l), Point(p)) => point_line_distance(*p, l),
        (Point(p), Region(r)) | (Region(r), Point(p)) => point_region_distance(*p, r),
        (Line(x), Line(y)) => edge_set_distance(x.segments(), y.segments()),
        (Line(l), Region(r)) | (Region(r), Line(l)) => line_region_distance(l, r),
        (Region(x), Region(y)) => region_region_distance(x, y),
    }
}

/// True when the geometries share a point (distance within [`EPSILON`]).
pub fn intersects(a: &Geometry, b: &Geometry) -> bool {
    if !a.bbox().expand(EPSILON).intersects(&b.bbox()) {
        return false;
    }
    distance(a, b) <= EPSILON
}

/// True when every point of `a` lies in region `b`; the boundary counts as inside.
pub fn inside(a: &Geometry, b: &Geometry) -> Result<bool, GeometryError> {
    let region = match b {
        Geometry::Region(r) => r,
        other => return Err(GeometryError::InvalidContainmentTarget(other.kind())),
    };
    if !b.bbox().expand(EPSILON).contains(&a.bbox()) {
        return Ok(false);
    }
    Ok(match a {
        Geometry::Point(p) => locate_in_region(p, region) != Location::Outside,
        Geometry::Line(l) => l.segments().all(|(p, q)| segment_within_region(p, q, region)),
        Geometry::Region(inner) => {
            inner
                .outer()
                .edges()
                .all(|(p, q)| segment_within_region(p, q, region))
                // A hole of the container passing through the interior of
                // `inner` leaves part of `inner` uncovered.
                && region.holes().iter().all(|hole| {
                    hole.edges().all(|(p, q)| {
                        split_segment(p, q, inner.edges())
                            .iter()
                            .all(|(_, _, mid)| locate_in_region(mid, inner) != Location::Inside)
                    })
                })
        }
    })
}
