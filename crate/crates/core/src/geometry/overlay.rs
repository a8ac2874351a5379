//! Polygon intersection area.
//!
//! The area of A ∩ B is the boundary integral of (x dy − y dx)/2 over the
//! boundary of the intersection, which consists of the pieces of A's boundary
//! inside B, the pieces of B's boundary inside A, and boundary stretches the
//! two share with the same direction. Rings are stored outer-CCW/holes-CW, so
//! this handles concave shells and holes alike.

use super::predicates::{locate_in_region, point_segment_distance, split_segment, Location};
use super::{GeometryError, Point, Region, EPSILON};

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - b.x * a.y
}

pub fn area(region: &Region) -> f64 {
    region.rings().map(|r| r.signed_area()).sum()
}

fn shares_directed_edge(a: Point, b: Point, mid: Point, other: &Region) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    other.edges().any(|(c, d)| {
        point_segment_distance(mid, c, d) <= EPSILON && dx * (d.x - c.x) + dy * (d.y - c.y) > 0.0
    })
}

pub fn intersection_area(a: &Region, b: &Region) -> f64 {
    let mut twice = 0.0;
    for (p, q) in a.edges() {
        for (s, e, mid) in split_segment(p, q, b.edges()) {
            match locate_in_region(&mid, b) {
                Location::Inside => twice += cross(s, e),
                Location::Boundary if shares_directed_edge(p, q, mid, b) => twice += cross(s, e),
                _ => {}
            }
        }
    }
    for (p, q) in b.edges() {
        for (s, e, mid) in split_segment(p, q, a.edges()) {
            if locate_in_region(&mid, a) == Location::Inside {
                twice += cross(s, e);
            }
        }
    }
    (twice / 2.0).clamp(0.0, area(a).min(area(b)))
}

/// `area(a ∩ b) / min(area(a), area(b))`.
pub fn overlap_ratio(a: &Region, b: &Region) -> Result<f64, GeometryError> {
    let smaller = area(a).min(area(b));
    if smaller <= EPSILON {
        return Err(GeometryError::DegenerateRegion);
    }
    Ok((intersection_area(a, b) / smaller).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::rect(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn overlap_examples() {
        let unit = rect(0.0, 0.0, 1.0, 1.0);
        assert_eq!(overlap_ratio(&unit, &unit), Ok(1.0));
        assert_eq!(overlap_ratio(&unit, &rect(2.0, 0.0, 3.0, 1.0)), Ok(0.0));
        let half = overlap_ratio(&unit, &rect(0.5, 0.0, 1.5, 1.0)).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn containment_gives_full_overlap() {
        let big = rect(0.0, 0.0, 10.0, 10.0);
        let small = rect(2.0, 2.0, 3.0, 4.0);
        assert!((intersection_area(&big, &small) - 2.0).abs() < 1e-12);
        assert!((overlap_ratio(&small, &big).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn holes_subtract_area() {
        let holed = Region::new(
            rect(0.0, 0.0, 4.0, 4.0).outer().vertices().to_vec(),
            vec![rect(1.0, 1.0, 3.0, 3.0).outer().vertices().to_vec()],
        )
        .unwrap();
        assert_eq!(area(&holed), 12.0);
        let probe = rect(0.0, 0.0, 2.0, 4.0);
        assert!((intersection_area(&holed, &probe) - 6.0).abs() < 1e-12);
        assert!((intersection_area(&probe, &holed) - 6.0).abs() < 1e-12);
        let in_hole = rect(1.5, 1.5, 2.5, 2.5);
        assert_eq!(intersection_area(&holed, &in_hole), 0.0);
    }

    #[test]
    fn concave_overlap() {
        // L shape of area 3 against a square covering its corner cell.
        let l = Region::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(2.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 2.0),
                Point::new(0.0, 2.0),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(area(&l), 3.0);
        let sq = rect(0.5, 0.5, 1.5, 1.5);
        assert!((intersection_area(&l, &sq) - 0.75).abs() < 1e-12);
    }
}
