//! Brute-force reference implementations. Written independently of the
//! library: parametric segment tests instead of orientation predicates,
//! winding numbers instead of ray crossing, convex clipping instead of
//! boundary integration, and full scans instead of the tree.

use std::collections::HashSet;

use sscc_core::dataset::{Dataset, EntityId};
use sscc_core::extract::ExtractionConfig;
use sscc_core::geometry::{BoundingBox, Geometry, Point, Region};
use sscc_core::index::{IndexEntry, ItemId};
use sscc_core::relation::{EntityRelation, Operator};

pub const EPS: f64 = 1e-9;

fn sub(a: Point, b: Point) -> (f64, f64) {
    (a.x - b.x, a.y - b.y)
}

pub fn point_segment(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = sub(b, a);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - (a.x + t * dx)).hypot(p.y - (a.y + t * dy))
}

/// Proper or touching crossing of two non-parallel segments, by solving
/// a + s(b-a) = c + t(d-c).
fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (r, s) = (sub(b, a), sub(d, c));
    let denom = r.0 * s.1 - r.1 * s.0;
    if denom.abs() < 1e-12 {
        return false;
    }
    let (qx, qy) = sub(c, a);
    let t = (qx * s.1 - qy * s.0) / denom;
    let u = (qx * r.1 - qy * r.0) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

pub fn segment_segment(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment(a, c, d)
        .min(point_segment(b, c, d))
        .min(point_segment(c, a, b))
        .min(point_segment(d, a, b))
}

fn ring_edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

fn winding(p: Point, ring: &[Point]) -> i32 {
    let mut w = 0;
    for (a, b) in ring_edges(ring) {
        let side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            w -= 1;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loc {
    Inside,
    Boundary,
    Outside,
}

fn rings(r: &Region) -> Vec<Vec<Point>> {
    r.rings().map(|ring| ring.vertices().to_vec()).collect()
}

pub fn locate(p: Point, r: &Region) -> Loc {
    let rings = rings(r);
    if rings.iter().flat_map(|ring| ring_edges(ring)).any(|(a, b)| point_segment(p, a, b) <= EPS) {
        return Loc::Boundary;
    }
    let in_shell = winding(p, &rings[0]) != 0;
    let in_hole = rings[1..].iter().any(|h| winding(p, h) != 0);
    if in_shell && !in_hole {
        Loc::Inside
    } else {
        Loc::Outside
    }
}

fn edges(g: &Geometry) -> Vec<(Point, Point)> {
    match g {
        Geometry::Point(p) => vec![(*p, *p)],
        Geometry::Line(l) => l.vertices().windows(2).map(|w| (w[0], w[1])).collect(),
        Geometry::Region(r) => rings(r).iter().flat_map(|ring| ring_edges(ring).collect::<Vec<_>>()).collect(),
    }
}

fn covers_any_vertex(region: &Geometry, other: &Geometry) -> bool {
    match region {
        Geometry::Region(r) => other.vertices().iter().any(|p| locate(*p, r) != Loc::Outside),
        _ => false,
    }
}

pub fn distance(a: &Geometry, b: &Geometry) -> f64 {
    if covers_any_vertex(a, b) || covers_any_vertex(b, a) {
        return 0.0;
    }
    let (ea, eb) = (edges(a), edges(b));
    ea.iter()
        .flat_map(|&(p, q)| eb.iter().map(move |&(r, s)| segment_segment(p, q, r, s)))
        .fold(f64::INFINITY, f64::min)
}

pub fn intersects(a: &Geometry, b: &Geometry) -> bool {
    distance(a, b) <= EPS
}

fn convex_contains(poly: &[Point], p: Point) -> bool {
    ring_edges(poly).all(|(a, b)| {
        let (dx, dy) = sub(b, a);
        let cross = dx * (p.y - a.y) - dy * (p.x - a.x);
        cross >= -EPS * dx.hypot(dy) || point_segment(p, a, b) <= EPS
    })
}

/// Containment in a convex, hole-free, counter-clockwise region: every
/// vertex of `a` inside or on the boundary.
pub fn inside_convex(a: &Geometry, b: &Region) -> bool {
    assert!(b.holes().is_empty());
    let poly = ccw(b.outer().vertices());
    a.vertices().iter().all(|p| convex_contains(&poly, *p))
}

fn ccw(ring: &[Point]) -> Vec<Point> {
    let mut v = ring.to_vec();
    if shoelace(&v) < 0.0 {
        v.reverse();
    }
    v
}

pub fn shoelace(ring: &[Point]) -> f64 {
    ring_edges(ring).map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
}

/// Sutherland-Hodgman clip of `subject` by the convex `clip`; both CCW.
fn clip(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out = subject.to_vec();
    for (a, b) in ring_edges(clip) {
        if out.is_empty() {
            break;
        }
        let side = |p: Point| (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let (p, q) = (input[i], input[(i + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push(Point::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)));
            }
        }
    }
    out
}

/// Area of the intersection of two convex, hole-free regions.
pub fn convex_intersection_area(a: &Region, b: &Region) -> f64 {
    let (pa, pb) = (ccw(a.outer().vertices()), ccw(b.outer().vertices()));
    let c = clip(&pa, &pb);
    if c.len() < 3 {
        0.0
    } else {
        shoelace(&c).abs()
    }
}

pub fn bbox_query(entries: &[IndexEntry], window: &BoundingBox) -> Vec<ItemId> {
    let mut ids: Vec<ItemId> = entries
        .iter()
        .filter(|e| {
            e.bbox.min_x <= window.max_x && window.min_x <= e.bbox.max_x && e.bbox.min_y <= window.max_y && window.min_y <= e.bbox.max_y
        })
        .map(|e| e.item_id)
        .collect();
    ids.sort_unstable();
    ids
}

/// All (id, distance) pairs sorted by (distance, id).
pub fn ranked<'g>(
    ids: impl Iterator<Item = ItemId>,
    origin: &Geometry,
    lookup: impl Fn(ItemId) -> &'g Geometry,
) -> Vec<(ItemId, f64)> {
    let mut v: Vec<(ItemId, f64)> = ids.map(|id| (id, sscc_core::geometry::distance(origin, lookup(id)))).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

/// Entity facts by scanning every (subject, object) pair.
pub fn extract(d: &Dataset, cfg: &ExtractionConfig) -> Vec<EntityRelation> {
    use sscc_core::geometry::{distance, inside, intersects, GeomKind};
    let refs: HashSet<&str> = match &cfg.reference_tables {
        Some(names) => names.iter().map(String::as_str).collect(),
        None => d.tables().iter().map(|t| t.name.as_str()).collect(),
    };
    let fact = |s: &sscc_core::dataset::Entity, o: &sscc_core::dataset::Entity, operator, distance| EntityRelation {
        subject_id: s.id,
        object_id: o.id,
        operator,
        distance,
        subject_kind: s.geometry.kind(),
        object_kind: o.geometry.kind(),
        score: 0.0,
    };
    let mut out = Vec::new();
    for s in d.entities() {
        for t in d.tables().iter().filter(|t| refs.contains(t.name.as_str())) {
            let mut near: Vec<(f64, EntityId, &sscc_core::dataset::Entity)> = Vec::new();
            for o in t.entities.iter().filter(|o| o.id != s.id) {
                if intersects(&s.geometry, &o.geometry) {
                    out.push(fact(s, o, Operator::Intersects, 0.0));
                    if o.geometry.kind() == GeomKind::Region && inside(&s.geometry, &o.geometry).unwrap() {
                        out.push(fact(s, o, Operator::Inside, 0.0));
                    }
                }
                let dist = distance(&s.geometry, &o.geometry);
                if dist <= cfg.radius_m {
                    near.push((dist, o.id, o));
                }
            }
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (dist, _, o) in near.into_iter().take(cfg.k) {
                out.push(fact(s, o, Operator::DistanceScan, dist));
            }
        }
    }
    out.sort_by_key(EntityRelation::key);
    out
}

/// Cross pairs of two tables satisfying a join predicate, sorted.
pub fn nested_loop_join(d: &Dataset, left: &str, right: &str, pred: impl Fn(&Geometry, &Geometry) -> bool) -> Vec<(EntityId, EntityId)> {
    let (l, r) = (d.table(left).unwrap(), d.table(right).unwrap());
    let mut out: Vec<(EntityId, EntityId)> = l
        .entities
        .iter()
        .flat_map(|a| r.entities.iter().filter(|b| pred(&a.geometry, &b.geometry)).map(move |b| (a.id, b.id)))
        .collect();
    out.sort_unstable();
    out
}
