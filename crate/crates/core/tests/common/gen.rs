use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sscc_core::dataset::{Dataset, Entity, Table};
use sscc_core::geometry::{GeomKind, Geometry, Point, Polyline, Region};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point(rng: &mut impl Rng, extent: f64) -> Point {
    Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent))
}

pub fn line(rng: &mut impl Rng, extent: f64) -> Polyline {
    let n = rng.gen_range(2..=5);
    let start = point(rng, extent);
    let step = extent / 8.0;
    let mut v = vec![start];
    while v.len() < n {
        let last = *v.last().unwrap();
        let p = Point::new(last.x + rng.gen_range(-step..step), last.y + rng.gen_range(-step..step));
        if p != last {
            v.push(p);
        }
    }
    Polyline::new(v).expect("distinct consecutive vertices")
}

/// Vertices on a circle at jittered even spacing: convex, counter-clockwise,
/// and no gap between neighbours reaches pi, so the center is interior.
fn convex_ring(rng: &mut impl Rng, c: Point, r: f64) -> Vec<Point> {
    let n = rng.gen_range(3..=8);
    let slice = std::f64::consts::TAU / n as f64;
    let a0 = rng.gen_range(0.0..slice);
    (0..n)
        .map(|i| {
            let a = a0 + slice * (i as f64 + rng.gen_range(-0.2..0.2));
            Point::new(c.x + r * a.cos(), c.y + r * a.sin())
        })
        .collect()
}

/// Convex polygon with vertices on a circle.
pub fn convex_region(rng: &mut impl Rng, extent: f64) -> Region {
    loop {
        let c = point(rng, extent);
        let r = rng.gen_range(extent / 50.0..extent / 6.0);
        if let Ok(reg) = Region::new(convex_ring(rng, c, r), Vec::new()) {
            return reg;
        }
    }
}

/// Convex polygon with a square hole around its center. Neighbouring
/// vertices are at most 2.94 rad apart, so the inradius is above 0.09 r and
/// a square of half-side 0.06 r fits.
pub fn holed_region(rng: &mut impl Rng, extent: f64) -> Region {
    loop {
        let c = point(rng, extent);
        let r = rng.gen_range(extent / 50.0..extent / 6.0);
        let s = 0.06 * r;
        let hole = vec![
            Point::new(c.x - s, c.y - s),
            Point::new(c.x + s, c.y - s),
            Point::new(c.x + s, c.y + s),
            Point::new(c.x - s, c.y + s),
        ];
        if let Ok(reg) = Region::new(convex_ring(rng, c, r), vec![hole]) {
            return reg;
        }
    }
}

pub fn geometry_of(rng: &mut impl Rng, kind: GeomKind, extent: f64) -> Geometry {
    match kind {
        GeomKind::Point => point(rng, extent).into(),
        GeomKind::Line => line(rng, extent).into(),
        GeomKind::Region if rng.gen_bool(0.25) => holed_region(rng, extent).into(),
        GeomKind::Region => convex_region(rng, extent).into(),
    }
}

pub fn kind(rng: &mut impl Rng) -> GeomKind {
    [GeomKind::Point, GeomKind::Line, GeomKind::Region][rng.gen_range(0..3)]
}

pub fn geometry(rng: &mut impl Rng, extent: f64) -> Geometry {
    let k = kind(rng);
    geometry_of(rng, k, extent)
}

/// A dataset of up to `max_entities` entities spread over 2..=4 tables of
/// random kinds; ids are 1.. and names are unique.
pub fn dataset(rng: &mut impl Rng, max_entities: usize, extent: f64) -> Dataset {
    let n_tables = rng.gen_range(2..=4);
    let n = rng.gen_range(n_tables..=max_entities);
    let mut tables: Vec<Table> = (0..n_tables).map(|i| Table::new(format!("T{i}"), kind(rng))).collect();
    for id in 1..=n as u64 {
        let t = rng.gen_range(0..n_tables);
        let g = geometry_of(rng, tables[t].kind, extent);
        let name = tables[t].name.clone();
        tables[t].entities.push(Entity {
            id,
            name: format!("e{id}"),
            table: name,
            geometry: g,
            attributes: Default::default(),
        });
    }
    Dataset::new("generated", "", tables).expect("valid by construction")
}
