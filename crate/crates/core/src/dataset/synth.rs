//! Seeded synthetic datasets with themed tables.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Entity, EntityId, Table};
use crate::geometry::{BoundingBox, GeomKind, Geometry, Point, Polyline, Region};

// (table name, singular label); labels pluralize by appending "s".
const POINT_THEMES: &[(&str, &str)] = &[
    ("Kinos", "cinema"),
    ("Restaurants", "restaurant"),
    ("Schools", "school"),
    ("Hospitals", "hospital"),
    ("Museums", "museum"),
    ("Hotels", "hotel"),
    ("Pharmacies", "chemist"),
    ("Archives", "archive"),
    ("BusStops", "bus stop"),
    ("Fountains", "fountain"),
];
const LINE_THEMES: &[(&str, &str)] = &[
    ("Strassen", "street"),
    ("Rivers", "river"),
    ("Railways", "railway"),
    ("Tramlines", "tram line"),
    ("Canals", "canal"),
    ("Cyclepaths", "cycle path"),
    ("Footpaths", "footpath"),
    ("Powerlines", "power line"),
    ("Bridges", "bridge"),
    ("Highways", "highway"),
];
const REGION_THEMES: &[(&str, &str)] = &[
    ("Parks", "park"),
    ("Districts", "district"),
    ("Lakes", "lake"),
    ("Forests", "forest"),
    ("Campuses", "university site"),
    ("Cemeteries", "graveyard"),
    ("Stadiums", "stadium"),
    ("Markets", "market"),
    ("Gardens", "garden"),
    ("Plazas", "plaza"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_points: usize,
    pub n_lines: usize,
    pub n_regions: usize,
    pub extent: BoundingBox,
    /// Total table count, split evenly over the kinds that have entities.
    /// Defaults to two tables per populated kind.
    pub n_tables: Option<usize>,
}

impl SynthConfig {
    pub fn new(seed: u64, n_points: usize, n_lines: usize, n_regions: usize) -> Self {
        SynthConfig {
            seed,
            n_points,
            n_lines,
            n_regions,
            extent: default_extent(n_points + n_lines + n_regions),
            n_tables: None,
        }
    }

    pub fn with_tables(mut self, n: usize) -> Self {
        self.n_tables = Some(n);
        self
    }
}

/// Square extent anchored at the origin whose area grows linearly with the
/// entity count, so density stays comparable across dataset sizes.
pub fn default_extent(n_entities: usize) -> BoundingBox {
    let side = (450.0 * (n_entities.max(1) as f64).sqrt()).max(2_000.0);
    BoundingBox::new(0.0, 0.0, side, side)
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn table_names(themes: &[(&str, &str)], count: usize) -> Vec<(String, String)> {
    (0..count)
        .map(|i| {
            let (name, label) = themes[i % themes.len()];
            let round = i / themes.len();
            if round == 0 {
                (name.to_string(), label.to_string())
            } else {
                (format!("{name}{}", round + 1), label.to_string())
            }
        })
        .collect()
}

/// Splits `total` tables over the populated kinds, earlier kinds taking
/// the remainder. Every populated kind gets at least one table.
fn split_tables(total: Option<usize>, populated: [bool; 3]) -> [usize; 3] {
    let kinds = populated.iter().filter(|p| **p).count();
    let mut out = [0; 3];
    if kinds == 0 {
        return out;
    }
    let total = total.unwrap_or(2 * kinds).max(kinds);
    let (base, mut extra) = (total / kinds, total % kinds);
    for (slot, &p) in out.iter_mut().zip(&populated) {
        if p {
            *slot = base + usize::from(extra > 0);
            extra = extra.saturating_sub(1);
        }
    }
    out
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    extent: &'a BoundingBox,
}

impl Gen<'_> {
    fn point(&mut self) -> Point {
        let e = self.extent;
        Point::new(
            round2(self.rng.gen_range(e.min_x..=e.max_x)),
            round2(self.rng.gen_range(e.min_y..=e.max_y)),
        )
    }

    fn clamp(&self, p: Point) -> Point {
        let e = self.extent;
        Point::new(
            round2(p.x.clamp(e.min_x, e.max_x)),
            round2(p.y.clamp(e.min_y, e.max_y)),
        )
    }

    fn polyline(&mut self) -> Polyline {
        loop {
            let n = self.rng.gen_range(2..=8);
            let mut pts = vec![self.point()];
            let mut heading = self.rng.gen_range(0.0..TAU);
            for _ in 1..n {
                let step = self.rng.gen_range(40.0..300.0);
                heading += self.rng.gen_range(-0.6..0.6);
                let last = *pts.last().unwrap();
                pts.push(self.clamp(Point::new(
                    last.x + step * heading.cos(),
                    last.y + step * heading.sin(),
                )));
            }
            pts.dedup();
            if pts.len() >= 2 {
                if let Ok(l) = Polyline::new(pts) {
                    return l;
                }
            }
        }
    }

    fn region(&mut self) -> Region {
        let e = self.extent;
        loop {
            let max_r = (e.width().min(e.height()) / 2.0).min(250.0);
            let r = self.rng.gen_range((max_r * 0.16)..=max_r);
            let cx = self.rng.gen_range((e.min_x + r)..=(e.max_x - r));
            let cy = self.rng.gen_range((e.min_y + r)..=(e.max_y - r));
            let n = self.rng.gen_range(5..=10);
            let slice = TAU / n as f64;
            let offset = self.rng.gen_range(0.0..TAU);
            let ring: Vec<Point> = (0..n)
                .map(|i| {
                    let a = offset + slice * (i as f64 + self.rng.gen_range(-0.3..0.3));
                    let p = Point::new(round2(cx + r * a.cos()), round2(cy + r * a.sin()));
                    self.clamp(p)
                })
                .collect();
            if let Ok(region) = Region::new(ring, vec![]) {
                return region;
            }
        }
    }
}

/// Deterministic for a fixed config. Ids run 1.. over points, then lines,
/// then regions; entity `i` of a kind lands in table `i % tables_of_kind`.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Dataset {
    let counts = [cfg.n_points, cfg.n_lines, cfg.n_regions];
    let split = split_tables(cfg.n_tables, counts.map(|c| c > 0));
    let kinds = [GeomKind::Point, GeomKind::Line, GeomKind::Region];
    let themes = [POINT_THEMES, LINE_THEMES, REGION_THEMES];
    let prefixes = ["P", "L", "R"];

    let mut gen = Gen {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        extent: &cfg.extent,
    };
    let mut next_id: EntityId = 1;
    let mut tables = Vec::new();
    for k in 0..3 {
        if counts[k] == 0 {
            continue;
        }
        let mut kind_tables: Vec<Table> = table_names(themes[k], split[k])
            .into_iter()
            .map(|(name, label)| Table {
                label: Some(label),
                ..Table::new(name, kinds[k])
            })
            .collect();
        let n_kind_tables = kind_tables.len();
        for i in 0..counts[k] {
            let mut attributes = BTreeMap::new();
            let geometry: Geometry = match kinds[k] {
                GeomKind::Point => {
                    let p = gen.point();
                    attributes.insert("rating".to_string(), gen.rng.gen_range(1..=5).to_string());
                    Geometry::Point(p)
                }
                GeomKind::Line => gen.polyline().into(),
                GeomKind::Region => gen.region().into(),
            };
            let table = &mut kind_tables[i % n_kind_tables];
            table.entities.push(Entity {
                id: next_id,
                name: format!("{}{}", prefixes[k], i + 1),
                table: table.name.clone(),
                geometry,
                attributes,
            });
            next_id += 1;
        }
        tables.extend(kind_tables.into_iter().filter(|t| !t.entities.is_empty()));
    }
    Dataset::new(format!("synthetic-{}", cfg.seed), "planar meters (synthetic)", tables)
        .expect("synthetic dataset is valid by construction")
}
