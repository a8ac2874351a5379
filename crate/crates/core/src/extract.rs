//! Index-accelerated extraction of entity facts and table-level aggregates.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Entity, EntityId};
use crate::geometry::{inside, intersects, GeomKind, Geometry};
use crate::index::StrTree;
use crate::relation::{EntityRelation, Operator, QueryType, RelationRelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub radius_m: f64,
    pub k: usize,
    pub min_support: u64,
    pub distance_grid_m: f64,
    /// Tables that may act as reference objects; all tables when unset.
    pub reference_tables: Option<Vec<String>>,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            radius_m: 5_000.0,
            k: 5,
            min_support: 3,
            distance_grid_m: 100.0,
            reference_tables: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("stale index: {0}")]
    StaleIndex(String),
    #[error("invalid extraction config: {0}")]
    Config(String),
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        let bad = |m: &str| Err(ExtractError::Config(m.to_string()));
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return bad("radius_m must be positive and finite");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.min_support == 0 {
            return bad("min_support must be at least 1");
        }
        if !(self.distance_grid_m.is_finite() && self.distance_grid_m > 0.0) {
            return bad("distance_grid_m must be positive and finite");
        }
        Ok(())
    }

    fn reference_mask(&self, d: &Dataset) -> Result<Vec<bool>, ExtractError> {
        match &self.reference_tables {
            None => Ok(vec![true; d.tables().len()]),
            Some(names) => {
                for n in names {
                    if d.table(n).is_none() {
                        return Err(ExtractError::Config(format!("unknown reference table {n:?}")));
                    }
                }
                Ok(d.tables().iter().map(|t| names.contains(&t.name)).collect())
            }
        }
    }
}

/// Smallest multiple of `grid` strictly greater than `d`. Query predicates
/// compare with `<`, so a threshold equal to a witness distance would miss it.
pub fn grid_ceil_above(d: f64, grid: f64) -> f64 {
    ((d / grid).floor() + 1.0) * grid
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn check_index(d: &Dataset, tree: &StrTree) -> Result<(), ExtractError> {
    if tree.len() != d.entity_count() {
        return Err(ExtractError::StaleIndex(format!(
            "index holds {} entries, dataset has {} entities",
            tree.len(),
            d.entity_count()
        )));
    }
    let mut seen = HashSet::with_capacity(tree.len());
    for e in tree.entries() {
        let entity = d
            .entity(e.item_id)
            .ok_or_else(|| ExtractError::StaleIndex(format!("unknown id {}", e.item_id)))?;
        if !seen.insert(e.item_id) || entity.geometry.bbox() != e.bbox {
            return Err(ExtractError::StaleIndex(format!("entry {} does not match dataset", e.item_id)));
        }
    }
    Ok(())
}

fn fact(s: &Entity, o: &Entity, operator: Operator, distance: f64) -> EntityRelation {
    EntityRelation {
        subject_id: s.id,
        object_id: o.id,
        operator,
        distance,
        subject_kind: s.geometry.kind(),
        object_kind: o.geometry.kind(),
        score: 0.0,
    }
}

fn subject_facts(
    d: &Dataset,
    tree: &StrTree,
    cfg: &ExtractionConfig,
    is_ref: &[bool],
    s: &Entity,
) -> Vec<EntityRelation> {
    let lookup = |id: EntityId| -> &Geometry { &d.entity(id).expect("index checked").geometry };
    let accept = |id: EntityId| id != s.id && is_ref[d.table_index_of(id).expect("index checked")];
    let mut out = Vec::new();

    for id in tree.query_bbox(&s.geometry.bbox()) {
        if !accept(id) {
            continue;
        }
        let o = d.entity(id).expect("index checked");
        if intersects(&s.geometry, &o.geometry) {
            out.push(fact(s, o, Operator::Intersects, 0.0));
            if o.geometry.kind() == GeomKind::Region
                && inside(&s.geometry, &o.geometry).expect("region target")
            {
                out.push(fact(s, o, Operator::Inside, 0.0));
            }
        }
    }

    let mut per_table = vec![0usize; d.tables().len()];
    let mut open = is_ref.iter().filter(|r| **r).count();
    for (id, dist) in tree.nearest_iter(&s.geometry, cfg.radius_m, accept, lookup) {
        let t = d.table_index_of(id).expect("index checked");
        if per_table[t] == cfg.k {
            continue;
        }
        per_table[t] += 1;
        out.push(fact(s, d.entity(id).expect("index checked"), Operator::DistanceScan, dist));
        if per_table[t] == cfg.k {
            open -= 1;
            if open == 0 {
                break;
            }
        }
    }
    out
}

/// Entity facts for every subject against the reference tables, sorted by
/// (subject, object, operator).
pub fn extract_entity_relations(
    d: &Dataset,
    tree: &StrTree,
    cfg: &ExtractionConfig,
) -> Result<Vec<EntityRelation>, ExtractError> {
    cfg.validate()?;
    check_index(d, tree)?;
    let is_ref = cfg.reference_mask(d)?;
    let subjects: Vec<&Entity> = d.entities().collect();
    let mut facts: Vec<EntityRelation> = subjects
        .par_iter()
        .flat_map_iter(|s| subject_facts(d, tree, cfg, &is_ref, s))
        .collect();
    facts.sort_by_key(EntityRelation::key);
    Ok(facts)
}

/// One witnessing entity pair of a table-level record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub score: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationGroup {
    pub relation: RelationRelation,
    pub witnesses: Vec<Witness>,
}

type PairWitnesses = BTreeMap<(EntityId, EntityId), Witness>;

/// Keyed by (first-table entity, second-table entity) so both directions of
/// a symmetric fact collapse to one pair.
fn add_witness(map: &mut PairWitnesses, a: EntityId, b: EntityId, w: Witness) {
    map.entry((a, b))
        .and_modify(|old| {
            if w.score > old.score {
                *old = w;
            }
        })
        .or_insert(w);
}

/// Groups entity facts into spatial-join, distance-join and aggregation
/// records. Join groups use unordered table pairs and count distinct
/// unordered entity pairs; aggregation is directed (subject table, region
/// table). Same-table pairs are skipped.
pub fn extract_relation_relations(
    d: &Dataset,
    facts: &[EntityRelation],
    cfg: &ExtractionConfig,
) -> Vec<RelationGroup> {
    let mut joins: BTreeMap<(Operator, usize, usize), PairWitnesses> = BTreeMap::new();
    let mut contained: BTreeMap<(usize, usize), Vec<Witness>> = BTreeMap::new();
    for f in facts {
        let (Some(ts), Some(to)) = (d.table_index_of(f.subject_id), d.table_index_of(f.object_id)) else {
            continue;
        };
        if ts == to {
            continue;
        }
        let w = Witness {
            score: f.score,
            distance: f.distance,
        };
        match f.operator {
            Operator::Intersects | Operator::DistanceScan => {
                let tables = &d.tables();
                let (a, b) = if tables[ts].name <= tables[to].name { (ts, to) } else { (to, ts) };
                let (ea, eb) = if a == ts {
                    (f.subject_id, f.object_id)
                } else {
                    (f.object_id, f.subject_id)
                };
                add_witness(joins.entry((f.operator, a, b)).or_default(), ea, eb, w);
            }
            Operator::Inside => contained.entry((ts, to)).or_default().push(w),
            Operator::SymmJoin => {}
        }
    }

    let tables = d.tables();
    let mut out = Vec::new();
    for ((op, a, b), pairs) in joins {
        if (pairs.len() as u64) < cfg.min_support {
            continue;
        }
        let witnesses: Vec<Witness> = pairs.into_values().collect();
        let (query_type, operator, distance) = if op == Operator::Intersects {
            (QueryType::SpatialJoin, Operator::SymmJoin, 0.0)
        } else {
            let mut ds: Vec<f64> = witnesses.iter().map(|w| w.distance).collect();
            ds.sort_by(f64::total_cmp);
            let p90 = percentile_nearest_rank(&ds, 0.9);
            (
                QueryType::DistanceJoin,
                Operator::DistanceScan,
                grid_ceil_above(p90, cfg.distance_grid_m),
            )
        };
        out.push(RelationGroup {
            relation: RelationRelation {
                query_type,
                relation1: tables[a].name.clone(),
                relation2: tables[b].name.clone(),
                relation1_type: tables[a].kind,
                relation2_type: tables[b].kind,
                distance,
                operator,
                support: witnesses.len() as u64,
                score: 0.0,
            },
            witnesses,
        });
    }
    for ((s, o), witnesses) in contained {
        if (witnesses.len() as u64) < cfg.min_support {
            continue;
        }
        out.push(RelationGroup {
            relation: RelationRelation {
                query_type: QueryType::Aggregation,
                relation1: tables[s].name.clone(),
                relation2: tables[o].name.clone(),
                relation1_type: tables[s].kind,
                relation2_type: tables[o].kind,
                distance: 0.0,
                operator: Operator::SymmJoin,
                support: witnesses.len() as u64,
                score: 0.0,
            },
            witnesses,
        });
    }
    out.sort_by(|x, y| x.relation.key().cmp(&y.relation.key()));
    out
}
