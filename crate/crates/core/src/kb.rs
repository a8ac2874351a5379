//! Knowledge base: filtered entity and relation tables persisted as CSV plus
//! a JSON metadata file.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, EntityId};
use crate::extract::ExtractionConfig;
use crate::fsutil::write_atomic;
use crate::geometry::{GeomKind, Geometry};
use crate::quality::QualityConfig;
use crate::relation::{EntityRelation, Operator, QueryType, RelationRelation};

pub const KB_FORMAT_VERSION: u32 = 1;
pub const ENTITY_FILE: &str = "entity_relations.csv";
pub const RELATION_FILE: &str = "relation_relations.csv";
pub const META_FILE: &str = "kb_meta.json";

pub const ENTITY_COLUMNS: [&str; 7] = [
    "subject",
    "object",
    "operator",
    "subject_kind",
    "object_kind",
    "distance_m",
    "score",
];
pub const RELATION_COLUMNS: [&str; 9] = [
    "query_type",
    "relation1",
    "relation2",
    "relation1_type",
    "relation2_type",
    "distance_m",
    "operator",
    "support",
    "score",
];

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing knowledge base file {0}")]
    Missing(PathBuf),
    #[error("{path}: invalid metadata: {source}")]
    Meta {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported knowledge base format version {found} (expected {KB_FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("schema mismatch (format v{KB_FORMAT_VERSION}) in {file}: column {column:?}: {message}")]
    Schema {
        file: String,
        column: String,
        message: String,
    },
    #[error("{file} row {line}: {message}")]
    Row {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("knowledge base invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableInfo {
    pub name: String,
    pub label: String,
    pub kind: GeomKind,
}

/// Catalog entry for an entity referenced by at least one fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityInfo {
    pub name: String,
    pub id: EntityId,
    pub table: String,
    pub kind: GeomKind,
    /// Coordinates of point entities, used as kNN anchors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounts {
    pub candidate_entity_relations: usize,
    pub candidate_relation_relations: usize,
    pub entity_relations: usize,
    pub relation_relations: usize,
    /// Facts dropped because an endpoint shares its name with another entity.
    pub ambiguous_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub format_version: u32,
    pub source_dataset: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub extraction: ExtractionConfig,
    pub quality: QualityConfig,
    pub counts: BuildCounts,
    pub tables: Vec<TableInfo>,
    pub entities: Vec<EntityInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub entity_relations: Vec<EntityRelation>,
    pub relation_relations: Vec<RelationRelation>,
    pub meta: BuildMeta,
    by_id: HashMap<EntityId, usize>,
    by_name: HashMap<String, usize>,
}

/// Distances are stored with millimeter precision so CSV output is stable.
/// Rounds to millimetres. A separated pair never rounds down to 0, which
/// would read back as touching.
pub fn quantize_distance(d: f64) -> f64 {
    let q = (d * 1000.0).round() / 1000.0;
    if q == 0.0 && d > crate::geometry::EPSILON {
        0.001
    } else {
        q
    }
}

fn entity_sort_key<'a>(kb_names: &'a HashMap<EntityId, usize>, cat: &'a [EntityInfo], r: &EntityRelation) -> (&'a str, &'a str, Operator) {
    (
        &cat[kb_names[&r.subject_id]].name,
        &cat[kb_names[&r.object_id]].name,
        r.operator,
    )
}

fn relation_sort(rows: &mut [RelationRelation]) {
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
}

impl KnowledgeBase {
    fn assemble(
        mut entity_relations: Vec<EntityRelation>,
        mut relation_relations: Vec<RelationRelation>,
        meta: BuildMeta,
    ) -> Self {
        let by_id: HashMap<EntityId, usize> =
            meta.entities.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        let by_name = meta.entities.iter().enumerate().map(|(i, e)| (e.name.clone(), i)).collect();
        entity_relations.sort_by(|a, b| {
            entity_sort_key(&by_id, &meta.entities, a).cmp(&entity_sort_key(&by_id, &meta.entities, b))
        });
        relation_sort(&mut relation_relations);
        KnowledgeBase {
            entity_relations,
            relation_relations,
            meta,
            by_id,
            by_name,
        }
    }

    /// Builds a KB from scored, filtered relations. Facts whose endpoints
    /// have ambiguous names are dropped, since rows are keyed by name.
    pub fn build(
        d: &Dataset,
        entity_relations: Vec<EntityRelation>,
        relation_relations: Vec<RelationRelation>,
        extraction: ExtractionConfig,
        quality: QualityConfig,
        mut counts: BuildCounts,
        timestamp: u64,
    ) -> Self {
        let unique = |id: EntityId| d.entity(id).is_some_and(|e| d.ids_named(&e.name).len() == 1);
        let before = entity_relations.len();
        let entity_relations: Vec<EntityRelation> = entity_relations
            .into_iter()
            .filter(|r| unique(r.subject_id) && unique(r.object_id))
            .map(|r| EntityRelation {
                distance: quantize_distance(r.distance),
                ..r
            })
            .collect();
        let relation_relations: Vec<RelationRelation> = relation_relations
            .into_iter()
            .map(|r| RelationRelation {
                distance: quantize_distance(r.distance),
                ..r
            })
            .collect();
        counts.ambiguous_dropped += before - entity_relations.len();
        counts.entity_relations = entity_relations.len();
        counts.relation_relations = relation_relations.len();

        let mut referenced: Vec<EntityId> = entity_relations
            .iter()
            .flat_map(|r| [r.subject_id, r.object_id])
            .collect();
        referenced.sort_unstable();
        referenced.dedup();
        let entities = referenced
            .into_iter()
            .map(|id| {
                let e = d.entity(id).expect("fact endpoints exist");
                EntityInfo {
                    name: e.name.clone(),
                    id,
                    table: e.table.clone(),
                    kind: e.geometry.kind(),
                    anchor: match &e.geometry {
                        Geometry::Point(p) => Some([p.x, p.y]),
                        _ => None,
                    },
                }
            })
            .collect();
        let tables = d
            .tables()
            .iter()
            .map(|t| TableInfo {
                name: t.name.clone(),
                label: t.display_label().to_string(),
                kind: t.kind,
            })
            .collect();
        let meta = BuildMeta {
            format_version: KB_FORMAT_VERSION,
            source_dataset: d.name.clone(),
            timestamp,
            extraction,
            quality,
            counts,
            tables,
            entities,
        };
        Self::assemble(entity_relations, relation_relations, meta)
    }

    pub fn source_dataset(&self) -> &str {
        &self.meta.source_dataset
    }

    pub fn entity(&self, id: EntityId) -> Option<&EntityInfo> {
        self.by_id.get(&id).map(|&i| &self.meta.entities[i])
    }

    pub fn entity_named(&self, name: &str) -> Option<&EntityInfo> {
        self.by_name.get(name).map(|&i| &self.meta.entities[i])
    }

    pub fn table(&self, name: &str) -> Option<&TableInfo> {
        self.meta.tables.iter().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.entity_relations.is_empty() && self.relation_relations.is_empty()
    }

    fn name_of(&self, id: EntityId) -> &str {
        &self.entity(id).expect("catalogued").name
    }

    /// Provenance key of an entity fact.
    pub fn entity_key(&self, r: &EntityRelation) -> String {
        format!("er:{}|{}|{}", self.name_of(r.subject_id), self.name_of(r.object_id), r.operator)
    }

    /// Checks the invariants that `load_kb` enforces.
    pub fn validate(&self) -> Result<(), KbError> {
        let bad = |m: String| Err(KbError::Invariant(m));
        let threshold = self.meta.quality.threshold;
        for r in &self.entity_relations {
            let (Some(s), Some(o)) = (self.entity(r.subject_id), self.entity(r.object_id)) else {
                return bad(format!("fact {}→{} references uncatalogued entity", r.subject_id, r.object_id));
            };
            if r.subject_id == r.object_id {
                return bad(format!("fact relates {} to itself", s.name));
            }
            if s.kind != r.subject_kind || o.kind != r.object_kind {
                return bad(format!("kind mismatch on {}|{}", s.name, o.name));
            }
            if !(r.score > threshold && r.score <= 1.0) {
                return bad(format!("score {} of {}|{} not above threshold {threshold}", r.score, s.name, o.name));
            }
            let consistent = match r.operator {
                Operator::Intersects | Operator::Inside => r.distance == 0.0,
                Operator::DistanceScan => r.distance >= 0.0 && r.distance <= self.meta.extraction.radius_m,
                Operator::SymmJoin => false,
            };
            if !consistent {
                return bad(format!("{} fact {}|{} has distance {}", r.operator, s.name, o.name, r.distance));
            }
        }
        for r in &self.relation_relations {
            for (t, kind) in [(&r.relation1, r.relation1_type), (&r.relation2, r.relation2_type)] {
                match self.table(t) {
                    Some(info) if info.kind == kind => {}
                    _ => return bad(format!("relation references unknown table {t:?} of kind {kind}")),
                }
            }
            if r.support == 0 {
                return bad(format!("{} {}/{} has zero support", r.query_type, r.relation1, r.relation2));
            }
            if (r.distance > 0.0) != (r.query_type == QueryType::DistanceJoin) {
                return bad(format!("{} {}/{} has distance {}", r.query_type, r.relation1, r.relation2, r.distance));
            }
            if !(r.score > threshold && r.score <= 1.0) {
                return bad(format!("score {} of {}/{} not above threshold", r.score, r.relation1, r.relation2));
            }
        }
        let c = &self.meta.counts;
        if c.entity_relations != self.entity_relations.len() || c.relation_relations != self.relation_relations.len() {
            return bad("row counts disagree with metadata".into());
        }
        Ok(())
    }
}

/// Provenance key of a relation record.
pub fn relation_key(r: &RelationRelation) -> String {
    format!("rr:{}|{}|{}|{}", r.query_type, r.relation1, r.relation2, r.operator)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes the three KB files; each is replaced atomically.
pub fn save_kb(kb: &KnowledgeBase, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, KbError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let entities = csv_bytes(
        ENTITY_COLUMNS,
        kb.entity_relations.iter().map(|r| {
            [
                kb.name_of(r.subject_id).to_string(),
                kb.name_of(r.object_id).to_string(),
                r.operator.to_string(),
                r.subject_kind.to_string(),
                r.object_kind.to_string(),
                format!("{:.3}", r.distance),
                format!("{}", r.score),
            ]
        }),
    );
    let relations = csv_bytes(
        RELATION_COLUMNS,
        kb.relation_relations.iter().map(|r| {
            [
                r.query_type.to_string(),
                r.relation1.clone(),
                r.relation2.clone(),
                r.relation1_type.to_string(),
                r.relation2_type.to_string(),
                format!("{:.3}", r.distance),
                r.operator.to_string(),
                r.support.to_string(),
                format!("{}", r.score),
            ]
        }),
    );
    let mut meta = serde_json::to_string_pretty(&kb.meta).expect("metadata serializes");
    meta.push('\n');
    let mut written = Vec::new();
    for (name, bytes) in [
        (ENTITY_FILE, entities),
        (RELATION_FILE, relations),
        (META_FILE, meta.into_bytes()),
    ] {
        let path = dir.join(name);
        write_atomic(&path, &bytes).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn check_header(file: &str, found: &csv::StringRecord, expected: &[&str]) -> Result<(), KbError> {
    for (i, want) in expected.iter().enumerate() {
        match found.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(KbError::Schema {
                    file: file.into(),
                    column: got.into(),
                    message: format!("expected {want:?} at position {}", i + 1),
                })
            }
            None => {
                return Err(KbError::Schema {
                    file: file.into(),
                    column: (*want).into(),
                    message: "missing".into(),
                })
            }
        }
    }
    if let Some(extra) = found.get(expected.len()) {
        return Err(KbError::Schema {
            file: file.into(),
            column: extra.into(),
            message: "unexpected column".into(),
        });
    }
    Ok(())
}

fn read_rows(
    dir: &Path,
    file: &str,
    columns: &[&str],
    mut each: impl FnMut(&csv::StringRecord, &dyn Fn(String) -> KbError) -> Result<(), KbError>,
) -> Result<(), KbError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(KbError::Missing(path));
    }
    let csv_err = |source| KbError::Csv {
        file: file.into(),
        source,
    };
    let mut reader = csv::Reader::from_path(&path).map_err(csv_err)?;
    check_header(file, &reader.headers().map_err(csv_err)?.clone(), columns)?;
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row_err = |message: String| KbError::Row {
            file: file.into(),
            line,
            message,
        };
        each(&rec, &row_err)?;
    }
    Ok(())
}

fn parse_kind(s: &str, err: &dyn Fn(String) -> KbError) -> Result<GeomKind, KbError> {
    GeomKind::parse(s).ok_or_else(|| err(format!("unknown geometry kind {s:?}")))
}

fn parse_num(s: &str, what: &str, err: &dyn Fn(String) -> KbError) -> Result<f64, KbError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err(format!("invalid {what} {s:?}"))),
    }
}

pub fn load_kb(dir: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    if !meta_path.is_file() {
        return Err(KbError::Missing(meta_path));
    }
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let version: serde_json::Value = serde_json::from_str(&text).map_err(|source| KbError::Meta {
        path: meta_path.clone(),
        source,
    })?;
    let found = version.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != KB_FORMAT_VERSION {
        return Err(KbError::Version { found });
    }
    let meta: BuildMeta = serde_json::from_value(version).map_err(|source| KbError::Meta {
        path: meta_path.clone(),
        source,
    })?;
    let names: BTreeMap<&str, &EntityInfo> = meta.entities.iter().map(|e| (e.name.as_str(), e)).collect();

    let mut entity_relations = Vec::new();
    read_rows(dir, ENTITY_FILE, &ENTITY_COLUMNS, |rec, err| {
        let lookup = |n: &str| {
            names
                .get(n)
                .map(|e| e.id)
                .ok_or_else(|| err(format!("entity {n:?} is not in the catalog")))
        };
        let operator = Operator::parse(&rec[2])
            .filter(|o| *o != Operator::SymmJoin)
            .ok_or_else(|| err(format!("unknown operator {:?}", &rec[2])))?;
        entity_relations.push(EntityRelation {
            subject_id: lookup(&rec[0])?,
            object_id: lookup(&rec[1])?,
            operator,
            subject_kind: parse_kind(&rec[3], err)?,
            object_kind: parse_kind(&rec[4], err)?,
            distance: parse_num(&rec[5], "distance", err)?,
            score: parse_num(&rec[6], "score", err)?,
        });
        Ok(())
    })?;

    let mut relation_relations = Vec::new();
    read_rows(dir, RELATION_FILE, &RELATION_COLUMNS, |rec, err| {
        let query_type = QueryType::parse(&rec[0])
            .filter(|q| q.is_table_level())
            .ok_or_else(|| err(format!("unknown query type {:?}", &rec[0])))?;
        let operator = Operator::parse(&rec[6])
            .filter(|o| matches!(o, Operator::SymmJoin | Operator::DistanceScan))
            .ok_or_else(|| err(format!("unknown operator {:?}", &rec[6])))?;
        relation_relations.push(RelationRelation {
            query_type,
            relation1: rec[1].to_string(),
            relation2: rec[2].to_string(),
            relation1_type: parse_kind(&rec[3], err)?,
            relation2_type: parse_kind(&rec[4], err)?,
            distance: parse_num(&rec[5], "distance", err)?,
            operator,
            support: rec[7]
                .parse()
                .map_err(|_| err(format!("invalid support {:?}", &rec[7])))?,
            score: parse_num(&rec[8], "score", err)?,
        });
        Ok(())
    })?;

    let kb = KnowledgeBase::assemble(entity_relations, relation_relations, meta);
    kb.validate()?;
    Ok(kb)
}

/// Conjunctive constraints for [`select_entity_relations`] and
/// [`select_relation_relations`]. Unset fields match everything.
///
/// On entity rows `relation1_type`/`relation2_type` alias the subject and
/// object kinds, and on relation rows the reverse holds. A `query_type` of
/// range or knn matches entity facts usable by those templates
/// (`distancescan` or `inside`); other query types match relation rows of
/// that type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub operator: Option<Operator>,
    pub query_type: Option<QueryType>,
    pub subject_kind: Option<GeomKind>,
    pub object_kind: Option<GeomKind>,
    pub relation1_type: Option<GeomKind>,
    pub relation2_type: Option<GeomKind>,
    pub max_distance: Option<f64>,
    pub min_score: Option<f64>,
}

impl Selection {
    fn common(&self, op: Operator, k1: GeomKind, k2: GeomKind, distance: f64, score: f64) -> bool {
        self.operator.is_none_or(|o| o == op)
            && self.subject_kind.is_none_or(|k| k == k1)
            && self.relation1_type.is_none_or(|k| k == k1)
            && self.object_kind.is_none_or(|k| k == k2)
            && self.relation2_type.is_none_or(|k| k == k2)
            && self.max_distance.is_none_or(|m| distance <= m)
            && self.min_score.is_none_or(|m| score >= m)
    }

    pub fn matches_entity(&self, r: &EntityRelation) -> bool {
        let qt = self.query_type.is_none_or(|q| {
            matches!(q, QueryType::Range | QueryType::Knn)
                && matches!(r.operator, Operator::DistanceScan | Operator::Inside)
        });
        qt && self.common(r.operator, r.subject_kind, r.object_kind, r.distance, r.score)
    }

    pub fn matches_relation(&self, r: &RelationRelation) -> bool {
        self.query_type.is_none_or(|q| q == r.query_type)
            && self.common(r.operator, r.relation1_type, r.relation2_type, r.distance, r.score)
    }
}

/// Matching entity facts, score descending then key.
pub fn select_entity_relations<'k>(kb: &'k KnowledgeBase, sel: &Selection) -> Vec<&'k EntityRelation> {
    // Rows are stored in key order, so a stable sort on score suffices.
    let mut out: Vec<_> = kb.entity_relations.iter().filter(|r| sel.matches_entity(r)).collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Matching relation records, score descending then key.
pub fn select_relation_relations<'k>(kb: &'k KnowledgeBase, sel: &Selection) -> Vec<&'k RelationRelation> {
    let mut out: Vec<_> = kb.relation_relations.iter().filter(|r| sel.matches_relation(r)).collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Human-readable one-line summary of a KB.
pub fn describe(kb: &KnowledgeBase) -> String {
    let mut by_op: BTreeMap<Operator, usize> = BTreeMap::new();
    for r in &kb.entity_relations {
        *by_op.entry(r.operator).or_default() += 1;
    }
    let mut by_qt: BTreeMap<QueryType, usize> = BTreeMap::new();
    for r in &kb.relation_relations {
        *by_qt.entry(r.query_type).or_default() += 1;
    }
    let mut s = format!("{} entity relations (", kb.entity_relations.len());
    for (i, (op, n)) in by_op.iter().enumerate() {
        let _ = write!(s, "{}{op} {n}", if i > 0 { ", " } else { "" });
    }
    let _ = write!(s, "), {} relation relations (", kb.relation_relations.len());
    for (i, (qt, n)) in by_qt.iter().enumerate() {
        let _ = write!(s, "{}{qt} {n}", if i > 0 { ", " } else { "" });
    }
    s.push(')');
    s
}
