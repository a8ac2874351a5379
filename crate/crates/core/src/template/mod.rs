//! Template library, knowledge-base matching and synchronized instantiation
//! of natural-language / executable query pairs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeomKind;
use crate::kb::{relation_key, EntityInfo, KnowledgeBase, TableInfo};
use crate::query::parse_query;
use crate::relation::{EntityRelation, Operator, QueryType};

/// The library shipped with the tool: three templates per query type.
pub const DEFAULT_LIBRARY_JSON: &str = include_str!("default.json");

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z_]+)\}").expect("static regex"));

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed template file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template {id}: unknown query type {value:?}")]
    UnknownQueryType { id: String, value: String },
    #[error("template {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("template {id}: binding has no value for slot {slot:?}")]
    MissingSlot { id: String, slot: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Entity,
    Table,
    Distance,
    Operator,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    M,
    Km,
}

/// How an entity slot appears in the executable query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Render {
    #[default]
    Name,
    /// `POINT (x y)` literal of the entity's location.
    Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpec {
    pub name: String,
    pub kind: SlotKind,
    /// `None` means any geometry kind.
    pub geometry_constraint: Option<GeomKind>,
    /// Set on distance slots only.
    pub unit: Option<DistanceUnit>,
    pub render: Render,
}

impl SlotSpec {
    fn admits(&self, kind: GeomKind) -> bool {
        self.geometry_constraint.is_none_or(|c| c == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub query_type: QueryType,
    pub nl_pattern: String,
    pub exe_pattern: String,
    pub slots: Vec<SlotSpec>,
    pub distance_unit: DistanceUnit,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    name: String,
    kind: SlotKind,
    geometry_constraint: Option<String>,
    unit: Option<DistanceUnit>,
    #[serde(default)]
    render: Render,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    id: String,
    query_type: String,
    nl: String,
    exe: String,
    slots: Vec<RawSlot>,
    distance_unit: DistanceUnit,
}

pub fn placeholders(pattern: &str) -> BTreeSet<String> {
    PLACEHOLDER.captures_iter(pattern).map(|c| c[1].to_string()).collect()
}

/// Slot kinds each query type needs, as (kind, exact count).
fn required_slots(t: &Template) -> Vec<(SlotKind, usize)> {
    let has = |k| t.slots.iter().any(|s| s.kind == k);
    match t.query_type {
        QueryType::Range => {
            // A range query is bounded either by a distance or by a
            // containment operator.
            let bound = if has(SlotKind::Operator) { SlotKind::Operator } else { SlotKind::Distance };
            vec![(SlotKind::Table, 1), (SlotKind::Entity, 1), (bound, 1)]
        }
        QueryType::Knn => vec![(SlotKind::Table, 1), (SlotKind::Entity, 1), (SlotKind::Count, 1)],
        QueryType::SpatialJoin | QueryType::Aggregation => vec![(SlotKind::Table, 2)],
        QueryType::DistanceJoin => vec![(SlotKind::Table, 2), (SlotKind::Distance, 1)],
    }
}

fn canary(slot: &SlotSpec) -> &'static str {
    match (slot.kind, slot.render) {
        (SlotKind::Entity, Render::Point) => "POINT (0 0)",
        (SlotKind::Entity, Render::Name) => "E",
        (SlotKind::Table, _) => "T",
        (SlotKind::Distance, _) => "100",
        (SlotKind::Operator, _) => "intersects",
        (SlotKind::Count, _) => "1",
    }
}

impl Template {
    fn from_raw(raw: RawTemplate) -> Result<Self, TemplateError> {
        let id = raw.id.clone();
        let invalid = |message: String| TemplateError::Invalid {
            id: id.clone(),
            message,
        };
        let query_type = QueryType::parse(&raw.query_type).ok_or_else(|| TemplateError::UnknownQueryType {
            id: id.clone(),
            value: raw.query_type.clone(),
        })?;
        let mut slots = Vec::with_capacity(raw.slots.len());
        for s in raw.slots {
            let geometry_constraint = match s.geometry_constraint.as_deref() {
                None | Some("any") => None,
                Some(k) => Some(GeomKind::parse(k).ok_or_else(|| invalid(format!("slot {}: unknown geometry kind {k:?}", s.name)))?),
            };
            if s.kind != SlotKind::Distance && s.unit.is_some() {
                return Err(invalid(format!("slot {}: only distance slots take a unit", s.name)));
            }
            if s.render == Render::Point && !(s.kind == SlotKind::Entity && geometry_constraint == Some(GeomKind::Point)) {
                return Err(invalid(format!("slot {}: point rendering needs an entity slot constrained to point", s.name)));
            }
            if matches!(s.kind, SlotKind::Distance | SlotKind::Operator | SlotKind::Count) && geometry_constraint.is_some() {
                return Err(invalid(format!("slot {}: geometry constraints apply to entity and table slots", s.name)));
            }
            let unit = (s.kind == SlotKind::Distance).then_some(s.unit.unwrap_or(raw.distance_unit));
            slots.push(SlotSpec {
                name: s.name,
                kind: s.kind,
                geometry_constraint,
                unit,
                render: s.render,
            });
        }
        let t = Template {
            id: raw.id,
            query_type,
            nl_pattern: raw.nl,
            exe_pattern: raw.exe,
            slots,
            distance_unit: raw.distance_unit,
        };
        t.check().map_err(invalid)?;
        Ok(t)
    }

    fn check(&self) -> Result<(), String> {
        let declared: BTreeSet<String> = self.slots.iter().map(|s| s.name.clone()).collect();
        if declared.len() != self.slots.len() {
            return Err("duplicate slot name".into());
        }
        let (nl, exe) = (placeholders(&self.nl_pattern), placeholders(&self.exe_pattern));
        if nl != exe {
            let diff: Vec<_> = nl.symmetric_difference(&exe).cloned().collect();
            return Err(format!("nl and exe patterns disagree on slots {{{}}}", diff.join(", ")));
        }
        if nl != declared {
            let diff: Vec<_> = nl.symmetric_difference(&declared).cloned().collect();
            return Err(format!("slots {{{}}} are not both declared and used", diff.join(", ")));
        }
        let required = required_slots(self);
        let mut counts: BTreeMap<SlotKind, usize> = BTreeMap::new();
        for s in &self.slots {
            *counts.entry(s.kind).or_default() += 1;
        }
        let wanted: BTreeMap<SlotKind, usize> = required.iter().copied().collect();
        if counts != wanted {
            let want: Vec<_> = required.iter().map(|(k, n)| format!("{n} {k:?}")).collect();
            return Err(format!("{} templates need exactly {} slot(s)", self.query_type, want.join(" + ").to_lowercase()));
        }
        if self.query_type == QueryType::Knn {
            let anchor = self.slots.iter().find(|s| s.kind == SlotKind::Entity).expect("counted");
            if anchor.render != Render::Point {
                return Err("knn anchors must be constrained to point and rendered as a point".into());
            }
        }
        let canaried = self.canary_query();
        parse_query(&canaried).map_err(|e| format!("exe pattern does not parse with canary values ({canaried}): {e}"))?;
        Ok(())
    }

    fn slot(&self, kind: SlotKind) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.kind == kind)
    }

    fn table_slots(&self) -> Vec<&SlotSpec> {
        self.slots.iter().filter(|s| s.kind == SlotKind::Table).collect()
    }

    /// The exe pattern with every slot replaced by its canary value.
    pub fn canary_query(&self) -> String {
        PLACEHOLDER
            .replace_all(&self.exe_pattern, |c: &regex::Captures<'_>| {
                canary(self.slots.iter().find(|s| s.name == c[1]).expect("validated"))
            })
            .into_owned()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
}

impl TemplateLibrary {
    pub fn new(templates: Vec<Template>) -> Result<Self, TemplateError> {
        let mut seen = HashSet::new();
        for t in &templates {
            if !seen.insert(t.id.as_str()) {
                return Err(TemplateError::Invalid {
                    id: t.id.clone(),
                    message: "duplicate template id".into(),
                });
            }
        }
        Ok(TemplateLibrary { templates })
    }

    pub fn default_library() -> Self {
        parse_templates(DEFAULT_LIBRARY_JSON).expect("shipped library is valid").0
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    pub fn covered_types(&self) -> BTreeSet<QueryType> {
        self.templates.iter().map(|t| t.query_type).collect()
    }
}

/// Parses a JSON template array. An empty document yields an empty library
/// and a warning.
pub fn parse_templates(text: &str) -> Result<(TemplateLibrary, Vec<String>), TemplateError> {
    if text.trim().is_empty() {
        return Ok((TemplateLibrary::default(), vec!["template file is empty".into()]));
    }
    let raw: Vec<RawTemplate> = serde_json::from_str(text)?;
    let mut warnings = Vec::new();
    if raw.is_empty() {
        warnings.push("template file is empty".into());
    }
    let templates = raw.into_iter().map(Template::from_raw).collect::<Result<Vec<_>, _>>()?;
    let lib = TemplateLibrary::new(templates)?;
    for qt in QueryType::ALL {
        if !lib.is_empty() && !lib.covered_types().contains(&qt) {
            warnings.push(format!("no template for query type {qt}"));
        }
    }
    Ok((lib, warnings))
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<(TemplateLibrary, Vec<String>), TemplateError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_templates(&text)
}

/// How a containment-style range query addresses its reference object:
/// (object kind, executable operator, natural-language phrase).
pub const CONTAINMENT_DISPATCH: [(GeomKind, &str, &str); 3] = [
    (GeomKind::Region, "inside", "located inside"),
    (GeomKind::Line, "intersects", "on"),
    (GeomKind::Point, "intersects", "at"),
];

fn dispatch(object: GeomKind) -> (&'static str, &'static str) {
    let (_, op, phrase) = CONTAINMENT_DISPATCH
        .iter()
        .find(|(k, _, _)| *k == object)
        .expect("every kind has a dispatch entry");
    (op, phrase)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "slot", rename_all = "lowercase")]
pub enum SlotValue {
    Entity {
        name: String,
        kind: GeomKind,
        anchor: Option<[f64; 2]>,
    },
    Table {
        name: String,
        label: String,
        kind: GeomKind,
    },
    /// Meters.
    Distance { meters: u64 },
    Operator { op: String, phrase: String },
    Count { n: u64 },
}

/// KB-derived values for every slot of one template.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Binding {
    pub values: BTreeMap<String, SlotValue>,
    /// Keys of the KB rows the values come from.
    pub provenance: Vec<String>,
    /// Entity names referenced by the provenance rows.
    pub entities: Vec<String>,
    /// Geometry kind combination, used for balanced sampling.
    pub combo: (GeomKind, GeomKind),
}

/// Smallest whole-meter threshold strictly above a measured distance, so a
/// strict `<` in the executable query still admits the witness.
pub fn threshold_above(d: f64) -> u64 {
    d.floor() as u64 + 1
}

/// Whole-meter form of a threshold that is already a bound.
fn threshold_at(d: f64) -> u64 {
    d.ceil() as u64
}

fn entity_value(e: &EntityInfo) -> SlotValue {
    SlotValue::Entity {
        name: e.name.clone(),
        kind: e.kind,
        anchor: e.anchor,
    }
}

fn table_value(t: &TableInfo) -> SlotValue {
    SlotValue::Table {
        name: t.name.clone(),
        label: t.label.clone(),
        kind: t.kind,
    }
}

struct Matcher<'a> {
    t: &'a Template,
    kb: &'a KnowledgeBase,
}

impl Matcher<'_> {
    fn entity_fact(&self, r: &EntityRelation, extra: Option<(SlotKind, SlotValue)>) -> Option<Binding> {
        let s = self.kb.entity(r.subject_id)?;
        let o = self.kb.entity(r.object_id)?;
        let table_slot = self.t.slot(SlotKind::Table)?;
        let entity_slot = self.t.slot(SlotKind::Entity)?;
        if !table_slot.admits(s.kind) || !entity_slot.admits(o.kind) {
            return None;
        }
        let mut values = BTreeMap::new();
        values.insert(table_slot.name.clone(), table_value(self.kb.table(&s.table)?));
        values.insert(entity_slot.name.clone(), entity_value(o));
        if let Some((kind, v)) = extra {
            values.insert(self.t.slot(kind)?.name.clone(), v);
        }
        Some(Binding {
            values,
            provenance: vec![self.kb.entity_key(r)],
            entities: vec![s.name.clone(), o.name.clone()],
            combo: (s.kind, o.kind),
        })
    }

    fn range(&self) -> Vec<Binding> {
        let containment = self.t.slot(SlotKind::Operator).is_some();
        self.kb
            .entity_relations
            .iter()
            .filter_map(|r| {
                if containment {
                    let containing = match r.operator {
                        Operator::Inside => true,
                        // Touching a region is not containment, so only
                        // non-region objects qualify through zero distance.
                        Operator::DistanceScan => r.distance == 0.0 && r.object_kind != GeomKind::Region,
                        _ => false,
                    };
                    if !containing {
                        return None;
                    }
                    let (op, phrase) = dispatch(r.object_kind);
                    let v = SlotValue::Operator {
                        op: op.into(),
                        phrase: phrase.into(),
                    };
                    self.entity_fact(r, Some((SlotKind::Operator, v)))
                } else if r.operator == Operator::DistanceScan {
                    let v = SlotValue::Distance {
                        meters: threshold_above(r.distance),
                    };
                    self.entity_fact(r, Some((SlotKind::Distance, v)))
                } else {
                    None
                }
            })
            .collect()
    }

    fn knn(&self) -> Vec<Binding> {
        let (Some(table_slot), Some(anchor_slot), Some(count_slot)) = (
            self.t.slot(SlotKind::Table),
            self.t.slot(SlotKind::Entity),
            self.t.slot(SlotKind::Count),
        ) else {
            return Vec::new();
        };
        let mut groups: BTreeMap<(&str, &str), Vec<&EntityRelation>> = BTreeMap::new();
        for r in &self.kb.entity_relations {
            if r.operator != Operator::DistanceScan || !anchor_slot.admits(r.subject_kind) || !table_slot.admits(r.object_kind) {
                continue;
            }
            let (Some(s), Some(o)) = (self.kb.entity(r.subject_id), self.kb.entity(r.object_id)) else {
                continue;
            };
            if s.anchor.is_none() {
                continue;
            }
            groups.entry((&s.name, &o.table)).or_default().push(r);
        }
        groups
            .into_iter()
            // A ranking of one object reads badly ("the 1 nearest parks").
            .filter(|(_, facts)| facts.len() >= 2)
            .filter_map(|((subject, table), facts)| {
                let s = self.kb.entity_named(subject)?;
                let t = self.kb.table(table)?;
                let mut values = BTreeMap::new();
                values.insert(table_slot.name.clone(), table_value(t));
                values.insert(anchor_slot.name.clone(), entity_value(s));
                values.insert(count_slot.name.clone(), SlotValue::Count { n: facts.len() as u64 });
                let mut entities = vec![s.name.clone()];
                entities.extend(facts.iter().filter_map(|r| self.kb.entity(r.object_id).map(|o| o.name.clone())));
                Some(Binding {
                    values,
                    provenance: facts.iter().map(|r| self.kb.entity_key(r)).collect(),
                    entities,
                    combo: (s.kind, t.kind),
                })
            })
            .collect()
    }

    fn table_level(&self) -> Vec<Binding> {
        let slots = self.t.table_slots();
        let [first, second] = slots.as_slice() else {
            return Vec::new();
        };
        self.kb
            .relation_relations
            .iter()
            .filter(|r| r.query_type == self.t.query_type)
            .filter_map(|r| {
                if !first.admits(r.relation1_type) || !second.admits(r.relation2_type) {
                    return None;
                }
                let mut values = BTreeMap::new();
                values.insert(first.name.clone(), table_value(self.kb.table(&r.relation1)?));
                values.insert(second.name.clone(), table_value(self.kb.table(&r.relation2)?));
                if let Some(d) = self.t.slot(SlotKind::Distance) {
                    values.insert(d.name.clone(), SlotValue::Distance { meters: threshold_at(r.distance) });
                }
                Some(Binding {
                    values,
                    provenance: vec![relation_key(r)],
                    entities: Vec::new(),
                    combo: (r.relation1_type, r.relation2_type),
                })
            })
            .collect()
    }
}

/// All distinct bindings of `t` against `kb`, in KB order. Bindings that
/// would render identically are merged, keeping the first provenance.
pub fn match_candidates(t: &Template, kb: &KnowledgeBase) -> Vec<Binding> {
    let m = Matcher { t, kb };
    let all = match t.query_type {
        QueryType::Range => m.range(),
        QueryType::Knn => m.knn(),
        QueryType::SpatialJoin | QueryType::DistanceJoin | QueryType::Aggregation => m.table_level(),
    };
    let mut seen = HashSet::new();
    all.into_iter()
        .filter(|b| seen.insert(serde_json::to_string(&b.values).expect("plain values")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPair {
    pub template_id: String,
    pub query_type: QueryType,
    pub nl: String,
    pub exe: String,
    pub binding: Binding,
}

impl QueryPair {
    pub fn provenance(&self) -> &[String] {
        &self.binding.provenance
    }

    /// Checks that no placeholder survived and the pair is grounded.
    pub fn check(&self) -> Result<(), String> {
        for (which, text) in [("nl", &self.nl), ("exe", &self.exe)] {
            if let Some(m) = PLACEHOLDER.find(text) {
                return Err(format!("{which} text has unsubstituted placeholder {}", m.as_str()));
            }
        }
        if self.binding.provenance.is_empty() {
            return Err("pair has no provenance".into());
        }
        Ok(())
    }
}

fn quote_str(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n").replace('\t', "\\t")
}

/// Renders one distance for natural language.
pub fn render_distance_nl(meters: u64, unit: DistanceUnit) -> String {
    if unit == DistanceUnit::Km && meters >= 1000 {
        format!("{:.1} km", meters as f64 / 1000.0)
    } else {
        format!("{meters} m")
    }
}

/// The (natural-language, executable) text a slot renders to.
pub fn render_slot(slot: &SlotSpec, value: &SlotValue) -> Result<(String, String), String> {
    let mismatch = || format!("slot {} of kind {:?} cannot take {value:?}", slot.name, slot.kind);
    Ok(match (slot.kind, value) {
        (SlotKind::Entity, SlotValue::Entity { name, kind, anchor }) => {
            if !slot.admits(*kind) {
                return Err(format!("slot {} does not admit a {kind}", slot.name));
            }
            let exe = match slot.render {
                Render::Name => quote_str(name),
                Render::Point => {
                    let [x, y] = anchor.ok_or_else(|| format!("entity {name} has no point anchor"))?;
                    format!("POINT ({x} {y})")
                }
            };
            (name.clone(), exe)
        }
        (SlotKind::Table, SlotValue::Table { name, label, kind }) => {
            if !slot.admits(*kind) {
                return Err(format!("slot {} does not admit a {kind} table", slot.name));
            }
            (label.clone(), name.clone())
        }
        (SlotKind::Distance, SlotValue::Distance { meters }) => {
            let unit = slot.unit.unwrap_or(DistanceUnit::M);
            (render_distance_nl(*meters, unit), meters.to_string())
        }
        (SlotKind::Operator, SlotValue::Operator { op, phrase }) => (phrase.clone(), op.clone()),
        (SlotKind::Count, SlotValue::Count { n }) => (n.to_string(), n.to_string()),
        _ => return Err(mismatch()),
    })
}

fn substitute(pattern: &str, rendered: &BTreeMap<&str, String>) -> String {
    PLACEHOLDER
        .replace_all(pattern, |c: &regex::Captures<'_>| rendered[&c[1]].clone())
        .into_owned()
}

/// Substitutes a binding into both patterns of `t`.
pub fn instantiate(t: &Template, b: &Binding) -> Result<QueryPair, TemplateError> {
    let mut nl_values = BTreeMap::new();
    let mut exe_values = BTreeMap::new();
    for slot in &t.slots {
        let value = b.values.get(&slot.name).ok_or_else(|| TemplateError::MissingSlot {
            id: t.id.clone(),
            slot: slot.name.clone(),
        })?;
        let (nl, exe) = render_slot(slot, value).map_err(|message| TemplateError::Invalid {
            id: t.id.clone(),
            message,
        })?;
        nl_values.insert(slot.name.as_str(), nl);
        exe_values.insert(slot.name.as_str(), exe);
    }
    Ok(QueryPair {
        template_id: t.id.clone(),
        query_type: t.query_type,
        nl: substitute(&t.nl_pattern, &nl_values),
        exe: substitute(&t.exe_pattern, &exe_values),
        binding: b.clone(),
    })
}

impl fmt::Display for QueryPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\n  {}", self.nl, self.exe)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Entity, Table};
    use crate::extract::ExtractionConfig;
    use crate::geometry::{Geometry, Region};
    use crate::kb::BuildCounts;
    use crate::quality::QualityConfig;
    use crate::relation::RelationRelation;

    fn raw(query_type: &str, nl: &str, exe: &str, slots: &str) -> String {
        format!(r#"[{{"id":"t","query_type":"{query_type}","nl":"{nl}","exe":"{exe}","slots":{slots},"distance_unit":"km"}}]"#)
    }

    const RANGE_SLOTS: &str = r#"[{"name":"entity_type","kind":"table"},{"name":"reference","kind":"entity"},{"name":"distance","kind":"distance"}]"#;
    const RANGE_NL: &str = "Which {entity_type}s are within {distance} of {reference}?";
    const RANGE_EXE: &str = r#"query {entity_type} feed filter[distance(.geom, ref(\"{reference}\")) < {distance}] consume"#;

    fn dataset() -> Dataset {
        let mk = |id, name: &str, table: &str, g: Geometry| Entity {
            id,
            name: name.into(),
            table: table.into(),
            geometry: g,
            attributes: Default::default(),
        };
        let mut kinos = Table::new("Kinos", GeomKind::Point);
        kinos.label = Some("cinema".into());
        kinos.entities = vec![
            mk(1, "Astor", "Kinos", Geometry::point(0.0, 0.0).unwrap()),
            mk(2, "Babylon", "Kinos", Geometry::point(1999.6, 0.0).unwrap()),
        ];
        let mut plazas = Table::new("Plazas", GeomKind::Region);
        plazas.label = Some("plaza".into());
        plazas.entities = vec![mk(3, "Alexanderplatz", "Plazas", Region::rect(-10.0, -10.0, 10.0, 10.0).unwrap().into())];
        let mut parks = Table::new("Parks", GeomKind::Region);
        parks.label = Some("park".into());
        parks.entities = vec![
            mk(4, "Tiergarten", "Parks", Region::rect(5000.0, 0.0, 6000.0, 1000.0).unwrap().into()),
            mk(5, "Volkspark", "Parks", Region::rect(0.0, 3000.0, 100.0, 3100.0).unwrap().into()),
        ];
        Dataset::new("fixture", "", vec![kinos, plazas, parks]).unwrap()
    }

    fn fact(s: u64, o: u64, operator: Operator, distance: f64, sk: GeomKind, ok: GeomKind) -> EntityRelation {
        EntityRelation {
            subject_id: s,
            object_id: o,
            operator,
            distance,
            subject_kind: sk,
            object_kind: ok,
            score: 0.9,
        }
    }

    fn kb(ers: Vec<EntityRelation>, rrs: Vec<RelationRelation>) -> KnowledgeBase {
        let counts = BuildCounts::default();
        KnowledgeBase::build(&dataset(), ers, rrs, ExtractionConfig::default(), QualityConfig::default(), counts, 0)
    }

    fn single(text: &str) -> Template {
        parse_templates(text).unwrap().0.templates()[0].clone()
    }

    #[test]
    fn default_library_covers_all_types() {
        let lib = TemplateLibrary::default_library();
        assert_eq!(lib.len(), 15);
        assert_eq!(lib.covered_types().len(), 5);
        for qt in QueryType::ALL {
            assert_eq!(lib.templates().iter().filter(|t| t.query_type == qt).count(), 3);
        }
    }

    #[test]
    fn slot_mismatch_names_template() {
        let text = raw("range", RANGE_NL, r#"query {entity_type} feed filter[distance(.geom, ref(\"X\")) < {distance}] consume"#, RANGE_SLOTS);
        let err = parse_templates(&text).unwrap_err();
        assert!(matches!(&err, TemplateError::Invalid { id, .. } if id == "t"), "{err}");
        assert!(err.to_string().contains("reference"));
    }

    #[test]
    fn unknown_type_and_empty_file() {
        let text = raw("heatmap", RANGE_NL, RANGE_EXE, RANGE_SLOTS);
        assert!(matches!(parse_templates(&text), Err(TemplateError::UnknownQueryType { .. })));
        let (lib, warnings) = parse_templates("").unwrap();
        assert!(lib.is_empty());
        assert_eq!(warnings.len(), 1);
        let (lib, warnings) = parse_templates("[]").unwrap();
        assert!(lib.is_empty() && !warnings.is_empty());
    }

    #[test]
    fn exe_pattern_must_parse() {
        let text = raw("range", RANGE_NL, r#"query {entity_type} feed filter[distance(.geom, ref(\"{reference}\")) < {distance}]"#, RANGE_SLOTS);
        let err = parse_templates(&text).unwrap_err().to_string();
        assert!(err.contains("does not parse"), "{err}");
    }

    #[test]
    fn mandatory_slots() {
        let slots = r#"[{"name":"entity_type","kind":"table"},{"name":"reference","kind":"entity"}]"#;
        let nl = "Which {entity_type}s near {reference}?";
        let exe = r#"query {entity_type} feed filter[.geom intersects ref(\"{reference}\")] consume"#;
        assert!(parse_templates(&raw("range", nl, exe, slots)).is_err());
        let slots = r#"[{"name":"k","kind":"count"},{"name":"t","kind":"table"},{"name":"a","kind":"entity"}]"#;
        let exe = "query {t} feed distancescan[POINT (0 0), {k}] consume {a}";
        assert!(parse_templates(&raw("knn", "{k} {t} {a}", exe, slots)).is_err());
    }

    #[test]
    fn single_fact_range_binding() {
        // A cinema 800 m from a plaza; the threshold must lie strictly above
        // the measured distance for `<` to keep the cinema.
        let kb = kb(vec![fact(1, 3, Operator::DistanceScan, 800.0, GeomKind::Point, GeomKind::Region)], vec![]);
        let t = single(&raw("range", RANGE_NL, RANGE_EXE, RANGE_SLOTS));
        let bindings = match_candidates(&t, &kb);
        assert_eq!(bindings.len(), 1);
        let b = &bindings[0];
        assert!(matches!(&b.values["entity_type"], SlotValue::Table { name, .. } if name == "Kinos"));
        assert!(matches!(&b.values["reference"], SlotValue::Entity { name, .. } if name == "Alexanderplatz"));
        assert_eq!(b.values["distance"], SlotValue::Distance { meters: 801 });
        assert_eq!(b.provenance, vec!["er:Astor|Alexanderplatz|distancescan".to_string()]);
    }

    #[test]
    fn alexanderplatz_example() {
        let kb = kb(vec![fact(2, 3, Operator::DistanceScan, 1989.6, GeomKind::Point, GeomKind::Region)], vec![]);
        let t = single(&raw("range", RANGE_NL, RANGE_EXE, RANGE_SLOTS));
        let b = &match_candidates(&t, &kb)[0];
        assert_eq!(b.values["distance"], SlotValue::Distance { meters: 1990 });
        let mut b = b.clone();
        b.values.insert("distance".into(), SlotValue::Distance { meters: 2000 });
        let p = instantiate(&t, &b).unwrap();
        assert_eq!(p.nl, "Which cinemas are within 2.0 km of Alexanderplatz?");
        assert_eq!(p.exe, r#"query Kinos feed filter[distance(.geom, ref("Alexanderplatz")) < 2000] consume"#);
        assert_eq!(instantiate(&t, &b).unwrap(), p);
        p.check().unwrap();
    }

    #[test]
    fn distance_rendering() {
        assert_eq!(render_distance_nl(2000, DistanceUnit::Km), "2.0 km");
        assert_eq!(render_distance_nl(1250, DistanceUnit::Km), "1.2 km");
        assert_eq!(render_distance_nl(999, DistanceUnit::Km), "999 m");
        assert_eq!(render_distance_nl(2000, DistanceUnit::M), "2000 m");
        assert_eq!(threshold_above(800.0), 801);
        assert_eq!(threshold_above(799.3), 800);
    }

    #[test]
    fn containment_dispatch() {
        let lib = TemplateLibrary::default_library();
        let t = lib.get("range-containment").unwrap();
        let kb = kb(vec![fact(1, 3, Operator::Inside, 0.0, GeomKind::Point, GeomKind::Region)], vec![]);
        let b = &match_candidates(t, &kb)[0];
        let p = instantiate(t, b).unwrap();
        assert_eq!(p.exe, r#"query Kinos feed filter[.geom inside ref("Alexanderplatz")] consume"#);
        assert_eq!(p.nl, "Which cinemas are located inside Alexanderplatz?");
        // A zero-distance fact against a region only touches it.
        let kb2 = kb_with_touch();
        assert!(match_candidates(t, &kb2).is_empty());
    }

    fn kb_with_touch() -> KnowledgeBase {
        kb(vec![fact(1, 3, Operator::DistanceScan, 0.0, GeomKind::Point, GeomKind::Region)], vec![])
    }

    #[test]
    fn knn_needs_point_subjects() {
        let lib = TemplateLibrary::default_library();
        let t = lib.get("knn-nearest").unwrap();
        let regions_only = kb(vec![fact(3, 1, Operator::DistanceScan, 5.0, GeomKind::Region, GeomKind::Point)], vec![]);
        assert!(match_candidates(t, &regions_only).is_empty());
        let kb = kb(
            vec![
                fact(1, 3, Operator::DistanceScan, 0.0, GeomKind::Point, GeomKind::Region),
                fact(1, 4, Operator::DistanceScan, 5000.0, GeomKind::Point, GeomKind::Region),
                fact(1, 5, Operator::DistanceScan, 3000.0, GeomKind::Point, GeomKind::Region),
            ],
            vec![],
        );
        // The single plaza fact cannot form a ranking.
        let bindings = match_candidates(t, &kb);
        assert_eq!(bindings.len(), 1);
        let p = instantiate(t, &bindings[0]).unwrap();
        assert_eq!(p.exe, "query Parks feed distancescan[POINT (0 0), 2] consume");
        assert_eq!(p.nl, "What are the 2 nearest parks to Astor?");
        assert_eq!(p.provenance().len(), 2);
    }

    #[test]
    fn table_level_from_relations() {
        let lib = TemplateLibrary::default_library();
        let t = lib.get("distjoin-km").unwrap();
        assert!(match_candidates(t, &kb(vec![], vec![])).is_empty());
        let rr = RelationRelation {
            query_type: QueryType::DistanceJoin,
            relation1: "Kinos".into(),
            relation2: "Plazas".into(),
            relation1_type: GeomKind::Point,
            relation2_type: GeomKind::Region,
            distance: 1500.0,
            operator: Operator::DistanceScan,
            support: 3,
            score: 0.9,
        };
        let b = &match_candidates(t, &kb(vec![], vec![rr]))[0];
        let p = instantiate(t, b).unwrap();
        assert_eq!(p.nl, "Find all pairs of cinema and plaza less than 1.5 km apart.");
        assert_eq!(p.exe, "query Kinos feed symmjoin[distance(.geom, ..geom) < 1500] Plazas feed consume");
        assert_eq!(p.provenance(), ["rr:distance_join|Kinos|Plazas|distancescan".to_string()]);
    }

    #[test]
    fn missing_slot_is_an_error() {
        let t = single(&raw("range", RANGE_NL, RANGE_EXE, RANGE_SLOTS));
        let kb = kb(vec![fact(1, 3, Operator::DistanceScan, 800.0, GeomKind::Point, GeomKind::Region)], vec![]);
        let mut b = match_candidates(&t, &kb).remove(0);
        b.values.remove("reference");
        assert!(matches!(instantiate(&t, &b), Err(TemplateError::MissingSlot { slot, .. }) if slot == "reference"));
    }

    #[test]
    fn canaries_parse() {
        for t in TemplateLibrary::default_library().templates() {
            parse_query(&t.canary_query()).unwrap();
        }
    }
}
