//! Relation records shared by extraction, scoring and the knowledge base.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::EntityId;
use crate::geometry::GeomKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Intersects,
    Inside,
    #[serde(rename = "distancescan")]
    DistanceScan,
    #[serde(rename = "symmjoin")]
    SymmJoin,
}

impl Operator {
    pub const ALL: [Operator; 4] = [
        Operator::Intersects,
        Operator::Inside,
        Operator::DistanceScan,
        Operator::SymmJoin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Intersects => "intersects",
            Operator::Inside => "inside",
            Operator::DistanceScan => "distancescan",
            Operator::SymmJoin => "symmjoin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    Range,
    Knn,
    SpatialJoin,
    DistanceJoin,
    Aggregation,
}

impl QueryType {
    pub const ALL: [QueryType; 5] = [
        QueryType::Range,
        QueryType::Knn,
        QueryType::SpatialJoin,
        QueryType::DistanceJoin,
        QueryType::Aggregation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::Range => "range",
            QueryType::Knn => "knn",
            QueryType::SpatialJoin => "spatial_join",
            QueryType::DistanceJoin => "distance_join",
            QueryType::Aggregation => "aggregation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.as_str() == s)
    }

    /// Whether the type is answered from relation–relation records.
    pub fn is_table_level(self) -> bool {
        !matches!(self, QueryType::Range | QueryType::Knn)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fact between one subject entity and one reference object.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityRelation {
    pub subject_id: EntityId,
    pub object_id: EntityId,
    pub operator: Operator,
    pub distance: f64,
    pub subject_kind: GeomKind,
    pub object_kind: GeomKind,
    /// Zero until scored.
    pub score: f64,
}

impl EntityRelation {
    pub fn key(&self) -> (EntityId, EntityId, Operator) {
        (self.subject_id, self.object_id, self.operator)
    }
}

/// A table-level fact supported by witnessing entity pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationRelation {
    pub query_type: QueryType,
    pub relation1: String,
    pub relation2: String,
    pub relation1_type: GeomKind,
    pub relation2_type: GeomKind,
    pub distance: f64,
    pub operator: Operator,
    pub support: u64,
    pub score: f64,
}

impl RelationRelation {
    pub fn key(&self) -> (QueryType, &str, &str, Operator) {
        (self.query_type, &self.relation1, &self.relation2, self.operator)
    }
}
