//! Spatial dataset tables and their statistics.

mod io;
mod synth;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeomKind, Geometry};
use crate::index::{IndexEntry, IndexError, StrTree};

pub use io::{load_dataset, save_dataset, LoadReport, RowDiagnostic};
pub use synth::{default_extent, synthesize_dataset, SynthConfig};

pub type EntityId = u64;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset manifest not found: {0}")]
    ManifestNotFound(PathBuf),
    #[error("invalid manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: bad header: {message}")]
    Header { path: PathBuf, message: String },
    #[error("dataset contains no entities")]
    Empty,
    #[error("duplicate table name {0:?}")]
    DuplicateTable(String),
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("entity {id} has empty name")]
    EmptyName { id: EntityId },
    #[error("entity {id} claims table {claimed:?} but is stored in {actual:?}")]
    TableMismatch {
        id: EntityId,
        claimed: String,
        actual: String,
    },
    #[error("entity {id} is a {found} but table {table:?} holds {expected}s")]
    KindMismatch {
        id: EntityId,
        table: String,
        expected: GeomKind,
        found: GeomKind,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub table: String,
    pub geometry: Geometry,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub kind: GeomKind,
    /// Human-readable singular noun used in natural-language output.
    pub label: Option<String>,
    pub entities: Vec<Entity>,
}

impl Table {
    pub fn new(name: impl Into<String>, kind: GeomKind) -> Self {
        Table {
            name: name.into(),
            kind,
            label: None,
            entities: Vec::new(),
        }
    }

    pub fn display_label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// Resolves entity ids to geometries.
pub trait GeometryLookup {
    fn geometry(&self, id: EntityId) -> Option<&Geometry>;
}

impl GeometryLookup for HashMap<EntityId, Geometry> {
    fn geometry(&self, id: EntityId) -> Option<&Geometry> {
        self.get(&id)
    }
}

impl GeometryLookup for BTreeMap<EntityId, Geometry> {
    fn geometry(&self, id: EntityId) -> Option<&Geometry> {
        self.get(&id)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub crs_note: String,
    tables: Vec<Table>,
    by_id: HashMap<EntityId, (usize, usize)>,
    by_name: HashMap<String, Vec<EntityId>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.crs_note == other.crs_note && self.tables == other.tables
    }
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        crs_note: impl Into<String>,
        tables: Vec<Table>,
    ) -> Result<Self, DatasetError> {
        let mut by_id = HashMap::new();
        let mut by_name: HashMap<String, Vec<EntityId>> = HashMap::new();
        let mut seen_tables = std::collections::HashSet::new();
        for (t, table) in tables.iter().enumerate() {
            if !seen_tables.insert(table.name.as_str()) {
                return Err(DatasetError::DuplicateTable(table.name.clone()));
            }
            for (i, e) in table.entities.iter().enumerate() {
                if e.table != table.name {
                    return Err(DatasetError::TableMismatch {
                        id: e.id,
                        claimed: e.table.clone(),
                        actual: table.name.clone(),
                    });
                }
                if e.geometry.kind() != table.kind {
                    return Err(DatasetError::KindMismatch {
                        id: e.id,
                        table: table.name.clone(),
                        expected: table.kind,
                        found: e.geometry.kind(),
                    });
                }
                if e.name.trim().is_empty() {
                    return Err(DatasetError::EmptyName { id: e.id });
                }
                if by_id.insert(e.id, (t, i)).is_some() {
                    return Err(DatasetError::DuplicateId(e.id));
                }
                by_name.entry(e.name.clone()).or_default().push(e.id);
            }
        }
        for ids in by_name.values_mut() {
            ids.sort_unstable();
        }
        Ok(Dataset {
            name: name.into(),
            crs_note: crs_note.into(),
            tables,
            by_id,
            by_name,
        })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.by_id.get(&id).map(|&(t, i)| &self.tables[t].entities[i])
    }

    /// Position in `tables()` of the table holding `id`.
    pub fn table_index_of(&self, id: EntityId) -> Option<usize> {
        self.by_id.get(&id).map(|&(t, _)| t)
    }

    /// Ids of entities carrying `name`, ascending.
    pub fn ids_named(&self, name: &str) -> &[EntityId] {
        self.by_name.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.tables.iter().flat_map(|t| t.entities.iter())
    }

    pub fn entity_count(&self) -> usize {
        self.by_id.len()
    }

    pub fn index_entries(&self) -> Vec<IndexEntry> {
        self.entities()
            .map(|e| IndexEntry {
                item_id: e.id,
                bbox: e.geometry.bbox(),
            })
            .collect()
    }

    pub fn build_index(&self, node_capacity: usize) -> Result<StrTree, IndexError> {
        StrTree::build(self.index_entries(), node_capacity)
    }

    pub fn stats(&self) -> DatasetStats {
        dataset_stats(self)
    }
}

impl GeometryLookup for Dataset {
    fn geometry(&self, id: EntityId) -> Option<&Geometry> {
        self.entity(id).map(|e| &e.geometry)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_tables: usize,
    pub n_points: usize,
    pub n_lines: usize,
    pub n_regions: usize,
    pub n_entities: usize,
}

impl std::ops::Add for DatasetStats {
    type Output = DatasetStats;

    fn add(self, o: DatasetStats) -> DatasetStats {
        DatasetStats {
            n_tables: self.n_tables + o.n_tables,
            n_points: self.n_points + o.n_points,
            n_lines: self.n_lines + o.n_lines,
            n_regions: self.n_regions + o.n_regions,
            n_entities: self.n_entities + o.n_entities,
        }
    }
}

pub fn table_stats(table: &Table) -> DatasetStats {
    let n = table.entities.len();
    let mut s = DatasetStats {
        n_tables: 1,
        n_entities: n,
        ..Default::default()
    };
    match table.kind {
        GeomKind::Point => s.n_points = n,
        GeomKind::Line => s.n_lines = n,
        GeomKind::Region => s.n_regions = n,
    }
    s
}

pub fn dataset_stats(d: &Dataset) -> DatasetStats {
    d.tables.iter().map(table_stats).fold(DatasetStats::default(), |a, b| a + b)
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>8}", "tables", self.n_tables)?;
        writeln!(f, "{:<10} {:>8}", "points", self.n_points)?;
        writeln!(f, "{:<10} {:>8}", "lines", self.n_lines)?;
        writeln!(f, "{:<10} {:>8}", "regions", self.n_regions)?;
        write!(f, "{:<10} {:>8}", "entities", self.n_entities)
    }
}
