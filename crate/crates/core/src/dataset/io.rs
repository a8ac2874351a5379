//! Dataset directory format: `manifest.json` plus one CSV per table with
//! header `id,name,wkt[,attr:*...]`.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Entity, EntityId, Table};
use crate::fsutil::write_atomic;
use crate::geometry::wkt::{parse_raw, to_wkt};
use crate::geometry::GeomKind;

const MANIFEST: &str = "manifest.json";
const ATTR_PREFIX: &str = "attr:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    name: String,
    #[serde(default)]
    crs_note: String,
    tables: Vec<ManifestTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestTable {
    name: String,
    file: String,
    kind: GeomKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// A per-row note produced while loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowDiagnostic {
    pub table: String,
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} line {}: {}", self.table, self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows that were repaired and kept.
    pub warnings: Vec<RowDiagnostic>,
    /// Rows that were dropped.
    pub rejects: Vec<RowDiagnostic>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> DatasetError + '_ {
    move |source| DatasetError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<LoadReport, DatasetError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(DatasetError::ManifestNotFound(manifest_path));
    }
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| DatasetError::Manifest {
        path: manifest_path.clone(),
        source,
    })?;

    let mut warnings = Vec::new();
    let mut rejects = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut tables = Vec::with_capacity(manifest.tables.len());
    for mt in &manifest.tables {
        let path = dir.join(&mt.file);
        let mut table = Table {
            name: mt.name.clone(),
            kind: mt.kind,
            label: mt.label.clone(),
            entities: Vec::new(),
        };
        load_table(&path, &mut table, &mut seen_ids, &mut warnings, &mut rejects)?;
        tables.push(table);
    }
    let dataset = Dataset::new(manifest.name, manifest.crs_note, tables)?;
    if dataset.entity_count() == 0 {
        return Err(DatasetError::Empty);
    }
    Ok(LoadReport {
        dataset,
        warnings,
        rejects,
    })
}

fn load_table(
    path: &Path,
    table: &mut Table,
    seen_ids: &mut HashSet<EntityId>,
    warnings: &mut Vec<RowDiagnostic>,
    rejects: &mut Vec<RowDiagnostic>,
) -> Result<(), DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?.clone();
    let fixed = ["id", "name", "wkt"];
    for (i, want) in fixed.iter().enumerate() {
        if header.get(i) != Some(*want) {
            return Err(DatasetError::Header {
                path: path.to_path_buf(),
                message: format!("column {} must be {want:?}, found {:?}", i + 1, header.get(i)),
            });
        }
    }
    let mut attr_columns = Vec::new();
    for (i, col) in header.iter().enumerate().skip(fixed.len()) {
        match col.strip_prefix(ATTR_PREFIX) {
            Some(key) if !key.is_empty() => attr_columns.push((i, key.to_string())),
            _ => {
                return Err(DatasetError::Header {
                    path: path.to_path_buf(),
                    message: format!("unexpected column {col:?}; extra columns must start with {ATTR_PREFIX:?}"),
                })
            }
        }
    }

    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map_or(0, |p| p.line());
        let diag = |message: String| RowDiagnostic {
            table: table.name.clone(),
            line,
            message,
        };
        if record.len() != header.len() {
            rejects.push(diag(format!(
                "expected {} fields, found {}",
                header.len(),
                record.len()
            )));
            continue;
        }
        let id: EntityId = match record[0].trim().parse() {
            Ok(id) => id,
            Err(_) => {
                rejects.push(diag(format!("invalid id {:?}", &record[0])));
                continue;
            }
        };
        let name = record[1].to_string();
        if name.trim().is_empty() {
            rejects.push(diag("empty name".into()));
            continue;
        }
        let mut raw = match parse_raw(&record[2]) {
            Ok(raw) => raw,
            Err(e) => {
                rejects.push(diag(format!("parse error: {e}")));
                continue;
            }
        };
        let repairs = raw.repair();
        let geometry = match raw.into_geometry() {
            Ok(g) => g,
            Err(e) => {
                rejects.push(diag(format!("invalid geometry: {e}")));
                continue;
            }
        };
        if geometry.kind() != table.kind {
            rejects.push(diag(format!(
                "geometry is a {} but table holds {}s",
                geometry.kind(),
                table.kind
            )));
            continue;
        }
        if !seen_ids.insert(id) {
            rejects.push(diag(format!("duplicate id {id}")));
            continue;
        }
        for r in repairs {
            warnings.push(diag(format!("repaired: {r}")));
        }
        let attributes = attr_columns
            .iter()
            .filter(|(i, _)| !record[*i].is_empty())
            .map(|(i, k)| (k.clone(), record[*i].to_string()))
            .collect();
        table.entities.push(Entity {
            id,
            name,
            table: table.name.clone(),
            geometry,
            attributes,
        });
    }
    Ok(())
}

fn table_file_name(name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{safe}.csv")
}

/// Writes the dataset directory; returns the files written.
pub fn save_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut manifest = Manifest {
        name: d.name.clone(),
        crs_note: d.crs_note.clone(),
        tables: Vec::new(),
    };
    let mut used_files = HashSet::new();
    for table in d.tables() {
        let mut file = table_file_name(&table.name);
        let mut n = 2;
        while !used_files.insert(file.clone()) {
            file = format!("{}_{n}.csv", file.trim_end_matches(".csv"));
            n += 1;
        }
        let path = dir.join(&file);
        let attr_keys: BTreeSet<&str> = table
            .entities
            .iter()
            .flat_map(|e| e.attributes.keys().map(String::as_str))
            .collect();
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::NonNumeric)
            .from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "name".into(), "wkt".into()];
        header.extend(attr_keys.iter().map(|k| format!("{ATTR_PREFIX}{k}")));
        w.write_record(&header).map_err(csv_err(&path))?;
        for e in &table.entities {
            let mut row = vec![e.id.to_string(), e.name.clone(), to_wkt(&e.geometry)];
            row.extend(
                attr_keys
                    .iter()
                    .map(|k| e.attributes.get(*k).cloned().unwrap_or_default()),
            );
            w.write_record(&row).map_err(csv_err(&path))?;
        }
        let bytes = w.into_inner().map_err(|e| DatasetError::Io {
            path: path.clone(),
            source: e.into_error(),
        })?;
        write_atomic(&path, &bytes).map_err(io_err(&path))?;
        written.push(path);
        manifest.tables.push(ManifestTable {
            name: table.name.clone(),
            file,
            kind: table.kind,
            label: table.label.clone(),
        });
    }
    let path = dir.join(MANIFEST);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}
