//! Knowledge-base construction: index, extract, score, filter, aggregate.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::extract::{extract_entity_relations, extract_relation_relations, ExtractError, ExtractionConfig};
use crate::index::{IndexError, DEFAULT_NODE_CAPACITY};
use crate::kb::{BuildCounts, KnowledgeBase};
use crate::quality::{
    filter_by_threshold, score_entity_relation, score_relation_relation, FilterReport, QualityConfig, QualityError,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Quality(#[from] QualityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub entity_filter: FilterReport,
    pub relation_filter: FilterReport,
    pub retained: usize,
    pub elapsed_s: f64,
    /// Retained relations per second of build time.
    pub throughput: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub extraction: ExtractionConfig,
    pub quality: QualityConfig,
    pub node_capacity: usize,
    pub timestamp: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            extraction: ExtractionConfig::default(),
            quality: QualityConfig::default(),
            node_capacity: DEFAULT_NODE_CAPACITY,
            timestamp: 0,
        }
    }
}

pub fn throughput(items: usize, elapsed: Duration) -> f64 {
    let secs = elapsed.as_secs_f64();
    if secs > 0.0 {
        items as f64 / secs
    } else {
        0.0
    }
}

pub fn build_kb(d: &Dataset, opts: &BuildOptions) -> Result<(KnowledgeBase, BuildReport), BuildError> {
    let start = Instant::now();
    if d.entity_count() == 0 {
        return Err(DatasetError::Empty.into());
    }
    opts.extraction.validate()?;
    opts.quality.validate()?;
    let tree = d.build_index(opts.node_capacity)?;

    let mut facts = extract_entity_relations(d, &tree, &opts.extraction)?;
    let candidate_entity_relations = facts.len();
    facts
        .par_iter_mut()
        .try_for_each(|f| -> Result<(), QualityError> {
            f.score = score_entity_relation(f, d, &opts.quality)?;
            Ok(())
        })?;
    let (facts, entity_filter) = filter_by_threshold(facts, &opts.quality);

    let mut groups = extract_relation_relations(d, &facts, &opts.extraction);
    let candidate_relation_relations = groups.len();
    for g in &mut groups {
        g.relation.score = score_relation_relation(&g.relation, &g.witnesses, &opts.quality)?;
    }
    let (groups, relation_filter) = filter_by_threshold(groups, &opts.quality);

    let counts = BuildCounts {
        candidate_entity_relations,
        candidate_relation_relations,
        ..Default::default()
    };
    let kb = KnowledgeBase::build(
        d,
        facts,
        groups.into_iter().map(|g| g.relation).collect(),
        opts.extraction.clone(),
        opts.quality.clone(),
        counts,
        opts.timestamp,
    );
    let elapsed = start.elapsed();
    let retained = kb.entity_relations.len() + kb.relation_relations.len();
    let report = BuildReport {
        entity_filter,
        relation_filter,
        retained,
        elapsed_s: elapsed.as_secs_f64(),
        throughput: throughput(retained, elapsed),
    };
    Ok((kb, report))
}
