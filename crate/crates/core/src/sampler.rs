//! Corpus assembly: per-type quotas, geometry-combination round robin and an
//! entity repetition cap.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::geometry::GeomKind;
use crate::kb::KnowledgeBase;
use crate::relation::QueryType;
use crate::template::{instantiate, match_candidates, Binding, QueryPair, TemplateLibrary};

pub const CORPUS_COLUMNS: [&str; 6] = ["id", "query_type", "template_id", "nl", "exe", "provenance"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_pairs: usize,
    pub entity_cap: usize,
    pub seed: u64,
    /// Missing types weigh 1.
    pub type_weights: BTreeMap<QueryType, f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_pairs: 100,
            entity_cap: 5,
            seed: 42,
            type_weights: BTreeMap::new(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: String| Err(SampleError::Config(m));
        if self.n_pairs == 0 {
            return bad("n_pairs must be at least 1".into());
        }
        if self.entity_cap == 0 {
            return bad("entity_cap must be at least 1".into());
        }
        for (qt, w) in &self.type_weights {
            if !(w.is_finite() && *w > 0.0) {
                return bad(format!("weight of {qt} must be positive, got {w}"));
            }
        }
        Ok(())
    }

    fn weight(&self, qt: QueryType) -> f64 {
        self.type_weights.get(&qt).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("nothing to generate: {0}")]
    NothingToGenerate(String),
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error(transparent)]
    Template(#[from] crate::template::TemplateError),
    #[error("generated pair violates template invariants: {0}")]
    Invariant(String),
    #[error("cannot write corpus {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed corpus: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TypeReport {
    pub candidates: usize,
    pub quota: usize,
    pub generated: usize,
    /// Candidates skipped because an entity had reached the cap.
    pub capped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerationReport {
    pub requested: usize,
    pub generated: usize,
    pub per_type: BTreeMap<QueryType, TypeReport>,
    /// Entities that reached the repetition cap.
    pub entities_capped: usize,
    pub shortfall: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPair {
    pub id: usize,
    pub pair: QueryPair,
}

type Candidate = (usize, Binding);

/// Candidates of one query type, bucketed by geometry combination.
struct TypePool {
    buckets: Vec<VecDeque<Candidate>>,
    cursor: usize,
}

impl TypePool {
    fn is_exhausted(&self) -> bool {
        self.buckets.iter().all(VecDeque::is_empty)
    }

    /// Next candidate in combination round-robin order whose entities are
    /// all under the cap.
    fn next(&mut self, uses: &HashMap<String, usize>, cap: usize, capped: &mut usize) -> Option<Candidate> {
        while !self.is_exhausted() {
            let n = self.buckets.len();
            let bucket = &mut self.buckets[self.cursor % n];
            self.cursor = (self.cursor + 1) % n;
            let Some(c) = bucket.pop_front() else {
                continue;
            };
            if c.1.entities.iter().any(|e| uses.get(e).copied().unwrap_or(0) >= cap) {
                *capped += 1;
                // Leave the cursor on the next combination; try again.
                continue;
            }
            return Some(c);
        }
        None
    }
}

/// Integer quotas proportional to `weights`, remainders handed out
/// round-robin in type order.
pub fn quotas(n: usize, weights: &[(QueryType, f64)]) -> BTreeMap<QueryType, usize> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut out: BTreeMap<QueryType, usize> = weights
        .iter()
        .map(|(qt, w)| (*qt, (n as f64 * w / total).floor() as usize))
        .collect();
    let mut rest = n - out.values().sum::<usize>();
    let mut i = 0;
    while rest > 0 && !weights.is_empty() {
        *out.get_mut(&weights[i % weights.len()].0).expect("present") += 1;
        rest -= 1;
        i += 1;
    }
    out
}

fn unique_entities(b: &Binding) -> Vec<String> {
    let mut e = b.entities.clone();
    e.sort();
    e.dedup();
    e
}

/// Samples a balanced, entity-capped corpus. Deterministic for a given
/// (kb, library, config).
pub fn generate_corpus(
    kb: &KnowledgeBase,
    lib: &TemplateLibrary,
    cfg: &SamplerConfig,
) -> Result<(Vec<CorpusPair>, GenerationReport), SampleError> {
    cfg.validate()?;
    if lib.is_empty() {
        return Err(SampleError::NothingToGenerate("template library is empty".into()));
    }
    if kb.is_empty() {
        return Err(SampleError::NothingToGenerate("knowledge base is empty".into()));
    }
    let matched: Vec<Vec<Binding>> = lib.templates().par_iter().map(|t| match_candidates(t, kb)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GenerationReport {
        requested: cfg.n_pairs,
        ..Default::default()
    };
    let mut pools: BTreeMap<QueryType, TypePool> = BTreeMap::new();
    for qt in QueryType::ALL {
        let mut by_combo: BTreeMap<(GeomKind, GeomKind), Vec<Candidate>> = BTreeMap::new();
        for (i, t) in lib.templates().iter().enumerate() {
            if t.query_type != qt {
                continue;
            }
            for b in &matched[i] {
                let mut b = b.clone();
                b.entities = unique_entities(&b);
                by_combo.entry(b.combo).or_default().push((i, b));
            }
        }
        let candidates: usize = by_combo.values().map(Vec::len).sum();
        if candidates == 0 {
            if lib.covered_types().contains(&qt) {
                report.shortfall.push(format!("{qt}: no knowledge-base row matches any template"));
            }
            continue;
        }
        let buckets = by_combo
            .into_values()
            .map(|mut v| {
                v.shuffle(&mut rng);
                VecDeque::from(v)
            })
            .collect();
        report.per_type.insert(
            qt,
            TypeReport {
                candidates,
                ..Default::default()
            },
        );
        pools.insert(qt, TypePool { buckets, cursor: 0 });
    }
    if pools.is_empty() {
        return Err(SampleError::NothingToGenerate("no template matches the knowledge base".into()));
    }

    let weights: Vec<(QueryType, f64)> = pools.keys().map(|qt| (*qt, cfg.weight(*qt))).collect();
    let mut remaining = quotas(cfg.n_pairs, &weights);
    for (qt, q) in &remaining {
        report.per_type.get_mut(qt).expect("pooled").quota = *q;
    }

    let mut uses: HashMap<String, usize> = HashMap::new();
    let mut picked: Vec<(QueryType, Candidate)> = Vec::new();
    let mut dry: Vec<QueryType> = Vec::new();
    loop {
        // One round: every type with quota left contributes one pair.
        let mut progressed = false;
        for (qt, pool) in pools.iter_mut() {
            let left = remaining.get_mut(qt).expect("pooled");
            if *left == 0 {
                continue;
            }
            let tr = report.per_type.get_mut(qt).expect("pooled");
            match pool.next(&uses, cfg.entity_cap, &mut tr.capped) {
                Some(c) => {
                    for e in &c.1.entities {
                        *uses.entry(e.clone()).or_default() += 1;
                    }
                    *left -= 1;
                    tr.generated += 1;
                    picked.push((*qt, c));
                    progressed = true;
                }
                None => {
                    dry.push(*qt);
                }
            }
        }
        // Quota of exhausted types moves to types that can still produce.
        let orphaned: usize = dry.iter().map(|qt| std::mem::take(remaining.get_mut(qt).expect("pooled"))).sum();
        let live: Vec<QueryType> = pools
            .iter()
            .filter(|(qt, p)| !dry.contains(qt) && !p.is_exhausted())
            .map(|(qt, _)| *qt)
            .collect();
        if orphaned > 0 && !live.is_empty() {
            let live_weights: Vec<(QueryType, f64)> = live.iter().map(|qt| (*qt, cfg.weight(*qt))).collect();
            for (qt, extra) in quotas(orphaned, &live_weights) {
                *remaining.get_mut(&qt).expect("pooled") += extra;
            }
            progressed = true;
        }
        if !progressed || remaining.values().all(|r| *r == 0) {
            break;
        }
    }

    for (qt, tr) in &report.per_type {
        if tr.generated < tr.quota {
            let why = if tr.capped > 0 {
                format!("{} candidates blocked by the entity cap", tr.capped)
            } else {
                "candidates exhausted".into()
            };
            report.shortfall.push(format!(
                "{qt}: quota {}, generated {} of {} candidates ({why})",
                tr.quota, tr.generated, tr.candidates
            ));
        }
    }
    let generated = picked.len();
    if generated < cfg.n_pairs {
        report.shortfall.push(format!("requested {} pairs, generated {generated}", cfg.n_pairs));
    }
    report.generated = generated;
    report.entities_capped = uses.values().filter(|n| **n >= cfg.entity_cap).count();

    let mut corpus = Vec::with_capacity(generated);
    for (i, (_, (t_idx, b))) in picked.into_iter().enumerate() {
        let pair = instantiate(&lib.templates()[t_idx], &b)?;
        pair.check().map_err(SampleError::Invariant)?;
        corpus.push(CorpusPair { id: i + 1, pair });
    }
    Ok((corpus, report))
}

/// One row of a corpus CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub id: usize,
    pub query_type: String,
    pub template_id: String,
    pub nl: String,
    pub exe: String,
    /// KB row keys joined by `;`.
    pub provenance: String,
}

impl CorpusRow {
    pub fn provenance_keys(&self) -> Vec<&str> {
        self.provenance.split(';').filter(|k| !k.is_empty()).collect()
    }
}

impl From<&CorpusPair> for CorpusRow {
    fn from(c: &CorpusPair) -> Self {
        CorpusRow {
            id: c.id,
            query_type: c.pair.query_type.to_string(),
            template_id: c.pair.template_id.clone(),
            nl: c.pair.nl.clone(),
            exe: c.pair.exe.clone(),
            provenance: c.pair.provenance().join(";"),
        }
    }
}

pub fn corpus_csv(pairs: &[CorpusPair]) -> Vec<u8> {
    // The header is written explicitly so an empty corpus still has one.
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CORPUS_COLUMNS).expect("in-memory write");
    for p in pairs {
        w.serialize(CorpusRow::from(p)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_corpus(path: impl AsRef<Path>, pairs: &[CorpusPair]) -> Result<(), SampleError> {
    let path = path.as_ref();
    write_atomic(path, &corpus_csv(pairs)).map_err(|source| SampleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRow>, SampleError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CORPUS_COLUMNS {
        return Err(SampleError::Invariant(format!(
            "corpus header must be {}, found {}",
            CORPUS_COLUMNS.join(","),
            header.join(",")
        )));
    }
    r.deserialize().collect::<Result<Vec<CorpusRow>, _>>().map_err(Into::into)
}
