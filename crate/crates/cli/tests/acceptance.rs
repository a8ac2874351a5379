//! Acceptance checks, one PASS/FAIL line each. Runs the real binary for the
//! pipeline criteria and the in-process oracles for the rest.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{gen, naive};
use rand::{Rng, RngCore};
use sscc_core::dataset::DatasetStats;
use sscc_core::extract::{extract_entity_relations, ExtractionConfig};
use sscc_core::geometry::{BoundingBox, Geometry};
use sscc_core::index::StrTree;
use sscc_core::kb::{load_kb, relation_key};
use sscc_core::quality::{filter_by_threshold, score_entity_relation, QualityConfig};
use sscc_core::query::parse_query;
use sscc_core::relation::{EntityRelation, Operator, QueryType};
use sscc_core::sampler::read_corpus;
use sscc_core::template::TemplateLibrary;

const MIN_RETAINED: usize = 10_000;
const MIN_THROUGHPUT: f64 = 65.5;
const MAX_BUILD_S: f64 = 210.0;
const VALIDITY_PAIRS: usize = 156;
const MIN_VALIDITY: f64 = 95.0;
const DEFAULT_CAP: usize = 5;

type Outcome = Result<String, String>;

fn sscc(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sscc"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("sscc {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn manifest(path: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Shared state: the large synthetic dataset and its KB.
struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
    data: PathBuf,
    kb: PathBuf,
    build: Result<serde_json::Value, String>,
}

impl Workspace {
    fn new() -> Self {
        let tmp = tempfile::tempdir().expect("temp dir");
        let root = tmp.path().to_path_buf();
        let data = root.join("large");
        let kb = root.join("kb");
        let build = sscc(&["synth", "-o", s(&data), "--points", "2321", "--lines", "8407", "--regions", "1942", "--tables", "18"])
            .and_then(|_| sscc(&["build-kb", s(&data), "-o", s(&kb)]))
            .and_then(|_| manifest(&root.join("kb.run.json")));
        Workspace {
            _tmp: tmp,
            root,
            data,
            kb,
            build,
        }
    }
}

fn throughput(ws: &Workspace) -> Outcome {
    let m = ws.build.clone()?;
    let retained = m["items"].as_u64().unwrap_or(0) as usize;
    let secs = m["wall_time_s"].as_f64().unwrap_or(f64::INFINITY);
    let rate = m["throughput"].as_f64().unwrap_or(0.0);
    let detail = format!("{retained} relations in {secs:.1}s ({rate:.1}/s)");
    ensure(retained >= MIN_RETAINED, || format!("only {detail}"))?;
    ensure(rate >= MIN_THROUGHPUT, || format!("too slow: {detail}"))?;
    ensure(secs < MAX_BUILD_S, || format!("over time: {detail}"))?;
    Ok(detail)
}

fn validity(ws: &Workspace) -> Outcome {
    ws.build.clone()?;
    let corpus = ws.root.join("validity.csv");
    sscc(&["generate", s(&ws.data), s(&ws.kb), "-n", &VALIDITY_PAIRS.to_string(), "-o", s(&corpus)])?;
    let started = Instant::now();
    sscc(&["validate", s(&ws.data), s(&corpus)])?;
    let report = fs::read_to_string(ws.root.join("validity.validation.csv")).map_err(|e| e.to_string())?;
    let verdicts: Vec<&str> = report.lines().skip(1).collect();
    let valid = verdicts.iter().filter(|l| l.split(',').nth(1) == Some("valid")).count();
    let pct = 100.0 * valid as f64 / verdicts.len().max(1) as f64;
    let detail = format!("{valid}/{} valid ({pct:.1}%) in {:.1}s", verdicts.len(), started.elapsed().as_secs_f64());
    ensure(verdicts.len() == VALIDITY_PAIRS, || format!("expected {VALIDITY_PAIRS} pairs: {detail}"))?;
    ensure(pct >= MIN_VALIDITY, || detail.clone())?;
    Ok(detail)
}

fn statistics(ws: &Workspace) -> Outcome {
    let cases = [("small", 24, [1898, 4356, 261], 6515), ("large", 18, [2321, 8407, 1942], 12670)];
    let mut seen = Vec::new();
    for (name, tables, [p, l, r], total) in cases {
        let dir = ws.root.join(format!("stats-{name}"));
        let out = ws.root.join(format!("stats-{name}.json"));
        let counts = [p, l, r].map(|c: usize| c.to_string());
        sscc(&["synth", "-o", s(&dir), "--points", &counts[0], "--lines", &counts[1], "--regions", &counts[2], "--tables", &tables.to_string()])?;
        sscc(&["stats", s(&dir), "-o", s(&out)])?;
        let got: DatasetStats = serde_json::from_str(&fs::read_to_string(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let want = DatasetStats {
            n_tables: tables,
            n_points: p,
            n_lines: l,
            n_regions: r,
            n_entities: total,
        };
        ensure(got == want, || format!("{name}: got {got:?}"))?;
        seen.push(format!("{name} {tables} tables {p}/{l}/{r} = {total}"));
    }
    Ok(seen.join("; "))
}

fn index_oracle() -> Outcome {
    const TRIALS: usize = 500;
    let mut rng = gen::rng(4);
    for trial in 0..TRIALS {
        let d = gen::dataset(&mut rng, 150, 1000.0);
        let entries = d.index_entries();
        let tree = StrTree::build(entries.clone(), rng.gen_range(2..12)).map_err(|e| e.to_string())?;
        let lookup = |id| &d.entity(id).unwrap().geometry;
        let (a, b) = (gen::point(&mut rng, 1000.0), gen::point(&mut rng, 1000.0));
        let window = BoundingBox::new(a.x, a.y, b.x, b.y);
        ensure(tree.query_bbox(&window) == naive::bbox_query(&entries, &window), || format!("query_bbox differs in trial {trial}"))?;
        let origin = gen::point(&mut rng, 1000.0);
        let k = rng.gen_range(1..=d.entity_count());
        let want: Vec<_> = naive::ranked(entries.iter().map(|e| e.item_id), &Geometry::Point(origin), lookup)
            .into_iter()
            .take(k)
            .collect();
        ensure(tree.nearest_k(origin, k, lookup) == want, || format!("nearest_k differs in trial {trial}"))?;
    }
    Ok(format!("{TRIALS} trials equal brute force"))
}

fn extraction_oracle() -> Outcome {
    const DATASETS: usize = 50;
    let mut rng = gen::rng(5);
    let mut facts = 0;
    for trial in 0..DATASETS {
        let d = gen::dataset(&mut rng, 200, 1000.0);
        let mut cfg = ExtractionConfig {
            radius_m: 300.0,
            k: 3,
            ..Default::default()
        };
        if trial % 4 == 0 {
            cfg.reference_tables = Some(vec![d.tables()[0].name.clone()]);
        }
        let tree = d.build_index(8).map_err(|e| e.to_string())?;
        let got = extract_entity_relations(&d, &tree, &cfg).map_err(|e| e.to_string())?;
        let want = naive::extract(&d, &cfg);
        let same = got.len() == want.len()
            && got.iter().zip(&want).all(|(g, w)| g.key() == w.key() && g.distance == w.distance);
        ensure(same, || format!("dataset {trial}: {} vs {} facts", got.len(), want.len()))?;
        facts += got.len();
    }
    Ok(format!("{DATASETS} datasets, {facts} facts equal exhaustive scan"))
}

fn quality_properties() -> Outcome {
    const CASES: usize = 1000;
    let mut rng = gen::rng(6);
    let ops = [Operator::Intersects, Operator::Inside, Operator::DistanceScan];
    let cfg = QualityConfig::default();
    let fact = |a: &Geometry, b: &Geometry, op, distance| EntityRelation {
        subject_id: 1,
        object_id: 2,
        operator: op,
        distance,
        subject_kind: a.kind(),
        object_kind: b.kind(),
        score: 0.0,
    };
    for case in 0..CASES {
        let (a, b) = (gen::geometry(&mut rng, 500.0), gen::geometry(&mut rng, 500.0));
        let geoms: HashMap<u64, Geometry> = [(1, a.clone()), (2, b.clone())].into();
        let op = ops[rng.gen_range(0..3)];
        let score = |d| score_entity_relation(&fact(&a, &b, op, d), &geoms, &cfg).map_err(|e| e.to_string());

        let s = score(naive::distance(&a, &b))?;
        ensure((0.0..=1.0).contains(&s), || format!("case {case}: score {s} out of range"))?;

        let (d1, d2) = (rng.gen_range(0.0..1e5), rng.gen_range(0.0..1e5));
        let (near, far) = (score(f64::min(d1, d2))?, score(f64::max(d1, d2))?);
        ensure(near >= far, || format!("case {case}: score rises with distance"))?;

        let items: Vec<EntityRelation> = (0..rng.gen_range(0..50))
            .map(|i| EntityRelation {
                subject_id: i,
                score: rng.gen_range(0.0..=1.0),
                ..fact(&a, &b, ops[i as usize % 3], 0.0)
            })
            .collect();
        let (t1, t2) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
        let at = |threshold| QualityConfig { threshold, ..cfg.clone() };
        let (lo, hi) = (at(f64::min(t1, t2)), at(f64::max(t1, t2)));
        let (kept, _) = filter_by_threshold(items.clone(), &lo);
        let (again, _) = filter_by_threshold(kept.clone(), &lo);
        ensure(again == kept, || format!("case {case}: filter not idempotent"))?;
        let (strict, _) = filter_by_threshold(items, &hi);
        ensure(strict.iter().all(|r| kept.contains(r)), || format!("case {case}: filter not monotone"))?;
    }
    Ok(format!("{CASES} cases each: range, distance monotonicity, filter idempotence/monotonicity"))
}

fn corpus_invariants(ws: &Workspace) -> Outcome {
    ws.build.clone()?;
    let (a, b) = (ws.root.join("default-a.csv"), ws.root.join("default-b.csv"));
    sscc(&["generate", s(&ws.data), s(&ws.kb), "-o", s(&a)])?;
    sscc(&["generate", s(&ws.data), s(&ws.kb), "-o", s(&b)])?;
    let bytes = |p: &Path| fs::read(p).map_err(|e| e.to_string());
    ensure(bytes(&a)? == bytes(&b)?, || "seeded reruns differ".into())?;

    let rows = read_corpus(&a).map_err(|e| e.to_string())?;
    ensure(rows.len() == 100, || format!("{} pairs, expected 100", rows.len()))?;

    let mut per_type: BTreeMap<&str, usize> = QueryType::ALL.iter().map(|q| (q.as_str(), 0)).collect();
    for r in &rows {
        *per_type.entry(&r.query_type).or_default() += 1;
    }
    let gap = per_type.values().max().unwrap() - per_type.values().min().unwrap();
    ensure(gap <= 1, || format!("type balance gap {gap}: {per_type:?}"))?;

    let placeholder = regex::Regex::new(r"\{[A-Za-z_]+\}").unwrap();
    let dangling = rows.iter().filter(|r| placeholder.is_match(&r.nl) || placeholder.is_match(&r.exe)).count();
    ensure(dangling == 0, || format!("{dangling} pairs with placeholders"))?;

    let kb = load_kb(&ws.kb).map_err(|e| e.to_string())?;
    let keys: HashSet<String> = kb
        .entity_relations
        .iter()
        .map(|r| kb.entity_key(r))
        .chain(kb.relation_relations.iter().map(relation_key))
        .collect();
    let mut uses: HashMap<&str, usize> = HashMap::new();
    for r in &rows {
        let prov = r.provenance_keys();
        ensure(!prov.is_empty(), || format!("pair {} has no provenance", r.id))?;
        if let Some(k) = prov.iter().find(|k| !keys.contains(**k)) {
            return Err(format!("pair {} provenance {k:?} not in the KB", r.id));
        }
        let names: HashSet<&str> = prov
            .iter()
            .filter_map(|k| k.strip_prefix("er:"))
            .flat_map(|k| k.split('|').take(2))
            .collect();
        for n in names {
            *uses.entry(n).or_default() += 1;
        }
    }
    let max_use = uses.values().copied().max().unwrap_or(0);
    ensure(max_use <= DEFAULT_CAP, || format!("an entity appears in {max_use} pairs"))?;
    Ok(format!("{per_type:?}, gap {gap}, max entity use {max_use}, reruns identical"))
}

fn parser_robustness() -> Outcome {
    const INPUTS: usize = 10_000;
    let mut rng = gen::rng(8);
    // Odd inputs are token soup so that some of them parse.
    let words = [
        "query", "Kinos", "Parks", "feed", "filter[", "head[", "distancescan[", "symmjoin[", "]", "consume", "count", "(",
        ")", ",", ".geom", "..geom", "intersects", "inside", "distance(.geom,", "ref(\"x\")", "POINT (1 2)", "<", "3",
        "-0.5e2", ".attr(\"k\")", "=", "\"v\"",
    ];
    let mut parsed = 0;
    for i in 0..INPUTS {
        let text = if i % 2 == 0 {
            let mut bytes = vec![0u8; rng.gen_range(0..120)];
            rng.fill_bytes(&mut bytes);
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            let n = rng.gen_range(1..16);
            let mut t: Vec<&str> = vec!["query", "Kinos", "feed"];
            t.extend((0..n).map(|_| words[rng.gen_range(0..words.len())]));
            t.join(" ")
        };
        let result = catch_unwind(|| parse_query(&text)).map_err(|_| format!("parser panicked on {text:?}"))?;
        if let Ok(q) = result {
            parsed += 1;
            ensure(parse_query(&q.to_string()).as_ref() == Ok(&q), || format!("{text:?} is not a fixed point"))?;
        }
    }
    let lib = TemplateLibrary::default_library();
    for t in lib.templates() {
        let q = parse_query(&t.canary_query()).map_err(|e| format!("{}: {e}", t.id))?;
        ensure(parse_query(&q.to_string()).as_ref() == Ok(&q), || format!("{} canary is not a fixed point", t.id))?;
    }
    Ok(format!("{INPUTS} inputs without a crash ({parsed} parsed); {} canaries are fixed points", lib.len()))
}

fn main() -> ExitCode {
    let ws = Workspace::new();
    let criteria: [(&str, &dyn Fn() -> Outcome); 8] = [
        ("build throughput", &|| throughput(&ws)),
        ("query validity", &|| validity(&ws)),
        ("dataset statistics", &|| statistics(&ws)),
        ("index oracle", &index_oracle),
        ("extraction oracle", &extraction_oracle),
        ("quality properties", &quality_properties),
        ("corpus invariants", &|| corpus_invariants(&ws)),
        ("parser robustness", &parser_robustness),
    ];
    // Panics are reported as failures; silence the default hook's output.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
