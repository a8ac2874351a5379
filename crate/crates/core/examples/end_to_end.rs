//! Synthesizes a dataset, builds its knowledge base, samples a corpus and
//! validates every pair against the dataset.
//!
//! cargo run --release -p sscc-core --example end_to_end -- [points lines regions tables pairs]

use std::time::Instant;

use sscc_core::dataset::{synthesize_dataset, SynthConfig};
use sscc_core::pipeline::{build_kb, BuildOptions};
use sscc_core::query::{validate_pair, DEFAULT_ROW_CAP};
use sscc_core::sampler::{generate_corpus, SamplerConfig};
use sscc_core::template::TemplateLibrary;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, default: usize| args.get(i).copied().unwrap_or(default);
    let cfg = SynthConfig::new(42, arg(0, 1898), arg(1, 4356), arg(2, 261)).with_tables(arg(3, 24));
    let d = synthesize_dataset(&cfg);
    println!("dataset: {} entities in {} tables", d.entity_count(), d.tables().len());

    let (kb, report) = build_kb(&d, &BuildOptions::default()).expect("build");
    println!(
        "kb: {} entity facts, {} relation records in {:.1}s ({:.0} relations/s)",
        kb.entity_relations.len(),
        kb.relation_relations.len(),
        report.elapsed_s,
        report.throughput
    );

    let sampler = SamplerConfig {
        n_pairs: arg(4, 156),
        ..Default::default()
    };
    let (corpus, gen) = generate_corpus(&kb, &TemplateLibrary::default_library(), &sampler).expect("generate");
    for (qt, t) in &gen.per_type {
        println!("  {qt}: {} of {} candidates", t.generated, t.candidates);
    }
    for s in &gen.shortfall {
        println!("  shortfall: {s}");
    }

    let tree = d.build_index(16).expect("index");
    let start = Instant::now();
    let mut valid = 0;
    for c in &corpus {
        let v = validate_pair(&c.pair.exe, &d, &tree, DEFAULT_ROW_CAP);
        if v.valid {
            valid += 1;
        } else {
            println!("  invalid #{}: {} ({})", c.id, c.pair.exe, v.reason);
        }
    }
    println!(
        "validity: {valid}/{} = {:.1}% in {:.2}s",
        corpus.len(),
        100.0 * valid as f64 / corpus.len().max(1) as f64,
        start.elapsed().as_secs_f64()
    );
    for c in corpus.iter().take(10) {
        println!("{:>3} [{}] {}\n    {}", c.id, c.pair.template_id, c.pair.nl, c.pair.exe);
    }
}
