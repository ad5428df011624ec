use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sp_core::{
    build_alignments, parse_knowledge_file, parse_new_patterns, Execution, SearchOptions,
};

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn search(c: &mut Criterion) {
    let cases = [
        ("spelling", "dictionary.sp", "spelling_new.sp"),
        ("sentence", "grammar.sp", "sentence_new.sp"),
        ("diagnosis", "diseases.sp", "john_smith.sp"),
    ];
    let mut group = c.benchmark_group("build_alignments");
    group.sample_size(10);
    for (label, kb, new) in cases {
        let store = parse_knowledge_file(&fixture(kb)).unwrap();
        let news = parse_new_patterns(&fixture(new)).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let opts = SearchOptions {
                execution: exec,
                ..SearchOptions::default()
            };
            group.bench_with_input(
                BenchmarkId::new(format!("{exec:?}").to_lowercase(), label),
                &opts,
                |b, opts| b.iter(|| build_alignments(&news, &store, opts).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
