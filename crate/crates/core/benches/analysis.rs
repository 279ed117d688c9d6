use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use erb::analyzer::{classify, Options};
use erb::chase::{run_chase, ChaseConfig, ChaseVariant};
use erb::generators::{random_rule_set, GeneratorSpec};
use erb::oracles::random_facts;
use erb::{Exec, RuleSet};

fn workload() -> Vec<RuleSet> {
    (0..16)
        .map(|seed| {
            random_rule_set(&GeneratorSpec {
                seed,
                rules: 8,
                predicates: 5,
                max_body: 3,
                ..GeneratorSpec::default()
            })
        })
        .collect()
}

fn analysis(c: &mut Criterion) {
    let sets = workload();
    let mut group = c.benchmark_group("classify");
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        let opts = Options {
            full: true,
            exec,
            ..Options::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| sets.iter().map(|rs| classify(rs, opts).matrix.len()).sum::<usize>())
        });
    }
    group.finish();
}

fn chase(c: &mut Criterion) {
    let rules = erb::parser::parse_rules("[R1] e(X,Y) -> t(X,Y). [R2] t(X,Y), e(Y,W) -> t(X,W).").unwrap();
    let facts = random_facts(&rules, 120, 40, 1);
    let mut group = c.benchmark_group("chase");
    for (name, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        let cfg = ChaseConfig {
            exec,
            ..ChaseConfig::new(ChaseVariant::Skolem)
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| run_chase(&facts, &rules, *cfg).unwrap().atoms.len())
        });
    }
    group.finish();
}

criterion_group!(benches, analysis, chase);
criterion_main!(benches);
