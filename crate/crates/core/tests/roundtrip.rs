use proptest::prelude::*;

use erb::analyzer::{classify, AnalysisReport, Options};
use erb::generators::{random_rule_set, GeneratorSpec};
use erb::oracles::random_facts;
use erb::parser::{parse, serialize, Document};
use erb::Exec;

fn spec() -> impl Strategy<Value = GeneratorSpec> {
    (any::<u64>(), 1usize..6, 1usize..5, 1usize..4, 1usize..3, 0.0..0.6f64, 0.0..0.5f64).prop_map(
        |(seed, rules, predicates, max_arity, max_body, existential_probability, negation_probability)| GeneratorSpec {
            seed,
            rules,
            predicates,
            max_arity,
            max_body,
            existential_probability,
            negation_probability,
            ..GeneratorSpec::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn documents_survive_serialization(spec in spec(), facts in 0usize..6) {
        let rules = random_rule_set(&spec);
        let doc = Document {
            facts: random_facts(&rules, facts, 3, spec.seed),
            rules,
            ..Document::default()
        };
        let text = serialize(&doc);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back.rules, &doc.rules);
        prop_assert_eq!(&back.facts, &doc.facts);
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn reports_survive_json_and_match_across_executors(spec in spec()) {
        let rules = random_rule_set(&spec);
        let run = |exec| classify(&rules, &Options { full: true, exec, ..Options::default() });
        let report = run(Exec::Sequential);
        let back: AnalysisReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        prop_assert_eq!(&back, &report);
        let parallel = run(Exec::Parallel);
        prop_assert_eq!(&parallel.matrix, &report.matrix);
        prop_assert_eq!(&parallel.nme, &report.nme);
        prop_assert_eq!(&parallel.termination, &report.termination);
    }
}
