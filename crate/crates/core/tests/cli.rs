use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(root().join("tests/golden").join(name)).unwrap()
}

fn erb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erb")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = erb(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analysis_tables_match_golden_files() {
    for name in [
        "compatible_sequence",
        "dependency_breaks_cycle",
        "self_blocking",
        "skolem_stops",
        "unifier_breaks_cycle",
    ] {
        let f = fixture(&format!("{name}.erb"));
        let got = stdout(&["analyze", path(&f), "--full", "--witness"]);
        assert_eq!(got, golden(&format!("{name}.analyze.txt")), "{name}");
    }
}

#[test]
fn graphs_and_generators_match_golden_files() {
    let dep = fixture("dependency_breaks_cycle.erb");
    let dot = stdout(&["graph", path(&dep), "--kind", "pg-d"]);
    assert_eq!(dot, golden("dependency_breaks_cycle.pg-d.dot"));
    // the R1 head never reaches R2 once dependencies are taken into account
    assert!(!dot.contains("\"R1.h0.1\" -> \"R2.b0.1\""));
    assert!(stdout(&["graph", path(&dep), "--kind", "pg-f"]).contains("\"R1.h0.1\" -> \"R2.b0.1\""));

    let ub = fixture("unifier_breaks_cycle.erb");
    assert_eq!(stdout(&["graph", path(&ub), "--kind", "grd"]), golden("unifier_breaks_cycle.grd.dot"));
    assert_eq!(
        stdout(&["generate", "--kind", "split", "--in", path(&dep)]),
        golden("dependency_breaks_cycle.split.erb")
    );
    assert_eq!(stdout(&["generate", "--kind", "random", "--seed", "3"]), golden("random_seed3.erb"));
}

#[test]
fn chase_and_query() {
    let f = fixture("skolem_stops.erb");
    assert_eq!(
        stdout(&["chase", path(&f), "--variant", "skolem"]),
        "fixpoint after 1 productive round, 2 atoms\n"
    );
    let oblivious = stdout(&["chase", path(&f), "--variant", "oblivious", "--max-steps", "20"]);
    assert!(oblivious.starts_with("budget exhausted"), "{oblivious}");

    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    stdout(&["chase", path(&f), "--trace", path(&trace)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(v.is_object());

    let q = fixture("unifier_breaks_cycle.erb");
    assert_eq!(stdout(&["query", path(&q), "--bcq", "q(b)"]), "yes\n");
    assert_eq!(stdout(&["query", path(&q), "--bcq", "q(a)"]), "no\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let looping = dir.path().join("looping.erb");
    std::fs::write(&looping, "[R] p(X,Y) -> p(Y,Z).\n").unwrap();
    assert_eq!(erb(&["analyze", path(&looping), "--expect-terminating"]).status.code(), Some(1));
    assert_eq!(erb(&["analyze", path(&looping)]).status.code(), Some(0));
    let f = fixture("dependency_breaks_cycle.erb");
    assert_eq!(erb(&["analyze", path(&f), "--expect-terminating"]).status.code(), Some(0));

    let missing = erb(&["analyze", "no/such/file.erb"]);
    assert_eq!(missing.status.code(), Some(2));
    let broken = dir.path().join("broken.erb");
    std::fs::write(&broken, "[R] p(X) -> \n").unwrap();
    let out = erb(&["analyze", path(&broken)]);
    assert_eq!(out.status.code(), Some(2));
    // parse errors carry a line and column
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.erb:"));
    assert_ne!(erb(&["analyze"]).status.code(), Some(0));
}

#[test]
fn json_reports_follow_the_schema() {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("schema/report-v1.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let negated = dir.path().join("negated.erb");
    std::fs::write(&negated, "[R1] a(X), not b(X) -> c(X,Y). [R2] c(X,Y) -> a(Y).\n").unwrap();
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(root().join("fixtures")).unwrap().map(|e| e.unwrap().path()).collect();
    inputs.push(negated);
    for f in &inputs {
        for extra in [&[][..], &["--full", "--dump-markings", "--paranoid"][..]] {
            let mut args = vec!["analyze", path(f), "--json"];
            args.extend_from_slice(extra);
            let report: serde_json::Value = serde_json::from_str(&stdout(&args)).unwrap();
            let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
            assert!(errors.is_empty(), "{}: {errors:?}", f.display());
        }
    }
}
