use sigmared_cli::corpus;
use sigmared_cli::pipeline::{Options, Stages};
use sigmared_cli::report::{Report, Status, Value};

fn reports() -> Vec<Report> {
    corpus::run_corpus(&Options::default()).unwrap()
}

fn text<'a>(r: &'a Report, check: &str, key: &str) -> &'a str {
    match r.find(check).and_then(|c| c.get(key)) {
        Some(Value::Text(s)) => s,
        other => panic!("{}: {check}.{key} is {other:?}", r.name),
    }
}

#[test]
fn every_corpus_problem_passes() {
    let reps = reports();
    let names: Vec<&str> = reps.iter().map(|r| r.name.as_str()).collect();
    for stem in ["example1", "example2", "example3", "example4", "example5", "example6", "example7", "example8", "example9"] {
        assert!(names.contains(&stem), "{stem} missing from {names:?}");
    }
    for r in &reps {
        let bad: Vec<_> = r.failures().map(|f| &f.check).collect();
        assert!(bad.is_empty(), "{}: {bad:?}", r.name);
        assert!(r.find("determining").is_some_and(|d| d.status == Status::Pass), "{}", r.name);
    }

    let by = |n: &str| reps.iter().find(|r| r.name == n).unwrap();
    assert_eq!(text(by("example9"), "reduction.ratio.1.2", "got"), "(1 - w1*w2)/(w1 - w2^2)");
    assert_eq!(text(by("example5"), "class", "class"), "standard");
    assert_eq!(text(by("example8"), "class", "class"), "orbital");
    // Printed forms that disagree with the derivation are reported, not failed.
    assert_eq!(text(by("example7"), "transform.printed-form", "agrees"), "no");
    assert_eq!(text(by("example9"), "transform.printed-form", "agrees"), "no");
    assert_eq!(text(by("example3"), "construct.printed-form", "agrees"), "no");
}

#[test]
fn seeds_change_samples_not_verdicts() {
    let opts = Options { seed: Some(99), stages: Stages::REDUCE, ..Options::default() };
    for r in corpus::run_corpus(&opts).unwrap() {
        assert_eq!(r.seed, 99);
        assert!(r.passed(), "{}: {:?}", r.name, r.failures().next());
    }
}
