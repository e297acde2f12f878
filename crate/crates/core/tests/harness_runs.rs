use hellinger_bn::harness::{
    run_experiment, strip_column, wilson_interval, write_report, ExperimentSpec, Scenario, REPORT_HEADER,
};
use hellinger_bn::subtest::Decision;

const SPEC: &str = r#"{
    "scenario": "power",
    "generator": {"family": "chain", "n": 4, "k": 2, "perturbation": 0.15},
    "tester": {"id": "known", "eps": 0.12, "samples": 1500, "permutations": 40},
    "trials": 12,
    "seed": 3
}"#;

#[test]
fn power_runs_gate_on_the_exact_distance() {
    let spec = ExperimentSpec::from_json_str(SPEC).unwrap();
    let rep = run_experiment(&spec).unwrap();
    assert_eq!(rep.rows.len(), 12);
    for r in &rep.rows {
        assert_eq!(r.included, r.exact_tv.unwrap() >= 0.12, "trial {}", r.trial);
    }
    let s = &rep.summary;
    assert_eq!(s.counted + s.excluded, 12);
    assert!(s.excluded > 0 && s.counted > 0, "counted {} excluded {}", s.counted, s.excluded);
    let far = rep.rows.iter().filter(|r| r.included && r.decision == Decision::Far).count();
    assert_eq!(s.far, far);
    assert_eq!((s.ci_low, s.ci_high), wilson_interval(far, s.counted));
    assert!(s.ci_low <= s.rate && s.rate <= s.ci_high);
}

#[test]
fn size_runs_count_every_trial() {
    let mut spec = ExperimentSpec::from_json_str(SPEC).unwrap();
    spec.scenario = Scenario::Size;
    spec.trials = 5;
    let rep = run_experiment(&spec).unwrap();
    assert_eq!((rep.summary.counted, rep.summary.excluded), (5, 0));
    assert!(rep.rows.iter().map(|r| r.trial).eq(0..5));
    assert!(rep.rows.iter().all(|r| r.samples_p == 1500 && r.samples_q == 1500));
}

#[test]
fn spec_file_to_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, SPEC.replace("\"trials\": 12", "\"trials\": 3")).unwrap();
    let spec = ExperimentSpec::read(&spec_path).unwrap();
    let out = dir.path().join("report.csv");
    write_report(&run_experiment(&spec).unwrap(), std::fs::File::create(&out).unwrap()).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], REPORT_HEADER.join(","));
    assert!(lines[4].starts_with("summary"));
    let stripped = strip_column(&text, "wall_ms").unwrap();
    assert_eq!(stripped.lines().next().unwrap().split(',').count(), REPORT_HEADER.len() - 1);

    assert!(ExperimentSpec::read(dir.path().join("missing.json")).is_err());
    std::fs::write(&spec_path, SPEC.replace("\"seed\": 3", "\"seed\": 3, \"extra\": 1")).unwrap();
    assert!(ExperimentSpec::read(&spec_path).is_err());
}
