use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use recovery_lab::experiments::{
    load_config, run_bound, run_ce_continuity, run_dense_uniqueness_check, run_nonidentification_demo,
    run_theorem2_demo, run_vc, RunReport,
};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn errors(schema: &Value, instance: &Value) -> Vec<String> {
    let validator = jsonschema::validator_for(schema).expect("schema compiles");
    validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path())).collect()
}

/// The config schema with its root pointed at one subcommand's definition.
fn config_schema(command: &str) -> Value {
    let mut schema = read_json(&root().join("schema/config.schema.json"));
    schema["$ref"] = Value::from(format!("#/$defs/{command}"));
    schema
}

const SHIPPED: [(&str, &str); 12] = [
    ("bound.json", "bound"),
    ("consistency.json", "consistency"),
    ("convergence.json", "convergence"),
    ("fit.json", "fit"),
    ("gen.json", "gen"),
    ("nonid.json", "nonid"),
    ("recovery_1state.json", "recovery"),
    ("recovery_2state.json", "recovery"),
    ("separation.json", "separation"),
    ("uniqueness.json", "uniqueness"),
    ("vc_linear.json", "vc"),
    ("vc_singleton.json", "vc"),
];

#[test]
fn every_shipped_config_matches_its_schema() {
    let mut seen: Vec<String> = std::fs::read_dir(root().join("configs"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    seen.sort();
    let mut listed: Vec<String> = SHIPPED.iter().map(|(f, _)| f.to_string()).collect();
    listed.sort();
    assert_eq!(seen, listed, "configs/ and this list drifted apart");
    for (file, command) in SHIPPED {
        let errs = errors(&config_schema(command), &read_json(&root().join("configs").join(file)));
        assert!(errs.is_empty(), "{file}: {errs:?}");
    }
}

#[test]
fn config_schema_rejects_what_the_loader_rejects() {
    let mut cfg = read_json(&root().join("configs/bound.json"));
    cfg["surprise"] = json!(true);
    assert!(!errors(&config_schema("bound"), &cfg).is_empty());

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bound.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    assert!(load_config::<recovery_lab::experiments::BoundConfig>(&path).is_err());

    let mut vc = read_json(&root().join("configs/vc_linear.json"));
    vc["family"] = json!({"quadratic": {"weight_steps": 3}});
    assert!(!errors(&config_schema("vc"), &vc).is_empty());
}

fn check_report(report: &RunReport) {
    let schema = read_json(&root().join("schema/run_report.schema.json"));
    let value: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let errs = errors(&schema, &value);
    assert!(errs.is_empty(), "{}: {errs:?}", report.command);
    for s in &report.series {
        for c in &s.cells {
            assert!(
                c.min <= c.q25 && c.q25 <= c.q50 && c.q50 <= c.q75 && c.q75 <= c.max,
                "{}/{}: quantiles out of order at x = {}",
                report.command,
                s.name,
                c.x
            );
        }
    }
}

#[test]
fn reports_validate_against_the_report_schema() {
    let cfg = |f: &str| root().join("configs").join(f);
    check_report(&run_bound(&load_config(&cfg("bound.json")).unwrap()).unwrap());
    check_report(&run_vc(&load_config(&cfg("vc_linear.json")).unwrap()).unwrap());
    check_report(&run_nonidentification_demo(&load_config(&cfg("nonid.json")).unwrap()).unwrap());
    let conv = load_config(&cfg("convergence.json")).unwrap();
    check_report(&run_theorem2_demo(&conv).unwrap());
    check_report(&run_ce_continuity(&conv).unwrap());
    check_report(&run_dense_uniqueness_check(&load_config(&cfg("uniqueness.json")).unwrap()).unwrap());
}

#[test]
fn report_schema_rejects_malformed_reports() {
    let schema = read_json(&root().join("schema/run_report.schema.json"));
    let report = run_bound(&load_config(&root().join("configs/bound.json")).unwrap()).unwrap();
    let good: Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();

    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("flags");
    assert!(!errors(&schema, &missing).is_empty());

    let mut bad_cell = good.clone();
    bad_cell["series"][0]["cells"][0]["q50"] = json!("median");
    assert!(!errors(&schema, &bad_cell).is_empty());

    let mut bad_command = good;
    bad_command["command"] = json!("teleport");
    assert!(!errors(&schema, &bad_command).is_empty());
}
