use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn root(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .display()
        .to_string()
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn validator() -> jsonschema::Validator {
    let text = include_str!("../schema/report-v1.schema.json");
    let schema: Value = serde_json::from_str(text).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn report(args: &[&str]) -> (Option<i32>, Value) {
    let o = Command::new(env!("CARGO_BIN_EXE_lik"))
        .args(args)
        .arg("--json")
        .env_remove("LIK_BRANCH_DEPTH")
        .output()
        .unwrap();
    let doc = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}"));
    (o.status.code(), doc)
}

fn assert_valid(args: &[&str]) -> Value {
    let v = validator();
    let (_, doc) = report(args);
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?}: {errors:#?}");
    assert_eq!(doc["$schema"], "urn:lik:report:v1");
    doc
}

#[test]
fn every_command_emits_a_valid_report() {
    let toda = root("systems/toda.txt");
    let param = root("systems/toda_parameterized.txt");
    assert_valid(&["weights", &toda]);
    assert_valid(&["densities", &toda, "--max-rank", "3"]);
    assert_valid(&["symmetries", &param, "--ranks", "3,4"]);
    assert_valid(&["symmetries", &toda, "--levels", "2"]);
    assert_valid(&["recursion", &param, "--param", "a=2", "--param", "b=1"]);
    assert_valid(&[
        "verify",
        &toda,
        "--density",
        &fixture("toda_rho3_wrong_flux.txt"),
    ]);
    assert_valid(&["verify", &toda, "--symmetry", &fixture("toda_g2.txt")]);
}

#[test]
fn recursion_report_fields() {
    let doc = assert_valid(&["recursion", &root("systems/toda.txt")]);
    let op = &doc["recursion_operator"];
    assert_eq!(
        op["rank_matrix"],
        serde_json::json!([["1", "0"], ["2", "1"]])
    );
    assert_eq!(op["unknowns"], 17);
    assert_eq!(op["entries"].as_array().unwrap().len(), 4);
    assert!(doc["verification"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v["passed"] == true));
}

#[test]
fn schema_rejects_unknown_fields() {
    let (_, mut doc) = report(&["weights", &root("systems/toda.txt")]);
    doc["extra"] = Value::Bool(true);
    assert!(!validator().is_valid(&doc));
}
