use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tancat::expr::ExprAst;
use tancat::{Expr, Term};

fn tancat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tancat"))
        .args(args)
        .env_remove("TANCAT_SEED")
        .output()
        .unwrap()
}

fn ast(inputs: usize, terms: &[Term]) -> Value {
    serde_json::to_value(ExprAst::from(Expr::from_terms(inputs, terms).unwrap())).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn rotation_bracket_table_from_a_fields_spec() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = (Term::var(0), Term::var(1));
    let spec = json!({
        "domain": { "lo": [-1.0, -1.0], "hi": [1.0, 1.0] },
        "fields": [
            { "name": "v", "expr": ast(2, &[-&y, x.clone()]) },
            { "name": "w", "expr": ast(2, &[Term::c(1.0), Term::c(0.0)]) },
        ],
        "functions": [{ "name": "f", "expr": ast(2, &[&x * &y]) }],
        "brackets": [
            { "bracket": ["v", "w"] },
            { "bracket": ["v", { "bracket": ["v", "w"] }] },
        ],
    });
    let path = write(dir.path(), "rotation.json", &spec);
    let out = tancat(&[
        "bracket",
        "--suite",
        "bracket",
        "--spec",
        &path,
        "--samples",
        "100",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["name"].as_str().unwrap().starts_with("rotation.")));
    let row = &report["bracket_table"][0];
    assert_eq!(row["inputs"], json!(["v", "w"]));
    let value: Vec<f64> = serde_json::from_value(row["value"].clone()).unwrap();
    assert!(
        value[0].abs() < 1e-12 && (value[1] + 1.0).abs() < 1e-12,
        "{value:?}"
    );
    let nested = &report["bracket_table"][1];
    assert_eq!(nested["inputs"], json!(["v", "[v, w]"]));
    assert_eq!(nested["value"], json!([-1.0, 0.0]));
}

#[test]
fn differentiate_honors_bracket_requests() {
    let dir = tempfile::tempdir().unwrap();
    let spec = json!({
        "groupoid": "builtin:matrix_group:2",
        "brackets": [{ "bracket": ["E12", { "bracket": ["E12", "E21"] }] }],
    });
    let path = write(dir.path(), "gl2.json", &spec);
    let out = tancat(&[
        "differentiate",
        "--spec",
        &path,
        "--suite",
        "algebroid",
        "--samples",
        "50",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = report["bracket_table"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["inputs"], json!(["E12", "[E12, E21]"]));
    // [E12, E22 - E11] = (E22 - E11) E12 - E12 (E22 - E11) = -2 E12.
    let value: Vec<f64> = serde_json::from_value(rows[0]["value"].clone()).unwrap();
    let expected = [0.0, -2.0, 0.0, 0.0];
    assert!(
        value
            .iter()
            .zip(expected)
            .all(|(v, e)| (v - e).abs() < 1e-12),
        "{value:?}"
    );
}

#[test]
fn malformed_spec_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        "{\n  \"base\": {\"lo\": [0.0], \"hi\": [1.0]},\n  \"fiber_dim\": \"two\"\n}",
    )
    .unwrap();
    let out = tancat(&["groupoid", "--spec", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn seed_flag_and_env_agree_and_out_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("report.json");
    let by_flag = tancat(&[
        "axioms",
        "--seed",
        "19",
        "--samples",
        "50",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(by_flag.status.code(), Some(0));
    assert!(by_flag.stdout.is_empty());
    let by_env = Command::new(env!("CARGO_BIN_EXE_tancat"))
        .args(["axioms", "--samples", "50"])
        .env("TANCAT_SEED", "19")
        .output()
        .unwrap();
    assert_eq!(std::fs::read(&file).unwrap(), by_env.stdout);
    let report: Value = serde_json::from_slice(&by_env.stdout).unwrap();
    assert_eq!(report["seed"], 19);
}

#[test]
fn refused_algebroid_exits_one_with_its_failing_rows() {
    let out = tancat(&[
        "differentiate",
        "--spec",
        "builtin:pair",
        "--mutate",
        "drop-unit",
        "--samples",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(
        failing
            .iter()
            .all(|n| n.starts_with("pair.refused.") || n.starts_with("oracles.")),
        "{failing:?}"
    );
    assert!(failing.contains(&"pair.refused.unit_left"), "{failing:?}");
}

#[test]
fn unknown_builtin_is_malformed_input() {
    let out = tancat(&["groupoid", "--spec", "builtin:torus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("torus"));
}
