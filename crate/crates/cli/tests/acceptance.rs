//! One PASS/FAIL line per acceptance criterion. Thresholds are checked on the
//! reported residuals directly, independent of each row's own tolerance.

use std::process::{Command, Output};
use std::time::{Duration, Instant};

use tancat::algebroid::{check_algebroid_laws, check_classical_oracles, Algebroid};
use tancat::axioms::{check_axiom_suite, USES_TAU};
use tancat::fields::check_bracket_laws;
use tancat::gbundle::check_invariant_closure;
use tancat::groupoid::{
    check_differentiability, check_groupoid_axioms, check_tangent_groupoid, MULT_CHECKS,
    UNIT_CHECKS,
};
use tancat::random::corpus;
use tancat::spec::{builtin_groupoid, default_functions, default_sections, BUILTIN_GROUPOIDS};
use tancat::{algebroid_of, Error, FiberedGroupoid, Mutation, Report, SuiteConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(samples: usize) -> SuiteConfig {
    SuiteConfig {
        samples,
        ..SuiteConfig::default()
    }
}

fn builders() -> Vec<(&'static str, FiberedGroupoid)> {
    BUILTIN_GROUPOIDS
        .iter()
        .map(|n| (*n, builtin_groupoid(n).expect("builtin groupoid")))
        .collect()
}

/// Rows whose name ends with one of `suffixes`, all passing with residual <= `bound`.
fn bounded(report: &Report, label: &str, suffixes: &[&str], bound: f64) -> Result<f64, String> {
    let rows: Vec<_> = report
        .checks
        .iter()
        .filter(|c| suffixes.iter().any(|s| c.name.ends_with(s)))
        .collect();
    if rows.is_empty() {
        return Err(format!("{label}: no rows matching {suffixes:?}"));
    }
    let mut worst = 0.0f64;
    for c in rows {
        let r = c.max_residual.unwrap_or(f64::INFINITY);
        if !c.pass || r > bound {
            return Err(format!(
                "{label}.{} residual {r:.3e} (bound {bound:.0e}) {}",
                c.name,
                c.error.clone().unwrap_or_default()
            ));
        }
        worst = worst.max(r);
    }
    Ok(worst)
}

fn all_pass(report: &Report, label: &str) -> Result<(), String> {
    match report.failures().next() {
        Some(c) => Err(format!(
            "{label}.{} failed: {:?} {}",
            c.name,
            c.max_residual,
            c.error.clone().unwrap_or_default()
        )),
        None => Ok(()),
    }
}

fn algebroid(g: &FiberedGroupoid, cfg: &SuiteConfig) -> Result<Algebroid, String> {
    algebroid_of(g, cfg).map_err(|e| e.to_string())
}

fn c1() -> Outcome {
    let start = Instant::now();
    let r = check_axiom_suite(&config(500));
    let elapsed = start.elapsed();
    all_pass(&r, "axioms")?;
    let worst = bounded(&r, "axioms", &[""], 1e-9)?;
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!(
        "{} diagrams, dims 1-3, max residual {worst:.1e}, {elapsed:.1?}",
        r.checks.len()
    ))
}

fn bracket_reports(samples: usize) -> Vec<(usize, Report)> {
    (1..=3)
        .map(|d| {
            let (fields, functions) = corpus(d, 7);
            (d, check_bracket_laws(&fields, &functions, &config(samples)))
        })
        .collect()
}

fn c2() -> Outcome {
    let (mut fd, mut ad) = (0.0f64, 0.0f64);
    for (d, r) in bracket_reports(300) {
        fd = fd.max(bounded(&r, &format!("R{d}"), &["coordinate_fd"], 1e-5)?);
        ad = ad.max(bounded(&r, &format!("R{d}"), &["coordinate_ad"], 1e-10)?);
    }
    Ok(format!(
        "300 points in R1-R3: finite differences {fd:.1e}, coordinate formula {ad:.1e}"
    ))
}

fn c3() -> Outcome {
    let mut worst = 0.0f64;
    for (d, r) in bracket_reports(500) {
        worst = worst.max(bounded(&r, &format!("R{d}"), &["kernel"], 1e-10)?);
    }
    Ok(format!("block-2 ratio {worst:.1e}"))
}

fn c4() -> Outcome {
    let (mut jac, mut leib, mut der) = (0.0f64, 0.0f64, 0.0f64);
    for (d, r) in bracket_reports(500) {
        let l = format!("R{d}");
        jac = jac.max(bounded(&r, &l, &["jacobi"], 1e-8)?);
        leib = leib.max(bounded(&r, &l, &["leibniz"], 1e-9)?);
        der = der.max(bounded(
            &r,
            &l,
            &[
                "additive_field",
                "additive_function",
                "commutator",
                "derivation.product",
            ],
            1e-9,
        )?);
    }
    Ok(format!(
        "jacobi {jac:.1e}, leibniz {leib:.1e}, derivation {der:.1e}"
    ))
}

fn c5() -> Outcome {
    let cfg = config(500);
    let (mut base, mut tangent) = (0.0f64, 0.0f64);
    for (name, g) in builders() {
        base = base.max(bounded(
            &check_groupoid_axioms(&g, &cfg),
            name,
            &[""],
            1e-10,
        )?);
        base = base.max(bounded(
            &check_differentiability(&g, &cfg),
            name,
            &[""],
            1e-10,
        )?);
        let t = check_tangent_groupoid(&g, &cfg).map_err(|e| format!("{name}: {e}"))?;
        tangent = tangent.max(bounded(&t, name, &[""], 1e-9)?);
    }
    Ok(format!(
        "4 builders: axioms and differentiability {base:.1e}, tangent groupoid {tangent:.1e}"
    ))
}

fn c6() -> Outcome {
    let cfg = config(200);
    let mut worst = 0.0f64;
    for (name, g) in builders() {
        let alg = algebroid(&g, &cfg)?;
        let sections = default_sections(alg.base_dim(), alg.fiber_dim);
        let (a, b) = (&sections[sections.len() - 2], &sections[sections.len() - 1]);
        let v = alg.extend_to_invariant(a).map_err(|e| e.to_string())?;
        let w = alg.extend_to_invariant(b).map_err(|e| e.to_string())?;
        let f = default_functions(&alg.base())[0]
            .pullback(&alg.gpd.t)
            .map_err(|e| e.to_string())?;
        let r = check_invariant_closure(&alg.bundle, &v, &w, &f, &cfg);
        all_pass(&r, name)?;
        worst = worst.max(bounded(&r, name, &["equivariant", "vertical"], 1e-8)?);
    }
    Ok(format!(
        "200 pairs per builder, bracket/sum/scaled residual {worst:.1e}"
    ))
}

fn laws(cfg: &SuiteConfig) -> Result<Vec<(&'static str, Report)>, String> {
    builders()
        .into_iter()
        .map(|(name, g)| {
            let alg = algebroid(&g, cfg)?;
            let sections = default_sections(alg.base_dim(), alg.fiber_dim);
            let functions = default_functions(&alg.base());
            Ok((name, check_algebroid_laws(&alg, &sections, &functions, cfg)))
        })
        .collect()
}

fn c7() -> Outcome {
    let (mut pp, mut ph) = (0.0f64, 0.0f64);
    for (name, r) in laws(&config(500))? {
        pp = pp.max(bounded(&r, name, &["psi_phi"], 1e-10)?);
        ph = ph.max(bounded(&r, name, &["phi_psi"], 1e-9)?);
    }
    Ok(format!("psi.phi {pp:.1e}, phi.psi {ph:.1e}"))
}

fn c8() -> Outcome {
    let r = check_classical_oracles(&config(500)).map_err(|e| e.to_string())?;
    let matrix = r.check("matrix.bracket").ok_or("missing matrix.bracket")?;
    if matrix.samples != 100 {
        return Err(format!("matrix.bracket used {} pairs", matrix.samples));
    }
    let m = bounded(&r, "oracles", &["matrix.bracket"], 1e-10)?;
    let p = bounded(&r, "oracles", &["pair.bracket"], 1e-9)?;
    let a = bounded(&r, "oracles", &["action.anchor"], 1e-10)?;
    all_pass(&r, "oracles")?;

    let out = tancat(&[
        "differentiate",
        "--spec",
        "builtin:matrix_group:2",
        "--suite",
        "algebroid",
    ]);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let row = report["bracket_table"]
        .as_array()
        .and_then(|rows| {
            rows.iter()
                .find(|r| r["inputs"] == serde_json::json!(["E12", "E21"]))
        })
        .ok_or("no [E12, E21] row in the bracket table")?;
    let value: Vec<f64> =
        serde_json::from_value(row["value"].clone()).map_err(|e| e.to_string())?;
    let expected = [-1.0, 0.0, 0.0, 1.0];
    if value
        .iter()
        .zip(expected)
        .any(|(v, e)| (v - e).abs() > 1e-10)
    {
        return Err(format!("[E12, E21] = {value:?}"));
    }
    Ok(format!("BA-AB {m:.1e} over 100 pairs, pair bracket {p:.1e}, action anchor {a:.1e}, [E12,E21] = {value:?}"))
}

fn c9() -> Outcome {
    let (mut leib, mut anchor) = (0.0f64, 0.0f64);
    let mut constant_only = Vec::new();
    for (name, r) in laws(&config(500))? {
        leib = leib.max(bounded(&r, name, &["leibniz"], 1e-8)?);
        anchor = anchor.max(bounded(&r, name, &["anchor_morphism"], 1e-8)?);
        if builtin_groupoid(name)
            .map_err(|e| e.to_string())?
            .base_dim()
            == 0
        {
            constant_only.push(name);
        }
    }
    Ok(format!(
        "leibniz {leib:.1e}, anchor morphism {anchor:.1e}; {} have a point base, so f is constant there",
        constant_only.join(", ")
    ))
}

/// Some row in `targets` fails and every other row passes.
fn targeted(r: &Report, label: &str, targets: &[&str]) -> Result<String, String> {
    let hit: Vec<&str> = r
        .failures()
        .map(|c| c.name.as_str())
        .filter(|n| targets.contains(n))
        .collect();
    if hit.is_empty() {
        return Err(format!("{label}: no targeted check failed"));
    }
    if let Some(c) = r
        .checks
        .iter()
        .find(|c| !c.pass && !targets.contains(&c.name.as_str()))
    {
        return Err(format!("{label}: unrelated check {} failed", c.name));
    }
    Ok(format!("{label} trips {}", hit.join(",")))
}

fn c10() -> Outcome {
    let with = |m| SuiteConfig {
        mutation: Some(m),
        ..config(200)
    };
    let tau = targeted(
        &check_axiom_suite(&with(Mutation::CorruptTau)),
        "corrupt_tau",
        USES_TAU,
    )?;
    let pair = builtin_groupoid("pair").map_err(|e| e.to_string())?;
    let transpose = targeted(
        &check_groupoid_axioms(&pair, &with(Mutation::TransposeM)),
        "transpose_m",
        MULT_CHECKS,
    )?;
    let matrix = builtin_groupoid("matrix_group:2").map_err(|e| e.to_string())?;
    let unit = targeted(
        &check_groupoid_axioms(&matrix, &with(Mutation::DropUnit)),
        "drop_unit",
        UNIT_CHECKS,
    )?;
    match algebroid_of(&matrix, &with(Mutation::DropUnit)) {
        Err(Error::SuiteFailed(_)) => {}
        _ => return Err("algebroid built from a non-unital groupoid".into()),
    }
    let code = tancat(&[
        "groupoid",
        "--spec",
        "builtin:matrix_group:2",
        "--suite",
        "groupoid",
        "--mutate",
        "drop-unit",
    ])
    .status
    .code();
    if code != Some(1) {
        return Err(format!("mutated cli run exited with {code:?}"));
    }
    Ok(format!("{tau}; {transpose}; {unit}"))
}

fn c11() -> Outcome {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        let out = tancat(&["all"]);
        let elapsed = start.elapsed();
        if out.status.code() != Some(0) {
            return Err(format!(
                "exit {:?}: {}",
                out.status.code(),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        if elapsed > Duration::from_secs(60) {
            return Err(format!("full run took {elapsed:.1?}"));
        }
        outputs.push((out.stdout, elapsed));
    }
    if outputs[0].0 != outputs[1].0 {
        return Err("repeat runs differ".into());
    }
    for (args, want) in [
        (&["axioms", "--suite", "bracket"][..], 2),
        (&["groupoid", "--spec", "/nonexistent/spec.json"][..], 2),
        (&["bracket", "--suite", "nonsense"][..], 2),
    ] {
        let code = tancat(args).status.code();
        if code != Some(want) {
            return Err(format!("{args:?} exited with {code:?}, expected {want}"));
        }
    }
    Ok(format!(
        "{:.1?} and {:.1?}, byte-identical, {} bytes",
        outputs[0].1,
        outputs[1].1,
        outputs[0].0.len()
    ))
}

fn tancat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tancat"))
        .args(args)
        .env_remove("TANCAT_SEED")
        .output()
        .expect("tancat runs")
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("euclidean axiom suite", c1),
        ("bracket vs coordinate oracles", c2),
        ("kernel identity", c3),
        ("jacobi, leibniz and derivation laws", c4),
        ("groupoid, differentiability and tangent groupoid", c5),
        ("invariant-bracket closure", c6),
        ("algebroid correspondence", c7),
        ("classical oracles", c8),
        ("abstract algebroid laws", c9),
        ("mutation sensitivity", c10),
        ("full run time and determinism", c11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
