//! Command implementations behind the `tancat` binary.
//!
//! Every command assembles one [`Report`] whose rows are prefixed by the
//! input they came from and the suite that produced them, so a report is a
//! pure function of the flags and specs.

use std::path::Path;
use std::sync::Arc;

use tancat::algebroid::{check_algebroid_laws, check_classical_oracles, Algebroid};
use tancat::axioms::check_axiom_suite;
use tancat::fields::check_bracket_laws;
use tancat::gbundle::{
    base_bundle, check_bundle_axioms, check_invariant_closure, fiber_product_bundle, unit_bundle,
};
use tancat::groupoid::{check_differentiability, check_groupoid_axioms, check_tangent_groupoid};
use tancat::report::{failed_row, substream, BracketRow};
use tancat::spec::{
    self, bracket_rows, pairwise, BracketRequest, DifferentiateSpec, FieldSet, GroupoidRef,
    BUILTIN_GROUPOIDS, BUILTIN_PREFIX,
};
use tancat::{
    algebroid_of, lie_bracket, AlgebroidSection, Error, FiberedGroupoid, Report, ScalarField,
    SuiteConfig, VectorField,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed flags or specs; exit code 2.
    #[error("{0}")]
    Input(String),
    #[error("no checks selected")]
    NoChecks,
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Axioms,
    Groupoid,
    Differentiate,
    Bracket,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Axioms => "axioms",
            Command::Groupoid => "groupoid",
            Command::Differentiate => "differentiate",
            Command::Bracket => "bracket",
            Command::All => "all",
        }
    }

    pub fn suites(self) -> &'static [&'static str] {
        match self {
            Command::Axioms => &["axioms"],
            Command::Groupoid => &["groupoid", "tangent", "differentiability", "bundle"],
            Command::Differentiate => &["algebroid", "closure", "oracles"],
            Command::Bracket => &["bracket", "related"],
            Command::All => &[
                "axioms",
                "groupoid",
                "tangent",
                "differentiability",
                "bundle",
                "algebroid",
                "closure",
                "oracles",
                "bracket",
                "related",
            ],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub suite: SuiteConfig,
    /// `None` runs every suite of the command.
    pub selection: Option<Vec<String>>,
    /// Builtin names (`builtin:...`) or spec file paths.
    pub specs: Vec<String>,
}

/// Resolves `--suite` against the command's suites.
pub fn selected(command: Command, selection: &Option<Vec<String>>) -> CliResult<Vec<&'static str>> {
    let all = command.suites();
    let chosen: Vec<&'static str> = match selection {
        None => all.to_vec(),
        Some(names) => {
            if let Some(bad) = names
                .iter()
                .find(|n| !Command::All.suites().contains(&n.as_str()))
            {
                return Err(CliError::Input(format!("unknown suite `{bad}`")));
            }
            all.iter()
                .copied()
                .filter(|s| names.iter().any(|n| n == s))
                .collect()
        }
    };
    if chosen.is_empty() {
        return Err(CliError::NoChecks);
    }
    Ok(chosen)
}

/// A spec argument: the builtin text itself, or the file contents with the
/// file stem as its key.
fn read_spec(arg: &str) -> CliResult<(String, String)> {
    if let Some(name) = arg.strip_prefix(BUILTIN_PREFIX) {
        return Ok((name.to_string(), arg.to_string()));
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{arg}: {e}")))?;
    let key = path
        .file_stem()
        .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
    Ok((key, text))
}

fn spec_error(arg: &str, e: Error) -> CliError {
    CliError::Input(format!("{arg}: {e}"))
}

fn builtin_args(names: &[&str]) -> Vec<String> {
    names
        .iter()
        .map(|n| format!("{BUILTIN_PREFIX}{n}"))
        .collect()
}

pub fn run(command: Command, config: &RunConfig) -> CliResult<Report> {
    let suites = selected(command, &config.selection)?;
    let cfg = &config.suite;
    let mut report = Report::new(command.name(), cfg, Vec::new());
    let wants = |s: &str| suites.contains(&s);
    let specs = |defaults: Vec<String>| {
        if config.specs.is_empty() {
            defaults
        } else {
            config.specs.clone()
        }
    };
    let all = command == Command::All;

    if wants("axioms") {
        report.absorb("axioms", check_axiom_suite(cfg));
    }
    if ["groupoid", "tangent", "differentiability", "bundle"]
        .iter()
        .any(|s| wants(s))
    {
        let args = if all {
            builtin_args(BUILTIN_GROUPOIDS)
        } else {
            specs(builtin_args(BUILTIN_GROUPOIDS))
        };
        for arg in args {
            let (key, text) = read_spec(&arg)?;
            let g = spec::load_groupoid(&text).map_err(|e| spec_error(&arg, e))?;
            groupoid_suites(&mut report, &key, &g, &suites, cfg)?;
        }
    }
    if ["algebroid", "closure", "oracles"].iter().any(|s| wants(s)) {
        let args = if all {
            builtin_args(BUILTIN_GROUPOIDS)
        } else {
            specs(builtin_args(BUILTIN_GROUPOIDS))
        };
        if wants("algebroid") || wants("closure") {
            for arg in args {
                let (key, text) = read_spec(&arg)?;
                differentiate(&mut report, &key, &arg, &text, &suites, cfg)?;
            }
        }
        if wants("oracles") {
            report.absorb("oracles", check_classical_oracles(cfg)?);
        }
    }
    if wants("bracket") || wants("related") {
        let dims: Vec<String> = (1..=cfg.max_dim.max(1))
            .map(|d| format!("{BUILTIN_PREFIX}corpus:{d}"))
            .collect();
        if wants("bracket") {
            for arg in if all { dims } else { specs(dims) } {
                let (key, text) = read_spec(&arg)?;
                let set = spec::load_fields(&text, cfg.seed).map_err(|e| spec_error(&arg, e))?;
                let mut laws = check_bracket_laws(&set.fields, &set.functions, cfg);
                laws.bracket_table =
                    field_table(&set, cfg.seed).map_err(|e| spec_error(&arg, e))?;
                report.absorb(&key, laws);
            }
        }
        if wants("related") {
            report.absorb("shear", spec::check_shear_related(cfg)?);
        }
    }
    Ok(report)
}

fn groupoid_suites(
    report: &mut Report,
    key: &str,
    g: &FiberedGroupoid,
    suites: &[&str],
    cfg: &SuiteConfig,
) -> CliResult<()> {
    if suites.contains(&"groupoid") {
        report.absorb(&format!("{key}.groupoid"), check_groupoid_axioms(g, cfg));
    }
    if suites.contains(&"tangent") {
        let tangent = match check_tangent_groupoid(g, cfg) {
            Ok(r) => r,
            Err(e) => Report::new(
                "tangent",
                cfg,
                vec![failed_row("build", "tangent groupoid", 0.0, e.to_string())],
            ),
        };
        report.absorb(key, tangent);
    }
    if suites.contains(&"differentiability") {
        report.absorb(
            &format!("{key}.differentiability"),
            check_differentiability(g, cfg),
        );
    }
    if suites.contains(&"bundle") {
        let g = Arc::new(g.clone());
        let unit = unit_bundle(&g)?;
        let base = base_bundle(&g)?;
        let product = fiber_product_bundle(&unit, &base)?;
        for (name, b) in [("unit", &unit), ("base", &base), ("product", &product)] {
            report.absorb(&format!("{key}.bundle.{name}"), check_bundle_axioms(b, cfg));
        }
    }
    Ok(())
}

fn differentiate(
    report: &mut Report,
    key: &str,
    arg: &str,
    text: &str,
    suites: &[&str],
    cfg: &SuiteConfig,
) -> CliResult<()> {
    let spec: DifferentiateSpec = if text.trim().starts_with(BUILTIN_PREFIX) {
        DifferentiateSpec {
            groupoid: GroupoidRef::Builtin(text.trim().to_string()),
            sections: Vec::new(),
            functions: Vec::new(),
            brackets: Vec::new(),
        }
    } else {
        spec::parse(text).map_err(|e| spec_error(arg, e))?
    };
    let g = spec.groupoid.build().map_err(|e| spec_error(arg, e))?;
    let alg = match algebroid_of(&g, cfg) {
        Ok(a) => a,
        Err(Error::SuiteFailed(failed)) => {
            report.absorb(&format!("{key}.refused"), *failed);
            return Ok(());
        }
        Err(e) => return Err(spec_error(arg, e)),
    };
    let (p, q) = (alg.base_dim(), alg.fiber_dim);
    let sections = if spec.sections.is_empty() {
        spec::default_sections(p, q)
    } else {
        spec::sections_from(&spec.sections, p, q).map_err(|e| spec_error(arg, e))?
    };
    let functions = if spec.functions.is_empty() {
        spec::default_functions(&alg.base())
    } else {
        spec::functions_from(&spec.functions, &alg.base()).map_err(|e| spec_error(arg, e))?
    };
    if suites.contains(&"algebroid") {
        let mut laws = check_algebroid_laws(&alg, &sections, &functions, cfg);
        let x = alg
            .gpd
            .base
            .sample(&mut substream(cfg.seed, "bracket_table"))?;
        let requests = requests_or_pairs(&spec.brackets, sections.iter().map(|a| a.name.as_str()));
        laws.bracket_table = bracket_rows(
            &requests,
            &sections,
            |a: &AlgebroidSection| a.name.as_str(),
            |a, b| alg.bracket(a, b),
            |a, x| a.value_at(x),
            &x,
        )
        .map_err(|e| spec_error(arg, e))?;
        report.absorb(&format!("{key}.algebroid"), laws);
    }
    if suites.contains(&"closure") {
        report.absorb(
            &format!("{key}.closure"),
            closure(&alg, &sections, &functions, cfg)?,
        );
    }
    Ok(())
}

/// Closure on the extensions of the last two sections and `f . t`.
fn closure(
    alg: &Algebroid,
    sections: &[AlgebroidSection],
    functions: &[ScalarField],
    cfg: &SuiteConfig,
) -> CliResult<Report> {
    let n = sections.len();
    let (a, b) = match n {
        0 => return Err(CliError::Input("closure needs at least one section".into())),
        1 => (&sections[0], &sections[0]),
        _ => (&sections[n - 2], &sections[n - 1]),
    };
    let v = alg.extend_to_invariant(a)?;
    let w = alg.extend_to_invariant(b)?;
    let f = functions[0].pullback(&alg.gpd.t)?;
    Ok(check_invariant_closure(&alg.bundle, &v, &w, &f, cfg))
}

/// Requested brackets of fields, or every pair, at one seeded point.
fn field_table(set: &FieldSet, seed: u64) -> tancat::Result<Vec<BracketRow>> {
    let Some(first) = set.fields.first() else {
        return Ok(Vec::new());
    };
    let x = first.on.sample(&mut substream(seed, "bracket_table"))?;
    let requests = requests_or_pairs(&set.brackets, set.fields.iter().map(|v| v.name.as_str()));
    bracket_rows(
        &requests,
        &set.fields,
        |v: &VectorField| v.name.as_str(),
        lie_bracket,
        |v, x| v.fiber_at(x),
        &x,
    )
}

fn requests_or_pairs<'a>(
    requested: &[BracketRequest],
    names: impl Iterator<Item = &'a str>,
) -> Vec<BracketRequest> {
    if requested.is_empty() {
        pairwise(&names.collect::<Vec<_>>())
    } else {
        requested.to_vec()
    }
}

/// Exit code of a finished report.
pub fn exit_code(report: &Report) -> i32 {
    if report.passed() {
        0
    } else {
        1
    }
}
