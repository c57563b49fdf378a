//! Seeded check runner and the JSON report schema shared by every suite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// The diagram or law this row verifies.
    pub diagram: String,
    pub samples: usize,
    /// `None` when no finite residual was obtained.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub inputs: Vec<String>,
    pub point: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bracket_table: Vec<BracketRow>,
}

impl Report {
    pub fn new(
        suite: impl Into<String>,
        config: &SuiteConfig,
        mut checks: Vec<CheckResult>,
    ) -> Report {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        Report {
            suite: suite.into(),
            seed: config.seed,
            samples: config.samples,
            checks,
            bracket_table: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Largest residual over all checks, treating missing residuals as infinite.
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_residual.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Appends another report's rows under `prefix.`.
    pub fn absorb(&mut self, prefix: &str, other: Report) {
        self.checks.extend(other.checks.into_iter().map(|mut c| {
            c.name = format!("{prefix}.{}", c.name);
            c
        }));
        self.checks.sort_by(|a, b| a.name.cmp(&b.name));
        self.bracket_table.extend(other.bracket_table);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Deliberate corruptions used to show that suites detect broken structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    /// `tau` that adds `u1 * u2` to the `{1,2}` block instead of fixing it.
    CorruptTau,
    /// Groupoid multiplication with its arguments swapped.
    TransposeM,
    /// Groupoid unit moved off the identity arrow.
    DropUnit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub samples: usize,
    /// Replaces every check's default tolerance when set.
    pub tolerance: Option<f64>,
    /// Chart dimensions cycle through `1..=max_dim`.
    pub max_dim: usize,
    pub mutation: Option<Mutation>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 7,
            samples: 500,
            tolerance: None,
            max_dim: 3,
            mutation: None,
        }
    }
}

impl SuiteConfig {
    pub fn with_samples(&self, samples: usize) -> SuiteConfig {
        SuiteConfig {
            samples,
            ..self.clone()
        }
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

/// One named check: a per-sample residual closure and its default tolerance.
pub struct Check<'a> {
    pub name: String,
    pub diagram: &'static str,
    pub tolerance: f64,
    pub samples: Option<usize>,
    #[allow(clippy::type_complexity)]
    pub sample: Box<dyn Fn(&mut Rng, usize) -> Result<f64> + Send + Sync + 'a>,
}

impl<'a> Check<'a> {
    pub fn new(
        name: impl Into<String>,
        diagram: &'static str,
        tolerance: f64,
        sample: impl Fn(&mut Rng, usize) -> Result<f64> + Send + Sync + 'a,
    ) -> Check<'a> {
        Check {
            name: name.into(),
            diagram,
            tolerance,
            samples: None,
            sample: Box::new(sample),
        }
    }

    /// Overrides the configured sample count (for checks that are exhaustive
    /// over a fixed set).
    pub fn samples(mut self, n: usize) -> Check<'a> {
        self.samples = Some(n);
        self
    }
}

/// Independent RNG for `(seed, name)`; stable across runs and platforms.
pub fn substream(seed: u64, name: &str) -> Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    Rng::seed_from_u64(splitmix(seed ^ h))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs checks concurrently; each check samples sequentially from its own
/// substream, so results do not depend on scheduling.
pub fn run_checks(config: &SuiteConfig, checks: Vec<Check<'_>>) -> Vec<CheckResult> {
    checks
        .into_par_iter()
        .map(|check| {
            let mut rng = substream(config.seed, &check.name);
            let samples = check.samples.unwrap_or(config.samples);
            let mut max: f64 = 0.0;
            let mut error = None;
            for i in 0..samples {
                match (check.sample)(&mut rng, i) {
                    Ok(r) if r.is_nan() => max = f64::INFINITY,
                    Ok(r) => max = max.max(r),
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            let tolerance = config.tol(check.tolerance);
            let max_residual = (error.is_none() && max.is_finite()).then_some(max);
            CheckResult {
                name: check.name,
                diagram: check.diagram.to_string(),
                samples,
                pass: max_residual.is_some_and(|m| m < tolerance),
                max_residual,
                tolerance,
                error,
            }
        })
        .collect()
}

/// A failed row that never ran, e.g. an unmet precondition.
pub fn failed_row(
    name: impl Into<String>,
    diagram: &'static str,
    tolerance: f64,
    why: String,
) -> CheckResult {
    CheckResult {
        name: name.into(),
        diagram: diagram.to_string(),
        samples: 0,
        max_residual: None,
        tolerance,
        pass: false,
        error: Some(why),
    }
}
