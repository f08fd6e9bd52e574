//! Embedded fixture suite: frozen values for every module's worked
//! examples, re-checked against the live implementation.

use crate::config::parse_target;
use crate::LabError;
use entropylab_core::{
    apply_sparse, build_stopping_tree, carleson_constant, entropy, generate_weight, joint_bump,
    maximal_domination_check, maximal_norm, pairing, run_experiment, sparse_norm_p2, DyadicCube,
    DyadicWeight, EpsilonFn, Experiment, IterationParams, LeafFunction, SparseCollection,
    WeightSpec,
};
use serde::Deserialize;
use std::path::Path;

pub const EMBEDDED_FIXTURES: &str = include_str!("../fixtures.json");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub fixtures: Vec<Fixture>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub expected: f64,
    /// Absolute tolerance; 0 demands bit-exact reproduction.
    pub tol: f64,
    pub check: Check,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Check {
    /// Entropy over the root of a unit-mass spike at leaf 0.
    EntropySpike { depth: u32 },
    EpsilonJointEval { delta: f64, t: f64 },
    EpsilonSeparatedEval { p: f64, delta: f64, t: f64 },
    /// Closed-form mass of the bump normalization up to `exp(log_t)`.
    EpsilonNormalization { delta: f64, log_t: f64 },
    /// Joint bump of (spike, constant) at d=1, L=2, p=2, delta=1.
    JointBumpSpike,
    /// Member count of the stopping tree of the L=3 spike.
    StoppingMembers,
    /// Worst maximal-to-stopping-average ratio for the L=3 spike.
    DominationSpike,
    /// Sparse operator applied to the L=3 spike over its stopping tree,
    /// evaluated at leaf 0.
    ApplySparseSpike,
    /// Two-member pairing of the L=3 spike against unit data.
    PairingHand,
    /// Dense-route norm of the root-only collection on unit weights.
    UnitSparseNorm,
    CarlesonRoot,
    CarlesonSpike,
    /// Generated spike density at leaf 0 (d=1, L=3, mass 1).
    GenSpike,
    /// Checker ratio on unit weights at d=1, depth 3, p=2, delta=1.
    VerifyUnit { target: String },
    /// Maximal-operator estimate on unit weights at p=2, probe route
    /// included.
    MaximalNormUnit,
}

fn spike(depth: u32) -> Result<DyadicWeight, LabError> {
    Ok(generate_weight(&WeightSpec::spike(1, depth, 0, 1.0))?)
}

fn root_collection(dimension: u32) -> Result<SparseCollection, LabError> {
    Ok(SparseCollection::new(
        dimension,
        vec![DyadicCube::root(dimension)?],
    )?)
}

pub fn evaluate(check: &Check) -> Result<f64, LabError> {
    match check {
        Check::EntropySpike { depth } => {
            let sigma = spike(*depth)?;
            Ok(entropy(&sigma, &sigma.root())?)
        }
        Check::EpsilonJointEval { delta, t } => Ok(EpsilonFn::joint(*delta)?.eval(*t)?),
        Check::EpsilonSeparatedEval { p, delta, t } => {
            Ok(EpsilonFn::separated(*p, *delta)?.eval(*t)?)
        }
        Check::EpsilonNormalization { delta, log_t } => {
            Ok(EpsilonFn::joint(*delta)?.normalization_partial(log_t.exp())?)
        }
        Check::JointBumpSpike => {
            let sigma = DyadicWeight::from_row_major(1, 2, &[4.0, 0.0, 0.0, 0.0])?;
            let w = DyadicWeight::constant(1, 2)?;
            Ok(joint_bump(&sigma, &w, 2.0, &EpsilonFn::joint(1.0)?)?.value)
        }
        Check::StoppingMembers => {
            let sigma = spike(3)?;
            Ok(build_stopping_tree(&sigma, &sigma.root())?.len() as f64)
        }
        Check::DominationSpike => {
            let sigma = spike(3)?;
            Ok(maximal_domination_check(&sigma, &sigma.root())?.max_ratio)
        }
        Check::ApplySparseSpike => {
            let sigma = spike(3)?;
            let collection = build_stopping_tree(&sigma, &sigma.root())?.collection()?;
            let f = LeafFunction::from_row_major(1, 3, &sigma.to_row_major())?;
            Ok(apply_sparse(&collection, &f)?.values()[0])
        }
        Check::PairingHand => {
            let sigma = spike(3)?;
            let w = DyadicWeight::constant(1, 3)?;
            let ones = LeafFunction::constant(1, 3, 1.0)?;
            let members = vec![DyadicCube::root(1)?, DyadicCube::new(1, 3, &[0])?];
            let collection = SparseCollection::new(1, members)?;
            Ok(pairing(&collection, &sigma, &w, &ones, &ones)?)
        }
        Check::UnitSparseNorm => {
            let one = DyadicWeight::constant(1, 3)?;
            Ok(sparse_norm_p2(&root_collection(1)?, &one, &one)?.value)
        }
        Check::CarlesonRoot => {
            let one = DyadicWeight::constant(1, 2)?;
            Ok(carleson_constant(&one, &root_collection(1)?, 2.0)?.testing)
        }
        Check::CarlesonSpike => {
            let sigma = DyadicWeight::from_row_major(1, 2, &[4.0, 0.0, 0.0, 0.0])?;
            Ok(carleson_constant(&sigma, &root_collection(1)?, 2.0)?.testing)
        }
        Check::GenSpike => Ok(spike(3)?.to_row_major()[0]),
        Check::VerifyUnit { target } => {
            let one = WeightSpec::constant(1, 3);
            let experiment = Experiment {
                kind: parse_target(target)?,
                sigma: one.clone(),
                w: one,
                p: 2.0,
                delta: 1.0,
                sparse: None,
                q0: None,
            };
            Ok(run_experiment(&experiment, &IterationParams::default())?.ratio)
        }
        Check::MaximalNormUnit => {
            let one = DyadicWeight::constant(1, 3)?;
            Ok(maximal_norm(&one, &one, 2.0)?.value)
        }
    }
}

#[derive(Debug)]
pub struct FixtureResult {
    pub name: String,
    pub expected: f64,
    pub got: Result<f64, String>,
    pub pass: bool,
}

impl FixtureResult {
    pub fn line(&self) -> String {
        match (&self.got, self.pass) {
            (Ok(_), true) => format!("ok   {}", self.name),
            (Ok(got), false) => format!(
                "FAIL {}: expected {:e}, got {:e} (delta {:e})",
                self.name,
                self.expected,
                got,
                got - self.expected
            ),
            (Err(e), _) => format!("FAIL {}: error: {e}", self.name),
        }
    }
}

/// Runs every fixture, fanning out across `threads` workers; result order
/// follows the fixture file regardless of thread count.
pub fn run_fixtures(file: &FixtureFile, threads: usize) -> Vec<FixtureResult> {
    let n = file.fixtures.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = threads.clamp(1, n);
    let chunk = n.div_ceil(workers);
    let mut results: Vec<Option<FixtureResult>> = Vec::new();
    results.resize_with(n, || None);
    std::thread::scope(|scope| {
        for (fixtures, slots) in file
            .fixtures
            .chunks(chunk)
            .zip(results.chunks_mut(chunk))
        {
            scope.spawn(move || {
                for (fixture, slot) in fixtures.iter().zip(slots) {
                    let got = evaluate(&fixture.check).map_err(|e| e.to_string());
                    let pass = got
                        .as_ref()
                        .is_ok_and(|g| (g - fixture.expected).abs() <= fixture.tol);
                    *slot = Some(FixtureResult {
                        name: fixture.name.clone(),
                        expected: fixture.expected,
                        got,
                        pass,
                    });
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("all slots filled")).collect()
}

/// Loads fixtures from `path`, or the embedded set when absent. Load
/// failures name the file; they surface as exit 1, not a config error.
pub fn load_fixtures(path: Option<&Path>) -> Result<FixtureFile, String> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("fixture file {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("fixture file {}: {e}", p.display()))
        }
        None => serde_json::from_str(EMBEDDED_FIXTURES)
            .map_err(|e| format!("embedded fixtures: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_fixtures_parse_and_pass_single_threaded() {
        let file = load_fixtures(None).unwrap();
        assert!(file.fixtures.len() >= 15);
        for result in run_fixtures(&file, 1) {
            assert!(result.pass, "{}", result.line());
        }
    }

    #[test]
    fn thread_count_does_not_change_results_or_order() {
        let file = load_fixtures(None).unwrap();
        let one = run_fixtures(&file, 1);
        let many = run_fixtures(&file, 4);
        assert_eq!(one.len(), many.len());
        for (a, b) in one.iter().zip(&many) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.got.as_ref().ok(), b.got.as_ref().ok());
        }
    }

    #[test]
    fn mismatched_fixture_fails_with_delta() {
        let file: FixtureFile = serde_json::from_str(
            r#"{"fixtures": [{
                "name": "wrong",
                "expected": 3.0,
                "tol": 0.0,
                "check": {"kind": "entropy-spike", "depth": 2}
            }]}"#,
        )
        .unwrap();
        let results = run_fixtures(&file, 1);
        assert!(!results[0].pass);
        assert!(results[0].line().contains("delta"));
    }
}
