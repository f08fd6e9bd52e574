//! Acceptance gates, one test per criterion. Each test prints as a single
//! pass/fail line in the harness output; failures name the first offending
//! instance. The regression ceilings near the top are frozen from the output
//! of `calibration_print` (run it with `--ignored --nocapture` to recompute).

use entropylab_core::rng::{derive_seed, Rng, GOLDEN};
use entropylab_core::{
    apply_sparse, build_stopping_tree, canonical_suite, carleson_constant,
    cube::cubes_up_to, entropy, generate_weight, local_maximal, maximal_domination_check,
    maximal_norm, norm_agreement_suite, run_experiment, sandwich_suite, sawyer_testing,
    sparse_norm_general, sparse_norm_p2, verify_ap_ainfty_bound, verify_joint_bump_sum_bound,
    verify_maximal_bound, verify_separated_bump_bound, DyadicCube, DyadicWeight, EpsilonFn,
    Experiment, ExperimentKind, IterationParams, LeafFunction, SparseSpec, WeightSpec,
    STOPPING_FACTOR,
};
use std::time::Instant;

// Frozen at 1.1x the suite maxima printed by `calibration_print`.
const MAXIMAL_RATIO_CEILING: f64 = 1.163942711481774;
const SEPARATED_RATIO_CEILING: f64 = 1.0996856202654863;
const JOINT_SUM_RATIO_CEILING: f64 = 0.5547990577304948;
const AP_AINFTY_RATIO_CEILING: f64 = 0.9496780014327801;
const SANDWICH_CEILING: f64 = 0.7037493756855954;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn params() -> IterationParams {
    IterationParams::default()
}

fn all_kinds() -> [ExperimentKind; 4] {
    [
        ExperimentKind::MaximalBound,
        ExperimentKind::SeparatedBumpBound,
        ExperimentKind::JointBumpSumBound,
        ExperimentKind::ApAinftyBound,
    ]
}

/// Lognormal densities with a sprinkling of dead leaves, never all dead.
fn random_weight(rng: &mut Rng, dimension: u32, depth: u32) -> DyadicWeight {
    let n = 1usize << (dimension * depth);
    loop {
        let densities: Vec<f64> = (0..n)
            .map(|_| {
                if rng.uniform() < 0.1 {
                    0.0
                } else {
                    rng.lognormal(1.0)
                }
            })
            .collect();
        if densities.iter().any(|&d| d > 0.0) {
            return DyadicWeight::from_row_major(dimension, depth, &densities).unwrap();
        }
    }
}

fn spike_weight(dimension: u32, depth: u32, leaf: usize) -> DyadicWeight {
    let n = 1usize << (dimension * depth);
    let mut densities = vec![0.0f64; n];
    densities[leaf] = 1.0;
    DyadicWeight::from_row_major(dimension, depth, &densities).unwrap()
}

/// Per-leaf supremum of subcube averages, by direct enumeration of every
/// dyadic cube inside `cube`. Tree order, zeros outside `cube`.
fn oracle_maximal(sigma: &DyadicWeight, cube: &DyadicCube) -> Vec<f64> {
    let depth = sigma.depth();
    let base = cube.leaf_span(depth).unwrap();
    let mut out = vec![0.0f64; sigma.leaf_count()];
    for r in cubes_up_to(sigma.dimension(), depth).unwrap() {
        let span = r.leaf_span(depth).unwrap();
        if span.start < base.start || span.end > base.end {
            continue;
        }
        let avg = sigma.mass(&r).unwrap() / r.volume();
        for slot in &mut out[span] {
            if avg > *slot {
                *slot = avg;
            }
        }
    }
    out
}

fn assert_maximal_matches(sigma: &DyadicWeight, cube: &DyadicCube, label: &str) {
    let fast = local_maximal(sigma, cube).unwrap();
    let slow = oracle_maximal(sigma, cube);
    for (i, (&a, &b)) in fast.values().iter().zip(&slow).enumerate() {
        assert!(
            close(a, b, 1e-12),
            "{label}: leaf {i} fast {a:e} oracle {b:e}"
        );
    }
}

#[test]
fn criterion_01_maximal_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut rng = Rng::new(derive_seed(GOLDEN, 0xACC1));
    for (dimension, max_depth) in [(1u32, 6u32), (2, 4)] {
        for depth in 1..=max_depth {
            for leaf in 0..1usize << (dimension * depth) {
                let sigma = spike_weight(dimension, depth, leaf);
                let root = sigma.root();
                assert_maximal_matches(&sigma, &root, "spike at root");
                let child = root.children().next().unwrap();
                assert_maximal_matches(&sigma, &child, "spike at child");
            }
        }
        for i in 0..100 {
            let sigma = random_weight(&mut rng, dimension, max_depth);
            let root = sigma.root();
            assert_maximal_matches(&sigma, &root, &format!("random {i} at root"));
            let child = root.children().nth(dimension as usize).unwrap();
            assert_maximal_matches(&sigma, &child, &format!("random {i} at child"));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "oracle sweep took {elapsed:.2}s");
}

#[test]
fn criterion_02_entropy_fixtures_and_lower_bound() {
    let two = spike_weight(1, 2, 0);
    assert_eq!(entropy(&two, &two.root()).unwrap(), 2.0);
    let half = spike_weight(1, 3, 0);
    assert_eq!(entropy(&half, &half.root()).unwrap(), 2.5);

    let mut rng = Rng::new(derive_seed(GOLDEN, 0xACC2));
    let cubes = cubes_up_to(1, 4).unwrap();
    for i in 0..10_000 {
        let sigma = random_weight(&mut rng, 1, 4);
        for q in &cubes {
            let rho = entropy(&sigma, q).unwrap();
            assert!(rho.is_finite() && rho >= 1.0, "instance {i}: rho {rho}");
            if sigma.mass(q).unwrap() == 0.0 {
                assert_eq!(rho, 1.0);
            }
        }
    }
}

/// Composite Simpson on s = ln t over [0, L], so the integrand is the smooth
/// profile `eps(e^s)^(-power) e^s` with no endpoint singularity.
fn simpson_normalization(eps: &EpsilonFn, log_upper: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = log_upper / intervals as f64;
    let g = |s: f64| {
        let t = s.exp();
        eps.normalization_integrand(t).unwrap() * t
    };
    let mut sum = g(0.0) + g(log_upper);
    for k in 1..intervals {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * g(k as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn criterion_03_envelope_normalization_quadrature() {
    let log_upper = 40.0f64;
    let t_upper = log_upper.exp();
    let mut flavors = Vec::new();
    for delta in [0.5, 1.0, 2.0] {
        flavors.push(EpsilonFn::joint(delta).unwrap());
    }
    for p in [1.5, 2.0, 3.0] {
        for delta in [0.5, 1.0] {
            flavors.push(EpsilonFn::separated(p, delta).unwrap());
        }
    }
    for eps in flavors {
        let quad = simpson_normalization(&eps, log_upper, 16_384);
        let closed = 1.0 - (1.0 + log_upper).powf(-eps.delta());
        assert!(
            (quad - closed).abs() <= 1e-6,
            "{eps:?}: quadrature {quad:.12} closed form {closed:.12}"
        );
        let partial = eps.normalization_partial(t_upper).unwrap();
        assert!((quad - partial).abs() <= 1e-6, "{eps:?}: partial {partial:.12}");
    }
}

#[test]
fn criterion_04_stopping_trees_are_quarter_sparse() {
    let mut rng = Rng::new(derive_seed(GOLDEN, 0xACC4));
    for i in 0..1000 {
        let depth = 4 + (i % 5) as u32;
        let sigma = random_weight(&mut rng, 1, depth);
        let root = sigma.root();
        let tree = build_stopping_tree(&sigma, &root).unwrap();
        let check = tree.collection().unwrap().sparsity();
        assert!(check.is_sparse, "instance {i}: not sparse");
        assert!(
            check.worst_ratio <= 0.25,
            "instance {i}: worst ratio {}",
            check.worst_ratio
        );
        let mut seen = vec![false; sigma.leaf_count()];
        let mut measure = 0.0;
        for idx in 0..tree.len() as u32 {
            for leaf in tree.exclusive_leaves(idx) {
                assert!(!seen[leaf], "instance {i}: leaf {leaf} owned twice");
                seen[leaf] = true;
            }
            measure += tree.exclusive_measure(idx);
        }
        assert!(seen.iter().all(|&s| s), "instance {i}: leaf unowned");
        assert_eq!(measure, root.volume(), "instance {i}");
    }
}

#[test]
fn criterion_05_stopping_averages_dominate_maximal() {
    let bound = STOPPING_FACTOR;
    for depth in 1..=6u32 {
        for leaf in 0..1usize << depth {
            let sigma = spike_weight(1, depth, leaf);
            let report = maximal_domination_check(&sigma, &sigma.root()).unwrap();
            assert!(
                report.max_ratio <= bound + 1e-12,
                "spike depth {depth} leaf {leaf}: ratio {}",
                report.max_ratio
            );
        }
    }
    let mut rng = Rng::new(derive_seed(GOLDEN, 0xACC5));
    for i in 0..1000 {
        let sigma = random_weight(&mut rng, 1, 8);
        let report = maximal_domination_check(&sigma, &sigma.root()).unwrap();
        assert!(
            report.max_ratio <= bound + 1e-12,
            "instance {i}: ratio {}",
            report.max_ratio
        );
    }
}

fn materialize(exp: &Experiment) -> (DyadicWeight, DyadicWeight) {
    (
        generate_weight(&exp.sigma).unwrap(),
        generate_weight(&exp.w).unwrap(),
    )
}

#[test]
fn criterion_06_norm_routes_agree_at_p2() {
    let start = Instant::now();
    for (i, exp) in norm_agreement_suite().iter().enumerate() {
        let (sigma, w) = materialize(exp);
        let collection = build_stopping_tree(&sigma, &sigma.root())
            .unwrap()
            .collection()
            .unwrap();
        let dense = sparse_norm_p2(&collection, &sigma, &w).unwrap();
        let iterated = sparse_norm_general(&collection, &sigma, &w, 2.0, &params()).unwrap();
        assert!(
            close(dense.value, iterated.value, 1e-6),
            "instance {i}: dense {:.12e} iterated {:.12e}",
            dense.value,
            iterated.value
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "agreement sweep took {elapsed:.2}s");
}

#[test]
fn criterion_07_norm_testing_sandwich() {
    for (i, exp) in sandwich_suite().iter().enumerate() {
        let (sigma, w) = materialize(exp);
        let collection = build_stopping_tree(&sigma, &sigma.root())
            .unwrap()
            .collection()
            .unwrap();
        let testing = sawyer_testing(&collection, &sigma, &w, exp.p).unwrap();
        let norm = sparse_norm_general(&collection, &sigma, &w, exp.p, &params())
            .unwrap()
            .value;
        let lower = testing.forward.max(testing.dual);
        assert!(
            lower <= norm * (1.0 + 1e-9),
            "instance {i}: max testing {lower:.12e} exceeds norm {norm:.12e}"
        );
        let upper = SANDWICH_CEILING * (testing.forward + testing.dual);
        assert!(
            norm <= upper,
            "instance {i}: norm {norm:.12e} exceeds ceiling {upper:.12e}"
        );
    }
}

fn ratio_ceiling(kind: ExperimentKind) -> f64 {
    match kind {
        ExperimentKind::MaximalBound => MAXIMAL_RATIO_CEILING,
        ExperimentKind::SeparatedBumpBound => SEPARATED_RATIO_CEILING,
        ExperimentKind::JointBumpSumBound => JOINT_SUM_RATIO_CEILING,
        ExperimentKind::ApAinftyBound => AP_AINFTY_RATIO_CEILING,
    }
}

fn scaled_spec(weight: &DyadicWeight, factor: f64) -> WeightSpec {
    let densities: Vec<f64> = weight.to_row_major().iter().map(|d| d * factor).collect();
    WeightSpec::explicit(weight.dimension(), weight.depth(), densities)
}

fn run_scaled(exp: &Experiment, lambda: f64, mu: f64) -> f64 {
    let (sigma, w) = materialize(exp);
    let scaled = Experiment {
        sigma: scaled_spec(&sigma, lambda),
        w: scaled_spec(&w, mu),
        ..exp.clone()
    };
    run_experiment(&scaled, &params()).unwrap().ratio
}

#[test]
fn criterion_08_checker_ratio_regressions() {
    for kind in all_kinds() {
        let ceiling = ratio_ceiling(kind);
        let suite = canonical_suite(kind);
        for (i, exp) in suite.iter().enumerate() {
            let report = run_experiment(exp, &params()).unwrap();
            assert!(
                report.ratio.is_finite() && report.ratio <= ceiling,
                "{kind:?} instance {i}: ratio {:.12e} ceiling {ceiling:.12e}",
                report.ratio
            );
        }
        let base = run_experiment(&suite[0], &params()).unwrap().ratio;
        let scaled = run_scaled(&suite[0], 3.0, 0.7);
        assert!(
            close(base, scaled, 1e-10),
            "{kind:?}: ratio {base:.12e} moved to {scaled:.12e} under scaling"
        );
    }
}

#[test]
fn criterion_09_seeded_reruns_are_byte_identical() {
    let exp = entropylab_core::canonical_instance(ExperimentKind::MaximalBound, 0);
    let a = run_experiment(&exp, &params()).unwrap();
    let b = run_experiment(&exp, &params()).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );

    let bin = env!("CARGO_BIN_EXE_entropylab");
    let run = || {
        let out = std::process::Command::new(bin)
            .args([
                "verify",
                "--target",
                "max",
                "--p",
                "2",
                "--delta",
                "1",
                "--seed",
                "7",
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let envelope: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&envelope["body"]).unwrap()
    };
    assert_eq!(run(), run());
}

fn half_dead_weight(alive: &[f64], dead_from: usize) -> DyadicWeight {
    let mut densities = alive.to_vec();
    for d in &mut densities[dead_from..] {
        *d = 0.0;
    }
    DyadicWeight::from_row_major(1, 4, &densities).unwrap()
}

#[test]
fn criterion_10_degenerate_inputs_stay_finite() {
    let mut rng = Rng::new(derive_seed(GOLDEN, 0xACCA));
    let base: Vec<f64> = (0..16).map(|_| rng.lognormal(1.0)).collect();
    let sigma = half_dead_weight(&base, 8);
    let w = half_dead_weight(&base, 12);

    let dead = DyadicCube::new(1, 1, &[1]).unwrap();
    assert_eq!(entropy(&sigma, &dead).unwrap(), 1.0);
    assert_eq!(sigma.average(&dead).unwrap(), 0.0);
    assert!(local_maximal(&sigma, &sigma.root())
        .unwrap()
        .values()
        .iter()
        .all(|v| v.is_finite()));

    let sigma_spec = scaled_spec(&sigma, 1.0);
    let w_spec = scaled_spec(&w, 1.0);
    let sparse = SparseSpec::StoppingTree;
    let reports = [
        verify_maximal_bound(&sigma_spec, &w_spec, 2.0, 1.0, &params()).unwrap(),
        verify_separated_bump_bound(&sigma_spec, &w_spec, 2.0, 1.0, &sparse, &params()).unwrap(),
        verify_joint_bump_sum_bound(&sigma_spec, &w_spec, 2.0, 1.0, &sparse, &params()).unwrap(),
        verify_ap_ainfty_bound(&sigma_spec, &w_spec, 2.0, &sparse, &sigma.root(), &params()).unwrap(),
    ];
    for report in &reports {
        assert!(report.ratio.is_finite());
        for (name, value) in &report.constants {
            assert!(value.is_finite(), "constant {name} is {value}");
        }
        assert!(!serde_json::to_string(report).unwrap().contains("null"));
    }

    let collection = build_stopping_tree(&sigma, &sigma.root())
        .unwrap()
        .collection()
        .unwrap();
    assert!(maximal_norm(&sigma, &w, 2.0).unwrap().value.is_finite());
    assert!(sparse_norm_p2(&collection, &sigma, &w).unwrap().value.is_finite());
    assert!(sparse_norm_general(&collection, &sigma, &w, 1.5, &params())
        .unwrap()
        .value
        .is_finite());
    let carleson = carleson_constant(&sigma, &collection, 2.0).unwrap();
    assert!(carleson.testing.is_finite() && carleson.probe_lower_bound.is_finite());
    let applied = apply_sparse(&collection, &LeafFunction::constant(1, 4, 1.0).unwrap()).unwrap();
    assert!(applied.values().iter().all(|v| v.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("degenerate.json");
    std::fs::write(
        &config,
        serde_json::to_string(&serde_json::json!({
            "sigma": {"kind": "explicit", "densities": sigma.to_row_major()},
            "w": {"kind": "explicit", "densities": w.to_row_major()},
            "p": 2.0,
            "delta": 1.0,
            "depth": 4,
            "seed": 7
        }))
        .unwrap(),
    )
    .unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_entropylab"))
        .args(["norm", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let envelope: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!serde_json::to_string(&envelope["body"]).unwrap().contains("null"));
}

/// Prints the observed suite maxima behind the frozen ceilings. Ignored so
/// ordinary runs stay fast; rerun after any change to the estimators and
/// refreeze the constants at 1.1x the printed values.
#[test]
#[ignore = "calibration printer for the frozen regression ceilings"]
fn calibration_print() {
    for kind in all_kinds() {
        let start = Instant::now();
        let mut worst = 0.0f64;
        let mut worst_index = 0;
        for (i, exp) in canonical_suite(kind).iter().enumerate() {
            let ratio = run_experiment(exp, &params()).unwrap().ratio;
            if ratio > worst {
                worst = ratio;
                worst_index = i;
            }
        }
        println!(
            "{kind:?}: max ratio {worst:.16e} at instance {worst_index} ({:.1}s)",
            start.elapsed().as_secs_f64()
        );
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_index = 0;
    for (i, exp) in sandwich_suite().iter().enumerate() {
        let (sigma, w) = materialize(exp);
        let collection = build_stopping_tree(&sigma, &sigma.root())
            .unwrap()
            .collection()
            .unwrap();
        let testing = sawyer_testing(&collection, &sigma, &w, exp.p).unwrap();
        let norm = sparse_norm_general(&collection, &sigma, &w, exp.p, &params())
            .unwrap()
            .value;
        let ratio = norm / (testing.forward + testing.dual);
        if ratio > worst {
            worst = ratio;
            worst_index = i;
        }
    }
    println!(
        "sandwich: max norm/(forward+dual) {worst:.16e} at instance {worst_index} ({:.1}s)",
        start.elapsed().as_secs_f64()
    );
}
