//! Operator norms of the weighted maximal function and of sparse averaging
//! operators between weighted spaces.
//!
//! Everything here estimates `||T_sigma : L^p(sigma) -> L^p(w)||` where
//! `T_sigma f = T(sigma f)` and T is either the dyadic maximal function or a
//! sparse operator. Three routes are used, each labeled by [`NormKind`]:
//! indicator testing constants (computed exactly, supremum over cubes), an
//! exact spectral norm at p = 2 via a weight-conjugated dense matrix, and a
//! monotone power iteration for general p that only ever reports certified
//! lower bounds.
//!
//! The domain is the quotient by sigma-null sets: inputs are treated as zero
//! on leaves with zero sigma-density, which all routines here enforce by
//! construction.

use crate::cube::{cubes_up_to, DyadicCube};
use crate::eig::largest_eigenpair;
use crate::epsilon::check_exponent;
use crate::maximal::{entropy, maximal_of, weighted_power_integral};
use crate::rng::{derive_seed, Rng, GOLDEN};
use crate::sparse::{apply_sparse, SparseCollection};
use crate::weight::{weighted_average, DyadicWeight, LeafFunction};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

/// How a norm value was obtained, and how to read it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "kebab-case")
)]
pub enum NormKind {
    /// The stated quantity is computed exactly (spectral norm, testing
    /// supremum, or a structurally zero operator).
    Exact,
    /// A valid lower bound with no convergence certificate.
    LowerBound,
    /// Iteration reached its fixed point and all restarts agreed.
    ConvergedIterate,
}

/// A norm value together with the input that (nearly) attains it.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormEstimate {
    pub value: f64,
    pub kind: NormKind,
    /// Extremal or near-extremal input; its Rayleigh ratio reproduces
    /// `value` within `residual`.
    pub witness: LeafFunction,
    pub iterations: u32,
    pub residual: f64,
}

fn zero_estimate(dimension: u32, depth: u32) -> Result<NormEstimate> {
    Ok(NormEstimate {
        value: 0.0,
        kind: NormKind::Exact,
        witness: LeafFunction::zeros(dimension, depth)?,
        iterations: 0,
        residual: 0.0,
    })
}

/// Knobs for the randomized norm estimators. All randomness flows from
/// `seed`, so equal params on equal inputs give bit-equal results.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default)
)]
pub struct IterationParams {
    /// Random restarts, on top of the two testing-witness starts.
    pub trials: u32,
    pub max_iterations: u32,
    /// Relative change of the Rayleigh ratio that counts as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for IterationParams {
    fn default() -> Self {
        IterationParams {
            trials: 8,
            max_iterations: 10_000,
            tolerance: 1e-8,
            seed: GOLDEN,
        }
    }
}

impl IterationParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidBudget);
        }
        Ok(())
    }
}

/// Indicator testing constants of a sparse operator, both directions.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestingConstants {
    /// sup over Q0 in S of `(int_{Q0} (sum_{Q in S, Q ⊆ Q0} <sigma>_Q 1_Q)^p dw
    /// / sigma(Q0))^{1/p}`.
    pub forward: f64,
    /// Same with (sigma, w, p) replaced by (w, sigma, p').
    pub dual: f64,
    pub forward_witness: Option<DyadicCube>,
    pub dual_witness: Option<DyadicCube>,
}

/// Carleson embedding constant of a collection, via indicator testing plus
/// a randomized general-input lower bound.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CarlesonReport {
    /// max over Q0 in S of `sum_{Q in S, Q ⊆ Q0} sigma(Q)/rho(Q) / sigma(Q0)`.
    pub testing: f64,
    pub witness: Option<DyadicCube>,
    /// Best value of `sum_Q (<f>^sigma_Q)^p sigma(Q)/rho(Q) / ||f||^p` over
    /// seeded random probes f; may exceed `testing`.
    pub probe_lower_bound: f64,
}

fn check_pair(sigma: &DyadicWeight, w: &DyadicWeight) -> Result<()> {
    if sigma.dimension() != w.dimension() || sigma.depth() != w.depth() {
        return Err(Error::ShapeMismatch {
            expected: (sigma.dimension(), sigma.depth()),
            got: (w.dimension(), w.depth()),
        });
    }
    Ok(())
}

fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `||M(sigma f)||_{L^p(w)} / ||f||_{L^p(sigma)}` for a sigma-a.e.
/// nonnegative f; zero when f vanishes sigma-a.e.
pub fn maximal_rayleigh(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    f: &LeafFunction,
) -> Result<f64> {
    check_exponent(p)?;
    check_pair(sigma, w)?;
    f.check_shape(sigma.dimension(), sigma.depth())?;
    let den = f.lp_norm(sigma, p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let g = LeafFunction::from_tree_order(
        sigma.dimension(),
        sigma.depth(),
        sigma
            .densities()
            .iter()
            .zip(f.values())
            .map(|(d, v)| d * v)
            .collect(),
    );
    let m = maximal_of(&g, &sigma.root())?;
    Ok(m.lp_norm(w, p)? / den)
}

/// Exact indicator testing constant of the maximal operator,
/// `sup_{Q0} (int_{Q0} M(sigma 1_{Q0})^p dw / sigma(Q0))^{1/p}`, and the
/// first cube attaining it. Massless cubes do not compete.
pub fn maximal_testing(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
) -> Result<(f64, Option<DyadicCube>)> {
    check_exponent(p)?;
    check_pair(sigma, w)?;
    let mut best = 0.0f64;
    let mut witness = None;
    for q0 in cubes_up_to(sigma.dimension(), sigma.depth())? {
        let mass = sigma.mass(&q0)?;
        if mass == 0.0 {
            continue;
        }
        let tp = weighted_power_integral(sigma, w, p, &q0) / mass;
        if tp > best {
            best = tp;
            witness = Some(q0);
        }
    }
    Ok((libm::pow(best, 1.0 / p), witness))
}

const MAXIMAL_PROBES: u32 = 32;

/// Norm estimate for `M_sigma : L^p(sigma) -> L^p(w)`: the maximum of the
/// exact testing constant and of seeded random-probe Rayleigh ratios. Kind
/// `exact` means the testing supremum won (the value is exactly that
/// supremum, itself a lower bound for the norm); `lower-bound` means a
/// probe beat it.
pub fn maximal_norm(sigma: &DyadicWeight, w: &DyadicWeight, p: f64) -> Result<NormEstimate> {
    let (testing, testing_witness) = maximal_testing(sigma, w, p)?;
    let mut rng = Rng::new(derive_seed(GOLDEN, 0x004d_4158));
    let mut probe_best = 0.0f64;
    let mut probe_witness: Option<LeafFunction> = None;
    for _ in 0..MAXIMAL_PROBES {
        let values: Vec<f64> = sigma
            .densities()
            .iter()
            .map(|&d| if d > 0.0 { rng.lognormal(1.0) } else { 0.0 })
            .collect();
        let f = LeafFunction::from_tree_order(sigma.dimension(), sigma.depth(), values);
        let r = maximal_rayleigh(sigma, w, p, &f)?;
        if r > probe_best {
            probe_best = r;
            probe_witness = Some(f);
        }
    }
    if probe_best > testing {
        return Ok(NormEstimate {
            value: probe_best,
            kind: NormKind::LowerBound,
            witness: probe_witness.expect("positive probe recorded"),
            iterations: MAXIMAL_PROBES,
            residual: 0.0,
        });
    }
    let Some(q0) = testing_witness else {
        return zero_estimate(sigma.dimension(), sigma.depth());
    };
    let witness = LeafFunction::indicator(sigma.dimension(), sigma.depth(), &q0)?;
    // The witness's global ratio can exceed the localized testing integral
    // (mass inside Q0 is visible from outside); report the gap honestly.
    let global = maximal_rayleigh(sigma, w, p, &witness)?;
    Ok(NormEstimate {
        value: testing,
        kind: NormKind::Exact,
        witness,
        iterations: MAXIMAL_PROBES,
        residual: (global - testing).abs(),
    })
}

/// `||S(sigma f)||_{L^p(w)} / ||f||_{L^p(sigma)}`; f may be signed. Zero
/// when f vanishes sigma-a.e.
pub fn sparse_rayleigh(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    f: &LeafFunction,
) -> Result<f64> {
    check_exponent(p)?;
    check_pair(sigma, w)?;
    f.check_shape(sigma.dimension(), sigma.depth())?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    let den = f.lp_norm(sigma, p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let g = LeafFunction::from_tree_order(
        sigma.dimension(),
        sigma.depth(),
        sigma
            .densities()
            .iter()
            .zip(f.values())
            .map(|(d, v)| d * v)
            .collect(),
    );
    let applied = apply_sparse(collection, &g)?;
    Ok(applied.lp_norm(w, p)? / den)
}

/// One direction of the testing supremum: localized sparse sums of `meas`
/// averages, integrated to the q-th power against `co` and normalized by
/// `meas(Q0)`.
fn one_sided_testing(
    collection: &SparseCollection,
    meas: &DyadicWeight,
    co: &DyadicWeight,
    q: f64,
) -> Result<(f64, Option<DyadicCube>)> {
    let depth = meas.depth();
    let lv = meas.leaf_volume();
    let mut best = 0.0f64;
    let mut witness = None;
    for q0 in collection.cubes() {
        let mass = meas.mass(q0)?;
        if mass == 0.0 {
            continue;
        }
        let span0 = q0.leaf_span(depth)?;
        let mut local = vec![0.0f64; span0.len()];
        for inner in collection.cubes() {
            if !q0.contains(inner) {
                continue;
            }
            let avg = meas.average(inner)?;
            if avg == 0.0 {
                continue;
            }
            let span = inner.leaf_span(depth)?;
            for slot in &mut local[span.start - span0.start..span.end - span0.start] {
                *slot += avg;
            }
        }
        let mut num = 0.0;
        for (i, &g) in local.iter().enumerate() {
            let d = co.densities()[span0.start + i];
            if g > 0.0 && d > 0.0 {
                num += libm::pow(g, q) * d;
            }
        }
        let tq = num * lv / mass;
        if tq > best {
            best = tq;
            witness = Some(*q0);
        }
    }
    Ok((libm::pow(best, 1.0 / q), witness))
}

/// Exact forward and dual testing constants of the sparse operator, by
/// enumerating Q0 over the collection.
pub fn sawyer_testing(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
) -> Result<TestingConstants> {
    check_exponent(p)?;
    check_pair(sigma, w)?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    let (forward, forward_witness) = one_sided_testing(collection, sigma, w, p)?;
    let (dual, dual_witness) = one_sided_testing(collection, w, sigma, conjugate_exponent(p))?;
    Ok(TestingConstants {
        forward,
        dual,
        forward_witness,
        dual_witness,
    })
}

/// Dense cap for the exact p = 2 route.
pub const DENSE_LIMIT: usize = 1024;

/// Exact `L^2(sigma) -> L^2(w)` norm of `f -> S(sigma f)`: the spectral
/// norm of the weight-conjugated matrix, restricted to leaves with positive
/// sigma (domain) and w (codomain) density.
pub fn sparse_norm_p2(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
) -> Result<NormEstimate> {
    check_pair(sigma, w)?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    let depth = sigma.depth();
    let lv = sigma.leaf_volume();
    if collection.is_empty() || sigma.is_zero() || w.is_zero() {
        return zero_estimate(sigma.dimension(), depth);
    }
    let n = sigma.leaf_count();
    let mut xi = vec![usize::MAX; n];
    let mut yi = vec![usize::MAX; n];
    let mut xs: Vec<usize> = Vec::new();
    let mut ys: Vec<usize> = Vec::new();
    for i in 0..n {
        if sigma.densities()[i] > 0.0 {
            xi[i] = xs.len();
            xs.push(i);
        }
        if w.densities()[i] > 0.0 {
            yi[i] = ys.len();
            ys.push(i);
        }
    }
    let (nx, ny) = (xs.len(), ys.len());
    if nx.max(ny) > DENSE_LIMIT {
        return Err(Error::TooLargeForExact {
            size: nx.max(ny),
            limit: DENSE_LIMIT,
        });
    }
    let a: Vec<f64> = xs.iter().map(|&i| libm::sqrt(sigma.densities()[i] * lv)).collect();
    let b: Vec<f64> = ys.iter().map(|&i| libm::sqrt(w.densities()[i] * lv)).collect();
    // B[y][x] = sum over members containing both of b_y a_x / |Q|.
    let mut bmat = vec![0.0f64; ny * nx];
    for q in collection.cubes() {
        let span = q.leaf_span(depth)?;
        let iv = 1.0 / q.volume();
        for y in span.clone() {
            if yi[y] == usize::MAX {
                continue;
            }
            let row = yi[y] * nx;
            let by = b[yi[y]] * iv;
            for x in span.clone() {
                if xi[x] != usize::MAX {
                    bmat[row + xi[x]] += by * a[xi[x]];
                }
            }
        }
    }
    let mut gram = vec![0.0f64; nx * nx];
    for y in 0..ny {
        let row = &bmat[y * nx..(y + 1) * nx];
        for i in 0..nx {
            let bi = row[i];
            if bi == 0.0 {
                continue;
            }
            for j in i..nx {
                gram[i * nx + j] += bi * row[j];
            }
        }
    }
    for i in 0..nx {
        for j in 0..i {
            gram[i * nx + j] = gram[j * nx + i];
        }
    }
    let (lambda, mut u) = largest_eigenpair(nx, &gram)?;
    let value = libm::sqrt(lambda.max(0.0));
    if u.iter().sum::<f64>() < 0.0 {
        for v in &mut u {
            *v = -*v;
        }
    }
    let mut fvals = vec![0.0f64; n];
    for (k, &i) in xs.iter().enumerate() {
        fvals[i] = u[k] / a[k];
    }
    let witness = LeafFunction::from_tree_order(sigma.dimension(), depth, fvals);
    let residual = (sparse_rayleigh(collection, sigma, w, 2.0, &witness)? - value).abs();
    Ok(NormEstimate {
        value,
        kind: NormKind::Exact,
        witness,
        iterations: 0,
        residual,
    })
}

/// The sparse operator conjugated into an unweighted `l^p -> l^p` map with
/// nonnegative entries: `B u = b .* sum_Q (1/|Q|) <a .* u>-block`, where
/// `a = (sigma v)^{1/p'}` on the domain side and `b = (w v)^{1/p}` on the
/// codomain side. Norms match: `|B u|_p = ||S(sigma f)||_{L^p(w)}` for
/// `u = f .* (sigma v)^{1/p}`.
struct Conjugated {
    n: usize,
    members: Vec<(usize, usize, f64)>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Conjugated {
    fn build(
        collection: &SparseCollection,
        sigma: &DyadicWeight,
        w: &DyadicWeight,
        p: f64,
    ) -> Result<Self> {
        let lv = sigma.leaf_volume();
        let pc = conjugate_exponent(p);
        let members = collection
            .cubes()
            .iter()
            .map(|q| {
                let span = q.leaf_span(sigma.depth())?;
                Ok((span.start, span.end, 1.0 / q.volume()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Conjugated {
            n: sigma.leaf_count(),
            members,
            a: sigma
                .densities()
                .iter()
                .map(|&d| libm::pow(d * lv, 1.0 / pc))
                .collect(),
            b: w
                .densities()
                .iter()
                .map(|&d| libm::pow(d * lv, 1.0 / p))
                .collect(),
        })
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(s, e, iv) in &self.members {
            let mut c = 0.0;
            for (a, uv) in self.a[s..e].iter().zip(&u[s..e]) {
                c += a * uv;
            }
            if c == 0.0 {
                continue;
            }
            let c = c * iv;
            for slot in &mut out[s..e] {
                *slot += c;
            }
        }
        for (slot, b) in out.iter_mut().zip(&self.b) {
            *slot *= b;
        }
    }

    fn apply_transpose(&self, z: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(s, e, iv) in &self.members {
            let mut c = 0.0;
            for (b, zv) in self.b[s..e].iter().zip(&z[s..e]) {
                c += b * zv;
            }
            if c == 0.0 {
                continue;
            }
            let c = c * iv;
            for slot in &mut out[s..e] {
                *slot += c;
            }
        }
        for (slot, a) in out.iter_mut().zip(&self.a) {
            *slot *= a;
        }
    }
}

fn lp(v: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for &x in v {
        if x != 0.0 {
            s += libm::pow(libm::fabs(x), p);
        }
    }
    libm::pow(s, 1.0 / p)
}

struct Run {
    ratio: f64,
    iterate: Vec<f64>,
    iterations: u32,
    last_change: f64,
    converged: bool,
}

/// Monotone ascent on the Rayleigh ratio of the conjugated nonnegative map:
/// alternate `z = B u`, `u = (B^T z^{p-1})^{1/(p-1)}`. The ratio never
/// decreases, so the final iterate certifies a lower bound.
fn ascend(conj: &Conjugated, mut u: Vec<f64>, p: f64, params: &IterationParams) -> Run {
    let mut z = vec![0.0f64; conj.n];
    let mut back = vec![0.0f64; conj.n];
    let nu = lp(&u, p);
    if nu == 0.0 {
        return Run {
            ratio: 0.0,
            iterate: u,
            iterations: 0,
            last_change: 0.0,
            converged: true,
        };
    }
    for v in &mut u {
        *v /= nu;
    }
    let mut ratio = 0.0f64;
    let mut change;
    let mut stable = 0u32;
    let mut iterations = 0u32;
    loop {
        conj.apply(&u, &mut z);
        let s = lp(&z, p);
        if s == 0.0 {
            return Run {
                ratio: 0.0,
                iterate: u,
                iterations,
                last_change: 0.0,
                converged: true,
            };
        }
        change = (s - ratio) / s;
        ratio = s;
        iterations += 1;
        if iterations > 1 && libm::fabs(change) <= params.tolerance {
            stable += 1;
            // Three quiet steps in a row, not one: the ratio ascends
            // monotonically but can plateau briefly on near-ties.
            if stable >= 3 {
                return Run {
                    ratio,
                    iterate: u,
                    iterations,
                    last_change: change,
                    converged: true,
                };
            }
        } else {
            stable = 0;
        }
        if iterations >= params.max_iterations {
            return Run {
                ratio,
                iterate: u,
                iterations,
                last_change: change,
                converged: false,
            };
        }
        let pm1 = p - 1.0;
        for v in &mut z {
            *v = libm::pow(*v, pm1);
        }
        conj.apply_transpose(&z, &mut back);
        let inv = 1.0 / pm1;
        for (uv, &bv) in u.iter_mut().zip(&back) {
            *uv = libm::pow(bv, inv);
        }
        let nu = lp(&u, p);
        if nu == 0.0 {
            return Run {
                ratio,
                iterate: u,
                iterations,
                last_change: change,
                converged: true,
            };
        }
        for v in &mut u {
            *v /= nu;
        }
    }
}

/// Lower-bound estimator for the `L^p(sigma) -> L^p(w)` sparse-operator
/// norm at general p. Starts from both testing witnesses (so the result is
/// never below max(forward, dual)) plus `params.trials` random nonnegative
/// starts; kind is `converged-iterate` only when every start converged and
/// all finals agree within tolerance.
pub fn sparse_norm_general(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    params: &IterationParams,
) -> Result<NormEstimate> {
    check_exponent(p)?;
    params.validate()?;
    check_pair(sigma, w)?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    let depth = sigma.depth();
    if collection.is_empty() || sigma.is_zero() || w.is_zero() {
        return zero_estimate(sigma.dimension(), depth);
    }
    let conj = Conjugated::build(collection, sigma, w, p)?;
    let lv = sigma.leaf_volume();
    let n = conj.n;
    let testing = sawyer_testing(collection, sigma, w, p)?;

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(q0) = testing.forward_witness {
        // Conjugated image of f = 1_{Q0}; its ratio already equals the
        // global indicator ratio >= forward testing value.
        let mut u = vec![0.0f64; n];
        for i in q0.leaf_span(depth)? {
            u[i] = libm::pow(sigma.densities()[i] * lv, 1.0 / p);
        }
        starts.push(u);
    }
    if let Some(q0) = testing.dual_witness {
        // Half-step transfer of the dual indicator z = 1_{Q0} (w v)^{1/p'}:
        // u = (B^T z)^{1/(p-1)} has ratio >= the dual Rayleigh ratio of z,
        // hence >= dual testing value.
        let mut z = vec![0.0f64; n];
        let pc = conjugate_exponent(p);
        for i in q0.leaf_span(depth)? {
            z[i] = libm::pow(w.densities()[i] * lv, 1.0 / pc);
        }
        let mut u = vec![0.0f64; n];
        conj.apply_transpose(&z, &mut u);
        let inv = 1.0 / (p - 1.0);
        for v in &mut u {
            *v = libm::pow(*v, inv);
        }
        if u.iter().any(|&v| v > 0.0) {
            starts.push(u);
        }
    }
    for trial in 0..params.trials {
        let mut rng = Rng::new(derive_seed(params.seed, trial as u64 + 1));
        starts.push(
            (0..n)
                .map(|i| if conj.a[i] > 0.0 { rng.uniform() } else { 0.0 })
                .collect(),
        );
    }
    if starts.is_empty() {
        // No sigma-mass on any member and no trials requested.
        return zero_estimate(sigma.dimension(), depth);
    }

    let mut best: Option<Run> = None;
    let mut worst_final = f64::INFINITY;
    let mut all_converged = true;
    for u0 in starts {
        let run = ascend(&conj, u0, p, params);
        all_converged &= run.converged;
        worst_final = worst_final.min(run.ratio);
        if best.as_ref().is_none_or(|b| run.ratio > b.ratio) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let value = best.ratio;
    if value == 0.0 {
        return zero_estimate(sigma.dimension(), depth);
    }
    let agree = (value - worst_final) <= params.tolerance * value;
    let mut fvals = vec![0.0f64; n];
    for (i, slot) in fvals.iter_mut().enumerate() {
        if conj.a[i] > 0.0 {
            *slot = best.iterate[i] / libm::pow(sigma.densities()[i] * lv, 1.0 / p);
        }
    }
    let witness = LeafFunction::from_tree_order(sigma.dimension(), depth, fvals);
    let replay = (sparse_rayleigh(collection, sigma, w, p, &witness)? - value).abs();
    Ok(NormEstimate {
        value,
        kind: if all_converged && agree {
            NormKind::ConvergedIterate
        } else {
            NormKind::LowerBound
        },
        witness,
        iterations: best.iterations,
        residual: libm::fabs(best.last_change).max(replay),
    })
}

const CARLESON_PROBES: u32 = 16;

/// Carleson embedding constant of the collection for sigma: indicator
/// testing value (exact) plus the best seeded general-probe value of
/// `sum_Q (<f>^sigma_Q)^p sigma(Q)/rho(Q) / ||f||_{L^p(sigma)}^p`.
pub fn carleson_constant(
    sigma: &DyadicWeight,
    collection: &SparseCollection,
    p: f64,
) -> Result<CarlesonReport> {
    check_exponent(p)?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    // sigma(Q)/rho(Q) per member, shared by both routes.
    let weights: Vec<f64> = collection
        .cubes()
        .iter()
        .map(|q| Ok(sigma.mass(q)? / entropy(sigma, q)?))
        .collect::<Result<Vec<_>>>()?;
    let mut testing = 0.0f64;
    let mut witness = None;
    for (i, q0) in collection.cubes().iter().enumerate() {
        let mass = sigma.mass(q0)?;
        if mass == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for (j, q) in collection.cubes().iter().enumerate() {
            if q0.contains(q) {
                sum += weights[j];
            }
        }
        let val = sum / mass;
        if val > testing {
            testing = val;
            witness = Some(collection.cubes()[i]);
        }
    }
    let mut probe_lower_bound = 0.0f64;
    let mut rng = Rng::new(derive_seed(GOLDEN, 0xCA7));
    for probe in 0..=CARLESON_PROBES {
        let f = if probe == 0 {
            LeafFunction::constant(sigma.dimension(), sigma.depth(), 1.0)?
        } else {
            LeafFunction::from_tree_order(
                sigma.dimension(),
                sigma.depth(),
                (0..sigma.leaf_count()).map(|_| rng.lognormal(1.0)).collect(),
            )
        };
        let den = f.lp_norm(sigma, p)?;
        if den == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for (j, q) in collection.cubes().iter().enumerate() {
            if weights[j] > 0.0 {
                sum += libm::pow(weighted_average(&f, sigma, q)?, p) * weights[j];
            }
        }
        let val = sum / libm::pow(den, p);
        probe_lower_bound = probe_lower_bound.max(val);
    }
    Ok(CarlesonReport {
        testing,
        witness,
        probe_lower_bound,
    })
}
