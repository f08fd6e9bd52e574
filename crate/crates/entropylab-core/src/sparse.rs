//! Sparse collections, stopping trees and the operators built from them.
//!
//! A collection of dyadic cubes is sparse (with constant 1/2) when, for each
//! member Q, the union of members strictly inside Q covers at most half of Q.
//! Stopping trees are the canonical source of sparse collections here: the
//! children of a member S are the maximal cubes strictly inside S whose
//! sigma-average exceeds four times that of S (strictly; equality does not
//! stop). That threshold makes the child union cover at most a quarter of S,
//! so stopping trees pass the sparsity test with room to spare.

use crate::bump::CubeValue;
use crate::cube::DyadicCube;
use crate::epsilon::{check_exponent, EpsilonFn};
use crate::maximal::{entropy, local_maximal};
use crate::weight::{DyadicWeight, LeafFunction};
use crate::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

/// A finite set of dyadic cubes with the deepest common ancestor as root.
/// Members are kept sorted in witness order and deduplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCollection {
    dimension: u32,
    root: DyadicCube,
    cubes: Vec<DyadicCube>,
}

impl SparseCollection {
    pub fn new(dimension: u32, mut cubes: Vec<DyadicCube>) -> Result<Self> {
        let root = DyadicCube::root(dimension)?;
        for c in &cubes {
            if c.dimension() != dimension {
                return Err(Error::ShapeMismatch {
                    expected: (dimension, 0),
                    got: (c.dimension(), c.level()),
                });
            }
        }
        cubes.sort();
        cubes.dedup();
        let root = cubes
            .iter()
            .copied()
            .reduce(|a, b| a.common_ancestor(&b))
            .unwrap_or(root);
        Ok(SparseCollection {
            dimension,
            root,
            cubes,
        })
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// Deepest common ancestor of the members (the unit cube when empty).
    pub fn root(&self) -> DyadicCube {
        self.root
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains_cube(&self, cube: &DyadicCube) -> bool {
        self.cubes.binary_search(cube).is_ok()
    }

    pub(crate) fn check_tree(&self, dimension: u32, depth: u32) -> Result<()> {
        if self.dimension != dimension {
            return Err(Error::ShapeMismatch {
                expected: (dimension, depth),
                got: (self.dimension, 0),
            });
        }
        for c in &self.cubes {
            if c.level() > depth {
                return Err(Error::CubeBelowLeaves {
                    level: c.level(),
                    depth,
                });
            }
        }
        Ok(())
    }

    /// Sparsity certificate. The measure of each strict-subcube union is
    /// exact: members become half-open blocks at the deepest member level and
    /// the union is measured by interval merging, so the ratio against |Q| is
    /// an exact dyadic rational.
    pub fn sparsity(&self) -> SparsityCheck {
        let grid = self.cubes.iter().map(|c| c.level()).max().unwrap_or(0);
        let spans: Vec<(usize, usize, u32)> = self
            .cubes
            .iter()
            .map(|c| {
                let s = c.leaf_span(grid).expect("grid is the max level");
                (s.start, s.end, c.level())
            })
            .collect();
        let mut worst: Option<CubeValue> = None;
        let mut ratios = Vec::with_capacity(self.cubes.len());
        for (i, q) in self.cubes.iter().enumerate() {
            let (qs, qe, ql) = spans[i];
            // Strictly contained members are exactly those with a nested span
            // at a strictly deeper level.
            let mut inner: Vec<(usize, usize)> = spans
                .iter()
                .filter(|(s, e, l)| *l > ql && *s >= qs && *e <= qe)
                .map(|(s, e, _)| (*s, *e))
                .collect();
            inner.sort_unstable();
            let mut covered = 0usize;
            let mut reach = qs;
            for (s, e) in inner {
                if e <= reach {
                    continue;
                }
                covered += e - s.max(reach);
                reach = e;
            }
            let ratio = covered as f64 / (qe - qs) as f64;
            ratios.push(CubeValue {
                cube: *q,
                value: ratio,
            });
            if worst.as_ref().is_none_or(|w| ratio > w.value) {
                worst = Some(CubeValue {
                    cube: *q,
                    value: ratio,
                });
            }
        }
        SparsityCheck {
            is_sparse: worst.as_ref().is_none_or(|w| w.value <= 0.5),
            worst_ratio: worst.as_ref().map_or(0.0, |w| w.value),
            worst_cube: worst.map(|w| w.cube),
            ratios,
        }
    }
}

/// Per-cube cover ratios of strict sub-members, and the worst offender.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparsityCheck {
    pub is_sparse: bool,
    pub worst_ratio: f64,
    pub worst_cube: Option<DyadicCube>,
    pub ratios: Vec<CubeValue>,
}

#[derive(Clone, Debug)]
pub struct StoppingNode {
    pub cube: DyadicCube,
    pub parent: Option<u32>,
    pub children: Vec<u32>,
    /// sigma-average of the cube at build time.
    pub average: f64,
}

/// Stopping tree over a root cube Q0, together with the induced partition
/// of Q0: each leaf of Q0 is owned by the deepest member containing it, and
/// `E_S` is the owned set of member S (S minus its children's subtrees).
#[derive(Clone, Debug)]
pub struct StoppingTree {
    dimension: u32,
    depth: u32,
    q0: DyadicCube,
    nodes: Vec<StoppingNode>,
    /// Owner node per leaf of Q0's span (relative to span start).
    owner: Vec<u32>,
    degenerate: bool,
}

/// Stopping threshold: a cube stops when its average strictly exceeds four
/// times its stopping parent's.
pub const STOPPING_FACTOR: f64 = 4.0;

/// Builds the stopping tree of sigma over q0. A massless q0 yields the
/// degenerate tree {q0} with the `degenerate` flag set.
pub fn build_stopping_tree(sigma: &DyadicWeight, q0: &DyadicCube) -> Result<StoppingTree> {
    sigma.check_cube(q0)?;
    let depth = sigma.depth();
    let root_avg = sigma.average(q0)?;
    let mut nodes = vec![StoppingNode {
        cube: *q0,
        parent: None,
        children: Vec::new(),
        average: root_avg,
    }];
    let degenerate = root_avg == 0.0;
    if !degenerate {
        // Breadth-first over stopping members; for each, scan down for the
        // maximal strictly-contained cubes whose average exceeds 4x.
        let mut queue = vec![0u32];
        while let Some(s_idx) = queue.pop() {
            let s_cube = nodes[s_idx as usize].cube;
            let s_avg = nodes[s_idx as usize].average;
            let threshold = STOPPING_FACTOR * s_avg;
            if s_cube.level() == depth {
                continue;
            }
            let mut stack: Vec<DyadicCube> = s_cube.children().collect();
            // Keep deterministic child order: the stack reverses it, so feed
            // it reversed.
            stack.reverse();
            let mut found: Vec<DyadicCube> = Vec::new();
            while let Some(c) = stack.pop() {
                let avg = sigma.average_unchecked(&c);
                if avg > threshold {
                    found.push(c);
                    continue;
                }
                if c.level() < depth {
                    let mut kids: Vec<DyadicCube> = c.children().collect();
                    kids.reverse();
                    stack.append(&mut kids);
                }
            }
            for c in found {
                let idx = nodes.len() as u32;
                nodes.push(StoppingNode {
                    cube: c,
                    parent: Some(s_idx),
                    children: Vec::new(),
                    average: sigma.average_unchecked(&c),
                });
                nodes[s_idx as usize].children.push(idx);
                queue.push(idx);
            }
        }
    }
    // Deepest-member ownership: nodes are created parents-first, so writing
    // each node's span in creation order leaves the deepest owner in place.
    let q0_span = q0.leaf_span(depth)?;
    let mut owner = vec![0u32; q0_span.len()];
    for (idx, node) in nodes.iter().enumerate().skip(1) {
        let span = node.cube.leaf_span(depth)?;
        for slot in &mut owner[span.start - q0_span.start..span.end - q0_span.start] {
            *slot = idx as u32;
        }
    }
    Ok(StoppingTree {
        dimension: sigma.dimension(),
        depth,
        q0: *q0,
        nodes,
        owner,
        degenerate,
    })
}

impl StoppingTree {
    pub fn q0(&self) -> DyadicCube {
        self.q0
    }

    pub fn nodes(&self) -> &[StoppingNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Index of the member owning a leaf (position relative to Q0's span).
    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    /// The members as a sparse collection.
    pub fn collection(&self) -> Result<SparseCollection> {
        SparseCollection::new(self.dimension, self.nodes.iter().map(|n| n.cube).collect())
    }

    /// Absolute tree-order leaf positions of E_S for member `idx`.
    pub fn exclusive_leaves(&self, idx: u32) -> Vec<usize> {
        let start = self.q0.leaf_span(self.depth).expect("validated").start;
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == idx)
            .map(|(i, _)| start + i)
            .collect()
    }

    /// |E_S| for member `idx`.
    pub fn exclusive_measure(&self, idx: u32) -> f64 {
        let count = self.owner.iter().filter(|&&o| o == idx).count();
        count as f64 * libm::scalbn(1.0, -((self.dimension * self.depth) as i32))
    }
}

/// Pointwise domination of the localized maximal function by stopping
/// averages: on E_S, `M(sigma 1_Q0) <= 4 <sigma>_S`. Returns the worst ratio
/// and the leaf attaining it.
#[derive(Clone, Debug)]
pub struct DominationReport {
    pub max_ratio: f64,
    pub witness_leaf: DyadicCube,
    pub tree: StoppingTree,
}

pub fn maximal_domination_check(sigma: &DyadicWeight, q0: &DyadicCube) -> Result<DominationReport> {
    if sigma.mass(q0)? == 0.0 {
        return Err(Error::ZeroMassCube {
            cube_level: q0.level(),
        });
    }
    let tree = build_stopping_tree(sigma, q0)?;
    let m = local_maximal(sigma, q0)?;
    let span = q0.leaf_span(sigma.depth())?;
    let mut best = f64::NEG_INFINITY;
    let mut witness: Option<DyadicCube> = None;
    for (rel, &own) in tree.owner().iter().enumerate() {
        let pos = span.start + rel;
        // Stopping averages are positive once sigma(Q0) > 0.
        let ratio = m.values()[pos] / tree.nodes()[own as usize].average;
        let leaf = DyadicCube::from_tree_position(sigma.dimension(), sigma.depth(), pos as u64)?;
        let better = ratio > best
            || (ratio == best && witness.as_ref().is_none_or(|w| leaf < *w));
        if better {
            best = ratio;
            witness = Some(leaf);
        }
    }
    Ok(DominationReport {
        max_ratio: best,
        witness_leaf: witness.expect("q0 has at least one leaf"),
        tree,
    })
}

/// Sparse averaging operator: `(S f)(x) = sum_{Q in S} <f>_Q 1_Q(x)`.
pub fn apply_sparse(collection: &SparseCollection, f: &LeafFunction) -> Result<LeafFunction> {
    collection.check_tree(f.dimension(), f.depth())?;
    let mut out = LeafFunction::zeros(f.dimension(), f.depth())?;
    for q in collection.cubes() {
        let avg = f.average_on(q)?;
        let span = q.leaf_span(f.depth())?;
        for v in &mut out.values_mut()[span] {
            *v += avg;
        }
    }
    Ok(out)
}

/// Bilinear pairing `sum_{Q in S} <sigma f>_Q <g w>_Q |Q|`, the self-dual
/// form of the sparse operator: it equals `int S(sigma f) g w dx`.
pub fn pairing(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    f: &LeafFunction,
    g: &LeafFunction,
) -> Result<f64> {
    f.check_shape(sigma.dimension(), sigma.depth())?;
    g.check_shape(w.dimension(), w.depth())?;
    if sigma.dimension() != w.dimension() || sigma.depth() != w.depth() {
        return Err(Error::ShapeMismatch {
            expected: (sigma.dimension(), sigma.depth()),
            got: (w.dimension(), w.depth()),
        });
    }
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    let lv = sigma.leaf_volume();
    let mut total = 0.0;
    for q in collection.cubes() {
        let span = q.leaf_span(sigma.depth())?;
        let mut sf = 0.0;
        let mut gw = 0.0;
        for i in span {
            sf += sigma.densities()[i] * f.values()[i];
            gw += g.values()[i] * w.densities()[i];
        }
        // <sigma f>_Q <g w>_Q |Q| = (sf * lv / |Q|) (gw * lv / |Q|) |Q|.
        total += sf * gw * lv * lv / q.volume();
    }
    Ok(total)
}

/// Half-open dyadic band of a positive value: the integer a with
/// `2^a <= value < 2^(a+1)`.
fn band(value: f64) -> i64 {
    libm::floor(libm::log2(value)) as i64
}

/// Band label for cubes whose classifying value vanishes (massless sigma or
/// w on the cube). Kept in a class of its own so the classes still partition
/// the collection.
pub const NULL_BAND: i64 = i64::MIN;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum PigeonholeMode {
    /// Bands for the maximal-function bound: contribution and entropy of sigma.
    MaximalBound,
    /// Bands for the sparse testing bound; the classifying functionals
    /// coincide with the maximal-bound ones, only the envelope differs by
    /// the caller's choice.
    TestingBound,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PigeonholeClass {
    /// Contribution band: `2^a <= rho_eps <sigma>^(p-1) <w> < 2^(a+1)`,
    /// or [`NULL_BAND`] for vanishing contributions.
    pub a: i64,
    /// Entropy band: `2^r <= rho_sigma(Q) < 2^(r+1)`; rho >= 1 keeps r >= 0.
    pub r: u32,
    pub cubes: Vec<DyadicCube>,
}

/// Splits a collection into classes by the dyadic band of the joint-bump
/// contribution (index a) and of the entropy (index r). Classes are disjoint,
/// cover the collection, and empty bands are omitted. `mode` records which
/// bound the classification feeds; both use the same functionals.
pub fn pigeonhole(
    collection: &SparseCollection,
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
    mode: PigeonholeMode,
) -> Result<Vec<PigeonholeClass>> {
    let _ = mode;
    check_exponent(p)?;
    eps.validate()?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    if sigma.dimension() != w.dimension() || sigma.depth() != w.depth() {
        return Err(Error::ShapeMismatch {
            expected: (sigma.dimension(), sigma.depth()),
            got: (w.dimension(), w.depth()),
        });
    }
    let mut classes: BTreeMap<(i64, u32), Vec<DyadicCube>> = BTreeMap::new();
    for q in collection.cubes() {
        let rho = entropy(sigma, q)?;
        let r = band(rho).max(0) as u32;
        let sa = sigma.average(q)?;
        let wa = w.average(q)?;
        let contribution = if sa == 0.0 || wa == 0.0 {
            0.0
        } else {
            rho * eps.eval(rho)? * libm::pow(sa, p - 1.0) * wa
        };
        let a = if contribution > 0.0 {
            band(contribution)
        } else {
            NULL_BAND
        };
        classes.entry((a, r)).or_default().push(*q);
    }
    Ok(classes
        .into_iter()
        .map(|((a, r), cubes)| PigeonholeClass { a, r, cubes })
        .collect())
}
