//! Localized dyadic maximal function and the entropy functional built on it.
//!
//! For a weight sigma and a cube Q, `M(sigma 1_Q)(x) = max { <sigma>_R :
//! x in R, R dyadic, R subset of Q }`, with R running down to the leaf level.
//! The entropy of Q is `rho(Q) = int_Q M(sigma 1_Q) dx / sigma(Q)`, at least 1
//! whenever sigma(Q) > 0 and set to 1 by convention on massless cubes. The
//! bumped variant multiplies rho by an integrability envelope evaluated at
//! rho itself.
//!
//! Both the leaf-vector form and the integral are computed in one top-down
//! pass that carries the running ancestor maximum, so a full evaluation costs
//! one visit per node of the subtree.

use crate::cube::DyadicCube;
use crate::epsilon::EpsilonFn;
use crate::weight::{DyadicWeight, LeafFunction, NodeSums};
use crate::Result;

struct Pass<'a> {
    sums: &'a NodeSums,
    dimension: u32,
    depth: u32,
}

impl Pass<'_> {
    fn average(&self, level: u32, position: u64) -> f64 {
        let down = (self.dimension * (self.depth - level)) as i32;
        libm::scalbn(self.sums.sum(level, position), -down)
    }

    /// Fills leaf values of max(running, chain below) for the subtree at
    /// (level, position).
    fn fill(&self, level: u32, position: u64, running: f64, out: &mut [f64]) {
        let m = running.max(self.average(level, position));
        if level == self.depth {
            out[position as usize] = m;
            return;
        }
        // A mass-free subtree keeps the running value on all its leaves.
        if self.sums.sum(level, position) == 0.0 {
            let span_width = (self.dimension * (self.depth - level)) as u64;
            let start = (position << span_width) as usize;
            let len = 1usize << span_width;
            for v in &mut out[start..start + len] {
                *v = m;
            }
            return;
        }
        let fan = 1u64 << self.dimension;
        for c in 0..fan {
            self.fill(level + 1, position * fan + c, m, out);
        }
    }

    /// Integral of the running-max leaf values over the subtree.
    fn integrate(&self, level: u32, position: u64, running: f64) -> f64 {
        let m = running.max(self.average(level, position));
        if level == self.depth || self.sums.sum(level, position) == 0.0 {
            let vol = libm::scalbn(1.0, -((self.dimension * level) as i32));
            return m * vol;
        }
        let fan = 1u64 << self.dimension;
        let mut acc = 0.0;
        for c in 0..fan {
            acc += self.integrate(level + 1, position * fan + c, m);
        }
        acc
    }
}

fn pass_for(sigma: &DyadicWeight) -> Pass<'_> {
    Pass {
        sums: sigma.node_sums(),
        dimension: sigma.dimension(),
        depth: sigma.depth(),
    }
}

/// Leaf values of `M(sigma 1_Q)`, zero outside Q.
pub fn local_maximal(sigma: &DyadicWeight, cube: &DyadicCube) -> Result<LeafFunction> {
    sigma.check_cube(cube)?;
    let mut out = alloc::vec![0.0; sigma.leaf_count()];
    let pass = pass_for(sigma);
    // The pass only descends inside the cube's subtree, so leaves outside Q
    // keep their initial zero.
    pass.fill(cube.level(), cube.tree_position(), 0.0, &mut out);
    Ok(LeafFunction::from_tree_order(
        sigma.dimension(),
        sigma.depth(),
        out,
    ))
}

/// `int_Q M(sigma 1_Q) dx` without materializing the leaf vector.
pub(crate) fn maximal_integral(sigma: &DyadicWeight, cube: &DyadicCube) -> f64 {
    let pass = pass_for(sigma);
    pass.integrate(cube.level(), cube.tree_position(), 0.0)
}

/// `int_Q M(sigma 1_Q)^p dw` in one top-down pass. Mass-free sigma-subtrees
/// contribute `m^p * w(block)` in one step, so a full scan over all Q costs
/// one node visit per (cube, ancestor) pair.
pub(crate) fn weighted_power_integral(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    cube: &DyadicCube,
) -> f64 {
    struct Two<'a> {
        s: Pass<'a>,
        wsums: &'a NodeSums,
        p: f64,
        leaf_vol: f64,
    }
    impl Two<'_> {
        fn go(&self, level: u32, position: u64, running: f64) -> f64 {
            let m = running.max(self.s.average(level, position));
            if level == self.s.depth || self.s.sums.sum(level, position) == 0.0 {
                let wmass = self.wsums.sum(level, position) * self.leaf_vol;
                if m == 0.0 || wmass == 0.0 {
                    return 0.0;
                }
                return libm::pow(m, self.p) * wmass;
            }
            let fan = 1u64 << self.s.dimension;
            let mut acc = 0.0;
            for c in 0..fan {
                acc += self.go(level + 1, position * fan + c, m);
            }
            acc
        }
    }
    let two = Two {
        s: pass_for(sigma),
        wsums: w.node_sums(),
        p,
        leaf_vol: sigma.leaf_volume(),
    };
    two.go(cube.level(), cube.tree_position(), 0.0)
}

/// Maximal function of a nonnegative leaf function localized to a cube,
/// `M(g 1_Q)` with averages taken of g itself. Used for probing operator
/// norms with general nonnegative inputs g = sigma*f.
pub fn maximal_of(g: &LeafFunction, cube: &DyadicCube) -> Result<LeafFunction> {
    if cube.dimension() != g.dimension() {
        return Err(crate::Error::ShapeMismatch {
            expected: (g.dimension(), g.depth()),
            got: (cube.dimension(), cube.level()),
        });
    }
    for (i, &v) in g.values().iter().enumerate() {
        if v < 0.0 {
            return Err(crate::Error::InvalidDensity { index: i, value: v });
        }
    }
    cube.leaf_span(g.depth())?;
    let sums = NodeSums::build(g.dimension(), g.depth(), g.values());
    let pass = Pass {
        sums: &sums,
        dimension: g.dimension(),
        depth: g.depth(),
    };
    let mut out = alloc::vec![0.0; g.values().len()];
    pass.fill(cube.level(), cube.tree_position(), 0.0, &mut out);
    Ok(LeafFunction::from_tree_order(g.dimension(), g.depth(), out))
}

/// Entropy `rho_sigma(Q) = int_Q M(sigma 1_Q) dx / sigma(Q)`, with the
/// convention `rho = 1` on massless cubes. The result is clamped to `>= 1`
/// to absorb last-ulp rounding of the two exact sums.
pub fn entropy(sigma: &DyadicWeight, cube: &DyadicCube) -> Result<f64> {
    let mass = sigma.mass(cube)?;
    if mass == 0.0 {
        return Ok(1.0);
    }
    Ok((maximal_integral(sigma, cube) / mass).max(1.0))
}

/// Bumped entropy `rho_{sigma,eps}(Q) = rho(Q) * eps(rho(Q))`.
pub fn bumped_entropy(sigma: &DyadicWeight, cube: &DyadicCube, eps: &EpsilonFn) -> Result<f64> {
    let rho = entropy(sigma, cube)?;
    Ok(rho * eps.eval(rho)?)
}
