//! Weights and leaf functions on a fixed dyadic tree.
//!
//! A [`DyadicWeight`] is a nonnegative density per leaf; the measure of a set
//! is the integral of the density, so a cube's mass is its leaf-density sum
//! times the leaf volume. A [`LeafFunction`] is an arbitrary finite value per
//! leaf. Both store values in tree order; `from_row_major`/`to_row_major`
//! convert at the serialization boundary.
//!
//! Conventions (used throughout the crate): a cube of zero mass has weighted
//! averages equal to 0, and every cube functional is an exact fixed-order sum
//! over its leaf block, so identical inputs give bit-identical results.

use crate::cube::{check_depth, DyadicCube};
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

fn check_values(values: &[f64], require_nonnegative: bool) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidValue { index: i, value: v });
        }
        if require_nonnegative && v < 0.0 {
            return Err(Error::InvalidDensity { index: i, value: v });
        }
    }
    Ok(())
}

/// Permutation between row-major leaf order (coordinate 0 major) and tree
/// order. Identity in dimension 1.
fn row_major_to_tree(dimension: u32, depth: u32, values: &[f64]) -> Vec<f64> {
    if dimension == 1 {
        return values.to_vec();
    }
    let n = 1usize << depth;
    let mut out = vec![0.0; values.len()];
    for i0 in 0..n {
        for i1 in 0..n {
            let cube = DyadicCube::new(2, depth, &[i0 as u64, i1 as u64]).expect("in range");
            out[cube.tree_position() as usize] = values[i0 * n + i1];
        }
    }
    out
}

fn tree_to_row_major(dimension: u32, depth: u32, values: &[f64]) -> Vec<f64> {
    if dimension == 1 {
        return values.to_vec();
    }
    let n = 1usize << depth;
    let mut out = vec![0.0; values.len()];
    for i0 in 0..n {
        for i1 in 0..n {
            let cube = DyadicCube::new(2, depth, &[i0 as u64, i1 as u64]).expect("in range");
            out[i0 * n + i1] = values[cube.tree_position() as usize];
        }
    }
    out
}

/// Per-node leaf-value sums for every level of the tree, built bottom-up in
/// one fixed order (each node sums its 2^d children).
#[derive(Clone, Debug)]
pub(crate) struct NodeSums {
    // levels[l][m] = sum of leaf values under the level-l node at tree position m.
    levels: Vec<Vec<f64>>,
}

impl NodeSums {
    pub(crate) fn build(dimension: u32, depth: u32, leaf_values: &[f64]) -> Self {
        let fan = 1usize << dimension;
        let mut levels = Vec::with_capacity(depth as usize + 1);
        levels.push(leaf_values.to_vec());
        let mut upper = leaf_values.to_vec();
        for _ in 0..depth {
            let mut next = vec![0.0; upper.len() / fan];
            for (m, slot) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for c in 0..fan {
                    s += upper[m * fan + c];
                }
                *slot = s;
            }
            levels.push(next.clone());
            upper = next;
        }
        levels.reverse();
        NodeSums { levels }
    }

    pub(crate) fn sum(&self, level: u32, position: u64) -> f64 {
        self.levels[level as usize][position as usize]
    }
}

#[derive(Clone, Debug)]
pub struct DyadicWeight {
    dimension: u32,
    depth: u32,
    densities: Vec<f64>, // tree order
    sums: NodeSums,
}

impl DyadicWeight {
    /// Builds a weight from densities in row-major leaf order.
    pub fn from_row_major(dimension: u32, depth: u32, densities: &[f64]) -> Result<Self> {
        check_depth(dimension, depth)?;
        let expected = 1usize << (dimension * depth);
        if densities.len() != expected {
            return Err(Error::BadLeafCount {
                expected,
                got: densities.len(),
            });
        }
        check_values(densities, true)?;
        let tree = row_major_to_tree(dimension, depth, densities);
        let sums = NodeSums::build(dimension, depth, &tree);
        Ok(DyadicWeight {
            dimension,
            depth,
            densities: tree,
            sums,
        })
    }

    /// Constant density 1 (Lebesgue measure).
    pub fn constant(dimension: u32, depth: u32) -> Result<Self> {
        check_depth(dimension, depth)?;
        let n = 1usize << (dimension * depth);
        let tree = vec![1.0; n];
        let sums = NodeSums::build(dimension, depth, &tree);
        Ok(DyadicWeight {
            dimension,
            depth,
            densities: tree,
            sums,
        })
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        tree_to_row_major(self.dimension, self.depth, &self.densities)
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.densities.len()
    }

    /// Volume of one leaf, `2^(-d*depth)`.
    pub fn leaf_volume(&self) -> f64 {
        libm::scalbn(1.0, -((self.dimension * self.depth) as i32))
    }

    /// Densities in tree order.
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::root(self.dimension).expect("dimension validated at construction")
    }

    pub(crate) fn check_cube(&self, cube: &DyadicCube) -> Result<()> {
        if cube.dimension() != self.dimension {
            return Err(Error::ShapeMismatch {
                expected: (self.dimension, self.depth),
                got: (cube.dimension(), cube.level()),
            });
        }
        if cube.level() > self.depth {
            return Err(Error::CubeBelowLeaves {
                level: cube.level(),
                depth: self.depth,
            });
        }
        Ok(())
    }

    pub(crate) fn density_sum(&self, cube: &DyadicCube) -> f64 {
        self.sums.sum(cube.level(), cube.tree_position())
    }

    /// sigma(Q): integral of the density over the cube.
    pub fn mass(&self, cube: &DyadicCube) -> Result<f64> {
        self.check_cube(cube)?;
        Ok(self.density_sum(cube) * self.leaf_volume())
    }

    /// <sigma>_Q = sigma(Q) / |Q|. Zero when the cube carries no mass.
    pub fn average(&self, cube: &DyadicCube) -> Result<f64> {
        self.check_cube(cube)?;
        Ok(self.average_unchecked(cube))
    }

    pub(crate) fn average_unchecked(&self, cube: &DyadicCube) -> f64 {
        let down = (self.dimension * (self.depth - cube.level())) as i32;
        libm::scalbn(self.density_sum(cube), -down)
    }

    pub fn total_mass(&self) -> f64 {
        self.density_sum(&self.root()) * self.leaf_volume()
    }

    pub fn is_zero(&self) -> bool {
        self.density_sum(&self.root()) == 0.0
    }

    /// Pointwise scaling of the density by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidScale { factor });
        }
        let tree: Vec<f64> = self.densities.iter().map(|d| d * factor).collect();
        let sums = NodeSums::build(self.dimension, self.depth, &tree);
        Ok(DyadicWeight {
            dimension: self.dimension,
            depth: self.depth,
            densities: tree,
            sums,
        })
    }

    pub(crate) fn node_sums(&self) -> &NodeSums {
        &self.sums
    }

    /// The density viewed as a leaf function.
    pub fn as_leaf_function(&self) -> LeafFunction {
        LeafFunction {
            dimension: self.dimension,
            depth: self.depth,
            values: self.densities.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeafFunction {
    dimension: u32,
    depth: u32,
    values: Vec<f64>, // tree order
}

impl LeafFunction {
    pub fn from_row_major(dimension: u32, depth: u32, values: &[f64]) -> Result<Self> {
        check_depth(dimension, depth)?;
        let expected = 1usize << (dimension * depth);
        if values.len() != expected {
            return Err(Error::BadLeafCount {
                expected,
                got: values.len(),
            });
        }
        check_values(values, false)?;
        Ok(LeafFunction {
            dimension,
            depth,
            values: row_major_to_tree(dimension, depth, values),
        })
    }

    pub(crate) fn from_tree_order(dimension: u32, depth: u32, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), 1usize << (dimension * depth));
        LeafFunction {
            dimension,
            depth,
            values,
        }
    }

    pub fn constant(dimension: u32, depth: u32, value: f64) -> Result<Self> {
        check_depth(dimension, depth)?;
        if !value.is_finite() {
            return Err(Error::InvalidValue { index: 0, value });
        }
        let n = 1usize << (dimension * depth);
        Ok(LeafFunction {
            dimension,
            depth,
            values: vec![value; n],
        })
    }

    pub fn zeros(dimension: u32, depth: u32) -> Result<Self> {
        LeafFunction::constant(dimension, depth, 0.0)
    }

    /// Indicator of a cube at the tree's resolution.
    pub fn indicator(dimension: u32, depth: u32, cube: &DyadicCube) -> Result<Self> {
        let mut f = LeafFunction::zeros(dimension, depth)?;
        if cube.dimension() != dimension {
            return Err(Error::ShapeMismatch {
                expected: (dimension, depth),
                got: (cube.dimension(), cube.level()),
            });
        }
        let span = cube.leaf_span(depth)?;
        for v in &mut f.values[span] {
            *v = 1.0;
        }
        Ok(f)
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Values in tree order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        tree_to_row_major(self.dimension, self.depth, &self.values)
    }

    pub fn leaf_volume(&self) -> f64 {
        libm::scalbn(1.0, -((self.dimension * self.depth) as i32))
    }

    pub(crate) fn check_shape(&self, dimension: u32, depth: u32) -> Result<()> {
        if self.dimension != dimension || self.depth != depth {
            return Err(Error::ShapeMismatch {
                expected: (dimension, depth),
                got: (self.dimension, self.depth),
            });
        }
        Ok(())
    }

    /// Plain average over a cube, `(1/|Q|) int_Q f`.
    pub fn average_on(&self, cube: &DyadicCube) -> Result<f64> {
        if cube.dimension() != self.dimension {
            return Err(Error::ShapeMismatch {
                expected: (self.dimension, self.depth),
                got: (cube.dimension(), cube.level()),
            });
        }
        let span = cube.leaf_span(self.depth)?;
        let mut s = 0.0;
        for &v in &self.values[span] {
            s += v;
        }
        let down = (self.dimension * (self.depth - cube.level())) as i32;
        Ok(libm::scalbn(s, -down))
    }

    /// int_Q f dsigma as an exact leaf sum.
    pub fn integral_weighted_on(&self, sigma: &DyadicWeight, cube: &DyadicCube) -> Result<f64> {
        self.check_shape(sigma.dimension(), sigma.depth())?;
        sigma.check_cube(cube)?;
        let span = cube.leaf_span(self.depth)?;
        let mut s = 0.0;
        for i in span {
            s += self.values[i] * sigma.densities()[i];
        }
        Ok(s * sigma.leaf_volume())
    }

    /// L^p(sigma) norm, `(int |f|^p dsigma)^(1/p)`.
    pub fn lp_norm(&self, sigma: &DyadicWeight, p: f64) -> Result<f64> {
        self.check_shape(sigma.dimension(), sigma.depth())?;
        let mut s = 0.0;
        for (v, d) in self.values.iter().zip(sigma.densities()) {
            if *d > 0.0 && *v != 0.0 {
                s += libm::pow(libm::fabs(*v), p) * d;
            }
        }
        Ok(libm::pow(s * sigma.leaf_volume(), 1.0 / p))
    }
}

/// sigma-weighted average of `f` over a cube, `int_Q f dsigma / sigma(Q)`,
/// zero when the cube carries no sigma-mass.
pub fn weighted_average(f: &LeafFunction, sigma: &DyadicWeight, cube: &DyadicCube) -> Result<f64> {
    let mass = sigma.mass(cube)?;
    if mass == 0.0 {
        return Ok(0.0);
    }
    Ok(f.integral_weighted_on(sigma, cube)? / mass)
}

#[cfg(feature = "serde")]
mod serde_impls {
    use super::*;
    use serde::de::Error as _;

    #[derive(serde::Serialize)]
    struct WeightOut<'a> {
        dimension: u32,
        depth: u32,
        densities: &'a [f64],
    }

    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct WeightIn {
        dimension: u32,
        depth: u32,
        densities: Vec<f64>,
    }

    impl serde::Serialize for DyadicWeight {
        fn serialize<S: serde::Serializer>(
            &self,
            serializer: S,
        ) -> core::result::Result<S::Ok, S::Error> {
            WeightOut {
                dimension: self.dimension,
                depth: self.depth,
                densities: &self.to_row_major(),
            }
            .serialize(serializer)
        }
    }

    impl<'de> serde::Deserialize<'de> for DyadicWeight {
        fn deserialize<D: serde::Deserializer<'de>>(
            deserializer: D,
        ) -> core::result::Result<Self, D::Error> {
            let raw = WeightIn::deserialize(deserializer)?;
            DyadicWeight::from_row_major(raw.dimension, raw.depth, &raw.densities)
                .map_err(D::Error::custom)
        }
    }

    impl serde::Serialize for LeafFunction {
        fn serialize<S: serde::Serializer>(
            &self,
            serializer: S,
        ) -> core::result::Result<S::Ok, S::Error> {
            WeightOut {
                dimension: self.dimension,
                depth: self.depth,
                densities: &self.to_row_major(),
            }
            .serialize(serializer)
        }
    }

    impl<'de> serde::Deserialize<'de> for LeafFunction {
        fn deserialize<D: serde::Deserializer<'de>>(
            deserializer: D,
        ) -> core::result::Result<Self, D::Error> {
            let raw = WeightIn::deserialize(deserializer)?;
            LeafFunction::from_row_major(raw.dimension, raw.depth, &raw.densities)
                .map_err(D::Error::custom)
        }
    }
}
