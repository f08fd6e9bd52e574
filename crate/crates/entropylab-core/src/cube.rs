//! Dyadic cubes of the unit cube [0,1)^d.
//!
//! A cube is addressed by `(level, index)`: at level `l` the unit cube splits
//! into `2^(d*l)` congruent half-open cubes and `index[k] in [0, 2^l)` locates
//! it along coordinate `k`. Two dyadic cubes are always nested or disjoint.
//!
//! Leaf storage throughout the crate uses tree order (Morton order), under
//! which the leaves of any cube form one contiguous block. Serialization at
//! the crate boundary uses row-major order over the index vector; the
//! conversions live in `weight`.

use crate::{Error, Result};
use alloc::vec::Vec;

/// Supported ambient dimensions.
pub const MAX_DIMENSION: u32 = 2;

/// Deepest supported leaf level per dimension, chosen so a full tree
/// (65536 leaves) stays comfortably in memory and every leaf count is exact
/// in f64.
pub fn max_depth(dimension: u32) -> u32 {
    if dimension == 1 {
        16
    } else {
        8
    }
}

pub(crate) fn check_dimension(dimension: u32) -> Result<()> {
    if dimension == 0 || dimension > MAX_DIMENSION {
        return Err(Error::InvalidDimension { dimension });
    }
    Ok(())
}

pub(crate) fn check_depth(dimension: u32, depth: u32) -> Result<()> {
    check_dimension(dimension)?;
    if depth == 0 || depth > max_depth(dimension) {
        return Err(Error::InvalidDepth { dimension, depth });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicCube {
    dimension: u32,
    level: u32,
    // Coordinate indices; index[1] is zero when dimension == 1.
    index: [u64; 2],
}

impl DyadicCube {
    pub fn new(dimension: u32, level: u32, index: &[u64]) -> Result<Self> {
        check_dimension(dimension)?;
        if index.len() != dimension as usize || level > 32 {
            return Err(Error::InvalidCube {
                level,
                index: [
                    index.first().copied().unwrap_or(0),
                    index.get(1).copied().unwrap_or(0),
                ],
            });
        }
        let mut ix = [0u64; 2];
        for (k, &i) in index.iter().enumerate() {
            if i >= 1u64 << level {
                return Err(Error::InvalidCube {
                    level,
                    index: [
                        index.first().copied().unwrap_or(0),
                        index.get(1).copied().unwrap_or(0),
                    ],
                });
            }
            ix[k] = i;
        }
        Ok(DyadicCube {
            dimension,
            level,
            index: ix,
        })
    }

    /// The unit cube [0,1)^d.
    pub fn root(dimension: u32) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(DyadicCube {
            dimension,
            level: 0,
            index: [0, 0],
        })
    }

    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[u64] {
        &self.index[..self.dimension as usize]
    }

    /// Lebesgue measure, `2^(-d*level)`.
    pub fn volume(&self) -> f64 {
        libm::scalbn(1.0, -((self.dimension * self.level) as i32))
    }

    pub fn side_length(&self) -> f64 {
        libm::scalbn(1.0, -(self.level as i32))
    }

    /// Center of the cube in ambient coordinates.
    pub fn midpoint(&self) -> [f64; 2] {
        let side = self.side_length();
        [
            (self.index[0] as f64 + 0.5) * side,
            (self.index[1] as f64 + 0.5) * side,
        ]
    }

    pub fn parent(&self) -> Option<Self> {
        if self.level == 0 {
            return None;
        }
        Some(DyadicCube {
            dimension: self.dimension,
            level: self.level - 1,
            index: [self.index[0] >> 1, self.index[1] >> 1],
        })
    }

    /// The `2^d` children, in tree order (coordinate 0 is the high bit of the
    /// child code).
    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let d = self.dimension;
        (0u64..1 << d).map(move |code| {
            let b0 = if d == 1 { code } else { code >> 1 };
            let b1 = if d == 1 { 0 } else { code & 1 };
            DyadicCube {
                dimension: d,
                level: self.level + 1,
                index: [self.index[0] * 2 + b0, self.index[1] * 2 + b1],
            }
        })
    }

    /// Whether `other` is contained in `self` (dyadic containment is
    /// equivalent to being the ancestor at the coarser level).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if self.dimension != other.dimension || other.level < self.level {
            return false;
        }
        let shift = other.level - self.level;
        (0..self.dimension as usize).all(|k| other.index[k] >> shift == self.index[k])
    }

    pub fn is_disjoint_from(&self, other: &DyadicCube) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    /// Ancestor at a coarser level.
    pub fn ancestor_at(&self, level: u32) -> Result<Self> {
        if level > self.level {
            return Err(Error::InvalidCube {
                level,
                index: self.index,
            });
        }
        let shift = self.level - level;
        Ok(DyadicCube {
            dimension: self.dimension,
            level,
            index: [self.index[0] >> shift, self.index[1] >> shift],
        })
    }

    /// Deepest common ancestor of two cubes of the same dimension.
    pub fn common_ancestor(&self, other: &DyadicCube) -> DyadicCube {
        debug_assert_eq!(self.dimension, other.dimension);
        let mut a = *self;
        let mut b = *other;
        if a.level > b.level {
            a = a.ancestor_at(b.level).expect("level checked");
        } else if b.level > a.level {
            b = b.ancestor_at(a.level).expect("level checked");
        }
        while a != b {
            a = a.parent().expect("distinct cubes at level 0 impossible");
            b = b.parent().expect("distinct cubes at level 0 impossible");
        }
        a
    }

    /// Position in tree order among the cubes of this level: bits of the
    /// coordinate indices interleaved from the most significant level down,
    /// coordinate 0 first.
    pub fn tree_position(&self) -> u64 {
        if self.dimension == 1 {
            return self.index[0];
        }
        let mut m = 0u64;
        for bit in (0..self.level).rev() {
            m = m << 2 | ((self.index[0] >> bit) & 1) << 1 | ((self.index[1] >> bit) & 1);
        }
        m
    }

    /// Inverse of [`tree_position`](Self::tree_position).
    pub fn from_tree_position(dimension: u32, level: u32, position: u64) -> Result<Self> {
        check_dimension(dimension)?;
        if level > 32 || position >= 1u64 << (dimension * level) {
            return Err(Error::InvalidCube {
                level,
                index: [position, 0],
            });
        }
        if dimension == 1 {
            return DyadicCube::new(1, level, &[position]);
        }
        let mut i0 = 0u64;
        let mut i1 = 0u64;
        for bit in 0..level {
            i0 |= ((position >> (2 * bit + 1)) & 1) << bit;
            i1 |= ((position >> (2 * bit)) & 1) << bit;
        }
        DyadicCube::new(2, level, &[i0, i1])
    }

    /// Contiguous range of tree-order leaf slots covered by this cube in a
    /// tree of the given depth.
    pub fn leaf_span(&self, depth: u32) -> Result<core::ops::Range<usize>> {
        if self.level > depth {
            return Err(Error::CubeBelowLeaves {
                level: self.level,
                depth,
            });
        }
        let width = self.dimension * (depth - self.level);
        let start = (self.tree_position() << width) as usize;
        Ok(start..start + (1usize << width))
    }

    /// Number of depth-`depth` leaves inside the cube.
    pub fn leaf_count(&self, depth: u32) -> usize {
        1usize << (self.dimension * (depth - self.level))
    }
}

/// Witness and enumeration order: by level, then lexicographically by index.
impl Ord for DyadicCube {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.level, self.index[0], self.index[1], self.dimension).cmp(&(
            other.level,
            other.index[0],
            other.index[1],
            other.dimension,
        ))
    }
}

impl PartialOrd for DyadicCube {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl core::fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.dimension == 1 {
            write!(f, "Q(level {}, index {})", self.level, self.index[0])
        } else {
            write!(
                f,
                "Q(level {}, index ({}, {}))",
                self.level, self.index[0], self.index[1]
            )
        }
    }
}

/// All cubes of levels `0..=max_level`, in witness order.
pub fn cubes_up_to(dimension: u32, max_level: u32) -> Result<Vec<DyadicCube>> {
    check_dimension(dimension)?;
    let mut out = Vec::new();
    for level in 0..=max_level {
        let n = 1u64 << level;
        for i0 in 0..n {
            if dimension == 1 {
                out.push(DyadicCube {
                    dimension,
                    level,
                    index: [i0, 0],
                });
            } else {
                for i1 in 0..n {
                    out.push(DyadicCube {
                        dimension,
                        level,
                        index: [i0, i1],
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(feature = "serde")]
impl serde::Serialize for DyadicCube {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("DyadicCube", 2)?;
        st.serialize_field("level", &self.level)?;
        st.serialize_field("index", &self.index())?;
        st.end()
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for DyadicCube {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            level: u32,
            index: Vec<u64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        DyadicCube::new(raw.index.len() as u32, raw.level, &raw.index)
            .map_err(serde::de::Error::custom)
    }
}
