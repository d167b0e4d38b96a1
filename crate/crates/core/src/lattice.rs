//! Points of the integer lattice and axis-aligned regions.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d for `d <= MAX_DIM`. Unused coordinates are kept at zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Site {
            coords: [0; MAX_DIM],
            dim: dim as u8,
        }
    }

    pub fn new(coords: &[i32]) -> Result<Self> {
        let dim = coords.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut c = [0; MAX_DIM];
        c[..dim].copy_from_slice(coords);
        Ok(Site {
            coords: c,
            dim: dim as u8,
        })
    }

    /// One-dimensional shorthand.
    pub fn d1(x: i32) -> Self {
        let mut s = Site::origin(1);
        s.coords[0] = x;
        s
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, i: usize) -> i32 {
        self.coords[i]
    }

    /// Neighbor in direction `dir` in `0..2d`: coordinate `dir / 2`, `+1` for even `dir`.
    #[inline]
    pub fn neighbor(&self, dir: usize) -> Site {
        debug_assert!(dir < 2 * self.dim());
        let mut s = *self;
        if dir.is_multiple_of(2) {
            s.coords[dir / 2] += 1;
        } else {
            s.coords[dir / 2] -= 1;
        }
        s
    }

    pub fn offset(&self, delta: &Site) -> Site {
        debug_assert_eq!(self.dim, delta.dim);
        let mut s = *self;
        for i in 0..self.dim() {
            s.coords[i] += delta.coords[i];
        }
        s
    }

    pub fn with_coord(&self, i: usize, value: i32) -> Site {
        let mut s = *self;
        s.coords[i] = value;
        s
    }

    pub fn linf_norm(&self) -> i32 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn is_nearest_neighbor_of(&self, other: &Site) -> bool {
        self.dim == other.dim
            && self
                .coords()
                .iter()
                .zip(other.coords())
                .map(|(a, b)| (a - b).abs())
                .sum::<i32>()
                == 1
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

/// Sites are written as colon-separated coordinates, e.g. `3:-1`.
impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let coords = s
            .split(':')
            .map(|p| p.trim().parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: 0,
                reason: format!("bad site `{s}`: {e}"),
            })?;
        Site::new(&coords)
    }
}

/// Inclusive axis-aligned box of lattice sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub lo: Site,
    pub hi: Site,
}

impl Region {
    pub fn new(lo: Site, hi: Site) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        Ok(Region { lo, hi })
    }

    /// `center + {-half, ..., half}^d`.
    pub fn cube(center: Site, half: i32) -> Self {
        let mut lo = center;
        let mut hi = center;
        for i in 0..center.dim() {
            lo.coords[i] -= half;
            hi.coords[i] += half;
        }
        Region { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    #[inline]
    pub fn contains(&self, s: &Site) -> bool {
        (0..self.lo.dim()).all(|i| self.lo.coords[i] <= s.coords[i] && s.coords[i] <= self.hi.coords[i])
    }

    pub fn len(&self) -> usize {
        (0..self.dim())
            .map(|i| (self.hi.coords[i] - self.lo.coords[i] + 1).max(0) as usize)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All sites in lexicographic order.
    pub fn sites(&self) -> Vec<Site> {
        let d = self.dim();
        let mut out = Vec::with_capacity(self.len());
        if self.is_empty() {
            return out;
        }
        let mut cur = self.lo;
        loop {
            out.push(cur);
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur.coords[i] < self.hi.coords[i] {
                    cur.coords[i] += 1;
                    break;
                }
                cur.coords[i] = self.lo.coords[i];
            }
        }
    }
}
