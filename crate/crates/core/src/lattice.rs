//! Square-lattice geometry with open boundaries.
//!
//! Sites carry 1-based coordinates `(i, j)` (column, row). Flattened indices
//! are 0-based and row-major: `idx = (j - 1) * lx + (i - 1)`.

use std::fmt;

use crate::error::{Error, Result};

/// An `lx` x `ly` grid of qubits. `lx` must be even so that every column has a
/// mirror partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeGeometry {
    lx: usize,
    ly: usize,
}

/// A lattice site, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

impl Site {
    pub const fn new(i: usize, j: usize) -> Self {
        Site { i, j }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A nearest-neighbour bond. `a` always precedes `b` in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: Site,
    pub b: Site,
    pub orientation: Orientation,
}

/// Labels of the four Bell states. `I` and `Z` are `(|00> +/- |11>)/sqrt2`;
/// `X` and `Y` are obtained by applying the matching Pauli to the first qubit
/// of `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellLabel {
    I,
    Z,
    X,
    Y,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [BellLabel::I, BellLabel::Z, BellLabel::X, BellLabel::Y];
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BellLabel::I => "I",
            BellLabel::Z => "Z",
            BellLabel::X => "X",
            BellLabel::Y => "Y",
        };
        f.write_str(s)
    }
}

/// Checkerboard label of a site: `I` when `i + j` is even, `Z` otherwise.
///
/// A mirror pair takes the label of its left member (`i <= lx/2`); the right
/// member always carries the opposite site label because `lx + 1` is odd.
pub fn checkerboard_label(s: Site) -> BellLabel {
    if (s.i + s.j) % 2 == 0 {
        BellLabel::I
    } else {
        BellLabel::Z
    }
}

impl LatticeGeometry {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::Geometry(format!("lattice {lx}x{ly} has no sites")));
        }
        if lx % 2 != 0 {
            return Err(Error::Geometry(format!(
                "lx = {lx} is odd; mirror pairing needs an even number of columns"
            )));
        }
        Ok(LatticeGeometry { lx, ly })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    pub fn contains(&self, s: Site) -> bool {
        (1..=self.lx).contains(&s.i) && (1..=self.ly).contains(&s.j)
    }

    fn check(&self, s: Site) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::SiteOutOfBounds { i: s.i, j: s.j, lx: self.lx, ly: self.ly })
        }
    }

    pub fn site_index(&self, s: Site) -> Result<usize> {
        self.check(s)?;
        Ok((s.j - 1) * self.lx + (s.i - 1))
    }

    /// Inverse of [`site_index`](Self::site_index).
    pub fn site_at(&self, idx: usize) -> Result<Site> {
        if idx >= self.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "site index {idx} out of range for {} sites",
                self.n_sites()
            )));
        }
        Ok(Site::new(idx % self.lx + 1, idx / self.lx + 1))
    }

    /// All sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (1..=self.ly).flat_map(move |j| (1..=self.lx).map(move |i| Site::new(i, j)))
    }

    /// `(lx + 1 - i, j)`.
    pub fn mirror_partner(&self, s: Site) -> Result<Site> {
        self.check(s)?;
        Ok(Site::new(self.lx + 1 - s.i, s.j))
    }

    /// Every nearest-neighbour bond once: horizontal bonds row by row, then
    /// vertical bonds.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(self.ly * (self.lx - 1) + self.lx * (self.ly - 1));
        for j in 1..=self.ly {
            for i in 1..self.lx {
                out.push(Bond {
                    a: Site::new(i, j),
                    b: Site::new(i + 1, j),
                    orientation: Orientation::Horizontal,
                });
            }
        }
        for j in 1..self.ly {
            for i in 1..=self.lx {
                out.push(Bond {
                    a: Site::new(i, j),
                    b: Site::new(i, j + 1),
                    orientation: Orientation::Vertical,
                });
            }
        }
        out
    }

    /// Mirror pairs `(left, right)` with `left.i <= lx/2`, row by row.
    pub fn mirror_pairs(&self) -> Vec<(Site, Site)> {
        let half = self.lx / 2;
        let mut out = Vec::with_capacity(half * self.ly);
        for j in 1..=self.ly {
            for i in 1..=half {
                out.push((Site::new(i, j), Site::new(self.lx + 1 - i, j)));
            }
        }
        out
    }

    /// Normalises a mirror pair to `(left, right)` order; errors if the two
    /// sites are not mirror partners.
    pub fn as_mirror_pair(&self, a: Site, b: Site) -> Result<(Site, Site)> {
        self.check(a)?;
        self.check(b)?;
        if self.mirror_partner(a)? != b {
            return Err(Error::InvalidArgument(format!("{a} and {b} are not mirror partners")));
        }
        Ok(if a.i < b.i { (a, b) } else { (b, a) })
    }

    /// Smallest row `j` for which the central pair carries label `I`, or row
    /// 1 when no such row exists (single row with `lx/2` even).
    pub fn default_central_row(&self) -> usize {
        let half = self.lx / 2;
        (1..=self.ly).find(|j| (half + j) % 2 == 0).unwrap_or(1)
    }

    /// The two central sites of row `j`: mirror partners and nearest
    /// neighbours.
    pub fn central_pair_in_row(&self, j: usize) -> Result<(Site, Site)> {
        let half = self.lx / 2;
        let left = Site::new(half, j);
        self.check(left)?;
        Ok((left, Site::new(half + 1, j)))
    }

    /// Central pair in [`default_central_row`](Self::default_central_row).
    pub fn central_pair(&self) -> (Site, Site) {
        let j = self.default_central_row();
        (Site::new(self.lx / 2, j), Site::new(self.lx / 2 + 1, j))
    }

    /// Manhattan distance between two sites (open boundaries).
    pub fn distance(&self, a: Site, b: Site) -> usize {
        a.i.abs_diff(b.i) + a.j.abs_diff(b.j)
    }
}

impl fmt::Display for LatticeGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.lx, self.ly)
    }
}
