//! Reflection symmetries of the channel.
//!
//! The left-right mirror maps the central pair onto itself (swapped), and
//! `|I>`, `|00>`, `|11>` are swap invariant, so `K00` and `K11` commute with
//! the mirror acting on the rest qubits. When the central pair sits in the
//! middle row of an odd-height lattice the up-down reflection is a second
//! such symmetry. Together with parity these split the rest register into
//! sectors on which `K00` and `K11` are block diagonal.

use std::fmt;

use faer::Mat;

use crate::lattice::Site;
use crate::xy::sector_state;
use crate::C64;

use super::ChannelGeometry;

/// Parity of the rest qubits and the character (`+1` or `-1`) under each
/// reflection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetrySector {
    pub parity: usize,
    pub characters: Vec<(&'static str, i8)>,
}

impl SymmetrySector {
    pub fn is_trivial(&self) -> bool {
        self.parity == 0 && self.characters.iter().all(|&(_, c)| c > 0)
    }
}

impl fmt::Display for SymmetrySector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.parity == 0 { "even" } else { "odd" })?;
        for (name, c) in &self.characters {
            write!(f, "/{name}{}", if *c > 0 { '+' } else { '-' })?;
        }
        Ok(())
    }
}

/// Orthonormal real basis of one sector; each column is a sparse
/// combination of positions in the compact parity-sector indexing.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub label: SymmetrySector,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl SectorBasis {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// `B_out^T M B_in` for a compact parity-block matrix `m`.
    pub fn project(m: &Mat<C64>, out: &SectorBasis, inp: &SectorBasis) -> Mat<C64> {
        Mat::from_fn(out.dim(), inp.dim(), |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for &(x, a) in &out.columns[r] {
                for &(y, b) in &inp.columns[c] {
                    acc += m[(x, y)] * (a * b);
                }
            }
            acc
        })
    }

    /// `B^T v` for a compact parity-block vector.
    pub fn project_vector(&self, v: &[C64]) -> Vec<C64> {
        self.columns.iter().map(|col| col.iter().map(|&(x, a)| v[x] * a).sum()).collect()
    }
}

/// Rest-qubit permutations of the reflections that commute with `K00`, `K11`.
pub fn reflections(cg: &ChannelGeometry) -> Vec<(&'static str, Vec<usize>)> {
    let g = &cg.geometry;
    let split = cg.split();
    let full_of_rest: Vec<usize> = (0..g.n_sites()).filter(|&q| split.rest_qubit(q).is_some()).collect();
    let perm = |f: &dyn Fn(Site) -> Site| -> Vec<usize> {
        full_of_rest
            .iter()
            .map(|&q| {
                let s = f(g.site_at(q).expect("in bounds"));
                split.rest_qubit(g.site_index(s).expect("in bounds")).expect("rest maps to rest")
            })
            .collect()
    };
    let (lx, ly) = (g.lx(), g.ly());
    let mut out = vec![("mirror", perm(&|s: Site| Site::new(lx + 1 - s.i, s.j)))];
    if 2 * cg.pair.0.j == ly + 1 && ly > 1 {
        out.push(("vertical", perm(&|s: Site| Site::new(s.i, ly + 1 - s.j))));
    }
    out
}

fn permute_bits(x: usize, perm: &[usize]) -> usize {
    perm.iter().enumerate().fold(0, |acc, (q, &t)| acc | (((x >> q) & 1) << t))
}

/// All sectors with a non-empty basis; the first one is the trivial even
/// sector, whose first column is `|0...0>`.
pub fn sector_bases(cg: &ChannelGeometry) -> Vec<SectorBasis> {
    let refl = reflections(cg);
    let ng = refl.len();
    let n_elems = 1usize << ng;
    let half = 1usize << (cg.n_rest() - 1);
    // group element h applies the reflections whose bits are set in h
    let act = |h: usize, x: usize| -> usize {
        (0..ng).filter(|i| (h >> i) & 1 == 1).fold(x, |y, i| permute_bits(y, &refl[i].1))
    };
    let mut out = Vec::new();
    for p in 0..2 {
        let mut cols: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::new(); n_elems];
        let mut seen = vec![false; half];
        for k in 0..half {
            if seen[k] {
                continue;
            }
            let x = sector_state(k, p);
            let images: Vec<usize> = (0..n_elems).map(|h| act(h, x) >> 1).collect();
            for &pos in &images {
                seen[pos] = true;
            }
            for (chi, col_list) in cols.iter_mut().enumerate() {
                let mut acc: Vec<(usize, f64)> = Vec::with_capacity(n_elems);
                for (h, &pos) in images.iter().enumerate() {
                    let sign = if (chi & h).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    match acc.iter_mut().find(|(q, _)| *q == pos) {
                        Some(e) => e.1 += sign,
                        None => acc.push((pos, sign)),
                    }
                }
                acc.retain(|&(_, a)| a.abs() > 1e-12);
                let n: f64 = acc.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
                if n > 0.0 {
                    acc.iter_mut().for_each(|e| e.1 /= n);
                    acc.sort_by_key(|e| e.0);
                    col_list.push(acc);
                }
            }
        }
        for (chi, columns) in cols.into_iter().enumerate() {
            if columns.is_empty() {
                continue;
            }
            let characters = refl.iter().enumerate().map(|(i, (name, _))| (*name, if (chi >> i) & 1 == 1 { -1 } else { 1 })).collect();
            out.push(SectorBasis { label: SymmetrySector { parity: p, characters }, columns });
        }
    }
    out
}
