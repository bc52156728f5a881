use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::quantum::StateVector;
use crate::C64;

pub const DEFAULT_JX: f64 = 1.0;
pub const DEFAULT_JY: f64 = 1.2;

/// Largest lattice for which full dense matrices are built.
pub const MAX_DENSE_SITES: usize = 14;

const CHUNK: usize = 1 << 12;

/// `H = sum_<ab> (Jx X_a X_b + Jy Y_a Y_b)` with open boundaries.
///
/// On a basis state `|x>` a bond flips both bits: the amplitude is `Jx + Jy`
/// when the two bits differ and `Jx - Jy` when they agree, so the matrix is
/// real symmetric and conserves the Z2 parity of the site bits.
#[derive(Debug, Clone)]
pub struct XYHamiltonian {
    geometry: LatticeGeometry,
    jx: f64,
    jy: f64,
    bonds: Vec<(u32, u32)>,
    masks: Vec<usize>,
}

impl XYHamiltonian {
    pub fn new(geometry: LatticeGeometry, jx: f64, jy: f64) -> Result<Self> {
        if !jx.is_finite() || !jy.is_finite() {
            return Err(Error::InvalidArgument(format!("couplings must be finite (jx={jx}, jy={jy})")));
        }
        let bonds: Vec<(u32, u32)> = geometry
            .bonds()
            .iter()
            .map(|b| {
                let a = geometry.site_index(b.a).expect("bond site in bounds");
                let c = geometry.site_index(b.b).expect("bond site in bounds");
                (a as u32, c as u32)
            })
            .collect();
        let masks = bonds.iter().map(|&(a, c)| (1usize << a) | (1usize << c)).collect();
        Ok(XYHamiltonian { geometry, jx, jy, bonds, masks })
    }

    pub fn with_default_couplings(geometry: LatticeGeometry) -> Self {
        Self::new(geometry, DEFAULT_JX, DEFAULT_JY).expect("default couplings are finite")
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn jx(&self) -> f64 {
        self.jx
    }

    pub fn jy(&self) -> f64 {
        self.jy
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    /// Upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.masks.len() as f64 * (self.jx.abs() + self.jy.abs())
    }

    #[inline]
    fn coupling(&self, x: usize, mask: usize) -> f64 {
        if (x & mask).count_ones() == 1 {
            self.jx + self.jy
        } else {
            self.jx - self.jy
        }
    }

    #[inline]
    fn row(&self, psi: &[C64], x: usize, table: &[f64; 2]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (&(a, b), &m) in self.bonds.iter().zip(&self.masks) {
            let differ = ((x >> a) ^ (x >> b)) & 1;
            acc += psi[x ^ m] * table[differ];
        }
        acc
    }

    /// `out = H psi` on a register of at least `n_sites` qubits; qubits above
    /// the lattice are spectators.
    pub fn matvec_into(&self, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let n = self.n_sites();
        if psi.len() != out.len() {
            return Err(Error::DimensionMismatch { expected: psi.len(), got: out.len() });
        }
        if psi.len() < (1 << n) || !psi.len().is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: psi.len() });
        }
        let table = [self.jx - self.jy, self.jx + self.jy];
        if psi.len() >= 2 * CHUNK {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (k, o) in chunk.iter_mut().enumerate() {
                    *o = self.row(psi, base + k, &table);
                }
            });
        } else {
            for (x, o) in out.iter_mut().enumerate() {
                *o = self.row(psi, x, &table);
            }
        }
        Ok(())
    }

    /// `out = H psi` inside one parity sector of the bare lattice, with the
    /// compact indexing `k = x >> 1` (see [`sector_position`]).
    pub fn sector_matvec_into(&self, parity: usize, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let half = 1usize << (self.n_sites() - 1);
        if psi.len() != half || out.len() != half {
            return Err(Error::DimensionMismatch { expected: half, got: psi.len().min(out.len()) });
        }
        let table = [self.jx - self.jy, self.jx + self.jy];
        let p = parity & 1;
        let row = |k: usize| -> C64 {
            let x = (k << 1) | ((k.count_ones() as usize & 1) ^ p);
            let mut acc = C64::new(0.0, 0.0);
            for (&(a, b), &m) in self.bonds.iter().zip(&self.masks) {
                let differ = ((x >> a) ^ (x >> b)) & 1;
                acc += psi[(x ^ m) >> 1] * table[differ];
            }
            acc
        };
        if half >= 2 * CHUNK {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (k, o) in chunk.iter_mut().enumerate() {
                    *o = row(base + k);
                }
            });
        } else {
            for (k, o) in out.iter_mut().enumerate() {
                *o = row(k);
            }
        }
        Ok(())
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let mut out = vec![C64::new(0.0, 0.0); psi.dim()];
        self.matvec_into(psi.amplitudes(), &mut out)?;
        StateVector::from_amplitudes(out)
    }

    /// `<psi|H|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let hpsi = self.apply(psi)?;
        let num = crate::quantum::inner(psi.amplitudes(), hpsi.amplitudes());
        Ok(num.re / psi.norm_sqr())
    }

    fn check_dense(&self) -> Result<()> {
        if self.n_sites() > MAX_DENSE_SITES {
            return Err(Error::TooLarge { what: "dense Hamiltonian sites", n: self.n_sites(), max: MAX_DENSE_SITES });
        }
        Ok(())
    }

    /// Full `2^N x 2^N` matrix.
    pub fn dense_matrix(&self) -> Result<Mat<f64>> {
        self.check_dense()?;
        let dim = 1usize << self.n_sites();
        let mut h = Mat::<f64>::zeros(dim, dim);
        for x in 0..dim {
            for &m in &self.masks {
                h[(x ^ m, x)] += self.coupling(x, m);
            }
        }
        Ok(h)
    }

    /// Basis states of the lattice with `popcount % 2 == parity`, ascending.
    pub fn sector_basis(&self, parity: usize) -> Vec<usize> {
        sector_basis(self.n_sites(), parity)
    }

    /// `H` restricted to one parity sector, in the order of [`sector_basis`](Self::sector_basis).
    pub fn sector_matrix(&self, parity: usize) -> Result<Mat<f64>> {
        self.check_dense()?;
        let basis = self.sector_basis(parity);
        let d = basis.len();
        let mut h = Mat::<f64>::zeros(d, d);
        for (col, &x) in basis.iter().enumerate() {
            for &m in &self.masks {
                h[(sector_position(x ^ m), col)] += self.coupling(x, m);
            }
        }
        Ok(h)
    }
}

pub fn sector_basis(n_bits: usize, parity: usize) -> Vec<usize> {
    (0..1usize << n_bits).filter(|x| x.count_ones() as usize % 2 == parity % 2).collect()
}

/// Position of `x` inside its parity sector. Consecutive pairs `(2k, 2k+1)`
/// hold one state of each parity, so the rank is `x / 2`.
#[inline]
pub fn sector_position(x: usize) -> usize {
    x >> 1
}

/// Inverse of [`sector_position`] within the sector of the given parity.
#[inline]
pub fn sector_state(k: usize, parity: usize) -> usize {
    (k << 1) | ((k.count_ones() as usize & 1) ^ (parity & 1))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn h(lx: usize, ly: usize, jx: f64, jy: f64) -> XYHamiltonian {
        XYHamiltonian::new(LatticeGeometry::new(lx, ly).unwrap(), jx, jy).unwrap()
    }

    #[test]
    fn two_site_examples() {
        let h0 = h(2, 1, 1.0, 0.0);
        let out = h0.apply(&StateVector::basis(2, 0b00)).unwrap();
        assert!((out.amplitudes()[0b11] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(out.amplitudes()[0].norm() < 1e-15);

        let h1 = h(2, 1, 1.0, 1.2);
        let out = h1.apply(&StateVector::basis(2, 0b10)).unwrap();
        assert!((out.amplitudes()[0b01] - C64::new(2.2, 0.0)).norm() < 1e-14);
        assert!(out.amplitudes()[0b11].norm() < 1e-15);
    }

    #[test]
    fn sector_position_is_rank_within_sector() {
        for p in 0..2 {
            for (k, &x) in sector_basis(7, p).iter().enumerate() {
                assert_eq!(sector_position(x), k);
                assert_eq!(sector_state(k, p), x);
            }
        }
    }

    #[test]
    fn sector_matvec_matches_full() {
        let ham = h(4, 2, 1.0, 1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in 0..2 {
            let compact = StateVector::random(7, &mut rng);
            let mut full = vec![C64::new(0.0, 0.0); 256];
            for (k, a) in compact.amplitudes().iter().enumerate() {
                full[sector_state(k, p)] = *a;
            }
            let mut hfull = vec![C64::new(0.0, 0.0); 256];
            ham.matvec_into(&full, &mut hfull).unwrap();
            let mut hc = vec![C64::new(0.0, 0.0); 128];
            ham.sector_matvec_into(p, compact.amplitudes(), &mut hc).unwrap();
            for (k, v) in hc.iter().enumerate() {
                assert!((hfull[sector_state(k, p)] - v).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn sector_blocks_reassemble_dense_matrix() {
        let ham = h(4, 2, 1.0, 1.2);
        let full = ham.dense_matrix().unwrap();
        let mut cross = 0.0f64;
        for x in 0..256usize {
            for y in 0..256usize {
                if (x.count_ones() + y.count_ones()) % 2 == 1 {
                    cross = cross.max(full[(x, y)].abs());
                }
            }
        }
        assert_eq!(cross, 0.0);
        for p in 0..2 {
            let blk = ham.sector_matrix(p).unwrap();
            let basis = ham.sector_basis(p);
            for (r, &x) in basis.iter().enumerate() {
                for (c, &y) in basis.iter().enumerate() {
                    assert_eq!(blk[(r, c)], full[(x, y)]);
                }
            }
        }
    }

    #[test]
    fn spectator_qubits_untouched() {
        let ham = h(2, 2, 1.0, 1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let low = StateVector::random(4, &mut rng);
        let spect = StateVector::basis(2, 0b10);
        let out = ham.apply(&low.tensor(&spect)).unwrap();
        let expect = ham.apply(&low).unwrap().tensor(&spect);
        for (a, b) in out.amplitudes().iter().zip(expect.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_wrong_length() {
        let ham = h(4, 1, 1.0, 1.2);
        let mut out = vec![C64::new(0.0, 0.0); 8];
        assert!(ham.matvec_into(&vec![C64::new(0.0, 0.0); 8], &mut out).is_err());
    }
}
