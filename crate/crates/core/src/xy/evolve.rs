use std::sync::OnceLock;

use faer::{Mat, MatRef, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::StateVector;
use crate::C64;

use super::hamiltonian::{sector_basis, XYHamiltonian};

const PAR_LEN: usize = 1 << 14;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Bound on the 2-norm error of one `evolve` call.
    pub tol: f64,
    pub krylov_dim: usize,
    /// Lattices up to this many sites use the dense spectrum.
    pub dense_max_sites: usize,
    /// Orthogonalise each Lanczos vector against the whole basis rather
    /// than the previous two.
    pub full_reorth: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { tol: 1e-9, krylov_dim: 30, dense_max_sites: 12, full_reorth: false }
    }
}

impl EvolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidArgument(format!("evolve_tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.krylov_dim < 2 {
            return Err(Error::InvalidArgument(format!("krylov_dim must be at least 2, got {}", self.krylov_dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolveStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of the per-step error estimates.
    pub error_estimate: f64,
}

/// Eigendecomposition of one parity block of `H`.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub basis: Vec<usize>,
    pub energies: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `exp(-i H t) B` for a block `B` whose rows follow `basis`.
    pub fn propagate(&self, t: f64, b: MatRef<'_, C64>) -> Mat<C64> {
        let (re, im) = split_complex(b);
        let vt = self.vectors.transpose();
        let cre = vt * &re;
        let cim = vt * &im;
        let d = self.dim();
        let k = b.ncols();
        let mut pre = Mat::<f64>::zeros(d, k);
        let mut pim = Mat::<f64>::zeros(d, k);
        for r in 0..d {
            let (s, c) = (-self.energies[r] * t).sin_cos();
            for col in 0..k {
                let (x, y) = (cre[(r, col)], cim[(r, col)]);
                pre[(r, col)] = c * x - s * y;
                pim[(r, col)] = s * x + c * y;
            }
        }
        let ore = &self.vectors * &pre;
        let oim = &self.vectors * &pim;
        Mat::from_fn(d, k, |r, c| C64::new(ore[(r, c)], oim[(r, c)]))
    }
}

pub(crate) fn split_complex(b: MatRef<'_, C64>) -> (Mat<f64>, Mat<f64>) {
    (
        Mat::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)].re),
        Mat::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)].im),
    )
}

/// Even and odd parity blocks of `H`, each fully diagonalised.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    n_sites: usize,
    sectors: [SectorSpectrum; 2],
}

impl DenseSpectrum {
    pub fn new(h: &XYHamiltonian) -> Result<Self> {
        let sector = |p: usize| -> Result<SectorSpectrum> {
            let m = h.sector_matrix(p)?;
            let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
            let s = eig.S().column_vector();
            Ok(SectorSpectrum {
                basis: sector_basis(h.n_sites(), p),
                energies: (0..s.nrows()).map(|k| s[k]).collect(),
                vectors: eig.U().to_owned(),
            })
        };
        Ok(DenseSpectrum { n_sites: h.n_sites(), sectors: [sector(0)?, sector(1)?] })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector(&self, parity: usize) -> &SectorSpectrum {
        &self.sectors[parity % 2]
    }

    /// `psi <- exp(-i H t) psi`; qubits above the lattice are spectators.
    pub fn evolve(&self, amps: &mut [C64], t: f64) -> Result<()> {
        let low = 1usize << self.n_sites;
        if amps.len() < low || amps.len() % low != 0 {
            return Err(Error::DimensionMismatch { expected: low, got: amps.len() });
        }
        let blocks = amps.len() / low;
        for sec in &self.sectors {
            let b = Mat::from_fn(sec.dim(), blocks, |r, c| amps[c * low + sec.basis[r]]);
            let out = sec.propagate(t, b.as_ref());
            for c in 0..blocks {
                for (r, &x) in sec.basis.iter().enumerate() {
                    amps[c * low + x] = out[(r, c)];
                }
            }
        }
        Ok(())
    }
}

/// Applies `exp(-i H t)` with either the dense spectrum or Krylov steps.
#[derive(Debug)]
pub struct Evolver {
    h: XYHamiltonian,
    opts: EvolveOptions,
    dense: OnceLock<DenseSpectrum>,
}

impl Evolver {
    pub fn new(h: XYHamiltonian, opts: EvolveOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Evolver { h, opts, dense: OnceLock::new() })
    }

    pub fn hamiltonian(&self) -> &XYHamiltonian {
        &self.h
    }

    pub fn options(&self) -> &EvolveOptions {
        &self.opts
    }

    pub fn uses_dense(&self) -> bool {
        self.h.n_sites() <= self.opts.dense_max_sites
    }

    /// The dense spectrum, computed on first use.
    pub fn spectrum(&self) -> Result<&DenseSpectrum> {
        if let Some(s) = self.dense.get() {
            return Ok(s);
        }
        let s = DenseSpectrum::new(&self.h)?;
        Ok(self.dense.get_or_init(|| s))
    }

    /// Evolves a lattice-only state stored in the compact indexing of one
    /// parity sector (length `2^(N-1)`).
    pub fn evolve_sector(&self, parity: usize, amps: &mut [C64], t: f64) -> Result<EvolveStats> {
        check_time(t)?;
        let half = 1usize << (self.h.n_sites() - 1);
        if amps.len() != half {
            return Err(Error::DimensionMismatch { expected: half, got: amps.len() });
        }
        if t == 0.0 {
            return Ok(EvolveStats::default());
        }
        if self.uses_dense() {
            let sec = self.spectrum()?.sector(parity);
            let out = sec.propagate(t, MatRef::from_column_major_slice(amps, half, 1));
            for (k, a) in amps.iter_mut().enumerate() {
                *a = out[(k, 0)];
            }
            Ok(EvolveStats { steps: 1, matvecs: 0, error_estimate: 0.0 })
        } else {
            let h = &self.h;
            krylov_propagate(|x, y| h.sector_matvec_into(parity, x, y), h.norm_bound(), amps, t, &self.opts)
        }
    }

    pub fn evolve(&self, psi: &mut StateVector, t: f64) -> Result<EvolveStats> {
        self.evolve_amplitudes(psi.amplitudes_mut(), t)
    }

    pub fn evolve_amplitudes(&self, amps: &mut [C64], t: f64) -> Result<EvolveStats> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(EvolveStats::default());
        }
        if self.uses_dense() {
            self.spectrum()?.evolve(amps, t)?;
            Ok(EvolveStats { steps: 1, matvecs: 0, error_estimate: 0.0 })
        } else {
            krylov_evolve(&self.h, amps, t, &self.opts)
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("evolution time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// `exp(-i H t) |psi>` with the default engine choice.
pub fn evolve(h: &XYHamiltonian, psi: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
    let ev = Evolver::new(h.clone(), EvolveOptions { tol, ..EvolveOptions::default() })?;
    let mut out = psi.clone();
    ev.evolve(&mut out, t)?;
    Ok(out)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    if a.len() >= PAR_LEN {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

fn norm(a: &[C64]) -> f64 {
    if a.len() >= PAR_LEN {
        a.par_iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    } else {
        a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `y -= c x`.
fn sub_scaled(y: &mut [C64], c: C64, x: &[C64]) {
    if y.len() >= PAR_LEN {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(a, b)| *a -= c * b);
    } else {
        y.iter_mut().zip(x).for_each(|(a, b)| *a -= c * b);
    }
}

fn scale(y: &mut [C64], c: f64) {
    if y.len() >= PAR_LEN {
        y.par_iter_mut().for_each(|a| *a *= c);
    } else {
        y.iter_mut().for_each(|a| *a *= c);
    }
}

/// Lanczos propagation with full reorthogonalisation. Each outer step builds
/// one Krylov basis and takes the largest sub-step whose a-posteriori error
/// estimate `beta_m |c_m| ||psi||` stays within `tol * dt / t`.
pub fn krylov_evolve(h: &XYHamiltonian, amps: &mut [C64], t: f64, opts: &EvolveOptions) -> Result<EvolveStats> {
    krylov_propagate(|x, y| h.matvec_into(x, y), h.norm_bound(), amps, t, opts)
}

/// [`krylov_evolve`] for any Hermitian `matvec` whose spectral radius is at
/// most `norm_bound`.
pub fn krylov_propagate<F>(
    matvec: F,
    norm_bound: f64,
    amps: &mut [C64],
    t: f64,
    opts: &EvolveOptions,
) -> Result<EvolveStats>
where
    F: Fn(&[C64], &mut [C64]) -> Result<()>,
{
    check_time(t)?;
    opts.validate()?;
    let n = amps.len();
    let m_max = opts.krylov_dim.min(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut stats = EvolveStats::default();
    let mut remaining = t;
    let scale_h = norm_bound.max(1e-300);

    while remaining > 0.0 {
        let beta0 = norm(amps);
        if beta0 == 0.0 {
            return Ok(stats);
        }
        // Lanczos
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut happy = false;
        for k in 0..m_max {
            if basis.len() <= k {
                basis.push(vec![C64::new(0.0, 0.0); n]);
            }
            if k == 0 {
                basis[0].copy_from_slice(amps);
                scale(&mut basis[0], 1.0 / beta0);
            }
            matvec(&basis[k], &mut w)?;
            stats.matvecs += 1;
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            sub_scaled(&mut w, C64::new(a, 0.0), &basis[k]);
            if k > 0 {
                sub_scaled(&mut w, C64::new(beta[k - 1], 0.0), &basis[k - 1]);
            }
            if opts.full_reorth {
                for v in basis.iter().take(k + 1) {
                    let c = dot(v, &w);
                    sub_scaled(&mut w, c, v);
                }
            }
            let b = norm(&w);
            beta.push(b);
            if b <= 1e-13 * scale_h {
                happy = true;
                break;
            }
            if k + 1 < m_max {
                if basis.len() <= k + 1 {
                    basis.push(vec![C64::new(0.0, 0.0); n]);
                }
                let (_, tail) = basis.split_at_mut(k + 1);
                tail[0].copy_from_slice(&w);
                scale(&mut tail[0], 1.0 / b);
            }
        }
        let m = alpha.len();
        let tri = Mat::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r == c + 1 {
                beta[c]
            } else if c == r + 1 {
                beta[r]
            } else {
                0.0
            }
        });
        let eig = tri.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let s = eig.U();
        let lam = eig.S().column_vector();
        let coeffs = |dt: f64| -> Vec<C64> {
            (0..m)
                .map(|k| {
                    (0..m)
                        .map(|j| C64::from_polar(s[(k, j)] * s[(0, j)], -lam[j] * dt))
                        .sum::<C64>()
                })
                .collect()
        };
        let beta_m = beta[m - 1];
        let err = |c: &[C64]| if happy { 0.0 } else { beta_m * c[m - 1].norm() * beta0 };
        let ok = |dt: f64, e: f64| e <= opts.tol * dt / t;

        let mut dt = remaining;
        let mut c = coeffs(dt);
        let mut e = err(&c);
        let mut halvings = 0;
        while !ok(dt, e) {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(Error::NoConvergence {
                    what: "Krylov propagation",
                    detail: format!("error estimate {e:.3e} at step {dt:.3e} (t = {t}, remaining {remaining:.6})"),
                });
            }
            dt *= 0.5;
            c = coeffs(dt);
            e = err(&c);
        }
        if halvings > 0 {
            // the accepted step lies in [dt, 2 dt); bisect towards the upper end
            let (mut lo, mut hi) = (dt, 2.0 * dt);
            for _ in 0..6 {
                let mid = 0.5 * (lo + hi);
                let cm = coeffs(mid);
                let em = err(&cm);
                if ok(mid, em) {
                    lo = mid;
                    c = cm;
                    e = em;
                } else {
                    hi = mid;
                }
            }
            dt = lo;
        }

        // psi <- beta0 * V c
        let first = c[0] * beta0;
        if n >= PAR_LEN {
            amps.par_iter_mut().zip(basis[0].par_iter()).for_each(|(a, v)| *a = first * v);
        } else {
            amps.iter_mut().zip(&basis[0]).for_each(|(a, v)| *a = first * v);
        }
        for (k, v) in basis.iter().enumerate().take(m).skip(1) {
            sub_scaled(amps, -(c[k] * beta0), v);
        }
        stats.steps += 1;
        stats.error_estimate += e;
        remaining = if dt >= remaining { 0.0 } else { remaining - dt };
    }
    Ok(stats)
}
