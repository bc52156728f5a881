//! Matrix-free Arnoldi with thick restarts for the dominant eigenvalues of a
//! general (non-Hermitian) linear map.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::StateVector;
use crate::C64;

const PAR_LEN: usize = 1 << 14;

/// Which end of the spectrum [`arnoldi`] targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Which {
    #[default]
    LargestModulus,
    /// Largest real part. For a positive map the spectral radius is an
    /// eigenvalue, so this finds it without being pulled towards other
    /// eigenvalues of nearly the same modulus.
    LargestReal,
}

impl Which {
    fn key(self, z: C64) -> f64 {
        match self {
            Which::LargestModulus => z.norm(),
            Which::LargestReal => z.re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArnoldiOptions {
    /// Number of eigenvalues wanted.
    pub nev: usize,
    pub which: Which,
    pub krylov_dim: usize,
    /// Ritz residuals must fall below `tol * max|theta|`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Seed for the random start vector when none is given.
    pub seed: u64,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        ArnoldiOptions { nev: 2, which: Which::LargestModulus, krylov_dim: 40, tol: 1e-9, max_restarts: 5000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Sorted by decreasing modulus or real part.
    pub values: Vec<C64>,
    /// Unit-norm Ritz vectors, same order as `values`.
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub restarts: usize,
    pub matvecs: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    if a.len() >= PAR_LEN {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

fn norm(a: &[C64]) -> f64 {
    dot(a, a).re.sqrt()
}

fn axpy(y: &mut [C64], c: C64, x: &[C64]) {
    if y.len() >= PAR_LEN {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(a, b)| *a += c * b);
    } else {
        y.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
    }
}

/// Classical Gram-Schmidt with a second pass only when the first one
/// cancels most of `w` (the DGKS test); returns the accumulated coefficients.
fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        let c: Vec<C64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, &ci) in basis.iter().zip(&c) {
            axpy(w, -ci, v);
        }
        for (hi, ci) in h.iter_mut().zip(c) {
            *hi += ci;
        }
    }
    h
}

/// `sum_c coeffs[c] * basis[c]`.
fn combine(basis: &[Vec<C64>], coeffs: impl Iterator<Item = C64>) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        axpy(&mut out, c, v);
    }
    out
}

/// Dominant eigenpairs of the `n`-dimensional map `op`.
///
/// Uses a Krylov-Schur style restart: the wanted Ritz vectors are
/// orthonormalised and kept together with the residual vector, and the
/// projected matrix is rotated accordingly.
pub fn arnoldi<F>(n: usize, mut op: F, start: Option<&[C64]>, opts: &ArnoldiOptions) -> Result<ArnoldiResult>
where
    F: FnMut(&[C64], &mut [C64]) -> Result<()>,
{
    if n == 0 || opts.nev == 0 {
        return Err(Error::InvalidArgument("Arnoldi needs n > 0 and nev > 0".into()));
    }
    let nev = opts.nev.min(n);
    let m = opts.krylov_dim.max(nev + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| StateVector::random_amplitudes(n, rng);

    let mut v0 = match start {
        Some(s) if s.len() == n && norm(s) > 0.0 => s.to_vec(),
        Some(s) if s.len() != n => return Err(Error::DimensionMismatch { expected: n, got: s.len() }),
        _ => random_vec(&mut rng),
    };
    let nv = norm(&v0);
    v0.iter_mut().for_each(|a| *a /= nv);

    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut hbar = Mat::<C64>::zeros(m + 1, m);
    let mut k = 0usize;
    let mut matvecs = 0usize;
    let mut w = vec![C64::new(0.0, 0.0); n];

    for restart in 0..=opts.max_restarts {
        let mut size = m;
        let mut exhausted = false;
        for j in k..m {
            op(&basis[j], &mut w)?;
            matvecs += 1;
            let hcol = orthogonalize(&mut w, &basis[..=j]);
            let scale = hcol.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
            for (i, c) in hcol.into_iter().enumerate() {
                hbar[(i, j)] += c;
            }
            let beta = norm(&w);
            if j + 1 == n {
                size = n;
                exhausted = true;
                break;
            }
            if beta <= 1e-12 * scale {
                // invariant subspace: continue from a fresh direction
                let mut r = random_vec(&mut rng);
                orthogonalize(&mut r, &basis[..=j]);
                let nr = norm(&r);
                r.iter_mut().for_each(|a| *a /= nr);
                hbar[(j + 1, j)] = C64::new(0.0, 0.0);
                basis.push(r);
            } else {
                hbar[(j + 1, j)] = C64::new(beta, 0.0);
                basis.push(w.iter().map(|a| a / beta).collect());
            }
        }

        let hm = Mat::from_fn(size, size, |r, c| hbar[(r, c)]);
        let eig = hm.eigen().map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let theta = eig.S().column_vector();
        let y = eig.U();
        let mut order: Vec<usize> = (0..size).collect();
        let key = |i: usize| opts.which.key(theta[i]);
        order.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap_or(std::cmp::Ordering::Equal));
        let residual = |i: usize| -> f64 {
            if exhausted {
                return 0.0;
            }
            let yn: f64 = (0..size).map(|r| y[(r, i)].norm_sqr()).sum::<f64>().sqrt();
            let b: C64 = (0..size).map(|c| hbar[(size, c)] * y[(c, i)]).sum();
            b.norm() / yn.max(1e-300)
        };
        let theta_max = order.iter().map(|&i| theta[i].norm()).fold(1e-300, f64::max);
        let residuals: Vec<f64> = order.iter().take(nev).map(|&i| residual(i)).collect();
        let converged = residuals.iter().all(|&r| r <= opts.tol * theta_max);

        if converged || exhausted {
            let mut values = Vec::with_capacity(nev);
            let mut vectors = Vec::with_capacity(nev);
            for &i in order.iter().take(nev) {
                values.push(theta[i]);
                let mut x = combine(&basis[..size], (0..size).map(|r| y[(r, i)]));
                let nx = norm(&x);
                x.iter_mut().for_each(|a| *a /= nx);
                vectors.push(x);
            }
            return Ok(ArnoldiResult { values, vectors, residuals, restarts: restart, matvecs });
        }
        if restart == opts.max_restarts {
            return Err(Error::NoConvergence {
                what: "Arnoldi eigensolver",
                detail: format!(
                    "{} restarts, {matvecs} operator applications, Ritz residuals {:?}",
                    opts.max_restarts, residuals
                ),
            });
        }

        // thick restart with p wanted Ritz vectors
        let p = (nev + (m - nev) / 2).min(size - 1).max(1);
        let yp = Mat::from_fn(size, p, |r, c| y[(r, order[c])]);
        let q = yp.qr().compute_thin_Q();
        let hq = &hm * &q;
        let hnew = q.adjoint() * &hq;
        let mut fresh = Mat::<C64>::zeros(m + 1, m);
        for r in 0..p {
            for c in 0..p {
                fresh[(r, c)] = hnew[(r, c)];
            }
        }
        for c in 0..p {
            fresh[(p, c)] = (0..size).map(|r| hbar[(size, r)] * q[(r, c)]).sum();
        }
        let mut kept: Vec<Vec<C64>> = (0..p).map(|c| combine(&basis[..size], (0..size).map(|r| q[(r, c)]))).collect();
        kept.push(basis.swap_remove(size));
        basis = kept;
        hbar = fresh;
        k = p;
    }
    unreachable!("loop returns on its final iteration")
}
