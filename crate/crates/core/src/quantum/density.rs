//! Dense density matrices, partial traces, entropies and fidelities.

use faer::{Mat, Side};

use super::state::{check_qubit, StateVector};
use crate::error::{Error, Result};
use crate::C64;

/// Largest subsystem for which a dense reduced density matrix is built.
pub const MAX_DENSE_QUBITS: usize = 12;

/// A dense `2^n x 2^n` density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n_qubits: usize,
    m: Mat<C64>,
}

impl DensityMatrix {
    /// Wraps a square matrix of power-of-two size without validating it.
    pub fn from_matrix(m: Mat<C64>) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() || d == 0 || !d.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be square with power-of-two size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(DensityMatrix { n_qubits: d.trailing_zeros() as usize, m })
    }

    /// `|psi><psi| / <psi|psi>`.
    pub fn from_pure(psi: &StateVector) -> Self {
        let a = psi.amplitudes();
        let n2 = psi.norm_sqr();
        let s = if n2 > 0.0 { 1.0 / n2 } else { 0.0 };
        let m = Mat::from_fn(a.len(), a.len(), |r, c| a[r] * a[c].conj() * s);
        DensityMatrix { n_qubits: psi.n_qubits(), m }
    }

    /// `|index><index|`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let d = 1usize << n_qubits;
        let mut m = Mat::zeros(d, d);
        m[(index, index)] = C64::new(1.0, 0.0);
        DensityMatrix { n_qubits, m }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let v = C64::new(1.0 / d as f64, 0.0);
        let m = Mat::from_fn(d, d, |r, c| if r == c { v } else { C64::new(0.0, 0.0) });
        DensityMatrix { n_qubits, m }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.m
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.m[(r, c)]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.m[(k, k)]).sum()
    }

    /// `tr(rho^2)`, using Hermiticity.
    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for c in 0..d {
            for r in 0..d {
                s += self.m[(r, c)].norm_sqr();
            }
        }
        s
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e = 0.0f64;
        for c in 0..d {
            for r in 0..=c {
                e = e.max((self.m[(r, c)] - self.m[(c, r)].conj()).norm());
            }
        }
        e
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let h = Mat::from_fn(d, d, |r, c| (self.m[(r, c)] + self.m[(c, r)].conj()) * 0.5);
        h.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Linalg(format!("{e:?}")))
    }

    /// Checks Hermiticity, unit trace and positivity to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::InvalidArgument(format!("not Hermitian (error {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidArgument(format!("trace is {tr}, not 1")));
        }
        let min = self.eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < -tol {
            return Err(Error::InvalidArgument(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// `<t|rho|t>` for a target of matching dimension.
    pub fn fidelity_pure(&self, target: &StateVector) -> Result<f64> {
        fidelity_pure(self, target)
    }

    /// Partial trace keeping `keep` (in the order given; `keep[0]` becomes the
    /// least significant qubit of the result).
    pub fn reduce(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_keep(keep, self.n_qubits)?;
        let k = keep.len();
        let traced: Vec<usize> = (0..self.n_qubits).filter(|q| !keep.contains(q)).collect();
        let embed_keep = |a: usize| scatter_bits(a, keep);
        let embed_trace = |e: usize| scatter_bits(e, &traced);
        let dk = 1usize << k;
        let de = 1usize << traced.len();
        let mut out = Mat::<C64>::zeros(dk, dk);
        for b in 0..dk {
            for a in 0..dk {
                let (ia, ib) = (embed_keep(a), embed_keep(b));
                let mut s = C64::new(0.0, 0.0);
                for e in 0..de {
                    let x = embed_trace(e);
                    s += self.m[(ia | x, ib | x)];
                }
                out[(a, b)] = s;
            }
        }
        Ok(DensityMatrix { n_qubits: k, m: out })
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_same(other)?;
        let d = self.dim();
        let mut s = 0.0;
        for c in 0..d {
            for r in 0..d {
                s += (self.m[(r, c)] - other.m[(r, c)]).norm_sqr();
            }
        }
        Ok(s.sqrt())
    }

    /// Trace distance `||self - other||_1 / 2`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_same(other)?;
        let d = self.dim();
        let diff = Mat::from_fn(d, d, |r, c| {
            let x = self.m[(r, c)] - other.m[(r, c)];
            let y = self.m[(c, r)] - other.m[(c, r)];
            (x + y.conj()) * 0.5
        });
        let ev = diff
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        Ok(0.5 * ev.iter().map(|x| x.abs()).sum::<f64>())
    }

    fn check_same(&self, other: &DensityMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

fn check_keep(keep: &[usize], n_qubits: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set is empty".into()));
    }
    if keep.len() > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge { what: "reduced density matrix qubits", n: keep.len(), max: MAX_DENSE_QUBITS });
    }
    for (x, &q) in keep.iter().enumerate() {
        check_qubit(q, n_qubits)?;
        if keep[..x].contains(&q) {
            return Err(Error::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Places bit `t` of `a` at position `positions[t]`.
#[inline]
pub(crate) fn scatter_bits(a: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (t, &p)| acc | (((a >> t) & 1) << p))
}

/// Reduced density matrix of `psi` on `keep` (`keep[0]` is the least
/// significant qubit of the result).
pub fn reduced_density(psi: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let n = psi.n_qubits();
    check_keep(keep, n)?;
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << keep.len();
    let de = 1usize << traced.len();
    let amps = psi.amplitudes();
    let keep_off: Vec<usize> = (0..dk).map(|a| scatter_bits(a, keep)).collect();
    // psi reshaped as dk x de
    let mut mat = Mat::<C64>::zeros(dk, de);
    for e in 0..de {
        let x = scatter_bits(e, &traced);
        for a in 0..dk {
            mat[(a, e)] = amps[keep_off[a] | x];
        }
    }
    let mut rho = &mat * mat.adjoint();
    let n2 = psi.norm_sqr();
    if n2 > 0.0 {
        rho *= faer::Scale(C64::new(1.0 / n2, 0.0));
    }
    DensityMatrix::from_matrix(rho)
}

/// Second Renyi entropy `-ln tr(rho^2)` in nats.
pub fn renyi2(rho: &DensityMatrix) -> f64 {
    (-rho.purity().ln()).max(0.0)
}

/// Von Neumann entropy `-tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let ev = rho.eigenvalues()?;
    Ok(ev.iter().filter(|&&p| p > 1e-15).map(|&p| -p * p.ln()).sum::<f64>().max(0.0))
}

/// Mutual information `S(q1) + S(q2) - S(q1 q2)` in bits.
pub fn mutual_information(psi: &StateVector, q1: usize, q2: usize) -> Result<f64> {
    if q1 == q2 {
        return Err(Error::DuplicateQubit(q1));
    }
    let rho = reduced_density(psi, &[q1, q2])?;
    mutual_information_two_qubit(&rho)
}

/// Mutual information in bits between qubits `q1` and `q2` of a density
/// matrix.
pub fn mutual_information_dm(rho: &DensityMatrix, q1: usize, q2: usize) -> Result<f64> {
    if q1 == q2 {
        return Err(Error::DuplicateQubit(q1));
    }
    mutual_information_two_qubit(&rho.reduce(&[q1, q2])?)
}

fn mutual_information_two_qubit(rho12: &DensityMatrix) -> Result<f64> {
    let s1 = von_neumann_entropy(&rho12.reduce(&[0])?)?;
    let s2 = von_neumann_entropy(&rho12.reduce(&[1])?)?;
    let s12 = von_neumann_entropy(rho12)?;
    Ok(((s1 + s2 - s12) / std::f64::consts::LN_2).max(0.0))
}

/// `<t|rho|t>`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    let d = rho.dim();
    if target.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.dim() });
    }
    let t = target.amplitudes();
    let mut s = C64::new(0.0, 0.0);
    for c in 0..d {
        if t[c] == C64::new(0.0, 0.0) {
            continue;
        }
        let mut col = C64::new(0.0, 0.0);
        for r in 0..d {
            col += t[r].conj() * rho.m[(r, c)];
        }
        s += col * t[c];
    }
    Ok(s.re)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lattice::BellLabel;
    use crate::quantum::bell::bell_state;

    const LN2: f64 = std::f64::consts::LN_2;

    /// Brute-force partial trace: dense outer product, then explicit sum over
    /// the complement using bit extraction.
    fn brute_reduce(psi: &StateVector, keep: &[usize]) -> Vec<Vec<C64>> {
        let n = psi.n_qubits();
        let a = psi.amplitudes();
        let dk = 1 << keep.len();
        let mut out = vec![vec![C64::new(0.0, 0.0); dk]; dk];
        let sub = |x: usize| keep.iter().enumerate().fold(0, |acc, (t, &q)| acc | (((x >> q) & 1) << t));
        let rest_mask: usize = (0..n).filter(|q| !keep.contains(q)).fold(0, |m, q| m | (1 << q));
        for x in 0..a.len() {
            for y in 0..a.len() {
                if x & rest_mask == y & rest_mask {
                    out[sub(x)][sub(y)] += a[x] * a[y].conj();
                }
            }
        }
        out
    }

    #[test]
    fn partial_trace_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=6 {
            let psi = StateVector::random(n, &mut rng);
            let keeps: Vec<Vec<usize>> = match n {
                1 => vec![vec![0]],
                2 => vec![vec![1], vec![1, 0]],
                3 => vec![vec![0], vec![2, 1], vec![1, 0, 2]],
                _ => vec![vec![0], vec![n - 1, 1], vec![2, 0, n - 1]],
            };
            for keep in keeps {
                let rho = reduced_density(&psi, &keep).unwrap();
                let brute = brute_reduce(&psi, &keep);
                for (r, row) in brute.iter().enumerate() {
                    for (c, v) in row.iter().enumerate() {
                        assert!((rho.get(r, c) - v).norm() < 1e-12);
                    }
                }
                rho.validate(1e-10).unwrap();
                // density-matrix partial trace agrees too
                let full = DensityMatrix::from_pure(&psi);
                let r2 = full.reduce(&keep).unwrap();
                assert!(r2.frobenius_distance(&rho).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn reduced_states_of_bell_pair() {
        let bell = bell_state(BellLabel::I);
        let one = reduced_density(&bell, &[0]).unwrap();
        assert!((one.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!((one.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(one.get(0, 1).norm() < 1e-15);

        let both = reduced_density(&bell, &[0, 1]).unwrap();
        assert!((both.purity() - 1.0).abs() < 1e-14);
        assert!((fidelity_pure(&both, &bell).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = StateVector::random(1, &mut rng);
        let b = StateVector::random(2, &mut rng);
        let psi = a.tensor(&b);
        let rho = reduced_density(&psi, &[0]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn keep_set_validation() {
        let psi = StateVector::zero(14);
        assert!(matches!(reduced_density(&psi, &(0..13).collect::<Vec<_>>()), Err(Error::TooLarge { .. })));
        assert!(reduced_density(&psi, &[]).is_err());
        assert!(reduced_density(&psi, &[1, 1]).is_err());
        assert!(reduced_density(&psi, &[14]).is_err());
    }

    #[test]
    fn renyi_examples() {
        assert!(renyi2(&DensityMatrix::from_pure(&StateVector::zero(3))).abs() < 1e-15);
        assert!((renyi2(&DensityMatrix::maximally_mixed(1)) - LN2).abs() < 1e-15);
        for n in 1..=4 {
            let mm = DensityMatrix::maximally_mixed(n);
            assert!((renyi2(&mm) - n as f64 * LN2).abs() < 1e-13);
            assert!((von_neumann_entropy(&mm).unwrap() - renyi2(&mm)).abs() < 1e-12);
        }
        let pure = DensityMatrix::from_pure(&bell_state(BellLabel::Y));
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        assert!(renyi2(&pure).abs() < 1e-14);
    }

    #[test]
    fn mutual_information_examples() {
        let bell = bell_state(BellLabel::Z);
        assert!((mutual_information(&bell, 0, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!(mutual_information(&StateVector::zero(3), 0, 2).unwrap().abs() < 1e-12);

        // GHZ_3: S(1) = S(2) = 1 bit, S(12) = 1 bit  => I = 1
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![C64::new(0.0, 0.0); 8];
        amps[0] = C64::new(h, 0.0);
        amps[7] = C64::new(h, 0.0);
        let ghz = StateVector::from_amplitudes(amps).unwrap();
        assert!((mutual_information(&ghz, 0, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(mutual_information(&ghz, 1, 1).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = StateVector::random(3, &mut rng);
        let rho = DensityMatrix::from_pure(&t);
        assert!((fidelity_pure(&rho, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity_pure(&DensityMatrix::maximally_mixed(3), &t).unwrap() - 0.125).abs() < 1e-12);
        let s = StateVector::basis(2, 1);
        assert!(fidelity_pure(&DensityMatrix::basis(2, 2), &s).unwrap().abs() < 1e-15);
        assert!(fidelity_pure(&rho, &s).is_err());
    }

    #[test]
    fn trace_distance_basics() {
        let a = DensityMatrix::basis(1, 0);
        let b = DensityMatrix::basis(1, 1);
        assert!((a.trace_distance(&b).unwrap() - 1.0).abs() < 1e-14);
        assert!(a.trace_distance(&a).unwrap() < 1e-14);
    }
}
