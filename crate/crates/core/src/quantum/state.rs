//! Dense pure states and in-place gate kernels.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::C64;

/// States smaller than this are processed without rayon.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

/// A normalised (or explicitly unnormalised) amplitude vector over
/// `n_qubits` qubits, little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// Single-qubit Pauli axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// The 2x2 matrix, row-major.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliAxis::X => [[z, one], [one, z]],
            PauliAxis::Y => [[z, -i], [i, z]],
            PauliAxis::Z => [[one, z], [z, -one]],
        }
    }
}

/// A point on the Bloch sphere, `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    theta: f64,
    phi: f64,
}

impl BlochState {
    /// `theta` must lie in `[0, pi]`; `phi` is wrapped into `[0, 2 pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "Bloch angles (theta={theta}, phi={phi}) must be finite with theta in [0, pi]"
            )));
        }
        Ok(BlochState { theta, phi: phi.rem_euclid(2.0 * PI) })
    }

    pub fn zero() -> Self {
        BlochState { theta: 0.0, phi: 0.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Haar-random single-qubit pure state (uniform on the sphere).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let theta = (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos();
        BlochState { theta, phi: 2.0 * PI * v }
    }

    /// The six Pauli eigenstates: +z, -z, +x, -x, +y, -y.
    pub fn pauli_eigenstates() -> [BlochState; 6] {
        [
            BlochState { theta: 0.0, phi: 0.0 },
            BlochState { theta: PI, phi: 0.0 },
            BlochState { theta: PI / 2.0, phi: 0.0 },
            BlochState { theta: PI / 2.0, phi: PI },
            BlochState { theta: PI / 2.0, phi: PI / 2.0 },
            BlochState { theta: PI / 2.0, phi: 3.0 * PI / 2.0 },
        ]
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [C64::new(c, 0.0), C64::from_polar(s, self.phi)]
    }

    pub fn to_state(&self) -> StateVector {
        StateVector { n_qubits: 1, amps: self.amplitudes().to_vec() }
    }
}

pub(crate) fn check_qubit(q: usize, n_qubits: usize) -> Result<()> {
    if q >= n_qubits {
        Err(Error::QubitOutOfRange { qubit: q, n_qubits })
    } else {
        Ok(())
    }
}

pub(crate) fn check_pair(q1: usize, q2: usize, n_qubits: usize) -> Result<()> {
    check_qubit(q1, n_qubits)?;
    check_qubit(q2, n_qubits)?;
    if q1 == q2 {
        return Err(Error::DuplicateQubit(q1));
    }
    Ok(())
}

/// Inserts zero bits at positions `lo < hi` into `k`.
#[inline]
pub(crate) fn insert_two_zero_bits(k: usize, lo: usize, hi: usize) -> usize {
    let low_mask = (1usize << lo) - 1;
    let x = (k & low_mask) | ((k & !low_mask) << 1);
    let mid_mask = (1usize << hi) - 1;
    (x & mid_mask) | ((x & !mid_mask) << 1)
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two. No
    /// normalisation is applied.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        Ok(StateVector { n_qubits: len.trailing_zeros() as usize, amps })
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        let amps = Self::random_amplitudes(1usize << n_qubits, rng);
        StateVector { n_qubits, amps }
    }

    /// `len` unit-norm amplitudes with i.i.d. complex Gaussian directions.
    pub fn random_amplitudes<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<C64> {
        let mut amps: Vec<C64> = (0..len)
            .map(|_| {
                let (a, b) = gaussian_pair(rng);
                C64::new(a, b)
            })
            .collect();
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= n);
        amps
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        if self.amps.len() >= PAR_THRESHOLD {
            self.amps.par_iter().map(|a| a.norm_sqr()).sum()
        } else {
            self.amps.iter().map(|a| a.norm_sqr()).sum()
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm and returns the previous squared norm. A zero
    /// vector is left untouched.
    pub fn normalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 {
            self.scale(1.0 / n2.sqrt());
        }
        n2
    }

    pub fn scale(&mut self, factor: f64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(inner(&self.amps, &other.amps))
    }

    /// `|<self|other>|^2`.
    pub fn overlap_sqr(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// `self (x) other`, with `other`'s qubits placed above `self`'s.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for b in &other.amps {
            for a in &self.amps {
                amps.push(a * b);
            }
        }
        StateVector { n_qubits: self.n_qubits + other.n_qubits, amps }
    }

    /// Applies the Pauli `axis` to qubit `q` in place.
    pub fn apply_pauli(&mut self, q: usize, axis: PauliAxis) -> Result<()> {
        check_qubit(q, self.n_qubits)?;
        let bit = 1usize << q;
        let i = C64::new(0.0, 1.0);
        match axis {
            PauliAxis::Z => {
                for (k, a) in self.amps.iter_mut().enumerate() {
                    if k & bit != 0 {
                        *a = -*a;
                    }
                }
            }
            PauliAxis::X | PauliAxis::Y => {
                for k in 0..self.amps.len() {
                    if k & bit == 0 {
                        let (a0, a1) = (self.amps[k], self.amps[k | bit]);
                        if axis == PauliAxis::X {
                            self.amps[k] = a1;
                            self.amps[k | bit] = a0;
                        } else {
                            // Y|0> = i|1>, Y|1> = -i|0>
                            self.amps[k] = -i * a1;
                            self.amps[k | bit] = i * a0;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a single-qubit matrix (row-major, basis `|0>, |1>`).
    pub fn apply_single(&mut self, q: usize, u: &[[C64; 2]; 2]) -> Result<()> {
        check_qubit(q, self.n_qubits)?;
        let bit = 1usize << q;
        for k in 0..self.amps.len() {
            if k & bit == 0 {
                let (a0, a1) = (self.amps[k], self.amps[k | bit]);
                self.amps[k] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[k | bit] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Applies a 4x4 unitary to qubits `(q1, q2)`.
    ///
    /// `u` is written in the textbook basis `|q1 q2>` = `|00>, |01>, |10>,
    /// |11>`, i.e. row/column index `2*b(q1) + b(q2)`.
    pub fn apply_two_qubit(&mut self, q1: usize, q2: usize, u: &Gate2) -> Result<()> {
        check_pair(q1, q2, self.n_qubits)?;
        u.check_unitary(1e-12)?;
        self.apply_two_qubit_unchecked(q1, q2, u);
        Ok(())
    }

    pub(crate) fn apply_two_qubit_unchecked(&mut self, q1: usize, q2: usize, u: &Gate2) {
        let (b1, b2) = (1usize << q1, 1usize << q2);
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let idx = |base: usize| [base, base | b2, base | b1, base | b1 | b2];
        for k in 0..self.amps.len() >> 2 {
            let base = insert_two_zero_bits(k, lo, hi);
            let ix = idx(base);
            let v = ix.map(|x| self.amps[x]);
            for (r, &x) in ix.iter().enumerate() {
                self.amps[x] = u.0[r][0] * v[0] + u.0[r][1] * v[1] + u.0[r][2] * v[2] + u.0[r][3] * v[3];
            }
        }
    }
}

/// A two-qubit operator in the `|q1 q2>` basis (row-major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate2(pub [[C64; 4]; 4]);

impl Gate2 {
    pub fn identity() -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            row[r] = C64::new(1.0, 0.0);
        }
        Gate2(m)
    }

    /// CNOT with `q1` as control.
    pub fn cnot() -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[r][c] = C64::new(1.0, 0.0);
        }
        Gate2(m)
    }

    /// `a (x) b`, with `a` acting on `q1`.
    pub fn kron(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                m[r][c] = a[r >> 1][c >> 1] * b[r & 1][c & 1];
            }
        }
        Gate2(m)
    }

    /// Hadamard on `q1`, identity on `q2`.
    pub fn hadamard_first() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hm = [[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]];
        Gate2::kron(&hm, &identity2())
    }

    /// `CNOT (H (x) 1)`: maps `|00>` to `(|00> + |11>)/sqrt2`.
    pub fn bell_prep() -> Self {
        Gate2::cnot().mul(&Gate2::hadamard_first())
    }

    /// `self * other`.
    pub fn mul(&self, other: &Gate2) -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                *out = (0..4).map(|k| self.0[r][k] * other.0[k][c]).sum();
            }
        }
        Gate2(m)
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                *out = self.0[c][r].conj();
            }
        }
        Gate2(m)
    }

    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        let p = self.adjoint().mul(self);
        let mut dev = 0.0f64;
        for r in 0..4 {
            for c in 0..4 {
                let target = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((p.0[r][c] - C64::new(target, 0.0)).norm());
            }
        }
        if dev > tol {
            Err(Error::NotUnitary(dev))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn identity2() -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    [[one, z], [z, one]]
}

/// `<a|b>` over raw slices.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    if a.len() >= PAR_THRESHOLD {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

pub(crate) fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}
