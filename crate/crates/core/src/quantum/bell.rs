//! Bell states, Bell-basis projections and computational-basis pair
//! measurements.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use super::state::{check_pair, insert_two_zero_bits, StateVector, PAR_THRESHOLD};
use crate::error::Result;
use crate::lattice::BellLabel;
use crate::C64;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Amplitudes of a Bell state indexed by `b(first) + 2 b(second)`.
pub fn bell_amplitudes(label: BellLabel) -> [C64; 4] {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(H, 0.0);
    match label {
        BellLabel::I => [h, z, z, h],
        BellLabel::Z => [h, z, z, -h],
        BellLabel::X => [z, h, h, z],
        // (sigma^y (x) 1)|I> = i(|10> - |01>)/sqrt2; |10> has the first qubit set
        BellLabel::Y => [z, C64::new(0.0, H), C64::new(0.0, -H), z],
    }
}

/// The two-qubit Bell state with the given label.
pub fn bell_state(label: BellLabel) -> StateVector {
    StateVector::from_amplitudes(bell_amplitudes(label).to_vec()).expect("length 4")
}

/// Product of Bell pairs on an `n_qubits` register; qubits not named in
/// `pairs` are left in `|0>`. Each entry is `(first, second, label)`.
pub fn bell_pair_product(n_qubits: usize, pairs: &[(usize, usize, BellLabel)]) -> Result<StateVector> {
    let mut used = vec![false; n_qubits];
    for &(a, b, _) in pairs {
        check_pair(a, b, n_qubits)?;
        for q in [a, b] {
            if std::mem::replace(&mut used[q], true) {
                return Err(crate::Error::DuplicateQubit(q));
            }
        }
    }
    let free_mask: usize = used
        .iter()
        .enumerate()
        .filter(|(_, &u)| !u)
        .fold(0, |m, (q, _)| m | (1 << q));
    let tables: Vec<_> = pairs.iter().map(|&(a, b, l)| (a, b, bell_amplitudes(l))).collect();
    let amp = |x: usize| -> C64 {
        if x & free_mask != 0 {
            return C64::new(0.0, 0.0);
        }
        let mut v = C64::new(1.0, 0.0);
        for (a, b, t) in &tables {
            let local = ((x >> a) & 1) | (((x >> b) & 1) << 1);
            v *= t[local];
            if v == C64::new(0.0, 0.0) {
                break;
            }
        }
        v
    };
    let dim = 1usize << n_qubits;
    let amps: Vec<C64> = if dim >= PAR_THRESHOLD {
        (0..dim).into_par_iter().map(amp).collect()
    } else {
        (0..dim).map(amp).collect()
    };
    StateVector::from_amplitudes(amps)
}

/// Projects qubits `(q1, q2)` onto the Bell state `label` in place without
/// renormalising, and returns the squared norm that remains.
pub fn project_bell_in_place(psi: &mut StateVector, q1: usize, q2: usize, label: BellLabel) -> Result<f64> {
    check_pair(q1, q2, psi.n_qubits())?;
    Ok(project_bell_slice(psi.amplitudes_mut(), q1, q2, label))
}

pub(crate) fn project_bell_slice(amps: &mut [C64], q1: usize, q2: usize, label: BellLabel) -> f64 {
    let bell = bell_amplitudes(label);
    let (b1, b2) = (1usize << q1, 1usize << q2);
    let (lo, hi) = (q1.min(q2), q1.max(q2));
    let mut kept = 0.0;
    for k in 0..amps.len() >> 2 {
        let base = insert_two_zero_bits(k, lo, hi);
        // local index b(q1) + 2 b(q2), matching bell_amplitudes
        let ix = [base, base | b1, base | b2, base | b1 | b2];
        let overlap: C64 = (0..4).map(|t| bell[t].conj() * amps[ix[t]]).sum();
        kept += overlap.norm_sqr();
        for t in 0..4 {
            amps[ix[t]] = overlap * bell[t];
        }
    }
    kept
}

/// Outcome of a Bell projection.
#[derive(Debug, Clone)]
pub struct BranchResult {
    /// Born probability of the branch.
    pub probability: f64,
    /// Renormalised post-measurement state; `None` when the branch has zero
    /// probability and no valid state exists.
    pub state: Option<StateVector>,
}

/// Projects `(q1, q2)` onto the Bell state `label`, returning the Born
/// probability and the renormalised state.
pub fn bell_project(psi: &StateVector, pair: (usize, usize), label: BellLabel) -> Result<BranchResult> {
    let mut s = psi.clone();
    let norm_in = psi.norm_sqr();
    let kept = project_bell_in_place(&mut s, pair.0, pair.1, label)?;
    let probability = if norm_in > 0.0 { kept / norm_in } else { 0.0 };
    if probability <= 1e-300 {
        return Ok(BranchResult { probability: 0.0, state: None });
    }
    s.normalize();
    Ok(BranchResult { probability, state: Some(s) })
}

/// Outcome of measuring two qubits in the computational basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairOutcome {
    O00,
    O01,
    O10,
    O11,
}

impl PairOutcome {
    pub const ALL: [PairOutcome; 4] = [PairOutcome::O00, PairOutcome::O01, PairOutcome::O10, PairOutcome::O11];

    /// Bits `(b(q1), b(q2))`.
    pub fn bits(self) -> (bool, bool) {
        match self {
            PairOutcome::O00 => (false, false),
            PairOutcome::O01 => (false, true),
            PairOutcome::O10 => (true, false),
            PairOutcome::O11 => (true, true),
        }
    }

    pub fn from_bits(b1: bool, b2: bool) -> Self {
        match (b1, b2) {
            (false, false) => PairOutcome::O00,
            (false, true) => PairOutcome::O01,
            (true, false) => PairOutcome::O10,
            (true, true) => PairOutcome::O11,
        }
    }

    /// Index into `ALL`: `2 b(q1) + b(q2)`.
    pub fn index(self) -> usize {
        let (a, b) = self.bits();
        2 * a as usize + b as usize
    }

    /// Outcomes 01 and 10 have opposite parities.
    pub fn is_odd(self) -> bool {
        matches!(self, PairOutcome::O01 | PairOutcome::O10)
    }
}

impl fmt::Display for PairOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.bits();
        write!(f, "{}{}", a as u8, b as u8)
    }
}

/// Born probabilities of the four outcomes, indexed like
/// [`PairOutcome::ALL`], for a state of arbitrary norm (normalised by it).
pub fn z_pair_probabilities(psi: &StateVector, q1: usize, q2: usize) -> Result<[f64; 4]> {
    check_pair(q1, q2, psi.n_qubits())?;
    let mut p = [0.0; 4];
    for (k, a) in psi.amplitudes().iter().enumerate() {
        let o = 2 * ((k >> q1) & 1) + ((k >> q2) & 1);
        p[o] += a.norm_sqr();
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    Ok(p)
}

/// Collapses `(q1, q2)` onto `outcome` in place, renormalising. Returns the
/// probability the outcome had.
pub fn collapse_z_pair(psi: &mut StateVector, q1: usize, q2: usize, outcome: PairOutcome) -> Result<f64> {
    check_pair(q1, q2, psi.n_qubits())?;
    let (w1, w2) = outcome.bits();
    let before = psi.norm_sqr();
    for (k, a) in psi.amplitudes_mut().iter_mut().enumerate() {
        if (((k >> q1) & 1) == 1) != w1 || (((k >> q2) & 1) == 1) != w2 {
            *a = C64::new(0.0, 0.0);
        }
    }
    let kept = psi.normalize();
    Ok(if before > 0.0 { kept / before } else { 0.0 })
}

/// Samples a computational-basis measurement of `(q1, q2)` with Born
/// probabilities and collapses `psi` in place. Returns the outcome and its
/// probability.
pub fn measure_z_pair_in_place<R: Rng + ?Sized>(
    psi: &mut StateVector,
    q1: usize,
    q2: usize,
    rng: &mut R,
) -> Result<(PairOutcome, f64)> {
    let probs = z_pair_probabilities(psi, q1, q2)?;
    let outcome = sample_outcome(&probs, rng);
    let p = collapse_z_pair(psi, q1, q2, outcome)?;
    Ok((outcome, p))
}

/// Draws an outcome from probabilities indexed like [`PairOutcome::ALL`].
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> PairOutcome {
    let u: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (o, &p) in PairOutcome::ALL.iter().zip(probs) {
        acc += p;
        if p > 0.0 && u < acc {
            return *o;
        }
    }
    // rounding can leave u >= acc; fall back to the last nonzero outcome
    let last = (0..4).rev().find(|&t| probs[t] > 0.0).unwrap_or(0);
    PairOutcome::ALL[last]
}

/// Non-mutating form of [`measure_z_pair_in_place`].
pub fn measure_z_pair<R: Rng + ?Sized>(
    psi: &StateVector,
    q1: usize,
    q2: usize,
    rng: &mut R,
) -> Result<(PairOutcome, StateVector, f64)> {
    let mut s = psi.clone();
    let (o, p) = measure_z_pair_in_place(&mut s, q1, q2, rng)?;
    Ok((o, s, p))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::quantum::state::PauliAxis;

    #[test]
    fn bell_amplitude_examples() {
        let i = bell_state(BellLabel::I);
        assert_eq!(i.amplitudes(), &[C64::new(H, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(H, 0.0)]);
        let z = bell_state(BellLabel::Z);
        assert_eq!(z.amplitudes()[3], C64::new(-H, 0.0));
    }

    #[test]
    fn bell_states_are_orthonormal() {
        for a in BellLabel::ALL {
            for b in BellLabel::ALL {
                let ov = bell_state(a).inner(&bell_state(b)).unwrap();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ov - C64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn phase_convention_matches_paulis_on_first_qubit() {
        for (label, axis) in [(BellLabel::X, PauliAxis::X), (BellLabel::Y, PauliAxis::Y), (BellLabel::Z, PauliAxis::Z)] {
            let mut s = bell_state(BellLabel::I);
            s.apply_pauli(0, axis).unwrap();
            let want = bell_state(label);
            for (x, y) in s.amplitudes().iter().zip(want.amplitudes()) {
                assert!((x - y).norm() < 1e-15, "{label}");
            }
        }
    }

    #[test]
    fn projecting_existing_pair_keeps_state() {
        let psi = bell_state(BellLabel::I).tensor(&StateVector::zero(1));
        let r = bell_project(&psi, (0, 1), BellLabel::I).unwrap();
        assert!((r.probability - 1.0).abs() < 1e-15);
        let s = r.state.unwrap();
        for (x, y) in s.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn projecting_product_state() {
        let psi = StateVector::zero(2);
        let r = bell_project(&psi, (0, 1), BellLabel::I).unwrap();
        assert!((r.probability - 0.5).abs() < 1e-15);
        let ov = r.state.unwrap().overlap_sqr(&bell_state(BellLabel::I)).unwrap();
        assert!((ov - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_branch_is_flagged() {
        let psi = bell_state(BellLabel::I);
        let r = bell_project(&psi, (0, 1), BellLabel::Z).unwrap();
        assert_eq!(r.probability, 0.0);
        assert!(r.state.is_none());
    }

    #[test]
    fn bell_completeness_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let psi = StateVector::random(4, &mut rng);
            for (q1, q2) in [(0, 1), (3, 1), (2, 0)] {
                let total: f64 = BellLabel::ALL
                    .iter()
                    .map(|&l| bell_project(&psi, (q1, q2), l).unwrap().probability)
                    .sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pair_order_matters_only_for_y() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let psi = StateVector::random(3, &mut rng);
        for l in BellLabel::ALL {
            let a = bell_project(&psi, (0, 2), l).unwrap().probability;
            let b = bell_project(&psi, (2, 0), l).unwrap().probability;
            // |Y> is antisymmetric, which changes only its sign under exchange
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pair_product_places_pairs() {
        let s = bell_pair_product(3, &[(2, 0, BellLabel::X)]).unwrap();
        // (|01> + |10>)/sqrt2 on (q2, q0): indices 0b001 and 0b100
        assert!((s.amplitudes()[0b001].re - H).abs() < 1e-15);
        assert!((s.amplitudes()[0b100].re - H).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-15);
        assert!(bell_pair_product(3, &[(0, 1, BellLabel::I), (1, 2, BellLabel::I)]).is_err());
    }

    #[test]
    fn z_measurement_of_bell_pair() {
        let psi = bell_state(BellLabel::I);
        let p = z_pair_probabilities(&psi, 0, 1).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[3] - 0.5).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[2], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (o, s, pr) = measure_z_pair(&psi, 0, 1, &mut rng).unwrap();
            assert!(matches!(o, PairOutcome::O00 | PairOutcome::O11));
            assert!((pr - 0.5).abs() < 1e-15);
            assert!((s.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn z_measurement_deterministic_outcome() {
        // |01>: q1 = 0, q2 = 1 -> basis index with bit 1 set
        let psi = StateVector::basis(2, 0b10);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (o, _, p) = measure_z_pair(&psi, 0, 1, &mut rng).unwrap();
        assert_eq!(o, PairOutcome::O01);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn branch_probabilities_equal_projection_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = StateVector::random(5, &mut rng);
        let p = z_pair_probabilities(&psi, 4, 1).unwrap();
        for o in PairOutcome::ALL {
            let mut s = psi.clone();
            let pr = collapse_z_pair(&mut s, 4, 1, o).unwrap();
            assert!((pr - p[o.index()]).abs() < 1e-14);
        }
    }

    #[test]
    fn z_sampling_matches_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let psi = StateVector::random(3, &mut rng);
        let p = z_pair_probabilities(&psi, 0, 2).unwrap();
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let (o, _, _) = measure_z_pair(&psi, 0, 2, &mut rng).unwrap();
            counts[o.index()] += 1;
        }
        for t in 0..4 {
            let mean = n as f64 * p[t];
            let sigma = (n as f64 * p[t] * (1.0 - p[t])).sqrt();
            assert!((counts[t] as f64 - mean).abs() <= 5.0 * sigma.max(1.0), "outcome {t}");
        }
    }
}
