use super::state::insert_two_zero_bits;

/// Splits an `n`-qubit register into a distinguished pair `(q1, q2)` and the
/// remaining `n - 2` qubits, kept in their original relative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSplit {
    pub n_qubits: usize,
    pub q1: usize,
    pub q2: usize,
}

impl PairSplit {
    pub fn new(n_qubits: usize, q1: usize, q2: usize) -> crate::Result<Self> {
        super::state::check_pair(q1, q2, n_qubits)?;
        Ok(PairSplit { n_qubits, q1, q2 })
    }

    pub fn rest_qubits(&self) -> usize {
        self.n_qubits - 2
    }

    pub fn rest_dim(&self) -> usize {
        1 << (self.n_qubits - 2)
    }

    /// Full index of rest configuration `rest` with the pair in `local`
    /// (`b(q1) + 2 b(q2)`).
    #[inline]
    pub fn embed(&self, rest: usize, local: usize) -> usize {
        let base = insert_two_zero_bits(rest, self.q1.min(self.q2), self.q1.max(self.q2));
        base | ((local & 1) << self.q1) | (((local >> 1) & 1) << self.q2)
    }

    /// Inverse of [`embed`](Self::embed): `(rest, local)`.
    #[inline]
    pub fn split(&self, full: usize) -> (usize, usize) {
        let (lo, hi) = (self.q1.min(self.q2), self.q1.max(self.q2));
        let local = ((full >> self.q1) & 1) | (((full >> self.q2) & 1) << 1);
        let low = full & ((1 << lo) - 1);
        let mid = (full >> (lo + 1)) & ((1 << (hi - lo - 1)) - 1);
        let high = full >> (hi + 1);
        (low | (mid << lo) | (high << (hi - 1)), local)
    }

    /// Rest-qubit index of full-register qubit `q` (not in the pair).
    pub fn rest_qubit(&self, q: usize) -> Option<usize> {
        if q == self.q1 || q == self.q2 || q >= self.n_qubits {
            return None;
        }
        Some(q - (q > self.q1) as usize - (q > self.q2) as usize)
    }
}
