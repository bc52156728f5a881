use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{BellLabel, LatticeGeometry, Site};
use crate::quantum::{bell_pair_product, PairSplit, StateVector};

use super::XYHamiltonian;

/// The four rainbow eigenstates, named by the labels of even and odd
/// checkerboard pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigVariant {
    IZ,
    ZI,
    XY,
    YX,
}

impl EigVariant {
    pub const ALL: [EigVariant; 4] = [EigVariant::IZ, EigVariant::ZI, EigVariant::XY, EigVariant::YX];

    /// `(label for i+j even, label for i+j odd)`.
    pub fn labels(self) -> (BellLabel, BellLabel) {
        use BellLabel::*;
        match self {
            EigVariant::IZ => (I, Z),
            EigVariant::ZI => (Z, I),
            EigVariant::XY => (X, Y),
            EigVariant::YX => (Y, X),
        }
    }

    /// Label of the mirror pair whose left member is `left`.
    pub fn pair_label(self, left: Site) -> BellLabel {
        let (even, odd) = self.labels();
        if (left.i + left.j) % 2 == 0 {
            even
        } else {
            odd
        }
    }

    /// The I/Z variant that puts `|I>` on the central pair in row `row`.
    pub fn with_central_i(g: &LatticeGeometry, row: usize) -> EigVariant {
        if (g.lx() / 2 + row) % 2 == 0 {
            EigVariant::IZ
        } else {
            EigVariant::ZI
        }
    }
}

impl fmt::Display for EigVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EigVariant::IZ => "IZ",
            EigVariant::ZI => "ZI",
            EigVariant::XY => "XY",
            EigVariant::YX => "YX",
        };
        f.write_str(s)
    }
}

impl FromStr for EigVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IZ" => Ok(EigVariant::IZ),
            "ZI" => Ok(EigVariant::ZI),
            "XY" => Ok(EigVariant::XY),
            "YX" => Ok(EigVariant::YX),
            _ => Err(Error::InvalidArgument(format!("unknown eigenstate variant '{s}'"))),
        }
    }
}

/// `(left, right, label)` for every mirror pair, as flattened indices.
pub fn pair_labels(g: &LatticeGeometry, v: EigVariant) -> Vec<(usize, usize, BellLabel)> {
    g.mirror_pairs()
        .into_iter()
        .map(|(l, r)| {
            let a = g.site_index(l).expect("mirror pair in bounds");
            let b = g.site_index(r).expect("mirror pair in bounds");
            (a, b, v.pair_label(l))
        })
        .collect()
}

/// The rainbow state on `N` qubits.
pub fn eig_state(g: &LatticeGeometry, v: EigVariant) -> StateVector {
    bell_pair_product(g.n_sites(), &pair_labels(g, v)).expect("mirror pairs are disjoint")
}

/// The rainbow state with the factor on mirror pair `pair` removed, on the
/// remaining `N - 2` qubits in site order.
pub fn eig_rest_state(g: &LatticeGeometry, v: EigVariant, pair: (Site, Site)) -> Result<StateVector> {
    let (l, r) = g.as_mirror_pair(pair.0, pair.1)?;
    let split = PairSplit::new(g.n_sites(), g.site_index(l)?, g.site_index(r)?)?;
    let rest: Vec<_> = pair_labels(g, v)
        .into_iter()
        .filter_map(|(a, b, lab)| Some((split.rest_qubit(a)?, split.rest_qubit(b)?, lab)))
        .collect();
    bell_pair_product(g.n_sites() - 2, &rest)
}

/// Closed-form energy of the rainbow state.
pub fn eig_energy(g: &LatticeGeometry, v: EigVariant, jx: f64, jy: f64) -> f64 {
    let s = if (g.lx() / 2) % 2 == 0 { 1.0 } else { -1.0 } * (g.ly() % 2) as f64;
    match v {
        EigVariant::IZ => -(jx - jy) * s,
        EigVariant::ZI => (jx - jy) * s,
        EigVariant::XY => -(jx + jy) * s,
        EigVariant::YX => (jx + jy) * s,
    }
}

/// `|| H|EIG_v> - E_v |EIG_v> ||`.
pub fn verify_eigenstate(h: &XYHamiltonian, v: EigVariant) -> Result<f64> {
    let g = h.geometry();
    let psi = eig_state(g, v);
    let hpsi = h.apply(&psi)?;
    let e = eig_energy(g, v, h.jx(), h.jy());
    Ok(hpsi
        .amplitudes()
        .iter()
        .zip(psi.amplitudes())
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
