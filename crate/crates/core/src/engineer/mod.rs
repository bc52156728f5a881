//! The measurement-feedback channel acting on the `N - 2` qubits outside
//! the central pair:
//!
//! `rho' = K00 rho K00^+ + K11 rho K11^+ + [tr(K01 rho K01^+) + tr(K10 rho K10^+)] rho0`
//!
//! with `K_s = <s| exp(-i H T) |I>` on the pair and `rho0 = |0...0><0...0|`.
//!
//! `H` conserves Z2 parity and `|I>` is even, so `K00`, `K11` preserve the
//! parity of the rest while `K01`, `K10` flip it. Every operator is stored as
//! parity blocks and density matrices as `(ee, oo, eo)` blocks; the channel
//! never mixes blocks except through the reset weight.

use faer::{Mat, MatRef};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGeometry, Site};
use crate::linalg::{arnoldi, ArnoldiOptions, Which};
use crate::quantum::{mutual_information_dm, DensityMatrix, PairOutcome, PairSplit, StateVector};
use crate::xy::{eig_rest_state, sector_position, sector_state, DenseSpectrum, EigVariant, XYHamiltonian, MAX_DENSE_SITES};
use crate::C64;

pub mod symmetry;

pub use symmetry::{SectorBasis, SymmetrySector};

pub const DEFAULT_PERIOD: f64 = 0.4;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Geometry, couplings and central pair of a channel, independent of `T`.
#[derive(Debug, Clone)]
pub struct ChannelGeometry {
    pub geometry: LatticeGeometry,
    pub jx: f64,
    pub jy: f64,
    /// `(left, right)` central pair.
    pub pair: (Site, Site),
    pub variant: EigVariant,
}

impl ChannelGeometry {
    /// Central pair in `row`, or the default row when `None`.
    pub fn new(geometry: LatticeGeometry, jx: f64, jy: f64, row: Option<usize>) -> Result<Self> {
        if geometry.n_sites() < 4 {
            return Err(Error::Geometry(format!("the channel needs at least 4 sites, {geometry} has {}", geometry.n_sites())));
        }
        let row = row.unwrap_or_else(|| geometry.default_central_row());
        let pair = geometry.central_pair_in_row(row)?;
        let variant = EigVariant::with_central_i(&geometry, row);
        Ok(ChannelGeometry { geometry, jx, jy, pair, variant })
    }

    pub fn n_rest(&self) -> usize {
        self.geometry.n_sites() - 2
    }

    pub fn split(&self) -> PairSplit {
        let g = &self.geometry;
        PairSplit::new(g.n_sites(), g.site_index(self.pair.0).expect("in bounds"), g.site_index(self.pair.1).expect("in bounds"))
            .expect("distinct pair")
    }

    /// `|EIG_rest>` on the `N - 2` rest qubits.
    pub fn target(&self) -> StateVector {
        eig_rest_state(&self.geometry, self.variant, self.pair).expect("central pair is a mirror pair")
    }

    /// Rest-qubit indices of the mirror pairs with the largest and the
    /// smallest separation (central pair excluded).
    pub fn far_near_pairs(&self) -> ((usize, usize), (usize, usize)) {
        let g = &self.geometry;
        let split = self.split();
        let row = self.pair.0.j;
        let pairs: Vec<(Site, Site)> = g.mirror_pairs().into_iter().filter(|&(l, _)| l != self.pair.0).collect();
        let far = pairs
            .iter()
            .min_by_key(|(l, _)| (l.i, std::cmp::Reverse(l.j.abs_diff(row)), l.j))
            .expect("at least one other pair");
        let near = pairs
            .iter()
            .min_by_key(|(l, _)| (std::cmp::Reverse(l.i), l.j.abs_diff(row), l.j))
            .expect("at least one other pair");
        let rq = |(l, r): &(Site, Site)| {
            (
                split.rest_qubit(g.site_index(*l).unwrap()).unwrap(),
                split.rest_qubit(g.site_index(*r).unwrap()).unwrap(),
            )
        };
        (rq(far), rq(near))
    }
}

/// Reusable data for building channels at many periods `T`.
#[derive(Debug)]
pub struct ChannelBuilder {
    cg: ChannelGeometry,
    spectrum: DenseSpectrum,
    /// `V^T B_p` for rest-input parity `p`, where `B_p` maps `|r>` to `|r>|I>`.
    projected: [Mat<f64>; 2],
}

impl ChannelBuilder {
    pub fn new(cg: ChannelGeometry) -> Result<Self> {
        if cg.geometry.n_sites() > MAX_DENSE_SITES {
            return Err(Error::TooLarge {
                what: "channel sites (use the trajectory simulation for larger systems)",
                n: cg.geometry.n_sites(),
                max: MAX_DENSE_SITES,
            });
        }
        let h = XYHamiltonian::new(cg.geometry, cg.jx, cg.jy)?;
        let spectrum = DenseSpectrum::new(&h)?;
        let split = cg.split();
        let half_rest = 1usize << (cg.n_rest() - 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let project = |p: usize| -> Mat<f64> {
            let v = &spectrum.sector(p).vectors;
            Mat::from_fn(v.ncols(), half_rest, |k, c| {
                let r = sector_state(c, p);
                let x0 = sector_position(split.embed(r, 0b00));
                let x3 = sector_position(split.embed(r, 0b11));
                s * (v[(x0, k)] + v[(x3, k)])
            })
        };
        let projected = [project(0), project(1)];
        Ok(ChannelBuilder { cg, spectrum, projected })
    }

    pub fn channel_geometry(&self) -> &ChannelGeometry {
        &self.cg
    }

    pub fn build(&self, period: f64) -> Result<ChannelSpec> {
        if !(period >= 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period T must be finite and non-negative, got {period}")));
        }
        let split = self.cg.split();
        let half_rest = 1usize << (self.cg.n_rest() - 1);
        let mut blocks: [[Mat<C64>; 4]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| Mat::zeros(0, 0)));
        for p in 0..2 {
            let sec = self.spectrum.sector(p);
            let w = &self.projected[p];
            let d = sec.dim();
            let mut cre = Mat::<f64>::zeros(d, half_rest);
            let mut cim = Mat::<f64>::zeros(d, half_rest);
            for k in 0..d {
                let (sn, cs) = (-sec.energies[k] * period).sin_cos();
                for c in 0..half_rest {
                    cre[(k, c)] = cs * w[(k, c)];
                    cim[(k, c)] = sn * w[(k, c)];
                }
            }
            let ore = &sec.vectors * &cre;
            let oim = &sec.vectors * &cim;
            for outcome in ALL_OUTCOMES {
                let local = local_index(outcome);
                blocks[p][outcome.index()] = Mat::from_fn(half_rest, half_rest, |r, c| {
                    let q = p ^ outcome.is_odd() as usize;
                    let x = sector_position(split.embed(sector_state(r, q), local));
                    C64::new(ore[(x, c)], oim[(x, c)])
                });
            }
        }
        ChannelSpec::from_blocks(self.cg.clone(), period, blocks)
    }
}

const ALL_OUTCOMES: [PairOutcome; 4] = [PairOutcome::O00, PairOutcome::O01, PairOutcome::O10, PairOutcome::O11];

/// `b(q1) + 2 b(q2)` for an outcome, as used by [`PairSplit`].
fn local_index(o: PairOutcome) -> usize {
    let (b1, b2) = o.bits();
    b1 as usize + 2 * b2 as usize
}

/// Convenience wrapper: builds the spectrum and the channel at one `T`.
pub fn build_kraus(geometry: LatticeGeometry, h: &XYHamiltonian, period: f64) -> Result<ChannelSpec> {
    if h.geometry() != &geometry {
        return Err(Error::InvalidArgument("Hamiltonian geometry differs from the channel geometry".into()));
    }
    ChannelBuilder::new(ChannelGeometry::new(geometry, h.jx(), h.jy(), None)?)?.build(period)
}

/// The four Kraus operators in parity blocks plus the reset data.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    cg: ChannelGeometry,
    period: f64,
    /// `blocks[p][s]`: `K_s` restricted to rest inputs of parity `p`
    /// (outputs have parity `p ^ parity(s)`), compact sector indexing.
    blocks: [[Mat<C64>; 4]; 2],
    /// `Q_p = sum_{s odd} K_s^+ K_s` on parity `p`: the reset probability.
    reset: [Mat<C64>; 2],
    target_even: Vec<C64>,
}

impl ChannelSpec {
    fn from_blocks(cg: ChannelGeometry, period: f64, blocks: [[Mat<C64>; 4]; 2]) -> Result<Self> {
        let reset = [0, 1].map(|p| {
            let a = &blocks[p][PairOutcome::O01.index()];
            let b = &blocks[p][PairOutcome::O10.index()];
            a.adjoint() * a + b.adjoint() * b
        });
        let target = cg.target();
        let tpar = target.amplitudes().iter().position(|a| *a != ZERO).map(|x| x.count_ones() % 2).unwrap_or(0);
        if tpar != 0 {
            return Err(Error::Geometry("target rest state must have even parity".into()));
        }
        let half = target.dim() / 2;
        let target_even = (0..half).map(|k| target.amplitudes()[sector_state(k, 0)]).collect();
        Ok(ChannelSpec { cg, period, blocks, reset, target_even })
    }

    pub fn channel_geometry(&self) -> &ChannelGeometry {
        &self.cg
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n_rest(&self) -> usize {
        self.cg.n_rest()
    }

    pub fn block(&self, parity: usize, outcome: PairOutcome) -> MatRef<'_, C64> {
        self.blocks[parity % 2][outcome.index()].as_ref()
    }

    /// Full `2^(N-2)` square Kraus operator.
    pub fn kraus(&self, outcome: PairOutcome) -> Mat<C64> {
        let n = self.n_rest();
        let dim = 1usize << n;
        let mut k = Mat::<C64>::zeros(dim, dim);
        for p in 0..2 {
            let q = p ^ outcome.is_odd() as usize;
            let b = &self.blocks[p][outcome.index()];
            for c in 0..b.ncols() {
                for r in 0..b.nrows() {
                    k[(sector_state(r, q), sector_state(c, p))] = b[(r, c)];
                }
            }
        }
        k
    }

    /// `rho0 = |0...0><0...0|` on the rest.
    pub fn rho0(&self) -> DensityMatrix {
        DensityMatrix::basis(self.n_rest(), 0)
    }

    pub fn target(&self) -> StateVector {
        self.cg.target()
    }

    /// `|| sum_s K_s^+ K_s - 1 ||_max`.
    pub fn completeness_error(&self) -> f64 {
        let mut err = 0.0f64;
        for p in 0..2 {
            let mut acc = self.reset[p].clone();
            for s in [PairOutcome::O00, PairOutcome::O11] {
                let b = &self.blocks[p][s.index()];
                acc += b.adjoint() * b;
            }
            for r in 0..acc.nrows() {
                for c in 0..acc.ncols() {
                    let want = if r == c { 1.0 } else { 0.0 };
                    err = err.max((acc[(r, c)] - C64::new(want, 0.0)).norm());
                }
            }
        }
        err
    }

    /// `tr(Q rho)`: probability that the next measurement gives 01 or 10.
    pub fn reset_probability(&self, rho: &BlockDensity) -> f64 {
        trace_product(&self.reset[0], &rho.ee) + trace_product(&self.reset[1], &rho.oo)
    }

    /// One application of the channel. With `post_select` the reset terms
    /// are dropped and the result renormalised; the returned weight is the
    /// reset probability of the input in both cases.
    pub fn apply_blocks(&self, rho: &BlockDensity, post_select: bool) -> (BlockDensity, f64) {
        let p_reset = self.reset_probability(rho);
        let keep = [PairOutcome::O00, PairOutcome::O11];
        let mut ee = self.map_ee(&rho.ee, &keep);
        let mut oo = self.map_oo(&rho.oo, &keep);
        let mut eo = self.map_eo(&rho.eo, &keep);
        if post_select {
            let norm = 1.0 - p_reset;
            if norm > 0.0 {
                let s = faer::Scale(C64::new(1.0 / norm, 0.0));
                ee *= s;
                oo *= s;
                eo *= s;
            }
        } else {
            ee[(0, 0)] += C64::new(p_reset, 0.0);
        }
        (BlockDensity { ee, oo, eo }, p_reset)
    }

    fn map_ee(&self, x: &Mat<C64>, keep: &[PairOutcome]) -> Mat<C64> {
        sandwich(keep.iter().map(|s| (&self.blocks[0][s.index()], &self.blocks[0][s.index()])), x)
    }

    fn map_oo(&self, x: &Mat<C64>, keep: &[PairOutcome]) -> Mat<C64> {
        sandwich(keep.iter().map(|s| (&self.blocks[1][s.index()], &self.blocks[1][s.index()])), x)
    }

    fn map_eo(&self, x: &Mat<C64>, keep: &[PairOutcome]) -> Mat<C64> {
        sandwich(keep.iter().map(|s| (&self.blocks[0][s.index()], &self.blocks[1][s.index()])), x)
    }

    /// `<EIG_rest| rho |EIG_rest>`.
    pub fn fidelity(&self, rho: &BlockDensity) -> f64 {
        let t = &self.target_even;
        let mut f = ZERO;
        for c in 0..t.len() {
            if t[c] == ZERO {
                continue;
            }
            for r in 0..t.len() {
                f += t[r].conj() * rho.ee[(r, c)] * t[c];
            }
        }
        f.re
    }

    /// `M(rho)` on a full density matrix.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_rest() {
            return Err(Error::DimensionMismatch { expected: self.n_rest(), got: rho.n_qubits() });
        }
        let b = BlockDensity::from_density(rho);
        self.apply_blocks(&b, false).0.to_density()
    }
}

/// `sum_k A_k X B_k^+`.
fn sandwich<'a>(terms: impl Iterator<Item = (&'a Mat<C64>, &'a Mat<C64>)>, x: &Mat<C64>) -> Mat<C64> {
    let mut acc: Option<Mat<C64>> = None;
    for (a, b) in terms {
        let ax = a * x;
        let term = &ax * b.adjoint();
        acc = Some(match acc {
            Some(m) => m + term,
            None => term,
        });
    }
    acc.unwrap_or_else(|| Mat::zeros(x.nrows(), x.ncols()))
}

/// `tr(A B)`.
fn trace_product_c(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let mut t = ZERO;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            t += a[(r, c)] * b[(c, r)];
        }
    }
    t
}

fn trace_product(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut t = ZERO;
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            t += a[(r, c)] * b[(c, r)];
        }
    }
    t.re
}

/// `apply_channel(ch, rho)`.
pub fn apply_channel(ch: &ChannelSpec, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ch.apply(rho)
}

/// A rest density matrix split by parity: `ee`, `oo` and `eo` (`oe = eo^+`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    pub ee: Mat<C64>,
    pub oo: Mat<C64>,
    pub eo: Mat<C64>,
}

impl BlockDensity {
    /// `|0...0><0...0|` on `n` qubits.
    pub fn zero_state(n: usize) -> Self {
        let h = 1usize << (n - 1);
        let mut ee = Mat::zeros(h, h);
        ee[(0, 0)] = C64::new(1.0, 0.0);
        BlockDensity { ee, oo: Mat::zeros(h, h), eo: Mat::zeros(h, h) }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        let h = rho.dim() / 2;
        let m = rho.matrix();
        let pick = |p: usize, q: usize| Mat::from_fn(h, h, |r, c| m[(sector_state(r, p), sector_state(c, q))]);
        BlockDensity { ee: pick(0, 0), oo: pick(1, 1), eo: pick(0, 1) }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        Self::from_density(&DensityMatrix::from_pure(psi))
    }

    pub fn n_qubits(&self) -> usize {
        (self.ee.nrows() * 2).trailing_zeros() as usize
    }

    #[inline]
    pub fn entry(&self, x: usize, y: usize) -> C64 {
        let (px, py) = (x.count_ones() % 2, y.count_ones() % 2);
        let (r, c) = (sector_position(x), sector_position(y));
        match (px, py) {
            (0, 0) => self.ee[(r, c)],
            (1, 1) => self.oo[(r, c)],
            (0, 1) => self.eo[(r, c)],
            _ => self.eo[(c, r)].conj(),
        }
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        let dim = self.ee.nrows() * 2;
        DensityMatrix::from_matrix(Mat::from_fn(dim, dim, |r, c| self.entry(r, c)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.ee.nrows()).map(|k| self.ee[(k, k)].re + self.oo[(k, k)].re).sum()
    }

    /// `tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        let f = |m: &Mat<C64>| m.col_iter().flat_map(|c| c.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>()).sum::<f64>();
        f(&self.ee) + f(&self.oo) + 2.0 * f(&self.eo)
    }

    /// Second Renyi entropy in nats.
    pub fn renyi2(&self) -> f64 {
        -self.purity().ln()
    }

    /// Two-qubit reduced density matrix of rest qubits `(q1, q2)`.
    pub fn reduce_pair(&self, q1: usize, q2: usize) -> Result<DensityMatrix> {
        let n = self.n_qubits();
        let split = PairSplit::new(n, q1, q2)?;
        let mut m = Mat::<C64>::zeros(4, 4);
        for r in 0..1usize << (n - 2) {
            for a in 0..4 {
                for b in 0..4 {
                    m[(a, b)] += self.entry(split.embed(r, a), split.embed(r, b));
                }
            }
        }
        DensityMatrix::from_matrix(m)
    }

    /// Largest deviation from Hermiticity across the diagonal blocks.
    pub fn hermiticity_error(&self) -> f64 {
        let mut e = 0.0f64;
        for m in [&self.ee, &self.oo] {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    e = e.max((m[(r, c)] - m[(c, r)].conj()).norm());
                }
            }
        }
        e
    }
}

#[derive(Debug, Clone)]
pub struct GapResult {
    pub lambda1: C64,
    /// Second largest eigenvalue by modulus.
    pub lambda2: C64,
    /// `1 - |lambda2|`.
    pub gap: f64,
    /// Row and column sectors of the operator block carrying `lambda2`
    /// (`None` from [`channel_gap_full`]).
    pub lambda2_sectors: Option<(SymmetrySector, SymmetrySector)>,
    /// Frobenius distance between the fixed point and `|EIG_rest><EIG_rest|`.
    pub fixed_point_error: f64,
    /// Per-block details (empty from [`channel_gap_full`]).
    pub blocks: Vec<BlockGap>,
    pub matvecs: usize,
}

/// Outcome for one operator block `(row, col)` of [`channel_gap`].
#[derive(Debug, Clone)]
pub struct BlockGap {
    pub row: usize,
    pub col: usize,
    /// Largest eigenvalue found in the block (for the trivial block: apart
    /// from the fixed point).
    pub value: C64,
    /// Upper bound on the rest of the block's spectrum, where one was used
    /// instead of a solve.
    pub bound: Option<f64>,
    pub matvecs: usize,
}

fn vec_op<'a>(
    rows: usize,
    cols: usize,
    f: impl Fn(&Mat<C64>) -> Mat<C64> + 'a,
) -> impl FnMut(&[C64], &mut [C64]) -> Result<()> + 'a {
    move |x, y| {
        let xm = MatRef::from_column_major_slice(x, rows, cols);
        let out = f(&xm.to_owned());
        for c in 0..cols {
            y[c * rows..(c + 1) * rows].copy_from_slice(out.col_as_slice(c));
        }
        Ok(())
    }
}

/// Largest-modulus eigenvalue of a small dense matrix.
fn dense_top(m: &Mat<C64>) -> Result<C64> {
    if m.nrows() == 0 {
        return Ok(ZERO);
    }
    let ev = m.eigenvalues().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(ev.into_iter().fold(ZERO, |b, z| if z.norm() > b.norm() { z } else { b }))
}

/// Orthonormal complement of the unit vector `psi`, from a Householder
/// reflection mapping `psi` onto the first axis.
fn complement(psi: &[C64]) -> Mat<C64> {
    let d = psi.len();
    let phase = if psi[0].norm() > 0.0 { psi[0] / psi[0].norm() } else { C64::new(1.0, 0.0) };
    let mut w = psi.to_vec();
    w[0] += phase;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    Mat::from_fn(d, d - 1, |r, c| {
        let id = if r == c + 1 { C64::new(1.0, 0.0) } else { ZERO };
        id - w[r] * w[c + 1].conj() * (2.0 / ww)
    })
}

/// Spectral gap of the channel from its symmetry blocks (see [`symmetry`]).
///
/// An operator block `X_ab` between sectors `a` and `b` evolves as
/// `Phi_ab(X) = sum_s A_s^a X (A_s^b)^+` for `s` in {00, 11}; the reset adds
/// `tr(Q X) |0><0|` to the trivial block only, so the full map is block
/// triangular and its spectrum is the union of the block spectra.
///
/// In the trivial sector the target `psi` is a common eigenvector,
/// `A_s psi = a_s psi`, and `Q psi = 0`. Writing operators in the basis
/// `(psi, psi_perp)` makes the trivial block triangular again: the fixed
/// point, the `psi`-row map `x -> sum_s a_s x D_s^+` (dense), and the map on
/// the complement `X -> sum_s D_s X D_s^+ + tr(Q X) |0><0|` with
/// `D_s = V^+ A_s V`. The last one, like every diagonal block, is a positive
/// map, so its spectral radius is its rightmost eigenvalue, which Arnoldi
/// finds by real part.
///
/// Off-diagonal blocks need no solve. By Cauchy-Schwarz
/// `rho(Phi_ab) <= sqrt(rho(Phi_aa) rho(Phi_bb))`, which never exceeds the
/// larger diagonal radius. For `(0, b)` the same bound covers the complement
/// rows, and the `psi` row is the dense map `x -> sum_s a_s x (A_s^b)^+`.
/// `opts.nev` and `opts.which` are ignored.
pub fn channel_gap(ch: &ChannelSpec, opts: &ArnoldiOptions) -> Result<GapResult> {
    let bases = symmetry::sector_bases(&ch.cg);
    let keep = [PairOutcome::O00, PairOutcome::O11];
    let kraus: Vec<[Mat<C64>; 2]> = bases
        .iter()
        .map(|b| keep.map(|s| SectorBasis::project(&ch.blocks[b.label.parity][s.index()], b, b)))
        .collect();
    let q0 = SectorBasis::project(&ch.reset[0], &bases[0], &bases[0]);
    let perron = ArnoldiOptions { nev: 1, which: Which::LargestReal, ..*opts };

    // fixed point
    let psi = bases[0].project_vector(&ch.target_even);
    let d0 = psi.len();
    let p = Mat::from_fn(d0, d0, |r, c| psi[r] * psi[c].conj());
    let mut mp = sandwich(kraus[0].iter().zip(kraus[0].iter()), &p);
    mp[(0, 0)] += trace_product_c(&q0, &p);
    let lambda1 = trace_product_c(&p, &mp);
    let fixed_point_error = (&mp - &p).norm_l2();
    let a: Vec<C64> = kraus[0].iter().map(|k| (0..d0).map(|r| psi[r].conj() * (0..d0).map(|c| k[(r, c)] * psi[c]).sum::<C64>()).sum()).collect();
    let dark = kraus[0]
        .iter()
        .zip(&a)
        .map(|(k, &ak)| (0..d0).map(|r| ((0..d0).map(|c| k[(r, c)] * psi[c]).sum::<C64>() - ak * psi[r]).norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if dark > 1e-8 || fixed_point_error > 1e-8 {
        return Err(Error::Linalg(format!(
            "target is not a fixed point of the channel (residual {fixed_point_error:.3e}, eigenvector residual {dark:.3e})"
        )));
    }

    let mut blocks = Vec::new();
    let mut matvecs = 0;

    // trivial block: complement map and psi row
    let v = complement(&psi);
    let dq = d0 - 1;
    let dmat: Vec<Mat<C64>> = kraus[0].iter().map(|k| v.adjoint() * k * &v).collect();
    let qq = v.adjoint() * &q0 * &v;
    let e: Vec<C64> = (0..dq).map(|r| v[(0, r)].conj()).collect();
    let r_qq = if dq == 0 {
        0.0
    } else {
        let op = |x: &Mat<C64>| {
            let mut y = sandwich(dmat.iter().zip(dmat.iter()), x);
            let t = trace_product_c(&qq, x);
            for c in 0..dq {
                for r in 0..dq {
                    y[(r, c)] += t * e[r] * e[c].conj();
                }
            }
            y
        };
        let res = arnoldi(dq * dq, vec_op(dq, dq, op), None, &perron)?;
        matvecs += res.matvecs;
        res.values[0].re
    };
    let row0 = Mat::from_fn(dq, dq, |r, c| a[0] * dmat[0][(r, c)].conj() + a[1] * dmat[1][(r, c)].conj());
    let x0 = dense_top(&row0)?;
    let trivial = if x0.norm() > r_qq { x0 } else { C64::new(r_qq, 0.0) };
    blocks.push(BlockGap { row: 0, col: 0, value: trivial, bound: None, matvecs });
    let mut best = (trivial, 0, 0);

    let mut radius = vec![r_qq; bases.len()];
    for i in 1..bases.len() {
        let di = bases[i].dim();
        let ki = &kraus[i];
        let res = arnoldi(di * di, vec_op(di, di, |x| sandwich(ki.iter().zip(ki.iter()), x)), None, &perron)?;
        matvecs += res.matvecs;
        radius[i] = res.values[0].re;
        let l = C64::new(radius[i], 0.0);
        blocks.push(BlockGap { row: i, col: i, value: l, bound: None, matvecs: res.matvecs });
        if l.norm() > best.0.norm() {
            best = (l, i, i);
        }
    }
    for j in 1..bases.len() {
        let row = Mat::from_fn(bases[j].dim(), bases[j].dim(), |r, c| a[0] * kraus[j][0][(r, c)].conj() + a[1] * kraus[j][1][(r, c)].conj());
        let l = dense_top(&row)?;
        blocks.push(BlockGap { row: 0, col: j, value: l, bound: Some((radius[0] * radius[j]).sqrt()), matvecs: 0 });
        if l.norm() > best.0.norm() {
            best = (l, 0, j);
        }
    }

    let (lambda2, i, j) = best;
    Ok(GapResult {
        lambda1,
        lambda2,
        gap: 1.0 - lambda2.norm(),
        lambda2_sectors: Some((bases[i].label.clone(), bases[j].label.clone())),
        fixed_point_error,
        blocks,
        matvecs,
    })
}

/// [`channel_gap`] at each period, sharing one spectrum; periods run in
/// parallel and results keep the input order.
pub fn gap_sweep(builder: &ChannelBuilder, periods: &[f64], opts: &ArnoldiOptions) -> Result<Vec<GapResult>> {
    periods.par_iter().map(|&t| channel_gap(&builder.build(t)?, opts)).collect()
}

/// Gap from a single Arnoldi run on the full vectorised channel (column
/// stacking). Intended for small systems and cross-checks.
pub fn channel_gap_full(ch: &ChannelSpec, opts: &ArnoldiOptions) -> Result<GapResult> {
    let dim = 1usize << ch.n_rest();
    let op = |x: &[C64], y: &mut [C64]| -> Result<()> {
        let m = MatRef::from_column_major_slice(x, dim, dim).to_owned();
        // general (not necessarily Hermitian) input: apply blockwise on the full matrix
        let kraus: Vec<Mat<C64>> = ALL_OUTCOMES.iter().map(|&o| ch.kraus(o)).collect();
        let mut out = Mat::<C64>::zeros(dim, dim);
        for o in [PairOutcome::O00, PairOutcome::O11] {
            let k = &kraus[o.index()];
            out += &(k * &m) * k.adjoint();
        }
        let mut w = ZERO;
        for o in [PairOutcome::O01, PairOutcome::O10] {
            let k = &kraus[o.index()];
            let km = &(k * &m) * k.adjoint();
            w += (0..dim).map(|i| km[(i, i)]).sum::<C64>();
        }
        out[(0, 0)] += w;
        for c in 0..dim {
            for r in 0..dim {
                y[c * dim + r] = out[(r, c)];
            }
        }
        Ok(())
    };
    let res = arnoldi(dim * dim, op, None, &ArnoldiOptions { nev: opts.nev.max(2), ..*opts })?;
    let v = &res.vectors[0];
    let tr: C64 = (0..dim).map(|k| v[k * dim + k]).sum();
    let target = ch.target();
    let t = target.amplitudes();
    // Hermitian part of the normalised eigenvector, compared with the target projector
    let mut err = 0.0;
    for c in 0..dim {
        for r in 0..dim {
            let x = (v[c * dim + r] / tr + (v[r * dim + c] / tr).conj()) * 0.5;
            err += (x - t[r] * t[c].conj()).norm_sqr();
        }
    }
    let fixed_point_error = err.sqrt();
    Ok(GapResult {
        lambda1: res.values[0],
        lambda2: res.values[1],
        gap: 1.0 - res.values[1].norm(),
        lambda2_sectors: None,
        fixed_point_error,
        blocks: Vec::new(),
        matvecs: res.matvecs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub fidelity: f64,
    /// Renyi-2 entropy in nats.
    pub s2: f64,
    /// Mutual information in bits.
    pub mi_far: f64,
    pub mi_near: f64,
    /// Probability that measurement `n + 1` triggers a reset.
    pub p_reset: f64,
    pub trace: f64,
}

/// Iterates the channel `n_steps` times from `rho0` and records the
/// diagnostics before each step (rows `0..=n_steps`).
pub fn run_channel_iteration(ch: &ChannelSpec, n_steps: usize, post_select: bool) -> Result<Vec<IterationRecord>> {
    let (far, near) = ch.cg.far_near_pairs();
    let mut rho = BlockDensity::zero_state(ch.n_rest());
    let mut out = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        let p_reset = ch.reset_probability(&rho);
        out.push(IterationRecord {
            n,
            fidelity: ch.fidelity(&rho),
            s2: rho.renyi2(),
            mi_far: mutual_information_dm(&rho.reduce_pair(far.0, far.1)?, 0, 1)?,
            mi_near: mutual_information_dm(&rho.reduce_pair(near.0, near.1)?, 0, 1)?,
            p_reset,
            trace: rho.trace(),
        });
        if n < n_steps {
            rho = ch.apply_blocks(&rho, post_select).0;
        }
    }
    Ok(out)
}

/// Exact iterates `rho^(0..=n_steps)` as block densities.
pub fn channel_iterates(ch: &ChannelSpec, n_steps: usize, post_select: bool) -> Vec<BlockDensity> {
    let mut rho = BlockDensity::zero_state(ch.n_rest());
    let mut out = Vec::with_capacity(n_steps + 1);
    for n in 0..=n_steps {
        if n > 0 {
            rho = ch.apply_blocks(&rho, post_select).0;
        }
        out.push(rho.clone());
    }
    out
}
