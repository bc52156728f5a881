//! Many-body teleportation through the XY model: inject `|A>` at one edge,
//! entangle the mirror qubit with an auxiliary qubit `q_b`, evolve, and
//! post-select Bell measurements on a few mirror pairs.
//!
//! The output state of `q_b` is linear in `|A>`, so the protocol is run once
//! for each of the four lattice components `(a, beta)` (`A = |a>`, `q_b =
//! |beta>`). Their post-selected Gram matrix gives `P` and `rho_b` for every
//! `|A>` at no further cost.

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{BellLabel, LatticeGeometry, Site};
use crate::quantum::bell::project_bell_slice;
use crate::quantum::{
    bell_amplitudes, bell_pair_product, bell_project, bell_state, inner, reduced_density, BlochState, DensityMatrix, StateVector,
};
use crate::xy::{pair_labels, sector_state, EigVariant, EvolveOptions, Evolver, XYHamiltonian};
use crate::C64;

/// Post-selection probability when the scrambled branches are fully
/// thermalised: `1/4 + 3 * 4^(-E-1)`.
pub fn hp_probability(e: usize) -> f64 {
    0.25 + 3.0 * 0.25f64.powi(e as i32 + 1)
}

#[derive(Debug, Clone)]
pub struct TeleportConfig {
    pub geometry: LatticeGeometry,
    pub jx: f64,
    pub jy: f64,
    pub variant: EigVariant,
    pub state: BlochState,
    pub times: Vec<f64>,
    /// Mirror pairs `(left, right)` measured in order.
    pub measured_pairs: Vec<(Site, Site)>,
    pub injection_site: Site,
    pub evolve: EvolveOptions,
}

impl TeleportConfig {
    /// Defaults: IZ variant, `|A> = |0>`, injection at `(1, 1)` and the
    /// `e_pairs` central pairs measured.
    pub fn new(geometry: LatticeGeometry, e_pairs: usize, times: Vec<f64>) -> Result<Self> {
        let injection_site = Site::new(1, 1);
        let measured_pairs = default_measured_pairs(&geometry, injection_site, e_pairs)?;
        Ok(TeleportConfig {
            geometry,
            jx: crate::xy::DEFAULT_JX,
            jy: crate::xy::DEFAULT_JY,
            variant: EigVariant::IZ,
            state: BlochState::zero(),
            times,
            measured_pairs,
            injection_site,
            evolve: EvolveOptions::default(),
        })
    }

    /// The injection pair as `(injection, mirror)`.
    pub fn injection_pair(&self) -> Result<(Site, Site)> {
        let m = self.geometry.mirror_partner(self.injection_site)?;
        Ok((self.injection_site, m))
    }

    /// Bell label of the injection pair in the rainbow state.
    pub fn injection_label(&self) -> Result<BellLabel> {
        let (l, _) = self.geometry.as_mirror_pair(self.injection_site, self.geometry.mirror_partner(self.injection_site)?)?;
        Ok(self.variant.pair_label(l))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let (inj, mir) = self.injection_pair()?;
        let mut seen = vec![false; g.n_sites()];
        for &(a, b) in &self.measured_pairs {
            let (l, r) = g.as_mirror_pair(a, b)?;
            if l == inj || l == mir || r == inj || r == mir {
                return Err(Error::InvalidArgument(format!("measured pair {a}-{b} contains the injection pair")));
            }
            for s in [l, r] {
                let k = g.site_index(s)?;
                if std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidArgument(format!("site {s} is measured twice")));
                }
            }
        }
        for &t in &self.times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("times must be finite and non-negative, got {t}")));
            }
        }
        self.evolve.validate()
    }

    /// Measured pairs as `(left, right, label)` flattened indices.
    fn measured_labels(&self) -> Result<Vec<(usize, usize, BellLabel)>> {
        let g = &self.geometry;
        self.measured_pairs
            .iter()
            .map(|&(a, b)| {
                let (l, r) = g.as_mirror_pair(a, b)?;
                Ok((g.site_index(l)?, g.site_index(r)?, self.variant.pair_label(l)))
            })
            .collect()
    }
}

/// The `e` mirror pairs nearest the central column (ties by row), skipping
/// the pair that contains `injection`.
pub fn default_measured_pairs(g: &LatticeGeometry, injection: Site, e: usize) -> Result<Vec<(Site, Site)>> {
    let mir = g.mirror_partner(injection)?;
    let half = g.lx() / 2;
    let mut pairs: Vec<(Site, Site)> = g
        .mirror_pairs()
        .into_iter()
        .filter(|&(l, r)| l != injection && l != mir && r != injection && r != mir)
        .collect();
    pairs.sort_by_key(|&(l, _)| (half - l.i, l.j));
    if e > pairs.len() {
        return Err(Error::InvalidArgument(format!(
            "{e} measured pairs requested but only {} are available on {g}",
            pairs.len()
        )));
    }
    pairs.truncate(e);
    Ok(pairs)
}

/// `|A>` on the injection qubit, the mirror qubit entangled with `q_b`
/// (qubit `N`) in the injection pair's Bell state, and the rainbow pattern
/// elsewhere.
///
/// With the mirror as the first member of that pair, the state expands as
/// `+-1/2 |EIG>|A>_b + 1/2 sum_s sigma^s_inj |EIG> sigma^s_b |A>_b` up to
/// phases of the Pauli branches.
pub fn prepare_teleport_state(cfg: &TeleportConfig) -> Result<StateVector> {
    let g = &cfg.geometry;
    let n = g.n_sites();
    let (inj, mir) = cfg.injection_pair()?;
    let (qi, qm) = (g.site_index(inj)?, g.site_index(mir)?);
    let label = cfg.injection_label()?;
    let others: Vec<_> = pair_labels(g, cfg.variant)
        .into_iter()
        .filter(|&(a, b, _)| a != qi && b != qi && a != qm && b != qm)
        .chain(std::iter::once((qm, n, label)))
        .collect();
    let rest = bell_pair_product(n + 1, &others)?;
    // rest has |0> on qi; put |A> there
    let a = cfg.state.amplitudes();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (n + 1)];
    for (x, v) in rest.amplitudes().iter().enumerate() {
        if *v != C64::new(0.0, 0.0) {
            amps[x] += v * a[0];
            amps[x | (1 << qi)] += v * a[1];
        }
    }
    StateVector::from_amplitudes(amps)
}

/// Post-selected Gram matrix `G[(a,beta),(a',beta')] = <Pi phi_{a'beta'} | Pi phi_{a beta}>`
/// with index `2a + beta`.
pub type Gram = [[C64; 4]; 4];

/// `(P, rho_b)` for input `|A>` (unnormalised `rho_b` has trace `P`).
pub fn apply_gram(g: &Gram, a: [C64; 2]) -> (f64, [[C64; 2]; 2]) {
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for (beta, row) in rho.iter_mut().enumerate() {
        for (beta2, r) in row.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *r += a[i] * a[j].conj() * g[2 * i + beta][2 * j + beta2];
                }
            }
        }
    }
    let p = (rho[0][0] + rho[1][1]).re;
    (p, rho)
}

/// `<A| rho |A> / tr rho`, or `None` when the branch has zero weight.
pub fn fidelity_from_gram(g: &Gram, a: [C64; 2]) -> (f64, Option<f64>) {
    let (p, rho) = apply_gram(g, a);
    if p <= 1e-300 {
        return (p, None);
    }
    let mut f = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            f += a[i].conj() * rho[i][j] * a[j];
        }
    }
    (p, Some((f.re / p).clamp(0.0, 1.0)))
}

/// Gram matrices at one time, one per prefix length `E = 0..=measured`.
#[derive(Debug, Clone)]
pub struct TimeGrams {
    pub t: f64,
    pub grams: Vec<Gram>,
}

/// Lattice component `phi_{a beta}` and its parity.
fn component(cfg: &TeleportConfig, a: usize, beta: usize) -> Result<(usize, Vec<C64>)> {
    let g = &cfg.geometry;
    let n = g.n_sites();
    let (inj, mir) = cfg.injection_pair()?;
    let (qi, qm) = (g.site_index(inj)?, g.site_index(mir)?);
    let label = cfg.injection_label()?;
    let others: Vec<_> = pair_labels(g, cfg.variant)
        .into_iter()
        .filter(|&(x, y, _)| x != qi && y != qi && x != qm && y != qm)
        .collect();
    let base = bell_pair_product(n, &others)?;
    // <beta|_b |L>_{m b}: mirror amplitude for bit x is amp[x + 2 beta]
    let amp = bell_amplitudes(label);
    let mut full = vec![C64::new(0.0, 0.0); 1 << n];
    for (x, v) in base.amplitudes().iter().enumerate() {
        if *v == C64::new(0.0, 0.0) {
            continue;
        }
        for bit in 0..2 {
            let c = amp[bit + 2 * beta];
            if c != C64::new(0.0, 0.0) {
                full[x | (a << qi) | (bit << qm)] += v * c;
            }
        }
    }
    let parity = full
        .iter()
        .position(|v| *v != C64::new(0.0, 0.0))
        .map(|x| x.count_ones() as usize % 2)
        .expect("component is nonzero");
    let half = 1usize << (n - 1);
    let compact = (0..half).map(|k| full[sector_state(k, parity)]).collect();
    Ok((parity, compact))
}

/// Evolves the four components through `cfg.times` (in ascending order)
/// and returns the post-selected Gram matrices, in the order of `cfg.times`.
pub fn teleport_grams(cfg: &TeleportConfig) -> Result<Vec<TimeGrams>> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let n = g.n_sites();
    let h = XYHamiltonian::new(*g, cfg.jx, cfg.jy)?;
    let ev = Evolver::new(h, cfg.evolve)?;
    if ev.uses_dense() {
        ev.spectrum()?;
    }
    let labels = cfg.measured_labels()?;
    let mut order: Vec<usize> = (0..cfg.times.len()).collect();
    order.sort_by(|&a, &b| cfg.times[a].total_cmp(&cfg.times[b]));

    let mut comps: Vec<(usize, Vec<C64>)> = (0..4).map(|k| component(cfg, k >> 1, k & 1)).collect::<Result<_>>()?;
    let mut out: Vec<Option<TimeGrams>> = vec![None; cfg.times.len()];
    let mut now = 0.0;
    for &idx in &order {
        let t = cfg.times[idx];
        let dt = t - now;
        comps.par_iter_mut().try_for_each(|(p, c)| ev.evolve_sector(*p, c, dt).map(|_| ()))?;
        now = t;
        // expand and project prefix by prefix
        let mut full: Vec<Vec<C64>> = comps
            .par_iter()
            .map(|(p, c)| {
                let mut f = vec![C64::new(0.0, 0.0); 1 << n];
                for (k, v) in c.iter().enumerate() {
                    f[sector_state(k, *p)] = *v;
                }
                f
            })
            .collect();
        let mut grams = Vec::with_capacity(labels.len() + 1);
        grams.push(gram_of(&full));
        for &(a, b, lab) in &labels {
            full.par_iter_mut().for_each(|f| {
                project_bell_slice(f, a, b, lab);
            });
            grams.push(gram_of(&full));
        }
        out[idx] = Some(TimeGrams { t, grams });
    }
    Ok(out.into_iter().map(|x| x.expect("every time visited")).collect())
}

fn gram_of(v: &[Vec<C64>]) -> Gram {
    let mut g = [[C64::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in r..4 {
            let val = inner(&v[c], &v[r]);
            g[r][c] = val;
            g[c][r] = val.conj();
        }
    }
    g
}

#[derive(Debug, Clone)]
pub struct TeleportRecord {
    pub t: f64,
    pub probability: f64,
    /// `None` when the post-selected branch has zero probability.
    pub fidelity: Option<f64>,
    pub rho_b: Option<DensityMatrix>,
}

#[derive(Debug, Clone)]
pub struct TeleportResult {
    pub records: Vec<TeleportRecord>,
}

fn record_from_gram(t: f64, gram: &Gram, a: [C64; 2]) -> Result<TeleportRecord> {
    let (p, rho) = apply_gram(gram, a);
    if p <= 1e-300 {
        return Ok(TeleportRecord { t, probability: p.max(0.0), fidelity: None, rho_b: None });
    }
    let m = Mat::from_fn(2, 2, |r, c| rho[r][c] / p);
    let rho_b = DensityMatrix::from_matrix(m)?;
    let f = rho_b.fidelity_pure(&StateVector::from_amplitudes(a.to_vec())?)?;
    Ok(TeleportRecord { t, probability: p, fidelity: Some(f), rho_b: Some(rho_b) })
}

/// Runs the protocol for `cfg.state` with all `cfg.measured_pairs`.
pub fn run_teleport(cfg: &TeleportConfig) -> Result<TeleportResult> {
    let a = cfg.state.amplitudes();
    let records = teleport_grams(cfg)?
        .iter()
        .map(|tg| record_from_gram(tg.t, tg.grams.last().expect("E = 0 always present"), a))
        .collect::<Result<_>>()?;
    Ok(TeleportResult { records })
}

/// Reference implementation on the full `N + 1` qubit register: evolve,
/// project each measured pair, trace down to `q_b`.
pub fn run_teleport_direct(cfg: &TeleportConfig) -> Result<TeleportResult> {
    cfg.validate()?;
    let g = &cfg.geometry;
    let n = g.n_sites();
    let h = XYHamiltonian::new(*g, cfg.jx, cfg.jy)?;
    let ev = Evolver::new(h, cfg.evolve)?;
    let psi0 = prepare_teleport_state(cfg)?;
    let labels = cfg.measured_labels()?;
    let target = cfg.state.to_state();
    let mut records = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        let mut psi = psi0.clone();
        ev.evolve(&mut psi, t)?;
        let mut p = 1.0;
        for &(a, b, lab) in &labels {
            let br = bell_project(&psi, (a, b), lab)?;
            p *= br.probability;
            match br.state {
                Some(s) => psi = s,
                None => {
                    p = 0.0;
                    break;
                }
            }
        }
        if p == 0.0 {
            records.push(TeleportRecord { t, probability: 0.0, fidelity: None, rho_b: None });
            continue;
        }
        let rho_b = reduced_density(&psi, &[n])?;
        let f = rho_b.fidelity_pure(&target)?;
        records.push(TeleportRecord { t, probability: p, fidelity: Some(f), rho_b: Some(rho_b) });
    }
    Ok(TeleportResult { records })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarSummary {
    pub t: f64,
    pub mean_probability: f64,
    pub mean_fidelity: f64,
    pub fidelity_stderr: f64,
    /// Samples whose post-selection had zero probability are excluded.
    pub valid_samples: usize,
    /// Fidelities for `|0>, |1>, |+>, |->, |+i>, |-i>`.
    pub pauli_fidelities: [f64; 6],
}

/// Monte Carlo average of `F` over Haar-random `|A>`, per time.
pub fn haar_average_fidelity<R: Rng + ?Sized>(
    cfg: &TeleportConfig,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<HaarSummary>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("haar_average_fidelity needs at least one sample".into()));
    }
    let samples: Vec<[C64; 2]> = (0..n_samples).map(|_| BlochState::random(rng).amplitudes()).collect();
    let grams = teleport_grams(cfg)?;
    Ok(grams.iter().map(|tg| haar_summary(tg.t, tg.grams.last().expect("E = 0 present"), &samples)).collect())
}

pub fn haar_summary(t: f64, gram: &Gram, samples: &[[C64; 2]]) -> HaarSummary {
    let mut fs = Vec::with_capacity(samples.len());
    let mut psum = 0.0;
    for &a in samples {
        let (p, f) = fidelity_from_gram(gram, a);
        psum += p;
        if let Some(f) = f {
            fs.push(f);
        }
    }
    let k = fs.len();
    let mean = if k > 0 { fs.iter().sum::<f64>() / k as f64 } else { f64::NAN };
    let stderr = if k > 1 {
        (fs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0) / k as f64).sqrt()
    } else {
        0.0
    };
    let mut pauli = [f64::NAN; 6];
    for (slot, b) in pauli.iter_mut().zip(BlochState::pauli_eigenstates()) {
        if let (_, Some(f)) = fidelity_from_gram(gram, b.amplitudes()) {
            *slot = f;
        }
    }
    HaarSummary {
        t,
        mean_probability: psum / samples.len() as f64,
        mean_fidelity: mean,
        fidelity_stderr: stderr,
        valid_samples: k,
        pauli_fidelities: pauli,
    }
}

/// Textbook three-qubit teleportation with the Bell outcome on qubits
/// `(0, 1)` post-selected to `|I>`. Returns `(F, P)`.
pub fn single_body_teleport(a: &BlochState) -> Result<(f64, f64)> {
    let psi = a.to_state().tensor(&bell_state(BellLabel::I));
    let br = bell_project(&psi, (0, 1), BellLabel::I)?;
    let state = br.state.ok_or_else(|| Error::InvalidArgument("zero-probability branch".into()))?;
    let rho = reduced_density(&state, &[2])?;
    Ok((rho.fidelity_pure(&a.to_state())?, br.probability))
}

/// State of qubit 2 averaged over all four Bell outcomes without correction.
pub fn single_body_unselected(a: &BlochState) -> Result<DensityMatrix> {
    let psi = a.to_state().tensor(&bell_state(BellLabel::I));
    let mut acc = Mat::<C64>::zeros(2, 2);
    for lab in BellLabel::ALL {
        let br = bell_project(&psi, (0, 1), lab)?;
        if let Some(s) = br.state {
            let r = reduced_density(&s, &[2])?;
            acc += r.matrix() * faer::Scale(C64::new(br.probability, 0.0));
        }
    }
    DensityMatrix::from_matrix(acc)
}
