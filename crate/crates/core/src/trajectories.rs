//! Monte Carlo trajectories of the measurement-feedback protocol on pure
//! states. Each round rotates the central pair to `|I>`, evolves for `T`,
//! measures the pair in the Z basis and re-initialises everything to
//! `|0...0>` on a 01/10 outcome.
//!
//! Between rounds the pair is in a known product state, so only the
//! `N - 2` rest qubits are stored; the rotation is the re-embedding
//! `|r>|s> -> |r>|I>`.

use std::collections::BTreeMap;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engineer::ChannelGeometry;
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::quantum::{sample_outcome, DensityMatrix, PairOutcome, PairSplit};
use crate::xy::{EvolveOptions, Evolver, XYHamiltonian, DEFAULT_JX, DEFAULT_JY};
use crate::C64;

pub const DEFAULT_FIDELITY_TARGET: f64 = 0.99;
pub const DEFAULT_MAX_STEPS: usize = 2000;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub geometry: LatticeGeometry,
    pub jx: f64,
    pub jy: f64,
    /// Evolution time `T` per round.
    pub period: f64,
    pub fidelity_target: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Row of the central pair; `None` for the default row.
    pub central_row: Option<usize>,
    pub evolve: EvolveOptions,
}

impl TrajectoryConfig {
    pub fn new(geometry: LatticeGeometry, period: f64) -> Self {
        TrajectoryConfig {
            geometry,
            jx: DEFAULT_JX,
            jy: DEFAULT_JY,
            period,
            fidelity_target: DEFAULT_FIDELITY_TARGET,
            max_steps: DEFAULT_MAX_STEPS,
            seed: 0,
            central_row: None,
            evolve: EvolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fidelity_target > 0.0 && self.fidelity_target < 1.0) {
            return Err(Error::InvalidArgument(format!("fidelity target must lie in (0, 1), got {}", self.fidelity_target)));
        }
        if !(self.period >= 0.0 && self.period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period T must be finite and non-negative, got {}", self.period)));
        }
        self.evolve.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    /// All measurements, including those of discarded runs.
    pub n_tot: usize,
    /// Measurements since the last reset.
    pub n_c: usize,
    pub outcome_log: Vec<PairOutcome>,
    pub converged: bool,
    pub final_fidelity: f64,
}

impl TrajectoryStats {
    pub fn resets(&self) -> usize {
        self.outcome_log.iter().filter(|o| o.is_odd()).count()
    }
}

/// The state right after the evolution of one round, before measuring.
#[derive(Debug, Clone)]
pub struct EvolvedState {
    /// Even and odd parity sectors of the full register, compact indexing.
    sectors: [Vec<C64>; 2],
    /// Born probabilities indexed like [`PairOutcome::ALL`].
    pub probabilities: [f64; 4],
}

/// Everything a trajectory needs that does not depend on the random draws.
#[derive(Debug)]
pub struct TrajectorySimulator {
    cg: ChannelGeometry,
    split: PairSplit,
    evolver: Evolver,
    period: f64,
    target: Vec<C64>,
}

fn parity(x: usize) -> usize {
    (x.count_ones() & 1) as usize
}

fn local_index(o: PairOutcome) -> usize {
    let (b1, b2) = o.bits();
    b1 as usize + 2 * b2 as usize
}

impl TrajectorySimulator {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        cfg.validate()?;
        let cg = ChannelGeometry::new(cfg.geometry, cfg.jx, cfg.jy, cfg.central_row)?;
        let h = XYHamiltonian::new(cfg.geometry, cfg.jx, cfg.jy)?;
        let evolver = Evolver::new(h, cfg.evolve)?;
        if evolver.uses_dense() {
            evolver.spectrum()?;
        }
        let target = cg.target().into_amplitudes();
        Ok(TrajectorySimulator { split: cg.split(), cg, evolver, period: cfg.period, target })
    }

    pub fn channel_geometry(&self) -> &ChannelGeometry {
        &self.cg
    }

    pub fn rest_dim(&self) -> usize {
        self.split.rest_dim()
    }

    /// `|0...0>` on the rest qubits.
    pub fn initial_rest(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.rest_dim()];
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// `|EIG_rest>`.
    pub fn target(&self) -> &[C64] {
        &self.target
    }

    pub fn fidelity(&self, rest: &[C64]) -> f64 {
        let o: C64 = self.target.iter().zip(rest).map(|(t, r)| t.conj() * r).sum();
        o.norm_sqr()
    }

    /// Rotates the pair to `|I>` and evolves the full register for `T`.
    pub fn evolve_round(&self, rest: &[C64]) -> Result<EvolvedState> {
        if rest.len() != self.rest_dim() {
            return Err(Error::DimensionMismatch { expected: self.rest_dim(), got: rest.len() });
        }
        let half = 1usize << (self.split.n_qubits - 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut sectors = [vec![ZERO; half], vec![ZERO; half]];
        let mut used = [false; 2];
        for (r, &a) in rest.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let p = parity(r);
            used[p] = true;
            for local in [0b00, 0b11] {
                sectors[p][self.split.embed(r, local) >> 1] = a * s;
            }
        }
        for p in 0..2 {
            if used[p] {
                self.evolver.evolve_sector(p, &mut sectors[p], self.period)?;
            }
        }
        let mut probabilities = [0.0; 4];
        for (p, sec) in sectors.iter().enumerate() {
            for (k, a) in sec.iter().enumerate() {
                let x = crate::xy::sector_state(k, p);
                let (_, local) = self.split.split(x);
                let o = PairOutcome::from_bits(local & 1 == 1, local & 2 == 2);
                probabilities[o.index()] += a.norm_sqr();
            }
        }
        let total: f64 = probabilities.iter().sum();
        probabilities.iter_mut().for_each(|p| *p /= total);
        Ok(EvolvedState { sectors, probabilities })
    }

    /// Normalised rest state after observing `outcome`; `|0...0>` for 01/10.
    pub fn collapse(&self, ev: &EvolvedState, outcome: PairOutcome) -> Vec<C64> {
        if outcome.is_odd() {
            return self.initial_rest();
        }
        let local = local_index(outcome);
        let mut rest: Vec<C64> = (0..self.rest_dim())
            .map(|r| {
                let x = self.split.embed(r, local);
                ev.sectors[parity(x)][x >> 1]
            })
            .collect();
        let n: f64 = rest.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            rest.iter_mut().for_each(|a| *a /= n);
        }
        rest
    }

    /// One full round: rotate, evolve, measure, reset if needed.
    pub fn step(&self, rest: &mut Vec<C64>, rng: &mut ChaCha8Rng) -> Result<PairOutcome> {
        let ev = self.evolve_round(rest)?;
        let o = sample_outcome(&ev.probabilities, rng);
        *rest = self.collapse(&ev, o);
        Ok(o)
    }

    /// Runs until the monitored fidelity reaches `fidelity_target` or
    /// `max_steps` measurements have been made.
    pub fn sample(&self, fidelity_target: f64, max_steps: usize, rng: &mut ChaCha8Rng) -> Result<TrajectoryStats> {
        let mut rest = self.initial_rest();
        let mut log = Vec::new();
        let mut n_c = 0;
        let mut f = self.fidelity(&rest);
        while f < fidelity_target && log.len() < max_steps {
            let o = self.step(&mut rest, rng)?;
            log.push(o);
            n_c = if o.is_odd() { 0 } else { n_c + 1 };
            f = self.fidelity(&rest);
        }
        Ok(TrajectoryStats { n_tot: log.len(), n_c, outcome_log: log, converged: f >= fidelity_target, final_fidelity: f })
    }

    /// The rest state after each of `n_steps` rounds (index 0 is the start),
    /// without early termination.
    pub fn rest_states(&self, n_steps: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<C64>>> {
        let mut rest = self.initial_rest();
        let mut out = Vec::with_capacity(n_steps + 1);
        out.push(rest.clone());
        for _ in 0..n_steps {
            self.step(&mut rest, rng)?;
            out.push(rest.clone());
        }
        Ok(out)
    }
}

/// Seed of trajectory `k`: a SplitMix64 hash of `(seed, k)`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trajectory_rng(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, k))
}

pub fn sample_trajectory(cfg: &TrajectoryConfig, rng: &mut ChaCha8Rng) -> Result<TrajectoryStats> {
    TrajectorySimulator::new(cfg)?.sample(cfg.fidelity_target, cfg.max_steps, rng)
}

/// Unit-width histogram as sorted `(value, count)` pairs.
pub fn histogram(values: &[usize]) -> Vec<(usize, usize)> {
    let mut m = BTreeMap::new();
    for &v in values {
        *m.entry(v).or_insert(0usize) += 1;
    }
    m.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Most frequent value; the smallest one on ties.
    pub mode: usize,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[usize]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_unstable();
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] as f64 } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) as f64 };
        let mean = v.iter().sum::<usize>() as f64 / n as f64;
        let mode = histogram(&v).into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(x, _)| x).unwrap_or(0);
        Some(Summary { mean, median, mode })
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    /// In trajectory order.
    pub trajectories: Vec<TrajectoryStats>,
    /// Histograms and summaries cover converged trajectories only.
    pub n_tot_histogram: Vec<(usize, usize)>,
    pub n_c_histogram: Vec<(usize, usize)>,
    pub n_tot: Option<Summary>,
    pub n_c: Option<Summary>,
    pub n_converged: usize,
}

pub fn run_ensemble(cfg: &TrajectoryConfig, n_traj: usize) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    let sim = TrajectorySimulator::new(cfg)?;
    let trajectories = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| sim.sample(cfg.fidelity_target, cfg.max_steps, &mut trajectory_rng(cfg.seed, k)))
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&TrajectoryStats> = trajectories.iter().filter(|t| t.converged).collect();
    let tot: Vec<usize> = done.iter().map(|t| t.n_tot).collect();
    let nc: Vec<usize> = done.iter().map(|t| t.n_c).collect();
    Ok(EnsembleResult {
        n_tot_histogram: histogram(&tot),
        n_c_histogram: histogram(&nc),
        n_tot: Summary::of(&tot),
        n_c: Summary::of(&nc),
        n_converged: done.len(),
        trajectories,
    })
}

/// Ensemble-averaged rest density matrices after rounds `0..=n_steps`.
/// Memory grows as `4^(N-2)` per step, so this is meant for small lattices.
pub fn ensemble_rest_densities(cfg: &TrajectoryConfig, n_steps: usize, n_traj: usize) -> Result<Vec<DensityMatrix>> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1".into()));
    }
    let sim = TrajectorySimulator::new(cfg)?;
    let d = sim.rest_dim();
    let runs = (0..n_traj as u64)
        .into_par_iter()
        .map(|k| sim.rest_states(n_steps, &mut trajectory_rng(cfg.seed, k)))
        .collect::<Result<Vec<_>>>()?;
    let w = 1.0 / n_traj as f64;
    (0..=n_steps)
        .map(|n| {
            let mut acc = Mat::<C64>::zeros(d, d);
            for run in &runs {
                let v = &run[n];
                for c in 0..d {
                    if v[c] == ZERO {
                        continue;
                    }
                    let vc = v[c].conj() * w;
                    for r in 0..d {
                        acc[(r, c)] += v[r] * vc;
                    }
                }
            }
            DensityMatrix::from_matrix(acc)
        })
        .collect()
}
