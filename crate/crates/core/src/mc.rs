//! Monte Carlo simulation of the partition chain.
//!
//! Random words come from a ChaCha stream addressed by position: trajectory
//! `t` uses stream `t`, and the draw for block `b` at step `n` (1-based)
//! sits at 64-bit word `64 (n - 1) + b`. Results are therefore identical
//! across modes of execution and thread counts.
//!
//! A probability vector is sampled by comparing the top 63 bits of a word
//! against fixed-point thresholds: the cumulative sums scaled by `2^63` and
//! rounded half to even, the last threshold being exactly `2^63`.

use std::collections::{BTreeMap, HashMap};

use num_traits::ToPrimitive;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::chain::{build_chain, ChainModel};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rational::{round_scaled_half_even, Rational};
use crate::rho::{block_kernel, DyadicChoice, RecombDistribution};
use crate::subsets::{atoms_by_signature, Partition, Subset, MAX_SITES};

const SCALE_BITS: u32 = 63;
const WORDS_PER_STEP: u128 = 2 * MAX_SITES as u128;
const CHUNK: u64 = 1024;

/// How a step is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// One draw per step from the enumerated transition row.
    ExactChain,
    /// One draw per block from its split law; no state enumeration.
    KernelDraws,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub trajectories: u64,
    pub horizon: usize,
    pub mode: SimMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::InvalidArgument("at least one trajectory is required".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("the horizon must be at least 1".into()));
        }
        Ok(())
    }
}

/// Empirical counts over all trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub config: SimConfig,
    /// `occupancy[n][δ]` counts trajectories at `δ` after `n` steps.
    pub occupancy: Vec<BTreeMap<Partition, u64>>,
    /// `surviving[n]` counts trajectories not absorbed after `n` steps.
    pub surviving: Vec<u64>,
    /// Absorption step histogram; trajectories absorbed at step 0 count at 0.
    pub absorption_times: BTreeMap<usize, u64>,
    /// Trajectories still alive at the horizon.
    pub censored: u64,
}

impl SimReport {
    pub fn frequency(&self, n: usize, state: &Partition) -> f64 {
        self.occupancy[n].get(state).copied().unwrap_or(0) as f64 / self.config.trajectories as f64
    }

    pub fn survival_frequency(&self, n: usize) -> f64 {
        self.surviving[n] as f64 / self.config.trajectories as f64
    }
}

/// Fixed-point sampler for a finite law.
#[derive(Debug, Clone)]
pub struct Thresholds {
    bounds: Vec<u64>,
}

impl Thresholds {
    pub fn new<'a>(weights: impl IntoIterator<Item = &'a Rational>) -> Self {
        let mut cumulative = Rational::from_integer(0.into());
        let mut bounds: Vec<u64> = weights
            .into_iter()
            .map(|w| {
                cumulative += w;
                round_scaled_half_even(&cumulative, SCALE_BITS)
                    .to_u64()
                    .expect("a probability scaled by 2^63 fits in 64 bits")
            })
            .collect();
        if let Some(last) = bounds.last_mut() {
            *last = 1 << SCALE_BITS;
        }
        Thresholds { bounds }
    }

    pub fn bounds(&self) -> &[u64] {
        &self.bounds
    }

    /// Index of the outcome selected by the word `word`.
    pub fn pick(&self, word: u64) -> usize {
        let u = word >> 1;
        self.bounds.partition_point(|&t| t <= u)
    }
}

struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(seed: u64, trajectory: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trajectory);
        Stream { rng }
    }

    fn word(&mut self, step: usize, block: usize) -> u64 {
        self.rng
            .set_word_pos((step as u128 - 1) * WORDS_PER_STEP + 2 * block as u128);
        self.rng.next_u64()
    }
}

#[derive(Default)]
struct Tally {
    occupancy: Vec<BTreeMap<Partition, u64>>,
    surviving: Vec<u64>,
    absorption_times: BTreeMap<usize, u64>,
    censored: u64,
}

impl Tally {
    fn new(horizon: usize) -> Self {
        Tally {
            occupancy: vec![BTreeMap::new(); horizon + 1],
            surviving: vec![0; horizon + 1],
            ..Tally::default()
        }
    }

    fn record(&mut self, path: &[Partition], absorbed: &Partition) {
        let mut hit = None;
        for (n, state) in path.iter().enumerate() {
            *self.occupancy[n].entry(state.clone()).or_insert(0) += 1;
            if state == absorbed {
                hit.get_or_insert(n);
            } else {
                self.surviving[n] += 1;
            }
        }
        match hit {
            Some(n) => *self.absorption_times.entry(n).or_insert(0) += 1,
            None => self.censored += 1,
        }
    }

    fn merge(&mut self, other: Tally) {
        for (mine, theirs) in self.occupancy.iter_mut().zip(other.occupancy) {
            for (state, c) in theirs {
                *mine.entry(state).or_insert(0) += c;
            }
        }
        for (mine, theirs) in self.surviving.iter_mut().zip(other.surviving) {
            *mine += theirs;
        }
        for (n, c) in other.absorption_times {
            *self.absorption_times.entry(n).or_insert(0) += c;
        }
        self.censored += other.censored;
    }
}

/// Trajectories are grouped in chunks sharing a scratch context `C`.
fn run_chunks<C>(
    exec: Execution,
    cfg: &SimConfig,
    absorbed: &Partition,
    context: impl Fn() -> C + Sync + Send,
    trajectory: impl Fn(&mut C, u64) -> Vec<Partition> + Sync + Send,
) -> SimReport {
    let chunks = cfg.trajectories.div_ceil(CHUNK);
    let parts = exec::map_range(exec, chunks, |c| {
        let mut tally = Tally::new(cfg.horizon);
        let mut ctx = context();
        let end = ((c + 1) * CHUNK).min(cfg.trajectories);
        for t in c * CHUNK..end {
            tally.record(&trajectory(&mut ctx, t), absorbed);
        }
        tally
    });
    let mut total = Tally::new(cfg.horizon);
    for part in parts {
        total.merge(part);
    }
    SimReport {
        config: cfg.clone(),
        occupancy: total.occupancy,
        surviving: total.surviving,
        absorption_times: total.absorption_times,
        censored: total.censored,
    }
}

/// Simulation driven by enumerated transition rows.
pub fn simulate_chain(exec: Execution, model: &ChainModel, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let samplers: Vec<Thresholds> = (0..model.len())
        .map(|i| Thresholds::new(model.row(i).iter().map(|(_, p)| p)))
        .collect();
    let absorbing = model.absorbing();
    let absorbed = model.state(absorbing).clone();
    Ok(run_chunks(exec, cfg, &absorbed, || (), |_, t| {
        let mut stream = Stream::new(cfg.seed, t);
        let mut current = model.initial();
        let mut path = Vec::with_capacity(cfg.horizon + 1);
        path.push(model.state(current).clone());
        for step in 1..=cfg.horizon {
            if current != absorbing {
                let pick = samplers[current].pick(stream.word(step, 0));
                current = model.row(current)[pick].0;
            }
            path.push(model.state(current).clone());
        }
        path
    }))
}

/// Per-block split laws, computed on first use.
struct KernelCache<'a> {
    rho: &'a RecombDistribution,
    entries: HashMap<Subset, (Vec<DyadicChoice>, Thresholds)>,
}

impl<'a> KernelCache<'a> {
    fn get(&mut self, block: Subset) -> &(Vec<DyadicChoice>, Thresholds) {
        let rho = self.rho;
        self.entries.entry(block).or_insert_with(|| {
            let kernel = block_kernel(rho.support(), block);
            let thresholds = Thresholds::new(kernel.iter().map(|(_, w)| w));
            (kernel.into_iter().map(|(c, _)| c).collect(), thresholds)
        })
    }
}

/// Simulation from independent per-block draws; works for any site count.
pub fn simulate_kernels(exec: Execution, rho: &RecombDistribution, cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let family: Vec<Subset> = rho.support().map(|(j, _)| j).collect();
    let absorbed = atoms_by_signature(&family, rho.full());
    let root = rho.sites().coarsest();
    let context = || KernelCache {
        rho,
        entries: HashMap::new(),
    };
    Ok(run_chunks(exec, cfg, &absorbed, context, |cache, t| {
        let mut stream = Stream::new(cfg.seed, t);
        let mut current = root.clone();
        let mut path = Vec::with_capacity(cfg.horizon + 1);
        path.push(current.clone());
        for step in 1..=cfg.horizon {
            if current != absorbed {
                let mut blocks = Vec::with_capacity(current.len() + 1);
                for (b, &block) in current.blocks().iter().enumerate() {
                    let (choices, thresholds) = cache.get(block);
                    let choice = if choices.len() == 1 {
                        choices[0]
                    } else {
                        choices[thresholds.pick(stream.word(step, b))]
                    };
                    match choice {
                        DyadicChoice::Stay => blocks.push(block),
                        DyadicChoice::Split { first, second } => {
                            blocks.push(first);
                            blocks.push(second);
                        }
                    }
                }
                current = Partition::from_blocks_unchecked(blocks);
            }
            path.push(current.clone());
        }
        path
    }))
}

/// Runs `cfg.mode`, enumerating the chain when needed.
pub fn simulate(rho: &RecombDistribution, cfg: &SimConfig) -> Result<SimReport> {
    simulate_with(Execution::default(), rho, cfg)
}

pub fn simulate_with(exec: Execution, rho: &RecombDistribution, cfg: &SimConfig) -> Result<SimReport> {
    match cfg.mode {
        SimMode::ExactChain => simulate_chain(exec, &build_chain(rho)?, cfg),
        SimMode::KernelDraws => simulate_kernels(exec, rho, cfg),
    }
}
