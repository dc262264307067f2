//! Dyadic trees rooted at the full site set and the decomposition weights
//! obtained by summing tree weights per leaf set.
//!
//! A tree of length `n` is determined by its sequence of level partitions:
//! every block of level `j` either stays or splits into two blocks of level
//! `j + 1`. Its weight is the product, over every block of every level below
//! `n`, of the kernel probability of the choice made there. Trees with a
//! zero-probability choice are never produced.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::measures::{product_over_partition, xi_iterate, DenseMeasure};
use crate::rational::Rational;
use crate::report::CheckReport;
use crate::rho::{coefficient_table, dyadic_kernel, DyadicChoice, RecombDistribution};
use crate::subsets::{Partition, Subset};

/// Default bound on the number of trees visited in one enumeration.
pub const DEFAULT_MAX_TREES: usize = 10_000_000;

/// A rooted dyadic tree given by its level partitions, level 0 being `{I}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicTree {
    levels: Vec<Partition>,
}

impl DyadicTree {
    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    /// Number of steps below the root.
    pub fn length(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn leaves(&self) -> &Partition {
        self.levels.last().expect("a tree has at least its root level")
    }
}

/// Partition-indexed positive weights.
pub type WeightVector = BTreeMap<Partition, Rational>;

/// One block's options: the blocks it turns into and the probability.
type Options = Vec<(Vec<Subset>, Rational)>;

struct Expander {
    options: BTreeMap<Subset, Options>,
    max_trees: usize,
    visited: AtomicUsize,
}

impl Expander {
    fn new(rho: &RecombDistribution, max_trees: usize) -> Result<Self> {
        let table = coefficient_table(rho);
        let mut options = BTreeMap::new();
        for &block in table.closure_sets() {
            let opts = dyadic_kernel(&table, block)?
                .into_iter()
                .map(|(choice, w)| match choice {
                    DyadicChoice::Stay => (vec![block], w),
                    DyadicChoice::Split { first, second } => (vec![first, second], w),
                })
                .collect();
            options.insert(block, opts);
        }
        Ok(Expander {
            options,
            max_trees,
            visited: AtomicUsize::new(0),
        })
    }

    fn options(&self, block: Subset) -> &Options {
        &self.options[&block]
    }

    /// Calls `visit` with every next level reachable from `level` and the
    /// probability of the joint choice.
    fn for_each_child(
        &self,
        level: &Partition,
        visit: &mut dyn FnMut(Partition, Rational) -> Result<()>,
    ) -> Result<()> {
        let blocks = level.blocks();
        let mut picks = vec![0usize; blocks.len()];
        loop {
            let mut children = Vec::with_capacity(blocks.len() * 2);
            let mut weight = Rational::one();
            for (&block, &pick) in blocks.iter().zip(&picks) {
                let (parts, w) = &self.options(block)[pick];
                children.extend_from_slice(parts);
                // unit stays are common once blocks are atoms
                if !w.is_one() {
                    weight *= w;
                }
            }
            visit(Partition::from_blocks_unchecked(children), weight)?;
            // odometer over per-block option indices
            let mut i = blocks.len();
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                picks[i] += 1;
                if picks[i] < self.options(blocks[i]).len() {
                    break;
                }
                picks[i] = 0;
            }
        }
    }

    fn walk(
        &self,
        levels: &mut Vec<Partition>,
        weight: &Rational,
        remaining: usize,
        emit: &mut dyn FnMut(&[Partition], &Rational) -> Result<()>,
    ) -> Result<()> {
        if remaining == 0 {
            if self.visited.fetch_add(1, Ordering::Relaxed) >= self.max_trees {
                return Err(Error::ResourceLimit(format!(
                    "tree enumeration exceeds {} trees",
                    self.max_trees
                )));
            }
            return emit(levels, weight);
        }
        let current = levels.last().expect("nonempty").clone();
        self.for_each_child(&current, &mut |child, w| {
            levels.push(child);
            let result = self.walk(levels, &(weight * w), remaining - 1, emit);
            levels.pop();
            result
        })
    }

    /// Runs the walk with the first level fanned out under `exec`; results
    /// come back in the order of the root's options.
    fn fan_out<R: Send>(
        &self,
        exec: Execution,
        full: Subset,
        n: usize,
        leaf: impl Fn(&mut R, &[Partition], &Rational) + Sync + Send,
        init: impl Fn() -> R + Sync + Send,
    ) -> Result<Vec<R>> {
        let root = Partition::from_blocks_unchecked(vec![full]);
        if n == 0 {
            let mut acc = init();
            leaf(&mut acc, &[root], &Rational::one());
            return Ok(vec![acc]);
        }
        let mut firsts = Vec::new();
        self.for_each_child(&root, &mut |child, w| {
            firsts.push((child, w));
            Ok(())
        })?;
        exec::map_collect(exec, &firsts, |(child, w)| {
            let mut acc = init();
            let mut levels = vec![root.clone(), child.clone()];
            self.walk(&mut levels, w, n - 1, &mut |lv, wt| {
                leaf(&mut acc, lv, wt);
                Ok(())
            })?;
            Ok(acc)
        })
        .into_iter()
        .collect()
    }
}

/// Every tree of length `n` with its weight, in lexicographic order of the
/// level sequence.
pub fn enumerate_trees(rho: &RecombDistribution, n: usize) -> Result<Vec<(DyadicTree, Rational)>> {
    enumerate_trees_with(Execution::default(), rho, n, DEFAULT_MAX_TREES)
}

pub fn enumerate_trees_with(
    exec: Execution,
    rho: &RecombDistribution,
    n: usize,
    max_trees: usize,
) -> Result<Vec<(DyadicTree, Rational)>> {
    rho.sites().check_enumerable()?;
    let expander = Expander::new(rho, max_trees)?;
    let parts = expander.fan_out(
        exec,
        rho.full(),
        n,
        |acc: &mut Vec<(DyadicTree, Rational)>, levels, w| {
            acc.push((DyadicTree { levels: levels.to_vec() }, w.clone()))
        },
        Vec::new,
    )?;
    Ok(parts.into_iter().flatten().collect())
}

/// Decomposition weights of the `n`-th iterate: total tree weight per leaf
/// set.
pub fn q_by_trees(rho: &RecombDistribution, n: usize) -> Result<WeightVector> {
    q_by_trees_with(Execution::default(), rho, n, DEFAULT_MAX_TREES)
}

pub fn q_by_trees_with(
    exec: Execution,
    rho: &RecombDistribution,
    n: usize,
    max_trees: usize,
) -> Result<WeightVector> {
    rho.sites().check_enumerable()?;
    let expander = Expander::new(rho, max_trees)?;
    let parts = expander.fan_out(
        exec,
        rho.full(),
        n,
        |acc: &mut WeightVector, levels, w| {
            let leaves = levels.last().expect("nonempty").clone();
            *acc.entry(leaves).or_insert_with(Rational::zero) += w;
        },
        WeightVector::new,
    )?;
    let mut total = WeightVector::new();
    for part in parts {
        for (delta, w) in part {
            *total.entry(delta).or_insert_with(Rational::zero) += w;
        }
    }
    Ok(total)
}

/// `Σ_δ q_δ ⊗_{ℓ∈δ} (component)_ℓ`, where the marginal on block `ℓ` is
/// taken from `component`.
pub fn mix_over_partitions(q: &WeightVector, component: &DenseMeasure) -> Result<DenseMeasure> {
    let alphabet = component.alphabet();
    let mut table = vec![Rational::zero(); component.table().len()];
    for (delta, w) in q {
        let term = product_over_partition(component, delta)?;
        for (acc, p) in table.iter_mut().zip(term.table()) {
            *acc += w * p;
        }
    }
    DenseMeasure::new(alphabet, component.support(), table)
}

/// The iterate computed directly and through the tree decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub direct: DenseMeasure,
    pub expanded: DenseMeasure,
    pub weights: WeightVector,
    pub report: CheckReport,
}

pub fn decompose_and_check(rho: &RecombDistribution, mu: &DenseMeasure, n: usize) -> Result<Decomposition> {
    let direct = xi_iterate(rho, mu, n)?;
    let weights = q_by_trees(rho, n)?;
    let expanded = mix_over_partitions(&weights, mu)?;
    let mut report = CheckReport::new(format!("tree decomposition at n = {n}"));
    report.check(weights.values().sum::<Rational>().is_one(), || {
        "decomposition weights do not sum to 1".into()
    });
    report.check(direct == expanded, || "iterate differs from its decomposition".into());
    Ok(Decomposition {
        direct,
        expanded,
        weights,
        report,
    })
}

/// For each `j ≤ n`, expanding `j` tree levels over the marginals of the
/// `(n - j)`-th iterate reproduces the `n`-th iterate.
pub fn verify_mid_expansion(rho: &RecombDistribution, mu: &DenseMeasure, n: usize) -> Result<CheckReport> {
    let mut report = CheckReport::new(format!("partial expansions at n = {n}"));
    let iterates: Vec<DenseMeasure> = {
        let mut out = vec![mu.clone()];
        for _ in 0..n {
            let next = xi_iterate(rho, out.last().expect("nonempty"), 1)?;
            out.push(next);
        }
        out
    };
    let target = &iterates[n];
    for j in 0..=n {
        let weights = q_by_trees(rho, j)?;
        let expanded = mix_over_partitions(&weights, &iterates[n - j])?;
        report.check(&expanded == target, || format!("expansion of {j} levels differs"));
    }
    Ok(report)
}

/// Leaf sets of consecutive lengths are linked by refinement: every leaf
/// set at length `n + 1` refines some leaf set at length `n`.
pub fn verify_refinement(q_now: &WeightVector, q_next: &WeightVector) -> bool {
    q_next
        .keys()
        .all(|next| q_now.keys().any(|now| crate::subsets::is_finer(next, now)))
}
