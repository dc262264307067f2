//! The absorbing Markov chain on partitions driven by independent per-block
//! splits, built by breadth-first search from the coarsest partition.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rational::Rational;
use crate::report::CheckReport;
use crate::rho::{coefficient_table, dyadic_kernel, CoefficientTable, DyadicChoice, RecombDistribution};
use crate::subsets::{is_finer, Partition, Subset};
use crate::trees::WeightVector;

/// Default bound on the number of chain states.
pub const DEFAULT_MAX_STATES: usize = 1_000_000;

/// Sparse row: `(target index, probability)` sorted by target, positive only.
pub type Row = Vec<(usize, Rational)>;

/// The reachable chain. State 0 is `{I}`.
#[derive(Debug, Clone)]
pub struct ChainModel {
    table: CoefficientTable,
    states: Vec<Partition>,
    index: BTreeMap<Partition, usize>,
    rows: Vec<Row>,
    absorbing: usize,
}

/// Per-block options of a partition combined into successor probabilities.
fn successors(kernels: &BTreeMap<Subset, Vec<(DyadicChoice, Rational)>>, state: &Partition) -> BTreeMap<Partition, Rational> {
    let mut partial: Vec<(Vec<Subset>, Rational)> = vec![(Vec::new(), Rational::one())];
    for block in state.blocks() {
        let options = &kernels[block];
        let mut next = Vec::with_capacity(partial.len() * options.len());
        for (blocks, w) in &partial {
            for (choice, p) in options {
                let mut extended = blocks.clone();
                match choice {
                    DyadicChoice::Stay => extended.push(*block),
                    DyadicChoice::Split { first, second } => {
                        extended.push(*first);
                        extended.push(*second);
                    }
                }
                next.push((extended, w * p));
            }
        }
        partial = next;
    }
    let mut out = BTreeMap::new();
    for (blocks, w) in partial {
        *out.entry(Partition::from_blocks_unchecked(blocks))
            .or_insert_with(Rational::zero) += w;
    }
    out
}

pub fn build_chain(rho: &RecombDistribution) -> Result<ChainModel> {
    build_chain_with(Execution::default(), rho, DEFAULT_MAX_STATES)
}

/// Breadth-first construction; successors of a state are visited in
/// canonical partition order. Frontier expansion runs under `exec`.
pub fn build_chain_with(exec: Execution, rho: &RecombDistribution, max_states: usize) -> Result<ChainModel> {
    rho.sites().check_enumerable()?;
    let table = coefficient_table(rho);
    let mut kernels = BTreeMap::new();
    for &block in table.closure_sets() {
        kernels.insert(block, dyadic_kernel(&table, block)?);
    }
    let root = rho.sites().coarsest();
    let mut states = vec![root.clone()];
    let mut index = BTreeMap::from([(root, 0usize)]);
    let mut rows: Vec<Row> = vec![Vec::new()];
    let mut frontier: Vec<usize> = vec![0];
    while !frontier.is_empty() {
        let expanded = exec::map_collect(exec, &frontier, |&i| successors(&kernels, &states[i]));
        let mut next = Vec::new();
        for (&i, succ) in frontier.iter().zip(expanded) {
            let mut row = Vec::with_capacity(succ.len());
            for (target, p) in succ {
                let j = match index.get(&target) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= max_states {
                            return Err(Error::ResourceLimit(format!(
                                "chain exceeds {max_states} states"
                            )));
                        }
                        let j = states.len();
                        index.insert(target.clone(), j);
                        states.push(target);
                        rows.push(Vec::new());
                        next.push(j);
                        j
                    }
                };
                row.push((j, p));
            }
            row.sort_by_key(|(j, _)| *j);
            rows[i] = row;
        }
        frontier = next;
    }
    let absorbing = *index.get(table.atom_partition()).ok_or_else(|| {
        Error::Invariant("the atom partition is not reachable from the coarsest partition".into())
    })?;
    Ok(ChainModel {
        table,
        states,
        index,
        rows,
        absorbing,
    })
}

/// Distribution of the absorption time and the state law up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile {
    /// `survival[n]` is the probability of not being absorbed by step `n`.
    pub survival: Vec<Rational>,
    pub occupancy: Vec<WeightVector>,
}

/// Law of the first entrance time into a target set.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingDistribution {
    /// `at[n]` is the probability of the first entrance at step `n`.
    pub at: Vec<Rational>,
    /// Mass that can no longer reach the targets.
    pub never: Rational,
    /// Mass still undecided at the horizon.
    pub unresolved: Rational,
}

impl ChainModel {
    pub fn table(&self) -> &CoefficientTable {
        &self.table
    }

    pub fn rho(&self) -> &RecombDistribution {
        self.table.rho()
    }

    pub fn states(&self) -> &[Partition] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &Partition) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn state(&self, i: usize) -> &Partition {
        &self.states[i]
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn absorbing(&self) -> usize {
        self.absorbing
    }

    pub fn prob(&self, i: usize, j: usize) -> Rational {
        self.rows[i]
            .binary_search_by_key(&j, |(k, _)| *k)
            .map(|pos| self.rows[i][pos].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn self_loop(&self, i: usize) -> Rational {
        self.prob(i, i)
    }

    /// The unit vector on the initial state.
    pub fn initial_distribution(&self) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.len()];
        v[0] = Rational::one();
        v
    }

    /// One step of the row vector `v`.
    pub fn step(&self, v: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.len()];
        for (i, mass) in v.iter().enumerate() {
            if mass.is_zero() {
                continue;
            }
            for (j, p) in &self.rows[i] {
                out[*j] += mass * p;
            }
        }
        out
    }

    /// Law of the chain after `n` steps from `{I}`.
    pub fn evolve(&self, n: usize) -> Vec<Rational> {
        let mut v = self.initial_distribution();
        for _ in 0..n {
            v = self.step(&v);
        }
        v
    }

    fn to_weights(&self, v: &[Rational]) -> WeightVector {
        v.iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(i, p)| (self.states[i].clone(), p.clone()))
            .collect()
    }

    /// The law after `n` steps as partition weights.
    pub fn q_by_chain(&self, n: usize) -> WeightVector {
        self.to_weights(&self.evolve(n))
    }

    pub fn survival_profile(&self, horizon: usize) -> AbsorptionProfile {
        let mut v = self.initial_distribution();
        let mut survival = Vec::with_capacity(horizon + 1);
        let mut occupancy = Vec::with_capacity(horizon + 1);
        for n in 0..=horizon {
            if n > 0 {
                v = self.step(&v);
            }
            survival.push(Rational::one() - &v[self.absorbing]);
            occupancy.push(self.to_weights(&v));
        }
        AbsorptionProfile { survival, occupancy }
    }

    /// `table[n][i]` is the probability of surviving `n` steps from state `i`.
    pub fn survival_table(&self, horizon: usize) -> Vec<Vec<Rational>> {
        let mut current: Vec<Rational> = (0..self.len())
            .map(|i| if i == self.absorbing { Rational::zero() } else { Rational::one() })
            .collect();
        let mut table = Vec::with_capacity(horizon + 1);
        for _ in 0..horizon {
            let next = self
                .rows
                .iter()
                .map(|row| row.iter().map(|(j, p)| p * &current[*j]).sum())
                .collect();
            table.push(std::mem::replace(&mut current, next));
        }
        table.push(current);
        table
    }

    /// States from which some target is reachable, targets included.
    pub fn can_reach(&self, targets: &BTreeSet<usize>) -> Vec<bool> {
        let mut reach = vec![false; self.len()];
        for &i in self.reverse_topological_order().iter() {
            reach[i] = targets.contains(&i) || self.rows[i].iter().any(|(j, _)| *j != i && reach[*j]);
        }
        reach
    }

    /// First-entrance law into `targets` up to `horizon`.
    pub fn hitting_distribution(&self, targets: &[Partition], horizon: usize) -> Result<HittingDistribution> {
        let mut set = BTreeSet::new();
        for t in targets {
            let i = self
                .index_of(t)
                .ok_or_else(|| Error::InvalidArgument(format!("{t} is not a state of the chain")))?;
            set.insert(i);
        }
        let reach = self.can_reach(&set);
        let mut at = vec![Rational::zero(); horizon + 1];
        let mut never = Rational::zero();
        let mut v = self.initial_distribution();
        for (n, slot) in at.iter_mut().enumerate() {
            if n > 0 {
                v = self.step(&v);
            }
            for (i, mass) in v.iter_mut().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                if set.contains(&i) {
                    *slot += &*mass;
                    *mass = Rational::zero();
                } else if !reach[i] {
                    never += &*mass;
                    *mass = Rational::zero();
                }
            }
        }
        let unresolved = v.iter().sum();
        Ok(HittingDistribution { at, never, unresolved })
    }

    /// Kahn's algorithm on the graph without self-loops; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, _) in row {
                if *j != i {
                    indegree[*j] += 1;
                }
            }
        }
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for (j, _) in &self.rows[i] {
                if *j != i {
                    indegree[*j] -= 1;
                    if indegree[*j] == 0 {
                        queue.push_back(*j);
                    }
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    /// Successors before predecessors. Block counts strictly increase along
    /// non-loop transitions, so descending block count is such an order.
    pub fn reverse_topological_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.states[i].len()));
        order
    }

    /// Longest loop-free path length from `{I}`.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        let mut order = self.reverse_topological_order();
        order.reverse();
        for i in order {
            for (j, _) in &self.rows[i] {
                if *j != i {
                    depth[*j] = depth[*j].max(depth[i] + 1);
                }
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Loop-free predecessors of every state.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut preds = vec![Vec::new(); self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, _) in row {
                if *j != i {
                    preds[*j].push(i);
                }
            }
        }
        preds
    }

    /// Row sums, absorption, strict refinement along transitions, loop
    /// bounds and acyclicity.
    pub fn verify(&self) -> CheckReport {
        let mut report = CheckReport::new("transition matrix");
        for (i, row) in self.rows.iter().enumerate() {
            let total: Rational = row.iter().map(|(_, p)| p).sum();
            report.check(total.is_one(), || format!("row of {} sums to {total}", self.states[i]));
            for (j, _) in row {
                let ok = *j == i
                    || (is_finer(&self.states[*j], &self.states[i])
                        && self.states[*j].len() > self.states[i].len());
                report.check(ok, || format!("{} -> {} is not a strict refinement", self.states[i], self.states[*j]));
            }
            let stay = self.self_loop(i);
            if i == self.absorbing {
                report.check(stay.is_one(), || "atom partition is not absorbing".into());
            } else {
                report.check(stay < Rational::one(), || format!("{} is absorbing", self.states[i]));
            }
        }
        report.check(self.topological_order().is_some(), || "transition graph has a cycle".into());
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::subsets::SiteSet;
    use crate::trees::q_by_trees;

    fn s(sites: &[usize]) -> Subset {
        Subset::from_sites(sites).unwrap()
    }

    fn p(blocks: &[&[usize]], n: usize) -> Partition {
        Partition::new(blocks.iter().map(|b| s(b)).collect(), Subset::full(n)).unwrap()
    }

    fn rho_of(n: usize, entries: &[(&[usize], (i64, i64))]) -> RecombDistribution {
        let raw = entries.iter().map(|(b, (a, d))| (s(b), ratio(*a, *d))).collect();
        RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
    }

    fn three_site() -> RecombDistribution {
        rho_of(3, &[(&[1], (1, 4)), (&[2, 3], (1, 4)), (&[1, 2], (1, 4)), (&[3], (1, 4))])
    }

    fn dense_row(model: &ChainModel, i: usize) -> Vec<Rational> {
        (0..model.len()).map(|j| model.prob(i, j)).collect()
    }

    #[test]
    fn three_site_chain() {
        let model = build_chain(&three_site()).unwrap();
        assert_eq!(
            model.states(),
            &[
                p(&[&[1, 2, 3]], 3),
                p(&[&[1], &[2, 3]], 3),
                p(&[&[1, 2], &[3]], 3),
                p(&[&[1], &[2], &[3]], 3),
            ]
        );
        let h = ratio(1, 2);
        let z = ratio(0, 1);
        let o = ratio(1, 1);
        assert_eq!(dense_row(&model, 0), vec![z.clone(), h.clone(), h.clone(), z.clone()]);
        assert_eq!(dense_row(&model, 1), vec![z.clone(), h.clone(), z.clone(), h.clone()]);
        assert_eq!(dense_row(&model, 2), vec![z.clone(), z.clone(), h.clone(), h.clone()]);
        assert_eq!(dense_row(&model, 3), vec![z.clone(), z.clone(), z, o]);
        assert_eq!(model.absorbing(), 3);
        assert!(model.verify().passed());
        assert_eq!(model.depth(), 2);
        // the zero self-loop of the root is not stored
        assert!(model.row(0).iter().all(|(j, _)| *j != 0));
    }

    #[test]
    fn identity_and_two_site_chains() {
        let identity = rho_of(2, &[(&[1, 2], (1, 1))]);
        let model = build_chain(&identity).unwrap();
        assert_eq!(model.len(), 1);
        assert_eq!(model.absorbing(), 0);
        assert_eq!(model.prob(0, 0), ratio(1, 1));
        assert_eq!(model.survival_profile(2).survival[0], ratio(0, 1));

        let lazy = rho_of(2, &[(&[1, 2], (1, 2)), (&[1], (1, 4)), (&[2], (1, 4))]);
        let model = build_chain(&lazy).unwrap();
        assert_eq!(model.len(), 2);
        assert_eq!(model.self_loop(0), ratio(1, 2));
        let profile = model.survival_profile(5);
        for (n, s) in profile.survival.iter().enumerate() {
            assert_eq!(s, &crate::rational::pow(&ratio(1, 2), n as i32));
        }
    }

    #[test]
    fn chain_law_matches_trees() {
        let rho = three_site();
        let model = build_chain(&rho).unwrap();
        assert_eq!(model.q_by_chain(0), q_by_trees(&rho, 0).unwrap());
        let q2 = model.q_by_chain(2);
        assert_eq!(q2[&p(&[&[1], &[2], &[3]], 3)], ratio(1, 2));
        for n in 0..=4 {
            assert_eq!(model.q_by_chain(n), q_by_trees(&rho, n).unwrap());
        }
    }

    #[test]
    fn survival_of_three_site_example() {
        let model = build_chain(&three_site()).unwrap();
        let profile = model.survival_profile(8);
        assert_eq!(profile.survival[0], ratio(1, 1));
        for n in 1..=8 {
            assert_eq!(profile.survival[n], crate::rational::pow(&ratio(1, 2), n as i32 - 1));
        }
    }

    #[test]
    fn hitting_examples() {
        let model = build_chain(&three_site()).unwrap();
        let root = model.state(0).clone();
        let h = model.hitting_distribution(&[root], 3).unwrap();
        assert_eq!(h.at[0], ratio(1, 1));

        let both = [model.state(1).clone(), model.state(2).clone()];
        let h = model.hitting_distribution(&both, 3).unwrap();
        assert_eq!(h.at[1], ratio(1, 1));

        let one = [model.state(1).clone()];
        let h = model.hitting_distribution(&one, 3).unwrap();
        assert_eq!(h.at[1], ratio(1, 2));
        assert_eq!(h.never, ratio(1, 2));
        assert_eq!(h.unresolved, ratio(0, 1));

        let stranger = p(&[&[1, 3], &[2]], 3);
        assert!(model.hitting_distribution(&[stranger], 3).is_err());
    }

    #[test]
    fn refinement_order_has_joins() {
        // four atoms reached through several two- and three-block states
        let rho = rho_of(
            4,
            &[
                (&[1], (1, 6)),
                (&[2, 3, 4], (1, 6)),
                (&[1, 2], (1, 6)),
                (&[3, 4], (1, 6)),
                (&[1, 2, 3], (1, 6)),
                (&[4], (1, 6)),
            ],
        );
        let model = build_chain(&rho).unwrap();
        assert!(model.verify().passed());
        let preds = model.predecessors();
        let joined = (0..model.len()).filter(|&i| i != model.absorbing() && preds[i].len() >= 2).count();
        assert!(joined > 0);
        assert!(preds[model.absorbing()].len() >= 2);
    }

    #[test]
    fn state_guard_and_strategies() {
        let rho = three_site();
        assert!(matches!(
            build_chain_with(Execution::Sequential, &rho, 2),
            Err(Error::ResourceLimit(_))
        ));
        let a = build_chain_with(Execution::Sequential, &rho, 100).unwrap();
        let b = build_chain_with(Execution::Parallel, &rho, 100).unwrap();
        assert_eq!(a.states(), b.states());
        for i in 0..a.len() {
            assert_eq!(a.row(i), b.row(i));
        }
    }
}
