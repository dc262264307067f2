//! Decay of the survival probability before absorption, the limiting law
//! conditioned on survival, the conditioned process and quasi-stationary
//! laws.
//!
//! Everything is solved exactly on the acyclic transient graph: the right
//! eigenvector is a backward linear solve, never a spectral iteration.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::chain::{ChainModel, Row};
use crate::error::{Error, Result};
use crate::rational::{format_rational, pow, to_f64, Rational};
use crate::report::CheckReport;
use crate::subsets::{Partition, Subset};
use crate::trees::WeightVector;

/// Message for the identity transformation, where no state is transient.
pub const IDENTITY_NOT_APPLICABLE: &str =
    "identity transformation; quasi-stationary analysis not applicable";

/// Decay rate, its maximizing blocks and the derived limit objects.
#[derive(Debug, Clone)]
pub struct DecayAnalysis {
    /// Largest stay coefficient over closure sets that are not atoms.
    pub eta: Rational,
    /// Largest self-loop over transient states outside `e_states`, or 0.
    pub beta0: Rational,
    pub e_sets: BTreeSet<Subset>,
    /// State indices of the partitions with one maximizing block, the other
    /// blocks atoms.
    pub e_states: Vec<usize>,
    /// `phi[i]` is the expectation of `eta^-T; T < ∞` from state `i`, `T`
    /// the entrance time into `e_states`.
    pub phi: Vec<Rational>,
    /// `phi` at the initial state.
    pub limit_constant: Rational,
    /// Limiting law conditioned on survival, by state index.
    pub quasi_limit: Vec<(usize, Rational)>,
}

/// The partition whose only non-atom block is `block`.
pub fn collapse_onto(atoms: &Partition, block: Subset) -> Partition {
    let mut blocks: Vec<Subset> = atoms
        .blocks()
        .iter()
        .copied()
        .filter(|a| a.is_disjoint(block))
        .collect();
    blocks.push(block);
    Partition::new(blocks, atoms.blocks().iter().fold(Subset::EMPTY, |acc, &b| acc.union(b)))
        .expect("closure sets are unions of atoms")
}

/// Closure sets (not atoms) whose stay coefficient equals `a`.
pub fn level_sets(model: &ChainModel, a: &Rational) -> BTreeSet<Subset> {
    let table = model.table();
    table.non_atoms().filter(|&k| &table.stay(k) == a).collect()
}

/// State indices of the collapsed partitions of `sets`.
pub fn level_states(model: &ChainModel, sets: &BTreeSet<Subset>) -> Result<Vec<usize>> {
    let atoms = model.table().atom_partition();
    let mut out: Vec<usize> = sets
        .iter()
        .map(|&k| {
            let state = collapse_onto(atoms, k);
            model.index_of(&state).ok_or_else(|| {
                Error::Invariant(format!("collapsed partition {state} is not reachable"))
            })
        })
        .collect::<Result<_>>()?;
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `eta`, its maximizing sets and states, and `beta0`.
pub fn decay_rate(model: &ChainModel) -> Result<(Rational, Rational, BTreeSet<Subset>, Vec<usize>)> {
    if model.rho().is_identity() {
        return Err(Error::NotApplicable(IDENTITY_NOT_APPLICABLE.into()));
    }
    let table = model.table();
    let eta = table
        .non_atoms()
        .map(|k| table.stay(k))
        .max()
        .ok_or_else(|| Error::NotApplicable("every closure set is an atom".into()))?;
    if eta.is_zero() {
        return Err(Error::NotApplicable(
            "the full set splits straight into atoms; absorption is certain after one step".into(),
        ));
    }
    let e_sets = level_sets(model, &eta);
    let e_states = level_states(model, &e_sets)?;
    let beta0 = (0..model.len())
        .filter(|i| *i != model.absorbing() && e_states.binary_search(i).is_err())
        .map(|i| model.self_loop(i))
        .max()
        .unwrap_or_else(Rational::zero);
    if !(eta.is_positive() && eta < Rational::one()) {
        return Err(Error::Invariant(format!("decay rate {} outside (0, 1)", format_rational(&eta))));
    }
    if beta0 >= eta {
        return Err(Error::Invariant(format!(
            "largest non-maximal self-loop {} is not below the decay rate {}",
            format_rational(&beta0),
            format_rational(&eta)
        )));
    }
    Ok((eta, beta0, e_sets, e_states))
}

/// `h[i] = E_i(rate^-T; T < ∞)` for the entrance time `T` into `targets`,
/// solved backward over the acyclic graph.
pub fn transform_values(model: &ChainModel, rate: &Rational, targets: &[usize]) -> Result<Vec<Rational>> {
    let target_set: BTreeSet<usize> = targets.iter().copied().collect();
    let mut h = vec![Rational::zero(); model.len()];
    for i in model.reverse_topological_order() {
        if target_set.contains(&i) {
            h[i] = Rational::one();
            continue;
        }
        if i == model.absorbing() {
            continue;
        }
        let numerator: Rational = model
            .row(i)
            .iter()
            .filter(|(j, _)| *j != i)
            .map(|(j, p)| p * &h[*j])
            .sum();
        if numerator.is_zero() {
            continue;
        }
        let stay = model.self_loop(i);
        if &stay >= rate {
            return Err(Error::NotApplicable(format!(
                "self-loop {} of {} is not below the rate {}; the transform diverges",
                format_rational(&stay),
                model.state(i),
                format_rational(rate)
            )));
        }
        h[i] = numerator / (rate - stay);
    }
    Ok(h)
}

pub fn analyze(model: &ChainModel) -> Result<DecayAnalysis> {
    let (eta, beta0, e_sets, e_states) = decay_rate(model)?;
    let phi = transform_values(model, &eta, &e_states)?;
    let limit_constant = phi[model.initial()].clone();
    let quasi_limit = quasi_limit_values(model, &eta, &e_states, &limit_constant)?;
    Ok(DecayAnalysis {
        eta,
        beta0,
        e_sets,
        e_states,
        phi,
        limit_constant,
        quasi_limit,
    })
}

fn quasi_limit_values(
    model: &ChainModel,
    eta: &Rational,
    e_states: &[usize],
    limit_constant: &Rational,
) -> Result<Vec<(usize, Rational)>> {
    let mut out = Vec::with_capacity(e_states.len());
    for &e in e_states {
        let h = transform_values(model, eta, &[e])?;
        out.push((e, &h[model.initial()] / limit_constant));
    }
    let total: Rational = out.iter().map(|(_, p)| p).sum();
    if !total.is_one() {
        return Err(Error::Invariant(format!(
            "limiting conditional law sums to {}",
            format_rational(&total)
        )));
    }
    Ok(out)
}

impl DecayAnalysis {
    pub fn quasi_limit_weights(&self, model: &ChainModel) -> WeightVector {
        self.quasi_limit
            .iter()
            .map(|(i, p)| (model.state(*i).clone(), p.clone()))
            .collect()
    }

    pub fn is_e_state(&self, i: usize) -> bool {
        self.e_states.binary_search(&i).is_ok()
    }
}

/// `phi[state] / phi[{I}]`.
pub fn ratio_limit(model: &ChainModel, analysis: &DecayAnalysis, state: &Partition) -> Result<Rational> {
    let i = model
        .index_of(state)
        .ok_or_else(|| Error::InvalidArgument(format!("{state} is not a state of the chain")))?;
    if i == model.absorbing() {
        return Err(Error::InvalidArgument("the ratio limit is undefined at the absorbing state".into()));
    }
    Ok(&analysis.phi[i] / &analysis.limit_constant)
}

/// `P* phi = eta phi` on the transient states.
pub fn eigenvector_check(model: &ChainModel, analysis: &DecayAnalysis) -> CheckReport {
    let mut report = CheckReport::new("right eigenvector of the transient restriction");
    for i in 0..model.len() {
        if i == model.absorbing() {
            continue;
        }
        let lhs: Rational = model
            .row(i)
            .iter()
            .filter(|(j, _)| *j != model.absorbing())
            .map(|(j, p)| p * &analysis.phi[*j])
            .sum();
        let rhs = &analysis.eta * &analysis.phi[i];
        report.check(lhs == rhs, || format!("eigen-identity fails at {}", model.state(i)));
    }
    report
}

/// Scaled survival `eta^-n P(ζ > n)` against the limit constant.
#[derive(Debug, Clone)]
pub struct GeometricLimit {
    pub scaled: Vec<Rational>,
    /// Share of surviving mass on `e_states` at each step.
    pub e_share: Vec<Rational>,
    pub deviation: f64,
    pub report: CheckReport,
}

pub fn geometric_limit_check(model: &ChainModel, analysis: &DecayAnalysis, horizon: usize) -> GeometricLimit {
    let profile = model.survival_profile(horizon);
    let mut scaled = Vec::with_capacity(horizon + 1);
    let mut e_share = Vec::with_capacity(horizon + 1);
    let mut v = model.initial_distribution();
    for n in 0..=horizon {
        if n > 0 {
            v = model.step(&v);
        }
        let survival = &profile.survival[n];
        scaled.push(survival * pow(&analysis.eta, -(n as i32)));
        let on_e: Rational = analysis.e_states.iter().map(|&e| &v[e]).sum();
        e_share.push(if survival.is_zero() { Rational::zero() } else { on_e / survival });
    }
    let last = scaled.last().expect("horizon + 1 entries");
    let deviation = (to_f64(last) - to_f64(&analysis.limit_constant)).abs();
    let mut report = CheckReport::new("geometric decay of survival");
    if analysis.beta0.is_zero() {
        let depth = model.depth();
        for (n, s) in scaled.iter().enumerate().skip(depth + 1) {
            report.check(s == &analysis.limit_constant, || {
                format!("scaled survival at n = {n} differs from the limit constant")
            });
        }
    }
    GeometricLimit {
        scaled,
        e_share,
        deviation,
        report,
    }
}

/// The process conditioned never to be absorbed.
#[derive(Debug, Clone)]
pub struct QProcess {
    /// States with positive `phi`.
    pub domain: Vec<usize>,
    /// Rows indexed by state; empty outside the domain.
    pub rows: Vec<Row>,
}

impl QProcess {
    pub fn prob(&self, i: usize, j: usize) -> Rational {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn path_probability(&self, path: &[usize]) -> Rational {
        path.windows(2).map(|w| self.prob(w[0], w[1])).product()
    }

    pub fn verify(&self, model: &ChainModel) -> CheckReport {
        let mut report = CheckReport::new("conditioned process rows");
        for &i in &self.domain {
            let total: Rational = self.rows[i].iter().map(|(_, p)| p).sum();
            report.check(total.is_one(), || format!("row of {} sums to {total}", model.state(i)));
        }
        report
    }
}

pub fn q_process(model: &ChainModel, analysis: &DecayAnalysis) -> QProcess {
    let phi = &analysis.phi;
    let domain: Vec<usize> = (0..model.len())
        .filter(|&i| i != model.absorbing() && phi[i].is_positive())
        .collect();
    let mut rows = vec![Vec::new(); model.len()];
    for &i in &domain {
        let scale = &analysis.eta * &phi[i];
        rows[i] = model
            .row(i)
            .iter()
            .filter(|(j, _)| *j != model.absorbing() && phi[*j].is_positive())
            .map(|(j, p)| (*j, p * &phi[*j] / &scale))
            .collect();
    }
    QProcess { domain, rows }
}

/// `P_{path[0]}(Y_1 = path[1], ..., Y_k = path[k] | ζ > n)` for `n ≥ k`,
/// using a precomputed [`ChainModel::survival_table`] of horizon `≥ n`.
pub fn conditioned_path_probability(
    model: &ChainModel,
    survival: &[Vec<Rational>],
    path: &[usize],
    n: usize,
) -> Result<Rational> {
    let k = path.len().saturating_sub(1);
    if path.is_empty() || n < k || n >= survival.len() {
        return Err(Error::InvalidArgument(format!(
            "conditioning horizon {n} must cover the path length {k} and the survival table"
        )));
    }
    let denominator = &survival[n][path[0]];
    if denominator.is_zero() {
        return Err(Error::InvalidArgument("the path starts at the absorbing state".into()));
    }
    let along: Rational = path.windows(2).map(|w| model.prob(w[0], w[1])).product();
    Ok(along * &survival[n - k][path[k]] / denominator)
}

/// Checks that `nu`, supported on the collapsed partitions with stay
/// coefficient `a`, is a left eigenvector of the transient restriction and
/// is preserved under conditioning on survival up to `horizon`.
pub fn qsd_verify(
    model: &ChainModel,
    analysis: &DecayAnalysis,
    nu: &WeightVector,
    a: &Rational,
    horizon: usize,
) -> Result<CheckReport> {
    if !a.is_positive() || a > &analysis.eta {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue {} outside (0, {}]",
            format_rational(a),
            format_rational(&analysis.eta)
        )));
    }
    let sets = level_sets(model, a);
    if sets.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no closure set has stay coefficient {}",
            format_rational(a)
        )));
    }
    let support = level_states(model, &sets)?;
    let mut v = vec![Rational::zero(); model.len()];
    for (state, p) in nu {
        let i = model
            .index_of(state)
            .filter(|i| support.contains(i))
            .ok_or_else(|| Error::InvalidArgument(format!("mass on {state} outside the admissible states")))?;
        if p.is_negative() {
            return Err(Error::InvalidArgument(format!("negative mass on {state}")));
        }
        v[i] = p.clone();
    }
    if !v.iter().sum::<Rational>().is_one() {
        return Err(Error::InvalidArgument("the candidate law does not sum to 1".into()));
    }

    let mut report = CheckReport::new(format!("quasi-stationarity at eigenvalue {}", format_rational(a)));
    let absorbing = model.absorbing();
    let mut image = model.step(&v);
    image[absorbing] = Rational::zero();
    for i in 0..model.len() {
        report.check(image[i] == a * &v[i], || {
            format!("left eigen-identity fails at {}", model.state(i))
        });
    }
    for &i in &support {
        let row_mass: Rational = model
            .row(i)
            .iter()
            .filter(|(j, _)| support.contains(j))
            .map(|(_, p)| p)
            .sum();
        report.check(&row_mass == a, || {
            format!("row of {} restricted to the support has mass {row_mass}", model.state(i))
        });
    }
    let mut law = v.clone();
    for n in 1..=horizon {
        law = model.step(&law);
        let survival = Rational::one() - &law[absorbing];
        if survival.is_zero() {
            report.check(false, || format!("the law is absorbed by step {n}"));
            break;
        }
        for i in 0..model.len() {
            if i == absorbing {
                continue;
            }
            let conditioned = &law[i] / &survival;
            report.check(conditioned == v[i], || {
                format!("conditioned law at step {n} moves mass on {}", model.state(i))
            });
        }
    }
    Ok(report)
}
