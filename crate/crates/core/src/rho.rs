//! The recombination distribution over subsets of sites, the coefficients it
//! induces on each reachable block, and the one-step split kernel of a block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, Rational};
use crate::report::CheckReport;
use crate::subsets::{atoms, closure, Partition, SiteSet, Subset};

/// A validated probability vector over nonempty subsets of the site set.
#[derive(Debug, Clone, PartialEq)]
pub struct RecombDistribution {
    sites: SiteSet,
    weights: BTreeMap<Subset, Rational>,
}

impl RecombDistribution {
    /// Checks that the weights form a probability vector with no mass on the
    /// empty set. Zero entries are dropped.
    pub fn validate(sites: SiteSet, raw: BTreeMap<Subset, Rational>) -> Result<Self> {
        let full = sites.full();
        let mut weights = BTreeMap::new();
        let mut total = Rational::zero();
        for (subset, weight) in raw {
            if weight.is_negative() {
                return Err(Error::NegativeWeight {
                    subset,
                    weight: format_rational(&weight),
                });
            }
            if subset.is_empty() {
                if !weight.is_zero() {
                    return Err(Error::NonzeroEmptySet);
                }
                continue;
            }
            if !subset.is_subset_of(full) {
                return Err(Error::InvalidInput(format!(
                    "subset {subset} uses sites outside 1..={}",
                    sites.len()
                )));
            }
            if weight.is_zero() {
                continue;
            }
            total += &weight;
            weights.insert(subset, weight);
        }
        if !total.is_one() {
            return Err(Error::NotNormalized {
                sum: format_rational(&total),
            });
        }
        Ok(RecombDistribution { sites, weights })
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    pub fn full(&self) -> Subset {
        self.sites.full()
    }

    pub fn weights(&self) -> &BTreeMap<Subset, Rational> {
        &self.weights
    }

    pub fn weight(&self, subset: Subset) -> Rational {
        self.weights.get(&subset).cloned().unwrap_or_else(Rational::zero)
    }

    /// Weight on keeping the whole sequence from one parent.
    pub fn full_weight(&self) -> Rational {
        self.weight(self.full())
    }

    /// All mass on the full set: the operator is the identity map.
    pub fn is_identity(&self) -> bool {
        self.full_weight().is_one()
    }

    pub fn support(&self) -> impl Iterator<Item = (Subset, &Rational)> + '_ {
        self.weights.iter().map(|(&s, w)| (s, w))
    }

    pub fn is_symmetric(&self) -> bool {
        let full = self.full();
        self.weights
            .iter()
            .filter(|(&j, _)| j != full)
            .all(|(&j, w)| &self.weight(full.minus(j)) == w)
    }

    /// Support plus complements of proper members plus the full set.
    pub fn complement_closed_family(&self) -> BTreeSet<Subset> {
        let full = self.full();
        let mut family: BTreeSet<Subset> = BTreeSet::new();
        family.insert(full);
        for &j in self.weights.keys() {
            family.insert(j);
            if j != full {
                family.insert(full.minus(j));
            }
        }
        family
    }

    /// The partition generated by the support: sites inside one atom are
    /// never separated.
    pub fn atom_partition(&self) -> Partition {
        atoms(&self.complement_closed_family()).expect("complement-closed family is nonempty")
    }
}

/// Averages each complementary pair; the operator is unchanged.
pub fn symmetrize(rho: &RecombDistribution) -> RecombDistribution {
    let full = rho.full();
    let half = Rational::new(1.into(), 2.into());
    let mut weights = BTreeMap::new();
    for &j in rho.weights.keys() {
        if j == full {
            weights.insert(j, rho.weight(j));
            continue;
        }
        let comp = full.minus(j);
        let avg = (rho.weight(j) + rho.weight(comp)) * &half;
        weights.insert(j, avg.clone());
        weights.insert(comp, avg);
    }
    RecombDistribution {
        sites: rho.sites.clone(),
        weights,
    }
}

/// The per-block coefficients: `coefficients(K)[M]` aggregates the weight of
/// support sets whose trace on `K` is `M`, with traces `K` and `∅` both
/// recorded under `K` (the block stays whole).
pub fn block_coefficients<'a>(
    support: impl IntoIterator<Item = (Subset, &'a Rational)>,
    block: Subset,
) -> BTreeMap<Subset, Rational> {
    let mut out: BTreeMap<Subset, Rational> = BTreeMap::new();
    for (j, w) in support {
        let trace = j.intersect(block);
        let key = if trace.is_empty() { block } else { trace };
        *out.entry(key).or_insert_with(Rational::zero) += w;
    }
    out
}

/// One step of a single block: stay whole or split into two nonempty parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DyadicChoice {
    Stay,
    /// `first` holds the smallest site of the block.
    Split { first: Subset, second: Subset },
}

impl DyadicChoice {
    pub fn split(a: Subset, b: Subset) -> Self {
        if a.min_site() < b.min_site() {
            DyadicChoice::Split { first: a, second: b }
        } else {
            DyadicChoice::Split { first: b, second: a }
        }
    }
}

impl fmt::Display for DyadicChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DyadicChoice::Stay => write!(f, "stay"),
            DyadicChoice::Split { first, second } => write!(f, "{{{first},{second}}}"),
        }
    }
}

/// The split law of `block`, positive-weight options only, stay first and
/// splits in canonical order.
pub fn block_kernel<'a>(
    support: impl IntoIterator<Item = (Subset, &'a Rational)>,
    block: Subset,
) -> Vec<(DyadicChoice, Rational)> {
    let coeffs = block_coefficients(support, block);
    let mut splits: BTreeMap<DyadicChoice, Rational> = BTreeMap::new();
    let mut stay = Rational::zero();
    for (m, w) in coeffs {
        if m == block {
            stay = w;
        } else {
            *splits
                .entry(DyadicChoice::split(m, block.minus(m)))
                .or_insert_with(Rational::zero) += w;
        }
    }
    let mut out = Vec::with_capacity(splits.len() + 1);
    if !stay.is_zero() {
        out.push((DyadicChoice::Stay, stay));
    }
    out.extend(splits);
    out
}

/// Coefficients on every block of the closure, with the closure and the atom
/// partition it was computed from.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    rho: RecombDistribution,
    entries: BTreeMap<(Subset, Subset), Rational>,
    closure_sets: BTreeSet<Subset>,
    atom_partition: Partition,
}

/// Builds the table over the closure of the complement-closed support. The
/// full set is always a member so the root block has a kernel even when its
/// own weight is zero.
pub fn coefficient_table(rho: &RecombDistribution) -> CoefficientTable {
    let family = rho.complement_closed_family();
    let closure_sets = closure(&family).expect("family is nonempty and has no empty member");
    let atom_partition = rho.atom_partition();
    let mut entries = BTreeMap::new();
    for &k in &closure_sets {
        for (m, w) in block_coefficients(rho.support(), k) {
            entries.insert((k, m), w);
        }
    }
    CoefficientTable {
        rho: rho.clone(),
        entries,
        closure_sets,
        atom_partition,
    }
}

impl CoefficientTable {
    pub fn rho(&self) -> &RecombDistribution {
        &self.rho
    }

    pub fn closure_sets(&self) -> &BTreeSet<Subset> {
        &self.closure_sets
    }

    pub fn atom_partition(&self) -> &Partition {
        &self.atom_partition
    }

    pub fn entries(&self) -> &BTreeMap<(Subset, Subset), Rational> {
        &self.entries
    }

    /// Coefficient for trace `m` on block `k`; zero when never realized.
    pub fn coeff(&self, k: Subset, m: Subset) -> Rational {
        self.entries.get(&(k, m)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn stay(&self, k: Subset) -> Rational {
        self.coeff(k, k)
    }

    /// Nonzero coefficients of block `k`.
    pub fn row(&self, k: Subset) -> impl Iterator<Item = (Subset, &Rational)> + '_ {
        self.entries
            .range((k, Subset::EMPTY)..)
            .take_while(move |((kk, _), _)| *kk == k)
            .map(|((_, m), w)| (*m, w))
    }

    pub fn is_atom(&self, k: Subset) -> bool {
        self.atom_partition.contains_block(k)
    }

    /// Closure sets that are not atoms, i.e. blocks that can still split.
    pub fn non_atoms(&self) -> impl Iterator<Item = Subset> + '_ {
        self.closure_sets.iter().copied().filter(|&k| !self.is_atom(k))
    }
}

/// The split law of a closure block.
pub fn dyadic_kernel(table: &CoefficientTable, block: Subset) -> Result<Vec<(DyadicChoice, Rational)>> {
    if !table.closure_sets.contains(&block) {
        return Err(Error::InvalidArgument(format!(
            "{block} is not in the closure of the recombination support"
        )));
    }
    Ok(block_kernel(table.rho.support(), block))
}

/// Strict monotonicity of the stay coefficient under proper traces, the
/// symmetry of complementary traces (only when the distribution is
/// symmetric) and the atom characterization by unit stay coefficient.
pub fn verify_lemma2(table: &CoefficientTable) -> CheckReport {
    let mut report = CheckReport::new("coefficient calculus");
    let full = table.rho.full();
    let symmetric = table.rho.is_symmetric();
    for &k in &table.closure_sets {
        let stay_k = table.stay(k);
        for (j, _) in table.rho.support() {
            let m = j.intersect(k);
            if m.is_empty() || m == k {
                continue;
            }
            let stay_m = table.stay(m);
            report.check(stay_k < stay_m, || {
                format!(
                    "stay({k}) = {} is not below stay({m}) = {}",
                    format_rational(&stay_k),
                    format_rational(&stay_m)
                )
            });
            if symmetric && j != full {
                let a = table.coeff(k, m);
                let b = table.coeff(k, k.minus(m));
                report.check(a == b, || {
                    format!(
                        "coefficient on {k}: trace {m} has {} but its complement has {}",
                        format_rational(&a),
                        format_rational(&b)
                    )
                });
            }
        }
        let unit = table.stay(k).is_one();
        report.check(unit == table.is_atom(k), || {
            format!("block {k}: unit stay coefficient {unit}, atom {}", table.is_atom(k))
        });
        let total: Rational = table.row(k).map(|(_, w)| w.clone()).sum();
        report.check(total.is_one(), || {
            format!("coefficients on {k} sum to {}", format_rational(&total))
        });
    }
    report.note(if symmetric {
        "complementary-trace symmetry checked"
    } else {
        "distribution is not symmetric; complementary-trace symmetry skipped"
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    pub(crate) fn s(sites: &[usize]) -> Subset {
        Subset::from_sites(sites).unwrap()
    }

    fn rho(n: usize, entries: &[(&[usize], Rational)]) -> Result<RecombDistribution> {
        let raw = entries
            .iter()
            .map(|(sites, w)| (Subset::from_sites(sites).unwrap(), w.clone()))
            .collect();
        RecombDistribution::validate(SiteSet::new(n).unwrap(), raw)
    }

    fn three_site() -> RecombDistribution {
        rho(
            3,
            &[
                (&[1], ratio(1, 4)),
                (&[2, 3], ratio(1, 4)),
                (&[1, 2], ratio(1, 4)),
                (&[3], ratio(1, 4)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let id = rho(3, &[(&[1, 2, 3], ratio(1, 1))]).unwrap();
        assert!(id.is_identity());
        assert!(matches!(
            rho(3, &[(&[], ratio(1, 2)), (&[1, 2, 3], ratio(1, 2))]),
            Err(Error::NonzeroEmptySet)
        ));
        assert!(!three_site().is_identity());
    }

    #[test]
    fn validate_errors() {
        assert!(matches!(
            rho(2, &[(&[1], ratio(3, 2)), (&[2], ratio(-1, 2))]),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(matches!(
            rho(2, &[(&[1], ratio(1, 3))]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(rho(2, &[(&[3], ratio(1, 1))]).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        let r = rho(2, &[(&[1], ratio(1, 1))]).unwrap();
        let sym = symmetrize(&r);
        assert_eq!(sym.weight(s(&[1])), ratio(1, 2));
        assert_eq!(sym.weight(s(&[2])), ratio(1, 2));

        let t = three_site();
        assert_eq!(symmetrize(&t), t);

        let r = rho(
            3,
            &[(&[1], ratio(1, 2)), (&[2, 3], ratio(1, 6)), (&[1, 2, 3], ratio(1, 3))],
        )
        .unwrap();
        let sym = symmetrize(&r);
        assert_eq!(sym.weight(s(&[1])), ratio(1, 3));
        assert_eq!(sym.weight(s(&[2, 3])), ratio(1, 3));
        assert_eq!(sym.weight(s(&[1, 2, 3])), ratio(1, 3));
        assert!(sym.is_symmetric());
    }

    #[test]
    fn coefficient_table_examples() {
        let id = rho(3, &[(&[1, 2, 3], ratio(1, 1))]).unwrap();
        let table = coefficient_table(&id);
        assert_eq!(table.closure_sets().iter().copied().collect::<Vec<_>>(), vec![s(&[1, 2, 3])]);
        assert_eq!(table.atom_partition().blocks(), &[s(&[1, 2, 3])]);
        assert_eq!(table.stay(s(&[1, 2, 3])), ratio(1, 1));

        let table = coefficient_table(&three_site());
        assert_eq!(table.stay(s(&[1, 2])), ratio(1, 2));
        assert_eq!(table.coeff(s(&[1, 2]), s(&[1])), ratio(1, 4));
        assert_eq!(table.coeff(s(&[1, 2]), s(&[2])), ratio(1, 4));
        assert_eq!(table.stay(s(&[2, 3])), ratio(1, 2));
        assert_eq!(table.stay(s(&[1, 2, 3])), ratio(0, 1));
        assert!(!table.entries().contains_key(&(s(&[1, 2, 3]), s(&[1, 2, 3]))));
    }

    #[test]
    fn coefficient_rows_are_probability_vectors() {
        let table = coefficient_table(&three_site());
        for &k in table.closure_sets() {
            let total: Rational = table.row(k).map(|(_, w)| w.clone()).sum();
            assert!(total.is_one(), "{k}");
        }
    }

    #[test]
    fn kernel_examples() {
        let table = coefficient_table(&three_site());
        assert_eq!(
            dyadic_kernel(&table, s(&[2])).unwrap(),
            vec![(DyadicChoice::Stay, ratio(1, 1))]
        );
        assert_eq!(
            dyadic_kernel(&table, s(&[1, 2])).unwrap(),
            vec![
                (DyadicChoice::Stay, ratio(1, 2)),
                (DyadicChoice::split(s(&[1]), s(&[2])), ratio(1, 2))
            ]
        );
        assert_eq!(
            dyadic_kernel(&table, s(&[1, 2, 3])).unwrap(),
            vec![
                (DyadicChoice::split(s(&[1]), s(&[2, 3])), ratio(1, 2)),
                (DyadicChoice::split(s(&[1, 2]), s(&[3])), ratio(1, 2)),
            ]
        );
        assert!(dyadic_kernel(&table, s(&[1, 3])).is_err());
    }

    #[test]
    fn kernel_aggregates_one_sided_traces() {
        // {1,2} only on one side; {3} induces the same split of the full set
        let r = rho(3, &[(&[1, 2], ratio(1, 3)), (&[3], ratio(2, 3))]).unwrap();
        let table = coefficient_table(&r);
        assert_eq!(
            dyadic_kernel(&table, s(&[1, 2, 3])).unwrap(),
            vec![(DyadicChoice::split(s(&[1, 2]), s(&[3])), ratio(1, 1))]
        );
    }

    #[test]
    fn coefficient_calculus_examples() {
        let table = coefficient_table(&three_site());
        assert!(table.stay(s(&[1, 2])) < table.stay(s(&[1])));
        for atom in table.atom_partition().blocks() {
            assert!(table.stay(*atom).is_one());
        }
        let report = verify_lemma2(&table);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn asymmetric_input_skips_symmetry() {
        let r = rho(3, &[(&[1], ratio(1, 2)), (&[1, 2], ratio(1, 2))]).unwrap();
        let report = verify_lemma2(&coefficient_table(&r));
        assert!(report.passed(), "{report:?}");
        assert!(report.notes().iter().any(|n| n.contains("skipped")));
    }

    #[test]
    fn symmetrize_keeps_atoms() {
        let r = rho(4, &[(&[1], ratio(1, 2)), (&[1, 2, 3], ratio(1, 2))]).unwrap();
        assert_eq!(r.atom_partition(), symmetrize(&r).atom_partition());
    }
}
