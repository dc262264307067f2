//! Dense probability tables over products of finite alphabets, marginals,
//! the product composition and the recombination operator itself.
//!
//! Configurations are indexed row-major with sites in ascending order: the
//! highest-numbered site of the support varies fastest. The measure on the
//! empty support is the scalar 1, a table of length one.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rational::{format_rational, Rational};
use crate::report::CheckReport;
use crate::rho::{coefficient_table, RecombDistribution};
use crate::subsets::{is_finer, Partition, Subset};

/// Default bound on dense table length.
pub const DEFAULT_MAX_DENSE: usize = 1 << 20;

/// Alphabet size per site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphabetSpec {
    sizes: Vec<usize>,
    max_dense: usize,
}

impl AlphabetSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        Self::with_max_dense(sizes, DEFAULT_MAX_DENSE)
    }

    pub fn with_max_dense(sizes: Vec<usize>, max_dense: usize) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidInput("at least two sites are required".into()));
        }
        if let Some(site) = sizes.iter().position(|&s| s < 2) {
            return Err(Error::InvalidInput(format!(
                "alphabet of site {} has fewer than two letters",
                site + 1
            )));
        }
        let mut total: usize = 1;
        for &s in &sizes {
            total = total.checked_mul(s).filter(|&t| t <= max_dense).ok_or_else(|| {
                Error::ResourceLimit(format!(
                    "dense configuration space exceeds the limit of {max_dense} entries"
                ))
            })?;
        }
        Ok(AlphabetSpec { sizes, max_dense })
    }

    /// Binary alphabet on every site.
    pub fn binary(n_sites: usize) -> Result<Self> {
        Self::new(vec![2; n_sites])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_sites(&self) -> usize {
        self.sizes.len()
    }

    pub fn max_dense(&self) -> usize {
        self.max_dense
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.sizes.len())
    }

    /// Number of configurations on `support`.
    pub fn table_len(&self, support: Subset) -> usize {
        support.sites().map(|s| self.sizes[s]).product()
    }

    /// Row-major strides of `support`, indexed by site.
    fn strides(&self, support: Subset) -> Vec<usize> {
        let mut strides = vec![0; self.sizes.len()];
        let mut stride = 1;
        let sites: Vec<usize> = support.sites().collect();
        for &site in sites.iter().rev() {
            strides[site] = stride;
            stride *= self.sizes[site];
        }
        strides
    }
}

/// Walks every configuration of `support` in table order, yielding the
/// digit vector over all sites (zero off the support).
fn for_each_config(alphabet: &AlphabetSpec, support: Subset, mut visit: impl FnMut(usize, &[usize])) {
    let sites: Vec<usize> = support.sites().collect();
    let mut digits = vec![0usize; alphabet.sizes.len()];
    let len = alphabet.table_len(support);
    for index in 0..len {
        visit(index, &digits);
        for &site in sites.iter().rev() {
            digits[site] += 1;
            if digits[site] < alphabet.sizes[site] {
                break;
            }
            digits[site] = 0;
        }
    }
}

fn index_of(strides: &[usize], support: Subset, digits: &[usize]) -> usize {
    support.sites().map(|s| digits[s] * strides[s]).sum()
}

/// A probability table on the configurations of `support`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMeasure {
    alphabet: AlphabetSpec,
    support: Subset,
    table: Vec<Rational>,
}

impl DenseMeasure {
    pub fn new(alphabet: &AlphabetSpec, support: Subset, table: Vec<Rational>) -> Result<Self> {
        if !support.is_subset_of(alphabet.full()) {
            return Err(Error::InvalidInput(format!("support {support} outside the site set")));
        }
        let expected = alphabet.table_len(support);
        if table.len() != expected {
            return Err(Error::InvalidInput(format!(
                "measure on {support} needs {expected} entries, got {}",
                table.len()
            )));
        }
        if let Some(i) = table.iter().position(|p| p.is_negative()) {
            return Err(Error::InvalidInput(format!("entry {i} of the measure is negative")));
        }
        let total: Rational = table.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidInput(format!(
                "measure entries sum to {}, expected 1",
                format_rational(&total)
            )));
        }
        Ok(DenseMeasure {
            alphabet: alphabet.clone(),
            support,
            table,
        })
    }

    /// Full-support measure from its table.
    pub fn full(alphabet: &AlphabetSpec, table: Vec<Rational>) -> Result<Self> {
        Self::new(alphabet, alphabet.full(), table)
    }

    /// The identity for the product: the unit mass on the empty support.
    pub fn unit(alphabet: &AlphabetSpec) -> Self {
        DenseMeasure {
            alphabet: alphabet.clone(),
            support: Subset::EMPTY,
            table: vec![Rational::one()],
        }
    }

    /// Product of one-site distributions, one per site in order.
    pub fn from_site_marginals(alphabet: &AlphabetSpec, marginals: Vec<Vec<Rational>>) -> Result<Self> {
        if marginals.len() != alphabet.n_sites() {
            return Err(Error::InvalidInput(format!(
                "{} site marginals given for {} sites",
                marginals.len(),
                alphabet.n_sites()
            )));
        }
        let mut out = DenseMeasure::unit(alphabet);
        for (site, table) in marginals.into_iter().enumerate() {
            let factor = DenseMeasure::new(alphabet, Subset::singleton(site), table)?;
            out = product(&out, &factor)?;
        }
        Ok(out)
    }

    pub fn support(&self) -> Subset {
        self.support
    }

    pub fn table(&self) -> &[Rational] {
        &self.table
    }

    pub fn alphabet(&self) -> &AlphabetSpec {
        &self.alphabet
    }

    /// Entry at a configuration given as digits over all sites.
    pub fn at(&self, digits: &[usize]) -> &Rational {
        let strides = self.alphabet.strides(self.support);
        &self.table[index_of(&strides, self.support, digits)]
    }

    pub fn is_probability(&self) -> bool {
        self.table.iter().all(|p| !p.is_negative()) && self.table.iter().sum::<Rational>().is_one()
    }
}

/// Sums out every site of the support outside `keep`.
pub fn marginal(measure: &DenseMeasure, keep: Subset) -> Result<DenseMeasure> {
    if !keep.is_subset_of(measure.support) {
        return Err(Error::InvalidArgument(format!(
            "marginal on {keep} requested from a measure on {}",
            measure.support
        )));
    }
    if keep == measure.support {
        return Ok(measure.clone());
    }
    let alphabet = &measure.alphabet;
    let strides = alphabet.strides(keep);
    let mut table = vec![Rational::zero(); alphabet.table_len(keep)];
    for_each_config(alphabet, measure.support, |index, digits| {
        table[index_of(&strides, keep, digits)] += &measure.table[index];
    });
    Ok(DenseMeasure {
        alphabet: alphabet.clone(),
        support: keep,
        table,
    })
}

/// Independent combination of measures on disjoint supports.
pub fn product(a: &DenseMeasure, b: &DenseMeasure) -> Result<DenseMeasure> {
    if !a.support.is_disjoint(b.support) {
        return Err(Error::InvalidArgument(format!(
            "product of measures on overlapping supports {} and {}",
            a.support, b.support
        )));
    }
    let alphabet = &a.alphabet;
    let support = a.support.union(b.support);
    let strides_a = alphabet.strides(a.support);
    let strides_b = alphabet.strides(b.support);
    let mut table = Vec::with_capacity(alphabet.table_len(support));
    for_each_config(alphabet, support, |_, digits| {
        let pa = &a.table[index_of(&strides_a, a.support, digits)];
        let pb = &b.table[index_of(&strides_b, b.support, digits)];
        table.push(pa * pb);
    });
    Ok(DenseMeasure {
        alphabet: alphabet.clone(),
        support,
        table,
    })
}

fn check_full(rho: &RecombDistribution, measure: &DenseMeasure) -> Result<()> {
    if measure.alphabet.n_sites() != rho.sites().len() || measure.support != measure.alphabet.full() {
        return Err(Error::InvalidArgument(
            "the operator acts on full-support measures over the recombination site set".into(),
        ));
    }
    Ok(())
}

fn weighted_sum(alphabet: &AlphabetSpec, support: Subset, terms: Vec<(Rational, DenseMeasure)>) -> DenseMeasure {
    let mut table = vec![Rational::zero(); alphabet.table_len(support)];
    for (weight, term) in terms {
        for (acc, p) in table.iter_mut().zip(term.table) {
            *acc += &weight * p;
        }
    }
    DenseMeasure {
        alphabet: alphabet.clone(),
        support,
        table,
    }
}

/// One application of the operator: the mixture over support sets `J` of
/// the product of the marginals on `J` and on its complement.
pub fn xi_apply(rho: &RecombDistribution, measure: &DenseMeasure) -> Result<DenseMeasure> {
    xi_apply_with(Execution::default(), rho, measure)
}

pub fn xi_apply_with(exec: Execution, rho: &RecombDistribution, measure: &DenseMeasure) -> Result<DenseMeasure> {
    check_full(rho, measure)?;
    let full = measure.support;
    let support: Vec<(Subset, Rational)> = rho.support().map(|(j, w)| (j, w.clone())).collect();
    let terms = exec::map_collect(exec, &support, |(j, w)| -> Result<(Rational, DenseMeasure)> {
        let left = marginal(measure, *j)?;
        let right = marginal(measure, full.minus(*j))?;
        Ok((w.clone(), product(&left, &right)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(weighted_sum(&measure.alphabet, full, terms))
}

/// `n`-fold application; `n = 0` returns the input.
pub fn xi_iterate(rho: &RecombDistribution, measure: &DenseMeasure, n: usize) -> Result<DenseMeasure> {
    xi_iterate_with(Execution::default(), rho, measure, n)
}

pub fn xi_iterate_with(
    exec: Execution,
    rho: &RecombDistribution,
    measure: &DenseMeasure,
    n: usize,
) -> Result<DenseMeasure> {
    check_full(rho, measure)?;
    let mut current = measure.clone();
    for _ in 0..n {
        current = xi_apply_with(exec, rho, &current)?;
    }
    Ok(current)
}

/// Product of the marginals of `measure` on the blocks of `partition`.
pub fn product_over_partition(measure: &DenseMeasure, partition: &Partition) -> Result<DenseMeasure> {
    let mut out = DenseMeasure::unit(&measure.alphabet);
    for &block in partition.blocks() {
        out = product(&out, &marginal(measure, block)?)?;
    }
    Ok(out)
}

/// Marginals on subsets of atoms are invariant, and products over
/// refinements of the atom partition are fixed points. `refinements` lists
/// the partitions checked for the fixed-point property; the atom partition
/// itself and the singletons are always included.
pub fn verify_lemma1(
    rho: &RecombDistribution,
    measure: &DenseMeasure,
    refinements: &[Partition],
) -> Result<CheckReport> {
    check_full(rho, measure)?;
    let mut report = CheckReport::new("marginal preservation and fixed points");
    let image = xi_apply(rho, measure)?;
    let atoms = rho.atom_partition();
    for &atom in atoms.blocks() {
        // every nonempty subset of the atom
        let bits = atom.bits();
        let mut sub = bits;
        while sub != 0 {
            let m = Subset::from_bits(sub);
            let before = marginal(measure, m)?;
            let after = marginal(&image, m)?;
            report.check(before == after, || format!("marginal on {m} changed"));
            sub = (sub - 1) & bits;
        }
    }
    let mut candidates = vec![atoms.clone(), rho.sites().singletons()];
    candidates.extend(refinements.iter().cloned());
    for partition in candidates {
        if !is_finer(&partition, &atoms) {
            report.note(format!("{partition} is not finer than the atoms; skipped"));
            continue;
        }
        let fixed = product_over_partition(measure, &partition)?;
        let moved = xi_apply(rho, &fixed)?;
        report.check(moved == fixed, || format!("product over {partition} is not fixed"));
    }
    Ok(report)
}

/// For every closure block `K`, the marginal of the image on `K` equals the
/// stay coefficient times the marginal on `K` plus the split terms weighted
/// by their coefficients.
pub fn verify_lemma3(rho: &RecombDistribution, measure: &DenseMeasure) -> Result<CheckReport> {
    check_full(rho, measure)?;
    let mut report = CheckReport::new("marginal of the image on closure blocks");
    let table = coefficient_table(rho);
    let image = xi_apply(rho, measure)?;
    for &k in table.closure_sets() {
        let lhs = marginal(&image, k)?;
        let mut terms = Vec::new();
        for (m, w) in table.row(k) {
            let term = if m == k {
                marginal(measure, k)?
            } else {
                product(&marginal(measure, m)?, &marginal(measure, k.minus(m))?)?
            };
            terms.push((w.clone(), term));
        }
        let rhs = weighted_sum(&measure.alphabet, k, terms);
        report.check(lhs == rhs, || format!("marginal formula fails on {k}"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::subsets::SiteSet;
    use std::collections::BTreeMap;

    fn q(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    fn correlated() -> DenseMeasure {
        let alphabet = AlphabetSpec::binary(2).unwrap();
        DenseMeasure::full(&alphabet, q(&[(1, 2), (0, 1), (0, 1), (1, 2)])).unwrap()
    }

    fn two_site_split() -> RecombDistribution {
        let mut raw = BTreeMap::new();
        raw.insert(Subset::from_sites(&[1]).unwrap(), ratio(1, 2));
        raw.insert(Subset::from_sites(&[2]).unwrap(), ratio(1, 2));
        RecombDistribution::validate(SiteSet::new(2).unwrap(), raw).unwrap()
    }

    #[test]
    fn marginal_examples() {
        let alphabet = AlphabetSpec::binary(2).unwrap();
        let uniform = DenseMeasure::full(&alphabet, vec![ratio(1, 4); 4]).unwrap();
        let m = marginal(&uniform, Subset::singleton(0)).unwrap();
        assert_eq!(m.table(), &q(&[(1, 2), (1, 2)]));
        let m = marginal(&correlated(), Subset::singleton(0)).unwrap();
        assert_eq!(m.table(), &q(&[(1, 2), (1, 2)]));
        let scalar = marginal(&uniform, Subset::EMPTY).unwrap();
        assert_eq!(scalar, DenseMeasure::unit(&alphabet));
        assert!(marginal(&m, Subset::singleton(1)).is_err());
    }

    #[test]
    fn row_major_site_order() {
        let alphabet = AlphabetSpec::new(vec![2, 3]).unwrap();
        let table: Vec<Rational> = (1..=6).map(|i| ratio(i, 21)).collect();
        let mu = DenseMeasure::full(&alphabet, table).unwrap();
        // site 2 varies fastest
        assert_eq!(mu.at(&[0, 2]), &ratio(3, 21));
        assert_eq!(mu.at(&[1, 0]), &ratio(4, 21));
        let second = marginal(&mu, Subset::singleton(1)).unwrap();
        assert_eq!(second.table(), &q(&[(5, 21), (7, 21), (9, 21)]));
    }

    #[test]
    fn product_examples() {
        let alphabet = AlphabetSpec::binary(2).unwrap();
        let mu = correlated();
        assert_eq!(product(&mu, &DenseMeasure::unit(&alphabet)).unwrap(), mu);
        let half = DenseMeasure::new(&alphabet, Subset::singleton(0), q(&[(1, 2), (1, 2)])).unwrap();
        let half2 = DenseMeasure::new(&alphabet, Subset::singleton(1), q(&[(1, 2), (1, 2)])).unwrap();
        let prod = product(&half, &half2).unwrap();
        assert_eq!(prod.table(), &vec![ratio(1, 4); 4]);
        assert!(product(&half, &half).is_err());
    }

    #[test]
    fn product_is_stable_under_restriction() {
        let alphabet = AlphabetSpec::new(vec![2, 3, 2]).unwrap();
        let table: Vec<Rational> = (1..=12).map(|i| ratio(i, 78)).collect();
        let mu = DenseMeasure::full(&alphabet, table).unwrap();
        let j = Subset::from_sites(&[1, 3]).unwrap();
        let k = Subset::from_sites(&[2]).unwrap();
        let mj = marginal(&mu, j).unwrap();
        let mk = marginal(&mu, k).unwrap();
        let joint = product(&mj, &mk).unwrap();
        for bits in 0..8u64 {
            let m = Subset::from_bits(bits);
            let lhs = marginal(&joint, m).unwrap();
            let rhs = product(
                &marginal(&mj, j.intersect(m)).unwrap(),
                &marginal(&mk, k.intersect(m)).unwrap(),
            )
            .unwrap();
            assert_eq!(lhs, rhs, "{m}");
        }
    }

    #[test]
    fn xi_examples() {
        let mu = correlated();
        let mut raw = BTreeMap::new();
        raw.insert(Subset::full(2), ratio(1, 1));
        let identity = RecombDistribution::validate(SiteSet::new(2).unwrap(), raw).unwrap();
        assert_eq!(xi_apply(&identity, &mu).unwrap(), mu);

        let rho = two_site_split();
        let image = xi_apply(&rho, &mu).unwrap();
        assert_eq!(image.table(), &vec![ratio(1, 4); 4]);

        let bernoulli = product_over_partition(&mu, &rho.sites().singletons()).unwrap();
        assert_eq!(xi_apply(&rho, &bernoulli).unwrap(), bernoulli);
    }

    #[test]
    fn iterate_examples() {
        let rho = two_site_split();
        let mu = correlated();
        assert_eq!(xi_iterate(&rho, &mu, 0).unwrap(), mu);
        assert_eq!(xi_iterate(&rho, &mu, 1).unwrap(), xi_apply(&rho, &mu).unwrap());
        assert_eq!(
            xi_iterate_with(Execution::Sequential, &rho, &mu, 3).unwrap(),
            xi_iterate_with(Execution::Parallel, &rho, &mu, 3).unwrap()
        );
    }

    #[test]
    fn product_over_partition_examples() {
        let mu = correlated();
        let sites = SiteSet::new(2).unwrap();
        assert_eq!(product_over_partition(&mu, &sites.coarsest()).unwrap(), mu);
        let b = product_over_partition(&mu, &sites.singletons()).unwrap();
        assert_eq!(b.table(), &vec![ratio(1, 4); 4]);
    }

    #[test]
    fn site_marginal_constructor() {
        let alphabet = AlphabetSpec::binary(2).unwrap();
        let mu = DenseMeasure::from_site_marginals(
            &alphabet,
            vec![q(&[(1, 3), (2, 3)]), q(&[(1, 2), (1, 2)])],
        )
        .unwrap();
        assert_eq!(mu.table(), &q(&[(1, 6), (1, 6), (1, 3), (1, 3)]));
    }

    #[test]
    fn measure_validation() {
        let alphabet = AlphabetSpec::binary(2).unwrap();
        assert!(DenseMeasure::full(&alphabet, vec![ratio(1, 4); 3]).is_err());
        assert!(DenseMeasure::full(&alphabet, vec![ratio(1, 3); 4]).is_err());
        assert!(DenseMeasure::full(&alphabet, q(&[(1, 1), (1, 1), (-1, 1), (0, 1)])).is_err());
        assert!(AlphabetSpec::new(vec![2, 1]).is_err());
        assert!(matches!(
            AlphabetSpec::with_max_dense(vec![2; 5], 16),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn marginal_checks_on_small_example() {
        let rho = two_site_split();
        let mu = correlated();
        assert!(verify_lemma1(&rho, &mu, &[]).unwrap().passed());
        assert!(verify_lemma3(&rho, &mu).unwrap().passed());
    }
}
