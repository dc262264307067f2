//! Random instances shared by the property and acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use recomb_core::measures::{AlphabetSpec, DenseMeasure};
use recomb_core::rational::ratio;
use recomb_core::{Rational, RecombDistribution, SiteSet, Subset};

#[derive(Debug)]
pub struct Instance {
    pub rho: RecombDistribution,
    pub mu: DenseMeasure,
}

pub fn distribution(n: usize, entries: &[(&[usize], (i64, i64))]) -> RecombDistribution {
    let raw = entries
        .iter()
        .map(|(b, (a, d))| (Subset::from_sites(b).unwrap(), ratio(*a, *d)))
        .collect();
    RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
}

/// Crossover points 1..n-1, each splitting prefix from suffix with equal
/// weight on both sides.
pub fn single_crossover(n: usize) -> RecombDistribution {
    let mut raw = BTreeMap::new();
    let w = ratio(1, 2 * (n as i64 - 1));
    for cut in 1..n {
        let left = Subset::full(cut);
        raw.insert(left, w.clone());
        raw.insert(Subset::full(n).minus(left), w.clone());
    }
    RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
}

/// Symmetric support of at most six sets: one to three complementary
/// pairs with integer weights, plus the full set when room remains.
pub fn random_rho(rng: &mut StdRng, n: usize) -> RecombDistribution {
    let full = Subset::full(n);
    let n_pairs = rng.gen_range(1..=3usize).min((1 << (n - 1)) - 1);
    let mut pairs: Vec<Subset> = Vec::new();
    while pairs.len() < n_pairs {
        let bits = rng.gen_range(1..(1u64 << n) - 1);
        // representative contains site 1
        let j = Subset::from_bits(if bits & 1 == 1 { bits } else { full.bits() & !bits });
        if !pairs.contains(&j) {
            pairs.push(j);
        }
    }
    let mut weights: Vec<(Subset, i64)> = Vec::new();
    for j in pairs {
        let w = rng.gen_range(1..=9i64);
        weights.push((j, w));
        weights.push((full.minus(j), w));
    }
    if weights.len() <= 4 && rng.gen_bool(0.5) {
        weights.push((full, rng.gen_range(1..=9i64)));
    }
    let total: i64 = weights.iter().map(|(_, w)| w).sum();
    let raw = weights.into_iter().map(|(j, w)| (j, ratio(w, total))).collect();
    RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
}

/// Random full-support measure on a binary alphabet.
pub fn random_measure(rng: &mut StdRng, n: usize) -> DenseMeasure {
    let alphabet = AlphabetSpec::binary(n).unwrap();
    let raw: Vec<i64> = (0..1usize << n).map(|_| rng.gen_range(1..=20)).collect();
    let total: i64 = raw.iter().sum();
    let table: Vec<Rational> = raw.iter().map(|&w| ratio(w, total)).collect();
    DenseMeasure::full(&alphabet, table).unwrap()
}

pub fn random_instance(rng: &mut StdRng) -> Instance {
    let n = rng.gen_range(2..=5usize);
    Instance {
        rho: random_rho(rng, n),
        mu: random_measure(rng, n),
    }
}

pub fn instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng)).collect()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Up to six distinct proper subsets with unrelated weights, so complementary
/// pairs generally carry different mass.
pub fn random_asymmetric_rho(rng: &mut StdRng, n: usize) -> RecombDistribution {
    let count = rng.gen_range(1..=6usize).min((1 << n) - 2);
    let mut weights: BTreeMap<Subset, i64> = BTreeMap::new();
    while weights.len() < count {
        let j = Subset::from_bits(rng.gen_range(1..(1u64 << n) - 1));
        weights.entry(j).or_insert_with(|| rng.gen_range(1..=9));
    }
    let total: i64 = weights.values().sum();
    let raw = weights.into_iter().map(|(j, w)| (j, ratio(w, total))).collect();
    RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
}

/// Single crossover on `n` sites with extra mass `stay` on the full set.
pub fn single_crossover_with_stay(n: usize, stay: Rational) -> RecombDistribution {
    let base = single_crossover(n);
    let full = Subset::full(n);
    let scale = Rational::from_integer(1.into()) - &stay;
    let mut raw: BTreeMap<Subset, Rational> =
        base.weights().iter().map(|(j, w)| (*j, w * &scale)).collect();
    raw.insert(full, stay);
    RecombDistribution::validate(SiteSet::new(n).unwrap(), raw).unwrap()
}

/// The three-site example: {1}, {2,3}, {1,2}, {3} at 1/4 each.
pub fn three_site() -> RecombDistribution {
    distribution(3, &[(&[1], (1, 4)), (&[2, 3], (1, 4)), (&[1, 2], (1, 4)), (&[3], (1, 4))])
}
