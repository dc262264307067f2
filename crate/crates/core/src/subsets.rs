//! Subsets of the site set as bitmasks, canonical partitions, and the
//! intersection-closure / atom machinery that generates partitions from a
//! family of subsets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Hard ceiling imposed by the one-word bitmask.
pub const MAX_SITES: usize = 64;
/// Ceiling for analyses that enumerate partition state spaces.
pub const ENUMERATION_MAX_SITES: usize = 16;

/// The finite index set of sites, numbered `1..=n` in all external formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteSet {
    n_sites: usize,
    labels: Option<Vec<String>>,
}

impl SiteSet {
    pub fn new(n_sites: usize) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&n_sites) {
            return Err(Error::InvalidInput(format!(
                "site count {n_sites} outside supported range 2..={MAX_SITES}"
            )));
        }
        Ok(SiteSet {
            n_sites,
            labels: None,
        })
    }

    pub fn with_labels(n_sites: usize, labels: Vec<String>) -> Result<Self> {
        let mut sites = SiteSet::new(n_sites)?;
        if labels.len() != n_sites {
            return Err(Error::InvalidInput(format!(
                "{} site labels given for {n_sites} sites",
                labels.len()
            )));
        }
        sites.labels = Some(labels);
        Ok(sites)
    }

    pub fn len(&self) -> usize {
        self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.n_sites)
    }

    pub fn contains(&self, subset: Subset) -> bool {
        subset.is_subset_of(self.full())
    }

    /// Fails when the site count is too large for exact state enumeration.
    pub fn check_enumerable(&self) -> Result<()> {
        if self.n_sites > ENUMERATION_MAX_SITES {
            return Err(Error::ResourceLimit(format!(
                "{} sites exceeds the enumeration cap of {ENUMERATION_MAX_SITES}; use kernel-draw simulation",
                self.n_sites
            )));
        }
        Ok(())
    }

    /// The finest partition, one block per site.
    pub fn singletons(&self) -> Partition {
        Partition {
            blocks: (0..self.n_sites).map(Subset::singleton).collect(),
        }
    }

    pub fn coarsest(&self) -> Partition {
        Partition {
            blocks: vec![self.full()],
        }
    }
}

/// A subset of sites; bit `i` stands for site `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u64) -> Self {
        Subset(bits)
    }

    pub fn full(n_sites: usize) -> Self {
        if n_sites >= 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << n_sites) - 1)
        }
    }

    /// Zero-based site index.
    pub fn singleton(site: usize) -> Self {
        Subset(1u64 << site)
    }

    /// Builds a subset from 1-based site numbers.
    pub fn from_sites(sites: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &site in sites {
            if site == 0 || site > MAX_SITES {
                return Err(Error::InvalidInput(format!("site index {site} out of range")));
            }
            bits |= 1u64 << (site - 1);
        }
        Ok(Subset(bits))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn intersect(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub fn minus(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest zero-based site, if any.
    pub fn min_site(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Zero-based sites in ascending order.
    pub fn sites(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let site = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(site)
            }
        })
    }

    /// 1-based site numbers, the external representation.
    pub fn to_site_numbers(self) -> Vec<usize> {
        self.sites().map(|s| s + 1).collect()
    }
}

impl Ord for Subset {
    /// Lexicographic order on the ascending site lists.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sites().cmp(other.sites())
    }
}

impl PartialOrd for Subset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, site) in self.sites().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", site + 1)?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A partition of the site set in canonical form: blocks sorted by their
/// smallest site.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Subset>,
}

impl Partition {
    /// Validates that `blocks` are nonempty, disjoint and cover `full`.
    pub fn new(mut blocks: Vec<Subset>, full: Subset) -> Result<Self> {
        let mut seen = Subset::EMPTY;
        for &block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidInput("partition has an empty block".into()));
            }
            if !block.is_disjoint(seen) {
                return Err(Error::InvalidInput(format!("partition block {block} overlaps another")));
            }
            seen = seen.union(block);
        }
        if seen != full {
            return Err(Error::InvalidInput(format!(
                "partition blocks cover {seen}, not the full site set {full}"
            )));
        }
        blocks.sort_by_key(|b| b.min_site());
        Ok(Partition { blocks })
    }

    /// Canonicalizes blocks already known to partition the site set.
    pub(crate) fn from_blocks_unchecked(mut blocks: Vec<Subset>) -> Self {
        blocks.sort_unstable_by_key(|b| b.min_site());
        Partition { blocks }
    }

    pub fn blocks(&self) -> &[Subset] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains_block(&self, block: Subset) -> bool {
        self.blocks.contains(&block)
    }

    pub fn to_site_numbers(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.to_site_numbers()).collect()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{block}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn check_family(family: &BTreeSet<Subset>) -> Result<()> {
    if family.is_empty() {
        return Err(Error::InvalidInput("closure of an empty family".into()));
    }
    if family.contains(&Subset::EMPTY) {
        return Err(Error::InvalidInput("family contains the empty set".into()));
    }
    Ok(())
}

/// All nonempty intersections of members of `family`, including the members.
pub fn closure(family: &BTreeSet<Subset>) -> Result<BTreeSet<Subset>> {
    check_family(family)?;
    let mut found: BTreeSet<Subset> = family.clone();
    let mut worklist: Vec<Subset> = family.iter().copied().collect();
    while let Some(current) = worklist.pop() {
        for &member in family {
            let meet = current.intersect(member);
            if !meet.is_empty() && found.insert(meet) {
                worklist.push(meet);
            }
        }
    }
    Ok(found)
}

/// The partition generated by `family`: closure elements that every member
/// either contains or misses.
///
/// The blocks are disjoint. They cover the site set when the family is
/// closed under complement, which is how callers use it; for other families
/// some sites may be left uncovered.
pub fn atoms(family: &BTreeSet<Subset>) -> Result<Partition> {
    let closed = closure(family)?;
    let blocks: Vec<Subset> = closed
        .into_iter()
        .filter(|&l| {
            family.iter().all(|&j| {
                let meet = j.intersect(l);
                meet == l || meet.is_empty()
            })
        })
        .collect();
    let cover = blocks.iter().fold(Subset::EMPTY, |acc, &b| acc.union(b));
    Partition::new(blocks, cover).map_err(|e| {
        Error::InvalidInput(format!("family does not generate a partition: {e}"))
    })
}

/// Every block of `finer` lies inside some block of `coarser`.
pub fn is_finer(finer: &Partition, coarser: &Partition) -> bool {
    finer
        .blocks
        .iter()
        .all(|&b| coarser.blocks.iter().any(|&c| b.is_subset_of(c)))
}

/// Whether `subset` is exactly the union of the blocks it contains.
pub fn union_check(subset: Subset, partition: &Partition) -> bool {
    let covered = partition
        .blocks
        .iter()
        .filter(|b| b.is_subset_of(subset))
        .fold(Subset::EMPTY, |acc, &b| acc.union(b));
    covered == subset
}

/// Groups sites by their membership pattern across `family`. Coincides with
/// [`atoms`] for complement-closed families but needs no closure, so it
/// scales to the full 64-site range.
pub fn atoms_by_signature(family: &[Subset], full: Subset) -> Partition {
    let mut groups: Vec<(Vec<bool>, Subset)> = Vec::new();
    for site in full.sites() {
        let signature: Vec<bool> = family.iter().map(|j| j.contains(site)).collect();
        match groups.iter_mut().find(|(sig, _)| *sig == signature) {
            Some((_, block)) => *block = block.union(Subset::singleton(site)),
            None => groups.push((signature, Subset::singleton(site))),
        }
    }
    Partition::from_blocks_unchecked(groups.into_iter().map(|(_, b)| b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(sites: &[usize]) -> Subset {
        Subset::from_sites(sites).unwrap()
    }

    fn fam(sets: &[&[usize]]) -> BTreeSet<Subset> {
        sets.iter().map(|x| s(x)).collect()
    }

    fn part(blocks: &[&[usize]], n: usize) -> Partition {
        Partition::new(blocks.iter().map(|b| s(b)).collect(), Subset::full(n)).unwrap()
    }

    #[test]
    fn closure_examples() {
        assert_eq!(closure(&fam(&[&[1, 2, 3]])).unwrap(), fam(&[&[1, 2, 3]]));
        let three = fam(&[&[1], &[2, 3], &[1, 2], &[3]]);
        assert_eq!(
            closure(&three).unwrap(),
            fam(&[&[1], &[2], &[3], &[1, 2], &[2, 3]])
        );
        let pair = fam(&[&[1, 4], &[2, 3]]);
        assert_eq!(closure(&pair).unwrap(), pair);
    }

    #[test]
    fn closure_rejects_bad_families() {
        assert!(closure(&BTreeSet::new()).is_err());
        assert!(closure(&fam(&[&[1], &[]])).is_err());
    }

    #[test]
    fn atoms_examples() {
        assert_eq!(atoms(&fam(&[&[1, 2, 3]])).unwrap(), part(&[&[1, 2, 3]], 3));
        assert_eq!(
            atoms(&fam(&[&[1], &[2, 3], &[1, 2], &[3]])).unwrap(),
            part(&[&[1], &[2], &[3]], 3)
        );
        assert_eq!(atoms(&fam(&[&[1, 4], &[2, 3]])).unwrap(), part(&[&[1, 4], &[2, 3]], 4));
    }

    #[test]
    fn atoms_cover_only_the_family_union() {
        // without {2} the family {1} says nothing about site 2
        assert_eq!(atoms(&fam(&[&[1]])).unwrap().blocks(), &[s(&[1])]);
    }

    #[test]
    fn finer_examples() {
        let sites = SiteSet::new(3).unwrap();
        assert!(is_finer(&sites.singletons(), &sites.coarsest()));
        assert!(!is_finer(&sites.coarsest(), &sites.singletons()));
        let d = part(&[&[1], &[2, 3]], 3);
        assert!(is_finer(&d, &d));
    }

    #[test]
    fn union_check_examples() {
        assert!(union_check(s(&[1, 2]), &part(&[&[1], &[2], &[3]], 3)));
        assert!(!union_check(s(&[1, 3]), &part(&[&[1], &[2, 3]], 3)));
        assert!(union_check(s(&[1, 2, 3]), &part(&[&[1, 3], &[2]], 3)));
    }

    #[test]
    fn partition_canonical_order() {
        let p = part(&[&[3], &[1, 2]], 3);
        assert_eq!(p.blocks(), &[s(&[1, 2]), s(&[3])]);
        assert_eq!(p.to_string(), "{[1,2],[3]}");
        assert!(Partition::new(vec![s(&[1, 2]), s(&[2, 3])], Subset::full(3)).is_err());
        assert!(Partition::new(vec![s(&[1]), Subset::EMPTY, s(&[2])], Subset::full(2)).is_err());
    }

    #[test]
    fn subset_order_is_lexicographic_on_sites() {
        assert!(s(&[1, 5]) < s(&[2]));
        assert!(s(&[1, 2, 3]) < s(&[1, 4]));
        assert!(s(&[1]) < s(&[1, 2]));
    }

    #[test]
    fn site_set_bounds() {
        assert!(SiteSet::new(1).is_err());
        assert!(SiteSet::new(65).is_err());
        assert!(SiteSet::new(64).unwrap().full() == Subset::from_bits(u64::MAX));
        assert!(SiteSet::new(17).unwrap().check_enumerable().is_err());
        assert!(SiteSet::new(16).unwrap().check_enumerable().is_ok());
    }

    #[test]
    fn signature_atoms_match_closure_atoms() {
        let family = fam(&[&[1], &[2, 3, 4], &[1, 2], &[3, 4]]);
        let list: Vec<Subset> = family.iter().copied().collect();
        assert_eq!(
            atoms(&family).unwrap(),
            atoms_by_signature(&list, Subset::full(4))
        );
    }
}
