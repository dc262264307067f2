//! The input document shared by every subcommand.

use std::collections::BTreeMap;

use recomb_core::mc::{SimConfig, SimMode};
use recomb_core::measures::{AlphabetSpec, DenseMeasure};
use recomb_core::rational::parse_rational;
use recomb_core::{Error, RecombDistribution, SiteSet, Subset};
use serde::Deserialize;

/// Raw document as read from JSON.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub sites: usize,
    #[serde(default)]
    pub site_labels: Option<Vec<String>>,
    /// Subset written as `"[1,2]"` mapped to a weight written as `"p/q"`.
    pub rho: BTreeMap<String, String>,
    #[serde(default)]
    pub alphabet: Option<Vec<usize>>,
    #[serde(default)]
    pub mu: Option<MeasureDoc>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub simulation: Option<SimulationDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureDoc {
    /// Full table, row-major with the last site varying fastest.
    Dense(Vec<String>),
    /// One distribution per site.
    Product(Vec<Vec<String>>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDoc {
    pub seed: Option<u64>,
    pub trajectories: Option<u64>,
    pub horizon: Option<usize>,
    pub mode: Option<String>,
}

/// Validated problem.
#[derive(Debug)]
pub struct Problem {
    pub rho: RecombDistribution,
    pub mu: Option<DenseMeasure>,
    pub steps: Option<usize>,
    pub simulation: SimulationDoc,
}

pub fn parse_subset(text: &str, n_sites: usize) -> Result<Subset, Error> {
    let inner = text
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| Error::InvalidInput(format!("subset {text:?} must look like \"[1,2]\"")))?;
    let mut sites = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let site: usize = part
            .parse()
            .map_err(|_| Error::InvalidInput(format!("site {part:?} in {text:?} is not a positive integer")))?;
        if site == 0 || site > n_sites {
            return Err(Error::InvalidInput(format!("site {site} in {text:?} outside 1..={n_sites}")));
        }
        sites.push(site);
    }
    Subset::from_sites(&sites)
}

fn parse_table(values: &[String]) -> Result<Vec<recomb_core::Rational>, Error> {
    values.iter().map(|v| parse_rational(v)).collect()
}

pub fn parse_mode(text: &str) -> Result<SimMode, Error> {
    match text {
        "chain" | "exact-chain" => Ok(SimMode::ExactChain),
        "kernel" | "kernel-draws" => Ok(SimMode::KernelDraws),
        other => Err(Error::InvalidInput(format!(
            "simulation mode {other:?} is neither \"chain\" nor \"kernel\""
        ))),
    }
}

impl ProblemDoc {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed problem document: {e}")))
    }

    pub fn into_problem(self, max_dense: usize) -> Result<Problem, Error> {
        let sites = match self.site_labels {
            Some(labels) => SiteSet::with_labels(self.sites, labels)?,
            None => SiteSet::new(self.sites)?,
        };
        let mut raw = BTreeMap::new();
        for (key, value) in &self.rho {
            let subset = parse_subset(key, self.sites)?;
            if raw.insert(subset, parse_rational(value)?).is_some() {
                return Err(Error::InvalidInput(format!("subset {key:?} listed twice")));
            }
        }
        let rho = RecombDistribution::validate(sites, raw)?;

        let alphabet = match (&self.alphabet, &self.mu) {
            (Some(sizes), _) => Some(AlphabetSpec::with_max_dense(sizes.clone(), max_dense)?),
            (None, Some(MeasureDoc::Product(factors))) => Some(AlphabetSpec::with_max_dense(
                factors.iter().map(Vec::len).collect(),
                max_dense,
            )?),
            (None, Some(MeasureDoc::Dense(_))) => {
                Some(AlphabetSpec::with_max_dense(vec![2; self.sites], max_dense)?)
            }
            (None, None) => None,
        };
        if let Some(alphabet) = &alphabet {
            if alphabet.n_sites() != self.sites {
                return Err(Error::InvalidInput(format!(
                    "alphabet lists {} sites, the problem has {}",
                    alphabet.n_sites(),
                    self.sites
                )));
            }
        }
        let mu = match (&self.mu, &alphabet) {
            (Some(MeasureDoc::Dense(values)), Some(alphabet)) => {
                Some(DenseMeasure::full(alphabet, parse_table(values)?)?)
            }
            (Some(MeasureDoc::Product(factors)), Some(alphabet)) => {
                let tables = factors.iter().map(|f| parse_table(f)).collect::<Result<_, _>>()?;
                Some(DenseMeasure::from_site_marginals(alphabet, tables)?)
            }
            _ => None,
        };
        Ok(Problem {
            rho,
            mu,
            steps: self.steps,
            simulation: self.simulation.unwrap_or_default(),
        })
    }
}

impl Problem {
    /// Simulation settings from the document, overridden by `overrides`.
    pub fn sim_config(&self, overrides: &SimulationDoc) -> Result<SimConfig, Error> {
        let doc = &self.simulation;
        let mode = overrides
            .mode
            .as_deref()
            .or(doc.mode.as_deref())
            .map(parse_mode)
            .transpose()?
            .unwrap_or(if self.rho.sites().len() <= recomb_core::subsets::ENUMERATION_MAX_SITES {
                SimMode::ExactChain
            } else {
                SimMode::KernelDraws
            });
        let cfg = SimConfig {
            seed: overrides.seed.or(doc.seed).unwrap_or(0),
            trajectories: overrides.trajectories.or(doc.trajectories).unwrap_or(10_000),
            horizon: overrides.horizon.or(doc.horizon).unwrap_or(20),
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
