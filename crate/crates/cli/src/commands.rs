//! Subcommand bodies. Each returns a JSON report and the identity checks
//! it ran; a failed check makes the process exit with the invariant code.

use recomb_core::chain::{build_chain_with, ChainModel};
use recomb_core::mc::simulate_chain;
use recomb_core::qsd::{self, DecayAnalysis};
use recomb_core::rational::{format_decimal, format_rational};
use recomb_core::rho::{block_kernel, verify_lemma2};
use recomb_core::trees::{decompose_and_check, WeightVector};
use recomb_core::{
    coefficient_table, measures, CheckReport, Error, Execution, Rational,
};
use serde_json::{json, Map, Value};

use crate::problem::{Problem, SimulationDoc};

/// Guards and per-command overrides from the command line.
#[derive(Debug, Clone)]
pub struct Options {
    pub max_states: usize,
    pub horizon: usize,
}

pub struct Outcome {
    pub body: Value,
    pub checks: Vec<CheckReport>,
}

fn q(value: &Rational) -> Value {
    Value::String(format_rational(value))
}

fn q_with_decimal(value: &Rational) -> Value {
    json!({ "exact": format_rational(value), "decimal": format_decimal(value) })
}

fn weights(w: &WeightVector) -> Value {
    Value::Object(w.iter().map(|(p, v)| (p.to_string(), q(v))).collect())
}

fn check_value(report: &CheckReport) -> Value {
    json!({
        "name": report.name(),
        "checked": report.checked(),
        "passed": report.passed(),
        "failures": report.failures(),
        "notes": report.notes(),
    })
}

impl Outcome {
    fn new(mut body: Value, checks: Vec<CheckReport>) -> Self {
        if !checks.is_empty() {
            body["checks"] = Value::Array(checks.iter().map(check_value).collect());
        }
        Outcome { body, checks }
    }

    pub fn failed(&self) -> bool {
        self.checks.iter().any(|c| !c.passed())
    }
}

fn chain(problem: &Problem, opts: &Options) -> Result<ChainModel, Error> {
    build_chain_with(Execution::default(), &problem.rho, opts.max_states)
}

pub fn atoms(problem: &Problem) -> Result<Outcome, Error> {
    let table = coefficient_table(&problem.rho);
    let body = json!({
        "closure": table.closure_sets().iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        "atoms": table.atom_partition().to_string(),
    });
    Ok(Outcome::new(body, Vec::new()))
}

pub fn coeffs(problem: &Problem) -> Result<Outcome, Error> {
    let table = coefficient_table(&problem.rho);
    let mut blocks = Vec::new();
    for &k in table.closure_sets() {
        let traces: Map<String, Value> = table.row(k).map(|(m, w)| (m.to_string(), q(w))).collect();
        let kernel: Vec<Value> = block_kernel(problem.rho.support(), k)
            .iter()
            .map(|(choice, w)| json!({ "choice": choice.to_string(), "probability": q(w) }))
            .collect();
        blocks.push(json!({
            "block": k.to_string(),
            "atom": table.is_atom(k),
            "coefficients": traces,
            "kernel": kernel,
        }));
    }
    let mut rows = CheckReport::new("coefficient rows sum to 1");
    for &k in table.closure_sets() {
        let total: Rational = table.row(k).map(|(_, w)| w).sum();
        rows.check(total == Rational::from_integer(1.into()), || format!("row {k} sums to {total}"));
    }
    Ok(Outcome::new(json!({ "blocks": blocks }), vec![rows, verify_lemma2(&table)]))
}

pub fn evolve(problem: &Problem, steps: usize) -> Result<Outcome, Error> {
    let mu = problem
        .mu
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("evolve needs an initial measure \"mu\"".into()))?;
    let d = decompose_and_check(&problem.rho, mu, steps)?;
    let preserved = measures::verify_lemma1(&problem.rho, mu, &[])?;
    let marginal_formula = measures::verify_lemma3(&problem.rho, mu)?;
    let table = |m: &measures::DenseMeasure| m.table().iter().map(q).collect::<Vec<_>>();
    let body = json!({
        "steps": steps,
        "alphabet": mu.alphabet().sizes(),
        "iterate": table(&d.direct),
        "decomposition": table(&d.expanded),
        "weights": weights(&d.weights),
    });
    Ok(Outcome::new(body, vec![d.report, preserved, marginal_formula]))
}

fn transitions(model: &ChainModel) -> Vec<Value> {
    (0..model.len())
        .map(|i| {
            let to: Map<String, Value> = model
                .row(i)
                .iter()
                .map(|(j, p)| (model.state(*j).to_string(), q(p)))
                .collect();
            json!({ "from": model.state(i).to_string(), "to": to })
        })
        .collect()
}

pub fn chain_report(problem: &Problem, opts: &Options) -> Result<Outcome, Error> {
    let model = chain(problem, opts)?;
    let profile = model.survival_profile(opts.horizon);
    let survival: Vec<Value> = profile
        .survival
        .iter()
        .enumerate()
        .map(|(n, s)| json!({ "n": n, "survival": q_with_decimal(s) }))
        .collect();
    let body = json!({
        "states": model.states().iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "initial": model.state(model.initial()).to_string(),
        "absorbing": model.state(model.absorbing()).to_string(),
        "depth": model.depth(),
        "transitions": transitions(&model),
        "survival": survival,
    });
    Ok(Outcome::new(body, vec![model.verify()]))
}

fn analysis_body(model: &ChainModel, a: &DecayAnalysis, horizon: usize) -> (Value, Vec<CheckReport>) {
    let state = |i: usize| model.state(i).to_string();
    let phi: Map<String, Value> = (0..model.len())
        .filter(|&i| i != model.absorbing())
        .map(|i| (state(i), q(&a.phi[i])))
        .collect();
    let ratios: Map<String, Value> = (0..model.len())
        .filter(|&i| i != model.absorbing())
        .map(|i| (state(i), q(&(&a.phi[i] / &a.limit_constant))))
        .collect();
    let process = qsd::q_process(model, a);
    let q_rows: Vec<Value> = process
        .domain
        .iter()
        .map(|&i| {
            let to: Map<String, Value> = process.rows[i].iter().map(|(j, p)| (state(*j), q(p))).collect();
            json!({ "from": state(i), "to": to })
        })
        .collect();
    let geometric = qsd::geometric_limit_check(model, a, horizon);
    let quasi = a.quasi_limit_weights(model);
    let mut checks = vec![qsd::eigenvector_check(model, a), process.verify(model), geometric.report.clone()];
    match qsd::qsd_verify(model, a, &quasi, &a.eta, horizon.min(10)) {
        Ok(report) => checks.push(report),
        Err(e) => {
            let mut report = CheckReport::new("quasi-stationarity of the limiting law");
            report.check(false, || e.to_string());
            checks.push(report);
        }
    }
    let body = json!({
        "eta": q_with_decimal(&a.eta),
        "beta0": q_with_decimal(&a.beta0),
        "e_sets": a.e_sets.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        "e_states": a.e_states.iter().map(|&i| state(i)).collect::<Vec<_>>(),
        "phi": phi,
        "limit_constant": q_with_decimal(&a.limit_constant),
        "quasi_limit": weights(&quasi),
        "ratio_limits": ratios,
        "q_matrix": q_rows,
        "geometric": {
            "horizon": horizon,
            "scaled_survival": q_with_decimal(geometric.scaled.last().expect("nonempty")),
            "deviation": geometric.deviation,
            "e_share": q_with_decimal(geometric.e_share.last().expect("nonempty")),
        },
    });
    (body, checks)
}

pub fn qsd_report(problem: &Problem, opts: &Options) -> Result<Outcome, Error> {
    if problem.rho.is_identity() {
        return Err(Error::NotApplicable(qsd::IDENTITY_NOT_APPLICABLE.into()));
    }
    let model = chain(problem, opts)?;
    let analysis = qsd::analyze(&model)?;
    let (body, mut checks) = analysis_body(&model, &analysis, opts.horizon);
    checks.insert(0, model.verify());
    Ok(Outcome::new(body, checks))
}

pub fn simulate(problem: &Problem, opts: &Options, overrides: &SimulationDoc) -> Result<Outcome, Error> {
    let cfg = problem.sim_config(overrides)?;
    let enumerable = problem.rho.sites().check_enumerable().is_ok();
    let model = if enumerable { Some(chain(problem, opts)?) } else { None };
    let report = match (&model, cfg.mode) {
        (Some(model), recomb_core::mc::SimMode::ExactChain) => simulate_chain(Execution::default(), model, &cfg)?,
        (None, recomb_core::mc::SimMode::ExactChain) => {
            return Err(Error::ResourceLimit(
                "exact-chain simulation needs an enumerable chain; use the kernel mode".into(),
            ))
        }
        _ => recomb_core::mc::simulate_kernels(Execution::default(), &problem.rho, &cfg)?,
    };
    let occupancy: Vec<Value> = report
        .occupancy
        .iter()
        .enumerate()
        .map(|(n, counts)| {
            let c: Map<String, Value> = counts.iter().map(|(p, c)| (p.to_string(), json!(c))).collect();
            json!({ "n": n, "counts": c })
        })
        .collect();
    let mut body = json!({
        "seed": cfg.seed,
        "trajectories": cfg.trajectories,
        "horizon": cfg.horizon,
        "mode": match cfg.mode {
            recomb_core::mc::SimMode::ExactChain => "chain",
            recomb_core::mc::SimMode::KernelDraws => "kernel",
        },
        "occupancy": occupancy,
        "surviving": report.surviving,
        "absorption_times": report.absorption_times.iter().map(|(n, c)| json!({ "n": n, "count": c })).collect::<Vec<_>>(),
        "censored": report.censored,
    });
    if let Some(model) = &model {
        let exact = model.survival_profile(cfg.horizon);
        let trajectories = cfg.trajectories as f64;
        let comparison: Vec<Value> = exact
            .survival
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let p = recomb_core::rational::to_f64(s);
                let sigma = (p * (1.0 - p) / trajectories).sqrt();
                let empirical = report.surviving[n] as f64 / trajectories;
                let z = if sigma > 0.0 { (empirical - p) / sigma } else { 0.0 };
                json!({ "n": n, "exact": format_rational(s), "empirical": empirical, "z": z })
            })
            .collect();
        body["exact_survival"] = Value::Array(comparison);
    }
    Ok(Outcome::new(body, Vec::new()))
}
