//! Command-line front end: experiment configuration (flags merged over an
//! optional JSON file), the experiment drivers, and CSV/JSON emission.
//!
//! Subcommands: `density` (profiles per model, CSV), `steady` (solver
//! reports per model, JSON), `sweep` (phase-diagram grid, CSV),
//! `validate` (property suites, JSON), `ssa` (stochastic densities with
//! standard errors, CSV). Exit codes: 0 success, 1 validation failure,
//! 2 solver non-convergence, 3 invalid input.

use crate::correlations::{
    embed, lift, point_mass_embedding, uniform_embedding, CorrelationVector,
};
use crate::dynamics::{integrate, steady_state, State, System, STEADY_TOL};
use crate::error::{Error, Result};
use crate::lattice::{low_mask, BitPattern, IndexLayout, LatticeParams};
use crate::master::{
    build_generator, evolve_master, production_rate, stationary_master,
    MasterState, MAX_DENSE_N, MAX_MASTER_N,
};
use crate::meanfield::project;
use crate::ode::Tolerances;
use crate::ssa::{simulate, SsaConfig};
use crate::validate::{run_validation, MAX_VALIDATE_N};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;
use std::path::{Path, PathBuf};

/// Formats one value with 12 significant digits, the fixed precision of
/// all CSV output.
fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

#[derive(Debug, Parser)]
#[command(
    name = "tasep",
    version,
    about = "TASEP lattice models: master equation, correlation dynamics, \
             mean-field closures, and stochastic simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Density profile per model, as CSV (site rows n-1 down to 0).
    Density(DensityArgs),
    /// Steady-state solver report per model, as JSON.
    Steady(SteadyArgs),
    /// Grid sweep over entry/exit rates with phase labels, as CSV.
    Sweep(SweepArgs),
    /// Property suites (consistency, tangency, bounds, invariance,
    /// boundary escape, defining identity, order trend), as JSON.
    Validate(ValidateArgs),
    /// Stochastic simulation densities with standard errors, as CSV.
    Ssa(SsaArgs),
}

#[derive(Debug, Clone, Args)]
struct DensityArgs {
    /// Number of lattice sites.
    #[arg(long)]
    n: Option<usize>,
    /// Entry rate at the left boundary.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exit rate at the right boundary.
    #[arg(long)]
    beta: Option<f64>,
    /// Hop rates: `uniform:<v>` or a comma list of n-1 values.
    #[arg(long)]
    h: Option<String>,
    /// Comma list of models: master, full, mf:<m>, ssa.
    #[arg(long)]
    models: Option<String>,
    /// Initial state: uniform, empty, full, point:<bits>, file:<path>.
    #[arg(long)]
    init: Option<String>,
    /// Integrate to this time (mutually exclusive with --steady).
    #[arg(long)]
    evolve: Option<f64>,
    /// Solve for the steady state instead of integrating.
    #[arg(long)]
    steady: bool,
    /// Solver tolerance: relative tolerance when evolving, residual
    /// norm when solving for the steady state.
    #[arg(long)]
    tol: Option<f64>,
    /// RNG seed (used by the ssa model).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SteadyArgs {
    /// Number of lattice sites.
    #[arg(long)]
    n: Option<usize>,
    /// Entry rate at the left boundary.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exit rate at the right boundary.
    #[arg(long)]
    beta: Option<f64>,
    /// Hop rates: `uniform:<v>` or a comma list of n-1 values.
    #[arg(long)]
    h: Option<String>,
    /// Comma list of models: master, full, mf:<m>.
    #[arg(long)]
    models: Option<String>,
    /// Initial guess: uniform, empty, full, point:<bits>, file:<path>.
    #[arg(long)]
    init: Option<String>,
    /// Residual tolerance for the solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SweepArgs {
    /// Number of lattice sites.
    #[arg(long)]
    n: Option<usize>,
    /// Entry-rate grid `lo:hi:steps`, or a single value.
    #[arg(long)]
    alpha_grid: Option<String>,
    /// Exit-rate grid `lo:hi:steps`, or a single value.
    #[arg(long)]
    beta_grid: Option<String>,
    /// Hop rates: `uniform:<v>` or a comma list of n-1 values.
    #[arg(long)]
    h: Option<String>,
    /// Model evaluated at each grid point: master, full, or mf:<m>.
    #[arg(long)]
    model: Option<String>,
    /// Residual tolerance for the per-point steady solves.
    #[arg(long)]
    tol: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ValidateArgs {
    /// Number of lattice sites (at most 10).
    #[arg(long)]
    n: Option<usize>,
    /// Largest mean-field order exercised by the suites.
    #[arg(long)]
    m_max: Option<usize>,
    /// Entry rate at the left boundary.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exit rate at the right boundary.
    #[arg(long)]
    beta: Option<f64>,
    /// Hop rates: `uniform:<v>` or a comma list of n-1 values.
    #[arg(long)]
    h: Option<String>,
    /// Extra state to check: file:<path> with a correlation vector.
    #[arg(long)]
    init: Option<String>,
    /// RNG seed for the randomized suites.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SsaArgs {
    /// Number of lattice sites.
    #[arg(long)]
    n: Option<usize>,
    /// Entry rate at the left boundary.
    #[arg(long)]
    alpha: Option<f64>,
    /// Exit rate at the right boundary.
    #[arg(long)]
    beta: Option<f64>,
    /// Hop rates: `uniform:<v>` or a comma list of n-1 values.
    #[arg(long)]
    h: Option<String>,
    /// Number of independent replicas.
    #[arg(long)]
    samples: Option<usize>,
    /// Burn-in time before measurement (default 100 mean event times).
    #[arg(long)]
    burn: Option<f64>,
    /// Measurement window length (default 10^4 mean event times).
    #[arg(long)]
    measure: Option<f64>,
    /// Base RNG seed; replica k uses stream k.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// On-disk experiment configuration. Every field is optional; values
/// from explicit flags take precedence. Unknown fields are rejected so
/// typos surface immediately.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of lattice sites.
    pub n: Option<usize>,
    /// Entry rate.
    pub alpha: Option<f64>,
    /// Exit rate.
    pub beta: Option<f64>,
    /// Hop-rate spec, same grammar as `--h`.
    pub h: Option<String>,
    /// Model list, same grammar as `--models`.
    pub models: Option<String>,
    /// Single model, same grammar as one `--models` entry.
    pub model: Option<String>,
    /// Initial-state spec, same grammar as `--init`.
    pub init: Option<String>,
    /// Integration horizon.
    pub evolve: Option<f64>,
    /// Steady-state mode toggle.
    pub steady: Option<bool>,
    /// Solver tolerance.
    pub tol: Option<f64>,
    /// RNG seed.
    pub seed: Option<u64>,
    /// Output path.
    pub output: Option<String>,
    /// Replica count for stochastic simulation.
    pub samples: Option<usize>,
    /// Burn-in time for stochastic simulation.
    pub burn: Option<f64>,
    /// Measurement window for stochastic simulation.
    pub measure: Option<f64>,
    /// Largest mean-field order for validation.
    pub m_max: Option<usize>,
    /// Entry-rate grid for sweeps.
    pub alpha_grid: Option<String>,
    /// Exit-rate grid for sweeps.
    pub beta_grid: Option<String>,
}

impl ExperimentConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::InvalidInput(format!(
                        "config {}: {e}",
                        p.display()
                    ))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidInput(format!(
                        "config {}: {e}",
                        p.display()
                    ))
                })
            }
        }
    }
}

/// Model selector as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    /// Exact master equation.
    Master,
    /// Full-order correlation dynamics.
    Full,
    /// Mean-field closure of the given order.
    MeanField(usize),
    /// Stochastic simulation.
    Ssa,
}

impl Model {
    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(m) = t
            .strip_prefix("mf:")
            .or_else(|| t.strip_prefix("meanfield:"))
        {
            let order: usize = m.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "models: bad mean-field order in {t:?}"
                ))
            })?;
            return Ok(Model::MeanField(order));
        }
        match t {
            "master" => Ok(Model::Master),
            "full" => Ok(Model::Full),
            "ssa" => Ok(Model::Ssa),
            other => Err(Error::InvalidInput(format!(
                "models: unknown model {other:?} (expected master, full, \
                 mf:<m>, or ssa)"
            ))),
        }
    }

    fn label(&self) -> String {
        match self {
            Model::Master => "master".into(),
            Model::Full => "full".into(),
            Model::MeanField(m) => format!("mf:{m}"),
            Model::Ssa => "ssa".into(),
        }
    }

    /// Checks the model against the lattice size: mean-field orders must
    /// satisfy 1 <= m < n, the master routes are capped by their dense
    /// or sparse backends.
    fn check(&self, n: usize) -> Result<()> {
        match self {
            Model::Master if n > MAX_MASTER_N => {
                Err(Error::InvalidInput(format!(
                    "models: master needs n <= {MAX_MASTER_N}, got {n}"
                )))
            }
            Model::Full if n > MAX_DENSE_N => {
                Err(Error::InvalidInput(format!(
                    "models: full needs n <= {MAX_DENSE_N}, got {n}"
                )))
            }
            Model::MeanField(m) if *m == 0 || *m >= n => {
                Err(Error::InvalidInput(format!(
                    "models: mf:{m} needs 1 <= m < n = {n}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn parse_models(text: &str) -> Result<Vec<Model>> {
    let models: Vec<Model> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Model::parse)
        .collect::<Result<_>>()?;
    if models.is_empty() {
        return Err(Error::InvalidInput(
            "models: empty list (e.g. --models master,mf:2)".into(),
        ));
    }
    Ok(models)
}

/// Initial-state selector as named on the command line.
#[derive(Debug, Clone, PartialEq)]
enum Init {
    Uniform,
    Empty,
    Full,
    Point(BitPattern),
    File(PathBuf),
}

impl Init {
    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(bits) = t.strip_prefix("point:") {
            return Ok(Init::Point(BitPattern::parse(bits)?));
        }
        if let Some(path) = t.strip_prefix("file:") {
            return Ok(Init::File(PathBuf::from(path)));
        }
        match t {
            "uniform" => Ok(Init::Uniform),
            "empty" => Ok(Init::Empty),
            "full" => Ok(Init::Full),
            other => Err(Error::InvalidInput(format!(
                "init: unknown initial state {other:?} (expected uniform, \
                 empty, full, point:<bits>, or file:<path>)"
            ))),
        }
    }
}

/// On-disk state: either a distribution over configurations (field `z`)
/// or a correlation vector (fields `max_order` and `values`).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    n: usize,
    #[serde(default)]
    z: Option<Vec<f64>>,
    #[serde(default)]
    max_order: Option<usize>,
    #[serde(default)]
    values: Option<Vec<f64>>,
}

impl StateFile {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidInput(format!("init {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            Error::InvalidInput(format!("init {}: {e}", path.display()))
        })
    }

    fn into_correlations(self, n: usize) -> Result<CorrelationVector> {
        if self.n != n {
            return Err(Error::InvalidInput(format!(
                "init: state file has n = {}, run has n = {n}",
                self.n
            )));
        }
        match (self.z, self.max_order, self.values) {
            (Some(z), None, None) => embed(&MasterState::new(n, z)?, n),
            (None, Some(m), Some(values)) => {
                CorrelationVector::new(IndexLayout::new(n, m)?, values)
            }
            _ => Err(Error::InvalidInput(
                "init: state file needs either field z, or fields \
                 max_order and values"
                    .into(),
            )),
        }
    }
}

fn require<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidInput(format!(
            "{field} is required (flag --{field} or config field)"
        ))
    })
}

fn parse_h(spec: &str, n: usize) -> Result<Vec<f64>> {
    let parse_one = |s: &str| -> Result<f64> {
        s.trim().parse().map_err(|_| {
            Error::InvalidInput(format!("h: bad rate value {s:?}"))
        })
    };
    if let Some(v) = spec.strip_prefix("uniform:") {
        return Ok(vec![parse_one(v)?; n.saturating_sub(1)]);
    }
    let rates: Vec<f64> =
        spec.split(',').map(parse_one).collect::<Result<_>>()?;
    if rates.len() != n - 1 {
        return Err(Error::InvalidInput(format!(
            "h: expected uniform:<v> or {} comma-separated values for \
             n = {n}, got {}",
            n - 1,
            rates.len()
        )));
    }
    Ok(rates)
}

fn build_params(
    n: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    h: Option<String>,
) -> Result<LatticeParams> {
    let n = require(n, "n")?;
    let alpha = require(alpha, "alpha")?;
    let beta = require(beta, "beta")?;
    let h_spec = h.unwrap_or_else(|| "uniform:1".to_string());
    LatticeParams::new(n, alpha, beta, parse_h(&h_spec, n)?)
}

fn master_init(init: &Init, n: usize) -> Result<MasterState> {
    match init {
        Init::Uniform => MasterState::uniform(n),
        Init::Empty => MasterState::point_mass(n, 0),
        Init::Full => MasterState::point_mass(n, (1u64 << n) - 1),
        Init::Point(p) => {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "init: point pattern has {} sites, lattice has {n}",
                    p.len()
                )));
            }
            MasterState::point_mass(n, p.bits())
        }
        Init::File(path) => {
            let file = StateFile::load(path)?;
            if file.n != n {
                return Err(Error::InvalidInput(format!(
                    "init: state file has n = {}, run has n = {n}",
                    file.n
                )));
            }
            match file.z {
                Some(z) => MasterState::new(n, z),
                None => Err(Error::InvalidInput(
                    "init: the master model needs a distribution file \
                     with field z"
                        .into(),
                )),
            }
        }
    }
}

/// Builds an order-`m` correlation state from the init selector,
/// lifting or projecting file-based states to the requested order. The
/// named initial states are built directly, so they work on lattices
/// far beyond the master equation's reach.
fn correlation_init(
    init: &Init,
    n: usize,
    order: usize,
) -> Result<CorrelationVector> {
    let layout = IndexLayout::new(n, order)?;
    match init {
        Init::Uniform => Ok(uniform_embedding(layout)),
        Init::Empty => point_mass_embedding(layout, 0),
        Init::Full => point_mass_embedding(layout, low_mask(n)),
        Init::Point(p) => {
            if p.len() != n {
                return Err(Error::InvalidInput(format!(
                    "init: point pattern has {} sites, lattice has {n}",
                    p.len()
                )));
            }
            point_mass_embedding(layout, p.bits())
        }
        Init::File(path) => {
            let file = StateFile::load(path)?;
            if file.z.is_some() {
                let z = master_init(init, n)?;
                return embed(&z, order);
            }
            let mut x = file.into_correlations(n)?;
            while x.max_order() < order {
                x = lift(&x)?;
            }
            if x.max_order() > order {
                x = project(&x, order)?;
            }
            Ok(x)
        }
    }
}

fn write_output(payload: &str, output: Option<&Path>) -> Result<()> {
    match output {
        None => {
            print!("{payload}");
            Ok(())
        }
        Some(path) => std::fs::write(path, payload).map_err(|e| {
            Error::InvalidInput(format!("output {}: {e}", path.display()))
        }),
    }
}

/// Run mode for the density command.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Evolve(f64),
    Steady,
}

#[derive(Debug)]
struct DensityPlan {
    params: LatticeParams,
    models: Vec<Model>,
    init: Init,
    mode: Mode,
    tol: Option<f64>,
    seed: u64,
    samples: usize,
    burn: Option<f64>,
    measure: Option<f64>,
    output: Option<PathBuf>,
}

fn resolve_density(args: DensityArgs) -> Result<DensityPlan> {
    let file = ExperimentConfig::load(args.config.as_deref())?;
    let params = build_params(
        args.n.or(file.n),
        args.alpha.or(file.alpha),
        args.beta.or(file.beta),
        args.h.or(file.h.clone()),
    )?;
    let models = parse_models(&require(
        args.models.or(file.models.clone()).or(file.model.clone()),
        "models",
    )?)?;
    for model in &models {
        model.check(params.n())?;
    }
    let init = Init::parse(
        &args
            .init
            .or(file.init.clone())
            .unwrap_or_else(|| "uniform".to_string()),
    )?;
    let steady = args.steady || file.steady.unwrap_or(false);
    let evolve = args.evolve.or(file.evolve);
    let mode = match (steady, evolve) {
        (true, None) => Mode::Steady,
        (false, Some(t)) => Mode::Evolve(t),
        (true, Some(_)) => {
            return Err(Error::InvalidInput(
                "mode: --steady and --evolve are mutually exclusive".into(),
            ))
        }
        (false, None) => {
            return Err(Error::InvalidInput(
                "mode: exactly one of --evolve <t> or --steady is \
                 required"
                    .into(),
            ))
        }
    };
    Ok(DensityPlan {
        params,
        models,
        init,
        mode,
        tol: args.tol.or(file.tol),
        seed: args.seed.or(file.seed).unwrap_or(0),
        samples: file.samples.unwrap_or(16),
        burn: file.burn,
        measure: file.measure,
        output: args.output.or(file.output.map(PathBuf::from)),
    })
}

fn integration_tolerances(tol: Option<f64>) -> Result<Tolerances> {
    match tol {
        None => Ok(Tolerances::default()),
        Some(rtol) => Tolerances { rtol, atol: rtol * 1e-2 }.validated(),
    }
}

/// Density profile of one model under the given plan.
fn model_profile(plan: &DensityPlan, model: Model) -> Result<Vec<f64>> {
    let params = &plan.params;
    let n = params.n();
    let c = params.total_rate();
    match model {
        Model::Master => match plan.mode {
            Mode::Steady => {
                Ok(stationary_master(&build_generator(params)?)?
                    .density_profile())
            }
            Mode::Evolve(t) => {
                let z0 = master_init(&plan.init, n)?;
                Ok(evolve_master(
                    &build_generator(params)?,
                    &z0,
                    t,
                    integration_tolerances(plan.tol)?,
                )?
                .density_profile())
            }
        },
        Model::Full | Model::MeanField(_) => {
            let (system, order) = match model {
                Model::Full => (System::Full, n),
                Model::MeanField(m) => (System::MeanField(m), m),
                _ => unreachable!(),
            };
            let x0 = State::Correlations(correlation_init(
                &plan.init, n, order,
            )?);
            match plan.mode {
                Mode::Steady => {
                    let tol = plan.tol.unwrap_or(STEADY_TOL);
                    let report = steady_state(&system, params, &x0, tol)?;
                    if !report.converged {
                        return Err(Error::NonConvergence {
                            what: format!(
                                "steady state of {}",
                                system.label()
                            ),
                            residual: report.residual_norm,
                        });
                    }
                    Ok(report.equilibrium.density_profile())
                }
                Mode::Evolve(t) => Ok(integrate(
                    &system,
                    params,
                    &x0,
                    t,
                    integration_tolerances(plan.tol)?,
                )?
                .final_state()
                .density_profile()),
            }
        }
        Model::Ssa => {
            if plan.mode != Mode::Steady {
                return Err(Error::InvalidInput(
                    "models: ssa estimates long-run averages; use \
                     --steady"
                        .into(),
                ));
            }
            let config = SsaConfig {
                params: params.clone(),
                n_samples: plan.samples,
                t_burn: plan.burn.unwrap_or(100.0 / c),
                t_measure: plan.measure.unwrap_or(1e4 / c),
                seed: plan.seed,
            };
            Ok(simulate(&config)?.density)
        }
    }
}

/// Builds the density CSV: header `site,<model>,...`, one row per site
/// from n-1 down to 0.
fn density_csv(plan: &DensityPlan) -> Result<String> {
    let n = plan.params.n();
    let profiles: Vec<Vec<f64>> = plan
        .models
        .iter()
        .map(|&m| model_profile(plan, m))
        .collect::<Result<_>>()?;
    let mut out = String::from("site");
    for model in &plan.models {
        out.push(',');
        out.push_str(&model.label());
    }
    out.push('\n');
    for site in (0..n).rev() {
        out.push_str(&site.to_string());
        for profile in &profiles {
            out.push(',');
            out.push_str(&sig12(profile[site]));
        }
        out.push('\n');
    }
    Ok(out)
}

fn cmd_density(args: DensityArgs) -> Result<()> {
    let plan = resolve_density(args)?;
    let csv = density_csv(&plan)?;
    write_output(&csv, plan.output.as_deref())
}

struct SteadyPlan {
    params: LatticeParams,
    models: Vec<Model>,
    init: Init,
    tol: f64,
    output: Option<PathBuf>,
}

fn resolve_steady(args: SteadyArgs) -> Result<SteadyPlan> {
    let file = ExperimentConfig::load(args.config.as_deref())?;
    let params = build_params(
        args.n.or(file.n),
        args.alpha.or(file.alpha),
        args.beta.or(file.beta),
        args.h.or(file.h.clone()),
    )?;
    let models = parse_models(&require(
        args.models.or(file.models.clone()).or(file.model.clone()),
        "models",
    )?)?;
    for model in &models {
        model.check(params.n())?;
        if *model == Model::Ssa {
            return Err(Error::InvalidInput(
                "models: the steady command solves deterministic systems; \
                 use the ssa command for simulation"
                    .into(),
            ));
        }
    }
    let init = Init::parse(
        &args
            .init
            .or(file.init.clone())
            .unwrap_or_else(|| "uniform".to_string()),
    )?;
    Ok(SteadyPlan {
        params,
        models,
        init,
        tol: args.tol.or(file.tol).unwrap_or(STEADY_TOL),
        output: args.output.or(file.output.map(PathBuf::from)),
    })
}

/// Builds the steady JSON report: one entry per model with convergence
/// data and the density profile ordered site n-1 down to 0.
fn steady_json(plan: &SteadyPlan) -> Result<String> {
    let params = &plan.params;
    let n = params.n();
    let mut reports = Vec::new();
    for &model in &plan.models {
        let entry = match model {
            Model::Master => {
                let a = build_generator(params)?;
                let z = stationary_master(&a)?;
                let mut az = vec![0.0; a.dim()];
                a.apply(z.z(), &mut az);
                let residual =
                    az.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let profile = z.density_profile();
                json!({
                    "model": model.label(),
                    "converged": true,
                    "residual_norm": residual,
                    "iterations": 1,
                    "interior_margin": z.min_component(),
                    "production_rate": production_rate(params, &z),
                    "density": descending(&profile),
                })
            }
            Model::Full | Model::MeanField(_) => {
                let (system, order) = match model {
                    Model::Full => (System::Full, n),
                    Model::MeanField(m) => (System::MeanField(m), m),
                    _ => unreachable!(),
                };
                let x0 = State::Correlations(correlation_init(
                    &plan.init, n, order,
                )?);
                let report =
                    steady_state(&system, params, &x0, plan.tol)?;
                let profile = report.equilibrium.density_profile();
                json!({
                    "model": model.label(),
                    "converged": report.converged,
                    "residual_norm": report.residual_norm,
                    "iterations": report.iterations,
                    "interior_margin": report.interior_margin,
                    "production_rate": params.beta() * profile[0],
                    "density": descending(&profile),
                })
            }
            Model::Ssa => unreachable!("rejected during resolution"),
        };
        reports.push(entry);
    }
    let doc = json!({
        "n": n,
        "alpha": params.alpha(),
        "beta": params.beta(),
        "site_order": "descending",
        "models": reports,
    });
    serde_json::to_string_pretty(&doc)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidInput(format!("serialization: {e}")))
}

/// Reverses a site-indexed profile into site n-1 .. 0 output order.
fn descending(profile: &[f64]) -> Vec<f64> {
    profile.iter().rev().copied().collect()
}

fn cmd_steady(args: SteadyArgs) -> Result<()> {
    let plan = resolve_steady(args)?;
    let payload = steady_json(&plan)?;
    write_output(&payload, plan.output.as_deref())
}

/// Parses `lo:hi:steps` (or a single value) into a grid and its step.
fn parse_grid(spec: &str, field: &str) -> Result<(Vec<f64>, f64)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |msg: String| Error::InvalidInput(format!("{field}: {msg}"));
    match parts.as_slice() {
        [single] => {
            let v: f64 = single
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value {single:?}")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("value {v} must be positive")));
            }
            Ok((vec![v], 1e-9))
        }
        [lo, hi, steps] => {
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad lower bound {lo:?}")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad upper bound {hi:?}")))?;
            let steps: usize = steps
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad step count {steps:?}")))?;
            if steps == 0 {
                return Err(bad("step count must be at least 1".into()));
            }
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo)
            {
                return Err(bad(format!(
                    "bounds must satisfy 0 < lo <= hi, got {lo}:{hi}"
                )));
            }
            if steps == 1 {
                return Ok((vec![lo], 1e-9));
            }
            let step = (hi - lo) / (steps - 1) as f64;
            let grid =
                (0..steps).map(|k| lo + step * k as f64).collect();
            Ok((grid, step.max(1e-9)))
        }
        _ => Err(bad(format!(
            "expected <value> or lo:hi:steps, got {spec:?}"
        ))),
    }
}

/// Phase classifier for homogeneous unit hop rates. Thresholds follow
/// the standard open-boundary TASEP phase boundaries; points within one
/// grid step of the critical line (below the triple point) are labeled
/// critical so the line stays visible at the sweep's resolution.
fn phase_label(
    alpha: f64,
    beta: f64,
    grid_step: f64,
    homogeneous_unit: bool,
) -> &'static str {
    if !homogeneous_unit {
        return "na";
    }
    if alpha.min(beta) >= 0.5 {
        "MC"
    } else if (alpha - beta).abs() < grid_step && alpha < 0.5 {
        "critical"
    } else if alpha < beta.min(0.5) {
        "LD"
    } else if beta < alpha.min(0.5) {
        "HD"
    } else {
        "critical"
    }
}

struct SweepPlan {
    n: usize,
    h: Vec<f64>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    grid_step: f64,
    model: Model,
    tol: f64,
    output: Option<PathBuf>,
}

fn resolve_sweep(args: SweepArgs) -> Result<SweepPlan> {
    let file = ExperimentConfig::load(args.config.as_deref())?;
    let n = require(args.n.or(file.n), "n")?;
    let h_spec = args
        .h
        .or(file.h.clone())
        .unwrap_or_else(|| "uniform:1".to_string());
    let h = parse_h(&h_spec, n)?;
    let (alphas, astep) = parse_grid(
        &require(args.alpha_grid.or(file.alpha_grid), "alpha-grid")?,
        "alpha-grid",
    )?;
    let (betas, bstep) = parse_grid(
        &require(args.beta_grid.or(file.beta_grid), "beta-grid")?,
        "beta-grid",
    )?;
    let model = Model::parse(
        &args
            .model
            .or(file.model.clone())
            .or(file.models.clone())
            .unwrap_or_else(|| "mf:2".to_string()),
    )?;
    if model == Model::Ssa {
        return Err(Error::InvalidInput(
            "model: the sweep command solves steady states; use the ssa \
             command for simulation"
                .into(),
        ));
    }
    model.check(n)?;
    Ok(SweepPlan {
        n,
        h,
        alphas,
        betas,
        grid_step: astep.max(bstep),
        model,
        tol: args.tol.or(file.tol).unwrap_or(STEADY_TOL),
        output: args.output.or(file.output.map(PathBuf::from)),
    })
}

/// Steady production rate and mid-lattice density for one grid point.
fn sweep_point(
    plan: &SweepPlan,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    let params =
        LatticeParams::new(plan.n, alpha, beta, plan.h.clone())?;
    let profile = match plan.model {
        Model::Master => {
            stationary_master(&build_generator(&params)?)?
                .density_profile()
        }
        Model::Full | Model::MeanField(_) => {
            let (system, order) = match plan.model {
                Model::Full => (System::Full, plan.n),
                Model::MeanField(m) => (System::MeanField(m), m),
                _ => unreachable!(),
            };
            let layout = IndexLayout::new(plan.n, order)?;
            let x0 = State::Correlations(uniform_embedding(layout));
            let report = steady_state(&system, &params, &x0, plan.tol)?;
            if !report.converged {
                return Err(Error::NonConvergence {
                    what: format!(
                        "steady state of {} at alpha = {alpha}, beta = \
                         {beta}",
                        system.label()
                    ),
                    residual: report.residual_norm,
                });
            }
            report.equilibrium.density_profile()
        }
        Model::Ssa => unreachable!("rejected during resolution"),
    };
    Ok((beta * profile[0], profile[plan.n / 2]))
}

/// Builds the sweep CSV: `alpha,beta,production_rate,mid_density,phase`
/// over the grid, alpha outer, beta inner, both ascending.
fn sweep_csv(plan: &SweepPlan) -> Result<String> {
    let homogeneous_unit =
        plan.h.iter().all(|&v| (v - 1.0).abs() < 1e-12);
    let points: Vec<(f64, f64)> = plan
        .alphas
        .iter()
        .flat_map(|&a| plan.betas.iter().map(move |&b| (a, b)))
        .collect();
    let rows: Vec<Result<String>> = points
        .par_iter()
        .map(|&(alpha, beta)| {
            let (rate, mid) = sweep_point(plan, alpha, beta)?;
            Ok(format!(
                "{},{},{},{},{}\n",
                sig12(alpha),
                sig12(beta),
                sig12(rate),
                sig12(mid),
                phase_label(alpha, beta, plan.grid_step, homogeneous_unit)
            ))
        })
        .collect();
    let mut out =
        String::from("alpha,beta,production_rate,mid_density,phase\n");
    for row in rows {
        out.push_str(&row?);
    }
    Ok(out)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let plan = resolve_sweep(args)?;
    let csv = sweep_csv(&plan)?;
    write_output(&csv, plan.output.as_deref())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let file = ExperimentConfig::load(args.config.as_deref())?;
    let n = require(args.n.or(file.n), "n")?;
    if n > MAX_VALIDATE_N {
        return Err(Error::InvalidInput(format!(
            "n: validation is capped at n = {MAX_VALIDATE_N}, got {n}"
        )));
    }
    let params = build_params(
        Some(n),
        args.alpha.or(file.alpha).or(Some(1.0)),
        args.beta.or(file.beta).or(Some(1.0)),
        args.h.or(file.h.clone()),
    )?;
    let m_max = args
        .m_max
        .or(file.m_max)
        .unwrap_or_else(|| n.saturating_sub(1).clamp(1, 3));
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let external = match args.init.or(file.init.clone()) {
        None => None,
        Some(spec) => match Init::parse(&spec)? {
            Init::File(path) => {
                Some(StateFile::load(&path)?.into_correlations(n)?)
            }
            _ => {
                return Err(Error::InvalidInput(
                    "init: validate checks external states from \
                     file:<path> only"
                        .into(),
                ))
            }
        },
    };
    let report = run_validation(&params, m_max, seed, external.as_ref())?;
    let mut payload = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("serialization: {e}")))?;
    payload.push('\n');
    let output = args.output.or(file.output.map(PathBuf::from));
    write_output(&payload, output.as_deref())?;
    match report.first_failure() {
        None => Ok(()),
        Some(name) => Err(Error::ValidationFailed(format!(
            "suite {name} failed; see the report for measured residuals"
        ))),
    }
}

fn cmd_ssa(args: SsaArgs) -> Result<()> {
    let file = ExperimentConfig::load(args.config.as_deref())?;
    let params = build_params(
        args.n.or(file.n),
        args.alpha.or(file.alpha),
        args.beta.or(file.beta),
        args.h.or(file.h.clone()),
    )?;
    let c = params.total_rate();
    let config = SsaConfig {
        params,
        n_samples: args.samples.or(file.samples).unwrap_or(16),
        t_burn: args.burn.or(file.burn).unwrap_or(100.0 / c),
        t_measure: args.measure.or(file.measure).unwrap_or(1e4 / c),
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    let estimate = simulate(&config)?;
    let n = config.params.n();
    let mut out = String::from("site,density,stderr\n");
    for site in (0..n).rev() {
        out.push_str(&format!(
            "{site},{},{}\n",
            sig12(estimate.density[site]),
            sig12(estimate.density_se[site])
        ));
    }
    log::info!(
        "flux {} (se {}), beta * density[0] = {}",
        estimate.flux,
        estimate.flux_se,
        config.params.beta() * estimate.density[0]
    );
    let output = args.output.or(file.output.map(PathBuf::from));
    write_output(&out, output.as_deref())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Density(args) => cmd_density(args),
        Cmd::Steady(args) => cmd_steady(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Ssa(args) => cmd_ssa(args),
    }
}

/// Entry point for the binary: parses arguments, runs the selected
/// command, and maps errors to the documented exit codes (0 success,
/// 1 validation failure, 2 non-convergence, 3 invalid input).
pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn"),
    )
    .try_init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
