//! Time integration and steady states for the three model families: the
//! master equation on configuration space, the exact correlation
//! dynamics at full order, and the order-`m` mean-field closure.
//!
//! Steady states of the correlation systems are found by a damped Newton
//! iteration in affine coordinates of the consistent space: the
//! consistency equations are linear, so their null space (computed once
//! per layout) parametrizes the states reachable from a consistent
//! start, and every Newton iterate is consistent by construction. When
//! Newton stalls, the solver falls back to integrating the flow with a
//! doubling time horizon, which also serves as an independent route to
//! the equilibrium.

use crate::correlations::{
    consistency_residual, consistency_rows, uniform_embedding,
    vector_field_f, CorrelationVector,
};
use crate::error::{Error, Result};
use crate::lattice::{IndexLayout, LatticeParams};
use crate::linalg::nullspace_basis;
use crate::master::{
    build_generator, stationary_master, MasterState, MAX_DENSE_N,
};
use crate::meanfield::{vector_field_g, zero_index_set};
use crate::ode::{dopri5, Tolerances};
use nalgebra::{DMatrix, DVector};

/// Model selector for integration and steady-state solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Master equation on the `2^n` configuration probabilities.
    Master,
    /// Exact correlation dynamics at full order `n`.
    Full,
    /// Mean-field closure at order `m`.
    MeanField(usize),
}

impl System {
    /// Human-readable label used in tables and CSV headers.
    pub fn label(&self) -> String {
        match self {
            System::Master => "master".into(),
            System::Full => "full".into(),
            System::MeanField(m) => format!("mf:{m}"),
        }
    }
}

/// A state of whichever system is being integrated.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    /// Distribution over configurations.
    Master(MasterState),
    /// Correlation vector (full order or reduced).
    Correlations(CorrelationVector),
}

impl State {
    /// Per-site densities, indexed by site.
    pub fn density_profile(&self) -> Vec<f64> {
        match self {
            State::Master(z) => z.density_profile(),
            State::Correlations(x) => x.density_profile(),
        }
    }

    /// Smallest component of the underlying vector.
    pub fn min_component(&self) -> f64 {
        match self {
            State::Master(z) => z.min_component(),
            State::Correlations(x) => x.min_component(),
        }
    }

    /// The correlation vector inside, if any.
    pub fn as_correlations(&self) -> Option<&CorrelationVector> {
        match self {
            State::Correlations(x) => Some(x),
            State::Master(_) => None,
        }
    }

    /// The configuration distribution inside, if any.
    pub fn as_master(&self) -> Option<&MasterState> {
        match self {
            State::Master(z) => Some(z),
            State::Correlations(_) => None,
        }
    }

    fn flat(&self) -> &[f64] {
        match self {
            State::Master(z) => z.z(),
            State::Correlations(x) => x.values(),
        }
    }
}

/// Per-step diagnostics recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Time of the accepted step.
    pub time: f64,
    /// Consistency residual (correlation systems) or 0 (master).
    pub consistency_residual: f64,
    /// Smallest state component.
    pub min_component: f64,
    /// Deviation of the tracked total from 1: probability mass for the
    /// master system, the worst single-site occupation sum otherwise.
    pub sum_error: f64,
}

/// Result of an adaptive integration: accepted times, the corresponding
/// states, and diagnostics per step. Index 0 is the initial state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Accepted time points, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// States at the accepted time points.
    pub states: Vec<State>,
    /// Diagnostics at the accepted time points.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    /// Final state of the trajectory.
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Final time of the trajectory.
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }
}

/// Consistency residual above which a correlation trajectory is aborted;
/// the flow preserves the consistent space, so larger drift signals a
/// defect rather than a hard problem.
const TRAJECTORY_RESIDUAL_LIMIT: f64 = 1e-6;

fn master_diagnostics(t: f64, y: &[f64]) -> StepDiagnostics {
    let mass: f64 = y.iter().sum();
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    StepDiagnostics {
        time: t,
        consistency_residual: 0.0,
        min_component: min,
        sum_error: (mass - 1.0).abs(),
    }
}

fn correlation_diagnostics(
    t: f64,
    x: &CorrelationVector,
) -> StepDiagnostics {
    let n = x.n();
    let mut sum_error = 0.0f64;
    for d in 0..n {
        let s = x.get(1, d, 0) + x.get(1, d, 1);
        sum_error = sum_error.max((s - 1.0).abs());
    }
    StepDiagnostics {
        time: t,
        consistency_residual: consistency_residual(x),
        min_component: x.min_component(),
        sum_error,
    }
}

fn check_state_shape(
    system: &System,
    params: &LatticeParams,
    x0: &State,
) -> Result<()> {
    let n = params.n();
    match (system, x0) {
        (System::Master, State::Master(z)) if z.n() == n => Ok(()),
        (System::Full, State::Correlations(x))
            if x.n() == n && x.max_order() == n =>
        {
            Ok(())
        }
        (System::MeanField(m), State::Correlations(x))
            if x.n() == n && x.max_order() == *m && *m >= 1 && *m < n =>
        {
            Ok(())
        }
        _ => Err(Error::InvalidInput(format!(
            "initial state does not match system {} on n = {n} sites",
            system.label()
        ))),
    }
}

/// Integrates the chosen system from `x0` to `t_final`, recording every
/// accepted step.
///
/// Correlation trajectories must start with consistency residual below
/// `1e-8` and are aborted if the residual ever exceeds `1e-6`; the exact
/// and mean-field flows preserve the consistent space, so drift beyond
/// that is a bug, not an input problem.
pub fn integrate(
    system: &System,
    params: &LatticeParams,
    x0: &State,
    t_final: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    check_state_shape(system, params, x0)?;
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "integration horizon {t_final} must be nonnegative"
        )));
    }
    let n = params.n();

    match system {
        System::Master => {
            let a = build_generator(params)?;
            let mut times = vec![0.0];
            let mut states = vec![x0.clone()];
            let mut diagnostics = vec![master_diagnostics(0.0, x0.flat())];
            let y = dopri5(
                |_t, y, dy| a.apply(y, dy),
                0.0,
                x0.flat(),
                t_final,
                tol,
                |t, y| {
                    times.push(t);
                    states.push(State::Master(MasterState::from_raw(
                        n,
                        y.to_vec(),
                    )));
                    diagnostics.push(master_diagnostics(t, y));
                    Ok(())
                },
            )?;
            if times.len() == 1 {
                // Zero-length span: duplicate the initial point so the
                // final state is still addressable.
                times.push(t_final);
                states.push(State::Master(MasterState::from_raw(n, y)));
                diagnostics.push(diagnostics[0]);
            }
            Ok(Trajectory { times, states, diagnostics })
        }
        System::Full | System::MeanField(_) => {
            let x = x0.as_correlations().expect("shape checked above");
            let start_residual = consistency_residual(x);
            if start_residual > 1e-8 {
                return Err(Error::Inconsistent {
                    residual: start_residual,
                    limit: 1e-8,
                });
            }
            let layout = x.layout().clone();
            let deriv = correlation_derivative(system, params, &layout)?;
            let mut times = vec![0.0];
            let mut states = vec![x0.clone()];
            let mut diagnostics = vec![correlation_diagnostics(0.0, x)];
            let mut failure: Option<Error> = None;
            let result = dopri5(
                |_t, y, dy| deriv(y, dy),
                0.0,
                x.values(),
                t_final,
                tol,
                |t, y| {
                    let state = CorrelationVector::new(
                        layout.clone(),
                        y.to_vec(),
                    )?;
                    let diag = correlation_diagnostics(t, &state);
                    if diag.consistency_residual > TRAJECTORY_RESIDUAL_LIMIT
                    {
                        let err = Error::Inconsistent {
                            residual: diag.consistency_residual,
                            limit: TRAJECTORY_RESIDUAL_LIMIT,
                        };
                        failure = Some(Error::Inconsistent {
                            residual: diag.consistency_residual,
                            limit: TRAJECTORY_RESIDUAL_LIMIT,
                        });
                        return Err(err);
                    }
                    times.push(t);
                    states.push(State::Correlations(state));
                    diagnostics.push(diag);
                    Ok(())
                },
            );
            let y = match result {
                Ok(y) => y,
                Err(e) => return Err(failure.unwrap_or(e)),
            };
            if times.len() == 1 {
                times.push(t_final);
                states.push(State::Correlations(CorrelationVector::new(
                    layout, y,
                )?));
                diagnostics.push(diagnostics[0]);
            }
            Ok(Trajectory { times, states, diagnostics })
        }
    }
}

/// Builds the flat derivative closure of a correlation system; the
/// closure owns a copy of the layout.
fn correlation_derivative<'a>(
    system: &System,
    params: &'a LatticeParams,
    layout: &IndexLayout,
) -> Result<Box<dyn Fn(&[f64], &mut [f64]) + 'a>> {
    let system = *system;
    let layout = layout.clone();
    match system {
        System::Full => Ok(Box::new(move |y: &[f64], dy: &mut [f64]| {
            let x = CorrelationVector::new(layout.clone(), y.to_vec())
                .expect("layout length is fixed");
            let f = vector_field_f(params, &x)
                .expect("full-order evaluation cannot fail on valid shapes");
            dy.copy_from_slice(f.values());
        })),
        System::MeanField(m) => {
            Ok(Box::new(move |y: &[f64], dy: &mut [f64]| {
                let x = CorrelationVector::new(layout.clone(), y.to_vec())
                    .expect("layout length is fixed");
                match vector_field_g(params, m, &x) {
                    Ok(g) => dy.copy_from_slice(g.values()),
                    Err(_) => {
                        // Off-manifold drift beyond the field's gate:
                        // poison the derivative so the step controller
                        // rejects the step rather than silently using a
                        // value the model does not define.
                        dy.fill(f64::NAN);
                    }
                }
            }))
        }
        System::Master => Err(Error::InvalidInput(
            "master system has no correlation derivative".into(),
        )),
    }
}

/// Report of a steady-state solve.
#[derive(Debug, Clone)]
pub struct SolverReport {
    /// True when the residual dropped below the requested tolerance.
    pub converged: bool,
    /// Max-norm of the vector field at the returned state.
    pub residual_norm: f64,
    /// Newton iterations plus fallback integration segments used.
    pub iterations: usize,
    /// The approximate equilibrium.
    pub equilibrium: State,
    /// Smallest component of the equilibrium; positive means the state
    /// lies in the interior of its polytope.
    pub interior_margin: f64,
}

/// Orthonormal basis of the homogeneous consistency system's null space
/// for a layout; the affine chart used by the Newton solver. The
/// dimension is checked against the closed-form count
/// `(n - m + 2) 2^{m-1} - 1`.
pub fn consistency_nullspace_basis(
    layout: &IndexLayout,
) -> Result<DMatrix<f64>> {
    let rows = consistency_rows(layout);
    let mut a = DMatrix::zeros(rows.len(), layout.len());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] += v as f64;
        }
    }
    let basis = nullspace_basis(&a);
    let expected = (layout.n() - layout.max_order() + 2)
        * (1usize << (layout.max_order() - 1))
        - 1;
    if basis.ncols() != expected {
        return Err(Error::Singular(format!(
            "consistency null space has numerical dimension {}, counting \
             says {expected} (n = {}, m = {})",
            basis.ncols(),
            layout.n(),
            layout.max_order()
        )));
    }
    Ok(basis)
}

/// Default residual tolerance for steady states.
pub const STEADY_TOL: f64 = 1e-11;

/// Smallest damping factor tried before Newton is declared stalled.
const DAMPING_FLOOR: f64 = 1.0 / ((1u64 << 30) as f64);

/// Newton iteration budget per solve.
const MAX_NEWTON_ITERS: usize = 60;

/// Interior margin above which Newton steps are attempted. Closer to the
/// boundary the closure field is only piecewise smooth (quotients are
/// continuously extended by zero), so the iteration is left to the
/// integration fallback there.
const NEWTON_MARGIN_FLOOR: f64 = 1e-6;

/// Residual below which Newton steps are attempted regardless of the
/// margin; the iteration is then a local polish of an almost-converged
/// state.
const NEWTON_LOCAL_RESIDUAL: f64 = 1e-6;

/// Fraction of the residual a damped Newton step must remove to count as
/// progress; smaller improvements are treated as a stall.
const SUFFICIENT_DECREASE: f64 = 1e-3;

/// Largest fallback integration horizon, in units of `1/c`.
const MAX_FALLBACK_HORIZON: f64 = 4096.0;

/// Slack around `[0, 1]` allowed for Newton iterates. The physical
/// equilibrium lies in the interior of the polytope, while the closed
/// polynomial fields have spurious roots far outside it; trial points
/// beyond this box are rejected by the line search.
const NEWTON_BOX_SLACK: f64 = 1e-6;

/// Finds a stationary state of the chosen system starting from `x0`
/// (pass the uniform-measure embedding for an interior start).
///
/// Correlation systems run damped Newton in null-space coordinates of
/// the consistency equations with a line search on the residual norm,
/// falling back to integration with a doubling horizon whenever Newton
/// stalls. The master system is solved directly in the probability
/// simplex chart. `converged` is set only if the final max-norm residual
/// is below `tol`.
pub fn steady_state(
    system: &System,
    params: &LatticeParams,
    x0: &State,
    tol: f64,
) -> Result<SolverReport> {
    check_state_shape(system, params, x0)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "steady-state tolerance {tol} must be positive"
        )));
    }
    match system {
        System::Master => steady_master(params, x0, tol),
        System::Full | System::MeanField(_) => {
            steady_correlations(system, params, x0, tol)
        }
    }
}

/// Steady state of the master equation by projection onto the Σz = 1
/// affine chart: one reduced linear solve, since the field is linear.
/// Independent of the bordered-row elimination in `stationary_master`.
fn steady_master(
    params: &LatticeParams,
    x0: &State,
    tol: f64,
) -> Result<SolverReport> {
    let n = params.n();
    if n > MAX_DENSE_N {
        return Err(Error::InvalidInput(format!(
            "steady-state chart solve is dense and capped at n = \
             {MAX_DENSE_N}; use the stationary distribution routine for \
             n = {n}"
        )));
    }
    let a = build_generator(params)?;
    let dim = a.dim();
    let z0 = x0.as_master().expect("shape checked").z().to_vec();

    // Null space of the single mass constraint 1ᵀ z = 1.
    let ones = DMatrix::from_element(1, dim, 1.0);
    let basis = nullspace_basis(&ones);
    let k = basis.ncols();

    // Reduced linear system Bᵀ A B u = -Bᵀ A z0.
    let mut ab = DMatrix::zeros(dim, k);
    let mut col = vec![0.0; dim];
    for j in 0..k {
        let bj: Vec<f64> = basis.column(j).iter().cloned().collect();
        a.apply(&bj, &mut col);
        for i in 0..dim {
            ab[(i, j)] = col[i];
        }
    }
    let reduced = basis.transpose() * &ab;
    let mut az0 = vec![0.0; dim];
    a.apply(&z0, &mut az0);
    let rhs = -(basis.transpose() * DVector::from_column_slice(&az0));
    let lu = reduced.lu();
    let u = lu.solve(&rhs).ok_or_else(|| {
        Error::Singular("reduced master system is singular".into())
    })?;

    let mut z = DVector::from_column_slice(&z0);
    z += &basis * u;
    let zv: Vec<f64> = z.iter().cloned().collect();
    let mut az = vec![0.0; dim];
    a.apply(&zv, &mut az);
    let residual = az.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let state = MasterState::from_raw(n, zv);
    let margin = state.min_component();
    Ok(SolverReport {
        converged: residual < tol,
        residual_norm: residual,
        iterations: 1,
        equilibrium: State::Master(state),
        interior_margin: margin,
    })
}

fn steady_correlations(
    system: &System,
    params: &LatticeParams,
    x0: &State,
    tol: f64,
) -> Result<SolverReport> {
    let x0 = x0.as_correlations().expect("shape checked");
    let start_residual = consistency_residual(x0);
    if start_residual > 1e-8 {
        return Err(Error::Inconsistent {
            residual: start_residual,
            limit: 1e-8,
        });
    }
    let layout = x0.layout().clone();
    let deriv = correlation_derivative(system, params, &layout)?;
    let basis = consistency_nullspace_basis(&layout)?;
    let k = basis.ncols();
    let dim = layout.len();
    let c = params.total_rate();

    let field = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        deriv(x, &mut out);
        out
    };
    let max_norm =
        |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));

    let mut x = x0.values().to_vec();
    let mut r = field(&x);
    let mut rnorm = max_norm(&r);
    let mut iterations = 0usize;
    let mut fallback_horizon = 1.0 / c;
    let fd_step = 1e-7;

    while rnorm >= tol && iterations < MAX_NEWTON_ITERS {
        iterations += 1;
        let margin =
            x.iter().cloned().fold(f64::INFINITY, f64::min);
        log::debug!(
            "newton iteration {iterations}: residual {rnorm:.3e}, \
             margin {margin:.3e}"
        );

        let mut advanced = false;
        if margin > NEWTON_MARGIN_FLOOR || rnorm < NEWTON_LOCAL_RESIDUAL {
            // Reduced Jacobian by central differences along basis
            // columns.
            let mut jac = DMatrix::zeros(k, k);
            for j in 0..k {
                let mut hi = x.clone();
                let mut lo = x.clone();
                for i in 0..dim {
                    let d = fd_step * basis[(i, j)];
                    hi[i] += d;
                    lo[i] -= d;
                }
                let fhi = field(&hi);
                let flo = field(&lo);
                let dir: Vec<f64> = fhi
                    .iter()
                    .zip(&flo)
                    .map(|(a, b)| (a - b) / (2.0 * fd_step))
                    .collect();
                let proj =
                    basis.transpose() * DVector::from_column_slice(&dir);
                for i in 0..k {
                    jac[(i, j)] = proj[i];
                }
            }
            let rhs = -(basis.transpose() * DVector::from_column_slice(&r));
            let step = jac.lu().solve(&rhs);

            if let Some(du) = step {
                let dx = &basis * du;
                let mut damping = 1.0;
                while damping >= DAMPING_FLOOR {
                    let trial: Vec<f64> = x
                        .iter()
                        .zip(dx.iter())
                        .map(|(xi, di)| xi + damping * di)
                        .collect();
                    let in_box = trial.iter().all(|&v| {
                        v >= -NEWTON_BOX_SLACK && v <= 1.0 + NEWTON_BOX_SLACK
                    });
                    if in_box {
                        let rt = field(&trial);
                        let tnorm = max_norm(&rt);
                        if tnorm.is_finite()
                            && tnorm < rnorm * (1.0 - SUFFICIENT_DECREASE)
                        {
                            x = trial;
                            r = rt;
                            rnorm = tnorm;
                            advanced = true;
                            break;
                        }
                    }
                    damping *= 0.5;
                }
            }
        }

        if !advanced {
            // Newton stalled: flow toward the attractor for a while,
            // doubling the horizon on each stall. Only the endpoint is
            // needed, so the stepper runs without recording a trajectory.
            if fallback_horizon > MAX_FALLBACK_HORIZON / c {
                break;
            }
            log::debug!(
                "newton stalled at residual {rnorm:.3e}, integrating for \
                 {fallback_horizon:.3e}"
            );
            let flowed = dopri5(
                |_t, y, dy| deriv(y, dy),
                0.0,
                &x,
                fallback_horizon,
                Tolerances::default(),
                |_t, _y| Ok(()),
            )?;
            // The exact flow conserves the consistency equations, so the
            // increment lies in the chart up to integration error.
            // Re-projecting it keeps drift from compounding across the
            // doubling horizons.
            let dx: DVector<f64> = DVector::from_iterator(
                dim,
                flowed.iter().zip(&x).map(|(a, b)| a - b),
            );
            let projected = &basis * (basis.transpose() * dx);
            for (xi, di) in x.iter_mut().zip(projected.iter()) {
                *xi += di;
            }
            r = field(&x);
            rnorm = max_norm(&r);
            fallback_horizon *= 2.0;
        }
    }

    let equilibrium = CorrelationVector::new(layout, x)?;
    let margin = equilibrium.min_component();
    Ok(SolverReport {
        converged: rnorm < tol,
        residual_norm: rnorm,
        iterations,
        equilibrium: State::Correlations(equilibrium),
        interior_margin: margin,
    })
}

/// Default probe horizon multiplier for [`boundary_escape_test`]: the
/// flow is probed for one mean event time `1/c`.
pub const ESCAPE_PROBE_RATE_MULTIPLE: f64 = 1.0;

/// Strict-positivity threshold for the escape test.
pub const ESCAPE_THRESHOLD: f64 = 1e-13;

/// Probes whether the boundary is repellent from `x0`: integrates the
/// order-`m` mean-field flow (the full dynamics when `m = n`) for
/// `t_probe` and reports whether every component of the result exceeds
/// `1e-13`. Interior starts are vacuously positive and return true.
pub fn boundary_escape_test(
    params: &LatticeParams,
    m: usize,
    x0: &CorrelationVector,
    t_probe: f64,
) -> Result<bool> {
    let system = if m == params.n() {
        System::Full
    } else {
        System::MeanField(m)
    };
    let traj = integrate(
        &system,
        params,
        &State::Correlations(x0.clone()),
        t_probe,
        Tolerances::default(),
    )?;
    Ok(traj.final_state().min_component() > ESCAPE_THRESHOLD)
}

/// Worst shortfall of the exponential lower bound along a correlation
/// trajectory: the minimum over steps and components of
/// `x_t[i] - x_0[i] e^{-c t}`. The flow guarantees this stays above
/// roughly minus the integration tolerance.
pub fn exponential_bound_margin(
    traj: &Trajectory,
    total_rate: f64,
) -> f64 {
    let x0 = match &traj.states[0] {
        State::Correlations(x) => x.values(),
        State::Master(z) => z.z(),
    };
    let mut worst = f64::INFINITY;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let decay = (-total_rate * t).exp();
        let xt = state.flat();
        for (xi, x0i) in xt.iter().zip(x0) {
            worst = worst.min(xi - x0i * decay);
        }
    }
    worst
}

/// How the per-order comparison states are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareMode {
    /// Steady states via the Newton solver (master: direct solve).
    Steady,
    /// States at a fixed time from the uniform distribution.
    Evolve(f64),
}

/// Side-by-side density profiles of mean-field orders against the
/// master equation.
#[derive(Debug, Clone)]
pub struct OrderComparison {
    /// Number of sites.
    pub n: usize,
    /// One labeled density profile per requested model, in request
    /// order; the master profile is listed under label "master".
    pub profiles: Vec<(String, Vec<f64>)>,
    /// Max-abs density error per mean-field order against the master
    /// profile, in request order; empty when the master column was not
    /// requested.
    pub max_abs_errors: Vec<(String, f64)>,
}

/// Computes density profiles per model order (plus the master reference
/// when requested) and their max-abs deviations from the master column.
///
/// `orders` lists mean-field orders; `include_master` adds the exact
/// reference. All runs start from the uniform distribution (its
/// embedding for the reduced systems).
pub fn order_m_comparison(
    params: &LatticeParams,
    orders: &[usize],
    include_master: bool,
    mode: CompareMode,
    tol: f64,
) -> Result<OrderComparison> {
    let n = params.n();
    let mut profiles = Vec::new();
    let mut master_profile: Option<Vec<f64>> = None;

    if include_master {
        let z0 = MasterState::uniform(n)?;
        let profile = match mode {
            CompareMode::Steady => {
                let a = build_generator(params)?;
                stationary_master(&a)?.density_profile()
            }
            CompareMode::Evolve(t) => {
                let a = build_generator(params)?;
                crate::master::evolve_master(
                    &a,
                    &z0,
                    t,
                    Tolerances::default(),
                )?
                .density_profile()
            }
        };
        master_profile = Some(profile.clone());
        profiles.push(("master".to_string(), profile));
    }

    for &m in orders {
        let system = if m == n { System::Full } else { System::MeanField(m) };
        let layout = IndexLayout::new(n, m)?;
        let x0 = State::Correlations(uniform_embedding(layout));
        let profile = match mode {
            CompareMode::Steady => {
                let report = steady_state(&system, params, &x0, tol)?;
                if !report.converged {
                    return Err(Error::NonConvergence {
                        what: format!("steady state of {}", system.label()),
                        residual: report.residual_norm,
                    });
                }
                report.equilibrium.density_profile()
            }
            CompareMode::Evolve(t) => {
                integrate(&system, params, &x0, t, Tolerances::default())?
                    .final_state()
                    .density_profile()
            }
        };
        profiles.push((system.label(), profile));
    }

    let mut max_abs_errors = Vec::new();
    if let Some(reference) = &master_profile {
        for (label, profile) in &profiles {
            if label == "master" {
                continue;
            }
            let err = profile
                .iter()
                .zip(reference)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            max_abs_errors.push((label.clone(), err));
        }
    }

    Ok(OrderComparison { n, profiles, max_abs_errors })
}

/// Monotone shrinkage check of the zero index set along a trajectory:
/// true when every recorded state's zero set contains the next one's.
pub fn zero_sets_shrink(traj: &Trajectory) -> bool {
    let sets: Vec<Vec<(usize, usize, crate::lattice::BitPattern)>> = traj
        .states
        .iter()
        .filter_map(|s| s.as_correlations().map(zero_index_set))
        .collect();
    sets.windows(2).all(|w| {
        w[1].iter().all(|idx| w[0].contains(idx))
    })
}
