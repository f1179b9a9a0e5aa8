//! Property suites bundling the library's structural checks into a
//! machine-readable report: consistency of embeddings, tangency of the
//! vector fields, derivative lower bounds, flow invariance, boundary
//! repellence, the embedding/generator intertwining identity, and the
//! order-`m` accuracy trend against the master equation.

use crate::correlations::{
    consistency_residual, directional_consistency_residual, embed,
    lower_bound_check, vector_field_f, CorrelationVector,
};
use crate::dynamics::{
    boundary_escape_test, integrate, order_m_comparison, CompareMode, State,
    System, STEADY_TOL,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::master::{build_generator, MasterState};
use crate::meanfield::{lower_bound_check_g, vector_field_g};
use crate::ode::Tolerances;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Largest lattice the validation suites accept; the master-equation
/// oracle must stay cheap.
pub const MAX_VALIDATE_N: usize = 10;

/// Outcome of one property suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    /// Suite name.
    pub name: String,
    /// Whether the suite's acceptance condition held.
    pub passed: bool,
    /// The measured quantity the condition is stated over.
    pub measured: f64,
    /// The acceptance limit for `measured`.
    pub limit: f64,
    /// Human-readable context (what was measured, over which states).
    pub detail: String,
}

/// Full validation report; serializable to JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Lattice size.
    pub n: usize,
    /// Largest mean-field order exercised.
    pub m_max: usize,
    /// Entry rate.
    pub alpha: f64,
    /// Exit rate.
    pub beta: f64,
    /// Suite outcomes in execution order.
    pub suites: Vec<SuiteResult>,
    /// True when every suite passed.
    pub passed: bool,
}

impl ValidationReport {
    /// Name of the first failing suite, if any.
    pub fn first_failure(&self) -> Option<&str> {
        self.suites
            .iter()
            .find(|s| !s.passed)
            .map(|s| s.name.as_str())
    }
}

fn random_states(
    n: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<MasterState> {
    (0..count)
        .map(|_| MasterState::random_simplex(n, rng).expect("valid size"))
        .collect()
}

/// Runs all property suites at the given parameters. `external` is an
/// optional user-supplied correlation state whose consistency is checked
/// as part of the consistency suite (the entry point for file-based
/// negative tests).
pub fn run_validation(
    params: &LatticeParams,
    m_max: usize,
    seed: u64,
    external: Option<&CorrelationVector>,
) -> Result<ValidationReport> {
    let n = params.n();
    if n > MAX_VALIDATE_N {
        return Err(Error::InvalidInput(format!(
            "validation needs the master-equation oracle and is capped at \
             n = {MAX_VALIDATE_N} (requested n = {n})"
        )));
    }
    if m_max == 0 || m_max > n {
        return Err(Error::InvalidInput(format!(
            "m_max = {m_max} must satisfy 1 <= m_max <= n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = params.total_rate();
    let mf_orders: Vec<usize> = (1..=m_max.min(n - 1)).collect();
    let mut suites = Vec::new();

    // Consistency: embeddings satisfy the marginal equations to
    // rounding; an external state must satisfy them to the input gate.
    {
        let mut worst = 0.0f64;
        for z in random_states(n, 5, &mut rng) {
            for m in 1..=m_max {
                worst = worst.max(consistency_residual(&embed(&z, m)?));
            }
        }
        let mut limit = 1e-12;
        let mut detail =
            "max residual over embeddings of 5 random distributions"
                .to_string();
        if let Some(x) = external {
            if consistency_residual(x) > 1e-8 {
                worst = worst.max(consistency_residual(x));
                limit = 1e-8;
                detail = format!(
                    "supplied state has residual {:.3e} (limit 1e-8); {}",
                    consistency_residual(x),
                    detail
                );
            }
        }
        suites.push(SuiteResult {
            name: "consistency".into(),
            passed: worst <= limit,
            measured: worst,
            limit,
            detail,
        });
    }

    // Tangency: derivatives satisfy the homogeneous consistency
    // equations, so the flows stay on the consistent affine space.
    {
        let mut worst = 0.0f64;
        for z in random_states(n, 3, &mut rng) {
            let y = embed(&z, n)?;
            worst =
                worst.max(directional_consistency_residual(&vector_field_f(
                    params, &y,
                )?));
            for &m in &mf_orders {
                let x = embed(&z, m)?;
                worst = worst.max(directional_consistency_residual(
                    &vector_field_g(params, m, &x)?,
                ));
            }
        }
        suites.push(SuiteResult {
            name: "tangency".into(),
            passed: worst <= 1e-10,
            measured: worst,
            limit: 1e-10,
            detail: "max homogeneous residual of the exact and mean-field \
                     fields at 3 random states"
                .into(),
        });
    }

    // Lower bounds: no component can decay faster than the total rate.
    {
        let mut worst_margin = f64::INFINITY;
        for z in random_states(n, 5, &mut rng) {
            let y = embed(&z, n)?;
            worst_margin =
                worst_margin.min(lower_bound_check(params, &y)?.margin);
            for &m in &mf_orders {
                let x = embed(&z, m)?;
                worst_margin = worst_margin
                    .min(lower_bound_check_g(params, m, &x)?.margin);
            }
        }
        suites.push(SuiteResult {
            name: "lower_bound".into(),
            passed: worst_margin >= -1e-12,
            measured: worst_margin,
            limit: -1e-12,
            detail: "min of derivative + total rate * component over 5 \
                     random states (nonnegative up to rounding)"
                .into(),
        });
    }

    // Invariance: trajectories stay in the consistent polytope.
    {
        let mut worst_residual = 0.0f64;
        let mut worst_range = 0.0f64;
        for &m in &mf_orders {
            for z in random_states(n, 2, &mut rng) {
                let x0 = State::Correlations(embed(&z, m)?);
                let traj = integrate(
                    &System::MeanField(m),
                    params,
                    &x0,
                    10.0 / c,
                    Tolerances::default(),
                )?;
                for d in &traj.diagnostics {
                    worst_residual =
                        worst_residual.max(d.consistency_residual);
                    worst_range = worst_range.max(-d.min_component);
                }
                let last = traj
                    .final_state()
                    .as_correlations()
                    .expect("correlation system")
                    .max_component();
                worst_range = worst_range.max(last - 1.0);
            }
        }
        let measured = worst_residual.max(worst_range * 1e2);
        suites.push(SuiteResult {
            name: "invariance".into(),
            passed: worst_residual <= 1e-7 && worst_range <= 1e-9,
            measured,
            limit: 1e-7,
            detail: format!(
                "worst residual {worst_residual:.3e} (limit 1e-7), worst \
                 range excursion {worst_range:.3e} (limit 1e-9) over t = \
                 10/c trajectories"
            ),
        });
    }

    // Boundary repellence: from the empty and full vertices, all
    // components become strictly positive; the horizon doubles until the
    // threshold clears, since deep patterns grow polynomially with high
    // order in time.
    {
        let mut needed = 0.0f64;
        let mut ok = true;
        for &m in &mf_orders {
            for config in [0u64, (1u64 << n) - 1] {
                let z = MasterState::point_mass(n, config)?;
                let x0 = embed(&z, m)?;
                let mut horizon = 0.0;
                let mut cleared = false;
                for k in 0..6 {
                    let t_probe = (1u64 << k) as f64 / c;
                    horizon = t_probe;
                    if boundary_escape_test(params, m, &x0, t_probe)? {
                        cleared = true;
                        break;
                    }
                }
                needed = needed.max(horizon * c);
                ok = ok && cleared;
            }
        }
        suites.push(SuiteResult {
            name: "boundary_escape".into(),
            passed: ok,
            measured: needed,
            limit: 32.0,
            detail: "largest horizon (in mean event times 1/c) needed for \
                     all components to clear 1e-13 from the empty and full \
                     vertices"
                .into(),
        });
    }

    // Defining identity: the embedding intertwines the generator with
    // the correlation field.
    {
        let a = build_generator(params)?;
        let mut worst = 0.0f64;
        for z in random_states(n, 5, &mut rng) {
            let y = embed(&z, n)?;
            let f = vector_field_f(params, &y)?;
            let mut az = vec![0.0; a.dim()];
            a.apply(z.z(), &mut az);
            let eaz = embed(&MasterState::from_raw(n, az), n)?;
            for (a, b) in f.values().iter().zip(eaz.values()) {
                worst = worst.max((a - b).abs());
            }
        }
        suites.push(SuiteResult {
            name: "defining_identity".into(),
            passed: worst <= 1e-12,
            measured: worst,
            limit: 1e-12,
            detail: "max deviation between the correlation field at an \
                     embedding and the embedded generator action, 5 random \
                     distributions"
                .into(),
        });
    }

    // Order trend: higher closure orders should not do worse than the
    // plain site-density model against the master steady state.
    {
        let table = order_m_comparison(
            params,
            &mf_orders,
            true,
            CompareMode::Steady,
            STEADY_TOL,
        )?;
        let errs: Vec<f64> =
            table.max_abs_errors.iter().map(|(_, e)| *e).collect();
        let err_first = errs.first().copied().unwrap_or(0.0);
        let err_last = errs.last().copied().unwrap_or(0.0);
        let passed = errs.iter().all(|e| e.is_finite())
            && (err_last <= err_first + 1e-12 || err_last < 0.05);
        let detail = table
            .max_abs_errors
            .iter()
            .map(|(label, e)| format!("{label}: {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        suites.push(SuiteResult {
            name: "order_convergence".into(),
            passed,
            measured: err_last,
            limit: err_first.max(0.05),
            detail: format!(
                "max-abs steady density error vs master ({detail})"
            ),
        });
    }

    let passed = suites.iter().all(|s| s.passed);
    Ok(ValidationReport {
        n,
        m_max,
        alpha: params.alpha(),
        beta: params.beta(),
        suites,
        passed,
    })
}
