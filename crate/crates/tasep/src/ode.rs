//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)).
//!
//! One integrator serves all three systems in this crate: the master
//! equation, the exact correlation dynamics, and the mean-field models.
//! Local error is controlled per component against `atol + rtol * |y|`;
//! no projection or clipping is applied to the state, so any drift off an
//! invariant set is visible to the diagnostics recorded by the callers.

use crate::error::{Error, Result};

/// Relative and absolute local error tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative tolerance per component.
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10 }
    }
}

impl Tolerances {
    /// Validates that both tolerances are positive and finite.
    pub fn validated(self) -> Result<Self> {
        if !(self.rtol.is_finite() && self.rtol > 0.0)
            || !(self.atol.is_finite() && self.atol > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "tolerances rtol = {}, atol = {} must be positive",
                self.rtol, self.atol
            )));
        }
        Ok(self)
    }
}

/// Hard cap on accepted plus rejected steps per call.
const MAX_STEPS: usize = 50_000_000;

// Dormand-Prince 5(4) tableau (FSAL: the last stage is the first stage of
// the next step).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0` to `t_end >= t0`.
///
/// `on_step(t, y)` runs after every accepted step (not for the initial
/// state); returning an error from it aborts the integration. The final
/// state is returned after landing exactly on `t_end`.
pub fn dopri5<F, C2>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: Tolerances,
    mut on_step: C2,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    C2: FnMut(f64, &[f64]) -> Result<()>,
{
    let tol = tol.validated()?;
    if !(t_end.is_finite() && t0.is_finite()) || t_end < t0 {
        return Err(Error::InvalidInput(format!(
            "integration span [{t0}, {t_end}] is not a forward interval"
        )));
    }
    let dim = y0.len();
    let mut y = y0.to_vec();
    if t_end == t0 || dim == 0 {
        return Ok(y);
    }

    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; dim]);
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    f(t0, &y, &mut k[0]);

    let scale = |yi: f64, yn: f64| tol.atol + tol.rtol * yi.abs().max(yn.abs());

    // Starting step size from the standard curvature estimate.
    let mut h = initial_step(&mut f, t0, &y, &k[0].clone(), t_end, tol);
    let mut t = t0;
    let mut rejected_last = false;

    for _step in 0..MAX_STEPS {
        if t >= t_end {
            return Ok(y);
        }
        h = h.min(t_end - t);
        let h_floor = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            return Err(Error::StepSizeUnderflow { t, state: y });
        }

        // Stages 2..7; stage 7 is the candidate solution (FSAL layout).
        let a_rows: [&[f64]; 6] = [&A2, &A3, &A4, &A5, &A6, &A7];
        for (s, a_row) in a_rows.iter().enumerate() {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, &aij) in a_row.iter().enumerate() {
                    acc += aij * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            f(t + C[s + 1] * h, &y_stage, &mut k[s + 1]);
            if s == 5 {
                y_new.copy_from_slice(&y_stage);
            }
        }

        // Weighted RMS of the embedded error estimate.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, &ej) in E.iter().enumerate() {
                e += ej * k[j][i];
            }
            let sc = scale(y[i], y_new[i]);
            let r = h * e / sc;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            on_step(t, &y)?;
            let factor = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).min(if rejected_last { 1.0 } else { 10.0 })
            };
            h *= factor.max(0.2);
            rejected_last = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            rejected_last = true;
        }
    }
    Err(Error::NonConvergence {
        what: format!("integration exceeded {MAX_STEPS} steps"),
        residual: t_end - t,
    })
}

/// Standard starting-step heuristic: balance the first derivative against
/// the tolerance scale, then refine with a curvature probe.
fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    t_end: f64,
    tol: Tolerances,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let sc: Vec<f64> =
        y0.iter().map(|&yi| tol.atol + tol.rtol * yi.abs()).collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&sc)
            .map(|(a, s)| (a / s) * (a / s))
            .sum::<f64>()
            / dim as f64)
            .sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_end - t0);

    let y1: Vec<f64> =
        y0.iter().zip(f0).map(|(yi, fi)| yi + h0 * fi).collect();
    let mut f1 = vec![0.0; dim];
    f(t0 + h0, &y1, &mut f1);
    let d2 = {
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        rms(&diff) / h0
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let y = dopri5(
            |_t, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            3.0,
            Tolerances::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let tau = 2.0 * std::f64::consts::PI;
        let mut steps = 0usize;
        let y = dopri5(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            tau,
            Tolerances { rtol: 1e-10, atol: 1e-12 },
            |_, _| {
                steps += 1;
                Ok(())
            },
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8, "y0 = {}", y[0]);
        assert!(y[1].abs() < 1e-8, "y1 = {}", y[1]);
        assert!(steps > 10, "adaptive integration took {steps} steps");
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let run = |rtol: f64| {
            let y = dopri5(
                |t, y, dy| dy[0] = y[0] * t.cos(),
                0.0,
                &[1.0],
                6.0,
                Tolerances { rtol, atol: rtol * 1e-2 },
                |_, _| Ok(()),
            )
            .unwrap();
            (y[0] - 6.0f64.sin().exp()).abs()
        };
        let coarse = run(1e-4);
        let fine = run(1e-10);
        assert!(fine < coarse, "fine {fine} vs coarse {coarse}");
        assert!(fine < 1e-8);
    }

    #[test]
    fn zero_span_returns_initial_state() {
        let y = dopri5(
            |_t, _y, dy| dy[0] = 1.0,
            2.0,
            &[5.0],
            2.0,
            Tolerances::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert_eq!(y, vec![5.0]);
    }

    #[test]
    fn backward_span_is_rejected() {
        let r = dopri5(
            |_t, _y, dy| dy[0] = 1.0,
            1.0,
            &[0.0],
            0.0,
            Tolerances::default(),
            |_, _| Ok(()),
        );
        assert!(r.is_err());
    }

    #[test]
    fn callback_error_aborts_integration() {
        let r = dopri5(
            |_t, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            10.0,
            Tolerances::default(),
            |t, _| {
                if t > 1.0 {
                    Err(crate::error::Error::ValidationFailed("stop".into()))
                } else {
                    Ok(())
                }
            },
        );
        assert!(matches!(r, Err(crate::error::Error::ValidationFailed(_))));
    }

    #[test]
    fn linear_system_matches_matrix_exponential() {
        use nalgebra::{DMatrix, DVector};
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.5, 0.0, 1.0, -0.5, 0.25, 0.0, 0.0, -0.25],
        );
        let y0 = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let t = 1.7;
        let expected = (a.clone() * t).exp() * &y0;
        let y = dopri5(
            |_t, y, dy| {
                let v = DVector::from_row_slice(y);
                dy.copy_from_slice((&a * v).as_slice());
            },
            0.0,
            y0.as_slice(),
            t,
            Tolerances { rtol: 1e-11, atol: 1e-13 },
            |_, _| Ok(()),
        )
        .unwrap();
        for i in 0..3 {
            assert!((y[i] - expected[i]).abs() < 1e-9);
        }
    }
}
