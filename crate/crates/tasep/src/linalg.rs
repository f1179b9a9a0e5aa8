//! Shared linear-algebra kernels: exact sparse rank over a prime field,
//! restarted GMRES, nonnegative least squares, and an orthonormal
//! null-space basis for dense systems.
//!
//! Dense factorizations (LU, SVD) come from `nalgebra`; the routines here
//! cover what it does not provide in the shapes needed by the solvers.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Modulus for exact rank computation: the Mersenne prime `2^61 - 1`.
///
/// The consistency systems have entries in `{-1, 0, 1}`; their rank over
/// the rationals equals the rank over `GF(p)` unless `p` divides one of
/// finitely many minors, which for a 61-bit prime is not a practical
/// concern. Arithmetic stays exact, so the result is an integer free of
/// floating-point rank decisions.
const RANK_PRIME: u64 = (1u64 << 61) - 1;

#[inline]
fn mod_p(v: i64) -> u64 {
    v.rem_euclid(RANK_PRIME as i64) as u64
}

#[inline]
fn mul_p(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % RANK_PRIME as u128) as u64
}

#[inline]
fn sub_p(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + RANK_PRIME - b
    }
}

fn pow_p(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_p(acc, base);
        }
        base = mul_p(base, base);
        exp >>= 1;
    }
    acc
}

#[inline]
fn inv_p(a: u64) -> u64 {
    debug_assert!(a != 0);
    pow_p(a, RANK_PRIME - 2)
}

/// Exact rank of a sparse integer matrix over `GF(2^61 - 1)`, which for
/// small-entry matrices coincides with the rank over the rationals.
///
/// `rows` holds one sparse row per entry as `(column, coefficient)` pairs;
/// columns may appear in any order but at most once per row. Row-echelon
/// elimination keeps pivot rows reduced so that their leading column is
/// minimal, which bounds fill-in on the banded consistency systems this is
/// used for.
pub fn sparse_rank(rows: &[Vec<(usize, i64)>], ncols: usize) -> usize {
    // Pivot rows keyed by leading column; each is sorted by column and
    // normalized to leading coefficient 1.
    let mut pivots: Vec<Option<Vec<(usize, u64)>>> = vec![None; ncols];
    let mut rank = 0usize;

    for raw in rows {
        let mut row: Vec<(usize, u64)> = raw
            .iter()
            .filter_map(|&(c, v)| {
                let r = mod_p(v);
                (r != 0).then_some((c, r))
            })
            .collect();
        row.sort_unstable_by_key(|&(c, _)| c);

        loop {
            let Some(&(lead_col, lead_val)) = row.first() else {
                break; // row reduced to zero
            };
            match &pivots[lead_col] {
                Some(pivot) => {
                    // row <- row - lead_val * pivot (merge of sorted rows).
                    let mut merged =
                        Vec::with_capacity(row.len() + pivot.len());
                    let (mut i, mut j) = (0usize, 0usize);
                    while i < row.len() || j < pivot.len() {
                        let next = match (row.get(i), pivot.get(j)) {
                            (Some(&(rc, rv)), Some(&(pc, pv))) => {
                                if rc < pc {
                                    i += 1;
                                    (rc, rv)
                                } else if pc < rc {
                                    j += 1;
                                    (pc, sub_p(0, mul_p(lead_val, pv)))
                                } else {
                                    i += 1;
                                    j += 1;
                                    (rc, sub_p(rv, mul_p(lead_val, pv)))
                                }
                            }
                            (Some(&(rc, rv)), None) => {
                                i += 1;
                                (rc, rv)
                            }
                            (None, Some(&(pc, pv))) => {
                                j += 1;
                                (pc, sub_p(0, mul_p(lead_val, pv)))
                            }
                            (None, None) => unreachable!(),
                        };
                        if next.1 != 0 {
                            merged.push(next);
                        }
                    }
                    row = merged;
                }
                None => {
                    let inv = inv_p(lead_val);
                    for e in &mut row {
                        e.1 = mul_p(e.1, inv);
                    }
                    pivots[lead_col] = Some(row);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Orthonormal basis of the (numerical) null space of a dense matrix,
/// returned as the columns of an `ncols x k` matrix. The rank cut uses the
/// standard tolerance `max(nrows, ncols) * eps * s_max`.
pub fn nullspace_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (nrows, ncols) = a.shape();
    // nalgebra stores min(nrows, ncols) right singular vectors; pad flat
    // matrices with zero rows so V^T covers the whole coordinate space.
    let work = if nrows < ncols {
        let mut sq = DMatrix::zeros(ncols, ncols);
        sq.view_mut((0, 0), (nrows, ncols)).copy_from(a);
        sq
    } else {
        a.clone()
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("SVD requested with V^T");
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = s_max * (nrows.max(ncols) as f64) * f64::EPSILON;
    let kernel_rows: Vec<usize> =
        (0..ncols).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut basis = DMatrix::zeros(ncols, kernel_rows.len());
    for (k, &i) in kernel_rows.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    basis
}

/// Options for [`gmres`].
#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Krylov subspace size between restarts.
    pub restart: usize,
    /// Maximum number of restart cycles.
    pub max_restarts: usize,
    /// Absolute tolerance on the 2-norm of the residual.
    pub tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { restart: 50, max_restarts: 200, tol: 1e-13 }
    }
}

/// Restarted GMRES for a square operator given as a matrix-free closure
/// `apply(x, y)` computing `y = A x`. Returns the solution, the final
/// residual 2-norm, and the number of iterations (matrix applications).
pub fn gmres<F>(
    apply: F,
    b: &[f64],
    x0: &[f64],
    opts: GmresOptions,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    assert_eq!(x0.len(), n);
    let m = opts.restart.min(n).max(1);
    let mut x = x0.to_vec();
    let mut iters = 0usize;
    let mut scratch = vec![0.0; n];

    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();

    let mut resid = {
        apply(&x, &mut scratch);
        let r: Vec<f64> = b.iter().zip(&scratch).map(|(bi, ax)| bi - ax).collect();
        norm(&r)
    };

    for _cycle in 0..opts.max_restarts {
        apply(&x, &mut scratch);
        let r0: Vec<f64> = b.iter().zip(&scratch).map(|(bi, ax)| bi - ax).collect();
        let beta = norm(&r0);
        if beta <= opts.tol {
            return Ok((x, beta, iters));
        }

        // Arnoldi with modified Gram-Schmidt; Givens rotations keep the
        // Hessenberg least-squares problem triangular.
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r0.iter().map(|a| a / beta).collect());
        let mut hess = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0usize;

        for k in 0..m {
            apply(&v[k], &mut scratch);
            let mut w = scratch.clone();
            for i in 0..=k {
                let hik: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                hess[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hk1 = norm(&w);
            hess[k + 1][k] = hk1;
            iters += 1;

            // Apply accumulated rotations to the new column.
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = (hess[k][k].powi(2) + hk1 * hk1).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hk1 / denom;
            }
            hess[k][k] = cs[k] * hess[k][k] + sn[k] * hess[k + 1][k];
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;

            let rk = g[k + 1].abs();
            if rk <= opts.tol || hk1 <= f64::EPSILON * beta {
                break;
            }
            v.push(w.iter().map(|a| a / hk1).collect());
        }

        // Back-substitute and update x.
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            if hess[i][i].abs() <= f64::MIN_POSITIVE {
                return Err(Error::Singular(
                    "GMRES Hessenberg system broke down".into(),
                ));
            }
            y[i] = s / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xj, vj) in x.iter_mut().zip(&v[i]) {
                *xj += yi * vj;
            }
        }

        apply(&x, &mut scratch);
        let r: Vec<f64> = b.iter().zip(&scratch).map(|(bi, ax)| bi - ax).collect();
        resid = norm(&r);
        if resid <= opts.tol {
            return Ok((x, resid, iters));
        }
    }
    Err(Error::NonConvergence { what: "GMRES".into(), residual: resid })
}

/// Nonnegative least squares `min ||A x - b||_2` subject to `x >= 0` by
/// the active-set method of Lawson and Hanson. Suitable for the small
/// dense systems used in the simplex pre-image checks.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ncols = a.ncols();
    let mut passive = vec![false; ncols];
    let mut x = DVector::zeros(ncols);
    let tol = 10.0 * f64::EPSILON
        * a.amax()
        * (a.nrows().max(a.ncols()) as f64)
        * b.amax().max(1.0);

    // Least-squares solve restricted to the passive columns.
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> =
            (0..ncols).filter(|&j| passive[j]).collect();
        if cols.is_empty() {
            return DVector::zeros(ncols);
        }
        let sub = a.select_columns(cols.iter());
        let sol = sub
            .svd(true, true)
            .solve(b, f64::EPSILON * 100.0)
            .expect("SVD least-squares solve");
        let mut full = DVector::zeros(ncols);
        for (k, &j) in cols.iter().enumerate() {
            full[j] = sol[k];
        }
        full
    };

    for _outer in 0..(10 * ncols.max(8)) {
        let w = a.transpose() * (b - a * &x);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..ncols {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((enter, _)) = best else {
            break; // KKT satisfied
        };
        passive[enter] = true;

        loop {
            let z = solve_passive(&passive);
            let mut min_ratio: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if passive[j] && z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    let ratio = if denom.abs() < f64::MIN_POSITIVE {
                        0.0
                    } else {
                        x[j] / denom
                    };
                    if min_ratio.map_or(true, |(_, r)| ratio < r) {
                        min_ratio = Some((j, ratio));
                    }
                }
            }
            match min_ratio {
                None => {
                    x = z;
                    break;
                }
                Some((_, alpha)) => {
                    x = &x + alpha * (&z - &x);
                    for j in 0..ncols {
                        if passive[j] && x[j] <= tol.max(f64::EPSILON) {
                            x[j] = 0.0;
                            passive[j] = false;
                        }
                    }
                }
            }
        }
    }
    x
}
