//! Order-`m` mean-field models: the projection to low-order correlations,
//! the cluster-approximation closure, and the reduced vector field.
//!
//! The exact dynamics of order-`m` correlations depends on order `m + 1`.
//! The mean-field model closes the hierarchy by estimating each
//! `(m + 1)`-point value from the two overlapping `m`-point values it
//! contains, divided by their shared `(m - 1)`-point overlap (for
//! `m = 1` the overlap is empty and the denominator is 1). The closure
//! is exact for product measures, maps the consistent set into itself,
//! and extends continuously to the boundary by sending quotients with
//! vanishing denominator to 0.
//!
//! `m = 1` reproduces the Ribosome Flow Model on the site densities.

use crate::correlations::{
    consistency_residual, lower_bound_report, vector_field_f,
    CorrelationVector, LowerBoundReport,
};
use crate::error::{Error, Result};
use crate::lattice::{low_mask, BitPattern, IndexLayout};
use crate::LatticeParams;

/// Restricts a correlation vector to orders `1..=m` (the projection onto
/// the reduced state space). Consistency and range are inherited.
pub fn project(y: &CorrelationVector, m: usize) -> Result<CorrelationVector> {
    if m == 0 || m > y.max_order() {
        return Err(Error::InvalidInput(format!(
            "cannot project an order-{} vector to order {m}",
            y.max_order()
        )));
    }
    let layout = IndexLayout::new(y.n(), m)?;
    let len = layout.len();
    CorrelationVector::new(layout, y.values()[..len].to_vec())
}

/// Threshold below which a closure denominator counts as zero and the
/// quotient is continuously extended by 0.
const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Slack around `[0, 1]` tolerated by the public closure's domain gate.
const DOMAIN_SLACK: f64 = 1e-12;

/// One closure component: the probability of the long pattern estimated
/// from its two overlapping sub-patterns and their shared overlap.
///
/// The quotient `fac2 / den` is a conditional probability and stays in
/// `[0, 1]` for consistent nonnegative inputs; the clamp removes
/// floating-point overshoot and the zero-denominator rule extends the
/// map continuously to the boundary.
#[inline]
fn closure_component(fac1: f64, fac2: f64, den: f64) -> f64 {
    if den > DENOMINATOR_FLOOR {
        fac1 * (fac2 / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Cluster extension without the public domain gate; shared by
/// [`cluster_extend`] and [`vector_field_g`].
fn extend_unchecked(x: &CorrelationVector) -> Result<CorrelationVector> {
    let n = x.n();
    let m = x.max_order();
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "cannot extend beyond the full order (m = {m}, n = {n})"
        )));
    }
    let layout = IndexLayout::new(n, m + 1)?;
    let mut y = CorrelationVector::zeros(layout);
    y.values_mut()[..x.values().len()].copy_from_slice(x.values());
    let l = m + 1;
    for d in 0..=(n - l) {
        for bits in 0..(1u64 << l) {
            let fac1 = x.get(m, d + 1, bits >> 1);
            let fac2 = x.get(m, d, bits & low_mask(m));
            let den = if m == 1 {
                1.0
            } else {
                x.get(m - 1, d + 1, (bits >> 1) & low_mask(m - 1))
            };
            let idx = y.layout().flat(l, d, bits);
            y.values_mut()[idx] = closure_component(fac1, fac2, den);
        }
    }
    Ok(y)
}

/// Extends an order-`m` state to order `m + 1` with the cluster
/// approximation. The input components must lie in `[0, 1]` up to a
/// `1e-12` slack; the output extends the input and, for consistent
/// inputs, is itself consistent.
pub fn cluster_extend(x: &CorrelationVector) -> Result<CorrelationVector> {
    if !x.within_unit_range(DOMAIN_SLACK) {
        return Err(Error::InvalidInput(format!(
            "closure input has components outside [0, 1] \
             (min {:.3e}, max {:.3e})",
            x.min_component(),
            x.max_component()
        )));
    }
    extend_unchecked(x)
}

/// Largest consistency residual accepted by [`vector_field_g`]; the
/// reduced field is only defined near the consistent affine space.
const G_RESIDUAL_LIMIT: f64 = 1e-6;

/// The order-`m` mean-field vector field: close the state to order
/// `m + 1`, apply the exact correlation dynamics, and keep orders
/// `1..=m`. Components of order below `m` involve no closure values and
/// match the exact dynamics on any extension of `x`.
///
/// `m` must equal `x.max_order()` and satisfy `1 <= m < n`; the input
/// must be consistent to within `1e-6`. Mild range drift (as produced by
/// time integration) is tolerated.
pub fn vector_field_g(
    params: &LatticeParams,
    m: usize,
    x: &CorrelationVector,
) -> Result<CorrelationVector> {
    let n = params.n();
    if x.n() != n {
        return Err(Error::InvalidInput(format!(
            "state is for n = {}, parameters for n = {n}",
            x.n()
        )));
    }
    if m != x.max_order() {
        return Err(Error::InvalidInput(format!(
            "order mismatch: m = {m}, state holds order {}",
            x.max_order()
        )));
    }
    if !(1..n).contains(&m) {
        return Err(Error::InvalidInput(format!(
            "closure order must satisfy 1 <= m < n (m = {m}, n = {n})"
        )));
    }
    let residual = consistency_residual(x);
    if residual > G_RESIDUAL_LIMIT {
        return Err(Error::Inconsistent { residual, limit: G_RESIDUAL_LIMIT });
    }
    let extended = extend_unchecked(x)?;
    let f = vector_field_f(params, &extended)?;
    project(&f, m)
}

/// Checks the derivative lower bound `g[l,d,b](x) >= -c x[l,d,b] - 1e-12`
/// componentwise; the witness names the first violation.
pub fn lower_bound_check_g(
    params: &LatticeParams,
    m: usize,
    x: &CorrelationVector,
) -> Result<LowerBoundReport> {
    let g = vector_field_g(params, m, x)?;
    Ok(lower_bound_report(params.total_rate(), x, &g, 1e-12))
}

/// Threshold below which a component counts as zero for the boundary
/// index set.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// The index set of (numerically) vanishing components. Empty exactly
/// when `x` lies in the interior of the consistent polytope.
pub fn zero_index_set(
    x: &CorrelationVector,
) -> Vec<(usize, usize, BitPattern)> {
    x.layout()
        .iter()
        .filter(|&(l, d, b)| x.get(l, d, b.bits()) <= ZERO_THRESHOLD)
        .collect()
}
