//! Correlation functions (`l`-point functions) of the TASEP and the exact
//! dynamics they satisfy.
//!
//! The component `x[l, d, b]` is the probability that the window of sites
//! `d + l - 1, ..., d` shows the occupation pattern `b`. The embedding of
//! a configuration distribution into these marginals intertwines the
//! master equation with an explicit vector field `f` on correlation
//! space: `f(E z) = E (A z)`. Marginals of one distribution satisfy a
//! family of linear consistency equations built from a fixed rank-3
//! 4x4 coupling matrix; the affine space they cut out is exactly the set
//! of embedded signed distributions, and its intersection with `[0, 1]`
//! components is exactly the embedded probability simplex.
//!
//! `f[l, d, b]` couples order `l` to order `l + 1`: inflow and outflow
//! across the window boundary involve one site beyond the window. The
//! component is the signed sum of
//!
//! - entry terms (`alpha`) when the window touches site `n - 1`,
//! - exit terms (`beta`) when the window touches site `0`,
//! - internal hop terms (`h`) for each `10`/`01` bond inside the window,
//! - boundary hop terms coupling to patterns one site longer on either
//!   side, guarded so they are only formed when that longer window exists.

use crate::error::{Error, Result};
use crate::lattice::{low_mask, BitPattern, IndexLayout, LatticeParams};
use crate::master::MasterState;

/// The fixed 4x4 coupling matrix of the consistency equations; rank 3,
/// kernel spanned by [`CONSISTENCY_KERNEL`].
pub const CONSISTENCY_MATRIX: [[f64; 4]; 4] = [
    [1.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0],
    [1.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 1.0],
];

/// Spanning vector of the kernel of [`CONSISTENCY_MATRIX`].
pub const CONSISTENCY_KERNEL: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Vector of correlation components up to a maximal order, stored in the
/// flat layout of [`IndexLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector {
    layout: IndexLayout,
    values: Vec<f64>,
}

impl CorrelationVector {
    /// Wraps a value vector; its length must match the layout.
    pub fn new(layout: IndexLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a layout of length {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, values })
    }

    /// All-zero vector over the given layout.
    pub fn zeros(layout: IndexLayout) -> Self {
        let len = layout.len();
        Self { layout, values: vec![0.0; len] }
    }

    /// Index layout (lattice size and maximal order).
    pub fn layout(&self) -> &IndexLayout {
        &self.layout
    }

    /// Lattice size.
    pub fn n(&self) -> usize {
        self.layout.n()
    }

    /// Maximal stored correlation order.
    pub fn max_order(&self) -> usize {
        self.layout.max_order()
    }

    /// Flat component slice.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable flat component slice.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Component `(l, d, b)` with raw pattern bits; bounds checked in
    /// debug builds only.
    #[inline]
    pub fn get(&self, l: usize, d: usize, bits: u64) -> f64 {
        self.values[self.layout.flat(l, d, bits)]
    }

    /// Checked component lookup.
    pub fn get_checked(&self, l: usize, d: usize, b: BitPattern) -> Result<f64> {
        Ok(self.values[self.layout.flat_index(l, d, b)?])
    }

    /// Smallest component.
    pub fn min_component(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Largest component.
    pub fn max_component(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every component lies in `[-slack, 1 + slack]`.
    pub fn within_unit_range(&self, slack: f64) -> bool {
        self.values
            .iter()
            .all(|&v| v >= -slack && v <= 1.0 + slack)
    }

    /// Per-site densities `x[1, d, 1]`, indexed by site `0..n`.
    pub fn density_profile(&self) -> Vec<f64> {
        (0..self.n()).map(|d| self.get(1, d, 1)).collect()
    }
}

/// Marginalizes a configuration distribution into correlation components
/// up to `max_order`. The result is consistent, lies in `[0, 1]`, and for
/// `max_order = n` its top slice is the distribution itself.
pub fn embed(z: &MasterState, max_order: usize) -> Result<CorrelationVector> {
    let n = z.n();
    let layout = IndexLayout::new(n, max_order)?;
    let mut y = CorrelationVector::zeros(layout);
    for (c, &zc) in z.z().iter().enumerate() {
        if zc == 0.0 {
            continue;
        }
        let c = c as u64;
        for l in 1..=max_order {
            let mask = low_mask(l);
            for d in 0..=(n - l) {
                let bits = (c >> d) & mask;
                let idx = y.layout.flat(l, d, bits);
                y.values[idx] += zc;
            }
        }
    }
    Ok(y)
}

/// Embedding of the uniform distribution, built directly: every window
/// pattern of length `l` has probability `2^{-l}`. Equal to
/// `embed(uniform, max_order)` but usable for lattices far beyond the
/// master equation's reach.
pub fn uniform_embedding(layout: IndexLayout) -> CorrelationVector {
    let mut y = CorrelationVector::zeros(layout);
    for (l, d, b) in y.layout.iter() {
        let idx = y.layout.flat(l, d, b.bits());
        y.values[idx] = 0.5f64.powi(l as i32);
    }
    y
}

/// Embedding of a configuration point mass, built directly: a window
/// component is 1 exactly when its pattern matches the configuration.
/// Equal to `embed(point_mass(config), max_order)` without the `2^n`
/// distribution vector.
pub fn point_mass_embedding(
    layout: IndexLayout,
    config: u64,
) -> Result<CorrelationVector> {
    let n = layout.n();
    if n < 64 && config >= (1u64 << n) {
        return Err(Error::InvalidInput(format!(
            "configuration {config} does not fit {n} sites"
        )));
    }
    let mut y = CorrelationVector::zeros(layout);
    for (l, d, b) in y.layout.iter() {
        if (config >> d) & low_mask(l) == b.bits() {
            let idx = y.layout.flat(l, d, b.bits());
            y.values[idx] = 1.0;
        }
    }
    Ok(y)
}

/// Visits every consistency equation of a layout exactly once.
///
/// Level-1 equations state that the two single-site probabilities of each
/// site sum to `affine_rhs` (1 for states, 0 for directions). For each
/// higher level `l`, window `d`, and interior pattern `t` of length
/// `l - 2`, the four components `(0t0, 0t1, 1t0, 1t1)` at `(l, d)` are
/// coupled by [`CONSISTENCY_MATRIX`] to the level-`(l-1)` components
/// `(t0, t1)` at window `d` and `(0t, 1t)` at window `d + 1`.
fn for_each_consistency_equation<F>(
    layout: &IndexLayout,
    mut visit: F,
) -> Result<()>
where
    // (coefficient-index pairs of the equation's left side, right side
    // index or None for the affine level-1 equations)
    F: FnMut(&[(usize, f64)], Option<usize>) -> Result<()>,
{
    let n = layout.n();
    for d in 0..n {
        let eq = [
            (layout.flat(1, d, 0), 1.0),
            (layout.flat(1, d, 1), 1.0),
        ];
        visit(&eq, None)?;
    }
    for l in 2..=layout.max_order() {
        for d in 0..=(n - l) {
            for t in 0..(1u64 << (l - 2)) {
                let p00 = layout.flat(l, d, t << 1);
                let p01 = layout.flat(l, d, (t << 1) | 1);
                let p10 = layout.flat(l, d, (1 << (l - 1)) | (t << 1));
                let p11 = layout.flat(l, d, (1 << (l - 1)) | (t << 1) | 1);
                let r1 = layout.flat(l - 1, d, t << 1);
                let r2 = layout.flat(l - 1, d, (t << 1) | 1);
                let r3 = layout.flat(l - 1, d + 1, t);
                let r4 = layout.flat(l - 1, d + 1, (1 << (l - 2)) | t);
                visit(&[(p00, 1.0), (p10, 1.0)], Some(r1))?;
                visit(&[(p01, 1.0), (p11, 1.0)], Some(r2))?;
                visit(&[(p00, 1.0), (p01, 1.0)], Some(r3))?;
                visit(&[(p10, 1.0), (p11, 1.0)], Some(r4))?;
            }
        }
    }
    Ok(())
}

/// Max-norm residual of all consistency equations of a state vector
/// (level-1 sums against 1, higher levels against their marginals).
pub fn consistency_residual(x: &CorrelationVector) -> f64 {
    residual_impl(x, 1.0)
}

/// Max-norm residual of the homogeneous consistency equations, the ones a
/// tangent direction (time derivative) must satisfy.
pub fn directional_consistency_residual(v: &CorrelationVector) -> f64 {
    residual_impl(v, 0.0)
}

fn residual_impl(x: &CorrelationVector, affine_rhs: f64) -> f64 {
    let mut worst = 0.0f64;
    for_each_consistency_equation(&x.layout, |lhs, rhs| {
        let mut acc = -match rhs {
            Some(idx) => x.values[idx],
            None => affine_rhs,
        };
        for &(idx, coeff) in lhs {
            acc += coeff * x.values[idx];
        }
        worst = worst.max(acc.abs());
        Ok(())
    })
    .expect("residual visitor never fails");
    worst
}

/// Sparse rows of the stacked consistency system (homogeneous part), for
/// rank computations and null-space bases. Row order matches
/// [`consistency_residual`]; entries are in `{-1, 1}`.
pub fn consistency_rows(layout: &IndexLayout) -> Vec<Vec<(usize, i64)>> {
    let mut rows = Vec::new();
    for_each_consistency_equation(layout, |lhs, rhs| {
        let mut row: Vec<(usize, i64)> =
            lhs.iter().map(|&(idx, c)| (idx, c as i64)).collect();
        if let Some(idx) = rhs {
            row.push((idx, -1));
        }
        rows.push(row);
        Ok(())
    })
    .expect("row visitor never fails");
    rows
}

/// Dimension of the affine space cut out by the consistency equations at
/// a given layout, computed from the exact rank of the stacked system.
pub fn consistent_space_dim(layout: &IndexLayout) -> usize {
    let rows = consistency_rows(layout);
    layout.len() - crate::linalg::sparse_rank(&rows, layout.len())
}

/// Solves `C x = a` for the consistency coupling matrix `C`, which is
/// possible exactly when `a1 + a2 = a3 + a4` (checked within `1e-10`).
///
/// The returned solution preserves signs: nonnegative `a` yields a
/// nonnegative `x`, strictly positive `a` yields a strictly positive `x`.
/// The kernel degree of freedom is fixed to 0 in the nonnegative case and
/// to half the largest shift keeping all components above a `1e-15`
/// margin in the strictly positive case.
pub fn solve_consistency_block(a: [f64; 4]) -> Result<[f64; 4]> {
    let defect = (a[0] + a[1]) - (a[2] + a[3]);
    if defect.abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "block right-hand side violates a1 + a2 = a3 + a4 by {defect:.3e}"
        )));
    }
    Ok(solve_block_unchecked(a))
}

/// Margin kept between lifted components and zero when a strictly
/// positive solution is requested.
const LIFT_MARGIN: f64 = 1e-15;

/// Sign-preserving particular solution plus kernel shift; see
/// [`solve_consistency_block`]. Solvability is the caller's business.
fn solve_block_unchecked(a: [f64; 4]) -> [f64; 4] {
    // Particular solutions with one zero component; both have
    // coordinates built only from sums and differences that are
    // nonnegative whenever a is.
    let x0 = if a[3] >= a[0] {
        [0.0, a[2], a[0], a[3] - a[0]]
    } else {
        [a[0] - a[3], a[1], a[3], 0.0]
    };
    let strictly_positive = a.iter().all(|&v| v > 0.0);
    let s = if strictly_positive {
        // Shifting along (1, -1, -1, 1) raises components 0 and 3 and
        // lowers 1 and 2; half the admissible headroom keeps everything
        // strictly inside.
        let headroom = (x0[1].min(x0[2]) - LIFT_MARGIN).max(0.0);
        0.5 * headroom
    } else {
        0.0
    };
    [x0[0] + s, x0[1] - s, x0[2] - s, x0[3] + s]
}

/// Extends a consistent vector of order `m` to a consistent vector of
/// order `m + 1` that marginalizes back to it. Nonnegative inputs lift to
/// nonnegative vectors and strictly positive inputs to strictly positive
/// ones. Fails when the input residual exceeds `1e-8` or `m = n`.
pub fn lift(x: &CorrelationVector) -> Result<CorrelationVector> {
    let n = x.n();
    let m = x.max_order();
    if m >= n {
        return Err(Error::InvalidInput(format!(
            "cannot lift beyond the full order (m = {m}, n = {n})"
        )));
    }
    let residual = consistency_residual(x);
    if residual > 1e-8 {
        return Err(Error::Inconsistent { residual, limit: 1e-8 });
    }

    let layout = IndexLayout::new(n, m + 1)?;
    let mut y = CorrelationVector::zeros(layout);
    y.values[..x.values.len()].copy_from_slice(&x.values);

    let l = m + 1;
    for d in 0..=(n - l) {
        for t in 0..(1u64 << (m - 1)) {
            // Right-hand side: order-m marginals of the four candidate
            // patterns. The block is solvable because x is consistent;
            // tiny defects within the residual gate are tolerated by the
            // unchecked solve.
            let a = [
                x.get(m, d, t << 1),
                x.get(m, d, (t << 1) | 1),
                x.get(m, d + 1, t),
                x.get(m, d + 1, (1 << (m - 1)) | t),
            ];
            let u = solve_block_unchecked(a);
            let base = t << 1;
            let idx00 = y.layout.flat(l, d, base);
            let idx01 = y.layout.flat(l, d, base | 1);
            let idx10 = y.layout.flat(l, d, (1 << m) | base);
            let idx11 = y.layout.flat(l, d, (1 << m) | base | 1);
            y.values[idx00] = u[0];
            y.values[idx01] = u[1];
            y.values[idx10] = u[2];
            y.values[idx11] = u[3];
        }
    }
    Ok(y)
}

/// The exact correlation dynamics: evaluates the vector field whose
/// components are computable from `y`, i.e. orders `1..=max_order-1`, or
/// all orders when `max_order = n` (the top slice then reproduces the
/// master equation itself).
///
/// The result is a [`CorrelationVector`] over the reduced layout
/// (`max_order - 1`, or `n` when the input is full). The input is assumed
/// consistent; callers that accept external data gate the residual first.
pub fn vector_field_f(
    params: &LatticeParams,
    y: &CorrelationVector,
) -> Result<CorrelationVector> {
    let n = params.n();
    if y.n() != n {
        return Err(Error::InvalidInput(format!(
            "state is for n = {}, parameters for n = {n}",
            y.n()
        )));
    }
    let max = y.max_order();
    let out_max = if max == n { n } else { max - 1 };
    if out_max == 0 {
        return Err(Error::InvalidInput(
            "order-1 input on a larger lattice leaves no computable \
             components; supply order 2 or more"
                .into(),
        ));
    }
    let layout = IndexLayout::new(n, out_max)?;
    let mut out = CorrelationVector::zeros(layout);
    for l in 1..=out_max {
        for d in 0..=(n - l) {
            for bits in 0..(1u64 << l) {
                let idx = out.layout.flat(l, d, bits);
                out.values[idx] = component_rate(params, y, l, d, bits);
            }
        }
    }
    Ok(out)
}

/// One component of the exact vector field; see [`vector_field_f`] for
/// the term structure.
#[inline]
fn component_rate(
    params: &LatticeParams,
    y: &CorrelationVector,
    l: usize,
    d: usize,
    bits: u64,
) -> f64 {
    let n = params.n();
    let top = 1u64 << (l - 1);
    let mut acc = 0.0;

    // Entry at site n-1: active only when the window touches it.
    if d + l == n {
        if bits & top != 0 {
            acc += params.alpha() * y.get(l, d, bits & !top);
        } else {
            acc -= params.alpha() * y.get(l, d, bits);
        }
    }
    // Exit at site 0: active only when the window touches it.
    if d == 0 {
        if bits & 1 == 0 {
            acc += params.beta() * y.get(l, 0, bits | 1);
        } else {
            acc -= params.beta() * y.get(l, 0, bits);
        }
    }
    // Hops across bonds inside the window.
    for j in 1..l {
        match (bits >> (j - 1)) & 0b11 {
            0b01 => acc += params.hop(d + j) * y.get(l, d, bits ^ (0b11 << (j - 1))),
            0b10 => acc -= params.hop(d + j) * y.get(l, d, bits),
            _ => {}
        }
    }
    // Hop across the left window boundary (site d+l -> d+l-1); the
    // source pattern is one site longer, so this needs d + l < n.
    if d + l < n {
        if bits & top != 0 {
            acc += params.hop(d + l) * y.get(l + 1, d, (1 << l) | (bits & !top));
        } else {
            acc -= params.hop(d + l) * y.get(l + 1, d, (1 << l) | bits);
        }
    }
    // Hop across the right window boundary (site d -> d-1).
    if d > 0 {
        if bits & 1 == 0 {
            acc += params.hop(d) * y.get(l + 1, d - 1, ((bits >> 1) << 2) | 0b10);
        } else {
            acc -= params.hop(d) * y.get(l + 1, d - 1, bits << 1);
        }
    }
    acc
}

/// The nonnegative inflow terms of one component of the vector field, in
/// a fixed order: entry, exit, one per internal bond, left-boundary hop,
/// right-boundary hop. Terms whose guard is off are absent. Used by the
/// zero-structure diagnostics: at an embedded state with
/// `y[l,d,b] = 0` and `f[l,d,b](y) = 0`, every term listed here is zero.
pub fn inflow_terms(
    params: &LatticeParams,
    y: &CorrelationVector,
    l: usize,
    d: usize,
    bits: u64,
) -> Vec<f64> {
    let n = params.n();
    let top = 1u64 << (l - 1);
    let mut terms = Vec::new();
    if d + l == n && bits & top != 0 {
        terms.push(params.alpha() * y.get(l, d, bits & !top));
    }
    if d == 0 && bits & 1 == 0 {
        terms.push(params.beta() * y.get(l, 0, bits | 1));
    }
    for j in 1..l {
        if (bits >> (j - 1)) & 0b11 == 0b01 {
            terms.push(params.hop(d + j) * y.get(l, d, bits ^ (0b11 << (j - 1))));
        }
    }
    if d + l < n && bits & top != 0 {
        terms.push(params.hop(d + l) * y.get(l + 1, d, (1 << l) | (bits & !top)));
    }
    if d > 0 && bits & 1 == 0 {
        terms.push(params.hop(d) * y.get(l + 1, d - 1, ((bits >> 1) << 2) | 0b10));
    }
    terms
}

/// Outcome of a componentwise lower-bound check `v >= -c * x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    /// True when every checked component satisfied the bound.
    pub ok: bool,
    /// First violating index, if any.
    pub witness: Option<(usize, usize, BitPattern)>,
    /// Smallest value of `v[l,d,b] + c * x[l,d,b]` over the checked
    /// components (negative exactly when `ok` is false, up to the slack).
    pub margin: f64,
}

/// Checks the derivative lower bound `v[l,d,b] >= -c * x[l,d,b] - slack`
/// componentwise, where `v` is a derivative over a sub-layout of `x`.
pub(crate) fn lower_bound_report(
    total_rate: f64,
    x: &CorrelationVector,
    v: &CorrelationVector,
    slack: f64,
) -> LowerBoundReport {
    let mut report =
        LowerBoundReport { ok: true, witness: None, margin: f64::INFINITY };
    for (l, d, b) in v.layout().iter() {
        let xv = x.get(l, d, b.bits());
        let dv = v.get(l, d, b.bits());
        let margin = dv + total_rate * xv;
        if margin < report.margin {
            report.margin = margin;
        }
        if margin < -slack && report.ok {
            report.ok = false;
            report.witness = Some((l, d, b));
        }
    }
    report
}

/// Verifies the inflow/outflow structure bound for the exact dynamics:
/// every component of `f` at `y` satisfies
/// `f[l,d,b](y) >= -c * y[l,d,b] - 1e-12`, since the outflow of a window
/// pattern is at most its probability times the total rate `c`.
pub fn lower_bound_check(
    params: &LatticeParams,
    y: &CorrelationVector,
) -> Result<LowerBoundReport> {
    let f = vector_field_f(params, y)?;
    Ok(lower_bound_report(params.total_rate(), y, &f, 1e-12))
}
