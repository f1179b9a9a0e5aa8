//! Exact master equation of the TASEP on all `2^n` occupation
//! configurations.
//!
//! A configuration is encoded as an integer whose bit `i` is the
//! occupation of site `i`. The generator `A` acts by `dz/dt = A z` where
//! `z` is the probability vector over configurations; each column holds
//! the outgoing rates of one configuration (entry at site `n-1`, hops
//! `i -> i-1`, exit at site `0`) and the diagonal makes every column sum
//! to zero.

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use crate::linalg::{gmres, GmresOptions};
use crate::ode::{dopri5, Tolerances};
use nalgebra::{DMatrix, DVector};

/// Largest lattice size for master-equation paths (`2^20` states).
pub const MAX_MASTER_N: usize = 20;

/// Largest lattice size solved with a dense LU factorization; beyond it
/// the stationary solve falls back to restarted GMRES.
pub const MAX_DENSE_N: usize = 12;

/// Probability distribution over the `2^n` occupation configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterState {
    n: usize,
    z: Vec<f64>,
}

impl MasterState {
    /// Wraps a probability vector; the mass must be 1 within `1e-12` and
    /// no component may lie below `-1e-12`.
    pub fn new(n: usize, z: Vec<f64>) -> Result<Self> {
        if n < 1 || n > MAX_MASTER_N {
            return Err(Error::InvalidInput(format!(
                "master state needs 1 <= n <= {MAX_MASTER_N}, got {n}"
            )));
        }
        if z.len() != 1usize << n {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, expected 2^{n}",
                z.len()
            )));
        }
        let sum: f64 = z.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "probability mass {sum} is not 1 within 1e-12"
            )));
        }
        if let Some(&bad) = z.iter().find(|&&v| v < -1e-12) {
            return Err(Error::InvalidInput(format!(
                "negative probability {bad} below -1e-12"
            )));
        }
        Ok(Self { n, z })
    }

    /// Uniform distribution over all configurations.
    pub fn uniform(n: usize) -> Result<Self> {
        let dim = 1usize
            .checked_shl(n as u32)
            .filter(|_| (1..=MAX_MASTER_N).contains(&n))
            .ok_or_else(|| {
                Error::InvalidInput(format!("n = {n} outside 1..={MAX_MASTER_N}"))
            })?;
        Ok(Self { n, z: vec![1.0 / dim as f64; dim] })
    }

    /// Point mass on one configuration (bit `i` = occupation of site `i`).
    pub fn point_mass(n: usize, config: u64) -> Result<Self> {
        if n < 1 || n > MAX_MASTER_N {
            return Err(Error::InvalidInput(format!(
                "n = {n} outside 1..={MAX_MASTER_N}"
            )));
        }
        let dim = 1usize << n;
        if config >= dim as u64 {
            return Err(Error::InvalidInput(format!(
                "configuration {config} does not fit {n} sites"
            )));
        }
        let mut z = vec![0.0; dim];
        z[config as usize] = 1.0;
        Ok(Self { n, z })
    }

    /// Product-Bernoulli distribution: site `i` is occupied with
    /// probability `probs[i]`, independently across sites. Such states
    /// carry no correlations, which makes them the exactness witnesses of
    /// the cluster approximation.
    pub fn product_bernoulli(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        if n < 1 || n > MAX_MASTER_N {
            return Err(Error::InvalidInput(format!(
                "n = {n} outside 1..={MAX_MASTER_N}"
            )));
        }
        if let Some(&p) = probs.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidInput(format!(
                "Bernoulli probability {p} outside [0, 1]"
            )));
        }
        let dim = 1usize << n;
        let mut z = vec![0.0; dim];
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = probs
                .iter()
                .enumerate()
                .map(|(i, &p)| if (c >> i) & 1 == 1 { p } else { 1.0 - p })
                .product();
        }
        Ok(Self { n, z })
    }

    /// Uniformly-weighted random point of the probability simplex
    /// (Dirichlet(1,...,1) via normalized exponentials).
    pub fn random_simplex<R: rand::Rng + ?Sized>(
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n < 1 || n > MAX_MASTER_N {
            return Err(Error::InvalidInput(format!(
                "n = {n} outside 1..={MAX_MASTER_N}"
            )));
        }
        let dim = 1usize << n;
        let mut z: Vec<f64> = (0..dim)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = z.iter().sum();
        for v in &mut z {
            *v /= total;
        }
        Ok(Self { n, z })
    }

    /// Builds without the simplex checks; for solver-internal states whose
    /// drift is monitored separately.
    pub(crate) fn from_raw(n: usize, z: Vec<f64>) -> Self {
        debug_assert_eq!(z.len(), 1usize << n);
        Self { n, z }
    }

    /// Lattice size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Probability vector, indexed by configuration.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Total probability mass.
    pub fn mass(&self) -> f64 {
        self.z.iter().sum()
    }

    /// Smallest component.
    pub fn min_component(&self) -> f64 {
        self.z.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Occupation probability of one site.
    pub fn density(&self, site: usize) -> f64 {
        debug_assert!(site < self.n);
        self.z
            .iter()
            .enumerate()
            .filter(|(c, _)| (c >> site) & 1 == 1)
            .map(|(_, &p)| p)
            .sum()
    }

    /// Per-site occupation probabilities, indexed by site `0..n`.
    pub fn density_profile(&self) -> Vec<f64> {
        (0..self.n).map(|s| self.density(s)).collect()
    }
}

/// Sparse generator of the master equation in compressed-column form.
/// Immutable after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

/// Enumerates the outgoing transitions of a configuration: the target
/// configuration and rate of every enabled event (entry, hops, exit).
fn outgoing(
    params: &LatticeParams,
    config: u64,
) -> impl Iterator<Item = (u64, f64)> + '_ {
    let n = params.n();
    let entry = ((config >> (n - 1)) & 1 == 0)
        .then(|| (config | (1u64 << (n - 1)), params.alpha()));
    let exit = (config & 1 == 1).then(|| (config & !1u64, params.beta()));
    let hops = (1..n).filter_map(move |i| {
        let pair = (config >> (i - 1)) & 0b11;
        (pair == 0b10).then(|| (config ^ (0b11u64 << (i - 1)), params.hop(i)))
    });
    entry.into_iter().chain(hops).chain(exit)
}

/// Builds the generator from lattice parameters. Fails for `n` beyond
/// [`MAX_MASTER_N`].
pub fn build_generator(params: &LatticeParams) -> Result<GeneratorMatrix> {
    let n = params.n();
    if n > MAX_MASTER_N {
        return Err(Error::InvalidInput(format!(
            "master equation supports n <= {MAX_MASTER_N}, got {n}"
        )));
    }
    let dim = 1usize << n;
    let mut col_ptr = Vec::with_capacity(dim + 1);
    let mut row_idx = Vec::new();
    let mut vals = Vec::new();
    col_ptr.push(0);

    let mut column: Vec<(usize, f64)> = Vec::with_capacity(n + 2);
    for c in 0..dim as u64 {
        column.clear();
        let mut total = 0.0;
        for (target, rate) in outgoing(params, c) {
            column.push((target as usize, rate));
            total += rate;
        }
        column.push((c as usize, -total));
        column.sort_unstable_by_key(|&(r, _)| r);
        for &(r, v) in &column {
            row_idx.push(r);
            vals.push(v);
        }
        col_ptr.push(row_idx.len());
    }
    Ok(GeneratorMatrix { n, dim, col_ptr, row_idx, vals })
}

impl GeneratorMatrix {
    /// Lattice size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of configurations (`2^n`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        y.fill(0.0);
        for col in 0..self.dim {
            let xc = x[col];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                y[self.row_idx[k]] += self.vals[k] * xc;
            }
        }
    }

    /// All stored entries as `(row, column, value)` triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |col| {
            (self.col_ptr[col]..self.col_ptr[col + 1])
                .map(move |k| (self.row_idx[k], col, self.vals[k]))
        })
    }

    /// Value at `(row, col)`; zero if not stored.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()]
            .binary_search(&row)
        {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Dense copy; intended for small `n` (oracles and the LU stationary
    /// path).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            a[(r, c)] = v;
        }
        a
    }

    /// Largest absolute column sum; zero for a well-formed generator.
    pub fn max_column_sum(&self) -> f64 {
        (0..self.dim)
            .map(|col| {
                (self.col_ptr[col]..self.col_ptr[col + 1])
                    .map(|k| self.vals[k])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Integrates the master equation from `z0` over a time span `t`.
/// Probability mass is conserved by the dynamics and monitored, not
/// projected.
pub fn evolve_master(
    a: &GeneratorMatrix,
    z0: &MasterState,
    t: f64,
    tol: Tolerances,
) -> Result<MasterState> {
    if z0.n() != a.n() {
        return Err(Error::InvalidInput(format!(
            "state is for n = {} but generator for n = {}",
            z0.n(),
            a.n()
        )));
    }
    let z = dopri5(
        |_t, y, dy| a.apply(y, dy),
        0.0,
        z0.z(),
        t,
        tol,
        |_, _| Ok(()),
    )?;
    Ok(MasterState::from_raw(a.n(), z))
}

/// Stationary distribution of the generator: the unique probability
/// vector with `A z = 0`.
///
/// Solves the bordered system in which row 0 of `A` is replaced by the
/// all-ones row (right-hand side `e_0`): dense LU up to `n = 12`,
/// restarted GMRES with a Jacobi preconditioner above (logged as a
/// warning, since the iterative path is slower and trades determinism of
/// runtime, not of the result).
pub fn stationary_master(a: &GeneratorMatrix) -> Result<MasterState> {
    let z = if a.n() <= MAX_DENSE_N {
        stationary_dense(a)?
    } else {
        log::warn!(
            "stationary solve for n = {} uses restarted GMRES; expect \
             slower convergence than the dense path",
            a.n()
        );
        stationary_gmres(a)?
    };

    // Certify the solution before handing it out.
    let mut resid = vec![0.0; a.dim()];
    a.apply(&z, &mut resid);
    let rmax = resid.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
    if rmax >= 1e-12 {
        return Err(Error::NonConvergence {
            what: "stationary distribution residual".into(),
            residual: rmax,
        });
    }
    let state = MasterState::from_raw(a.n(), z);
    if state.min_component() <= 0.0 {
        return Err(Error::Singular(
            "stationary distribution is not strictly positive; \
             the generator is malformed"
                .into(),
        ));
    }
    Ok(state)
}

fn stationary_dense(a: &GeneratorMatrix) -> Result<Vec<f64>> {
    let mut b = a.to_dense();
    for col in 0..a.dim() {
        b[(0, col)] = 1.0;
    }
    let mut rhs = DVector::zeros(a.dim());
    rhs[0] = 1.0;
    let lu = b.lu();
    let z = lu.solve(&rhs).ok_or_else(|| {
        Error::Singular("bordered stationary system is singular".into())
    })?;
    Ok(z.as_slice().to_vec())
}

fn stationary_gmres(a: &GeneratorMatrix) -> Result<Vec<f64>> {
    let dim = a.dim();
    // Jacobi preconditioner of the bordered operator: diagonal of A with
    // row 0 replaced by ones.
    let mut inv_diag = vec![0.0; dim];
    inv_diag[0] = 1.0;
    for c in 1..dim {
        let d = a.get(c, c);
        debug_assert!(d < 0.0, "generator diagonal must be negative");
        inv_diag[c] = 1.0 / d;
    }
    let apply = |u: &[f64], y: &mut [f64]| {
        // Right-preconditioned bordered operator: y = B diag(1/B_ii) u.
        let x: Vec<f64> =
            u.iter().zip(&inv_diag).map(|(ui, di)| ui * di).collect();
        a.apply(&x, y);
        y[0] = x.iter().sum();
    };
    let mut rhs = vec![0.0; dim];
    rhs[0] = 1.0;
    let start = vec![1.0 / dim as f64; dim];
    let (u, _resid, _iters) = gmres(
        apply,
        &rhs,
        &start,
        GmresOptions { restart: 80, max_restarts: 2000, tol: 1e-14 },
    )?;
    Ok(u.iter().zip(&inv_diag).map(|(ui, di)| ui * di).collect())
}

/// Expected flux of particles leaving the lattice: `beta` times the
/// occupation probability of site 0.
pub fn production_rate(params: &LatticeParams, z: &MasterState) -> f64 {
    params.beta() * z.density(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_params(n: usize) -> LatticeParams {
        LatticeParams::uniform(n, 1.0, 1.0, 1.0).unwrap()
    }

    /// Independent enumeration of the transition rules on boolean site
    /// vectors, used as an oracle for the bit-twiddling construction.
    fn oracle_rates(params: &LatticeParams, from: usize, to: usize) -> f64 {
        let n = params.n();
        let site = |c: usize, i: usize| (c >> i) & 1 == 1;
        let mut rate = 0.0;
        // entry at site n-1
        if !site(from, n - 1) && to == from + (1 << (n - 1)) {
            rate += params.alpha();
        }
        // exit at site 0
        if site(from, 0) && to + 1 == from {
            rate += params.beta();
        }
        // hops i -> i-1
        for i in 1..n {
            if site(from, i) && !site(from, i - 1) {
                let mut v: Vec<bool> = (0..n).map(|j| site(from, j)).collect();
                v[i] = false;
                v[i - 1] = true;
                let target = v
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (j, &b)| acc | ((b as usize) << j));
                if target == to {
                    rate += params.hop(i);
                }
            }
        }
        rate
    }

    #[test]
    fn single_site_generator_is_the_two_state_chain() {
        let params = LatticeParams::new(1, 0.7, 0.3, vec![]).unwrap();
        let a = build_generator(&params).unwrap();
        let d = a.to_dense();
        assert_eq!(d[(0, 0)], -0.7);
        assert_eq!(d[(1, 0)], 0.7);
        assert_eq!(d[(0, 1)], 0.3);
        assert_eq!(d[(1, 1)], -0.3);
    }

    #[test]
    fn three_site_edges_match_the_transition_rules() {
        let params = LatticeParams::new(3, 0.5, 0.25, vec![2.0, 4.0]).unwrap();
        let a = build_generator(&params).unwrap();
        // 011 gains a particle at site 2 with rate alpha...
        assert_eq!(a.get(0b111, 0b011), params.alpha());
        // ...and loses the site-0 particle with rate beta.
        assert_eq!(a.get(0b010, 0b011), params.beta());
        // 010 hops 1 -> 0 with rate h_1; 100 hops 2 -> 1 with rate h_2.
        assert_eq!(a.get(0b001, 0b010), params.hop(1));
        assert_eq!(a.get(0b010, 0b100), params.hop(2));
        // No entry out of 111; no exit out of 110.
        assert_eq!(a.get(0b110, 0b111), params.beta());
        assert_eq!(a.get(0b100, 0b110), 0.0);
    }

    #[test]
    fn generator_matches_rule_enumeration_oracle() {
        for (n, alpha, beta, h) in [
            (2usize, 1.0, 1.0, vec![1.0]),
            (4, 0.3, 0.9, vec![1.5, 0.4, 2.2]),
        ] {
            let params = LatticeParams::new(n, alpha, beta, h).unwrap();
            let a = build_generator(&params).unwrap();
            let dim = 1usize << n;
            for from in 0..dim {
                for to in 0..dim {
                    if from == to {
                        continue;
                    }
                    assert!(
                        (a.get(to, from) - oracle_rates(&params, from, to)).abs()
                            < 1e-15,
                        "mismatch at {from:0b} -> {to:0b}"
                    );
                }
            }
        }
    }

    #[test]
    fn columns_sum_to_zero_with_bounded_fanout() {
        let params = LatticeParams::new(5, 0.3, 1.7, vec![0.2, 3.0, 1.1, 0.7])
            .unwrap();
        let a = build_generator(&params).unwrap();
        assert!(a.max_column_sum() < 1e-13);
        for col in 0..a.dim() {
            let off_diag = a
                .triplets()
                .filter(|&(r, c, _)| c == col && r != col)
                .count();
            assert!(off_diag <= params.n() + 1);
        }
        for (r, c, v) in a.triplets() {
            if r == c {
                assert!(v <= 0.0);
            } else {
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn two_state_chain_relaxes_to_half() {
        let params = LatticeParams::new(1, 1.0, 1.0, vec![]).unwrap();
        let a = build_generator(&params).unwrap();
        let z0 = MasterState::point_mass(1, 0).unwrap();
        let z = evolve_master(&a, &z0, 40.0, Tolerances::default()).unwrap();
        assert!((z.z()[0] - 0.5).abs() < 1e-9);
        assert!((z.z()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_time_evolution_is_identity() {
        let params = uniform_params(4);
        let a = build_generator(&params).unwrap();
        let z0 = MasterState::uniform(4).unwrap();
        let z = evolve_master(&a, &z0, 0.0, Tolerances::default()).unwrap();
        assert_eq!(z.z(), z0.z());
    }

    #[test]
    fn evolution_matches_matrix_exponential_oracle() {
        let params = uniform_params(3);
        let a = build_generator(&params).unwrap();
        let z0 = MasterState::point_mass(3, 0b101).unwrap();
        let z = evolve_master(&a, &z0, 1.0, Tolerances::default()).unwrap();
        let expected = (a.to_dense() * 1.0).exp()
            * DVector::from_row_slice(z0.z());
        for c in 0..8 {
            assert!(
                (z.z()[c] - expected[c]).abs() < 1e-8,
                "config {c}: {} vs {}",
                z.z()[c],
                expected[c]
            );
        }
        assert!((z.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stationary_single_site_is_detailed_balance() {
        let params = LatticeParams::new(1, 0.4, 1.2, vec![]).unwrap();
        let a = build_generator(&params).unwrap();
        let z = stationary_master(&a).unwrap();
        assert!((z.z()[0] - 1.2 / 1.6).abs() < 1e-14);
        assert!((z.z()[1] - 0.4 / 1.6).abs() < 1e-14);
    }

    #[test]
    fn stationary_two_sites_matches_hand_solution() {
        let (alpha, beta, h) = (0.7, 0.4, 1.3);
        let params = LatticeParams::new(2, alpha, beta, vec![h]).unwrap();
        let a = build_generator(&params).unwrap();
        let z = stationary_master(&a).unwrap();
        // Null-space solution of the 4x4 system, normalized.
        let raw = [
            1.0,
            alpha / beta,
            alpha * (alpha + beta) / (beta * h),
            alpha * alpha / (beta * beta),
        ];
        let total: f64 = raw.iter().sum();
        for c in 0..4 {
            assert!(
                (z.z()[c] - raw[c] / total).abs() < 1e-13,
                "config {c}"
            );
        }
    }

    #[test]
    fn stationary_three_sites_agrees_with_long_time_limit() {
        let params = uniform_params(3);
        let a = build_generator(&params).unwrap();
        let z_star = stationary_master(&a).unwrap();
        assert!(z_star.min_component() > 0.0);
        let z0 = MasterState::point_mass(3, 0).unwrap();
        let z_long = evolve_master(
            &a,
            &z0,
            60.0,
            Tolerances { rtol: 1e-10, atol: 1e-12 },
        )
        .unwrap();
        for c in 0..8 {
            assert!((z_star.z()[c] - z_long.z()[c]).abs() < 1e-8);
        }
        // Evolving from the stationary state stays put.
        let z_again =
            evolve_master(&a, &z_star, 7.0, Tolerances::default()).unwrap();
        for c in 0..8 {
            assert!((z_star.z()[c] - z_again.z()[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn gmres_path_agrees_with_dense_path() {
        let params = LatticeParams::new(5, 0.8, 0.6, vec![1.0, 0.5, 2.0, 1.5])
            .unwrap();
        let a = build_generator(&params).unwrap();
        let dense = stationary_dense(&a).unwrap();
        let iterative = stationary_gmres(&a).unwrap();
        for c in 0..a.dim() {
            assert!(
                (dense[c] - iterative[c]).abs() < 1e-11,
                "config {c}: {} vs {}",
                dense[c],
                iterative[c]
            );
        }
    }

    #[test]
    fn production_rate_reads_site_zero() {
        let params = LatticeParams::new(1, 0.4, 1.2, vec![]).unwrap();
        let a = build_generator(&params).unwrap();
        let z = stationary_master(&a).unwrap();
        let pr = production_rate(&params, &z);
        assert!((pr - 1.2 * 0.4 / 1.6).abs() < 1e-13);

        let empty = MasterState::point_mass(3, 0).unwrap();
        let params3 = uniform_params(3);
        assert_eq!(production_rate(&params3, &empty), 0.0);

        let z3 = stationary_master(&build_generator(&params3).unwrap()).unwrap();
        let by_configs: f64 = [0b001, 0b011, 0b101, 0b111]
            .iter()
            .map(|&c| z3.z()[c])
            .sum();
        assert!(
            (production_rate(&params3, &z3) - params3.beta() * by_configs).abs()
                < 1e-14
        );
    }

    #[test]
    fn conservation_along_trajectories() {
        let params = LatticeParams::new(4, 0.9, 0.2, vec![0.7, 1.8, 1.1])
            .unwrap();
        let a = build_generator(&params).unwrap();
        let z0 = MasterState::point_mass(4, 0b0110).unwrap();
        let mut worst: f64 = 0.0;
        let _ = dopri5(
            |_t, y, dy| a.apply(y, dy),
            0.0,
            z0.z(),
            15.0,
            Tolerances::default(),
            |_t, y| {
                let mass: f64 = y.iter().sum();
                worst = worst.max((mass - 1.0).abs());
                Ok(())
            },
        )
        .unwrap();
        assert!(worst < 1e-10, "mass drift {worst}");
    }

    #[test]
    fn positivity_along_trajectories_from_the_boundary() {
        let params = uniform_params(4);
        let a = build_generator(&params).unwrap();
        let z0 = MasterState::point_mass(4, 0).unwrap();
        let z = evolve_master(&a, &z0, 0.35, Tolerances::default()).unwrap();
        assert!(
            z.min_component() > 0.0,
            "master flow must enter the simplex interior"
        );
    }

    #[test]
    fn state_validation_rejects_bad_vectors() {
        assert!(MasterState::new(2, vec![0.5, 0.5]).is_err()); // wrong len
        assert!(MasterState::new(2, vec![0.7, 0.2, 0.2, 0.0]).is_err()); // mass
        assert!(MasterState::new(2, vec![0.5, 0.6, -0.1, 0.0]).is_err()); // neg
        assert!(MasterState::new(2, vec![0.25; 4]).is_ok());
        assert!(build_generator(&uniform_params(3)).is_ok());
    }
}
