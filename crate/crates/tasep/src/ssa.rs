//! Exact stochastic simulation of the exclusion process, used as an
//! independent Monte Carlo oracle for densities and short-range
//! correlations.
//!
//! The direct method is used: at each step the enabled events (entry at
//! the empty left end, hops across `10` bonds, exit from the occupied
//! right end) are scanned linearly, an exponential waiting time is drawn
//! from the total rate, and one event is selected in proportion to its
//! rate. Observables are time averages over a measurement window after a
//! burn-in period, replicated across independent RNG streams for error
//! bars.

use crate::error::{Error, Result};
use crate::lattice::LatticeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Configuration of one simulation run.
#[derive(Debug, Clone)]
pub struct SsaConfig {
    /// Lattice and rates.
    pub params: LatticeParams,
    /// Number of independent replicas (at least 1; at least 2 for
    /// nonzero standard errors).
    pub n_samples: usize,
    /// Burn-in time before measurement starts.
    pub t_burn: f64,
    /// Length of the measurement window.
    pub t_measure: f64,
    /// Base RNG seed; replica `k` uses stream `k` of this seed.
    pub seed: u64,
}

impl SsaConfig {
    fn validated(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput(
                "n_samples must be at least 1".into(),
            ));
        }
        if !(self.t_burn.is_finite() && self.t_burn >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "burn-in time {} must be nonnegative",
                self.t_burn
            )));
        }
        if !(self.t_measure.is_finite() && self.t_measure > 0.0) {
            return Err(Error::InvalidInput(format!(
                "measurement window {} must be positive",
                self.t_measure
            )));
        }
        Ok(())
    }
}

/// Monte Carlo estimates with per-observable standard errors (sample
/// standard deviation across replicas divided by sqrt of the replica
/// count; zero when only one replica ran).
#[derive(Debug, Clone, PartialEq)]
pub struct SsaEstimate {
    /// Mean occupation per site, indexed by site.
    pub density: Vec<f64>,
    /// Standard error of each density.
    pub density_se: Vec<f64>,
    /// Adjacent-pair occupation `P(site d+1 = 1 and site d = 1)` for
    /// `d = 0..n-1`.
    pub pair: Vec<f64>,
    /// Standard error of each pair estimate.
    pub pair_se: Vec<f64>,
    /// Exit events per unit time over the measurement window (the
    /// particle current through the right boundary).
    pub flux: f64,
    /// Standard error of the flux.
    pub flux_se: f64,
}

/// Per-replica time averages.
struct ReplicaStats {
    density: Vec<f64>,
    pair: Vec<f64>,
    flux: f64,
}

/// Runs one replica from the empty lattice with its own RNG stream.
fn run_replica(config: &SsaConfig, replica: u64) -> ReplicaStats {
    let params = &config.params;
    let n = params.n();
    let alpha = params.alpha();
    let beta = params.beta();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replica);

    let t_start = config.t_burn;
    let t_end = config.t_burn + config.t_measure;
    let mut state = 0u64;
    let mut t = 0.0f64;
    let mut occupied_time = vec![0.0f64; n];
    let mut pair_time = vec![0.0f64; n.saturating_sub(1)];
    let mut exits = 0u64;

    // Event table: (rate, next state, is exit). Rebuilt per step; the
    // lattice has at most n + 1 enabled events.
    let mut events: Vec<(f64, u64, bool)> = Vec::with_capacity(n + 1);

    while t < t_end {
        events.clear();
        if state & (1 << (n - 1)) == 0 {
            events.push((alpha, state | (1 << (n - 1)), false));
        }
        for i in 1..n {
            if (state >> (i - 1)) & 0b11 == 0b10 {
                events.push((params.hop(i), state ^ (0b11 << (i - 1)), false));
            }
        }
        if state & 1 == 1 {
            events.push((beta, state & !1, true));
        }
        let total: f64 = events.iter().map(|e| e.0).sum();
        debug_assert!(total > 0.0, "some event is always enabled");

        // Exponential waiting time with a strictly positive uniform.
        let u: f64 = 1.0 - rng.random::<f64>();
        let dt = -u.ln() / total;
        let t_next = t + dt;

        // Accumulate dwell time of the current state inside the window.
        let overlap = t_next.min(t_end) - t.max(t_start);
        if overlap > 0.0 {
            for d in 0..n {
                if state & (1 << d) != 0 {
                    occupied_time[d] += overlap;
                }
            }
            for d in 0..n - 1 {
                if (state >> d) & 0b11 == 0b11 {
                    pair_time[d] += overlap;
                }
            }
        }

        // Select the event in proportion to its rate.
        let mut target = rng.random::<f64>() * total;
        let mut chosen = events.len() - 1;
        for (k, e) in events.iter().enumerate() {
            target -= e.0;
            if target < 0.0 {
                chosen = k;
                break;
            }
        }
        let (_, next, is_exit) = events[chosen];
        if is_exit && t_next >= t_start && t_next < t_end {
            exits += 1;
        }
        state = next;
        t = t_next;
    }

    let w = config.t_measure;
    ReplicaStats {
        density: occupied_time.iter().map(|v| v / w).collect(),
        pair: pair_time.iter().map(|v| v / w).collect(),
        flux: exits as f64 / w,
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Runs the configured number of replicas in parallel and aggregates
/// time-averaged observables. Deterministic for a fixed config and seed:
/// each replica owns stream `k` of the base seed and the aggregation
/// order is fixed.
pub fn simulate(config: &SsaConfig) -> Result<SsaEstimate> {
    config.validated()?;
    let n = config.params.n();
    let stats: Vec<ReplicaStats> = (0..config.n_samples as u64)
        .into_par_iter()
        .map(|k| run_replica(config, k))
        .collect();

    let mut density = Vec::with_capacity(n);
    let mut density_se = Vec::with_capacity(n);
    for d in 0..n {
        let samples: Vec<f64> = stats.iter().map(|s| s.density[d]).collect();
        let (m, se) = mean_and_se(&samples);
        density.push(m);
        density_se.push(se);
    }
    let mut pair = Vec::with_capacity(n.saturating_sub(1));
    let mut pair_se = Vec::with_capacity(n.saturating_sub(1));
    for d in 0..n.saturating_sub(1) {
        let samples: Vec<f64> = stats.iter().map(|s| s.pair[d]).collect();
        let (m, se) = mean_and_se(&samples);
        pair.push(m);
        pair_se.push(se);
    }
    let flux_samples: Vec<f64> = stats.iter().map(|s| s.flux).collect();
    let (flux, flux_se) = mean_and_se(&flux_samples);

    Ok(SsaEstimate { density, density_se, pair, pair_se, flux, flux_se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::{build_generator, stationary_master};

    fn config(
        n: usize,
        alpha: f64,
        beta: f64,
        h: f64,
        samples: usize,
        seed: u64,
    ) -> SsaConfig {
        let params = LatticeParams::uniform(n, alpha, beta, h).unwrap();
        let c = params.total_rate();
        SsaConfig {
            params,
            n_samples: samples,
            t_burn: 100.0 / c,
            t_measure: 2000.0 / c,
            seed,
        }
    }

    #[test]
    fn estimates_are_deterministic_under_a_fixed_seed() {
        let cfg = config(4, 0.7, 1.2, 1.0, 8, 42);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&config(4, 0.7, 1.2, 1.0, 8, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_state_chain_balances_entry_and_exit() {
        let est = simulate(&config(1, 1.0, 1.0, 1.0, 16, 7)).unwrap();
        assert!(est.density_se[0] > 0.0);
        assert!(
            (est.density[0] - 0.5).abs() < 3.0 * est.density_se[0],
            "density {} se {}",
            est.density[0],
            est.density_se[0]
        );
    }

    #[test]
    fn densities_match_the_stationary_distribution() {
        let cfg = config(3, 1.0, 1.0, 1.0, 24, 11);
        let est = simulate(&cfg).unwrap();
        let a = build_generator(&cfg.params).unwrap();
        let z = stationary_master(&a).unwrap();
        let exact = z.density_profile();
        for d in 0..3 {
            let diff = (est.density[d] - exact[d]).abs();
            assert!(
                diff < 3.0 * est.density_se[d].max(1e-4),
                "site {d}: estimate {} vs exact {} (se {})",
                est.density[d],
                exact[d],
                est.density_se[d]
            );
        }
    }

    #[test]
    fn pair_occupations_match_the_stationary_marginals() {
        let cfg = config(3, 0.8, 0.6, 1.0, 24, 13);
        let est = simulate(&cfg).unwrap();
        let a = build_generator(&cfg.params).unwrap();
        let z = stationary_master(&a).unwrap();
        let x = crate::correlations::embed(&z, 2).unwrap();
        for d in 0..2 {
            let exact = x.get(2, d, 0b11);
            let diff = (est.pair[d] - exact).abs();
            assert!(
                diff < 4.0 * est.pair_se[d].max(1e-4),
                "pair {d}: estimate {} vs exact {exact}",
                est.pair[d]
            );
        }
    }

    #[test]
    fn flux_bookkeeping_matches_the_exit_rate() {
        let cfg = config(3, 1.0, 1.0, 1.0, 24, 17);
        let est = simulate(&cfg).unwrap();
        let expected = cfg.params.beta() * est.density[0];
        let sigma = est.flux_se + cfg.params.beta() * est.density_se[0];
        assert!(
            (est.flux - expected).abs() < 3.0 * sigma,
            "flux {} vs beta * rho_0 = {expected} (sigma {sigma})",
            est.flux
        );
    }

    #[test]
    fn estimates_stay_in_range() {
        let est = simulate(&config(5, 0.4, 0.9, 1.3, 8, 19)).unwrap();
        for v in est.density.iter().chain(&est.pair) {
            assert!((0.0..=1.0).contains(v));
        }
        for se in est.density_se.iter().chain(&est.pair_se) {
            assert!(*se >= 0.0);
        }
        assert!(est.flux >= 0.0);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let params = LatticeParams::uniform(3, 1.0, 1.0, 1.0).unwrap();
        let base = SsaConfig {
            params,
            n_samples: 4,
            t_burn: 1.0,
            t_measure: 10.0,
            seed: 0,
        };
        let mut bad = base.clone();
        bad.n_samples = 0;
        assert!(simulate(&bad).is_err());
        let mut bad = base.clone();
        bad.t_measure = 0.0;
        assert!(simulate(&bad).is_err());
        let mut bad = base;
        bad.t_burn = -1.0;
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn single_replica_reports_zero_standard_errors() {
        let est = simulate(&config(2, 1.0, 1.0, 1.0, 1, 5)).unwrap();
        assert!(est.density_se.iter().all(|&v| v == 0.0));
        assert_eq!(est.flux_se, 0.0);
    }
}
