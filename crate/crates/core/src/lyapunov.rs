//! Lyapunov exponent estimation.
//!
//! `γ(E) = lim (1/n) E ln‖T_[0,n](E)‖`. The Monte Carlo estimator averages
//! over independent windows whose seeds are derived from a master seed and
//! the sample index; the per-sample values are gathered in index order
//! before reduction, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_potential, Distribution, PotentialWindow};
use crate::rng;
use crate::transfer::{log_norm, transfer_product, transfer_product_iter, DetRecurrence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub energy: f64,
    pub n: usize,
    pub m: usize,
    /// Nats per site.
    pub gamma_hat: f64,
    /// Zero for single-trajectory estimates, which carry no error bar.
    pub stderr: f64,
    pub method: Method,
}

impl LyapunovEstimate {
    pub fn has_stderr(&self) -> bool {
        self.method == Method::Mc
    }
}

/// Site value stream of the `index`-th Monte Carlo window on `[a, b]`.
fn window_values(dist: &Distribution, seed: u64, a: i64, b: i64) -> impl Iterator<Item = f64> + '_ {
    (a..=b).map(move |site| dist.inverse_cdf(rng::site_uniform(seed, site)))
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Per-window values `ln‖T_[0,n](E)‖` for each energy; outer index is the
/// sample, inner the energy.
fn sample_log_norms(dist: &Distribution, energies: &[f64], n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..m)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive_seed(seed, i as u64);
            let values: Vec<f64> = window_values(dist, s, 0, n as i64).collect();
            energies
                .iter()
                .map(|&e| log_norm(&transfer_product_iter(values.iter().copied(), e)))
                .collect()
        })
        .collect()
}

fn check_mc_args(dist: &Distribution, n: usize, m: usize) -> Result<()> {
    dist.validate()?;
    if n < 1 {
        return Err(Error::param("window length n must be at least 1"));
    }
    if m < 2 {
        return Err(Error::param("Monte Carlo needs m >= 2 samples"));
    }
    Ok(())
}

/// `γ̂ = (1/(n+1)) · mean ln‖T_[0,n]‖` over `m` independent windows.
pub fn estimate_gamma_mc(dist: &Distribution, energy: f64, n: usize, m: usize, seed: u64) -> Result<LyapunovEstimate> {
    check_mc_args(dist, n, m)?;
    let per_sample: Vec<f64> = sample_log_norms(dist, &[energy], n, m, seed)
        .into_iter()
        .map(|v| v[0])
        .collect();
    let (mean, se) = mean_and_stderr(&per_sample);
    let len = (n + 1) as f64;
    Ok(LyapunovEstimate {
        energy,
        n,
        m,
        gamma_hat: mean / len,
        stderr: se / len,
        method: Method::Mc,
    })
}

/// Same estimator built from `ln|P_[0,n]|` instead of the matrix norm.
/// Windows with a vanishing determinant are rejected as an error since the
/// mean would be `-∞`.
pub fn estimate_gamma_det_mc(dist: &Distribution, energy: f64, n: usize, m: usize, seed: u64) -> Result<LyapunovEstimate> {
    check_mc_args(dist, n, m)?;
    let per_sample: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive_seed(seed, i as u64);
            let mut rec = DetRecurrence::new(energy);
            for v in window_values(dist, s, 0, n as i64) {
                rec.push(v);
            }
            rec.value().ln_abs()
        })
        .collect();
    if per_sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InsufficientSignal(format!(
            "a window has P = 0 at E = {energy}; shift the energy"
        )));
    }
    let (mean, se) = mean_and_stderr(&per_sample);
    let len = (n + 1) as f64;
    Ok(LyapunovEstimate {
        energy,
        n,
        m,
        gamma_hat: mean / len,
        stderr: se / len,
        method: Method::Mc,
    })
}

/// `(1/n) ln‖T_[1,n]‖` along one realization (n transfer steps).
pub fn estimate_gamma_trajectory(dist: &Distribution, energy: f64, n: usize, seed: u64) -> Result<LyapunovEstimate> {
    dist.validate()?;
    if n < 1 {
        return Err(Error::param("trajectory length n must be at least 1"));
    }
    let t = transfer_product_iter(window_values(dist, seed, 1, n as i64), energy);
    Ok(LyapunovEstimate {
        energy,
        n,
        m: 1,
        gamma_hat: log_norm(&t) / n as f64,
        stderr: 0.0,
        method: Method::Trajectory,
    })
}

/// Monte Carlo estimates on an energy grid with a piecewise-linear
/// interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    estimates: Vec<LyapunovEstimate>,
    nu_hat: f64,
}

impl GammaCurve {
    pub fn from_estimates(estimates: Vec<LyapunovEstimate>) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::param("gamma curve needs at least one energy"));
        }
        if estimates.windows(2).any(|w| w[0].energy >= w[1].energy) {
            return Err(Error::param("gamma curve energies must be strictly ascending"));
        }
        let nu_hat = estimates.iter().map(|e| e.gamma_hat).fold(f64::INFINITY, f64::min);
        Ok(Self { estimates, nu_hat })
    }

    /// Curve from `(energy, γ)` pairs with zero error bars.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Self::from_estimates(
            points
                .iter()
                .map(|&(energy, gamma_hat)| LyapunovEstimate {
                    energy,
                    n: 0,
                    m: 0,
                    gamma_hat,
                    stderr: 0.0,
                    method: Method::Mc,
                })
                .collect(),
        )
    }

    pub fn estimates(&self) -> &[LyapunovEstimate] {
        &self.estimates
    }

    pub fn grid(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.energy).collect()
    }

    /// `min γ̂` over the grid.
    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    pub fn max_gamma(&self) -> f64 {
        self.estimates.iter().map(|e| e.gamma_hat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.estimates[0].energy, self.estimates[self.estimates.len() - 1].energy)
    }

    /// `min (γ̂ - k·stderr)` over the grid.
    pub fn min_lower_bound(&self, k: f64) -> f64 {
        self.estimates
            .iter()
            .map(|e| e.gamma_hat - k * e.stderr)
            .fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-linear `γ̂(E)`; range error outside the grid hull.
    pub fn gamma_at(&self, energy: f64) -> Result<f64> {
        let (lo, hi) = self.hull();
        if !(energy >= lo && energy <= hi) {
            return Err(Error::Range { energy, lo, hi });
        }
        let est = &self.estimates;
        let k = est.partition_point(|e| e.energy <= energy);
        if k == 0 {
            return Ok(est[0].gamma_hat);
        }
        let left = &est[k - 1];
        if k == est.len() || left.energy == energy {
            return Ok(left.gamma_hat);
        }
        let right = &est[k];
        let t = (energy - left.energy) / (right.energy - left.energy);
        Ok(left.gamma_hat + t * (right.gamma_hat - left.gamma_hat))
    }

    /// `sup |γ̂(E) - γ̂(E')|` over `|E - E'| <= delta` within the hull. For a
    /// piecewise-linear function the supremum is attained with one end at a
    /// breakpoint, so breakpoint pairs and breakpoints `± delta` suffice.
    pub fn modulus_of_continuity(&self, delta: f64) -> f64 {
        let (lo, hi) = self.hull();
        let grid = self.grid();
        let mut worst = 0.0f64;
        for (i, &x) in grid.iter().enumerate() {
            let gx = self.estimates[i].gamma_hat;
            for (j, &y) in grid.iter().enumerate().skip(i + 1) {
                if y - x > delta {
                    break;
                }
                worst = worst.max((gx - self.estimates[j].gamma_hat).abs());
            }
            for y in [x - delta, x + delta] {
                if y >= lo && y <= hi {
                    if let Ok(gy) = self.gamma_at(y) {
                        worst = worst.max((gx - gy).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `δ` with modulus `<= eps0`, halved as a safety margin.
    pub fn auto_delta0(&self, eps0: f64) -> f64 {
        let (lo, hi) = self.hull();
        let span = hi - lo;
        if span <= 0.0 || self.modulus_of_continuity(span) <= eps0 {
            return 0.5 * span.max(f64::MIN_POSITIVE);
        }
        let (mut good, mut bad) = (0.0, span);
        for _ in 0..60 {
            let mid = 0.5 * (good + bad);
            if self.modulus_of_continuity(mid) <= eps0 {
                good = mid;
            } else {
                bad = mid;
            }
        }
        0.5 * good
    }
}

/// Monte Carlo `γ̂` on each grid energy. All energies share the same sample
/// windows, and each entry equals [`estimate_gamma_mc`] at that energy.
pub fn gamma_grid(dist: &Distribution, grid: &[f64], n: usize, m: usize, seed: u64) -> Result<GammaCurve> {
    check_mc_args(dist, n, m)?;
    if grid.is_empty() {
        return Err(Error::param("energy grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("energy grid must be strictly ascending"));
    }
    let samples = sample_log_norms(dist, grid, n, m, seed);
    let len = (n + 1) as f64;
    let estimates = grid
        .iter()
        .enumerate()
        .map(|(k, &energy)| {
            let column: Vec<f64> = samples.iter().map(|row| row[k]).collect();
            let (mean, se) = mean_and_stderr(&column);
            LyapunovEstimate {
                energy,
                n,
                m,
                gamma_hat: mean / len,
                stderr: se / len,
                method: Method::Mc,
            }
        })
        .collect();
    GammaCurve::from_estimates(estimates)
}

/// `points` equally spaced energies over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i == points - 1 { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

/// The four window families of the uniform upper bound.
pub const CRAIG_SIMON_FAMILIES: [&str; 4] = ["[0,n]", "[-n,0]", "[n+1,2n+1]", "[2n+1,3n+1]"];

fn family_interval(family: usize, n: i64) -> (i64, i64) {
    match family {
        0 => (0, n),
        1 => (-n, 0),
        2 => (n + 1, 2 * n + 1),
        _ => (2 * n + 1, 3 * n + 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CraigSimonRow {
    pub n: usize,
    /// Number of energies tested per family.
    pub energies: usize,
    /// Violations per family in the order of [`CRAIG_SIMON_FAMILIES`].
    pub violations: [usize; 4],
    /// Largest `(1/(n+1)) ln‖T‖ - γ̂(E)` seen.
    pub max_excess: f64,
}

impl CraigSimonRow {
    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }

    pub fn violation_fraction(&self) -> f64 {
        self.total_violations() as f64 / (4 * self.energies) as f64
    }
}

/// Count energies where `(1/(n+1)) ln‖T‖ > γ̂(E) + eps(E)` on each window
/// family. `eps` maps an energy and its `γ̂` to the allowed excess.
pub fn craig_simon_scan(
    w: &PotentialWindow,
    grid: &[f64],
    n_values: &[usize],
    gamma_ref: &GammaCurve,
    eps: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<Vec<CraigSimonRow>> {
    let n_max = n_values.iter().copied().max().unwrap_or(0) as i64;
    w.check_contains(-n_max, 3 * n_max + 1)?;
    let gammas: Vec<f64> = grid.iter().map(|&e| gamma_ref.gamma_at(e)).collect::<Result<_>>()?;
    n_values
        .iter()
        .map(|&n| {
            let ni = n as i64;
            let len = (n + 1) as f64;
            let per_energy: Vec<([bool; 4], f64)> = grid
                .par_iter()
                .zip(gammas.par_iter())
                .map(|(&e, &g)| {
                    let threshold = g + eps(e, g);
                    let mut hits = [false; 4];
                    let mut excess = f64::NEG_INFINITY;
                    for (f, hit) in hits.iter_mut().enumerate() {
                        let (a, b) = family_interval(f, ni);
                        let t = transfer_product(w, a, b, e)?;
                        let rate = log_norm(&t) / len;
                        excess = excess.max(rate - g);
                        *hit = rate > threshold;
                    }
                    Ok((hits, excess))
                })
                .collect::<Result<_>>()?;
            let mut violations = [0usize; 4];
            let mut max_excess = f64::NEG_INFINITY;
            for (hits, excess) in &per_energy {
                for f in 0..4 {
                    violations[f] += usize::from(hits[f]);
                }
                max_excess = max_excess.max(*excess);
            }
            Ok(CraigSimonRow {
                n,
                energies: grid.len(),
                violations,
                max_excess,
            })
        })
        .collect()
}

/// Window long enough for [`craig_simon_scan`] up to `n_max`.
pub fn craig_simon_window(dist: &Distribution, n_max: usize, seed: u64) -> Result<PotentialWindow> {
    let n = n_max as i64;
    sample_potential(dist, -n, 3 * n + 1, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{largest_singular_value, step_matrix};

    fn bern() -> Distribution {
        Distribution::bernoulli(0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn gamma_nonnegative() {
        for e in [-3.0, -1.0, 0.5, 2.0, 10.0] {
            let est = estimate_gamma_mc(&bern(), e, 20, 16, 3).unwrap();
            assert!(est.gamma_hat >= 0.0);
            assert!(est.stderr >= 0.0);
        }
    }

    #[test]
    fn argument_checks() {
        assert!(estimate_gamma_mc(&bern(), 0.0, 0, 10, 1).is_err());
        assert!(estimate_gamma_mc(&bern(), 0.0, 10, 1, 1).is_err());
        assert!(gamma_grid(&bern(), &[1.0, 0.0], 10, 10, 1).is_err());
    }

    #[test]
    fn trajectory_single_step() {
        let seed = 77;
        let est = estimate_gamma_trajectory(&bern(), 0.3, 1, seed).unwrap();
        let v = bern().inverse_cdf(rng::site_uniform(seed, 1));
        let expected = largest_singular_value(&step_matrix(v, 0.3)).ln();
        assert!((est.gamma_hat - expected).abs() < 1e-15);
        assert!(!est.has_stderr());
    }

    #[test]
    fn trajectory_is_deterministic() {
        let a = estimate_gamma_trajectory(&bern(), 0.5, 5000, 9).unwrap();
        let b = estimate_gamma_trajectory(&bern(), 0.5, 5000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_matches_pointwise_estimates() {
        let grid = [-1.0, 0.5, 2.0];
        let curve = gamma_grid(&bern(), &grid, 50, 20, 5).unwrap();
        for (k, &e) in grid.iter().enumerate() {
            let single = estimate_gamma_mc(&bern(), e, 50, 20, 5).unwrap();
            assert_eq!(curve.estimates()[k], single);
        }
    }

    #[test]
    fn singleton_grid_nu() {
        let curve = gamma_grid(&bern(), &[0.5], 30, 10, 1).unwrap();
        assert_eq!(curve.nu_hat(), curve.estimates()[0].gamma_hat);
    }

    #[test]
    fn interpolation_and_range() {
        let c = GammaCurve::from_points(&[(0.0, 1.0), (1.0, 3.0), (3.0, 3.0)]).unwrap();
        assert_eq!(c.gamma_at(0.5).unwrap(), 2.0);
        assert_eq!(c.gamma_at(1.0).unwrap(), 3.0);
        assert_eq!(c.gamma_at(3.0).unwrap(), 3.0);
        assert!(matches!(c.gamma_at(3.5), Err(Error::Range { .. })));
        assert_eq!(c.nu_hat(), 1.0);
        assert!((c.modulus_of_continuity(0.25) - 0.5).abs() < 1e-12);
        let d = c.auto_delta0(0.5);
        assert!((d - 0.125).abs() < 1e-9, "{d}");
    }

    #[test]
    fn reproducible_curve() {
        let grid = linspace(-2.0, 3.0, 6);
        let a = gamma_grid(&bern(), &grid, 40, 12, 99).unwrap();
        let b = gamma_grid(&bern(), &grid, 40, 12, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn off_spectrum_energy_dominates() {
        let mut grid = linspace(-2.0, 3.0, 11);
        grid.push(10.0);
        let curve = gamma_grid(&bern(), &grid, 400, 40, 8).unwrap();
        let outside = curve.estimates().last().unwrap().gamma_hat;
        for est in &curve.estimates()[..grid.len() - 1] {
            assert!(outside > est.gamma_hat);
        }
    }

    #[test]
    fn craig_simon_trivial_margin() {
        let dist = bern();
        let grid = linspace(-2.0, 3.0, 11);
        let curve = gamma_grid(&dist, &grid, 100, 20, 1).unwrap();
        let w = craig_simon_window(&dist, 30, 4).unwrap();
        let spread = dist.support_max() - dist.support_min();
        let eps = 10.0 * (curve.max_gamma() + (3.0 + spread).ln());
        let rows = craig_simon_scan(&w, &grid, &[1, 10, 30], &curve, |_, _| eps).unwrap();
        assert!(rows.iter().all(|r| r.total_violations() == 0));
        assert_eq!(rows[0].n, 1);
        assert!(rows[0].max_excess.is_finite());
    }

    #[test]
    fn craig_simon_short_window() {
        let dist = bern();
        let curve = GammaCurve::from_points(&[(0.0, 0.1), (1.0, 0.1)]).unwrap();
        let w = craig_simon_window(&dist, 10, 4).unwrap();
        assert!(matches!(
            craig_simon_scan(&w, &[0.5], &[20], &curve, |_, _| 0.1),
            Err(Error::Bounds { .. })
        ));
    }
}
