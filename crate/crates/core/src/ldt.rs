//! Large deviations of `(1/(n+1)) ln|P_[0,n]|` around `γ̂(E)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::lyapunov::GammaCurve;
use crate::model::{sample_potential, Distribution, PotentialWindow};
use crate::rng::{self, CounterStream};
use crate::spectrum::eigenvalues;
use crate::transfer::{det_p, det_prefixes, det_suffixes, DetRecurrence, ScaledScalar};

/// Minimum Monte Carlo sample count for deviation probabilities.
pub const MIN_SAMPLES: usize = 100;

/// Default number of `(y1, y2)` pairs tested per eigenvalue.
pub const DEFAULT_PAIR_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub energy: f64,
    pub eps: f64,
    pub n: usize,
    pub m: usize,
    pub count_minus: usize,
    pub count_plus: usize,
    pub p_hat_minus: f64,
    pub p_hat_plus: f64,
    /// Wilson 95% half-width of the two-sided probability.
    pub ci95: f64,
}

impl DeviationStats {
    pub fn p_hat_total(&self) -> f64 {
        (self.count_minus + self.count_plus) as f64 / self.m as f64
    }
}

/// Wilson score interval half-width at 95% for `k` successes in `m` trials.
pub fn wilson_half_width(k: usize, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let z = 1.959_963_984_540_054f64;
    let mf = m as f64;
    let p = k as f64 / mf;
    let denom = 1.0 + z * z / mf;
    z * (p * (1.0 - p) / mf + z * z / (4.0 * mf * mf)).sqrt() / denom
}

/// Per-window rates `(1/(n+1)) ln|P_[0,n]|` (`-∞` for a vanishing
/// determinant), in sample order.
pub fn sample_log_det_rates(dist: &Distribution, energy: f64, n: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let len = (n + 1) as f64;
    Ok((0..m)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive_seed(seed, i as u64);
            let mut rec = DetRecurrence::new(energy);
            for site in 0..=n as i64 {
                rec.push(dist.inverse_cdf(rng::site_uniform(s, site)));
            }
            rec.value().ln_abs() / len
        })
        .collect())
}

/// Counts deviations of precomputed rates. Equal rates on both sides of the
/// band count as deviations; `-∞` always counts on the minus side.
pub fn deviation_stats_from_rates(rates: &[f64], energy: f64, eps: f64, n: usize, gamma_ref: f64) -> DeviationStats {
    let m = rates.len();
    let count_plus = rates.iter().filter(|&&r| r >= gamma_ref + eps).count();
    let count_minus = rates.iter().filter(|&&r| r <= gamma_ref - eps).count();
    let mf = m.max(1) as f64;
    DeviationStats {
        energy,
        eps,
        n,
        m,
        count_minus,
        count_plus,
        p_hat_minus: count_minus as f64 / mf,
        p_hat_plus: count_plus as f64 / mf,
        ci95: wilson_half_width(count_minus + count_plus, m),
    }
}

pub fn deviation_probability(
    dist: &Distribution,
    energy: f64,
    eps: f64,
    n: usize,
    m: usize,
    gamma_ref: f64,
    seed: u64,
) -> Result<DeviationStats> {
    if m < MIN_SAMPLES {
        return Err(Error::param(format!("deviation probability needs m >= {MIN_SAMPLES}")));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps must be positive"));
    }
    let rates = sample_log_det_rates(dist, energy, n, m, seed)?;
    Ok(deviation_stats_from_rates(&rates, energy, eps, n, gamma_ref))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFit {
    pub eps: f64,
    pub n_list: Vec<usize>,
    pub p_list: Vec<f64>,
    /// Slope of `-ln p` against `n+1`.
    pub eta_hat: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Entries left out of the fit because their probability was zero.
    pub excluded: Vec<usize>,
}

/// Least-squares `η̂` from given probabilities; input order is irrelevant.
pub fn fit_eta_from_probabilities(eps: f64, n_list: &[usize], p_list: &[f64]) -> Result<EtaFit> {
    if n_list.len() != p_list.len() {
        return Err(Error::param("n_list and p_list lengths differ"));
    }
    let mut pairs: Vec<(usize, f64)> = n_list.iter().copied().zip(p_list.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (used, zero): (Vec<_>, Vec<_>) = pairs.iter().partition(|(_, p)| *p > 0.0);
    if used.is_empty() {
        return Err(Error::InsufficientSignal(
            "every deviation count is zero; use a smaller eps or more samples".into(),
        ));
    }
    let xs: Vec<f64> = used.iter().map(|(n, _)| (*n + 1) as f64).collect();
    let ys: Vec<f64> = used.iter().map(|(_, p)| -p.ln()).collect();
    let line = fit_line(&xs, &ys).map_err(|_| {
        Error::InsufficientSignal("fewer than two lengths with nonzero deviation counts".into())
    })?;
    Ok(EtaFit {
        eps,
        n_list: pairs.iter().map(|p| p.0).collect(),
        p_list: pairs.iter().map(|p| p.1).collect(),
        eta_hat: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        excluded: zero.iter().map(|p| p.0).collect(),
    })
}

/// Two-sided deviation probabilities for each length (independent sample
/// sets per length) followed by the rate fit.
pub fn fit_eta(
    dist: &Distribution,
    energy: f64,
    eps: f64,
    n_list: &[usize],
    m: usize,
    gamma_ref: f64,
    seed: u64,
) -> Result<(EtaFit, Vec<DeviationStats>)> {
    if n_list.len() < 4 {
        return Err(Error::param("fit_eta needs at least 4 lengths"));
    }
    let mut sorted = n_list.to_vec();
    sorted.sort_unstable();
    let stats = sorted
        .iter()
        .map(|&n| deviation_probability(dist, energy, eps, n, m, gamma_ref, rng::derive_seed(seed, n as u64)))
        .collect::<Result<Vec<_>>>()?;
    let probs: Vec<f64> = stats.iter().map(DeviationStats::p_hat_total).collect();
    Ok((fit_eta_from_probabilities(eps, &sorted, &probs)?, stats))
}

fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::param("energy grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("energy grid must be strictly ascending"));
    }
    Ok(if grid.len() < 2 {
        0.0
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    })
}

fn in_minus_set(p: ScaledScalar, len: f64, gamma: f64, eps: f64) -> bool {
    p.is_zero() || p.ln_abs() / len <= gamma - eps
}

/// Riemann proxy of the Lebesgue measure of
/// `{E : (1/(b-a+1)) ln|P_[a,b](E)| <= γ̂(E) - eps}` on a uniform grid.
pub fn deviation_measure_in_energy(
    w: &PotentialWindow,
    a: i64,
    b: i64,
    eps: f64,
    gamma_ref: &GammaCurve,
    grid: &[f64],
) -> Result<f64> {
    let h = uniform_spacing(grid)?;
    w.check_contains(a, b)?;
    if b < a {
        return Err(Error::param("empty box"));
    }
    let gammas: Vec<f64> = grid.iter().map(|&e| gamma_ref.gamma_at(e)).collect::<Result<_>>()?;
    let len = (b - a + 1) as f64;
    let hits = grid
        .par_iter()
        .zip(gammas.par_iter())
        .map(|(&e, &g)| Ok(usize::from(in_minus_set(det_p(w, a, b, e)?, len, g, eps))))
        .collect::<Result<Vec<usize>>>()?;
    Ok(h * hits.iter().sum::<usize>() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub n: usize,
    pub k: f64,
    pub eps: f64,
    pub trials: usize,
    pub budget: usize,
    /// Eigenvalue/subinterval tests performed.
    pub tests: usize,
    pub test_violations: usize,
    /// Trials with at least one violation.
    pub trial_violations: usize,
    /// `None` when no admissible subinterval exists.
    pub test_rate: Option<f64>,
    pub trial_rate: Option<f64>,
}

/// Admissible `y1` (left boxes `[-n, y1]`) and `y2` (right boxes `[y2, n]`)
/// range: both lie in `[-n + ⌈n/K⌉, n - ⌈n/K⌉]`, which is exactly the set of
/// values that can appear in some pair `y1 <= y2`.
fn admissible_range(n: usize, k: f64) -> Option<(i64, i64)> {
    if (n as f64) < k {
        return None;
    }
    let gap = ((n as f64) / k).ceil() as i64;
    let (lo, hi) = (-(n as i64) + gap, n as i64 - gap);
    (lo <= hi).then_some((lo, hi))
}

fn deviates(p: ScaledScalar, len: usize, gamma: f64, eps: f64) -> bool {
    let len = len as f64;
    p.is_zero() || {
        let r = p.ln_abs() / len;
        r >= gamma + eps || r <= gamma - eps
    }
}

/// Violations found in one realization on `[-n, 3n+1]`: `(tests, violations)`.
fn separation_on_window(
    w: &PotentialWindow,
    n: usize,
    eps: f64,
    range: (i64, i64),
    budget: usize,
    gamma_ref: &GammaCurve,
    stream_key: u64,
) -> Result<(usize, usize)> {
    let ni = n as i64;
    let right = w.slice(ni + 1, 3 * ni + 1)?;
    let left = w.slice(-ni, ni)?;
    let energies = eigenvalues(right);
    let (lo, hi) = range;
    let span = (hi - lo + 1) as usize;
    let exhaustive = budget >= span * span;
    let mut stream = CounterStream::new(stream_key);
    let mut tests = 0;
    let mut violations = 0;
    for &e in &energies {
        let gamma = gamma_ref.gamma_at(e)?;
        // prefixes[k] = P_[-n, -n+k-1], suffixes[k] = P_[-n+k, n]
        let prefixes = det_prefixes(left, e);
        let suffixes = det_suffixes(left, e);
        let left_box = |y1: i64| {
            let k = (y1 + ni + 1) as usize;
            deviates(prefixes[k], k, gamma, eps)
        };
        let right_box = |y2: i64| {
            let k = (y2 + ni) as usize;
            deviates(suffixes[k], left.len() - k, gamma, eps)
        };
        if exhaustive {
            let bad_left: Vec<bool> = (lo..=hi).map(left_box).collect();
            let bad_right: Vec<bool> = (lo..=hi).map(right_box).collect();
            for (i, &bl) in bad_left.iter().enumerate() {
                for &br in &bad_right[i..] {
                    tests += 1;
                    violations += usize::from(bl || br);
                }
            }
        } else {
            for _ in 0..budget {
                let a = stream.next_range(lo, hi);
                let b = stream.next_range(lo, hi);
                let (y1, y2) = (a.min(b), a.max(b));
                tests += 1;
                violations += usize::from(left_box(y1) || right_box(y2));
            }
        }
    }
    Ok((tests, violations))
}

/// Eigenvalues of the right box `[n+1, 3n+1]` tested against deviation sets
/// of left subboxes `[-n, y1]`, `[y2, n]` with `n/K` clearance from `±n`.
#[allow(clippy::too_many_arguments)]
pub fn eigenvalue_separation_check(
    dist: &Distribution,
    n: usize,
    eps: f64,
    k: f64,
    m: usize,
    gamma_ref: &GammaCurve,
    seed: u64,
    budget: usize,
) -> Result<SeparationReport> {
    if !(k > 1.0) {
        return Err(Error::param("K must exceed 1"));
    }
    if budget == 0 {
        return Err(Error::param("pair budget must be positive"));
    }
    let mut report = SeparationReport {
        n,
        k,
        eps,
        trials: m,
        budget,
        tests: 0,
        test_violations: 0,
        trial_violations: 0,
        test_rate: None,
        trial_rate: None,
    };
    let Some(range) = admissible_range(n, k) else {
        return Ok(report);
    };
    let ni = n as i64;
    let per_trial = (0..m)
        .into_par_iter()
        .map(|i| {
            let s = rng::derive_seed(seed, i as u64);
            let w = sample_potential(dist, -ni, 3 * ni + 1, s)?;
            separation_on_window(&w, n, eps, range, budget, gamma_ref, rng::derive_seed(s, u64::MAX))
        })
        .collect::<Result<Vec<_>>>()?;
    for (t, v) in per_trial {
        report.tests += t;
        report.test_violations += v;
        report.trial_violations += usize::from(v > 0);
    }
    if report.tests > 0 {
        report.test_rate = Some(report.test_violations as f64 / report.tests as f64);
        report.trial_rate = Some(report.trial_violations as f64 / m.max(1) as f64);
    }
    Ok(report)
}

/// Separation condition on a single realization (centered at 0): true when
/// no tested eigenvalue/subinterval pair deviates.
pub fn separation_holds(
    w: &PotentialWindow,
    n: usize,
    eps: f64,
    k: f64,
    gamma_ref: &GammaCurve,
    budget: usize,
    stream_key: u64,
) -> Result<bool> {
    match admissible_range(n, k) {
        None => Ok(true),
        Some(range) => Ok(separation_on_window(w, n, eps, range, budget, gamma_ref, stream_key)?.1 == 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::linspace;

    fn bern() -> Distribution {
        Distribution::bernoulli(0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn wilson_known_value() {
        // k = 50, m = 100: center-corrected half width
        let h = wilson_half_width(50, 100);
        assert!((h - 0.0958).abs() < 1e-3, "{h}");
        assert_eq!(wilson_half_width(0, 0), 0.0);
    }

    #[test]
    fn no_upper_deviation_past_entry_bound() {
        let e: f64 = 0.5;
        let bound = (2.0f64 + e.abs() + 1.0).ln();
        let stats = deviation_probability(&bern(), e, bound + 0.01, 30, 200, 0.0, 4).unwrap();
        assert_eq!(stats.count_plus, 0);
    }

    #[test]
    fn counts_nested_in_eps() {
        let rates = sample_log_det_rates(&bern(), 0.5, 40, 500, 9).unwrap();
        let mut prev = (usize::MAX, usize::MAX);
        for eps in [0.001, 0.01, 0.05, 0.2] {
            let s = deviation_stats_from_rates(&rates, 0.5, eps, 40, 0.03);
            assert!(s.count_minus <= prev.0 && s.count_plus <= prev.1);
            prev = (s.count_minus, s.count_plus);
        }
    }

    #[test]
    fn vanishing_determinant_counts_minus() {
        let s = deviation_stats_from_rates(&[f64::NEG_INFINITY], 0.0, 10.0, 1, 0.0);
        assert_eq!(s.count_minus, 1);
    }

    #[test]
    fn argument_checks() {
        assert!(deviation_probability(&bern(), 0.5, 0.1, 10, 50, 0.0, 1).is_err());
        assert!(deviation_probability(&bern(), 0.5, 0.0, 10, 100, 0.0, 1).is_err());
    }

    #[test]
    fn synthetic_exponential_rate() {
        let ns = [10usize, 20, 40, 80, 160];
        let ps: Vec<f64> = ns.iter().map(|&n| (-0.1 * (n + 1) as f64).exp()).collect();
        let fit = fit_eta_from_probabilities(0.1, &ns, &ps).unwrap();
        assert!((fit.eta_hat - 0.1).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        let rev_n: Vec<usize> = ns.iter().rev().copied().collect();
        let rev_p: Vec<f64> = ps.iter().rev().copied().collect();
        assert_eq!(fit_eta_from_probabilities(0.1, &rev_n, &rev_p).unwrap(), fit);
    }

    #[test]
    fn zero_counts_excluded_or_rejected() {
        let fit = fit_eta_from_probabilities(0.1, &[1, 2, 3, 4], &[0.5, 0.25, 0.125, 0.0]).unwrap();
        assert_eq!(fit.excluded, vec![4]);
        assert!(matches!(
            fit_eta_from_probabilities(0.1, &[1, 2, 3, 4], &[0.0; 4]),
            Err(Error::InsufficientSignal(_))
        ));
    }

    #[test]
    fn measure_empty_when_determinants_large() {
        // constant potential 10 keeps |P| >= 1 on [-2, 3]
        let w = PotentialWindow::from_values(0, vec![10.0; 20]).unwrap();
        let curve = GammaCurve::from_points(&[(-2.0, 0.1), (3.0, 0.1)]).unwrap();
        let grid = linspace(-2.0, 3.0, 101);
        assert_eq!(deviation_measure_in_energy(&w, 0, 19, 0.5, &curve, &grid).unwrap(), 0.0);
    }

    #[test]
    fn measure_refinement_is_stable() {
        let w = sample_potential(&bern(), 0, 60, 2).unwrap();
        let curve = GammaCurve::from_points(&[(-2.0, 0.2), (3.0, 0.2)]).unwrap();
        let coarse = linspace(-2.0, 3.0, 401);
        let fine = linspace(-2.0, 3.0, 801);
        let m1 = deviation_measure_in_energy(&w, 0, 60, 0.05, &curve, &coarse).unwrap();
        let m2 = deviation_measure_in_energy(&w, 0, 60, 0.05, &curve, &fine).unwrap();
        let member: Vec<bool> = fine
            .iter()
            .map(|&e| in_minus_set(det_p(&w, 0, 60, e).unwrap(), 61.0, 0.2, 0.05))
            .collect();
        let crossings = member.windows(2).filter(|p| p[0] != p[1]).count().max(1);
        let h = 5.0 / 400.0;
        assert!((m1 - m2).abs() <= h * crossings as f64, "{m1} vs {m2}, {crossings} crossings");
    }

    #[test]
    fn separation_small_n_is_absent() {
        let curve = GammaCurve::from_points(&[(-3.0, 0.1), (4.0, 0.1)]).unwrap();
        let r = eigenvalue_separation_check(&bern(), 3, 0.01, 4.0, 5, &curve, 1, 64).unwrap();
        assert!(r.test_rate.is_none());
    }

    #[test]
    fn separation_huge_eps_has_no_violations() {
        let curve = GammaCurve::from_points(&[(-3.0, 0.1), (4.0, 0.1)]).unwrap();
        let r = eigenvalue_separation_check(&bern(), 12, 50.0, 4.0, 5, &curve, 1, 64).unwrap();
        assert_eq!(r.test_violations, 0);
        assert!(r.tests > 0);
        assert_eq!(r.test_rate, Some(0.0));
    }
}
