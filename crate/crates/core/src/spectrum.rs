//! Finite-box eigenproblems and the localization diagnostics built on them.
//!
//! The solver is Sturm-count bisection for eigenvalues followed by inverse
//! iteration for eigenvectors, with Gram-Schmidt inside clusters of close
//! eigenvalues.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::green::classify;
use crate::interp::four_family_violations;
use crate::ldt::{deviation_measure_in_energy, separation_holds};
use crate::lyapunov::GammaCurve;
use crate::model::{sample_shifted, Distribution, PotentialWindow};
use crate::rng::{self, CounterStream};
use crate::tridiag::{gershgorin, sturm_count, TridiagLu};

/// Absolute bisection tolerance for eigenvalues.
pub const BISECTION_TOL: f64 = 1e-12;

/// Eigenvalues closer than this multiple of the spectral diameter are
/// orthogonalized against each other.
pub const CLUSTER_REL_GAP: f64 = 1e-5;

/// Amplitudes below this are excluded from decay fits.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

const INVERSE_ITERATIONS: usize = 4;

/// `H_[a,b]` with unit off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxOperator {
    start: i64,
    diag: Vec<f64>,
}

impl BoxOperator {
    pub fn new(start: i64, diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::param("box must have at least one site"));
        }
        Ok(Self { start, diag })
    }

    pub fn from_window(w: &PotentialWindow, a: i64, b: i64) -> Result<Self> {
        if b < a {
            return Err(Error::param(format!("empty box [{a}, {b}]")));
        }
        Self::new(a, w.slice(a, b)?.to_vec())
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.diag.len() as i64 - 1
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `H v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|k| {
                let mut s = self.diag[k] * v[k];
                if k > 0 {
                    s += v[k - 1];
                }
                if k + 1 < n {
                    s += v[k + 1];
                }
                s
            })
            .collect()
    }
}

/// Ascending eigenvalues of the unit-off-diagonal matrix with diagonal `diag`.
pub fn eigenvalues(diag: &[f64]) -> Vec<f64> {
    if diag.len() < 2 {
        return diag.to_vec();
    }
    let (glo, ghi) = gershgorin(diag);
    let (glo, ghi) = (glo - BISECTION_TOL, ghi + BISECTION_TOL);
    (0..diag.len())
        .into_par_iter()
        .map(|j| {
            let (mut lo, mut hi) = (glo, ghi);
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if sturm_count(diag, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    start: i64,
    diag: Vec<f64>,
    values: Vec<f64>,
    /// `vectors[j][k]` is `φ_j` at site `start + k`.
    vectors: Vec<Vec<f64>>,
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
    }
}

/// Start vector for inverse iteration: deterministic, dense, and generic.
fn start_vector(n: usize, j: usize) -> Vec<f64> {
    let mut s = CounterStream::new(rng::derive_seed(0x1A7E_u64, j as u64));
    (0..n).map(|_| 2.0 * s.next_f64() - 1.0).collect()
}

fn inverse_iteration(diag: &[f64], shift: f64, j: usize, cluster: &[Vec<f64>], floor: f64) -> Vec<f64> {
    let mut lu = TridiagLu::factor_unit_offdiag(diag, shift);
    lu.perturb_small_pivots(floor);
    let mut v = start_vector(diag.len(), j);
    project_out(&mut v, cluster);
    normalize(&mut v);
    for _ in 0..INVERSE_ITERATIONS {
        lu.solve(&mut v);
        normalize(&mut v);
        project_out(&mut v, cluster);
        project_out(&mut v, cluster);
        normalize(&mut v);
    }
    // fix the sign so the largest component is positive
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Full eigendecomposition of a box.
pub fn eigensystem(op: &BoxOperator) -> EigenSystem {
    let diag = op.diagonal();
    let values = eigenvalues(diag);
    let (glo, ghi) = gershgorin(diag);
    let scale = glo.abs().max(ghi.abs()).max(1.0);
    let cluster_gap = CLUSTER_REL_GAP * (ghi - glo).max(1.0);
    let floor = f64::EPSILON * scale;

    // clusters are maximal runs with consecutive gaps below `cluster_gap`
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    let mut begin = 0;
    for j in 1..=values.len() {
        if j == values.len() || values[j] - values[j - 1] >= cluster_gap {
            clusters.push((begin, j));
            begin = j;
        }
    }
    let vectors: Vec<Vec<f64>> = clusters
        .par_iter()
        .flat_map_iter(|&(b, e)| {
            let mut local: Vec<Vec<f64>> = Vec::with_capacity(e - b);
            let mut prev_shift = f64::NEG_INFINITY;
            for j in b..e {
                // separate coincident shifts so the factorizations differ
                let mut shift = values[j];
                let min_step = 10.0 * f64::EPSILON * scale;
                if shift - prev_shift < min_step {
                    shift = prev_shift + min_step;
                }
                prev_shift = shift;
                let v = inverse_iteration(diag, shift, j, &local, floor);
                local.push(v);
            }
            local
        })
        .collect();
    EigenSystem {
        start: op.start(),
        diag: diag.to_vec(),
        values,
        vectors,
    }
}

impl EigenSystem {
    /// Assemble from precomputed parts (used for synthetic profiles).
    pub fn from_parts(start: i64, diag: Vec<f64>, values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || values.len() != n || vectors.len() != n || vectors.iter().any(|v| v.len() != n) {
            return Err(Error::param("eigensystem parts have inconsistent dimensions"));
        }
        Ok(Self {
            start,
            diag,
            values,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.dim() as i64 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `φ_j(site)`.
    pub fn phi(&self, j: usize, site: i64) -> Option<f64> {
        if site < self.start || site > self.end() {
            return None;
        }
        Some(self.vectors[j][(site - self.start) as usize])
    }

    pub fn contains(&self, site: i64) -> bool {
        site >= self.start && site <= self.end()
    }

    /// Spread of the Gershgorin interval.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = gershgorin(&self.diag);
        hi - lo
    }

    /// `max_j ‖H φ_j - E_j φ_j‖₂`.
    pub fn max_residual(&self) -> f64 {
        let op = BoxOperator {
            start: self.start,
            diag: self.diag.clone(),
        };
        self.vectors
            .iter()
            .zip(&self.values)
            .map(|(v, &e)| {
                op.apply(v)
                    .iter()
                    .zip(v)
                    .map(|(hv, x)| (hv - e * x).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{i,j} |⟨φ_i, φ_j⟩ - δ_ij|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        let dot: f64 = self.vectors[i].iter().zip(&self.vectors[j]).map(|(a, b)| a * b).sum();
                        (dot - if i == j { 1.0 } else { 0.0 }).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `|Σ E_j - Σ diag|`.
    pub fn trace_defect(&self) -> f64 {
        (self.values.iter().sum::<f64>() - self.diag.iter().sum::<f64>()).abs()
    }

    /// `max_x |Σ_j φ_j(x)² - 1|`.
    pub fn completeness_defect(&self) -> f64 {
        (0..self.dim())
            .map(|k| (self.vectors.iter().map(|v| v[k] * v[k]).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Eigenvectors as little-endian f64, one row per eigenvector.
    pub fn vectors_le_bytes(&self) -> Vec<u8> {
        self.vectors
            .iter()
            .flat_map(|v| v.iter().flat_map(|x| x.to_le_bytes()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProfile {
    pub j: usize,
    pub dim: usize,
    pub energy: f64,
    /// Site of the largest `|φ_j|`, leftmost on ties.
    pub center: i64,
    /// Fitted decay rate; absent when fewer than two distinct distances
    /// carry amplitude above the floor.
    pub alpha_hat: Option<f64>,
    pub intercept: Option<f64>,
    pub fit_r2: Option<f64>,
    pub fit_points: usize,
}

/// Center and decay fit of `ln|φ_j(x)|` against `-|x - l_E|`.
pub fn localization_profile(es: &EigenSystem, j: usize) -> Result<LocalizationProfile> {
    if j >= es.dim() {
        return Err(Error::param(format!("eigen index {j} out of range 0..{}", es.dim())));
    }
    let v = es.vector(j);
    let mut kmax = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[kmax].abs() {
            kmax = k;
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = v
        .iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > AMPLITUDE_FLOOR)
        .map(|(k, x)| (-(k as f64 - kmax as f64).abs(), x.abs().ln()))
        .unzip();
    let fit = fit_line(&xs, &ys).ok();
    Ok(LocalizationProfile {
        j,
        dim: es.dim(),
        energy: es.values()[j],
        center: es.start() + kmax as i64,
        alpha_hat: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        fit_r2: fit.map(|f| f.r2),
        fit_points: xs.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRatio {
    pub j: usize,
    pub energy: f64,
    pub alpha_hat: f64,
    pub gamma_hat: f64,
    pub ratio: f64,
    /// Index within the outer 5% of the spectrum (at least one state each side).
    pub boundary: bool,
}

/// `α̂ / γ̂(E_j)`.
pub fn decay_vs_lyapunov(profile: &LocalizationProfile, gamma_ref: &GammaCurve) -> Result<DecayRatio> {
    let alpha = profile
        .alpha_hat
        .ok_or_else(|| Error::Contract(format!("eigenvector {} has no decay fit", profile.j)))?;
    let gamma = gamma_ref.gamma_at(profile.energy)?;
    let edge = (profile.dim / 20).max(1);
    Ok(DecayRatio {
        j: profile.j,
        energy: profile.energy,
        alpha_hat: alpha,
        gamma_hat: gamma,
        ratio: alpha / gamma,
        boundary: profile.j < edge || profile.j + edge >= profile.dim,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuleRow {
    pub j: usize,
    pub energy: f64,
    pub center: i64,
    /// Center relative to the middle site of the box.
    pub center_rel: i64,
    pub log_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuleReport {
    pub alpha: f64,
    pub eps: f64,
    pub max_c: f64,
    pub log_max_c: f64,
    pub rows: Vec<SuleRow>,
}

/// Smallest `C_j` with `|φ_j(x)| <= C_j e^{ε ln²(1+|l|)} e^{-α|x-l|}`,
/// where `l` is the center measured from the middle of the box.
pub fn sule_check(es: &EigenSystem, alpha: f64, eps: f64) -> Result<SuleReport> {
    if !(alpha >= 0.0) || !(eps >= 0.0) {
        return Err(Error::param("alpha and eps must be nonnegative"));
    }
    let mid = es.start() + (es.dim() as i64 - 1) / 2;
    let rows: Vec<SuleRow> = (0..es.dim())
        .into_par_iter()
        .map(|j| {
            let v = es.vector(j);
            let kmax = v
                .iter()
                .enumerate()
                .fold(0, |best, (k, x)| if x.abs() > v[best].abs() { k } else { best });
            let center = es.start() + kmax as i64;
            let rel = center - mid;
            let envelope = eps * (1.0 + rel.abs() as f64).ln().powi(2);
            let log_c = v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(k, x)| x.abs().ln() + alpha * (k as f64 - kmax as f64).abs())
                .fold(f64::NEG_INFINITY, f64::max)
                - envelope;
            SuleRow {
                j,
                energy: es.values()[j],
                center,
                center_rel: rel,
                log_c,
            }
        })
        .collect();
    let log_max_c = rows.iter().map(|r| r.log_c).fold(f64::NEG_INFINITY, f64::max);
    Ok(SuleReport {
        alpha,
        eps,
        max_c: log_max_c.exp(),
        log_max_c,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedRow {
    pub energy: f64,
    pub c: f64,
    pub center_regular: bool,
    /// `l - (2n+1)` regular.
    pub left_regular: bool,
    /// `l + (2n+1)` regular.
    pub right_regular: bool,
}

impl TwoSidedRow {
    /// Both `l` and one of its partners are singular.
    pub fn fails(&self) -> bool {
        !self.center_regular && !(self.left_regular && self.right_regular)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub l: i64,
    pub n: i64,
    pub rows: Vec<TwoSidedRow>,
    pub failing_fraction: f64,
}

/// For each energy, tests `(γ̂(E) - 8ε0, n, E, ω)`-regularity at `l` and at
/// `l ± (2n+1)`.
pub fn two_sided_regularity_check(
    w: &PotentialWindow,
    l: i64,
    n: i64,
    grid: &[f64],
    eps0: f64,
    gamma_ref: &GammaCurve,
) -> Result<TwoSidedReport> {
    if n < 1 {
        return Err(Error::param("radius must be at least 1"));
    }
    if grid.is_empty() {
        return Err(Error::param("energy grid is empty"));
    }
    w.check_contains(l - 3 * n - 1, l + 3 * n + 1)?;
    let rows = grid
        .par_iter()
        .map(|&e| {
            let c = gamma_ref.gamma_at(e)? - 8.0 * eps0;
            let reg = |x| classify(w, x, n, c, e).map(|v| v.is_regular());
            Ok(TwoSidedRow {
                energy: e,
                c,
                center_regular: reg(l)?,
                left_regular: reg(l - 2 * n - 1)?,
                right_regular: reg(l + 2 * n + 1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failing = rows.iter().filter(|r| r.fails()).count();
    Ok(TwoSidedReport {
        l,
        n,
        failing_fraction: failing as f64 / rows.len() as f64,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Checker {
    /// Deviation-set measure bound on `[n+1,3n+1]` and `[-n,n]`.
    N1,
    /// Uniform determinant bound on the four window families.
    N2,
    /// Eigenvalue separation from left-box deviation sets.
    N3,
}

impl std::str::FromStr for Checker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "N1" => Ok(Self::N1),
            "N2" => Ok(Self::N2),
            "N3" => Ok(Self::N3),
            _ => Err(Error::param(format!("unknown checker {s:?}; expected N1, N2 or N3"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NGrowthConfig {
    /// Largest length tested; the scan gives up beyond it.
    pub n_max: usize,
    /// Number of further consecutive lengths that must also pass.
    pub horizon: usize,
    pub eps0: f64,
    /// Decay rate of the deviation measure bound (N1).
    pub eta: f64,
    pub delta0: f64,
    /// Clearance ratio for the separation test (N3).
    pub k: f64,
    pub budget: usize,
    /// Energy grid for N1 and N2.
    pub grid: Vec<f64>,
    pub gamma_ref: GammaCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGrowthRow {
    pub l: i64,
    pub ln2: f64,
    /// Smallest length from which the condition holds over the horizon.
    pub n_hat: Option<usize>,
    pub within: bool,
    pub budget_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGrowthReport {
    pub checker: Checker,
    pub rows: Vec<NGrowthRow>,
    /// `(|l|, fraction of origins with N̂ <= ln²|l|)` in ascending `|l|`.
    pub fractions: Vec<(u64, f64)>,
}

fn condition_holds(
    w: &PotentialWindow,
    n: usize,
    checker: Checker,
    cfg: &NGrowthConfig,
    gammas: &[f64],
    key: u64,
) -> Result<bool> {
    let ni = n as i64;
    match checker {
        Checker::N1 => {
            let bound = (-(cfg.eta - cfg.delta0) * (2 * n + 1) as f64).exp();
            let right = deviation_measure_in_energy(w, ni + 1, 3 * ni + 1, cfg.eps0, &cfg.gamma_ref, &cfg.grid)?;
            if right > bound {
                return Ok(false);
            }
            let center = deviation_measure_in_energy(w, -ni, ni, cfg.eps0, &cfg.gamma_ref, &cfg.grid)?;
            Ok(center <= bound)
        }
        Checker::N2 => Ok(four_family_violations(w, n, &cfg.grid, gammas, 3.0 * cfg.eps0)? == 0),
        Checker::N3 => separation_holds(w, n, cfg.eps0, cfg.k, &cfg.gamma_ref, cfg.budget, key),
    }
}

/// Threshold length of one condition on the shifted realization `T^l ω`.
pub fn n_hat_at(
    dist: &Distribution,
    seed: u64,
    l: i64,
    checker: Checker,
    cfg: &NGrowthConfig,
) -> Result<NGrowthRow> {
    if l == 0 {
        return Err(Error::param("origin shifts must be nonzero"));
    }
    let nm = cfg.n_max as i64;
    let w = sample_shifted(dist, -nm, 3 * nm + 1, seed, l)?;
    let gammas: Vec<f64> = cfg.grid.iter().map(|&e| cfg.gamma_ref.gamma_at(e)).collect::<Result<_>>()?;
    let key = rng::derive_seed(seed, l as u64);
    let mut run_start = None;
    let mut n_hat = None;
    for n in 1..=cfg.n_max {
        if condition_holds(&w, n, checker, cfg, &gammas, key)? {
            let s = *run_start.get_or_insert(n);
            if n - s >= cfg.horizon {
                n_hat = Some(s);
                break;
            }
        } else {
            run_start = None;
        }
    }
    let ln2 = (l.unsigned_abs() as f64).ln().powi(2);
    Ok(NGrowthRow {
        l,
        ln2,
        n_hat,
        within: n_hat.is_some_and(|n| n as f64 <= ln2),
        budget_exceeded: n_hat.is_none(),
    })
}

/// `N̂_i(l)` for each origin shift and the fraction with `N̂_i(l) <= ln²|l|`.
pub fn n_growth_scan(
    dist: &Distribution,
    seed: u64,
    l_values: &[i64],
    checker: Checker,
    cfg: &NGrowthConfig,
) -> Result<NGrowthReport> {
    let rows = l_values
        .par_iter()
        .map(|&l| n_hat_at(dist, seed, l, checker, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut mags: Vec<u64> = rows.iter().map(|r| r.l.unsigned_abs()).collect();
    mags.sort_unstable();
    mags.dedup();
    let fractions = mags
        .into_iter()
        .map(|m| {
            let group: Vec<_> = rows.iter().filter(|r| r.l.unsigned_abs() == m).collect();
            let ok = group.iter().filter(|r| r.within).count();
            (m, ok as f64 / group.len() as f64)
        })
        .collect();
    Ok(NGrowthReport { checker, rows, fractions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_potential;
    use crate::transfer::{det_prefixes, det_values};

    fn bern() -> Distribution {
        Distribution::bernoulli(0.5, 0.0, 1.0).unwrap()
    }

    fn random_box(dim: usize, seed: u64) -> BoxOperator {
        let w = sample_potential(&Distribution::uniform(-2.0, 2.0).unwrap(), 0, dim as i64 - 1, seed).unwrap();
        BoxOperator::from_window(&w, 0, dim as i64 - 1).unwrap()
    }

    #[test]
    fn one_by_one() {
        let es = eigensystem(&BoxOperator::new(5, vec![0.7]).unwrap());
        assert!((es.values()[0] - 0.7).abs() < 1e-12);
        assert_eq!(es.vector(0), &[1.0]);
    }

    #[test]
    fn two_by_two() {
        let es = eigensystem(&BoxOperator::new(0, vec![0.0, 0.0]).unwrap());
        assert!((es.values()[0] + 1.0).abs() < 1e-12);
        assert!((es.values()[1] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = es.vector(0);
        let v1 = es.vector(1);
        assert!((v0[0].abs() - s).abs() < 1e-12 && (v0[0] + v0[1]).abs() < 1e-12);
        assert!((v1[0] - s).abs() < 1e-12 && (v1[0] - v1[1]).abs() < 1e-12);
    }

    #[test]
    fn invariants_on_random_boxes() {
        for (dim, seed) in [(3, 1), (17, 2), (60, 3), (200, 4)] {
            let es = eigensystem(&random_box(dim, seed));
            let diam = es.diameter();
            assert!(es.max_residual() <= 1e-8 * diam, "residual {}", es.max_residual());
            assert!(es.orthogonality_defect() <= 1e-9, "orth {}", es.orthogonality_defect());
            assert!(es.trace_defect() <= 1e-9 * dim as f64);
            assert!(es.completeness_defect() <= 1e-9);
            let (lo, hi) = gershgorin(es.diagonal());
            assert!(es.values().iter().all(|&e| e >= lo - 1e-12 && e <= hi + 1e-12));
            assert!(es.values().windows(2).all(|p| p[0] <= p[1]));
        }
    }

    #[test]
    fn degenerate_pair_is_orthogonal() {
        // two decoupled copies through a huge barrier give near-degenerate pairs
        let mut diag = vec![0.3, -0.2, 0.5];
        diag.push(1e6);
        diag.extend([0.3, -0.2, 0.5]);
        let es = eigensystem(&BoxOperator::new(0, diag).unwrap());
        assert!(es.orthogonality_defect() <= 1e-9);
        assert!(es.max_residual() <= 1e-8 * es.diameter());
    }

    #[test]
    fn sturm_matches_sign_changes() {
        let op = random_box(40, 9);
        for e in [-3.0, -1.1, 0.0, 0.77, 2.5] {
            let prefixes = det_prefixes(op.diagonal(), e);
            let changes = prefixes.windows(2).filter(|p| p[0].sign != p[1].sign).count();
            assert_eq!(sturm_count(op.diagonal(), e), changes);
        }
    }

    #[test]
    fn characteristic_polynomial_matches() {
        let op = random_box(30, 12);
        let es = eigensystem(&op);
        let e = 0.123;
        let log_prod: f64 = es.values().iter().map(|lam| (e - lam).abs().ln()).sum();
        let p = det_values(op.diagonal(), e);
        assert!(crate::transfer::log_gap(log_prod, p.ln_abs()) < 1e-6);
    }

    #[test]
    fn profile_degenerate_support() {
        let es = EigenSystem::from_parts(
            -2,
            vec![0.0; 3],
            vec![0.0, 1.0, 2.0],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let p = localization_profile(&es, 0).unwrap();
        assert_eq!(p.center, -2);
        assert!(p.alpha_hat.is_none());
        let single = eigensystem(&BoxOperator::new(4, vec![1.0]).unwrap());
        let p = localization_profile(&single, 0).unwrap();
        assert_eq!(p.center, 4);
        assert!(p.alpha_hat.is_none());
    }

    #[test]
    fn profile_leftmost_tie() {
        let es = EigenSystem::from_parts(
            0,
            vec![0.0; 2],
            vec![-1.0, 1.0],
            vec![vec![0.5f64.sqrt(), 0.5f64.sqrt()], vec![0.5f64.sqrt(), -(0.5f64.sqrt())]],
        )
        .unwrap();
        assert_eq!(localization_profile(&es, 0).unwrap().center, 0);
    }

    #[test]
    fn synthetic_exponential_ratio() {
        let n = 41;
        let alpha = 0.3;
        let mut v: Vec<f64> = (0..n).map(|k| (-alpha * (k as f64 - 20.0).abs()).exp()).collect();
        normalize(&mut v);
        let mut vectors = vec![vec![0.0; n]; n];
        vectors[20] = v;
        let es = EigenSystem::from_parts(0, vec![0.0; n], (0..n).map(|k| k as f64 * 0.01).collect(), vectors).unwrap();
        let p = localization_profile(&es, 20).unwrap();
        assert!((p.alpha_hat.unwrap() - alpha).abs() < 1e-12);
        let curve = GammaCurve::from_points(&[(0.0, alpha), (1.0, alpha)]).unwrap();
        let r = decay_vs_lyapunov(&p, &curve).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
        assert!(!r.boundary);
        let edge = localization_profile(&es, 0).unwrap();
        assert!(decay_vs_lyapunov(&edge, &curve).is_err());
    }

    #[test]
    fn sule_trivial_cases() {
        let es = eigensystem(&random_box(50, 6));
        let r = sule_check(&es, 0.0, 0.0).unwrap();
        let max_amp = es.vectors().iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((r.max_c - max_amp).abs() < 1e-12);
        assert!(r.max_c <= 1.0 + 1e-12);
        let single = eigensystem(&BoxOperator::new(0, vec![2.0]).unwrap());
        assert_eq!(sule_check(&single, 0.4, 0.1).unwrap().max_c, 1.0);
    }

    #[test]
    fn single_site_is_exact() {
        let es = eigensystem(&BoxOperator::new(5, vec![0.3]).unwrap());
        assert_eq!(es.values(), &[0.3]);
        assert_eq!(es.vector(0), &[1.0]);
        assert_eq!(es.max_residual(), 0.0);
    }

    #[test]
    fn two_sided_off_spectrum_regular() {
        let w = sample_potential(&bern(), -40, 40, 3).unwrap();
        let curve = GammaCurve::from_points(&[(9.0, 2.0), (11.0, 2.0)]).unwrap();
        let r = two_sided_regularity_check(&w, 0, 10, &[10.0], 0.01, &curve).unwrap();
        assert!(r.rows[0].center_regular && r.rows[0].left_regular && r.rows[0].right_regular);
        assert_eq!(r.failing_fraction, 0.0);
        assert!(two_sided_regularity_check(&w, 0, 20, &[10.0], 0.01, &curve).is_err());
    }

    fn small_cfg() -> NGrowthConfig {
        let grid = crate::lyapunov::linspace(-2.0, 3.0, 21);
        NGrowthConfig {
            n_max: 4,
            horizon: 8,
            eps0: 0.003,
            eta: 0.01,
            delta0: 0.005,
            k: 4.0,
            budget: 16,
            gamma_ref: GammaCurve::from_points(&[(-2.0, 0.1), (3.0, 0.1)]).unwrap(),
            grid,
        }
    }

    #[test]
    fn tiny_budget_is_flagged() {
        let cfg = small_cfg();
        for checker in [Checker::N1, Checker::N2, Checker::N3] {
            let row = n_hat_at(&bern(), 1, 1_000_000, checker, &cfg).unwrap();
            assert!(row.budget_exceeded && !row.within);
        }
    }

    #[test]
    fn horizon_arithmetic() {
        let l = 4.0f64.exp().round() as i64;
        let mut cfg = small_cfg();
        cfg.eps0 = 100.0;
        cfg.n_max = 30;
        // an enormous margin makes N2 hold from the first length
        let r = n_growth_scan(&bern(), 2, &[l, -l], Checker::N2, &cfg).unwrap();
        for row in &r.rows {
            assert_eq!(row.n_hat, Some(1));
            assert!((row.ln2 - (l as f64).ln().powi(2)).abs() < 1e-12);
            assert!(row.within);
        }
        assert_eq!(r.fractions, vec![(l as u64, 1.0)]);
        assert!("n3".parse::<Checker>().is_ok() && "N4".parse::<Checker>().is_err());
    }
}
