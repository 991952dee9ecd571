//! Interpolation tools behind the uniform upper bound on `|P_[0,n](E)|`:
//! Chebyshev-like nodes, their Lebesgue constant, the sine-product bound,
//! and the scan that tests the uniform bound on a dense energy grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI, TAU};

use crate::error::{Error, Result};
use crate::lyapunov::GammaCurve;
use crate::model::{sample_potential, Distribution, PotentialWindow};
use crate::transfer::det_p;

/// Default node phase.
pub const DEFAULT_THETA: f64 = 0.125;

/// Dense-grid points per mean level spacing `A/(n+1)` in the uniform scan.
pub const POINTS_PER_SPACING: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub n: usize,
    pub theta: f64,
    /// `x_i = cos(2π(i+θ)/n)`, `i = 1..n`.
    pub nodes: Vec<f64>,
}

impl NodeSet {
    /// `θ >= 1/4` lies outside the range where the sharper interpolation
    /// constant is proved.
    pub fn outside_sharp_regime(&self) -> bool {
        self.theta >= 0.25
    }

    pub fn min_gap(&self) -> f64 {
        let mut sorted = self.nodes.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min)
    }
}

pub fn chebyshev_like_nodes(n: usize, theta: f64) -> Result<NodeSet> {
    if n < 2 {
        return Err(Error::param("node count must be at least 2"));
    }
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::param(format!("theta must lie in (0, 1/2), got {theta}")));
    }
    let nodes = (1..=n).map(|i| (TAU * (i as f64 + theta) / n as f64).cos()).collect();
    Ok(NodeSet { n, theta, nodes })
}

/// Log-magnitudes and signs of the barycentric weights `1/∏_{j≠i}(x_i-x_j)`.
fn barycentric_weights(nodes: &[f64]) -> Vec<(f64, f64)> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut log = 0.0;
            let mut sign = 1.0;
            for (j, &xj) in nodes.iter().enumerate() {
                if i != j {
                    let d = xi - xj;
                    log -= d.abs().ln();
                    if d < 0.0 {
                        sign = -sign;
                    }
                }
            }
            (log, sign)
        })
        .collect()
}

/// `Σ_i |ℓ_i(x)|` using the barycentric form with weights rescaled by
/// their largest magnitude.
fn lebesgue_function(nodes: &[f64], scaled: &[f64], x: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&xi, &wi) in nodes.iter().zip(scaled) {
        let d = x - xi;
        if d == 0.0 {
            return 1.0;
        }
        let t = wi / d;
        num += t.abs();
        den += t;
    }
    num / den.abs()
}

/// Max of the Lebesgue function over `grid_density` angle-uniform points
/// `cos(πk/(grid_density-1))` of `[-1, 1]`.
pub fn lebesgue_constant(nodes: &NodeSet, grid_density: usize) -> Result<f64> {
    if grid_density < 10 * nodes.n {
        return Err(Error::param(format!(
            "grid density {grid_density} below 10 n = {}",
            10 * nodes.n
        )));
    }
    let weights = barycentric_weights(&nodes.nodes);
    let top = weights.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = weights.iter().map(|(l, s)| s * (l - top).exp()).collect();
    let last = (grid_density - 1) as f64;
    Ok((0..grid_density)
        .into_par_iter()
        .map(|k| lebesgue_function(&nodes.nodes, &scaled, (PI * k as f64 / last).cos()))
        .reduce(|| 0.0, f64::max))
}

/// Value of the Lagrange interpolant through `(nodes, values)` at `x`.
pub fn lagrange_eval(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let weights = barycentric_weights(nodes);
    let top = weights.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&xi, &yi), (l, s)) in nodes.iter().zip(values).zip(&weights) {
        let d = x - xi;
        if d == 0.0 {
            return yi;
        }
        let t = s * (l - top).exp() / d;
        num += t * yi;
        den += t;
    }
    num / den
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineProductSum {
    pub sum: f64,
    /// Index `1..=q` of the smallest `|sin|` term (first on ties).
    pub k0: u64,
    /// Another term besides `k0` vanishes exactly.
    pub degenerate: bool,
}

impl SineProductSum {
    pub fn lower_bound(q: u64) -> f64 {
        (q as f64).ln() + (2.0 / PI).ln()
    }

    pub fn upper_bound(q: u64) -> f64 {
        (q as f64).ln()
    }

    pub fn within_bounds(&self, q: u64) -> bool {
        self.sum > Self::lower_bound(q) && self.sum <= Self::upper_bound(q)
    }
}

/// `Σ_{k≠k0} ln|sin 2π(x + kp/(2q))| + (q-1) ln 2` for coprime `p`, `q`.
pub fn sine_product_sum(p: u64, q: u64, x: f64) -> Result<SineProductSum> {
    if q < 1 {
        return Err(Error::param("q must be at least 1"));
    }
    if gcd(p, q) != 1 {
        return Err(Error::param(format!("p = {p} and q = {q} are not coprime")));
    }
    let two_q = 2 * q;
    let logs: Vec<f64> = (1..=q)
        .map(|k| {
            // reduce the rational part exactly before adding x
            let r = ((k as u128 * p as u128) % two_q as u128) as f64 / two_q as f64;
            let t = (x + r).rem_euclid(1.0);
            (TAU * t).sin().abs().ln()
        })
        .collect();
    let mut k0 = 0;
    for (k, &l) in logs.iter().enumerate() {
        if l < logs[k0] {
            k0 = k;
        }
    }
    let mut sum = (q - 1) as f64 * LN_2;
    let mut degenerate = false;
    for (k, &l) in logs.iter().enumerate() {
        if k != k0 {
            degenerate |= l == f64::NEG_INFINITY;
            sum += l;
        }
    }
    Ok(SineProductSum {
        sum,
        k0: k0 as u64 + 1,
        degenerate,
    })
}

/// Tiling of `[a, a+A]` by `K = ⌊A/δ0⌋ + 1` intervals of length `δ0`
/// (the last one shorter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPartition {
    pub a: f64,
    pub length: f64,
    pub delta0: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl EnergyPartition {
    pub fn new(a: f64, length: f64, delta0: f64) -> Result<Self> {
        if !(length > 0.0) || !(delta0 > 0.0) {
            return Err(Error::param("partition needs positive length and delta0"));
        }
        let k = (length / delta0).floor() as usize + 1;
        let end = a + length;
        let intervals = (0..k)
            .map(|i| {
                let lo = (a + i as f64 * delta0).min(end);
                let hi = if i + 1 == k { end } else { (a + (i + 1) as f64 * delta0).min(end) };
                (lo, hi)
            })
            .collect();
        Ok(Self {
            a,
            length,
            delta0,
            intervals,
        })
    }

    pub fn k(&self) -> usize {
        self.intervals.len()
    }

    /// Affine images `lo + (x_i + 1)·len/2` of the nodes in interval `k`,
    /// with `len` the actual interval length so images stay inside it.
    pub fn node_images(&self, k: usize, nodes: &NodeSet) -> Vec<f64> {
        let (lo, hi) = self.intervals[k];
        let half = 0.5 * (hi - lo);
        nodes.nodes.iter().map(|x| (lo + (x + 1.0) * half).clamp(lo, hi)).collect()
    }
}

const FAMILIES: [fn(i64) -> (i64, i64); 4] = [
    |n| (0, n),
    |n| (-n, 0),
    |n| (n + 1, 2 * n + 1),
    |n| (2 * n + 1, 3 * n + 1),
];

/// Count `(E, family)` with `ln|P| > (γ̂(E) + margin)(n+1)` over the four
/// window families `[0,n]`, `[-n,0]`, `[n+1,2n+1]`, `[2n+1,3n+1]`.
pub fn four_family_violations(
    w: &PotentialWindow,
    n: usize,
    grid: &[f64],
    gammas: &[f64],
    margin: f64,
) -> Result<usize> {
    let ni = n as i64;
    w.check_contains(-ni, 3 * ni + 1)?;
    let len = (n + 1) as f64;
    let counts = grid
        .par_iter()
        .zip(gammas.par_iter())
        .map(|(&e, &g)| {
            let mut c = 0;
            for fam in FAMILIES {
                let (a, b) = fam(ni);
                let p = det_p(w, a, b, e)?;
                c += usize::from(!p.is_zero() && p.ln_abs() > (g + margin) * len);
            }
            Ok(c)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(counts.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformScanRow {
    pub n: usize,
    /// Number of partition intervals.
    pub k: usize,
    pub grid_points: usize,
    pub violations: usize,
    /// `max_E ln|P_[0,n](E)| - (γ̂(E) + 3ε0)(n+1)`.
    pub max_log_excess: f64,
}

/// Dense energy grid of the scan: `POINTS_PER_SPACING` points per `A/(n+1)`.
pub fn dense_grid(a: f64, length: f64, n: usize) -> Vec<f64> {
    let points = POINTS_PER_SPACING * (n + 1) + 1;
    crate::lyapunov::linspace(a, a + length, points)
}

/// Tests `|P_[0,n](E)| <= e^{(γ̂(E)+3ε0)(n+1)}` on a dense grid over
/// `[a, a+A]` for each length, one window per length under `seed`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_bound_scan(
    dist: &Distribution,
    seed: u64,
    a: f64,
    length: f64,
    delta0: f64,
    eps0: f64,
    n_values: &[usize],
    gamma_ref: &GammaCurve,
) -> Result<Vec<UniformScanRow>> {
    let (lo, hi) = gamma_ref.hull();
    if a < lo || a + length > hi {
        return Err(Error::param(format!(
            "gamma curve [{lo}, {hi}] does not cover [{a}, {}]",
            a + length
        )));
    }
    let modulus = gamma_ref.modulus_of_continuity(delta0);
    if modulus > eps0 {
        return Err(Error::param(format!(
            "delta0 = {delta0} gives gamma variation {modulus} > eps0 = {eps0}"
        )));
    }
    let partition = EnergyPartition::new(a, length, delta0)?;
    n_values
        .iter()
        .map(|&n| {
            let w = sample_potential(dist, 0, n as i64, seed)?;
            let grid = dense_grid(a, length, n);
            let len = (n + 1) as f64;
            let excess = grid
                .par_iter()
                .map(|&e| {
                    let g = gamma_ref.gamma_at(e)?;
                    let p = det_p(&w, 0, n as i64, e)?;
                    Ok(p.ln_abs() - (g + 3.0 * eps0) * len)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(UniformScanRow {
                n,
                k: partition.k(),
                grid_points: grid.len(),
                violations: excess.iter().filter(|&&x| x > 0.0).count(),
                max_log_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}
