//! Time evolution on a finite box through its eigensystem.
//!
//! `⟨δ_x, e^{-itH} δ_y⟩ = Σ_j e^{-itE_j} φ_j(x) φ_j(y)`; its modulus is
//! bounded for every `t` by the eigenfunction correlator
//! `q(x,y) = Σ_j |φ_j(x) φ_j(y)|`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fit::fit_line;
use crate::rng::CounterStream;
use crate::spectrum::EigenSystem;

/// Uniform probe times on `[0, 2π/gap_min]`.
pub const GRID_TIMES: usize = 256;
/// Additional pseudo-random large probe times.
pub const LARGE_TIMES: usize = 8;
/// Correlator values below this are left out of decay fits.
pub const Q_FLOOR: f64 = 1e-14;
/// Minimum number of points for a decay fit.
pub const MIN_FIT_POINTS: usize = 8;

const LARGE_TIME_KEY: u64 = 0xD1_7A_11_CE;

fn index(es: &EigenSystem, site: i64) -> Result<usize> {
    if !es.contains(site) {
        return Err(Error::Bounds {
            a: site,
            b: site,
            lo: es.start(),
            hi: es.end(),
        });
    }
    Ok((site - es.start()) as usize)
}

pub fn kernel_at_t(es: &EigenSystem, x: i64, y: i64, t: f64) -> Result<Complex64> {
    let (ix, iy) = (index(es, x)?, index(es, y)?);
    // accumulate in a fixed order that treats x and y symmetrically
    let mut acc = Complex64::new(0.0, 0.0);
    for (v, &e) in es.vectors().iter().zip(es.values()) {
        let amp = v[ix] * v[iy];
        acc += Complex64::from_polar(amp, -t * e);
    }
    Ok(acc)
}

/// Smallest positive gap between consecutive eigenvalues (`None` for a
/// single state or a fully degenerate spectrum).
pub fn min_gap(es: &EigenSystem) -> Option<f64> {
    es.values()
        .windows(2)
        .map(|p| p[1] - p[0])
        .filter(|&g| g > 0.0)
        .min_by(f64::total_cmp)
}

/// Probe times: a uniform grid over one beat period of the closest pair and
/// a few deterministic large times.
pub fn probe_times(es: &EigenSystem) -> Vec<f64> {
    let span = min_gap(es).map_or(TAU, |g| TAU / g);
    let mut times: Vec<f64> = (0..GRID_TIMES)
        .map(|k| span * k as f64 / (GRID_TIMES - 1) as f64)
        .collect();
    let mut s = CounterStream::new(LARGE_TIME_KEY);
    times.extend((0..LARGE_TIMES).map(|_| span * (10.0 + 1e3 * s.next_f64())));
    times
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlator {
    pub x: i64,
    pub y: i64,
    /// `Σ_j |φ_j(x) φ_j(y)|`.
    pub q: f64,
    /// Largest kernel modulus over the probe times.
    pub grid_max: f64,
}

/// Phases `e^{-i t E_j}` for all probe times, reused across a sweep.
struct Phases {
    table: Vec<Vec<Complex64>>,
}

impl Phases {
    fn new(es: &EigenSystem, times: &[f64]) -> Self {
        let table = times
            .iter()
            .map(|&t| es.values().iter().map(|&e| Complex64::from_polar(1.0, -t * e)).collect())
            .collect();
        Self { table }
    }
}

fn correlator_with(es: &EigenSystem, phases: &Phases, ix: usize, iy: usize) -> (f64, f64) {
    let amps: Vec<f64> = es.vectors().iter().map(|v| v[ix] * v[iy]).collect();
    let q = amps.iter().map(|a| a.abs()).sum();
    let grid_max = phases
        .table
        .iter()
        .map(|row| {
            row.iter()
                .zip(&amps)
                .fold(Complex64::new(0.0, 0.0), |acc, (p, a)| acc + p * a)
                .norm()
        })
        .fold(0.0, f64::max);
    (q, grid_max)
}

pub fn correlator_bound(es: &EigenSystem, x: i64, y: i64) -> Result<Correlator> {
    Ok(correlator_sweep(es, y, &[x])?[0])
}

/// Correlators `(x, y)` for every `x` in `xs`, sharing the phase table.
pub fn correlator_sweep(es: &EigenSystem, y: i64, xs: &[i64]) -> Result<Vec<Correlator>> {
    let iy = index(es, y)?;
    let ixs = xs.iter().map(|&x| index(es, x)).collect::<Result<Vec<_>>>()?;
    let phases = Phases::new(es, &probe_times(es));
    Ok(xs
        .par_iter()
        .zip(ixs.par_iter())
        .map(|(&x, &ix)| {
            let (q, grid_max) = correlator_with(es, &phases, ix, iy);
            Correlator { x, y, q, grid_max }
        })
        .collect())
}

/// `max_t |Σ_x |K(x,y,t)|² - 1|` over the given times.
pub fn unitarity_defect(es: &EigenSystem, y: i64, times: &[f64]) -> Result<f64> {
    let iy = index(es, y)?;
    let phases = Phases::new(es, times);
    Ok(phases
        .table
        .par_iter()
        .map(|row| {
            let total: f64 = (0..es.dim())
                .map(|ix| {
                    row.iter()
                        .zip(es.vectors())
                        .fold(Complex64::new(0.0, 0.0), |acc, (p, v)| acc + p * (v[ix] * v[iy]))
                        .norm_sqr()
                })
                .sum();
            (total - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicalFit {
    pub y0: i64,
    pub radius: i64,
    pub alpha_dyn: f64,
    /// `e^{intercept}`, the fitted prefactor.
    pub c_dyn: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fit `ln q(x, y0) ≈ ln C - α |x - y0|` from given correlator values.
pub fn fit_decay(y0: i64, xs: &[i64], qs: &[f64]) -> Result<DynamicalFit> {
    let (dist, logs): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(qs)
        .filter(|(_, &q)| q >= Q_FLOOR)
        .map(|(&x, &q)| (-((x - y0).abs() as f64), q.ln()))
        .unzip();
    if dist.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} correlator values above the floor, need {MIN_FIT_POINTS}",
            dist.len()
        )));
    }
    let line = fit_line(&dist, &logs)?;
    let radius = xs.iter().map(|x| (x - y0).abs()).max().unwrap_or(0);
    Ok(DynamicalFit {
        y0,
        radius,
        alpha_dyn: line.slope,
        c_dyn: line.intercept.exp(),
        r2: line.r2,
        points: dist.len(),
    })
}

/// Correlator decay around `y0` over `[y0 - radius, y0 + radius]`.
pub fn dynamical_decay_fit(es: &EigenSystem, y0: i64, radius: i64) -> Result<(DynamicalFit, Vec<Correlator>)> {
    if radius < 0 {
        return Err(Error::param("radius must be nonnegative"));
    }
    index(es, y0 - radius)?;
    index(es, y0 + radius)?;
    let xs: Vec<i64> = (y0 - radius..=y0 + radius).collect();
    let iy = index(es, y0)?;
    // q only; the time grid is not needed for the fit
    let qs: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let ix = (x - es.start()) as usize;
            es.vectors().iter().map(|v| (v[ix] * v[iy]).abs()).sum()
        })
        .collect();
    let fit = fit_decay(y0, &xs, &qs)?;
    let rows = xs
        .iter()
        .zip(&qs)
        .map(|(&x, &q)| Correlator {
            x,
            y: y0,
            q,
            grid_max: f64::NAN,
        })
        .collect();
    Ok((fit, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_potential, Distribution};
    use crate::spectrum::{eigensystem, BoxOperator};

    fn random_es(dim: i64, seed: u64) -> EigenSystem {
        let w = sample_potential(&Distribution::bernoulli(0.5, 0.0, 1.0).unwrap(), 0, dim - 1, seed).unwrap();
        eigensystem(&BoxOperator::from_window(&w, 0, dim - 1).unwrap())
    }

    #[test]
    fn identity_at_time_zero() {
        let es = random_es(30, 2);
        for (x, y) in [(0, 0), (3, 7), (29, 29)] {
            let k = kernel_at_t(&es, x, y, 0.0).unwrap();
            let expect = if x == y { 1.0 } else { 0.0 };
            assert!((k.re - expect).abs() < 1e-9 && k.im.abs() < 1e-9);
        }
    }

    #[test]
    fn single_site_is_pure_phase() {
        let es = eigensystem(&BoxOperator::new(0, vec![0.4]).unwrap());
        for t in [0.0, 1.3, 1e4] {
            assert!((kernel_at_t(&es, 0, 0, t).unwrap().norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn free_dimer_oscillates() {
        let es = eigensystem(&BoxOperator::new(0, vec![0.0, 0.0]).unwrap());
        for t in [0.0, 0.3, 1.0, 2.7, 10.0] {
            let k = kernel_at_t(&es, 0, 1, t).unwrap();
            assert!((k.norm() - t.sin().abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_kernel() {
        let es = random_es(25, 4);
        let a = kernel_at_t(&es, 2, 19, 3.3).unwrap();
        let b = kernel_at_t(&es, 19, 2, 3.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn correlator_invariants() {
        let es = random_es(40, 5);
        let c = correlator_bound(&es, 10, 10).unwrap();
        assert!((c.q - 1.0).abs() < 1e-9);
        let sweep = correlator_sweep(&es, 20, &(0..40).collect::<Vec<_>>()).unwrap();
        for c in &sweep {
            assert!(c.grid_max <= c.q + 1e-12);
            assert!(c.q <= 1.0 + 1e-9);
        }
        assert!(unitarity_defect(&es, 20, &probe_times(&es)).unwrap() < 1e-8);
    }

    #[test]
    fn synthetic_decay() {
        let xs: Vec<i64> = (-20..=20).collect();
        let qs: Vec<f64> = xs.iter().map(|&x| (-0.4 * (x as f64).abs()).exp()).collect();
        let fit = fit_decay(0, &xs, &qs).unwrap();
        assert!((fit.alpha_dyn - 0.4).abs() < 1e-9);
        assert!((fit.c_dyn - 1.0).abs() < 1e-9);
    }

    #[test]
    fn radius_zero_fails() {
        let es = random_es(20, 1);
        assert!(matches!(dynamical_decay_fit(&es, 10, 0), Err(Error::Fit(_))));
        assert!(dynamical_decay_fit(&es, 10, 15).is_err());
    }
}
