//! Disorder distributions, potential windows and the almost-sure spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Single-site law of the potential. Its support must be compact and contain
/// at least two points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    /// `v1` with probability `p`, `v0` otherwise.
    Bernoulli { p: f64, v0: f64, v1: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

impl Distribution {
    pub fn bernoulli(p: f64, v0: f64, v1: f64) -> Result<Self> {
        let d = Distribution::Bernoulli { p, v0, v1 };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = Distribution::Uniform { lo, hi };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = Distribution::Discrete { values, weights };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Bernoulli { p, v0, v1 } => {
                if !(v0.is_finite() && v1.is_finite()) {
                    return Err(Error::param("bernoulli values must be finite"));
                }
                if v0 == v1 {
                    return Err(Error::param("bernoulli requires v0 != v1"));
                }
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::param(format!("bernoulli p = {p} must lie in (0, 1)")));
                }
            }
            Distribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::param("uniform bounds must be finite"));
                }
                if lo >= hi {
                    return Err(Error::param(format!("uniform requires lo < hi, got [{lo}, {hi}]")));
                }
            }
            Distribution::Discrete { values, weights } => {
                if values.len() != weights.len() {
                    return Err(Error::param("discrete values and weights differ in length"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::param("discrete values must be finite"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::param("discrete weights must be positive"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(format!("discrete weights sum to {total}, not 1")));
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                sorted.dedup();
                if sorted.len() < 2 {
                    return Err(Error::param("discrete support needs two distinct values"));
                }
            }
        }
        Ok(())
    }

    pub fn support_min(&self) -> f64 {
        match self {
            Distribution::Bernoulli { v0, v1, .. } => v0.min(*v1),
            Distribution::Uniform { lo, .. } => *lo,
            Distribution::Discrete { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn support_max(&self) -> f64 {
        match self {
            Distribution::Bernoulli { v0, v1, .. } => v0.max(*v1),
            Distribution::Uniform { hi, .. } => *hi,
            Distribution::Discrete { values, .. } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Largest `|v|` over the support.
    pub fn support_abs_max(&self) -> f64 {
        self.support_min().abs().max(self.support_max().abs())
    }

    /// Atoms of a purely discrete law; `None` for continuous kinds.
    pub fn atoms(&self) -> Option<Vec<f64>> {
        match self {
            Distribution::Bernoulli { v0, v1, .. } => Some(vec![*v0, *v1]),
            Distribution::Uniform { .. } => None,
            Distribution::Discrete { values, .. } => Some(values.clone()),
        }
    }

    /// Support as closed intervals (degenerate intervals for atoms).
    fn support_pieces(&self) -> Vec<(f64, f64)> {
        match self {
            Distribution::Uniform { lo, hi } => vec![(*lo, *hi)],
            _ => self
                .atoms()
                .unwrap_or_default()
                .into_iter()
                .map(|v| (v, v))
                .collect(),
        }
    }

    /// Inverse CDF. Cumulative weights are compared with strict less-than,
    /// so `u` exactly on a boundary goes to the next atom.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Distribution::Bernoulli { p, v0, v1 } => {
                if u < 1.0 - p {
                    *v0
                } else {
                    *v1
                }
            }
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            Distribution::Discrete { values, weights } => {
                let mut cum = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    cum += w;
                    if u < cum {
                        return *v;
                    }
                }
                *values.last().expect("validated discrete law is nonempty")
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Bernoulli { p, v0, v1 } => (1.0 - p) * v0 + p * v1,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Discrete { values, weights } => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
        }
    }
}

/// Sampling provenance of a window: value at site `i` is
/// `F⁻¹(u(seed, i + offset))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOrigin {
    pub dist: Distribution,
    pub seed: u64,
    pub offset: i64,
}

/// A finite piece of a potential realization on the integer interval
/// `[start, start + len - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialWindow {
    start: i64,
    values: Vec<f64>,
    origin: Option<SampleOrigin>,
}

impl PotentialWindow {
    /// Window from explicit values, e.g. a hand-built potential.
    pub fn from_values(start: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("window must contain at least one site"));
        }
        Ok(Self {
            start,
            values,
            origin: None,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn interval(&self) -> (i64, i64) {
        (self.start, self.end())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> Option<&SampleOrigin> {
        self.origin.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.origin.as_ref().map(|o| o.seed)
    }

    pub fn contains(&self, a: i64, b: i64) -> bool {
        a >= self.start && b <= self.end()
    }

    pub fn check_contains(&self, a: i64, b: i64) -> Result<()> {
        if self.contains(a, b) {
            Ok(())
        } else {
            Err(Error::Bounds {
                a,
                b,
                lo: self.start,
                hi: self.end(),
            })
        }
    }

    pub fn get(&self, site: i64) -> Option<f64> {
        if site < self.start || site > self.end() {
            return None;
        }
        self.values.get((site - self.start) as usize).copied()
    }

    /// Values on `[a, b]`; an empty slice when `b = a - 1`.
    pub fn slice(&self, a: i64, b: i64) -> Result<&[f64]> {
        if b < a {
            return Ok(&[]);
        }
        self.check_contains(a, b)?;
        let i = (a - self.start) as usize;
        let j = (b - self.start) as usize;
        Ok(&self.values[i..=j])
    }

    /// Restriction to a subinterval.
    pub fn restrict(&self, a: i64, b: i64) -> Result<Self> {
        if b < a {
            return Err(Error::param(format!("empty interval [{a}, {b}]")));
        }
        Ok(Self {
            start: a,
            values: self.slice(a, b)?.to_vec(),
            origin: self.origin.clone(),
        })
    }

    /// Same realization on another interval. Only sampled windows can be
    /// extended beyond their stored sites.
    pub fn resample(&self, a: i64, b: i64) -> Result<Self> {
        match &self.origin {
            Some(o) => sample_shifted(&o.dist, a, b, o.seed, o.offset),
            None => self.restrict(a, b),
        }
    }
}

/// Draw the potential on `[a, b]`. The value at site `n` depends only on
/// `(dist, seed, n)`.
pub fn sample_potential(dist: &Distribution, a: i64, b: i64, seed: u64) -> Result<PotentialWindow> {
    sample_shifted(dist, a, b, seed, 0)
}

/// Sample of the shifted realization `T^{-offset} ω`, i.e. value at site `i`
/// is the base realization at `i + offset`.
pub fn sample_shifted(dist: &Distribution, a: i64, b: i64, seed: u64, offset: i64) -> Result<PotentialWindow> {
    dist.validate()?;
    if b < a {
        return Err(Error::param(format!("empty interval [{a}, {b}]")));
    }
    let values = (a..=b)
        .map(|n| dist.inverse_cdf(rng::site_uniform(seed, n + offset)))
        .collect();
    Ok(PotentialWindow {
        start: a,
        values,
        origin: Some(SampleOrigin {
            dist: dist.clone(),
            seed,
            offset,
        }),
    })
}

/// Relabel sites: the result `w'` lives on `[a - l, b - l]` with
/// `w'(i) = w(i + l)`.
pub fn shift(w: &PotentialWindow, l: i64) -> PotentialWindow {
    PotentialWindow {
        start: w.start - l,
        values: w.values.clone(),
        origin: w.origin.as_ref().map(|o| SampleOrigin {
            dist: o.dist.clone(),
            seed: o.seed,
            offset: o.offset + l,
        }),
    }
}

/// Ordered union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    intervals: Vec<(f64, f64)>,
}

impl SpectrumSet {
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, e: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= e && e <= hi)
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.intervals[0].0, self.intervals[self.intervals.len() - 1].1)
    }
}

/// `[-2, 2] + supp μ` as a minimal union of disjoint closed intervals.
pub fn spectrum_support(dist: &Distribution) -> Result<SpectrumSet> {
    dist.validate()?;
    let mut pieces: Vec<(f64, f64)> = dist
        .support_pieces()
        .into_iter()
        .map(|(lo, hi)| (lo - 2.0, hi + 2.0))
        .collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for (lo, hi) in pieces {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    Ok(SpectrumSet { intervals: merged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bern() -> Distribution {
        Distribution::bernoulli(0.5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Distribution::bernoulli(0.0, 0.0, 1.0).is_err());
        assert!(Distribution::bernoulli(0.5, 1.0, 1.0).is_err());
        assert!(Distribution::uniform(1.0, 1.0).is_err());
        assert!(Distribution::discrete(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(Distribution::discrete(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(Distribution::discrete(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(Distribution::discrete(vec![0.0, 1.0, 2.0], vec![0.25, 0.25, 0.5]).is_ok());
    }

    #[test]
    fn json_record_roundtrip() {
        let d: Distribution = serde_json::from_str(r#"{"kind":"bernoulli","p":0.5,"v0":0.0,"v1":1.0}"#).unwrap();
        assert_eq!(d, bern());
        let u: Distribution = serde_json::from_str(r#"{"kind":"uniform","lo":-1,"hi":1}"#).unwrap();
        assert_eq!(u, Distribution::uniform(-1.0, 1.0).unwrap());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_potential(&bern(), 0, 99, 11).unwrap();
        let b = sample_potential(&bern(), 0, 99, 11).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn restriction_matches_subsample() {
        let big = sample_potential(&bern(), 0, 9, 5).unwrap();
        let small = sample_potential(&bern(), 3, 7, 5).unwrap();
        assert_eq!(big.slice(3, 7).unwrap(), small.values());
    }

    #[test]
    fn bernoulli_mean() {
        let w = sample_potential(&bern(), 0, 99_999, 2024).unwrap();
        let mean = w.values().iter().sum::<f64>() / w.len() as f64;
        // binomial 95% interval half-width is 0.0031; the stated band is 0.01
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn discrete_values_are_atoms() {
        let d = Distribution::discrete(vec![-1.0, 0.5, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let w = sample_potential(&d, -50, 50, 9).unwrap();
        for v in w.values() {
            assert!([-1.0, 0.5, 2.0].iter().any(|a| (a - v).abs() <= 1e-12));
        }
    }

    #[test]
    fn discrete_boundary_goes_to_next_atom() {
        let d = Distribution::discrete(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.inverse_cdf(0.5), 1.0);
        assert_eq!(d.inverse_cdf(0.4999), 0.0);
    }

    #[test]
    fn shift_examples() {
        let w = sample_potential(&bern(), 0, 20, 3).unwrap();
        assert_eq!(shift(&w, 0), w);
        assert_eq!(shift(&shift(&w, 3), -3), w);
        let s = shift(&w, 1);
        assert_eq!(s.get(-1), w.get(0));
        assert_eq!(s.interval(), (-1, 19));
    }

    #[test]
    fn shifted_window_extends_consistently() {
        let w = sample_potential(&bern(), 0, 20, 3).unwrap();
        let s = shift(&w, 7);
        let ext = s.resample(-30, 30).unwrap();
        for i in -7..=13 {
            assert_eq!(ext.get(i), w.get(i + 7));
        }
        // and it matches a fresh shifted draw
        let fresh = sample_shifted(&bern(), -30, 30, 3, 7).unwrap();
        assert_eq!(ext.values(), fresh.values());
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum_support(&bern()).unwrap();
        assert_eq!(s.intervals(), &[(-2.0, 3.0)]);
        let gap = spectrum_support(&Distribution::bernoulli(0.5, 0.0, 5.0).unwrap()).unwrap();
        assert_eq!(gap.intervals(), &[(-2.0, 2.0), (3.0, 7.0)]);
        let u = spectrum_support(&Distribution::uniform(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(u.intervals(), &[(-3.0, 3.0)]);
        // touching endpoints merge (gap 0)
        let t = spectrum_support(&Distribution::bernoulli(0.5, 0.0, 4.0).unwrap()).unwrap();
        assert_eq!(t.intervals(), &[(-2.0, 6.0)]);
    }

    proptest! {
        #[test]
        fn nested_windows_agree(seed in any::<u64>(), a in -500i64..500, len in 1i64..200, off in 0i64..50, sub in 1i64..50) {
            let b = a + len - 1;
            let big = sample_potential(&bern(), a, b, seed).unwrap();
            let lo = a + off.min(len - 1);
            let hi = (lo + sub - 1).min(b);
            let small = sample_potential(&bern(), lo, hi, seed).unwrap();
            prop_assert_eq!(big.slice(lo, hi).unwrap(), small.values());
        }

        #[test]
        fn spectrum_support_bounds(values in proptest::collection::vec(-10.0f64..10.0, 2..6)) {
            let mut vs = values.clone();
            vs.sort_by(f64::total_cmp);
            vs.dedup();
            prop_assume!(vs.len() >= 2);
            let w = vec![1.0 / vs.len() as f64; vs.len()];
            let wsum: f64 = w.iter().sum();
            prop_assume!((wsum - 1.0).abs() <= 1e-12);
            let d = Distribution::discrete(vs.clone(), w).unwrap();
            let s = spectrum_support(&d).unwrap();
            prop_assert!(s.total_length() >= 4.0);
            let (lo, hi) = s.hull();
            prop_assert!(lo >= d.support_min() - 2.0 && hi <= d.support_max() + 2.0);
            for pair in s.intervals().windows(2) {
                prop_assert!(pair[0].1 < pair[1].0);
            }
        }
    }
}
