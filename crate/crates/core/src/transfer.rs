//! Transfer matrices and box determinants in overflow-free form.
//!
//! For the box `[a, b]` the transfer matrix is
//!
//! ```text
//! T_[a,b](E) = S(ω_b) ⋯ S(ω_a),   S(v) = [[v - E, -1], [1, 0]]
//!            = [[ P_[a,b],   -P_[a+1,b]   ],
//!               [ P_[a,b-1], -P_[a+1,b-1] ]]
//! ```
//!
//! with `P_[a,b](E) = det(H_[a,b] - E)`. Empty boxes use `P_[a,a-1] = 1`
//! and `P_[a,a-2] = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PotentialWindow;

/// `sign · e^{log_mag}`; `log_mag` is meaningless when `sign == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledScalar {
    pub sign: i8,
    pub log_mag: f64,
}

impl ScaledScalar {
    pub const ONE: ScaledScalar = ScaledScalar { sign: 1, log_mag: 0.0 };
    pub const ZERO: ScaledScalar = ScaledScalar { sign: 0, log_mag: f64::NEG_INFINITY };

    pub fn new(sign: i8, log_mag: f64) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            Self { sign: sign.signum(), log_mag }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                log_mag: x.abs().ln(),
            }
        }
    }

    /// Plain value; overflows to ±∞ or underflows to 0 outside f64 range.
    pub fn to_f64(self) -> f64 {
        if self.sign == 0 {
            0.0
        } else {
            f64::from(self.sign) * self.log_mag.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// `ln|x|`, `-∞` for zero.
    pub fn ln_abs(self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_mag
        }
    }

    pub fn abs(self) -> Self {
        if self.sign == 0 {
            self
        } else {
            Self { sign: 1, log_mag: self.log_mag }
        }
    }

    pub fn neg(self) -> Self {
        Self { sign: -self.sign, log_mag: self.log_mag }
    }

    pub fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            Self::ZERO
        } else {
            Self {
                sign: self.sign * rhs.sign,
                log_mag: self.log_mag + rhs.log_mag,
            }
        }
    }

    /// `None` when dividing by zero.
    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        if rhs.sign == 0 {
            None
        } else if self.sign == 0 {
            Some(Self::ZERO)
        } else {
            Some(Self {
                sign: self.sign * rhs.sign,
                log_mag: self.log_mag - rhs.log_mag,
            })
        }
    }

    /// Relative log-magnitude gap `|l₁ - l₂| / max(1, |l₁|, |l₂|)`; zero when
    /// both vanish and `∞` when the signs differ.
    pub fn log_gap(self, other: Self) -> f64 {
        if self.sign != other.sign {
            return f64::INFINITY;
        }
        if self.sign == 0 {
            return 0.0;
        }
        log_gap(self.log_mag, other.log_mag)
    }
}

/// `|l₁ - l₂| / max(1, |l₁|, |l₂|)`.
pub fn log_gap(l1: f64, l2: f64) -> f64 {
    (l1 - l2).abs() / 1f64.max(l1.abs()).max(l2.abs())
}

pub type Mat2 = [[f64; 2]; 2];

/// `e^{log_scale} · entries` with the largest entry of magnitude exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMatrix {
    pub entries: Mat2,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub const IDENTITY: ScaledMatrix = ScaledMatrix {
        entries: [[1.0, 0.0], [0.0, 1.0]],
        log_scale: 0.0,
    };

    /// Normalize a plain matrix. The zero matrix is not representable.
    pub fn from_matrix(m: Mat2) -> Self {
        let mut out = Self { entries: m, log_scale: 0.0 };
        out.renormalize();
        out
    }

    fn renormalize(&mut self) {
        let s = self
            .entries
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        debug_assert!(s > 0.0 && s.is_finite(), "degenerate matrix");
        if s != 1.0 {
            let inv = 1.0 / s;
            for v in self.entries.iter_mut().flatten() {
                *v *= inv;
            }
            self.log_scale += s.ln();
        }
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            entries: mat_mul(&self.entries, &rhs.entries),
            log_scale: self.log_scale + rhs.log_scale,
        };
        out.renormalize();
        out
    }

    /// `step · self` for a plain left factor, renormalized.
    pub fn left_mul(&self, step: &Mat2) -> ScaledMatrix {
        let mut out = ScaledMatrix {
            entries: mat_mul(step, &self.entries),
            log_scale: self.log_scale,
        };
        out.renormalize();
        out
    }

    /// Entry `(i, j)` (0-based) in sign/log form.
    pub fn entry(&self, i: usize, j: usize) -> ScaledScalar {
        let v = self.entries[i][j];
        if v == 0.0 {
            ScaledScalar::ZERO
        } else {
            ScaledScalar::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln() + self.log_scale)
        }
    }

    /// Deviation of the represented determinant from 1, relative to the
    /// larger of the two products in `ad - bc`. The normalized entries carry
    /// the determinant as `e^{-2 log_scale}`, far below the rounding level
    /// of the products once the matrix grows, so only the relative form is
    /// meaningful.
    pub fn det_residual(&self) -> f64 {
        let e = &self.entries;
        let ad = e[0][0] * e[1][1];
        let bc = e[0][1] * e[1][0];
        let target = (-2.0 * self.log_scale).exp();
        let scale = ad.abs().max(bc.abs()).max(target);
        ((ad - bc) - target).abs() / scale
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// One-site transfer matrix `[[v - E, -1], [1, 0]]`.
pub fn step_matrix(v: f64, energy: f64) -> Mat2 {
    [[v - energy, -1.0], [1.0, 0.0]]
}

/// Product of step matrices over the given site values, first value
/// rightmost.
pub fn transfer_product_values(values: &[f64], energy: f64) -> ScaledMatrix {
    transfer_product_iter(values.iter().copied(), energy)
}

/// Same as [`transfer_product_values`] for a streamed potential.
pub fn transfer_product_iter(values: impl IntoIterator<Item = f64>, energy: f64) -> ScaledMatrix {
    values
        .into_iter()
        .fold(ScaledMatrix::IDENTITY, |acc, v| acc.left_mul(&step_matrix(v, energy)))
}

/// `T_[a,b](E)` over the window's potential.
pub fn transfer_product(w: &PotentialWindow, a: i64, b: i64, energy: f64) -> Result<ScaledMatrix> {
    if b < a {
        return Err(Error::param(format!("transfer product needs a <= b, got [{a}, {b}]")));
    }
    Ok(transfer_product_values(w.slice(a, b)?, energy))
}

/// `ln ‖m‖` in the spectral norm (closed-form 2×2 largest singular value).
pub fn log_norm(m: &ScaledMatrix) -> f64 {
    m.log_scale + largest_singular_value(&m.entries).ln()
}

pub fn largest_singular_value(e: &Mat2) -> f64 {
    let (a, b, c, d) = (e[0][0], e[0][1], e[1][0], e[1][1]);
    0.5 * ((a + d).hypot(b - c) + (a - d).hypot(b + c))
}

// Exact power-of-two rescaling keeps the recurrence bit-identical to the
// unscaled one whenever the latter does not overflow.
const RESCALE_HI: f64 = 1.0e150;
const RESCALE_LO: f64 = 1.0e-150;
const SCALE_FACTOR_LOG2: i32 = 498;

/// Running state of the three-term recurrence
/// `P_k = (ω_k - E) P_{k-1} - P_{k-2}`, stored as `(P_k, P_{k-1})·2^{exp}`.
#[derive(Debug, Clone, Copy)]
pub struct DetRecurrence {
    cur: f64,
    prev: f64,
    exp2: i64,
    energy: f64,
}

impl DetRecurrence {
    /// Start from the empty box: `P_[a,a-1] = 1`, `P_[a,a-2] = 0`.
    pub fn new(energy: f64) -> Self {
        Self { cur: 1.0, prev: 0.0, exp2: 0, energy }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        let next = (v - self.energy) * self.cur - self.prev;
        self.prev = self.cur;
        self.cur = next;
        let m = self.cur.abs().max(self.prev.abs());
        if !(RESCALE_LO..=RESCALE_HI).contains(&m) {
            let k = if m > RESCALE_HI { -SCALE_FACTOR_LOG2 } else { SCALE_FACTOR_LOG2 };
            let f = 2f64.powi(k);
            self.cur *= f;
            self.prev *= f;
            self.exp2 -= i64::from(k);
        }
    }

    fn scaled(&self, x: f64) -> ScaledScalar {
        if x == 0.0 {
            ScaledScalar::ZERO
        } else {
            ScaledScalar::new(
                if x > 0.0 { 1 } else { -1 },
                x.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2,
            )
        }
    }

    /// Determinant of the box processed so far.
    pub fn value(&self) -> ScaledScalar {
        self.scaled(self.cur)
    }

    /// Determinant of the box without its last site.
    pub fn previous(&self) -> ScaledScalar {
        self.scaled(self.prev)
    }
}

/// `P` over a run of site values (empty slice gives 1).
pub fn det_values(values: &[f64], energy: f64) -> ScaledScalar {
    let mut rec = DetRecurrence::new(energy);
    for &v in values {
        rec.push(v);
    }
    rec.value()
}

/// `P_[a,b](E)` for `b >= a - 2`.
pub fn det_p(w: &PotentialWindow, a: i64, b: i64, energy: f64) -> Result<ScaledScalar> {
    match b - a {
        d if d < -2 => Err(Error::param(format!("determinant needs b >= a - 2, got [{a}, {b}]"))),
        -2 => Ok(ScaledScalar::ZERO),
        -1 => Ok(ScaledScalar::ONE),
        _ => Ok(det_values(w.slice(a, b)?, energy)),
    }
}

/// `P_[a, a+k-1]` for `k = 0..=len`.
pub fn det_prefixes(values: &[f64], energy: f64) -> Vec<ScaledScalar> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut rec = DetRecurrence::new(energy);
    out.push(ScaledScalar::ONE);
    for &v in values {
        rec.push(v);
        out.push(rec.value());
    }
    out
}

/// `P_[a+k, b]` for `k = 0..=len` (the last entry is the empty box).
pub fn det_suffixes(values: &[f64], energy: f64) -> Vec<ScaledScalar> {
    let n = values.len();
    let mut out = vec![ScaledScalar::ONE; n + 1];
    let mut rec = DetRecurrence::new(energy);
    for k in (0..n).rev() {
        rec.push(values[k]);
        out[k] = rec.value();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_potential, Distribution};
    use proptest::prelude::*;

    fn bern_window(n: i64, seed: u64) -> PotentialWindow {
        sample_potential(&Distribution::bernoulli(0.5, 0.0, 1.0).unwrap(), 0, n - 1, seed).unwrap()
    }

    #[test]
    fn step_matrix_examples() {
        assert_eq!(step_matrix(0.0, 0.0), [[0.0, -1.0], [1.0, 0.0]]);
        assert_eq!(step_matrix(1.0, 1.0), [[0.0, -1.0], [1.0, 0.0]]);
        let m = step_matrix(0.37, -1.9);
        assert_eq!(m[0][0] * m[1][1] - m[0][1] * m[1][0], 1.0);
    }

    #[test]
    fn single_site_product() {
        let w = PotentialWindow::from_values(4, vec![0.75]).unwrap();
        let t = transfer_product(&w, 4, 4, 0.25).unwrap();
        assert!((t.entry(0, 0).to_f64() - 0.5).abs() < 1e-15);
        assert!((t.entry(0, 1).to_f64() + 1.0).abs() < 1e-15);
        assert!((t.entry(1, 0).to_f64() - 1.0).abs() < 1e-15);
        assert!(t.entry(1, 1).is_zero());
    }

    #[test]
    fn empty_boxes() {
        let w = bern_window(5, 1);
        assert_eq!(det_p(&w, 2, 1, 0.3).unwrap(), ScaledScalar::ONE);
        assert!(det_p(&w, 2, 0, 0.3).unwrap().is_zero());
        assert!(det_p(&w, 2, -1, 0.3).is_err());
    }

    #[test]
    fn exact_zero_determinant() {
        let w = PotentialWindow::from_values(0, vec![0.0, 0.0]).unwrap();
        assert!(det_p(&w, 0, 1, 1.0).unwrap().is_zero());
    }

    #[test]
    fn bounds_error() {
        let w = bern_window(10, 1);
        assert!(matches!(transfer_product(&w, 5, 12, 0.0), Err(Error::Bounds { .. })));
        assert!(matches!(det_p(&w, -1, 3, 0.0), Err(Error::Bounds { .. })));
    }

    #[test]
    fn log_norm_examples() {
        assert_eq!(log_norm(&ScaledMatrix::IDENTITY), 0.0);
        let m = ScaledMatrix::from_matrix([[2.0, 0.0], [0.0, 0.5]]);
        assert!((log_norm(&m) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn no_overflow_for_long_products() {
        let w = sample_potential(&Distribution::uniform(-5.0, 5.0).unwrap(), 0, 99_999, 4).unwrap();
        let t = transfer_product(&w, 0, 99_999, 0.0).unwrap();
        assert!(t.log_scale.is_finite() && t.log_scale > 1000.0);
        assert!(t.det_residual() < 1e-9);
        let p = det_p(&w, 0, 99_999, 0.0).unwrap();
        assert!(p.log_gap(t.entry(0, 0)) < 1e-9);
    }

    #[test]
    fn prefixes_and_suffixes_match_direct() {
        let w = bern_window(30, 8);
        let pre = det_prefixes(w.values(), 0.4);
        let suf = det_suffixes(w.values(), 0.4);
        for k in 0..=30i64 {
            let p = det_p(&w, 0, k - 1, 0.4).unwrap();
            assert!(pre[k as usize].log_gap(p) < 1e-13);
            let s = det_p(&w, k, 29, 0.4).unwrap();
            assert!(suf[k as usize].log_gap(s) < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn entries_are_box_determinants(seed in any::<u64>(), n in 1i64..120, e in -3.0f64..4.0) {
            let w = bern_window(n, seed);
            let b = n - 1;
            let t = transfer_product(&w, 0, b, e).unwrap();
            let p = |a: i64, bb: i64| det_p(&w, a, bb, e).unwrap();
            prop_assert!(t.entry(0, 0).log_gap(p(0, b)) < 1e-9);
            prop_assert!(t.entry(1, 0).log_gap(p(0, b - 1)) < 1e-9);
            prop_assert!(t.entry(0, 1).log_gap(p(1, b).neg()) < 1e-9);
            prop_assert!(t.entry(1, 1).log_gap(p(1, b - 1).neg()) < 1e-9);
            prop_assert!(t.det_residual() < 1e-9);
            prop_assert!(log_norm(&t) >= 0.0);
        }

        #[test]
        fn cocycle_split(seed in any::<u64>(), n in 2i64..150, cut in 0.0f64..1.0, e in -3.0f64..4.0) {
            let w = bern_window(n, seed);
            let b = n - 1;
            let c = ((b as f64) * cut).floor() as i64;
            let c = c.min(b - 1);
            let whole = transfer_product(&w, 0, b, e).unwrap();
            let left = transfer_product(&w, 0, c, e).unwrap();
            let right = transfer_product(&w, c + 1, b, e).unwrap();
            let split = right.mul(&left);
            for i in 0..2 {
                for j in 0..2 {
                    let (x, y) = (whole.entry(i, j), split.entry(i, j));
                    // entries can vanish up to rounding only when E hits a sub-box eigenvalue
                    if x.ln_abs() > whole.log_scale - 20.0 {
                        prop_assert!(x.log_gap(y) < 1e-8, "({i},{j}) {x:?} vs {y:?}");
                    }
                }
            }
        }

        #[test]
        fn determinant_identity(seed in any::<u64>(), n in 3i64..150, e in -3.0f64..4.0) {
            // P[a+1,b]·P[a,b-1] - P[a,b]·P[a+1,b-1] = 1
            let w = bern_window(n, seed);
            let b = n - 1;
            let p = |a: i64, bb: i64| det_p(&w, a, bb, e).unwrap();
            let t1 = p(1, b).mul(p(0, b - 1));
            let t2 = p(0, b).mul(p(1, b - 1));
            let big = t1.ln_abs().max(t2.ln_abs());
            let f = |s: ScaledScalar| if s.is_zero() { 0.0 } else { f64::from(s.sign) * (s.log_mag - big).exp() };
            let v = f(t1) - f(t2);
            prop_assert!((v - (-big).exp()).abs() < 1e-8, "residual {}", v - (-big).exp());
        }
    }
}
