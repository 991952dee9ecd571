//! Green's function of a finite box.
//!
//! Magnitudes come from the determinant ratio
//! `|G(x,y)| = |P_[a,x-1]| |P_[y+1,b]| / |P_[a,b]|` (x <= y); signed values
//! come only from a pivoted tridiagonal solve, which doubles as the oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::GammaCurve;
use crate::model::PotentialWindow;
use crate::transfer::{det_p, ScaledScalar};
use crate::tridiag::{gershgorin, sturm_count, TridiagLu};

/// Pivots below this magnitude make the direct solve report a singular energy.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Relative distance to the box spectrum (in units of its diameter) below
/// which an energy counts as resonant.
pub const RESONANCE_TOL: f64 = 1e-12;

fn check_sites(a: i64, b: i64, x: i64, y: i64) -> Result<()> {
    for s in [x, y] {
        if s < a || s > b {
            return Err(Error::Bounds { a: s, b: s, lo: a, hi: b });
        }
    }
    Ok(())
}

/// `|G_[a,b](x, y)|` in sign/log form (sign is 1, or 0 for an exact zero).
pub fn green_abs(w: &PotentialWindow, a: i64, b: i64, energy: f64, x: i64, y: i64) -> Result<ScaledScalar> {
    w.check_contains(a, b)?;
    check_sites(a, b, x, y)?;
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    let den = det_p(w, a, b, energy)?;
    if den.is_zero() {
        return Err(Error::SingularEnergy { a, b, energy });
    }
    let num = det_p(w, a, x - 1, energy)?.mul(det_p(w, y + 1, b, energy)?);
    Ok(num
        .abs()
        .checked_div(den.abs())
        .expect("nonzero denominator"))
}

fn factor_box(w: &PotentialWindow, a: i64, b: i64, energy: f64) -> Result<TridiagLu> {
    let lu = TridiagLu::factor_unit_offdiag(w.slice(a, b)?, energy);
    if lu.min_pivot() < PIVOT_FLOOR {
        return Err(Error::SingularEnergy { a, b, energy });
    }
    Ok(lu)
}

/// Column `y` of `(H_[a,b] - E)^{-1}`, indexed from site `a`.
pub fn green_column(w: &PotentialWindow, a: i64, b: i64, energy: f64, y: i64) -> Result<Vec<f64>> {
    w.check_contains(a, b)?;
    check_sites(a, b, y, y)?;
    let lu = factor_box(w, a, b, energy)?;
    let mut rhs = vec![0.0; (b - a + 1) as usize];
    rhs[(y - a) as usize] = 1.0;
    lu.solve(&mut rhs);
    Ok(rhs)
}

/// Signed `G_[a,b](x, y)` by solving `(H - E) u = δ_y`.
pub fn green_direct(w: &PotentialWindow, a: i64, b: i64, energy: f64, x: i64, y: i64) -> Result<f64> {
    check_sites(a, b, x, y)?;
    Ok(green_column(w, a, b, energy, y)?[(x - a) as usize])
}

/// True when `E` is within `RESONANCE_TOL` times the spectral diameter of
/// an eigenvalue of `H_[a,b]`.
pub fn is_resonant(w: &PotentialWindow, a: i64, b: i64, energy: f64) -> Result<bool> {
    let diag = w.slice(a, b)?;
    let (lo, hi) = gershgorin(diag);
    let tol = RESONANCE_TOL * (hi - lo).max(1.0);
    Ok(sturm_count(diag, energy + tol) > sturm_count(diag, energy - tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Regular,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    pub x: i64,
    pub n: i64,
    pub c: f64,
    pub energy: f64,
    /// `ln|G(x, x-n)|`; `+∞` when resonant.
    pub left_log: f64,
    /// `ln|G(x, x+n)|`; `+∞` when resonant.
    pub right_log: f64,
    pub verdict: Verdict,
    /// E sits on (or within tolerance of) the box spectrum.
    pub resonant: bool,
}

impl RegularityVerdict {
    pub fn is_regular(&self) -> bool {
        self.verdict == Verdict::Regular
    }
}

/// Two-sided `e^{-cn}` test of the box `[x-n, x+n]`. Resonant energies are
/// reported as singular with the `resonant` flag set rather than as errors.
pub fn classify(w: &PotentialWindow, x: i64, n: i64, c: f64, energy: f64) -> Result<RegularityVerdict> {
    if n < 0 {
        return Err(Error::param("radius must be nonnegative"));
    }
    let (a, b) = (x - n, x + n);
    w.check_contains(a, b)?;
    let singular = |resonant| RegularityVerdict {
        x,
        n,
        c,
        energy,
        left_log: f64::INFINITY,
        right_log: f64::INFINITY,
        verdict: Verdict::Singular,
        resonant,
    };
    if is_resonant(w, a, b, energy)? {
        return Ok(singular(true));
    }
    let left = match green_abs(w, a, b, energy, x, a) {
        Ok(g) => g.ln_abs(),
        Err(Error::SingularEnergy { .. }) => return Ok(singular(true)),
        Err(e) => return Err(e),
    };
    let right = green_abs(w, a, b, energy, x, b)?.ln_abs();
    let bound = -c * n as f64;
    let verdict = if left <= bound && right <= bound {
        Verdict::Regular
    } else {
        Verdict::Singular
    };
    Ok(RegularityVerdict {
        x,
        n,
        c,
        energy,
        left_log: left,
        right_log: right,
        verdict,
        resonant: false,
    })
}

/// Max over `x ∈ [a,b]` of `|ψ(x) + G(x,a) ψ(a-1) + G(x,b) ψ(b+1)|` for a
/// local solution `ψ` given on `[a-1, b+1]`.
pub fn poisson_identity_check(w: &PotentialWindow, a: i64, b: i64, energy: f64, psi: &[f64]) -> Result<f64> {
    let values = w.slice(a, b)?;
    if values.is_empty() {
        return Err(Error::param("poisson check needs a nonempty box"));
    }
    if psi.len() != values.len() + 2 {
        return Err(Error::Contract(format!(
            "psi must cover [{}, {}] ({} values), got {}",
            a - 1,
            b + 1,
            values.len() + 2,
            psi.len()
        )));
    }
    let scale = psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (k, &v) in values.iter().enumerate() {
        let i = k + 1;
        let r = psi[i - 1] + psi[i + 1] + (v - energy) * psi[i];
        if r.abs() > 1e-8 * scale {
            return Err(Error::Contract(format!(
                "psi is not a solution at site {}: residual {r:e}",
                a + k as i64
            )));
        }
    }
    let col_a = green_column(w, a, b, energy, a)?;
    let col_b = green_column(w, a, b, energy, b)?;
    let (left, right) = (psi[0], psi[psi.len() - 1]);
    // G is symmetric, so column a holds G(x, a)
    Ok((0..values.len())
        .map(|k| (psi[k + 1] + col_a[k] * left + col_b[k] * right).abs())
        .fold(0.0, f64::max))
}

/// Membership of `(E, ω)` in the deviation sets around a singular box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `(1/(2n+1)) ln|P_[x-n,x+n]| <= γ̂ - ε0` (vanishing determinant included).
    pub minus_full: bool,
    /// Upper deviation on `[x-n, x]`.
    pub plus_left: bool,
    /// Upper deviation on `[x, x+n]`.
    pub plus_right: bool,
    /// Upper deviation on `[x-n, x-1]`, the factor appearing in `G(x, x+n)`.
    pub plus_left_inner: bool,
    /// Upper deviation on `[x+1, x+n]`, the factor appearing in `G(x, x-n)`.
    pub plus_right_inner: bool,
}

impl Witness {
    pub fn is_nonempty(&self) -> bool {
        self.minus_full || self.plus_left || self.plus_right || self.plus_left_inner || self.plus_right_inner
    }

    /// Witnessed by the three sets on `[x-n,x+n]`, `[x-n,x]`, `[x,x+n]`.
    pub fn closed_arms(&self) -> bool {
        self.minus_full || self.plus_left || self.plus_right
    }
}

fn plus_deviation(w: &PotentialWindow, a: i64, b: i64, energy: f64, gamma: f64, eps: f64) -> Result<bool> {
    let p = det_p(w, a, b, energy)?;
    Ok(!p.is_zero() && p.ln_abs() >= (gamma + eps) * (b - a + 1) as f64)
}

/// For a box that is `(γ̂(E) - 8ε0, n, E, ω)`-singular, report which deviation
/// sets contain `(E, ω)`. A regular box is a contract error.
pub fn singularity_implies_deviation(
    w: &PotentialWindow,
    x: i64,
    n: i64,
    energy: f64,
    eps0: f64,
    gamma_ref: &GammaCurve,
) -> Result<Witness> {
    if n < 2 {
        return Err(Error::param("witness needs n >= 2"));
    }
    let gamma = gamma_ref.gamma_at(energy)?;
    let verdict = classify(w, x, n, gamma - 8.0 * eps0, energy)?;
    if verdict.is_regular() {
        return Err(Error::Contract(format!(
            "box [{}, {}] is regular at E = {energy}",
            x - n,
            x + n
        )));
    }
    let full = det_p(w, x - n, x + n, energy)?;
    let minus_full = full.is_zero() || full.ln_abs() <= (gamma - eps0) * (2 * n + 1) as f64;
    Ok(Witness {
        minus_full,
        plus_left: plus_deviation(w, x - n, x, energy, gamma, eps0)?,
        plus_right: plus_deviation(w, x, x + n, energy, gamma, eps0)?,
        plus_left_inner: plus_deviation(w, x - n, x - 1, energy, gamma, eps0)?,
        plus_right_inner: plus_deviation(w, x + 1, x + n, energy, gamma, eps0)?,
    })
}
