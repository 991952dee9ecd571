//! LU factorization of general tridiagonal matrices with partial pivoting
//! (row interchanges between neighbours), after LAPACK `dgttrf`/`dgtts2`.

#[derive(Debug, Clone)]
pub struct TridiagLu {
    /// Multipliers of the unit lower factor.
    dl: Vec<f64>,
    /// Diagonal of U.
    d: Vec<f64>,
    /// First superdiagonal of U.
    du: Vec<f64>,
    /// Second superdiagonal of U (fill-in from interchanges).
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    /// Factor the matrix with subdiagonal `sub`, diagonal `diag` and
    /// superdiagonal `sup`.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty matrix");
        assert_eq!(sub.len(), n - 1);
        assert_eq!(sup.len(), n - 1);
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    /// Factor of the symmetric tridiagonal `H - shift` with unit off-diagonals.
    pub fn factor_unit_offdiag(diag: &[f64], shift: f64) -> Self {
        let n = diag.len();
        let d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let ones = vec![1.0; n.saturating_sub(1)];
        Self::factor(&ones, &d, &ones)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Smallest pivot magnitude of U.
    pub fn min_pivot(&self) -> f64 {
        self.d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    /// Replace pivots below `floor` in magnitude by `±floor`.
    pub fn perturb_small_pivots(&mut self, floor: f64) {
        for p in &mut self.d {
            if p.abs() < floor {
                *p = if *p < 0.0 { -floor } else { floor };
            }
        }
    }

    /// Solve in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Number of eigenvalues `<= x` (up to rounding) of the symmetric tridiagonal
/// matrix with diagonal `diag` and unit off-diagonals, counted as negative
/// pivots of the `LDL^T` factorization of `H - x`.
pub fn sturm_count(diag: &[f64], x: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE;
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - 1.0 / q };
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bounds `[min d - 2, max d + 2]` containing every eigenvalue.
pub fn gershgorin(diag: &[f64]) -> (f64, f64) {
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let off = if diag.len() > 1 { 2.0 } else { 0.0 };
    (lo - off, hi + off)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn solves_indefinite_system() {
        // zero leading pivot forces an interchange
        let sub = [1.0, 2.0, -1.0, 0.5];
        let diag = [0.0, 3.0, -2.0, 1e-3, 4.0];
        let sup = [1.0, -1.0, 2.0, 1.0];
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.5];
        let mut b = matvec(&sub, &diag, &sup, &x_true);
        TridiagLu::factor(&sub, &diag, &sup).solve(&mut b);
        for (u, v) in b.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn one_by_one() {
        let lu = TridiagLu::factor(&[], &[4.0], &[]);
        let mut b = [2.0];
        lu.solve(&mut b);
        assert_eq!(b[0], 0.5);
    }

    #[test]
    fn sturm_two_by_two() {
        // eigenvalues of [[0,1],[1,0]] are -1 and 1
        assert_eq!(sturm_count(&[0.0, 0.0], -1.5), 0);
        assert_eq!(sturm_count(&[0.0, 0.0], 0.0), 1);
        assert_eq!(sturm_count(&[0.0, 0.0], 1.0 + 1e-12), 2);
        assert_eq!(sturm_count(&[3.0], 2.9), 0);
        assert_eq!(sturm_count(&[3.0], 3.0), 1);
    }
}
