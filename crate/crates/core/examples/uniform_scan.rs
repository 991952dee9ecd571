//! Uniform-in-energy upper bounds: the determinant scan over a partitioned
//! energy range and the norm-based scan over four window families.

use anderson_lab::interp::uniform_bound_scan;
use anderson_lab::lyapunov::{craig_simon_scan, craig_simon_window, gamma_grid, linspace};
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let curve = gamma_grid(&dist, &linspace(-2.0, 3.0, 25), 1000, 100, 1)?;
    let eps0 = 0.1 * curve.nu_hat();
    let delta0 = curve.auto_delta0(eps0);
    let (lo, hi) = curve.hull();
    println!("eps0 = {eps0:.4e}, delta0 = {delta0:.4e}");

    let rows = uniform_bound_scan(&dist, 3, lo, hi - lo, delta0, eps0, &[50, 100, 200, 400], &curve)?;
    for r in &rows {
        println!(
            "n = {:>4}: {} intervals, {} grid points, {} violations, max log excess {:.3}",
            r.n, r.k, r.grid_points, r.violations, r.max_log_excess
        );
    }

    let w = craig_simon_window(&dist, 400, 4)?;
    let cs = craig_simon_scan(&w, &linspace(-2.0, 3.0, 101), &[50, 100, 200, 400], &curve, |_, g| 0.2 * g)?;
    for r in &cs {
        println!("n = {:>4}: norm-bound violation fraction {:.3}", r.n, r.violation_fraction());
    }
    Ok(())
}
