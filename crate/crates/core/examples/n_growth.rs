//! Threshold lengths N̂(l) of the good-box conditions on shifted
//! realizations, compared with ln²|l|.

use anderson_lab::lyapunov::{gamma_grid, linspace};
use anderson_lab::spectrum::{n_growth_scan, Checker, NGrowthConfig};
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let curve = gamma_grid(&dist, &linspace(-2.0, 3.0, 25), 1000, 100, 1)?;
    let eps0 = 0.1 * curve.nu_hat();
    let cfg = NGrowthConfig {
        n_max: 60,
        horizon: 4,
        eps0,
        eta: 0.002,
        delta0: 0.001,
        k: 4.0,
        budget: 32,
        grid: linspace(-2.0, 3.0, 101),
        gamma_ref: curve,
    };
    let report = n_growth_scan(&dist, 17, &[-1000, 1000, -100, 100], Checker::N2, &cfg)?;
    for row in &report.rows {
        println!("l = {:>5}: N = {:?}  ln^2|l| = {:.1}  within {}", row.l, row.n_hat, row.ln2, row.within);
    }
    println!("fractions {:?}", report.fractions);
    Ok(())
}
