//! Lyapunov exponent of the Bernoulli model across the spectrum.

use anderson_lab::lyapunov::{estimate_gamma_trajectory, gamma_grid, linspace};
use anderson_lab::model::spectrum_support;
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let support = spectrum_support(&dist)?;
    let (lo, hi) = support.hull();
    println!("almost-sure spectrum {:?}", support.intervals());

    let curve = gamma_grid(&dist, &linspace(lo, hi, 11), 1000, 100, 1)?;
    println!("{:>8}  {:>9}  {:>9}", "E", "gamma", "stderr");
    for est in curve.estimates() {
        println!("{:>8.4}  {:>9.5}  {:>9.2e}", est.energy, est.gamma_hat, est.stderr);
    }
    println!("nu_hat = min gamma = {:.5}", curve.nu_hat());

    // one long orbit gives the same number without an error bar
    let tr = estimate_gamma_trajectory(&dist, 0.5, 200_000, 2)?;
    println!("trajectory at E = 0.5: {:.5} vs interpolated curve {:.5}", tr.gamma_hat, curve.gamma_at(0.5)?);
    Ok(())
}
