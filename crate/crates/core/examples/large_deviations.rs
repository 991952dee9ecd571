//! Tail probabilities of (1/(n+1)) ln|P_[0,n](E)| around the Lyapunov
//! exponent and the fitted exponential decay rate.

use anderson_lab::ldt::fit_eta;
use anderson_lab::lyapunov::estimate_gamma_mc;
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let energy = 0.5;
    let gamma = estimate_gamma_mc(&dist, energy, 2000, 400, 1)?.gamma_hat;
    let eps = 0.25 * gamma;

    let (fit, stats) = fit_eta(&dist, energy, eps, &[25, 50, 100, 200], 4000, gamma, 2)?;
    println!("gamma(0.5) = {gamma:.5}, eps = {eps:.5}");
    println!("{:>5}  {:>8}  {:>8}  {:>8}", "n", "p_minus", "p_plus", "ci95");
    for s in &stats {
        println!("{:>5}  {:>8.4}  {:>8.4}  {:>8.4}", s.n, s.p_hat_minus, s.p_hat_plus, s.ci95);
    }
    println!("eta_hat = {:.3e} (r2 {:.3}, excluded {:?})", fit.eta_hat, fit.r2, fit.excluded);
    Ok(())
}
