//! Eigenpairs of a 1001-site box, the decay of each eigenfunction and its
//! ratio to the Lyapunov exponent at the same energy.

use anderson_lab::fit::median;
use anderson_lab::lyapunov::{gamma_grid, linspace};
use anderson_lab::model::sample_potential;
use anderson_lab::spectrum::{decay_vs_lyapunov, eigensystem, localization_profile, sule_check, BoxOperator};
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let w = sample_potential(&dist, 0, 1000, 11)?;
    let es = eigensystem(&BoxOperator::from_window(&w, 0, 1000)?);
    println!(
        "dim {}: residual {:.1e}, orthogonality {:.1e}, trace {:.1e}",
        es.dim(),
        es.max_residual(),
        es.orthogonality_defect(),
        es.trace_defect()
    );

    let curve = gamma_grid(&dist, &linspace(-2.0, 3.0, 25), 1000, 100, 1)?;
    let mut ratios = Vec::new();
    for j in 0..es.dim() {
        let prof = localization_profile(&es, j)?;
        if prof.alpha_hat.is_some() {
            let r = decay_vs_lyapunov(&prof, &curve)?;
            if !r.boundary {
                ratios.push(r.ratio);
            }
        }
    }
    println!("median alpha/gamma over {} bulk states: {:.4}", ratios.len(), median(&ratios).unwrap_or(f64::NAN));

    for j in [100, 500, 900] {
        let p = localization_profile(&es, j)?;
        println!("state {j}: E = {:.4}, center {}, alpha {:.4?}, r2 {:.3?}", p.energy, p.center, p.alpha_hat, p.fit_r2);
    }

    let sule = sule_check(&es, 0.5 * curve.nu_hat(), 0.1)?;
    println!("SULE constant at alpha = {:.4}: C = {:.3e}", sule.alpha, sule.max_c);
    Ok(())
}
