//! Time evolution on a finite box: the kernel <δ_x, e^{-itH} δ_y>, its
//! eigenfunction-correlator bound and the spatial decay of that bound.

use anderson_lab::dynamics::{correlator_bound, dynamical_decay_fit, kernel_at_t, probe_times, unitarity_defect};
use anderson_lab::model::sample_potential;
use anderson_lab::spectrum::{eigensystem, BoxOperator};
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let w = sample_potential(&dist, 0, 400, 5)?;
    let es = eigensystem(&BoxOperator::from_window(&w, 0, 400)?);
    let y = 200;

    for t in [0.0, 1.0, 10.0, 100.0] {
        let k = kernel_at_t(&es, 210, y, t)?;
        println!("t = {t:>5}: |<d_210, e^(-itH) d_200>| = {:.4e}", k.norm());
    }
    let c = correlator_bound(&es, 210, y)?;
    println!("sup over probe times {:.4e} <= correlator {:.4e}", c.grid_max, c.q);
    println!("unitarity defect {:.1e}", unitarity_defect(&es, y, &probe_times(&es))?);

    let (fit, _) = dynamical_decay_fit(&es, y, 150)?;
    println!(
        "q(x, {y}) ~ {:.3} exp(-{:.4} |x - {y}|), r2 {:.3} over {} points",
        fit.c_dyn, fit.alpha_dyn, fit.r2, fit.points
    );
    Ok(())
}
