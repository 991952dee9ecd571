//! Green's function of a box two ways, the regular/singular classification,
//! and the deviation sets that explain a singular box.

use anderson_lab::green::{classify, green_abs, green_direct, singularity_implies_deviation};
use anderson_lab::lyapunov::{gamma_grid, linspace};
use anderson_lab::model::sample_potential;
use anderson_lab::{Distribution, Result};

fn main() -> Result<()> {
    let dist = Distribution::bernoulli(0.5, 0.0, 1.0)?;
    let w = sample_potential(&dist, -60, 60, 9)?;
    let energy = 0.37;

    let ratio = green_abs(&w, -40, 40, energy, -40, 40)?;
    let direct = green_direct(&w, -40, 40, energy, -40, 40)?;
    println!("|G(-40, 40)| by determinants {:.6e}, by a tridiagonal solve {:.6e}", ratio.to_f64(), direct.abs());

    let curve = gamma_grid(&dist, &linspace(-2.0, 3.0, 25), 1000, 100, 1)?;
    let eps0 = 0.1 * curve.nu_hat();
    let c = curve.gamma_at(energy)? - 8.0 * eps0;
    let mut singular = 0;
    for n in [5, 10, 20, 40] {
        let v = classify(&w, 0, n, c, energy)?;
        println!(
            "n = {n:>2}: ln|G(0,-n)| = {:>8.3}  ln|G(0,n)| = {:>8.3}  bound {:>8.3}  {:?}",
            v.left_log,
            v.right_log,
            -c * n as f64,
            v.verdict
        );
        if !v.is_regular() {
            singular += 1;
            let wit = singularity_implies_deviation(&w, 0, n, energy, eps0, &curve)?;
            println!("        witness: {wit:?}");
        }
    }
    println!("{singular} singular boxes");
    Ok(())
}
