//! Interpolation on Chebyshev-like nodes cos(2π(i+θ)/n) and the sine-product
//! sums that control their Lagrange basis.

use anderson_lab::interp::{chebyshev_like_nodes, lagrange_eval, lebesgue_constant, sine_product_sum, SineProductSum};
use anderson_lab::Result;

fn main() -> Result<()> {
    println!("{:>5}  {:>10}  {:>10}", "n", "Lambda_n", "Lambda/ln n");
    for n in [8, 16, 32, 64, 128] {
        let nodes = chebyshev_like_nodes(n, 0.125)?;
        let lambda = lebesgue_constant(&nodes, 50 * n)?;
        println!("{n:>5}  {lambda:>10.4}  {:>10.4}", lambda / (n as f64).ln());
    }

    // interpolating a smooth function is accurate on these nodes
    let nodes = chebyshev_like_nodes(24, 0.125)?;
    let values: Vec<f64> = nodes.nodes.iter().map(|x| (3.0 * x).sin()).collect();
    let err = (0..=100)
        .map(|i| -1.0 + 0.02 * i as f64)
        .map(|x| (lagrange_eval(&nodes.nodes, &values, x) - (3.0 * x).sin()).abs())
        .fold(0.0, f64::max);
    println!("max error interpolating sin(3x) with 24 nodes: {err:.2e}");

    for (p, q) in [(1, 2), (3, 7), (5, 12), (13, 64)] {
        let s = sine_product_sum(p, q, 0.3)?;
        println!(
            "p/q = {p}/{q}: sum = {:.6}, bounds ({:.6}, {:.6}], inside {}",
            s.sum,
            SineProductSum::lower_bound(q),
            SineProductSum::upper_bound(q),
            s.within_bounds(q)
        );
    }
    Ok(())
}
