// How points are scaled into [-1, 1] and how monomial values come back out.

use basisnet::domain::{forward_map, map_domain, unmap_basis_value, ExponentSharing, MappingMode};
use basisnet::nn::Batch;

fn main() -> basisnet::Result<()> {
    println!(
        "{:>12} {:>3} {:>10} {:>14} {:>14}",
        "x", "s", "x_hat", "x^3 unmapped", "x^3"
    );
    for x in [0.5, -0.999, 1.0, 9.5, -10.0, 57.25, 999.0, 1000.0, -123456.0] {
        let m = forward_map(x)?;
        let cube = unmap_basis_value(m.x_hat.powi(3), 3, m.s)?;
        println!(
            "{x:>12} {:>3} {:>10.6} {cube:>14.6e} {:>14.6e}",
            m.s,
            m.x_hat,
            x.powi(3)
        );
    }

    // A 2D batch: pointwise keeps each point's own exponent, uniform uses the
    // largest one for the whole set.
    let pts = Batch::from_points(&[[2.5, 3.0], [40.0, -7.0], [-0.3, 120.0]]);
    for mode in [MappingMode::Pointwise, MappingMode::Uniform] {
        let mapped = map_domain(&pts, mode, ExponentSharing::Shared)?;
        println!("{mode}:");
        for r in 0..mapped.rows() {
            println!(
                "  {:?} -> {:?} with s = {:?}",
                pts.row(r),
                mapped.hat.row(r),
                mapped.exponents_of(r)
            );
        }
    }
    Ok(())
}
