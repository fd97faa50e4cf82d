// Forward and derivative cost of every activation over a fixed batch.

use basisnet::nn::{time_activation, ActivationKind};

fn main() -> basisnet::Result<()> {
    for kind in ActivationKind::all() {
        let t = time_activation(kind, 50, 10_000);
        println!(
            "{:<8} forward {:>8.3} ms  derivative {:>8.3} ms",
            t.activation,
            t.forward_ns as f64 / 1e6,
            t.backward_ns as f64 / 1e6
        );
    }
    Ok(())
}
