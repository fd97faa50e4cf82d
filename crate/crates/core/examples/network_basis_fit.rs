// Fits targets on a pretrained network basis and compares with exact monomials.

use basisnet::basis::{progressive_pretrain, PretrainOptions};
use basisnet::nn::{ActivationKind, Architecture, SampleSpec, Sampling};
use basisnet::projection::{default_test_grid, evaluate_fit, fit, Basis, FitConfig};

fn main() -> basisnet::Result<()> {
    let mut opts = PretrainOptions::defaults(1)?;
    opts.arch = Architecture::single_hidden(1, 128, ActivationKind::Gelu)?;
    opts.config.epochs = 1500;
    opts.config.samples = SampleSpec::reference(1, Sampling::UniformRandom { count: 512 });
    opts.tolerance = 1e-3;
    let library = progressive_pretrain(1, 4, &opts)?;
    for net in &library.nets {
        println!("basis x^{}: training MSE {:.2e}", net.spec, net.final_mse);
    }

    type Target = (&'static str, fn(f64) -> f64, [f64; 2]);
    let targets: [Target; 3] = [
        ("x^2 - 3x", |x| x * x - 3.0 * x, [-1.0, 9.0]),
        ("x^3 / 100", |x| x.powi(3) / 100.0, [-20.0, 20.0]),
        ("cos(x)", |x| x.cos(), [-1.0, 1.0]),
    ];
    for (label, g, domain) in targets {
        let f = |p: &[f64]| g(p[0]);
        for basis in [Basis::Network(&library), Basis::Oracle { dimension: 1 }] {
            let model = fit(&basis, 4, &f, &[domain], &FitConfig::defaults(1))?;
            let test = evaluate_fit(&model, &basis, &f, &default_test_grid(&[domain]))?;
            println!(
                "{label:<10} {:<8} test MSE {:.3e}  R^2 {:.8}",
                basis.kind().to_string(),
                test.mse,
                test.r_squared.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
