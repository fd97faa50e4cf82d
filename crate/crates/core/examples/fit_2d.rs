// 2D fits on exact monomials, with both mapping modes.

use basisnet::bench::{builtin_target, SUITE_2D};
use basisnet::domain::MappingMode;
use basisnet::projection::{default_test_grid, evaluate_fit, fit, Basis, FitConfig, MappingOptions};

fn main() -> basisnet::Result<()> {
    let basis = Basis::Oracle { dimension: 2 };
    for name in SUITE_2D {
        let target = builtin_target(name)?;
        let f = |p: &[f64]| target.eval(p);
        for mode in [MappingMode::Pointwise, MappingMode::Uniform] {
            let config = FitConfig {
                mapping: MappingOptions {
                    mode,
                    ..Default::default()
                },
                ..FitConfig::defaults(2)
            };
            let degree = target.max_degree.unwrap_or(6);
            let model = fit(&basis, degree, &f, &target.domain, &config)?;
            let test = evaluate_fit(&model, &basis, &f, &default_test_grid(&target.domain))?;
            println!(
                "{name} {:<26} K={degree} {mode:<9} test MSE {:.3e}  R^2 {:.10}  cond {:.1e}",
                target.formula,
                test.mse,
                test.r_squared.unwrap_or(f64::NAN),
                model.condition_estimate
            );
        }
    }
    Ok(())
}
