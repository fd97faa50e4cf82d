// Least-squares fits of the 1D benchmark targets on exact monomials.

use basisnet::bench::{builtin_target, SUITE_1D};
use basisnet::projection::{default_test_grid, evaluate_fit, fit, Basis, FitConfig};

fn main() -> basisnet::Result<()> {
    let basis = Basis::Oracle { dimension: 1 };
    println!(
        "{:<7} {:>3} {:>12} {:>14} {:>12}",
        "target", "K", "domain", "test MSE", "test R^2"
    );
    for name in SUITE_1D {
        let target = builtin_target(name)?;
        let degree = target.max_degree.unwrap_or(8);
        let f = |p: &[f64]| target.eval(p);
        let model = fit(&basis, degree, &f, &target.domain, &FitConfig::defaults(1))?;
        let test = evaluate_fit(&model, &basis, &f, &default_test_grid(&target.domain))?;
        println!(
            "{name:<7} {degree:>3} {:>12} {:>14.4e} {:>12.8}",
            format!("{:?}", target.domain[0]),
            test.mse,
            test.r_squared.unwrap_or(f64::NAN)
        );
    }

    // x^2 on [-1, 9] with K = 4 recovers the coefficient vector (0, 0, 1, 0, 0).
    let square = builtin_target("1d-f5")?;
    let model = fit(
        &basis,
        4,
        &|p: &[f64]| square.eval(p),
        &square.domain,
        &FitConfig::defaults(1),
    )?;
    println!("coefficients for x^2: {:?}", model.coefficients);
    Ok(())
}
