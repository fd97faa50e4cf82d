//! Builtin target functions with their reference domains and degrees.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

/// A closed-form target on a box.
#[derive(Clone)]
pub struct TargetFunction {
    pub name: &'static str,
    pub formula: &'static str,
    pub dimension: usize,
    pub domain: Vec<[f64; 2]>,
    /// Fit degree used by the approximation suites, when one is prescribed.
    pub max_degree: Option<u32>,
    eval: fn(&[f64]) -> f64,
}

impl TargetFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("formula", &self.formula)
            .field("domain", &self.domain)
            .field("max_degree", &self.max_degree)
            .finish()
    }
}

fn piecewise(x: f64) -> f64 {
    if x < -1.0 {
        x * x * x
    } else if x < 1.0 {
        (PI * x / 2.0).sin()
    } else {
        x
    }
}

type Entry = (
    &'static str,
    &'static str,
    &'static [[f64; 2]],
    Option<u32>,
    fn(&[f64]) -> f64,
);

const UNIT: &[[f64; 2]] = &[[-1.0, 1.0]];
const UNIT2: &[[f64; 2]] = &[[-1.0, 1.0], [-1.0, 1.0]];

const TARGETS: &[Entry] = &[
    ("1d-f1", "exp(sin(x))", UNIT, Some(6), |x| x[0].sin().exp()),
    ("1d-f2", "ln(1 + x^2)", UNIT, Some(8), |x| (x[0] * x[0]).ln_1p()),
    ("1d-f3", "sin(exp(x))", UNIT, Some(8), |x| x[0].exp().sin()),
    ("1d-f4", "cos(x)", &[[4.0, 9.0]], Some(8), |x| x[0].cos()),
    ("1d-f5", "x^2", &[[-1.0, 9.0]], Some(4), |x| x[0] * x[0]),
    (
        "1d-f6",
        "x^3 if x < -1; sin(pi x / 2) if -1 <= x < 1; x otherwise",
        &[[-6.0, 4.0]],
        Some(12),
        |x| piecewise(x[0]),
    ),
    ("2d-f1", "cos(x1 + x2)", UNIT2, Some(4), |x| (x[0] + x[1]).cos()),
    ("2d-f2", "sin(exp(x1))", UNIT2, Some(6), |x| x[0].exp().sin()),
    ("2d-f3", "2^(x1 + x2)", &[[2.0, 3.0], [2.0, 3.0]], Some(6), |x| {
        (x[0] + x[1]).exp2()
    }),
    ("2d-f4", "x1^2 + x2^2", &[[-5.0, 8.0], [-5.0, 8.0]], Some(2), |x| {
        x[0] * x[0] + x[1] * x[1]
    }),
    ("cube", "x^3", UNIT, Some(3), |x| x[0] * x[0] * x[0]),
    ("sine-product", "sin(pi x) sin(4 pi y)", UNIT2, None, |x| {
        (PI * x[0]).sin() * (4.0 * PI * x[1]).sin()
    }),
];

/// Names accepted by [`builtin_target`].
pub fn target_names() -> Vec<&'static str> {
    TARGETS.iter().map(|t| t.0).collect()
}

/// The 1D approximation suite in order.
pub const SUITE_1D: [&str; 6] = ["1d-f1", "1d-f2", "1d-f3", "1d-f4", "1d-f5", "1d-f6"];
/// The 2D approximation suite in order.
pub const SUITE_2D: [&str; 4] = ["2d-f1", "2d-f2", "2d-f3", "2d-f4"];

pub fn builtin_target(name: &str) -> Result<TargetFunction> {
    let (name, formula, domain, max_degree, eval) =
        *TARGETS
            .iter()
            .find(|t| t.0 == name)
            .ok_or_else(|| Error::UnknownTarget {
                name: name.to_string(),
                available: target_names().join(", "),
            })?;
    Ok(TargetFunction {
        name,
        formula,
        dimension: domain.len(),
        domain: domain.to_vec(),
        max_degree,
        eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_branches() {
        let f6 = builtin_target("1d-f6").unwrap();
        assert_eq!(f6.eval(&[-1.0]), -1.0);
        assert_eq!(f6.eval(&[-2.0]), -8.0);
        assert_eq!(f6.eval(&[1.0]), 1.0);
        assert_eq!(f6.eval(&[3.5]), 3.5);
        assert!((f6.eval(&[0.5]) - (PI / 4.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn two_d_values() {
        assert_eq!(builtin_target("2d-f3").unwrap().eval(&[2.0, 3.0]), 32.0);
        assert_eq!(builtin_target("2d-f4").unwrap().eval(&[-5.0, 8.0]), 89.0);
        let f = builtin_target("sine-product").unwrap();
        assert!((f.eval(&[0.5, 0.125]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn suite_degrees_and_domains() {
        let degrees: Vec<u32> = SUITE_1D
            .iter()
            .map(|n| builtin_target(n).unwrap().max_degree.unwrap())
            .collect();
        assert_eq!(degrees, [6, 8, 8, 8, 4, 12]);
        let degrees: Vec<u32> = SUITE_2D
            .iter()
            .map(|n| builtin_target(n).unwrap().max_degree.unwrap())
            .collect();
        assert_eq!(degrees, [4, 6, 6, 2]);
        assert_eq!(builtin_target("1d-f6").unwrap().domain, vec![[-6.0, 4.0]]);
        assert_eq!(builtin_target("2d-f3").unwrap().domain, vec![[2.0, 3.0]; 2]);
    }

    #[test]
    fn finite_on_domain() {
        for name in target_names() {
            let t = builtin_target(name).unwrap();
            for i in 0..=200 {
                let p: Vec<f64> = t.domain.iter().map(|[a, b]| a + (b - a) * i as f64 / 200.0).collect();
                assert!(t.eval(&p).is_finite(), "{name} at {p:?}");
            }
        }
    }

    #[test]
    fn unknown_lists_available() {
        let err = builtin_target("f7").unwrap_err().to_string();
        assert!(err.contains("1d-f6") && err.contains("2d-f4"), "{err}");
    }
}
