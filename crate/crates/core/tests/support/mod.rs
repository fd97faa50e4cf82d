//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use basisnet::nn::{gradient, loss, ActivationKind, Architecture, Batch, ParamSet};
use num_bigint::BigUint;
use num_traits::{FromPrimitive, One};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use twofloat::TwoFloat;

pub const H: f64 = 1e-7;
const POINTS: usize = 5;

/// `a / b` in double-double. twofloat divides two double-doubles only to
/// double precision; this refines its quotient with two correction steps.
pub fn div_dd(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::from(q1) + q2 + q3
}

/// `e^x - 1` in double-double. twofloat's own `exp`, `ln` and `tanh` are
/// only good to about 1e-11, which swamps a finite difference; its addition
/// and multiplication are exact to about 1e-32, so everything here is built on those.
pub fn expm1_dd(x: TwoFloat) -> TwoFloat {
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = (x - twofloat::consts::LN_2 * k) / 256.0;
    // Taylor series of e^r - 1 for |r| < 0.0014
    let mut term = r;
    let mut sum = r;
    for n in 2..=12 {
        term = term * r / n as f64;
        sum += term;
    }
    // e^(2a) - 1 = (e^a - 1)(e^a - 1 + 2)
    for _ in 0..8 {
        sum = sum * (sum + 2.0);
    }
    if k == 0.0 {
        sum
    } else {
        (sum + 1.0) * 2f64.powi(k as i32) - 1.0
    }
}

pub fn exp_dd(x: TwoFloat) -> TwoFloat {
    expm1_dd(x) + 1.0
}

/// `ln(1 + u)` by one Newton step from the f64 value.
pub fn ln_1p_dd(u: TwoFloat) -> TwoFloat {
    let y0 = TwoFloat::from(u.hi().ln_1p());
    y0 + ((u + 1.0) * exp_dd(-y0) - 1.0)
}

pub fn tanh_dd(z: TwoFloat) -> TwoFloat {
    let neg = z.hi() < 0.0;
    let em = expm1_dd(-2.0 * z.abs());
    let t = -div_dd(em, em + 2.0);
    if neg {
        -t
    } else {
        t
    }
}

/// The activation in double-double arithmetic, written from its definition.
pub fn act_dd(kind: ActivationKind, z: TwoFloat) -> TwoFloat {
    let zero = TwoFloat::from(0.0);
    match kind {
        ActivationKind::Relu => z.max(zero),
        ActivationKind::Sigmoid => div_dd(TwoFloat::from(1.0), 1.0 + exp_dd(-z)),
        ActivationKind::Tanh => tanh_dd(z),
        ActivationKind::Mish => {
            let softplus = z.max(zero) + ln_1p_dd(exp_dd(-z.abs()));
            z * tanh_dd(softplus)
        }
        ActivationKind::Gelu => {
            // x * 0.5 (1 + tanh(u)) with u = sqrt(2/pi) (x + 0.044715 x^3)
            let u = 0.797_884_560_802_865_4 * (z + 0.044_715 * z * z * z);
            div_dd(z, 1.0 + exp_dd(-2.0 * u))
        }
        ActivationKind::Selu { lambda, alpha } => {
            if z.hi() > 0.0 {
                lambda * z
            } else {
                lambda * alpha * expm1_dd(z)
            }
        }
        ActivationKind::Celu { alpha } => {
            if z.hi() > 0.0 {
                z
            } else {
                alpha * expm1_dd(z / alpha)
            }
        }
    }
}

/// Loss by plain loops in double-double, with `delta` added to parameter
/// `bump` (if any), plus the smallest |preactivation| of any hidden unit.
pub fn scalar_loss(
    flat: &[f64],
    bump: Option<(usize, f64)>,
    widths: &[usize],
    act: ActivationKind,
    x: &[Vec<f64>],
    y: &[f64],
) -> (TwoFloat, f64) {
    let theta = |i: usize| match bump {
        Some((j, delta)) if j == i => TwoFloat::from(flat[i]) + delta,
        _ => TwoFloat::from(flat[i]),
    };
    let mut closest = f64::INFINITY;
    let mut sse = TwoFloat::from(0.0);
    for (point, &target) in x.iter().zip(y) {
        let mut a: Vec<TwoFloat> = point.iter().map(|&v| TwoFloat::from(v)).collect();
        let mut at = 0;
        for l in 0..widths.len() - 1 {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let (w0, b0) = (at, at + n_in * n_out);
            at += n_in * n_out + n_out;
            let hidden = l + 2 < widths.len();
            a = (0..n_out)
                .map(|o| {
                    let mut z = theta(b0 + o);
                    for (i, ai) in a.iter().enumerate() {
                        z += theta(w0 + o * n_in + i) * *ai;
                    }
                    if hidden {
                        closest = closest.min(z.hi().abs());
                        act_dd(act, z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        let r = a[0] - target;
        sse += r * r;
    }
    (sse / x.len() as f64, closest)
}

pub fn random_widths(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let hidden = rng.gen_range(1..=3);
    let mut widths = vec![rng.gen_range(1..=3)];
    widths.extend((0..hidden).map(|_| rng.gen_range(1..=8)));
    widths.push(1);
    widths
}

/// Checks `draws` random nets with activation `act`; returns the worst
/// per-parameter relative error `|g - fd| / (|g| + 1e-8)`.
pub fn gradient_check(act: ActivationKind, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < draws {
        let widths = random_widths(rng);
        let arch = Architecture::new(widths.clone(), act).unwrap();
        let flat: Vec<f64> = (0..arch.n_params()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<Vec<f64>> = (0..POINTS)
            .map(|_| (0..widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..POINTS).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let (l0, closest) = scalar_loss(&flat, None, &widths, act, &x, &y);
        let l0 = l0.hi();
        // A step of H may cross a kink of ReLU or SELU; redraw instead.
        if closest < 1e-3 {
            continue;
        }
        let params = ParamSet::from_flat(&arch, &flat).unwrap();
        let batch = Batch::new(POINTS, widths[0], x.concat()).unwrap();
        let lib_loss = loss(&params, &arch, &batch, &y).unwrap();
        assert!(
            (lib_loss - l0).abs() <= 1e-10 * l0.max(1.0),
            "{act}: loss {lib_loss} vs {l0}"
        );

        let analytic = gradient(&params, &arch, &batch, &y).unwrap().to_flat();
        for (i, &g) in analytic.iter().enumerate() {
            let plus = scalar_loss(&flat, Some((i, H)), &widths, act, &x, &y).0;
            let minus = scalar_loss(&flat, Some((i, -H)), &widths, act, &x, &y).0;
            let fd = ((plus - minus) / (2.0 * H)).hi();
            worst = worst.max((g - fd).abs() / (g.abs() + 1e-8));
        }
        done += 1;
    }
    worst
}

/// Smallest `s` with `10^s >= floor(|x|) + 1`, in arbitrary precision.
pub fn exponent_oracle(x: f64) -> u32 {
    let n = BigUint::from_f64(x.abs().floor()).unwrap() + BigUint::one();
    let ten = BigUint::from(10u32);
    let mut power = BigUint::one();
    let mut s = 0;
    while power < n {
        power *= &ten;
        s += 1;
    }
    s
}

/// Distance from `|x|` to the next larger double.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        f64::MIN_POSITIVE * f64::EPSILON
    } else {
        f64::from_bits(a.to_bits() + 1) - a
    }
}
