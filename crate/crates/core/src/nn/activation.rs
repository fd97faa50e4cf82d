//! Hidden-layer activations with analytic derivatives.
//!
//! Every function is total on finite inputs. Exponentials are arranged so
//! that they never overflow for the inputs that matter (`|x| <= 700` and well
//! beyond), returning the asymptotic limit instead.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Standard SELU scale.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// Standard SELU negative-branch amplitude.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

const GELU_CUBIC: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
    Mish,
    /// Tanh approximation of the Gaussian error linear unit.
    #[default]
    Gelu,
    Selu {
        lambda: f64,
        alpha: f64,
    },
    Celu {
        alpha: f64,
    },
}

impl ActivationKind {
    pub const fn selu() -> Self {
        ActivationKind::Selu {
            lambda: SELU_LAMBDA,
            alpha: SELU_ALPHA,
        }
    }

    pub const fn celu() -> Self {
        ActivationKind::Celu { alpha: 1.0 }
    }

    /// All seven kinds with their default constants.
    pub fn all() -> [ActivationKind; 7] {
        [
            ActivationKind::Relu,
            ActivationKind::Sigmoid,
            ActivationKind::Tanh,
            ActivationKind::Mish,
            ActivationKind::Gelu,
            ActivationKind::selu(),
            ActivationKind::celu(),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Mish => "mish",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Selu { .. } => "selu",
            ActivationKind::Celu { .. } => "celu",
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Mish => x * softplus(x).tanh(),
            ActivationKind::Gelu => x * logistic(gelu_arg(x)),
            ActivationKind::Selu { lambda, alpha } => {
                if x > 0.0 {
                    lambda * x
                } else {
                    lambda * alpha * x.exp_m1()
                }
            }
            ActivationKind::Celu { alpha } => {
                if x > 0.0 {
                    x
                } else {
                    alpha * (x / alpha).exp_m1()
                }
            }
        }
    }

    #[inline]
    pub fn grad(&self, x: f64) -> f64 {
        self.eval_with_grad(x).1
    }

    /// Value and derivative in one pass, sharing the transcendental calls.
    #[inline]
    pub fn eval_with_grad(&self, x: f64) -> (f64, f64) {
        match *self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                (s, s * (1.0 - s))
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                (t, 1.0 - t * t)
            }
            ActivationKind::Mish => {
                let t = softplus(x).tanh();
                let value = x * t;
                let grad = t + x * (1.0 - t * t) * sigmoid(x);
                (value, grad)
            }
            ActivationKind::Gelu => {
                let s = logistic(gelu_arg(x));
                (x * s, s + x * s * (1.0 - s) * gelu_arg_grad(x))
            }
            ActivationKind::Selu { lambda, alpha } => {
                if x > 0.0 {
                    (lambda * x, lambda)
                } else {
                    let e = x.exp();
                    (lambda * alpha * x.exp_m1(), lambda * alpha * e)
                }
            }
            ActivationKind::Celu { alpha } => {
                if x > 0.0 {
                    (x, 1.0)
                } else {
                    let r = x / alpha;
                    (alpha * r.exp_m1(), r.exp())
                }
            }
        }
    }

    /// Replaces each pre-activation in `z` by its activation and writes the
    /// derivative into `d`. The dispatch sits outside the loop so the inner
    /// loops stay tight.
    pub fn apply_with_grad(&self, z: &mut [f64], d: &mut [f64]) {
        debug_assert_eq!(z.len(), d.len());
        match *self {
            ActivationKind::Gelu => gelu_with_grad(z, d),
            ActivationKind::Relu => {
                for (z, d) in z.iter_mut().zip(d.iter_mut()) {
                    let pos = *z > 0.0;
                    *d = if pos { 1.0 } else { 0.0 };
                    *z = if pos { *z } else { 0.0 };
                }
            }
            kind => {
                for (z, d) in z.iter_mut().zip(d.iter_mut()) {
                    let (v, g) = kind.eval_with_grad(*z);
                    *z = v;
                    *d = g;
                }
            }
        }
    }

    pub fn apply(&self, z: &mut [f64]) {
        match *self {
            ActivationKind::Gelu => gelu_in_place(z),
            kind => z.iter_mut().for_each(|z| *z = kind.eval(*z)),
        }
    }

    pub fn eval_slice(&self, xs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xs.len(), out.len());
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.eval(x);
        }
    }

    pub fn grad_slice(&self, xs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(xs.len(), out.len());
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.grad(x);
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::Relu),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            "mish" => Ok(ActivationKind::Mish),
            "gelu" => Ok(ActivationKind::Gelu),
            "selu" => Ok(ActivationKind::selu()),
            "celu" => Ok(ActivationKind::celu()),
            other => Err(Error::Parse(format!(
                "unknown activation '{other}' (expected relu, sigmoid, tanh, mish, gelu, selu or celu)"
            ))),
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `2u` where `u = sqrt(2/pi) (x + 0.044715 x^3)`; `0.5 (1 + tanh u) = logistic(2u)`.
#[inline(always)]
fn gelu_arg(x: f64) -> f64 {
    2.0 * GELU_SCALE * (x + GELU_CUBIC * (x * x) * x)
}

#[inline(always)]
fn gelu_arg_grad(x: f64) -> f64 {
    2.0 * GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * (x * x))
}

#[inline(always)]
fn gelu_with_grad_generic(z: &mut [f64], d: &mut [f64]) {
    for (z, d) in z.iter_mut().zip(d.iter_mut()) {
        let x = *z;
        let s = logistic(gelu_arg(x));
        *z = x * s;
        *d = s + x * s * (1.0 - s) * gelu_arg_grad(x);
    }
}

#[inline(always)]
fn gelu_in_place_generic(z: &mut [f64]) {
    for z in z.iter_mut() {
        let x = *z;
        *z = x * logistic(gelu_arg(x));
    }
}

// Same arithmetic compiled with wider vectors. No FMA contraction happens in
// either version, so both produce identical bits.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gelu_with_grad_avx2(z: &mut [f64], d: &mut [f64]) {
    gelu_with_grad_generic(z, d)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gelu_in_place_avx2(z: &mut [f64]) {
    gelu_in_place_generic(z)
}

fn gelu_with_grad(z: &mut [f64], d: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe { gelu_with_grad_avx2(z, d) };
    }
    gelu_with_grad_generic(z, d)
}

fn gelu_in_place(z: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe { gelu_in_place_avx2(z) };
    }
    gelu_in_place_generic(z)
}

/// `1 / (1 + e^-x)`; saturates cleanly to 0 or 1.
#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + exp_fast(-x))
}

/// Branch-free `e^x` accurate to a few ulp, written so the compiler can
/// vectorize loops over it. Arguments are clamped to `[-708, 709]`.
#[inline(always)]
pub(crate) fn exp_fast(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let x = x.clamp(-708.0, 709.0);
    let t = x * LOG2E + SHIFTER;
    let k = t - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor polynomial of e^r on |r| <= ln2/2, truncation below 2e-16.
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let scale = f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// ln(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}
