//! Double-double arithmetic (about 32 significant digits) for the
//! finite-difference oracle, plus an LSTM forward pass written against it.

use std::ops::{Add, Div, Mul, Neg, Sub};

use super::Network;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Multiplication by a power of two is exact.
    fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// exp(x) - 1 for |x| < 0.5: Taylor series on x/1024, then ten doublings
    /// through expm1(2y) = expm1(y)·(expm1(y) + 2).
    fn expm1_small(self) -> Dd {
        let r = self.ldexp(-10);
        let mut term = r;
        let mut sum = r;
        for n in 2..=10 {
            term = term * r / Dd::from_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * (sum + Dd::from_f64(2.0));
        }
        sum
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::from_f64(k);
        (r.expm1_small() + Dd::ONE).ldexp(k as i32)
    }

    pub fn expm1(self) -> Dd {
        if self.hi.abs() < 0.5 {
            self.expm1_small()
        } else {
            self.exp() - Dd::ONE
        }
    }

    pub fn tanh(self) -> Dd {
        let a = self.abs();
        let t = if a.hi > 40.0 {
            Dd::ONE
        } else {
            let e = (a + a).expm1();
            e / (e + Dd::from_f64(2.0))
        };
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

fn dot(weights: &[f64], x: &[Dd]) -> Dd {
    weights
        .iter()
        .zip(x)
        .fold(Dd::ZERO, |acc, (w, v)| acc + Dd::from_f64(*w) * *v)
}

/// Dropout-free forward pass evaluated in double-double. Written directly
/// from the cell equations, independent of the `f64` implementation.
pub(crate) fn predict_dd(network: &Network, input: &Matrix) -> [Dd; 2] {
    let mut seq: Vec<Vec<Dd>> = (0..input.cols())
        .map(|t| input.column(t).into_iter().map(Dd::from_f64).collect())
        .collect();
    for layer in &network.stack.layers {
        let (h, d) = (layer.hidden, layer.input);
        let mut hidden = vec![Dd::ZERO; h];
        let mut cell = vec![Dd::ZERO; h];
        let mut out = Vec::with_capacity(seq.len());
        for x in &seq {
            let pre = |r: usize| {
                Dd::from_f64(layer.input_bias[r])
                    + Dd::from_f64(layer.recurrent_bias[r])
                    + dot(&layer.input_weights[r * d..(r + 1) * d], x)
                    + dot(&layer.recurrent_weights[r * h..(r + 1) * h], &hidden)
            };
            let z: Vec<Dd> = (0..4 * h).map(pre).collect();
            let mut next_h = vec![Dd::ZERO; h];
            for j in 0..h {
                let i = z[j].sigmoid();
                let f = z[h + j].sigmoid();
                let g = z[2 * h + j].tanh();
                let o = z[3 * h + j].sigmoid();
                cell[j] = f * cell[j] + i * g;
                next_h[j] = o * cell[j].tanh();
            }
            hidden = next_h;
            out.push(hidden.clone());
        }
        seq = out;
    }
    let last = seq.last().expect("non-empty sequence");
    let n = network.head.input;
    [0, 1].map(|k| Dd::from_f64(network.head.bias[k]) + dot(&network.head.weights[k * n..(k + 1) * n], last))
}

pub(crate) fn mse_dd(pred: &[Dd; 2], target: &[f64; 2]) -> Dd {
    let dv = pred[0] - Dd::from_f64(target[0]);
    let da = pred[1] - Dd::from_f64(target[1]);
    (dv * dv + da * da).ldexp(-1)
}
