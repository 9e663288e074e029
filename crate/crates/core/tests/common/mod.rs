#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

pub fn choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn pow(base: u64, exp: u64) -> BigUint {
    BigUint::from(base).pow(exp as u32)
}

/// `num / den` to full double precision, including values far below 1.
pub fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = (den.bits() as i64 - num.bits() as i64 + 64).max(0) as u64;
    let q = (num << shift) / den;
    let mut x = q.to_f64().expect("quotient fits in f64");
    let mut s = shift;
    while s > 0 {
        let step = s.min(512);
        x *= 2f64.powi(-(step as i32));
        s -= step;
    }
    x
}

/// Exact Binomial(n, 1/d) pmf numerators over the common denominator d^n.
pub fn binomial_numerators(n: u64, d: u64, k_max: u64) -> (Vec<BigUint>, BigUint) {
    let nums = (0..=k_max.min(n))
        .map(|k| choose(n, k) * pow(d - 1, n - k))
        .collect();
    (nums, pow(d, n))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
