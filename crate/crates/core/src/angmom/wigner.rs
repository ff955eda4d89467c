// Wigner 3j and 6j symbols evaluated with exact rational arithmetic.
//
// The alternating Racah sums are accumulated as big rationals and only the
// final square root is taken in floating point, so selection-rule zeros are
// exact and there is no cancellation error.

use super::HalfInt;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

const MAX_FACTORIAL: usize = 400;

fn factorials() -> &'static [BigInt] {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut v = Vec::with_capacity(MAX_FACTORIAL + 1);
        let mut acc = BigInt::one();
        v.push(acc.clone());
        for n in 1..=MAX_FACTORIAL {
            acc *= n;
            v.push(acc.clone());
        }
        v
    })
}

fn fact(n: i32) -> &'static BigInt {
    debug_assert!(n >= 0);
    &factorials()[n as usize]
}

type Key = (u8, [i32; 6]);

fn cache() -> &'static RwLock<HashMap<Key, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<Key, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cached(key: Key, compute: impl FnOnce() -> f64) -> f64 {
    if let Some(v) = cache().read().ok().and_then(|c| c.get(&key).copied()) {
        return v;
    }
    let v = compute();
    if let Ok(mut c) = cache().write() {
        if c.len() < 1_000_000 {
            c.insert(key, v);
        }
    }
    v
}

/// Triangle condition on doubled values, including integer perimeter.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// Delta(abc) = (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!, arguments doubled.
fn triangle_coefficient(a: i32, b: i32, c: i32) -> BigRational {
    let num = fact((a + b - c) / 2) * fact((a - b + c) / 2) * fact((-a + b + c) / 2);
    let den = fact((a + b + c) / 2 + 1).clone();
    BigRational::new(num, den)
}

fn check_size(values: &[i32]) -> Result<()> {
    let total: i32 = values.iter().map(|v| v.abs()).sum();
    if total as usize > MAX_FACTORIAL {
        return Err(Error::invalid("angular momenta too large for the factorial table"));
    }
    Ok(())
}

/// signed sqrt of a rational `prefactor * sum^2`, with the sign of `sum`
fn signed_sqrt(prefactor: &BigRational, sum: &BigRational, negate: bool) -> f64 {
    if sum.is_zero() {
        return 0.0;
    }
    let square = prefactor * sum * sum;
    let magnitude = square.to_f64().unwrap_or(f64::NAN).sqrt();
    let negative = sum.is_negative() ^ negate;
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3).
///
/// Returns exactly 0 when the triangle rule, the projection sum rule or the
/// |m| <= j bounds are violated. Malformed arguments (negative j, or a
/// projection with the wrong parity for its j) are an error.
pub fn wigner_3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> Result<f64> {
    let [tj1, tj2, tj3, tm1, tm2, tm3] = [j1, j2, j3, m1, m2, m3].map(HalfInt::twice);
    for (j, m) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        if j < 0 {
            return Err(Error::invalid(format!("negative angular momentum {}", HalfInt::from_twice(j))));
        }
        if (j - m).rem_euclid(2) != 0 {
            return Err(Error::invalid(format!(
                "projection {} has the wrong parity for j = {}",
                HalfInt::from_twice(m),
                HalfInt::from_twice(j)
            )));
        }
    }
    check_size(&[tj1, tj2, tj3, 2])?;
    if tm1 + tm2 + tm3 != 0 || tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 || !triangle(tj1, tj2, tj3) {
        return Ok(0.0);
    }
    Ok(cached((3, [tj1, tj2, tj3, tm1, tm2, tm3]), || racah_3j(tj1, tj2, tj3, tm1, tm2, tm3)))
}

fn racah_3j(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    // integer combinations entering the factorials
    let a = (tj1 + tj2 - tj3) / 2;
    let b = (tj1 - tm1) / 2;
    let c = (tj2 + tm2) / 2;
    let d = (tj3 - tj2 + tm1) / 2;
    let e = (tj3 - tj1 - tm2) / 2;

    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = fact(k) * fact(d + k) * fact(e + k) * fact(a - k) * fact(b - k) * fact(c - k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }

    let mut prefactor = triangle_coefficient(tj1, tj2, tj3);
    for (j, m) in [(tj1, tm1), (tj2, tm2), (tj3, tm3)] {
        prefactor *= BigRational::from_integer(fact((j + m) / 2) * fact((j - m) / 2));
    }
    // phase (-1)^(j1 - j2 - m3)
    let negate = ((tj1 - tj2 - tm3) / 2).rem_euclid(2) == 1;
    signed_sqrt(&prefactor, &sum, negate)
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6}.
///
/// Returns exactly 0 if any of the four triads (j1 j2 j3), (j1 j5 j6),
/// (j4 j2 j6), (j4 j5 j3) violates the triangle rule.
pub fn wigner_6j(j1: HalfInt, j2: HalfInt, j3: HalfInt, j4: HalfInt, j5: HalfInt, j6: HalfInt) -> Result<f64> {
    let t = [j1, j2, j3, j4, j5, j6].map(HalfInt::twice);
    if let Some(bad) = t.iter().find(|&&x| x < 0) {
        return Err(Error::invalid(format!("negative angular momentum {}", HalfInt::from_twice(*bad))));
    }
    check_size(&[t[0], t[1], t[3], t[4], t[2], t[5], 2])?;
    let [a, b, c, d, e, f] = t;
    if !(triangle(a, b, c) && triangle(a, e, f) && triangle(d, b, f) && triangle(d, e, c)) {
        return Ok(0.0);
    }
    Ok(cached((6, t), || racah_6j(a, b, c, d, e, f)))
}

fn racah_6j(a: i32, b: i32, c: i32, d: i32, e: i32, f: i32) -> f64 {
    let alphas = [(a + b + c) / 2, (a + e + f) / 2, (d + b + f) / 2, (d + e + c) / 2];
    let betas = [(a + b + d + e) / 2, (b + c + e + f) / 2, (c + a + f + d) / 2];
    let t_min = *alphas.iter().max().unwrap();
    let t_max = *betas.iter().min().unwrap();

    let mut sum = BigRational::zero();
    for t in t_min..=t_max {
        let mut den = BigInt::one();
        for &al in &alphas {
            den *= fact(t - al);
        }
        for &be in &betas {
            den *= fact(be - t);
        }
        let term = BigRational::new(fact(t + 1).clone(), den);
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let prefactor = triangle_coefficient(a, b, c)
        * triangle_coefficient(a, e, f)
        * triangle_coefficient(d, b, f)
        * triangle_coefficient(d, e, c);
    signed_sqrt(&prefactor, &sum, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn simple_values() {
        let v = wigner_3j(h(2), h(2), h(0), h(0), h(0), h(0)).unwrap();
        assert!((v + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(wigner_3j(h(2), h(4), h(8), h(0), h(0), h(0)).unwrap(), 0.0);
        let v = wigner_6j(h(2), h(2), h(2), h(2), h(2), h(2)).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms() {
        // (j j 0; m -m 0) = (-1)^(j-m)/sqrt(2j+1)
        for tj in 0..=12 {
            for tm in (-tj..=tj).step_by(2) {
                let v = wigner_3j(h(tj), h(tj), h(0), h(tm), h(-tm), h(0)).unwrap();
                let sign = if ((tj - tm) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((v - sign / f64::from(tj + 1).sqrt()).abs() < 1e-14);
            }
        }
        // {a b c; 0 c b} = (-1)^(a+b+c)/sqrt((2b+1)(2c+1))
        for ta in 0..=8 {
            for tb in 0..=8 {
                for tc in 0..=8 {
                    if !triangle(ta, tb, tc) {
                        assert_eq!(wigner_6j(h(ta), h(tb), h(tc), h(0), h(tc), h(tb)).unwrap(), 0.0);
                        continue;
                    }
                    let v = wigner_6j(h(ta), h(tb), h(tc), h(0), h(tc), h(tb)).unwrap();
                    let sign = if ((ta + tb + tc) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    let expect = sign / (f64::from(tb + 1) * f64::from(tc + 1)).sqrt();
                    assert!((v - expect).abs() < 1e-14, "{ta} {tb} {tc}: {v} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn malformed_inputs() {
        assert!(wigner_3j(h(-2), h(2), h(0), h(0), h(0), h(0)).is_err());
        assert!(wigner_3j(h(2), h(2), h(0), h(1), h(-1), h(0)).is_err());
        assert!(wigner_6j(h(2), h(-1), h(2), h(2), h(2), h(2)).is_err());
        // |m| > j is a selection-rule zero, not an error
        assert_eq!(wigner_3j(h(2), h(2), h(2), h(4), h(-4), h(0)).unwrap(), 0.0);
    }
}
