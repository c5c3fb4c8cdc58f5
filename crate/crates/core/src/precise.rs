//! Fixed-point evaluation of Faber polynomials at the cusps of
//! Laurent-polynomial maps.
//!
//! At a cusp the normalized value `e^{-in theta} F_n` can approach its limit
//! geometrically, so the distance to the limit drops below double precision
//! after a few dozen degrees. Here the cusp preimage is refined as a root of
//! `psi'` and the recurrence is run with `P` fractional bits.

use num_bigint::{BigInt, Sign};
use num_complex::Complex64;
use num_traits::{Float, ToPrimitive, Zero};

use crate::curve::ExteriorMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Fx {
    re: BigInt,
    im: BigInt,
}

/// Arithmetic on complex numbers scaled by `2^bits`.
struct Ctx {
    bits: u32,
}

fn from_f64(x: f64, bits: u32) -> BigInt {
    if x == 0.0 {
        return BigInt::zero();
    }
    let (mant, exp, sign) = x.integer_decode();
    let m = BigInt::from(mant) * BigInt::from(sign);
    let shift = exp as i64 + bits as i64;
    if shift >= 0 {
        m << shift as usize
    } else {
        m >> (-shift) as usize
    }
}

/// `x / 2^bits` as an `f64`, keeping the exponent for tiny values.
fn to_f64(x: &BigInt, bits: u32) -> f64 {
    let len = x.bits() as i64;
    let drop = (len - 60).max(0);
    let head = (x >> drop as usize).to_f64().unwrap_or(f64::NAN);
    let e = drop - bits as i64;
    // split the scaling so neither factor under- or overflows on its own
    let half = (e / 2) as i32;
    head * 2f64.powi(half) * 2f64.powi(e as i32 - half)
}

impl Ctx {
    fn c(&self, z: Complex64) -> Fx {
        Fx {
            re: from_f64(z.re, self.bits),
            im: from_f64(z.im, self.bits),
        }
    }

    fn one(&self) -> Fx {
        Fx {
            re: BigInt::from(1) << self.bits as usize,
            im: BigInt::zero(),
        }
    }

    fn zero(&self) -> Fx {
        Fx {
            re: BigInt::zero(),
            im: BigInt::zero(),
        }
    }

    fn add(&self, a: &Fx, b: &Fx) -> Fx {
        Fx {
            re: &a.re + &b.re,
            im: &a.im + &b.im,
        }
    }

    fn sub(&self, a: &Fx, b: &Fx) -> Fx {
        Fx {
            re: &a.re - &b.re,
            im: &a.im - &b.im,
        }
    }

    fn mul(&self, a: &Fx, b: &Fx) -> Fx {
        let s = self.bits as usize;
        Fx {
            re: (&a.re * &b.re - &a.im * &b.im) >> s,
            im: (&a.re * &b.im + &a.im * &b.re) >> s,
        }
    }

    fn scale(&self, a: &Fx, k: i64) -> Fx {
        Fx {
            re: &a.re * k,
            im: &a.im * k,
        }
    }

    fn div(&self, a: &Fx, b: &Fx) -> Fx {
        let s = self.bits as usize;
        let den = &b.re * &b.re + &b.im * &b.im;
        let re = &a.re * &b.re + &a.im * &b.im;
        let im = &a.im * &b.re - &a.re * &b.im;
        Fx {
            re: (re << s) / &den,
            im: (im << s) / &den,
        }
    }

    fn abs(&self, a: &Fx) -> BigInt {
        (&a.re * &a.re + &a.im * &a.im).sqrt()
    }

    fn pow(&self, a: &Fx, mut n: usize) -> Fx {
        let mut base = a.clone();
        let mut acc = self.one();
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            n >>= 1;
        }
        acc
    }
}

/// High-precision boundary value of one Faber polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreciseValue {
    /// `|e^{-in theta} F_n(psi(e^{i theta}))|`.
    pub modulus: f64,
    /// `| modulus - lambda(theta) |`, accurate far below `f64::EPSILON`.
    pub distance: f64,
    pub bits: u32,
}

/// Halvings applied before the exponential series.
const HALVINGS: u32 = 24;

/// `e^{i theta}` for the exact binary value of `theta`.
fn exp_i(cx: &Ctx, theta: f64) -> Fx {
    // theta / 2^HALVINGS, exact in the fixed-point grid
    let x = Fx {
        re: BigInt::zero(),
        im: from_f64(theta, cx.bits - HALVINGS),
    };
    let mut sum = cx.one();
    let mut term = cx.one();
    for k in 1i64.. {
        term = cx.mul(&term, &x);
        term.re /= k;
        term.im /= k;
        if term.re.is_zero() && term.im.is_zero() {
            break;
        }
        sum = cx.add(&sum, &term);
    }
    for _ in 0..HALVINGS {
        sum = cx.mul(&sum, &sum);
    }
    sum
}

/// Refines a corner preimage to a zero of `psi'(w) = b - sum k a_k w^{-k-1}`.
fn refine_corner(cx: &Ctx, b: &Fx, a: &[Fx], theta: f64) -> Option<Fx> {
    let mut w = exp_i(cx, theta);
    let tol = BigInt::from(1) << 24usize;
    for _ in 0..64 {
        let inv = cx.div(&cx.one(), &w);
        let mut d1 = b.clone();
        let mut d2 = cx.zero();
        let mut p = cx.mul(&inv, &inv); // w^{-k-1}
        for (j, ak) in a.iter().enumerate() {
            let k = j as i64 + 1;
            let term = cx.mul(ak, &p);
            d1 = cx.sub(&d1, &cx.scale(&term, k));
            d2 = cx.add(&d2, &cx.scale(&cx.mul(&term, &inv), k * (k + 1)));
            p = cx.mul(&p, &inv);
        }
        if d2.re.is_zero() && d2.im.is_zero() {
            return None;
        }
        let step = cx.div(&d1, &d2);
        w = cx.sub(&w, &step);
        if step.re.magnitude() < tol.magnitude() && step.im.magnitude() < tol.magnitude() {
            let w_f = Complex64::new(to_f64(&w.re, cx.bits), to_f64(&w.im, cx.bits));
            let on_circle = (w_f.norm() - 1.0).abs() < 1e-12;
            return (on_circle && crate::curve::angle_distance(w_f.arg(), theta) < 1e-6).then_some(w);
        }
    }
    None
}

/// Evaluates `e^{-in theta} F_n(psi(e^{i theta}))` on a Laurent-polynomial
/// map with `2n + 192` fractional bits.
///
/// At a declared corner the preimage is first refined to the nearby zero of
/// `psi'`, so the result is the value at the true cusp rather than at the
/// rounded angle. Returns `Ok(None)` when the map is not a finite Laurent
/// series or that refinement fails; callers then fall back to `f64`.
pub fn precise_value(map: &ExteriorMap, theta: f64, n: usize) -> Result<Option<PreciseValue>> {
    if !theta.is_finite() {
        return Err(Error::InvalidParams(format!("theta must be finite, got {theta}")));
    }
    let Some((b, b0, coeffs)) = map.finite_laurent() else {
        return Ok(None);
    };
    let bits = 2 * n as u32 + 192;
    let cx = Ctx { bits };
    let a: Vec<Fx> = coeffs.iter().map(|&c| cx.c(c)).collect();
    let bb = cx.c(Complex64::new(b, 0.0));
    let w = match map.corner_at(theta, 1e-12) {
        Some(k) => match refine_corner(&cx, &bb, &a, map.corners()[k].theta) {
            Some(w) => w,
            None => return Ok(None),
        },
        None => exp_i(&cx, theta),
    };

    let inv = cx.div(&cx.one(), &w);
    let mut z = cx.add(&cx.mul(&bb, &w), &cx.c(b0));
    let mut p = inv.clone();
    for ak in &a {
        z = cx.add(&z, &cx.mul(ak, &p));
        p = cx.mul(&p, &inv);
    }

    // F_{k+1} = ((z - b0) F_k - sum_j a_j F_{k-j} - k a_k) / b
    let shift = cx.sub(&z, &cx.c(b0));
    let mut f: Vec<Fx> = vec![cx.one()];
    for k in 0..n {
        let mut s = cx.mul(&shift, &f[k]);
        for (j, aj) in a.iter().enumerate().take(k) {
            s = cx.sub(&s, &cx.mul(aj, &f[k - j - 1]));
        }
        if k >= 1 && k <= a.len() {
            s = cx.sub(&s, &cx.scale(&a[k - 1], k as i64));
        }
        f.push(cx.div(&s, &bb));
    }
    let v = cx.mul(&f[n], &cx.pow(&inv, n));
    let modulus = cx.abs(&v);
    let gap = &modulus - from_f64(map.lambda_at(theta), bits);
    let distance = match gap.sign() {
        Sign::NoSign => 0.0,
        _ => to_f64(&BigInt::from(gap.magnitude().clone()), bits),
    };
    Ok(Some(PreciseValue {
        modulus: to_f64(&modulus, bits),
        distance,
        bits,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    /// `F_n(3/2)` on the deltoid by the recurrence in exact rationals.
    fn deltoid_exact(n: usize) -> BigRational {
        let z = BigRational::new(3.into(), 2.into());
        let half = BigRational::new(1.into(), 2.into());
        let mut f = vec![BigRational::from_integer(1.into())];
        for k in 0..n {
            let mut s = &z * &f[k];
            if k >= 2 {
                s -= &half * &f[k - 2];
            }
            if k == 2 {
                s -= BigRational::from_integer(1.into());
            }
            f.push(s);
        }
        f.swap_remove(n)
    }

    #[test]
    fn deltoid_cusp_matches_exact_rationals() {
        let d = ExteriorMap::deltoid();
        for n in [3usize, 10, 40, 100, 200, 400] {
            let gap = deltoid_exact(n) - BigRational::from_integer(BigInt::from(2));
            let minus_half = BigRational::new((-1).into(), 2.into());
            assert_eq!(gap, num_traits::pow(minus_half, n), "closed form at n={n}");
            let exact = 2f64.powi(-(n as i32));
            for k in 0..3 {
                let th = d.corners()[k].theta;
                let v = precise_value(&d, th, n).unwrap().expect("deltoid cusps are zeros of psi'");
                let rel = (v.distance - exact).abs() / exact;
                assert!(rel < 1e-12, "n={n} k={k}: {} vs {exact}", v.distance);
                assert!((v.modulus - 2.0).abs() <= exact * 1.01 + 1e-15);
            }
        }
    }

    #[test]
    fn agrees_with_double_precision_at_low_degree() {
        let d = ExteriorMap::deltoid();
        let basis = crate::FaberBasis::new(&d, 12).unwrap();
        for (k, c) in d.corners().iter().enumerate() {
            for n in [2usize, 5, 12] {
                let hp = precise_value(&d, c.theta, n).unwrap().unwrap();
                let lo = basis.normalized_value_at(c.theta, n).norm();
                assert!((hp.modulus - lo).abs() < 1e-12, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn lune_falls_back() {
        assert_eq!(precise_value(&ExteriorMap::lune(), 0.0, 10).unwrap(), None);
        assert!(precise_value(&ExteriorMap::deltoid(), f64::NAN, 10).is_err());
    }

    #[test]
    fn smooth_points_match_double_precision_and_ellipse_identity() {
        let d = ExteriorMap::deltoid();
        let basis = crate::FaberBasis::new(&d, 30).unwrap();
        for th in [0.3, 1.0, 2.5, 4.0, 6.0] {
            let hp = precise_value(&d, th, 30).unwrap().unwrap();
            let lo = basis.normalized_value_at(th, 30).norm();
            assert!((hp.modulus - lo).abs() < 1e-11, "theta={th}");
        }
        // F_n(psi(w)) = w^n + c^n w^-n on the ellipse
        let e = ExteriorMap::ellipse(0.5).unwrap();
        for (th, n) in [(0.7, 9usize), (2.0, 40), (5.5, 120)] {
            let hp = precise_value(&e, th, n).unwrap().unwrap();
            let w = Complex64::from_polar(1.0, th);
            let exact = (w.powi(n as i32) + 0.5f64.powi(n as i32) * w.powi(-(n as i32))).norm();
            assert!((hp.modulus - exact).abs() < 1e-14, "n={n}");
            // |1 + x| - 1 without cancellation, x = c^n e^{-2in theta}
            let x = Complex64::from_polar(0.5f64.powi(n as i32), -2.0 * n as f64 * th);
            let d_exact = (2.0 * x.re + x.norm_sqr()) / ((1.0 + x).norm() + 1.0);
            assert!((hp.distance - d_exact.abs()).abs() <= 1e-6 * d_exact.abs(), "n={n}: {} vs {d_exact}", hp.distance);
        }
    }

    #[test]
    fn exponential_is_accurate() {
        let cx = Ctx { bits: 400 };
        for th in [0.0, 1.0, std::f64::consts::PI, 6.2] {
            let e = exp_i(&cx, th);
            let norm = cx.abs(&e) - (BigInt::from(1) << 400usize);
            assert!(norm.magnitude().bits() < 400 - 300, "theta={th}");
            let z = Complex64::new(to_f64(&e.re, 400), to_f64(&e.im, 400));
            assert!((z - Complex64::from_polar(1.0, th)).norm() < 1e-15);
        }
    }

    #[test]
    fn fixed_point_round_trip() {
        for x in [1.5, -0.25, 3e-40, 1e-300, 7.0] {
            assert_eq!(to_f64(&from_f64(x, 1200), 1200), x);
        }
    }
}
