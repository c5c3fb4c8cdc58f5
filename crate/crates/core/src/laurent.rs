//! Laurent series at infinity in powers of `1/w`.
//!
//! Two flavours share one type: map series `b w + b0 + sum b_k w^-k` with
//! `b > 0`, and unit series `1 + sum a_j w^-j`. Unit series support the
//! formal `log`/`exp`/product operations needed for fractional powers.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::curve::ExteriorMap;
use crate::error::{Error, Result};

/// Hard cap on stored coefficients.
pub const MAX_TERMS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    MapSeries,
    UnitSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentSeries {
    pub b: f64,
    pub b0: Complex64,
    /// Coefficients of `w^-1, w^-2, ...`.
    pub neg_coeffs: Vec<Complex64>,
    pub kind: SeriesKind,
    /// Estimated `sum_{k > N} |b_k|`; zero when the series terminates.
    pub tail_estimate: f64,
    /// The stored coefficients are the whole series.
    pub terminates: bool,
}

/// `log` of a unit series: `sum_{k>=1} c_k w^-k` (no constant term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSeries {
    pub coeffs: Vec<Complex64>,
}

impl LaurentSeries {
    pub fn map_series(b: f64, b0: Complex64, neg_coeffs: Vec<Complex64>) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParams(format!("map series needs b > 0, got {b}")));
        }
        check_len(neg_coeffs.len())?;
        Ok(LaurentSeries {
            b,
            b0,
            neg_coeffs,
            kind: SeriesKind::MapSeries,
            tail_estimate: 0.0,
            terminates: true,
        })
    }

    /// `1 + sum a_j w^-j` with `a = [a_1, a_2, ...]`.
    pub fn unit(neg_coeffs: Vec<Complex64>) -> Result<Self> {
        check_len(neg_coeffs.len())?;
        Ok(LaurentSeries {
            b: 0.0,
            b0: Complex64::new(1.0, 0.0),
            neg_coeffs,
            kind: SeriesKind::UnitSeries,
            tail_estimate: 0.0,
            terminates: true,
        })
    }

    pub fn len(&self) -> usize {
        self.neg_coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neg_coeffs.is_empty()
    }

    /// `b_k` for `k >= 1`, zero beyond the stored range.
    pub fn coeff(&self, k: usize) -> Complex64 {
        if k == 0 {
            self.b0
        } else {
            self.neg_coeffs.get(k - 1).copied().unwrap_or_default()
        }
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.eval_truncated(w, self.neg_coeffs.len())
    }

    /// Evaluate keeping only `w^-1..w^-d`.
    pub fn eval_truncated(&self, w: Complex64, d: usize) -> Complex64 {
        let u = w.inv();
        let d = d.min(self.neg_coeffs.len());
        let tail = self.neg_coeffs[..d]
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| (acc + c) * u);
        w * self.b + self.b0 + tail
    }

    fn truncated_to(&self, n: usize) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self.neg_coeffs.iter().take(n).copied().collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    }

    fn require_unit(&self) -> Result<()> {
        if self.kind != SeriesKind::UnitSeries {
            return Err(Error::InvalidParams("operation needs a unit series".into()));
        }
        Ok(())
    }
}

fn check_len(n: usize) -> Result<()> {
    if n > MAX_TERMS {
        return Err(Error::InvalidParams(format!("{n} coefficients exceeds the {MAX_TERMS} cap")));
    }
    Ok(())
}

/// Laurent coefficients of `psi` from samples on `|w| = rho`.
///
/// Uses `M = 8N` equispaced nodes; `b_k = rho^k * DFT_k / M`. When `tail_tol`
/// is given, the heuristic tail `max(|b_N|, |b_{N-1}|) rho / (rho - 1)` must
/// not exceed it.
pub fn laurent_coeffs(
    map: &ExteriorMap,
    n: usize,
    rho: f64,
    tail_tol: Option<f64>,
) -> Result<LaurentSeries> {
    if n == 0 {
        return Err(Error::InvalidParams("N must be at least 1".into()));
    }
    if !(rho > 1.0 && rho <= 2.0) {
        return Err(Error::InvalidParams(format!("rho must lie in (1, 2], got {rho}")));
    }
    check_len(n)?;
    let m = 8 * n;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let w = Complex64::from_polar(rho, std::f64::consts::TAU * j as f64 / m as f64);
            map.psi_unchecked(w)
        })
        .collect();
    // inverse DFT gives sum_j f_j e^{+2 pi i jk/M}, i.e. the coefficient of w^-k
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let b = (buf[m - 1] * scale / rho).re;
    let b0 = buf[0] * scale;
    let mut neg = Vec::with_capacity(n);
    let mut rk = 1.0;
    for k in 1..=n {
        rk *= rho;
        neg.push(buf[k] * scale * rk);
    }
    // the last two coefficients, so series with vanishing even or odd terms
    // are not mistaken for terminating ones
    let last = neg[n - 1].norm().max(if n > 1 { neg[n - 2].norm() } else { 0.0 });
    let tail = last * rho / (rho - 1.0);
    if let Some(tol) = tail_tol {
        if tail > tol {
            return Err(Error::InsufficientTerms { tail, tol });
        }
    }
    let mut series = LaurentSeries::map_series(b, b0, neg)?;
    series.tail_estimate = tail;
    series.terminates = false;
    Ok(series)
}

/// Formal logarithm of a unit series, truncated at `w^-n`.
pub fn unit_log(s: &LaurentSeries, n: usize) -> Result<LogSeries> {
    s.require_unit()?;
    let a = s.truncated_to(n);
    let nz: Vec<usize> = (1..=n).filter(|&j| a[j - 1] != Complex64::new(0.0, 0.0)).collect();
    // s L' = s'  =>  k c_k = k a_k - sum_{j<k} (k-j) a_j c_{k-j}
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n {
        let mut acc = a[k - 1] * k as f64;
        for &j in nz.iter().take_while(|&&j| j < k) {
            acc -= a[j - 1] * c[k - j - 1] * (k - j) as f64;
        }
        c[k - 1] = acc / k as f64;
    }
    Ok(LogSeries { coeffs: c })
}

/// Formal exponential of a log series, truncated at `w^-n`.
pub fn unit_exp(l: &LogSeries, n: usize) -> LaurentSeries {
    let mut c = l.coeffs.clone();
    c.resize(n, Complex64::new(0.0, 0.0));
    let nz: Vec<usize> = (1..=n).filter(|&j| c[j - 1] != Complex64::new(0.0, 0.0)).collect();
    // E' = L' E  =>  k e_k = sum_{j=1}^k j c_j e_{k-j}
    let mut e = vec![Complex64::new(0.0, 0.0); n + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for &j in nz.iter().take_while(|&&j| j <= k) {
            acc += c[j - 1] * e[k - j] * j as f64;
        }
        e[k] = acc / k as f64;
    }
    e.remove(0);
    let mut out = LaurentSeries::unit(e).expect("n within cap");
    out.terminates = false;
    out
}

impl LogSeries {
    pub fn scaled(&self, factor: f64) -> LogSeries {
        LogSeries {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add(&self, other: &LogSeries) -> LogSeries {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[Complex64], i: usize| v.get(i).copied().unwrap_or_default();
        LogSeries {
            coeffs: (0..n).map(|i| get(&self.coeffs, i) + get(&other.coeffs, i)).collect(),
        }
    }
}

/// Product of two unit series truncated at `w^-n`.
pub fn series_mul(a: &LaurentSeries, b: &LaurentSeries, n: usize) -> Result<LaurentSeries> {
    a.require_unit()?;
    b.require_unit()?;
    let x = a.truncated_to(n);
    let y = b.truncated_to(n);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n {
        let mut acc = x[k - 1] + y[k - 1];
        for i in 1..k {
            acc += x[i - 1] * y[k - i - 1];
        }
        out[k - 1] = acc;
    }
    let mut s = LaurentSeries::unit(out)?;
    s.terminates = a.terminates
        && b.terminates
        && a.neg_coeffs.len() + b.neg_coeffs.len() <= n;
    Ok(s)
}

/// Upper bound for `max_{|w|=1} |sum_{j>d} a_j w^-j|`.
///
/// Sums the stored coefficients past `d` and, unless the series terminates,
/// extrapolates geometrically from the ratio of the last two coefficient
/// blocks. Errors when that ratio is not below one.
pub fn sup_tail_bound(s: &LaurentSeries, d: usize) -> Result<f64> {
    let a = &s.neg_coeffs;
    let n = a.len();
    let stored: f64 = a.iter().skip(d).map(|c| c.norm()).sum();
    if s.terminates || n == 0 {
        return Ok(stored);
    }
    let block = (n / 8).max(1);
    if n < 2 * block {
        return Err(Error::NonDecayingTail { ratio: f64::NAN });
    }
    let s2: f64 = a[n - block..].iter().map(|c| c.norm()).sum();
    if s2 == 0.0 {
        return Ok(stored);
    }
    let s1: f64 = a[n - 2 * block..n - block].iter().map(|c| c.norm()).sum();
    let q = s2 / s1;
    if !(q < 1.0) {
        return Err(Error::NonDecayingTail {
            ratio: q.powf(1.0 / block as f64),
        });
    }
    // the extrapolated blocks start after the stored range, so they belong to
    // the tail for every d <= n
    let extra = s2 * q / (1.0 - q);
    Ok(stored + extra)
}
