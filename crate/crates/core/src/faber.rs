//! Faber polynomials of an exterior map.
//!
//! `F_0 = 1` and
//! `F_{k+1} = ((z - b0) F_k - sum_{j=1}^{k} b_j F_{k-j} - k b_k) / b`,
//! which follows from the generating function
//! `w psi'(w) / (psi(w) - z) = sum_k F_k(z) w^-k`.
//!
//! [`faber_sequence`] runs the recurrence on monomial coefficients.
//! [`FaberBasis`] runs it on values at a single point instead, which stays
//! accurate for degrees in the hundreds where monomial coefficients cancel
//! catastrophically on the boundary.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{BoundaryMesh, ExteriorMap};
use crate::error::{Error, Result};
use crate::laurent::{laurent_coeffs, LaurentSeries, SeriesKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `c_0 + c_1 z + ... + c_n z^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Fails when the coefficient list is empty or the leading one is zero.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        match coeffs.last() {
            None => Err(Error::InvalidParams("polynomial needs at least one coefficient".into())),
            Some(c) if *c == ZERO && coeffs.len() > 1 => {
                Err(Error::InvalidParams("leading coefficient is zero".into()))
            }
            _ => Ok(Polynomial { coeffs }),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Horner evaluation.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    pub(crate) fn axpy(&mut self, a: Complex64, other: &Polynomial) {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), ZERO);
        }
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += a * o;
        }
    }
}

/// Map series of `psi` suitable for the recurrence up to degree `n_max`.
///
/// Laurent-polynomial maps give their exact coefficients; the lune falls back
/// to the FFT extraction on a circle just outside the unit circle.
pub fn map_series(map: &ExteriorMap, n_max: usize) -> Result<LaurentSeries> {
    match map.finite_laurent() {
        Some((b, b0, coeffs)) => LaurentSeries::map_series(b, b0, coeffs),
        None => {
            let n = n_max.max(64);
            let rho = (1.0 + 2.0 / n as f64).min(1.5);
            laurent_coeffs(map, n, rho, None)
        }
    }
}

/// `F_0..=F_{n_max}` as monomial polynomials.
pub fn faber_sequence(series: &LaurentSeries, n_max: usize) -> Result<Vec<Polynomial>> {
    if series.kind != SeriesKind::MapSeries || !(series.b > 0.0) {
        return Err(Error::InvalidParams("Faber polynomials need a map series with b > 0".into()));
    }
    if !series.terminates && series.len() + 1 < n_max {
        return Err(Error::InvalidParams(format!(
            "series holds {} coefficients, degree {n_max} needs {}",
            series.len(),
            n_max.saturating_sub(1)
        )));
    }
    let inv_b = 1.0 / series.b;
    let mut out: Vec<Polynomial> = Vec::with_capacity(n_max + 1);
    out.push(Polynomial { coeffs: vec![ONE] });
    for k in 0..n_max {
        // z F_k
        let mut next = vec![ZERO; k + 2];
        next[1..].copy_from_slice(&out[k].coeffs);
        let mut p = Polynomial { coeffs: next };
        p.axpy(-series.b0, &out[k]);
        for j in 1..=k {
            let bj = series.coeff(j);
            if bj != ZERO {
                p.axpy(-bj, &out[k - j]);
            }
        }
        if k >= 1 {
            p.coeffs[0] -= series.coeff(k) * k as f64;
        }
        for c in p.coeffs.iter_mut() {
            *c *= inv_b;
        }
        out.push(p);
    }
    Ok(out)
}

/// Pointwise evaluator for `F_0..F_{n_max}` on one map.
#[derive(Debug, Clone)]
pub struct FaberBasis {
    map: ExteriorMap,
    series: LaurentSeries,
    /// `(j, b_j)` for the nonzero `b_j`, `1 <= j <= n_max`.
    nonzero: Vec<(usize, Complex64)>,
    n_max: usize,
}

impl FaberBasis {
    pub fn new(map: &ExteriorMap, n_max: usize) -> Result<Self> {
        let series = map_series(map, n_max)?;
        let nonzero = (1..=n_max)
            .map(|j| (j, series.coeff(j)))
            .filter(|(_, c)| c.norm() > 1e-15 * series.b)
            .collect();
        Ok(FaberBasis {
            map: map.clone(),
            series,
            nonzero,
            n_max,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn map(&self) -> &ExteriorMap {
        &self.map
    }

    pub fn series(&self) -> &LaurentSeries {
        &self.series
    }

    /// Monomial forms of `F_0..=F_n`.
    pub fn polynomials(&self, n: usize) -> Result<Vec<Polynomial>> {
        faber_sequence(&self.series, n)
    }

    /// `F_0(z)..=F_n(z)`, `n <= n_max`.
    pub fn values(&self, z: Complex64, n: usize) -> Vec<Complex64> {
        let n = n.min(self.n_max);
        let inv_b = 1.0 / self.series.b;
        let shift = z - self.series.b0;
        let mut f = Vec::with_capacity(n + 1);
        f.push(ONE);
        let mut idx = 0; // nonzero[..idx] have j <= k
        for k in 0..n {
            while idx < self.nonzero.len() && self.nonzero[idx].0 <= k {
                idx += 1;
            }
            let mut s = shift * f[k] - self.series.coeff(k.max(1)) * k as f64;
            for &(j, bj) in &self.nonzero[..idx] {
                s -= bj * f[k - j];
            }
            f.push(s * inv_b);
        }
        f
    }

    /// `F_0..=F_n` at `psi(e^{i theta})`.
    pub fn values_at(&self, theta: f64, n: usize) -> Vec<Complex64> {
        self.values(self.map.psi_boundary(theta), n)
    }

    pub fn value_at(&self, theta: f64, n: usize) -> Complex64 {
        self.values_at(theta, n)[n.min(self.n_max)]
    }

    /// `e^{-i n theta} F_n(psi(e^{i theta}))`.
    pub fn normalized_value_at(&self, theta: f64, n: usize) -> Complex64 {
        self.value_at(theta, n) * Complex64::from_polar(1.0, -(n as f64) * theta)
    }

    /// Rows `F_0..=F_n` at every `theta`, computed in parallel.
    pub fn value_matrix(&self, thetas: &[f64], n: usize) -> Vec<Vec<Complex64>> {
        thetas.par_iter().map(|&t| self.values_at(t, n)).collect()
    }
}

/// Refined `||F_n||` on the curve for every `n` in `n_list`.
pub fn faber_norms(
    basis: &FaberBasis,
    n_list: &[usize],
    mesh: &BoundaryMesh,
    tol: f64,
) -> Result<Vec<crate::norms::NormEstimate>> {
    crate::norms::norms_from_faber_values(basis, n_list, mesh, tol, |v, n| v[n])
}

/// `F_n(psi(e^{i theta_i}))` by Horner evaluation of the given polynomial.
pub fn faber_boundary_values(
    map: &ExteriorMap,
    f_n: &Polynomial,
    mesh: &BoundaryMesh,
) -> Result<Vec<Complex64>> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(mesh
        .thetas
        .par_iter()
        .map(|&t| f_n.eval(map.psi_boundary(t)))
        .collect())
}

/// `e^{-i n theta_i} F_n(psi(e^{i theta_i}))`.
pub fn normalized_boundary_values(
    map: &ExteriorMap,
    f_n: &Polynomial,
    mesh: &BoundaryMesh,
) -> Result<Vec<Complex64>> {
    let n = f_n.degree() as f64;
    let vals = faber_boundary_values(map, f_n, mesh)?;
    Ok(vals
        .into_iter()
        .zip(&mesh.thetas)
        .map(|(v, &t)| v * Complex64::from_polar(1.0, -n * t))
        .collect())
}
