//! Supremum norms of boundary functions on the curve.
//!
//! The estimate starts from the mesh maximum (plus corner preimages), then
//! runs golden-section searches on `theta -> |f(psi(e^{i theta}))|` around
//! the five largest local maxima, first on the mesh and again on the mesh
//! with its midpoints added. Every level can only raise the estimate.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{BoundaryMesh, ExteriorMap};
use crate::error::{Error, Result};
use crate::faber::FaberBasis;

const TOP_MAXIMA: usize = 5;
const GOLDEN_WIDTH: f64 = 1e-10;

/// A function that can be evaluated at `psi(e^{i theta})`, addressed by `theta`.
pub trait BoundaryFn: Sync {
    fn eval(&self, theta: f64) -> Complex64;
}

impl<F> BoundaryFn for F
where
    F: Fn(f64) -> Complex64 + Sync,
{
    fn eval(&self, theta: f64) -> Complex64 {
        self(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub argmax_theta: f64,
    pub refine_levels_used: usize,
    /// Relative change produced by the last refinement level.
    pub last_delta: f64,
    pub converged: bool,
}

pub fn sup_norm_on_curve(
    map: &ExteriorMap,
    f: &impl BoundaryFn,
    mesh: &BoundaryMesh,
    tol: f64,
) -> Result<NormEstimate> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let fine = mesh.midpoints();
    let coarse_vals: Vec<f64> = mesh.thetas.par_iter().map(|&t| f.eval(t).norm()).collect();
    let fine_vals: Vec<f64> = fine.par_iter().map(|&t| f.eval(t).norm()).collect();
    sup_norm_from_samples(map, (&mesh.thetas, &coarse_vals), (&fine, &fine_vals), f, tol)
}

/// Same as [`sup_norm_on_curve`] with the moduli on the mesh and on its
/// midpoints already computed (useful when many degrees share one pass).
pub fn sup_norm_from_samples(
    map: &ExteriorMap,
    coarse: (&[f64], &[f64]),
    fine: (&[f64], &[f64]),
    f: &impl BoundaryFn,
    tol: f64,
) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    if coarse.0.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (ct, cv) = coarse;
    check_finite(ct, cv)?;
    check_finite(fine.0, fine.1)?;

    let mut best = (f64::NEG_INFINITY, 0.0);
    let bump = |v: f64, t: f64, best: &mut (f64, f64)| {
        if v > best.0 {
            *best = (v, t);
        }
    };
    for (&t, &v) in ct.iter().zip(cv) {
        bump(v, t, &mut best);
    }
    for c in map.corners() {
        let v = f.eval(c.theta).norm();
        if !v.is_finite() {
            return Err(Error::NonFinite { theta: c.theta });
        }
        bump(v, c.theta, &mut best);
    }

    // level 1: local searches on the mesh
    let level1 = refine_local_maxima(ct, cv, f)?;
    bump(level1.0, level1.1, &mut best);
    let value1 = best.0;

    // level 2: mesh plus midpoints
    let mut merged: Vec<(f64, f64)> = ct
        .iter()
        .copied()
        .zip(cv.iter().copied())
        .chain(fine.0.iter().copied().zip(fine.1.iter().copied()))
        .collect();
    merged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mt, mv): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
    for (&t, &v) in mt.iter().zip(&mv) {
        bump(v, t, &mut best);
    }
    let level2 = refine_local_maxima(&mt, &mv, f)?;
    bump(level2.0, level2.1, &mut best);

    let last_delta = if best.0 > 0.0 { (best.0 - value1) / best.0 } else { 0.0 };
    Ok(NormEstimate {
        value: best.0.max(0.0),
        argmax_theta: best.1,
        refine_levels_used: 2,
        last_delta,
        converged: last_delta < tol,
    })
}

/// Norms of `f(F_0..F_n values, n)` for every `n` in `n_list`, sharing one
/// pass of the Faber recurrence over the mesh and its midpoints.
pub fn norms_from_faber_values<F>(
    basis: &FaberBasis,
    n_list: &[usize],
    mesh: &BoundaryMesh,
    tol: f64,
    f: F,
) -> Result<Vec<NormEstimate>>
where
    F: Fn(&[Complex64], usize) -> Complex64 + Sync,
{
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    if n_max > basis.n_max() {
        return Err(Error::InvalidParams(format!(
            "degree {n_max} exceeds the basis limit {}",
            basis.n_max()
        )));
    }
    let sample = |thetas: &[f64]| -> Vec<Vec<f64>> {
        thetas
            .par_iter()
            .map(|&t| {
                let vals = basis.values_at(t, n_max);
                n_list.iter().map(|&n| f(&vals, n).norm()).collect()
            })
            .collect()
    };
    let fine = mesh.midpoints();
    let coarse_rows = sample(&mesh.thetas);
    let fine_rows = sample(&fine);
    n_list
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let cv: Vec<f64> = coarse_rows.iter().map(|r| r[i]).collect();
            let fv: Vec<f64> = fine_rows.iter().map(|r| r[i]).collect();
            let g = |t: f64| f(&basis.values_at(t, n), n);
            sup_norm_from_samples(basis.map(), (&mesh.thetas, &cv), (&fine, &fv), &g, tol)
        })
        .collect()
}

fn check_finite(thetas: &[f64], vals: &[f64]) -> Result<()> {
    match vals.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite { theta: thetas[i] }),
        None => Ok(()),
    }
}

/// Golden-section searches around the largest cyclic local maxima of the
/// samples; returns the best `(value, theta)` found.
fn refine_local_maxima(thetas: &[f64], vals: &[f64], f: &impl BoundaryFn) -> Result<(f64, f64)> {
    let n = thetas.len();
    if n < 3 {
        return Ok((f64::NEG_INFINITY, 0.0));
    }
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let prev = vals[(i + n - 1) % n];
            let next = vals[(i + 1) % n];
            vals[i] >= prev && vals[i] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    peaks.truncate(TOP_MAXIMA);

    let results: Vec<Result<(f64, f64)>> = peaks
        .par_iter()
        .map(|&i| {
            let mut lo = thetas[(i + n - 1) % n];
            let mut hi = thetas[(i + 1) % n];
            if lo > thetas[i] {
                lo -= TAU;
            }
            if hi < thetas[i] {
                hi += TAU;
            }
            golden_max(f, lo, hi)
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for r in results {
        let (v, t) = r?;
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok(best)
}

fn golden_max(f: &impl BoundaryFn, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |t: f64| -> Result<f64> {
        let v = f.eval(t).norm();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { theta: t })
        }
    };
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    let mut best = if f1 > f2 { (f1, x1) } else { (f2, x2) };
    while b - a > GOLDEN_WIDTH {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2)?;
            if f2 > best.0 {
                best = (f2, x2);
            }
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1)?;
            if f1 > best.0 {
                best = (f1, x1);
            }
        }
    }
    Ok((best.0, best.1.rem_euclid(TAU)))
}
