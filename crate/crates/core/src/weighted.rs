//! Corner-suppressing weights and weighted Faber polynomials.
//!
//! For corner preimages `w_k = e^{i theta_k}` the weight is
//! `g_m(w) = prod_k (1 - r w_k / w)^{1/m}` with `g_m(inf) = 1`. It is small
//! near every corner and bounded by `2^{l/m}` elsewhere on the unit circle.
//! Its truncation `P_m = 1 + sum_{j <= d_m} a_j w^-j` turns Faber polynomials
//! into `Q_{n,m} = F_n + sum_j a_j F_{n-j}`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curve::{BoundaryMesh, ExteriorMap};
use crate::error::{Error, Result};
use crate::faber::{FaberBasis, Polynomial};
use crate::norms::{norms_from_faber_values, NormEstimate};
use crate::laurent::{series_mul, sup_tail_bound, unit_exp, unit_log, LaurentSeries, LogSeries};

const WINDOW_POINTS: usize = 512;
const CIRCLE_POINTS: usize = 4096;
const START_TERMS: usize = 512;
const MAX_SERIES_TERMS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPlan {
    pub m: usize,
    pub r_m: f64,
    pub delta_m: f64,
    pub corner_points: Vec<Complex64>,
    /// `a_1..a_{d_m}`.
    pub a: Vec<Complex64>,
    pub d_m: usize,
    pub sup_p_on_circle: f64,
    /// Bound on `sup |g_m - P_m|` from the discarded coefficients.
    pub tail_bound: f64,
    /// `max |g_m - P_m|` on the circle grid.
    pub grid_error: f64,
}

impl WeightPlan {
    /// `g_m(w)` in closed form, `|w| >= 1`.
    pub fn g(&self, w: Complex64) -> Complex64 {
        weight_value(&self.corner_points, self.r_m, self.m, w)
    }

    /// `P_m(w)`.
    pub fn p(&self, w: Complex64) -> Complex64 {
        let u = w.inv();
        self.a
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| (acc + c) * u)
            + 1.0
    }

    /// `Q_{n,m}` at a point from the values `F_0..=F_n` there.
    pub fn combine(&self, faber_values: &[Complex64], n: usize) -> Result<Complex64> {
        self.check_degree(n)?;
        if faber_values.len() <= n {
            return Err(Error::InvalidParams(format!(
                "need F_0..F_{n}, got {} values",
                faber_values.len()
            )));
        }
        Ok(self
            .a
            .iter()
            .enumerate()
            .fold(faber_values[n], |acc, (j, aj)| acc + aj * faber_values[n - j - 1]))
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n <= self.d_m {
            Err(Error::DegreeTooLow { n, d: self.d_m })
        } else {
            Ok(())
        }
    }
}

fn weight_value(points: &[Complex64], r: f64, m: usize, w: Complex64) -> Complex64 {
    let u = w.inv();
    let log: Complex64 = points.iter().map(|&wk| (1.0 - r * wk * u).ln()).sum();
    (log / m as f64).exp()
}

fn corner_points(map: &ExteriorMap) -> Result<Vec<Complex64>> {
    if map.corners().is_empty() {
        return Err(Error::NoCorners);
    }
    Ok(map
        .corners()
        .iter()
        .map(|c| Complex64::from_polar(1.0, c.theta))
        .collect())
}

fn windows_ok(map: &ExteriorMap, points: &[Complex64], r: f64, m: usize, delta: f64) -> bool {
    map.corners().iter().all(|c| {
        (0..WINDOW_POINTS).all(|i| {
            let t = c.theta - delta + 2.0 * delta * i as f64 / (WINDOW_POINTS - 1) as f64;
            weight_value(points, r, m, Complex64::from_polar(1.0, t)).norm() < 0.5
        })
    })
}

/// First `r = 1 - 2^-p` (p = 3..=40) with a window half-width
/// `delta = gap 2^-q` (q = 1..=12, gap half the smallest corner gap) on
/// which `|g_m| < 1/2` around every corner.
pub fn choose_rm_delta(map: &ExteriorMap, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let points = corner_points(map)?;
    let gap = 0.5 * map.min_corner_gap();
    for p in 3..=40 {
        let r = 1.0 - 0.5f64.powi(p);
        for q in 1..=12 {
            let delta = gap * 0.5f64.powi(q);
            // delta < gap keeps each window clear of the other corners
            if windows_ok(map, &points, r, m, delta) {
                return Ok((r, delta));
            }
        }
    }
    Err(Error::ScheduleExhausted(format!(
        "no r = 1 - 2^-p with p <= 40 gives |g_{m}| < 1/2 near all {} corners",
        points.len()
    )))
}

/// Laurent series of `g_m` with `n` coefficients. For `m = 1` the product is
/// a polynomial in `1/w` and is formed exactly.
fn weight_series(points: &[Complex64], r: f64, m: usize, n: usize) -> Result<LaurentSeries> {
    let factors: Vec<LaurentSeries> = points
        .iter()
        .map(|&wk| LaurentSeries::unit(vec![-r * wk]))
        .collect::<Result<_>>()?;
    if m == 1 {
        let mut g = LaurentSeries::unit(Vec::new())?;
        for f in &factors {
            g = series_mul(&g, f, n.max(points.len()))?;
        }
        let keep = g.neg_coeffs.len().min(points.len());
        g.neg_coeffs.truncate(keep);
        g.terminates = true;
        return Ok(g);
    }
    let mut log = LogSeries { coeffs: vec![Complex64::new(0.0, 0.0); n] };
    for f in &factors {
        log = log.add(&unit_log(f, n)?);
    }
    Ok(unit_exp(&log.scaled(1.0 / m as f64), n))
}

fn grid_sup(f: impl Fn(Complex64) -> f64) -> f64 {
    (0..CIRCLE_POINTS)
        .map(|i| f(Complex64::from_polar(1.0, TAU * i as f64 / CIRCLE_POINTS as f64)))
        .fold(0.0, f64::max)
}

/// Builds `P_m` for the given `r_m` and window half-width.
///
/// `d_m` is the smallest `d` whose coefficient tail bound is below `1/(2m)`
/// and whose grid error `max |g_m - P_m|` is below `1/m`. The series length
/// doubles from 512 until `d_m` sits in the first half of the stored range
/// and the tail bound dominates the grid error.
pub fn build_pm(map: &ExteriorMap, m: usize, r_m: f64, delta_m: f64) -> Result<WeightPlan> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    if !(r_m > 0.0 && r_m < 1.0) || !(delta_m > 0.0) {
        return Err(Error::InvalidParams(format!("need 0 < r < 1 and delta > 0, got {r_m}, {delta_m}")));
    }
    let points = corner_points(map)?;
    let inv_m = 1.0 / m as f64;
    let mut n = START_TERMS;
    loop {
        let g = weight_series(&points, r_m, m, n)?;
        match select_degree(&g, &points, r_m, m)? {
            // the extrapolated tail must really bound the observed error
            Some((d, tail, grid)) if g.terminates || (2 * d <= n && grid <= tail * (1.0 + 1e-5)) => {
                let a = g.neg_coeffs[..d].to_vec();
                let mut plan = WeightPlan {
                    m,
                    r_m,
                    delta_m,
                    corner_points: points,
                    a,
                    d_m: d,
                    sup_p_on_circle: 0.0,
                    tail_bound: tail,
                    grid_error: grid,
                };
                plan.sup_p_on_circle = grid_sup(|w| plan.p(w).norm());
                verify_plan(map, &plan)?;
                return Ok(plan);
            }
            _ if n >= MAX_SERIES_TERMS => {
                return Err(Error::TruncationBudget(format!(
                    "tail of g_{m} stays above {} with {n} coefficients",
                    0.5 * inv_m
                )))
            }
            _ => n *= 2,
        }
    }
}

fn select_degree(
    g: &LaurentSeries,
    points: &[Complex64],
    r: f64,
    m: usize,
) -> Result<Option<(usize, f64, f64)>> {
    let inv_m = 1.0 / m as f64;
    let len = g.neg_coeffs.len();
    // smallest d with tail < 1/(2m); the bound does not increase with d
    let tail_ok = |d: usize| -> Result<bool> { Ok(sup_tail_bound(g, d)? < 0.5 * inv_m) };
    if !tail_ok(len)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, len);
    if tail_ok(0)? {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail_ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    for d in hi..=len {
        let grid = grid_sup(|w| {
            (weight_value(points, r, m, w) - g.eval_truncated(w, d)).norm()
        });
        if grid < inv_m {
            return Ok(Some((d, sup_tail_bound(g, d)?, grid)));
        }
    }
    Ok(None)
}

fn verify_plan(map: &ExteriorMap, plan: &WeightPlan) -> Result<()> {
    let inv_m = 1.0 / plan.m as f64;
    if !windows_ok(map, &plan.corner_points, plan.r_m, plan.m, plan.delta_m) {
        return Err(Error::InvalidParams(format!(
            "|g_{}| reaches 1/2 inside a corner window of half-width {}",
            plan.m, plan.delta_m
        )));
    }
    if !(plan.grid_error < inv_m) {
        return Err(Error::TruncationBudget(format!("grid error {} >= 1/m", plan.grid_error)));
    }
    let l = plan.corner_points.len() as f64;
    let ceiling = inv_m + 2f64.powf(l * inv_m);
    if !(plan.sup_p_on_circle < ceiling) {
        return Err(Error::TruncationBudget(format!(
            "max |P_m| = {} exceeds 1/m + 2^(l/m) = {ceiling}",
            plan.sup_p_on_circle
        )));
    }
    Ok(())
}

/// [`choose_rm_delta`] followed by [`build_pm`].
pub fn weight_plan(map: &ExteriorMap, m: usize) -> Result<WeightPlan> {
    let (r, delta) = choose_rm_delta(map, m)?;
    build_pm(map, m, r, delta)
}

/// `Q_{n,m} = F_n + sum_{j=1}^{d_m} a_j F_{n-j}` from `F_0..=F_n`.
pub fn weighted_faber(fabers: &[Polynomial], plan: &WeightPlan, n: usize) -> Result<Polynomial> {
    plan.check_degree(n)?;
    if fabers.len() <= n {
        return Err(Error::InvalidParams(format!(
            "need F_0..F_{n}, got {} polynomials",
            fabers.len()
        )));
    }
    let mut q = fabers[n].clone();
    for (j, aj) in plan.a.iter().enumerate() {
        q.axpy(*aj, &fabers[n - j - 1]);
    }
    Ok(q)
}

/// Refined `||Q_{n,m}||` on the curve for every `n` in `n_list`.
pub fn weighted_norms(
    basis: &FaberBasis,
    plan: &WeightPlan,
    n_list: &[usize],
    mesh: &BoundaryMesh,
    tol: f64,
) -> Result<Vec<NormEstimate>> {
    for &n in n_list {
        plan.check_degree(n)?;
    }
    norms_from_faber_values(basis, n_list, mesh, tol, |v, n| {
        plan.a
            .iter()
            .enumerate()
            .fold(v[n], |acc, (j, aj)| acc + aj * v[n - j - 1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CornerSpec;
    use crate::faber::{faber_sequence, map_series};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Unit circle with one declared corner at theta = 0.
    fn one_corner() -> ExteriorMap {
        ExteriorMap::laurent(1.0, c(0.0, 0.0), Vec::new(), &[CornerSpec { theta: 0.0, lambda: 1.0 }])
            .unwrap()
    }

    #[test]
    fn single_corner_first_schedule_entry() {
        let (r, delta) = choose_rm_delta(&one_corner(), 1).unwrap();
        assert_eq!(r, 7.0 / 8.0);
        // largest window 2^-q pi with |1 - r e^{-i t}| < 1/2
        assert!((delta - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn corner_free_map_is_rejected() {
        let map = ExteriorMap::ellipse(0.5).unwrap();
        assert!(matches!(choose_rm_delta(&map, 2), Err(Error::NoCorners)));
        assert!(matches!(build_pm(&map, 2, 0.9, 0.1), Err(Error::NoCorners)));
    }

    #[test]
    fn deltoid_plan_passes_window_checks() {
        let map = ExteriorMap::deltoid();
        let (r, delta) = choose_rm_delta(&map, 4).unwrap();
        assert!(r > 0.0 && r < 1.0 && delta > 0.0);
        let plan = build_pm(&map, 4, r, delta).unwrap();
        assert!(plan.grid_error < 0.25);
        assert!(plan.sup_p_on_circle < 0.25 + 2f64.powf(0.75));
    }

    #[test]
    fn single_factor_is_exact() {
        let plan = build_pm(&one_corner(), 1, 0.9, 0.05).unwrap();
        assert_eq!(plan.d_m, 1);
        assert!((plan.a[0] - c(-0.9, 0.0)).norm() < 1e-15);
        assert!(plan.grid_error < 1e-15);
    }

    #[test]
    fn lune_conjugate_factors() {
        let plan = build_pm(&ExteriorMap::lune(), 1, 0.9, 0.05).unwrap();
        assert_eq!(plan.d_m, 2);
        assert!(plan.a[0].norm() < 1e-15);
        assert!((plan.a[1] - c(-0.81, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn p_bound_for_several_m() {
        for map in [ExteriorMap::lune(), ExteriorMap::deltoid()] {
            let l = map.corners().len() as f64;
            for m in [1, 2, 3, 5] {
                let plan = weight_plan(&map, m).unwrap();
                let inv_m = 1.0 / m as f64;
                assert!(plan.sup_p_on_circle < inv_m + 2f64.powf(l * inv_m));
                // re-check the truncation on an independent grid
                let worst = (0..3001)
                    .map(|i| {
                        let w = Complex64::from_polar(1.0, TAU * (i as f64 + 0.37) / 3001.0);
                        (plan.g(w) - plan.p(w)).norm()
                    })
                    .fold(0.0, f64::max);
                assert!(worst < inv_m, "m={m}: {worst}");
            }
        }
    }

    #[test]
    fn weight_series_matches_closed_form() {
        let points = vec![c(1.0, 0.0), Complex64::from_polar(1.0, 2.0)];
        let g = weight_series(&points, 0.7, 3, 256).unwrap();
        for t in [0.0, 1.0, 2.5, 4.0] {
            let w = Complex64::from_polar(1.0, t);
            let exact = weight_value(&points, 0.7, 3, w);
            assert!((g.eval(w) - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn weighted_faber_examples() {
        let circle = ExteriorMap::circle(1.0).unwrap();
        let fabers = faber_sequence(&map_series(&circle, 5).unwrap(), 5).unwrap();
        let mut plan = build_pm(&one_corner(), 1, 0.9, 0.05).unwrap();
        let q = weighted_faber(&fabers, &plan, 5).unwrap();
        let want = [0.0, 0.0, 0.0, 0.0, -0.9, 1.0];
        for (a, b) in q.coeffs.iter().zip(want) {
            assert!((a - c(b, 0.0)).norm() < 1e-15);
        }
        plan.a.clear();
        plan.d_m = 0;
        assert_eq!(weighted_faber(&fabers, &plan, 5).unwrap(), fabers[5]);

        let lune = ExteriorMap::lune();
        let lplan = build_pm(&lune, 1, 0.9, 0.05).unwrap();
        let lf = faber_sequence(&map_series(&lune, 10).unwrap(), 10).unwrap();
        let q = weighted_faber(&lf, &lplan, 10).unwrap();
        assert!((q.leading() - 1.0).norm() < 1e-9);
        let mut direct = lf[10].clone();
        direct.axpy(c(-0.81, 0.0), &lf[8]);
        for (a, b) in q.coeffs.iter().zip(&direct.coeffs) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(
            weighted_faber(&lf, &lplan, 2),
            Err(Error::DegreeTooLow { n: 2, d: 2 })
        ));
    }

    #[test]
    fn leading_coefficient_of_weighted_faber() {
        for map in [ExteriorMap::deltoid(), ExteriorMap::lune()] {
            let plan = weight_plan(&map, 2).unwrap();
            let fabers = faber_sequence(&map_series(&map, 200).unwrap(), 200).unwrap();
            for n in (plan.d_m + 1..=200).step_by(13) {
                let q = weighted_faber(&fabers, &plan, n).unwrap();
                assert_eq!(q.degree(), n);
                assert!((q.leading() - 1.0).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn combine_matches_polynomial() {
        let map = ExteriorMap::deltoid();
        let plan = build_pm(&map, 1, 0.9, 0.05).unwrap();
        let basis = FaberBasis::new(&map, 12).unwrap();
        let polys = basis.polynomials(12).unwrap();
        let q = weighted_faber(&polys, &plan, 12).unwrap();
        for t in [0.3, 1.7, 4.4] {
            let vals = basis.values_at(t, 12);
            let z = map.psi_boundary(t);
            assert!((plan.combine(&vals, 12).unwrap() - q.eval(z)).norm() < 1e-10);
        }
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = build_pm(&ExteriorMap::lune(), 1, 0.9, 0.05).unwrap();
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"m\":1") && json.contains("\"a\":[["));
        let back: WeightPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
    }


    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn weighted_faber_keeps_the_leading_term(m in 1usize..=4, lune in any::<bool>(), extra in 1usize..120) {
                let map = if lune { ExteriorMap::lune() } else { ExteriorMap::deltoid() };
                let plan = weight_plan(&map, m).unwrap();
                let n = plan.d_m + extra;
                let fabers = faber_sequence(&map_series(&map, n).unwrap(), n).unwrap();
                let q = weighted_faber(&fabers, &plan, n).unwrap();
                let want = map.capacity().powi(-(n as i32));
                prop_assert_eq!(q.degree(), n);
                prop_assert!((q.leading() - want).norm() < 1e-9 * want);
            }
        }
    }
}
