//! Angular variation of secants and the integral representation of `F_n`.
//!
//! For a boundary point `psi(e^{i theta})` the secant argument
//! `v_theta(t) = arg(psi(e^{it}) - psi(e^{i theta}))` has a bounded density
//! away from `t = theta` and from corner preimages, and the measure
//! `dv_theta` carries a point mass `lambda(theta) pi` at `t = theta`.
//! Integrals against `dv_theta` are split into Gauss-Legendre panels on the
//! smooth part and short windows around the singular points. A window
//! contributes its profile increment, weighted at the window centre.

use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{angle_distance, ExteriorMap};
use crate::error::{Error, Result};

/// Consecutive unwrapped samples must differ by less than this.
const MAX_STEP: f64 = PI / 2.0;
const MAX_BISECTIONS: usize = 10;
/// Offset from `t = theta` where the one-sided limits of `v_theta` are read.
const ETA: f64 = 1e-9;
/// Same at a corner, where the secant can vanish to second order.
const ETA_CORNER: f64 = 1e-6;
/// Margin used in the angle-limit lemma checks.
pub const LEMMA_EPS: f64 = 0.05;
/// Margin for corner windows.
pub const CORNER_EPS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecantProfile {
    pub theta: f64,
    pub t_grid: Vec<f64>,
    /// Unwrapped `v_theta` on `t_grid`.
    pub values: Vec<f64>,
    /// Point mass at `t = theta`, equal to `pi lambda(theta)`.
    pub jump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadOptions {
    /// Stop once two successive refinement levels differ by less than this.
    pub tol: f64,
    pub max_level: usize,
    /// Gauss-Legendre nodes per panel.
    pub order: usize,
    /// Half-width of the windows cut out around `theta` and the corners.
    pub window: f64,
    /// Integration runs over `(theta + alpha_offset, theta + alpha_offset + 2pi)`.
    pub alpha_offset: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            tol: 1e-8,
            max_level: 12,
            order: 16,
            window: 1e-4,
            alpha_offset: -PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: Complex64,
    /// Difference between the last two refinement levels.
    pub achieved: f64,
    pub converged: bool,
    pub levels: usize,
}

fn secant(map: &ExteriorMap, theta: f64) -> impl Fn(f64) -> Complex64 + '_ {
    let z0 = map.psi_boundary(theta);
    move |t| map.psi_boundary(t) - z0
}

fn limit_offset(map: &ExteriorMap, theta: f64) -> f64 {
    if map.corner_at(theta, 1e-12).is_some() {
        ETA_CORNER
    } else {
        ETA
    }
}

fn same_point(a: f64, b: f64) -> bool {
    angle_distance(a, b) < 1e-14
}

/// Increment of a continuous argument of `f` from `t0` to `t1`, bisecting
/// until every step is below `pi/2`.
fn arg_increment(f: &impl Fn(f64) -> Complex64, t0: f64, t1: f64, depth: usize) -> Result<f64> {
    let d = (f(t1) / f(t0)).arg();
    if d.abs() < MAX_STEP {
        return Ok(d);
    }
    if depth == MAX_BISECTIONS {
        return Err(Error::GridTooCoarse { t: t0 });
    }
    let m = 0.5 * (t0 + t1);
    Ok(arg_increment(f, t0, m, depth + 1)? + arg_increment(f, m, t1, depth + 1)?)
}

/// Continuous branch of `v_theta` along an increasing grid avoiding `theta`.
pub fn secant_argument(map: &ExteriorMap, theta: f64, t_grid: &[f64]) -> Result<SecantProfile> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("empty t grid".into()));
    }
    if t_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidParams("t grid must be strictly increasing".into()));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| same_point(t, theta)) {
        return Err(Error::InvalidParams(format!("t grid contains theta (t = {t})")));
    }
    let f = secant(map, theta);
    let mut values = Vec::with_capacity(t_grid.len());
    values.push(f(t_grid[0]).arg());
    for p in t_grid.windows(2) {
        let last = *values.last().unwrap();
        values.push(last + arg_increment(&f, p[0], p[1], 0)?);
    }
    Ok(SecantProfile {
        theta,
        t_grid: t_grid.to_vec(),
        values,
        jump: PI * map.lambda_at(theta),
    })
}

fn density_unchecked(map: &ExteriorMap, z0: Complex64, t: f64) -> f64 {
    let w = Complex64::from_polar(1.0, t);
    (w * map.psi_prime_unchecked(w) / (map.psi_unchecked(w) - z0)).re
}

/// `dv_theta / dt = Re(e^{it} psi'(e^{it}) / (psi(e^{it}) - psi(e^{i theta})))`.
pub fn secant_density(map: &ExteriorMap, theta: f64, t: f64) -> Result<f64> {
    if same_point(t, theta) {
        return Err(Error::InvalidParams("density is undefined at t = theta".into()));
    }
    if map.corner_at(t, 1e-12).is_some() {
        return Err(Error::CornerPoint { theta: t });
    }
    Ok(density_unchecked(map, map.psi_boundary(theta), t))
}

/// Smooth stretch between windows; `graded` ends sit next to a singular point.
struct Piece {
    lo: f64,
    hi: f64,
    graded_lo: bool,
    graded_hi: bool,
}

/// Half-window `(lo, hi)` next to the singular point `centre`.
struct HalfWindow {
    lo: f64,
    hi: f64,
    centre: f64,
}

struct Layout {
    pieces: Vec<Piece>,
    windows: Vec<HalfWindow>,
}

/// Splits `(a, b)` at `theta` and the corner preimages.
fn layout(map: &ExteriorMap, theta: f64, a: f64, b: f64, w: f64) -> Layout {
    let mut singular: Vec<f64> = Vec::new();
    let mut base: Vec<f64> = map.corner_thetas();
    base.push(theta);
    for s in base {
        let j0 = ((a - s) / TAU).floor() as i64 - 1;
        for j in j0..=j0 + 3 {
            let t = s + TAU * j as f64;
            if t >= a - 1e-15 && t <= b + 1e-15 {
                singular.push(t);
            }
        }
    }
    singular.sort_by(|x, y| x.total_cmp(y));
    singular.dedup_by(|x, y| (*x - *y).abs() < 1e-12);

    let mut windows = Vec::new();
    let mut pieces = Vec::new();
    let mut cursor = a;
    let mut graded = false;
    for &s in &singular {
        let left = (s - w).max(a);
        if left > cursor {
            pieces.push(Piece {
                lo: cursor,
                hi: left,
                graded_lo: graded,
                graded_hi: true,
            });
        }
        if s > a {
            windows.push(HalfWindow {
                lo: left.max(cursor),
                hi: s,
                centre: s,
            });
        }
        let right = (s + w).min(b);
        if s < b {
            windows.push(HalfWindow { lo: s, hi: right, centre: s });
        }
        cursor = right;
        graded = true;
    }
    if b > cursor {
        pieces.push(Piece {
            lo: cursor,
            hi: b,
            graded_lo: graded,
            graded_hi: false,
        });
    }
    Layout { pieces, windows }
}

/// Panel endpoints on a piece: geometric towards graded ends, split so that
/// no panel is wider than `h`, then every panel halved `level` times.
fn panels(piece: &Piece, w: f64, h: f64, level: u32) -> Vec<(f64, f64)> {
    let (lo, hi) = (piece.lo, piece.hi);
    let mid = 0.5 * (lo + hi);
    let mut cuts = vec![lo, hi];
    if piece.graded_lo {
        let mut d = w;
        while lo + d < mid {
            cuts.push(lo + d);
            d *= 2.0;
        }
    }
    if piece.graded_hi {
        let mut d = w;
        while hi - d > mid {
            cuts.push(hi - d);
            d *= 2.0;
        }
    }
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let mut out = Vec::new();
    for p in cuts.windows(2) {
        let k = (((p[1] - p[0]) / h).ceil().max(1.0) as usize) << level;
        let step = (p[1] - p[0]) / k as f64;
        for i in 0..k {
            let x0 = p[0] + step * i as f64;
            let x1 = if i + 1 == k { p[1] } else { x0 + step };
            out.push((x0, x1));
        }
    }
    out
}

fn rule(order: usize) -> Result<Vec<(f64, f64)>> {
    let order = NonZeroUsize::new(order).ok_or_else(|| Error::InvalidParams("quadrature order must be positive".into()))?;
    Ok(GaussLegendre::new(order).as_node_weight_pairs().to_vec())
}

/// `int_a^b k(t) dv_theta(t)` over `(a, b)` without the point mass at `theta`.
///
/// `smooth(t, density)` is integrated on the panels and `window(centre, dv)`
/// is added for each half-window. `scale` sets the first panel width.
fn integrate_dv<K, W>(
    map: &ExteriorMap,
    theta: f64,
    (a, b): (f64, f64),
    scale: f64,
    opts: &QuadOptions,
    smooth: K,
    window: W,
) -> Result<QuadValue>
where
    K: Fn(f64, f64) -> Complex64 + Sync,
    W: Fn(f64, f64) -> Complex64,
{
    if !(opts.tol > 0.0) || !(opts.window > 0.0) {
        return Err(Error::InvalidParams("quadrature tol and window must be positive".into()));
    }
    let lay = layout(map, theta, a, b, opts.window);
    let f = secant(map, theta);
    let eta = limit_offset(map, theta);
    let mut fixed = Complex64::new(0.0, 0.0);
    for hw in &lay.windows {
        // one-sided limits at theta itself
        let lo = if same_point(hw.lo, theta) { hw.lo + eta } else { hw.lo };
        let hi = if same_point(hw.hi, theta) { hw.hi - eta } else { hw.hi };
        if hi > lo {
            fixed += window(hw.centre, arg_increment(&f, lo, hi, 0)?);
        }
    }
    let nodes = rule(opts.order)?;
    let z0 = map.psi_boundary(theta);
    let level_sum = |level: u32| -> Complex64 {
        lay.pieces
            .iter()
            .flat_map(|p| panels(p, opts.window, scale, level))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(x0, x1)| {
                let half = 0.5 * (x1 - x0);
                let mid = 0.5 * (x1 + x0);
                nodes
                    .iter()
                    .map(|&(x, wt)| {
                        let t = mid + half * x;
                        smooth(t, density_unchecked(map, z0, t)) * (wt * half)
                    })
                    .sum::<Complex64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    };
    let mut prev = level_sum(0) + fixed;
    let mut achieved = f64::INFINITY;
    for level in 1..=opts.max_level {
        let next = level_sum(level as u32) + fixed;
        achieved = (next - prev).norm();
        prev = next;
        if achieved < opts.tol {
            return Ok(QuadValue {
                value: prev,
                achieved,
                converged: true,
                levels: level,
            });
        }
    }
    Ok(QuadValue {
        value: prev,
        achieved,
        converged: false,
        levels: opts.max_level,
    })
}

fn first_panel(n: usize) -> f64 {
    (2.0 / n.max(1) as f64).min(0.25)
}

/// `F_n(psi(e^{i theta}))` from `lambda(theta) e^{in theta} + (1/pi) int e^{int} dv~_theta`.
pub fn pommerenke_faber_value(map: &ExteriorMap, theta: f64, n: usize, opts: &QuadOptions) -> Result<QuadValue> {
    if n == 0 {
        return Err(Error::InvalidParams("degree must be at least 1".into()));
    }
    if !(opts.alpha_offset < 0.0 && opts.alpha_offset > -TAU) {
        return Err(Error::InvalidParams("alpha_offset must lie in (-2pi, 0)".into()));
    }
    let nf = n as f64;
    let alpha = theta + opts.alpha_offset;
    let q = integrate_dv(
        map,
        theta,
        (alpha, alpha + TAU),
        first_panel(n),
        opts,
        |t, d| Complex64::from_polar(d, nf * t),
        |c, dv| Complex64::from_polar(dv, nf * c),
    )?;
    Ok(QuadValue {
        value: map.lambda_at(theta) * Complex64::from_polar(1.0, nf * theta) + q.value / PI,
        achieved: q.achieved / PI,
        ..q
    })
}

/// `(1/pi) int_{(theta - delta, theta + delta)} |dv_theta|`, point mass included.
pub fn local_variation(map: &ExteriorMap, theta: f64, delta: f64, opts: &QuadOptions) -> Result<f64> {
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::InvalidParams(format!("delta = {delta} must lie in (0, pi)")));
    }
    let q = integrate_dv(
        map,
        theta,
        (theta - delta, theta + delta),
        first_panel(1).min(delta / 4.0),
        &QuadOptions {
            tol: opts.tol.max(1e-10),
            ..*opts
        },
        |_, d| Complex64::new(d.abs(), 0.0),
        |_, dv| Complex64::new(dv.abs(), 0.0),
    )?;
    if !q.converged && q.achieved > 1e-3 {
        return Err(Error::QuadratureNotConverged { change: q.achieved });
    }
    Ok(map.lambda_at(theta) + q.value.re / PI)
}

/// `(1/pi) int_{theta + delta}^{theta - delta + 2pi} e^{int} dv_theta(t)`.
pub fn riemann_lebesgue_tail(
    map: &ExteriorMap,
    theta: f64,
    n: usize,
    delta: f64,
    opts: &QuadOptions,
) -> Result<QuadValue> {
    if !(delta > 0.0 && delta < PI) {
        return Err(Error::InvalidParams(format!("delta = {delta} must lie in (0, pi)")));
    }
    let nf = n as f64;
    let q = integrate_dv(
        map,
        theta,
        (theta + delta, theta - delta + TAU),
        first_panel(n),
        opts,
        |t, d| Complex64::from_polar(d, nf * t),
        |c, dv| Complex64::from_polar(dv, nf * c),
    )?;
    Ok(QuadValue {
        value: q.value / PI,
        achieved: q.achieved / PI,
        ..q
    })
}

/// Largest tail modulus over `samples` equispaced `theta`.
pub fn riemann_lebesgue_sup(map: &ExteriorMap, n: usize, delta: f64, samples: usize, opts: &QuadOptions) -> Result<f64> {
    let vals: Result<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|j| {
            let theta = TAU * (j as f64 + 0.5) / samples as f64;
            riemann_lebesgue_tail(map, theta, n, delta, opts).map(|q| q.value.norm())
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Total variation of `arg(z(s) - zeta)` over `[a, b]`.
///
/// Starts from 64 segments and splits any segment whose increment is not
/// additive over its halves within `tol`.
pub fn arg_variation(z: impl Fn(f64) -> Complex64, zeta: Complex64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(z: &impl Fn(f64) -> Complex64, zeta: Complex64, s0: f64, s1: f64, z0: Complex64, z1: Complex64, tol: f64, depth: usize) -> f64 {
        let whole = ((z1 - zeta) / (z0 - zeta)).arg().abs();
        let m = 0.5 * (s0 + s1);
        let zm = z(m);
        let left = ((zm - zeta) / (z0 - zeta)).arg().abs();
        let right = ((z1 - zeta) / (zm - zeta)).arg().abs();
        if depth >= 48 || ((left + right - whole).abs() < tol && whole < 0.1) {
            return left + right;
        }
        step(z, zeta, s0, m, z0, zm, tol, depth + 1) + step(z, zeta, m, s1, zm, z1, tol, depth + 1)
    }
    let segs = 64;
    let h = (b - a) / segs as f64;
    (0..segs)
        .map(|i| {
            let s0 = a + h * i as f64;
            let s1 = if i + 1 == segs { b } else { s0 + h };
            step(&z, zeta, s0, s1, z(s0), z(s1), tol, 0)
        })
        .sum()
}

/// Variation of `arg(psi(e^{is}) - psi(e^{i s0}))` over `|s - s0| < delta`, `s != s0`.
pub fn dini_local_variation(map: &ExteriorMap, s0: f64, delta: f64) -> f64 {
    let z = |s: f64| map.psi_boundary(s);
    let zeta = z(s0);
    let eta = ETA * delta.max(1.0);
    arg_variation(z, zeta, s0 - delta, s0 - eta, 1e-12) + arg_variation(z, zeta, s0 + eta, s0 + delta, 1e-12)
}

/// `mu pi`: the angle at a corner between the two one-sided tangent rays,
/// read from `psi'` just off the corner.
pub fn corner_opening(map: &ExteriorMap, theta_k: f64) -> f64 {
    let h = 1e-10;
    let tangent = |t: f64| {
        let w = Complex64::from_polar(1.0, t);
        Complex64::new(0.0, 1.0) * w * map.psi_prime_unchecked(w)
    };
    // both rays point away from the corner
    let fwd = tangent(theta_k + h);
    let bwd = -tangent(theta_k - h);
    (fwd / bwd).arg().abs()
}

/// Largest variation of `arg(z(s) - zeta(t))` for `s in (0, delta)` with the
/// two arcs leaving a corner on opposite sides, over 16 geometric `t`.
pub fn corner_pair_variation(map: &ExteriorMap, theta_k: f64, delta: f64) -> f64 {
    let ts: Vec<f64> = (0..16).map(|j| delta * 0.5f64.powi(j)).collect();
    let eta = ETA;
    let side = |sign: f64| {
        ts.par_iter()
            .map(|&t| {
                let zeta = map.psi_boundary(theta_k - sign * t);
                arg_variation(|s| map.psi_boundary(theta_k + sign * s), zeta, eta, delta, 1e-12)
            })
            .reduce(|| 0.0, f64::max)
    };
    side(1.0).max(side(-1.0))
}

/// Largest variation of `arg(psi(e^{is}) - zeta)` over `|s - s0| < delta/2`
/// for points `zeta` just off the curve on both sides of `psi(e^{i s0})`.
pub fn outside_point_variation(map: &ExteriorMap, s0: f64, delta: f64) -> f64 {
    let z0 = map.psi_boundary(s0);
    let tangent = map.psi_boundary(s0 + 1e-6) - map.psi_boundary(s0 - 1e-6);
    let normal = Complex64::new(0.0, 1.0) * tangent / tangent.norm();
    [1e-2, 1e-4, 1e-6, -1e-2, -1e-4, -1e-6]
        .par_iter()
        .map(|&h| {
            arg_variation(|s| map.psi_boundary(s), z0 + normal * h, s0 - delta / 2.0, s0 + delta / 2.0, 1e-12)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub check: String,
    pub theta: f64,
    /// `delta`, or `n` for the tail rows.
    pub param: f64,
    pub lhs: f64,
    pub bound_form: String,
    pub pass: bool,
}

fn window_has_corner(map: &ExteriorMap, theta: f64, delta: f64) -> bool {
    map.corners().iter().any(|c| angle_distance(c.theta, theta) < delta)
}

/// Default window sizes for [`lemma_checks`].
pub const LEMMA_DELTAS: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

/// Left-hand sides of the local variation estimates on shrinking windows.
///
/// Every family must decrease as `delta` shrinks. Corner windows must stay
/// below `2 + 0.1`. At the smallest `delta`, points off an arc must see it
/// under at most `pi + 0.05`, and arcs meeting at a corner of opening `mu pi`
/// under at most `pi (1 - mu) + 0.05`.
pub fn lemma_checks(map: &ExteriorMap, deltas: &[f64], opts: &QuadOptions) -> Result<Vec<LemmaRow>> {
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d < PI)) {
        return Err(Error::InvalidParams("deltas must be nonempty and lie in (0, pi)".into()));
    }
    let dmax = deltas[0];
    let dmin = deltas[deltas.len() - 1];
    // smooth sample points at least dmax away from every corner
    let smooth: Vec<f64> = (0..64)
        .map(|j| TAU * (j as f64 + 0.5) / 64.0)
        .filter(|&t| !window_has_corner(map, t, dmax))
        .step_by(8)
        .collect();

    let mut rows = Vec::new();
    for &theta in &smooth {
        let mut prev_w = f64::INFINITY;
        let mut prev_d = f64::INFINITY;
        let mut prev_o = f64::INFINITY;
        for &delta in &deltas {
            let lv = local_variation(map, theta, delta, opts)?;
            rows.push(LemmaRow {
                check: "window".into(),
                theta,
                param: delta,
                lhs: lv,
                bound_form: "1+eps".into(),
                pass: lv < prev_w && lv >= 1.0 - 1e-9,
            });
            prev_w = lv;
            let dv = dini_local_variation(map, theta, delta);
            rows.push(LemmaRow {
                check: "dini_arc".into(),
                theta,
                param: delta,
                lhs: dv,
                bound_form: "8*int_0^delta omega(t)/t dt".into(),
                pass: dv < prev_d,
            });
            prev_d = dv;
            let ov = outside_point_variation(map, theta, delta);
            rows.push(LemmaRow {
                check: "outside_point".into(),
                theta,
                param: delta,
                lhs: ov,
                bound_form: "pi+eps".into(),
                pass: ov < prev_o && (delta > dmin || ov <= PI + LEMMA_EPS),
            });
            prev_o = ov;
        }
    }
    for c in map.corners() {
        let mu = corner_opening(map, c.theta) / PI;
        let mut prev_c = f64::INFINITY;
        for &delta in &deltas {
            for theta in [c.theta, c.theta + 0.5 * delta] {
                let lv = local_variation(map, theta, delta, opts)?;
                rows.push(LemmaRow {
                    check: "corner_window".into(),
                    theta,
                    param: delta,
                    lhs: lv,
                    bound_form: "2+eps".into(),
                    pass: lv <= 2.0 + CORNER_EPS,
                });
            }
            if mu > 1e-6 {
                let cv = corner_pair_variation(map, c.theta, delta);
                rows.push(LemmaRow {
                    check: "corner_arcs".into(),
                    theta: c.theta,
                    param: delta,
                    lhs: cv,
                    bound_form: format!("pi(1-mu)+eps, mu={mu:.6}"),
                    pass: cv < prev_c && (delta > dmin || cv <= PI * (1.0 - mu) + LEMMA_EPS),
                });
                prev_c = cv;
            }
        }
    }
    Ok(rows)
}

/// Sup of the tail modulus over 32 `theta` for each `n`; each row passes when
/// it is below the previous one.
pub fn riemann_lebesgue_rows(map: &ExteriorMap, ns: &[usize], delta: f64, opts: &QuadOptions) -> Result<Vec<LemmaRow>> {
    let mut rows: Vec<LemmaRow> = Vec::new();
    for &n in ns {
        let sup = riemann_lebesgue_sup(map, n, delta, 32, opts)?;
        let pass = rows.last().is_none_or(|r| sup < r.lhs);
        rows.push(LemmaRow {
            check: "tail".into(),
            theta: f64::NAN,
            param: n as f64,
            lhs: sup,
            bound_form: "-> 0".into(),
            pass,
        });
    }
    Ok(rows)
}

pub fn write_lemma_csv<W: std::io::Write>(rows: &[LemmaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
