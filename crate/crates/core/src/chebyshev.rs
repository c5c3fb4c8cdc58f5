//! Monic minimax polynomials on the discretized curve.
//!
//! Every monic `p` of degree `n` is `cap^n (F_n + sum_{k<n} c_k F_k)`, so the
//! solver works with Faber values on the mesh. Those columns behave like
//! `e^{ik theta}` on the boundary and keep the least-squares systems well
//! conditioned, unlike monomials. The minimax coefficients come from Lawson's
//! reweighted least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{BoundaryMesh, ExteriorMap};
use crate::error::{Error, Result};
use crate::faber::{FaberBasis, Polynomial};
use crate::norms::{sup_norm_on_curve, NormEstimate};
use crate::weighted::WeightPlan;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChebyshevOptions {
    /// Stop once `(max|e| - sum w|e|) / max|e|` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Exponent in the weight update `w <- w |e|^gamma`.
    pub gamma: f64,
    /// Re-solve on the mesh plus midpoints and refined error peaks, adding
    /// peaks until the mesh maximum matches the curve maximum.
    pub exchange_pass: bool,
    /// Tolerance handed to the norm refinement.
    pub norm_tol: f64,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        ChebyshevOptions {
            tol: 1e-6,
            max_iter: 500,
            gamma: 1.0,
            exchange_pass: false,
            norm_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxResult {
    pub degree: usize,
    /// Monic `T_n` in monomial form.
    pub t: Polynomial,
    /// `c_0..c_{n-1}` with `T_n = cap^n (F_n + sum c_k F_k)`.
    pub faber_coeffs: Vec<Complex64>,
    /// Refined sup norm of `T_n` on the curve.
    pub norm: f64,
    /// Maximum of `|T_n|` over the working mesh.
    pub mesh_norm: f64,
    pub widom: f64,
    pub iterations: usize,
    pub residual_equioscillation: f64,
    pub converged: bool,
    pub norm_estimate: NormEstimate,
    pub mesh_size: usize,
    basis: FaberBasis,
}

impl MinimaxResult {
    /// `T_n(psi(e^{i theta})) / cap^n`.
    pub fn normalized_value_at(&self, theta: f64) -> Complex64 {
        combine(&self.basis.values_at(theta, self.degree), &self.faber_coeffs)
    }

    /// `T_n(psi(e^{i theta}))`.
    pub fn value_at(&self, theta: f64) -> Complex64 {
        let cap = self.basis.map().capacity();
        self.normalized_value_at(theta) * cap.powi(self.degree as i32)
    }

    /// `max |T_n|` over the given boundary parameters.
    pub fn max_on(&self, thetas: &[f64]) -> f64 {
        thetas.par_iter().map(|&t| self.value_at(t).norm()).reduce(|| 0.0, f64::max)
    }
}

fn combine(values: &[Complex64], c: &[Complex64]) -> Complex64 {
    let n = c.len();
    c.iter().zip(values).fold(values[n], |acc, (ck, fk)| acc + ck * fk)
}

/// `norm / cap^n`, formed in log space.
pub fn widom_factor(norm: f64, cap: f64, n: usize) -> f64 {
    if norm == 0.0 {
        return 0.0;
    }
    (norm.ln() - n as f64 * cap.ln()).exp()
}

struct LawsonOutcome {
    coeffs: Vec<Complex64>,
    max_err: f64,
    spread: f64,
    iterations: usize,
    converged: bool,
}

/// Lawson iteration on rows `F_0..=F_n` of a mesh.
fn lawson(rows: &[Vec<Complex64>], n: usize, opts: &ChebyshevOptions) -> Result<LawsonOutcome> {
    let m = rows.len();
    let errors = |c: &[Complex64]| -> Vec<f64> { rows.par_iter().map(|r| combine(r, c).norm()).collect() };
    let zero = vec![ZERO; n];
    let e0 = errors(&zero);
    let mut best = LawsonOutcome {
        max_err: e0.iter().copied().fold(0.0, f64::max),
        coeffs: zero,
        spread: f64::INFINITY,
        iterations: 0,
        converged: false,
    };
    if n == 0 {
        best.spread = 0.0;
        best.converged = true;
        return Ok(best);
    }
    let mut w = vec![1.0 / m as f64; m];
    for it in 1..=opts.max_iter {
        let wmax = w.iter().copied().fold(0.0, f64::max);
        let active: Vec<usize> = (0..m).filter(|&i| w[i] > 1e-15 * wmax).collect();
        if active.len() < n {
            return Err(Error::DegenerateSystem);
        }
        let a = DMatrix::from_fn(active.len(), n, |i, k| rows[active[i]][k] * w[active[i]].sqrt());
        let b = DVector::from_fn(active.len(), |i, _| -rows[active[i]][n] * w[active[i]].sqrt());
        let c = least_squares(a, b)?;
        let e = errors(&c);
        let max_err = e.iter().copied().fold(0.0, f64::max);
        if !max_err.is_finite() {
            return Err(Error::DegenerateSystem);
        }
        let level: f64 = w.iter().zip(&e).map(|(wi, ei)| wi * ei).sum();
        let spread = (max_err - level) / max_err;
        if max_err < best.max_err || (max_err == best.max_err && spread < best.spread) {
            best.coeffs = c;
            best.max_err = max_err;
            best.spread = spread;
        }
        best.iterations = it;
        if spread < opts.tol {
            best.converged = true;
            break;
        }
        let mut total = 0.0;
        for (wi, ei) in w.iter_mut().zip(&e) {
            *wi *= ei.powf(opts.gamma);
            total += *wi;
        }
        if !(total > 0.0) {
            return Err(Error::DegenerateSystem);
        }
        for wi in w.iter_mut() {
            *wi /= total;
        }
    }
    if best.spread.is_infinite() {
        // c = 0 was never beaten; report its own spread under uniform weights
        let mean = e0.iter().sum::<f64>() / m as f64;
        best.spread = (best.max_err - mean) / best.max_err;
    }
    Ok(best)
}

/// Lawson, then an interior-point finish when it stalls short of `tol`.
fn solve_on_rows(rows: &[Vec<Complex64>], n: usize, opts: &ChebyshevOptions) -> Result<LawsonOutcome> {
    let outcome = lawson(rows, n, opts)?;
    if outcome.converged {
        return Ok(outcome);
    }
    match barrier_finish(rows, n, &outcome, opts) {
        Some(better) if better.max_err <= outcome.max_err * (1.0 + 1e-12) => Ok(LawsonOutcome {
            iterations: outcome.iterations + better.iterations,
            ..better
        }),
        _ => Ok(outcome),
    }
}

/// Log-barrier method for `min t` subject to `|e_i(c)| <= t`, started from
/// the Lawson iterate.
///
/// With `s_i = t^2 - |e_i|^2` the centring problem is
/// `min tau t - sum_i log s_i`; on the central path the multipliers
/// `l_i = 2t / (tau s_i)` sum to one and serve as the weights in the
/// equioscillation test.
fn barrier_finish(
    rows: &[Vec<Complex64>],
    n: usize,
    start: &LawsonOutcome,
    opts: &ChebyshevOptions,
) -> Option<LawsonOutcome> {
    let m = rows.len();
    let dim = 2 * n + 1;
    let errs = |c: &[Complex64]| -> Vec<Complex64> { rows.par_iter().map(|r| combine(r, c)).collect() };
    let unpack = |y: &DVector<f64>| -> Vec<Complex64> { (0..n).map(|l| Complex64::new(y[l], y[n + l])).collect() };

    let mut y = DVector::<f64>::zeros(dim);
    for (l, c) in start.coeffs.iter().enumerate() {
        y[l] = c.re;
        y[n + l] = c.im;
    }
    let e0 = errs(&start.coeffs);
    y[2 * n] = e0.iter().map(|e| e.norm()).fold(0.0, f64::max) * (1.0 + 1e-3);
    let slack = |e: &[Complex64], t: f64| -> Option<Vec<f64>> {
        let s: Vec<f64> = e.iter().map(|ei| t * t - ei.norm_sqr()).collect();
        s.iter().all(|&x| x > 0.0).then_some(s)
    };
    let phi = |tau: f64, t: f64, s: &[f64]| tau * t - s.iter().map(|x| x.ln()).sum::<f64>();

    let s0 = slack(&e0, y[2 * n])?;
    let mut tau = s0.iter().map(|x| 2.0 * y[2 * n] / x).sum::<f64>();
    let mut iterations = 0;
    for _outer in 0..60 {
        // centring
        for _ in 0..60 {
            let c = unpack(&y);
            let t = y[2 * n];
            let e = errs(&c);
            let s = slack(&e, t)?;
            let mut grad = DVector::<f64>::zeros(dim);
            // rows of ds_i / s_i and of sqrt(2 / s_i) J_i
            let mut g = DMatrix::<f64>::zeros(m, dim);
            let mut jm = DMatrix::<f64>::zeros(2 * m, 2 * n);
            let mut htt = 0.0;
            for i in 0..m {
                let ei = e[i];
                let si = s[i];
                let w = (2.0 / si).sqrt();
                for l in 0..n {
                    let beta = rows[i][l];
                    // d e / d a_l = beta, d e / d b_l = i beta
                    let da = 2.0 * (ei.conj() * beta).re;
                    let db = -2.0 * (ei.conj() * beta).im;
                    g[(i, l)] = -da / si;
                    g[(i, n + l)] = -db / si;
                    jm[(2 * i, l)] = w * beta.re;
                    jm[(2 * i + 1, l)] = w * beta.im;
                    jm[(2 * i, n + l)] = -w * beta.im;
                    jm[(2 * i + 1, n + l)] = w * beta.re;
                }
                g[(i, 2 * n)] = 2.0 * t / si;
                htt -= 2.0 / si;
            }
            for i in 0..m {
                for k in 0..dim {
                    grad[k] -= g[(i, k)];
                }
            }
            grad[2 * n] += tau;
            let mut h = g.transpose() * &g;
            let jj = jm.transpose() * &jm;
            for a in 0..2 * n {
                for b in 0..2 * n {
                    h[(a, b)] += jj[(a, b)];
                }
            }
            h[(2 * n, 2 * n)] += htt;
            let step = match h.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => h.lu().solve(&(-&grad))?,
            };
            let decrement = -grad.dot(&step);
            iterations += 1;
            if !(decrement > 1e-12) {
                break;
            }
            let base = phi(tau, t, &s);
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let y_try = &y + &step * alpha;
                let e_try = errs(&unpack(&y_try));
                if let Some(s_try) = slack(&e_try, y_try[2 * n]) {
                    if phi(tau, y_try[2 * n], &s_try) <= base - 0.25 * alpha * decrement {
                        y = y_try;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || decrement < 1e-9 {
                break;
            }
        }
        let c = unpack(&y);
        let t = y[2 * n];
        let e = errs(&c);
        let s = slack(&e, t)?;
        let lam: Vec<f64> = s.iter().map(|si| 2.0 * t / (tau * si)).collect();
        let total: f64 = lam.iter().sum();
        let abs: Vec<f64> = e.iter().map(|x| x.norm()).collect();
        let max_err = abs.iter().copied().fold(0.0, f64::max);
        let level: f64 = lam.iter().zip(&abs).map(|(l, a)| l * a).sum::<f64>() / total;
        let spread = ((max_err - level) / max_err).max(0.0);
        if spread < opts.tol {
            return Some(LawsonOutcome {
                coeffs: c,
                max_err,
                spread,
                iterations,
                converged: true,
            });
        }
        tau *= 8.0;
    }
    None
}

fn least_squares(a: DMatrix<Complex64>, b: DVector<Complex64>) -> Result<Vec<Complex64>> {
    let qr = a.qr();
    let (q, r) = qr.unpack();
    let diag_max = (0..r.ncols()).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let diag_min = (0..r.ncols()).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(diag_min > 1e-13 * diag_max) {
        return Err(Error::DegenerateSystem);
    }
    let qb = q.adjoint() * b;
    let c = r.solve_upper_triangular(&qb).ok_or(Error::DegenerateSystem)?;
    Ok(c.iter().copied().collect())
}

/// Monic minimax polynomial of degree `n` on `psi(e^{i theta_i})`.
const EXCHANGE_ROUNDS: usize = 8;

pub fn chebyshev_monic(
    map: &ExteriorMap,
    n: usize,
    mesh: &BoundaryMesh,
    opts: &ChebyshevOptions,
) -> Result<MinimaxResult> {
    if n == 0 {
        return Err(Error::InvalidParams("degree must be at least 1".into()));
    }
    if mesh.len() < 8 * (n + 1) {
        return Err(Error::InvalidParams(format!(
            "mesh has {} points, degree {n} needs at least {}",
            mesh.len(),
            8 * (n + 1)
        )));
    }
    let basis = FaberBasis::new(map, n)?;
    let rows = basis.value_matrix(&mesh.thetas, n);
    let mut outcome = solve_on_rows(&rows, n, opts)?;
    let mut working = mesh.thetas.clone();

    if opts.exchange_pass {
        // Add the refined error peaks to the working set until the discrete
        // optimum and the curve norm agree.
        let mut thetas = mesh.thetas.clone();
        thetas.extend(mesh.midpoints());
        for _ in 0..EXCHANGE_ROUNDS {
            let current = BoundaryMesh {
                thetas: thetas.clone(),
                corner_refine_levels: mesh.corner_refine_levels,
                base_count: mesh.base_count,
            };
            let peaks = error_peaks(&basis, &outcome.coeffs, &current)?;
            let peak_max = peaks
                .iter()
                .map(|&t| combine(&basis.values_at(t, n), &outcome.coeffs).norm())
                .fold(0.0, f64::max);
            let settled = working.len() > mesh.len() && peak_max <= outcome.max_err * (1.0 + opts.norm_tol);
            if settled {
                break;
            }
            thetas.extend(peaks);
            thetas.sort_by(|a, b| a.total_cmp(b));
            thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let rows2 = basis.value_matrix(&thetas, n);
            let next = match barrier_finish(&rows2, n, &outcome, opts) {
                Some(warm) => warm,
                None => solve_on_rows(&rows2, n, opts)?,
            };
            outcome = LawsonOutcome {
                iterations: outcome.iterations + next.iterations,
                ..next
            };
            working = thetas.clone();
        }
    }

    let cap = map.capacity();
    let polys = basis.polynomials(n)?;
    let scale = cap.powi(n as i32);
    let mut t = polys[n].clone();
    for (k, ck) in outcome.coeffs.iter().enumerate() {
        t.axpy(*ck, &polys[k]);
    }
    for c in t.coeffs.iter_mut() {
        *c *= scale;
    }
    t.coeffs[n] = Complex64::new(1.0, 0.0);

    let coeffs = outcome.coeffs.clone();
    let f = |theta: f64| combine(&basis.values_at(theta, n), &coeffs);
    let work_mesh = BoundaryMesh {
        thetas: working,
        corner_refine_levels: mesh.corner_refine_levels,
        base_count: mesh.base_count,
    };
    let est = sup_norm_on_curve(map, &f, &work_mesh, opts.norm_tol)?;
    let mesh_max = outcome.max_err;
    Ok(MinimaxResult {
        degree: n,
        t,
        faber_coeffs: outcome.coeffs,
        norm: est.value * scale,
        mesh_norm: mesh_max * scale,
        widom: est.value,
        iterations: outcome.iterations,
        residual_equioscillation: outcome.spread,
        converged: outcome.converged,
        norm_estimate: est,
        mesh_size: work_mesh.len(),
        basis,
    })
}

/// Refined positions of the local maxima of the error on a mesh.
fn error_peaks(basis: &FaberBasis, c: &[Complex64], mesh: &BoundaryMesh) -> Result<Vec<f64>> {
    let n = c.len();
    let vals: Vec<f64> = mesh
        .thetas
        .par_iter()
        .map(|&t| combine(&basis.values_at(t, n), c).norm())
        .collect();
    let len = vals.len();
    let peaks: Vec<usize> = (0..len)
        .filter(|&i| vals[i] >= vals[(i + len - 1) % len] && vals[i] >= vals[(i + 1) % len])
        .collect();
    peaks
        .par_iter()
        .map(|&i| {
            let lo = mesh.thetas[(i + len - 1) % len];
            let hi = mesh.thetas[(i + 1) % len];
            let (lo, hi) = unwrap_bracket(lo, mesh.thetas[i], hi);
            let f = |t: f64| combine(&basis.values_at(t, n), c).norm();
            Ok(golden_argmax(&f, lo, hi).rem_euclid(std::f64::consts::TAU))
        })
        .collect()
}

fn unwrap_bracket(lo: f64, mid: f64, hi: f64) -> (f64, f64) {
    let tau = std::f64::consts::TAU;
    let lo = if lo > mid { lo - tau } else { lo };
    let hi = if hi < mid { hi + tau } else { hi };
    (lo, hi)
}

fn golden_argmax(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    0.5 * (a + b)
}

/// Mesh and solver settings for [`widom_table`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSettings {
    /// Lower bound on the base grid; each degree uses at least `16 n`.
    pub base_count: usize,
    pub corner_refine_levels: usize,
    pub solver: ChebyshevOptions,
}

impl Default for TableSettings {
    fn default() -> Self {
        TableSettings {
            base_count: 256,
            corner_refine_levels: 6,
            solver: ChebyshevOptions {
                exchange_pass: true,
                ..ChebyshevOptions::default()
            },
        }
    }
}

impl TableSettings {
    pub fn mesh_for(&self, map: &ExteriorMap, n: usize) -> BoundaryMesh {
        map.boundary_mesh(self.base_count.max(16 * n).max(8 * (n + 1)), self.corner_refine_levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidomRow {
    pub n: usize,
    pub faber_norm: f64,
    pub weighted_norm: Option<f64>,
    pub cheb_norm: f64,
    pub widom: f64,
    pub sandwich_ok: bool,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidomTable {
    pub rows: Vec<WidomRow>,
    /// `d_m` of the weight when one was built; degrees up to it have no
    /// weighted norm.
    pub weight_length: Option<usize>,
}

/// Per degree: `||F_n||`, `||Q_{n,m}||` (when `m` is given, the curve has
/// corners and `n > d_m`), `||T_n||`, `W_n`, and whether
/// `1 <= W_n <= ||Q_{n,m}||` and `W_n <= ||F_n||` hold to within `1e-6`.
pub fn widom_table(
    map: &ExteriorMap,
    n_list: &[usize],
    m: Option<usize>,
    settings: &TableSettings,
) -> Result<WidomTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("n_list must be nonempty and strictly ascending".into()));
    }
    let plan = match m {
        Some(m) if !map.corners().is_empty() => Some(crate::weighted::weight_plan(map, m)?),
        _ => None,
    };
    let rows = n_list
        .par_iter()
        .map(|&n| widom_row(map, n, plan.as_ref(), settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(WidomTable {
        rows,
        weight_length: plan.map(|p| p.d_m),
    })
}

/// Mesh norms of `count` seeded random monic polynomials of degree `n`
/// whose lower coefficients are uniform in the unit disk.
pub fn random_monic_mesh_norms(map: &ExteriorMap, n: usize, thetas: &[f64], count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Complex64> = thetas.iter().map(|&t| map.psi_boundary(t)).collect();
    (0..count)
        .map(|_| {
            let mut coeffs: Vec<Complex64> = (0..n)
                .map(|_| {
                    let rad = rng.random::<f64>().sqrt();
                    Complex64::from_polar(rad, std::f64::consts::TAU * rng.random::<f64>())
                })
                .collect();
            coeffs.push(Complex64::new(1.0, 0.0));
            let p = Polynomial::new(coeffs).expect("monic");
            z.par_iter().map(|&zi| p.eval(zi).norm()).reduce(|| 0.0, f64::max)
        })
        .collect()
}

/// One row of [`widom_table`].
pub fn widom_row(
    map: &ExteriorMap,
    n: usize,
    plan: Option<&WeightPlan>,
    settings: &TableSettings,
) -> Result<WidomRow> {
    let mesh = settings.mesh_for(map, n);
    let cheb = chebyshev_monic(map, n, &mesh, &settings.solver)?;
    let basis = &cheb.basis;
    let tol = settings.solver.norm_tol;
    let faber = sup_norm_on_curve(map, &|t: f64| basis.value_at(t, n), &mesh, tol)?.value;
    let weighted = match plan {
        Some(p) if n > p.d_m => {
            let q = |t: f64| p.combine(&basis.values_at(t, n), n).expect("n > d_m");
            Some(sup_norm_on_curve(map, &q, &mesh, tol)?.value)
        }
        _ => None,
    };
    let slack = 1e-6;
    let sandwich_ok = cheb.widom >= 1.0 - slack
        && cheb.widom <= faber + slack
        && weighted.is_none_or(|q| cheb.widom <= q + slack);
    Ok(WidomRow {
        n,
        faber_norm: faber,
        weighted_norm: weighted,
        cheb_norm: cheb.norm,
        widom: cheb.widom,
        sandwich_ok,
        converged: cheb.converged,
        iterations: cheb.iterations,
    })
}
