//! Jordan curves described by their exterior conformal maps.
//!
//! A curve is the image of the unit circle under a map `psi` that sends
//! `|w| > 1` conformally onto the exterior of the curve, normalized so that
//! `psi(w) / w -> capacity` at infinity. Corners are declared metadata: the
//! preimage angle on the unit circle together with the exterior angle
//! `lambda * pi`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;
const CORNER_MATCH: f64 = 1e-12;

/// Which closed-form map backs an [`ExteriorMap`].
#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// `psi(w) = r w`.
    Circle { radius: f64 },
    /// `psi(w) = w + c / w`, `0 < c < 1`.
    Ellipse { c: f64 },
    /// `psi(w) = w + w^-2 / 2`, three outward cusps.
    Deltoid,
    /// `psi(w) = (w + sqrt(w^2 - 1)) / 2`, two corners of opening `pi / 2`.
    Lune,
    /// `psi(w) = b w + b0 + sum_k coeffs[k-1] w^-k`.
    Laurent {
        b: f64,
        b0: Complex64,
        coeffs: Vec<Complex64>,
    },
}

/// Selector for [`make_builtin_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    Circle,
    Ellipse,
    Deltoid,
    Lune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerInfo {
    /// Preimage angle on the unit circle, in `[0, 2pi)`.
    pub theta: f64,
    /// `psi(e^{i theta})`.
    pub z: Complex64,
    /// Exterior angle divided by `pi`, in `[0, 2]`.
    pub lambda: f64,
    /// `max(lambda, 2 - lambda)`.
    pub big_lambda: f64,
}

impl CornerInfo {
    fn new(theta: f64, z: Complex64, lambda: f64) -> Self {
        CornerInfo {
            theta,
            z,
            lambda,
            big_lambda: lambda.max(2.0 - lambda),
        }
    }
}

/// Corner declaration used by user-supplied Laurent maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornerSpec {
    pub theta: f64,
    pub lambda: f64,
}

/// JSON form of a curve, e.g. `{"kind":"ellipse","c":0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipse {
        c: f64,
    },
    Deltoid,
    Lune,
    Laurent {
        b: f64,
        #[serde(default)]
        b0: Complex64,
        coeffs: Vec<Complex64>,
        #[serde(default)]
        corners: Vec<CornerSpec>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExteriorMap {
    kind: CurveKind,
    capacity: f64,
    corners: Vec<CornerInfo>,
}

/// Parameter samples on `[0, 2pi)` used for boundary evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMesh {
    pub thetas: Vec<f64>,
    pub corner_refine_levels: usize,
    pub base_count: usize,
}

impl BoundaryMesh {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Midpoints between cyclically consecutive samples.
    pub fn midpoints(&self) -> Vec<f64> {
        let n = self.thetas.len();
        (0..n)
            .map(|i| {
                let a = self.thetas[i];
                let b = if i + 1 < n {
                    self.thetas[i + 1]
                } else {
                    self.thetas[0] + TAU
                };
                wrap_angle(0.5 * (a + b))
            })
            .collect()
    }
}

/// Reduce an angle to `[0, 2pi)`.
pub fn wrap_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

pub fn make_builtin_curve(kind: BuiltinKind, params: &[f64]) -> Result<ExteriorMap> {
    match kind {
        BuiltinKind::Circle => match params {
            [r] => ExteriorMap::circle(*r),
            _ => Err(Error::InvalidParams("circle takes one parameter (radius)".into())),
        },
        BuiltinKind::Ellipse => match params {
            [c] => ExteriorMap::ellipse(*c),
            _ => Err(Error::InvalidParams("ellipse takes one parameter (c)".into())),
        },
        BuiltinKind::Deltoid if params.is_empty() => Ok(ExteriorMap::deltoid()),
        BuiltinKind::Lune if params.is_empty() => Ok(ExteriorMap::lune()),
        _ => Err(Error::InvalidParams(format!("{kind:?} takes no parameters"))),
    }
}

impl ExteriorMap {
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParams(format!("circle radius must be > 0, got {radius}")));
        }
        Ok(ExteriorMap {
            kind: CurveKind::Circle { radius },
            capacity: radius,
            corners: Vec::new(),
        })
    }

    pub fn ellipse(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParams(format!("ellipse needs c in (0,1), got {c}")));
        }
        Ok(ExteriorMap {
            kind: CurveKind::Ellipse { c },
            capacity: 1.0,
            corners: Vec::new(),
        })
    }

    pub fn deltoid() -> Self {
        let mut map = ExteriorMap {
            kind: CurveKind::Deltoid,
            capacity: 1.0,
            corners: Vec::new(),
        };
        map.corners = (0..3)
            .map(|k| {
                let theta = TAU * k as f64 / 3.0;
                CornerInfo::new(theta, map.psi_boundary(theta), 2.0)
            })
            .collect();
        map
    }

    pub fn lune() -> Self {
        let mut map = ExteriorMap {
            kind: CurveKind::Lune,
            capacity: 1.0,
            corners: Vec::new(),
        };
        map.corners = [0.0, PI]
            .iter()
            .map(|&theta| CornerInfo::new(theta, map.psi_boundary(theta), 0.5))
            .collect();
        map
    }

    /// User map `b w + b0 + sum_k coeffs[k-1] w^-k` with declared corners.
    ///
    /// Rejects maps whose derivative vanishes in `|w| > 1` or whose boundary
    /// image just outside the unit circle self-intersects.
    pub fn laurent(
        b: f64,
        b0: Complex64,
        coeffs: Vec<Complex64>,
        corners: &[CornerSpec],
    ) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParams(format!("leading coefficient b must be > 0, got {b}")));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) || !b0.re.is_finite() {
            return Err(Error::InvalidParams("non-finite Laurent coefficient".into()));
        }
        let mut map = ExteriorMap {
            kind: CurveKind::Laurent { b, b0, coeffs },
            capacity: b,
            corners: Vec::new(),
        };
        let mut last = -1.0;
        for c in corners {
            if !(0.0..TAU).contains(&c.theta) || c.theta <= last {
                return Err(Error::InvalidParams(
                    "corner angles must be strictly increasing in [0, 2pi)".into(),
                ));
            }
            if !(0.0..=2.0).contains(&c.lambda) {
                return Err(Error::InvalidParams(format!("corner lambda {} outside [0, 2]", c.lambda)));
            }
            last = c.theta;
            let z = map.psi_boundary(c.theta);
            map.corners.push(CornerInfo::new(c.theta, z, c.lambda));
        }
        map.check_derivative_zeros()?;
        if !map.is_simple_near_boundary(1e-3, 4096) {
            return Err(Error::NotUnivalent(
                "image of |w| = 1.001 self-intersects".into(),
            ));
        }
        Ok(map)
    }

    pub fn from_spec(spec: &CurveSpec) -> Result<Self> {
        match spec {
            CurveSpec::Circle { radius } => Self::circle(*radius),
            CurveSpec::Ellipse { c } => Self::ellipse(*c),
            CurveSpec::Deltoid => Ok(Self::deltoid()),
            CurveSpec::Lune => Ok(Self::lune()),
            CurveSpec::Laurent {
                b,
                b0,
                coeffs,
                corners,
            } => Self::laurent(*b, *b0, coeffs.clone(), corners),
        }
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn corners(&self) -> &[CornerInfo] {
        &self.corners
    }

    pub fn corner_thetas(&self) -> Vec<f64> {
        self.corners.iter().map(|c| c.theta).collect()
    }

    /// Largest `Lambda_k`, or 1 for a corner-free curve.
    pub fn max_big_lambda(&self) -> f64 {
        self.corners.iter().map(|c| c.big_lambda).fold(1.0, f64::max)
    }

    /// Index of the corner whose preimage is within `tol` of `theta`.
    pub fn corner_at(&self, theta: f64, tol: f64) -> Option<usize> {
        self.corners
            .iter()
            .position(|c| angle_distance(c.theta, theta) <= tol)
    }

    /// `lambda(theta)`: 1 at smooth points, `lambda_k` at corner preimages.
    pub fn lambda_at(&self, theta: f64) -> f64 {
        match self.corner_at(theta, CORNER_MATCH) {
            Some(k) => self.corners[k].lambda,
            None => 1.0,
        }
    }

    /// Coefficients `b_1..` when `psi` is a Laurent polynomial, with `b` and `b0`.
    pub(crate) fn finite_laurent(&self) -> Option<(f64, Complex64, Vec<Complex64>)> {
        let zero = Complex64::new(0.0, 0.0);
        match &self.kind {
            CurveKind::Circle { radius } => Some((*radius, zero, Vec::new())),
            CurveKind::Ellipse { c } => Some((1.0, zero, vec![Complex64::new(*c, 0.0)])),
            CurveKind::Deltoid => Some((1.0, zero, vec![zero, Complex64::new(0.5, 0.0)])),
            CurveKind::Lune => None,
            CurveKind::Laurent { b, b0, coeffs } => Some((*b, *b0, coeffs.clone())),
        }
    }

    fn check_domain(w: Complex64) -> Result<()> {
        let r = w.norm();
        if r < 1.0 - DOMAIN_SLACK {
            Err(Error::OutsideDomain { modulus: r })
        } else {
            Ok(())
        }
    }

    /// Closed-form `psi(w)` for `|w| >= 1`.
    pub fn psi(&self, w: Complex64) -> Result<Complex64> {
        Self::check_domain(w)?;
        Ok(self.psi_unchecked(w))
    }

    /// Boundary value `psi(e^{i theta})`.
    pub fn psi_boundary(&self, theta: f64) -> Complex64 {
        self.psi_unchecked(Complex64::from_polar(1.0, theta))
    }

    pub(crate) fn psi_unchecked(&self, w: Complex64) -> Complex64 {
        match &self.kind {
            CurveKind::Circle { radius } => w * *radius,
            CurveKind::Ellipse { c } => w + *c / w,
            CurveKind::Deltoid => {
                let u = w.inv();
                w + 0.5 * u * u
            }
            CurveKind::Lune => {
                let u = w.inv();
                let root = (1.0 - u * u).sqrt();
                0.5 * (w + w * root)
            }
            CurveKind::Laurent { b, b0, coeffs } => {
                let u = w.inv();
                let tail = coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| (acc + c) * u);
                w * *b + b0 + tail
            }
        }
    }

    /// `psi'(w)`; fails at corner preimages where it vanishes or is undefined.
    pub fn psi_prime(&self, w: Complex64) -> Result<Complex64> {
        Self::check_domain(w)?;
        if (w.norm() - 1.0).abs() <= CORNER_MATCH {
            if let Some(k) = self.corner_at(w.arg().rem_euclid(TAU), CORNER_MATCH) {
                return Err(Error::CornerPoint {
                    theta: self.corners[k].theta,
                });
            }
        }
        let d = self.psi_prime_unchecked(w);
        if !(d.re.is_finite() && d.im.is_finite()) {
            return Err(Error::CornerPoint {
                theta: w.arg().rem_euclid(TAU),
            });
        }
        Ok(d)
    }

    pub fn psi_prime_boundary(&self, theta: f64) -> Result<Complex64> {
        self.psi_prime(Complex64::from_polar(1.0, theta))
    }

    pub(crate) fn psi_prime_unchecked(&self, w: Complex64) -> Complex64 {
        match &self.kind {
            CurveKind::Circle { radius } => Complex64::new(*radius, 0.0),
            CurveKind::Ellipse { c } => 1.0 - *c / (w * w),
            CurveKind::Deltoid => 1.0 - w.powi(-3),
            CurveKind::Lune => {
                let u = w.inv();
                0.5 * (1.0 + (1.0 - u * u).sqrt().inv())
            }
            CurveKind::Laurent { b, coeffs, .. } => {
                let u = w.inv();
                // -sum k b_k w^{-k-1}
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = (acc + c * (k + 1) as f64) * u;
                }
                Complex64::new(*b, 0.0) - acc * u
            }
        }
    }

    /// Uniform base grid plus geometric clusters around each corner.
    ///
    /// Base samples sit at `2pi (i + 1/2) / base_count`, minus any that land
    /// on a corner. Around each corner the cluster points are
    /// `theta_k +- delta0 * 2^-(j+1)` for `j = 0..=levels`, where `delta0` is
    /// half the smallest gap between corner preimages, so clusters of
    /// neighbouring corners never meet.
    pub fn boundary_mesh(&self, base_count: usize, corner_refine_levels: usize) -> BoundaryMesh {
        let base_count = base_count.max(64);
        // an odd base_count can put a sample exactly on a corner
        let mut thetas: Vec<f64> = (0..base_count)
            .map(|i| TAU * (i as f64 + 0.5) / base_count as f64)
            .filter(|&t| self.corners.iter().all(|c| angle_distance(t, c.theta) > 1e-12))
            .collect();
        if !self.corners.is_empty() {
            let delta0 = 0.5 * self.min_corner_gap();
            for c in &self.corners {
                for j in 0..=corner_refine_levels {
                    let off = delta0 * 0.5f64.powi(j as i32 + 1);
                    thetas.push(wrap_angle(c.theta + off));
                    thetas.push(wrap_angle(c.theta - off));
                }
            }
        }
        thetas.sort_by(|a, b| a.total_cmp(b));
        thetas.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        BoundaryMesh {
            thetas,
            corner_refine_levels,
            base_count,
        }
    }

    /// Smallest cyclic gap between corner preimages (`2pi` for one corner,
    /// `2pi` as well when there are none).
    pub fn min_corner_gap(&self) -> f64 {
        let n = self.corners.len();
        if n <= 1 {
            return TAU;
        }
        (0..n)
            .map(|i| {
                let a = self.corners[i].theta;
                let b = if i + 1 < n {
                    self.corners[i + 1].theta
                } else {
                    self.corners[0].theta + TAU
                };
                b - a
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Argument-principle check that `psi'` has no zeros in `|w| > 1.001`.
    fn check_derivative_zeros(&self) -> Result<()> {
        let CurveKind::Laurent { coeffs, .. } = &self.kind else {
            return Ok(());
        };
        // p(w) = w^{N+1} psi'(w) is a polynomial of degree N+1; all its zeros
        // must lie inside the contour |w| = 1 + eps.
        let degree = coeffs.len() as i32 + 1;
        let radius = 1.0 + 1e-3;
        let p = |t: f64| {
            let w = Complex64::from_polar(radius, t);
            self.psi_prime_unchecked(w) * w.powi(degree)
        };
        let winding = winding_number(p, 4096);
        if winding != degree as i64 {
            return Err(Error::NotUnivalent(format!(
                "psi' has {} zero(s) outside the unit circle",
                degree as i64 - winding
            )));
        }
        Ok(())
    }

    /// Whether the image of `|w| = 1 + eps` sampled at `samples` points is a
    /// simple polygon.
    pub fn is_simple_near_boundary(&self, eps: f64, samples: usize) -> bool {
        let pts: Vec<Complex64> = (0..samples)
            .map(|i| self.psi_unchecked(Complex64::from_polar(1.0 + eps, TAU * i as f64 / samples as f64)))
            .collect();
        polygon_is_simple(&pts)
    }
}

/// Winding number of `t -> f(t)` around 0 for `t` in `[0, 2pi]`, sampled
/// adaptively so that no step turns by more than `pi / 4`.
pub(crate) fn winding_number(f: impl Fn(f64) -> Complex64, samples: usize) -> i64 {
    fn step(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, fa: Complex64, fb: Complex64, depth: u32) -> f64 {
        let d = (fb / fa).arg();
        if d.abs() < PI / 4.0 || depth > 40 {
            return d;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        step(f, a, m, fa, fm, depth + 1) + step(f, m, b, fm, fb, depth + 1)
    }
    let h = TAU / samples as f64;
    let mut total = 0.0;
    let mut prev = f(0.0);
    for i in 1..=samples {
        let t = h * i as f64;
        let cur = f(t);
        total += step(&f, t - h, t, prev, cur, 0);
        prev = cur;
    }
    (total / TAU).round() as i64
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0) && d1 != 0.0 && d2 != 0.0
}

fn polygon_is_simple(pts: &[Complex64]) -> bool {
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    let bbox: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let (a, b) = seg(i);
            (a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im))
        })
        .collect();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (bbox[i], bbox[j]);
            if bi.1 < bj.0 || bj.1 < bi.0 || bi.3 < bj.2 || bj.3 < bi.2 {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
