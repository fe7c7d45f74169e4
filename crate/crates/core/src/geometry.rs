//! Closed chains, their angle vectors and closed continuum curves.
//!
//! A chain with `N` links of length `eps = 1/N` is encoded by the
//! directions `theta_i` of its links, with the convention
//! `theta_0 = theta_N - 2 pi`. The chain closes when the direction sums
//! vanish, and every turning increment stays strictly inside (-pi, pi).

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn unit(angle: f64) -> Self {
        Point::new(angle.cos(), angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point> for f64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        Point::new(self * p.x, self * p.y)
    }
}

/// Closure tolerance for a vector of `n` angles.
pub fn closure_tol(n: usize) -> f64 {
    1e-10 * n as f64
}

/// Turning increment from `prev` to `next` across the wrap-around,
/// `next - (prev - 2 pi)`. Every caller uses this one expression so that
/// energies computed along different routes agree bit for bit.
#[inline]
pub fn wrap_increment(first: f64, last: f64) -> f64 {
    first - (last - TAU)
}

/// Link directions `theta_1..theta_N` of a closed chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleVector {
    pub thetas: Vec<f64>,
}

impl AngleVector {
    pub fn new(thetas: Vec<f64>) -> Self {
        AngleVector { thetas }
    }

    pub fn n(&self) -> usize {
        self.thetas.len()
    }

    /// Link length `1/N`.
    pub fn eps(&self) -> f64 {
        1.0 / self.n() as f64
    }

    /// `theta_i - theta_{i-1}` for `i = 1..N` with `theta_0 = theta_N - 2 pi`.
    pub fn increments(&self) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(n);
        out.push(wrap_increment(self.thetas[0], self.thetas[n - 1]));
        out.extend(self.thetas.windows(2).map(|w| w[1] - w[0]));
        out
    }

    pub fn closure_residual(&self) -> (f64, f64) {
        closure_residual(self)
    }

    /// Checks membership in the admissible set: closure sums within
    /// `1e-10 N` and every increment strictly inside (-pi, pi).
    pub fn check_admissible(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::Admissibility(format!("need at least 2 angles, got {n}")));
        }
        if let Some(t) = self.thetas.iter().find(|t| !t.is_finite()) {
            return Err(Error::Admissibility(format!("non-finite angle {t}")));
        }
        let (c, s) = self.closure_residual();
        let tol = closure_tol(n);
        if c.abs() > tol || s.abs() > tol {
            return Err(Error::ConstraintViolation { cos: c, sin: s, tol });
        }
        for (i, d) in self.increments().iter().enumerate() {
            if !(d.abs() < PI) {
                return Err(Error::Admissibility(format!(
                    "increment {} = {d} not inside (-pi, pi)",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn is_admissible(&self) -> bool {
        self.check_admissible().is_ok()
    }

    /// Whether `theta_1` lies in (-pi, pi].
    pub fn is_normalized(&self) -> bool {
        self.thetas.first().map_or(false, |t| *t > -PI && *t <= PI)
    }

    /// Shifts every angle by the multiple of 2 pi that puts `theta_1` in (-pi, pi].
    pub fn normalized(&self) -> AngleVector {
        let Some(&first) = self.thetas.first() else {
            return self.clone();
        };
        let mut k = ((first + PI) / TAU).floor();
        if first - TAU * k <= -PI {
            k -= 1.0;
        }
        let shift = TAU * k;
        AngleVector::new(self.thetas.iter().map(|t| t - shift).collect())
    }

    /// Angle vector with link `start` relabelled as link 1. Links that wrap
    /// past the end gain 2 pi so that increments are preserved.
    pub fn rotated(&self, start: usize) -> AngleVector {
        let n = self.n();
        let start = start % n.max(1);
        let thetas = (0..n)
            .map(|i| {
                let j = start + i;
                if j < n {
                    self.thetas[j]
                } else {
                    self.thetas[j - n] + TAU
                }
            })
            .collect();
        AngleVector::new(thetas)
    }
}

/// `(sum cos theta_i, sum sin theta_i)`.
pub fn closure_residual(a: &AngleVector) -> (f64, f64) {
    a.thetas
        .iter()
        .fold((0.0, 0.0), |(c, s), t| (c + t.cos(), s + t.sin()))
}

/// Angles of the regular convex `n`-gon, `theta_i = (2i - 1) pi / n`, whose
/// increments all equal `2 pi / n`.
pub fn regular_polygon(n: usize) -> Result<AngleVector> {
    if n < 3 {
        return Err(Error::Argument(format!("a polygon needs at least 3 sides, got {n}")));
    }
    let step = TAU / n as f64;
    Ok(AngleVector::new(
        (0..n).map(|i| 0.5 * step + step * i as f64).collect(),
    ))
}

/// Closed chain with `N` equal links of length `eps = 1/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    #[serde(rename = "epsilon")]
    eps: f64,
    points: Vec<Point>,
}

/// Relative tolerance on chain link lengths.
pub const LINK_TOL: f64 = 1e-10;

impl Chain {
    /// Validates equal links (including the closing link) and `N eps = 1`.
    pub fn new(eps: f64, points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidChain(format!("need at least 2 points, got {n}")));
        }
        if !(eps > 0.0) || (eps * n as f64 - 1.0).abs() > 8.0 * f64::EPSILON {
            return Err(Error::InvalidChain(format!("N eps = {} != 1", eps * n as f64)));
        }
        for i in 0..n {
            let len = points[(i + 1) % n].distance(points[i]);
            if (len - eps).abs() > LINK_TOL * eps {
                return Err(Error::InvalidChain(format!(
                    "link {} has length {len}, expected {eps}",
                    i + 1
                )));
            }
        }
        Ok(Chain { eps, points })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Link vectors `r_{i+1} - r_i`, cyclically.
    pub fn links(&self) -> impl Iterator<Item = Point> + '_ {
        let n = self.n();
        (0..n).map(move |i| self.points[(i + 1) % n] - self.points[i])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            epsilon: f64,
            points: Vec<Point>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Chain::new(raw.epsilon, raw.points)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Builds the chain whose link `i` points along `theta_i`, starting at `origin`.
pub fn chain_from_angles(a: &AngleVector, eps: f64, origin: Point) -> Result<Chain> {
    let n = a.n();
    if n < 2 {
        return Err(Error::Argument(format!("need at least 2 angles, got {n}")));
    }
    if (eps * n as f64 - 1.0).abs() > 8.0 * f64::EPSILON {
        return Err(Error::Argument(format!("eps = {eps} is not 1/{n}")));
    }
    let (c, s) = a.closure_residual();
    let tol = closure_tol(n);
    if c.abs() > tol || s.abs() > tol {
        return Err(Error::ConstraintViolation { cos: c, sin: s, tol });
    }
    let mut points = Vec::with_capacity(n);
    let mut r = origin;
    for t in &a.thetas {
        points.push(r);
        r = r + eps * Point::unit(*t);
    }
    Chain::new(eps, points).map_err(|e| match e {
        Error::InvalidChain(_) => Error::ConstraintViolation { cos: c, sin: s, tol },
        other => other,
    })
}

/// Recovers link directions with successive increments unwrapped into
/// (-pi, pi) and `theta_1` in (-pi, pi]. Only chains of winding number 1 are
/// supported.
pub fn angles_from_chain(c: &Chain) -> Result<AngleVector> {
    let raw: Vec<f64> = c
        .links()
        .map(|l| {
            let t = l.y.atan2(l.x);
            if t == -PI {
                PI
            } else {
                t
            }
        })
        .collect();
    let n = raw.len();
    let unwrap = |d: f64, index: usize| -> Result<f64> {
        let w = d - TAU * (d / TAU).round();
        if w.abs() >= PI {
            return Err(Error::Branch { index });
        }
        Ok(w)
    };
    let mut thetas = Vec::with_capacity(n);
    thetas.push(raw[0]);
    for i in 1..n {
        let d = unwrap(raw[i] - raw[i - 1], i + 1)?;
        thetas.push(thetas[i - 1] + d);
    }
    let closing = unwrap(raw[0] - raw[n - 1], 1)?;
    let turning = thetas[n - 1] - thetas[0] + closing;
    let k = (turning / TAU).round() as i64;
    if k != 1 {
        return Err(Error::UnsupportedWinding(k));
    }
    Ok(AngleVector::new(thetas))
}

/// An arc-length parametrized angle function on [0, 1].
pub trait AngleFunction: Send + Sync {
    fn theta(&self, s: f64) -> f64;
    fn theta_prime(&self, s: f64) -> f64;
    fn smoothness(&self) -> Smoothness;
    /// Panel count for quadrature; sampled functions align panels with cells.
    fn panels(&self) -> usize {
        quadrature::DEFAULT_PANELS
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    C2,
    H1,
}

/// `(int cos theta, int sin theta)` over [0, 1].
pub fn closure_integrals(f: &dyn AngleFunction) -> (f64, f64) {
    quadrature::integrate_pair(
        |s| {
            let t = f.theta(s);
            (t.cos(), t.sin())
        },
        0.0,
        1.0,
        f.panels(),
    )
}

/// Tolerance for `theta(1) - theta(0) = 2 pi`.
pub const WINDING_TOL: f64 = 1e-10;
/// Tolerance for the closure integrals of a continuum curve.
pub const CURVE_CLOSURE_TOL: f64 = 1e-8;

/// Checks both constraints of a closed continuum curve.
pub fn check_closed(f: &dyn AngleFunction) -> Result<()> {
    let turn = f.theta(1.0) - f.theta(0.0);
    if (turn - TAU).abs() > WINDING_TOL {
        return Err(Error::Admissibility(format!(
            "theta(1) - theta(0) = {turn}, expected 2 pi"
        )));
    }
    let (c, s) = closure_integrals(f);
    if c.abs() > CURVE_CLOSURE_TOL || s.abs() > CURVE_CLOSURE_TOL {
        return Err(Error::ConstraintViolation { cos: c, sin: s, tol: CURVE_CLOSURE_TOL });
    }
    Ok(())
}

/// `theta(s) = 2 pi s + phase`: the circle of radius `1/(2 pi)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Circle {
    pub phase: f64,
}

impl AngleFunction for Circle {
    fn theta(&self, s: f64) -> f64 {
        TAU * s + self.phase
    }
    fn theta_prime(&self, _s: f64) -> f64 {
        TAU
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }
}

/// `theta(s) = 2 pi s + a sin(2 pi m s)`. Closed for every integer `m >= 2`;
/// `m = 1` needs the closure projection.
#[derive(Clone, Copy, Debug)]
pub struct Perturbed {
    pub amplitude: f64,
    pub mode: u32,
}

impl AngleFunction for Perturbed {
    fn theta(&self, s: f64) -> f64 {
        TAU * s + self.amplitude * (TAU * self.mode as f64 * s).sin()
    }
    fn theta_prime(&self, s: f64) -> f64 {
        let w = TAU * self.mode as f64;
        TAU + self.amplitude * w * (w * s).cos()
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }
}

/// Angle function known to satisfy both closure constraints, with
/// positions cached at panel boundaries.
#[derive(Clone)]
pub struct ClosedCurve {
    angle: Arc<dyn AngleFunction>,
    origin: Point,
    knots: Vec<Point>,
}

impl fmt::Debug for ClosedCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedCurve")
            .field("smoothness", &self.angle.smoothness())
            .field("panels", &self.angle.panels())
            .field("origin", &self.origin)
            .finish()
    }
}

impl ClosedCurve {
    pub fn new(angle: Arc<dyn AngleFunction>) -> Result<Self> {
        check_closed(angle.as_ref())?;
        Ok(Self::build(angle, Point::ORIGIN))
    }

    pub fn circle() -> Self {
        Self::build(Arc::new(Circle::default()), Point::ORIGIN)
    }

    fn build(angle: Arc<dyn AngleFunction>, origin: Point) -> Self {
        let panels = angle.panels();
        let width = 1.0 / panels as f64;
        let mut knots = Vec::with_capacity(panels + 1);
        let mut r = origin;
        knots.push(r);
        for k in 0..panels {
            let lo = width * k as f64;
            r = r + tangent_integral(angle.as_ref(), lo, lo + width);
            knots.push(r);
        }
        ClosedCurve { angle, origin, knots }
    }

    pub fn angle(&self) -> &Arc<dyn AngleFunction> {
        &self.angle
    }

    pub fn smoothness(&self) -> Smoothness {
        self.angle.smoothness()
    }

    /// Angle extended by `theta(s + 1) = theta(s) + 2 pi`.
    pub fn theta(&self, s: f64) -> f64 {
        let k = s.floor();
        if k == 0.0 || s == 1.0 {
            return self.angle.theta(s);
        }
        self.angle.theta(s - k) + TAU * k
    }

    /// Curvature, extended with period 1.
    pub fn theta_prime(&self, s: f64) -> f64 {
        let k = s.floor();
        if k == 0.0 || s == 1.0 {
            return self.angle.theta_prime(s);
        }
        self.angle.theta_prime(s - k)
    }

    /// `r(s) = r(0) + int_0^s (cos theta, sin theta)`, extended periodically.
    pub fn position(&self, s: f64) -> Point {
        let k = s.floor();
        let t = if s == 1.0 { 1.0 } else { s - k };
        let panels = self.knots.len() - 1;
        let idx = ((t * panels as f64).floor() as usize).min(panels - 1);
        let lo = idx as f64 / panels as f64;
        self.knots[idx] + tangent_integral(self.angle.as_ref(), lo, t)
    }

    pub fn closure_integrals(&self) -> (f64, f64) {
        closure_integrals(self.angle.as_ref())
    }
}

impl AngleFunction for ClosedCurve {
    fn theta(&self, s: f64) -> f64 {
        self.angle.theta(s)
    }
    fn theta_prime(&self, s: f64) -> f64 {
        self.angle.theta_prime(s)
    }
    fn smoothness(&self) -> Smoothness {
        self.angle.smoothness()
    }
    fn panels(&self) -> usize {
        self.angle.panels()
    }
}

fn tangent_integral(f: &dyn AngleFunction, a: f64, b: f64) -> Point {
    if b <= a {
        return Point::ORIGIN;
    }
    let mut acc = Point::ORIGIN;
    for (x, w) in quadrature::panel_nodes(a, b) {
        acc = acc + w * Point::unit(f.theta(x));
    }
    acc
}

/// `r(s)` for a closed curve; see [`ClosedCurve::position`].
pub fn curve_position(c: &ClosedCurve, s: f64) -> Point {
    c.position(s)
}

/// Admissible perturbation of the regular `n`-gon by smooth random Fourier
/// noise of peak amplitude `amplitude`, closed up by a Newton correction of
/// the first Fourier mode.
pub fn random_admissible<R: Rng>(n: usize, amplitude: f64, rng: &mut R) -> Result<AngleVector> {
    let base = regular_polygon(n)?;
    let modes = 4.min(n / 2).max(1);
    let mut amp = amplitude;
    for _ in 0..40 {
        let coeffs: Vec<(f64, f64)> = (1..=modes)
            .map(|k| {
                let scale = 1.0 / (k * k) as f64;
                (scale * rng.gen_range(-1.0..1.0), scale * rng.gen_range(-1.0..1.0))
            })
            .collect();
        let noise: Vec<f64> = (0..n)
            .map(|i| {
                let x = TAU * i as f64 / n as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let kx = (k + 1) as f64 * x;
                        a * kx.cos() + b * kx.sin()
                    })
                    .sum::<f64>()
            })
            .collect();
        let peak = noise.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            continue;
        }
        let thetas: Vec<f64> = base
            .thetas
            .iter()
            .zip(&noise)
            .map(|(t, v)| t + amp * v / peak)
            .collect();
        if let Some(a) = close_first_mode(AngleVector::new(thetas)) {
            if a.increments().iter().all(|d| d.abs() < PI - 1e-3) && a.is_admissible() {
                return Ok(a);
            }
        }
        amp *= 0.7;
    }
    Err(Error::Argument(format!(
        "could not build an admissible perturbation of the {n}-gon"
    )))
}

/// Newton iteration on `c cos(2 pi s_i) + d sin(2 pi s_i)` added to the
/// angles so that both discrete closure sums vanish.
pub fn close_first_mode(a: AngleVector) -> Option<AngleVector> {
    let n = a.n();
    if n < 3 {
        return None;
    }
    let phases: Vec<f64> = (0..n).map(|i| TAU * (i as f64 + 0.5) / n as f64).collect();
    let perturb = |c: f64, d: f64| {
        AngleVector::new(
            a.thetas
                .iter()
                .zip(&phases)
                .map(|(t, x)| t + c * x.cos() + d * x.sin())
                .collect(),
        )
    };
    let (mut c, mut d) = (0.0, 0.0);
    for _ in 0..50 {
        let b = perturb(c, d);
        let (rc, rs) = b.closure_residual();
        if rc.abs().max(rs.abs()) <= 1e-14 * n as f64 {
            return Some(b);
        }
        let (mut a11, mut a12, mut a21, mut a22) = (0.0, 0.0, 0.0, 0.0);
        for (t, x) in b.thetas.iter().zip(&phases) {
            let (st, ct) = t.sin_cos();
            let (sx, cx) = x.sin_cos();
            a11 -= st * cx;
            a12 -= st * sx;
            a21 += ct * cx;
            a22 += ct * sx;
        }
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-12 {
            return None;
        }
        c -= (a22 * rc - a12 * rs) / det;
        d -= (-a21 * rc + a11 * rs) / det;
        if !(c.is_finite() && d.is_finite()) {
            return None;
        }
    }
    let b = perturb(c, d);
    let (rc, rs) = b.closure_residual();
    (rc.abs().max(rs.abs()) <= closure_tol(n)).then_some(b)
}

/// Newton iteration on two angles a quarter-turn apart so that both
/// discrete closure sums vanish.
pub fn close_two_angles(mut a: AngleVector) -> Option<AngleVector> {
    let n = a.n();
    if n < 3 {
        return None;
    }
    let (j, k) = best_pair(&a);
    for _ in 0..50 {
        let (c, s) = a.closure_residual();
        if c.abs().max(s.abs()) <= 1e-14 * n as f64 {
            return Some(a);
        }
        let (tj, tk) = (a.thetas[j], a.thetas[k]);
        // d(c, s) / d(theta_j, theta_k)
        let (a11, a12, a21, a22) = (-tj.sin(), -tk.sin(), tj.cos(), tk.cos());
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-12 {
            return None;
        }
        let dj = (a22 * c - a12 * s) / det;
        let dk = (-a21 * c + a11 * s) / det;
        a.thetas[j] -= dj;
        a.thetas[k] -= dk;
    }
    let (c, s) = a.closure_residual();
    (c.abs().max(s.abs()) <= closure_tol(n)).then_some(a)
}

fn best_pair(a: &AngleVector) -> (usize, usize) {
    let n = a.n();
    let mut best = (0, 1);
    let mut best_det = -1.0;
    for j in 0..n {
        let k = (j + n / 4) % n;
        let det = (a.thetas[k] - a.thetas[j]).sin().abs();
        if det > best_det + 1e-12 {
            best_det = det;
            best = (j, k);
        }
    }
    best
}
