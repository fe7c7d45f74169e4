//! Smoothing of closed H1 angle functions into C2 ones that keep both
//! closure constraints, and a two-bump projection onto closed curves.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{check_closed, closure_integrals, AngleFunction, ClosedCurve, Smoothness};
use crate::quadrature;

/// Working sample resolution of the smoother.
pub const DEFAULT_SAMPLES: usize = 4096;
/// Tolerance on each component of the closure map in the nested bisection.
pub const MAP_TOL: f64 = 1e-10;
/// Kernel half-widths are swept downward from this value.
pub const MAX_WIDTH: f64 = 0.125;
/// Narrowest kernel, in samples, that still counts as smoothing.
pub const MIN_WIDTH_SAMPLES: f64 = 4.0;
const SIGN_MARGIN: f64 = 1e-13;

/// `exp(1 - 1/(1 - t^2))` on (-1, 1), zero outside; peak value 1.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

fn bump_prime(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - t * t;
        -2.0 * t / (q * q) * bump(t)
    }
}

/// Angle function given by samples at `s_k = k/m`, interpolated by a
/// periodic cubic spline of `theta(s) - 2 pi s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledAngle {
    u: Vec<f64>,
    z: Vec<f64>,
}

impl SampledAngle {
    /// From the periodic winding-subtracted values `u_k = theta(k/m) - 2 pi k/m`.
    pub fn from_periodic(u: Vec<f64>) -> Result<Self> {
        if u.len() < 4 {
            return Err(Error::Argument(format!("need at least 4 samples, got {}", u.len())));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite sample".into()));
        }
        let z = spline_moments(&u);
        Ok(SampledAngle { u, z })
    }

    /// From `theta(k/m)` for `k = 0..=m`; the last value must be the first
    /// plus 2 pi.
    pub fn from_samples(theta: &[f64]) -> Result<Self> {
        if theta.len() < 5 {
            return Err(Error::Argument(format!("need at least 5 samples, got {}", theta.len())));
        }
        let m = theta.len() - 1;
        let turn = theta[m] - theta[0];
        if (turn - TAU).abs() > 1e-9 {
            return Err(Error::Structure(format!("samples turn by {turn}, expected 2 pi")));
        }
        let u = (0..m).map(|k| theta[k] - TAU * k as f64 / m as f64).collect();
        Self::from_periodic(u)
    }

    pub fn sample(f: &dyn AngleFunction, m: usize) -> Result<Self> {
        let values: Vec<f64> = (0..=m).map(|k| f.theta(k as f64 / m as f64)).collect();
        Self::from_samples(&values)
    }

    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn periodic_part(&self) -> &[f64] {
        &self.u
    }

    /// `theta(k/m)` for `k = 0..=m`.
    pub fn samples(&self) -> Vec<f64> {
        let m = self.m();
        (0..=m).map(|k| self.u[k % m] + TAU * k as f64 / m as f64).collect()
    }

    /// Copy with `theta(0) = 0`.
    pub fn normalized(&self) -> SampledAngle {
        let shift = self.u[0];
        let u: Vec<f64> = self.u.iter().map(|v| v - shift).collect();
        SampledAngle { z: self.z.clone(), u }
    }

    pub fn shifted(&self, offset: f64) -> SampledAngle {
        SampledAngle { u: self.u.iter().map(|v| v + offset).collect(), z: self.z.clone() }
    }

    /// `max_k |theta_{k+1} - 2 theta_k + theta_{k-1}| m^2`, cyclically.
    pub fn max_second_difference(&self) -> f64 {
        let m = self.m();
        let scale = (m * m) as f64;
        (0..m)
            .map(|k| (self.u[(k + 1) % m] - 2.0 * self.u[k] + self.u[(k + m - 1) % m]).abs() * scale)
            .fold(0.0, f64::max)
    }

    /// Rows `s,theta` at the sample points, header included.
    pub fn to_csv(&self) -> String {
        let m = self.m();
        let mut out = String::from("s,theta\n");
        for (k, t) in self.samples().iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", k as f64 / m as f64, t));
        }
        out
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let m = self.m();
        let t = s.rem_euclid(1.0) * m as f64;
        let k = (t.floor() as usize).min(m - 1);
        (k, t - k as f64)
    }
}

impl AngleFunction for SampledAngle {
    fn theta(&self, s: f64) -> f64 {
        let m = self.m();
        let h = 1.0 / m as f64;
        let (k, x) = self.locate(s);
        let (u0, u1) = (self.u[k], self.u[(k + 1) % m]);
        let (z0, z1) = (self.z[k], self.z[(k + 1) % m]);
        let y = 1.0 - x;
        let periodic = y * u0 + x * u1 + h * h / 6.0 * ((y * y * y - y) * z0 + (x * x * x - x) * z1);
        periodic + TAU * s
    }

    fn theta_prime(&self, s: f64) -> f64 {
        let m = self.m();
        let h = 1.0 / m as f64;
        let (k, x) = self.locate(s);
        let (u0, u1) = (self.u[k], self.u[(k + 1) % m]);
        let (z0, z1) = (self.z[k], self.z[(k + 1) % m]);
        let y = 1.0 - x;
        (u1 - u0) / h + h / 6.0 * (-(3.0 * y * y - 1.0) * z0 + (3.0 * x * x - 1.0) * z1) + TAU
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }

    fn panels(&self) -> usize {
        self.m()
    }
}

/// Second derivatives of the periodic cubic spline through `u` on a unit
/// period: solves the cyclic system `z_{k-1} + 4 z_k + z_{k+1} = r_k`.
fn spline_moments(u: &[f64]) -> Vec<f64> {
    let m = u.len();
    let h2 = 1.0 / (m * m) as f64;
    let rhs: Vec<f64> = (0..m)
        .map(|k| 6.0 / h2 * (u[(k + 1) % m] - 2.0 * u[k] + u[(k + m - 1) % m]))
        .collect();
    // Sherman-Morrison on the tridiagonal part
    let gamma = -4.0;
    let mut diag = vec![4.0; m];
    diag[0] -= gamma;
    diag[m - 1] -= 1.0 / gamma;
    let x = solve_tridiagonal(&diag, &rhs);
    let mut corr = vec![0.0; m];
    corr[0] = gamma;
    corr[m - 1] = 1.0;
    let y = solve_tridiagonal(&diag, &corr);
    let fact = (x[0] + x[m - 1] / gamma) / (1.0 + y[0] + y[m - 1] / gamma);
    x.iter().zip(&y).map(|(a, b)| a - fact * b).collect()
}

/// Thomas algorithm with unit off-diagonals.
fn solve_tridiagonal(diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = 1.0 / diag[0];
    d[0] = rhs[0] / diag[0];
    for k in 1..m {
        let denom = diag[k] - c[k - 1];
        c[k] = 1.0 / denom;
        d[k] = (rhs[k] - d[k - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for k in (0..m - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

/// Piecewise-linear angle function through `(s_k, theta_k)`, `s` from 0 to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Tabulated {
    s: Vec<f64>,
    theta: Vec<f64>,
}

impl Tabulated {
    pub fn new(s: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if s.len() != theta.len() || s.len() < 2 {
            return Err(Error::Argument("need at least two (s, theta) pairs of equal length".into()));
        }
        if s[0].abs() > 1e-12 || (s[s.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Argument("s must run from 0 to 1".into()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("s must be strictly increasing".into()));
        }
        Ok(Tabulated { s, theta })
    }

    /// Parses `s,theta` rows with a header line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut s = Vec::new();
        let mut theta = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("{e}")))
            };
            s.push(parse(0)?);
            theta.push(parse(1)?);
        }
        Self::new(s, theta)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.s, &self.theta)
    }

    fn segment(&self, s: f64) -> usize {
        let idx = self.s.partition_point(|&x| x <= s);
        idx.clamp(1, self.s.len() - 1) - 1
    }
}

impl AngleFunction for Tabulated {
    fn theta(&self, s: f64) -> f64 {
        let k = self.segment(s);
        let (a, b) = (self.s[k], self.s[k + 1]);
        let x = (s - a) / (b - a);
        (1.0 - x) * self.theta[k] + x * self.theta[k + 1]
    }
    fn theta_prime(&self, s: f64) -> f64 {
        let k = self.segment(s);
        (self.theta[k + 1] - self.theta[k]) / (self.s[k + 1] - self.s[k])
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::H1
    }
}

/// Periodic convolution of `u` with the bump kernel of half-width `width`
/// (in units of the period), direct summation with normalized weights.
pub fn mollify(u: &[f64], width: f64) -> Vec<f64> {
    let m = u.len();
    let r = width * m as f64;
    let reach = r.ceil() as usize;
    if r < 1.0 {
        return u.to_vec();
    }
    let weights: Vec<f64> = (0..reach).map(|j| bump(j as f64 / r)).collect();
    let total = weights[0] + 2.0 * weights[1..].iter().sum::<f64>();
    (0..m)
        .map(|k| {
            let mut acc = weights[0] * u[k];
            for (j, w) in weights.iter().enumerate().skip(1) {
                acc += w * (u[(k + j) % m] + u[(k + m * (j / m + 1) - j) % m]);
            }
            acc / total
        })
        .collect()
}

/// Full H1 distance `(int (a-b)^2 + int (a'-b')^2)^(1/2)`.
pub fn h1_distance(a: &dyn AngleFunction, b: &dyn AngleFunction, panels: usize) -> f64 {
    quadrature::integrate(
        |s| (a.theta(s) - b.theta(s)).powi(2) + (a.theta_prime(s) - b.theta_prime(s)).powi(2),
        0.0,
        1.0,
        panels,
    )
    .sqrt()
}

/// The four perturbations of a normalized angle function used by the
/// closure map: `theta_1`/`theta_3` push toward pi/2 and pi on the first
/// interval where pi/2 < theta < pi, `theta_2`/`theta_4` toward pi and
/// 3pi/2 on the first interval where pi < theta < 3pi/2.
#[derive(Clone, Debug)]
pub struct Variants {
    pub base: SampledAngle,
    pub intervals: [(f64, f64); 2],
    pub amplitude: f64,
    pub thetas: [SampledAngle; 4],
}

/// First maximal run of sample indices with `lo < theta < hi`.
fn first_run(samples: &[f64], lo: f64, hi: f64) -> Option<(usize, usize)> {
    let start = samples.iter().position(|&t| t > lo && t < hi)?;
    let len = samples[start..].iter().take_while(|&&t| t > lo && t < hi).count();
    Some((start, start + len - 1))
}

pub fn build_variants(theta: &SampledAngle, amplitude: f64) -> Result<Variants> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::Argument(format!("amplitude must lie in [0, 1), got {amplitude}")));
    }
    let base = theta.normalized();
    let samples = base.samples();
    let m = base.m();
    let find = |lo: f64, hi: f64| -> Result<(usize, usize)> {
        match first_run(&samples, lo, hi) {
            Some((a, b)) if b >= a + 4 => Ok((a, b)),
            _ => Err(Error::Structure(format!("no interval with {lo:.4} < theta < {hi:.4}"))),
        }
    };
    let (a1, b1) = find(FRAC_PI_2, PI)?;
    let (a2, b2) = find(PI, 1.5 * PI)?;
    let s_of = |k: usize| k as f64 / m as f64;
    let intervals = [(s_of(a1), s_of(b1)), (s_of(a2), s_of(b2))];
    let profile = |k: usize, (a, b): (f64, f64)| {
        let s = s_of(k);
        bump((2.0 * s - a - b) / (b - a))
    };
    let make = |target: f64, interval: (f64, f64)| -> Result<SampledAngle> {
        let values: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(k, &t)| t + amplitude * profile(k, interval) * (target - t))
            .collect();
        SampledAngle::from_samples(&values)
    };
    let thetas = [
        make(FRAC_PI_2, intervals[0])?,
        make(PI, intervals[1])?,
        make(PI, intervals[0])?,
        make(1.5 * PI, intervals[1])?,
    ];
    Ok(Variants { base, intervals, amplitude, thetas })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosureMapEvaluation {
    pub delta1: f64,
    pub delta2: f64,
    pub h: (f64, f64),
}

/// Closure integrals of the blend
/// `d1 (d2 t1 + (1-d2) t4) + (1-d1) (d2 t2 + (1-d2) t3)`, evaluated from
/// tables of the four functions at the Gauss nodes of their sample cells.
#[derive(Clone, Debug)]
pub struct ClosureMap {
    tables: [Vec<f64>; 4],
    weights: Vec<f64>,
}

impl ClosureMap {
    pub fn new(thetas: &[SampledAngle; 4]) -> Result<Self> {
        let m = thetas[0].m();
        if thetas.iter().any(|t| t.m() != m) {
            return Err(Error::Argument("variants must share the sample grid".into()));
        }
        let width = 1.0 / m as f64;
        let mut nodes = Vec::with_capacity(5 * m);
        let mut weights = Vec::with_capacity(5 * m);
        for k in 0..m {
            let lo = width * k as f64;
            for (x, w) in quadrature::panel_nodes(lo, lo + width) {
                nodes.push(x);
                weights.push(w);
            }
        }
        let table = |t: &SampledAngle| nodes.iter().map(|&x| t.theta(x)).collect::<Vec<f64>>();
        Ok(ClosureMap {
            tables: [table(&thetas[0]), table(&thetas[1]), table(&thetas[2]), table(&thetas[3])],
            weights,
        })
    }

    fn coefficients(d1: f64, d2: f64) -> [f64; 4] {
        [d1 * d2, (1.0 - d1) * d2, (1.0 - d1) * (1.0 - d2), d1 * (1.0 - d2)]
    }

    pub fn evaluate(&self, delta1: f64, delta2: f64) -> ClosureMapEvaluation {
        let c = Self::coefficients(delta1, delta2);
        let mut h = (0.0, 0.0);
        for (i, w) in self.weights.iter().enumerate() {
            let t = c[0] * self.tables[0][i]
                + c[1] * self.tables[1][i]
                + c[2] * self.tables[2][i]
                + c[3] * self.tables[3][i];
            let (s, co) = t.sin_cos();
            h.0 += w * co;
            h.1 += w * s;
        }
        ClosureMapEvaluation { delta1, delta2, h }
    }

    /// `H1(0,.) < 0 < H1(1,.)` and `H2(.,0) < 0 < H2(.,1)`, checked at five
    /// points per edge.
    pub fn check_sign_structure(&self) -> Result<()> {
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let checks = [
                (-self.evaluate(0.0, t).h.0, "H1(0, d2) < 0"),
                (self.evaluate(1.0, t).h.0, "H1(1, d2) > 0"),
                (-self.evaluate(t, 0.0).h.1, "H2(d1, 0) < 0"),
                (self.evaluate(t, 1.0).h.1, "H2(d1, 1) > 0"),
            ];
            for (v, what) in checks {
                if !(v > SIGN_MARGIN) {
                    return Err(Error::VariantConstruction(format!("{what} fails at {t}")));
                }
            }
        }
        Ok(())
    }

    /// Nested bisection: inner on `delta1` for `H1 = 0` at fixed `delta2`,
    /// outer on `delta2` for `H2 = 0` along that curve.
    pub fn solve(&self) -> ClosureMapEvaluation {
        let inner = |d2: f64| -> ClosureMapEvaluation {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = self.evaluate(0.5, d2);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let e = self.evaluate(mid, d2);
                best = e;
                if e.h.0.abs() <= MAP_TOL || hi - lo <= f64::EPSILON {
                    break;
                }
                if e.h.0 < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = inner(0.5);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let e = inner(mid);
            best = e;
            if e.h.1.abs() <= MAP_TOL || hi - lo <= f64::EPSILON {
                break;
            }
            if e.h.1 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best
    }

    /// Periodic parts of the blend at `(delta1, delta2)`.
    pub fn blend(thetas: &[SampledAngle; 4], delta1: f64, delta2: f64) -> Result<SampledAngle> {
        let c = Self::coefficients(delta1, delta2);
        let m = thetas[0].m();
        let u = (0..m)
            .map(|k| (0..4).map(|i| c[i] * thetas[i].u[k]).sum())
            .collect();
        SampledAngle::from_periodic(u)
    }
}

pub fn closure_map(thetas: &[SampledAngle; 4], delta1: f64, delta2: f64) -> Result<ClosureMapEvaluation> {
    if !(0.0..=1.0).contains(&delta1) || !(0.0..=1.0).contains(&delta2) {
        return Err(Error::Argument(format!("deltas must lie in [0, 1], got ({delta1}, {delta2})")));
    }
    Ok(ClosureMap::new(thetas)?.evaluate(delta1, delta2))
}

#[derive(Clone, Debug)]
pub struct SmoothingResult {
    pub curve: ClosedCurve,
    pub angle: Arc<SampledAngle>,
    pub width: f64,
    pub amplitude: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub h1_distance: f64,
}

/// C2 closed approximation of a closed angle function within H1 distance
/// `delta`, at the default sample resolution.
pub fn smooth_constrained(theta: &dyn AngleFunction, delta: f64) -> Result<SmoothingResult> {
    smooth_constrained_with(theta, delta, DEFAULT_SAMPLES)
}

pub fn smooth_constrained_with(theta: &dyn AngleFunction, delta: f64, samples: usize) -> Result<SmoothingResult> {
    if !(delta > 0.0) {
        return Err(Error::Argument(format!("H1 budget must be positive, got {delta}")));
    }
    check_closed(theta)?;
    let sampled = SampledAngle::sample(theta, samples)?;
    let offset = sampled.u[0];
    let base = sampled.normalized();

    // bump size per unit amplitude, to start just inside the budget
    let unit = build_variants(&base, 0.5)?;
    let spread = unit
        .thetas
        .iter()
        .map(|t| h1_distance(t, &unit.base, samples))
        .fold(0.0, f64::max)
        / 0.5;
    let start_amplitude = (0.25 * delta / spread).min(0.5);

    let m = samples as f64;
    let mut width = MAX_WIDTH;
    let mut best = f64::INFINITY;
    let mut last_err = None;
    while width * m >= MIN_WIDTH_SAMPLES {
        let mut amplitude = start_amplitude;
        loop {
            let variants = build_variants(&base, amplitude)?;
            let smoothed: Vec<SampledAngle> = variants
                .thetas
                .iter()
                .map(|t| SampledAngle::from_periodic(mollify(&t.u, width)))
                .collect::<Result<_>>()?;
            let smoothed: [SampledAngle; 4] = smoothed.try_into().expect("four variants");
            let map = ClosureMap::new(&smoothed)?;
            match map.check_sign_structure() {
                Err(e) => {
                    last_err = Some(e);
                    amplitude *= 1.5;
                    if amplitude >= 1.0 {
                        break;
                    }
                    continue;
                }
                Ok(()) => {}
            }
            let root = map.solve();
            let out = ClosureMap::blend(&smoothed, root.delta1, root.delta2)?.shifted(offset);
            let dist = h1_distance(&out, theta, samples);
            best = best.min(dist);
            if dist < delta {
                let angle = Arc::new(out);
                let curve = ClosedCurve::new(angle.clone() as Arc<dyn AngleFunction>)?;
                return Ok(SmoothingResult {
                    curve,
                    angle,
                    width,
                    amplitude,
                    delta1: root.delta1,
                    delta2: root.delta2,
                    h1_distance: dist,
                });
            }
            break;
        }
        width *= 0.5;
    }
    if best.is_finite() {
        Err(Error::Budget { achieved: best, delta })
    } else {
        Err(last_err.unwrap_or(Error::VariantConstruction("no admissible amplitude".into())))
    }
}

/// `base + d1 b(s; c1) + d2 b(s; c2)` with periodic bumps of half-width `w`.
#[derive(Clone)]
pub struct BumpCorrected {
    pub base: Arc<dyn AngleFunction>,
    pub centers: [f64; 2],
    pub half_width: f64,
    pub deltas: [f64; 2],
}

impl std::fmt::Debug for BumpCorrected {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BumpCorrected")
            .field("centers", &self.centers)
            .field("half_width", &self.half_width)
            .field("deltas", &self.deltas)
            .finish()
    }
}

fn periodic_offset(s: f64, center: f64) -> f64 {
    let d = s - center;
    d - d.round()
}

impl BumpCorrected {
    fn profile(&self, i: usize, s: f64) -> f64 {
        bump(periodic_offset(s, self.centers[i]) / self.half_width)
    }
    fn profile_prime(&self, i: usize, s: f64) -> f64 {
        bump_prime(periodic_offset(s, self.centers[i]) / self.half_width) / self.half_width
    }
}

impl AngleFunction for BumpCorrected {
    fn theta(&self, s: f64) -> f64 {
        self.base.theta(s) + self.deltas[0] * self.profile(0, s) + self.deltas[1] * self.profile(1, s)
    }
    fn theta_prime(&self, s: f64) -> f64 {
        self.base.theta_prime(s)
            + self.deltas[0] * self.profile_prime(0, s)
            + self.deltas[1] * self.profile_prime(1, s)
    }
    fn smoothness(&self) -> Smoothness {
        self.base.smoothness()
    }
    fn panels(&self) -> usize {
        self.base.panels()
    }
}

pub const PROJECTION_HALF_WIDTH: f64 = 0.125;
const PROJECTION_TOL: f64 = 1e-13;

/// Closes a winding-1 angle function by adding two bumps centred at
/// multiples of 1/8, choosing the pair with the best-conditioned Jacobian
/// and solving for their heights by damped Newton.
pub fn project_to_closed(theta: Arc<dyn AngleFunction>) -> Result<ClosedCurve> {
    Ok(ClosedCurve::new(Arc::new(project_bumps(theta)?))?)
}

pub fn project_bumps(theta: Arc<dyn AngleFunction>) -> Result<BumpCorrected> {
    let turn = theta.theta(1.0) - theta.theta(0.0);
    if (turn - TAU).abs() > 1e-10 {
        return Err(Error::Structure(format!("winding turn {turn}, expected 2 pi")));
    }
    let panels = theta.panels();
    let candidates: Vec<f64> = (0..8).map(|k| k as f64 / 8.0).collect();
    // d G / d delta_j at delta = 0
    let columns: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&c| {
            quadrature::integrate_pair(
                |s| {
                    let b = bump(periodic_offset(s, c) / PROJECTION_HALF_WIDTH);
                    let t = theta.theta(s);
                    (-b * t.sin(), b * t.cos())
                },
                0.0,
                1.0,
                panels,
            )
        })
        .collect();
    let mut pair = (0, 1);
    let mut best = -1.0;
    for i in 0..8 {
        for j in i + 1..8 {
            let det = (columns[i].0 * columns[j].1 - columns[j].0 * columns[i].1).abs();
            if det > best + 1e-15 {
                best = det;
                pair = (i, j);
            }
        }
    }
    let mut curve = BumpCorrected {
        base: theta,
        centers: [candidates[pair.0], candidates[pair.1]],
        half_width: PROJECTION_HALF_WIDTH,
        deltas: [0.0, 0.0],
    };
    let residual = |c: &BumpCorrected| {
        let (a, b) = closure_integrals(c);
        (a, b, a.hypot(b))
    };
    let (mut rc, mut rs, mut norm) = residual(&curve);
    for _ in 0..60 {
        if norm <= PROJECTION_TOL {
            break;
        }
        let jac = quadrature::integrate_pair(
            |s| {
                let t = curve.theta(s);
                let (st, ct) = t.sin_cos();
                let b0 = curve.profile(0, s);
                (-b0 * st, b0 * ct)
            },
            0.0,
            1.0,
            panels,
        );
        let jac2 = quadrature::integrate_pair(
            |s| {
                let t = curve.theta(s);
                let (st, ct) = t.sin_cos();
                let b1 = curve.profile(1, s);
                (-b1 * st, b1 * ct)
            },
            0.0,
            1.0,
            panels,
        );
        let (a11, a21, a12, a22) = (jac.0, jac.1, jac2.0, jac2.1);
        let det = a11 * a22 - a12 * a21;
        if det.abs() < 1e-14 {
            return Err(Error::Projection { residual: norm });
        }
        let step = [(a22 * rc - a12 * rs) / det, (-a21 * rc + a11 * rs) / det];
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = BumpCorrected {
                deltas: [curve.deltas[0] - scale * step[0], curve.deltas[1] - scale * step[1]],
                ..curve.clone()
            };
            let (tc, ts, tn) = residual(&trial);
            if tn < norm {
                curve = trial;
                rc = tc;
                rs = ts;
                norm = tn;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm > crate::geometry::CURVE_CLOSURE_TOL {
        return Err(Error::Projection { residual: norm });
    }
    Ok(curve)
}
