//! Recovery sequences: inflate a smooth closed curve, inscribe an
//! equilateral chain, lift it to the piecewise-affine interpolant and
//! measure how fast energy and derivatives converge.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rayon::prelude::*;

use crate::energy::{elastica_energy, f_eps};
use crate::error::{Error, Result};
use crate::geometry::{angles_from_chain, AngleFunction, AngleVector, Chain, ClosedCurve, Point, Smoothness};
use crate::interpolant::{affine_interpolant, PiecewiseAffineAngle};
use crate::potential::PotentialSpec;
use crate::quadrature;
use crate::rates::observed_order;
use crate::roots::safeguarded_newton;

/// Tolerance on `|F(sigma) - eps|` for each chord.
pub const CHORD_TOL: f64 = 1e-14;
/// Target `|overshoot|` of the outer bisection on `h`.
pub const OVERSHOOT_TOL: f64 = 1e-13;
pub const MAX_BISECTIONS: usize = 200;
const SINGULAR_SAMPLES: usize = 4096;

/// `r_h(s) = r(s) + h (sin theta, -cos theta)`.
#[derive(Clone, Copy, Debug)]
pub struct InflatedCurve<'a> {
    curve: &'a ClosedCurve,
    h: f64,
}

impl<'a> InflatedCurve<'a> {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn curve(&self) -> &'a ClosedCurve {
        self.curve
    }

    pub fn position(&self, s: f64) -> Point {
        let t = self.curve.theta(s);
        self.curve.position(s) + self.h * Point::new(t.sin(), -t.cos())
    }

    /// `r_h'(s) = (1 + h theta') (cos theta, sin theta)`.
    pub fn derivative(&self, s: f64) -> Point {
        let t = self.curve.theta(s);
        (1.0 + self.h * self.curve.theta_prime(s)) * Point::unit(t)
    }

    pub fn length(&self) -> f64 {
        quadrature::integrate(
            |s| (1.0 + self.h * self.curve.theta_prime(s)).abs(),
            0.0,
            1.0,
            self.curve.panels(),
        )
    }
}

/// Offset curve at distance `h` along the outward normal.
pub fn inflate(c: &ClosedCurve, h: f64) -> Result<InflatedCurve<'_>> {
    if c.smoothness() != Smoothness::C2 {
        return Err(Error::Structure("inflation needs a C2 angle function".into()));
    }
    if !(h >= 0.0) {
        return Err(Error::Argument(format!("inflation offset must be nonnegative, got {h}")));
    }
    for k in 0..SINGULAR_SAMPLES {
        let s = k as f64 / SINGULAR_SAMPLES as f64;
        if 1.0 + h * c.theta_prime(s) <= 0.0 {
            return Err(Error::InflationSingular { s, h });
        }
    }
    Ok(InflatedCurve { curve: c, h })
}

/// Largest offset below which the inflation stays regular, on the same grid
/// as the singularity check.
fn max_regular_offset(c: &ClosedCurve) -> f64 {
    let mut most_negative = 0.0f64;
    for k in 0..SINGULAR_SAMPLES {
        let s = k as f64 / SINGULAR_SAMPLES as f64;
        most_negative = most_negative.min(c.theta_prime(s));
    }
    if most_negative < 0.0 {
        -1.0 / most_negative
    } else {
        f64::INFINITY
    }
}

/// Marches `N = 1/eps` chords of length `eps` along the inflated curve from
/// `s = 0`. Returns the parameters `s_1 = 0 < ... < s_N` and the overshoot
/// `s_{N+1} - 1`.
pub fn march_chords(c: &ClosedCurve, h: f64, eps: f64) -> Result<(Vec<f64>, f64)> {
    let n = chain_size(eps)?;
    let r = inflate(c, h)?;
    march(&r, n, eps)
}

fn chain_size(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0 / 3.0) {
        return Err(Error::Argument(format!("eps must be 1/N with N >= 3, got {eps}")));
    }
    let n = (1.0 / eps).round() as usize;
    if (n as f64 * eps - 1.0).abs() > 8.0 * f64::EPSILON {
        return Err(Error::Argument(format!("eps = {eps} is not the reciprocal of an integer")));
    }
    Ok(n)
}

fn march(r: &InflatedCurve<'_>, n: usize, eps: f64) -> Result<(Vec<f64>, f64)> {
    let mut params = Vec::with_capacity(n);
    let mut s = 0.0;
    for i in 0..n {
        params.push(s);
        s = next_chord(r, s, eps).ok_or(Error::Marching { index: i + 1, start: s })?;
    }
    Ok((params, s - 1.0))
}

/// Smallest `sigma > start` with `|r_h(sigma) - r_h(start)| = eps`.
fn next_chord(r: &InflatedCurve<'_>, start: f64, eps: f64) -> Option<f64> {
    let p0 = r.position(start);
    let g = |sigma: f64| r.position(sigma).distance(p0) - eps;
    let step = 0.5 * eps;
    let mut lo = start;
    let mut bracket = None;
    for k in 1..=8 {
        let hi = start + step * k as f64;
        if g(hi) >= 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        lo = hi;
    }
    let (lo, hi) = bracket?;
    let speed = 1.0 + r.h * r.curve.theta_prime(start);
    let guess = start + eps / speed;
    let f = |sigma: f64| {
        let d = r.position(sigma) - p0;
        let dist = d.norm();
        let slope = if dist > 0.0 { d.dot(r.derivative(sigma)) / dist } else { 0.0 };
        (dist - eps, slope)
    };
    safeguarded_newton(f, lo, hi, guess, CHORD_TOL, 100).ok()
}

#[derive(Clone, Debug)]
pub struct InscriptionResult {
    pub h: f64,
    pub params: Vec<f64>,
    pub chain: Chain,
    /// Final overshoot `s_{N+1} - 1`.
    pub defect: f64,
}

/// Inscribes an equilateral chain with links of length `eps` in an inflated
/// copy of `c`, the offset chosen by bisection so that the chain closes.
pub fn inscribe(c: &ClosedCurve, eps: f64) -> Result<InscriptionResult> {
    let n = chain_size(eps)?;
    let mut lo = 0.0;
    let mut hi = eps.min(0.99 * max_regular_offset(c));
    let overshoot = |h: f64| -> Result<(Vec<f64>, f64)> { march(&inflate(c, h)?, n, eps) };
    let (mut params_lo, mut ov_lo) = overshoot(lo)?;
    let (mut params_hi, mut ov_hi) = overshoot(hi)?;
    if ov_lo.abs() <= OVERSHOOT_TOL {
        return finish(c, 0.0, params_lo, ov_lo, eps);
    }
    if ov_lo.signum() == ov_hi.signum() {
        return Err(Error::InscriptionBracket { lo: ov_lo, hi: ov_hi });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (params, ov) = overshoot(mid)?;
        let slack = 1e-14;
        if ov > ov_lo.max(ov_hi) + slack || ov < ov_lo.min(ov_hi) - slack {
            return Err(Error::NonMonotoneDefect { h: mid });
        }
        if ov.abs() <= OVERSHOOT_TOL {
            return finish(c, mid, params, ov, eps);
        }
        if ov.signum() == ov_lo.signum() {
            lo = mid;
            ov_lo = ov;
            params_lo = params;
        } else {
            hi = mid;
            ov_hi = ov;
            params_hi = params;
        }
    }
    if ov_lo.abs() <= ov_hi.abs() {
        finish(c, lo, params_lo, ov_lo, eps)
    } else {
        finish(c, hi, params_hi, ov_hi, eps)
    }
}

fn finish(c: &ClosedCurve, h: f64, params: Vec<f64>, defect: f64, eps: f64) -> Result<InscriptionResult> {
    let r = inflate(c, h)?;
    let points: Vec<Point> = params.iter().map(|&s| r.position(s)).collect();
    let chain = Chain::new(eps, points)?;
    Ok(InscriptionResult { h, params, chain, defect })
}

/// Interpolant of the inscribed chain's angles, aligned with `c`.
pub fn recovery_interpolant(c: &ClosedCurve, eps: f64) -> Result<PiecewiseAffineAngle> {
    Ok(recover(c, eps)?.interpolant)
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub inscription: InscriptionResult,
    pub angles: AngleVector,
    pub interpolant: PiecewiseAffineAngle,
}

pub fn recover(c: &ClosedCurve, eps: f64) -> Result<Recovery> {
    let inscription = inscribe(c, eps)?;
    let angles = align_angles(&angles_from_chain(&inscription.chain)?, c);
    let interpolant = affine_interpolant(&angles, eps)?;
    Ok(Recovery { inscription, angles, interpolant })
}

/// Index rotation and `2 pi k` shift of `a` minimizing the squared mismatch
/// with `c` at the cell midpoints `(i - 1/2)/N`.
pub fn align_angles(a: &AngleVector, c: &ClosedCurve) -> AngleVector {
    let n = a.n();
    let eps = a.eps();
    let target: Vec<f64> = (0..n).map(|i| c.theta((i as f64 + 0.5) * eps)).collect();
    let mut best: Option<(f64, AngleVector)> = None;
    for start in 0..n {
        let rot = a.rotated(start);
        let mean = rot.thetas.iter().zip(&target).map(|(x, y)| y - x).sum::<f64>() / n as f64;
        let shift = TAU * (mean / TAU).round();
        let cost: f64 = rot
            .thetas
            .iter()
            .zip(&target)
            .map(|(x, y)| (x + shift - y).powi(2))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            let shifted = AngleVector::new(rot.thetas.iter().map(|x| x + shift).collect());
            best = Some((cost, shifted));
        }
    }
    best.map(|(_, a)| a).unwrap_or_else(|| a.clone())
}

/// `int_0^1 |pfa' - theta'|^2`, four Gauss panels per affine segment.
pub fn h1_seminorm_error(pfa: &PiecewiseAffineAngle, c: &ClosedCurve) -> f64 {
    let knots = pfa.breakpoints();
    let mut total = 0.0;
    for (w, k) in knots.windows(2).zip(pfa.slopes()) {
        total += quadrature::integrate(|s| (k - c.theta_prime(s)).powi(2), w[0], w[1], 4);
    }
    total
}

/// `|F_eps(pfa) - E_0(c)|`.
pub fn energy_gap(pfa: &PiecewiseAffineAngle, c: &ClosedCurve, p: &PotentialSpec) -> f64 {
    (f_eps(pfa, p).to_f64() - elastica_energy(c, p).to_f64()).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub eps: f64,
    pub n: usize,
    pub h: f64,
    pub f_eps: f64,
    pub e0: f64,
    pub energy_gap: f64,
    pub h1_sq_error: f64,
    pub closure_cos: f64,
    pub closure_sin: f64,
    /// `int theta'^2` of the recovered interpolant.
    pub dirichlet: f64,
    /// Closure integrals of the recovered interpolant.
    pub integral_residual: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRecord>,
    pub energy_gap_order: Option<f64>,
    pub h1_order: Option<f64>,
    pub max_h_over_eps2: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "epsilon", "n", "h", "f_eps", "e0", "energy_gap", "h1_sq_error", "closure_cos", "closure_sin",
];

/// One recovery per `eps`, evaluated in parallel; rows keep the input order.
pub fn convergence_study(c: &ClosedCurve, eps_list: &[f64], p: &PotentialSpec) -> Result<ConvergenceStudy> {
    if eps_list.is_empty() {
        return Err(Error::Argument("empty eps list".into()));
    }
    let e0 = elastica_energy(c, p).to_f64();
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let rec = recover(c, eps)?;
            let f = f_eps(&rec.interpolant, p).to_f64();
            let (cc, cs) = rec.angles.closure_residual();
            Ok(ConvergenceRecord {
                eps,
                n: rec.angles.n(),
                h: rec.inscription.h,
                f_eps: f,
                e0,
                energy_gap: (f - e0).abs(),
                h1_sq_error: h1_seminorm_error(&rec.interpolant, c),
                closure_cos: cc,
                closure_sin: cs,
                dirichlet: rec.interpolant.dirichlet(),
                integral_residual: rec.interpolant.closure_integral_residual(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.energy_gap).collect();
    let h1: Vec<f64> = rows.iter().map(|r| r.h1_sq_error).collect();
    let max_h_over_eps2 = rows.iter().map(|r| r.h / (r.eps * r.eps)).fold(0.0, f64::max);
    Ok(ConvergenceStudy {
        energy_gap_order: observed_order(&xs, &gaps),
        h1_order: observed_order(&xs, &h1),
        max_h_over_eps2,
        rows,
    })
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_order(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_else(|| "NA".into())
}

impl ConvergenceStudy {
    /// Data rows followed by `#order` summary lines.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                fmt_float(r.eps),
                r.n.to_string(),
                fmt_float(r.h),
                fmt_float(r.f_eps),
                fmt_float(r.e0),
                fmt_float(r.energy_gap),
                fmt_float(r.h1_sq_error),
                fmt_float(r.closure_cos),
                fmt_float(r.closure_sin),
            ])?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        writeln!(out, "#order,energy_gap,{}", fmt_order(self.energy_gap_order))?;
        writeln!(out, "#order,h1_sq_error,{}", fmt_order(self.h1_order))?;
        writeln!(out, "#order,max_h_over_eps2,{}", fmt_float(self.max_h_over_eps2))?;
        Ok(())
    }
}

/// `h*` for the circle: circumradius of the regular `N`-gon minus `1/(2 pi)`.
pub fn circle_offset(eps: f64) -> f64 {
    eps / (2.0 * (PI * eps).sin()) - 1.0 / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Perturbed;
    use std::sync::Arc;

    fn perturbed() -> ClosedCurve {
        ClosedCurve::new(Arc::new(Perturbed { amplitude: 0.2, mode: 2 })).unwrap()
    }

    #[test]
    fn inflated_circle_is_concentric() {
        let c = ClosedCurve::circle();
        let r = inflate(&c, 0.01).unwrap();
        let center = Point::new(0.0, 1.0 / TAU);
        for k in 0..16 {
            let s = k as f64 / 16.0;
            assert!((r.position(s).distance(center) - (1.0 / TAU + 0.01)).abs() < 1e-14);
        }
        let r0 = inflate(&c, 0.0).unwrap();
        assert_eq!(r0.position(0.3), c.position(0.3));
    }

    #[test]
    fn inflated_length() {
        for c in [ClosedCurve::circle(), perturbed()] {
            let r = inflate(&c, 1e-3).unwrap();
            assert!((r.length() - (1.0 + TAU * 1e-3)).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_inflation() {
        let c = ClosedCurve::new(Arc::new(Perturbed { amplitude: 0.9, mode: 3 })).unwrap();
        // theta' = 2 pi + 0.9 * 6 pi cos(6 pi s) reaches 2 pi - 5.4 pi < 0
        assert!(matches!(inflate(&c, 0.5), Err(Error::InflationSingular { .. })));
        assert!(inflate(&c, 1e-3).is_ok());
    }

    #[test]
    fn overshoot_signs_on_circle() {
        let c = ClosedCurve::circle();
        let eps = 0.125;
        let (params, ov) = march_chords(&c, 0.0, eps).unwrap();
        // each chord 2R asin(eps / 2R) of arc
        let rad = 1.0 / TAU;
        let arc = 2.0 * rad * (eps / (2.0 * rad)).asin();
        assert!(ov > 0.0);
        assert!((ov - (8.0 * arc - 1.0)).abs() < 1e-13);
        assert_eq!(params.len(), 8);
        assert_eq!(params[0], 0.0);

        let (params, ov) = march_chords(&c, circle_offset(eps), eps).unwrap();
        assert!(ov.abs() < 1e-12);
        for (i, s) in params.iter().enumerate() {
            assert!((s - i as f64 * eps).abs() < 1e-12);
        }
        let (_, ov) = march_chords(&c, 0.05, eps).unwrap();
        assert!(ov < 0.0);
    }

    #[test]
    fn marching_error_on_wiggly_curve() {
        // the circle's diameter 1/pi is shorter than the requested chord
        let c = ClosedCurve::circle();
        let r = inflate(&c, 0.0).unwrap();
        assert!(next_chord(&r, 0.0, 0.5).is_none());
    }

    #[test]
    fn octagon_on_circle() {
        let c = ClosedCurve::circle();
        let res = inscribe(&c, 0.125).unwrap();
        assert!((res.h - 0.0041655).abs() < 1e-7);
        assert!((res.h - circle_offset(0.125)).abs() < 1e-12);
        let radius = 0.125 / (2.0 * (PI / 8.0).sin());
        assert!((radius - 0.16332).abs() < 1e-5);
        let center = Point::new(0.0, 1.0 / TAU);
        for (i, p) in res.chain.points().iter().enumerate() {
            let t = TAU * i as f64 / 8.0;
            let want = center + radius * Point::new(t.sin(), -t.cos());
            assert!(p.distance(want) < 1e-8);
        }
    }

    #[test]
    fn small_eps_offset_on_circle() {
        let c = ClosedCurve::circle();
        let eps = 1.0 / 64.0;
        let res = inscribe(&c, eps).unwrap();
        assert!(res.h <= eps * eps);
        assert!((res.h - circle_offset(eps)).abs() < 1e-12);
        let series = PI * eps * eps / 12.0;
        assert!((res.h - series).abs() / series < 1e-3);
    }

    #[test]
    fn chord_lengths_and_bounds() {
        let c = perturbed();
        let eps = 1.0 / 32.0;
        let res = inscribe(&c, eps).unwrap();
        assert!(res.h >= 0.0 && res.h <= eps);
        assert!(res.defect.abs() <= OVERSHOOT_TOL);
        let pts = res.chain.points();
        for i in 0..pts.len() {
            let d = pts[(i + 1) % pts.len()].distance(pts[i]);
            assert!((d - eps).abs() <= 1e-10);
        }
        for w in res.params.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn circle_recovery_interpolant() {
        let c = ClosedCurve::circle();
        let pfa = recovery_interpolant(&c, 0.125).unwrap();
        assert!(pfa.is_member());
        for k in pfa.slopes() {
            assert!((k - TAU).abs() < 1e-9);
        }
        assert!(h1_seminorm_error(&pfa, &c) < 1e-16 * 8.0 * 1e4);
        let pfa = recovery_interpolant(&c, 1.0 / 64.0).unwrap();
        let want = 4096.0 * (PI / 64.0).tan().powi(2);
        let f = f_eps(&pfa, &PotentialSpec::canonical()).to_f64();
        assert!((f - want).abs() < 1e-8 * want);
    }

    #[test]
    fn circle_energy_gap() {
        let c = ClosedCurve::circle();
        let p = PotentialSpec::canonical();
        let pfa = recovery_interpolant(&c, 0.01).unwrap();
        let gap = energy_gap(&pfa, &c, &p);
        let exact = 1e4 * (0.01 * PI).tan().powi(2) - PI * PI;
        assert!((gap - exact).abs() < 1e-9, "{gap}");
        // leading series term (2/3) pi^4 eps^2
        assert!((gap - 0.006494).abs() < 5e-6);
    }

    #[test]
    fn circle_study() {
        let c = ClosedCurve::circle();
        let eps: Vec<f64> = [8.0, 16.0, 32.0, 64.0].iter().map(|n| 1.0 / n).collect();
        let study = convergence_study(&c, &eps, &PotentialSpec::canonical()).unwrap();
        assert_eq!(study.rows.len(), 4);
        assert!((study.energy_gap_order.unwrap() - 2.0).abs() < 0.1);
        assert!(study.max_h_over_eps2 < 0.27);
        let last = study.rows.last().unwrap();
        assert!((last.h / (last.eps * last.eps) - PI / 12.0).abs() < 1e-3);

        let single = convergence_study(&c, &[0.125], &PotentialSpec::canonical()).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.energy_gap_order.is_none());
    }

    #[test]
    fn csv_output() {
        let c = ClosedCurve::circle();
        let study = convergence_study(&c, &[0.125, 0.0625], &PotentialSpec::canonical()).unwrap();
        let mut buf = Vec::new();
        study.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 6);
        assert!(lines[3].starts_with("#order,energy_gap,"));
        let f: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((f - 64.0 * (PI / 8.0).tan().powi(2)).abs() < 1e-9);
    }

    #[test]
    fn perturbed_orders() {
        let c = perturbed();
        let eps: Vec<f64> = [16.0, 32.0, 64.0, 128.0, 256.0].iter().map(|n| 1.0 / n).collect();
        let study = convergence_study(&c, &eps, &PotentialSpec::canonical()).unwrap();
        assert!(study.h1_order.unwrap() >= 1.9, "{:?}", study.h1_order);
        assert!(study.energy_gap_order.unwrap() >= 1.9, "{:?}", study.energy_gap_order);
    }

    #[test]
    fn chord_and_angle_consistency() {
        // frozen from the sweep below
        const C_CHORD: f64 = 1.0;
        const C_ANGLE: f64 = 2.0;
        let c = perturbed();
        let mut worst = (0.0f64, 0.0f64);
        for n in [16usize, 32, 64, 128] {
            let eps = 1.0 / n as f64;
            let rec = recover(&c, eps).unwrap();
            let params = &rec.inscription.params;
            let mut chord: f64 = 0.0;
            let mut angle: f64 = 0.0;
            for i in 0..n {
                let next = if i + 1 < n { params[i + 1] } else { 1.0 + rec.inscription.defect };
                chord = chord.max((next - params[i] - eps).abs());
                angle = angle.max((rec.angles.thetas[i] - c.theta(params[i] + 0.5 * eps)).abs());
            }
            worst.0 = worst.0.max(chord / eps.powi(3));
            worst.1 = worst.1.max(angle / eps.powi(2));
        }
        assert!(worst.0 <= C_CHORD);
        assert!(worst.1 <= C_ANGLE);
    }
}
