//! Piecewise-affine lift of an angle vector on the staggered partition
//! `{0, eps/2, 3eps/2, ..., 1 - eps/2, 1}`.
//!
//! Node `i` sits at the midpoint `(2i - 1) eps / 2` of link `i` and carries
//! `theta_i`. The two boundary half-segments share the slope of the
//! wrap-around increment, which makes `theta(1) = theta(0) + 2 pi`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{AngleFunction, AngleVector, Smoothness};

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineAngle {
    eps: f64,
    /// Values at the `N + 2` breakpoints.
    values: Vec<f64>,
    /// Slopes of the `N + 1` segments; the first and last are half-segments.
    slopes: Vec<f64>,
}

/// Relative tolerance on the endpoint relations of the admissible set.
pub const ENDPOINT_TOL: f64 = 1e-12;

/// Lifts an admissible angle vector to its piecewise-affine function.
pub fn affine_interpolant(a: &AngleVector, eps: f64) -> Result<PiecewiseAffineAngle> {
    let n = a.n();
    if n < 2 || (eps * n as f64 - 1.0).abs() > 8.0 * f64::EPSILON {
        return Err(Error::Argument(format!("eps = {eps} is not 1/{n}")));
    }
    a.check_admissible()?;
    let t = &a.thetas;
    let mean = 0.5 * (t[0] + t[n - 1]);
    let mut values = Vec::with_capacity(n + 2);
    values.push(mean - PI);
    values.extend_from_slice(t);
    values.push(mean + PI);

    let inc = a.increments();
    let boundary = inc[0] / eps;
    let mut slopes = Vec::with_capacity(n + 1);
    slopes.push(boundary);
    slopes.extend(inc[1..].iter().map(|d| d / eps));
    slopes.push(boundary);
    Ok(PiecewiseAffineAngle { eps, values, slopes })
}

/// Membership in the admissible function set.
#[derive(Clone, Debug, PartialEq)]
pub struct MembershipReport {
    pub start_relation: bool,
    pub end_relation: bool,
    /// Why the node vector fails admissibility, if it does.
    pub node_failure: Option<String>,
}

impl MembershipReport {
    pub fn is_member(&self) -> bool {
        self.start_relation && self.end_relation && self.node_failure.is_none()
    }
}

impl PiecewiseAffineAngle {
    /// Builds the affine function through `N + 2` breakpoint values.
    pub fn from_breakpoints(eps: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::Argument("need at least 4 breakpoint values".into()));
        }
        let n = values.len() - 2;
        if (eps * n as f64 - 1.0).abs() > 8.0 * f64::EPSILON {
            return Err(Error::Argument(format!("eps = {eps} is not 1/{n}")));
        }
        let half = 0.5 * eps;
        let mut slopes = Vec::with_capacity(n + 1);
        slopes.push((values[1] - values[0]) / half);
        slopes.extend(values[1..=n].windows(2).map(|w| (w[1] - w[0]) / eps));
        slopes.push((values[n + 1] - values[n]) / half);
        Ok(PiecewiseAffineAngle { eps, values, slopes })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n(&self) -> usize {
        self.values.len() - 2
    }

    pub fn breakpoint_values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Breakpoint abscissas `0, eps/2, ..., 1 - eps/2, 1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.n();
        let mut b = Vec::with_capacity(n + 2);
        b.push(0.0);
        b.extend((1..=n).map(|i| (2 * i - 1) as f64 * 0.5 * self.eps));
        b.push(1.0);
        b
    }

    /// Node values at the link midpoints.
    pub fn nodes(&self) -> AngleVector {
        AngleVector::new(self.values[1..=self.n()].to_vec())
    }

    pub fn membership(&self) -> MembershipReport {
        let n = self.n();
        let v = &self.values;
        let mean = 0.5 * (v[1] + v[n]);
        let close = |a: f64, b: f64| (a - b).abs() <= ENDPOINT_TOL * (1.0 + a.abs().max(b.abs()));
        MembershipReport {
            start_relation: close(v[0], mean - PI),
            end_relation: close(v[n + 1], mean + PI),
            node_failure: self.nodes().check_admissible().err().map(|e| e.to_string()),
        }
    }

    pub fn is_member(&self) -> bool {
        self.membership().is_member()
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let n = self.n();
        let half = 0.5 * self.eps;
        if s < half {
            (0, 0.0)
        } else if s >= 1.0 - half {
            (n, 1.0 - half)
        } else {
            let i = (((s - half) / self.eps).floor() as usize + 1).clamp(1, n - 1);
            (i, (2 * i - 1) as f64 * half)
        }
    }

    /// Segment widths, matching [`Self::slopes`].
    pub fn widths(&self) -> Vec<f64> {
        let n = self.n();
        let mut w = vec![self.eps; n + 1];
        w[0] = 0.5 * self.eps;
        w[n] = 0.5 * self.eps;
        w
    }

    /// `(int cos theta, int sin theta)` evaluated in closed form on every
    /// segment.
    pub fn closure_integral_residual(&self) -> (f64, f64) {
        let widths = self.widths();
        let mut c = 0.0;
        let mut s = 0.0;
        for (seg, (&len, &slope)) in widths.iter().zip(&self.slopes).enumerate() {
            let (ic, is) = affine_trig_integral(self.values[seg], slope, len);
            c += ic;
            s += is;
        }
        (c, s)
    }

    /// `int theta'^2` over [0, 1].
    pub fn dirichlet(&self) -> f64 {
        self.widths()
            .iter()
            .zip(&self.slopes)
            .map(|(w, k)| w * k * k)
            .sum()
    }

    /// Samples `s,theta,theta_prime` at `resolution + 1` uniform points.
    pub fn to_csv(&self, resolution: usize) -> String {
        let resolution = resolution.max(1);
        let mut out = String::from("s,theta,theta_prime\n");
        for j in 0..=resolution {
            let s = j as f64 / resolution as f64;
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", s, self.theta(s), self.theta_prime(s));
        }
        out
    }
}

/// `int_0^len (cos, sin)(start + slope t) dt`, written as
/// `len (cos, sin)(mid) sinc(slope len / 2)` so that small slopes do not
/// cancel.
pub fn affine_trig_integral(start: f64, slope: f64, len: f64) -> (f64, f64) {
    let half = 0.5 * slope * len;
    let mid = start + half;
    let k = len * sinc(half);
    (k * mid.cos(), k * mid.sin())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

impl AngleFunction for PiecewiseAffineAngle {
    fn theta(&self, s: f64) -> f64 {
        let (seg, left) = self.segment(s);
        self.values[seg] + self.slopes[seg] * (s - left)
    }

    fn theta_prime(&self, s: f64) -> f64 {
        self.slopes[self.segment(s).0]
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::H1
    }

    /// A multiple of `2N` so that every breakpoint is a panel boundary.
    fn panels(&self) -> usize {
        let cells = 2 * self.n();
        cells * crate::quadrature::DEFAULT_PANELS.div_ceil(cells).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{closure_integrals, regular_polygon, random_admissible};
    use crate::quadrature;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    #[test]
    fn square_slopes() {
        let a = regular_polygon(4).unwrap();
        let p = affine_interpolant(&a, 0.25).unwrap();
        for k in p.slopes() {
            assert!((k - TAU).abs() < 1e-13);
        }
    }

    #[test]
    fn node_and_endpoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_admissible(16, 0.3, &mut rng).unwrap();
        let p = affine_interpolant(&a, a.eps()).unwrap();
        for i in 1..=16 {
            let s = (2 * i - 1) as f64 * a.eps() / 2.0;
            assert!((p.theta(s) - a.thetas[i - 1]).abs() < 1e-13);
        }
        let mean = 0.5 * (a.thetas[0] + a.thetas[15]);
        assert_eq!(p.theta(0.0), mean - PI);
        assert!((p.theta(1.0) - (mean + PI)).abs() < 1e-13);
        assert!((p.theta(1.0) - p.theta(0.0) - TAU).abs() < 1e-13);
        // continuity at every breakpoint from both sides
        for b in p.breakpoints() {
            let l = p.theta((b - 1e-12).max(0.0));
            let r = p.theta((b + 1e-12).min(1.0));
            assert!((l - r).abs() < 1e-9);
        }
        assert!(p.is_member());
    }

    #[test]
    fn quarter_turn_example() {
        let a = AngleVector::new(vec![0.0, PI / 2.0, PI, 1.5 * PI]);
        let p = affine_interpolant(&a, 0.25).unwrap();
        assert_eq!(p.theta(0.125), 0.0);
        assert!((p.theta(1.0 - 0.125) - 1.5 * PI).abs() < 1e-15);
        assert!((p.theta(0.0) + PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn membership() {
        let p = affine_interpolant(&regular_polygon(8).unwrap(), 0.125).unwrap();
        assert!(p.is_member());

        let mut v = p.breakpoint_values().to_vec();
        *v.last_mut().unwrap() += 0.1;
        let q = PiecewiseAffineAngle::from_breakpoints(0.125, v).unwrap();
        let report = q.membership();
        assert!(!report.end_relation && report.start_relation && !report.is_member());

        // lift of a vector that does not close
        let mut t = regular_polygon(8).unwrap().thetas;
        t[2] += 0.2;
        let open = AngleVector::new(t);
        let (c, s) = open.closure_residual();
        assert!(c.hypot(s) > 0.1);
        let mean = 0.5 * (open.thetas[0] + open.thetas[7]);
        let mut v = vec![mean - PI];
        v.extend_from_slice(&open.thetas);
        v.push(mean + PI);
        let r = PiecewiseAffineAngle::from_breakpoints(0.125, v).unwrap();
        assert!(r.membership().node_failure.is_some());
        assert!(!r.is_member());
        assert!(affine_interpolant(&open, 0.125).is_err());
    }

    #[test]
    fn from_breakpoints_reproduces_interpolant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_admissible(32, 0.2, &mut rng).unwrap();
        let p = affine_interpolant(&a, a.eps()).unwrap();
        let q = PiecewiseAffineAngle::from_breakpoints(a.eps(), p.breakpoint_values().to_vec()).unwrap();
        for (x, y) in p.slopes().iter().zip(q.slopes()) {
            assert!((x - y).abs() < 1e-11);
        }
        assert!(q.is_member());
    }

    fn fine_closure(p: &PiecewiseAffineAngle) -> (f64, f64) {
        // oracle: Gauss rule on a grid aligned with the breakpoints
        let n = p.n();
        quadrature::integrate_pair(
            |s| {
                let t = p.theta(s);
                (t.cos(), t.sin())
            },
            0.0,
            1.0,
            2 * n * 64,
        )
    }

    #[test]
    fn closed_form_closure_matches_quadrature() {
        let a = random_admissible(4, 0.3, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap_or_else(|_| regular_polygon(4).unwrap());
        // rhombus with unequal turns
        let rh = AngleVector::new(vec![0.0, 1.2, PI, PI + 1.2]);
        for v in [a, rh] {
            let p = affine_interpolant(&v, 0.25).unwrap();
            let (c, s) = p.closure_integral_residual();
            let (oc, os) = fine_closure(&p);
            assert!((c - oc).abs() < 1e-10 && (s - os).abs() < 1e-10);
            let (gc, gs) = closure_integrals(&p);
            assert!((c - gc).abs() < 1e-12 && (s - gs).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_closure_residual_small() {
        for n in [8, 16, 32, 64] {
            let p = affine_interpolant(&regular_polygon(n).unwrap(), 1.0 / n as f64).unwrap();
            let (c, s) = p.closure_integral_residual();
            assert!(c.abs() + s.abs() <= TAU / n as f64);
            assert!(c.abs() + s.abs() < 1e-14);
        }
    }

    #[test]
    fn closure_integral_decays_on_random_vectors() {
        // the discrete sums vanish, only O(eps) terms remain
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut worst: f64 = 0.0;
        for n in [8usize, 16, 32, 64, 128, 256, 512] {
            for _ in 0..5 {
                let a = random_admissible(n, 0.3, &mut rng).unwrap();
                let p = affine_interpolant(&a, a.eps()).unwrap();
                let (c, s) = p.closure_integral_residual();
                worst = worst.max((c.abs() + s.abs()) / a.eps());
            }
        }
        assert!(worst <= 1.0, "{worst}");
    }

    #[test]
    fn sinc_branches_agree() {
        for x in [9.9e-5, 1e-4, 1.01e-4] {
            assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        }
        let (c, _) = affine_trig_integral(0.3, 1e-9, 0.5);
        assert!((c - (0.3f64 + 0.25e-9).cos() * 0.5).abs() < 1e-16);
    }

    #[test]
    fn csv_layout() {
        let p = affine_interpolant(&regular_polygon(4).unwrap(), 0.25).unwrap();
        let csv = p.to_csv(8);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "s,theta,theta_prime");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1].split(',').count(), 3);
    }
}
