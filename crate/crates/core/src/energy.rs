//! Discrete chain energy, its continuum reformulation on piecewise-affine
//! functions, and the limiting elastica energy.

use std::fmt;

use crate::error::Result;
use crate::geometry::{check_closed, AngleFunction, AngleVector};
use crate::interpolant::PiecewiseAffineAngle;
use crate::potential::PotentialSpec;
use crate::quadrature;

/// Energy value on the extended half-line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::Infinite => None,
        }
    }

    /// The value as an `f64`, with `+inf` for [`ExtendedReal::Infinite`].
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// `eps * sum_i psi_eps((theta_i - theta_{i-1}) / eps)`, `theta_0 = theta_N - 2 pi`.
///
/// Only the potential's domain is checked here; closure is the caller's
/// business.
pub fn discrete_energy(a: &AngleVector, eps: f64, p: &PotentialSpec) -> Result<f64> {
    let slopes = a.increments().into_iter().map(|d| d / eps);
    slope_sum(slopes, eps, p)
}

fn slope_sum(slopes: impl Iterator<Item = f64>, eps: f64, p: &PotentialSpec) -> Result<f64> {
    let mut sum = 0.0;
    for xi in slopes {
        sum += p.psi_eps(xi, eps)?;
    }
    Ok(eps * sum)
}

/// `int psi_eps(theta')` on the admissible set, `+inf` elsewhere.
///
/// The integrand is piecewise constant, so the integral is the exact
/// segment sum; the two boundary half-segments are combined into one
/// full-width term, which reproduces [`discrete_energy`] bit for bit.
pub fn f_eps(pfa: &PiecewiseAffineAngle, p: &PotentialSpec) -> ExtendedReal {
    if !pfa.is_member() {
        return ExtendedReal::Infinite;
    }
    let eps = pfa.eps();
    let k = pfa.slopes();
    let n = pfa.n();
    let boundary = match (p.psi_eps(k[0], eps), p.psi_eps(k[n], eps)) {
        (Ok(a), Ok(b)) => 0.5 * (a + b),
        _ => return ExtendedReal::Infinite,
    };
    let mut sum = boundary;
    for &xi in &k[1..n] {
        match p.psi_eps(xi, eps) {
            Ok(v) => sum += v,
            Err(_) => return ExtendedReal::Infinite,
        }
    }
    ExtendedReal::Finite(eps * sum)
}

/// `int alpha theta'^2` with `alpha = psi''(0) / 2` for closed curves,
/// `+inf` when a closure constraint fails.
pub fn elastica_energy(c: &dyn AngleFunction, p: &PotentialSpec) -> ExtendedReal {
    if check_closed(c).is_err() {
        return ExtendedReal::Infinite;
    }
    let dirichlet = quadrature::integrate(
        |s| {
            let k = c.theta_prime(s);
            k * k
        },
        0.0,
        1.0,
        c.panels(),
    );
    ExtendedReal::Finite(p.alpha() * dirichlet)
}

/// `int alpha theta'^2` of a piecewise-affine function, without the
/// closure test.
pub fn quadratic_energy(pfa: &PiecewiseAffineAngle, p: &PotentialSpec) -> f64 {
    p.alpha() * pfa.dirichlet()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRow {
    pub eps: f64,
    pub f_eps: ExtendedReal,
    pub e0: ExtendedReal,
    /// `F_eps - E_0`; `+inf` when `F_eps` is infinite.
    pub gap: f64,
}

/// Per-step gap between a sequence of continuum energies and the limit energy.
pub fn liminf_gap(
    sequence: &[(PiecewiseAffineAngle, ExtendedReal)],
    limit: &dyn AngleFunction,
    p: &PotentialSpec,
) -> Vec<GapRow> {
    let e0 = elastica_energy(limit, p);
    sequence
        .iter()
        .map(|(pfa, f)| {
            let gap = match (f, e0) {
                (ExtendedReal::Infinite, _) => f64::INFINITY,
                (ExtendedReal::Finite(_), ExtendedReal::Infinite) => f64::NEG_INFINITY,
                (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a - b,
            };
            GapRow { eps: pfa.eps(), f_eps: *f, e0, gap }
        })
        .collect()
}

/// `max theta^2 / psi(theta)` over `0 < |theta| <= radius`, on a 1e-3 grid;
/// at zero the ratio tends to `2 / psi''(0)`.
pub fn compactness_ratio(p: &PotentialSpec, radius: f64) -> f64 {
    let mut best = 2.0 / p.psi_second_at_zero();
    let steps = (radius / 1e-3).floor() as usize;
    for k in 1..=steps {
        let t = k as f64 * 1e-3;
        for t in [t, -t] {
            if let Ok(v) = p.psi(t) {
                if v > 0.0 {
                    best = best.max(t * t / v);
                }
            }
        }
    }
    best
}

/// Bound on `int theta_eps'^2` for chains of energy at most `max_energy`.
pub fn compactness_bound(p: &PotentialSpec, max_energy: f64, radius: f64) -> f64 {
    max_energy * compactness_ratio(p, radius)
}
