//! Bond potentials `f` on (-1, 1] and the induced angle potential
//! `psi(theta) = f(cos theta)`.
//!
//! A potential is admissible when `f(1) = 0`, `f` is strictly decreasing and
//! `f` blows up at `-1`. Then `psi` is even, vanishes only at zero, is
//! positive elsewhere on (-pi, pi) and has `psi''(0) > 0`. The rescaled
//! potential used at link length `eps` is `psi_eps(xi) = psi(eps xi) / eps^2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bond potential together with its derivative and `psi''(0)`.
#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    f: Scalar,
    f_prime: Scalar,
    psi_direct: Option<Scalar>,
    psi_second_at_zero: f64,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("psi_second_at_zero", &self.psi_second_at_zero)
            .finish()
    }
}

/// Names accepted by [`PotentialSpec::by_name`].
pub const REGISTRY: &[&str] = &["canonical", "log-cosine", "stiff"];

impl PotentialSpec {
    pub fn new<F, D>(name: impl Into<String>, f: F, f_prime: D, psi_second_at_zero: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        PotentialSpec {
            name: name.into(),
            f: Arc::new(f),
            f_prime: Arc::new(f_prime),
            psi_direct: None,
            psi_second_at_zero,
        }
    }

    /// Supplies a closed form for `psi` that avoids the cancellation in
    /// `1 - cos(theta)` for small angles. It must agree with `f(cos theta)`.
    pub fn with_psi<P>(mut self, psi: P) -> Self
    where
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.psi_direct = Some(Arc::new(psi));
        self
    }

    /// `f(x) = (1 - x) / (1 + x)`, so `psi(theta) = tan^2(theta / 2)` and
    /// `psi''(0) = 1/2`.
    pub fn canonical() -> Self {
        PotentialSpec::new(
            "canonical",
            |x| (1.0 - x) / (1.0 + x),
            |x| -2.0 / ((1.0 + x) * (1.0 + x)),
            0.5,
        )
        .with_psi(|t| {
            let q = (0.5 * t).tan();
            q * q
        })
    }

    /// `f(x) = -ln((1 + x) / 2)`, so `psi(theta) = -2 ln cos(theta / 2)`.
    pub fn log_cosine() -> Self {
        PotentialSpec::new("log-cosine", |x| -(0.5 * (1.0 + x)).ln(), |x| -1.0 / (1.0 + x), 0.5)
            .with_psi(|t| -2.0 * (0.5 * t).cos().ln())
    }

    /// Four times the canonical potential; `psi''(0) = 2`.
    pub fn stiff() -> Self {
        PotentialSpec::new(
            "stiff",
            |x| 4.0 * (1.0 - x) / (1.0 + x),
            |x| -8.0 / ((1.0 + x) * (1.0 + x)),
            2.0,
        )
        .with_psi(|t| {
            let q = (0.5 * t).tan();
            4.0 * q * q
        })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "canonical" => Ok(Self::canonical()),
            "log-cosine" => Ok(Self::log_cosine()),
            "stiff" => Ok(Self::stiff()),
            other => Err(Error::UnknownPotential(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn f_prime(&self, x: f64) -> f64 {
        (self.f_prime)(x)
    }

    pub fn psi_second_at_zero(&self) -> f64 {
        self.psi_second_at_zero
    }

    /// Coefficient of the limiting elastica energy, `psi''(0) / 2`.
    pub fn alpha(&self) -> f64 {
        0.5 * self.psi_second_at_zero
    }

    /// `psi(theta) = f(cos theta)`, defined for `|theta| < pi`.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        if !(theta.abs() < PI) {
            return Err(Error::Domain { theta });
        }
        Ok(self.psi_unchecked(theta))
    }

    pub(crate) fn psi_unchecked(&self, theta: f64) -> f64 {
        match &self.psi_direct {
            Some(psi) => psi(theta),
            None => (self.f)(theta.cos()),
        }
    }

    /// `psi'(theta) = -f'(cos theta) sin theta`.
    pub fn psi_prime(&self, theta: f64) -> Result<f64> {
        if !(theta.abs() < PI) {
            return Err(Error::Domain { theta });
        }
        Ok(-(self.f_prime)(theta.cos()) * theta.sin())
    }

    /// `psi_eps(xi) = psi(eps xi) / eps^2`.
    pub fn psi_eps(&self, xi: f64, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Argument(format!("step length must be positive, got {eps}")));
        }
        Ok(self.psi(eps * xi)? / (eps * eps))
    }
}

/// One structural hypothesis checked by [`validate_potential`].
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { name, passed, detail });
    }
}

/// Step of the central difference used for `psi''(0)`.
pub const FD_STEP: f64 = 1e-4;
/// Allowed gap between the supplied and the finite-difference `psi''(0)`.
pub const FD_TOL: f64 = 1e-6;

/// Central second difference of `psi` at `theta`.
pub fn psi_second_fd(p: &PotentialSpec, theta: f64, step: f64) -> f64 {
    (p.psi_unchecked(theta + step) - 2.0 * p.psi_unchecked(theta) + p.psi_unchecked(theta - step))
        / (step * step)
}

/// Samples the hypotheses on `f` and `psi` on grids of `resolution` points.
pub fn validate_potential(p: &PotentialSpec, resolution: usize) -> Result<ValidationReport> {
    if resolution < 10 {
        return Err(Error::Argument(format!("resolution must be at least 10, got {resolution}")));
    }
    let mut report = ValidationReport::default();

    let f1 = p.f(1.0);
    report.push("f(1)=0", f1 == 0.0, format!("f(1) = {f1:e}"));

    // x_k in (-1, 1], strictly increasing
    let xs: Vec<f64> = (1..=resolution)
        .map(|k| -1.0 + 2.0 * k as f64 / resolution as f64)
        .collect();
    let mut worst = None;
    for w in xs.windows(2) {
        if !(p.f(w[1]) < p.f(w[0])) {
            worst = Some(w[0]);
            break;
        }
    }
    report.push(
        "f decreasing",
        worst.is_none(),
        match worst {
            Some(x) => format!("f not decreasing after x = {x}"),
            None => format!("strictly decreasing on {resolution} points"),
        },
    );

    // f(-1 + 10^-k): unbounded growth keeps the increments from decaying
    let tail: Vec<f64> = (1..=8).map(|k| p.f(-1.0 + 10f64.powi(-k))).collect();
    let incs: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    let increasing = incs.iter().all(|d| *d > 0.0);
    let sustained = incs.last().copied().unwrap_or(0.0) >= 0.1 * incs[0];
    report.push(
        "f blows up at -1",
        tail.iter().all(|v| v.is_finite()) && increasing && sustained,
        format!("f(-1+1e-8) = {:e}", tail[tail.len() - 1]),
    );

    let psi0 = p.psi_unchecked(0.0);
    report.push("psi(0)=0", psi0 == 0.0, format!("psi(0) = {psi0:e}"));

    let thetas: Vec<f64> = (1..resolution)
        .map(|k| PI * k as f64 / resolution as f64)
        .collect();
    let positive = thetas.iter().all(|&t| p.psi_unchecked(t) > 0.0 && p.psi_unchecked(-t) > 0.0);
    report.push("psi positive", positive, String::new());

    let even = thetas.iter().all(|&t| {
        let (a, b) = (p.psi_unchecked(t), p.psi_unchecked(-t));
        (a - b).abs() <= 1e-12 * (1.0 + a.abs())
    });
    report.push("psi even", even, String::new());

    let fd = psi_second_fd(p, 0.0, FD_STEP);
    report.push(
        "psi''(0)>0",
        p.psi_second_at_zero > 0.0 && fd > 0.0,
        format!("supplied {}", p.psi_second_at_zero),
    );
    report.push(
        "psi''(0) finite difference",
        (fd - p.psi_second_at_zero).abs() <= FD_TOL,
        format!("fd = {fd:.12}, supplied = {}", p.psi_second_at_zero),
    );
    Ok(report)
}

/// Largest `delta` such that `psi'' > 0` on (-delta, delta), found by
/// sign-sampling the second difference on a 1e-3 grid and shrinking by 0.9.
pub fn convexity_radius(p: &PotentialSpec) -> f64 {
    let step = 1e-3;
    let mut last = 0.0;
    let mut k = 1usize;
    loop {
        let t = k as f64 * step;
        if t + step >= PI {
            break;
        }
        let up = psi_second_fd(p, t, step);
        let down = psi_second_fd(p, -t, step);
        if !(up > 0.0 && down > 0.0) {
            break;
        }
        last = t;
        k += 1;
    }
    0.9 * last
}
