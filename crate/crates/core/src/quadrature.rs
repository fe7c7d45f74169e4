//! Composite Gauss-Legendre quadrature on uniform panels.

/// Five-point Gauss-Legendre abscissas on [-1, 1].
pub const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664_0,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664_0,
];

/// Matching weights; they sum to 2.
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Panel count used for integrals over [0, 1] of smooth integrands.
pub const DEFAULT_PANELS: usize = 512;

/// Gauss nodes mapped into [a, b], paired with their scaled weights.
pub fn panel_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(move |(x, w)| (mid + half * x, half * w))
}

/// Integrates `f` over [a, b] split into `panels` equal panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + width * k as f64;
            panel_nodes(lo, lo + width).map(|(x, w)| w * f(x)).sum::<f64>()
        })
        .sum()
}

/// Integrates a vector-valued integrand with two components.
pub fn integrate_pair<F: Fn(f64) -> (f64, f64)>(f: F, a: f64, b: f64, panels: usize) -> (f64, f64) {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut acc = (0.0, 0.0);
    for k in 0..panels {
        let lo = a + width * k as f64;
        for (x, w) in panel_nodes(lo, lo + width) {
            let (u, v) = f(x);
            acc.0 += w * u;
            acc.1 += w * v;
        }
    }
    acc
}

/// All node abscissas of the composite rule on [0, 1], panel-major.
pub fn unit_nodes(panels: usize) -> Vec<f64> {
    let width = 1.0 / panels as f64;
    (0..panels)
        .flat_map(|k| {
            let lo = width * k as f64;
            panel_nodes(lo, lo + width).map(|(x, _)| x)
        })
        .collect()
}

/// Weights matching [`unit_nodes`].
pub fn unit_weights(panels: usize) -> Vec<f64> {
    let half = 0.5 / panels as f64;
    (0..panels)
        .flat_map(|_| GL5_WEIGHTS.iter().map(move |w| w * half))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = GL5_WEIGHTS.iter().sum();
        assert!((s - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exact_for_degree_nine() {
        let v = integrate(|x| x.powi(9) + 3.0 * x.powi(4), 0.0, 1.0, 1);
        assert!((v - (0.1 + 0.6)).abs() < 1e-14);
    }

    #[test]
    fn trig_integral() {
        let v = integrate(|x| (3.0 * x).cos(), 0.0, 2.0, 64);
        assert!((v - (6.0f64).sin() / 3.0).abs() < 1e-14);
    }

    #[test]
    fn node_tables_match_integrate() {
        let nodes = unit_nodes(16);
        let weights = unit_weights(16);
        let a: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.exp()).sum();
        let b = integrate(f64::exp, 0.0, 1.0, 16);
        assert!((a - b).abs() < 1e-14);
    }
}
