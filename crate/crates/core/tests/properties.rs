use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use elastica::energy::{discrete_energy, f_eps};
use elastica::geometry::{angles_from_chain, chain_from_angles, random_admissible, AngleVector, Point};
use elastica::interpolant::affine_interpolant;
use elastica::io::{angles_from_json, angles_to_json, parse_eps};
use elastica::potential::{PotentialSpec, REGISTRY};

fn potentials() -> impl Strategy<Value = PotentialSpec> {
    (0..REGISTRY.len()).prop_map(|i| PotentialSpec::by_name(REGISTRY[i]).unwrap())
}

fn admissible(n: usize, seed: u64, amplitude: f64) -> AngleVector {
    random_admissible(n, amplitude, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn psi_is_even(p in potentials(), theta in -3.1f64..3.1) {
        let (a, b) = (p.psi(theta).unwrap(), p.psi(-theta).unwrap());
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn psi_vanishes_only_at_zero(p in potentials(), theta in 1e-3f64..3.1) {
        prop_assert_eq!(p.psi(0.0).unwrap(), 0.0);
        prop_assert!(p.psi(theta).unwrap() > 0.0);
    }

    #[test]
    fn psi_eps_rescales(p in potentials(), xi in -10.0f64..10.0, n in 4u32..512) {
        let eps = 1.0 / n as f64;
        prop_assume!((eps * xi).abs() < 3.1);
        let lhs = p.psi_eps(xi, eps).unwrap();
        let rhs = p.psi(eps * xi).unwrap() * (n as f64) * (n as f64);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
    }

    #[test]
    fn interpolant_energy_matches_discrete(p in potentials(), n in 8usize..128, seed in any::<u64>()) {
        let a = admissible(n, seed, 0.3);
        let eps = 1.0 / n as f64;
        let discrete = discrete_energy(&a, eps, &p).unwrap();
        let continuous = f_eps(&affine_interpolant(&a, eps).unwrap(), &p).finite().unwrap();
        prop_assert!((discrete - continuous).abs() <= 1e-12 * discrete);
    }

    #[test]
    fn discrete_energy_at_least_polygon(n in 8usize..128, seed in any::<u64>()) {
        let p = PotentialSpec::canonical();
        let eps = 1.0 / n as f64;
        let e = discrete_energy(&admissible(n, seed, 0.3), eps, &p).unwrap();
        let bound = p.psi_eps(2.0 * PI, eps).unwrap();
        prop_assert!(e >= bound * (1.0 - 1e-12));
    }

    #[test]
    fn json_round_trip(n in 3usize..200, seed in any::<u64>()) {
        let a = admissible(n, seed, 0.3);
        let back = angles_from_json(&angles_to_json(&a).unwrap()).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn chain_round_trip(n in 8usize..200, seed in any::<u64>(), x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let a = admissible(n, seed, 0.3).normalized();
        let chain = chain_from_angles(&a, 1.0 / n as f64, Point::new(x, y)).unwrap();
        let back = angles_from_chain(&chain).unwrap();
        for (u, v) in back.thetas.iter().zip(&a.thetas) {
            prop_assert!((u - v).abs() < 1e-9, "{} vs {}", u, v);
        }
    }

    #[test]
    fn eps_sweep_round_trip(lo in 3u64..64, k in 0u32..5) {
        let hi = lo << k;
        let sweep = parse_eps(&format!("1/{lo}..1/{hi}")).unwrap();
        prop_assert_eq!(sweep.len(), k as usize + 1);
        for (i, eps) in sweep.iter().enumerate() {
            prop_assert_eq!(*eps, 1.0 / (lo << i) as f64);
            prop_assert_eq!(parse_eps(&format!("1/{}", lo << i)).unwrap(), vec![*eps]);
        }
    }
}
