use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use warpconv::bounds::{fit_from_norms, wust_from_norms, BoundSample};
use warpconv::grid::{domain_vector, q_generator, unitary_v, GridSpace, GridState, SkewMatrix, C64};
use warpconv::operator::GridOperator;
use warpconv::snapshot;
use warpconv::warp::warp_spectral;

fn space2() -> Arc<GridSpace> {
    Arc::new(GridSpace::centered(2, 16, 6.0).unwrap())
}

fn state(g: &Arc<GridSpace>, k: [i32; 2], phase: f64) -> GridState {
    domain_vector(g, &k).unwrap().scaled(C64::from_polar(1.0, phase))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn warp_spectral_is_linear(
        b in -0.2f64..0.2,
        n in prop::sample::select(vec![0.0, 0.5, 1.0]),
        (ar, ai, br, bi) in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
    ) {
        let g = space2();
        let q = q_generator(&g, n).unwrap();
        let skew = SkewMatrix::planar(b);
        let h = GridOperator::free_hamiltonian(&g, 0.5);
        let (x, y) = (state(&g, [1, 0], 0.3), state(&g, [0, 2], -1.1));
        let (a, c) = (C64::new(ar, ai), C64::new(br, bi));
        let mut mix = x.scaled(a);
        mix.axpy(c, &y).unwrap();
        let lhs = warp_spectral(&h, &q, &skew, &mix).unwrap();
        let mut rhs = warp_spectral(&h, &q, &skew, &x).unwrap().scaled(a);
        rhs.axpy(c, &warp_spectral(&h, &q, &skew, &y).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn unitary_v_preserves_norm_and_inverts(
        y0 in -5.0f64..5.0, y1 in -5.0f64..5.0,
        n in prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0, 2.0]),
    ) {
        let g = space2();
        let q = q_generator(&g, n).unwrap();
        let phi = state(&g, [1, 1], 0.0);
        let moved = unitary_v(&q, &[y0, y1], &phi).unwrap();
        prop_assert!((moved.norm() - phi.norm()).abs() < 1e-13);
        let back = unitary_v(&q, &[-y0, -y1], &moved).unwrap();
        prop_assert!(back.distance(&phi).unwrap() < 1e-13);
    }

    #[test]
    fn random_skew_matrices_are_skew(dim in 1usize..6, norm in 0.0f64..3.0, seed in any::<u64>()) {
        let s = SkewMatrix::random(dim, norm, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(SkewMatrix::new(dim, s.entries.clone()).is_ok());
        if dim > 1 {
            prop_assert!((s.frobenius() - norm).abs() < 1e-12 * (1.0 + norm));
        }
    }

    #[test]
    fn bound_fit_covers_samples_and_beats_a_scan(
        raw in prop::collection::vec((0.0f64..5.0, 0.01f64..10.0), 1..12),
        b_cap in 0.5f64..50.0,
    ) {
        let samples: Vec<BoundSample> =
            raw.iter().map(|&(r, e)| BoundSample { perturbation: r, reference: e, state: 1.0 }).collect();
        let fit = fit_from_norms(&samples, b_cap).unwrap();
        prop_assert!(fit.b >= 0.0 && fit.b <= b_cap);
        prop_assert!(fit.max_violation <= 1e-12);
        let e_max = raw.iter().map(|p| p.1).fold(0.0, f64::max);
        let objective = |b: f64| raw.iter().map(|&(r, e)| (r - b) / e).fold(0.0, f64::max) * e_max + b;
        let scan = (0..=2000).map(|i| objective(b_cap * i as f64 / 2000.0)).fold(f64::INFINITY, f64::min);
        prop_assert!(fit.a * e_max + fit.b <= scan + 1e-9 * (1.0 + scan));

        let w = wust_from_norms(&samples, b_cap.max(10.0)).unwrap();
        for &(r, e) in &raw {
            prop_assert!(r <= e + w.b + 1e-12);
        }
    }

    #[test]
    fn snapshots_round_trip(values in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 64)) {
        let g = Arc::new(GridSpace::centered(1, 64, 4.0).unwrap());
        let s = GridState::from_amplitudes(&g, values.iter().map(|&(a, b)| C64::new(a, b)).collect()).unwrap();
        prop_assert_eq!(snapshot::from_bytes(&snapshot::to_bytes(&s).unwrap()).unwrap().amplitudes, s.amplitudes.clone());
        prop_assert_eq!(snapshot::from_json(&snapshot::to_json(&s).unwrap()).unwrap().amplitudes, s.amplitudes);
    }
}

#[test]
fn domain_vector_norm_matches_gaussian_moments() {
    let g = Arc::new(GridSpace::centered(3, 64, 10.0).unwrap());
    let k = [2, 1, 0];
    let v = domain_vector(&g, &k).unwrap();
    assert_relative_eq!(v.norm(), 1.0, max_relative = 1e-8);
    assert!(v.tail_mass() < 1e-8);
}
