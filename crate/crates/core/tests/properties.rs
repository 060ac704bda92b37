use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qubit_hamid::bloch::{evolve_z, rotate, spherical_from_cartesian, wrap_angle, AxisSpherical};
use qubit_hamid::identification::{error_norms, extract_hamiltonian, AxisMeasurement};
use qubit_hamid::measurement::{read_series, sample_z, series_to_csv, SamplingConfig, TimeSeries};
use qubit_hamid::phi::{equatorial_trajectory, plan_equatorial_prep};
use qubit_hamid::{HamiltonianModel, Vector3};

fn vector(r: f64) -> impl Strategy<Value = Vector3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn axis() -> impl Strategy<Value = Vector3> {
    vector(2.0).prop_filter("non-degenerate axis", |v| v.norm() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pole_trajectory_is_a_raised_cosine(d in axis(), t in 0.0f64..100.0) {
        let s = spherical_from_cartesian(d).unwrap();
        let (st, ct) = s.theta.sin_cos();
        let expected = ct * ct + st * st * (s.omega * t).cos();
        prop_assert!((evolve_z(Vector3::POLE, d, t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn rotation_preserves_projection_on_axis(v in vector(2.0), a in axis(), t in -10.0f64..10.0) {
        let k = a.unit().unwrap();
        let r = rotate(v, a, t).unwrap();
        prop_assert!((r.dot(k) - v.dot(k)).abs() < 1e-12);
    }

    #[test]
    fn shot_average_is_bounded_and_quantised(
        z in -1.0f64..1.0,
        ne in 1u32..200,
        p in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = sample_z(z, Some(ne), p, &mut rng);
        prop_assert!((-1.0..=1.0).contains(&v));
        let n_plus = (v + 1.0) * ne as f64 / 2.0;
        prop_assert!((n_plus - n_plus.round()).abs() < 1e-9);
        prop_assert!((sample_z(z, None, p, &mut rng) - (1.0 - 2.0 * p) * z).abs() < 1e-15);
    }

    #[test]
    fn wrapped_angles_lie_in_half_open_range(a in -100.0f64..100.0) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        let turns = (a - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip_is_lossless(
        values in prop::collection::vec(-1.0f64..1.0, 2..60),
        dt in 0.01f64..2.0,
        ne in prop::option::of(1u32..1000),
        seed in any::<u64>(),
    ) {
        // finite-shot values are averages of ±1 outcomes
        let values: Vec<f64> = match ne {
            Some(n) => values.iter().map(|v| 2.0 * ((v + 1.0) / 2.0 * n as f64).round() / n as f64 - 1.0).collect(),
            None => values,
        };
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * dt).collect();
        let cfg = SamplingConfig::new(dt, times[times.len() - 1], ne, 0.03, seed).unwrap();
        let s = TimeSeries::new(times, values, cfg).unwrap();
        let back = read_series(series_to_csv(&s).as_bytes()).unwrap();
        prop_assert_eq!(&back.times, &s.times);
        prop_assert_eq!(&back.values, &s.values);
        prop_assert_eq!(back.config.ne, s.config.ne);
        prop_assert_eq!(back.config.seed, s.config.seed);
    }

    #[test]
    fn equatorial_prep_lands_on_the_equator(
        omega in 0.05f64..2.0,
        theta in (PI / 4.0 + 1e-6)..(3.0 * PI / 4.0 - 1e-6),
        phi in (-PI + 1e-9)..PI,
    ) {
        let plan = plan_equatorial_prep(AxisSpherical::new(omega, theta, phi).unwrap()).unwrap();
        prop_assert!(plan.prepared.z.abs() < 1e-9);
        prop_assert!(plan.prepared.distance(plan.equatorial_state()) < 1e-9);
    }

    #[test]
    fn equatorial_trajectory_matches_kinematics(
        d in axis(),
        beta in -PI..PI,
        t in 0.0f64..50.0,
    ) {
        let s = spherical_from_cartesian(d).unwrap();
        let start = Vector3::new(beta.cos(), beta.sin(), 0.0);
        let model = equatorial_trajectory(t, s.omega, s.theta, s.phi, beta);
        prop_assert!((model - evolve_z(start, d, t).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn noiseless_axes_give_back_the_model(d0 in vector(1.0), d1 in vector(2.0), d2 in vector(2.0)) {
        let truth = HamiltonianModel::new(d0, vec![d1, d2]).unwrap();
        let mut ms = vec![AxisMeasurement::new(0, 0.0, d0)];
        for (m, dm) in [(1, d1), (2, d2)] {
            for f in [0.05, 0.1, 0.15, 0.2] {
                ms.push(AxisMeasurement::new(m, f, d0 + dm * f));
            }
        }
        let id = extract_hamiltonian(&ms).unwrap();
        for e in error_norms(&id.model, &truth).unwrap() {
            prop_assert!(e < 1e-10, "{e}");
        }
        prop_assert!(!id.inconsistent_intercepts);
    }
}
