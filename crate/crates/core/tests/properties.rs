use hermite_vasicek::asymptotics::FluctuationCase;
use hermite_vasicek::estimators::{estimate, invert_second_moment};
use hermite_vasicek::hermite::{simulate_fbm, GridSpec, HermiteSpec, SamplePath};
use hermite_vasicek::io::{config_from_settings, parse_settings, read_path_csv, settings_text, write_path_csv};
use hermite_vasicek::mc::{Experiment, MCConfig};
use hermite_vasicek::seed::replication_seed;
use hermite_vasicek::vasicek::{vasicek_path, VasicekParams};
use proptest::prelude::*;

fn state_path(h: f64, a: f64, b: f64, seed: u64) -> SamplePath {
    let z = simulate_fbm(h, GridSpec::new(50.0, 1000).unwrap(), seed).unwrap();
    vasicek_path(VasicekParams::new(a, b).unwrap(), &z).unwrap()
}

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shifting_the_path_moves_only_b(h in 0.55f64..0.95, seed in 0u64..1000, c in -50.0f64..50.0) {
        let spec = HermiteSpec::new(1, h).unwrap();
        let x = state_path(h, 1.0, 0.5, seed);
        let r0 = estimate(&x, &spec).unwrap();
        let r1 = estimate(&x.map(|v| v + c), &spec).unwrap();
        prop_assert!(close(r1.a_hat, r0.a_hat, 1e-8));
        prop_assert!((r1.b_hat - r0.b_hat - c).abs() < 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn scaling_the_path_rescales_a_by_a_power(h in 0.55f64..0.95, seed in 0u64..1000, lambda in 0.1f64..10.0) {
        let spec = HermiteSpec::new(1, h).unwrap();
        let x = state_path(h, 2.0, 1.0, seed);
        let r0 = estimate(&x, &spec).unwrap();
        let r1 = estimate(&x.map(|v| lambda * v), &spec).unwrap();
        prop_assert!(close(r1.a_hat, r0.a_hat * lambda.powf(-1.0 / h), 1e-9));
        prop_assert!(close(r1.b_hat, lambda * r0.b_hat, 1e-9));
    }

    #[test]
    fn inversion_round_trips(q in 1u32..5, h in 0.51f64..0.99, a in 0.01f64..100.0) {
        let spec = HermiteSpec::new(q, h).unwrap();
        let alpha = a.powf(-2.0 * h) * spec.stationary_moment();
        prop_assert!(close(invert_second_moment(alpha, &spec), a, 1e-12));
    }

    #[test]
    fn path_csv_round_trips_bit_for_bit(values in prop::collection::vec(-1e6f64..1e6, 2..60), horizon in 0.1f64..1e4) {
        let grid = GridSpec::new(horizon, values.len() - 1).unwrap();
        let path = SamplePath::new(grid, values).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf).unwrap();
        let back = read_path_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), path.values());
        prop_assert!(close(back.grid().horizon(), horizon, 1e-12));
    }

    #[test]
    fn settings_round_trip(q in 1u32..4, h in 0.51f64..0.99, a in 0.1f64..5.0, b in -5.0f64..5.0,
                           reps in 1usize..500, seed: u64, dt in 0.001f64..0.5, workers in 0usize..8) {
        let spec = HermiteSpec::new(q, h).unwrap();
        let mut c = MCConfig::new(Experiment::Consistency, spec, VasicekParams::new(a, b).unwrap());
        c.replications = reps;
        c.master_seed = seed;
        c.dt = dt;
        c.workers = workers;
        let back = config_from_settings(&parse_settings(&settings_text(&c)).unwrap(), None).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn fluctuation_cases_partition_the_parameter_space(q in 1u32..6, h in 0.501f64..0.999) {
        let case = FluctuationCase::of(&HermiteSpec::new(q, h).unwrap());
        let expected = match q {
            1 if h < 0.75 => FluctuationCase::GaussianSubcritical,
            1 if h > 0.75 => FluctuationCase::GaussianSupercritical,
            1 => FluctuationCase::GaussianCritical,
            _ => FluctuationCase::HermiteDriven,
        };
        prop_assert_eq!(case, expected);
    }

    #[test]
    fn replication_seeds_do_not_collide(master: u64, h1 in 0usize..16, r1 in 0usize..10_000, h2 in 0usize..16, r2 in 0usize..10_000) {
        prop_assume!((h1, r1) != (h2, r2));
        prop_assert_ne!(replication_seed(master, h1, r1), replication_seed(master, h2, r2));
    }
}

#[test]
fn critical_case_is_exactly_three_quarters() {
    assert_eq!(FluctuationCase::of(&HermiteSpec::new(1, 0.75).unwrap()), FluctuationCase::GaussianCritical);
}
