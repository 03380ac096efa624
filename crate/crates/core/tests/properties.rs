use proptest::prelude::*;

use kfselect::certificates::{certify, PriorSchedule};
use kfselect::covariance::Kind;
use kfselect::experiments::{simulate_kalman, NoiseDraws};
use kfselect::model::{random_system, LinearSystem, OutputMode, RandomSystemSpec, SensorSet};
use kfselect::objective::{covariance_trajectory, Objective, Scalarization, SelectionConfig, SetFunction, Weights};
use kfselect::selection::{exhaustive, greedy_objective, GreedyMode};

fn system(seed: u64, n: usize, p: usize, gaussian: bool) -> LinearSystem {
    random_system(
        &RandomSystemSpec {
            n,
            p,
            output_mode: if gaussian { OutputMode::Gaussian } else { OutputMode::Canonical },
            ..Default::default()
        },
        seed,
    )
    .unwrap()
}

fn scalarization() -> impl Strategy<Value = Scalarization> {
    prop_oneof![Just(Scalarization::Trace), Just(Scalarization::Specnorm), Just(Scalarization::Logdet)]
}

fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Filtering), Just(Kind::Smoothing)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn greedy_never_beats_the_optimum_and_never_increases(
        seed in 0u64..1000, n in 2usize..5, p in 3usize..7, h in scalarization(), k in kind(), horizon in 1usize..4,
    ) {
        let sys = system(seed, n, p, true);
        let s = 2;
        let cfg = SelectionConfig::new(h, k, 0, horizon, &Weights::Average, s);
        let obj = Objective::new(&sys, &cfg).unwrap();
        let g = greedy_objective(&obj, s, GreedyMode::Auto).unwrap();
        for w in g.objective_trajectory.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        prop_assert!(g.gains.iter().all(|&x| x >= -1e-12));
        let (_, opt) = exhaustive(&obj, s, 1_000).unwrap();
        prop_assert!(opt <= g.final_value() + 1e-12);
        let direct = greedy_objective(&obj, s, GreedyMode::Direct).unwrap();
        prop_assert_eq!(direct.chosen, g.chosen);
    }

    #[test]
    fn certificates_lie_in_range(seed in 0u64..1000, n in 1usize..5, p in 1usize..6, k in kind(), horizon in 1usize..4) {
        let sys = system(seed, n, p, true);
        let cfg = SelectionConfig::new(Scalarization::Trace, k, 0, horizon, &Weights::Average, 1);
        let rep = certify(&sys, &cfg, &PriorSchedule::Empty).unwrap();
        prop_assert!(rep.alpha_bound > 0.0 && rep.alpha_bound <= 1.0);
        prop_assert!(rep.epsilon_bound >= 0.0);
        prop_assert!(rep.guarantee_multiplicative > 0.0 && rep.guarantee_multiplicative <= 1.0 - (-1.0f64).exp() + 1e-15);
    }

    #[test]
    fn json_round_trip(seed in 0u64..10_000, n in 1usize..6, p in 1usize..6) {
        let sys = system(seed, n, p, true);
        prop_assert_eq!(LinearSystem::from_json(&sys.to_json()).unwrap(), sys);
    }

    #[test]
    fn kalman_simulation_covariance_matches_objective(seed in 0u64..1000, n in 1usize..5, mask in 0u64..16) {
        let sys = system(seed, n, n, false);
        let x = SensorSet::from_mask(mask & ((1 << n) - 1));
        let steps = 6;
        let cfg = SelectionConfig::new(Scalarization::Trace, Kind::Filtering, 0, steps, &Weights::Average, 1);
        let reference = covariance_trajectory(&sys, &cfg, &x).unwrap();
        let noise = NoiseDraws::draw(&sys, steps, seed).unwrap();
        let sim = simulate_kalman(&sys, &x, &vec![0.0; n], &noise).unwrap();
        for (p, tr) in reference.iter().zip(&sim.expected_error) {
            prop_assert!((p.trace() - tr).abs() <= 1e-10 * p.trace().max(1e-3));
        }
        let obj = Objective::new(&sys, &cfg).unwrap();
        let value = obj.value(&x).unwrap() + obj.c_empty();
        let total: f64 = sim.expected_error.iter().sum();
        prop_assert!((value - total).abs() <= 1e-10 * total);
    }
}

#[test]
fn scalar_filtering_hand_values() {
    // F = 0.5, Π₀ = R_w = 1, one sensor H = 1, R_v = 1
    let sys = LinearSystem::new(
        kfselect::numerics::Matrix::from_diag(&[0.5]),
        kfselect::numerics::Matrix::identity(1),
        kfselect::numerics::Matrix::identity(1),
        vec![kfselect::model::Sensor::scalar(&[1.0], 1.0)],
    )
    .unwrap();
    let cfg = SelectionConfig::new(Scalarization::Trace, Kind::Filtering, 0, 1, &Weights::Final, 1);
    let obj = Objective::new(&sys, &cfg).unwrap();
    assert!((obj.value(&SensorSet::full(1)).unwrap() + 0.5).abs() < 1e-15);

    // without sensing: P_{1|0} = 0.25 + 1 = 1.25
    let cfg = SelectionConfig::new(Scalarization::Trace, Kind::Filtering, 1, 1, &Weights::Final, 1);
    let y = covariance_trajectory(&sys, &cfg, &SensorSet::empty()).unwrap();
    assert!((y[0].trace() - 1.25).abs() < 1e-15);
}
