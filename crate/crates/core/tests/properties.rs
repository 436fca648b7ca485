use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use speedlimit::bounds::{applicable_bounds, evaluate_bound, BoundKind};
use speedlimit::current::{accumulate_actions, action_rates, velocity_fields};
use speedlimit::langevin::{propagate_moments, GaussianState, MobilityMatrix};
use speedlimit::mc::{empirical_moments, simulate_paths, McConfig};
use speedlimit::scenarios::{
    figure1_sweep, random_mixed, random_refrigerator, random_rlc, random_trap, RandomCase, TrapScenario,
};
use speedlimit::wasserstein::{w2_gaussian, w2_weighted};

fn state_2d() -> impl Strategy<Value = GaussianState> {
    (
        prop::array::uniform2(-2.0..2.0f64),
        prop::array::uniform2(0.2..2.0f64),
        -1.5..1.5f64,
    )
        .prop_map(|(mean, diag, off)| {
            let (a, c) = (diag[0], diag[1]);
            let cov = [a * a, a * off, a * off, off * off + c * c];
            GaussianState::from_slices(&mean, &cov).unwrap()
        })
}

fn mobility() -> impl Strategy<Value = MobilityMatrix> {
    prop::array::uniform2(0.1..10.0f64).prop_map(|m| MobilityMatrix::new(&m).unwrap())
}

fn random_case(seed: u64, family: u8) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family % 4 {
        0 => random_trap(&mut rng),
        1 => random_refrigerator(&mut rng),
        2 => random_mixed(&mut rng),
        _ => random_rlc(&mut rng),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn w2_is_a_metric(a in state_2d(), b in state_2d(), c in state_2d(), m in mobility()) {
        for d in [
            &|x: &GaussianState, y: &GaussianState| w2_gaussian(x, y).unwrap() as f64,
            &|x: &GaussianState, y: &GaussianState| w2_weighted(x, y, &m).unwrap(),
        ] as [&dyn Fn(&GaussianState, &GaussianState) -> f64; 2] {
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &a) <= 1e-7);
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }

    #[test]
    fn weighted_w2_scales_with_uniform_mobility(a in state_2d(), b in state_2d(), k in 0.1..10.0f64) {
        let m = MobilityMatrix::new(&[k, k]).unwrap();
        let plain = w2_gaussian(&a, &b).unwrap();
        prop_assert!((w2_weighted(&a, &b, &m).unwrap() - k.sqrt() * plain).abs() <= 1e-9 * (1.0 + plain));
    }

    #[test]
    fn cross_rate_is_cauchy_schwarz_bounded(seed in any::<u64>(), family in 0u8..4, s in state_2d(), t in 0.0..1.0f64) {
        let case = random_case(seed, family);
        let t = t * case.system.horizon();
        let r = action_rates(&case.system, &s, t).unwrap();
        prop_assert!(r.sigma >= 0.0 && r.upsilon >= 0.0);
        prop_assert!(r.phi.abs() <= 2.0 * (r.sigma * r.upsilon).sqrt() * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn velocity_decomposition_is_additive(seed in any::<u64>(), family in 0u8..4, s in state_2d()) {
        let case = random_case(seed, family);
        let f = velocity_fields(&case.system, &s, 0.3 * case.system.horizon()).unwrap();
        let sum = &f.rev + &f.irr;
        let scale = f.total.u.abs().max().max(f.total.b.abs().max()).max(1e-300);
        prop_assert!((&sum.u - &f.total.u).abs().max() <= 1e-12 * scale);
        prop_assert!((&sum.b - &f.total.b).abs().max() <= 1e-12 * scale);
    }

    #[test]
    fn bound_kind_names_round_trip(ax in 0.01..100.0f64, av in 0.01..100.0f64) {
        for kind in [BoundKind::AlphaFamily { alpha_x: ax, alpha_v: av }, BoundKind::TightFrev0 { alpha_x: ax }] {
            let parsed: BoundKind = kind.to_string().parse().unwrap();
            prop_assert_eq!(parsed, kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn applicable_bounds_hold(seed in any::<u64>(), family in 0u8..4) {
        let case = random_case(seed, family);
        let traj = propagate_moments(&case.system, &case.initial, 2000).unwrap();
        let b = accumulate_actions(&traj).unwrap();
        for kind in applicable_bounds(&traj) {
            let r = evaluate_bound(kind, &traj, &b).unwrap();
            prop_assert!(r.satisfied, "{} {}: lhs {:e} rhs {:e}", case.label, kind, r.lhs, r.rhs);
            if let Some(c) = &r.chain {
                prop_assert!(c.satisfied, "{} {} chain", case.label, kind);
            }
        }
    }
}

#[test]
fn sweep_points_are_independent() {
    let sc = TrapScenario {
        steps: 2000,
        ..TrapScenario::default()
    };
    let grid = [0.05, 3.0, 200.0];
    let together = figure1_sweep(&sc, &grid);
    for (g, row) in grid.iter().zip(&together) {
        let alone = figure1_sweep(&sc, &[*g]);
        assert_eq!(alone.len(), 1);
        assert_eq!(alone[0].tau24.to_bits(), row.tau24.to_bits());
        assert_eq!(alone[0].tau25.to_bits(), row.tau25.to_bits());
    }
    let reversed: Vec<f64> = grid.iter().rev().copied().collect();
    let back = figure1_sweep(&sc, &reversed);
    for (a, b) in together.iter().zip(back.iter().rev()) {
        assert_eq!(a.tau24.to_bits(), b.tau24.to_bits());
    }
}

#[test]
fn monte_carlo_is_seed_deterministic() {
    let case = random_case(7, 0);
    let cfg = McConfig {
        paths: 1000,
        seed: 11,
        ..McConfig::default()
    }
    .with_steps(case.system.horizon(), 1000);
    let a = empirical_moments(&simulate_paths(&case.system, &case.initial, &cfg).unwrap());
    let b = empirical_moments(&simulate_paths(&case.system, &case.initial, &cfg).unwrap());
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.cov, b.cov);
    let other = McConfig { seed: 12, ..cfg };
    let c = empirical_moments(&simulate_paths(&case.system, &case.initial, &other).unwrap());
    assert_ne!(a.cov.last(), c.cov.last());
}
