//! Sampling and discrete transport oracles against the closed forms.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use speedlimit::bounds::speed_rate_check;
use speedlimit::check::mc_max_z;
use speedlimit::current::{accumulate_actions, expected_quadratic, AffineVelocityField};
use speedlimit::langevin::{propagate_moments, GaussianState, MobilityMatrix};
use speedlimit::mc::McConfig;
use speedlimit::ot_grid::{discretize_gaussian, random_pair, verify_closed_form, GridSpec};
use speedlimit::scenarios::{random_rlc, random_state, random_trap, TrapScenario};
use speedlimit::schedule::{HarmonicTerm, Schedule};

#[test]
fn expected_quadratic_matches_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..3 {
        let state = random_state(&mut rng, &[1.0, 2.0]).unwrap();
        let mut uniform = || rng.random_range(-1.5..1.5);
        let field = AffineVelocityField {
            u: DMatrix::from_fn(2, 2, |_, _| uniform()),
            b: DVector::from_fn(2, |_, _| uniform()),
        };
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![uniform().abs() + 0.1, uniform().abs() + 0.1]));
        let exact = expected_quadratic(&field, &state, &w);

        let l = state.cov.clone().cholesky().unwrap().l();
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let xi = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let z = &state.mean + &l * xi;
            let u = field.eval(&z);
            let q = u.dot(&(&w * &u));
            sum += q;
            sq += q * q;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / (n as f64 - 1.0)).sqrt();
        assert!((mean - exact).abs() <= 4.0 * se, "MC {mean} ± {se} vs {exact}");
    }
}

#[test]
fn random_trajectories_agree_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in [random_trap(&mut rng).unwrap(), random_rlc(&mut rng).unwrap()] {
        let traj = propagate_moments(&case.system, &case.initial, 1000).unwrap();
        let b = accumulate_actions(&traj).unwrap();
        let cfg = McConfig {
            paths: 10_000,
            seed: 3,
            ..McConfig::default()
        }
        .with_steps(traj.horizon(), 1000);
        let z = mc_max_z(&traj, &b, &cfg).unwrap();
        assert!(z < 4.0, "{}: max z-score {z}", case.label);
    }
}

#[test]
fn quantile_grid_preserves_variance() {
    let g = GaussianState::from_slices(&[0.3], &[0.5]).unwrap();
    let d = discretize_gaussian(&g, &GridSpec::new(1, 200)).unwrap();
    let var = d.density.covariance()[(0, 0)];
    assert!((var - 0.5).abs() <= 0.01 * 0.5, "grid variance {var}");
    assert!((d.density.mean()[0] - 0.3).abs() < 1e-9);
}

#[test]
fn endpoint_pair_discrete_oracle() {
    let g0 = GaussianState::from_slices(&[0.0], &[1.0]).unwrap();
    let g1 = GaussianState::from_slices(&[0.0], &[0.5]).unwrap();
    let cmp = verify_closed_form(&g0, &g1, &MobilityMatrix::identity(1), &GridSpec::new(1, 200)).unwrap();
    assert!((cmp.closed - 0.292_893_218_8).abs() < 1e-9);
    assert!((cmp.discrete - 0.2929).abs() <= 0.02 * 0.2929);
    assert!(cmp.passed);
}

#[test]
fn weighted_pair_discrete_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // Underdamped mobility in reduced units (m = γ = T = 1) and a skewed one.
    for m in [MobilityMatrix::new(&[1.0, 1.0]).unwrap(), MobilityMatrix::new(&[0.4, 2.5]).unwrap()] {
        let (a, b) = random_pair(&mut rng, 2).unwrap();
        let cmp = verify_closed_form(&a, &b, &m, &GridSpec::new(2, 40)).unwrap();
        assert!(cmp.passed, "gap {} (closed {}, discrete {})", cmp.relative_gap, cmp.closed, cmp.discrete);
    }
}

#[test]
fn speed_estimate_converges_in_delta() {
    let sc = TrapScenario {
        mass: 1.0,
        friction: 1.0,
        kb: 1.0,
        temperature: 1.0,
        protocol: speedlimit::scenarios::TrapProtocol::Stiffness {
            stiffness: Schedule::Harmonic {
                base: 2.0,
                terms: vec![HarmonicTerm {
                    amplitude: 0.4,
                    frequency: 0.5,
                    phase: 0.0,
                }],
            },
        },
        ..TrapScenario::default()
    };
    let (traj, _) = sc.run().unwrap();
    for t in [0.2, 0.5, 0.8] {
        let full = speed_rate_check(&traj, t, 1e-3, 1e-3).unwrap();
        let half = speed_rate_check(&traj, t, 5e-4, 1e-3).unwrap();
        let (a, b) = (full.terms["wasserstein_speed"], half.terms["wasserstein_speed"]);
        assert!((a - b).abs() <= 0.05 * a, "t = {t}: {a} vs {b}");
        assert!(full.satisfied && half.satisfied);
    }
}
