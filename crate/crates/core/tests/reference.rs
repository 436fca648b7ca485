//! Moment propagation checked against an independent adaptive
//! Dormand–Prince integration with the trap drift written out by hand.

use speedlimit::langevin::{
    equilibrium_state, propagate_moments, Bath, ForceProtocol, ForceRegime, GaussianState, LinearLangevinSystem,
};
use speedlimit::schedule::{HarmonicTerm, Schedule};

const KB: f64 = 1.38e-23;

/// `y' = f(t, y)` on `[0, tau]` with embedded 5(4) error control.
fn dormand_prince(f: &dyn Fn(f64, &[f64]) -> Vec<f64>, y0: &[f64], tau: f64, rtol: f64, atol: f64) -> Vec<f64> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h = tau * 1e-4;
    while t < tau {
        h = h.min(tau - t);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let ys: Vec<f64> = (0..n).map(|i| y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
            k.push(f(t + C[s] * h, &ys));
        }
        let y5: Vec<f64> = (0..n).map(|i| y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<f64>()).collect();
        let err = (0..n)
            .map(|i| {
                let e = h * (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<f64>();
                let sc = atol + rtol * y[i].abs().max(y5[i].abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let err = err.sqrt();
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Trap moment ODE over `(μx, μv, Sxx, Sxv, Svv)`.
fn trap_rhs(m: f64, gamma: f64, kbt: f64, q: impl Fn(f64) -> f64) -> impl Fn(f64, &[f64]) -> Vec<f64> {
    move |t, y| {
        let (k, g) = (q(t) / m, gamma / m);
        let (mx, mv, sxx, sxv, svv) = (y[0], y[1], y[2], y[3], y[4]);
        vec![
            mv,
            -k * mx - g * mv,
            2.0 * sxv,
            svv - k * sxx - g * sxv,
            -2.0 * k * sxv - 2.0 * g * svv + 2.0 * gamma * kbt / (m * m),
        ]
    }
}

fn trap_system(m: f64, gamma: f64, temperature: f64, stiffness: Schedule, kb: f64) -> LinearLangevinSystem {
    LinearLangevinSystem::underdamped(
        m,
        gamma,
        Bath::new(kb, temperature).unwrap(),
        ForceProtocol::trap(stiffness),
        1.0,
        ForceRegime::Even,
    )
    .unwrap()
}

fn terminal_vector(s: &GaussianState) -> [f64; 5] {
    [s.mean[0], s.mean[1], s.cov[(0, 0)], s.cov[(0, 1)], s.cov[(1, 1)]]
}

fn smooth_stiffness() -> Schedule {
    Schedule::Harmonic {
        base: 2.0,
        terms: vec![HarmonicTerm {
            amplitude: 0.3,
            frequency: 0.7,
            phase: 0.4,
        }],
    }
}

fn smooth_q(t: f64) -> f64 {
    2.0 * (1.0 + 0.3 * (2.0 * std::f64::consts::PI * 0.7 * t + 0.4).sin())
}

#[test]
fn paper_protocol_matches_reference() {
    let (m, gamma, temp) = (1e-11, 1e-8, 295.0);
    let kbt = KB * temp;
    let q = move |t: f64| 4.0 * kbt / (2.0 - t).powi(2) + gamma / (2.0 - t);
    let sys = trap_system(m, gamma, temp, Schedule::MinEntropyTrap { kbt, friction: gamma }, KB);
    let traj = propagate_moments(&sys, &GaussianState::standard(2), 10_000).unwrap();
    let reference = dormand_prince(&trap_rhs(m, gamma, kbt, q), &[0.0, 0.0, 1.0, 0.0, 1.0], 1.0, 1e-12, 1e-14);
    let got = terminal_vector(traj.terminal());
    for i in 2..5 {
        let scale = reference[i].abs().max(1e-3);
        assert!((got[i] - reference[i]).abs() <= 1e-8 * scale, "component {i}: {} vs {}", got[i], reference[i]);
    }
    // Frozen from the reference integration. The overdamped limit of this
    // protocol scales the position variance by (2 - t)²/4, i.e. to 0.25.
    const SXX_REFERENCE: f64 = 0.250_250_563_5;
    assert!((reference[2] - SXX_REFERENCE).abs() < 1e-9, "reference Sxx {}", reference[2]);
    assert!((got[2] - 0.25).abs() < 1e-3);
}

#[test]
fn fourth_order_convergence() {
    let (m, gamma, temp) = (1.0, 0.8, 1.0);
    let sys = trap_system(m, gamma, temp, smooth_stiffness(), 1.0);
    let s0 = GaussianState::from_slices(&[0.4, -0.2], &[1.5, 0.3, 0.3, 0.7]).unwrap();
    let y0 = [0.4, -0.2, 1.5, 0.3, 0.7];
    let reference = dormand_prince(&trap_rhs(m, gamma, temp, smooth_q), &y0, 1.0, 1e-13, 1e-15);
    let err = |steps: usize| {
        let t = propagate_moments(&sys, &s0, steps).unwrap();
        let v = terminal_vector(t.terminal());
        (0..5).map(|i| (v[i] - reference[i]).abs()).fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(20), err(40));
    assert!(coarse > 1e-11, "coarse error {coarse:e} too small to measure order");
    assert!(coarse / fine >= 8.0, "error ratio {} ({coarse:e} / {fine:e})", coarse / fine);
}

#[test]
fn gibbs_state_is_a_fixed_point() {
    let sys = trap_system(2.0, 0.5, 1.3, Schedule::constant(3.0), 1.0);
    let eq = equilibrium_state(&sys, 0.0).unwrap();
    assert!((eq.cov[(1, 1)] - 1.3 / 2.0).abs() < 1e-14);
    assert!((eq.cov[(0, 0)] - 1.3 / 3.0).abs() < 1e-14);
    let traj = propagate_moments(&sys, &eq, 1000).unwrap();
    let worst = traj
        .states
        .iter()
        .map(|s| (&s.cov - &eq.cov).abs().max().max((&s.mean - &eq.mean).abs().max()))
        .fold(0.0, f64::max);
    assert!(worst <= 1e-13, "drift from equilibrium {worst:e}");
}

#[test]
fn covariances_are_exactly_symmetric() {
    let sys = trap_system(1.0, 0.8, 1.0, smooth_stiffness(), 1.0);
    let s0 = GaussianState::from_slices(&[0.0, 0.0], &[1.5, 0.3, 0.3, 0.7]).unwrap();
    let traj = propagate_moments(&sys, &s0, 500).unwrap();
    assert!(traj.states.iter().all(|s| s.cov == s.cov.transpose()));
}

#[test]
fn kinetic_energy_balance() {
    let (m, gamma, temp) = (1.5, 0.8, 1.2);
    let sys = trap_system(m, gamma, temp, smooth_stiffness(), 1.0);
    let s0 = GaussianState::from_slices(&[0.5, 0.1], &[1.0, 0.2, 0.2, 0.4]).unwrap();
    let traj = propagate_moments(&sys, &s0, 4000).unwrap();
    let h = traj.step_size();
    let v2 = |k: usize| {
        let s = &traj.states[k];
        s.cov[(1, 1)] + s.mean[1] * s.mean[1]
    };
    let mut worst = 0.0f64;
    for k in (100..3900).step_by(250) {
        let s = &traj.states[k];
        let q = smooth_q(traj.times[k]);
        let xv = s.cov[(0, 1)] + s.mean[0] * s.mean[1];
        let vf = -q * xv;
        let predicted = 2.0 / m * (vf - gamma * v2(k) + gamma * temp / m);
        let measured = (v2(k + 1) - v2(k - 1)) / (2.0 * h);
        worst = worst.max((measured - predicted).abs() / predicted.abs().max(1.0));
    }
    assert!(worst < 1e-5, "energy balance residual {worst:e}");
}
