//! The quadratic-trap and RLC experiments, the transition-time sweep, and
//! random protocol generators used by the validity sweeps.

use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate_bound, tau_lower_bounds, BoundKind, BoundReport};
use crate::current::{accumulate_actions, ActionBreakdown};
use crate::error::{Error, Result};
use crate::langevin::{
    equilibrium_state, propagate_moments, Bath, ForceProtocol, ForceRegime, GaussianState,
    LinearLangevinSystem, MomentTrajectory,
};
use crate::schedule::{HarmonicTerm, Schedule};

/// Gaussian state written as plain vectors, covariance row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl StateSpec {
    pub fn standard(n: usize) -> Self {
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            cov[i * n + i] = 1.0;
        }
        Self {
            mean: vec![0.0; n],
            cov,
        }
    }

    pub fn to_state(&self) -> Result<GaussianState> {
        GaussianState::from_slices(&self.mean, &self.cov)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    /// Stationary state of the drift frozen at t = 0.
    Equilibrium,
}

/// Starting state: `"equilibrium"` or an explicit `{ mean, cov }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(NamedState),
    Given(StateSpec),
}

impl InitialState {
    pub fn standard(n: usize) -> Self {
        InitialState::Given(StateSpec::standard(n))
    }

    pub fn resolve(&self, system: &LinearLangevinSystem) -> Result<GaussianState> {
        let s = match self {
            InitialState::Named(NamedState::Equilibrium) => equilibrium_state(system, 0.0)?,
            InitialState::Given(spec) => spec.to_state()?,
        };
        if s.dim() != system.dim() {
            return Err(Error::Dimension {
                expected: system.dim(),
                found: s.dim(),
            });
        }
        Ok(s)
    }
}

/// Stiffness `q(t) = 4k_BT/(2−t)² + γ/(2−t)`, evaluated in SI as written.
pub fn trap_protocol_paper(t: f64, friction: f64, kb: f64, temperature: f64) -> Result<f64> {
    if !(t < 2.0) {
        return Err(Error::Domain(t));
    }
    let s = 2.0 - t;
    Ok(4.0 * kb * temperature / (s * s) + friction / s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrapProtocol {
    /// The minimum-entropy stiffness with the scenario's own `γ`, `k_B`, `T`.
    #[default]
    Paper,
    /// Any stiffness schedule, typically tabulated.
    Stiffness { stiffness: Schedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapScenario {
    pub mass: f64,
    pub friction: f64,
    pub temperature: f64,
    pub kb: f64,
    pub horizon: f64,
    pub protocol: TrapProtocol,
    pub initial: InitialState,
    pub steps: usize,
}

impl Default for TrapScenario {
    fn default() -> Self {
        Self {
            mass: 1e-11,
            friction: 1e-10,
            temperature: 295.0,
            kb: Bath::KB_DEFAULT,
            horizon: 1.0,
            protocol: TrapProtocol::Paper,
            initial: InitialState::standard(2),
            steps: 10_000,
        }
    }
}

impl TrapScenario {
    pub fn stiffness(&self) -> Schedule {
        match &self.protocol {
            TrapProtocol::Paper => Schedule::MinEntropyTrap {
                kbt: self.kb * self.temperature,
                friction: self.friction,
            },
            TrapProtocol::Stiffness { stiffness } => stiffness.clone(),
        }
    }

    pub fn system(&self) -> Result<LinearLangevinSystem> {
        LinearLangevinSystem::underdamped(
            self.mass,
            self.friction,
            Bath::new(self.kb, self.temperature)?,
            ForceProtocol::trap(self.stiffness()),
            self.horizon,
            ForceRegime::Even,
        )
    }

    pub fn run(&self) -> Result<(MomentTrajectory, ActionBreakdown)> {
        let system = self.system()?;
        let traj = propagate_moments(&system, &self.initial.resolve(&system)?, self.steps)?;
        let breakdown = accumulate_actions(&traj)?;
        Ok((traj, breakdown))
    }

    pub fn with_gamma_over_m(&self, ratio: f64) -> Self {
        Self {
            friction: ratio * self.mass,
            ..self.clone()
        }
    }
}

/// Default sweep grid: 40 log-spaced values of `γ/m` on `[10⁻², 10⁴]` s⁻¹.
pub fn figure1_default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone)]
pub struct Fig1Row {
    pub gamma_over_m: f64,
    pub tau24: f64,
    pub tau25: f64,
    pub tau_actual: f64,
    pub steps: usize,
    pub breakdown: Option<ActionBreakdown>,
    pub error: Option<String>,
}

/// Grid steps used at friction ratio `γ/m`: at least the scenario's own
/// count, and enough that `h·γ/m ≤ 0.1`.
pub fn sweep_steps(base: usize, gamma_over_m: f64, horizon: f64) -> usize {
    base.max((10.0 * gamma_over_m * horizon).ceil() as usize)
}

fn sweep_point(scenario: &TrapScenario, ratio: f64) -> Fig1Row {
    let mut row = Fig1Row {
        gamma_over_m: ratio,
        tau24: f64::NAN,
        tau25: f64::NAN,
        tau_actual: scenario.horizon,
        steps: sweep_steps(scenario.steps, ratio, scenario.horizon),
        breakdown: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!("γ/m must be positive, got {ratio}")));
        }
        let mut point = scenario.with_gamma_over_m(ratio);
        point.steps = row.steps;
        let (traj, b) = point.run()?;
        let t = tau_lower_bounds(&traj, &b)?;
        row.tau24 = t.tau24;
        row.tau25 = t.tau25;
        row.breakdown = Some(b);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs each grid point independently; failures are recorded in-row.
pub fn figure1_sweep(scenario: &TrapScenario, grid: &[f64]) -> Vec<Fig1Row> {
    grid.par_iter().map(|&g| sweep_point(scenario, g)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlcScenario {
    pub resistance: f64,
    pub capacitance: f64,
    pub temperature: f64,
    pub kb: f64,
    pub inductance: Schedule,
    pub horizon: f64,
    /// Starting state over `(φ, q)`.
    pub initial: InitialState,
    pub steps: usize,
}

impl Default for RlcScenario {
    fn default() -> Self {
        let horizon = 1e-5;
        Self {
            resistance: 1e3,
            capacitance: 1e-9,
            temperature: 295.0,
            kb: Bath::KB_DEFAULT,
            inductance: Schedule::Linear {
                start: 1e-3,
                end: 2e-3,
                horizon,
            },
            horizon,
            initial: InitialState::Named(NamedState::Equilibrium),
            steps: 10_000,
        }
    }
}

impl RlcScenario {
    pub fn system(&self) -> Result<LinearLangevinSystem> {
        LinearLangevinSystem::rlc(
            self.resistance,
            self.capacitance,
            self.inductance.clone(),
            Bath::new(self.kb, self.temperature)?,
            self.horizon,
        )
    }
}

#[derive(Debug, Clone)]
pub struct RlcRun {
    pub trajectory: MomentTrajectory,
    pub breakdown: ActionBreakdown,
    pub report: BoundReport,
}

pub fn rlc_experiment(scenario: &RlcScenario) -> Result<RlcRun> {
    let system = scenario.system()?;
    let initial = scenario.initial.resolve(&system)?;
    let trajectory = propagate_moments(&system, &initial, scenario.steps)?;
    let breakdown = accumulate_actions(&trajectory)?;
    let report = evaluate_bound(BoundKind::RlcCec, &trajectory, &breakdown)?;
    Ok(RlcRun {
        trajectory,
        breakdown,
        report,
    })
}

/// A randomly drawn system with its starting state.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub label: &'static str,
    pub system: LinearLangevinSystem,
    pub initial: GaussianState,
}

/// Smooth bounded modulation `base·(1 + Σ aᵢ sin(2πfᵢt + φᵢ))` with
/// `Σ|aᵢ| ≤ 0.45`.
pub fn random_harmonic<R: Rng + ?Sized>(rng: &mut R, base: f64, horizon: f64) -> Schedule {
    let count = rng.random_range(1..=3);
    let budget = rng.random_range(0.0..0.45);
    let weights: Vec<f64> = (0..count).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let terms = weights
        .iter()
        .map(|w| HarmonicTerm {
            amplitude: budget * w / total * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            frequency: rng.random_range(0.2..2.0) / horizon,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect();
    Schedule::Harmonic { base, terms }
}

/// Random SPD state with per-coordinate scales `scale`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, scale: &[f64]) -> Result<GaussianState> {
    let n = scale.len();
    let mean: Vec<f64> = scale.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = if i == j {
                rng.random_range(0.4..1.5)
            } else {
                rng.random_range(-0.8..0.8)
            };
        }
    }
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
            cov[i * n + j] = s * scale[i] * scale[j];
        }
    }
    GaussianState::from_slices(&mean, &cov)
}

fn random_particle<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64, Bath, f64) {
    let mass = rng.random_range(0.5..2.0);
    let friction = rng.random_range(0.3..3.0);
    let bath = Bath::new(1.0, rng.random_range(0.5..2.0)).expect("positive bath");
    let horizon = rng.random_range(0.5..2.0);
    (mass, friction, bath, horizon)
}

fn particle_state<R: Rng + ?Sized>(rng: &mut R, mass: f64, bath: Bath) -> Result<GaussianState> {
    random_state(rng, &[1.0, (bath.kbt() / mass).sqrt()])
}

/// Position-dependent force only (`F_irr = 0`), declared even.
pub fn random_trap<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomCase> {
    let (mass, friction, bath, horizon) = random_particle(rng);
    let base = rng.random_range(0.5..4.0);
    let force = ForceProtocol {
        stiffness: random_harmonic(rng, base, horizon),
        feedback_friction: Schedule::ZERO,
        offset: {
            let f0 = rng.random_range(-0.5..0.5);
            random_harmonic(rng, f0, horizon)
        },
    };
    Ok(RandomCase {
        label: "trap",
        system: LinearLangevinSystem::underdamped(mass, friction, bath, force, horizon, ForceRegime::Even)?,
        initial: particle_state(rng, mass, bath)?,
    })
}

/// Pure velocity feedback (`F_rev = 0`), declared odd.
pub fn random_refrigerator<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomCase> {
    let (mass, friction, bath, horizon) = random_particle(rng);
    let base = rng.random_range(0.2..2.0);
    let force = ForceProtocol {
        stiffness: Schedule::ZERO,
        feedback_friction: random_harmonic(rng, base, horizon),
        offset: Schedule::ZERO,
    };
    Ok(RandomCase {
        label: "refrigerator",
        system: LinearLangevinSystem::underdamped(mass, friction, bath, force, horizon, ForceRegime::Odd)?,
        initial: particle_state(rng, mass, bath)?,
    })
}

/// Trap plus velocity feedback; no regime declared.
pub fn random_mixed<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomCase> {
    let (mass, friction, bath, horizon) = random_particle(rng);
    let (kx, kv) = (rng.random_range(0.5..4.0), rng.random_range(0.2..2.0));
    let force = ForceProtocol {
        stiffness: random_harmonic(rng, kx, horizon),
        feedback_friction: random_harmonic(rng, kv, horizon),
        offset: {
            let f0 = rng.random_range(-0.5..0.5);
            random_harmonic(rng, f0, horizon)
        },
    };
    Ok(RandomCase {
        label: "mixed",
        system: LinearLangevinSystem::underdamped(
            mass,
            friction,
            bath,
            force,
            horizon,
            ForceRegime::Unspecified,
        )?,
        initial: particle_state(rng, mass, bath)?,
    })
}

/// RLC circuit with a modulated inductance, in reduced units.
pub fn random_rlc<R: Rng + ?Sized>(rng: &mut R) -> Result<RandomCase> {
    let resistance = rng.random_range(0.5..2.0);
    let capacitance = rng.random_range(0.5..2.0);
    let bath = Bath::new(1.0, rng.random_range(0.5..2.0))?;
    let horizon = rng.random_range(0.5..3.0);
    let l0 = rng.random_range(0.5..2.0);
    let inductance = random_harmonic(rng, l0, horizon);
    let kbt = bath.kbt();
    let system = LinearLangevinSystem::rlc(resistance, capacitance, inductance, bath, horizon)?;
    let initial = random_state(rng, &[(kbt * l0).sqrt(), (kbt * capacitance).sqrt()])?;
    Ok(RandomCase {
        label: "rlc",
        system,
        initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn paper_protocol_values() {
        let (kb, t) = (1.38e-23, 295.0);
        let q0 = trap_protocol_paper(0.0, 1e-8, kb, t).unwrap();
        assert!((q0 - (kb * t + 0.5e-8)).abs() < 1e-22);
        let q1 = trap_protocol_paper(1.0, 1e-8, kb, t).unwrap();
        assert!((q1 - (4.0 * kb * t + 1e-8)).abs() < 1e-22);
        assert!((4.0 * kb * t - 1.6284e-20).abs() < 1e-23);
        assert!(matches!(trap_protocol_paper(2.0, 1e-8, kb, t), Err(Error::Domain(_))));
    }

    #[test]
    fn long_horizon_rejected() {
        let s = TrapScenario {
            horizon: 2.0,
            ..TrapScenario::default()
        };
        assert!(s.system().is_err());
    }

    #[test]
    fn grid_shape() {
        let g = figure1_default_grid();
        assert_eq!(g.len(), 40);
        assert!((g[0] - 1e-2).abs() < 1e-15 && (g[39] - 1e4).abs() < 1e-8);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stationary_rlc() {
        let s = RlcScenario {
            inductance: Schedule::constant(1e-3),
            steps: 2000,
            ..RlcScenario::default()
        };
        let run = rlc_experiment(&s).unwrap();
        let b = &run.breakdown;
        assert!(b.sigma_sys.abs() < 1e-30);
        assert!(b.sigma.abs() < 1e-6 * b.kb);
        assert!(run.report.terms["W2_N_sq"] == 0.0);
        assert!(run.report.satisfied);
        let kbt = s.kb * s.temperature;
        let expected = s.horizon * kbt / 1e-3;
        assert!((run.report.lhs - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn random_cases_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            for case in [
                random_trap(&mut rng).unwrap(),
                random_refrigerator(&mut rng).unwrap(),
                random_mixed(&mut rng).unwrap(),
                random_rlc(&mut rng).unwrap(),
            ] {
                assert_eq!(case.initial.dim(), 2);
                propagate_moments(&case.system, &case.initial, 200).unwrap();
            }
        }
    }
}
