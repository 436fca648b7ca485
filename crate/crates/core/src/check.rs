//! Invariant suite driven by `speedlimit check`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{applicable_bounds, evaluate_bound_with, BoundKind, BoundOptions};
use crate::config::RunConfig;
use crate::current::{accumulate_actions, ActionBreakdown};
use crate::error::Result;
use crate::langevin::{propagate_moments, GaussianState, MobilityMatrix, MomentTrajectory};
use crate::mc::{empirical_moments, estimate_quadratic_integrals, simulate_paths, McConfig};
use crate::ot_grid::{random_pair, verify_closed_form, GridSpec};
use crate::scenarios::{random_mixed, random_refrigerator, random_rlc, random_state, random_trap, RandomCase, RlcScenario};
use crate::wasserstein::{w2_gaussian, w2_weighted};

/// Relative size of `residual` against the largest contributing term.
fn relative(residual: f64, terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if scale > 0.0 {
        residual.abs() / scale
    } else {
        residual.abs()
    }
}

/// `|Φ + 2(ΔE/T + Σ_env)|` relative to its terms; an identity when the
/// force is even (`F_irr = 0`) and for the RLC circuit.
pub fn cross_term_residual(b: &ActionBreakdown, temperature: f64) -> Result<f64> {
    let p = b.physical()?;
    let e = 2.0 * p.delta_energy / temperature;
    let s = 2.0 * b.sigma_env;
    Ok(relative(b.phi + e + s, &[b.phi, e, s]))
}

/// `|Λ₁ + Λ₂ + Λ₃ − Φ|` relative to its terms (underdamped only).
pub fn lambda_residual(b: &ActionBreakdown) -> Result<f64> {
    let l = b
        .physical()?
        .lambda
        .ok_or_else(|| crate::Error::Applicability("Λ decomposition needs an underdamped system".into()))?;
    Ok(relative(l[0] + l[1] + l[2] - b.phi, &[l[0], l[1], l[2], b.phi]))
}

/// `|Σ − (Σ_sys + Σ_res + Σ_pu)| / |Σ|`.
pub fn bookkeeping_residual(b: &ActionBreakdown) -> Result<f64> {
    let p = b.physical()?;
    let r = b.sigma - (b.sigma_sys + p.sigma_res + p.sigma_pu);
    Ok(relative(r, &[b.sigma]))
}

/// Largest z-score between Monte Carlo and the moment equations over the
/// terminal mean and covariance, the midpoint covariance, and the
/// quadratic integrals.
pub fn mc_max_z(traj: &MomentTrajectory, b: &ActionBreakdown, cfg: &McConfig) -> Result<f64> {
    let out = simulate_paths(&traj.system, traj.initial(), cfg)?;
    let m = empirical_moments(&out);
    let ints = estimate_quadratic_integrals(&out);
    let stride = out.steps / traj.steps();
    debug_assert_eq!(stride * traj.steps(), out.steps);
    let z = |v: f64, se: f64, r: f64| if se > 0.0 { (v - r).abs() / se } else if v == r { 0.0 } else { f64::INFINITY };
    let mut worst = 0.0f64;
    let n = traj.system.dim();
    let last = m.times.len() - 1;
    for rec in [last / 2, last] {
        let k = rec * cfg.record_every / stride;
        let st = &traj.states[k];
        for i in 0..n {
            if rec == last {
                worst = worst.max(z(m.mean[rec][i], m.mean_se[rec][i], st.mean[i]));
            }
            for j in i..n {
                worst = worst.max(z(m.cov[rec][(i, j)], m.cov_se[rec][(i, j)], st.cov[(i, j)]));
            }
        }
    }
    let p = b.physical()?;
    worst = worst.max(ints.kinetic.z_score(p.kinetic_integral));
    if let Some(ce) = ints.control_effort {
        worst = worst.max(ce.z_score(p.control_effort));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(suite: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome { suite, passed, detail },
        Err(e) => CheckOutcome {
            suite,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_cases(count: usize, seed: u64) -> Result<Vec<RandomCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for _ in 0..count {
        cases.push(random_trap(&mut rng)?);
        cases.push(random_refrigerator(&mut rng)?);
        cases.push(random_mixed(&mut rng)?);
        cases.push(random_rlc(&mut rng)?);
    }
    Ok(cases)
}

const CASE_SEED: u64 = 0xC0FFEE;

/// Runs every suite. Random systems use a fixed seed; the configured seed
/// drives only the Monte Carlo streams.
pub fn run_check(cfg: &RunConfig) -> Vec<CheckOutcome> {
    let c = &cfg.check;
    let steps = 10_000;
    let runs: Result<Vec<(RandomCase, MomentTrajectory, ActionBreakdown)>> = random_cases(c.random_cases, CASE_SEED)
        .and_then(|cases| {
            cases
                .into_iter()
                .map(|case| {
                    let traj = propagate_moments(&case.system, &case.initial, steps)?;
                    let b = accumulate_actions(&traj)?;
                    Ok((case, traj, b))
                })
                .collect()
        });
    let paper = cfg.trap.run();
    let mut out = Vec::new();

    out.push(outcome(
        "bound validity",
        runs.as_ref().map_err(Clone::clone).and_then(|runs| {
            let opts = BoundOptions {
                tolerance: cfg.bounds.tolerance,
                ..BoundOptions::default()
            };
            let mut failures = Vec::new();
            let mut total = 0;
            for (case, traj, b) in runs {
                for kind in applicable_bounds(traj) {
                    total += 1;
                    let r = evaluate_bound_with(kind, traj, b, &opts)?;
                    if !r.satisfied {
                        failures.push(format!("{} {kind} slack {:e}", case.label, r.slack));
                    }
                }
            }
            Ok((failures.is_empty(), format!("{total} reports, {} violated {:?}", failures.len(), failures)))
        }),
    ));

    out.push(outcome(
        "cross-term identity",
        runs.as_ref().map_err(Clone::clone).and_then(|runs| {
            let mut worst = 0.0f64;
            for (_, traj, b) in runs.iter().filter(|r| r.0.label == "trap" || r.0.label == "rlc") {
                worst = worst.max(cross_term_residual(b, traj.system.bath().temperature)?);
            }
            Ok((worst <= c.tolerance, format!("max relative residual {worst:.3e} (tolerance {:e})", c.tolerance)))
        }),
    ));

    out.push(outcome(
        "Λ decomposition",
        runs.as_ref().map_err(Clone::clone).and_then(|runs| {
            let mut worst = 0.0f64;
            for (_, _, b) in runs.iter().filter(|r| r.0.label == "mixed") {
                worst = worst.max(lambda_residual(b)?);
            }
            Ok((worst <= c.tolerance, format!("max relative residual {worst:.3e} (tolerance {:e})", c.tolerance)))
        }),
    ));

    out.push(outcome(
        "entropy bookkeeping",
        runs.as_ref().map_err(Clone::clone).and_then(|runs| {
            let mut worst = 0.0f64;
            for (_, _, b) in runs {
                worst = worst.max(bookkeeping_residual(b)?);
            }
            if let Ok((_, b)) = &paper {
                worst = worst.max(bookkeeping_residual(b)?);
            }
            Ok((
                worst <= c.bookkeeping_tolerance,
                format!("max relative residual {worst:.3e} (tolerance {:e})", c.bookkeeping_tolerance),
            ))
        }),
    ));

    out.push(outcome(
        "speed rate",
        paper.as_ref().map_err(Clone::clone).and_then(|(traj, b)| {
            let r = evaluate_bound_with(BoundKind::SpeedRate, traj, b, &BoundOptions::default())?;
            Ok((
                r.satisfied,
                format!("worst probe slack {:e}, {} failed of {}", r.slack, r.terms["failed_probes"], r.terms["probes"]),
            ))
        }),
    ));

    out.push(outcome(
        "monte carlo",
        (|| -> Result<(bool, String)> {
            let (traj, b) = paper.as_ref().map_err(Clone::clone)?;
            let mc = McConfig {
                paths: c.mc_paths,
                seed: cfg.seed,
                ..McConfig::default()
            }
            .with_steps(traj.horizon(), traj.steps());
            let z_trap = mc_max_z(traj, b, &mc)?;
            let rlc = RlcScenario::default();
            let system = rlc.system()?;
            let rtraj = propagate_moments(&system, &rlc.initial.resolve(&system)?, rlc.steps)?;
            let rb = accumulate_actions(&rtraj)?;
            let z_rlc = mc_max_z(&rtraj, &rb, &mc.clone().with_steps(rtraj.horizon(), rtraj.steps()))?;
            Ok((
                z_trap < 4.0 && z_rlc < 4.0,
                format!("max z-score trap {z_trap:.2}, rlc {z_rlc:.2} ({} paths, seed {})", c.mc_paths, cfg.seed),
            ))
        })(),
    ));

    out.push(outcome(
        "optimal transport",
        (|| -> Result<(bool, String)> {
            let mut rng = ChaCha8Rng::seed_from_u64(CASE_SEED + 1);
            let one = MobilityMatrix::identity(1);
            let g = |m: f64, v: f64| GaussianState::from_slices(&[m], &[v]);
            let mut worst = verify_closed_form(&g(0.0, 1.0)?, &g(0.0, 0.5)?, &one, &GridSpec::new(1, 200))?.relative_gap;
            let weighted = MobilityMatrix::new(&[1.0, 2.5])?;
            for _ in 0..c.ot_pairs {
                let (a, b) = random_pair(&mut rng, 1)?;
                worst = worst.max(verify_closed_form(&a, &b, &one, &GridSpec::new(1, 200))?.relative_gap);
            }
            for _ in 0..c.ot_pairs.div_ceil(2) {
                let (a, b) = random_pair(&mut rng, 2)?;
                worst = worst.max(verify_closed_form(&a, &b, &weighted, &GridSpec::new(2, 40))?.relative_gap);
            }
            Ok((worst <= crate::ot_grid::PASS_GAP, format!("max relative gap {worst:.3e}")))
        })(),
    ));

    out.push(outcome(
        "metric axioms",
        (|| -> Result<(bool, String)> {
            let mut rng = ChaCha8Rng::seed_from_u64(CASE_SEED + 2);
            let m = MobilityMatrix::new(&[0.5, 3.0])?;
            let (mut asym, mut tri) = (0.0f64, f64::NEG_INFINITY);
            for _ in 0..c.metric_triples {
                let s: Vec<GaussianState> = (0..3).map(|_| random_state(&mut rng, &[1.0, 1.0])).collect::<Result<_>>()?;
                for d in [
                    &|a: &GaussianState, b: &GaussianState| w2_gaussian(a, b) as Result<f64>,
                    &|a: &GaussianState, b: &GaussianState| w2_weighted(a, b, &m),
                ] as [&dyn Fn(&GaussianState, &GaussianState) -> Result<f64>; 2]
                {
                    let (ab, bc, ac) = (d(&s[0], &s[1])?, d(&s[1], &s[2])?, d(&s[0], &s[2])?);
                    asym = asym.max((ab - d(&s[1], &s[0])?).abs());
                    tri = tri.max(ac - ab - bc);
                }
            }
            Ok((asym == 0.0 && tri <= 1e-9, format!("max asymmetry {asym:e}, max triangle excess {tri:e}")))
        })(),
    ));
    out
}
