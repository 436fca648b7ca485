//! Exit-gate suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Tolerances are fixed constants below.

use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speedlimit::bounds::{applicable_bounds, evaluate_bound, evaluate_bound_with, BoundKind, BoundOptions};
use speedlimit::check::{bookkeeping_residual, cross_term_residual, lambda_residual, mc_max_z};
use speedlimit::current::{accumulate_actions, ActionBreakdown};
use speedlimit::langevin::{propagate_moments, GaussianState, MobilityMatrix, MomentTrajectory};
use speedlimit::mc::McConfig;
use speedlimit::ot_grid::{random_pair, verify_closed_form, GridSpec};
use speedlimit::scenarios::{
    figure1_default_grid, figure1_sweep, random_mixed, random_refrigerator, random_rlc, random_state, random_trap,
    RandomCase, RlcScenario, TrapScenario,
};
use speedlimit::wasserstein::{w2_gaussian, w2_weighted};

const STEPS: usize = 10_000;
const TRAP_CASES: usize = 50;
const RLC_CASES: usize = 20;
const MIXED_CASES: usize = 20;
const BOUND_SLACK: f64 = 1e-6;
const OT_PAIRS: usize = 20;
const OT_GAP: f64 = 0.02;
const ENDPOINT_W2: f64 = 0.292_89;
const IDENTITY_TOL: f64 = 1e-6;
const BOOKKEEPING_TOL: f64 = 1e-4;
const REFINE_STEPS: usize = 80;
const REFINE_RATIO: f64 = 4.0;
const ROUNDOFF_FLOOR: f64 = 1e-11;
const SPEED_POINTS: usize = 20;
const SPEED_DELTA: f64 = 1e-3;
const SPEED_TOL: f64 = 1e-3;
const MC_PATHS: usize = 10_000;
const MC_SIGMAS: f64 = 4.0;
const METRIC_TRIPLES: usize = 1000;
const TRIANGLE_TOL: f64 = 1e-9;

struct Run {
    case: RandomCase,
    traj: MomentTrajectory,
    b: ActionBreakdown,
}

fn run_cases(cases: Vec<RandomCase>, steps: usize) -> Vec<Run> {
    cases
        .into_iter()
        .map(|case| {
            let traj = propagate_moments(&case.system, &case.initial, steps).expect("propagate");
            let b = accumulate_actions(&traj).expect("actions");
            Run { case, traj, b }
        })
        .collect()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(n: usize, title: &str, start: Instant, o: Outcome) -> bool {
    println!(
        "criterion {n} [{}] {title}: {} ({:.1} s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.passed
}

fn relative_slack(lhs: f64, rhs: f64, slack: f64) -> f64 {
    slack / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

fn bound_validity(traps: &[Run], rlcs: &[Run]) -> Outcome {
    let mut reports = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for run in traps.iter().chain(rlcs) {
        for kind in applicable_bounds(&run.traj) {
            let r = evaluate_bound(kind, &run.traj, &run.b).expect("bound");
            reports += 1;
            if kind == BoundKind::SpeedRate {
                // Finite-difference probes carry their own tolerance.
                if !r.satisfied {
                    failures.push(format!("{} {kind}", run.case.label));
                }
                continue;
            }
            let mut rel = relative_slack(r.lhs, r.rhs, r.slack);
            if let Some(c) = &r.chain {
                rel = rel.min(relative_slack(c.lhs, c.rhs, c.slack));
            }
            worst = worst.min(rel);
            if rel < -BOUND_SLACK {
                failures.push(format!("{} {kind} relative slack {rel:.2e}", run.case.label));
            }
        }
    }
    Outcome {
        passed: failures.is_empty(),
        detail: format!(
            "{} trap + {} RLC runs, {reports} reports, worst relative slack {worst:.2e}, {} violated {:?}",
            traps.len(),
            rlcs.len(),
            failures.len(),
            failures
        ),
    }
}

fn figure_trend() -> Outcome {
    let grid = figure1_default_grid();
    let rows = figure1_sweep(&TrapScenario::default(), &grid);
    let errors: Vec<_> = rows.iter().filter_map(|r| r.error.clone()).collect();
    let above: Vec<f64> = rows
        .iter()
        .filter(|r| !(r.tau24 <= r.tau_actual && r.tau25 <= r.tau_actual))
        .map(|r| r.gamma_over_m)
        .collect();
    let inverted: Vec<f64> = rows.iter().filter(|r| !(r.tau24 >= r.tau25)).map(|r| r.gamma_over_m).collect();
    let decade = |lo: f64, hi: f64| rows.iter().filter(move |r| r.gamma_over_m >= lo && r.gamma_over_m <= hi);
    let bottom = (1e-2, 1e-1);
    let top = (1e3, 1e4);
    let max_of = |(lo, hi): (f64, f64), f: fn(&speedlimit::scenarios::Fig1Row) -> f64| {
        decade(lo, hi).map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    let min_of = |(lo, hi): (f64, f64), f: fn(&speedlimit::scenarios::Fig1Row) -> f64| {
        decade(lo, hi).map(f).fold(f64::INFINITY, f64::min)
    };
    let trend24 = min_of(top, |r| r.tau24) > max_of(bottom, |r| r.tau24);
    let trend25 = min_of(top, |r| r.tau25) > max_of(bottom, |r| r.tau25);
    let first_inversion = inverted.first().copied().unwrap_or(f64::NAN);
    Outcome {
        passed: errors.is_empty() && above.is_empty() && inverted.is_empty() && trend24 && trend25,
        detail: format!(
            "{} points, {} failed; bounds <= tau violated at {} points; tau24 >= tau25 violated at {} points \
             (first at gamma/m = {first_inversion:.3e}); top-vs-bottom decade trend tau24 {trend24}, tau25 {trend25}; \
             bottom decade tau24/tau25 = {:.4}/{:.4}, top decade = {:.5}/{:.5}",
            rows.len(),
            errors.len(),
            above.len(),
            inverted.len(),
            rows[0].tau24,
            rows[0].tau25,
            rows[rows.len() - 1].tau24,
            rows[rows.len() - 1].tau25,
        ),
    }
}

fn transport() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x07_7a11);
    let one = MobilityMatrix::identity(1);
    let skewed = MobilityMatrix::new(&[0.4, 2.5]).unwrap();
    let g0 = GaussianState::from_slices(&[0.0], &[1.0]).unwrap();
    let g1 = GaussianState::from_slices(&[0.0], &[0.5]).unwrap();
    let endpoint = verify_closed_form(&g0, &g1, &one, &GridSpec::new(1, 200)).unwrap();
    let mut worst1: f64 = 0.0;
    let mut worst2: f64 = 0.0;
    for i in 0..OT_PAIRS {
        let (a, b) = random_pair(&mut rng, 1).unwrap();
        let c = verify_closed_form(&a, &b, &one, &GridSpec::new(1, 200)).unwrap();
        worst1 = worst1.max(c.relative_gap);
        let (a, b) = random_pair(&mut rng, 2).unwrap();
        let m = if i % 2 == 0 { MobilityMatrix::identity(2) } else { skewed.clone() };
        let c = verify_closed_form(&a, &b, &m, &GridSpec::new(2, 40)).unwrap();
        worst2 = worst2.max(c.relative_gap);
    }
    let closed_ok = (endpoint.closed - ENDPOINT_W2).abs() < 5e-6;
    Outcome {
        passed: closed_ok && endpoint.relative_gap <= OT_GAP && worst1 <= OT_GAP && worst2 <= OT_GAP,
        detail: format!(
            "endpoint pair closed {:.5} discrete {:.5} (gap {:.2e}); {OT_PAIRS} random pairs: worst 1D gap {worst1:.2e}, \
             worst 2D gap {worst2:.2e}",
            endpoint.closed, endpoint.discrete, endpoint.relative_gap
        ),
    }
}

fn identities(traps: &[Run], paper: &Run, rlcs: &[Run], mixed: &[Run]) -> Outcome {
    let temp = |r: &Run| r.traj.system.bath().temperature;
    let trap = traps
        .iter()
        .chain(std::iter::once(paper))
        .map(|r| cross_term_residual(&r.b, temp(r)).unwrap())
        .fold(0.0, f64::max);
    let rlc = rlcs.iter().map(|r| cross_term_residual(&r.b, temp(r)).unwrap()).fold(0.0, f64::max);
    let lambda = mixed.iter().map(|r| lambda_residual(&r.b).unwrap()).fold(0.0, f64::max);
    Outcome {
        passed: trap <= IDENTITY_TOL && rlc <= IDENTITY_TOL && lambda <= IDENTITY_TOL,
        detail: format!(
            "max relative residual: kinetic cross term {trap:.2e} ({} runs), capacitor cross term {rlc:.2e} ({} runs), \
             Lambda split {lambda:.2e} ({} mixed runs)",
            traps.len() + 1,
            rlcs.len(),
            mixed.len()
        ),
    }
}

fn bookkeeping<'a>(runs: impl Iterator<Item = &'a Run>) -> Outcome {
    let runs: Vec<&Run> = runs.collect();
    let worst = runs.iter().map(|r| bookkeeping_residual(&r.b).unwrap()).fold(0.0, f64::max);
    let (mut checked, mut min_ratio, mut bad) = (0, f64::INFINITY, Vec::new());
    for r in runs.iter().filter(|r| r.case.label != "paper") {
        let res = |steps: usize| {
            let t = propagate_moments(&r.case.system, &r.case.initial, steps).unwrap();
            bookkeeping_residual(&accumulate_actions(&t).unwrap()).unwrap()
        };
        let (coarse, fine) = (res(REFINE_STEPS), res(2 * REFINE_STEPS));
        if coarse < ROUNDOFF_FLOOR {
            continue;
        }
        checked += 1;
        let ratio = coarse / fine.max(f64::MIN_POSITIVE);
        min_ratio = min_ratio.min(ratio);
        if ratio < REFINE_RATIO {
            bad.push(format!("{} {coarse:.2e}->{fine:.2e}", r.case.label));
        }
    }
    Outcome {
        passed: worst <= BOOKKEEPING_TOL && bad.is_empty() && checked > 0,
        detail: format!(
            "max relative residual {worst:.2e} over {} runs at {STEPS} steps; refinement {REFINE_STEPS}->{} steps on \
             {checked} runs, smallest residual ratio {min_ratio:.1} (second order needs {REFINE_RATIO}) {:?}",
            runs.len(),
            2 * REFINE_STEPS,
            bad
        ),
    }
}

fn speed(paper: &Run) -> Outcome {
    let opts = BoundOptions {
        speed_points: SPEED_POINTS,
        speed_delta_fraction: SPEED_DELTA / paper.traj.horizon(),
        speed_tolerance: SPEED_TOL,
        ..BoundOptions::default()
    };
    let r = evaluate_bound_with(BoundKind::SpeedRate, &paper.traj, &paper.b, &opts).unwrap();
    let ratio = r.rhs / r.lhs;
    Outcome {
        passed: r.satisfied && r.terms["failed_probes"] == 0.0 && r.terms["probes"] == SPEED_POINTS as f64,
        detail: format!(
            "{} probes with delta = {:.0e} s, {} failed; worst speed / sqrt(rate sum) = {ratio:.6} at t = {:.3}",
            r.terms["probes"], r.terms["delta"], r.terms["failed_probes"], r.terms["t"]
        ),
    }
}

fn monte_carlo(paper: &Run, rlc: &Run) -> Outcome {
    let z = |r: &Run| {
        let cfg = McConfig {
            paths: MC_PATHS,
            seed: 0x5eed,
            ..McConfig::default()
        }
        .with_steps(r.traj.horizon(), r.traj.steps());
        mc_max_z(&r.traj, &r.b, &cfg).unwrap()
    };
    let (zt, zr) = (z(paper), z(rlc));
    Outcome {
        passed: zt <= MC_SIGMAS && zr <= MC_SIGMAS,
        detail: format!("{MC_PATHS} paths: max |z| trap {zt:.2}, RLC ramp {zr:.2} (limit {MC_SIGMAS})"),
    }
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA110);
    let (mut asym, mut excess) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..METRIC_TRIPLES {
        let s: Vec<GaussianState> = (0..3).map(|_| random_state(&mut rng, &[1.0, 2.0]).unwrap()).collect();
        let m = MobilityMatrix::new(&[rng.random_range(0.1..10.0), rng.random_range(0.1..10.0)]).unwrap();
        for weighted in [false, true] {
            let d = |a: &GaussianState, b: &GaussianState| {
                if weighted {
                    w2_weighted(a, b, &m).unwrap()
                } else {
                    w2_gaussian(a, b).unwrap()
                }
            };
            for (i, j) in [(0, 1), (1, 2), (0, 2)] {
                asym = asym.max((d(&s[i], &s[j]) - d(&s[j], &s[i])).abs());
            }
            excess = excess.max(d(&s[0], &s[2]) - d(&s[0], &s[1]) - d(&s[1], &s[2]));
        }
    }
    Outcome {
        passed: asym == 0.0 && excess <= TRIANGLE_TOL,
        detail: format!("{METRIC_TRIPLES} triples for W2 and W2,M: max asymmetry {asym:e}, max triangle excess {excess:.2e}"),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    let traps = run_cases((0..TRAP_CASES).map(|_| random_trap(&mut rng).unwrap()).collect(), STEPS);
    let rlcs = run_cases((0..RLC_CASES).map(|_| random_rlc(&mut rng).unwrap()).collect(), STEPS);
    let mixed = run_cases((0..MIXED_CASES).map(|_| random_mixed(&mut rng).unwrap()).collect(), STEPS);
    let fridges = run_cases((0..MIXED_CASES).map(|_| random_refrigerator(&mut rng).unwrap()).collect(), STEPS);
    let paper_sc = TrapScenario::default();
    let paper = {
        let system = paper_sc.system().unwrap();
        let initial = paper_sc.initial.resolve(&system).unwrap();
        run_cases(vec![RandomCase { label: "paper", system, initial }], paper_sc.steps).remove(0)
    };
    let rlc_sc = RlcScenario::default();
    let rlc_ramp = {
        let system = rlc_sc.system().unwrap();
        let initial = rlc_sc.initial.resolve(&system).unwrap();
        run_cases(vec![RandomCase { label: "rlc ramp", system, initial }], rlc_sc.steps).remove(0)
    };
    println!("acceptance: {} runs integrated in {:.1} s", traps.len() + rlcs.len() + 2 * MIXED_CASES + 2, start.elapsed().as_secs_f64());

    let mut all = true;
    let t = Instant::now();
    all &= report(1, "bound validity sweep", t, bound_validity(&traps, &rlcs));
    let t = Instant::now();
    all &= report(2, "transition-time bound trends", t, figure_trend());
    let t = Instant::now();
    all &= report(3, "closed-form W2 vs exact discrete transport", t, transport());
    let t = Instant::now();
    all &= report(4, "cross-term identities", t, identities(&traps, &paper, &rlcs, &mixed));
    let t = Instant::now();
    all &= report(
        5,
        "entropy bookkeeping",
        t,
        bookkeeping(traps.iter().chain(&rlcs).chain(&mixed).chain(&fridges).chain(std::iter::once(&paper))),
    );
    let t = Instant::now();
    all &= report(6, "speed-limit rate", t, speed(&paper));
    let t = Instant::now();
    all &= report(7, "Monte Carlo cross-check", t, monte_carlo(&paper, &rlc_ramp));
    let t = Instant::now();
    all &= report(8, "metric axioms", t, metric_axioms());
    println!("acceptance: {} in {:.1} s", if all { "all criteria pass" } else { "FAILED" }, start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
