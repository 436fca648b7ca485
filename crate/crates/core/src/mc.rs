//! Euler–Maruyama simulation of the linear SDE, used to cross-check the
//! moment equations and the quadratic integrals.
//!
//! Each path draws from its own ChaCha8 stream keyed by `(seed, path)`.
//! Paths are grouped into contiguous blocks that are summed in path order,
//! so every estimate is independent of the thread count. Standard errors
//! come from a delete-one-block jackknife.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langevin::{Family, GaussianState, LinearLangevinSystem, MAX_DIM};
use crate::linalg::sym_sqrt;

pub const MIN_PATHS: usize = 1000;
const MAX_BLOCKS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub paths: usize,
    /// Time step; must divide the horizon into a whole number of steps.
    pub dt: f64,
    pub seed: u64,
    /// Moments are recorded every this many steps.
    pub record_every: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 10_000,
            dt: 1e-4,
            seed: 0x5eed,
            record_every: 100,
        }
    }
}

impl McConfig {
    /// Same settings with `dt = horizon / steps`.
    pub fn with_steps(mut self, horizon: f64, steps: usize) -> Self {
        self.dt = horizon / steps as f64;
        self
    }

    /// Number of Euler steps on `[0, horizon]`.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        if self.paths < MIN_PATHS {
            return Err(Error::InvalidMonteCarlo(format!(
                "need at least {MIN_PATHS} paths, got {}",
                self.paths
            )));
        }
        if !(self.dt > 0.0 && self.dt <= horizon / 100.0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidMonteCarlo(format!(
                "dt = {:e} must lie in (0, τ/100] with τ = {horizon:e}",
                self.dt
            )));
        }
        let steps = (horizon / self.dt).round() as usize;
        if ((steps as f64) * self.dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidMonteCarlo(format!(
                "dt = {:e} does not divide τ = {horizon:e}",
                self.dt
            )));
        }
        if self.record_every == 0 || steps % self.record_every != 0 {
            return Err(Error::InvalidMonteCarlo(format!(
                "record_every = {} must divide the {steps} steps",
                self.record_every
            )));
        }
        Ok(steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value − reference|` in units of the standard error; zero error
    /// demands exact agreement up to round-off.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.value - reference).abs();
        if self.se > 0.0 {
            diff / self.se
        } else if diff <= 1e-12 * reference.abs().max(self.value.abs()) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Per-block sums at one recorded time.
#[derive(Debug, Clone)]
struct BlockSums {
    paths: usize,
    /// For each record: `Σz` (n entries) then `Σz_i z_j` (n² entries).
    moments: Vec<f64>,
    kinetic: f64,
    effort: f64,
}

/// Raw output of [`simulate_paths`].
#[derive(Debug, Clone)]
pub struct PathsOutput {
    pub times: Vec<f64>,
    pub dim: usize,
    pub paths: usize,
    pub steps: usize,
    pub dt: f64,
    blocks: Vec<BlockSums>,
    has_effort: bool,
}

/// Empirical moments with jackknife standard errors at each recorded time.
#[derive(Debug, Clone)]
pub struct McMoments {
    pub times: Vec<f64>,
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
    pub mean_se: Vec<DVector<f64>>,
    pub cov_se: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McIntegrals {
    /// `∫⟨z₁²⟩ dt`: `∫⟨v²⟩` for the particle, `∫⟨q²⟩` for the circuit.
    pub kinetic: Estimate,
    /// `∫⟨F²⟩` or `∫⟨φ²/L²⟩`; absent for custom systems.
    pub control_effort: Option<Estimate>,
}

type Vec4 = [f64; MAX_DIM];

/// Drift and force coefficients sampled on the Euler grid.
struct Tables {
    n: usize,
    a: Vec<[Vec4; MAX_DIM]>,
    c: Vec<Vec4>,
    /// Effort integrand `(g·z + h)²`, stored as `(g, h)`.
    effort: Option<Vec<(Vec4, f64)>>,
    noise: [Vec4; MAX_DIM],
    noise_cols: Vec<usize>,
}

fn tables(system: &LinearLangevinSystem, steps: usize, dt: f64) -> Result<Tables> {
    let n = system.dim();
    let mut a = Vec::with_capacity(steps + 1);
    let mut c = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let (am, cv) = system.drift(k as f64 * dt);
        let mut row = [[0.0; MAX_DIM]; MAX_DIM];
        let mut cc = [0.0; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                row[i][j] = am[(i, j)];
            }
            cc[i] = cv[i];
        }
        a.push(row);
        c.push(cc);
    }
    let effort = match system.family() {
        Family::Underdamped(p) => Some(
            (0..=steps)
                .map(|k| {
                    let (kx, kv, f0) = p.force.coefficients(k as f64 * dt);
                    ([kx, kv, 0.0, 0.0], f0)
                })
                .collect(),
        ),
        Family::Rlc(p) => Some(
            (0..=steps)
                .map(|k| ([1.0 / p.inductance.eval(k as f64 * dt), 0.0, 0.0, 0.0], 0.0))
                .collect(),
        ),
        Family::Custom(_) => None,
    };
    let root = sym_sqrt(&(system.diffusion().matrix() * 2.0))?.root;
    let mut noise = [[0.0; MAX_DIM]; MAX_DIM];
    let mut noise_cols = Vec::new();
    for j in 0..n {
        let mut used = false;
        for i in 0..n {
            noise[i][j] = root[(i, j)];
            used |= root[(i, j)] != 0.0;
        }
        if used {
            noise_cols.push(j);
        }
    }
    Ok(Tables {
        n,
        a,
        c,
        effort,
        noise,
        noise_cols,
    })
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn effort_value(t: &Tables, k: usize, z: &Vec4) -> f64 {
    match &t.effort {
        Some(e) => {
            let (g, h) = &e[k];
            let s: f64 = (0..t.n).map(|i| g[i] * z[i]).sum::<f64>() + h;
            s * s
        }
        None => 0.0,
    }
}

/// Simulates one path from `z0`; returns the state at every Euler step.
pub fn simulate_path(
    system: &LinearLangevinSystem,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
    path: usize,
) -> Result<Vec<DVector<f64>>> {
    let t = tables(system, steps, dt)?;
    let mut rng = path_rng(seed, path);
    let mut z = [0.0; MAX_DIM];
    z[..t.n].copy_from_slice(z0.as_slice());
    let mut out = vec![DVector::from_column_slice(&z[..t.n])];
    for k in 0..steps {
        euler_step(&t, k, dt, &mut z, &mut rng);
        out.push(DVector::from_column_slice(&z[..t.n]));
    }
    Ok(out)
}

#[inline]
fn euler_step(t: &Tables, k: usize, dt: f64, z: &mut Vec4, rng: &mut ChaCha8Rng) {
    let n = t.n;
    let sq = dt.sqrt();
    let mut xi = [0.0; MAX_DIM];
    for &j in &t.noise_cols {
        xi[j] = rng.sample::<f64, _>(StandardNormal) * sq;
    }
    let (a, c) = (&t.a[k], &t.c[k]);
    let mut next = [0.0; MAX_DIM];
    for i in 0..n {
        let mut drift = c[i];
        let mut kick = 0.0;
        for j in 0..n {
            drift += a[i][j] * z[j];
            kick += t.noise[i][j] * xi[j];
        }
        next[i] = z[i] + drift * dt + kick;
    }
    *z = next;
}

fn simulate_block(
    t: &Tables,
    initial_chol: &DMatrix<f64>,
    initial_mean: &DVector<f64>,
    range: std::ops::Range<usize>,
    seed: u64,
    steps: usize,
    dt: f64,
    record_every: usize,
) -> BlockSums {
    let n = t.n;
    let records = steps / record_every + 1;
    let stride = n + n * n;
    let mut moments = vec![0.0; records * stride];
    let (mut kinetic, mut effort) = (0.0, 0.0);
    let paths = range.len();
    for p in range {
        let mut rng = path_rng(seed, p);
        let mut z = [0.0; MAX_DIM];
        let mut e = [0.0; MAX_DIM];
        for ei in e.iter_mut().take(n) {
            *ei = rng.sample(StandardNormal);
        }
        for i in 0..n {
            z[i] = initial_mean[i] + (0..=i).map(|j| initial_chol[(i, j)] * e[j]).sum::<f64>();
        }
        let kin_at = |z: &Vec4| if n > 1 { z[1] * z[1] } else { 0.0 };
        let mut kin = 0.5 * kin_at(&z);
        let mut eff = 0.5 * effort_value(t, 0, &z);
        for k in 0..=steps {
            if k % record_every == 0 {
                let base = (k / record_every) * stride;
                for i in 0..n {
                    moments[base + i] += z[i];
                    for j in 0..n {
                        moments[base + n + i * n + j] += z[i] * z[j];
                    }
                }
            }
            if k == steps {
                break;
            }
            euler_step(t, k, dt, &mut z, &mut rng);
            let w = if k + 1 == steps { 0.5 } else { 1.0 };
            kin += w * kin_at(&z);
            eff += w * effort_value(t, k + 1, &z);
        }
        kinetic += kin * dt;
        effort += eff * dt;
    }
    BlockSums {
        paths,
        moments,
        kinetic,
        effort,
    }
}

/// Runs `config.paths` Euler–Maruyama paths from samples of `initial`.
pub fn simulate_paths(
    system: &LinearLangevinSystem,
    initial: &GaussianState,
    config: &McConfig,
) -> Result<PathsOutput> {
    let horizon = system.horizon();
    let steps = config.steps(horizon)?;
    if initial.dim() != system.dim() {
        return Err(Error::Dimension {
            expected: system.dim(),
            found: initial.dim(),
        });
    }
    let dt = horizon / steps as f64;
    let t = tables(system, steps, dt)?;
    let chol = initial
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("initial covariance".into()))?
        .l();
    let blocks_n = MAX_BLOCKS.min(config.paths);
    let ranges: Vec<_> = (0..blocks_n)
        .map(|b| (b * config.paths / blocks_n)..((b + 1) * config.paths / blocks_n))
        .collect();
    let blocks = ranges
        .into_par_iter()
        .map(|r| simulate_block(&t, &chol, &initial.mean, r, config.seed, steps, dt, config.record_every))
        .collect();
    let times = (0..=steps / config.record_every)
        .map(|r| (r * config.record_every) as f64 * dt)
        .collect();
    Ok(PathsOutput {
        times,
        dim: t.n,
        paths: config.paths,
        steps,
        dt,
        blocks,
        has_effort: t.effort.is_some(),
    })
}

/// Delete-one-block jackknife of `stat`, which maps summed block data and
/// the path count to an estimate.
fn jackknife<F>(blocks: &[BlockSums], len: usize, extract: impl Fn(&BlockSums) -> Vec<f64>, stat: F) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&[f64], usize) -> Vec<f64>,
{
    let parts: Vec<Vec<f64>> = blocks.iter().map(extract).collect();
    let mut total = vec![0.0; len];
    let mut count = 0;
    for (p, b) in parts.iter().zip(blocks) {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
        count += b.paths;
    }
    let full = stat(&total, count);
    let nb = blocks.len() as f64;
    let leave: Vec<Vec<f64>> = parts
        .iter()
        .zip(blocks)
        .map(|(p, b)| {
            let rest: Vec<f64> = total.iter().zip(p).map(|(t, v)| t - v).collect();
            stat(&rest, count - b.paths)
        })
        .collect();
    let m = full.len();
    let se = (0..m)
        .map(|i| {
            let mean = leave.iter().map(|l| l[i]).sum::<f64>() / nb;
            let var = leave.iter().map(|l| (l[i] - mean).powi(2)).sum::<f64>() * (nb - 1.0) / nb;
            var.sqrt()
        })
        .collect();
    (full, se)
}

fn moment_stat(n: usize) -> impl Fn(&[f64], usize) -> Vec<f64> {
    move |s: &[f64], count: usize| {
        let c = count as f64;
        let mean: Vec<f64> = (0..n).map(|i| s[i] / c).collect();
        let mut out = mean.clone();
        for i in 0..n {
            for j in 0..n {
                let raw = s[n + i * n + j];
                out.push((raw - c * mean[i] * mean[j]) / (c - 1.0));
            }
        }
        out
    }
}

pub fn empirical_moments(out: &PathsOutput) -> McMoments {
    let n = out.dim;
    let stride = n + n * n;
    let mut m = McMoments {
        times: out.times.clone(),
        mean: Vec::new(),
        cov: Vec::new(),
        mean_se: Vec::new(),
        cov_se: Vec::new(),
    };
    for r in 0..out.times.len() {
        let (est, se) = jackknife(
            &out.blocks,
            stride,
            |b| b.moments[r * stride..(r + 1) * stride].to_vec(),
            moment_stat(n),
        );
        m.mean.push(DVector::from_column_slice(&est[..n]));
        m.mean_se.push(DVector::from_column_slice(&se[..n]));
        m.cov.push(DMatrix::from_row_slice(n, n, &est[n..]));
        m.cov_se.push(DMatrix::from_row_slice(n, n, &se[n..]));
    }
    m
}

pub fn estimate_quadratic_integrals(out: &PathsOutput) -> McIntegrals {
    let (est, se) = jackknife(
        &out.blocks,
        2,
        |b| vec![b.kinetic, b.effort],
        |s, c| s.iter().map(|v| v / c as f64).collect(),
    );
    McIntegrals {
        kinetic: Estimate {
            value: est[0],
            se: se[0],
        },
        control_effort: out.has_effort.then_some(Estimate {
            value: est[1],
            se: se[1],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langevin::{equilibrium_state, Bath, CustomDrift, DiffusionMatrix, ForceProtocol, ForceRegime, MobilityMatrix, ParitySignature};
    use crate::schedule::Schedule;

    fn ballistic() -> LinearLangevinSystem {
        let s = |v: f64| Schedule::constant(v);
        LinearLangevinSystem::custom(
            CustomDrift {
                a: vec![vec![s(0.0), s(1.0)], vec![s(0.0), s(0.0)]],
                c: vec![s(0.0), s(0.0)],
            },
            DiffusionMatrix::diagonal(&[0.0, 0.0]).unwrap(),
            ParitySignature::underdamped(),
            MobilityMatrix::identity(2),
            Bath::new(1.0, 1.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn ballistic_paths_are_exact() {
        let z0 = DVector::from_column_slice(&[0.3, -1.7]);
        let path = simulate_path(&ballistic(), &z0, 0.01, 100, 1, 0).unwrap();
        for (k, z) in path.iter().enumerate() {
            let t = k as f64 * 0.01;
            assert!((z[0] - (0.3 - 1.7 * t)).abs() < 1e-12);
            assert_eq!(z[1], -1.7);
        }
    }

    #[test]
    fn config_guards() {
        let base = McConfig::default();
        assert!(McConfig { paths: 999, ..base.clone() }.steps(1.0).is_err());
        assert!(McConfig { dt: 0.02, ..base.clone() }.steps(1.0).is_err());
        assert!(McConfig { dt: 3e-3, ..base.clone() }.steps(1.0).is_err());
        assert_eq!(base.steps(1.0).unwrap(), 10_000);
    }

    #[test]
    fn equipartition_and_seed_determinism() {
        let s = LinearLangevinSystem::underdamped(
            1.0,
            2.0,
            Bath::new(1.0, 1.5).unwrap(),
            ForceProtocol::trap(Schedule::constant(3.0)),
            1.0,
            ForceRegime::Even,
        )
        .unwrap();
        let eq = equilibrium_state(&s, 0.0).unwrap();
        let cfg = McConfig {
            paths: 4000,
            dt: 1e-3,
            seed: 11,
            record_every: 100,
        };
        let out = simulate_paths(&s, &eq, &cfg).unwrap();
        let m = empirical_moments(&out);
        let last = m.times.len() - 1;
        let z = (m.cov[last][(1, 1)] - 1.5).abs() / m.cov_se[last][(1, 1)];
        assert!(z < 4.0, "z = {z}");
        let again = estimate_quadratic_integrals(&simulate_paths(&s, &eq, &cfg).unwrap());
        assert_eq!(again, estimate_quadratic_integrals(&out));
        assert!(again.kinetic.z_score(1.5) < 4.0);
    }
}
