//! Gaussian discretization and exact discrete transport, used only to
//! cross-check the closed-form Wasserstein distances.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::langevin::{GaussianState, MobilityMatrix};
use crate::linalg::sym_sqrt;
use crate::scenarios::random_state;
use crate::wasserstein::{w2_discrete_oracle, w2_weighted, GridDensity};

pub const MIN_POINTS: usize = 20;
/// Largest support accepted per measure; the dense solver is quadratic in it.
pub const MAX_SUPPORT: usize = 1600;
pub const MAX_TRUNCATION: f64 = 1e-6;
pub const PASS_GAP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    /// Half-width of the grid in standard deviations.
    pub radius: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize) -> Self {
        Self {
            dim,
            points,
            radius: 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::InvalidParameter(format!("grid dimension must be 1 or 2, got {}", self.dim)));
        }
        if self.points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_POINTS} points per axis, got {}",
                self.points
            )));
        }
        if self.points.pow(self.dim as u32) > MAX_SUPPORT {
            return Err(Error::InvalidParameter(format!(
                "support {} exceeds the exact-solver cap {MAX_SUPPORT}",
                self.points.pow(self.dim as u32)
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Discretized {
    pub density: GridDensity,
    /// Standard-normal mass outside the grid, removed by renormalization.
    pub truncated_mass: f64,
}

/// Cells on the standardized axis as `(conditional mean, mass)`.
/// Equal-mass quantile bins when `equal_mass`, else equal-width cells.
fn axis_cells(points: usize, radius: f64, equal_mass: bool) -> (Vec<(f64, f64)>, f64) {
    let n = Normal::standard();
    let (lo, hi) = (n.cdf(-radius), n.cdf(radius));
    let edges: Vec<f64> = (0..=points)
        .map(|i| {
            if i == 0 {
                -radius
            } else if i == points {
                radius
            } else if equal_mass {
                n.inverse_cdf(lo + (hi - lo) * i as f64 / points as f64)
            } else {
                -radius + 2.0 * radius * i as f64 / points as f64
            }
        })
        .collect();
    let cells = edges
        .windows(2)
        .map(|e| {
            let mass = if equal_mass {
                (hi - lo) / points as f64
            } else {
                n.cdf(e[1]) - n.cdf(e[0])
            };
            let centre = if mass > 0.0 {
                (n.pdf(e[0]) - n.pdf(e[1])) / mass
            } else {
                0.5 * (e[0] + e[1])
            };
            (centre, mass)
        })
        .collect();
    (cells, 1.0 - (hi - lo))
}

/// Discrete approximation of `state`: quantile bins in 1D, a tensor grid
/// of cell masses mapped through `μ + S^½ ξ` in 2D.
pub fn discretize_gaussian(state: &GaussianState, spec: &GridSpec) -> Result<Discretized> {
    spec.validate()?;
    if state.dim() != spec.dim {
        return Err(Error::Dimension {
            expected: spec.dim,
            found: state.dim(),
        });
    }
    let (cells, tail) = axis_cells(spec.points, spec.radius, spec.dim == 1);
    let truncated_mass = 1.0 - (1.0 - tail).powi(spec.dim as i32);
    if truncated_mass > MAX_TRUNCATION {
        return Err(Error::TruncationMass(truncated_mass));
    }
    let root = sym_sqrt(&state.cov)?.root;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match spec.dim {
        1 => {
            for &(xi, w) in &cells {
                points.push(DVector::from_element(1, state.mean[0] + root[(0, 0)] * xi));
                weights.push(w);
            }
        }
        _ => {
            for &(a, wa) in &cells {
                for &(b, wb) in &cells {
                    let xi = DVector::from_column_slice(&[a, b]);
                    points.push(&state.mean + &root * xi);
                    weights.push(wa * wb);
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(Discretized {
        density: GridDensity::new(points, weights)?,
        truncated_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OtComparison {
    pub closed: f64,
    pub discrete: f64,
    pub relative_gap: f64,
    pub passed: bool,
}

/// Closed-form `W₂,M` against exact transport between the discretized
/// states with cost `‖x − y‖²_M`.
pub fn verify_closed_form(
    g0: &GaussianState,
    g1: &GaussianState,
    m: &MobilityMatrix,
    spec: &GridSpec,
) -> Result<OtComparison> {
    let closed = w2_weighted(g0, g1, m)?;
    let p = discretize_gaussian(g0, spec)?;
    let q = discretize_gaussian(g1, spec)?;
    let discrete = w2_discrete_oracle(&p.density, &q.density, &m.matrix())?;
    let diff = (discrete - closed).abs();
    let relative_gap = if closed > 0.0 {
        diff / closed
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(OtComparison {
        closed,
        discrete,
        relative_gap,
        passed: relative_gap <= PASS_GAP,
    })
}

/// Random pair of Gaussians in dimension `dim` with unit-scale moments.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<(GaussianState, GaussianState)> {
    let scale = vec![1.0; dim];
    Ok((random_state(rng, &scale)?, random_state(rng, &scale)?))
}
