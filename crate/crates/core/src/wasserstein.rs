//! Wasserstein-2 distances between Gaussian states, a discrete
//! optimal-transport oracle, and coarse-grained marginal actions.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::current::trajectory_fields;
use crate::error::{Error, Result};
use crate::langevin::{GaussianState, MobilityMatrix, MomentTrajectory};
use crate::linalg::{sym_sqrt, symmetrize};
use crate::quadrature::integrate_uniform;
use crate::transport::solve_transport;

/// Closed-form W₂ with a flag recording whether the square-root
/// eigenvalue floor was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct W2Value {
    pub distance: f64,
    pub squared: f64,
    pub floored: bool,
}

fn lexicographic(a: &GaussianState, b: &GaussianState) -> Ordering {
    a.mean
        .iter()
        .chain(a.cov.iter())
        .zip(b.mean.iter().chain(b.cov.iter()))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Orders the pair canonically so that swapping arguments yields the
/// same floating-point computation.
fn canonical<'a>(g0: &'a GaussianState, g1: &'a GaussianState) -> (&'a GaussianState, &'a GaussianState) {
    if lexicographic(g0, g1) == Ordering::Greater {
        (g1, g0)
    } else {
        (g0, g1)
    }
}

fn check_pair(g0: &GaussianState, g1: &GaussianState) -> Result<()> {
    if g0.dim() != g1.dim() {
        return Err(Error::Dimension {
            expected: g0.dim(),
            found: g1.dim(),
        });
    }
    Ok(())
}

/// Bures–Wasserstein distance with floor reporting.
pub fn w2_gaussian_detailed(g0: &GaussianState, g1: &GaussianState) -> Result<W2Value> {
    check_pair(g0, g1)?;
    if g0 == g1 {
        return Ok(W2Value {
            distance: 0.0,
            squared: 0.0,
            floored: false,
        });
    }
    let (a, b) = canonical(g0, g1);
    let root_b = sym_sqrt(&b.cov)?;
    let inner = symmetrize(&(&root_b.root * &a.cov * &root_b.root));
    let root_inner = sym_sqrt(&inner)?;
    let dm = &a.mean - &b.mean;
    let squared =
        (dm.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * root_inner.root.trace()).max(0.0);
    Ok(W2Value {
        distance: squared.sqrt(),
        squared,
        floored: root_b.floored || root_inner.floored,
    })
}

pub fn w2_gaussian(g0: &GaussianState, g1: &GaussianState) -> Result<f64> {
    Ok(w2_gaussian_detailed(g0, g1)?.distance)
}

/// `W₂,M` through the push-forward `z ↦ M^{1/2} z`. Computed by a route
/// independent of [`w2_gaussian`]: the fidelity term is the nuclear norm
/// of `L₁ᵀ L₀` for Cholesky factors of the warped covariances.
pub fn w2_weighted(g0: &GaussianState, g1: &GaussianState, m: &MobilityMatrix) -> Result<f64> {
    Ok(w2_weighted_squared(g0, g1, m)?.sqrt())
}

pub fn w2_weighted_squared(g0: &GaussianState, g1: &GaussianState, m: &MobilityMatrix) -> Result<f64> {
    check_pair(g0, g1)?;
    if m.dim() != g0.dim() {
        return Err(Error::Dimension {
            expected: g0.dim(),
            found: m.dim(),
        });
    }
    if g0 == g1 {
        return Ok(0.0);
    }
    let (a, b) = canonical(g0, g1);
    let w = m.entries();
    let n = a.dim();
    let warp = |s: &DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| (w[i] * w[j]).sqrt() * s[(i, j)]);
    let (sa, sb) = (warp(&a.cov), warp(&b.cov));
    let la = sa
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("warped covariance".into()))?
        .unpack();
    let lb = sb
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("warped covariance".into()))?
        .unpack();
    let fidelity: f64 = (lb.transpose() * la).singular_values().iter().sum();
    let mean_term: f64 = (0..n).map(|i| w[i] * (a.mean[i] - b.mean[i]).powi(2)).sum();
    Ok((mean_term + sa.trace() + sb.trace() - 2.0 * fidelity).max(0.0))
}

/// W₂ between the exact one-dimensional marginals on `coord`.
pub fn w2_marginal_1d(g0: &GaussianState, g1: &GaussianState, coord: usize) -> Result<f64> {
    check_pair(g0, g1)?;
    if coord >= g0.dim() {
        return Err(Error::Dimension {
            expected: g0.dim(),
            found: coord,
        });
    }
    let dm = g0.mean[coord] - g1.mean[coord];
    let ds = g0.cov[(coord, coord)].sqrt() - g1.cov[(coord, coord)].sqrt();
    Ok((dm * dm + ds * ds).sqrt())
}

/// Finite probability measure on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl GridDensity {
    pub fn new(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "grid needs matching nonempty points/weights ({} vs {})",
                points.len(),
                weights.len()
            )));
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidParameter("grid points differ in dimension".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("grid weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::MassMismatch(total - 1.0));
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim()), |acc, (p, w)| acc + p * *w)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        self.points
            .iter()
            .zip(&self.weights)
            .fold(DMatrix::zeros(self.dim(), self.dim()), |acc, (p, w)| {
                let d = p - &mu;
                acc + &d * d.transpose() * *w
            })
    }
}

/// Exact discrete W₂ with ground cost `(x − y)ᵀ W (x − y)`.
pub fn w2_discrete_oracle(p: &GridDensity, q: &GridDensity, w: &DMatrix<f64>) -> Result<f64> {
    if p.dim() != q.dim() || w.nrows() != p.dim() || w.ncols() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    let mut cost = Vec::with_capacity(p.len() * q.len());
    for x in p.points() {
        for y in q.points() {
            let d = x - y;
            cost.push(d.dot(&(w * &d)).max(0.0));
        }
    }
    let plan = solve_transport(p.weights(), q.weights(), &cost)?;
    Ok(plan.cost.max(0.0).sqrt())
}

/// Coarse-grained action of coordinate `c`:
/// `M_cc ∫ E[(E[u_c | z_c])²] dt`. For Gaussians the conditional mean
/// of the affine current velocity is affine in `z_c`.
pub fn marginal_coarse_action(traj: &MomentTrajectory, coord: usize) -> Result<f64> {
    let n = traj.system.dim();
    if coord >= n {
        return Err(Error::Dimension {
            expected: n,
            found: coord,
        });
    }
    let values = (0..traj.times.len())
        .map(|k| {
            let f = trajectory_fields(traj, k)?;
            let st = &traj.states[k];
            let scc = st.cov[(coord, coord)];
            if !(scc > 0.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "marginal variance {scc:e} on coordinate {coord}"
                )));
            }
            let (g, h) = f.total.row(coord);
            let alpha: f64 = (0..n).map(|j| g[j] * st.mean[j]).sum::<f64>() + h;
            let beta: f64 = (0..n).map(|j| g[j] * st.cov[(j, coord)]).sum::<f64>() / scc;
            Ok(alpha * alpha + beta * beta * scc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(traj.system.mobility().entry(coord) * integrate_uniform(&values, traj.step_size()))
}
