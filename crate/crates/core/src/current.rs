//! Reversible/irreversible split of the probability current and the
//! action functionals built from it.
//!
//! For a Gaussian state the current velocity `u = J/ρ` is affine in `z`,
//! so every action rate is an exact Gaussian expectation of a quadratic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::langevin::{Family, GaussianState, LinearLangevinSystem, MomentTrajectory, ParitySignature};
use crate::linalg::{condition_number, spd_inverse, trace_of_product};
use crate::quadrature::integrate_uniform;

/// Covariances beyond this condition number are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// `u(z) = U z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineVelocityField {
    pub u: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineVelocityField {
    pub fn eval(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.u * z + &self.b
    }

    /// Single row `i` as `(U_i·, b_i)`.
    pub fn row(&self, i: usize) -> (Vec<f64>, f64) {
        (self.u.row(i).iter().copied().collect(), self.b[i])
    }
}

impl std::ops::Add for &AffineVelocityField {
    type Output = AffineVelocityField;
    fn add(self, rhs: &AffineVelocityField) -> AffineVelocityField {
        AffineVelocityField {
            u: &self.u + &rhs.u,
            b: &self.b + &rhs.b,
        }
    }
}

/// `(A†, c†) = (PAP, Pc)`.
pub fn conjugate_drift(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    parity: &ParitySignature,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = parity.matrix();
    (&p * a * &p, &p * c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFields {
    pub rev: AffineVelocityField,
    pub irr: AffineVelocityField,
    pub total: AffineVelocityField,
}

/// Current velocities for the given drift value and state.
pub fn velocity_fields_for_drift(
    system: &LinearLangevinSystem,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    state: &GaussianState,
) -> Result<VelocityFields> {
    let n = system.dim();
    if state.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            found: state.dim(),
        });
    }
    let cond = condition_number(&state.cov);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let s_inv = spd_inverse(&state.cov)?;
    let (a_conj, c_conj) = conjugate_drift(a, c, system.parity());
    let d = system.diffusion().matrix();
    let score_gain = d * &s_inv;

    let rev = AffineVelocityField {
        u: (a - &a_conj) * 0.5,
        b: (c - &c_conj) * 0.5,
    };
    let irr = AffineVelocityField {
        u: (a + &a_conj) * 0.5 + &score_gain,
        b: (c + &c_conj) * 0.5 - &score_gain * &state.mean,
    };
    let total = AffineVelocityField {
        u: a + &score_gain,
        b: c - &score_gain * &state.mean,
    };
    Ok(VelocityFields { rev, irr, total })
}

pub fn velocity_fields(
    system: &LinearLangevinSystem,
    state: &GaussianState,
    t: f64,
) -> Result<VelocityFields> {
    let (a, c) = system.drift(t);
    velocity_fields_for_drift(system, &a, &c, state)
}

/// Fields at grid index `k` of a trajectory, using the cached drift.
pub fn trajectory_fields(traj: &MomentTrajectory, k: usize) -> Result<VelocityFields> {
    let (a, c) = &traj.drifts[k];
    velocity_fields_for_drift(&traj.system, a, c, &traj.states[k])
}

/// `E‖U z + b‖²_W` under `N(μ, S)`.
pub fn expected_quadratic(field: &AffineVelocityField, state: &GaussianState, w: &DMatrix<f64>) -> f64 {
    let wu = w * &field.u;
    let utwu = field.u.transpose() * wu;
    let m = &field.u * &state.mean + &field.b;
    let value = trace_of_product(&utwu, &state.cov) + m.dot(&(w * &m));
    value.max(0.0)
}

/// `E[(g·z + h)²]` under `N(μ, S)`.
pub fn expected_linear_square(g: &[f64], h: f64, state: &GaussianState) -> f64 {
    let g = DVector::from_column_slice(g);
    let mean = g.dot(&state.mean) + h;
    (g.dot(&(&state.cov * &g)) + mean * mean).max(0.0)
}

/// Instantaneous rates `σ_t`, `y_t`, `φ_t` (SI entropy per time).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionRates {
    pub sigma: f64,
    pub upsilon: f64,
    pub phi: f64,
}

impl ActionRates {
    pub fn total(&self) -> f64 {
        self.sigma + self.upsilon + self.phi
    }
}

/// Rates restricted to coordinate `i`: the weight is `M_ii e_i e_iᵀ`, and
/// the cross term comes from polarization on that row alone.
fn coordinate_rates(system: &LinearLangevinSystem, f: &VelocityFields, state: &GaussianState, i: usize) -> ActionRates {
    let w = system.mobility().entry(i);
    let (g_rev, h_rev) = f.rev.row(i);
    let (g_irr, h_irr) = f.irr.row(i);
    let g_sum: Vec<f64> = g_rev.iter().zip(&g_irr).map(|(a, b)| a + b).collect();
    let sigma = w * expected_linear_square(&g_irr, h_irr, state);
    let upsilon = w * expected_linear_square(&g_rev, h_rev, state);
    let both = w * expected_linear_square(&g_sum, h_rev + h_irr, state);
    ActionRates {
        sigma,
        upsilon,
        phi: both - sigma - upsilon,
    }
}

/// Sum of the coordinate rates; `M` is diagonal, so this is the full
/// `M`-weighted expectation.
fn rates_from_fields(system: &LinearLangevinSystem, f: &VelocityFields, state: &GaussianState) -> ActionRates {
    (0..system.dim()).fold(ActionRates::default(), |acc, i| {
        let r = coordinate_rates(system, f, state, i);
        ActionRates {
            sigma: acc.sigma + r.sigma,
            upsilon: acc.upsilon + r.upsilon,
            phi: acc.phi + r.phi,
        }
    })
}

pub fn action_rates(system: &LinearLangevinSystem, state: &GaussianState, t: f64) -> Result<ActionRates> {
    let f = velocity_fields(system, state, t)?;
    Ok(rates_from_fields(system, &f, state))
}

/// Rates at every grid point of a trajectory.
pub fn trajectory_rates(traj: &MomentTrajectory) -> Result<Vec<ActionRates>> {
    (0..traj.times.len())
        .map(|k| {
            let f = trajectory_fields(traj, k)?;
            Ok(rates_from_fields(&traj.system, &f, &traj.states[k]))
        })
        .collect()
}

/// Integrated actions restricted to one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoordinateActions {
    pub sigma: f64,
    pub upsilon: f64,
    pub phi: f64,
}

impl CoordinateActions {
    /// `M_ii ∫ E[u_i²] dt`.
    pub fn full(&self) -> f64 {
        self.sigma + self.upsilon + self.phi
    }
}

/// Family-specific functionals. For the RLC circuit the "kinetic" and
/// "energy" entries refer to the charge coordinate and capacitor energy.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalTerms {
    pub sigma_res: f64,
    pub sigma_pu: f64,
    /// True when `Σ_pu` was set to zero because the force never depends on
    /// the odd coordinate, rather than integrated.
    pub sigma_pu_exact_zero: bool,
    /// `ΔE_Kin` (underdamped) or `ΔE_Cap` (RLC).
    pub delta_energy: f64,
    pub fisher_integral: f64,
    /// `∫⟨F²⟩` (underdamped) or `∫⟨φ²/L²⟩` (RLC).
    pub control_effort: f64,
    /// `∫⟨F_rev²⟩`; equals the control effort for the RLC family.
    pub reversible_force_integral: f64,
    /// `∫⟨v²⟩` (underdamped) or `∫⟨q²⟩` (RLC).
    pub kinetic_integral: f64,
    /// `(Λ₁, Λ₂, Λ₃)`, underdamped only.
    pub lambda: Option<[f64; 3]>,
}

/// All integrated functionals over `[0, τ]`, in SI entropy units (J/K)
/// where applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBreakdown {
    pub horizon: f64,
    pub kb: f64,
    pub sigma: f64,
    pub upsilon: f64,
    pub phi: f64,
    pub sigma_sys: f64,
    pub sigma_env: f64,
    pub coordinates: Vec<CoordinateActions>,
    pub physical: Option<PhysicalTerms>,
}

impl ActionBreakdown {
    /// `Σ − (Σ_sys + Σ_res + Σ_pu)`.
    pub fn bookkeeping_residual(&self) -> Option<f64> {
        self.physical
            .as_ref()
            .map(|p| self.sigma - (self.sigma_sys + p.sigma_res + p.sigma_pu))
    }

    pub fn physical(&self) -> Result<&PhysicalTerms> {
        self.physical
            .as_ref()
            .ok_or_else(|| Error::Applicability("needs an underdamped or RLC system".into()))
    }
}

fn second_moment(state: &GaussianState, i: usize) -> f64 {
    state.cov[(i, i)] + state.mean[i] * state.mean[i]
}

pub fn accumulate_actions(traj: &MomentTrajectory) -> Result<ActionBreakdown> {
    let system = &traj.system;
    let n = system.dim();
    let h = traj.step_size();
    let tau = traj.horizon();
    let kb = system.bath().kb;
    let temp = system.bath().temperature;
    let points = traj.times.len();

    let mut total = vec![ActionRates::default(); points];
    let mut per_coord = vec![vec![ActionRates::default(); points]; n];
    let mut s_inv_odd = vec![0.0; points];
    for k in 0..points {
        let f = trajectory_fields(traj, k)?;
        let state = &traj.states[k];
        total[k] = rates_from_fields(system, &f, state);
        for (i, series) in per_coord.iter_mut().enumerate() {
            series[k] = coordinate_rates(system, &f, state, i);
        }
        if n == 2 {
            s_inv_odd[k] = spd_inverse(&state.cov)?[(1, 1)];
        }
    }
    let integrate = |g: &dyn Fn(usize) -> f64| -> f64 {
        let v: Vec<f64> = (0..points).map(g).collect();
        integrate_uniform(&v, h)
    };

    let sigma = integrate(&|k| total[k].sigma);
    let upsilon = integrate(&|k| total[k].upsilon);
    let phi = integrate(&|k| total[k].phi);
    let coordinates = per_coord
        .iter()
        .map(|s| CoordinateActions {
            sigma: integrate(&|k| s[k].sigma),
            upsilon: integrate(&|k| s[k].upsilon),
            phi: integrate(&|k| s[k].phi),
        })
        .collect();
    let (s0, s1) = (traj.initial(), traj.terminal());
    let sigma_sys = 0.5 * kb * (s1.log_det() - s0.log_det());

    let physical = match system.family() {
        Family::Underdamped(p) => {
            let m = p.mass;
            let g = p.friction;
            let kbt = kb * temp;
            let coeff: Vec<(f64, f64, f64)> = traj.times.iter().map(|&t| p.force.coefficients(t)).collect();
            let v2: Vec<f64> = traj.states.iter().map(|s| second_moment(s, 1)).collect();
            let kinetic_integral = integrate_uniform(&v2, h);
            let sigma_res = g / temp * kinetic_integral - g * kb * tau / m;
            let sigma_pu_exact_zero = coeff.iter().all(|c| c.1 == 0.0);
            let sigma_pu = if sigma_pu_exact_zero {
                0.0
            } else {
                integrate(&|k| {
                    let kv = coeff[k].1;
                    (kv * kv - 2.0 * g * kv) * v2[k] / (g * temp) + kb / m * kv
                })
            };
            let delta_energy = 0.5 * m * (v2[points - 1] - v2[0]);
            let fisher_integral = (g * kbt / m).powi(2) * integrate(&|k| s_inv_odd[k]);
            let control_effort = integrate(&|k| {
                let (kx, kv, f0) = coeff[k];
                expected_linear_square(&[kx, kv], f0, &traj.states[k])
            });
            let reversible_force_integral = integrate(&|k| {
                let (kx, _, f0) = coeff[k];
                expected_linear_square(&[kx, 0.0], f0, &traj.states[k])
            });
            // E[(k_v v)² + 2 k_v v (k_x x + f₀)]
            let lambda1 = integrate(&|k| {
                let (kx, kv, f0) = coeff[k];
                let st = &traj.states[k];
                let xv = st.cov[(0, 1)] + st.mean[0] * st.mean[1];
                kv * kv * v2[k] + 2.0 * kv * (kx * xv + f0 * st.mean[1])
            }) / (g * temp);
            let lambda2 = -2.0 / temp * (delta_energy + temp * (sigma_res + sigma_pu));
            let w2 = integrate(&|k| v2[k] - 2.0 * kbt / m + (kbt / m).powi(2) * s_inv_odd[k]);
            let lambda3 = sigma - g / temp * w2;
            Some(PhysicalTerms {
                sigma_res,
                sigma_pu,
                sigma_pu_exact_zero,
                delta_energy,
                fisher_integral,
                control_effort,
                reversible_force_integral,
                kinetic_integral,
                lambda: Some([lambda1, lambda2, lambda3]),
            })
        }
        Family::Rlc(p) => {
            let (r, c) = (p.resistance, p.capacitance);
            let q2: Vec<f64> = traj.states.iter().map(|s| second_moment(s, 1)).collect();
            let kinetic_integral = integrate_uniform(&q2, h);
            let sigma_res = kinetic_integral / (r * temp * c * c) - kb * tau / (r * c);
            let control_effort = integrate(&|k| {
                let l = p.inductance.eval(traj.times[k]);
                second_moment(&traj.states[k], 0) / (l * l)
            });
            let fisher_integral = (kb * temp / r).powi(2) * integrate(&|k| s_inv_odd[k]);
            Some(PhysicalTerms {
                sigma_res,
                sigma_pu: 0.0,
                sigma_pu_exact_zero: true,
                delta_energy: (q2[points - 1] - q2[0]) / (2.0 * c),
                fisher_integral,
                control_effort,
                reversible_force_integral: control_effort,
                kinetic_integral,
                lambda: None,
            })
        }
        Family::Custom(_) => None,
    };

    Ok(ActionBreakdown {
        horizon: tau,
        kb,
        sigma,
        upsilon,
        phi,
        sigma_sys,
        sigma_env: sigma - sigma_sys,
        coordinates,
        physical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langevin::{equilibrium_state, propagate_moments, Bath, ForceProtocol, ForceRegime};
    use crate::schedule::Schedule;
    use approx::assert_relative_eq;

    fn bath() -> Bath {
        Bath::new(1.0, 2.0).unwrap()
    }

    fn trap(force: ForceProtocol) -> LinearLangevinSystem {
        LinearLangevinSystem::underdamped(1.5, 0.7, bath(), force, 1.0, ForceRegime::Unspecified).unwrap()
    }

    #[test]
    fn underdamped_conjugation() {
        let s = trap(ForceProtocol::trap(Schedule::constant(2.0)));
        let (a, c) = s.drift(0.0);
        let (ac, cc) = conjugate_drift(&a, &c, s.parity());
        // a†(z) = P a(P z) = (−v, (qx − γv)/m)
        assert_eq!(ac, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 2.0 / 1.5, -0.7 / 1.5]));
        assert_eq!(cc, DVector::zeros(2));
        let st = GaussianState::from_slices(&[0.3, -0.2], &[1.0, 0.1, 0.1, 2.0]).unwrap();
        let f = velocity_fields(&s, &st, 0.0).unwrap();
        assert_eq!(f.rev.u, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0 / 1.5, 0.0]));
    }

    #[test]
    fn refrigerator_irreversible_drift() {
        let force = ForceProtocol {
            stiffness: Schedule::constant(2.0),
            feedback_friction: Schedule::constant(0.4),
            offset: Schedule::ZERO,
        };
        let s = trap(force);
        let (a, c) = s.drift(0.0);
        let (ac, _) = conjugate_drift(&a, &c, s.parity());
        let irr = (&a + &ac) * 0.5;
        assert_relative_eq!(irr[(1, 1)], -(0.7 + 0.4) / 1.5, epsilon = 1e-15);
        assert_eq!(irr[(1, 0)], 0.0);
    }

    #[test]
    fn rlc_conjugation() {
        let s = LinearLangevinSystem::rlc(2.0, 0.5, Schedule::constant(3.0), bath(), 1.0).unwrap();
        let (a, c) = s.drift(0.0);
        let (ac, _) = conjugate_drift(&a, &c, s.parity());
        let rev = (&a - &ac) * 0.5;
        let irr = (&a + &ac) * 0.5;
        assert_eq!(rev, DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -1.0 / 3.0, 0.0]));
        assert_eq!(irr, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
        let eq = equilibrium_state(&s, 0.0).unwrap();
        let f = velocity_fields(&s, &eq, 0.0).unwrap();
        assert!(f.irr.u.amax() < 1e-12);
        assert!(f.rev.u.amax() > 0.1);
    }

    #[test]
    fn gibbs_state_has_no_irreversible_current() {
        let s = trap(ForceProtocol::trap(Schedule::constant(2.0)));
        let eq = equilibrium_state(&s, 0.0).unwrap();
        let f = velocity_fields(&s, &eq, 0.0).unwrap();
        assert!(f.irr.u.amax() < 1e-14);
        let r = action_rates(&s, &eq, 0.0).unwrap();
        assert!(r.sigma < 1e-14);
        assert!(r.phi.abs() < 1e-14);
        // y = (γ/T)⟨v²⟩ + (1/γT)⟨q²x²⟩
        let t = 2.0;
        let expected = 0.7 / t * eq.cov[(1, 1)] + 4.0 * eq.cov[(0, 0)] / (0.7 * t);
        assert_relative_eq!(r.upsilon, expected, max_relative = 1e-12);
    }

    #[test]
    fn decomposition_is_additive() {
        let s = trap(ForceProtocol::trap(Schedule::constant(2.0)));
        let st = GaussianState::from_slices(&[0.3, -0.2], &[1.0, 0.1, 0.1, 2.0]).unwrap();
        let f = velocity_fields(&s, &st, 0.0).unwrap();
        let sum = &f.rev + &f.irr;
        assert!((&sum.u - &f.total.u).amax() < 1e-15);
        assert!((&sum.b - &f.total.b).amax() < 1e-15);
    }

    #[test]
    fn quadratic_special_cases() {
        let st = GaussianState::from_slices(&[1.0, 2.0], &[2.0, 0.5, 0.5, 3.0]).unwrap();
        let id = AffineVelocityField {
            u: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
        };
        let centred = GaussianState::new(DVector::zeros(2), st.cov.clone()).unwrap();
        assert_relative_eq!(expected_quadratic(&id, &centred, &DMatrix::identity(2, 2)), 5.0);
        let konst = AffineVelocityField {
            u: DMatrix::zeros(2, 2),
            b: DVector::from_column_slice(&[1.0, -2.0]),
        };
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert_relative_eq!(expected_quadratic(&konst, &st, &w), 4.0);
    }

    #[test]
    fn odd_force_has_no_cross_term() {
        let force = ForceProtocol {
            stiffness: Schedule::ZERO,
            feedback_friction: Schedule::constant(0.4),
            offset: Schedule::ZERO,
        };
        let s = trap(force);
        let st = GaussianState::from_slices(&[0.3, -0.2], &[1.0, 0.4, 0.4, 2.0]).unwrap();
        let r = action_rates(&s, &st, 0.0).unwrap();
        assert_eq!(r.phi, 0.0);
    }

    #[test]
    fn stationary_breakdown() {
        let s = trap(ForceProtocol::trap(Schedule::constant(2.0)));
        let eq = equilibrium_state(&s, 0.0).unwrap();
        let traj = propagate_moments(&s, &eq, 100).unwrap();
        let b = accumulate_actions(&traj).unwrap();
        assert!(b.sigma.abs() < 1e-12);
        assert!(b.sigma_sys.abs() < 1e-12);
        let p = b.physical.as_ref().unwrap();
        assert!(p.delta_energy.abs() < 1e-12);
        let y = action_rates(&s, &eq, 0.0).unwrap().upsilon;
        assert_relative_eq!(b.upsilon, y, max_relative = 1e-10);
        assert!(p.sigma_pu_exact_zero);
    }
}
