//! Linear Langevin systems with even/odd coordinates and Gaussian moment
//! propagation.
//!
//! A system is the SDE `dz = (A(t) z + c(t)) dt + √(2D) dW`. Gaussian
//! initial data stay Gaussian, with `μ̇ = Aμ + c` and `Ṡ = AS + SAᵀ + 2D`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue, solve_lyapunov, spectral_abscissa, symmetrize};
use crate::schedule::Schedule;

/// Largest supported phase-space dimension.
pub const MAX_DIM: usize = 4;

/// Time-reversal parity of each coordinate (+1 even, −1 odd).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParitySignature {
    signs: Vec<i8>,
}

impl ParitySignature {
    pub fn new(signs: &[i32]) -> Result<Self> {
        let signs = signs
            .iter()
            .map(|&s| match s {
                1 => Ok(1i8),
                -1 => Ok(-1i8),
                other => Err(Error::InvalidParity(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { signs })
    }

    /// `(+1, −1)` for `(x, v)`.
    pub fn underdamped() -> Self {
        Self { signs: vec![1, -1] }
    }

    /// `(−1, +1)` for `(φ, q)`.
    pub fn rlc() -> Self {
        Self { signs: vec![-1, 1] }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> Vec<i32> {
        self.signs.iter().map(|&s| s as i32).collect()
    }

    pub fn is_even(&self, i: usize) -> bool {
        self.signs[i] == 1
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.signs.len(),
            self.signs.iter().map(|&s| s as f64),
        ))
    }
}

/// Constant symmetric PSD diffusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    d: DMatrix<f64>,
}

impl DiffusionMatrix {
    pub fn new(d: DMatrix<f64>) -> Result<Self> {
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("diffusion matrix has non-finite entries".into()));
        }
        if !is_symmetric(&d, 1e-12) {
            return Err(Error::NotPositiveDefinite("diffusion matrix is not symmetric".into()));
        }
        let d = symmetrize(&d);
        let scale = d.amax();
        if scale > 0.0 && min_eigenvalue(&d) < -1e-12 * scale {
            return Err(Error::NotPositiveDefinite("diffusion matrix is not PSD".into()));
        }
        Ok(Self { d })
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }
}

/// Positive diagonal weight matrix. Used for the mobility `M` and for the
/// auxiliary weights `N` and `M_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    diag: Vec<f64>,
}

impl MobilityMatrix {
    pub fn new(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty mobility".into()));
        }
        if let Some(bad) = diag.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "mobility entries must be positive and finite, got {bad}"
            )));
        }
        Ok(Self {
            diag: diag.to_vec(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn entries(&self) -> &[f64] {
        &self.diag
    }

    pub fn entry(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag))
    }

    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.diag.len(),
            self.diag.iter().map(|x| x.sqrt()),
        ))
    }

    /// Entrywise scaling `diag(α_i M_ii)`.
    pub fn scaled(&self, alpha: &[f64]) -> Result<Self> {
        if alpha.len() != self.diag.len() {
            return Err(Error::Dimension {
                expected: self.diag.len(),
                found: alpha.len(),
            });
        }
        let d: Vec<f64> = self.diag.iter().zip(alpha).map(|(m, a)| m * a).collect();
        Self::new(&d)
    }
}

/// Heat bath: Boltzmann constant and temperature, both SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bath {
    pub kb: f64,
    pub temperature: f64,
}

impl Bath {
    pub const KB_DEFAULT: f64 = 1.38e-23;

    pub fn new(kb: f64, temperature: f64) -> Result<Self> {
        if !(kb > 0.0 && kb.is_finite()) || !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bath needs k_B > 0 and T > 0 (got {kb}, {temperature})"
            )));
        }
        Ok(Self { kb, temperature })
    }

    pub fn kbt(&self) -> f64 {
        self.kb * self.temperature
    }
}

/// Applied force `F(t, x, v) = −q(t) x − γ_c(t) v + f(t)` on an
/// underdamped particle. `γ_c` is a feedback ("refrigerator") friction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceProtocol {
    pub stiffness: Schedule,
    #[serde(default = "zero_schedule")]
    pub feedback_friction: Schedule,
    #[serde(default = "zero_schedule")]
    pub offset: Schedule,
}

fn zero_schedule() -> Schedule {
    Schedule::ZERO
}

impl ForceProtocol {
    pub fn trap(stiffness: Schedule) -> Self {
        Self {
            stiffness,
            feedback_friction: Schedule::ZERO,
            offset: Schedule::ZERO,
        }
    }

    /// Coefficients `(k_x, k_v, f₀)` with `F = k_x x + k_v v + f₀`.
    pub fn coefficients(&self, t: f64) -> (f64, f64, f64) {
        (
            -self.stiffness.eval(t),
            -self.feedback_friction.eval(t),
            self.offset.eval(t),
        )
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        self.stiffness.validate(horizon)?;
        self.feedback_friction.validate(horizon)?;
        self.offset.validate(horizon)
    }
}

/// Declared time-reversal character of the applied force. Regime-specific
/// bounds verify the declaration against the drift before they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceRegime {
    #[default]
    Unspecified,
    /// `F† = F`: the force has no velocity dependence, so `F_irr = 0`.
    Even,
    /// `F† = −F`: purely velocity-proportional force, so `F_rev = 0`.
    Odd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnderdampedParams {
    pub mass: f64,
    pub friction: f64,
    pub force: ForceProtocol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlcParams {
    pub resistance: f64,
    pub capacitance: f64,
    pub inductance: Schedule,
}

/// Drift given entrywise by schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomDrift {
    pub a: Vec<Vec<Schedule>>,
    pub c: Vec<Schedule>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Underdamped(UnderdampedParams),
    Rlc(RlcParams),
    Custom(CustomDrift),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearLangevinSystem {
    family: Family,
    diffusion: DiffusionMatrix,
    parity: ParitySignature,
    mobility: MobilityMatrix,
    bath: Bath,
    horizon: f64,
    regime: ForceRegime,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

impl LinearLangevinSystem {
    /// Particle of mass `m` with bath friction `γ` under `force`, phase
    /// space `(x, v)`.
    pub fn underdamped(
        mass: f64,
        friction: f64,
        bath: Bath,
        force: ForceProtocol,
        horizon: f64,
        regime: ForceRegime,
    ) -> Result<Self> {
        check_positive("mass", mass)?;
        check_positive("friction", friction)?;
        check_horizon(horizon)?;
        force.validate(horizon)?;
        let d_vv = friction * bath.kbt() / (mass * mass);
        let system = Self {
            family: Family::Underdamped(UnderdampedParams {
                mass,
                friction,
                force,
            }),
            diffusion: DiffusionMatrix::diagonal(&[0.0, d_vv])?,
            parity: ParitySignature::underdamped(),
            mobility: MobilityMatrix::new(&[
                friction / bath.temperature,
                mass * mass / (friction * bath.temperature),
            ])?,
            bath,
            horizon,
            regime,
        };
        system.check_consistency()?;
        Ok(system)
    }

    /// Series RLC circuit with time-varying inductance, phase space
    /// `(φ, q)` (flux, charge).
    pub fn rlc(
        resistance: f64,
        capacitance: f64,
        inductance: Schedule,
        bath: Bath,
        horizon: f64,
    ) -> Result<Self> {
        check_positive("resistance", resistance)?;
        check_positive("capacitance", capacitance)?;
        check_horizon(horizon)?;
        inductance.validate(horizon)?;
        let l_min = inductance.min_on(horizon);
        if !(l_min > 0.0) {
            return Err(Error::SingularProtocol {
                horizon,
                reason: format!("inductance must stay positive (minimum {l_min:e})"),
            });
        }
        let system = Self {
            family: Family::Rlc(RlcParams {
                resistance,
                capacitance,
                inductance,
            }),
            diffusion: DiffusionMatrix::diagonal(&[0.0, bath.kbt() / resistance])?,
            parity: ParitySignature::rlc(),
            mobility: MobilityMatrix::new(&[
                1.0 / (resistance * bath.temperature),
                resistance / bath.temperature,
            ])?,
            bath,
            horizon,
            regime: ForceRegime::Even,
        };
        system.check_consistency()?;
        Ok(system)
    }

    pub fn custom(
        drift: CustomDrift,
        diffusion: DiffusionMatrix,
        parity: ParitySignature,
        mobility: MobilityMatrix,
        bath: Bath,
        horizon: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        let n = parity.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "dimension must be in 1..={MAX_DIM}, got {n}"
            )));
        }
        if drift.a.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: drift.a.len(),
            });
        }
        if let Some(row) = drift.a.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: row.len(),
            });
        }
        if drift.c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: drift.c.len(),
            });
        }
        for s in drift.a.iter().flatten().chain(drift.c.iter()) {
            s.validate(horizon)?;
        }
        let system = Self {
            family: Family::Custom(drift),
            diffusion,
            parity,
            mobility,
            bath,
            horizon,
            regime: ForceRegime::Unspecified,
        };
        system.check_consistency()?;
        Ok(system)
    }

    /// Parity invariance of `D` and the mobility rule `M_ii = k_B / D_ii`
    /// on diffusive coordinates.
    fn check_consistency(&self) -> Result<()> {
        let n = self.parity.len();
        for found in [self.diffusion.dim(), self.mobility.dim()] {
            if found != n {
                return Err(Error::Dimension { expected: n, found });
            }
        }
        let d = self.diffusion.matrix();
        let p = self.parity.matrix();
        let conj = &p * d * &p;
        if (&conj - d).amax() > 1e-12 * d.amax() {
            return Err(Error::ParityMismatch);
        }
        for i in 0..n {
            let dii = d[(i, i)];
            if dii != 0.0 {
                let expected = self.bath.kb / dii;
                let found = self.mobility.entry(i);
                if ((found - expected) / expected).abs() > 1e-9 {
                    return Err(Error::MobilityMismatch {
                        index: i,
                        expected,
                        found,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.parity.len()
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn underdamped_params(&self) -> Option<&UnderdampedParams> {
        match &self.family {
            Family::Underdamped(p) => Some(p),
            _ => None,
        }
    }

    pub fn rlc_params(&self) -> Option<&RlcParams> {
        match &self.family {
            Family::Rlc(p) => Some(p),
            _ => None,
        }
    }

    pub fn diffusion(&self) -> &DiffusionMatrix {
        &self.diffusion
    }

    pub fn parity(&self) -> &ParitySignature {
        &self.parity
    }

    pub fn mobility(&self) -> &MobilityMatrix {
        &self.mobility
    }

    pub fn bath(&self) -> Bath {
        self.bath
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn regime(&self) -> ForceRegime {
        self.regime
    }

    pub fn with_regime(mut self, regime: ForceRegime) -> Self {
        self.regime = regime;
        self
    }

    /// Replacement horizon; protocols are revalidated.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        match &self.family {
            Family::Underdamped(p) => p.force.validate(horizon)?,
            Family::Rlc(p) => p.inductance.validate(horizon)?,
            Family::Custom(c) => {
                for s in c.a.iter().flatten().chain(c.c.iter()) {
                    s.validate(horizon)?;
                }
            }
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// `(A(t), c(t))`.
    pub fn drift(&self, t: f64) -> (DMatrix<f64>, DVector<f64>) {
        match &self.family {
            Family::Underdamped(p) => {
                let (kx, kv, f0) = p.force.coefficients(t);
                let m = p.mass;
                (
                    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, kx / m, (kv - p.friction) / m]),
                    DVector::from_column_slice(&[0.0, f0 / m]),
                )
            }
            Family::Rlc(p) => {
                let l = p.inductance.eval(t);
                let c = p.capacitance;
                (
                    DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / c, -1.0 / l, -1.0 / (c * p.resistance)]),
                    DVector::zeros(2),
                )
            }
            Family::Custom(d) => {
                let n = d.c.len();
                (
                    DMatrix::from_fn(n, n, |i, j| d.a[i][j].eval(t)),
                    DVector::from_fn(n, |i, _| d.c[i].eval(t)),
                )
            }
        }
    }

    /// Checks the declared force regime at each of `times`. Returns a
    /// description of the first violation.
    pub fn verify_regime(&self, regime: ForceRegime, times: &[f64]) -> std::result::Result<(), String> {
        if regime == ForceRegime::Unspecified {
            return Ok(());
        }
        if self.regime != regime {
            return Err(format!(
                "system declares force regime {:?}, bound needs {:?}",
                self.regime, regime
            ));
        }
        match &self.family {
            Family::Underdamped(p) => {
                for &t in times {
                    let (kx, kv, f0) = p.force.coefficients(t);
                    match regime {
                        ForceRegime::Even if kv != 0.0 => {
                            return Err(format!("force depends on velocity at t = {t} (F_irr ≠ 0)"))
                        }
                        ForceRegime::Odd if kx != 0.0 || f0 != 0.0 => {
                            return Err(format!("force has an even part at t = {t} (F_rev ≠ 0)"))
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
            Family::Rlc(_) if regime == ForceRegime::Even => Ok(()),
            _ => Err("force regimes are defined for the underdamped family only".into()),
        }
    }
}

/// Gaussian density `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension {
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("state has non-finite entries".into()));
        }
        if !is_symmetric(&cov, 1e-12) {
            return Err(Error::NotPositiveDefinite("covariance is not symmetric".into()));
        }
        let cov = symmetrize(&cov);
        if cov.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(format!(
                "covariance smallest eigenvalue {:e}",
                min_eigenvalue(&cov)
            )));
        }
        Ok(Self { mean, cov })
    }

    pub fn from_slices(mean: &[f64], cov_rows: &[f64]) -> Result<Self> {
        let n = mean.len();
        if cov_rows.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: cov_rows.len(),
            });
        }
        Self::new(
            DVector::from_column_slice(mean),
            DMatrix::from_row_slice(n, n, cov_rows),
        )
    }

    /// `N(0, I)` in dimension `n`.
    pub fn standard(n: usize) -> Self {
        Self {
            mean: DVector::zeros(n),
            cov: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Natural log of `det S`.
    pub fn log_det(&self) -> f64 {
        match self.cov.clone().cholesky() {
            Some(ch) => 2.0 * ch.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
            None => f64::NAN,
        }
    }
}

/// Exact marginal `(mean_i, cov_ii)`.
pub fn marginal(state: &GaussianState, coord: usize) -> Result<(f64, f64)> {
    if coord >= state.dim() {
        return Err(Error::Dimension {
            expected: state.dim(),
            found: coord,
        });
    }
    Ok((state.mean[coord], state.cov[(coord, coord)]))
}

/// Stationary state of the drift frozen at time `t`.
pub fn equilibrium_state(system: &LinearLangevinSystem, t: f64) -> Result<GaussianState> {
    let (a, c) = system.drift(t);
    let abscissa = spectral_abscissa(&a);
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitz(abscissa));
    }
    let mean = a
        .clone()
        .lu()
        .solve(&(-c))
        .ok_or(Error::NotHurwitz(abscissa))?;
    let cov = solve_lyapunov(&a, &(system.diffusion().matrix() * 2.0))?;
    GaussianState::new(mean, cov)
}

/// Gaussian path on a uniform time grid together with the drift evaluated
/// at each grid time.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GaussianState>,
    pub drifts: Vec<(DMatrix<f64>, DVector<f64>)>,
    pub system: LinearLangevinSystem,
}

impl MomentTrajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step_size(&self) -> f64 {
        self.system.horizon() / self.steps() as f64
    }

    pub fn horizon(&self) -> f64 {
        self.system.horizon()
    }

    pub fn initial(&self) -> &GaussianState {
        &self.states[0]
    }

    pub fn terminal(&self) -> &GaussianState {
        &self.states[self.states.len() - 1]
    }
}

fn moment_rhs(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    two_d: &DMatrix<f64>,
    mu: &DVector<f64>,
    s: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let as_ = a * s;
    (a * mu + c, &as_ + as_.transpose() + two_d)
}

/// Integrates the moment ODEs with classical RK4 on `steps` uniform steps.
pub fn propagate_moments(
    system: &LinearLangevinSystem,
    initial: &GaussianState,
    steps: usize,
) -> Result<MomentTrajectory> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {steps}")));
    }
    if initial.dim() != system.dim() {
        return Err(Error::Dimension {
            expected: system.dim(),
            found: initial.dim(),
        });
    }
    let initial = GaussianState::new(initial.mean.clone(), initial.cov.clone())?;
    let tau = system.horizon();
    let h = tau / steps as f64;
    let two_d = system.diffusion().matrix() * 2.0;
    let time = |k: usize| {
        if k == steps {
            tau
        } else {
            tau * k as f64 / steps as f64
        }
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut drifts = Vec::with_capacity(steps + 1);
    times.push(0.0);
    drifts.push(system.drift(0.0));
    states.push(initial);

    for k in 0..steps {
        let t0 = times[k];
        let t1 = time(k + 1);
        let tm = t0 + 0.5 * h;
        let (a0, c0) = &drifts[k];
        let (am, cm) = system.drift(tm);
        let (a1, c1) = system.drift(t1);
        let GaussianState { mean: mu, cov: s } = &states[k];

        let (k1m, k1s) = moment_rhs(a0, c0, &two_d, mu, s);
        let (k2m, k2s) = moment_rhs(&am, &cm, &two_d, &(mu + &k1m * (0.5 * h)), &(s + &k1s * (0.5 * h)));
        let (k3m, k3s) = moment_rhs(&am, &cm, &two_d, &(mu + &k2m * (0.5 * h)), &(s + &k2s * (0.5 * h)));
        let (k4m, k4s) = moment_rhs(&a1, &c1, &two_d, &(mu + &k3m * h), &(s + &k3s * h));

        let mu_next = mu + (k1m + &k2m * 2.0 + &k3m * 2.0 + k4m) * (h / 6.0);
        let s_next = symmetrize(&(s + (k1s + &k2s * 2.0 + &k3s * 2.0 + k4s) * (h / 6.0)));

        if s_next.iter().any(|x| !x.is_finite()) || s_next.clone().cholesky().is_none() {
            return Err(Error::CovarianceBreakdown {
                time: t1,
                eigenvalue: min_eigenvalue(&s_next),
            });
        }
        times.push(t1);
        drifts.push((a1, c1));
        states.push(GaussianState {
            mean: mu_next,
            cov: s_next,
        });
    }

    Ok(MomentTrajectory {
        times,
        states,
        drifts,
        system: system.clone(),
    })
}
