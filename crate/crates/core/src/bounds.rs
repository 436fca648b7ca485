//! Evaluation of the speed-limit and entropy inequalities on a computed
//! trajectory.
//!
//! Every report stores the side that must be larger as `lhs`, so a bound
//! holds when `slack = lhs − rhs` is nonnegative up to tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::current::{trajectory_rates, ActionBreakdown};
use crate::error::{Error, Result};
use crate::langevin::{Family, ForceRegime, GaussianState, MobilityMatrix, MomentTrajectory};
use crate::wasserstein::{marginal_coarse_action, w2_marginal_1d, w2_weighted_squared};

/// Default relative tolerance for bound checks.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Relative tolerance for the finite-difference speed check.
pub const SPEED_TOLERANCE: f64 = 1e-3;
/// Absolute floor, relative to the largest additive component.
const ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    Master,
    SpeedRate,
    AlphaFamily { alpha_x: f64, alpha_v: f64 },
    ControlEffort,
    CoarseXChain,
    CoarseVChain,
    KhodX,
    Khod2V,
    TightFrev0 { alpha_x: f64 },
    MargvFrev0,
    SigmaUpperA { alpha_x: f64 },
    SigmaUpperB,
    SimilFirr0,
    MargxFirr0,
    RlcCec,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Master => "MASTER",
            BoundKind::SpeedRate => "SPEED_RATE",
            BoundKind::AlphaFamily { .. } => "ALPHA_FAMILY",
            BoundKind::ControlEffort => "CONTROL_EFFORT",
            BoundKind::CoarseXChain => "COARSE_X_CHAIN",
            BoundKind::CoarseVChain => "COARSE_V_CHAIN",
            BoundKind::KhodX => "KHOD_X",
            BoundKind::Khod2V => "KHOD2_V",
            BoundKind::TightFrev0 { .. } => "TIGHT_FREV0",
            BoundKind::MargvFrev0 => "MARGV_FREV0",
            BoundKind::SigmaUpperA { .. } => "SIGMA_UPPER_A",
            BoundKind::SigmaUpperB => "SIGMA_UPPER_B",
            BoundKind::SimilFirr0 => "SIMIL_FIRR0",
            BoundKind::MargxFirr0 => "MARGX_FIRR0",
            BoundKind::RlcCec => "RLC_CEC",
        }
    }

    /// Every kind with default parameters.
    pub fn all() -> Vec<BoundKind> {
        vec![
            BoundKind::Master,
            BoundKind::SpeedRate,
            BoundKind::AlphaFamily {
                alpha_x: 1.0,
                alpha_v: 1.0,
            },
            BoundKind::ControlEffort,
            BoundKind::CoarseXChain,
            BoundKind::CoarseVChain,
            BoundKind::KhodX,
            BoundKind::Khod2V,
            BoundKind::TightFrev0 { alpha_x: 1.0 },
            BoundKind::MargvFrev0,
            BoundKind::SigmaUpperA { alpha_x: 1.0 },
            BoundKind::SigmaUpperB,
            BoundKind::SimilFirr0,
            BoundKind::MargxFirr0,
            BoundKind::RlcCec,
        ]
    }

    fn check_alpha(&self) -> Result<()> {
        let alphas: &[f64] = match self {
            BoundKind::AlphaFamily { alpha_x, alpha_v } => &[*alpha_x, *alpha_v],
            BoundKind::TightFrev0 { alpha_x } | BoundKind::SigmaUpperA { alpha_x } => &[*alpha_x],
            _ => &[],
        };
        match alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            Some(a) => Err(Error::InvalidParameter(format!(
                "{} needs positive α, got {a}",
                self.name()
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::AlphaFamily { alpha_x, alpha_v } => {
                write!(f, "{}({alpha_x},{alpha_v})", self.name())
            }
            BoundKind::TightFrev0 { alpha_x } | BoundKind::SigmaUpperA { alpha_x } => {
                write!(f, "{}({alpha_x})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}

impl Serialize for BoundKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    /// Parses `NAME` or `NAME(a,b)`; α parameters default to 1.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], &s[i + 1..s.len() - 1]),
            Some(_) => return Err(Error::Config(format!("malformed bound `{s}`"))),
            None => (s, ""),
        };
        let args: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad α `{a}` in `{s}`")))
                })
                .collect::<Result<_>>()?
        };
        let arg = |i: usize| args.get(i).copied().unwrap_or(1.0);
        let max_args = match name.to_ascii_uppercase().as_str() {
            "ALPHA_FAMILY" => 2,
            "TIGHT_FREV0" | "SIGMA_UPPER_A" => 1,
            _ => 0,
        };
        if args.len() > max_args {
            return Err(Error::Config(format!("too many parameters in `{s}`")));
        }
        let kind = match name.to_ascii_uppercase().as_str() {
            "MASTER" => BoundKind::Master,
            "SPEED_RATE" => BoundKind::SpeedRate,
            "ALPHA_FAMILY" => BoundKind::AlphaFamily {
                alpha_x: arg(0),
                alpha_v: arg(1),
            },
            "CONTROL_EFFORT" => BoundKind::ControlEffort,
            "COARSE_X_CHAIN" => BoundKind::CoarseXChain,
            "COARSE_V_CHAIN" => BoundKind::CoarseVChain,
            "KHOD_X" => BoundKind::KhodX,
            "KHOD2_V" => BoundKind::Khod2V,
            "TIGHT_FREV0" => BoundKind::TightFrev0 { alpha_x: arg(0) },
            "MARGV_FREV0" => BoundKind::MargvFrev0,
            "SIGMA_UPPER_A" => BoundKind::SigmaUpperA { alpha_x: arg(0) },
            "SIGMA_UPPER_B" => BoundKind::SigmaUpperB,
            "SIMIL_FIRR0" => BoundKind::SimilFirr0,
            "MARGX_FIRR0" => BoundKind::MargxFirr0,
            "RLC_CEC" => BoundKind::RlcCec,
            _ => return Err(Error::Config(format!("unknown bound `{s}`"))),
        };
        kind.check_alpha().map_err(|e| Error::Config(e.to_string()))?;
        Ok(kind)
    }
}

/// Second inequality of a chain `lhs ≥ rhs ≥ chain.rhs`, stored with the
/// same orientation convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLink {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// True when this inequality and every chained one hold.
    pub satisfied: bool,
    pub tolerance: f64,
    /// `lhs`, `rhs` and `slack` scale as `k_B` to this power.
    pub kb_power: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainLink>,
    pub terms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn holds(lhs: f64, rhs: f64, scale: f64, tol: f64) -> bool {
    let slack = lhs - rhs;
    let allowance = tol * lhs.abs().max(rhs.abs()) + ABS_FLOOR * scale;
    slack.is_finite() && slack >= -allowance
}

struct Builder {
    kind: BoundKind,
    tol: f64,
    kb_power: f64,
    terms: BTreeMap<String, f64>,
    flags: Vec<String>,
}

impl Builder {
    fn new(kind: BoundKind, tol: f64, kb_power: f64) -> Self {
        Self {
            kind,
            tol,
            kb_power,
            terms: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    fn term(&mut self, name: &str, value: f64) -> f64 {
        self.terms.insert(name.to_string(), value);
        value
    }

    /// `components` are the additive pieces summed into either side.
    fn finish(self, lhs: f64, rhs: f64, components: &[f64]) -> BoundReport {
        let scale = components.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        BoundReport {
            kind: self.kind,
            lhs,
            rhs,
            slack: lhs - rhs,
            satisfied: holds(lhs, rhs, scale, self.tol),
            tolerance: self.tol,
            kb_power: self.kb_power,
            chain: None,
            terms: self.terms,
            flags: self.flags,
        }
    }

    fn finish_chain(self, first: (f64, f64), second: (f64, f64), components: &[f64]) -> BoundReport {
        let scale = components.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let tol = self.tol;
        let mut report = self.finish(first.0, first.1, components);
        let link_ok = holds(second.0, second.1, scale, tol);
        report.satisfied &= link_ok;
        report.chain = Some(ChainLink {
            lhs: second.0,
            rhs: second.1,
            slack: second.0 - second.1,
            satisfied: link_ok,
        });
        report
    }
}

/// Shared physical constants extracted from an underdamped system.
struct Underdamped {
    mass: f64,
    friction: f64,
    temperature: f64,
    kb: f64,
}

fn underdamped(traj: &MomentTrajectory, kind: BoundKind) -> Result<Underdamped> {
    match traj.system.family() {
        Family::Underdamped(p) => Ok(Underdamped {
            mass: p.mass,
            friction: p.friction,
            temperature: traj.system.bath().temperature,
            kb: traj.system.bath().kb,
        }),
        _ => Err(Error::Applicability(format!("{} needs an underdamped system", kind.name()))),
    }
}

fn require_regime(traj: &MomentTrajectory, kind: BoundKind, regime: ForceRegime) -> Result<()> {
    traj.system
        .verify_regime(regime, &traj.times)
        .map_err(|why| Error::Applicability(format!("{}: {why}", kind.name())))
}

fn require_two_dims(traj: &MomentTrajectory, kind: BoundKind) -> Result<()> {
    if traj.system.dim() == 2 {
        Ok(())
    } else {
        Err(Error::Applicability(format!("{} needs a two-dimensional system", kind.name())))
    }
}

fn endpoints(traj: &MomentTrajectory) -> (&GaussianState, &GaussianState) {
    (traj.initial(), traj.terminal())
}

/// Evaluation options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub tolerance: f64,
    pub speed_tolerance: f64,
    /// Finite-difference lag for `SPEED_RATE`, as a fraction of `τ`.
    pub speed_delta_fraction: f64,
    /// Number of interior times probed by `SPEED_RATE`.
    pub speed_points: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            speed_tolerance: SPEED_TOLERANCE,
            speed_delta_fraction: 1e-3,
            speed_points: 20,
        }
    }
}

pub fn evaluate_bound(
    kind: BoundKind,
    traj: &MomentTrajectory,
    b: &ActionBreakdown,
) -> Result<BoundReport> {
    evaluate_bound_with(kind, traj, b, &BoundOptions::default())
}

pub fn evaluate_bound_with(
    kind: BoundKind,
    traj: &MomentTrajectory,
    b: &ActionBreakdown,
    opts: &BoundOptions,
) -> Result<BoundReport> {
    kind.check_alpha()?;
    let tau = traj.horizon();
    let mobility = traj.system.mobility();
    let (r0, r1) = endpoints(traj);
    let tol = opts.tolerance;

    match kind {
        BoundKind::Master => {
            let mut r = Builder::new(kind, tol, 1.0);
            let w2 = r.term("W2_M_sq", w2_weighted_squared(r0, r1, mobility)?);
            r.term("Sigma", b.sigma);
            r.term("Upsilon", b.upsilon);
            r.term("Phi", b.phi);
            let lhs = tau * (b.sigma + b.phi + b.upsilon);
            Ok(r.finish(lhs, w2, &[tau * b.sigma, tau * b.phi, tau * b.upsilon, w2]))
        }
        BoundKind::SpeedRate => speed_rate_sweep(traj, opts),
        BoundKind::AlphaFamily { alpha_x, alpha_v } => {
            require_two_dims(traj, kind)?;
            let mut r = Builder::new(kind, tol, 0.0);
            let m_alpha = mobility.scaled(&[alpha_x, alpha_v])?;
            let w2 = r.term("W2_Malpha_sq", w2_weighted_squared(r0, r1, &m_alpha)?);
            let alphas = [alpha_x, alpha_v];
            let upsilon_alpha = r.term(
                "Upsilon_alpha",
                b.coordinates.iter().zip(alphas).map(|(c, a)| a * c.upsilon).sum(),
            );
            // General M_α action; reduces to Υ_α + α_v(Φ + Σ) when the
            // irreversible current lives on coordinate 1 only.
            let denom = r.term(
                "action_alpha",
                b.coordinates.iter().zip(alphas).map(|(c, a)| a * c.full()).sum(),
            );
            r.term("paper_form_denominator", upsilon_alpha + alpha_v * (b.phi + b.sigma));
            let rhs = if denom > 0.0 {
                w2 / denom
            } else if w2 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(r.finish(tau, rhs, &[tau, rhs]))
        }
        BoundKind::ControlEffort => {
            let u = underdamped(traj, kind)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 0.0);
            let n = MobilityMatrix::new(&[u.friction * u.friction, u.mass * u.mass])?;
            let w2n = r.term("W2_N_sq", w2_weighted_squared(r0, r1, &n)?);
            let kbt = u.kb * u.temperature;
            let boundary = 2.0
                * u.friction
                * (p.delta_energy - u.temperature * b.sigma_sys - u.friction * kbt * tau / u.mass);
            let theta = r.term("Theta", w2n / tau + boundary);
            r.term("Fisher", p.fisher_integral);
            r.term("Delta_E_kin", p.delta_energy);
            r.term("Sigma_sys", b.sigma_sys);
            let lhs = r.term("control_effort", p.control_effort);
            let rhs = p.fisher_integral + theta;
            Ok(r.finish(lhs, rhs, &[lhs, p.fisher_integral, w2n / tau, boundary]))
        }
        BoundKind::CoarseXChain | BoundKind::CoarseVChain => {
            require_two_dims(traj, kind)?;
            let coord = if kind == BoundKind::CoarseXChain { 0 } else { 1 };
            let mut r = Builder::new(kind, tol, 0.0);
            let wm = mobility.entry(coord);
            let w2 = r.term("W2_marginal_sq", w2_marginal_1d(r0, r1, coord)?.powi(2));
            let coarse = r.term("coarse_action", marginal_coarse_action(traj, coord)?);
            let full = r.term("full_action", b.coordinates[coord].full());
            let ratio = |den: f64| {
                if den > 0.0 {
                    wm * w2 / den
                } else if w2 == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            };
            let (mid, low) = (ratio(coarse), ratio(full));
            r.term("tau_coarse", mid);
            r.term("tau_full", low);
            // The second link is equivalent to full ≥ coarse.
            Ok(r.finish_chain((tau, mid), (full, coarse), &[tau, mid, full, coarse]))
        }
        BoundKind::KhodX => {
            let u = underdamped(traj, kind)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 1.0);
            let wx = r.term("W2_x_sq", w2_marginal_1d(r0, r1, 0)?.powi(2));
            let dist = u.friction / (u.temperature * tau) * wx;
            let floor = u.friction * u.kb * tau / u.mass;
            r.term("Sigma_sys", b.sigma_sys);
            r.term("Sigma_pu", p.sigma_pu);
            let rhs = dist + b.sigma_sys + p.sigma_pu - floor;
            Ok(r.finish(b.sigma, rhs, &[b.sigma, dist, b.sigma_sys, p.sigma_pu, floor]))
        }
        BoundKind::Khod2V => {
            let u = underdamped(traj, kind)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 1.0);
            let wv = r.term("W2_v_sq", w2_marginal_1d(r0, r1, 1)?.powi(2));
            let dist = u.mass * u.mass / (u.friction * u.temperature * tau) * wv;
            let frev = r.term(
                "Frev_term",
                p.reversible_force_integral / (u.friction * u.temperature),
            );
            r.term("Upsilon_v", b.coordinates[1].upsilon);
            r.term("Phi", b.phi);
            let rhs = dist - frev - b.phi;
            Ok(r.finish(b.sigma, rhs, &[b.sigma, dist, frev, b.phi]))
        }
        BoundKind::TightFrev0 { alpha_x } => {
            let u = underdamped(traj, kind)?;
            require_regime(traj, kind, ForceRegime::Odd)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 1.0);
            let m_alpha = mobility.scaled(&[alpha_x, 1.0])?;
            let w2 = r.term("W2_Malpha_sq", w2_weighted_squared(r0, r1, &m_alpha)?);
            let kin = u.friction * alpha_x / u.temperature * p.kinetic_integral;
            r.term("kinetic_term", kin);
            r.term("Phi", b.phi);
            let rhs = w2 / tau - kin;
            Ok(r.finish(b.sigma, rhs, &[b.sigma, w2 / tau, kin]))
        }
        BoundKind::MargvFrev0 | BoundKind::MargxFirr0 => {
            underdamped(traj, kind)?;
            let (regime, coord) = if kind == BoundKind::MargvFrev0 {
                (ForceRegime::Odd, 1)
            } else {
                (ForceRegime::Even, 0)
            };
            require_regime(traj, kind, regime)?;
            let mut r = Builder::new(kind, tol, 1.0);
            let w2 = r.term("W2_marginal_sq", w2_marginal_1d(r0, r1, coord)?.powi(2));
            let coarse = r.term("coarse_entropy", marginal_coarse_action(traj, coord)?);
            let dist = r.term("distance_term", mobility.entry(coord) * w2 / tau);
            Ok(r.finish_chain((b.sigma, coarse), (coarse, dist), &[b.sigma, coarse, dist]))
        }
        BoundKind::SigmaUpperA { alpha_x } => {
            let u = underdamped(traj, kind)?;
            require_regime(traj, kind, ForceRegime::Even)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 1.0);
            let m_alpha = mobility.scaled(&[alpha_x, 1.0])?;
            let w2 = r.term("W2_Malpha_sq", w2_weighted_squared(r0, r1, &m_alpha)?);
            let upsilon_alpha = r.term(
                "Upsilon_alpha",
                alpha_x * b.coordinates[0].upsilon + b.coordinates[1].upsilon,
            );
            let energy = 2.0 * p.delta_energy / u.temperature;
            let b_alpha = r.term("B_alpha", 2.0 * b.sigma_sys - energy - w2 / tau);
            let lhs = upsilon_alpha + b_alpha;
            Ok(r.finish(lhs, b.sigma, &[upsilon_alpha, 2.0 * b.sigma_sys, energy, w2 / tau, b.sigma]))
        }
        BoundKind::SigmaUpperB => {
            let u = underdamped(traj, kind)?;
            require_regime(traj, kind, ForceRegime::Even)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 1.0);
            let wv = r.term("W2_v_sq", w2_marginal_1d(r0, r1, 1)?.powi(2));
            let dist = u.mass * u.mass / (u.friction * u.temperature * tau) * wv;
            let energy = 2.0 * p.delta_energy / u.temperature;
            let bb = r.term("B", 2.0 * b.sigma_sys - energy - dist);
            let frev = r.term(
                "Frev_term",
                p.reversible_force_integral / (u.friction * u.temperature),
            );
            Ok(r.finish(frev + bb, b.sigma, &[frev, 2.0 * b.sigma_sys, energy, dist, b.sigma]))
        }
        BoundKind::SimilFirr0 => {
            let u = underdamped(traj, kind)?;
            require_regime(traj, kind, ForceRegime::Even)?;
            let p = b.physical()?;
            let mut r = Builder::new(kind, tol, 0.0);
            let n = MobilityMatrix::new(&[u.friction * u.friction, u.mass * u.mass])?;
            let w2n = r.term("W2_N_sq", w2_weighted_squared(r0, r1, &n)?);
            let kbt = u.kb * u.temperature;
            let boundary = u.friction
                * (2.0 * p.delta_energy - u.temperature * b.sigma_sys - u.friction * kbt * tau / u.mass);
            let gamma = r.term("Gamma", w2n / tau + boundary);
            let pumped = r.term("pumped_term", u.friction * u.temperature * p.sigma_pu);
            let lhs = r.term("control_effort", p.control_effort);
            Ok(r.finish(lhs, pumped + gamma, &[lhs, pumped, w2n / tau, boundary]))
        }
        BoundKind::RlcCec => {
            let params = traj
                .system
                .rlc_params()
                .ok_or_else(|| Error::Applicability("RLC_CEC needs an RLC system".into()))?;
            let p = b.physical()?;
            let (res, cap) = (params.resistance, params.capacitance);
            let bath = traj.system.bath();
            let mut r = Builder::new(kind, tol, 0.0);
            let n = MobilityMatrix::new(&[1.0 / (res * res), 1.0])?;
            let w2n = r.term("W2_N_sq", w2_weighted_squared(r0, r1, &n)?);
            let bb = r.term(
                "B",
                2.0 * p.delta_energy - bath.temperature * b.sigma_sys - bath.kbt() * tau / (res * cap),
            );
            r.term("Delta_E_cap", p.delta_energy);
            r.term("Sigma_sys", b.sigma_sys);
            let lhs = r.term("control_effort", p.control_effort);
            Ok(r.finish(lhs, w2n / tau + bb / res, &[lhs, w2n / tau, bb / res]))
        }
    }
}

/// Bounds that apply to the trajectory's system with its declared regime.
pub fn applicable_bounds(traj: &MomentTrajectory) -> Vec<BoundKind> {
    let system = &traj.system;
    let mut kinds = vec![BoundKind::Master, BoundKind::SpeedRate];
    if system.dim() == 2 {
        kinds.extend([
            BoundKind::AlphaFamily {
                alpha_x: 1.0,
                alpha_v: 1.0,
            },
            BoundKind::AlphaFamily {
                alpha_x: 0.1,
                alpha_v: 1.0,
            },
            BoundKind::CoarseXChain,
            BoundKind::CoarseVChain,
        ]);
    }
    match system.family() {
        Family::Underdamped(_) => {
            kinds.extend([BoundKind::ControlEffort, BoundKind::KhodX, BoundKind::Khod2V]);
            let even = system.verify_regime(ForceRegime::Even, &traj.times).is_ok();
            let odd = system.verify_regime(ForceRegime::Odd, &traj.times).is_ok();
            if system.regime() == ForceRegime::Even && even {
                kinds.extend([
                    BoundKind::SigmaUpperA { alpha_x: 1.0 },
                    BoundKind::SigmaUpperA { alpha_x: 0.1 },
                    BoundKind::SigmaUpperB,
                    BoundKind::SimilFirr0,
                    BoundKind::MargxFirr0,
                ]);
            }
            if system.regime() == ForceRegime::Odd && odd {
                kinds.extend([
                    BoundKind::TightFrev0 { alpha_x: 1.0 },
                    BoundKind::TightFrev0 { alpha_x: 0.1 },
                    BoundKind::MargvFrev0,
                ]);
            }
        }
        Family::Rlc(_) => kinds.push(BoundKind::RlcCec),
        Family::Custom(_) => {}
    }
    kinds
}

/// Nearest grid index to `t`.
fn grid_index(traj: &MomentTrajectory, t: f64) -> usize {
    let k = (t / traj.step_size()).round();
    (k.max(0.0) as usize).min(traj.steps())
}

/// Finite-difference check `W₂,M(ρ_t, ρ_{t+δ})/δ ≤ √(σ_t + φ_t + y_t)`.
/// `t` and `t + δ` are snapped to the grid; `δ` must span at least two
/// steps.
pub fn speed_rate_check(traj: &MomentTrajectory, t: f64, delta: f64, tol: f64) -> Result<BoundReport> {
    let rates = trajectory_rates(traj)?;
    speed_rate_with_rates(traj, &rates, t, delta, tol)
}

fn speed_rate_with_rates(
    traj: &MomentTrajectory,
    rates: &[crate::current::ActionRates],
    t: f64,
    delta: f64,
    tol: f64,
) -> Result<BoundReport> {
    let h = traj.step_size();
    let k0 = grid_index(traj, t);
    let lag = (delta / h).round() as usize;
    if lag < 2 {
        return Err(Error::InvalidParameter(format!(
            "speed check lag δ = {delta:e} spans fewer than 2 grid steps (h = {h:e})"
        )));
    }
    if !(t >= 0.0) || k0 + lag > traj.steps() {
        return Err(Error::InvalidParameter(format!(
            "speed check window [{t}, {}] leaves the grid",
            t + delta
        )));
    }
    let k1 = k0 + lag;
    let t0 = traj.times[k0];
    let dt = traj.times[k1] - t0;
    let mut r = Builder::new(BoundKind::SpeedRate, tol, 0.5);
    r.term("t", t0);
    r.term("delta", dt);
    let w = w2_weighted_squared(&traj.states[k0], &traj.states[k1], traj.system.mobility())?.sqrt();
    let speed = r.term("wasserstein_speed", w / dt);
    let radicand = r.term("rate_sum", rates[k0].total());
    let rhs_sqrt = if radicand < 0.0 {
        r.flags.push("negative radicand clamped to zero".into());
        0.0
    } else {
        radicand.sqrt()
    };
    let path_avg = rates[k0..=k1].iter().map(|x| x.total().max(0.0).sqrt()).sum::<f64>() / (lag + 1) as f64;
    r.term("path_average_rate", path_avg);
    Ok(r.finish(rhs_sqrt, speed, &[rhs_sqrt, speed]))
}

/// Probes `opts.speed_points` interior times and reports the one with the
/// smallest relative slack.
fn speed_rate_sweep(traj: &MomentTrajectory, opts: &BoundOptions) -> Result<BoundReport> {
    let rates = trajectory_rates(traj)?;
    let tau = traj.horizon();
    let delta = (opts.speed_delta_fraction * tau).max(2.0 * traj.step_size());
    let usable = tau - delta;
    let count = opts.speed_points.max(1);
    let mut worst: Option<BoundReport> = None;
    let mut failures = 0usize;
    for i in 1..=count {
        let t = usable * i as f64 / (count + 1) as f64;
        let rep = speed_rate_with_rates(traj, &rates, t, delta, opts.speed_tolerance)?;
        if !rep.satisfied {
            failures += 1;
        }
        let rel = |r: &BoundReport| r.slack / r.lhs.abs().max(r.rhs.abs()).max(f64::MIN_POSITIVE);
        if worst.as_ref().map_or(true, |w| rel(&rep) < rel(w)) {
            worst = Some(rep);
        }
    }
    let mut rep = worst.expect("at least one probe");
    rep.satisfied = failures == 0;
    rep.terms.insert("probes".into(), count as f64);
    rep.terms.insert("failed_probes".into(), failures as f64);
    Ok(rep)
}

/// Transition-time lower bounds of the quadratic-trap example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauBounds {
    pub tau24: f64,
    pub tau25: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub discriminant: f64,
    /// Which quadratic root was taken; always the `+√` root as printed.
    pub root: &'static str,
}

pub fn tau_lower_bounds(traj: &MomentTrajectory, breakdown: &ActionBreakdown) -> Result<TauBounds> {
    let p = breakdown.physical()?;
    let u = underdamped(traj, BoundKind::SimilFirr0)?;
    let tau = traj.horizon();
    let (r0, r1) = endpoints(traj);
    let kbt = u.kb * u.temperature;
    let n = MobilityMatrix::new(&[u.friction * u.friction, u.mass * u.mass])?;
    let ce = p.control_effort / tau;
    let ep = breakdown.sigma / tau;
    let a = ce + u.friction * u.friction * kbt / u.mass;
    let b = u.friction * u.temperature * breakdown.sigma_sys - 2.0 * u.friction * p.delta_energy;
    let c = -w2_weighted_squared(r0, r1, &n)?;
    let wx = w2_marginal_1d(r0, r1, 0)?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("quadratic coefficient a = {a:e} must be positive")));
    }
    let d = if wx == 0.0 {
        0.0
    } else if !(ep > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "entropy production rate {ep:e} is not positive although the marginal distance is {wx:e}"
        )));
    } else {
        u.friction / (u.temperature * ep) * wx * wx
    };
    let discriminant = b * b - 4.0 * a * c;
    debug_assert!(discriminant >= 0.0);
    Ok(TauBounds {
        tau24: (-b + discriminant.max(0.0).sqrt()) / (2.0 * a),
        tau25: d.sqrt(),
        a,
        b,
        c,
        d,
        discriminant,
        root: "plus",
    })
}
