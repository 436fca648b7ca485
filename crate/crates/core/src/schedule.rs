//! Scalar time protocols used to build time-dependent drifts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sinusoidal modulation term: `amplitude · sin(2π·frequency·t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// A scalar function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant {
        value: f64,
    },
    /// Straight line from `start` at t = 0 to `end` at t = `horizon`.
    Linear {
        start: f64,
        end: f64,
        horizon: f64,
    },
    /// `4 k_B T / (2 - t)² + γ / (2 - t)`, evaluated literally in SI units.
    /// The pole sits at t = 2.
    MinEntropyTrap {
        kbt: f64,
        friction: f64,
    },
    /// Piecewise-linear interpolation through `(times[i], values[i])`.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    /// `base · (1 + Σ amplitude·sin(2π·frequency·t + phase))`.
    Harmonic {
        base: f64,
        terms: Vec<HarmonicTerm>,
    },
}

impl Schedule {
    pub const ZERO: Schedule = Schedule::Constant { value: 0.0 };

    pub fn constant(value: f64) -> Self {
        Schedule::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant { value } => *value,
            Schedule::Linear {
                start,
                end,
                horizon,
            } => start + (end - start) * t / horizon,
            Schedule::MinEntropyTrap { kbt, friction } => {
                let r = 2.0 - t;
                if r <= 0.0 {
                    f64::NAN
                } else {
                    4.0 * kbt / (r * r) + friction / r
                }
            }
            Schedule::Tabulated { times, values } => interpolate(times, values, t),
            Schedule::Harmonic { base, terms } => {
                let modulation: f64 = terms
                    .iter()
                    .map(|h| h.amplitude * (2.0 * PI * h.frequency * t + h.phase).sin())
                    .sum();
                base * (1.0 + modulation)
            }
        }
    }

    /// True when the schedule is the constant zero function.
    pub fn is_zero(&self) -> bool {
        matches!(self, Schedule::Constant { value } if *value == 0.0)
    }

    /// Rejects schedules that are singular, undefined, or non-finite on
    /// `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let singular = |reason: String| Error::SingularProtocol { horizon, reason };
        match self {
            Schedule::MinEntropyTrap { .. } if horizon >= 2.0 => {
                return Err(singular("minimum-entropy trap protocol has a pole at t = 2".into()))
            }
            Schedule::Linear { horizon: h, .. } if !(*h > 0.0) => {
                return Err(singular(format!("linear ramp horizon {h} must be positive")))
            }
            Schedule::Tabulated { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(singular("tabulated protocol needs ≥ 2 (time, value) pairs".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(singular("tabulated times must be strictly increasing".into()));
                }
                if times[0] > 0.0 || *times.last().unwrap() < horizon {
                    return Err(singular(format!(
                        "tabulated protocol covers [{}, {}] only",
                        times[0],
                        times.last().unwrap()
                    )));
                }
            }
            _ => {}
        }
        const PROBES: usize = 1000;
        for i in 0..=PROBES {
            let t = horizon * i as f64 / PROBES as f64;
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(singular(format!("value {v} at t = {t}")));
            }
        }
        Ok(())
    }

    /// Smallest value seen on a uniform probe grid over `[0, horizon]`.
    pub fn min_on(&self, horizon: f64) -> f64 {
        (0..=1000)
            .map(|i| self.eval(horizon * i as f64 / 1000.0))
            .fold(f64::INFINITY, f64::min)
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if times.is_empty() {
        return f64::NAN;
    }
    if t <= times[0] {
        return values[0];
    }
    if t >= times[times.len() - 1] {
        return values[values.len() - 1];
    }
    let k = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] * (1.0 - w) + values[k] * w
}
