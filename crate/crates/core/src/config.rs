//! Run configuration read from TOML.
//!
//! ```toml
//! scenario = "trap"            # trap | rlc | custom
//! seed = 7
//!
//! [trap]
//! friction = 1e-10
//! steps = 10000
//! initial = "equilibrium"      # or { mean = [0, 0], cov = [1, 0, 0, 1] }
//! protocol = { kind = "stiffness", stiffness = { kind = "constant", value = 2e-10 } }
//!
//! [bounds]
//! list = ["MASTER", "ALPHA_FAMILY(0.5,1)"]
//! ```
//!
//! Every section is optional and falls back to the documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundKind, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::langevin::{
    Bath, CustomDrift, DiffusionMatrix, ForceRegime, GaussianState, LinearLangevinSystem, MobilityMatrix,
    ParitySignature,
};
use crate::scenarios::{figure1_default_grid, log_grid, InitialState, RlcScenario, TrapScenario};
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Trap,
    Rlc,
    #[serde(alias = "custom-linear", alias = "custom_linear")]
    Custom,
}

/// General linear system given entrywise; matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    pub drift: Vec<Vec<Schedule>>,
    pub offset: Vec<Schedule>,
    pub diffusion: Vec<f64>,
    pub parity: Vec<i32>,
    pub mobility: Vec<f64>,
    #[serde(default = "default_kb")]
    pub kb: f64,
    pub temperature: f64,
    pub horizon: f64,
    pub initial: InitialState,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_kb() -> f64 {
    Bath::KB_DEFAULT
}

fn default_steps() -> usize {
    10_000
}

impl CustomScenario {
    pub fn system(&self) -> Result<LinearLangevinSystem> {
        let n = self.parity.len();
        if self.diffusion.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: self.diffusion.len(),
            });
        }
        LinearLangevinSystem::custom(
            CustomDrift {
                a: self.drift.clone(),
                c: self.offset.clone(),
            },
            DiffusionMatrix::new(nalgebra::DMatrix::from_row_slice(n, n, &self.diffusion))?,
            ParitySignature::new(&self.parity)?,
            MobilityMatrix::new(&self.mobility)?,
            Bath::new(self.kb, self.temperature)?,
            self.horizon,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Bound names; empty selects every bound applicable to the scenario.
    pub list: Vec<String>,
    pub tolerance: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            list: Vec::new(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit `γ/m` values; overrides `min`/`max`/`points`.
    pub grid: Option<Vec<f64>>,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            grid: None,
            min: 1e-2,
            max: 1e4,
            points: 40,
        }
    }
}

impl SweepSection {
    pub fn values(&self) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.clone(),
            None if *self == Self::default() => figure1_default_grid(),
            None => log_grid(self.min, self.max, self.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Relative tolerance for the exact identities.
    pub tolerance: f64,
    /// Relative tolerance for entropy bookkeeping at the configured steps.
    pub bookkeeping_tolerance: f64,
    pub mc_paths: usize,
    pub random_cases: usize,
    pub ot_pairs: usize,
    pub metric_triples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            bookkeeping_tolerance: 1e-4,
            mc_paths: 10_000,
            random_cases: 8,
            ot_pairs: 5,
            metric_triples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Report entropy-like quantities in J/K instead of units of `k_B`.
    pub si: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            si: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub threads: Option<usize>,
    #[serde(with = "seed_repr")]
    pub seed: u64,
    /// Declared force regime for the trap scenario.
    pub regime: Option<ForceRegime>,
    pub trap: TrapScenario,
    pub rlc: RlcScenario,
    pub custom: Option<CustomScenario>,
    pub bounds: BoundsSection,
    pub sweep: SweepSection,
    pub check: CheckSection,
    pub output: OutputSection,
}

/// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written
/// as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*v) {
            Ok(i) => s.serialize_i64(i),
            Err(_) => s.collect_str(v),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fully resolved configuration, as embedded in output headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn config_error(e: Error) -> Error {
        match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        }
    }

    /// Checks every section that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.trap.system().map_err(Self::config_error)?;
        self.rlc.system().map_err(Self::config_error)?;
        let system = self.system().map_err(Self::config_error)?;
        self.initial(&system).map_err(Self::config_error)?;
        self.bound_kinds()?;
        if !(self.bounds.tolerance >= 0.0) {
            return Err(Error::Config("bounds.tolerance must be nonnegative".into()));
        }
        let grid = self.sweep.values();
        if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::Config("sweep grid values must be positive and finite".into()));
        }
        if self.sweep.grid.is_none() && !(self.sweep.min > 0.0 && self.sweep.max >= self.sweep.min && self.sweep.points > 0) {
            return Err(Error::Config("sweep needs 0 < min ≤ max and points ≥ 1".into()));
        }
        let c = &self.check;
        if !(c.tolerance >= 0.0 && c.bookkeeping_tolerance >= 0.0) {
            return Err(Error::Config("check tolerances must be nonnegative".into()));
        }
        if c.mc_paths < crate::mc::MIN_PATHS {
            return Err(Error::Config(format!("check.mc_paths must be at least {}", crate::mc::MIN_PATHS)));
        }
        Ok(())
    }

    pub fn bound_kinds(&self) -> Result<Option<Vec<BoundKind>>> {
        if self.bounds.list.is_empty() {
            return Ok(None);
        }
        self.bounds
            .list
            .iter()
            .map(|s| s.parse::<BoundKind>().map_err(Self::config_error))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn system(&self) -> Result<LinearLangevinSystem> {
        match self.scenario {
            ScenarioKind::Trap => {
                let s = self.trap.system()?;
                Ok(match self.regime {
                    Some(r) => s.with_regime(r),
                    None => s,
                })
            }
            ScenarioKind::Rlc => self.rlc.system(),
            ScenarioKind::Custom => self
                .custom
                .as_ref()
                .ok_or_else(|| Error::Config("scenario = \"custom\" needs a [custom] section".into()))?
                .system(),
        }
    }

    pub fn steps(&self) -> usize {
        match self.scenario {
            ScenarioKind::Trap => self.trap.steps,
            ScenarioKind::Rlc => self.rlc.steps,
            ScenarioKind::Custom => self.custom.as_ref().map_or(default_steps(), |c| c.steps),
        }
    }

    pub fn initial(&self, system: &LinearLangevinSystem) -> Result<GaussianState> {
        match self.scenario {
            ScenarioKind::Trap => self.trap.initial.resolve(system),
            ScenarioKind::Rlc => self.rlc.initial.resolve(system),
            ScenarioKind::Custom => self
                .custom
                .as_ref()
                .ok_or_else(|| Error::Config("missing [custom] section".into()))?
                .initial
                .resolve(system),
        }
    }

    /// Names of the phase-space coordinates used in CSV headers.
    pub fn coordinate_labels(&self, dim: usize) -> Vec<String> {
        match self.scenario {
            ScenarioKind::Trap => vec!["x".into(), "v".into()],
            ScenarioKind::Rlc => vec!["phi".into(), "q".into()],
            ScenarioKind::Custom => (0..dim).map(|i| format!("z{i}")).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::from_toml(
            r#"
scenario = "rlc"
[rlc]
inductance = { kind = "constant", value = 1e-3 }
initial = "equilibrium"
[bounds]
list = ["RLC_CEC", "ALPHA_FAMILY(0.5,1)"]
"#,
        )
        .unwrap();
        assert_eq!(cfg.bound_kinds().unwrap().unwrap().len(), 2);
        let s = cfg.system().unwrap();
        assert_eq!(cfg.initial(&s).unwrap().dim(), 2);
    }

    #[test]
    fn bad_configs_rejected() {
        for text in [
            "scenario = \"nope\"",
            "unknown_key = 1",
            "[trap]\nhorizon = 2.5",
            "[bounds]\nlist = [\"WHAT\"]",
            "scenario = \"custom\"",
            "threads = 0",
            "[trap]\nmass = -1",
        ] {
            let err = RunConfig::from_toml(text).unwrap_err();
            assert!(err.is_configuration(), "{text}: {err}");
        }
    }

    #[test]
    fn custom_scenario() {
        let cfg = RunConfig::from_toml(
            r#"
scenario = "custom-linear"
[custom]
drift = [[{ kind = "constant", value = -1.0 }]]
offset = [{ kind = "constant", value = 0.0 }]
diffusion = [1.0]
parity = [1]
mobility = [1.0]
kb = 1.0
temperature = 1.0
horizon = 1.0
initial = { mean = [1.0], cov = [0.5] }
"#,
        )
        .unwrap();
        assert_eq!(cfg.system().unwrap().dim(), 1);
    }
}
