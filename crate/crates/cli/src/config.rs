//! Experiment configs. Every field has a default; unknown keys are rejected
//! and numeric fields are range-checked before any work starts.

use std::path::{Path, PathBuf};

use qhmm::workx::CaseStudyConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

pub trait Validate {
    fn validate(&self) -> Result<(), ConfigError>;
}

fn check(ok: bool, field: &str, msg: impl std::fmt::Display) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(format!("{field}: {msg}")))
    }
}

/// Reads `path` (or the defaults when absent) and validates it.
pub fn load<T: DeserializeOwned + Default + Validate>(path: Option<&Path>) -> Result<T, ConfigError> {
    let cfg: T = match path {
        None => T::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// SHA-256 of the config's canonical JSON, defaults filled in.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("configs serialize");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn validate_case_study(cs: &CaseStudyConfig) -> Result<(), ConfigError> {
    for (i, b) in cs.bloch.iter().enumerate() {
        let n = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        check(b.iter().all(|v| v.is_finite()) && n <= 1.0 + 1e-12, &format!("case_study.bloch[{i}]"), "must lie in the unit ball")?;
    }
    check(cs.bloch[0] != cs.bloch[1], "case_study.bloch", "the two memory states must differ")?;
    check(cs.inv_temperature > 0.0 && cs.inv_temperature.is_finite(), "case_study.inv_temperature", "must be positive")?;
    check((0.0..=1.0).contains(&cs.initial), "case_study.initial", "must be in [0, 1]")?;
    check((2..=10_001).contains(&cs.n_belief), "case_study.n_belief", "must be in [2, 10001]")?;
    check((2..=4096).contains(&cs.n_angle), "case_study.n_angle", "must be in [2, 4096]")?;
    check((0.0..0.5).contains(&cs.eps), "case_study.eps", "must be in [0, 1/2)")?;
    let (lo, hi) = cs.theta_bounds;
    check(0.0 <= lo && lo < hi && hi <= 1.0, "case_study.theta_bounds", "need 0 ≤ lo < hi ≤ 1")?;
    Ok(())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// JSON file with the tetrahedral Bloch vectors; built-in when absent.
    pub sic_fixture: Option<PathBuf>,
}

impl Validate for VerifyConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnConfig {
    pub theta: f64,
    pub horizons: Vec<usize>,
    pub episodes: usize,
    pub seeds: usize,
    pub delta: f64,
    /// Scale of the confidence radius.
    pub c: f64,
    pub grid_points: usize,
    pub case_study: CaseStudyConfig,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            theta: 0.8,
            horizons: vec![3, 4, 5],
            episodes: 500,
            seeds: 20,
            delta: 0.05,
            c: 1.0,
            grid_points: 64,
            case_study: CaseStudyConfig::default(),
        }
    }
}

impl Validate for LearnConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        validate_case_study(&self.case_study)?;
        let (lo, hi) = self.case_study.theta_bounds;
        check(self.theta >= lo && self.theta <= hi, "theta", format!("must be within θ bounds [{lo}, {hi}]"))?;
        check(!self.horizons.is_empty() && self.horizons.iter().all(|l| (1..=10).contains(l)), "horizons", "each L must be in [1, 10]")?;
        check((1..=1_000_000).contains(&self.episodes), "episodes", "must be in [1, 10⁶]")?;
        check((1..=10_000).contains(&self.seeds), "seeds", "must be in [1, 10⁴]")?;
        check(self.delta > 0.0 && self.delta < 1.0, "delta", "must be in (0, 1)")?;
        check(self.c > 0.0 && self.c.is_finite(), "c", "must be positive")?;
        check((2..=100_000).contains(&self.grid_points), "grid_points", "must be in [2, 10⁵]")?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    /// Bloch vector of the input state.
    pub rho: [f64; 3],
    /// Bloch vector of the target.
    pub target: [f64; 3],
    pub inv_temperature: f64,
    pub m_values: Vec<usize>,
    pub samples: usize,
    pub eps: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            rho: [0.0, 0.0, 1.0],
            target: [0.0, 0.0, 0.6],
            inv_temperature: 1.0,
            m_values: vec![100, 1_000, 10_000],
            samples: 100_000,
            eps: 0.0,
        }
    }
}

impl Validate for ProtocolConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        let norm = |b: &[f64; 3]| b.iter().map(|v| v * v).sum::<f64>().sqrt();
        check(norm(&self.rho) <= 1.0 + 1e-12, "rho", "must lie in the unit ball")?;
        check(norm(&self.target) < 1.0, "target", "must be full rank (|r| < 1)")?;
        check(self.inv_temperature > 0.0 && self.inv_temperature.is_finite(), "inv_temperature", "must be positive")?;
        check(!self.m_values.is_empty() && self.m_values.iter().all(|m| (1..=10_000_000).contains(m)), "m_values", "each M must be in [1, 10⁷]")?;
        check((2..=100_000_000).contains(&self.samples), "samples", "must be in [2, 10⁸]")?;
        check((0.0..0.5).contains(&self.eps), "eps", "must be in [0, 1/2)")?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanConfig {
    pub theta: f64,
    pub horizon: usize,
    pub case_study: CaseStudyConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { theta: 0.8, horizon: 3, case_study: CaseStudyConfig::default() }
    }
}

impl Validate for PlanConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        validate_case_study(&self.case_study)?;
        check((0.0..=1.0).contains(&self.theta), "theta", "must be in [0, 1]")?;
        check((1..=50).contains(&self.horizon), "horizon", "must be in [1, 50]")?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardnessConfig {
    /// Pulls per run; Δ defaults to √(3/(8N)).
    pub rounds: usize,
    pub delta: Option<f64>,
    /// Alternative arm of the pair, 1 to 3.
    pub alternative: usize,
    pub runs: usize,
    /// Observability of the shipped lock.
    pub lock_alpha: f64,
}

impl Default for HardnessConfig {
    fn default() -> Self {
        Self { rounds: 10_000, delta: None, alternative: 1, runs: 100, lock_alpha: qhmm::hardness::LOCK_ALPHA }
    }
}

impl Validate for HardnessConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        check((1..=10_000_000).contains(&self.rounds), "rounds", "must be in [1, 10⁷]")?;
        if let Some(d) = self.delta {
            check(d > 0.0 && d <= 1.0 / 6.0, "delta", "must be in (0, 1/6]")?;
        }
        check((1..=3).contains(&self.alternative), "alternative", "must be 1, 2 or 3")?;
        check((1..=100_000).contains(&self.runs), "runs", "must be in [1, 10⁵]")?;
        check(self.lock_alpha > 0.0 && self.lock_alpha < 1.0 / 3.0, "lock_alpha", "must be in (0, 1/3)")?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpandimConfig {
    /// qubit-projective-grid, projective-plus-biased or sic-orbit.
    pub preset: String,
    /// Number of measurements drawn for the preset.
    pub size: usize,
}

impl Default for SpandimConfig {
    fn default() -> Self {
        Self { preset: "qubit-projective-grid".into(), size: 32 }
    }
}

pub const PRESETS: [&str; 3] = ["qubit-projective-grid", "projective-plus-biased", "sic-orbit"];

impl Validate for SpandimConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        check(PRESETS.contains(&self.preset.as_str()), "preset", format!("must be one of {PRESETS:?}"))?;
        check((2..=10_000).contains(&self.size), "size", "must be in [2, 10⁴]")?;
        Ok(())
    }
}
