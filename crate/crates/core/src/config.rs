//! JSON run configuration. Every field is optional; omitted fields take the
//! reference values (Jaynes–Cummings, dt = 0.01, N = 10⁵, seed 0).

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::models::{LadderStart, ModelKind, ModelParams, ModelSpec};

/// A real amplitude or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Amplitude> for C64 {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Real(x) => C64::new(x, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub name: ModelKind,
    pub detunings: Option<Vec<f64>>,
    pub coupling: Option<f64>,
    pub width: Option<f64>,
    pub cavity_freq: Option<f64>,
    pub initial_state: Option<Vec<Amplitude>>,
    pub ladder_start: LadderStart,
    pub lamb_shift: bool,
    /// Constant decay rates per channel instead of the structured reservoir.
    pub constant_rates: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: ModelKind::JaynesCummings,
            detunings: None,
            coupling: None,
            width: None,
            cavity_freq: None,
            initial_state: None,
            ladder_start: LadderStart::Mixed,
            lamb_shift: false,
            constant_rates: None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        let params = ModelParams {
            detunings: self.detunings.clone(),
            coupling: self.coupling,
            width: self.width,
            cavity_freq: self.cavity_freq,
            initial_state: self.initial_state.as_ref().map(|v| v.iter().map(|&a| a.into()).collect()),
            ladder_start: self.ladder_start,
            lamb_shift_enabled: self.lamb_shift,
            constant_rates: self.constant_rates.clone(),
        };
        ModelSpec::build(self.name, &params).map_err(|e| match e {
            Error::ZeroNorm(_) => Error::Validation("model.initial_state must not be the zero vector".into()),
            Error::DimensionMismatch { expected, found } => Error::Validation(format!(
                "model.initial_state has {found} amplitudes, {} needs {expected}",
                self.name
            )),
            other => other,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub prefix: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), prefix: "run".into(), formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonConfig {
    pub analytic: bool,
    pub rk4: bool,
    /// Ensemble vs oracle tolerance; `None` means `max(0.01, 3/√N)`.
    pub statistical_tol: Option<f64>,
    pub oracle_tol: f64,
    pub rk4_refine: usize,
    pub positivity_tol: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self { analytic: true, rk4: true, statistical_tol: None, oracle_tol: 1e-6, rk4_refine: 10, positivity_tol: 1e-6 }
    }
}

impl ComparisonConfig {
    pub fn statistical_tol(&self, n: u64) -> f64 {
        self.statistical_tol.unwrap_or_else(|| statistical_tolerance(n))
    }
}

/// About six binomial standard deviations at worst-case variance, never
/// below 0.01.
pub fn statistical_tolerance(n: u64) -> f64 {
    (3.0 / (n as f64).sqrt()).max(0.01)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub engine: EngineConfig,
    pub outputs: OutputConfig,
    pub comparison: ComparisonConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.model.build()?;
        let c = &self.comparison;
        if !(c.oracle_tol > 0.0) || c.statistical_tol.is_some_and(|t| !(t > 0.0)) || !(c.positivity_tol >= 0.0) {
            return Err(Error::Validation("comparison tolerances must be positive".into()));
        }
        if c.rk4_refine < 1 {
            return Err(Error::Validation("comparison.rk4_refine must be at least 1".into()));
        }
        if self.outputs.prefix.is_empty() || self.outputs.prefix.contains(['/', '\\']) {
            return Err(Error::Validation("outputs.prefix must be a plain file name stem".into()));
        }
        Ok(())
    }
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg.model.name, ModelKind::JaynesCummings);
        assert_eq!(cfg.engine.dt, 0.01);
        assert_eq!(cfg.engine.ensemble_size, 100_000);
        assert_eq!(cfg.engine.rng_seed, 0);
        assert_eq!(cfg.engine.record_stride, 10);
        assert_eq!(cfg.engine.max_jump_prob, 0.1);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(parse_config(r#"{"engine": {"dt": -1}}"#), Err(Error::Validation(_))));
        assert!(matches!(parse_config(r#"{"engine": {"ensemble_size": 0}}"#), Err(Error::Validation(_))));
        assert!(matches!(
            parse_config(r#"{"model": {"name": "vee", "initial_state": [1, 0]}}"#),
            Err(Error::Validation(_))
        ));
        assert!(matches!(parse_config(r#"{"model": {"coupling": -2}}"#), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_keys_and_bad_json_report_location() {
        let err = parse_config("{\n  \"engine\": {\"dtt\": 0.1}\n}").unwrap_err().to_string();
        assert!(err.contains("dtt") && err.contains("line 2"), "{err}");
        assert!(matches!(parse_config("{"), Err(Error::Parse(_))));
        assert!(matches!(parse_config(r#"{"model": {"name": "tripod"}}"#), Err(Error::Parse(_))));
    }

    #[test]
    fn lambda_by_name() {
        let cfg = parse_config(r#"{"model": {"name": "lambda"}}"#).unwrap();
        let m = cfg.model.build().unwrap();
        let dets: Vec<_> = m.channels.iter().map(|c| c.rate.detuning().unwrap()).collect();
        assert_eq!(dets, vec![-3.0, 5.0]);
        match m.channels[0].rate {
            crate::reservoir::RateFunction::Lorentzian(r) => assert_eq!(r.reservoir.coupling, 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn complex_amplitudes_and_round_trip() {
        let cfg = parse_config(
            r#"{"model": {"name": "jaynes_cummings", "initial_state": [[0, 1], 1]}, "engine": {"ensemble_size": 10}}"#,
        )
        .unwrap();
        let m = cfg.model.build().unwrap();
        assert!((m.initial_state.amplitudes()[0] - C64::new(0.0, 0.5f64.sqrt())).norm() < 1e-15);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn tolerance_scales_with_ensemble() {
        assert_eq!(statistical_tolerance(100_000), 0.01);
        assert!((statistical_tolerance(10_000) - 0.03).abs() < 1e-15);
    }
}
