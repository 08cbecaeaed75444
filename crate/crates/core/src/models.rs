//! The two- and three-level atom configurations and the container the engine
//! and the oracles consume.
//!
//! Levels are ordered `a, b, c` (index 0, 1, 2); in every geometry `a` is the
//! highest level that has a decay channel out of it.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Operator, StateVector};
use crate::reservoir::{ChannelRate, LorentzianReservoir, RateFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    JaynesCummings,
    Lambda,
    Vee,
    Ladder,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::JaynesCummings, ModelKind::Lambda, ModelKind::Vee, ModelKind::Ladder];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::JaynesCummings => "jaynes_cummings",
            ModelKind::Lambda => "lambda",
            ModelKind::Vee => "vee",
            ModelKind::Ladder => "ladder",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ModelKind::JaynesCummings => 2,
            _ => 3,
        }
    }

    /// `(to, from)` level pairs of the jump operators, in channel order.
    fn transitions(self) -> &'static [(usize, usize)] {
        match self {
            ModelKind::JaynesCummings => &[(1, 0)],
            ModelKind::Lambda => &[(1, 0), (2, 0)],
            ModelKind::Vee => &[(2, 0), (2, 1)],
            ModelKind::Ladder => &[(1, 0), (2, 1)],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "jaynes_cummings" | "jc" => Ok(ModelKind::JaynesCummings),
            "lambda" => Ok(ModelKind::Lambda),
            "vee" | "v" => Ok(ModelKind::Vee),
            "ladder" => Ok(ModelKind::Ladder),
            _ => Err(Error::UnsupportedModel(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderStart {
    #[default]
    Mixed,
    Excited,
}

/// One decay channel: jump operator `|to⟩⟨from|` and its rate functions.
#[derive(Clone, Debug)]
pub struct ChannelSpec {
    pub label: usize,
    pub jump_op: Operator,
    pub rate: RateFunction,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub basis_labels: Vec<String>,
    pub channels: Vec<ChannelSpec>,
    pub initial_state: StateVector,
    pub lamb_shift_enabled: bool,
    /// `C_j†C_j` per channel, cached.
    number_ops: Vec<Operator>,
}

/// Overridable physical parameters. `None` keeps the default of the geometry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelParams {
    pub detunings: Option<Vec<f64>>,
    pub coupling: Option<f64>,
    pub width: Option<f64>,
    pub cavity_freq: Option<f64>,
    pub initial_state: Option<Vec<C64>>,
    pub ladder_start: LadderStart,
    pub lamb_shift_enabled: bool,
    /// Replace the structured-reservoir rates by constant (Markovian) ones.
    pub constant_rates: Option<Vec<f64>>,
}

fn real_amps(amps: &[f64]) -> Vec<C64> {
    amps.iter().map(|&a| C64::new(a, 0.0)).collect()
}

impl ModelSpec {
    pub fn new(
        kind: ModelKind,
        channels: Vec<ChannelSpec>,
        initial_state: StateVector,
        lamb_shift_enabled: bool,
    ) -> Result<Self> {
        let d = kind.dim();
        if initial_state.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: initial_state.dim() });
        }
        for ch in &channels {
            if ch.jump_op.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: ch.jump_op.dim() });
            }
        }
        let initial_state = initial_state.normalize()?;
        let number_ops = channels.iter().map(|c| &c.jump_op.adjoint() * &c.jump_op).collect();
        let basis_labels = ["a", "b", "c"][..d].iter().map(|s| s.to_string()).collect();
        Ok(Self { kind, basis_labels, channels, initial_state, lamb_shift_enabled, number_ops })
    }

    pub fn build(kind: ModelKind, params: &ModelParams) -> Result<Self> {
        let (coupling, detunings, initial): (f64, Vec<f64>, Vec<f64>) = match kind {
            ModelKind::JaynesCummings => (5.0, vec![5.0], vec![3.0, 2.0]),
            ModelKind::Lambda => (2.0, vec![-3.0, 5.0], vec![4.0, 2.0, 1.0]),
            ModelKind::Vee => (2.0, vec![-3.0, 5.0], vec![1.0, 1.0, 1.0]),
            ModelKind::Ladder => match params.ladder_start {
                LadderStart::Mixed => (2.0, vec![-3.0, 5.0], vec![4.0, 2.0, 1.0]),
                LadderStart::Excited => (2.0, vec![-3.0, 5.0], vec![1.0, 0.0, 0.0]),
            },
        };
        let transitions = kind.transitions();
        let detunings = params.detunings.clone().unwrap_or(detunings);
        if detunings.len() != transitions.len() {
            return Err(Error::Validation(format!(
                "{kind} needs {} detunings, got {}",
                transitions.len(),
                detunings.len()
            )));
        }
        let reservoir = LorentzianReservoir::new(
            params.coupling.unwrap_or(coupling),
            params.width.unwrap_or(1.0),
            params.cavity_freq.unwrap_or(LorentzianReservoir::default().cavity_freq),
        )?;
        if let Some(rates) = &params.constant_rates {
            if rates.len() != transitions.len() {
                return Err(Error::Validation(format!(
                    "{kind} needs {} constant rates, got {}",
                    transitions.len(),
                    rates.len()
                )));
            }
        }
        let d = kind.dim();
        let channels = transitions
            .iter()
            .enumerate()
            .map(|(j, &(to, from))| ChannelSpec {
                label: j + 1,
                jump_op: Operator::transition(d, to, from),
                rate: match &params.constant_rates {
                    Some(r) => RateFunction::Constant { decay: r[j], lamb_shift: 0.0 },
                    None => RateFunction::Lorentzian(ChannelRate::new(detunings[j], reservoir)),
                },
                from,
                to,
            })
            .collect();
        let amps = params.initial_state.clone().unwrap_or_else(|| real_amps(&initial));
        if amps.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: amps.len() });
        }
        Self::new(kind, channels, StateVector::new(amps), params.lamb_shift_enabled)
    }

    pub fn jaynes_cummings() -> Self {
        Self::build(ModelKind::JaynesCummings, &ModelParams::default()).expect("defaults are valid")
    }

    pub fn lambda() -> Self {
        Self::build(ModelKind::Lambda, &ModelParams::default()).expect("defaults are valid")
    }

    pub fn vee() -> Self {
        Self::build(ModelKind::Vee, &ModelParams::default()).expect("defaults are valid")
    }

    pub fn ladder(start: LadderStart) -> Self {
        let params = ModelParams { ladder_start: start, ..Default::default() };
        Self::build(ModelKind::Ladder, &params).expect("defaults are valid")
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn number_op(&self, j: usize) -> &Operator {
        &self.number_ops[j]
    }

    pub fn rate_functions(&self) -> Vec<RateFunction> {
        self.channels.iter().map(|c| c.rate).collect()
    }

    pub fn decay_rates(&self, t: f64) -> Result<Vec<f64>> {
        self.channels.iter().map(|c| c.rate.decay(t)).collect()
    }

    /// Lamb-shift rates; identically zero unless the Lamb shift is enabled.
    pub fn lamb_shift_rates(&self, t: f64) -> Result<Vec<f64>> {
        self.channels
            .iter()
            .map(|c| if self.lamb_shift_enabled { c.rate.lamb_shift(t) } else { Ok(0.0) })
            .collect()
    }

    /// Lowest level, annihilated by every channel.
    pub fn ground_level(&self) -> usize {
        self.dim() - 1
    }

    pub fn with_lamb_shift(mut self, enabled: bool) -> Self {
        self.lamb_shift_enabled = enabled;
        self
    }

    pub fn with_initial_state(mut self, state: StateVector) -> Result<Self> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: state.dim() });
        }
        self.initial_state = state.normalize()?;
        Ok(self)
    }
}
