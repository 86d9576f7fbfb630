use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Constant { value } => value,
            Distribution::Uniform { lo, hi } if lo == hi => lo,
            Distribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }

    fn validate(&self, what: &str) -> Result<(), String> {
        match *self {
            Distribution::Constant { value } if value.is_nan() || value < 0.0 => {
                Err(format!("{what}: negative or NaN constant {value}"))
            }
            Distribution::Uniform { lo, hi } if !(lo >= 0.0 && lo <= hi) => {
                Err(format!("{what}: need 0 <= lo <= hi, got [{lo}, {hi}]"))
            }
            _ => Ok(()),
        }
    }
}

/// Wrong-order attempt model for operators working without guidance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReworkModel {
    pub error_probability: f64,
    pub rework_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeModel {
    pub llm_call_seconds: Distribution,
    pub robot_cycle_seconds: f64,
    pub human_assemble_seconds: Distribution,
    #[serde(default)]
    pub manual_error_rework: Option<ReworkModel>,
}

impl Default for TimeModel {
    fn default() -> Self {
        Self::guided_default()
    }
}

impl TimeModel {
    /// Calibrated defaults for a guided session.
    pub fn guided_default() -> Self {
        Self {
            llm_call_seconds: Distribution::Uniform { lo: 10.0, hi: 19.0 },
            robot_cycle_seconds: 12.0,
            human_assemble_seconds: Distribution::Uniform { lo: 10.0, hi: 20.0 },
            manual_error_rework: None,
        }
    }

    /// Calibrated defaults for an operator assembling alone from the parts list.
    pub fn manual_default() -> Self {
        Self {
            llm_call_seconds: Distribution::Constant { value: 0.0 },
            robot_cycle_seconds: 0.0,
            human_assemble_seconds: Distribution::Uniform { lo: 26.0, hi: 46.0 },
            manual_error_rework: Some(ReworkModel {
                error_probability: 0.2,
                rework_seconds: 80.0,
            }),
        }
    }

    /// Zero durations everywhere; useful when only event order matters.
    pub fn instant() -> Self {
        Self {
            llm_call_seconds: Distribution::Constant { value: 0.0 },
            robot_cycle_seconds: 0.0,
            human_assemble_seconds: Distribution::Constant { value: 0.0 },
            manual_error_rework: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.llm_call_seconds.validate("llm_call_seconds")?;
        self.human_assemble_seconds.validate("human_assemble_seconds")?;
        if self.robot_cycle_seconds.is_nan() || self.robot_cycle_seconds < 0.0 {
            return Err(format!("robot_cycle_seconds must be >= 0, got {}", self.robot_cycle_seconds));
        }
        if let Some(r) = self.manual_error_rework {
            if !(0.0..=1.0).contains(&r.error_probability) || r.rework_seconds.is_nan() || r.rework_seconds < 0.0 {
                return Err("manual_error_rework: probability in [0, 1] and seconds >= 0 required".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    LlmCall,
    RobotCycle,
    HumanAssemble,
    /// Extra time for a manual wrong-order attempt; zero when the draw says no error.
    ManualRework,
}

pub fn sample_step_time<R: Rng + ?Sized>(model: &TimeModel, kind: StepKind, rng: &mut R) -> f64 {
    match kind {
        StepKind::LlmCall => model.llm_call_seconds.sample(rng),
        StepKind::RobotCycle => model.robot_cycle_seconds,
        StepKind::HumanAssemble => model.human_assemble_seconds.sample(rng),
        StepKind::ManualRework => match model.manual_error_rework {
            Some(r) if rng.random::<f64>() < r.error_probability => r.rework_seconds,
            _ => 0.0,
        },
    }
}
