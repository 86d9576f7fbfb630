//! Simulated operator behaviour at the per-iteration wait point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ComponentCatalog, ComponentId, ComponentSet};

use super::world::{AssemblyOutcome, PartSource, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedChoice {
    /// 1-based position in the assembly sequence at which to deviate.
    pub step: usize,
    pub component: ComponentId,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    Compliant,
    DeviateScript,
    SeededRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorPolicy {
    #[serde(default)]
    pub kind: OperatorKind,
    #[serde(default)]
    pub script: Vec<ScriptedChoice>,
    #[serde(default)]
    pub seed: u64,
    /// Chance per wait point that a seeded-random operator grabs a magazine part.
    #[serde(default = "default_deviation_probability")]
    pub deviation_probability: f64,
}

fn default_deviation_probability() -> f64 {
    0.25
}

impl Default for OperatorPolicy {
    fn default() -> Self {
        Self::compliant()
    }
}

impl OperatorPolicy {
    pub fn compliant() -> Self {
        Self {
            kind: OperatorKind::Compliant,
            script: Vec::new(),
            seed: 0,
            deviation_probability: default_deviation_probability(),
        }
    }

    pub fn deviate(script: Vec<ScriptedChoice>) -> Self {
        Self {
            kind: OperatorKind::DeviateScript,
            script,
            ..Self::compliant()
        }
    }

    pub fn seeded_random(seed: u64, deviation_probability: f64) -> Self {
        Self {
            kind: OperatorKind::SeededRandom,
            seed,
            deviation_probability,
            ..Self::compliant()
        }
    }

    pub fn validate(&self, catalog: &ComponentCatalog) -> Result<(), String> {
        let unknown: ComponentSet = self
            .script
            .iter()
            .map(|s| s.component)
            .filter(|c| !catalog.contains(*c))
            .collect();
        if !unknown.is_empty() {
            return Err(format!(
                "script references unknown components: {}",
                crate::catalog::format_set(&unknown)
            ));
        }
        if !(0.0..=1.0).contains(&self.deviation_probability) {
            return Err("deviation_probability outside [0, 1]".into());
        }
        Ok(())
    }
}

/// What the operator decides to do at a wait point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum OperatorChoice {
    /// Mount a delivered part: the oldest delivery whose prerequisites are
    /// mounted, or (if none fits) an attempt on the oldest delivery.
    AssembleDelivered,
    /// Mount one specific delivered part, skipping older deliveries.
    AssemblePart { component: ComponentId },
    TakeFromMagazine { component: ComponentId },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum OperatorEvent {
    Assembled {
        component: ComponentId,
    },
    TookFromMagazine {
        component: ComponentId,
    },
    Rejected {
        component: ComponentId,
        source: PartSource,
        missing: ComponentSet,
    },
    NoOp {
        reason: String,
    },
}

impl OperatorEvent {
    /// Component mounted by this event, if any.
    pub fn assembled(&self) -> Option<ComponentId> {
        match self {
            OperatorEvent::Assembled { component } | OperatorEvent::TookFromMagazine { component } => {
                Some(*component)
            }
            _ => None,
        }
    }

    pub fn is_rejection(&self) -> bool {
        matches!(self, OperatorEvent::Rejected { .. })
    }

    pub fn is_deviation(&self) -> bool {
        matches!(
            self,
            OperatorEvent::TookFromMagazine { .. }
                | OperatorEvent::Rejected {
                    source: PartSource::Magazine,
                    ..
                }
        )
    }
}

/// Carries out `choice` against the world.
pub fn apply_choice(
    world: &mut WorldState,
    choice: OperatorChoice,
    catalog: &ComponentCatalog,
) -> OperatorEvent {
    match choice {
        OperatorChoice::Idle => OperatorEvent::NoOp {
            reason: "operator idle".into(),
        },
        OperatorChoice::AssembleDelivered => {
            let Some(&oldest) = world.delivery_zone.first() else {
                return OperatorEvent::NoOp {
                    reason: "delivery zone empty".into(),
                };
            };
            let fitting = world
                .delivery_zone
                .iter()
                .copied()
                .find(|c| catalog.prerequisites(*c).is_subset(&world.assembled));
            let target = fitting.unwrap_or(oldest);
            match world.try_assemble(target, PartSource::DeliveryZone, catalog) {
                AssemblyOutcome::Assembled => OperatorEvent::Assembled { component: target },
                AssemblyOutcome::Rejected { missing } => OperatorEvent::Rejected {
                    component: target,
                    source: PartSource::DeliveryZone,
                    missing,
                },
            }
        }
        OperatorChoice::AssemblePart { component } => {
            if !world.delivery_zone.contains(&component) {
                return OperatorEvent::NoOp {
                    reason: format!("component {component} is not in the delivery zone"),
                };
            }
            match world.try_assemble(component, PartSource::DeliveryZone, catalog) {
                AssemblyOutcome::Assembled => OperatorEvent::Assembled { component },
                AssemblyOutcome::Rejected { missing } => OperatorEvent::Rejected {
                    component,
                    source: PartSource::DeliveryZone,
                    missing,
                },
            }
        }
        OperatorChoice::TakeFromMagazine { component } => {
            if !world.magazine.contains(&component) {
                return OperatorEvent::NoOp {
                    reason: format!("component {component} is not in the magazine"),
                };
            }
            match world.try_assemble(component, PartSource::Magazine, catalog) {
                AssemblyOutcome::Assembled => OperatorEvent::TookFromMagazine { component },
                AssemblyOutcome::Rejected { missing } => OperatorEvent::Rejected {
                    component,
                    source: PartSource::Magazine,
                    missing,
                },
            }
        }
    }
}

/// Stateful simulated operator built from an [`OperatorPolicy`].
#[derive(Debug, Clone)]
pub struct SimOperator {
    policy: OperatorPolicy,
    used: Vec<bool>,
    rng: ChaCha8Rng,
}

impl SimOperator {
    pub fn new(policy: OperatorPolicy) -> Self {
        let used = vec![false; policy.script.len()];
        let rng = ChaCha8Rng::seed_from_u64(policy.seed);
        Self { policy, used, rng }
    }

    pub fn policy(&self) -> &OperatorPolicy {
        &self.policy
    }

    pub fn decide(&mut self, world: &WorldState, _recommendation: Option<ComponentId>) -> OperatorChoice {
        let compliant = if world.delivery_zone.is_empty() {
            OperatorChoice::Idle
        } else {
            OperatorChoice::AssembleDelivered
        };
        match self.policy.kind {
            OperatorKind::Compliant => compliant,
            OperatorKind::DeviateScript => {
                let step = world.assembled.len() + 1;
                let hit = self
                    .policy
                    .script
                    .iter()
                    .enumerate()
                    .find(|(i, s)| !self.used[*i] && s.step == step);
                match hit {
                    Some((i, s)) => {
                        self.used[i] = true;
                        if world.magazine.contains(&s.component) {
                            OperatorChoice::TakeFromMagazine {
                                component: s.component,
                            }
                        } else if world.delivery_zone.contains(&s.component) {
                            // Already delivered: mount it ahead of older deliveries.
                            OperatorChoice::AssemblePart {
                                component: s.component,
                            }
                        } else {
                            compliant
                        }
                    }
                    None => compliant,
                }
            }
            OperatorKind::SeededRandom => {
                let u: f64 = self.rng.random();
                let pick: usize = self.rng.random_range(0..usize::MAX);
                if u < self.policy.deviation_probability && !world.magazine.is_empty() {
                    let idx = pick % world.magazine.len();
                    let component = *world.magazine.iter().nth(idx).expect("index in range");
                    OperatorChoice::TakeFromMagazine { component }
                } else {
                    compliant
                }
            }
        }
    }
}

/// One operator turn: decide, then act on the world.
pub fn operator_act(
    world: &mut WorldState,
    operator: &mut SimOperator,
    recommendation: Option<ComponentId>,
    catalog: &ComponentCatalog,
) -> OperatorEvent {
    let choice = operator.decide(world, recommendation);
    apply_choice(world, choice, catalog)
}
