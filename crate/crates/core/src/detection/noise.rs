//! Ground-truth oracle detector with injected false positives and negatives.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{ComponentCatalog, ComponentId, ComponentSet};
use crate::workcell::SceneSnapshot;

use super::{DetectionError, DetectionReport, DetectionSource, Detector, Verdict};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Persistence {
    /// Each call draws its own error.
    #[default]
    IndependentPerCall,
    /// One draw per session; a hit repeats on every call.
    Sticky,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentNoise {
    /// Probability of reporting present when absent.
    #[serde(default)]
    pub fp_rate: f64,
    /// Probability of reporting absent when present.
    #[serde(default)]
    pub fn_rate: f64,
    #[serde(default)]
    pub persistence: Persistence,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub components: BTreeMap<ComponentId, ComponentNoise>,
    #[serde(default)]
    pub rng_seed: u64,
    /// Cap on per-call (non-sticky) errors in one session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_transient_errors: Option<u32>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn set(mut self, id: u32, noise: ComponentNoise) -> Self {
        self.components.insert(ComponentId(id), noise);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (id, n) in &self.components {
            for (label, p) in [("fp_rate", n.fp_rate), ("fn_rate", n.fn_rate)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("component {id}: {label} {p} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }

    fn noise_for(&self, id: ComponentId) -> ComponentNoise {
        self.components.get(&id).copied().unwrap_or_default()
    }
}

/// Reports the scene's true contents, perturbed by a [`NoiseModel`].
///
/// Sticky errors are drawn once at construction. Afterwards every call draws
/// exactly two uniforms per component (one for FP, one for FN), so the random
/// stream does not depend on the scene.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    catalog: ComponentCatalog,
    model: NoiseModel,
    rng: ChaCha8Rng,
    sticky_fp: ComponentSet,
    sticky_fn: ComponentSet,
    transient_errors: u32,
}

impl OracleDetector {
    pub fn new(catalog: ComponentCatalog, model: NoiseModel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
        let mut sticky_fp = ComponentSet::new();
        let mut sticky_fn = ComponentSet::new();
        for id in catalog.ids() {
            let noise = model.noise_for(id);
            let (u_fp, u_fn): (f64, f64) = (rng.random(), rng.random());
            if noise.persistence == Persistence::Sticky {
                if u_fp < noise.fp_rate {
                    sticky_fp.insert(id);
                }
                if u_fn < noise.fn_rate {
                    sticky_fn.insert(id);
                }
            }
        }
        Self {
            catalog,
            model,
            rng,
            sticky_fp,
            sticky_fn,
            transient_errors: 0,
        }
    }

    pub fn noiseless(catalog: ComponentCatalog) -> Self {
        Self::new(catalog, NoiseModel::noiseless())
    }

    /// Components with a session-long false positive.
    pub fn sticky_false_positives(&self) -> &ComponentSet {
        &self.sticky_fp
    }

    pub fn sticky_false_negatives(&self) -> &ComponentSet {
        &self.sticky_fn
    }

    fn budget_left(&self) -> bool {
        self.model
            .max_transient_errors
            .is_none_or(|cap| self.transient_errors < cap)
    }

    /// Verdicts for a ground-truth assembled set.
    pub fn observe(&mut self, truth: &ComponentSet) -> Vec<(ComponentId, Verdict)> {
        let ids: Vec<ComponentId> = self.catalog.ids().collect();
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let noise = self.model.noise_for(id);
            let (u_fp, u_fn): (f64, f64) = (self.rng.random(), self.rng.random());
            let present = truth.contains(&id);
            let reported = if present {
                if self.sticky_fn.contains(&id) {
                    false
                } else if noise.persistence == Persistence::IndependentPerCall
                    && u_fn < noise.fn_rate
                    && self.budget_left()
                {
                    self.transient_errors += 1;
                    false
                } else {
                    true
                }
            } else if self.sticky_fp.contains(&id) {
                true
            } else if noise.persistence == Persistence::IndependentPerCall
                && u_fp < noise.fp_rate
                && self.budget_left()
            {
                self.transient_errors += 1;
                true
            } else {
                false
            };
            out.push((id, Verdict::from_bool(reported)));
        }
        out
    }
}

impl Detector for OracleDetector {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        _prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        let verdicts = self.observe(&scene.view).into_iter().collect();
        Ok(DetectionReport {
            verdicts,
            source: DetectionSource::Oracle,
            raw_text: None,
            timestamp: scene.clock,
            usage: None,
        })
    }
}
