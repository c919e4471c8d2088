//! Architecture manifests: a TOML record of one network's layers, the cost
//! budget it was searched for and the cost it actually has.
//!
//! ```toml
//! model_id = "crn3"
//! head = "global_avg_pool"
//! notes = "..."
//! budget = { params = 1985, macs = 8208 }
//! expected = { params = 1985, macs = 8208 }
//! input = { channels = 1, length = 160 }
//!
//! [hyperparameters]        # optional compact form
//! style = "separable"
//! ...
//!
//! [[layers]]
//! type = "avg_pool"
//! kernel = 2
//! stride = 2
//! ```
//!
//! Loading recounts the layers and rejects a manifest whose `expected` cost
//! disagrees, and one whose hyperparameters build different layers.

use std::path::Path;

use ccl_core::cost::{count_costs, CostReport};
use ccl_core::layer::LayerSpec;
use ccl_core::model::ArchConfig;
use ccl_core::search::BudgetTarget;
use ccl_core::tensor::Shape;
use ccl_core::zoo::{CrnSpec, HeadInput, ModelId};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write, IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchManifest {
    pub model_id: String,
    /// What feeds the dense head: `global_avg_pool` or `flatten`.
    pub head: HeadInput,
    #[serde(default)]
    pub notes: String,
    pub budget: CostReport,
    pub expected: CostReport,
    pub input: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<CrnSpec>,
    pub layers: Vec<LayerSpec>,
}

const BUILTIN: [(ModelId, &str); 3] = [
    (ModelId::Crn1, include_str!("../manifests/crn1.toml")),
    (ModelId::Crn2, include_str!("../manifests/crn2.toml")),
    (ModelId::Crn3, include_str!("../manifests/crn3.toml")),
];

fn head_of(layers: &[LayerSpec]) -> HeadInput {
    if layers.iter().any(|l| matches!(l, LayerSpec::GlobalAvgPool)) {
        HeadInput::GlobalAvgPool
    } else {
        HeadInput::Flatten
    }
}

impl ArchManifest {
    pub fn from_config(config: &ArchConfig, budget: CostReport, spec: Option<CrnSpec>, notes: impl Into<String>) -> ccl_core::Result<Self> {
        Ok(Self {
            model_id: config.model_id.clone(),
            head: head_of(&config.layers),
            notes: notes.into(),
            budget,
            expected: count_costs(config)?,
            input: config.input,
            hyperparameters: spec,
            layers: config.layers.clone(),
        })
    }

    /// Manifest for a frozen reference model, as checked in.
    pub fn builtin(id: ModelId) -> Self {
        let text = BUILTIN.iter().find(|(m, _)| *m == id).expect("all ids listed").1;
        Self::from_toml(text).unwrap_or_else(|e| panic!("checked-in manifest for {id} is invalid: {e}"))
    }

    pub fn config(&self) -> ArchConfig {
        ArchConfig::new(self.model_id.clone(), self.input, self.layers.clone())
    }

    /// Relative deviation from the budget per axis, `(params, macs)`.
    pub fn deviation(&self) -> (f64, f64) {
        BudgetTarget::exact(self.budget.params.max(1), self.budget.macs.max(1)).deviation(self.expected)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let config = self.config();
        let cost = count_costs(&config).map_err(|e| e.to_string())?;
        if cost != self.expected {
            return Err(format!("layers cost {cost}, manifest expects {}", self.expected));
        }
        if head_of(&self.layers) != self.head {
            return Err(format!("head is declared {} but layers use {}", self.head.as_str(), head_of(&self.layers).as_str()));
        }
        if let Some(spec) = &self.hyperparameters {
            if spec.build(self.model_id.clone()).layers != self.layers {
                return Err("hyperparameters do not build the listed layers".into());
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        let m: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        m.check()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_string(path)?).map_err(|e| IoError::invalid(path, e))
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        write(path, self.to_toml())
    }
}
