//! TOML run configuration and template sets.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use measurefirst_core::calibration::CalibrationConfig;
use measurefirst_core::gating::GatingConfig;
use measurefirst_core::neural::BackboneConfig;
use measurefirst_core::pipeline::{GuardrailConfig, NeuralConfig, PipelineConfig};
use measurefirst_core::report::TemplateSet;
use measurefirst_core::signal::ClinicalTolerances;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralSection {
    pub enabled: bool,
    /// Weight file; seeded random weights when absent.
    pub weights: Option<PathBuf>,
}

impl Default for NeuralSection {
    fn default() -> Self {
        Self {
            enabled: true,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gating: GatingConfig,
    pub guardrails: GuardrailConfig,
    pub calibration: CalibrationConfig,
    pub tolerances: ClinicalTolerances,
    pub backbone: BackboneConfig,
    pub neural: NeuralSection,
    /// TOML template set; built-in templates when absent.
    pub templates: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            gating: p.gating,
            guardrails: p.guardrails,
            calibration: p.calibration,
            tolerances: p.tolerances,
            backbone: p.neural.backbone,
            neural: NeuralSection::default(),
            templates: None,
            seed: p.seed,
        }
    }
}

impl RunConfig {
    /// Reads a TOML file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.templates, &mut cfg.neural.weights].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.pipeline().validate()?;
        Ok(cfg)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            gating: self.gating.clone(),
            guardrails: self.guardrails.clone(),
            calibration: self.calibration.clone(),
            tolerances: self.tolerances,
            neural: NeuralConfig {
                enabled: self.neural.enabled,
                backbone: self.backbone.clone(),
            },
            seed: self.seed,
        }
    }

    pub fn template_set(&self) -> Result<TemplateSet> {
        match &self.templates {
            None => Ok(TemplateSet::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let set: TemplateSet = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                set.validate()?;
                Ok(set)
            }
        }
    }
}
