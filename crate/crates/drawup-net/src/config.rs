//! Run configuration: one TOML file drives the whole pipeline. Every knob has
//! a default matching the standard settings (10-day window, lags 0..3, 100
//! permutations at 95% confidence, β = 0.85, bow-tie δ = 0.5).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bowtie::{BowtieThresholds, ThresholdMode};
use crate::centrality::{CentralityOptions, NormalizationMode};
use crate::comovement::ComovementOptions;
use crate::drawup::EpsilonPolicy;
use crate::error::{Error, Result};
use crate::ingest::{default_periods, PeriodSpec};
use crate::layout::{LayoutOptions, SvgStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComovementSection {
    pub n_perm: usize,
    pub confidence: f64,
    pub conditional: bool,
}

impl Default for ComovementSection {
    fn default() -> Self {
        let d = ComovementOptions::default();
        ComovementSection {
            n_perm: d.n_perm,
            confidence: d.confidence,
            conditional: d.conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralitySection {
    pub beta: f64,
    pub normalization: NormalizationMode,
    pub tolerance: f64,
}

impl Default for CentralitySection {
    fn default() -> Self {
        let d = CentralityOptions::default();
        CentralitySection {
            beta: d.beta,
            normalization: d.normalization,
            tolerance: d.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BowtieSection {
    pub delta: f64,
    pub mode: ThresholdMode,
}

impl Default for BowtieSection {
    fn default() -> Self {
        BowtieSection {
            delta: 0.5,
            mode: ThresholdMode::Reciprocal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    /// Optional `entity,attribute_value` CSV used for glyph sizing.
    pub size_attr: Option<PathBuf>,
    pub ring_capacity: usize,
    pub ring_step: f64,
    pub style: SvgStyle,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let d = LayoutOptions::default();
        LayoutSection {
            size_attr: None,
            ring_capacity: d.ring_capacity,
            ring_step: d.ring_step,
            style: SvgStyle::default(),
        }
    }
}

/// The full pipeline configuration. Round-trips losslessly through TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Long-format price CSV to analyse.
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Permutation worker threads; 0 uses the rayon default.
    pub workers: usize,
    pub periods: Vec<PeriodSpec>,
    pub epsilon: EpsilonPolicy,
    pub comovement: ComovementSection,
    pub centrality: CentralitySection,
    pub bowtie: BowtieSection,
    pub layout: LayoutSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: PathBuf::from("panel.csv"),
            out_dir: PathBuf::from("out"),
            seed: 42,
            workers: 0,
            periods: default_periods(),
            epsilon: EpsilonPolicy::default(),
            comovement: ComovementSection::default(),
            centrality: CentralitySection::default(),
            bowtie: BowtieSection::default(),
            layout: LayoutSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() {
            return Err(Error::InvalidConfig("no periods configured".into()));
        }
        for p in &self.periods {
            p.validate()?;
        }
        self.epsilon.validate()?;
        self.comovement_options().validate()?;
        self.centrality_options().validate()?;
        self.bowtie_thresholds()?;
        if self.layout.ring_capacity == 0 {
            return Err(Error::InvalidConfig("ring_capacity must be positive".into()));
        }
        Ok(())
    }

    pub fn comovement_options(&self) -> ComovementOptions {
        ComovementOptions {
            n_perm: self.comovement.n_perm,
            confidence: self.comovement.confidence,
            seed: self.seed,
            conditional: self.comovement.conditional,
        }
    }

    pub fn centrality_options(&self) -> CentralityOptions {
        CentralityOptions {
            beta: self.centrality.beta,
            normalization: self.centrality.normalization,
            tolerance: self.centrality.tolerance,
        }
    }

    pub fn bowtie_thresholds(&self) -> Result<BowtieThresholds> {
        BowtieThresholds::from_delta(self.bowtie.delta, self.bowtie.mode)
    }

    /// Layout options with the size-attribute file loaded if configured.
    pub fn layout_options(&self) -> Result<LayoutOptions> {
        let size_attribute = match &self.layout.size_attr {
            Some(path) if !path.as_os_str().is_empty() => {
                let file = std::fs::File::open(path)?;
                let attrs = crate::ingest::parse_node_attributes(file)?;
                Some(attrs.into_iter().collect())
            }
            _ => None,
        };
        Ok(LayoutOptions {
            ring_capacity: self.layout.ring_capacity,
            ring_step: self.layout.ring_step,
            size_attribute,
            ..LayoutOptions::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_standard_settings() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.epsilon.window, 10);
        assert_eq!(config.comovement.n_perm, 100);
        assert_eq!(config.comovement.confidence, 0.95);
        assert_eq!(config.centrality.beta, 0.85);
        assert_eq!(config.bowtie.delta, 0.5);
        assert_eq!(config.periods.len(), 3);
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let mut config = RunConfig::default();
        config.seed = 123456789;
        config.comovement.confidence = 0.975;
        config.centrality.tolerance = 3.5e-11;
        config.layout.style.show_labels = true;
        let text = config.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
        // and a second trip is byte-stable
        assert_eq!(text, back.to_toml_string().unwrap());
    }

    #[test]
    fn partial_file_fills_in_defaults() {
        let text = r#"
input = "prices.csv"
seed = 9

[epsilon]
window = 15
variation_kind = "range"

[[periods]]
label = "crisis"
start = "2008-01-01"
end = "2009-06-30"
"#;
        let config = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(config.input, PathBuf::from("prices.csv"));
        assert_eq!(config.epsilon.window, 15);
        assert_eq!(config.periods.len(), 1);
        assert_eq!(config.comovement.n_perm, 100); // default
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("not_a_key = 1\n").is_err());
    }

    #[test]
    fn invalid_period_is_rejected() {
        let text = r#"
[[periods]]
label = "backwards"
start = "2009-01-01"
end = "2008-01-01"
"#;
        assert!(RunConfig::from_toml_str(text).is_err());
    }
}
