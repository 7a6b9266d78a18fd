//! Study description: protocol, timing and the condition list.

use holoqa_core::stats::{Focus, Perspective, Setup};
use serde::{Deserialize, Serialize};
use std::path::{Component, Path, PathBuf};

use crate::{Result, SessionError};

/// Impairment scale, lowest to highest.
pub const SCALE: [(u8, &str); 5] = [
    (1, "Very annoying"),
    (2, "Annoying"),
    (3, "Slightly annoying"),
    (4, "Perceptible, but not annoying"),
    (5, "Imperceptible"),
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Presentation {
    /// Reference, then impaired.
    #[default]
    Sequential,
    SideBySide,
}

/// Display timing handed to the client. Not enforced by the server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timing {
    pub stimulus_ms: u64,
    pub blank_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { stimulus_ms: 10_000, blank_ms: 2_000 }
    }
}

/// Advisory session limits, reported in status but never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub max_minutes: f64,
    pub max_items: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_minutes: 10.0, max_items: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub id: String,
    pub hologram: String,
    pub codec: String,
    pub bpp: f64,
    pub perspective: Perspective,
    pub focus: Focus,
    /// Image paths relative to the study's stimulus root.
    pub reference: PathBuf,
    pub impaired: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub name: String,
    pub seed: u64,
    pub setup: Setup,
    #[serde(default)]
    pub presentation: Presentation,
    pub stimulus_root: PathBuf,
    pub conditions: Vec<ConditionSpec>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub limits: Limits,
}

pub(crate) fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn is_contained(p: &Path) -> bool {
    p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir))
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !valid_id(&self.name) {
            return Err(SessionError::Invalid(format!(
                "study name `{}` must be 1-64 characters of [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.conditions.is_empty() {
            return Err(SessionError::Invalid("study has no conditions".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for c in &self.conditions {
            if c.id.is_empty() || !ids.insert(&c.id) {
                return Err(SessionError::Invalid(format!("condition id `{}` is empty or repeated", c.id)));
            }
            if !(c.bpp.is_finite() && c.bpp >= 0.0) {
                return Err(SessionError::Invalid(format!("condition `{}`: invalid bpp {}", c.id, c.bpp)));
            }
            for p in [&c.reference, &c.impaired] {
                if !is_contained(p) {
                    return Err(SessionError::Invalid(format!(
                        "condition `{}`: stimulus path {} must stay inside the stimulus root",
                        c.id,
                        p.display()
                    )));
                }
            }
        }
        let missing: Vec<PathBuf> = self
            .conditions
            .iter()
            .flat_map(|c| [&c.reference, &c.impaired])
            .map(|p| self.stimulus_root.join(p))
            .filter(|p| !p.is_file())
            .collect();
        if !missing.is_empty() {
            return Err(SessionError::MissingStimuli(missing));
        }
        Ok(())
    }
}
