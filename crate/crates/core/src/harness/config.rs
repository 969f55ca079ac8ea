//! JSON experiment configuration.
//!
//! A config is a flat JSON object with a `kind` tag selecting the
//! experiment and kind-specific fields alongside it:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "kind": "converge-time",
//!   "scheme": "scheme-a",
//!   "dimension": "1d",
//!   "alpha": 0.01,
//!   "cells": 10000,
//!   "t_final": 0.3,
//!   "steps": [200, 300, 400, 500]
//! }
//! ```

use crate::mesh::Grid;
use crate::physics::{MaterialParams, PhysicalConstants};
use crate::schemes::SchemeKind;
use crate::verify::{Dimension, StabilitySpec};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub experiment: Experiment,
    /// Output directory; the CLI's `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Steps between field snapshots (0 = final state only).
    #[serde(default)]
    pub snapshot_every: usize,
    /// Seed for randomized initial data.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ConvergeTime,
    ConvergeSpace,
    #[serde(rename = "converge-2d")]
    Converge2d,
    Stability,
    Micromag,
    Solve,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ConvergeTime => "converge-time",
            ExperimentKind::ConvergeSpace => "converge-space",
            ExperimentKind::Converge2d => "converge-2d",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Micromag => "micromag",
            ExperimentKind::Solve => "solve",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown experiment kind '{s}'"))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    /// Temporal order on a manufactured solution.
    ConvergeTime(ConvergeTime),
    /// Spatial order on a manufactured solution.
    ConvergeSpace(ConvergeSpace),
    /// Temporal order of the source-free Néel-wall problem against a BDF2 reference.
    #[serde(rename = "converge-2d")]
    Converge2d(Converge2d),
    /// Largest stable step per mesh.
    Stability(StabilitySpec),
    /// Thin-film relaxation with stray field.
    Micromag(Micromag),
    /// Plain integration of a given state.
    Solve(Solve),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::ConvergeTime(_) => ExperimentKind::ConvergeTime,
            Experiment::ConvergeSpace(_) => ExperimentKind::ConvergeSpace,
            Experiment::Converge2d(_) => ExperimentKind::Converge2d,
            Experiment::Stability(_) => ExperimentKind::Stability,
            Experiment::Micromag(_) => ExperimentKind::Micromag,
            Experiment::Solve(_) => ExperimentKind::Solve,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeTime {
    pub scheme: SchemeKind,
    pub dimension: Dimension,
    pub alpha: f64,
    /// Cells per unit length.
    pub cells: usize,
    pub t_final: f64,
    /// Step counts over `[0, t_final]`.
    pub steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpace {
    pub scheme: SchemeKind,
    pub dimension: Dimension,
    pub alpha: f64,
    pub cells: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Converge2d {
    pub scheme: SchemeKind,
    pub alpha: f64,
    /// Cells per unit length (the domain is `(0,1)×(0,0.2)`).
    pub cells: usize,
    pub t_final: f64,
    pub steps: Vec<usize>,
    #[serde(default = "default_reference_steps")]
    pub reference_steps: usize,
    /// Relative Krylov tolerance of the reference run.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn default_reference_steps() -> usize {
    5000
}

fn default_reference_tol() -> f64 {
    1e-14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Micromag {
    #[serde(default = "default_micromag_scheme")]
    pub scheme: SchemeKind,
    pub alpha: f64,
    #[serde(default = "PhysicalConstants::thin_film")]
    pub constants: PhysicalConstants,
    /// Film edge lengths in metres.
    #[serde(default = "default_film")]
    pub film: [f64; 3],
    /// Reduced grid used unless full scale is requested.
    #[serde(default = "default_reduced_cells")]
    pub cells: [usize; 3],
    #[serde(default = "default_full_cells")]
    pub full_scale_cells: [usize; 3],
    /// Step in seconds.
    #[serde(default = "default_micromag_dt")]
    pub dt: f64,
    /// Terminal time in seconds.
    #[serde(default = "default_micromag_t")]
    pub t_final: f64,
    #[serde(default)]
    pub full_scale: bool,
}

fn default_micromag_scheme() -> SchemeKind {
    SchemeKind::SchemeA
}
fn default_film() -> [f64; 3] {
    [1e-6, 1e-6, 2e-8]
}
fn default_reduced_cells() -> [usize; 3] {
    [64, 64, 3]
}
fn default_full_cells() -> [usize; 3] {
    [250, 250, 5]
}
fn default_micromag_dt() -> f64 {
    1e-12
}
fn default_micromag_t() -> f64 {
    2e-9
}

impl Micromag {
    pub fn active_cells(&self) -> [usize; 3] {
        if self.full_scale {
            self.full_scale_cells
        } else {
            self.cells
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialState {
    Uniform {
        m: [f64; 3],
    },
    /// Independent random directions per cell, drawn from the config seed.
    Random,
    /// `(tanh ℓ, sech ℓ, 0)` with `ℓ = (x_mid - x) / (2η)` along x.
    NeelWall {
        eta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve {
    pub scheme: SchemeKind,
    pub cells: [usize; 3],
    /// Dimensionless edge lengths.
    pub lengths: [f64; 3],
    pub material: MaterialParams,
    pub initial: InitialState,
    pub dt: f64,
    pub steps: usize,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

fn at_least(name: &str, list: &[usize], n: usize) -> Result<()> {
    if list.len() < n {
        return Err(Error::InvalidParameter(format!(
            "{name} needs at least {n} entries"
        )));
    }
    if list.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "{name} entries must be positive"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match &self.experiment {
            Experiment::ConvergeTime(c) => {
                non_negative("alpha", c.alpha)?;
                positive("t_final", c.t_final)?;
                at_least("steps", &c.steps, 3)?;
                at_least("cells", &[c.cells], 1)?;
            }
            Experiment::ConvergeSpace(c) => {
                non_negative("alpha", c.alpha)?;
                positive("t_final", c.t_final)?;
                positive("dt", c.dt)?;
                at_least("cells", &c.cells, 3)?;
            }
            Experiment::Converge2d(c) => {
                non_negative("alpha", c.alpha)?;
                positive("t_final", c.t_final)?;
                at_least("steps", &c.steps, 3)?;
                at_least("cells", &[c.cells, c.reference_steps], 2)?;
                positive("reference_tol", c.reference_tol)?;
                if let Some(eta) = c.eta {
                    positive("eta", eta)?;
                }
            }
            Experiment::Stability(s) => {
                non_negative("alpha", s.alpha)?;
                positive("t_final", s.t_final)?;
                if s.meshes.is_empty() {
                    return Err(Error::InvalidParameter(
                        "stability needs at least one mesh".into(),
                    ));
                }
                for m in &s.meshes {
                    at_least("cells", &[m.cells], 1)?;
                    positive("dt_stable", m.dt_stable)?;
                    positive("dt_unstable", m.dt_unstable)?;
                }
                positive("error_cap", s.criteria.error_cap)?;
                positive("growth_factor", s.criteria.growth_factor)?;
            }
            Experiment::Micromag(m) => {
                non_negative("alpha", m.alpha)?;
                m.constants.validate()?;
                for v in m.film {
                    positive("film edge", v)?;
                }
                at_least("cells", &m.cells, 3)?;
                at_least("full_scale_cells", &m.full_scale_cells, 3)?;
                positive("dt", m.dt)?;
                positive("t_final", m.t_final)?;
            }
            Experiment::Solve(s) => {
                Grid::new(s.cells, s.lengths)?;
                s.material.validate()?;
                positive("dt", s.dt)?;
                if let InitialState::Uniform { m } = s.initial {
                    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    if !(n.is_finite() && n > 0.0) {
                        return Err(Error::InvalidParameter(
                            "uniform state must be non-zero".into(),
                        ));
                    }
                }
                if let InitialState::NeelWall { eta } = s.initial {
                    positive("eta", eta)?;
                }
            }
        }
        Ok(())
    }
}
