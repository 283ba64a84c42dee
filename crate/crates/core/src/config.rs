//! Run configuration, read from TOML with the unit spelled out in every
//! dimensional key.
//!
//! ```toml
//! [material]
//! effective_mass_ratio = 0.067
//! dielectric_constant = 12.9
//!
//! [device]
//! domain_length_nm = 100.0
//! well_depth_mev = 110.0
//! well_width_nm = 30.0
//! barrier_width_nm = 20.0
//! lead_flat_width_nm = 10.0
//! transverse_cutoff_nm = 1.0
//! debye_length_nm = 1000.0
//!
//! [grid]
//! points_per_axis = 66
//!
//! [channels]
//! count = 8
//! overlaps = "ideal"
//! interaction = "screened-coulomb"
//!
//! [solver]
//! threshold_tolerance_mev = 1e-4
//! residual_tolerance = 1e-8
//! max_refinements = 4
//! conservation_tolerance = 1e-6
//! ```
//!
//! Every section and key is optional; missing values take the defaults
//! above.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeviceSpec, Interaction, MaterialParams, Model};
use crate::qtbm::SolverOptions;

/// Production grid: the smallest node-inclusive grid whose single-dot levels
/// sit inside the reference tolerances and whose factorization fits in a
/// few GB.
pub const PRODUCTION_GRID: usize = 66;
/// Grid used by the fast test suites.
pub const CI_GRID: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points_per_axis: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points_per_axis: PRODUCTION_GRID,
        }
    }
}

/// Which overlap table turns qubit eigenstates into product states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapChoice {
    /// ε₀ = |00⟩, ε₁,₂ = −(|01⟩ ± |10⟩)/√2, ε₃ = |11⟩.
    #[default]
    Ideal,
    /// Overlaps of the computed two-particle states with dot orbitals.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Two-particle states retained as channels (open and closed).
    pub count: usize,
    pub overlaps: OverlapChoice,
    pub interaction: Interaction,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            count: 8,
            overlaps: OverlapChoice::Ideal,
            interaction: Interaction::ScreenedCoulomb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub threshold_tolerance_mev: f64,
    pub residual_tolerance: f64,
    pub max_refinements: usize,
    pub conservation_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            threshold_tolerance_mev: o.threshold_tolerance,
            residual_tolerance: o.residual_tolerance,
            max_refinements: o.max_refinements,
            conservation_tolerance: o.conservation_tolerance,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            threshold_tolerance: self.threshold_tolerance_mev,
            residual_tolerance: self.residual_tolerance,
            max_refinements: self.max_refinements,
            conservation_tolerance: self.conservation_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub device: DeviceSpec,
    pub grid: GridConfig,
    pub channels: ChannelConfig,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn with_grid(mut self, points_per_axis: usize) -> Self {
        self.grid.points_per_axis = points_per_axis;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.device.validate()?;
        if self.grid.points_per_axis < 5 {
            return Err(Error::Config("points_per_axis must be at least 5".into()));
        }
        if self.channels.count < 4 {
            return Err(Error::Config("channels.count must be at least 4".into()));
        }
        let s = &self.solver;
        if !(s.threshold_tolerance_mev > 0.0 && s.residual_tolerance > 0.0 && s.conservation_tolerance > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(
            self.material,
            self.device,
            self.grid.points_per_axis,
            self.channels.interaction,
        )
    }
}
