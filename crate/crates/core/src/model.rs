//! Units, material constants, device geometry and the two ingredients of the
//! Hamiltonian: the structure potential and the screened Coulomb kernel.
//!
//! Internal units are meV for energies and nm for lengths; ħ is absorbed in
//! [`EnergyScale::kinetic_prefactor`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ħ²/(2 m_e) in meV·nm².
pub const HBAR2_OVER_2ME: f64 = 38.099_821_2;
/// e²/(4π ε₀) in meV·nm.
pub const COULOMB_CONSTANT: f64 = 1_439.964_548;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// m*/m_e
    pub effective_mass_ratio: f64,
    /// relative permittivity
    pub dielectric_constant: f64,
}

impl Default for MaterialParams {
    /// GaAs.
    fn default() -> Self {
        MaterialParams {
            effective_mass_ratio: 0.067,
            dielectric_constant: 12.9,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.effective_mass_ratio > 0.0 && self.effective_mass_ratio.is_finite()) {
            return Err(Error::Config("effective_mass_ratio must be positive".into()));
        }
        if !(self.dielectric_constant > 0.0 && self.dielectric_constant.is_finite()) {
            return Err(Error::Config("dielectric_constant must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSpec {
    pub domain_length_nm: f64,
    pub well_depth_mev: f64,
    pub well_width_nm: f64,
    pub barrier_width_nm: f64,
    /// Flat zero-potential margin at each end of the domain.
    pub lead_flat_width_nm: f64,
    /// Transverse cutoff d regularizing the Coulomb kernel.
    pub transverse_cutoff_nm: f64,
    pub debye_length_nm: f64,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        DeviceSpec {
            domain_length_nm: 100.0,
            well_depth_mev: 110.0,
            well_width_nm: 30.0,
            barrier_width_nm: 20.0,
            lead_flat_width_nm: 10.0,
            transverse_cutoff_nm: 1.0,
            debye_length_nm: 1000.0,
        }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("domain_length_nm", self.domain_length_nm),
            ("well_width_nm", self.well_width_nm),
            ("barrier_width_nm", self.barrier_width_nm),
            ("lead_flat_width_nm", self.lead_flat_width_nm),
            ("transverse_cutoff_nm", self.transverse_cutoff_nm),
            ("debye_length_nm", self.debye_length_nm),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.well_depth_mev >= 0.0 && self.well_depth_mev.is_finite()) {
            return Err(Error::Config("well_depth_mev must be non-negative".into()));
        }
        let total = 2.0 * self.well_width_nm + self.barrier_width_nm + 2.0 * self.lead_flat_width_nm;
        if (total - self.domain_length_nm).abs() > 1e-9 * self.domain_length_nm {
            return Err(Error::Config(format!(
                "2·well + barrier + 2·flat = {total} nm does not match domain length {} nm",
                self.domain_length_nm
            )));
        }
        if self.debye_length_nm <= self.domain_length_nm {
            return Err(Error::Config(
                "debye_length_nm must exceed the domain length".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform grid over `[0, L]` including both end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(points_per_axis: usize, domain_length: f64) -> Result<Self> {
        if points_per_axis < 3 {
            return Err(Error::Config(format!(
                "points_per_axis must be at least 3, got {points_per_axis}"
            )));
        }
        let spacing = domain_length / (points_per_axis - 1) as f64;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        Ok(GridSpec {
            points_per_axis,
            spacing,
        })
    }

    /// Number of interior nodes per axis (hard walls at both ends).
    pub fn interior(&self) -> usize {
        self.points_per_axis - 2
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyScale {
    /// ħ²/(2m*) in meV·nm².
    pub kinetic_prefactor: f64,
    /// e²/(4πε) in meV·nm.
    pub coulomb_prefactor: f64,
}

impl EnergyScale {
    pub fn from_material(m: &MaterialParams) -> Self {
        EnergyScale {
            kinetic_prefactor: HBAR2_OVER_2ME / m.effective_mass_ratio,
            coulomb_prefactor: COULOMB_CONSTANT / m.dielectric_constant,
        }
    }
}

/// Whether the carriers interact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interaction {
    #[default]
    ScreenedCoulomb,
    Off,
}

/// Sampled structure potential V_s at every grid node, end points included.
///
/// A node belongs to a well when it lies in the closed well interval, so the
/// edges count as inside when they fall exactly on a node. Sampling is done
/// on the distance to the nearer end, which makes the result mirror symmetric
/// bit for bit.
pub fn build_potential(spec: &DeviceSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = grid.points_per_axis;
    let tol = 1e-9 * spec.domain_length_nm;
    let (a0, a1) = (
        spec.lead_flat_width_nm,
        spec.lead_flat_width_nm + spec.well_width_nm,
    );
    Ok((0..n)
        .map(|i| {
            let s = i.min(n - 1 - i) as f64 * grid.spacing;
            let inside = s >= a0 - tol && s <= a1 + tol;
            if inside && spec.well_depth_mev > 0.0 {
                -spec.well_depth_mev
            } else {
                0.0
            }
        })
        .collect())
}

/// Screened interaction between carriers at `xi` and `xj`.
pub fn coulomb_kernel(xi: f64, xj: f64, spec: &DeviceSpec, scale: &EnergyScale) -> f64 {
    let dx = xi - xj;
    let r = (dx * dx + spec.transverse_cutoff_nm * spec.transverse_cutoff_nm).sqrt();
    scale.coulomb_prefactor * (-r / spec.debye_length_nm).exp() / r
}

/// Everything needed to build a Hamiltonian on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub material: MaterialParams,
    pub device: DeviceSpec,
    pub grid: GridSpec,
    pub scale: EnergyScale,
    pub interaction: Interaction,
    potential: Vec<f64>,
    kernel: Vec<f64>,
}

impl Model {
    pub fn new(
        material: MaterialParams,
        device: DeviceSpec,
        points_per_axis: usize,
        interaction: Interaction,
    ) -> Result<Self> {
        material.validate()?;
        device.validate()?;
        let grid = GridSpec::new(points_per_axis, device.domain_length_nm)?;
        let scale = EnergyScale::from_material(&material);
        let potential = build_potential(&device, &grid)?;
        let kernel = (0..points_per_axis)
            .map(|d| match interaction {
                Interaction::ScreenedCoulomb => {
                    coulomb_kernel(0.0, d as f64 * grid.spacing, &device, &scale)
                }
                Interaction::Off => 0.0,
            })
            .collect();
        Ok(Model {
            material,
            device,
            grid,
            scale,
            interaction,
            potential,
            kernel,
        })
    }

    /// The paper device with GaAs parameters.
    pub fn reference(points_per_axis: usize) -> Result<Self> {
        Self::new(
            MaterialParams::default(),
            DeviceSpec::default(),
            points_per_axis,
            Interaction::ScreenedCoulomb,
        )
    }

    /// Finite-difference hopping t = ħ²/(2m*Δ²).
    pub fn hopping(&self) -> f64 {
        self.scale.kinetic_prefactor / (self.grid.spacing * self.grid.spacing)
    }

    /// V_s at grid node `i` (0..N_g).
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Pair interaction between nodes `i` and `j`.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.kernel[i.abs_diff(j)]
    }
}
