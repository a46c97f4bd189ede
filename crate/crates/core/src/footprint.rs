//! Sustainability profiles of data centers and the per-job footprint
//! formulas for carbon, water, land use and e-waste.
//!
//! Every operation takes the energy `e_j` (kWh of IT energy consumed by the
//! job) together with the data center and the grid region it sits in. All
//! of them are homogeneous of degree one in the energy.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::factor::FootprintVector;
use crate::ids::{DcId, JobId, RegionId, UserId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FootprintError {
    #[error("data center {dc}: annual IT energy is zero, land-use effectiveness is undefined")]
    ZeroItEnergy { dc: DcId },
    #[error("data center {dc}: annual IT energy is missing, land-use effectiveness is undefined")]
    MissingItEnergy { dc: DcId },
    #[error("data center {dc}: area is not known")]
    MissingArea { dc: DcId },
    #[error("data center {dc} is in region {expected}, got profile for {got}")]
    RegionMismatch {
        dc: DcId,
        expected: RegionId,
        got: RegionId,
    },
}

/// A field-level validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

fn check_non_negative(out: &mut Vec<Violation>, field: &'static str, v: f64) {
    if !(v.is_finite() && v >= 0.0) {
        out.push(Violation {
            field,
            message: format!("must be finite and >= 0, got {v}"),
        });
    }
}

/// Regional environmental intensities of the grid a data center draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    pub region_id: RegionId,
    /// Grid carbon intensity, g CO2 / kWh.
    pub ci_grid: f64,
    /// Grid energy water intensity factor, l / kWh.
    pub ewif_grid: f64,
    /// Grid energy land-use intensity factor, m² / kWh.
    pub elif_grid: f64,
    /// Water scarcity factor. May exceed 1 in stressed regions.
    pub wsf: f64,
    /// Carbon capture loss factor, g CO2 / m² / year.
    pub cclf: f64,
}

impl RegionProfile {
    /// A profile with every intensity at zero.
    pub fn zero(region_id: RegionId) -> Self {
        Self {
            region_id,
            ci_grid: 0.0,
            ewif_grid: 0.0,
            elif_grid: 0.0,
            wsf: 0.0,
            cclf: 0.0,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_non_negative(&mut out, "ci_grid", self.ci_grid);
        check_non_negative(&mut out, "ewif_grid", self.ewif_grid);
        check_non_negative(&mut out, "elif_grid", self.elif_grid);
        check_non_negative(&mut out, "wsf", self.wsf);
        check_non_negative(&mut out, "cclf", self.cclf);
        out
    }
}

/// Reported and derived parameters of one facility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCenterProfile {
    pub dc_id: DcId,
    pub region: RegionId,
    pub pue: f64,
    /// Water usage effectiveness, l / kWh of IT energy.
    pub wue: f64,
    /// Fraction of power drawn from on-site generation.
    pub p_onsite: f64,
    /// Carbon intensity of on-site generation, g CO2 / kWh.
    pub ci_onsite: f64,
    /// Water intensity of on-site generation, l / kWh.
    pub ewif_onsite: f64,
    /// Property area, m². `None` when not reported.
    pub area: Option<f64>,
    /// Annual IT energy, kWh / year.
    pub annual_it_energy: Option<f64>,
    /// Non-recycled e-waste per kWh of IT energy, g / kWh.
    pub ewi: f64,
    /// Maximum number of jobs hosted at once.
    pub s_max: u32,
}

impl DataCenterProfile {
    /// A grid-only facility with no on-site generation and no e-waste data.
    pub fn grid_only(
        dc_id: impl Into<DcId>,
        region: impl Into<RegionId>,
        pue: f64,
        wue: f64,
    ) -> Self {
        Self {
            dc_id: dc_id.into(),
            region: region.into(),
            pue,
            wue,
            p_onsite: 0.0,
            ci_onsite: 0.0,
            ewif_onsite: 0.0,
            area: None,
            annual_it_energy: None,
            ewi: 0.0,
            s_max: 5,
        }
    }

    /// Share of power drawn from the regional grid, `1 - p_onsite`.
    pub fn p_grid(&self) -> f64 {
        1.0 - self.p_onsite
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.pue.is_finite() && self.pue >= 1.0) {
            out.push(Violation {
                field: "pue",
                message: format!("must be >= 1, got {}", self.pue),
            });
        }
        if !(0.0..=1.0).contains(&self.p_onsite) {
            out.push(Violation {
                field: "p_onsite",
                message: format!("must lie in [0, 1], got {}", self.p_onsite),
            });
        }
        check_non_negative(&mut out, "wue", self.wue);
        check_non_negative(&mut out, "ci_onsite", self.ci_onsite);
        check_non_negative(&mut out, "ewif_onsite", self.ewif_onsite);
        check_non_negative(&mut out, "ewi", self.ewi);
        if let Some(a) = self.area {
            check_non_negative(&mut out, "area", a);
            match self.annual_it_energy {
                Some(e) if e.is_finite() && e > 0.0 => {}
                Some(e) => out.push(Violation {
                    field: "annual_it_energy",
                    message: format!("must be > 0 when area is given, got {e}"),
                }),
                None => out.push(Violation {
                    field: "annual_it_energy",
                    message: "required when area is given".into(),
                }),
            }
        }
        out
    }

    fn check_region(&self, region: &RegionProfile) -> Result<(), FootprintError> {
        if region.region_id != self.region {
            return Err(FootprintError::RegionMismatch {
                dc: self.dc_id.clone(),
                expected: self.region.clone(),
                got: region.region_id.clone(),
            });
        }
        Ok(())
    }
}

/// A unit of work. `current_dc` is present exactly when the job is deployed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: JobId,
    pub owner: UserId,
    pub power_kw: f64,
    pub lifetime_hours: u32,
    pub arrival_hour: u32,
    pub current_dc: Option<DcId>,
}

impl Job {
    pub fn is_deployed(&self) -> bool {
        self.current_dc.is_some()
    }

    /// IT energy over `hours` of execution.
    pub fn energy_kwh(&self, hours: f64) -> f64 {
        self.power_kw * hours
    }
}

/// Carbon emitted running `e_j` kWh of IT load, g CO2.
pub fn carbon_footprint(e_j: f64, dc: &DataCenterProfile, region: &RegionProfile) -> f64 {
    (e_j * dc.pue) * (dc.ci_onsite * dc.p_onsite + region.ci_grid * dc.p_grid())
}

/// On-site water (cooling plus on-site generation), scaled by water
/// scarcity, liters. With no on-site generation this is
/// `e_j · WUE · (1 + WSF)`.
pub fn water_onsite(e_j: f64, dc: &DataCenterProfile, region: &RegionProfile) -> f64 {
    e_j * (dc.wue + dc.p_onsite * dc.ewif_onsite) * (1.0 + region.wsf)
}

/// Water consumed generating the grid share of the facility's energy, liters.
pub fn water_offsite(e_j: f64, dc: &DataCenterProfile, region: &RegionProfile) -> f64 {
    (e_j * dc.pue) * (dc.p_grid() * region.ewif_grid) * (1.0 + region.wsf)
}

/// Land-use effectiveness `A / E_IT`, m² per kWh of annual IT energy.
pub fn lue(dc: &DataCenterProfile) -> Result<f64, FootprintError> {
    let area = dc.area.ok_or_else(|| FootprintError::MissingArea {
        dc: dc.dc_id.clone(),
    })?;
    match dc.annual_it_energy {
        None => Err(FootprintError::MissingItEnergy {
            dc: dc.dc_id.clone(),
        }),
        Some(0.0) => Err(FootprintError::ZeroItEnergy {
            dc: dc.dc_id.clone(),
        }),
        Some(e) => Ok(area / e),
    }
}

/// Capture loss from the facility's own land, g CO2.
///
/// A facility with no reported area contributes zero.
pub fn land_onsite(
    e_j: f64,
    dc: &DataCenterProfile,
    region: &RegionProfile,
) -> Result<f64, FootprintError> {
    if dc.area.is_none() {
        return Ok(0.0);
    }
    Ok(e_j * lue(dc)? * region.cclf)
}

/// Capture loss from land occupied by grid generation, g CO2.
pub fn land_offsite(e_j: f64, dc: &DataCenterProfile, region: &RegionProfile) -> f64 {
    e_j * dc.pue * (dc.p_grid() * region.elif_grid * region.cclf)
}

/// Non-recycled e-waste attributed to `e_j` kWh, grams.
pub fn ewaste_footprint(e_j: f64, dc: &DataCenterProfile) -> f64 {
    e_j * dc.ewi
}

/// Full impact vector for `e_j` kWh at `dc`.
pub fn footprint(
    e_j: f64,
    dc: &DataCenterProfile,
    region: &RegionProfile,
) -> Result<FootprintVector, FootprintError> {
    dc.check_region(region)?;
    Ok(FootprintVector {
        carbon_g: carbon_footprint(e_j, dc, region),
        water_l: water_onsite(e_j, dc, region) + water_offsite(e_j, dc, region),
        land_g: land_onsite(e_j, dc, region)? + land_offsite(e_j, dc, region),
        ewaste_g: ewaste_footprint(e_j, dc),
    })
}

/// Sustainability profile: the impact vector of one kWh.
pub fn per_kwh_profile(
    dc: &DataCenterProfile,
    region: &RegionProfile,
) -> Result<FootprintVector, FootprintError> {
    footprint(1.0, dc, region)
}
