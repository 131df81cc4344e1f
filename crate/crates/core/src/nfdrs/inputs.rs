use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vegetation stage; codes follow the order cured, pre-green, green, transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VegetationStage {
    Cured = 1,
    PreGreen = 2,
    Green = 3,
    Transition = 4,
}

impl VegetationStage {
    pub const ALL: [VegetationStage; 4] = [Self::Cured, Self::PreGreen, Self::Green, Self::Transition];

    pub fn from_code(code: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| *s as u32 == code)
            .ok_or_else(|| Error::input("vegetation_stage", format!("unknown class code {code}")))
    }
}

/// NFDRS-78 fuel models carried by this implementation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FuelModel {
    /// Western annual grasses.
    A,
    /// Open pine with grass.
    C,
    /// Short-needle closed conifer, heavy dead.
    G,
    /// Western perennial grass.
    L,
    /// Sagebrush with grass.
    T,
}

impl FuelModel {
    pub const ALL: [FuelModel; 5] = [Self::A, Self::C, Self::G, Self::L, Self::T];

    pub fn code(self) -> &'static str {
        match self {
            Self::A => "A",
            Self::C => "C",
            Self::G => "G",
            Self::L => "L",
            Self::T => "T",
        }
    }

    /// Position in [`FuelModel::ALL`]; also the raster class code minus one.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Raster class code (1-based).
    pub fn class_code(self) -> u32 {
        self.index() as u32 + 1
    }

    pub fn from_class_code(code: u32) -> Result<Self> {
        (code as usize)
            .checked_sub(1)
            .and_then(|i| Self::ALL.get(i).copied())
            .ok_or_else(|| Error::input("fuel_model", format!("unknown class code {code}")))
    }
}

/// Köppen main climate group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClimateZone {
    Tropical = 1,
    Arid = 2,
    Temperate = 3,
    Continental = 4,
    Polar = 5,
}

/// NFDRS climate class selecting the live-fuel coefficient row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClimateClass {
    Arid = 0,
    SubhumidDeficient = 1,
    SubhumidAdequate = 2,
    Wet = 3,
}

impl ClimateZone {
    pub const ALL: [ClimateZone; 5] = [Self::Tropical, Self::Arid, Self::Temperate, Self::Continental, Self::Polar];

    pub fn from_code(code: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|z| *z as u32 == code)
            .ok_or_else(|| Error::input("climate_zone", format!("unknown class code {code}")))
    }

    pub fn climate_class(self) -> ClimateClass {
        match self {
            Self::Arid => ClimateClass::Arid,
            Self::Temperate => ClimateClass::SubhumidDeficient,
            Self::Continental => ClimateClass::SubhumidAdequate,
            Self::Tropical | Self::Polar => ClimateClass::Wet,
        }
    }
}

/// One grid cell's weather and site inputs for one day.
///
/// Temperatures in °F, humidities in percent, wind in mph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellInputs {
    pub temp: f64,
    pub temp_max: f64,
    pub temp_min: f64,
    pub rh: f64,
    pub rh_max: f64,
    pub rh_min: f64,
    pub wind_speed: f64,
    /// Fraction of sky covered, 0 to 1.
    pub cloud_cover: f64,
    /// Hours of precipitation in the past 24 h.
    pub precip_duration: f64,
    /// Climatological annual precipitation (inches/year).
    pub annual_precip_mean: f64,
    pub vegetation_stage: VegetationStage,
    /// Land-cover class code; carried for provenance, not used by the IC chain.
    pub vegetation_cover: u32,
    pub slope_class: u8,
    pub fuel_model: FuelModel,
    pub climate_zone: ClimateZone,
}

impl CellInputs {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("temp", self.temp),
            ("temp_max", self.temp_max),
            ("temp_min", self.temp_min),
            ("rh", self.rh),
            ("rh_max", self.rh_max),
            ("rh_min", self.rh_min),
            ("wind_speed", self.wind_speed),
            ("cloud_cover", self.cloud_cover),
            ("precip_duration", self.precip_duration),
            ("annual_precip_mean", self.annual_precip_mean),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::input(field, format!("non-finite value {v}")));
            }
        }
        if !(self.temp_min <= self.temp && self.temp <= self.temp_max) {
            return Err(Error::input(
                "temp",
                format!("need temp_min <= temp <= temp_max, got {} / {} / {}", self.temp_min, self.temp, self.temp_max),
            ));
        }
        for (field, v) in [("rh", self.rh), ("rh_max", self.rh_max), ("rh_min", self.rh_min)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::input(field, format!("{v} outside [0, 100]")));
            }
        }
        if !(self.rh_min <= self.rh && self.rh <= self.rh_max) {
            return Err(Error::input(
                "rh",
                format!("need rh_min <= rh <= rh_max, got {} / {} / {}", self.rh_min, self.rh, self.rh_max),
            ));
        }
        if self.wind_speed < 0.0 {
            return Err(Error::input("wind_speed", format!("negative wind {}", self.wind_speed)));
        }
        if !(0.0..=1.0).contains(&self.cloud_cover) {
            return Err(Error::input("cloud_cover", format!("{} outside [0, 1]", self.cloud_cover)));
        }
        if !(0.0..=24.0).contains(&self.precip_duration) {
            return Err(Error::input("precip_duration", format!("{} outside [0, 24]", self.precip_duration)));
        }
        if self.annual_precip_mean < 0.0 {
            return Err(Error::input("annual_precip_mean", "negative climatology"));
        }
        if !(1..=5).contains(&self.slope_class) {
            return Err(Error::input("slope_class", format!("{} outside 1..=5", self.slope_class)));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn sample_inputs() -> CellInputs {
    CellInputs {
        temp: 78.0,
        temp_max: 88.0,
        temp_min: 55.0,
        rh: 28.0,
        rh_max: 70.0,
        rh_min: 20.0,
        wind_speed: 9.0,
        cloud_cover: 0.2,
        precip_duration: 0.0,
        annual_precip_mean: 20.0,
        vegetation_stage: VegetationStage::Cured,
        vegetation_cover: 7,
        slope_class: 2,
        fuel_model: FuelModel::C,
        climate_zone: ClimateZone::Temperate,
    }
}
