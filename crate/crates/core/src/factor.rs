//! Environmental impact factors and per-factor vectors.

use core::fmt;
use core::ops::{Add, AddAssign};
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub const FACTOR_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Carbon,
    Water,
    Land,
    Ewaste,
}

impl Factor {
    pub const ALL: [Factor; FACTOR_COUNT] =
        [Factor::Carbon, Factor::Water, Factor::Land, Factor::Ewaste];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Factor::Carbon => "carbon",
            Factor::Water => "water",
            Factor::Land => "land",
            Factor::Ewaste => "ewaste",
        }
    }

    /// Unit of the factor as accounted in footprints.
    pub const fn unit(self) -> &'static str {
        match self {
            Factor::Carbon => "g CO2",
            Factor::Water => "l",
            Factor::Land => "g CO2 capture loss",
            Factor::Ewaste => "g",
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown factor `{0}` (expected carbon, water, land or ewaste)")]
pub struct UnknownFactor(pub alloc::string::String);

impl FromStr for Factor {
    type Err = UnknownFactor;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "carbon" => Ok(Factor::Carbon),
            "water" => Ok(Factor::Water),
            "land" | "landuse" | "land_use" => Ok(Factor::Land),
            "ewaste" | "e-waste" | "e_waste" => Ok(Factor::Ewaste),
            _ => Err(UnknownFactor(s.into())),
        }
    }
}

/// Impact per factor: grams CO2, liters of water, grams of CO2 capture loss
/// from land occupation, grams of non-recycled e-waste.
///
/// Used both for per-kWh sustainability profiles and for accumulated
/// footprints. Componentwise additive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FootprintVector {
    pub carbon_g: f64,
    pub water_l: f64,
    pub land_g: f64,
    pub ewaste_g: f64,
}

impl FootprintVector {
    pub const ZERO: FootprintVector = FootprintVector {
        carbon_g: 0.0,
        water_l: 0.0,
        land_g: 0.0,
        ewaste_g: 0.0,
    };

    pub const fn from_array(v: [f64; FACTOR_COUNT]) -> Self {
        Self {
            carbon_g: v[0],
            water_l: v[1],
            land_g: v[2],
            ewaste_g: v[3],
        }
    }

    pub const fn to_array(self) -> [f64; FACTOR_COUNT] {
        [self.carbon_g, self.water_l, self.land_g, self.ewaste_g]
    }

    pub const fn get(&self, factor: Factor) -> f64 {
        match factor {
            Factor::Carbon => self.carbon_g,
            Factor::Water => self.water_l,
            Factor::Land => self.land_g,
            Factor::Ewaste => self.ewaste_g,
        }
    }

    pub fn set(&mut self, factor: Factor, value: f64) {
        match factor {
            Factor::Carbon => self.carbon_g = value,
            Factor::Water => self.water_l = value,
            Factor::Land => self.land_g = value,
            Factor::Ewaste => self.ewaste_g = value,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * k))
    }

    /// Weighted sum of the components.
    pub fn dot(&self, weights: &FactorWeights) -> f64 {
        self.to_array()
            .iter()
            .zip(weights.as_array())
            .fold(0.0, |acc, (v, w)| acc + v * w)
    }

    pub fn is_non_negative(&self) -> bool {
        self.to_array().iter().all(|v| *v >= 0.0)
    }
}

impl Add for FootprintVector {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            carbon_g: self.carbon_g + rhs.carbon_g,
            water_l: self.water_l + rhs.water_l,
            land_g: self.land_g + rhs.land_g,
            ewaste_g: self.ewaste_g + rhs.ewaste_g,
        }
    }
}

impl AddAssign for FootprintVector {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// Non-negative preference weights over the factors, not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; FACTOR_COUNT]", into = "[f64; FACTOR_COUNT]")]
pub struct FactorWeights([f64; FACTOR_COUNT]);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvalidWeights {
    #[error("weight for {factor} is {value}; weights must be finite and non-negative")]
    Negative { factor: Factor, value: f64 },
    #[error("all preference weights are zero")]
    AllZero,
}

impl FactorWeights {
    pub fn new(weights: [f64; FACTOR_COUNT]) -> Result<Self, InvalidWeights> {
        for factor in Factor::ALL {
            let value = weights[factor.index()];
            if !value.is_finite() || value < 0.0 {
                return Err(InvalidWeights::Negative { factor, value });
            }
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(InvalidWeights::AllZero);
        }
        Ok(Self(weights))
    }

    /// One-hot weights selecting a single factor.
    pub fn one_hot(factor: Factor) -> Self {
        let mut w = [0.0; FACTOR_COUNT];
        w[factor.index()] = 1.0;
        Self(w)
    }

    pub const fn as_array(&self) -> &[f64; FACTOR_COUNT] {
        &self.0
    }

    pub fn get(&self, factor: Factor) -> f64 {
        self.0[factor.index()]
    }
}

impl TryFrom<[f64; FACTOR_COUNT]> for FactorWeights {
    type Error = InvalidWeights;

    fn try_from(value: [f64; FACTOR_COUNT]) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FactorWeights> for [f64; FACTOR_COUNT] {
    fn from(value: FactorWeights) -> Self {
        value.0
    }
}
