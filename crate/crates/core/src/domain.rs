//! Identifiers shared across the capture, template and evaluation stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Camera {
    Left,
    Right,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wavelength {
    #[serde(rename = "850")]
    Nir850,
    #[serde(rename = "950")]
    Nir950,
    #[serde(rename = "white")]
    White,
    #[serde(rename = "laser")]
    Laser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hand {
    #[serde(rename = "LH")]
    Left,
    #[serde(rename = "RH")]
    Right,
}

/// Finger order index: 0 = index … 3 = little.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Finger {
    Index,
    Middle,
    Ring,
    Little,
}

impl Finger {
    pub const ALL: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];
    /// Fingers used by the recognition protocols.
    pub const EVALUATED: [Finger; 3] = [Finger::Index, Finger::Middle, Finger::Ring];

    pub fn order_index(self) -> usize {
        self as usize
    }

    pub fn from_order_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Label of one captured frame: which camera, under which illumination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelLabel {
    pub camera: Camera,
    pub wavelength: Wavelength,
    pub bank: u8,
}

impl fmt::Display for Camera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Camera::Left => "left",
            Camera::Right => "right",
            Camera::Rgb => "rgb",
        })
    }
}

impl fmt::Display for Wavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wavelength::Nir850 => "850",
            Wavelength::Nir950 => "950",
            Wavelength::White => "white",
            Wavelength::Laser => "laser",
        })
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hand::Left => "LH",
            Hand::Right => "RH",
        })
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        })
    }
}

impl FromStr for Camera {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "left" => Ok(Camera::Left),
            "right" => Ok(Camera::Right),
            "rgb" => Ok(Camera::Rgb),
            _ => Err(Error::InvalidParam(format!("unknown camera {s:?}"))),
        }
    }
}

impl FromStr for Wavelength {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "850" => Ok(Wavelength::Nir850),
            "950" => Ok(Wavelength::Nir950),
            "white" => Ok(Wavelength::White),
            "laser" => Ok(Wavelength::Laser),
            _ => Err(Error::InvalidParam(format!("unknown wavelength {s:?}"))),
        }
    }
}

impl FromStr for Hand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "LH" | "lh" => Ok(Hand::Left),
            "RH" | "rh" => Ok(Hand::Right),
            _ => Err(Error::InvalidParam(format!("unknown hand {s:?}"))),
        }
    }
}
