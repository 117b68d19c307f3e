//! JSON calibration file consumed by the reconstruction stages.
//!
//! ```json
//! {
//!   "cameras": {
//!     "left":  { "K": [fx,0,cx, 0,fy,cy, 0,0,1], "dist": [k1,k2,p1,p2,k3], "image_size": [w,h] },
//!     "right": { ... },
//!     "rgb":   { ... }
//!   },
//!   "stereo": { "R": [9 numbers], "t": [3 numbers], "units": "mm" },
//!   "rgb_pose": { "R": [...], "t": [...], "units": "mm" }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Camera;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

use super::camera::{CameraIntrinsics, StereoExtrinsics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub dist: Vec<f64>,
    pub image_size: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub cameras: BTreeMap<Camera, CameraEntry>,
    pub stereo: PoseEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rgb_pose: Option<PoseEntry>,
}

impl CameraEntry {
    pub fn to_intrinsics<T: Real>(&self) -> Result<CameraIntrinsics<T>> {
        let k = Mat3::from_row_slice(&self.k.iter().map(|&v| T::lit(v)).collect::<Vec<_>>())
            .ok_or_else(|| Error::InvalidCalibration(format!("K needs 9 numbers, got {}", self.k.len())))?;
        let dist: [T; 5] = self
            .dist
            .iter()
            .map(|&v| T::lit(v))
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| Error::InvalidCalibration(format!("dist needs 5 numbers, got {}", self.dist.len())))?;
        let intr = CameraIntrinsics { k, dist, image_size: (self.image_size[0], self.image_size[1]) };
        intr.validate()?;
        Ok(intr)
    }

    pub fn from_intrinsics<T: Real>(intr: &CameraIntrinsics<T>) -> Self {
        Self {
            k: intr.k.to_row_vec().iter().map(|v| v.as_f64()).collect(),
            dist: intr.dist.iter().map(|v| v.as_f64()).collect(),
            image_size: [intr.image_size.0, intr.image_size.1],
        }
    }
}

impl PoseEntry {
    pub fn to_extrinsics<T: Real>(&self) -> Result<StereoExtrinsics<T>> {
        let scale = match self.units.as_str() {
            "mm" => 1.0,
            "cm" => 10.0,
            "m" => 1000.0,
            u => return Err(Error::InvalidCalibration(format!("unknown units {u:?}"))),
        };
        let rotation = Mat3::from_row_slice(&self.r.iter().map(|&v| T::lit(v)).collect::<Vec<_>>())
            .ok_or_else(|| Error::InvalidCalibration(format!("R needs 9 numbers, got {}", self.r.len())))?;
        if self.t.len() != 3 {
            return Err(Error::InvalidCalibration(format!("t needs 3 numbers, got {}", self.t.len())));
        }
        let translation = Vec3::new(T::lit(self.t[0] * scale), T::lit(self.t[1] * scale), T::lit(self.t[2] * scale));
        Ok(StereoExtrinsics { rotation, translation })
    }

    pub fn from_extrinsics<T: Real>(e: &StereoExtrinsics<T>) -> Self {
        Self {
            r: e.rotation.to_row_vec().iter().map(|v| v.as_f64()).collect(),
            t: e.translation.0.iter().map(|v| v.as_f64()).collect(),
            units: "mm".into(),
        }
    }
}

impl CalibrationFile {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn intrinsics<T: Real>(&self, camera: Camera) -> Result<CameraIntrinsics<T>> {
        self.cameras
            .get(&camera)
            .ok_or_else(|| Error::InvalidCalibration(format!("no intrinsics for camera {camera}")))?
            .to_intrinsics()
    }

    pub fn stereo<T: Real>(&self) -> Result<StereoExtrinsics<T>> {
        let e = self.stereo.to_extrinsics()?;
        e.validate()?;
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "cameras": {
            "left":  {"K": [1180,0,718, 0,1176,542, 0,0,1], "dist": [-0.1,0.02,0,0,0], "image_size": [1440,1080]},
            "right": {"K": [1172,0,726, 0,1170,536, 0,0,1], "dist": [-0.1,0.02,0,0,0], "image_size": [1440,1080]}
        },
        "stereo": {"R": [1,0,0, 0,1,0, 0,0,1], "t": [-60,0,0], "units": "mm"}
    }"#;

    #[test]
    fn parses_reference_layout() {
        let c: CalibrationFile = serde_json::from_str(SAMPLE).unwrap();
        let l = c.intrinsics::<f64>(Camera::Left).unwrap();
        assert_eq!(l.fx(), 1180.0);
        assert_eq!(l.image_size, (1440, 1080));
        let s = c.stereo::<f32>().unwrap();
        assert_eq!(s.translation.x(), -60.0);
        assert!(c.intrinsics::<f64>(Camera::Rgb).is_err());
    }

    #[test]
    fn rejects_bad_shapes_and_keys() {
        let bad = SAMPLE.replace("[-0.1,0.02,0,0,0], \"image_size\": [1440,1080]}\n", "[-0.1], \"image_size\": [1440,1080]}\n");
        let c: CalibrationFile = serde_json::from_str(&bad).unwrap();
        assert!(c.intrinsics::<f64>(Camera::Right).is_err());
        let unknown = SAMPLE.replace("\"units\": \"mm\"", "\"units\": \"mm\", \"extra\": 1");
        assert!(serde_json::from_str::<CalibrationFile>(&unknown).is_err());
        let zero_t = SAMPLE.replace("[-60,0,0]", "[0,0,0]");
        let c: CalibrationFile = serde_json::from_str(&zero_t).unwrap();
        assert!(matches!(c.stereo::<f64>(), Err(Error::DegenerateExtrinsics(_))));
    }
}
