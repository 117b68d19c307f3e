//! Contactless hand-vascular biometrics pipeline.
//!
//! Capture synchronization, stereo and photometric 3D reconstruction,
//! finger-vein template extraction and matching, and the verification and
//! fusion evaluation harness, all testable against synthetic ground truth
//! produced by [`synthgen`].

pub mod capsync;
pub mod domain;
pub mod error;
pub mod evalharness;
pub mod fvr;
pub mod geometry;
pub mod imgcore;
pub mod linalg;
pub mod photostereo;
pub mod scalar;
pub mod stereo;
pub mod synthgen;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default working precision of the generic numeric modules.
pub type Scalar = f64;
/// Single precision for memory-bound use.
pub type ScalarF32 = f32;

pub type LightSet = photostereo::LightSet<Scalar>;
pub type NormalField = photostereo::NormalField<Scalar>;
pub type RectifiedRig = geometry::RectifiedRig<Scalar>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<Scalar>;
