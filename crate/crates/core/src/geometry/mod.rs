//! Camera model, rectification, depth conversion, RGB alignment and optics
//! calculators.

mod align;
pub mod calib;
mod camera;
mod optics;
mod rectify;

pub use align::align_rgb_to_left;
pub use calib::CalibrationFile;
pub use camera::{undistort, CameraIntrinsics, StereoExtrinsics};
pub use optics::{dof_calc, fov_calc, DepthOfField, FieldOfView, OpticsSpec};
pub use rectify::{rectify_image, rectify_pair, RectifiedPair, RectifiedRig};
