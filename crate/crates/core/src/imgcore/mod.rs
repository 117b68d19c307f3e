//! Image buffers, bit-depth handling, masks, thresholding and morphology.

mod image;
pub mod io;
mod morph;
mod otsu;

pub use image::{bilinear, BinaryMask, BitDepth, ImageGray, ImageRgb, Plane};
pub use io::{load_image, save_image, save_image_tagged, ImageFormat, ImageMeta};
pub use morph::{dilate, erode, morph_open};
pub use otsu::{otsu_from_histogram, otsu_threshold};
