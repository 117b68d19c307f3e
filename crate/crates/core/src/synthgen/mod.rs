//! Deterministic synthetic data with exact ground truth: hand images with
//! vein networks, stereo pairs, photometric-stereo scenes, clap-bracketed
//! capture sequences and complete datasets.
//!
//! Every output is a pure function of its seed and parameters.

mod dataset;
mod hand;
mod ps;
mod sequence;
mod stereo;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dataset::{gen_dataset, image_relpath, DatasetParams, SyntheticDataset};
pub use hand::{generate_subjects, render_hand, FingerModel, HandModel, HandRenderer, HandTruth, Pose, RenderParams, SubjectModel, Vein};
pub use ps::{render_ps, Falloff, PsRenderParams, PsScene, PsTruth};
pub use sequence::{render_sequence, SequenceParams, SequenceTruth};
pub use stereo::{render_stereo, ScenePlane, StereoRender, StereoRenderParams, StereoScene, StereoTruth, Texture};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed derived from a root seed and a path of integers.
pub(crate) fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |h, &p| splitmix(h ^ p))
}

pub(crate) fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}
