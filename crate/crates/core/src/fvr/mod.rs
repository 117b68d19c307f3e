//! Finger-vein templates: segmentation, normalization, enhancement,
//! maximum-curvature features and shift-search matching.

pub mod enhance;
mod matching;
mod mc;
mod normalize;
mod segment;
mod template;

use serde::{Deserialize, Serialize};

pub use enhance::{enhance, enhancer_by_name, ClaheGabor, Enhancer, Identity};
pub use matching::{miura_match, overlap_counts, MatchParams, MatchResult};
pub use mc::{extract_mc, McDirections, McParams};
pub use normalize::{axis_fit, normalize_finger, rotate_point, NormalizeParams, NormalizedFinger};
pub use segment::{reorder_fingers, segment_fingers, FingerRegion, SegmentParams};
pub use template::{build_template, finger_stem, load_template, save_template, template_stem, FingerTemplate, TemplateHeader, TemplateOutcome, TemplateSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhanceConfig {
    pub name: String,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig { name: "identity".into() }
    }
}

/// All template-pipeline parameters.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FvrConfig {
    pub segment: SegmentParams,
    pub normalize: NormalizeParams,
    pub enhance: EnhanceConfig,
    pub mc: McParams,
    #[serde(rename = "match")]
    pub matching: MatchParams,
}
