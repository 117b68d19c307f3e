//! Capture synchronization from start/end "clap" frame patterns.
//!
//! A raw sequence is laid out as
//! `[blank × prefix][clap][payload …][clap][blank …]`, where the sensors may
//! lose up to three frames at the head. Frames are binarized by global
//! brightness, both claps are located by exhaustive alignment, and the
//! payload between them is checked against the declared schedule length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::ChannelLabel;
use crate::error::{Error, Result};
use crate::imgcore::ImageGray;

pub const CLAP_LEN: usize = 10;
/// Head-drop count tolerated by the sensors.
pub const MAX_HEAD_DROP: usize = 3;

/// Ten-frame bright/dark pattern recorded at both ends of a capture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClapPattern {
    bits: [bool; CLAP_LEN],
}

impl ClapPattern {
    pub fn new(bits: [bool; CLAP_LEN]) -> Result<Self> {
        let transitions = bits.windows(2).filter(|w| w[0] != w[1]).count();
        if transitions == 0 {
            return Err(Error::InvalidParam("clap pattern needs at least one transition".into()));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool; CLAP_LEN] {
        &self.bits
    }

    pub fn transitions(&self) -> usize {
        self.bits.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

impl Default for ClapPattern {
    fn default() -> Self {
        "1011001011".parse().expect("default pattern")
    }
}

impl FromStr for ClapPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.len() != CLAP_LEN {
            return Err(Error::InvalidParam(format!("clap pattern must have {CLAP_LEN} bits: {s:?}")));
        }
        let mut bits = [false; CLAP_LEN];
        for (b, c) in bits.iter_mut().zip(s.chars()) {
            *b = match c {
                '0' => false,
                '1' => true,
                _ => return Err(Error::InvalidParam(format!("clap pattern bit {c:?}"))),
            };
        }
        Self::new(bits)
    }
}

impl TryFrom<String> for ClapPattern {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ClapPattern> for String {
    fn from(p: ClapPattern) -> String {
        p.to_string()
    }
}

impl fmt::Display for ClapPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Declared capture layout: clap bits, blank prefix and per-frame labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSchedule {
    #[serde(default)]
    pub clap: ClapPattern,
    #[serde(default = "default_prefix_blank")]
    pub prefix_blank: usize,
    #[serde(default = "default_rate")]
    pub nominal_rate_hz: f64,
    pub frames: Vec<ChannelLabel>,
}

fn default_prefix_blank() -> usize {
    10
}

fn default_rate() -> f64 {
    50.0
}

impl CaptureSchedule {
    pub fn new(frames: Vec<ChannelLabel>) -> Self {
        Self { clap: ClapPattern::default(), prefix_blank: default_prefix_blank(), nominal_rate_hz: default_rate(), frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Ordered frames of one camera stream, labelled after synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<ImageGray>,
    pub labels: Vec<ChannelLabel>,
    pub nominal_rate_hz: f64,
}

impl FrameSequence {
    pub fn unlabelled(frames: Vec<ImageGray>, nominal_rate_hz: f64) -> Self {
        Self { frames, labels: Vec::new(), nominal_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Brightness classifier for clap frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameClassifier {
    /// A frame is bright iff its mean exceeds `½ · full_scale · reference_gain`.
    pub reference_gain: f64,
}

impl Default for FrameClassifier {
    fn default() -> Self {
        Self { reference_gain: 1.0 }
    }
}

impl FrameClassifier {
    pub fn classify_frame(&self, img: &ImageGray) -> bool {
        img.mean() > 0.5 * img.full_scale() as f64 * self.reference_gain
    }
}

/// Payload bounds: `start` is the first payload frame, `end` one past the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClapPositions {
    pub start: usize,
    pub end: usize,
}

/// Locates both claps in a binarized sequence.
///
/// The opening clap is the first alignment preceded only by dark frames; the
/// closing clap the last alignment followed only by dark frames.
pub fn locate_claps(bright: &[bool], pattern: &ClapPattern, expected_payload: usize) -> Result<ClapPositions> {
    let p = pattern.bits();
    let n = bright.len();
    if n < 2 * CLAP_LEN {
        return Err(Error::ClapNotFound);
    }
    let matches_at = |i: usize| bright[i..i + CLAP_LEN] == p[..];

    let mut head = None;
    for i in 0..=n - CLAP_LEN {
        if matches_at(i) {
            head = Some(i);
            break;
        }
        if bright[i] {
            // a lit frame that does not start the clap: nothing later can
            // be preceded by darkness only
            break;
        }
    }
    let head = head.ok_or(Error::ClapNotFound)?;
    let start = head + CLAP_LEN;

    let mut tail = None;
    for j in (start..=n - CLAP_LEN).rev() {
        if matches_at(j) {
            tail = Some(j);
            break;
        }
        if bright[j + CLAP_LEN - 1] {
            break;
        }
    }
    let end = tail.ok_or(Error::ClapNotFound)?;
    if end - start != expected_payload {
        return Err(Error::PayloadLengthMismatch { expected: expected_payload, found: end - start });
    }
    Ok(ClapPositions { start, end })
}

pub fn detect_claps(seq: &FrameSequence, schedule: &CaptureSchedule, classifier: &FrameClassifier) -> Result<ClapPositions> {
    let bright: Vec<bool> = seq.frames.iter().map(|f| classifier.classify_frame(f)).collect();
    locate_claps(&bright, &schedule.clap, schedule.len())
}

/// Keeps the payload frames and labels them from the schedule.
pub fn trim_and_label(seq: &FrameSequence, schedule: &CaptureSchedule, classifier: &FrameClassifier) -> Result<FrameSequence> {
    let pos = detect_claps(seq, schedule, classifier)?;
    let frames = seq.frames[pos.start..pos.end].to_vec();
    debug_assert_eq!(frames.len(), schedule.frames.len());
    Ok(FrameSequence { frames, labels: schedule.frames.clone(), nominal_rate_hz: schedule.nominal_rate_hz })
}
