use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capsync::{CaptureSchedule, FrameSequence};
use crate::imgcore::{BitDepth, ImageGray};

use super::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceParams {
    pub width: usize,
    pub height: usize,
    pub bit_depth: BitDepth,
    /// Frames lost at the head of the stream.
    pub head_drop: usize,
    /// Payload frame lost mid-stream, by payload index.
    pub mid_drop: Option<usize>,
    pub tail_blank: usize,
    /// Lit clap frame level, fraction of full scale.
    pub clap_level: f64,
    /// Dark and blank frame level, fraction of full scale.
    pub dark_level: f64,
    /// Per-pixel uniform noise amplitude, fraction of full scale.
    pub noise: f64,
}

impl Default for SequenceParams {
    fn default() -> Self {
        SequenceParams {
            width: 16,
            height: 12,
            bit_depth: BitDepth::Ten,
            head_drop: 0,
            mid_drop: None,
            tail_blank: 5,
            clap_level: 0.9,
            dark_level: 0.02,
            noise: 0.01,
        }
    }
}

/// Where the payload ended up in the rendered stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceTruth {
    /// Payload frames as emitted before any loss, in schedule order.
    pub payload: Vec<ImageGray>,
    /// First payload frame in the delivered stream.
    pub payload_start: usize,
    /// One past the last payload frame in the delivered stream.
    pub payload_end: usize,
}

fn flat_frame<R: Rng>(p: &SequenceParams, level: f64, rng: &mut R) -> ImageGray {
    let full = p.bit_depth.max_value() as f64;
    ImageGray::from_fn(p.width, p.height, p.bit_depth, |_, _| {
        let v = level + p.noise * rng.gen_range(-1.0..=1.0);
        (v * full).round().clamp(0.0, full) as u16
    })
}

/// Raw stream for `schedule`: blank prefix, clap, payload, clap, blank tail.
/// Payload frame means lie in `[0.05, 0.45]` of full scale so none reads as
/// lit.
pub fn render_sequence(schedule: &CaptureSchedule, params: &SequenceParams, seed: u64) -> (FrameSequence, SequenceTruth) {
    let p = params;
    let mut rng = rng_for(&[seed]);
    let clap: Vec<ImageGray> =
        schedule.clap.bits().iter().map(|&b| flat_frame(p, if b { p.clap_level } else { p.dark_level }, &mut rng)).collect();
    let payload: Vec<ImageGray> = (0..schedule.len())
        .map(|_| {
            let level = rng.gen_range(0.05..=0.45);
            flat_frame(p, level, &mut rng)
        })
        .collect();

    let mut frames: Vec<ImageGray> = (0..schedule.prefix_blank).map(|_| flat_frame(p, p.dark_level, &mut rng)).collect();
    frames.extend(clap.iter().cloned());
    let payload_start = frames.len();
    for (i, f) in payload.iter().enumerate() {
        if p.mid_drop != Some(i) {
            frames.push(f.clone());
        }
    }
    let payload_end = frames.len();
    frames.extend(clap);
    frames.extend((0..p.tail_blank).map(|_| flat_frame(p, p.dark_level, &mut rng)));
    let drop = p.head_drop.min(frames.len());
    frames.drain(..drop);
    let truth = SequenceTruth {
        payload,
        payload_start: payload_start.saturating_sub(drop),
        payload_end: payload_end.saturating_sub(drop),
    };
    (FrameSequence::unlabelled(frames, schedule.nominal_rate_hz), truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capsync::{trim_and_label, FrameClassifier};
    use crate::domain::{Camera, ChannelLabel, Wavelength};
    use crate::error::Error;

    fn schedule() -> CaptureSchedule {
        CaptureSchedule::new(
            (0..12).map(|i| ChannelLabel { camera: Camera::Left, wavelength: Wavelength::Nir850, bank: (i % 4) as u8 }).collect(),
        )
    }

    #[test]
    fn head_drops_recover_payload() {
        let s = schedule();
        for drop in 0..=3 {
            let (seq, truth) = render_sequence(&s, &SequenceParams { head_drop: drop, ..Default::default() }, 4);
            let out = trim_and_label(&seq, &s, &FrameClassifier::default()).unwrap();
            assert_eq!(out.frames, truth.payload);
            assert_eq!(seq.frames[truth.payload_start], truth.payload[0]);
        }
    }

    #[test]
    fn mid_drop_is_a_length_mismatch() {
        let s = schedule();
        let (seq, _) = render_sequence(&s, &SequenceParams { mid_drop: Some(5), ..Default::default() }, 4);
        let err = trim_and_label(&seq, &s, &FrameClassifier::default()).unwrap_err();
        assert!(matches!(err, Error::PayloadLengthMismatch { expected: 12, found: 11 }));
    }
}
