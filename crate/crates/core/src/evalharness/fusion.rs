use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Finger;
use crate::fvr::TemplateSource;

use super::protocol::ScoreRecord;
use super::{ProtocolId, Split};

/// Index, middle and ring scores of one probe frame against one claimed
/// hand identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionVector {
    pub protocol: ProtocolId,
    pub split: Split,
    pub probe: TemplateSource,
    pub claimed_subject: u32,
    pub scores: [f64; 3],
    pub genuine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedScores {
    /// Sorted by protocol, split, probe and claimed subject.
    pub vectors: Vec<FusionVector>,
    /// Groups lacking at least one finger score.
    pub dropped: usize,
}

/// Groups finger records by probe frame and claimed identity. The output is
/// independent of the input order.
pub fn fuse_fingers(records: &[ScoreRecord]) -> FusedScores {
    type Key = (ProtocolId, Split, TemplateSource, u32);
    let mut groups: BTreeMap<Key, [Option<f64>; 3]> = BTreeMap::new();
    for r in records {
        let Some(slot) = Finger::EVALUATED.iter().position(|&f| f == r.finger) else { continue };
        let g = groups.entry((r.protocol, r.split, r.probe.clone(), r.claimed_subject)).or_default();
        g[slot] = Some(r.score);
    }
    let mut vectors = Vec::with_capacity(groups.len());
    let mut dropped = 0;
    for ((protocol, split, probe, claimed_subject), s) in groups {
        match s {
            [Some(a), Some(b), Some(c)] => {
                let genuine = probe.subject == claimed_subject;
                vectors.push(FusionVector { protocol, split, probe, claimed_subject, scores: [a, b, c], genuine });
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("fuse_fingers: {dropped} probe/claim groups lack a finger score and were dropped");
    }
    FusedScores { vectors, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Camera, Hand, Wavelength};

    fn records(probes: u32) -> Vec<ScoreRecord> {
        let mut out = Vec::new();
        for p in 0..probes {
            let probe =
                TemplateSource { subject: p % 5, hand: Hand::Right, camera: Camera::Left, wavelength: Wavelength::Nir850, sample: 2, frame: p };
            for claimed in [p % 5, 10, 11, 12] {
                for finger in Finger::EVALUATED {
                    out.push(ScoreRecord {
                        protocol: ProtocolId::P5,
                        split: Split::Dev,
                        probe: probe.clone(),
                        claimed_subject: claimed,
                        finger,
                        genuine: claimed == p % 5,
                        score: (p * 7 + claimed + finger as u32) as f64 / 100.0,
                    });
                }
            }
        }
        out
    }

    #[test]
    fn one_vector_per_probe_and_claim() {
        let f = fuse_fingers(&records(10));
        assert_eq!(f.vectors.len(), 40);
        assert_eq!(f.dropped, 0);
        assert_eq!(f.vectors.iter().filter(|v| v.genuine).count(), 10);
    }

    #[test]
    fn missing_ring_score_drops_group() {
        let mut r = records(10);
        let i = r.iter().position(|x| x.finger == Finger::Ring && x.probe.frame == 3 && x.genuine).unwrap();
        r.remove(i);
        let f = fuse_fingers(&r);
        assert_eq!(f.vectors.len(), 39);
        assert_eq!(f.dropped, 1);
    }

    #[test]
    fn input_order_is_irrelevant() {
        let r = records(6);
        let mut shuffled = r.clone();
        shuffled.reverse();
        shuffled.rotate_left(7);
        assert_eq!(fuse_fingers(&r), fuse_fingers(&shuffled));
    }
}
