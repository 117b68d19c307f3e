use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Finger;
use crate::error::{Error, Result};
use crate::fvr::{miura_match, MatchParams, TemplateSource};

use super::manifest::Manifest;
use super::pipeline::TemplateStore;
use super::{ProtocolId, ProtocolSpec, Split};

/// Sample number whose first usable frame is enrolled.
pub const ENROLLMENT_SAMPLE: u32 = 1;

/// Enrollment and probe frames of one protocol within one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSets {
    pub protocol: ProtocolId,
    pub split: Split,
    /// Enrolled frame per subject, ascending subject id. Each of its
    /// evaluated fingers is a distinct identity.
    pub enroll: BTreeMap<u32, TemplateSource>,
    /// Probe frames in ascending order.
    pub probes: Vec<TemplateSource>,
    /// Subjects with frames in this protocol but no usable enrollment frame.
    pub dropped_subjects: Vec<u32>,
}

impl ProtocolSets {
    pub fn enrolled_identities(&self) -> usize {
        self.enroll.len() * Finger::EVALUATED.len()
    }
}

/// Splits the manifest by subject id and selects enrollment and probe
/// frames. Excluded frames are ignored; a subject without a usable frame in
/// the enrollment sample is dropped from both sets.
pub fn build_protocol(manifest: &Manifest, spec: &ProtocolSpec) -> Result<[ProtocolSets; 2]> {
    let subjects = manifest.subjects();
    let dev: Vec<u32> = subjects.iter().copied().take(spec.dev_subjects).collect();
    let id = spec.id;
    let mut per_subject: BTreeMap<u32, Vec<TemplateSource>> = BTreeMap::new();
    for e in &manifest.entries {
        let s = &e.source;
        if s.hand == id.hand() && s.camera == id.camera() && s.wavelength == id.wavelength() {
            let frames = per_subject.entry(s.subject).or_default();
            if !e.excluded {
                frames.push(s.clone());
            }
        }
    }
    let mut out = [Split::Dev, Split::Eval].map(|split| ProtocolSets {
        protocol: id,
        split,
        enroll: BTreeMap::new(),
        probes: Vec::new(),
        dropped_subjects: Vec::new(),
    });
    for (subject, mut frames) in per_subject {
        frames.sort();
        let sets = &mut out[if dev.binary_search(&subject).is_ok() { 0 } else { 1 }];
        match frames.iter().find(|s| s.sample == ENROLLMENT_SAMPLE) {
            Some(e) => {
                sets.enroll.insert(subject, e.clone());
                sets.probes.extend(frames.iter().filter(|s| s.sample != ENROLLMENT_SAMPLE).cloned());
            }
            None => {
                log::warn!("{}: subject {subject} has no usable enrollment frame, dropped", id.name());
                sets.dropped_subjects.push(subject);
            }
        }
    }
    for sets in &mut out {
        sets.probes.sort();
    }
    Ok(out)
}

/// A scheduled probe frame versus a claimed enrolled subject.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub probe: TemplateSource,
    pub claimed_subject: u32,
    pub genuine: bool,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn probe_seed(seed: u64, protocol: ProtocolId, split: Split, p: &TemplateSource) -> u64 {
    let fields = [
        protocol as u64,
        split as u64,
        p.subject as u64,
        p.hand as u64,
        p.camera as u64,
        p.wavelength as u64,
        p.sample as u64,
        p.frame as u64,
    ];
    fields.iter().fold(splitmix(seed), |h, &f| splitmix(h ^ f))
}

/// One genuine claim plus `zei_per_probe` impostor claims per probe frame.
/// Impostor subjects are drawn without replacement from the other enrolled
/// subjects of the split, from a generator seeded per probe.
pub fn schedule_comparisons(sets: &ProtocolSets, spec: &ProtocolSpec) -> Result<Vec<Comparison>> {
    let subjects: Vec<u32> = sets.enroll.keys().copied().collect();
    let mut out = Vec::with_capacity(sets.probes.len() * (1 + spec.zei_per_probe));
    for probe in &sets.probes {
        if !sets.enroll.contains_key(&probe.subject) {
            continue;
        }
        let candidates: Vec<u32> = subjects.iter().copied().filter(|&s| s != probe.subject).collect();
        if candidates.len() < spec.zei_per_probe {
            return Err(Error::TooFewImpostors { needed: spec.zei_per_probe, available: candidates.len() });
        }
        out.push(Comparison { probe: probe.clone(), claimed_subject: probe.subject, genuine: true });
        let mut rng = ChaCha8Rng::seed_from_u64(probe_seed(spec.seed, sets.protocol, sets.split, probe));
        let mut picked: Vec<u32> = sample(&mut rng, candidates.len(), spec.zei_per_probe).iter().map(|i| candidates[i]).collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|s| Comparison { probe: probe.clone(), claimed_subject: s, genuine: false }));
    }
    Ok(out)
}

/// One finger comparison outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub protocol: ProtocolId,
    pub split: Split,
    pub probe: TemplateSource,
    pub claimed_subject: u32,
    pub finger: Finger,
    pub genuine: bool,
    pub score: f64,
}

impl ScoreRecord {
    pub fn probe_id(&self) -> String {
        let p = &self.probe;
        format!("s{:04}_{}_{}_{}_n{}_f{}", p.subject, p.hand, p.camera, p.wavelength, p.sample, p.frame)
    }

    /// Enrolled identity: subject, hand and finger.
    pub fn enrolled_id(&self) -> String {
        format!("s{:04}_{}_{}", self.claimed_subject, self.probe.hand, self.finger)
    }
}

/// Scores every scheduled comparison for each evaluated finger. Output
/// order follows the schedule, then finger order.
pub fn run_comparisons(sets: &ProtocolSets, store: &TemplateStore, params: &MatchParams, spec: &ProtocolSpec) -> Result<Vec<ScoreRecord>> {
    let schedule = schedule_comparisons(sets, spec)?;
    let per_cmp: Vec<Vec<ScoreRecord>> = schedule
        .par_iter()
        .map(|c| {
            let enrolled = &sets.enroll[&c.claimed_subject];
            Finger::EVALUATED
                .iter()
                .map(|&finger| {
                    let a = store.get(&c.probe, finger)?;
                    let b = store.get(enrolled, finger)?;
                    Ok(ScoreRecord {
                        protocol: sets.protocol,
                        split: sets.split,
                        probe: c.probe.clone(),
                        claimed_subject: c.claimed_subject,
                        finger,
                        genuine: c.genuine,
                        score: miura_match(a, b, params).score,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_cmp.into_iter().flatten().collect())
}
