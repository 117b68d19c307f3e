use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Camera, Finger, Wavelength};
use crate::error::{Error, Result};
use crate::fvr::{build_template, Enhancer, FingerTemplate, FvrConfig, MatchParams, TemplateOutcome, TemplateSource};
use crate::geometry::CameraIntrinsics;
use crate::imgcore::{BinaryMask, ImageGray};

use super::fusion::fuse_fingers;
use super::manifest::{Manifest, ManifestEntry};
use super::protocol::{build_protocol, run_comparisons, ProtocolSets, ScoreRecord};
use super::report::{evaluate_fusion, evaluate_scores, ProtocolReport};
use super::svm::{SvmModel, SvmParams};
use super::{ProtocolId, ProtocolSpec, Split};

/// Evaluated-finger templates per frame.
#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    map: HashMap<TemplateSource, Vec<FingerTemplate>>,
}

impl TemplateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: TemplateSource, templates: Vec<FingerTemplate>) {
        self.map.insert(source, templates);
    }

    pub fn get(&self, source: &TemplateSource, finger: Finger) -> Result<&BinaryMask> {
        self.map
            .get(source)
            .and_then(|ts| ts.iter().find(|t| t.finger == finger))
            .map(|t| &t.mc_map)
            .ok_or_else(|| Error::MissingTemplate(format!("{source:?} {finger}")))
    }

    pub fn templates(&self, source: &TemplateSource) -> Option<&[FingerTemplate]> {
        self.map.get(source).map(Vec::as_slice)
    }

    /// Stored frames in ascending source order.
    pub fn iter(&self) -> impl Iterator<Item = (&TemplateSource, &[FingerTemplate])> {
        let mut v: Vec<_> = self.map.iter().map(|(k, t)| (k, t.as_slice())).collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v.into_iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Builds templates for every NIR frame of the stereo cameras in parallel.
/// Returns the store and a copy of the manifest whose `excluded` flags
/// record frames without exactly four fingers.
pub fn extract_templates<L>(
    manifest: &Manifest,
    load: L,
    intrinsics: Option<&CameraIntrinsics<f64>>,
    enhancer: &dyn Enhancer,
    config: &FvrConfig,
    config_hash: &str,
) -> Result<(TemplateStore, Manifest)>
where
    L: Fn(&ManifestEntry) -> Result<ImageGray> + Sync,
{
    let relevant = |e: &ManifestEntry| {
        matches!(e.source.camera, Camera::Left | Camera::Right) && matches!(e.source.wavelength, Wavelength::Nir850 | Wavelength::Nir950)
    };
    let outcomes: Vec<Option<TemplateOutcome>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            if !relevant(e) {
                return Ok(None);
            }
            let img = load(e)?;
            build_template(&img, &e.source, intrinsics, enhancer, config, config_hash).map(Some)
        })
        .collect::<Result<_>>()?;
    let mut store = TemplateStore::new();
    let mut out = manifest.clone();
    for (entry, outcome) in out.entries.iter_mut().zip(outcomes) {
        match outcome {
            Some(TemplateOutcome::Templates(t)) => {
                entry.excluded = false;
                store.insert(entry.source.clone(), t);
            }
            Some(TemplateOutcome::Excluded { .. }) => entry.excluded = true,
            None => {}
        }
    }
    Ok((store, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub dev_subjects: usize,
    pub zei_per_probe: usize,
    pub seed: u64,
    /// Fraction, not percent.
    pub target_fmr: f64,
    pub protocols: Vec<ProtocolId>,
    pub svm: SvmParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { dev_subjects: 60, zei_per_probe: 3, seed: 0, target_fmr: 0.001, protocols: ProtocolId::ALL.to_vec(), svm: SvmParams::default() }
    }
}

impl EvalConfig {
    pub fn spec(&self, id: ProtocolId) -> ProtocolSpec {
        ProtocolSpec { id, dev_subjects: self.dev_subjects, zei_per_probe: self.zei_per_probe, seed: self.seed }
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationOutput {
    pub sets: Vec<ProtocolSets>,
    /// All finger scores, protocol by protocol, Dev before Eval.
    pub records: Vec<ScoreRecord>,
    /// Per protocol: pooled fingers (`all`) followed by each finger.
    pub single: Vec<ProtocolReport>,
    pub fusion: Vec<ProtocolReport>,
    pub models: Vec<(ProtocolId, SvmModel<f64>)>,
    pub fusion_dropped: usize,
}

impl EvaluationOutput {
    /// Lowest single-finger Eval HTER of `protocol`.
    pub fn best_single_eval_hter(&self, protocol: ProtocolId) -> Option<f64> {
        self.single
            .iter()
            .filter(|r| r.protocol == protocol && r.scope != "all")
            .map(|r| r.eval.hter)
            .min_by(f64::total_cmp)
    }
}

fn pairs<'a>(records: impl Iterator<Item = &'a ScoreRecord>) -> Vec<(f64, bool)> {
    records.map(|r| (r.score, r.genuine)).collect()
}

/// Runs each configured protocol: comparisons, Dev-tuned thresholds for
/// pooled and per-finger scores, and SVM fusion of the three fingers.
pub fn evaluate_protocols(manifest: &Manifest, store: &TemplateStore, config: &EvalConfig, params: &MatchParams) -> Result<EvaluationOutput> {
    let mut out =
        EvaluationOutput { sets: Vec::new(), records: Vec::new(), single: Vec::new(), fusion: Vec::new(), models: Vec::new(), fusion_dropped: 0 };
    for &id in &config.protocols {
        let spec = config.spec(id);
        let [dev_sets, eval_sets] = build_protocol(manifest, &spec)?;
        let dev = run_comparisons(&dev_sets, store, params, &spec)?;
        let eval = run_comparisons(&eval_sets, store, params, &spec)?;

        out.single.push(evaluate_scores(id, "all", &pairs(dev.iter()), &pairs(eval.iter()), config.target_fmr)?);
        for finger in Finger::EVALUATED {
            let d = pairs(dev.iter().filter(|r| r.finger == finger));
            let e = pairs(eval.iter().filter(|r| r.finger == finger));
            out.single.push(evaluate_scores(id, &finger.to_string(), &d, &e, config.target_fmr)?);
        }

        let fd = fuse_fingers(&dev);
        let fe = fuse_fingers(&eval);
        out.fusion_dropped += fd.dropped + fe.dropped;
        let (model, report) = evaluate_fusion(id, &fd.vectors, &fe.vectors, &config.svm, config.target_fmr)?;
        out.fusion.push(report);
        out.models.push((id, model));

        debug_assert!(dev.iter().all(|r| r.split == Split::Dev));
        out.records.extend(dev);
        out.records.extend(eval);
        out.sets.push(dev_sets);
        out.sets.push(eval_sets);
    }
    Ok(out)
}
