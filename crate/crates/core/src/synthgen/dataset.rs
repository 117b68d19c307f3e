use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Camera, ChannelLabel, Hand, Wavelength};
use crate::error::{Error, Result};
use crate::evalharness::{Manifest, ManifestEntry};
use crate::fvr::TemplateSource;
use crate::imgcore::io::save_image_tagged;
use crate::imgcore::ImageGray;

use super::hand::{generate_subjects, HandRenderer, HandTruth, Pose, RenderParams, SubjectModel};
use super::{derive_seed, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetParams {
    pub n_subjects: usize,
    pub samples_per_hand: u32,
    /// Probability that a sample is captured with one finger missing.
    pub exclusion_rate: f64,
    pub seed: u64,
    pub frames_per_wavelength: u32,
    /// Bound of the per-sample hand offset, pixels.
    pub max_shift: f64,
    /// Bound of the per-sample hand rotation, degrees.
    pub max_rotation_deg: f64,
    /// Bound of the per-frame offset within a sample, pixels.
    pub frame_jitter: f64,
    pub render: RenderParams,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            n_subjects: 10,
            samples_per_hand: 5,
            exclusion_rate: 0.0,
            seed: 0,
            frames_per_wavelength: 3,
            max_shift: 8.0,
            max_rotation_deg: 4.0,
            frame_jitter: 1.0,
            render: RenderParams::default(),
        }
    }
}

impl DatasetParams {
    /// Frames per sample across both cameras and both NIR wavelengths.
    pub fn frames_per_sample(&self) -> usize {
        2 * 2 * self.frames_per_wavelength as usize
    }

    pub fn total_frames(&self) -> usize {
        self.n_subjects * 2 * self.samples_per_hand as usize * self.frames_per_sample()
    }
}

/// `sXXXX/{LH,RH}/nN/{camera}_{wavelength}_fK.png`.
pub fn image_relpath(s: &TemplateSource) -> String {
    format!("s{:04}/{}/n{}/{}_{}_f{}.png", s.subject, s.hand, s.sample, s.camera, s.wavelength, s.frame)
}

/// Placement of one sample and the finger it lacks, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SampleSetup {
    pose: Pose,
    gain: f64,
    missing: Option<usize>,
}

/// Subjects, per-sample capture conditions and the manifest of a dataset;
/// images are rendered on demand.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub params: DatasetParams,
    pub subjects: Vec<SubjectModel>,
    pub manifest: Manifest,
    samples: BTreeMap<(u32, Hand, u32), SampleSetup>,
}

impl SyntheticDataset {
    pub fn new(params: &DatasetParams) -> Result<Self> {
        if params.n_subjects == 0 || params.samples_per_hand == 0 || params.frames_per_wavelength == 0 {
            return Err(Error::InvalidParam("dataset needs subjects, samples and frames".into()));
        }
        if !(0.0..=1.0).contains(&params.exclusion_rate) {
            return Err(Error::InvalidParam(format!("exclusion_rate {} outside [0, 1]", params.exclusion_rate)));
        }
        let subjects = generate_subjects(params.n_subjects, params.seed, &params.render);
        let mut samples = BTreeMap::new();
        let mut entries = Vec::with_capacity(params.total_frames());
        for s in &subjects {
            for hand in [Hand::Left, Hand::Right] {
                for sample in 1..=params.samples_per_hand {
                    let mut rng = rng_for(&[params.seed, 0x5A3, s.id as u64, hand as u64, sample as u64]);
                    let pose = Pose {
                        dx: rng.gen_range(-params.max_shift..=params.max_shift),
                        dy: rng.gen_range(-params.max_shift..=params.max_shift),
                        theta_deg: rng.gen_range(-params.max_rotation_deg..=params.max_rotation_deg),
                    };
                    let gain = rng.gen_range(0.9..=1.1);
                    let missing = (rng.gen::<f64>() < params.exclusion_rate).then(|| rng.gen_range(0..4));
                    samples.insert((s.id, hand, sample), SampleSetup { pose, gain, missing });
                    for camera in [Camera::Left, Camera::Right] {
                        for wavelength in [Wavelength::Nir850, Wavelength::Nir950] {
                            for frame in 0..params.frames_per_wavelength {
                                let source = TemplateSource { subject: s.id, hand, camera, wavelength, sample, frame };
                                entries.push(ManifestEntry {
                                    path: image_relpath(&source),
                                    source,
                                    excluded: false,
                                    fingers_present: Some(if missing.is_some() { 3 } else { 4 }),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(SyntheticDataset { params: *params, subjects, manifest: Manifest { seed: Some(params.seed), config_hash: None, entries }, samples })
    }

    fn subject(&self, id: u32) -> Result<&SubjectModel> {
        self.subjects.iter().find(|s| s.id == id).ok_or_else(|| Error::InvalidParam(format!("unknown subject {id}")))
    }

    /// Samples rendered with a finger missing.
    pub fn incomplete_samples(&self) -> Vec<(u32, Hand, u32)> {
        self.samples.iter().filter(|(_, v)| v.missing.is_some()).map(|(k, _)| *k).collect()
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Full pose of one frame: sample placement, frame jitter, camera offset.
    pub fn frame_pose(&self, source: &TemplateSource) -> Result<Pose> {
        let setup = self.setup(source)?;
        let j = self.params.frame_jitter;
        let mut rng = rng_for(&[self.params.seed, 0x7E7, source.subject as u64, source.hand as u64, source.sample as u64, source.wavelength as u64, source.frame as u64]);
        let jitter = Pose { dx: rng.gen_range(-j..=j), dy: rng.gen_range(-j..=j), theta_deg: 0.0 };
        Ok(setup.pose.then(&jitter).then(&Pose::for_camera(source.camera)))
    }

    fn setup(&self, source: &TemplateSource) -> Result<&SampleSetup> {
        self.samples
            .get(&(source.subject, source.hand, source.sample))
            .ok_or_else(|| Error::InvalidParam(format!("no sample for {source:?}")))
    }

    pub fn render(&self, source: &TemplateSource) -> Result<(ImageGray, HandTruth)> {
        let subject = self.subject(source.subject)?;
        let setup = self.setup(source)?;
        let pose = self.frame_pose(source)?;
        let mut present = [true; 4];
        if let Some(k) = setup.missing {
            present[k] = false;
        }
        let renderer = HandRenderer::new(subject.hand(source.hand), &self.params.render);
        let noise_seed = derive_seed(&[
            self.params.seed,
            0x401,
            source.subject as u64,
            source.hand as u64,
            source.camera as u64,
            source.wavelength as u64,
            source.sample as u64,
            source.frame as u64,
        ]);
        Ok(renderer.render(&pose, source.wavelength, present, setup.gain, noise_seed))
    }

    /// Writes every image with its channel sidecar, then `manifest.json`.
    pub fn write(&self, root: &Path) -> Result<()> {
        self.write_tagged(root, None)
    }

    /// [`Self::write`] recording `config_hash` in every sidecar and the
    /// manifest.
    pub fn write_tagged(&self, root: &Path, config_hash: Option<&str>) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        self.manifest.entries.par_iter().try_for_each(|e| {
            let (img, _) = self.render(&e.source)?;
            let path = Manifest::image_path(root, e);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
            }
            let label = ChannelLabel { camera: e.source.camera, wavelength: e.source.wavelength, bank: 0 };
            save_image_tagged(&img, &path, Some(label), config_hash)
        })?;
        let manifest = Manifest { config_hash: config_hash.map(str::to_owned), ..self.manifest.clone() };
        manifest.save(&root.join("manifest.json"))
    }
}

/// Generates and writes a dataset under `root`.
pub fn gen_dataset(params: &DatasetParams, root: &Path) -> Result<SyntheticDataset> {
    let ds = SyntheticDataset::new(params)?;
    ds.write(root)?;
    Ok(ds)
}
