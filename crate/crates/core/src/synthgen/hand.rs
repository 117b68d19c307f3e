use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Camera, Finger, Hand, Wavelength};
use crate::imgcore::{BinaryMask, BitDepth, ImageGray};

use super::{derive_seed, rng_for};

/// Vein centerline in canonical hand coordinates with a Gaussian
/// cross-section of width `sigma` and relative `depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vein {
    pub points: Vec<[f64; 2]>,
    pub sigma: f64,
    pub depth: f64,
}

/// Upright capsule from the palm line to the tip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerModel {
    pub finger: Finger,
    pub center_x: f64,
    pub half_width: f64,
    /// Palm line to tip, pixels.
    pub length: f64,
    pub veins: Vec<Vein>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandModel {
    pub hand: Hand,
    pub palm_top: f64,
    pub palm_left: f64,
    pub palm_right: f64,
    /// Index, middle, ring, little.
    pub fingers: Vec<FingerModel>,
}

impl HandModel {
    /// Row of the fingertip of `f` in canonical coordinates.
    pub fn tip_y(&self, f: Finger) -> f64 {
        self.palm_top - self.fingers[f.order_index()].length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectModel {
    pub id: u32,
    pub seed: u64,
    /// Left hand, right hand.
    pub hands: [HandModel; 2],
}

impl SubjectModel {
    pub fn hand(&self, hand: Hand) -> &HandModel {
        &self.hands[hand as usize]
    }
}

/// Image size, illumination and noise of rendered hands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderParams {
    pub width: usize,
    pub height: usize,
    pub background: f64,
    pub brightness_850: f64,
    pub brightness_950: f64,
    /// Fractional intensity drop at a vein centre of unit depth.
    pub contrast_850: f64,
    pub contrast_950: f64,
    /// Additive Gaussian noise, intensity units.
    pub noise_sigma: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            width: 320,
            height: 400,
            background: 40.0,
            brightness_850: 720.0,
            brightness_950: 560.0,
            contrast_850: 0.35,
            contrast_950: 0.22,
            noise_sigma: 4.0,
        }
    }
}

impl RenderParams {
    fn brightness(&self, wl: Wavelength) -> f64 {
        match wl {
            Wavelength::Nir950 => self.brightness_950,
            _ => self.brightness_850,
        }
    }

    fn contrast(&self, wl: Wavelength) -> f64 {
        match wl {
            Wavelength::Nir950 => self.contrast_950,
            _ => self.contrast_850,
        }
    }
}

/// Rigid in-plane placement: rotation about the image centre, then
/// translation, in pixels and degrees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub dx: f64,
    pub dy: f64,
    pub theta_deg: f64,
}

impl Pose {
    /// Apparent offset of the hand in each camera's view.
    pub fn for_camera(camera: Camera) -> Pose {
        match camera {
            Camera::Left => Pose::default(),
            Camera::Right => Pose { dx: -12.0, dy: 0.0, theta_deg: 0.5 },
            Camera::Rgb => Pose { dx: -6.0, dy: 4.0, theta_deg: 0.0 },
        }
    }

    pub fn then(&self, other: &Pose) -> Pose {
        Pose { dx: self.dx + other.dx, dy: self.dy + other.dy, theta_deg: self.theta_deg + other.theta_deg }
    }

    fn forward(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        let (u, v) = (x - cx, y - cy);
        (cx + c * u - s * v + self.dx, cy + s * u + c * v + self.dy)
    }

    fn inverse(&self, x: f64, y: f64, cx: f64, cy: f64) -> (f64, f64) {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        let (u, v) = (x - self.dx - cx, y - self.dy - cy);
        (cx + c * u + s * v, cy - s * u + c * v)
    }
}

/// Relative finger lengths; the pattern makes hand chirality recoverable.
const LENGTH_RATIO: [f64; 4] = [0.88, 1.0, 0.93, 0.72];
const HALF_WIDTH: [f64; 4] = [21.0, 22.0, 21.0, 18.0];

fn gen_finger_veins<R: Rng>(rng: &mut R, center_x: f64, r: f64, length: f64, palm_top: f64) -> Vec<Vein> {
    let lateral = Normal::new(0.0, 3.5).expect("valid");
    let step = 15.0;
    let t_end = length - r - 4.0;
    let n_nodes = (t_end / step).floor() as usize + 1;
    let limit = 0.7 * r;
    let to_hand = |u: f64, t: f64| [center_x + u, palm_top - t];
    let n_main = rng.gen_range(2..=3);
    let mut mains: Vec<Vec<f64>> = Vec::new();
    let mut veins = Vec::new();
    for _ in 0..n_main {
        let mut u = rng.gen_range(-0.6 * r..0.6 * r);
        let mut us = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            us.push(u);
            u = (u + lateral.sample(rng)).clamp(-limit, limit);
        }
        let t_stop = rng.gen_range(0.6..1.0) * t_end;
        let points: Vec<[f64; 2]> =
            us.iter().enumerate().take_while(|(k, _)| *k as f64 * step <= t_stop).map(|(k, &u)| to_hand(u, k as f64 * step)).collect();
        veins.push(Vein { points, sigma: rng.gen_range(1.6..2.4), depth: rng.gen_range(0.6..1.0) });
        mains.push(us);
    }
    let n_branch = rng.gen_range(2..=4);
    for _ in 0..n_branch {
        let a = rng.gen_range(0..mains.len());
        let i = rng.gen_range(0..n_nodes.saturating_sub(3).max(1));
        let j = (i + rng.gen_range(1..=3)).min(n_nodes - 1);
        let start = mains[a][i];
        let end = if mains.len() > 1 {
            let b = (a + rng.gen_range(1..mains.len())) % mains.len();
            mains[b][j]
        } else {
            -start.signum() * limit
        };
        let mid_t = (i + j) as f64 * step / 2.0;
        let mid_u = ((start + end) / 2.0 + lateral.sample(rng)).clamp(-limit, limit);
        veins.push(Vein {
            points: vec![to_hand(start, i as f64 * step), to_hand(mid_u, mid_t), to_hand(end, j as f64 * step)],
            sigma: rng.gen_range(1.4..2.0),
            depth: rng.gen_range(0.5..0.9),
        });
    }
    veins
}

fn gen_hand(seed: u64, hand: Hand, width: usize) -> HandModel {
    let mut rng = rng_for(&[seed, hand as u64]);
    let s = width as f64 / 320.0;
    let palm_top = 300.0 * s;
    let middle = 210.0 * s * rng.gen_range(0.95..1.05);
    let mut fingers = Vec::with_capacity(4);
    for f in Finger::ALL {
        let k = f.order_index();
        // image position: index leftmost for a right hand
        let slot = match hand {
            Hand::Right => k,
            Hand::Left => 3 - k,
        };
        let center_x = (70.0 + 60.0 * slot as f64) * s;
        let half_width = HALF_WIDTH[k] * s * rng.gen_range(0.96..1.04);
        let length = middle * LENGTH_RATIO[k] * rng.gen_range(0.98..1.02);
        let veins = gen_finger_veins(&mut rng, center_x, half_width, length, palm_top);
        fingers.push(FingerModel { finger: f, center_x, half_width, length, veins });
    }
    let xs = fingers.iter().map(|f| (f.center_x - f.half_width, f.center_x + f.half_width));
    let palm_left = xs.clone().map(|x| x.0).fold(f64::INFINITY, f64::min) - 6.0 * s;
    let palm_right = xs.map(|x| x.1).fold(f64::NEG_INFINITY, f64::max) + 6.0 * s;
    HandModel { hand, palm_top, palm_left, palm_right, fingers }
}

impl SubjectModel {
    pub fn generate(id: u32, seed: u64, params: &RenderParams) -> Self {
        SubjectModel { id, seed, hands: [gen_hand(seed, Hand::Left, params.width), gen_hand(seed, Hand::Right, params.width)] }
    }

    /// Pixels of either hand, side by side, where the canonical vein
    /// attenuation reaches half depth.
    pub fn vein_mask(&self, params: &RenderParams) -> BinaryMask {
        let (w, h) = (params.width, params.height);
        let att: Vec<Vec<f32>> = self.hands.iter().map(|hm| vein_attenuation(hm, w, h)).collect();
        BinaryMask::from_fn(2 * w, h, |x, y| att[x / w][y * w + x % w] >= 0.5)
    }
}

/// Subjects whose pairwise vein-mask IoU stays below this; candidates
/// violating it are regenerated from the next seed.
pub const MAX_VEIN_IOU: f64 = 0.7;

/// `n` subjects with ids `1..=n`.
pub fn generate_subjects(n: usize, seed: u64, params: &RenderParams) -> Vec<SubjectModel> {
    let mut out: Vec<SubjectModel> = Vec::with_capacity(n);
    let mut masks: Vec<BinaryMask> = Vec::with_capacity(n);
    for i in 0..n {
        for attempt in 0u64.. {
            let cand = SubjectModel::generate(i as u32 + 1, derive_seed(&[seed, i as u64, attempt]), params);
            let mask = cand.vein_mask(params);
            if masks.iter().all(|m| m.iou(&mask) < MAX_VEIN_IOU) {
                out.push(cand);
                masks.push(mask);
                break;
            }
        }
    }
    out
}

fn seg_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (ex, ey) = (p[0] - a[0] - t * dx, p[1] - a[1] - t * dy);
    ex * ex + ey * ey
}

/// Canonical-pose vein attenuation in `[0, 1]`, maximum over veins.
fn vein_attenuation(hm: &HandModel, w: usize, h: usize) -> Vec<f32> {
    let mut att = vec![0.0f32; w * h];
    for f in &hm.fingers {
        for v in &f.veins {
            let reach = 3.0 * v.sigma;
            for seg in v.points.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let x0 = (a[0].min(b[0]) - reach).floor().max(0.0) as usize;
                let x1 = ((a[0].max(b[0]) + reach).ceil().max(0.0) as usize).min(w.saturating_sub(1));
                let y0 = (a[1].min(b[1]) - reach).floor().max(0.0) as usize;
                let y1 = ((a[1].max(b[1]) + reach).ceil().max(0.0) as usize).min(h.saturating_sub(1));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if (x as f64 - f.center_x).abs() > f.half_width {
                            continue;
                        }
                        let d2 = seg_dist2([x as f64, y as f64], a, b);
                        let val = (v.depth * (-d2 / (2.0 * v.sigma * v.sigma)).exp()) as f32;
                        let slot = &mut att[y * w + x];
                        if val > *slot {
                            *slot = val;
                        }
                    }
                }
            }
        }
    }
    att
}

/// Ground truth of one rendered hand image.
#[derive(Debug, Clone, PartialEq)]
pub struct HandTruth {
    pub hand: Hand,
    /// Present fingers above the palm line, in finger order.
    pub finger_masks: Vec<(Finger, BinaryMask)>,
    /// Rasterized vein centerlines of present fingers.
    pub vein_mask: BinaryMask,
    pub fingers_present: u8,
}

/// Renders posed views of one hand, reusing its attenuation map.
pub struct HandRenderer<'a> {
    model: &'a HandModel,
    params: RenderParams,
    att: Vec<f32>,
}

impl<'a> HandRenderer<'a> {
    pub fn new(model: &'a HandModel, params: &RenderParams) -> Self {
        HandRenderer { model, params: *params, att: vein_attenuation(model, params.width, params.height) }
    }

    fn att_at(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.params.width, self.params.height);
        crate::imgcore::bilinear(w, h, x, y, |xi, yi| self.att[yi * w + xi] as f64).unwrap_or(0.0)
    }

    /// Lambertian-shaded hand under `pose`. `present[k]` removes finger `k`
    /// (finger order) when false; `gain` scales the illumination.
    pub fn render(&self, pose: &Pose, wavelength: Wavelength, present: [bool; 4], gain: f64, noise_seed: u64) -> (ImageGray, HandTruth) {
        let p = &self.params;
        let hm = self.model;
        let (w, h) = (p.width, p.height);
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let bright = p.brightness(wavelength) * gain;
        let contrast = p.contrast(wavelength);
        let mut rng = rng_for(&[noise_seed]);
        let noise = (p.noise_sigma > 0.0).then(|| Normal::new(0.0, p.noise_sigma).expect("valid sigma"));
        let full = BitDepth::Ten.max_value() as f64;

        let mut img = ImageGray::new(w, h, BitDepth::Ten);
        let mut fmasks: Vec<(Finger, BinaryMask)> =
            Finger::ALL.iter().filter(|f| present[f.order_index()]).map(|&f| (f, BinaryMask::new(w, h))).collect();
        for y in 0..h {
            for x in 0..w {
                let (hx, hy) = pose.inverse(x as f64, y as f64, cx, cy);
                // palm rectangle, open at the bottom
                let palm_sd = (hy - hm.palm_top).min(hx - hm.palm_left).min(hm.palm_right - hx);
                let mut cov = (0.5 + palm_sd).clamp(0.0, 1.0);
                let mut shade = 1.0;
                let mut finger_cov = 0.0f64;
                for (slot, f) in hm.fingers.iter().enumerate() {
                    if !present[slot] {
                        continue;
                    }
                    let r = f.half_width;
                    let tip_c = hm.palm_top - f.length + r;
                    let dist = if hy < tip_c { ((hx - f.center_x).powi(2) + (hy - tip_c).powi(2)).sqrt() } else { (hx - f.center_x).abs() };
                    let c = (0.5 + r - dist).clamp(0.0, 1.0);
                    if c > 0.0 && hy < hm.palm_top + 0.5 {
                        let u = ((hx - f.center_x) / r).clamp(-1.0, 1.0);
                        if c > finger_cov {
                            finger_cov = c;
                            shade = 0.6 + 0.4 * (1.0 - u * u).sqrt();
                        }
                        if c >= 0.5 && hy < hm.palm_top {
                            if let Some(m) = fmasks.iter_mut().find(|m| m.0 == f.finger) {
                                m.1.set(x, y, true);
                            }
                        }
                    }
                }
                if finger_cov > cov {
                    cov = finger_cov;
                } else {
                    shade = 1.0;
                }
                let att = if finger_cov > 0.0 { self.att_at(hx, hy) } else { 0.0 };
                let fg = bright * shade * (1.0 - contrast * att);
                let mut v = p.background + cov * (fg - p.background);
                if let Some(n) = &noise {
                    v += n.sample(&mut rng);
                }
                img.set(x, y, v.round().clamp(0.0, full) as u16);
            }
        }

        let mut vein_mask = BinaryMask::new(w, h);
        for (slot, f) in hm.fingers.iter().enumerate() {
            if !present[slot] {
                continue;
            }
            for v in &f.veins {
                for seg in v.points.windows(2) {
                    let (a, b) = (seg[0], seg[1]);
                    let n = (((b[0] - a[0]).hypot(b[1] - a[1])) * 4.0).ceil().max(1.0) as usize;
                    for k in 0..=n {
                        let t = k as f64 / n as f64;
                        let (px, py) = pose.forward(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), cx, cy);
                        let (rx, ry) = (px.round(), py.round());
                        if rx >= 0.0 && ry >= 0.0 && (rx as usize) < w && (ry as usize) < h {
                            vein_mask.set(rx as usize, ry as usize, true);
                        }
                    }
                }
            }
        }
        let fingers_present = present.iter().filter(|&&b| b).count() as u8;
        (img, HandTruth { hand: hm.hand, finger_masks: fmasks, vein_mask, fingers_present })
    }
}

/// One view of `hand` of `subject` as seen by `camera`.
pub fn render_hand(
    subject: &SubjectModel,
    hand: Hand,
    pose: &Pose,
    camera: Camera,
    wavelength: Wavelength,
    params: &RenderParams,
    noise_seed: u64,
) -> (ImageGray, HandTruth) {
    let r = HandRenderer::new(subject.hand(hand), params);
    r.render(&pose.then(&Pose::for_camera(camera)), wavelength, [true; 4], 1.0, noise_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fvr::{reorder_fingers, segment_fingers, SegmentParams};

    fn noiseless() -> RenderParams {
        RenderParams { noise_sigma: 0.0, ..Default::default() }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let p = RenderParams::default();
        let a = SubjectModel::generate(1, 42, &p);
        let b = SubjectModel::generate(1, 42, &p);
        assert_eq!(a, b);
        let pose = Pose { dx: 3.0, dy: -2.0, theta_deg: 1.5 };
        let (ia, _) = render_hand(&a, Hand::Left, &pose, Camera::Left, Wavelength::Nir850, &p, 9);
        let (ib, _) = render_hand(&b, Hand::Left, &pose, Camera::Left, Wavelength::Nir850, &p, 9);
        assert_eq!(ia, ib);
    }

    #[test]
    fn distinct_seeds_have_distinct_veins() {
        let p = RenderParams::default();
        let subjects = generate_subjects(6, 5, &p);
        let masks: Vec<BinaryMask> = subjects.iter().map(|s| s.vein_mask(&p)).collect();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert!(masks[i].iou(&masks[j]) < MAX_VEIN_IOU);
            }
        }
    }

    #[test]
    fn centerlines_are_intensity_valleys() {
        let p = noiseless();
        let s = SubjectModel::generate(1, 7, &p);
        let hm = s.hand(Hand::Right);
        let (img, truth) = HandRenderer::new(hm, &p).render(&Pose::default(), Wavelength::Nir850, [true; 4], 1.0, 0);
        // with the identity pose the centerlines rasterize in place
        let mut checked = 0;
        for f in &hm.fingers {
            let only: Vec<&Vein> = f.veins.iter().collect();
            for v in &only {
                for seg in v.points.windows(2) {
                    let (a, b) = (seg[0], seg[1]);
                    let (mx, my) = ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0);
                    let (px, py) = (mx.round() as usize, my.round() as usize);
                    assert!(truth.vein_mask.get(px, py));
                    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                    let (nx, ny) = (-(b[1] - a[1]) / len, (b[0] - a[0]) / len);
                    let isolated = f.veins.iter().filter(|o| !std::ptr::eq(*o, *v)).all(|o| {
                        o.points.windows(2).all(|s2| seg_dist2([mx, my], s2[0], s2[1]) > 64.0)
                    });
                    let inner = (mx - f.center_x).abs() + 5.0 < f.half_width;
                    if !isolated || !inner {
                        continue;
                    }
                    let at = |t: f64| img.sample_bilinear(mx + t * nx, my + t * ny).unwrap();
                    assert!(at(0.0) < at(3.0) && at(0.0) < at(-3.0));
                    checked += 1;
                }
            }
        }
        assert!(checked > 5, "{checked}");
    }

    #[test]
    fn rendered_hand_segments_into_labelled_fingers() {
        let p = RenderParams::default();
        let s = SubjectModel::generate(3, 11, &p);
        for hand in [Hand::Left, Hand::Right] {
            let pose = Pose { dx: 5.0, dy: -4.0, theta_deg: -3.0 };
            let (img, truth) = render_hand(&s, hand, &pose, Camera::Right, Wavelength::Nir950, &p, 1);
            let regions = reorder_fingers(segment_fingers(&img, &SegmentParams::default()).unwrap(), hand).unwrap();
            for (region, (f, mask)) in regions.iter().zip(&truth.finger_masks) {
                assert_eq!(region.finger, Some(*f));
                assert!(region.mask.iou(mask) > 0.8, "{hand} {f}: {}", region.mask.iou(mask));
            }
        }
    }

    #[test]
    fn missing_finger_leaves_three() {
        let p = RenderParams::default();
        let s = SubjectModel::generate(2, 3, &p);
        let (img, truth) = HandRenderer::new(s.hand(Hand::Left), &p).render(&Pose::default(), Wavelength::Nir850, [true, false, true, true], 1.0, 2);
        assert_eq!(truth.fingers_present, 3);
        assert_eq!(segment_fingers(&img, &SegmentParams::default()).unwrap().len(), 3);
    }

    #[test]
    fn nir950_contrast_is_lower() {
        let p = RenderParams::default();
        assert!(p.contrast_950 < p.contrast_850);
    }
}
