use serde::{Deserialize, Serialize};

use crate::domain::{Finger, Hand};
use crate::error::{Error, Result};
use crate::imgcore::{morph_open, otsu_threshold, BinaryMask, ImageGray};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    /// Accepted row widths as fractions of the image width.
    pub w_min: f64,
    pub w_max: f64,
    pub open_radius: usize,
    /// Regions with fewer accepted rows are discarded as noise.
    pub min_rows: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { w_min: 0.05, w_max: 0.35, open_radius: 2, min_rows: 10 }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_min > 0.0 && self.w_min < self.w_max && self.w_max <= 1.0) {
            return Err(Error::InvalidParam("segment widths must satisfy 0 < w_min < w_max ≤ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerRegion {
    pub mask: BinaryMask,
    /// `(x0, y0, x1, y1)`, upper bounds exclusive.
    pub bbox: (usize, usize, usize, usize),
    pub centroid: (f64, f64),
    /// Row of the fingertip where the scan started.
    pub tip_row: usize,
    pub finger: Option<Finger>,
}

/// The maximal foreground run in row `y` that contains column `x`.
fn run_at(fg: &BinaryMask, x: usize, y: usize) -> Option<(usize, usize)> {
    if !fg.get(x, y) {
        return None;
    }
    let mut l = x;
    while l > 0 && fg.get(l - 1, y) {
        l -= 1;
    }
    let mut r = x;
    while r + 1 < fg.width() && fg.get(r + 1, y) {
        r += 1;
    }
    Some((l, r))
}

/// Run in row `y` continuing the run `[l, r]` of the previous row: the one
/// containing its centre, else the widest one overlapping it.
fn next_run(fg: &BinaryMask, y: usize, l: usize, r: usize) -> Option<(usize, usize)> {
    if let Some(run) = run_at(fg, (l + r) / 2, y) {
        return Some(run);
    }
    let mut best: Option<(usize, usize)> = None;
    let mut x = l;
    while x <= r {
        if let Some((a, b)) = run_at(fg, x, y) {
            if best.map_or(true, |(p, q)| b - a > q - p) {
                best = Some((a, b));
            }
            x = b + 1;
        } else {
            x += 1;
        }
    }
    best
}

/// Fingertip-down row scan over the opened Otsu foreground, tallest finger
/// first, at most four regions.
pub fn segment_fingers(img: &ImageGray, params: &SegmentParams) -> Result<Vec<FingerRegion>> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    let mut fg = match otsu_threshold(img) {
        Ok((_, m)) => morph_open(&m, params.open_radius),
        Err(Error::DegenerateHistogram) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let w_min = (params.w_min * w as f64).ceil() as usize;
    let w_max = (params.w_max * w as f64).floor() as usize;
    let mut regions = Vec::new();

    while regions.len() < 4 {
        let Some(tip) = fg.bits().iter().position(|&b| b) else { break };
        let (tx, ty) = (tip % w, tip / w);
        let (mut l, mut r) = run_at(&fg, tx, ty).expect("tip is foreground");
        if r - l + 1 > w_max {
            // the tallest remaining structure is the palm
            break;
        }
        let mut mask = BinaryMask::new(w, h);
        let mut rows = 0;
        let mut y = ty;
        loop {
            for x in l..=r {
                fg.set(x, y, false);
                if r - l + 1 >= w_min {
                    mask.set(x, y, true);
                }
            }
            if r - l + 1 >= w_min {
                rows += 1;
            }
            y += 1;
            if y >= h {
                break;
            }
            match next_run(&fg, y, l, r) {
                Some((a, b)) if b - a < w_max => (l, r) = (a, b),
                _ => break,
            }
        }
        if rows < params.min_rows {
            continue;
        }
        let bbox = mask.bbox().expect("non-empty");
        let centroid = mask.centroid().expect("non-empty");
        regions.push(FingerRegion { mask, bbox, centroid, tip_row: ty, finger: None });
    }
    Ok(regions)
}

/// Sorts four regions by centroid x and labels them. For a right hand the
/// leftmost region in the image is the index finger, for a left hand it is
/// the little finger.
pub fn reorder_fingers(mut regions: Vec<FingerRegion>, hand: Hand) -> Result<Vec<FingerRegion>> {
    if regions.len() != 4 {
        return Err(Error::SampleExcluded(regions.len()));
    }
    regions.sort_by(|a, b| a.centroid.0.total_cmp(&b.centroid.0));
    for (i, r) in regions.iter_mut().enumerate() {
        let k = match hand {
            Hand::Right => i,
            Hand::Left => 3 - i,
        };
        r.finger = Finger::from_order_index(k);
    }
    regions.sort_by_key(|r| r.finger.map(|f| f.order_index()));
    Ok(regions)
}
