use handvein::imgcore::{BinaryMask, ImageGray};
use handvein::stereo::{aggregate_sgm, aggregated_wta, compute_disparity, matching_cost, raw_wta, DisparityMap, SgmParams};
use handvein::synthgen::{render_stereo, ScenePlane, StereoRender, StereoRenderParams, StereoScene, Texture};

fn slanted(width: usize, height: usize, texture: Texture, cell_mm: f64, noise_sigma: f64, seed: u64) -> StereoRender {
    let plane = ScenePlane { z0: 1000.0, a: 0.2, b: 0.1, x_range: None, y_range: None };
    let scene = StereoScene { planes: vec![plane], cell_mm, texture_seed: seed, texture };
    let params = StereoRenderParams { width, height, focal: 800.0, baseline: 40.0, noise_sigma, ..Default::default() };
    render_stereo(&scene, &params, seed)
}

/// Matchable pixels away from the census border.
fn evaluable(r: &StereoRender, border: usize) -> BinaryMask {
    let m = r.truth.matchable();
    let (w, h) = (m.width(), m.height());
    BinaryMask::from_fn(w, h, |x, y| m.get(x, y) && x >= border && y >= border && x + border < w && y + border < h)
}

fn wta_errors(wta: &[usize], r: &StereoRender, mask: &BinaryMask) -> (usize, usize) {
    let w = mask.width();
    let mut total = 0;
    let mut bad = 0;
    for y in 0..mask.height() {
        for x in 0..w {
            if mask.get(x, y) {
                total += 1;
                if (wta[y * w + x] as f64 - r.truth.disparity.get(x, y)).abs() > 1.0 {
                    bad += 1;
                }
            }
        }
    }
    (bad, total)
}

#[test]
fn random_dot_raw_cost_wta_is_mostly_correct() {
    // classic random-dot stereogram: one plane at constant disparity
    let scene = StereoScene { planes: vec![ScenePlane::fronto(1000.0)], cell_mm: 1.5, texture_seed: 1, texture: Texture::Dots };
    let p = StereoRenderParams { width: 160, height: 120, focal: 800.0, baseline: 40.0, ..Default::default() };
    let r = render_stereo(&scene, &p, 1);
    let params = SgmParams::default();
    let cost = matching_cost(&r.left, &r.right, &params).unwrap();
    let (bad, total) = wta_errors(&raw_wta(&cost), &r, &evaluable(&r, 2));
    let ok = 1.0 - bad as f64 / total as f64;
    assert!(ok >= 0.85, "raw WTA within 1 px: {ok:.3}");
}

#[test]
fn aggregation_reduces_slanted_plane_errors() {
    let r = slanted(160, 120, Texture::Smooth, 3.0, 6.0, 2);
    let params = SgmParams::default();
    let cost = matching_cost(&r.left, &r.right, &params).unwrap();
    let mask = evaluable(&r, 2);
    let (raw_bad, _) = wta_errors(&raw_wta(&cost), &r, &mask);
    let (agg_bad, _) = wta_errors(&aggregated_wta(&aggregate_sgm(&cost, &params)), &r, &mask);
    assert!(agg_bad <= raw_bad, "aggregated {agg_bad} raw {raw_bad}");
}

#[test]
fn occluded_strip_is_invalidated() {
    let near = ScenePlane::fronto(600.0).with_extent((-30.0, 30.0), (-1000.0, 1000.0));
    let scene = StereoScene { planes: vec![near, ScenePlane::fronto(1200.0)], cell_mm: 2.0, texture_seed: 5, texture: Texture::Dots };
    let p = StereoRenderParams { width: 200, height: 80, focal: 600.0, baseline: 40.0, ..Default::default() };
    let r = render_stereo(&scene, &p, 5);
    let map = compute_disparity(&r.left, &r.right, &SgmParams::default()).unwrap();
    let occ = &r.truth.occluded;
    assert!(occ.count() > 200, "{}", occ.count());
    let invalid = (0..occ.width() * occ.height()).filter(|&i| occ.bits()[i] && !map.valid.bits()[i]).count();
    let frac = invalid as f64 / occ.count() as f64;
    assert!(frac >= 0.9, "occluded pixels invalidated: {frac:.3}");
}

fn crop(img: &ImageGray, x0: usize, y0: usize, w: usize, h: usize) -> ImageGray {
    ImageGray::from_fn(w, h, img.bit_depth(), |x, y| img.get(x0 + x, y0 + y))
}

#[test]
fn shifting_both_views_shifts_the_disparity_map() {
    let r = slanted(300, 160, Texture::Dots, 1.5, 0.0, 3);
    let (w, h) = (260, 120);
    let params = SgmParams::default();
    let base = compute_disparity(&crop(&r.left, 20, 20, w, h), &crop(&r.right, 20, 20, w, h), &params).unwrap();
    for (sx, sy) in [(3usize, 0usize), (0, 5), (7, 2)] {
        let moved = compute_disparity(&crop(&r.left, 20 + sx, 20 + sy, w, h), &crop(&r.right, 20 + sx, 20 + sy, w, h), &params).unwrap();
        // beyond the search range from the left edge, where out-of-range
        // costs depend on the absolute column
        let (mx, my) = (params.d_max + 8, 16);
        let (mut both, mut equal) = (0, 0);
        for y in my..h - my {
            for x in mx..w - 16 {
                let (a, b) = (base.get(x + sx, y + sy), moved.get(x, y));
                if let (Some(a), Some(b)) = (a, b) {
                    both += 1;
                    if a.to_bits() == b.to_bits() {
                        equal += 1;
                    }
                }
            }
        }
        // paths start at the image border, so a crop changes their history;
        // the influence fades within the margin but is not provably zero
        assert!(both > 10_000);
        assert!(both - equal <= both / 1000, "shift ({sx},{sy}): {equal}/{both} bitwise equal");
        if sy == 0 {
            assert_eq!(equal, both, "horizontal shift ({sx},0)");
        }
    }
}

#[test]
fn larger_p2_never_roughens_the_slanted_plane() {
    let base = SgmParams::default();
    for (texture, cell, noise, seed) in [(Texture::Dots, 1.5, 0.0, 4), (Texture::Smooth, 2.5, 2.0, 5), (Texture::Smooth, 4.0, 0.0, 6)] {
        let r = slanted(160, 120, texture, cell, noise, seed);
        let mut last = f64::INFINITY;
        // up to the default P2 = 4·P1; beyond it smoothing saturates
        for p2 in [base.p1 + 1, 2 * base.p1, 3 * base.p1, 4 * base.p1] {
            let tv = compute_disparity(&r.left, &r.right, &SgmParams { p2, ..base }).unwrap().total_variation();
            assert!(tv <= last, "{texture:?} seed {seed} P2 {p2}: TV {tv} > {last}");
            last = tv;
        }
    }
}

fn with_threads(n: usize, r: &StereoRender) -> DisparityMap {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    pool.install(|| compute_disparity(&r.left, &r.right, &SgmParams::default()).unwrap())
}

#[test]
fn disparity_is_independent_of_thread_count() {
    let r = slanted(128, 96, Texture::Dots, 1.5, 2.0, 6);
    let one = with_threads(1, &r);
    for n in [2, 3, 8] {
        assert!(one.bitwise_eq(&with_threads(n, &r)), "{n} threads");
    }
}
