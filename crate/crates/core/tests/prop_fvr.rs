use handvein::domain::{Camera, Finger, Hand, Wavelength};
use handvein::fvr::{build_template, extract_mc, miura_match, overlap_counts, FvrConfig, Identity, MatchParams, McParams, TemplateOutcome, TemplateSource};
use handvein::imgcore::{BinaryMask, BitDepth, ImageGray};
use handvein::synthgen::{HandRenderer, Pose, RenderParams, SubjectModel};
use proptest::prelude::*;

/// Direct evaluation of `Σ_p A(p)·B(p + (s, t))` over the window.
fn brute_counts(a: &BinaryMask, b: &BinaryMask, cw: usize, ch: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity((2 * cw + 1) * (2 * ch + 1));
    for t in -(ch as isize)..=ch as isize {
        for s in -(cw as isize)..=cw as isize {
            let mut c = 0;
            for y in 0..a.height() {
                for x in 0..a.width() {
                    if a.get(x, y) && b.get_signed(x as isize + s, y as isize + t) {
                        c += 1;
                    }
                }
            }
            out.push(c);
        }
    }
    out
}

/// Best Dice score by scanning the brute-force counts.
fn brute_score(a: &BinaryMask, b: &BinaryMask, cw: usize, ch: usize) -> f64 {
    let best = brute_counts(a, b, cw, ch).into_iter().max().unwrap_or(0);
    2.0 * best as f64 / (a.count() + b.count()) as f64
}

/// Same-size pair with independent densities, up to 64×64.
fn pair_strategy() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1usize..=64, 1usize..=64, 0.0f64..0.6, 0.0f64..0.6, any::<u64>()).prop_map(|(w, h, pa, pb, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(pa));
        let b = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(pb));
        (a, b)
    })
}

fn nonempty_mask() -> impl Strategy<Value = BinaryMask> {
    pair_strategy().prop_map(|(a, _)| a).prop_filter("nonempty", |m| !m.is_empty())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn frequency_counts_equal_spatial_counts((a, b) in pair_strategy(), cw in 0usize..40, ch in 0usize..40) {
        prop_assert_eq!(overlap_counts(&a, &b, cw, ch), brute_counts(&a, &b, cw, ch));
    }

    #[test]
    fn match_score_equals_brute_force((a, b) in pair_strategy(), cw in 0usize..20, ch in 0usize..20) {
        prop_assume!(a.count() + b.count() > 0);
        let r = miura_match(&a, &b, &MatchParams { cw, ch });
        prop_assert_eq!(r.score, brute_score(&a, &b, cw, ch));
    }

    #[test]
    fn match_is_symmetric((a, b) in pair_strategy(), cw in 0usize..20, ch in 0usize..20) {
        let p = MatchParams { cw, ch };
        prop_assert_eq!(miura_match(&a, &b, &p).score, miura_match(&b, &a, &p).score);
    }

    #[test]
    fn self_score_is_one(a in nonempty_mask(), cw in 0usize..20, ch in 0usize..20) {
        prop_assert_eq!(miura_match(&a, &a, &MatchParams { cw, ch }).score, 1.0);
    }

    #[test]
    fn shifted_copy_scores_one(seed in any::<u64>(), density in 0.05f64..0.5, s in -15isize..=15, t in -15isize..=15) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // content kept clear of the border so the shift loses nothing
        let a = BinaryMask::from_fn(64, 64, |x, y| (16..48).contains(&x) && (16..48).contains(&y) && rng.gen_bool(density));
        prop_assume!(!a.is_empty());
        let b = a.translated(s, t);
        let r = miura_match(&a, &b, &MatchParams { cw: 15, ch: 15 });
        prop_assert_eq!(r.score, 1.0);
        prop_assert_eq!(r.shift, (s, t));
    }

    #[test]
    fn mc_commutes_with_quarter_turns(w in 24usize..48, h in 24usize..48, seed in any::<u64>(), sigma in 1.0f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = ImageGray::from_fn(w, h, BitDepth::Ten, |_, _| rng.gen_range(100..1000));
        let (x0, y0) = (rng.gen_range(0..6), rng.gen_range(0..6));
        let mask = BinaryMask::from_fn(w, h, |x, y| x >= x0 && y >= y0 && x + 3 < w);
        let p = McParams { sigma, ..McParams::default() };
        let rotated = extract_mc(&img.rotate90(), &mask.rotate90(), &p).unwrap();
        prop_assert_eq!(extract_mc(&img, &mask, &p).unwrap().rotate90(), rotated);
    }
}

#[test]
fn at_least_two_hundred_oracle_maps() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let (pa, pb) = (rng.gen_range(0.0..0.5), rng.gen_range(0.0..0.5));
        let a = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(pa));
        let b = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(pb));
        let (cw, ch) = (rng.gen_range(0..=32), rng.gen_range(0..=32));
        assert_eq!(overlap_counts(&a, &b, cw, ch), brute_counts(&a, &b, cw, ch), "{w}x{h} window ({cw}, {ch})");
    }
}

#[test]
fn every_finger_subset_yields_three_templates_or_none() {
    let params = RenderParams::default();
    let subject = SubjectModel::generate(1, 5, &params);
    let config = FvrConfig::default();
    for hand in [Hand::Left, Hand::Right] {
        let renderer = HandRenderer::new(subject.hand(hand), &params);
        for bits in 0u8..16 {
            let present = [bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0];
            let (img, truth) = renderer.render(&Pose::for_camera(Camera::Left), Wavelength::Nir850, present, 1.0, bits as u64);
            assert_eq!(truth.fingers_present as u32, bits.count_ones());
            let src = TemplateSource { subject: 1, hand, camera: Camera::Left, wavelength: Wavelength::Nir850, sample: 1, frame: 0 };
            match build_template(&img, &src, None, &Identity, &config, "").unwrap() {
                TemplateOutcome::Templates(t) => {
                    assert_eq!(bits, 15, "{hand:?} {present:?} produced templates");
                    assert_eq!(t.iter().map(|t| t.finger).collect::<Vec<_>>(), Finger::EVALUATED.to_vec());
                }
                TemplateOutcome::Excluded { .. } => assert_ne!(bits, 15, "{hand:?} full hand excluded"),
            }
        }
    }
}
