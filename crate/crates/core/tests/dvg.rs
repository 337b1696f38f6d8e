use proptest::prelude::*;
use stereogen::dvg::{
    backward_render, fb_confidence, flicker_count, forward_splat, generate_sample, hole_fill,
    refine_mask, splat_raster, synth_scene, zbuffer_resolve, Direction, FbParams,
    GenerateOptions, SceneSpec, StereoShift, TemporalNeighbor,
};
use stereogen::imaging::{
    ConfidenceMap, DepthMap, DisparityMap, FlowField, Frame, OcclusionMask, Raster, VideoClip,
};
use stereogen::metrics::psnr;
use stereogen::Error;
use stereogen_oracle as oracle;

fn frame_and_flow(max: usize, reach: f32) -> impl Strategy<Value = (Frame, FlowField)> {
    (1..=max, 1..=max).prop_flat_map(move |(w, h)| {
        (
            prop::collection::vec(0f32..=1.0, w * h * 3),
            prop::collection::vec(-reach..reach, w * h * 2),
        )
            .prop_map(move |(c, f)| {
                let flow = f.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
                (Frame::new(w, h, c).unwrap(), FlowField::new(w, h, flow).unwrap())
            })
    })
}

fn as_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn flow_f64(f: &FlowField) -> Vec<[f64; 2]> {
    f.data().iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}

fn smooth(w: usize, h: usize, phase: f32) -> Frame {
    Frame::from_fn(w, h, |x, y| {
        let (x, y) = (x as f32, y as f32);
        [
            0.5 + 0.3 * (0.2 * x + phase).sin(),
            0.5 + 0.3 * (0.15 * y - phase).cos(),
            0.5 + 0.2 * (0.1 * (x + y)).sin(),
        ]
    })
    .unwrap()
}

proptest! {
    #[test]
    fn zero_shift_is_bit_exact((frame, _) in frame_and_flow(10, 1.0)) {
        let (w, h) = frame.dims();
        let out = forward_splat(&frame, &FlowField::zeros(w, h).unwrap()).unwrap();
        prop_assert_eq!(&out.frame, &frame);
        prop_assert_eq!(out.mask.area(), 0);
        prop_assert!(out.weights.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn total_weight_is_in_bounds_footprint_mass((frame, flow) in frame_and_flow(10, 4.0)) {
        let (w, h) = frame.dims();
        let out = forward_splat(&frame, &flow).unwrap();
        let mut expected = 0.0;
        for (i, f) in flow.data().iter().enumerate() {
            let (px, py) = ((i % w) as f64 + f[0] as f64, (i / w) as f64 + f[1] as f64);
            for ty in 0..h {
                for tx in 0..w {
                    expected += (1.0 - (px - tx as f64).abs()).max(0.0) * (1.0 - (py - ty as f64).abs()).max(0.0);
                }
            }
        }
        let total: f64 = out.weights.iter().sum();
        prop_assert!((total - expected).abs() <= 1e-6, "{total} vs {expected}");
    }

    #[test]
    fn integer_shift_weight_counts_landing_sources(
        (frame, _) in frame_and_flow(10, 1.0),
        dx in -5i32..=5,
        dy in -5i32..=5,
    ) {
        let (w, h) = frame.dims();
        let out = forward_splat(&frame, &FlowField::constant(w, h, [dx as f32, dy as f32]).unwrap()).unwrap();
        let landing = (0..w * h)
            .filter(|&i| {
                let (x, y) = ((i % w) as i32 + dx, (i / w) as i32 + dy);
                x >= 0 && y >= 0 && x < w as i32 && y < h as i32
            })
            .count();
        prop_assert_eq!(out.weights.iter().sum::<f64>(), landing as f64);
    }

    #[test]
    fn splat_and_zbuffer_match_gather_oracle(
        (frame, flow) in frame_and_flow(8, 3.0),
        depth_seed in prop::collection::vec(0f32..4.0, 64),
    ) {
        let (w, h) = frame.dims();
        let depth = DepthMap::new(w, h, depth_seed[..w * h].to_vec()).unwrap();
        let values = as_f64(frame.data());
        let shifts = flow_f64(&flow);
        for resolve in [false, true] {
            let expected = oracle::splat(w, h, 3, &values, &shifts, resolve.then(|| as_f64(depth.data())).as_deref());
            let got = if resolve { zbuffer_resolve(&frame, &flow, &depth) } else { forward_splat(&frame, &flow) }.unwrap();
            let pixels: Vec<[f32; 3]> = frame.data().chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect();
            let (sums, weights) = splat_raster(w, h, &pixels, &|i| flow.data()[i], resolve.then_some(depth.data()));
            for i in 0..w * h {
                prop_assert!((weights[i] - expected.weights[i]).abs() <= 1e-9);
                prop_assert!((got.weights[i] - expected.weights[i]).abs() <= 1e-9);
                prop_assert_eq!(got.mask.data()[i] == 1, expected.holes[i]);
                for c in 0..3 {
                    prop_assert!((sums[i][c] - expected.sums[i * 3 + c]).abs() <= 1e-9);
                    // the rendered frame is f32, so compare against the rounded oracle value
                    prop_assert_eq!(got.frame.data()[i * 3 + c], expected.colour[i * 3 + c] as f32);
                }
            }
        }
    }

    #[test]
    fn confidence_matches_oracle((_, fwd) in frame_and_flow(10, 3.0), seed in prop::collection::vec(-3f32..3.0, 200)) {
        let (w, h) = fwd.dims();
        let bwd_data: Vec<[f32; 2]> = fwd
            .data()
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let noise = [seed[(2 * i) % 200] * 0.3, seed[(2 * i + 1) % 200] * 0.3];
                [-f[0] + noise[0], -f[1] + noise[1]]
            })
            .collect();
        let bwd = FlowField::new(w, h, bwd_data).unwrap();
        let p = FbParams::default();
        let got = fb_confidence(&fwd, &bwd, p).unwrap();
        let expected = oracle::fb_confidence(w, h, &flow_f64(&fwd), &flow_f64(&bwd), p.alpha, p.beta);
        prop_assert_eq!(as_f64(got.data()), expected);
    }

    #[test]
    fn refinement_matches_oracle_and_is_monotone_and_idempotent(
        (_, flow_a) in frame_and_flow(10, 2.0),
        bits in prop::collection::vec(0u8..2, 300),
        conf in prop::collection::vec(0f32..=1.0, 100),
        two_neighbors in any::<bool>(),
    ) {
        let (w, h) = flow_a.dims();
        let n = w * h;
        let flow_b = flow_a.negated();
        let cur = OcclusionMask::new(w, h, bits[..n].to_vec()).unwrap();
        let prev = OcclusionMask::new(w, h, bits[100..100 + n].to_vec()).unwrap();
        let next = OcclusionMask::new(w, h, bits[200..200 + n].to_vec()).unwrap();
        let conf = ConfidenceMap::new(w, h, conf[..n].to_vec()).unwrap();
        let p = TemporalNeighbor { mask: &prev, flow: &flow_a };
        let q = two_neighbors.then_some(TemporalNeighbor { mask: &next, flow: &flow_b });
        let out = refine_mask(&cur, Some(p), q, &conf).unwrap();

        let fa = flow_f64(&flow_a);
        let fb = flow_f64(&flow_b);
        let mut neighbors: Vec<oracle::Neighbor<'_>> = vec![(prev.data(), &fa)];
        if two_neighbors {
            neighbors.push((next.data(), &fb));
        }
        let expected = oracle::refine_mask(w, h, cur.data(), &neighbors, &as_f64(conf.data()));
        prop_assert_eq!(out.data(), &expected[..]);
        prop_assert!(out.contains(&cur));
        prop_assert_eq!(refine_mask(&out, Some(p), q, &conf).unwrap(), out);
    }

    #[test]
    fn hole_fill_keeps_known_pixels_and_stays_in_range(
        (frame, _) in frame_and_flow(12, 1.0),
        bits in prop::collection::vec(0u8..2, 144),
    ) {
        let (w, h) = frame.dims();
        let mask = OcclusionMask::new(w, h, bits[..w * h].to_vec()).unwrap();
        let out = hole_fill(&frame, &mask, None).unwrap();
        let known: Vec<usize> = (0..w * h).filter(|&i| mask.data()[i] == 0).collect();
        for c in 0..3 {
            let vals: Vec<f32> = known.iter().map(|&i| frame.data()[i * 3 + c]).collect();
            let lo = vals.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = vals.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            for i in 0..w * h {
                let v = out.frame.data()[i * 3 + c];
                if mask.data()[i] == 0 {
                    prop_assert_eq!(v.to_bits(), frame.data()[i * 3 + c].to_bits());
                } else if !known.is_empty() {
                    prop_assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
                }
            }
        }
        prop_assert_eq!(out.used_fallback, known.is_empty());
    }
}

#[test]
fn two_pixel_hole_between_colours_stays_between() {
    let a = [0.1, 0.9, 0.4];
    let b = [0.7, 0.2, 0.4];
    let frame = Frame::from_fn(4, 1, |x, _| if x < 2 { a } else { b }).unwrap();
    let mask = OcclusionMask::new(4, 1, vec![0, 1, 1, 0]).unwrap();
    let out = hole_fill(&frame, &mask, None).unwrap();
    for x in 1..3 {
        let p = out.frame.pixel(x, 0);
        for c in 0..3 {
            assert!(p[c] >= a[c].min(b[c]) && p[c] <= a[c].max(b[c]));
        }
    }
}

#[test]
fn constant_disparity_round_trip() {
    let (w, h, s) = (24usize, 10usize, 3i32);
    let frame = smooth(w, h, 0.3);
    let disp = DisparityMap::new(w, h, vec![s as f32; w * h]).unwrap();
    let fwd = forward_splat(&frame, &disp).unwrap();
    let back = backward_render(&fwd.frame, &disp).unwrap();

    // reference pixels that left the frame on the way out come back masked
    let lost = OcclusionMask::from_fn(w, h, |x, _| x as i32 + s >= w as i32).unwrap();
    assert_eq!(back.mask, lost);
    let vacated_back = OcclusionMask::from_fn(w, h, |x, _| {
        let target = x as i32 + s;
        (0..w as i32).contains(&target) && fwd.mask.get(target as usize, 0)
    })
    .unwrap();
    assert!(back.mask.contains(&vacated_back));

    let keep: Vec<usize> = (0..w * h).filter(|&i| back.mask.data()[i] == 0).collect();
    let pick = |f: &Frame| {
        let d: Vec<f32> = keep.iter().flat_map(|&i| f.data()[i * 3..i * 3 + 3].to_vec()).collect();
        Frame::new(keep.len(), 1, d).unwrap()
    };
    assert!(psnr(&pick(&back.frame), &pick(&frame)).unwrap() >= 40.0);
}

#[test]
fn fractional_disparity_round_trip_on_smooth_content() {
    let (w, h) = (32usize, 8usize);
    let frame = smooth(w, h, 1.1);
    let disp = DisparityMap::new(w, h, vec![2.5; w * h]).unwrap();
    let fwd = forward_splat(&frame, &disp).unwrap();
    let back = backward_render(&fwd.frame, &disp).unwrap();
    let keep: Vec<usize> = (0..w * h)
        .filter(|&i| back.mask.data()[i] == 0 && (i % w) >= 3 && (i % w) + 4 < w)
        .collect();
    let pick = |f: &Frame| {
        let d: Vec<f32> = keep.iter().flat_map(|&i| f.data()[i * 3..i * 3 + 3].to_vec()).collect();
        Frame::new(keep.len(), 1, d).unwrap()
    };
    assert!(psnr(&pick(&back.frame), &pick(&frame)).unwrap() >= 40.0);
}

fn default_shift() -> StereoShift {
    StereoShift::new(4.0, Direction::Right).unwrap()
}

#[test]
fn static_scene_gives_identical_masks() {
    let frame = smooth(20, 12, 0.0);
    let clip = VideoClip::new(vec![frame; 4]).unwrap();
    let depths = vec![DepthMap::filled(20, 12, 0.7).unwrap(); 4];
    let zero = vec![FlowField::zeros(20, 12).unwrap(); 3];
    let g = generate_sample(&clip, &depths, &zero, &zero, default_shift(), &GenerateOptions::default()).unwrap();
    for t in 1..4 {
        assert_eq!(g.sample.masks[t], g.sample.masks[0]);
        assert_eq!(g.sample.target_view.frames()[t], g.sample.target_view.frames()[0]);
    }
    assert_eq!(g.sample.masks, g.unrefined_masks);
}

#[test]
fn synthetic_scene_round_trip_and_refinement() {
    let scene = synth_scene(&SceneSpec::default()).unwrap();
    let g = generate_sample(
        &scene.clip,
        &scene.depths,
        &scene.flows_fwd,
        &scene.flows_bwd,
        default_shift(),
        &GenerateOptions::default(),
    )
    .unwrap();
    let (w, h) = (scene.clip.width(), scene.clip.height());
    for t in 0..scene.clip.len() {
        let m = &g.unrefined_masks[t];
        let keep: Vec<usize> = (0..w * h).filter(|&i| m.data()[i] == 0).collect();
        let pick = |f: &Frame| {
            let d: Vec<f32> = keep.iter().flat_map(|&i| f.data()[i * 3..i * 3 + 3].to_vec()).collect();
            Frame::new(keep.len(), 1, d).unwrap()
        };
        let p = psnr(&pick(&g.back_rendered.frames()[t]), &pick(&scene.clip.frames()[t])).unwrap();
        assert!(p >= 40.0, "frame {t}: {p} dB");
        assert!(g.sample.masks[t].contains(m));
        assert!(g.diagnostics[t].refined_mask_area >= g.diagnostics[t].unrefined_mask_area);
        // masked reference is the reference with masked pixels zeroed
        for i in 0..w * h {
            let masked = g.sample.masks[t].data()[i] == 1;
            for c in 0..3 {
                let v = g.sample.masked_reference.frames()[t].data()[i * 3 + c];
                let expected = if masked { 0.0 } else { scene.clip.frames()[t].data()[i * 3 + c] };
                assert_eq!(v, expected);
            }
        }
    }
    let before = flicker_count(&g.unrefined_masks, &scene.flows_bwd, &scene.flows_fwd);
    let after = flicker_count(&g.sample.masks, &scene.flows_bwd, &scene.flows_fwd);
    assert!(before > 0);
    assert!(2 * after <= before, "{before} -> {after}");
}

#[test]
fn synthetic_flows_are_consistent_on_covisible_pixels() {
    let spec = SceneSpec::default();
    let scene = synth_scene(&spec).unwrap();
    let (w, h) = (spec.width, spec.height);
    for t in 0..spec.frames - 1 {
        let c = fb_confidence(&scene.flows_fwd[t], &scene.flows_bwd[t], FbParams::default()).unwrap();
        for y in 0..h {
            for x in 0..w {
                let fg = spec.is_foreground(x, y, t);
                let [u, v] = scene.flows_fwd[t].get(x, y);
                let (tx, ty) = (x as f32 + u, y as f32 + v);
                let inside = tx >= 0.0 && ty >= 0.0 && tx <= (w - 1) as f32 && ty <= (h - 1) as f32;
                let covisible = inside && spec.is_foreground(tx as usize, ty as usize, t + 1) == fg;
                if covisible {
                    assert_eq!(c.get(x, y), 1.0, "frame {t} ({x},{y})");
                }
            }
        }
    }
}

#[test]
fn pipeline_errors_name_the_frame() {
    let scene = synth_scene(&SceneSpec::default()).unwrap();
    let mut depths = scene.depths.clone();
    depths[2] = DepthMap::filled(5, 5, 1.0).unwrap();
    let err = generate_sample(
        &scene.clip,
        &depths,
        &scene.flows_fwd,
        &scene.flows_bwd,
        default_shift(),
        &GenerateOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::AtFrame { index: 2, .. }), "{err}");
    assert!(err.to_string().starts_with("frame 2:"));
}

#[test]
fn refinement_off_never_grows_masks() {
    let scene = synth_scene(&SceneSpec::default()).unwrap();
    let run = |refine| {
        let opts = GenerateOptions { refine, ..Default::default() };
        generate_sample(&scene.clip, &scene.depths, &scene.flows_fwd, &scene.flows_bwd, default_shift(), &opts)
            .unwrap()
    };
    let (on, off) = (run(true), run(false));
    for t in 0..scene.clip.len() {
        assert!(on.sample.masks[t].area() >= off.sample.masks[t].area());
        assert_eq!(off.sample.masks[t], off.unrefined_masks[t]);
    }
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let scene = synth_scene(&SceneSpec::default()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                generate_sample(
                    &scene.clip,
                    &scene.depths,
                    &scene.flows_fwd,
                    &scene.flows_bwd,
                    default_shift(),
                    &GenerateOptions::default(),
                )
                .unwrap()
            })
    };
    assert_eq!(run(1), run(8));
}
