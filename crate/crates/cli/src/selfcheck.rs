//! Desk-scale verification suite behind `stereogen selfcheck`.
//!
//! Every check is seeded, runs in well under a second, and reports its
//! tolerance. Panics inside a check count as failures.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereogen::attention::{
    attention_weights, attn, spatial_concat_attention, til_augment, AttentionWeights, FeatureMap,
};
use stereogen::diffusion::{
    combined_loss, deviation_strength, estimate_clean, forward_diffuse, LatentTensor, NoiseSchedule,
};
use stereogen::dvg::{
    fb_confidence, flicker_count, forward_splat, generate_sample, hole_fill, refine_mask,
    synth_scene, zbuffer_resolve, Direction, FbParams, GenerateOptions, SceneSpec, StereoShift,
    TemporalNeighbor,
};
use stereogen::imaging::{
    read_flo, read_pfm, read_png_frame, read_png_mask, write_flo, write_pfm, write_png_frame,
    write_png_mask, ConfidenceMap, DepthMap, FlowField, Frame, OcclusionMask, VideoClip,
};
use stereogen::metrics::{psnr, ssim, warp_error, PSNR_CAP_DB};
use stereogen_oracle as oracle;

use crate::error::{CliError, CliResult};

/// Knobs for the harness itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub seed: u64,
    /// Added to every analytic gradient element before comparison; a
    /// non-zero value must make the gradient check fail.
    pub perturb_gradient: f64,
}

type CheckFn = fn(&Options) -> Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub tolerance: &'static str,
    run: CheckFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub tolerance: &'static str,
    pub error: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.error.is_none()
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(opts: &Options, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn random_frame(r: &mut ChaCha8Rng, w: usize, h: usize) -> Frame {
    Frame::new(w, h, (0..w * h * 3).map(|_| r.gen::<f32>()).collect()).expect("in range")
}

fn random_flow(r: &mut ChaCha8Rng, w: usize, h: usize, reach: f32) -> FlowField {
    FlowField::new(w, h, (0..w * h).map(|_| [r.gen_range(-reach..reach), r.gen_range(-reach..reach)]).collect())
        .expect("finite")
}

fn random_mask(r: &mut ChaCha8Rng, w: usize, h: usize) -> OcclusionMask {
    OcclusionMask::from_fn(w, h, |_, _| r.gen_bool(0.4)).expect("binary")
}

fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn flow64(f: &FlowField) -> Vec<[f64; 2]> {
    f.data().iter().map(|p| [p[0] as f64, p[1] as f64]).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

const SEEDS: u64 = 100;

fn splat_vs_oracle(opts: &Options, resolve: bool) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0x5011 + s);
        let (w, h) = (r.gen_range(1..=16), r.gen_range(1..=16));
        let frame = random_frame(&mut r, w, h);
        let flow = random_flow(&mut r, w, h, 3.0);
        let depth = ok(DepthMap::new(w, h, (0..w * h).map(|_| r.gen_range(0.1..2.0)).collect()))?;
        let got = ok(if resolve { zbuffer_resolve(&frame, &flow, &depth) } else { forward_splat(&frame, &flow) })?;
        let inv = f64s(depth.data());
        let want = oracle::splat(w, h, 3, &f64s(frame.data()), &flow64(&flow), resolve.then_some(&inv[..]));
        ensure(max_abs_diff(&got.weights, &want.weights) <= 1e-9, || format!("weights differ (case {s})"))?;
        let holes: Vec<bool> = got.mask.data().iter().map(|&m| m == 1).collect();
        ensure(holes == want.holes, || format!("hole masks differ (case {s})"))?;
        // the rendered frame is stored as f32
        let rounded: Vec<f32> = want.colour.iter().map(|&v| v as f32).collect();
        ensure(got.frame.data() == &rounded[..], || format!("colour differs (case {s})"))?;
    }
    Ok(())
}

fn check_splat_identity(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 1);
    let f = random_frame(&mut r, 13, 9);
    let out = ok(forward_splat(&f, &ok(FlowField::zeros(13, 9))?))?;
    ensure(out.frame == f && out.mask.area() == 0, || "zero shift changed the frame".into())
}

fn check_splat_oracle(opts: &Options) -> Result<(), String> {
    splat_vs_oracle(opts, false)
}

fn check_zbuffer_oracle(opts: &Options) -> Result<(), String> {
    splat_vs_oracle(opts, true)
}

fn check_weight_conservation(opts: &Options) -> Result<(), String> {
    for s in 0..20 {
        let mut r = rng(opts, 0x3e1 + s);
        let (w, h) = (r.gen_range(1..=12), r.gen_range(1..=12));
        let (dx, dy) = (r.gen_range(-4i32..=4), r.gen_range(-4i32..=4));
        let f = random_frame(&mut r, w, h);
        let out = ok(forward_splat(&f, &ok(FlowField::constant(w, h, [dx as f32, dy as f32]))?))?;
        let landing = (0..w * h)
            .filter(|&i| {
                let (x, y) = ((i % w) as i32 + dx, (i / w) as i32 + dy);
                x >= 0 && y >= 0 && x < w as i32 && y < h as i32
            })
            .count() as f64;
        let total: f64 = out.weights.iter().sum();
        ensure((total - landing).abs() <= 1e-6, || format!("weight {total} vs {landing} landing sources"))?;
    }
    Ok(())
}

fn check_zbuffer_nearest(_: &Options) -> Result<(), String> {
    let frame = ok(Frame::new(2, 1, vec![0.2, 0.2, 0.2, 0.9, 0.9, 0.9]))?;
    let flow = ok(FlowField::new(2, 1, vec![[1.0, 0.0], [0.0, 0.0]]))?;
    for (depths, winner) in [([1.0, 2.0], 0.9f32), ([2.0, 1.0], 0.2)] {
        let d = ok(DepthMap::new(2, 1, depths.to_vec()))?;
        let out = ok(zbuffer_resolve(&frame, &flow, &d))?;
        ensure(out.frame.pixel(1, 0)[0] == winner, || format!("depths {depths:?}: wrong winner"))?;
    }
    Ok(())
}

fn check_confidence_oracle(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0xc0f + s);
        let (w, h) = (r.gen_range(1..=16), r.gen_range(1..=16));
        let fwd = random_flow(&mut r, w, h, 3.0);
        let bwd = ok(FlowField::new(
            w,
            h,
            fwd.data().iter().map(|p| [-p[0] + r.gen_range(-1.0..1.0), -p[1] + r.gen_range(-1.0..1.0)]).collect(),
        ))?;
        let p = FbParams::default();
        let got = ok(fb_confidence(&fwd, &bwd, p))?;
        let want = oracle::fb_confidence(w, h, &flow64(&fwd), &flow64(&bwd), p.alpha, p.beta);
        ensure(f64s(got.data()) == want, || format!("confidence differs (case {s})"))?;
    }
    Ok(())
}

fn check_refine_oracle(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0x4ef + s);
        let (w, h) = (r.gen_range(1..=16), r.gen_range(1..=16));
        let cur = random_mask(&mut r, w, h);
        let (pm, nm) = (random_mask(&mut r, w, h), random_mask(&mut r, w, h));
        let (pf, nf) = (random_flow(&mut r, w, h, 2.0), random_flow(&mut r, w, h, 2.0));
        let conf = ok(ConfidenceMap::new(w, h, (0..w * h).map(|_| r.gen::<f32>()).collect()))?;
        let got = ok(refine_mask(
            &cur,
            Some(TemporalNeighbor { mask: &pm, flow: &pf }),
            Some(TemporalNeighbor { mask: &nm, flow: &nf }),
            &conf,
        ))?;
        let (pf64, nf64) = (flow64(&pf), flow64(&nf));
        let want = oracle::refine_mask(w, h, cur.data(), &[(pm.data(), &pf64), (nm.data(), &nf64)], &f64s(conf.data()));
        ensure(got.data() == &want[..], || format!("refined mask differs (case {s})"))?;
    }
    Ok(())
}

fn check_refine_truth_table(_: &Options) -> Result<(), String> {
    let (w, h) = (3, 3);
    let zero = ok(FlowField::zeros(w, h))?;
    let empty = ok(OcclusionMask::empty(w, h))?;
    let centre = ok(OcclusionMask::from_fn(w, h, |x, y| x == 1 && y == 1))?;
    let n = |m| Some(TemporalNeighbor { mask: m, flow: &zero });
    let both = ok(refine_mask(&empty, n(&centre), n(&centre), &ok(ConfidenceMap::filled(w, h, 0.5))?))?;
    ensure(both == centre, || "both neighbours at C = 0.5 must set the pixel".into())?;
    let one = ok(refine_mask(&empty, n(&centre), n(&empty), &ok(ConfidenceMap::filled(w, h, 0.9))?))?;
    ensure(one == empty, || "one neighbour at C = 0.9 must leave the pixel".into())?;
    let far = ok(FlowField::constant(w, h, [5.0, 0.0]))?;
    let full = ok(OcclusionMask::from_fn(w, h, |_, _| true))?;
    let out = ok(refine_mask(
        &empty,
        Some(TemporalNeighbor { mask: &full, flow: &far }),
        Some(TemporalNeighbor { mask: &full, flow: &far }),
        &ok(ConfidenceMap::filled(w, h, 1.0))?,
    ))?;
    ensure(out == empty, || "out-of-bounds samples must contribute 0".into())
}

fn check_refine_monotone(opts: &Options) -> Result<(), String> {
    for s in 0..1000 {
        let mut r = rng(opts, 0x7070 + s);
        let (w, h) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let cur = random_mask(&mut r, w, h);
        let (pm, nm) = (random_mask(&mut r, w, h), random_mask(&mut r, w, h));
        let (pf, nf) = (random_flow(&mut r, w, h, 2.0), random_flow(&mut r, w, h, 2.0));
        let conf = ok(ConfidenceMap::new(w, h, (0..w * h).map(|_| r.gen::<f32>()).collect()))?;
        let p = Some(TemporalNeighbor { mask: &pm, flow: &pf });
        let q = Some(TemporalNeighbor { mask: &nm, flow: &nf });
        let out = ok(refine_mask(&cur, p, q, &conf))?;
        ensure(out.contains(&cur), || format!("output lost a pixel (case {s})"))?;
        ensure(ok(refine_mask(&out, p, q, &conf))? == out, || format!("not idempotent (case {s})"))?;
    }
    Ok(())
}

fn check_hole_fill(opts: &Options) -> Result<(), String> {
    for s in 0..50 {
        let mut r = rng(opts, 0xf111 + s);
        let (w, h) = (r.gen_range(1..=16), r.gen_range(1..=16));
        let f = random_frame(&mut r, w, h);
        let m = random_mask(&mut r, w, h);
        let out = ok(hole_fill(&f, &m, None))?.frame;
        for c in 0..3 {
            let known: Vec<f32> = (0..w * h).filter(|&i| m.data()[i] == 0).map(|i| f.data()[i * 3 + c]).collect();
            let lo = known.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = known.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            for i in 0..w * h {
                let v = out.data()[i * 3 + c];
                if m.data()[i] == 0 {
                    ensure(v == f.data()[i * 3 + c], || "known pixel changed".into())?;
                } else if !known.is_empty() {
                    ensure(v >= lo && v <= hi, || format!("{v} outside [{lo}, {hi}]"))?;
                }
            }
        }
    }
    Ok(())
}

fn synthetic_generation() -> Result<(stereogen::dvg::SynthScene, stereogen::dvg::Generated), String> {
    let scene = ok(synth_scene(&SceneSpec::default()))?;
    let g = ok(generate_sample(
        &scene.clip,
        &scene.depths,
        &scene.flows_fwd,
        &scene.flows_bwd,
        ok(StereoShift::new(4.0, Direction::Right))?,
        &GenerateOptions::default(),
    ))?;
    Ok((scene, g))
}

fn check_round_trip(_: &Options) -> Result<(), String> {
    let (scene, g) = synthetic_generation()?;
    for t in 0..scene.clip.len() {
        let keep: Vec<usize> = (0..g.unrefined_masks[t].data().len())
            .filter(|&i| g.unrefined_masks[t].data()[i] == 0)
            .collect();
        let pick = |f: &Frame| {
            Frame::new(keep.len(), 1, keep.iter().flat_map(|&i| f.data()[i * 3..i * 3 + 3].to_vec()).collect())
        };
        let p = ok(psnr(&ok(pick(&g.back_rendered.frames()[t]))?, &ok(pick(&scene.clip.frames()[t]))?))?;
        ensure(p >= 40.0, || format!("frame {t}: {p:.2} dB"))?;
    }
    Ok(())
}

fn check_flicker(_: &Options) -> Result<(), String> {
    let (scene, g) = synthetic_generation()?;
    let before = flicker_count(&g.unrefined_masks, &scene.flows_bwd, &scene.flows_fwd);
    let after = flicker_count(&g.sample.masks, &scene.flows_bwd, &scene.flows_fwd);
    ensure(before > 0 && 2 * after <= before, || format!("flicker {before} -> {after}"))
}

fn check_diffusion_inverse(opts: &Options) -> Result<(), String> {
    let s = NoiseSchedule::default();
    let mut r = rng(opts, 0xd1f);
    let z0 = ok(LatentTensor::from_fn([2, 4, 4, 4], |_| r.gen_range(-2.0..2.0)))?;
    let eps = ok(LatentTensor::from_fn([2, 4, 4, 4], |_| r.gen_range(-3.0..3.0)))?;
    for t in 1..=s.steps() {
        if ok(s.alpha_bar(t))? < 1e-4 {
            continue;
        }
        let back = ok(estimate_clean(&ok(forward_diffuse(&z0, t, &eps, &s))?, &eps, t, &s))?;
        let e = max_abs_diff(back.data(), z0.data());
        ensure(e <= 1e-5, || format!("t = {t}: {e}"))?;
    }
    Ok(())
}

fn check_schedule(_: &Options) -> Result<(), String> {
    let s = NoiseSchedule::default();
    ensure(s.alpha_bars().windows(2).all(|p| p[1] < p[0]), || "alpha_bar not decreasing".into())?;
    let two = ok(NoiseSchedule::from_betas(vec![0.1, 0.2]))?;
    ensure((ok(two.alpha_bar(2))? - 0.72).abs() <= 1e-12, || "two-step product".into())
}

fn check_gradient(opts: &Options) -> Result<(), String> {
    let sched = NoiseSchedule::default();
    let h = 1e-4;
    for case in 0..100 {
        let mut r = rng(opts, 0x96ad + case);
        let shape = [r.gen_range(1..=2), r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4)];
        let tensor = |r: &mut ChaCha8Rng| LatentTensor::from_fn(shape, |_| r.gen_range(-2.0..2.0));
        let (z0, zref, eps, pred) = (ok(tensor(&mut r))?, ok(tensor(&mut r))?, ok(tensor(&mut r))?, ok(tensor(&mut r))?);
        let t = r.gen_range(1..=1000);
        let lambda = r.gen_range(0.1..2.0);
        let zt = ok(forward_diffuse(&z0, t, &eps, &sched))?;
        let out = ok(combined_loss(&eps, &pred, &zt, &z0, &zref, t, &sched, lambda))?;
        let z0_hat = ok(estimate_clean(&zt, &pred, t, &sched))?;
        let ab = ok(sched.alpha_bar(t))?;
        let step = ((1.0 - ab) / ab).sqrt() * h;
        for i in 0..pred.len() {
            if (z0_hat.data()[i] - zref.data()[i]).abs() <= step + 1e-6 {
                continue;
            }
            let at = |d: f64| -> Result<f64, String> {
                let mut v = pred.data().to_vec();
                v[i] += d;
                let p = ok(LatentTensor::new(shape, v))?;
                Ok(ok(combined_loss(&eps, &p, &zt, &z0, &zref, t, &sched, lambda))?.total)
            };
            let fd = (at(h)? - at(-h)?) / (2.0 * h);
            let an = out.gradient.data()[i] + opts.perturb_gradient;
            if an.abs() <= 1e-8 {
                continue;
            }
            let rel = (fd - an).abs() / an.abs().max(fd.abs());
            ensure(rel <= 1e-4, || format!("case {case} element {i}: analytic {an:.6e}, numeric {fd:.6e}"))?;
        }
    }
    Ok(())
}

fn check_exact_prediction(opts: &Options) -> Result<(), String> {
    let s = NoiseSchedule::default();
    let mut r = rng(opts, 0xe8a);
    let mut tensor = || LatentTensor::from_fn([2, 3, 4, 4], |_| r.gen_range(-2.0..2.0));
    let (eps, zt, zref) = (ok(tensor())?, ok(tensor())?, ok(tensor())?);
    let z0 = ok(estimate_clean(&zt, &eps, 321, &s))?;
    let out = ok(combined_loss(&eps, &eps, &zt, &z0, &zref, 321, &s, 0.5))?;
    ensure(out.total == 0.0, || format!("loss {}", out.total))?;
    ensure(out.gradient.data().iter().all(|&g| g == 0.0), || "non-zero gradient".into())
}

fn check_deviation_strength(opts: &Options) -> Result<(), String> {
    for case in 0..1000 {
        let mut r = rng(opts, 0xde5 + case);
        let shape = [r.gen_range(1..=3), r.gen_range(1..=3), r.gen_range(1..=4), r.gen_range(1..=4)];
        let a = ok(LatentTensor::from_fn(shape, |_| r.gen_range(-5.0..5.0)))?;
        let b = ok(LatentTensor::from_fn(shape, |_| r.gen_range(-5.0..5.0)))?;
        let k = r.gen_range(-3.0..3.0);
        let s = ok(deviation_strength(&a, &b))?;
        ensure(s.iter().all(|&v| v > 0.0), || "expected positive strength".into())?;
        ensure(ok(deviation_strength(&b, &a))? == s, || "not symmetric".into())?;
        ensure(ok(deviation_strength(&a, &a))?.iter().all(|&v| v == 0.0), || "s(a, a) != 0".into())?;
        let shift = |x: &LatentTensor| LatentTensor::from_fn(x.shape(), |i| x.data()[i] + k);
        let moved = ok(deviation_strength(&ok(shift(&a))?, &ok(shift(&b))?))?;
        ensure(max_abs_diff(&moved, &s) <= 1e-12, || "not translation invariant".into())?;
    }
    Ok(())
}

fn random_map(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap {
    FeatureMap::new(h, w, c, (0..h * w * c).map(|_| r.gen_range(-1.5..1.5)).collect()).expect("finite")
}

fn random_weights(r: &mut ChaCha8Rng, c: usize) -> AttentionWeights {
    let mut m = || (0..c * c).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    AttentionWeights::new(c, m(), m(), m()).expect("finite")
}

fn tokens(m: &FeatureMap) -> Vec<Vec<f64>> {
    (0..m.tokens()).map(|i| m.token(i).to_vec()).collect()
}

fn check_attention_oracle(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0xa77 + s);
        let (h, w, c) = (r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4));
        let (a, b) = (random_map(&mut r, h, w, c), random_map(&mut r, h, w, c));
        let wt = random_weights(&mut r, c);
        let got = ok(attn(&a, &b, &wt))?;
        let want = oracle::attention(&tokens(&a), &tokens(&b), wt.query(), wt.key(), wt.value());
        ensure(max_abs_diff(got.data(), &want.concat()) <= 1e-9, || format!("attn differs (case {s})"))?;
    }
    Ok(())
}

fn check_spatial_oracle(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0x5ca + s);
        let (h, w, c) = (r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4));
        let (a, b) = (random_map(&mut r, h, w, c), random_map(&mut r, h, w, c));
        let wt = random_weights(&mut r, c);
        let got = ok(spatial_concat_attention(&a, &b, &wt))?;
        let want = oracle::spatial_concat(&tokens(&a), &tokens(&b), wt.query(), wt.key(), wt.value());
        ensure(got.shape() == a.shape(), || "shape changed".into())?;
        ensure(max_abs_diff(got.data(), &want.concat()) <= 1e-9, || format!("output differs (case {s})"))?;
    }
    Ok(())
}

fn check_softmax_rows(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0x50f);
    for _ in 0..50 {
        let c = r.gen_range(1..=4);
        let (a, b) = (random_map(&mut r, 2, 3, c), random_map(&mut r, 3, 2, c));
        let wt = random_weights(&mut r, c);
        for row in ok(attention_weights(&a, &b, &wt))? {
            let s: f64 = row.iter().sum();
            ensure((s - 1.0).abs() <= 1e-6, || format!("row sums to {s}"))?;
        }
    }
    Ok(())
}

fn check_til(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0x711);
    let c = 3;
    let zr = random_map(&mut r, 2, 2, c);
    let wt = random_weights(&mut r, c);
    let nbrs: Vec<FeatureMap> = (0..4).map(|_| random_map(&mut r, 2, 2, c)).collect();
    let one = ok(til_augment(&zr, &nbrs, 1.0, &wt))?;
    ensure(one == ok(attn(&zr, &zr, &wt))?, || "lambda = 1 is not self-attention".into())?;
    let q = random_map(&mut r, 2, 2, c);
    let same = ok(til_augment(&zr, &[q.clone(), q.clone(), q.clone()], 0.0, &wt))?;
    ensure(same == ok(attn(&zr, &q, &wt))?, || "lambda = 0 with identical neighbours".into())?;
    let zero = ok(til_augment(&zr, &nbrs, 0.0, &wt))?;
    for lam in [0.25, 0.6, 0.9] {
        let mid = ok(til_augment(&zr, &nbrs, lam, &wt))?;
        let blend: Vec<f64> = one.data().iter().zip(zero.data()).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        ensure(max_abs_diff(mid.data(), &blend) <= 1e-6, || format!("not affine at {lam}"))?;
    }
    Ok(())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn check_til_permutation(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0x9e7);
    let c = 2;
    let zr = random_map(&mut r, 2, 2, c);
    let wt = random_weights(&mut r, c);
    for n in 1..=4 {
        let nbrs: Vec<FeatureMap> = (0..n).map(|_| random_map(&mut r, 2, 2, c)).collect();
        let base = ok(til_augment(&zr, &nbrs, 0.6, &wt))?;
        for perm in permutations(n) {
            let shuffled: Vec<FeatureMap> = perm.iter().map(|&k| nbrs[k].clone()).collect();
            ensure(ok(til_augment(&zr, &shuffled, 0.6, &wt))? == base, || format!("order {perm:?} differs"))?;
        }
    }
    Ok(())
}

fn check_metric_oracles(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0x3e7 + s);
        let (w, h) = (r.gen_range(11..=16), r.gen_range(11..=16));
        let (a, b) = (random_frame(&mut r, w, h), random_frame(&mut r, w, h));
        let (fa, fb) = (f64s(a.data()), f64s(b.data()));
        let p = ok(psnr(&a, &b))?;
        ensure((p - oracle::psnr(&fa, &fb)).abs() <= 1e-9, || format!("psnr differs (case {s})"))?;
        let q = ok(ssim(&a, &b))?;
        let want = oracle::ssim(w, h, &fa, &fb).ok_or("oracle rejected size")?;
        ensure((q - want).abs() <= 1e-9, || format!("ssim differs (case {s})"))?;
    }
    Ok(())
}

fn check_warp_oracle(opts: &Options) -> Result<(), String> {
    for s in 0..SEEDS {
        let mut r = rng(opts, 0x3a4 + s);
        let (w, h, n) = (r.gen_range(1..=16), r.gen_range(1..=16), r.gen_range(2..=4));
        let frames: Vec<Frame> = (0..n).map(|_| random_frame(&mut r, w, h)).collect();
        let flows: Vec<FlowField> = (0..n - 1).map(|_| random_flow(&mut r, w, h, 3.0)).collect();
        let conf: Vec<ConfidenceMap> = (0..n - 1)
            .map(|_| ConfidenceMap::new(w, h, (0..w * h).map(|_| r.gen::<f32>()).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let got = ok(warp_error(&ok(VideoClip::new(frames.clone()))?, &flows, &conf))?;
        let (want, skipped) = oracle::warp_error(
            w,
            h,
            &frames.iter().map(|f| f64s(f.data())).collect::<Vec<_>>(),
            &flows.iter().map(flow64).collect::<Vec<_>>(),
            &conf.iter().map(|c| f64s(c.data())).collect::<Vec<_>>(),
        );
        ensure(got.skipped == skipped, || format!("skipped pairs differ (case {s})"))?;
        let close = match (got.value, want) {
            (Some(a), Some(b)) => (a - b).abs() <= 1e-9,
            (a, b) => a == b,
        };
        ensure(close, || format!("warp error differs (case {s})"))?;
    }
    Ok(())
}

fn check_metric_sanity(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0x5a7);
    let a = random_frame(&mut r, 16, 16);
    ensure(ok(ssim(&a, &a))? == 1.0, || "ssim(a, a) != 1".into())?;
    ensure(ok(psnr(&a, &a))? == PSNR_CAP_DB, || "psnr cap not engaged".into())?;

    let spec = SceneSpec { width: 16, height: 16, frames: 4, rect: [3.0, 4.0, 5.0, 6.0], velocity: [2.0, 1.0], ..Default::default() };
    let scene = ok(synth_scene(&spec))?;
    let conf: Vec<ConfidenceMap> = scene
        .flows_fwd
        .iter()
        .zip(&scene.flows_bwd)
        .map(|(f, b)| fb_confidence(f, b, FbParams { alpha: 0.0, beta: 0.0 }))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let clean = ok(warp_error(&scene.clip, &scene.flows_fwd, &conf))?.value.ok_or("no pair evaluated")?;
    ensure(clean.abs() <= 1e-6, || format!("consistent clip gives {clean}"))?;
    let jittered: Vec<Frame> = scene
        .clip
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let j = if t % 2 == 1 { 0.05 } else { 0.0 };
            Frame::new(16, 16, f.data().iter().map(|v| v + j).collect())
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let noisy = ok(warp_error(&ok(VideoClip::new(jittered))?, &scene.flows_fwd, &conf))?.value.ok_or("no pair")?;
    ensure(noisy > 0.0, || "jitter left the warp error at zero".into())
}

fn check_codec_round_trip(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0xc0d);
    for _ in 0..200 {
        let (w, h) = (r.gen_range(1..=8), r.gen_range(1..=8));
        let d = ok(DepthMap::new(w, h, (0..w * h).map(|_| r.gen_range(0.0..1e3)).collect()))?;
        ensure(ok(read_pfm(&write_pfm(&d)))? == d, || "pfm".into())?;
        let f = random_flow(&mut r, w, h, 50.0);
        ensure(ok(read_flo(&write_flo(&f)))? == f, || "flo".into())?;
        let img = ok(Frame::new(w, h, (0..w * h * 3).map(|_| r.gen::<u16>() as f32 / 65535.0).collect()))?;
        ensure(ok(read_png_frame(&ok(write_png_frame(&img))?))? == img, || "png frame".into())?;
        let m = random_mask(&mut r, w, h);
        ensure(ok(read_png_mask(&ok(write_png_mask(&m))?))? == m, || "png mask".into())?;
        let t = ok(LatentTensor::from_fn([1, 2, h, w], |_| r.gen_range(-4.0f32..4.0) as f64))?;
        ensure(ok(LatentTensor::from_bytes(&t.to_bytes()))? == t, || "tensor".into())?;
    }
    Ok(())
}

fn check_codec_errors(_: &Options) -> Result<(), String> {
    let name = |e: stereogen::Error| e.to_string().split(':').next().unwrap_or_default().to_string();
    let expect = |got: stereogen::Error, want: &str| ensure(name(got.clone()) == want, || format!("got `{got}`, want {want}"));
    expect(read_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0").unwrap_err(), "unsupported-pfm-kind")?;
    expect(read_pfm(b"P5\n1 1\n").unwrap_err(), "malformed-pfm-header")?;
    let mut flo = write_flo(&ok(FlowField::zeros(1, 1))?);
    flo[..4].copy_from_slice(&0f32.to_le_bytes());
    expect(read_flo(&flo).unwrap_err(), "bad-flo-magic")?;
    expect(read_flo(&write_flo(&ok(FlowField::zeros(2, 2))?)[..20]).unwrap_err(), "truncated-payload")?;
    let gray = ok(write_png_frame(&ok(Frame::filled(1, 1, [0.5; 3]))?))?;
    expect(read_png_mask(&gray).unwrap_err(), "unsupported-png-format")?;
    expect(LatentTensor::from_bytes(&[0; 8]).unwrap_err(), "bad-tensor-header")
}

fn check_compose(opts: &Options) -> Result<(), String> {
    let mut r = rng(opts, 0xc09);
    let l = ok(VideoClip::new((0..2).map(|_| random_frame(&mut r, 5, 4)).collect()))?;
    let rt = ok(VideoClip::new((0..2).map(|_| random_frame(&mut r, 5, 4)).collect()))?;
    let sbs = ok(crate::commands::compose(&l, &rt, crate::commands::ComposeMode::Sbs))?;
    ensure(sbs.width() == 10, || "side-by-side width".into())?;
    let ana = ok(crate::commands::compose(&l, &rt, crate::commands::ComposeMode::Anaglyph))?;
    for (a, f) in ana.frames().iter().zip(l.frames()) {
        for y in 0..4 {
            for x in 0..5 {
                ensure(a.pixel(x, y)[0].to_bits() == f.pixel(x, y)[0].to_bits(), || "red channel".into())?;
            }
        }
    }
    let same = ok(crate::commands::compose(&l, &l, crate::commands::ComposeMode::Anaglyph))?;
    ensure(same == l, || "anaglyph of identical clips".into())
}

macro_rules! checks {
    ($($name:literal, $tol:literal => $f:ident;)*) => {
        vec![$(Check { name: $name, tolerance: $tol, run: $f }),*]
    };
}

impl Check {
    pub fn run(&self, opts: &Options) -> Outcome {
        let error = match catch_unwind(AssertUnwindSafe(|| (self.run)(opts))) {
            Ok(Ok(())) => None,
            Ok(Err(e)) => Some(e),
            Err(_) => Some("panicked".to_string()),
        };
        Outcome {
            name: self.name,
            tolerance: self.tolerance,
            error,
        }
    }
}

/// Looks a check up by its printed name.
pub fn find(name: &str) -> Option<Check> {
    all_checks().into_iter().find(|c| c.name == name)
}

pub fn all_checks() -> Vec<Check> {
    checks![
        "splat.identity_warp", "bit-exact" => check_splat_identity;
        "splat.oracle", "1e-9 weights, exact f32 colour, 100 cases" => check_splat_oracle;
        "splat.weight_conservation", "1e-6" => check_weight_conservation;
        "zbuffer.oracle", "1e-9 weights, exact f32 colour, 100 cases" => check_zbuffer_oracle;
        "zbuffer.nearest_wins", "exact" => check_zbuffer_nearest;
        "confidence.oracle", "exact, 100 cases" => check_confidence_oracle;
        "refine.oracle", "exact, 100 cases" => check_refine_oracle;
        "refine.truth_table", "exact" => check_refine_truth_table;
        "refine.monotone_idempotent", "exact, 1000 cases" => check_refine_monotone;
        "hole_fill.identity_and_hull", "exact" => check_hole_fill;
        "dvg.round_trip_psnr", ">= 40 dB on co-visible pixels" => check_round_trip;
        "dvg.flicker_reduction", ">= 50% fewer flicker pixels" => check_flicker;
        "diffusion.clean_estimate_inverse", "1e-5 max abs" => check_diffusion_inverse;
        "diffusion.schedule", "strictly decreasing, 1e-12" => check_schedule;
        "diffusion.gradient_fd", "1e-4 relative, 100 cases" => check_gradient;
        "diffusion.exact_prediction", "exact zero" => check_exact_prediction;
        "diffusion.deviation_strength", "1e-12, 1000 cases" => check_deviation_strength;
        "attention.oracle", "1e-9, 100 cases" => check_attention_oracle;
        "attention.softmax_rows", "1e-6" => check_softmax_rows;
        "attention.til_endpoints_affine", "exact endpoints, 1e-6 affine" => check_til;
        "attention.til_permutation", "exact, every order of 1 to 4 neighbours" => check_til_permutation;
        "attention.spatial_concat_oracle", "1e-9, 100 cases" => check_spatial_oracle;
        "metrics.psnr_ssim_oracle", "1e-9, 100 cases" => check_metric_oracles;
        "metrics.warp_oracle", "1e-9, 100 cases" => check_warp_oracle;
        "metrics.sanity", "exact / 1e-6" => check_metric_sanity;
        "codecs.round_trip", "lossless, 200 rounds" => check_codec_round_trip;
        "codecs.error_names", "exact" => check_codec_errors;
        "compose.modes", "bit-exact" => check_compose;
    ]
}

pub fn run(opts: &Options) -> Vec<Outcome> {
    all_checks().iter().map(|c| c.run(opts)).collect()
}

/// Runs every check, printing one line each. Fails if any check fails.
pub fn cmd_selfcheck(opts: &Options, out: &mut dyn Write) -> CliResult<Vec<Outcome>> {
    let outcomes = run(opts);
    let io = |e| CliError::Input(format!("writing report: {e}"));
    for o in &outcomes {
        match &o.error {
            None => writeln!(out, "PASS  {:<34} [{}]", o.name, o.tolerance),
            Some(e) => writeln!(out, "FAIL  {:<34} [{}]  {e}", o.name, o.tolerance),
        }
        .map_err(io)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    writeln!(out, "{} checks, {} passed, {} failed (seed {})", outcomes.len(), outcomes.len() - failed, failed, opts.seed)
        .map_err(io)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed {
            failed,
            total: outcomes.len(),
        });
    }
    Ok(outcomes)
}
