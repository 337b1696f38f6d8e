use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereogen::diffusion::{
    combined_loss, deviation_strength, estimate_clean, forward_diffuse, noise_loss, stereo_loss,
    LatentTensor, NoiseSchedule, DEFAULT_LAMBDA_LOSS,
};

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> LatentTensor {
    LatentTensor::from_fn(shape, |_| rng.gen_range(-2.0..2.0)).unwrap()
}

fn random_shape(rng: &mut ChaCha8Rng) -> [usize; 4] {
    [rng.gen_range(1..=2), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4)]
}

#[test]
fn default_schedule_is_strictly_decreasing() {
    let s = NoiseSchedule::default();
    assert_eq!(s.steps(), 1000);
    assert!(s.alpha_bars().windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn clean_estimate_inverts_forward_process() {
    let s = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z0 = random_tensor(&mut rng, [2, 4, 4, 4]);
    let eps = LatentTensor::from_fn([2, 4, 4, 4], |_| rng.gen_range(-3.0..3.0)).unwrap();
    let mut checked = 0;
    for t in 1..=1000 {
        if s.alpha_bar(t).unwrap() < 1e-4 {
            continue;
        }
        let zt = forward_diffuse(&z0, t, &eps, &s).unwrap();
        let back = estimate_clean(&zt, &eps, t, &s).unwrap();
        let err = back.data().iter().zip(z0.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-5, "t = {t}: {err}");
        checked += 1;
    }
    assert!(checked > 900);
}

fn total_at(
    eps: &LatentTensor,
    eps_pred: &LatentTensor,
    zt: &LatentTensor,
    z0: &LatentTensor,
    zref: &LatentTensor,
    t: usize,
    s: &NoiseSchedule,
    lambda: f64,
) -> f64 {
    combined_loss(eps, eps_pred, zt, z0, zref, t, s, lambda).unwrap().total
}

#[test]
fn gradient_matches_central_differences() {
    let s = NoiseSchedule::default();
    let h = 1e-4;
    let mut compared = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = random_shape(&mut rng);
        let z0 = random_tensor(&mut rng, shape);
        let zref = random_tensor(&mut rng, shape);
        let eps = random_tensor(&mut rng, shape);
        let pred = random_tensor(&mut rng, shape);
        let t = rng.gen_range(1..=1000);
        let lambda = if seed % 2 == 0 { DEFAULT_LAMBDA_LOSS } else { rng.gen_range(0.1..5.0) };
        let zt = forward_diffuse(&z0, t, &eps, &s).unwrap();
        let out = combined_loss(&eps, &pred, &zt, &z0, &zref, t, &s, lambda).unwrap();
        let z0_hat = estimate_clean(&zt, &pred, t, &s).unwrap();
        let ab = s.alpha_bar(t).unwrap();
        let dz = ((1.0 - ab) / ab).sqrt();
        for i in 0..pred.len() {
            // the stereo term has a kink where z0_hat meets z_ref
            let gap = (z0_hat.data()[i] - zref.data()[i]).abs();
            if gap <= dz * h + 1e-6 {
                continue;
            }
            let nudge = |d: f64| {
                let mut v = pred.data().to_vec();
                v[i] += d;
                LatentTensor::new(shape, v).unwrap()
            };
            let fd = (total_at(&eps, &nudge(h), &zt, &z0, &zref, t, &s, lambda)
                - total_at(&eps, &nudge(-h), &zt, &z0, &zref, t, &s, lambda))
                / (2.0 * h);
            let an = out.gradient.data()[i];
            if an.abs() <= 1e-8 {
                continue;
            }
            let rel = (fd - an).abs() / an.abs().max(fd.abs());
            assert!(rel <= 1e-4, "seed {seed} elem {i}: analytic {an} vs fd {fd}");
            compared += 1;
        }
    }
    assert!(compared > 1000);
}

#[test]
fn exact_prediction_is_a_zero() {
    let s = NoiseSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = [2, 3, 4, 4];
    let eps = random_tensor(&mut rng, shape);
    let zt = random_tensor(&mut rng, shape);
    let zref = random_tensor(&mut rng, shape);
    let t = 500;
    let z0 = estimate_clean(&zt, &eps, t, &s).unwrap();
    let out = combined_loss(&eps, &eps, &zt, &z0, &zref, t, &s, 0.5).unwrap();
    assert_eq!(out.total, 0.0);
    assert!(out.gradient.data().iter().all(|&g| g == 0.0));
}

#[test]
fn noise_loss_matches_per_element_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = random_tensor(&mut rng, [2, 4, 4, 4]);
    let b = random_tensor(&mut rng, [2, 4, 4, 4]);
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a.data()[i] - b.data()[i]).powi(2);
    }
    assert!((noise_loss(&a, &b).unwrap() - acc / a.len() as f64).abs() <= 1e-10);
}

fn tensor_pair() -> impl Strategy<Value = (LatentTensor, LatentTensor, f64)> {
    (1usize..=3, 1usize..=3, 1usize..=4, 1usize..=4).prop_flat_map(|(f, c, h, w)| {
        let n = f * c * h * w;
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-5.0f64..5.0, n),
            -3.0f64..3.0,
        )
            .prop_map(move |(a, b, k)| {
                (
                    LatentTensor::new([f, c, h, w], a).unwrap(),
                    LatentTensor::new([f, c, h, w], b).unwrap(),
                    k,
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn deviation_strength_properties((a, b, k) in tensor_pair()) {
        let s = deviation_strength(&a, &b).unwrap();
        prop_assert!(s.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(deviation_strength(&b, &a).unwrap(), s.clone());
        prop_assert!(deviation_strength(&a, &a).unwrap().iter().all(|&v| v == 0.0));
        for n in 0..a.frames() {
            let equal = a.frame(n) == b.frame(n);
            prop_assert_eq!(s[n] == 0.0, equal);
        }
        // shifting both by a constant only changes rounding
        let shift = |x: &LatentTensor| LatentTensor::from_fn(x.shape(), |i| x.data()[i] + k).unwrap();
        let moved = deviation_strength(&shift(&a), &shift(&b)).unwrap();
        for (m, o) in moved.iter().zip(&s) {
            prop_assert!((m - o).abs() <= 1e-12 * (1.0 + o.abs()) * 16.0);
        }
    }

    #[test]
    fn losses_are_permutation_equivariant((a, b, _) in tensor_pair(), rot in 0usize..1000) {
        // the same cyclic permutation of elements inside every frame
        let m = a.frame_len();
        let permute = |x: &LatentTensor| {
            LatentTensor::from_fn(x.shape(), |i| {
                let (f, j) = (i / m, i % m);
                x.data()[f * m + (j + rot) % m]
            })
            .unwrap()
        };
        let zref = LatentTensor::from_fn(a.shape(), |i| (i as f64 * 0.37).sin()).unwrap();
        let n1 = noise_loss(&a, &b).unwrap();
        let n2 = noise_loss(&permute(&a), &permute(&b)).unwrap();
        prop_assert!((n1 - n2).abs() <= 1e-12 * (1.0 + n1));
        let s1 = stereo_loss(&a, &b, &zref).unwrap();
        let s2 = stereo_loss(&permute(&a), &permute(&b), &permute(&zref)).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-12 * (1.0 + s1));
        prop_assert!(s1 >= 0.0);
    }
}
