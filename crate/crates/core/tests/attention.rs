use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereogen::attention::{
    attention_weights, attn, spatial_concat_attention, til_augment, AttentionWeights, FeatureMap,
};
use stereogen_oracle as oracle;

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap {
    FeatureMap::new(h, w, c, (0..h * w * c).map(|_| rng.gen_range(-1.5..1.5)).collect()).unwrap()
}

fn random_weights(rng: &mut ChaCha8Rng, c: usize) -> AttentionWeights {
    let mut m = || (0..c * c).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    AttentionWeights::new(c, m(), m(), m()).unwrap()
}

fn tokens(m: &FeatureMap) -> Vec<Vec<f64>> {
    (0..m.tokens()).map(|i| m.token(i).to_vec()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let c = rng.gen_range(1..5);
        let a = random_map(&mut rng, 3, 2, c);
        let b = random_map(&mut rng, 2, 4, c);
        let w = random_weights(&mut rng, c);
        for row in attention_weights(&a, &b, &w).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn attn_and_spatial_concat_match_token_loops() {
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4));
        let a = random_map(&mut rng, h, w, c);
        let b = random_map(&mut rng, h, w, c);
        let wt = random_weights(&mut rng, c);
        let got = attn(&a, &b, &wt).unwrap();
        let expected = oracle::attention(&tokens(&a), &tokens(&b), wt.query(), wt.key(), wt.value());
        assert!(max_diff(got.data(), &expected.concat()) <= 1e-9, "seed {seed}");
        let got = spatial_concat_attention(&a, &b, &wt).unwrap();
        assert_eq!(got.shape(), a.shape());
        let expected = oracle::spatial_concat(&tokens(&a), &tokens(&b), wt.query(), wt.key(), wt.value());
        assert!(max_diff(got.data(), &expected.concat()) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn attn_ignores_key_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_map(&mut rng, 2, 3, 3);
    let b = random_map(&mut rng, 2, 3, 3);
    let wt = random_weights(&mut rng, 3);
    let base = attn(&a, &b, &wt).unwrap();
    let perm = [4usize, 0, 5, 2, 1, 3];
    let shuffled: Vec<f64> = perm.iter().flat_map(|&i| b.token(i).to_vec()).collect();
    let b2 = FeatureMap::new(2, 3, 3, shuffled).unwrap();
    assert!(max_diff(base.data(), attn(&a, &b2, &wt).unwrap().data()) <= 1e-12);
}

#[test]
fn duplicated_input_gives_bottom_half_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let z = random_map(&mut rng, 2, 2, 1);
    let wt = random_weights(&mut rng, 1);
    let stacked = z.concat_height(&z).unwrap();
    let full = oracle::attention(&tokens(&stacked), &tokens(&stacked), wt.query(), wt.key(), wt.value());
    let bottom: Vec<f64> = full[z.tokens()..].concat();
    let got = spatial_concat_attention(&z, &z, &wt).unwrap();
    assert!(max_diff(got.data(), &bottom) <= 1e-12);
}

#[test]
fn channel_permutation_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c = 3;
    let perm = [2usize, 0, 1];
    let a = random_map(&mut rng, 2, 2, c);
    let b = random_map(&mut rng, 2, 2, c);
    let wt = random_weights(&mut rng, c);
    let pmap = |m: &FeatureMap| {
        let d = (0..m.tokens()).flat_map(|t| perm.iter().map(move |&k| m.token(t)[k])).collect();
        FeatureMap::new(2, 2, c, d).unwrap()
    };
    let pmat = |w: &[f64]| -> Vec<f64> {
        (0..c * c).map(|i| w[perm[i / c] * c + perm[i % c]]).collect()
    };
    let wp = AttentionWeights::new(c, pmat(wt.query()), pmat(wt.key()), pmat(wt.value())).unwrap();
    let base = spatial_concat_attention(&a, &b, &wt).unwrap();
    let moved = spatial_concat_attention(&pmap(&a), &pmap(&b), &wp).unwrap();
    assert!(max_diff(pmap(&base).data(), moved.data()) <= 1e-12);
}

#[test]
fn til_endpoints_affinity_and_neighbor_order() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let c = rng.gen_range(1..=4);
        let zr = random_map(&mut rng, 2, 3, c);
        let wt = random_weights(&mut rng, c);
        let nbrs: Vec<FeatureMap> = (0..4).map(|_| random_map(&mut rng, 2, 3, c)).collect();

        let one = til_augment(&zr, &nbrs, 1.0, &wt).unwrap();
        assert_eq!(one, attn(&zr, &zr, &wt).unwrap());

        let q = random_map(&mut rng, 2, 3, c);
        let same = vec![q.clone(); 3];
        assert_eq!(til_augment(&zr, &same, 0.0, &wt).unwrap(), attn(&zr, &q, &wt).unwrap());

        let zero = til_augment(&zr, &nbrs, 0.0, &wt).unwrap();
        for lam in [0.1, 0.37, 0.6, 0.95] {
            let mid = til_augment(&zr, &nbrs, lam, &wt).unwrap();
            let blend: Vec<f64> = one
                .data()
                .iter()
                .zip(zero.data())
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            assert!(max_diff(mid.data(), &blend) <= 1e-6);
        }

        let base = til_augment(&zr, &nbrs, 0.6, &wt).unwrap();
        for_each_permutation(4, &mut |p| {
            let shuffled: Vec<FeatureMap> = p.iter().map(|&i| nbrs[i].clone()).collect();
            assert_eq!(til_augment(&zr, &shuffled, 0.6, &wt).unwrap(), base);
        });
    }
}

fn for_each_permutation(n: usize, f: &mut dyn FnMut(&[usize])) {
    fn go(prefix: &mut Vec<usize>, n: usize, f: &mut dyn FnMut(&[usize])) {
        if prefix.len() == n {
            f(prefix);
            return;
        }
        for i in 0..n {
            if !prefix.contains(&i) {
                prefix.push(i);
                go(prefix, n, f);
                prefix.pop();
            }
        }
    }
    go(&mut Vec::new(), n, f);
}
