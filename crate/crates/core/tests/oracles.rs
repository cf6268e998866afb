mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use rehearsal::codecs::{make_projection, resize_bilinear};
use rehearsal::learner::softmax;
use rehearsal::{class_quota, derive_rng, ImageShape, ImageU8};

use common::{max_gradient_rel_error, naive_forward, naive_resize, random_model};

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> ImageU8 {
    let mut rng = derive_rng(seed, "image");
    let data = (0..h * w * c).map(|_| rng.random::<u8>()).collect();
    ImageU8::new(ImageShape::new(h, w, c), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn resize_matches_naive_oracle(
        h in 1usize..=16, w in 1usize..=16, c in 1usize..=3,
        th in 1usize..=16, tw in 1usize..=16, seed in any::<u64>(),
    ) {
        let img = random_image(h, w, c, seed);
        let out = resize_bilinear(&img, th, tw).unwrap();
        prop_assert_eq!(out.shape(), ImageShape::new(th, tw, c));
        prop_assert_eq!(out.data(), &naive_resize(&img, th, tw)[..]);
    }

    #[test]
    fn same_size_resize_is_identity(h in 1usize..=16, w in 1usize..=16, c in 1usize..=3, seed in any::<u64>()) {
        let img = random_image(h, w, c, seed);
        prop_assert_eq!(resize_bilinear(&img, h, w).unwrap(), img);
    }
}

#[test]
fn resize_on_mnist_sized_input_matches_oracle() {
    for (seed, t) in [(0, 8), (1, 1), (2, 27), (3, 2)] {
        let img = random_image(28, 28, 1, seed);
        assert_eq!(
            resize_bilinear(&img, t, t).unwrap().data(),
            &naive_resize(&img, t, t)[..]
        );
    }
}

#[test]
fn projection_rows_orthonormal_over_random_shapes() {
    let mut rng = derive_rng(7, "shapes");
    for i in 0..100 {
        let n = rng.random_range(1..=512usize);
        let m = rng.random_range(1..=n);
        let q = make_projection::<f32>(n, m, i).unwrap();
        assert!(
            q.orthonormality_error() < 1e-5,
            "n={n} m={m}: {}",
            q.orthonormality_error()
        );
    }
}

#[test]
fn projected_norm_ratio_concentrates_near_sqrt_m_over_n() {
    let (n, m) = (784, 128);
    let expected = (m as f64 / n as f64).sqrt();
    let q = make_projection::<f64>(n, m, 11).unwrap();
    let mut rng = derive_rng(3, "pairs");
    let mut ratios = Vec::new();
    for _ in 0..300 {
        let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let pd = q.project(&d).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        ratios.push(norm(&pd) / norm(&d));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(
        (mean / expected - 1.0).abs() < 0.05,
        "mean ratio {mean} vs {expected}"
    );
    for r in &ratios {
        assert!((r / expected - 1.0).abs() < 0.25, "ratio {r} vs {expected}");
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.outer_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn forward_matches_loop_oracle() {
    for seed in 0..10 {
        let model = random_model(7, 9, 4, seed);
        let mut rng = derive_rng(seed, "x");
        let x = Array2::from_shape_fn((5, 7), |_| rng.sample::<f64, _>(StandardNormal));
        let logits = model.forward(x.view()).unwrap();
        let f32_logits = model
            .cast::<f32>()
            .forward(x.mapv(|v| v as f32).view())
            .unwrap();
        for (r, row) in x.outer_iter().enumerate() {
            let want = naive_forward(
                &rows(model.w1()),
                &model.b1().to_vec(),
                &rows(model.w2()),
                &model.b2().to_vec(),
                &row.to_vec(),
            );
            for (k, w) in want.iter().enumerate() {
                assert!((logits[[r, k]] - w).abs() < 1e-12 * (1.0 + w.abs()));
                assert!((f64::from(f32_logits[[r, k]]) - w).abs() < 1e-4 * (1.0 + w.abs()));
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let worst = max_gradient_rel_error(20);
    assert!(worst < 1e-4, "max relative gradient error {worst}");
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = derive_rng(5, "logits");
    let logits = Array2::from_shape_fn((200, 10), |_| rng.sample::<f32, _>(StandardNormal) * 30.0);
    for row in softmax(logits.view()).outer_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-6);
        assert!(row.iter().all(|p| *p >= 0.0));
    }
}

#[test]
fn quota_matches_brute_force() {
    for m in 1..=50usize {
        for classes in 1..=5usize {
            // largest per-class share that fits classes times into m
            let mut q = 0;
            while (q + 1) * classes <= m {
                q += 1;
            }
            assert_eq!(class_quota(m, classes), q, "m={m} classes={classes}");
        }
    }
}
