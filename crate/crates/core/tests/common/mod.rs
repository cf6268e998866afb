#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use rehearsal::codecs::{make_projection, resize_bilinear};
use rehearsal::learner::{apply_cutmix, draw_cutmix, softmax, CutmixDraw, MlpModel};
use rehearsal::sweep::ExperimentConfig;
use rehearsal::{
    class_quota, derive_rng, ByteBudget, ClassId, ImageShape, ImageU8, Instance, Payload,
    ReplayBuffer,
};

/// Per-pixel bilinear sample evaluated straight from the coordinate formula.
pub fn naive_resize(img: &ImageU8, th: usize, tw: usize) -> Vec<u8> {
    let s = img.shape();
    let mut out = Vec::new();
    for y in 0..th {
        for x in 0..tw {
            for c in 0..s.channels {
                let sy = ((y as f32 + 0.5) * (s.height as f32 / th as f32) - 0.5)
                    .max(0.0)
                    .min((s.height - 1) as f32);
                let sx = ((x as f32 + 0.5) * (s.width as f32 / tw as f32) - 0.5)
                    .max(0.0)
                    .min((s.width - 1) as f32);
                let y0 = sy as usize;
                let x0 = sx as usize;
                let y1 = if y0 + 1 < s.height { y0 + 1 } else { y0 };
                let x1 = if x0 + 1 < s.width { x0 + 1 } else { x0 };
                let wy = sy - y0 as f32;
                let wx = sx - x0 as f32;
                let px =
                    |yy: usize, xx: usize| img.data()[(yy * s.width + xx) * s.channels + c] as f32;
                let top = (1.0 - wx) * px(y0, x0) + wx * px(y0, x1);
                let bot = (1.0 - wx) * px(y1, x0) + wx * px(y1, x1);
                let v = (1.0 - wy) * top + wy * bot;
                // round half away from zero, spelled out
                let r = if v >= 0.0 {
                    (v + 0.5).floor()
                } else {
                    (v - 0.5).ceil()
                };
                out.push(r.clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Logits by explicit loops over plain vectors.
pub fn naive_forward(
    w1: &[Vec<f64>],
    b1: &[f64],
    w2: &[Vec<f64>],
    b2: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let hidden: Vec<f64> = w1
        .iter()
        .zip(b1)
        .map(|(row, b)| {
            let mut acc = *b;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            acc.max(0.0)
        })
        .collect();
    w2.iter()
        .zip(b2)
        .map(|(row, b)| {
            let mut acc = *b;
            for (w, h) in row.iter().zip(&hidden) {
                acc += w * h;
            }
            acc
        })
        .collect()
}

pub fn image_instance(id: u64, class: u32, shape: ImageShape, data: Vec<u8>) -> Instance {
    Instance::new(id, ClassId(class), Payload::image(shape, data).unwrap()).unwrap()
}

pub fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn mnist_available() -> bool {
    mnist_dir()
        .join(rehearsal::data::MNIST_TRAIN_IMAGES)
        .exists()
}

pub fn random_model(input: usize, hidden: usize, classes: usize, seed: u64) -> MlpModel<f64> {
    let mut rng = derive_rng(seed, "model");
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.7)
            .collect()
    };
    MlpModel::from_parts(
        Array2::from_shape_vec((hidden, input), draw(hidden * input)).unwrap(),
        Array1::from(draw(hidden)),
        Array2::from_shape_vec((classes, hidden), draw(classes * hidden)).unwrap(),
        Array1::from(draw(classes)),
    )
    .unwrap()
}

/// Worst relative error between analytic gradients and f64 central
/// differences over `models` random 6-5-3 networks.
pub fn max_gradient_rel_error(models: u64) -> f64 {
    let eps = 1e-4;
    let mut worst = 0.0f64;
    for seed in 0..models {
        let (input, hidden, classes, batch) = (6, 5, 3, 4);
        let model = random_model(input, hidden, classes, 100 + seed);
        let mut rng = derive_rng(seed, "batch");
        let x = Array2::from_shape_fn((batch, input), |_| rng.sample::<f64, _>(StandardNormal));
        let mut t = Array2::<f64>::zeros((batch, classes));
        for r in 0..batch {
            // alternate one-hot and soft targets
            if r % 2 == 0 {
                t[[r, rng.random_range(0..classes)]] = 1.0;
            } else {
                let raw: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 0.1).collect();
                let s: f64 = raw.iter().sum();
                for k in 0..classes {
                    t[[r, k]] = raw[k] / s;
                }
            }
        }
        let (_, grads) = model.loss_and_grad(x.view(), t.view()).unwrap();
        let base = model.to_flat();
        for (i, a) in grads.to_flat().iter().enumerate() {
            let mut probe = model.clone();
            let mut p = base.clone();
            p[i] = base[i] + eps;
            probe.set_flat(&p).unwrap();
            let (up, _) = probe.loss_and_grad(x.view(), t.view()).unwrap();
            p[i] = base[i] - eps;
            probe.set_flat(&p).unwrap();
            let (down, _) = probe.loss_and_grad(x.view(), t.view()).unwrap();
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6));
        }
    }
    worst
}

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Budget after every offer, spread at task ends, floor/ceil end state and
/// the quota formula on every small enumeration.
pub fn check_buffer() -> Check {
    for m in 1..=50usize {
        for classes in 1..=5usize {
            let brute = (0..=m).rev().find(|q| q * classes <= m).unwrap();
            ensure(class_quota(m, classes) == brute, || {
                format!("quota({m}, {classes})")
            })?;
            for per_task in (1..=classes).filter(|p| classes % p == 0) {
                let mut b = ReplayBuffer::new(ByteBudget::new(m * 4).unwrap(), 4).unwrap();
                let mut rng = derive_rng(m as u64, "offers");
                let mut id = 0;
                for task in 0..classes / per_task {
                    let mut stream = Vec::new();
                    for c in 0..per_task {
                        for _ in 0..m + 2 {
                            let class = (task * per_task + c) as u32;
                            stream.push(image_instance(
                                id,
                                class,
                                ImageShape::new(2, 2, 1),
                                vec![0; 4],
                            ));
                            id += 1;
                        }
                    }
                    use rand::seq::SliceRandom;
                    stream.shuffle(&mut rng);
                    for inst in stream {
                        b.offer(inst, &mut rng).map_err(|e| e.to_string())?;
                        ensure(b.stored_bytes() <= m * 4, || {
                            format!("budget exceeded at m={m}")
                        })?;
                    }
                    let counts = b.counts();
                    let hi = counts.values().max().unwrap();
                    let lo = counts.values().min().unwrap();
                    ensure(hi - lo <= 1, || {
                        format!("m={m} classes={classes}: counts {counts:?}")
                    })?;
                }
            }
        }
    }
    Ok(())
}

pub fn check_projection() -> Check {
    let mut rng = derive_rng(17, "shapes");
    for i in 0..100 {
        let n = rng.random_range(1..=512usize);
        let m = rng.random_range(1..=n);
        let err = make_projection::<f32>(n, m, i)
            .unwrap()
            .orthonormality_error();
        ensure(err < 1e-5, || {
            format!("n={n} m={m}: |QQt - I|max = {err:e}")
        })?;
    }
    let (n, m) = (784, 128);
    let expected = (m as f64 / n as f64).sqrt();
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let q = make_projection::<f64>(n, m, seed).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        ratios.push(norm(&q.project(&x).unwrap()) / norm(&x));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    ensure((mean / expected - 1.0).abs() < 0.05, || {
        format!("mean norm ratio {mean:.4} vs {expected:.4}")
    })
}

pub fn check_learner() -> Check {
    let worst = max_gradient_rel_error(20);
    ensure(worst < 1e-4, || {
        format!("gradient relative error {worst:e}")
    })?;
    let mut rng = derive_rng(2, "logits");
    let logits = Array2::from_shape_fn((100, 10), |_| rng.sample::<f32, _>(StandardNormal) * 20.0);
    for row in softmax(logits.view()).outer_iter() {
        ensure((row.sum() - 1.0).abs() < 1e-6, || {
            format!("softmax row sums to {}", row.sum())
        })?;
    }
    Ok(())
}

pub fn check_resize() -> Check {
    let mut rng = derive_rng(9, "resize");
    for _ in 0..300 {
        let (h, w, c) = (
            rng.random_range(1..=16),
            rng.random_range(1..=16),
            rng.random_range(1..=3),
        );
        let data = (0..h * w * c).map(|_| rng.random::<u8>()).collect();
        let img = ImageU8::new(ImageShape::new(h, w, c), data).unwrap();
        let (th, tw) = (rng.random_range(1..=16), rng.random_range(1..=16));
        ensure(
            resize_bilinear(&img, th, tw).unwrap().data() == &naive_resize(&img, th, tw)[..],
            || format!("{h}x{w}x{c} -> {th}x{tw} differs from oracle"),
        )?;
        ensure(resize_bilinear(&img, h, w).unwrap() == img, || {
            format!("{h}x{w}x{c} identity resize")
        })?;
    }
    Ok(())
}

pub fn check_cutmix() -> Check {
    let shape = ImageShape::new(6, 5, 2);
    let mut rng = derive_rng(4, "cutmix");
    let x = Array2::from_shape_fn((8, shape.len()), |(i, j)| (i * 100 + j) as f32);
    let mut t = Array2::<f32>::zeros((8, 3));
    for i in 0..8 {
        t[[i, i % 3]] = 1.0;
    }
    let (mut xb, mut tb) = (x.clone(), t.clone());
    let draw = CutmixDraw::with_lambda(1.0, shape, (0..8).rev().collect(), &mut rng);
    apply_cutmix(xb.view_mut(), tb.view_mut(), shape, &draw).unwrap();
    ensure(xb == x && tb == t, || "lambda = 1 changed the batch".into())?;
    for _ in 0..500 {
        let (mut xb, mut tb) = (x.clone(), t.clone());
        if let Some(d) = draw_cutmix(8, shape, 1.0, 1.0, &mut rng).unwrap() {
            apply_cutmix(xb.view_mut(), tb.view_mut(), shape, &d).unwrap();
        }
        for row in tb.outer_iter() {
            ensure(
                row.iter().all(|p| *p >= 0.0) && (row.sum() - 1.0).abs() < 1e-6,
                || format!("soft label {row}"),
            )?;
        }
    }
    let beta = rand_distr::Beta::new(1.0, 1.0).unwrap();
    let mean = (0..10_000).map(|_| rng.sample(beta)).sum::<f64>() / 10_000.0;
    ensure((0.48..=0.52).contains(&mean), || {
        format!("Beta(1,1) mean {mean}")
    })
}

/// Runs the same small sweep twice and compares results.csv byte for byte.
pub fn check_sweep_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let text = |out: &str| {
        format!(
            "[dataset]\nkind = \"synthetic\"\nn_per_class = 20\nsize = 8\nnoise_std = 25.0\n\n\
             [protocol]\nnum_tasks = 2\nclasses_per_task = 2\nbudgets = [\"512B\", \"2KiB\"]\n\
             codecs = [\"identity\", \"resize:4x4\", \"rp:8\"]\nruns = 2\n\n\
             [training]\nmax_epochs = 8\ncutmix_enabled = true\n\n[output]\ndir = \"{}\"\n",
            dir.path().join(out).display()
        )
    };
    let mut files = Vec::new();
    for out in ["a", "b"] {
        let cfg = ExperimentConfig::from_toml(&text(out)).map_err(|e| e.to_string())?;
        rehearsal::sweep::run_sweep(&cfg).map_err(|e| e.to_string())?;
        files.push(
            std::fs::read(dir.path().join(out).join("results.csv")).map_err(|e| e.to_string())?,
        );
    }
    ensure(files[0] == files[1], || {
        "results.csv differs between identical sweeps".into()
    })
}
