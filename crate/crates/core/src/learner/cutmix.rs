//! Cutmix: paste a rectangle from a partner image, mix labels by area.
//!
//! The box keeps the aspect ratio of the image (`h·√(1−λ)` by `w·√(1−λ)`,
//! floored to whole pixels) and is placed uniformly so that it lies entirely
//! inside the image; the label weight is then recomputed from the exact box
//! area.

use ndarray::{Array2, ArrayViewMut2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::ImageShape;

/// Half-open pixel rectangle `[y0, y1) × [x0, x1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CutBox {
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl CutBox {
    pub fn area(&self) -> usize {
        (self.y1 - self.y0) * (self.x1 - self.x0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutmixDraw {
    /// Weight of each image's own label, `1 − box area / image area`.
    pub lambda: f64,
    pub cut: CutBox,
    /// `partners[i]` supplies the pasted region of image `i`.
    pub partners: Vec<usize>,
}

impl CutmixDraw {
    /// Builds the box for a raw mixing weight `lambda` and recomputes the
    /// weight from the quantised box.
    pub fn with_lambda<R: Rng + ?Sized>(
        lambda: f64,
        shape: ImageShape,
        partners: Vec<usize>,
        rng: &mut R,
    ) -> Self {
        let ratio = (1.0 - lambda.clamp(0.0, 1.0)).sqrt();
        let ch = ((shape.height as f64 * ratio).floor() as usize).min(shape.height);
        let cw = ((shape.width as f64 * ratio).floor() as usize).min(shape.width);
        let y0 = rng.random_range(0..=shape.height - ch);
        let x0 = rng.random_range(0..=shape.width - cw);
        let cut = CutBox {
            y0,
            x0,
            y1: y0 + ch,
            x1: x0 + cw,
        };
        let lambda = 1.0 - cut.area() as f64 / (shape.height * shape.width) as f64;
        CutmixDraw {
            lambda,
            cut,
            partners,
        }
    }
}

/// With probability `p` draws `λ ~ Beta(α, α)`, a random partner permutation and
/// a box; otherwise `None`.
pub fn draw_cutmix<R: Rng + ?Sized>(
    batch_len: usize,
    shape: ImageShape,
    p: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<Option<CutmixDraw>> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::TrainConfig("cutmix alpha must be positive".into()));
    }
    if rng.random::<f64>() >= p {
        return Ok(None);
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::TrainConfig(e.to_string()))?;
    let lambda = beta.sample(rng);
    let mut partners: Vec<usize> = (0..batch_len).collect();
    partners.shuffle(rng);
    Ok(Some(CutmixDraw::with_lambda(lambda, shape, partners, rng)))
}

/// Applies `draw` in place to a `batch × (h·w·c)` row-major image batch and its
/// `batch × classes` target distributions.
pub fn apply_cutmix<T: Scalar>(
    mut batch: ArrayViewMut2<'_, T>,
    mut targets: ArrayViewMut2<'_, T>,
    shape: ImageShape,
    draw: &CutmixDraw,
) -> Result<()> {
    let n = batch.nrows();
    if batch.ncols() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            actual: batch.ncols(),
        });
    }
    if draw.partners.len() != n || targets.nrows() != n {
        return Err(Error::Shape(format!(
            "cutmix draw for {} images applied to {n}",
            draw.partners.len()
        )));
    }
    let source: Array2<T> = batch.to_owned();
    let source_targets: Array2<T> = targets.to_owned();
    let c = shape.channels;
    let CutBox { y0, x0, y1, x1 } = draw.cut;
    for (i, &j) in draw.partners.iter().enumerate() {
        for y in y0..y1 {
            let lo = (y * shape.width + x0) * c;
            let hi = (y * shape.width + x1) * c;
            for k in lo..hi {
                batch[[i, k]] = source[[j, k]];
            }
        }
    }
    let lam = T::of(draw.lambda);
    let rest = T::one() - lam;
    for (i, &j) in draw.partners.iter().enumerate() {
        for k in 0..targets.ncols() {
            targets[[i, k]] = lam * source_targets[[i, k]] + rest * source_targets[[j, k]];
        }
    }
    Ok(())
}

/// Draws and applies cutmix. Non-image inputs (`shape == None`) are rejected.
pub fn cutmix_apply<T: Scalar, R: Rng + ?Sized>(
    batch: ArrayViewMut2<'_, T>,
    targets: ArrayViewMut2<'_, T>,
    shape: Option<ImageShape>,
    p: f64,
    alpha: f64,
    rng: &mut R,
) -> Result<Option<CutmixDraw>> {
    let shape = shape.ok_or_else(|| Error::NotAnImage {
        codec: "cutmix".into(),
    })?;
    let draw = draw_cutmix(batch.nrows(), shape, p, alpha, rng)?;
    if let Some(d) = &draw {
        apply_cutmix(batch, targets, shape, d)?;
    }
    Ok(draw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use ndarray::array;
    use proptest::prelude::*;

    fn batch() -> (Array2<f32>, Array2<f32>) {
        let x = Array2::from_shape_fn((3, 16), |(i, k)| (i * 100 + k) as f32);
        let t = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        (x, t)
    }

    const SHAPE: ImageShape = ImageShape {
        height: 4,
        width: 4,
        channels: 1,
    };

    #[test]
    fn lambda_one_is_identity() {
        let (mut x, mut t) = batch();
        let (x0, t0) = (x.clone(), t.clone());
        let d = CutmixDraw::with_lambda(1.0, SHAPE, vec![2, 0, 1], &mut derive_rng(0, "c"));
        assert_eq!(d.cut.area(), 0);
        apply_cutmix(x.view_mut(), t.view_mut(), SHAPE, &d).unwrap();
        assert_eq!((x, t), (x0, t0));
    }

    #[test]
    fn lambda_zero_swaps_everything() {
        let (mut x, mut t) = batch();
        let (x0, t0) = (x.clone(), t.clone());
        let partners = vec![2, 0, 1];
        let d = CutmixDraw::with_lambda(0.0, SHAPE, partners.clone(), &mut derive_rng(0, "c"));
        assert_eq!(d.lambda, 0.0);
        apply_cutmix(x.view_mut(), t.view_mut(), SHAPE, &d).unwrap();
        for (i, &j) in partners.iter().enumerate() {
            assert_eq!(x.row(i), x0.row(j));
            assert_eq!(t.row(i), t0.row(j));
        }
    }

    #[test]
    fn box_respects_channels() {
        let shape = ImageShape::new(2, 2, 3);
        let mut x = Array2::from_shape_fn((2, 12), |(i, k)| (i * 100 + k) as f32);
        let mut t = array![[1.0, 0.0], [0.0, 1.0]];
        let d = CutmixDraw {
            lambda: 0.75,
            cut: CutBox {
                y0: 1,
                x0: 1,
                y1: 2,
                x1: 2,
            },
            partners: vec![1, 0],
        };
        apply_cutmix(x.view_mut(), t.view_mut(), shape, &d).unwrap();
        assert_eq!(
            x.row(0).to_vec(),
            vec![0., 1., 2., 3., 4., 5., 6., 7., 8., 109., 110., 111.]
        );
        assert_eq!(t.row(0).to_vec(), vec![0.75, 0.25]);
    }

    #[test]
    fn probability_zero_never_mixes() {
        let (mut x, mut t) = batch();
        let x0 = x.clone();
        let mut rng = derive_rng(1, "c");
        for _ in 0..50 {
            let d =
                cutmix_apply(x.view_mut(), t.view_mut(), Some(SHAPE), 0.0, 1.0, &mut rng).unwrap();
            assert!(d.is_none());
        }
        assert_eq!(x, x0);
    }

    #[test]
    fn vectors_are_rejected() {
        let (mut x, mut t) = batch();
        let r = cutmix_apply(
            x.view_mut(),
            t.view_mut(),
            None,
            0.5,
            1.0,
            &mut derive_rng(0, "c"),
        );
        assert!(matches!(r, Err(Error::NotAnImage { .. })));
    }

    #[test]
    fn uniform_beta_mean() {
        let mut rng = derive_rng(2, "beta");
        let beta = Beta::new(1.0, 1.0).unwrap();
        let mean = (0..10_000).map(|_| beta.sample(&mut rng)).sum::<f64>() / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "mean {mean}");
    }

    proptest! {
        #[test]
        fn labels_stay_distributions(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
            let shape = ImageShape::new(h, w, 1);
            let mut rng = derive_rng(seed, "cutmix");
            let mut x = Array2::<f32>::zeros((5, h * w));
            let mut t = Array2::<f32>::zeros((5, 4));
            for i in 0..5 {
                t[[i, i % 4]] = 1.0;
            }
            if let Some(d) = cutmix_apply(x.view_mut(), t.view_mut(), Some(shape), 1.0, 1.0, &mut rng).unwrap() {
                let frac = d.cut.area() as f64 / (h * w) as f64;
                prop_assert!((1.0 - frac - d.lambda).abs() < 1e-12);
                prop_assert!(d.cut.y1 <= h && d.cut.x1 <= w);
            }
            for row in t.rows() {
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.sum() - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn quantised_area_within_one_pixel(lambda in 0.0f64..=1.0, h in 1usize..40, w in 1usize..40) {
            let shape = ImageShape::new(h, w, 1);
            let d = CutmixDraw::with_lambda(lambda, shape, vec![0], &mut derive_rng(0, "q"));
            let r = (1.0 - lambda).sqrt();
            let exact = (h as f64 * r) * (w as f64 * r);
            let got = d.cut.area() as f64;
            // flooring each side loses less than one row plus one column
            prop_assert!(got <= exact + 1e-9);
            prop_assert!(exact - got < (h + w) as f64);
        }
    }
}
