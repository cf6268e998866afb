use crate::error::{Error, Result};
use crate::types::{ImageShape, ImageU8};

/// Source sampling position for one destination index along an axis.
#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f32,
}

fn taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f32 / dst as f32;
    let last = (src - 1) as f32;
    (0..dst)
        .map(|d| {
            let s = ((d as f32 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor() as usize;
            Tap {
                lo,
                hi: (lo + 1).min(src - 1),
                frac: s - lo as f32,
            }
        })
        .collect()
}

/// Bilinear resize with half-pixel centres and edge clamping.
///
/// Interpolation runs in `f32` and rounds half away from zero; the channel
/// count is preserved for every target size.
pub fn resize_bilinear(img: &ImageU8, target_h: usize, target_w: usize) -> Result<ImageU8> {
    if target_h == 0 || target_w == 0 {
        return Err(Error::Shape(format!(
            "resize target {target_h}x{target_w} must be at least 1x1"
        )));
    }
    let src = img.shape();
    let c = src.channels;
    let rows = taps(src.height, target_h);
    let cols = taps(src.width, target_w);
    let mut out = Vec::with_capacity(target_h * target_w * c);
    for ty in &rows {
        let fy = ty.frac;
        for tx in &cols {
            let fx = tx.frac;
            for ch in 0..c {
                let p00 = f32::from(img.at(ty.lo, tx.lo, ch));
                let p01 = f32::from(img.at(ty.lo, tx.hi, ch));
                let p10 = f32::from(img.at(ty.hi, tx.lo, ch));
                let p11 = f32::from(img.at(ty.hi, tx.hi, ch));
                let top = (1.0 - fx) * p00 + fx * p01;
                let bottom = (1.0 - fx) * p10 + fx * p11;
                let v = (1.0 - fy) * top + fy * bottom;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    ImageU8::new(ImageShape::new(target_h, target_w, c), out)
}
