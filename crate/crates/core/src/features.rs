//! Morphological cleanup and energy features of error maps.

use crate::auth::ErrorMapSet;
use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Window side used for all feature morphology.
pub const WINDOW: usize = 5;

#[derive(Clone, Copy)]
enum Op {
    Min,
    Max,
}

impl Op {
    fn apply(self, a: u8, b: u8) -> u8 {
        match self {
            Op::Min => a.min(b),
            Op::Max => a.max(b),
        }
    }
}

/// One-dimensional running min/max over `len` samples spaced by `stride`,
/// replicating the edge samples.
fn filter_line(
    src: &[u8],
    dst: &mut [u8],
    start: usize,
    len: usize,
    stride: usize,
    r: usize,
    op: Op,
) {
    for i in 0..len {
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(len - 1);
        let mut acc = src[start + lo * stride];
        for k in lo + 1..=hi {
            acc = op.apply(acc, src[start + k * stride]);
        }
        dst[start + i * stride] = acc;
    }
}

fn square_filter(map: &GrayImage, w: usize, op: Op) -> Result<GrayImage> {
    if w.is_multiple_of(2) {
        return Err(Error::domain(format!("window side must be odd, got {w}")));
    }
    let (width, height) = map.dims();
    if width == 0 || height == 0 {
        return Ok(map.clone());
    }
    let r = w / 2;
    // Clamped indices already replicate the edge: min/max over a window
    // that hangs off the border equals min/max over its in-bounds part.
    let mut tmp = vec![0u8; width * height];
    for y in 0..height {
        filter_line(map.samples(), &mut tmp, y * width, width, 1, r, op);
    }
    let mut out = vec![0u8; width * height];
    for x in 0..width {
        filter_line(&tmp, &mut out, x, height, width, r, op);
    }
    GrayImage::new(width, height, out)
}

/// Minimum over the `w`x`w` neighborhood.
pub fn erode(map: &GrayImage, w: usize) -> Result<GrayImage> {
    square_filter(map, w, Op::Min)
}

/// Maximum over the `w`x`w` neighborhood.
pub fn dilate(map: &GrayImage, w: usize) -> Result<GrayImage> {
    square_filter(map, w, Op::Max)
}

/// Erosion, dilation, dilation, erosion with a 5x5 window.
pub fn edde5(map: &GrayImage) -> GrayImage {
    let step = |m: &GrayImage, op| square_filter(m, WINDOW, op).expect("odd window");
    let m = step(map, Op::Min);
    let m = step(&m, Op::Max);
    let m = step(&m, Op::Max);
    step(&m, Op::Min)
}

/// Mean squared pixel value.
pub fn energy(map: &GrayImage) -> Result<f64> {
    let n = map.samples().len();
    if n == 0 {
        return Err(Error::domain("energy of an empty map"));
    }
    let sum: u64 = map.samples().iter().map(|&p| (p as u64) * (p as u64)).sum();
    Ok(sum as f64 / n as f64)
}

/// Energies `f1..f9` of the error maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; 9]);

impl FeatureVector {
    /// Indices (0-based) of the seven features used for classification:
    /// f1..f6 and f9.
    pub const CLASSIFIER_INDICES: [usize; 7] = [0, 1, 2, 3, 4, 5, 8];

    /// `fi` with 1-based `i`, matching the usual naming.
    pub fn f(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn classifier_input(&self) -> [f64; 7] {
        Self::CLASSIFIER_INDICES.map(|i| self.0[i])
    }
}

pub fn feature_vector(maps: &ErrorMapSet) -> FeatureVector {
    let e = |m: &GrayImage| energy(m).expect("maps are non-empty");
    FeatureVector([
        e(&maps.xw1),
        e(&maps.xw2),
        e(&edde5(&maps.xw1)),
        e(&edde5(&maps.xw2)),
        e(&maps.vmap2),
        e(&edde5(&maps.vmap2)),
        e(&maps.vmap1),
        e(&edde5(&maps.vmap1)),
        e(&edde5(&maps.xw_comb)),
    ])
}
