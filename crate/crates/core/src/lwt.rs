//! Two-level Haar lifting transform on 4x4 blocks.
//!
//! Each lifting step splits a pair into even/odd samples, predicts the odd
//! sample from the even one (`d = b - a`), updates the even sample with half
//! the detail (`s = a + d/2`), and finally scales both outputs by
//! [`STEP_GAIN`] (2 to the power 3/8).
//!
//! After four scaled steps `ll_ll` is `2 sqrt 2` times the block mean, so a
//! shift of `delta` in `ll_ll` moves every pixel by `delta / (2 sqrt 2)`.
//! The two detail carriers have analysis vectors of norm `sqrt 2`; a shift of
//! `delta` in one of them moves the block by a zero-mean pixel vector of
//! norm `delta / sqrt 2`.

use crate::error::{Error, Result};

pub type Grid2 = [[f64; 2]; 2];
pub type Block4 = [[f64; 4]; 4];

/// Predict and update steps on one pair, before normalization.
///
/// Returns `(s, d)` with `s` the pair mean and `d` the difference.
pub fn lift_pair(a: f64, b: f64) -> (f64, f64) {
    let d = b - a;
    let s = a + d / 2.0;
    (s, d)
}

/// Inverse of [`lift_pair`].
pub fn unlift_pair(s: f64, d: f64) -> (f64, f64) {
    let a = s - d / 2.0;
    (a, a + d)
}

/// Gain applied to both outputs of every lifting step.
pub const STEP_GAIN: f64 = 1.296_839_554_651_009_6;

#[inline]
fn forward(a: f64, b: f64) -> (f64, f64) {
    let (s, d) = lift_pair(a, b);
    (s * STEP_GAIN, d * STEP_GAIN)
}

#[inline]
fn inverse(s: f64, d: f64) -> (f64, f64) {
    unlift_pair(s / STEP_GAIN, d / STEP_GAIN)
}

/// Level-1 subbands of a 4x4 block.
///
/// `hl` holds horizontal detail (high-pass along rows, low-pass along
/// columns) and `lh` vertical detail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandSet {
    pub ll: Grid2,
    pub hl: Grid2,
    pub lh: Grid2,
    pub hh: Grid2,
}

/// Level-2 low-pass coefficients of the LL, HL and LH subbands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierTriple {
    pub ll_ll: f64,
    pub ll_hl: f64,
    pub ll_lh: f64,
}

impl CarrierTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.ll_ll, self.ll_hl, self.ll_lh]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        CarrierTriple {
            ll_ll: c[0],
            ll_hl: c[1],
            ll_lh: c[2],
        }
    }
}

/// One separable 2-D step on a 2x2 grid: `[s, d_row, d_col, d_diag]`.
fn analyze_2x2(g: &Grid2) -> [f64; 4] {
    let (s0, d0) = forward(g[0][0], g[0][1]);
    let (s1, d1) = forward(g[1][0], g[1][1]);
    let (ss, sd) = forward(s0, s1);
    let (ds, dd) = forward(d0, d1);
    [ss, ds, sd, dd]
}

fn synthesize_2x2(c: [f64; 4]) -> Grid2 {
    let [ss, ds, sd, dd] = c;
    let (s0, s1) = inverse(ss, sd);
    let (d0, d1) = inverse(ds, dd);
    let (a, b) = inverse(s0, d0);
    let (c, d) = inverse(s1, d1);
    [[a, b], [c, d]]
}

pub fn analyze_block(block: &Block4) -> (SubbandSet, CarrierTriple) {
    // rows
    let mut low = [[0.0; 2]; 4];
    let mut high = [[0.0; 2]; 4];
    for (r, row) in block.iter().enumerate() {
        for k in 0..2 {
            let (s, d) = forward(row[2 * k], row[2 * k + 1]);
            low[r][k] = s;
            high[r][k] = d;
        }
    }
    // columns
    let mut bands = SubbandSet {
        ll: [[0.0; 2]; 2],
        hl: [[0.0; 2]; 2],
        lh: [[0.0; 2]; 2],
        hh: [[0.0; 2]; 2],
    };
    for k in 0..2 {
        for c in 0..2 {
            let (s, d) = forward(low[2 * k][c], low[2 * k + 1][c]);
            bands.ll[k][c] = s;
            bands.lh[k][c] = d;
            let (s, d) = forward(high[2 * k][c], high[2 * k + 1][c]);
            bands.hl[k][c] = s;
            bands.hh[k][c] = d;
        }
    }
    let carriers = CarrierTriple {
        ll_ll: analyze_2x2(&bands.ll)[0],
        ll_hl: analyze_2x2(&bands.hl)[0],
        ll_lh: analyze_2x2(&bands.lh)[0],
    };
    (bands, carriers)
}

/// Checked entry point for a row-major 16-sample slice.
pub fn analyze_slice(samples: &[f64]) -> Result<(SubbandSet, CarrierTriple)> {
    if samples.len() != 16 {
        return Err(Error::domain(format!(
            "lifting transform needs a 4x4 block (16 samples), got {}",
            samples.len()
        )));
    }
    let mut block = [[0.0; 4]; 4];
    for (i, &v) in samples.iter().enumerate() {
        block[i / 4][i % 4] = v;
    }
    Ok(analyze_block(&block))
}

fn replace_low(band: &Grid2, s: f64) -> Grid2 {
    let mut c = analyze_2x2(band);
    c[0] = s;
    synthesize_2x2(c)
}

/// Inverse of [`analyze_block`], taking the (possibly modified) carriers.
pub fn synthesize_block(bands: &SubbandSet, carriers: &CarrierTriple) -> Block4 {
    let ll = replace_low(&bands.ll, carriers.ll_ll);
    let hl = replace_low(&bands.hl, carriers.ll_hl);
    let lh = replace_low(&bands.lh, carriers.ll_lh);
    let hh = bands.hh;

    let mut low = [[0.0; 2]; 4];
    let mut high = [[0.0; 2]; 4];
    for k in 0..2 {
        for c in 0..2 {
            let (a, b) = inverse(ll[k][c], lh[k][c]);
            low[2 * k][c] = a;
            low[2 * k + 1][c] = b;
            let (a, b) = inverse(hl[k][c], hh[k][c]);
            high[2 * k][c] = a;
            high[2 * k + 1][c] = b;
        }
    }
    let mut out = [[0.0; 4]; 4];
    for r in 0..4 {
        for k in 0..2 {
            let (a, b) = inverse(low[r][k], high[r][k]);
            out[r][2 * k] = a;
            out[r][2 * k + 1] = b;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::seed_stream;
    use std::f64::consts::SQRT_2;

    const LL_GAIN: f64 = 2.0 * SQRT_2;

    #[test]
    fn gain_is_two_to_three_eighths() {
        assert!((STEP_GAIN - 2f64.powf(0.375)).abs() < 1e-15);
        assert!((STEP_GAIN.powi(4) - LL_GAIN).abs() < 1e-12);
    }

    fn random_block(seed: u64) -> Block4 {
        let mut s = seed_stream(seed);
        let mut b = [[0.0; 4]; 4];
        for row in b.iter_mut() {
            for v in row.iter_mut() {
                *v = (s.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 255.0;
            }
        }
        b
    }

    fn max_diff(a: &Block4, b: &Block4) -> f64 {
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn mean(b: &Block4) -> f64 {
        b.iter().flatten().sum::<f64>() / 16.0
    }

    #[test]
    fn lift_pair_examples() {
        assert_eq!(lift_pair(10.0, 14.0), (12.0, 4.0));
        assert_eq!(lift_pair(37.5, 37.5), (37.5, 0.0));
        let mut s = seed_stream(11);
        for _ in 0..1000 {
            let a = (s.next_u64() as i64) as f64 / 1e12;
            let b = (s.next_u64() as i64) as f64 / 1e12;
            let (x, d) = lift_pair(a, b);
            let (a2, b2) = unlift_pair(x, d);
            assert!((a - a2).abs() <= 1e-9 * a.abs().max(1.0));
            assert!((b - b2).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constant_block_carriers() {
        let (_, c) = analyze_block(&[[100.0; 4]; 4]);
        assert!((c.ll_ll - 100.0 * LL_GAIN).abs() < 1e-9);
        assert!(c.ll_hl.abs() < 1e-12);
        assert!(c.ll_lh.abs() < 1e-12);
    }

    #[test]
    fn half_step_rows() {
        // Oracle: four scaled mean steps give gain^4 * mean = 2 sqrt2 * 4.
        let block = [[0.0, 0.0, 8.0, 8.0]; 4];
        let (bands, c) = analyze_block(&block);
        assert!((c.ll_ll - 8.0 * SQRT_2).abs() < 1e-9);
        // Step between the two column pairs lands in the level-2 row detail
        // of LL, not in any carrier.
        assert!(c.ll_hl.abs() < 1e-12);
        assert!(c.ll_lh.abs() < 1e-12);
        assert!(bands.hh.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ll_ll_is_a_scaled_mean() {
        for seed in 0..200 {
            let b = random_block(seed);
            let (_, c) = analyze_block(&b);
            assert!((c.ll_ll - LL_GAIN * mean(&b)).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_reconstruction() {
        let mut worst = 0.0f64;
        for seed in 0..10_000 {
            let b = random_block(seed);
            let (bands, c) = analyze_block(&b);
            worst = worst.max(max_diff(&b, &synthesize_block(&bands, &c)));
        }
        assert!(worst < 1e-9, "max error {worst}");
    }

    #[test]
    fn ll_ll_shift_moves_every_pixel_uniformly() {
        let (bands, mut c) = analyze_block(&[[100.0; 4]; 4]);
        c.ll_ll = 104.0 * LL_GAIN;
        let out = synthesize_block(&bands, &c);
        assert!(max_diff(&out, &[[104.0; 4]; 4]) < 1e-9);

        let b = random_block(3);
        let (bands, mut c) = analyze_block(&b);
        c.ll_ll += 6.0;
        let out = synthesize_block(&bands, &c);
        for (x, y) in out.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y - 6.0 / LL_GAIN).abs() < 1e-9);
        }
    }

    #[test]
    fn detail_carrier_shift_keeps_mean() {
        // Brute-force: synthesize and recompute the mean directly.
        for seed in 0..100 {
            let b = random_block(seed);
            let (bands, c) = analyze_block(&b);
            for which in 0..2 {
                let mut arr = c.as_array();
                arr[1 + which] += 5.5;
                let out = synthesize_block(&bands, &CarrierTriple::from_array(arr));
                assert!((mean(&out) - mean(&b)).abs() < 1e-9);
                // pixel-domain change has norm shift / sqrt2
                let energy: f64 = out
                    .iter()
                    .flatten()
                    .zip(b.iter().flatten())
                    .map(|(x, y)| (x - y).powi(2))
                    .sum();
                assert!((energy - 5.5f64.powi(2) / 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linearity() {
        let (x, y) = (random_block(1), random_block(2));
        let (alpha, beta) = (0.75, -2.5);
        let mut z = [[0.0; 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                z[r][c] = alpha * x[r][c] + beta * y[r][c];
            }
        }
        let (bx, cx) = analyze_block(&x);
        let (by, cy) = analyze_block(&y);
        let (bz, cz) = analyze_block(&z);
        for i in 0..3 {
            let want = alpha * cx.as_array()[i] + beta * cy.as_array()[i];
            assert!((cz.as_array()[i] - want).abs() < 1e-9);
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!((bz.hh[r][c] - (alpha * bx.hh[r][c] + beta * by.hh[r][c])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn slice_shape_checked() {
        assert!(analyze_slice(&[0.0; 15]).is_err());
        let (_, c) = analyze_slice(&[2.0; 16]).unwrap();
        assert!((c.ll_ll - 2.0 * LL_GAIN).abs() < 1e-9);
    }
}
