//! Keyed partitioning of an image into non-overlapping 8x8 and 4x4 blocks.

use crate::error::{Error, Result};
use crate::key::KeyedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRef {
    /// Column of the top-left pixel.
    pub x: usize,
    /// Row of the top-left pixel.
    pub y: usize,
    pub size: usize,
}

impl BlockRef {
    pub const fn new(x: usize, y: usize, size: usize) -> Self {
        BlockRef { x, y, size }
    }

    /// Row-major pixel coordinates `(x, y)` covered by the block.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.size)
            .flat_map(move |y| (self.x..self.x + self.size).map(move |x| (x, y)))
    }

    /// The four 4x4 sub-blocks of an 8x8 block: top-left, top-right,
    /// bottom-left, bottom-right.
    pub fn quadrants(&self) -> Result<[BlockRef; 4]> {
        if self.size != 8 {
            return Err(Error::domain(format!(
                "quadrants need an 8x8 block, got size {}",
                self.size
            )));
        }
        let (x, y) = (self.x, self.y);
        Ok([
            BlockRef::new(x, y, 4),
            BlockRef::new(x + 4, y, 4),
            BlockRef::new(x, y + 4, 4),
            BlockRef::new(x + 4, y + 4, 4),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub b8: Vec<BlockRef>,
    pub b4: Vec<BlockRef>,
    /// Usable pair count: payload is carried by the first `m` entries of
    /// `b8` and the first `4m` entries of `b4`.
    pub m: usize,
    pub width: usize,
    pub height: usize,
}

pub fn check_geometry(width: usize, height: usize) -> Result<()> {
    if width < 8 || height < 8 || !width.is_multiple_of(8) || !height.is_multiple_of(8) {
        return Err(Error::Geometry { width, height });
    }
    Ok(())
}

/// Partitions a `width` x `height` image using a stream seeded from `k1`.
///
/// The 4x4 anchor lattice is scanned in raster order. Every uncovered anchor
/// starts a new block: an 8x8 block when the draw selects it and the block
/// fits over uncovered pixels, otherwise a 4x4 block. The chance of picking
/// 8x8 is `T / (R - 3T)`, where `T` is the number of 8x8 blocks still needed
/// to reach one eighth of the anchor count and `R` the number of uncovered
/// anchors that could still start an 8x8 block. At the start this is exactly
/// 1/5, i.e. a 4x4 block is four times as likely; afterwards it drifts
/// slightly to make up for anchors where an 8x8 block did not fit.
pub fn partition(width: usize, height: usize, stream: &mut KeyedStream) -> Result<Partition> {
    check_geometry(width, height)?;
    let (gw, gh) = (width / 4, height / 4);
    let total = gw * gh;
    let target8 = (total + 4) / 8;
    let mut covered = vec![false; total];
    // Anchors in the last lattice row/column can never start an 8x8 block.
    let can_start = |gx: usize, gy: usize| gx + 1 < gw && gy + 1 < gh;
    let mut remaining = (gw - 1) * (gh - 1);
    let mut b8 = Vec::with_capacity(target8);
    let mut b4 = Vec::with_capacity(total / 2);

    for gy in 0..gh {
        for gx in 0..gw {
            if covered[gy * gw + gx] {
                continue;
            }
            let needed = target8.saturating_sub(b8.len());
            let pick = if needed == 0 {
                false
            } else if remaining <= 4 * needed {
                true
            } else {
                let span = (remaining - 3 * needed) as u64;
                stream.next_below(span)? < needed as u64
            };
            let fits = can_start(gx, gy)
                && !covered[gy * gw + gx + 1]
                && !covered[(gy + 1) * gw + gx]
                && !covered[(gy + 1) * gw + gx + 1];

            let cells: &[(usize, usize)] = if pick && fits {
                b8.push(BlockRef::new(gx * 4, gy * 4, 8));
                &[(0, 0), (1, 0), (0, 1), (1, 1)]
            } else {
                b4.push(BlockRef::new(gx * 4, gy * 4, 4));
                &[(0, 0)]
            };
            for &(dx, dy) in cells {
                let (cx, cy) = (gx + dx, gy + dy);
                covered[cy * gw + cx] = true;
                if can_start(cx, cy) {
                    remaining -= 1;
                }
            }
        }
    }

    let m = b8.len().min(b4.len() / 4);
    Ok(Partition {
        b8,
        b4,
        m,
        width,
        height,
    })
}

impl Partition {
    /// Payload 8x8 blocks (first `m` of `b8`).
    pub fn payload_b8(&self) -> &[BlockRef] {
        &self.b8[..self.m]
    }

    /// Consecutive `b4` entries grouped four at a time into virtual 8x8
    /// blocks; only the first `m` groups are returned.
    pub fn virtual_groups(&self) -> Vec<[BlockRef; 4]> {
        self.b4
            .chunks_exact(4)
            .take(self.m)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect()
    }

    /// All quadrants of the payload 8x8 blocks, block-major.
    pub fn payload_quadrants(&self) -> Vec<BlockRef> {
        self.payload_b8()
            .iter()
            .flat_map(|b| b.quadrants().expect("b8 entries are 8x8"))
            .collect()
    }
}
