//! Two-part content-dependent watermark: generation, embedding, extraction.
//!
//! Part 1 is generated from the averages of the payload 8x8 blocks and
//! carried by 4x4 blocks of `b4` in `k2` order. Part 2 is generated from
//! virtual 8x8 blocks (four consecutive `b4` entries, read after part 1 was
//! embedded) and carried by the quadrants of the payload 8x8 blocks in `k3`
//! order. Every carrier holds three copies of its bit, one in each of
//! `ll_ll`, `ll_hl`, `ll_lh`.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::key::{KeyPart, SecretKey};
use crate::lwt::{analyze_block, synthesize_block, Block4, CarrierTriple};
use crate::partition::{partition, BlockRef, Partition};
use crate::qim::QuantizerConfig;

pub type FourBits = [bool; 4];

/// `v XOR (v >> 1)` as four bits, most significant first.
pub fn gray_code_4bit(v: u8) -> Result<FourBits> {
    if v > 15 {
        return Err(Error::domain(format!("gray code index {v} outside 0..=15")));
    }
    let g = v ^ (v >> 1);
    Ok([g & 8 != 0, g & 4 != 0, g & 2 != 0, g & 1 != 0])
}

/// Interval index of an average luminance: `floor(avg / 16)`, with 255
/// folded into the last interval.
pub fn interval_index(avg: f64) -> u8 {
    ((avg / 16.0).floor().max(0.0) as u8).min(15)
}

/// Watermark bits of a (real or virtual) block: the gray code of the
/// interval its average falls into.
pub fn block_bits(pixels: &[u8]) -> Result<FourBits> {
    if pixels.is_empty() {
        return Err(Error::domain("block_bits needs at least one sample"));
    }
    let sum: u64 = pixels.iter().map(|&p| p as u64).sum();
    gray_code_4bit(interval_index(sum as f64 / pixels.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WatermarkPayload {
    /// Four bits per payload 8x8 block, block-major.
    pub part1: Vec<bool>,
    /// Four bits per virtual 8x8 group, group-major.
    pub part2: Vec<bool>,
}

/// Key-derived block layout shared by embedding and extraction.
#[derive(Debug, Clone)]
pub struct Layout {
    pub partition: Partition,
    /// Carrier of part-1 bit `j` (from `b4`, in `k2` order).
    pub part1_carriers: Vec<BlockRef>,
    /// Carrier of part-2 bit `j` (quadrants of payload `b8`, in `k3` order).
    pub part2_carriers: Vec<BlockRef>,
}

impl Layout {
    pub fn new(width: usize, height: usize, key: &SecretKey) -> Result<Self> {
        let partition = partition(width, height, &mut key.stream(KeyPart::K1))?;
        let m4 = 4 * partition.m;

        let order = key.stream(KeyPart::K2).permutation(partition.b4.len());
        let part1_carriers = order[..m4].iter().map(|&i| partition.b4[i]).collect();

        let quads = partition.payload_quadrants();
        let order = key.stream(KeyPart::K3).permutation(quads.len());
        let part2_carriers = order.iter().map(|&i| quads[i]).collect();

        Ok(Layout {
            partition,
            part1_carriers,
            part2_carriers,
        })
    }
}

/// Real-valued working copy of an image.
struct Canvas {
    width: usize,
    pixels: Vec<f64>,
}

impl Canvas {
    fn from_image(img: &GrayImage) -> Self {
        Canvas {
            width: img.width(),
            pixels: img.samples().iter().map(|&p| p as f64).collect(),
        }
    }

    fn read(&self, b: &BlockRef) -> Block4 {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            let start = (b.y + r) * self.width + b.x;
            row.copy_from_slice(&self.pixels[start..start + 4]);
        }
        out
    }

    fn write(&mut self, b: &BlockRef, block: &Block4) {
        for (r, row) in block.iter().enumerate() {
            let start = (b.y + r) * self.width + b.x;
            self.pixels[start..start + 4].copy_from_slice(row);
        }
    }

    fn quantized(&self, b: &BlockRef) -> Vec<u8> {
        b.pixels()
            .map(|(x, y)| to_u8(self.pixels[y * self.width + x]))
            .collect()
    }

    fn embed(&mut self, carrier: &BlockRef, bit: bool, quant: &QuantizerConfig) {
        let (bands, c) = analyze_block(&self.read(carrier));
        let c = CarrierTriple::from_array(c.as_array().map(|v| quant.embed(v, bit)));
        self.write(carrier, &synthesize_block(&bands, &c));
    }

    fn into_image(self, height: usize) -> GrayImage {
        let samples = self.pixels.into_iter().map(to_u8).collect();
        GrayImage::new(self.width, height, samples).expect("canvas keeps image dims")
    }
}

/// Round half away from zero, then clamp to the 8-bit range.
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn bits_of_blocks<'a>(
    blocks: impl Iterator<Item = &'a BlockRef>,
    sample: impl Fn(&BlockRef) -> Vec<u8>,
) -> Vec<bool> {
    blocks
        .flat_map(|b| block_bits(&sample(b)).expect("blocks are non-empty"))
        .collect()
}

fn group_bits(groups: &[[BlockRef; 4]], sample: impl Fn(&BlockRef) -> Vec<u8>) -> Vec<bool> {
    groups
        .iter()
        .flat_map(|g| {
            let px: Vec<u8> = g.iter().flat_map(&sample).collect();
            block_bits(&px).expect("groups are non-empty")
        })
        .collect()
}

/// Embeds the watermark and also returns the payload that was embedded.
pub fn embed_with_payload(
    image: &GrayImage,
    key: &SecretKey,
    quant: &QuantizerConfig,
) -> Result<(GrayImage, WatermarkPayload)> {
    let layout = Layout::new(image.width(), image.height(), key)?;
    let p = &layout.partition;
    let mut canvas = Canvas::from_image(image);

    let part1 = bits_of_blocks(p.payload_b8().iter(), |b| image.block_samples(b));
    for (carrier, &bit) in layout.part1_carriers.iter().zip(&part1) {
        canvas.embed(carrier, bit, quant);
    }

    // Part 2 reads the part-1-modified image. Its source blocks are never
    // touched again, so quantizing them here matches the final output.
    let part2 = group_bits(&p.virtual_groups(), |b| canvas.quantized(b));
    for (carrier, &bit) in layout.part2_carriers.iter().zip(&part2) {
        canvas.embed(carrier, bit, quant);
    }

    Ok((
        canvas.into_image(image.height()),
        WatermarkPayload { part1, part2 },
    ))
}

pub fn embed(image: &GrayImage, key: &SecretKey, quant: &QuantizerConfig) -> Result<GrayImage> {
    embed_with_payload(image, key, quant).map(|(img, _)| img)
}

/// Bits read back from a received image.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub layout: Layout,
    /// Three extracted copies per part-1 carrier.
    pub part1_extracted: Vec<[bool; 3]>,
    pub part2_extracted: Vec<[bool; 3]>,
    /// Part-1 bits regenerated from the received payload 8x8 blocks.
    pub part1_reference: Vec<bool>,
    /// Part-2 bits regenerated from the received virtual groups.
    pub part2_reference: Vec<bool>,
}

fn extract_triples(
    image: &GrayImage,
    carriers: &[BlockRef],
    quant: &QuantizerConfig,
) -> Vec<[bool; 3]> {
    let canvas = Canvas::from_image(image);
    carriers
        .iter()
        .map(|b| {
            let (_, c) = analyze_block(&canvas.read(b));
            c.as_array().map(|v| quant.extract(v))
        })
        .collect()
}

pub fn extract(image: &GrayImage, key: &SecretKey, quant: &QuantizerConfig) -> Result<Extraction> {
    let layout = Layout::new(image.width(), image.height(), key)?;
    let p = &layout.partition;
    let sample = |b: &BlockRef| image.block_samples(b);
    let part1_reference = bits_of_blocks(p.payload_b8().iter(), sample);
    let part2_reference = group_bits(&p.virtual_groups(), sample);
    let part1_extracted = extract_triples(image, &layout.part1_carriers, quant);
    let part2_extracted = extract_triples(image, &layout.part2_carriers, quant);
    Ok(Extraction {
        layout,
        part1_extracted,
        part2_extracted,
        part1_reference,
        part2_reference,
    })
}

impl Extraction {
    /// Fraction of carriers (both parts) whose three copies all equal the
    /// reference bit.
    pub fn agreement(&self) -> f64 {
        let pairs = self
            .part1_reference
            .iter()
            .zip(&self.part1_extracted)
            .chain(self.part2_reference.iter().zip(&self.part2_extracted));
        let (mut ok, mut total) = (0usize, 0usize);
        for (&w, t) in pairs {
            total += 1;
            if t.iter().all(|&b| b == w) {
                ok += 1;
            }
        }
        if total == 0 {
            1.0
        } else {
            ok as f64 / total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAY_CODES: [&str; 16] = [
        "0000", "0001", "0011", "0010", "0110", "0111", "0101", "0100", "1100", "1101", "1111",
        "1110", "1010", "1011", "1001", "1000",
    ];

    fn bits_str(b: FourBits) -> String {
        b.iter().map(|&x| if x { '1' } else { '0' }).collect()
    }

    #[test]
    fn gray_code_table() {
        for (v, want) in GRAY_CODES.iter().enumerate() {
            assert_eq!(bits_str(gray_code_4bit(v as u8).unwrap()), *want);
        }
        assert!(gray_code_4bit(16).is_err());
    }

    #[test]
    fn adjacent_intervals_differ_in_one_bit() {
        for v in 0..15u8 {
            let a = gray_code_4bit(v).unwrap();
            let b = gray_code_4bit(v + 1).unwrap();
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
        }
    }

    #[test]
    fn block_bits_examples() {
        assert_eq!(bits_str(block_bits(&[100; 64]).unwrap()), "0101");
        assert_eq!(bits_str(block_bits(&[255; 64]).unwrap()), "1000");
        assert_eq!(bits_str(block_bits(&[240; 64]).unwrap()), "1000");
        assert_eq!(bits_str(block_bits(&[239; 64]).unwrap()), "1001");
        assert_eq!(interval_index(15.999), 0);
        assert_eq!(interval_index(16.0), 1);
        // 63 samples of 16 and one 15: average just under 16
        let mut px = vec![16u8; 64];
        px[0] = 15;
        assert_eq!(bits_str(block_bits(&px).unwrap()), "0000");
        assert!(block_bits(&[]).is_err());
    }

    fn texture(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut s = crate::key::seed_stream(seed);
        GrayImage::from_fn(w, h, |x, y| {
            let base = 40.0 + 60.0 * ((x as f64) / 11.0).sin() + 50.0 * ((y as f64) / 17.0).cos();
            (base + (s.next_below(30).unwrap() as f64) + 60.0).clamp(0.0, 255.0) as u8
        })
    }

    #[test]
    fn payload_sizes_and_disjoint_carriers() {
        let img = texture(64, 64, 1);
        let key = SecretKey::new(1, 2, 3);
        let (_, payload) = embed_with_payload(&img, &key, &QuantizerConfig::default()).unwrap();
        let layout = Layout::new(64, 64, &key).unwrap();
        let m = layout.partition.m;
        assert_eq!(payload.part1.len(), 4 * m);
        assert_eq!(payload.part2.len(), 4 * m);
        assert_eq!(layout.part1_carriers.len(), 4 * m);
        assert_eq!(layout.part2_carriers.len(), 4 * m);
        let mut seen = std::collections::HashSet::new();
        for b in layout.part1_carriers.iter().chain(&layout.part2_carriers) {
            assert!(seen.insert((b.x, b.y)), "carrier reused");
        }
    }

    #[test]
    fn clean_extraction_agrees() {
        let img = texture(128, 128, 2);
        let key = SecretKey::new(11, 22, 33);
        let q = QuantizerConfig::default();
        let marked = embed(&img, &key, &q).unwrap();
        let ex = extract(&marked, &key, &q).unwrap();
        assert!(ex.agreement() > 0.95, "agreement {}", ex.agreement());
        let wrong = extract(&marked, &SecretKey::new(12, 22, 33), &q).unwrap();
        assert!(wrong.agreement() < 0.6);
    }

    #[test]
    fn part2_reference_is_exact_on_clean_image() {
        let img = texture(128, 64, 3);
        let key = SecretKey::new(5, 6, 7);
        let q = QuantizerConfig::default();
        let (marked, payload) = embed_with_payload(&img, &key, &q).unwrap();
        let ex = extract(&marked, &key, &q).unwrap();
        assert_eq!(ex.part2_reference, payload.part2);
    }

    #[test]
    fn degenerate_image_has_no_payload() {
        let img = GrayImage::filled(8, 8, 50);
        let key = SecretKey::new(1, 1, 1);
        let q = QuantizerConfig::default();
        let marked = embed(&img, &key, &q).unwrap();
        assert_eq!(marked, img);
        let ex = extract(&marked, &key, &q).unwrap();
        assert!(ex.part1_extracted.is_empty() && ex.part2_extracted.is_empty());
        assert!(ex.part1_reference.is_empty() && ex.part2_reference.is_empty());
    }

    #[test]
    fn geometry_error_propagates() {
        let img = GrayImage::filled(12, 16, 0);
        let q = QuantizerConfig::default();
        assert!(matches!(
            embed(&img, &SecretKey::new(0, 0, 0), &q),
            Err(Error::Geometry { .. })
        ));
    }
}
