//! Error-map construction from extracted and regenerated watermark bits.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::key::SecretKey;
use crate::partition::BlockRef;
use crate::qim::QuantizerConfig;
use crate::watermark::{extract, Extraction};

/// Absolute differences between a reference bit and its three extracted
/// copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EwTriple(pub [bool; 3]);

impl EwTriple {
    pub fn first(&self) -> bool {
        self.0[0]
    }
}

pub fn ew(reference: bool, extracted: [bool; 3]) -> EwTriple {
    EwTriple(extracted.map(|b| b != reference))
}

/// Map value of an 8x8 block from the first-copy errors of its four bits.
pub fn xw_block8(first_copy_errors: [bool; 4]) -> u8 {
    const LEVELS: [u8; 5] = [0, 63, 127, 191, 255];
    LEVELS[first_copy_errors.iter().filter(|&&e| e).count()]
}

/// Severity level 0..=3 of one carrier's copy errors.
pub fn vmap_cell(e: EwTriple) -> u8 {
    match e.0 {
        [false, false, false] => 0,
        [false, _, _] => 1,
        [true, true, true] => 3,
        [true, _, _] => 2,
    }
}

/// Collapses four severity levels of an 8x8 block into one map value.
pub fn vote_block8(levels: [u8; 4]) -> u8 {
    let mut c = [0usize; 4];
    for &l in &levels {
        c[l.min(3) as usize] += 1;
    }
    if c[3] + c[2] >= c[1] + c[0] {
        if c[3] >= c[2] {
            255
        } else {
            170
        }
    } else if c[1] >= c[0] {
        85
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMapSet {
    pub xw1: GrayImage,
    pub xw2: GrayImage,
    pub vmap1: GrayImage,
    pub vmap2: GrayImage,
    pub xw_comb: GrayImage,
}

impl ErrorMapSet {
    /// `(file stem, map)` pairs in a fixed order.
    pub fn named(&self) -> [(&'static str, &GrayImage); 5] {
        [
            ("xw1", &self.xw1),
            ("xw2", &self.xw2),
            ("vmap1", &self.vmap1),
            ("vmap2", &self.vmap2),
            ("xw_comb", &self.xw_comb),
        ]
    }
}

fn fill(map: &mut GrayImage, block: &BlockRef, value: u8) {
    for (x, y) in block.pixels() {
        map.set(x, y, value);
    }
}

/// Block-level data of one watermark part, ready to paint.
struct PartMaps {
    xw: GrayImage,
    vmap: GrayImage,
}

/// Paints one part. `sources[i]` lists the footprints that generated the
/// four reference bits `4i..4i+4`; `carriers[j]` is where bit `j` was read.
fn paint_part(
    width: usize,
    height: usize,
    sources: &[Vec<BlockRef>],
    carriers: &[BlockRef],
    reference: &[bool],
    extracted: &[[bool; 3]],
) -> PartMaps {
    let mut xw = GrayImage::filled(width, height, 0);
    let mut vmap = GrayImage::filled(width, height, 0);
    let errors: Vec<EwTriple> = reference
        .iter()
        .zip(extracted)
        .map(|(&w, &t)| ew(w, t))
        .collect();

    for (i, footprint) in sources.iter().enumerate() {
        let e = &errors[4 * i..4 * i + 4];
        let xw_value = xw_block8([e[0].first(), e[1].first(), e[2].first(), e[3].first()]);
        let vote = vote_block8([
            vmap_cell(e[0]),
            vmap_cell(e[1]),
            vmap_cell(e[2]),
            vmap_cell(e[3]),
        ]);
        for b in footprint {
            fill(&mut xw, b, xw_value);
            fill(&mut vmap, b, vote);
        }
    }
    for (b, e) in carriers.iter().zip(&errors) {
        fill(&mut xw, b, if e.first() { 255 } else { 0 });
        fill(&mut vmap, b, vmap_cell(*e) * 85);
    }
    PartMaps { xw, vmap }
}

/// Builds `xw1`, `xw2`, `vmap1`, `vmap2` (and their combination) from an
/// extraction. Blocks without payload stay 0.
pub fn assemble_maps(ex: &Extraction) -> ErrorMapSet {
    let p = &ex.layout.partition;
    let (w, h) = (p.width, p.height);

    let sources1: Vec<Vec<BlockRef>> = p.payload_b8().iter().map(|b| vec![*b]).collect();
    let part1 = paint_part(
        w,
        h,
        &sources1,
        &ex.layout.part1_carriers,
        &ex.part1_reference,
        &ex.part1_extracted,
    );

    let sources2: Vec<Vec<BlockRef>> = p.virtual_groups().iter().map(|g| g.to_vec()).collect();
    let part2 = paint_part(
        w,
        h,
        &sources2,
        &ex.layout.part2_carriers,
        &ex.part2_reference,
        &ex.part2_extracted,
    );

    let xw_comb = combine(&part1.xw, &part2.xw).expect("maps share dims");
    ErrorMapSet {
        xw1: part1.xw,
        xw2: part2.xw,
        vmap1: part1.vmap,
        vmap2: part2.vmap,
        xw_comb,
    }
}

/// Pixelwise `min(255, round(sqrt(a^2 + b^2)))`.
pub fn combine(xw1: &GrayImage, xw2: &GrayImage) -> Result<GrayImage> {
    if xw1.dims() != xw2.dims() {
        return Err(Error::domain(format!(
            "cannot combine {:?} with {:?}",
            xw1.dims(),
            xw2.dims()
        )));
    }
    let samples = xw1
        .samples()
        .iter()
        .zip(xw2.samples())
        .map(|(&a, &b)| {
            let (a, b) = (a as f64, b as f64);
            (a * a + b * b).sqrt().round().min(255.0) as u8
        })
        .collect();
    GrayImage::new(xw1.width(), xw1.height(), samples)
}

#[derive(Debug, Clone)]
pub struct Authentication {
    pub extraction: Extraction,
    pub maps: ErrorMapSet,
}

/// Extracts both watermark parts from `image` and builds its error maps.
pub fn authenticate(
    image: &GrayImage,
    key: &SecretKey,
    quant: &QuantizerConfig,
) -> Result<Authentication> {
    let extraction = extract(image, key, quant)?;
    let maps = assemble_maps(&extraction);
    Ok(Authentication { extraction, maps })
}
