//! Benign and malicious modifications of watermarked images, PSNR, and the
//! labeled corpus used to train the classifier.

use std::fmt;
use std::str::FromStr;

use crate::auth::authenticate;
use crate::error::{Error, Result};
use crate::features::{feature_vector, FeatureVector};
use crate::image::{decode_jpeg, encode, FileFormat, GrayImage};
use crate::key::SecretKey;
use crate::qim::QuantizerConfig;
use crate::svm::ClassLabel;
use crate::watermark::embed;

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Rect {
            x,
            y,
            width,
            height,
        }
    }

    /// Centered rectangle covering 1/16 of the image (a quarter of each side).
    pub fn centered_sixteenth(width: usize, height: usize) -> Self {
        let (w, h) = (width / 4, height / 4);
        Rect::new((width - w) / 2, (height - h) / 2, w, h)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.width && y >= self.y && y < self.y + self.height
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x.checked_add(self.width).is_some_and(|r| r <= width)
            && self.y.checked_add(self.height).is_some_and(|b| b <= height)
    }
}

impl FromStr for Rect {
    type Err = Error;

    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let nums: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        match nums.as_deref() {
            Some(&[x, y, w, h]) => Ok(Rect::new(x, y, w, h)),
            _ => Err(Error::domain(format!(
                "rectangle must be `x,y,width,height`, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x, self.y, self.width, self.height)
    }
}

fn check_qf(qf: u8) -> Result<()> {
    if (1..=100).contains(&qf) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "JPEG quality must be in 1..=100, got {qf}"
        )))
    }
}

/// Baseline grayscale JPEG encoded at quality `qf`.
pub fn jpeg_encode(image: &GrayImage, qf: u8) -> Result<Vec<u8>> {
    check_qf(qf)?;
    encode(image, FileFormat::Jpeg { quality: qf })
}

/// Encodes with baseline grayscale JPEG at quality `qf` and decodes again.
pub fn jpeg_roundtrip(image: &GrayImage, qf: u8) -> Result<GrayImage> {
    let out = decode_jpeg(&jpeg_encode(image, qf)?)?;
    if out.dims() != image.dims() {
        return Err(Error::Codec(format!(
            "decoder returned {:?} for a {:?} image",
            out.dims(),
            image.dims()
        )));
    }
    Ok(out)
}

/// Copies the donor's pixels inside `rect` over the target.
pub fn object_insert(target: &GrayImage, donor: &GrayImage, rect: Rect) -> Result<GrayImage> {
    let (w, h) = target.dims();
    if !rect.fits(w, h) || !rect.fits(donor.width(), donor.height()) {
        return Err(Error::domain(format!(
            "rectangle {rect} does not fit target {w}x{h} and donor {}x{}",
            donor.width(),
            donor.height()
        )));
    }
    let mut out = target.clone();
    for y in rect.y..rect.y + rect.height {
        for x in rect.x..rect.x + rect.width {
            out.set(x, y, donor.get(x, y));
        }
    }
    Ok(out)
}

pub fn mse(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::domain(format!(
            "cannot compare {:?} with {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let n = a.samples().len();
    if n == 0 {
        return Err(Error::domain("cannot compare empty images"));
    }
    let sum: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / n as f64)
}

/// Peak signal-to-noise ratio in dB; identical images give infinity.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    let e = mse(a, b)?;
    Ok(if e == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / e).log10()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Jpeg {
        qf: u8,
    },
    Insert {
        rect: Rect,
        donor: GrayImage,
    },
    InsertThenJpeg {
        rect: Rect,
        donor: GrayImage,
        qf: u8,
    },
}

impl AttackSpec {
    pub fn apply(&self, image: &GrayImage) -> Result<GrayImage> {
        match self {
            AttackSpec::Jpeg { qf } => jpeg_roundtrip(image, *qf),
            AttackSpec::Insert { rect, donor } => object_insert(image, donor, *rect),
            AttackSpec::InsertThenJpeg { rect, donor, qf } => {
                check_qf(*qf)?;
                jpeg_roundtrip(&object_insert(image, donor, *rect)?, *qf)
            }
        }
    }
}

/// Runs the receiver side on an image: extraction, error maps, features.
pub fn image_features(
    image: &GrayImage,
    key: &SecretKey,
    quant: &QuantizerConfig,
) -> Result<FeatureVector> {
    let auth = authenticate(image, key, quant)?;
    Ok(feature_vector(&auth.maps))
}

/// Variant of a watermarked image in the labeled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub insert: bool,
    /// JPEG quality applied last, if any.
    pub qf: Option<u8>,
}

impl Variant {
    pub fn label(&self) -> ClassLabel {
        let benign_jpeg = matches!(self.qf, Some(q) if q < 100);
        match (self.insert, benign_jpeg) {
            (false, false) => ClassLabel::Clean,
            (false, true) => ClassLabel::Unintentional,
            (true, false) => ClassLabel::Intentional,
            (true, true) => ClassLabel::Both,
        }
    }

    pub fn tag(&self) -> String {
        match (self.insert, self.qf) {
            (false, None) => "clean".into(),
            (false, Some(q)) => format!("jpeg{q}"),
            (true, None) => "insert".into(),
            (true, Some(q)) => format!("insert+jpeg{q}"),
        }
    }
}

/// Which attacked variants to generate per source image.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusGrid {
    /// Qualities considered benign recompression (class 2 / 4).
    pub jpeg_qualities: Vec<u8>,
    /// Tamper rectangle; `None` picks a centered 1/16-area rectangle.
    pub rect: Option<Rect>,
}

impl Default for CorpusGrid {
    fn default() -> Self {
        CorpusGrid {
            jpeg_qualities: vec![75, 80, 85, 90, 95],
            rect: None,
        }
    }
}

impl CorpusGrid {
    /// Clean, QF 100, each benign QF; then the same with insertion.
    pub fn variants(&self) -> Vec<Variant> {
        let mut qfs = vec![None, Some(100)];
        qfs.extend(self.jpeg_qualities.iter().map(|&q| Some(q)));
        [false, true]
            .iter()
            .flat_map(|&insert| qfs.iter().map(move |&qf| Variant { insert, qf }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRow {
    pub path: String,
    pub features: FeatureVector,
    pub label: ClassLabel,
}

/// Left-right mirror, used as a donor when the corpus has a single image.
fn mirrored(img: &GrayImage) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        img.get(img.width() - 1 - x, y)
    })
}

fn source_rows(
    sources: &[(String, GrayImage)],
    i: usize,
    key: &SecretKey,
    quant: &QuantizerConfig,
    grid: &CorpusGrid,
) -> Result<Vec<CorpusRow>> {
    let (name, original) = &sources[i];
    let marked = embed(original, key, quant)?;
    let donor = if sources.len() > 1 {
        sources[(i + 1) % sources.len()].1.clone()
    } else {
        mirrored(original)
    };
    let rect = grid
        .rect
        .unwrap_or_else(|| Rect::centered_sixteenth(marked.width(), marked.height()));
    let mut rows = Vec::new();
    for v in grid.variants() {
        let mut img = if v.insert {
            object_insert(&marked, &donor, rect)?
        } else {
            marked.clone()
        };
        if let Some(qf) = v.qf {
            img = jpeg_roundtrip(&img, qf)?;
        }
        rows.push(CorpusRow {
            path: format!("{name}#{}", v.tag()),
            features: image_features(&img, key, quant)?,
            label: v.label(),
        });
    }
    Ok(rows)
}

/// Watermarks every source, applies every grid variant, and records the
/// resulting features with their class label. The donor of image `i` is
/// source `i + 1` (wrapping).
///
/// Sources are processed on worker threads; the row order is always source
/// order, then [`CorpusGrid::variants`] order.
pub fn build_corpus(
    sources: &[(String, GrayImage)],
    key: &SecretKey,
    quant: &QuantizerConfig,
    grid: &CorpusGrid,
) -> Result<Vec<CorpusRow>> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(sources.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut per_source: Vec<Option<Result<Vec<CorpusRow>>>> = std::iter::repeat_with(|| None)
        .take(sources.len())
        .collect();
    let done = std::sync::Mutex::new(&mut per_source);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= sources.len() {
                    break;
                }
                let rows = source_rows(sources, i, key, quant, grid);
                done.lock()
                    .expect("no worker panics while holding the lock")[i] = Some(rows);
            });
        }
    });
    let mut rows = Vec::new();
    for r in per_source {
        rows.extend(r.expect("every source is processed")?);
    }
    Ok(rows)
}
