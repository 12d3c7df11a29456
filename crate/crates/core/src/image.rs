//! 8-bit grayscale images and their file formats (binary PGM, PNG, JPEG).

use std::fs::File;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::partition::BlockRef;

#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(samples.len()) {
            return Err(Error::domain(format!(
                "{}x{} image needs {} samples, got {}",
                width,
                height,
                width.saturating_mul(height),
                samples.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.samples[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.samples[y * self.width + x] = v;
    }

    /// Samples of a block, row-major.
    pub fn block_samples(&self, block: &BlockRef) -> Vec<u8> {
        block.pixels().map(|(x, y)| self.get(x, y)).collect()
    }
}

/// Integer BT.601 luminance, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn from_dynamic(img: DynamicImage, path: &Path) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let samples = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
        DynamicImage::ImageRgba8(buf) => buf
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]))
            .collect(),
        other => {
            return Err(Error::Format {
                format: "image",
                path: path.to_path_buf(),
                reason: format!(
                    "unsupported sample type {:?}; only 8-bit images are accepted",
                    other.color()
                ),
            })
        }
    };
    GrayImage::new(w, h, samples)
}

/// Reads a PGM (P5), PNG or JPEG file. The format is sniffed from the
/// content; color inputs are converted with [`luminance`].
pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let format = reader.format();
    if !matches!(
        format,
        Some(ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Pnm)
    ) {
        return Err(Error::Format {
            format: "image",
            path: path.to_path_buf(),
            reason: "not a PGM, PNG or JPEG file".into(),
        });
    }
    let img = reader.decode().map_err(|e| Error::Format {
        format: format_name(format),
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    from_dynamic(img, path)
}

fn format_name(f: Option<ImageFormat>) -> &'static str {
    match f {
        Some(ImageFormat::Png) => "PNG",
        Some(ImageFormat::Jpeg) => "JPEG",
        Some(ImageFormat::Pnm) => "PGM",
        _ => "image",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Pgm,
    Png,
    Jpeg { quality: u8 },
}

impl FileFormat {
    /// Format implied by a path's extension; unknown extensions are PNG.
    pub fn from_path(path: &Path) -> Self {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("pgm" | "pnm") => FileFormat::Pgm,
            Some("jpg" | "jpeg") => FileFormat::Jpeg { quality: 100 },
            _ => FileFormat::Png,
        }
    }
}

pub fn encode(img: &GrayImage, format: FileFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let (w, h) = (img.width as u32, img.height as u32);
    let res = match format {
        FileFormat::Png => {
            PngEncoder::new(&mut buf).write_image(&img.samples, w, h, ExtendedColorType::L8)
        }
        FileFormat::Pgm => PnmEncoder::new(&mut buf)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&img.samples, w, h, ExtendedColorType::L8),
        FileFormat::Jpeg { quality } => JpegEncoder::new_with_quality(&mut buf, quality)
            .write_image(&img.samples, w, h, ExtendedColorType::L8),
    };
    res.map_err(|e| Error::Codec(e.to_string()))?;
    Ok(buf)
}

pub fn decode_jpeg(bytes: &[u8]) -> Result<GrayImage> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Jpeg)
        .decode()
        .map_err(|e| Error::Codec(e.to_string()))?;
    from_dynamic(img, Path::new("<memory>"))
}

/// Writes `img` in the format implied by the extension (`.pgm`, `.png`,
/// `.jpg`; anything else is PNG).
pub fn write_image(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, &encode(img, FileFormat::from_path(path))?)
}

/// Writes raw bytes to `path`, mapping failures to [`Error::Io`].
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb};

    fn gradient() -> GrayImage {
        GrayImage::from_fn(24, 16, |x, y| (x * 10 + y * 3) as u8)
    }

    #[test]
    fn sample_count_checked() {
        assert!(GrayImage::new(4, 4, vec![0; 15]).is_err());
        assert!(GrayImage::new(4, 4, vec![0; 16]).is_ok());
    }

    #[test]
    fn pgm_and_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = gradient();
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            write_image(&p, &img).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
        let raw = std::fs::read(dir.path().join("a.pgm")).unwrap();
        assert!(raw.starts_with(b"P5"));
    }

    #[test]
    fn sixteen_bit_png_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_pixel(8, 8, Luma([1000]));
        buf.save(&p).unwrap();
        let err = read_image(&p).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("8-bit"), "{err}");
    }

    #[test]
    fn color_png_converted_by_luminance() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rgb.png");
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(3, 1, |x, _| match x {
            0 => Rgb([255, 0, 0]),
            1 => Rgb([10, 200, 30]),
            _ => Rgb([1, 1, 2]),
        });
        buf.save(&p).unwrap();
        let g = read_image(&p).unwrap();
        // 76.245 -> 76; 123.81 -> 124; 1.114 -> 1
        assert_eq!(g.samples(), &[76, 124, 1]);
    }

    #[test]
    fn garbage_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.png");
        std::fs::write(&p, b"definitely not an image").unwrap();
        assert!(read_image(&p).unwrap_err().is_io());
        assert!(matches!(
            read_image(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn jpeg_constant_image_survives() {
        let img = GrayImage::filled(32, 32, 77);
        for q in [10, 50, 100] {
            let bytes = encode(&img, FileFormat::Jpeg { quality: q }).unwrap();
            // DC quantization may move the level by one, but the block stays flat.
            let out = decode_jpeg(&bytes).unwrap();
            let first = out.samples()[0];
            assert!(out.samples().iter().all(|&v| v == first));
            assert!(first.abs_diff(77) <= 1, "q{q}: {first}");
        }
    }
}
