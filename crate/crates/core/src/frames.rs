//! PNG frame I/O and frame-directory handling.
//!
//! Frame directories hold `<zero-padded index>.png` files; lexicographic
//! order of the names is temporal order.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use crate::colorspace::{gray_level_to_luma, luma_to_gray_level, luminance_of, Rgb8Image};
use crate::error::{Error, Result};
use crate::plane::{LabelMap, LumaPlane, Plane};

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

fn save<P, C>(img: &ImageBuffer<P, C>, path: &Path) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            other => Error::Image {
                path: path.to_path_buf(),
                source: other,
            },
        })
}

pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<Rgb8Image> {
    let path = path.as_ref();
    let img = open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    Rgb8Image::new(w as usize, h as usize, img.into_raw())
}

pub fn write_rgb_png(img: &Rgb8Image, path: impl AsRef<Path>) -> Result<()> {
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, img.as_bytes().to_vec())
        .expect("buffer sized from image");
    save(&buf, path.as_ref())
}

/// Read a frame as luminance. Gray PNGs map each level through the sRGB
/// gray path; color PNGs are converted to Lab and reduced to L.
pub fn read_luma_png(path: impl AsRef<Path>) -> Result<LumaPlane> {
    let path = path.as_ref();
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let rgb = Rgb8Image::new(w, h, rgb.into_raw())?;
        return Ok(luminance_of(&rgb));
    }
    let lut: Vec<f32> = (0..=255u8).map(gray_level_to_luma).collect();
    let gray = img.to_luma8();
    Plane::new(w, h, gray.as_raw().iter().map(|&g| lut[g as usize]).collect())
}

/// Write luminance as an 8-bit gray PNG (nearest gray level).
pub fn write_luma_png(luma: &LumaPlane, path: impl AsRef<Path>) -> Result<()> {
    let data = luma.as_slice().iter().map(|&l| luma_to_gray_level(l)).collect();
    let buf = GrayImage::from_raw(luma.width() as u32, luma.height() as u32, data)
        .expect("buffer sized from plane");
    save(&buf, path.as_ref())
}

pub fn read_label_png(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let img = open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    Plane::new(w as usize, h as usize, img.into_raw())
}

pub fn write_label_png(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(labels.width() as u32, labels.height() as u32, labels.as_slice().to_vec())
            .expect("buffer sized from plane");
    save(&buf, path.as_ref())
}

/// Chroma value to 16-bit code: `v / 65535 * 255 - 128` inverted and rounded.
pub fn chroma_to_code(c: f32) -> u16 {
    let v = ((c as f64 + 128.0) / 255.0 * 65535.0).round();
    v.clamp(0.0, 65535.0) as u16
}

pub fn code_to_chroma(v: u16) -> f32 {
    (v as f64 / 65535.0 * 255.0 - 128.0) as f32
}

/// Write A and B as one 16-bit gray PNG of size width x (2 * height), A on top.
pub fn write_ab_png(a: &Plane<f32>, b: &Plane<f32>, path: impl AsRef<Path>) -> Result<()> {
    b.ensure_dims("ab file planes", a.dims())?;
    let data: Vec<u16> = a
        .as_slice()
        .iter()
        .chain(b.as_slice())
        .map(|&c| chroma_to_code(c))
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(a.width() as u32, 2 * a.height() as u32, data).expect("sized");
    save(&buf, path.as_ref())
}

/// Read a stacked A/B 16-bit PNG back into planes.
pub fn read_ab_png(path: impl AsRef<Path>) -> Result<(Plane<f32>, Plane<f32>)> {
    let path = path.as_ref();
    let img = open(path)?;
    if img.color() != image::ColorType::L16 {
        return Err(Error::format(path, format!("ab file must be 16-bit gray, found {:?}", img.color())));
    }
    let img = img.to_luma16();
    let (w, h2) = img.dimensions();
    if h2 % 2 != 0 || h2 == 0 {
        return Err(Error::format(path, format!("ab file height {h2} is not even")));
    }
    let (w, h) = (w as usize, h2 as usize / 2);
    let raw = img.into_raw();
    let (top, bottom) = raw.split_at(w * h);
    Ok((
        Plane::new(w, h, top.iter().map(|&v| code_to_chroma(v)).collect())?,
        Plane::new(w, h, bottom.iter().map(|&v| code_to_chroma(v)).collect())?,
    ))
}

/// A sorted listing of the `.png` frames in a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameList {
    pub dir: PathBuf,
    /// File stems in temporal order.
    pub stems: Vec<String>,
}

impl FrameList {
    pub fn path(&self, index: usize) -> PathBuf {
        self.dir.join(format!("{}.png", self.stems[index]))
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }
}

/// List frames, requiring equal-width numeric names with consecutive indices.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<FrameList> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::Sequence(format!("frame directory {} does not exist", dir.display())));
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("png")) != Some(true) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Sequence(format!("non UTF-8 frame name in {}", dir.display())))?;
        stems.push(stem.to_string());
    }
    if stems.is_empty() {
        return Err(Error::Sequence(format!("no PNG frames in {}", dir.display())));
    }
    stems.sort();
    let width = stems[0].len();
    let mut prev: Option<u64> = None;
    for s in &stems {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Sequence(format!("frame name '{s}' is not a decimal index")));
        }
        if s.len() != width {
            return Err(Error::Sequence(format!(
                "frame name '{s}' is not zero-padded to {width} digits"
            )));
        }
        let n: u64 = s.parse().map_err(|_| Error::Sequence(format!("frame index '{s}' overflows")))?;
        if let Some(p) = prev {
            if n != p + 1 {
                return Err(Error::Sequence(format!("missing frame between {p} and {n}")));
            }
        }
        prev = Some(n);
    }
    Ok(FrameList {
        dir: dir.to_path_buf(),
        stems,
    })
}

pub fn read_rgb_sequence(list: &FrameList) -> Result<Vec<Rgb8Image>> {
    (0..list.len()).map(|i| read_rgb_png(list.path(i))).collect()
}

/// Write `frames` as `000000.png`, `000001.png`, ... into `dir`.
pub fn write_rgb_sequence(frames: &[Rgb8Image], dir: impl AsRef<Path>) -> Result<FrameList> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let list = FrameList {
        dir: dir.to_path_buf(),
        stems: (0..frames.len()).map(|i| format!("{i:06}")).collect(),
    };
    for (i, f) in frames.iter().enumerate() {
        write_rgb_png(f, list.path(i))?;
    }
    Ok(list)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
