//! sRGB (D65) <-> CIELAB conversion on whole frames.
//!
//! Lab planes are kept in floating point; quantization to 8 bits happens
//! only when exporting back to RGB, with a per-channel clamp for
//! out-of-gamut values.

use crate::error::{Error, Result};
use crate::plane::{LumaPlane, Plane};

/// Lower bound of the A/B chrominance range.
pub const CHROMA_MIN: f32 = -128.0;
/// Upper bound of the A/B chrominance range.
pub const CHROMA_MAX: f32 = 127.0;

// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

// Reference white from the matrix rows so that RGB white lands on A=B=0.
const WHITE_X: f64 = RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2];
const WHITE_Y: f64 = RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2];
const WHITE_Z: f64 = RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2];

const EPSILON: f64 = 216.0 / 24389.0; // (6/29)^3
const KAPPA: f64 = 24389.0 / 27.0;

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Rgb8Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "width and height must be at least 1",
            });
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "RGB data length does not equal width * height * 3",
            });
        }
        Ok(Rgb8Image {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
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

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Lab frame: luminance L in [0, 100], chrominance A, B in [-128, 127].
#[derive(Debug, Clone, PartialEq)]
pub struct LabFrame {
    pub l: Plane<f32>,
    pub a: Plane<f32>,
    pub b: Plane<f32>,
}

impl LabFrame {
    pub fn new(l: Plane<f32>, a: Plane<f32>, b: Plane<f32>) -> Result<Self> {
        a.ensure_dims("lab frame A plane", l.dims())?;
        b.ensure_dims("lab frame B plane", l.dims())?;
        Ok(LabFrame { l, a, b })
    }

    /// Frame with the given luminance and no color.
    pub fn gray(l: LumaPlane) -> Self {
        let zeros = l.map(|_| 0.0);
        LabFrame {
            a: zeros.clone(),
            b: zeros,
            l,
        }
    }

    pub fn width(&self) -> usize {
        self.l.width()
    }

    pub fn height(&self) -> usize {
        self.l.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.l.dims()
    }

    pub(crate) fn ensure_dims(&self, context: &'static str, expected: (usize, usize)) -> Result<()> {
        self.l.ensure_dims(context, expected)
    }
}

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

#[inline]
fn lab_f_inv(f: f64) -> f64 {
    let cube = f * f * f;
    if cube > EPSILON {
        cube
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Convert one 8-bit sRGB pixel to (L, A, B).
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f32; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c as f64 / 255.0));
    let xyz = RGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]);
    let fx = lab_f(xyz[0] / WHITE_X);
    let fy = lab_f(xyz[1] / WHITE_Y);
    let fz = lab_f(xyz[2] / WHITE_Z);
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    let a = (500.0 * (fx - fy)).clamp(CHROMA_MIN as f64, CHROMA_MAX as f64);
    let b = (200.0 * (fy - fz)).clamp(CHROMA_MIN as f64, CHROMA_MAX as f64);
    [l as f32, a as f32, b as f32]
}

/// Convert one Lab pixel to 8-bit sRGB, clamping each channel into range.
pub fn lab_pixel_to_rgb(lab: [f32; 3]) -> [u8; 3] {
    let [l, a, b] = lab.map(f64::from);
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let xyz = [
        WHITE_X * lab_f_inv(fx),
        WHITE_Y * lab_f_inv(fy),
        WHITE_Z * lab_f_inv(fz),
    ];
    XYZ_TO_RGB.map(|row| {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        let encoded = linear_to_srgb(lin.clamp(0.0, 1.0));
        (encoded * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

pub fn rgb_to_lab(img: &Rgb8Image) -> LabFrame {
    let (w, h) = img.dims();
    let n = w * h;
    let (mut l, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in img.pixels() {
        let [pl, pa, pb] = rgb_pixel_to_lab(px);
        l.push(pl);
        a.push(pa);
        b.push(pb);
    }
    // Dimensions come from a valid image, so construction cannot fail.
    LabFrame {
        l: Plane::new(w, h, l).expect("valid dims"),
        a: Plane::new(w, h, a).expect("valid dims"),
        b: Plane::new(w, h, b).expect("valid dims"),
    }
}

pub fn lab_to_rgb(frame: &LabFrame) -> Rgb8Image {
    let (w, h) = frame.dims();
    let mut data = Vec::with_capacity(w * h * 3);
    let planes = frame
        .l
        .as_slice()
        .iter()
        .zip(frame.a.as_slice())
        .zip(frame.b.as_slice());
    for ((&l, &a), &b) in planes {
        data.extend_from_slice(&lab_pixel_to_rgb([l, a, b]));
    }
    Rgb8Image::new(w, h, data).expect("valid dims")
}

/// The L plane of [`rgb_to_lab`].
pub fn luminance_of(img: &Rgb8Image) -> LumaPlane {
    let data = img.pixels().map(|px| rgb_pixel_to_lab(px)[0]).collect();
    Plane::new(img.width(), img.height(), data).expect("valid dims")
}

/// Luminance of an 8-bit gray level, taken through the sRGB gray path.
pub fn gray_level_to_luma(level: u8) -> f32 {
    rgb_pixel_to_lab([level, level, level])[0]
}

/// Nearest 8-bit gray level for a luminance value.
pub fn luma_to_gray_level(l: f32) -> u8 {
    lab_pixel_to_rgb([l, 0.0, 0.0])[1]
}
