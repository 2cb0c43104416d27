//! Corruption masking of warped frames and selective compositing.
//!
//! A pixel is flagged when its warped color strays from the previous final
//! frame by more than the PSNR threshold allows:
//! `20 * log10(peak / ||warped - prev||) < tau`. Flagged pixels take the
//! per-frame colorizer's chroma, the rest keep the warped chroma.

use serde::{Deserialize, Serialize};

use crate::colorspace::LabFrame;
use crate::error::{Error, Result};
use crate::plane::{BinaryPlane, Plane};

/// Default PSNR threshold in dB.
pub const DEFAULT_TAU_DB: f64 = 25.0;

/// Smallest per-frame peak; keeps near-gray frames from producing a zero peak.
pub const PEAK_FLOOR: f64 = 1.0;

/// Channels entering the per-pixel distortion norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormChannels {
    /// A and B only.
    #[default]
    Chroma,
    /// L, A and B.
    FullLab,
}

/// How the peak term of the per-pixel PSNR is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakMode {
    /// Maximum absolute value of the previous final frame over the norm's
    /// channels, floored at [`PEAK_FLOOR`].
    #[default]
    PerFrame,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionOptions {
    pub norm: NormChannels,
    pub peak: PeakMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionMask {
    /// 1 marks a corrupted pixel.
    pub mask: BinaryPlane,
    pub tau_db: f64,
}

impl CorrectionMask {
    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    pub fn corrected_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m == 1).count()
    }

    pub fn corrected_fraction(&self) -> f64 {
        self.corrected_count() as f64 / self.mask.len() as f64
    }

    pub fn is_empty(&self) -> bool {
        self.corrected_count() == 0
    }
}

fn frame_peak(frame: &LabFrame, norm: NormChannels) -> f64 {
    let chroma = frame.a.as_slice().iter().chain(frame.b.as_slice());
    let peak = match norm {
        NormChannels::Chroma => chroma.fold(0.0f32, |m, &v| m.max(v.abs())),
        NormChannels::FullLab => chroma
            .chain(frame.l.as_slice())
            .fold(0.0f32, |m, &v| m.max(v.abs())),
    };
    (peak as f64).max(PEAK_FLOOR)
}

/// Per-pixel PSNR in dB; `+inf` for zero distortion.
#[inline]
pub fn pixel_psnr(peak: f64, distortion: f64) -> f64 {
    if distortion == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / distortion).log10()
    }
}

/// Flag warped pixels whose per-pixel PSNR against `prev_final` is below `tau_db`,
/// plus every pixel whose warp sample fell out of bounds.
pub fn correction_mask(
    warped: &LabFrame,
    validity: &BinaryPlane,
    prev_final: &LabFrame,
    tau_db: f64,
    options: &CorrectionOptions,
) -> Result<CorrectionMask> {
    let dims = warped.dims();
    validity.ensure_dims("correction validity", dims)?;
    prev_final.ensure_dims("correction previous frame", dims)?;
    if !tau_db.is_finite() {
        return Err(Error::Config(format!("tau must be finite, got {tau_db}")));
    }

    let peak = match options.peak {
        PeakMode::PerFrame => frame_peak(prev_final, options.norm),
        PeakMode::Fixed(p) => p,
    };

    let n = warped.l.len();
    let mut mask = Vec::with_capacity(n);
    for i in 0..n {
        if validity.as_slice()[i] == 0 {
            mask.push(1);
            continue;
        }
        let da = (warped.a.as_slice()[i] - prev_final.a.as_slice()[i]) as f64;
        let db = (warped.b.as_slice()[i] - prev_final.b.as_slice()[i]) as f64;
        let mut sq = da * da + db * db;
        if options.norm == NormChannels::FullLab {
            let dl = (warped.l.as_slice()[i] - prev_final.l.as_slice()[i]) as f64;
            sq += dl * dl;
        }
        mask.push(u8::from(pixel_psnr(peak, sq.sqrt()) < tau_db));
    }
    Ok(CorrectionMask {
        mask: Plane::new(dims.0, dims.1, mask)?,
        tau_db,
    })
}

/// Keep warped chroma where the mask is 0 and take the colorizer's where it is 1.
pub fn composite(warped: &LabFrame, colorized: &LabFrame, mask: &CorrectionMask) -> Result<LabFrame> {
    let dims = warped.dims();
    colorized.ensure_dims("composite colorized frame", dims)?;
    mask.mask.ensure_dims("composite mask", dims)?;
    if let Some(index) = warped
        .l
        .as_slice()
        .iter()
        .zip(colorized.l.as_slice())
        .position(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(Error::LuminanceMismatch { index });
    }

    let select = |from_warp: &Plane<f32>, from_color: &Plane<f32>| -> Vec<f32> {
        from_warp
            .as_slice()
            .iter()
            .zip(from_color.as_slice())
            .zip(mask.mask.as_slice())
            .map(|((&w, &c), &m)| if m == 1 { c } else { w })
            .collect()
    };
    let a = select(&warped.a, &colorized.a);
    let b = select(&warped.b, &colorized.b);
    LabFrame::new(
        warped.l.clone(),
        Plane::new(dims.0, dims.1, a)?,
        Plane::new(dims.0, dims.1, b)?,
    )
}
