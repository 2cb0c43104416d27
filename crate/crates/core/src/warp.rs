//! Backward warping of chrominance along a flow field.

use crate::colorspace::LabFrame;
use crate::error::Result;
use crate::flow::FlowField;
use crate::plane::{BinaryPlane, LumaPlane, Plane};

/// Chrominance pulled from the previous frame, plus where the pull landed in-bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedChroma {
    pub a: Plane<f32>,
    pub b: Plane<f32>,
    /// 1 where the sample position was inside the source frame.
    pub valid: BinaryPlane,
}

impl WarpedChroma {
    pub fn dims(&self) -> (usize, usize) {
        self.a.dims()
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|&&v| v == 0).count()
    }
}

/// Sample `prev_final`'s A/B at `(x + u, y + v)` for every pixel.
///
/// Positions outside `[0, W-1] x [0, H-1]` are marked invalid and carry A = B = 0.
pub fn warp_chroma(prev_final: &LabFrame, flow: &FlowField) -> Result<WarpedChroma> {
    flow.u.ensure_dims("warp flow", prev_final.dims())?;
    let (w, h) = prev_final.dims();
    let max_x = (w - 1) as f32;
    let max_y = (h - 1) as f32;

    let mut a = Vec::with_capacity(w * h);
    let mut b = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (du, dv) = flow.at(x, y);
            let px = x as f32 + du;
            let py = y as f32 + dv;
            if (0.0..=max_x).contains(&px) && (0.0..=max_y).contains(&py) {
                a.push(prev_final.a.sample_bilinear(px, py));
                b.push(prev_final.b.sample_bilinear(px, py));
                valid.push(1);
            } else {
                a.push(0.0);
                b.push(0.0);
                valid.push(0);
            }
        }
    }
    Ok(WarpedChroma {
        a: Plane::new(w, h, a)?,
        b: Plane::new(w, h, b)?,
        valid: Plane::new(w, h, valid)?,
    })
}

/// Combine the current luminance with warped chroma into the warped frame.
pub fn assemble_warp_frame(luma: &LumaPlane, chroma: &WarpedChroma) -> Result<LabFrame> {
    chroma.a.ensure_dims("warped chroma", luma.dims())?;
    LabFrame::new(luma.clone(), chroma.a.clone(), chroma.b.clone())
}
