//! Dense backward optical flow: estimation, `.flo` interchange, and error measures.
//!
//! A [`FlowField`] lives on the target frame's grid. For target pixel
//! `(x, y)` the matching source location is `(x + u, y + v)`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::{LumaPlane, Plane};

/// Magic number of the Middlebury `.flo` format ("PIEH" in ASCII).
pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Plane<f32>,
    pub v: Plane<f32>,
}

impl FlowField {
    pub fn new(u: Plane<f32>, v: Plane<f32>) -> Result<Self> {
        v.ensure_dims("flow v plane", u.dims())?;
        if !u.as_slice().iter().chain(v.as_slice()).all(|d| d.is_finite()) {
            return Err(Error::Config("flow displacements must be finite".into()));
        }
        Ok(FlowField { u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::uniform(width, height, 0.0, 0.0)
    }

    pub fn uniform(width: usize, height: usize, u: f32, v: f32) -> Result<Self> {
        Self::new(Plane::filled(width, height, u)?, Plane::filled(width, height, v)?)
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        (self.u.get(x, y), self.v.get(x, y))
    }
}

/// Configuration of the built-in pyramidal Lucas-Kanade estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub window_radius: usize,
    pub iterations: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            window_radius: 4,
            iterations: 12,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 || self.window_radius < 1 || self.iterations < 1 {
            return Err(Error::Config(format!(
                "flow parameters must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Supplies the backward flow for frame `frame` (pointing into `frame - 1`).
pub trait FlowSource {
    fn name(&self) -> &str;

    fn backward_flow(
        &mut self,
        frame: usize,
        target: &LumaPlane,
        source: &LumaPlane,
    ) -> Result<FlowField>;
}

/// Built-in coarse-to-fine dense Lucas-Kanade estimator.
#[derive(Debug, Clone, Default)]
pub struct PyramidalLucasKanade {
    pub params: FlowParams,
}

impl PyramidalLucasKanade {
    pub fn new(params: FlowParams) -> Result<Self> {
        params.validate()?;
        Ok(PyramidalLucasKanade { params })
    }
}

impl FlowSource for PyramidalLucasKanade {
    fn name(&self) -> &str {
        "builtin"
    }

    fn backward_flow(&mut self, _frame: usize, target: &LumaPlane, source: &LumaPlane) -> Result<FlowField> {
        estimate_flow(target, source, &self.params)
    }
}

/// Reads precomputed flow from a directory of `.flo` files, one per frame,
/// named after the frame's file stem.
#[derive(Debug, Clone)]
pub struct FloDirectory {
    dir: PathBuf,
    stems: Vec<String>,
}

impl FloDirectory {
    pub fn new(dir: impl Into<PathBuf>, stems: Vec<String>) -> Self {
        FloDirectory {
            dir: dir.into(),
            stems,
        }
    }

    pub fn path_for(&self, frame: usize) -> Option<PathBuf> {
        self.stems.get(frame).map(|s| self.dir.join(format!("{s}.flo")))
    }
}

impl FlowSource for FloDirectory {
    fn name(&self) -> &str {
        "flo"
    }

    fn backward_flow(&mut self, frame: usize, target: &LumaPlane, _source: &LumaPlane) -> Result<FlowField> {
        let path = self
            .path_for(frame)
            .ok_or_else(|| Error::Sequence(format!("no flow file name for frame {frame}")))?;
        let flow = load_flo(&path)?;
        if flow.dims() != target.dims() {
            return Err(Error::dims("flow file", target.dims(), flow.dims()));
        }
        Ok(flow)
    }
}

/// Estimate backward flow: for each target pixel, where it came from in `source`.
pub fn estimate_flow(target: &LumaPlane, source: &LumaPlane, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    source.ensure_dims("flow source frame", target.dims())?;

    let target_pyr = build_pyramid(target, params.pyramid_levels);
    let source_pyr = build_pyramid(source, params.pyramid_levels);

    let coarsest = target_pyr.len() - 1;
    let (cw, ch) = target_pyr[coarsest].dims();
    let mut u = Plane::filled(cw, ch, 0.0f32)?;
    let mut v = Plane::filled(cw, ch, 0.0f32)?;

    for level in (0..=coarsest).rev() {
        let t = &target_pyr[level];
        let s = &source_pyr[level];
        if level != coarsest {
            u = upsample_flow(&u, t.dims());
            v = upsample_flow(&v, t.dims());
        }
        refine_level(t, s, &mut u, &mut v, params);
    }

    FlowField::new(u, v)
}

fn build_pyramid(base: &LumaPlane, levels: usize) -> Vec<LumaPlane> {
    let mut pyr = vec![base.clone()];
    while pyr.len() < levels {
        let prev = pyr.last().expect("nonempty");
        if prev.width() < 8 || prev.height() < 8 {
            break;
        }
        pyr.push(downsample(prev));
    }
    pyr
}

// Binomial blur followed by 2x decimation.
fn downsample(src: &LumaPlane) -> LumaPlane {
    let blurred = blur(src);
    let (w, h) = src.dims();
    Plane::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| blurred.get(2 * x, 2 * y)).expect("nonzero dims")
}

fn blur(src: &LumaPlane) -> LumaPlane {
    const K: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (w, h) = src.dims();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let rows = Plane::from_fn(w, h, |x, y| {
        K.iter()
            .enumerate()
            .map(|(k, &wt)| wt * src.get(clamp(x as isize + k as isize - 2, w), y))
            .sum::<f32>()
    })
    .expect("nonzero dims");
    Plane::from_fn(w, h, |x, y| {
        K.iter()
            .enumerate()
            .map(|(k, &wt)| wt * rows.get(x, clamp(y as isize + k as isize - 2, h)))
            .sum::<f32>()
    })
    .expect("nonzero dims")
}

fn median3x3(p: &Plane<f32>) -> Plane<f32> {
    let (w, h) = p.dims();
    Plane::from_fn(w, h, |x, y| {
        let mut n = [0.0f32; 9];
        let mut k = 0;
        for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                n[k] = p.get(xx, yy);
                k += 1;
            }
        }
        let n = &mut n[..k];
        n.sort_by(f32::total_cmp);
        n[k / 2]
    })
    .expect("nonzero dims")
}

fn upsample_flow(coarse: &Plane<f32>, dims: (usize, usize)) -> Plane<f32> {
    Plane::from_fn(dims.0, dims.1, |x, y| {
        let cx = (x as f32 + 0.5) * 0.5 - 0.5;
        let cy = (y as f32 + 0.5) * 0.5 - 0.5;
        2.0 * coarse.sample_clamped(cx, cy)
    })
    .expect("nonzero dims")
}

fn gradients(img: &LumaPlane) -> (Plane<f32>, Plane<f32>) {
    let (w, h) = img.dims();
    let gx = Plane::from_fn(w, h, |x, y| {
        let l = x.saturating_sub(1);
        let r = (x + 1).min(w - 1);
        if r == l {
            0.0
        } else {
            (img.get(r, y) - img.get(l, y)) / (r - l) as f32
        }
    })
    .expect("nonzero dims");
    let gy = Plane::from_fn(w, h, |x, y| {
        let t = y.saturating_sub(1);
        let b = (y + 1).min(h - 1);
        if b == t {
            0.0
        } else {
            (img.get(x, b) - img.get(x, t)) / (b - t) as f32
        }
    })
    .expect("nonzero dims");
    (gx, gy)
}

// Per-window Gauss-Newton on a translation using the target's gradients.
// Samples whose displaced position leaves the source frame are dropped.
fn refine_level(
    target: &LumaPlane,
    source: &LumaPlane,
    u: &mut Plane<f32>,
    v: &mut Plane<f32>,
    params: &FlowParams,
) {
    let (w, h) = target.dims();
    let (gx, gy) = gradients(target);
    let gxs = gx.as_slice();
    let gys = gy.as_slice();
    let ts = target.as_slice();
    let (max_x, max_y) = ((w - 1) as f32, (h - 1) as f32);
    let r = params.window_radius;

    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
            let i = y * w + x;
            let (mut pu, mut pv) = (u.as_slice()[i], v.as_slice()[i]);
            for _ in 0..params.iterations {
                let (mut a, mut b, mut c, mut ex, mut ey) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for qy in y0..=y1 {
                    let sy = qy as f32 + pv;
                    if !(0.0..=max_y).contains(&sy) {
                        continue;
                    }
                    for qx in x0..=x1 {
                        let sx = qx as f32 + pu;
                        if !(0.0..=max_x).contains(&sx) {
                            continue;
                        }
                        let q = qy * w + qx;
                        let (ga, gb) = (gxs[q] as f64, gys[q] as f64);
                        let e = (ts[q] - source.sample_bilinear(sx, sy)) as f64;
                        a += ga * ga;
                        b += ga * gb;
                        c += gb * gb;
                        ex += ga * e;
                        ey += gb * e;
                    }
                }
                let det = a * c - b * b;
                let trace = a + c;
                // Stop on ill-conditioned windows (flat or edge-only texture).
                if trace < 1e-9 || !(det > 1e-6 * trace * trace) {
                    break;
                }
                let du = ((c * ex - b * ey) / det).clamp(-2.0, 2.0);
                let dv = ((a * ey - b * ex) / det).clamp(-2.0, 2.0);
                if !du.is_finite() || !dv.is_finite() {
                    break;
                }
                pu += du as f32;
                pv += dv as f32;
                if du.abs().max(dv.abs()) < 1e-3 {
                    break;
                }
            }
            u.as_mut_slice()[i] = pu;
            v.as_mut_slice()[i] = pv;
        }
    }
    *u = median3x3(u);
    *v = median3x3(v);
}

/// Mean endpoint error between two fields.
pub fn endpoint_error(flow: &FlowField, reference: &FlowField) -> Result<f64> {
    if flow.dims() != reference.dims() {
        return Err(Error::dims("endpoint error", reference.dims(), flow.dims()));
    }
    let n = flow.u.len() as f64;
    let total: f64 = flow
        .u
        .as_slice()
        .iter()
        .zip(flow.v.as_slice())
        .zip(reference.u.as_slice().iter().zip(reference.v.as_slice()))
        .map(|((&u, &v), (&ur, &vr))| {
            let du = (u - ur) as f64;
            let dv = (v - vr) as f64;
            (du * du + dv * dv).sqrt()
        })
        .sum();
    Ok(total / n)
}

/// Serialize to Middlebury `.flo` bytes.
pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(12 + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in flow.u.as_slice().iter().zip(flow.v.as_slice()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parse Middlebury `.flo` bytes. `origin` is only used in error messages.
pub fn decode_flo(bytes: &[u8], origin: &Path) -> Result<FlowField> {
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
    if bytes.len() < 12 {
        return Err(Error::format(origin, "truncated .flo header"));
    }
    if f32::from_le_bytes(word(0)).to_bits() != FLO_MAGIC.to_bits() {
        return Err(Error::format(origin, "bad .flo magic number"));
    }
    let w = i32::from_le_bytes(word(4));
    let h = i32::from_le_bytes(word(8));
    if w <= 0 || h <= 0 {
        return Err(Error::format(origin, format!("nonpositive .flo dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::format(origin, "oversized .flo dimensions"))?;
    if bytes.len() < expected {
        return Err(Error::format(
            origin,
            format!("truncated .flo payload: {} of {expected} bytes", bytes.len()),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(origin, "trailing bytes after .flo payload"));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in bytes[12..].chunks_exact(8) {
        u.push(f32::from_le_bytes(px[0..4].try_into().expect("4 bytes")));
        v.push(f32::from_le_bytes(px[4..8].try_into().expect("4 bytes")));
    }
    if !u.iter().chain(&v).all(|d| d.is_finite()) {
        return Err(Error::format(origin, "non-finite flow value"));
    }
    Ok(FlowField {
        u: Plane::new(w, h, u)?,
        v: Plane::new(w, h, v)?,
    })
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))
}

pub fn load_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_field(w: usize, h: usize, seed: u64) -> FlowField {
        let mut rng = StdRng::seed_from_u64(seed);
        let u = Plane::from_fn(w, h, |_, _| rng.random_range(-10.0..10.0)).unwrap();
        let v = Plane::from_fn(w, h, |_, _| rng.random_range(-10.0..10.0)).unwrap();
        FlowField::new(u, v).unwrap()
    }

    #[test]
    fn epe_trivial_cases() {
        let a = FlowField::uniform(5, 4, 3.0, 4.0).unwrap();
        let z = FlowField::zeros(5, 4).unwrap();
        assert_eq!(endpoint_error(&a, &a).unwrap(), 0.0);
        assert!((endpoint_error(&a, &z).unwrap() - 5.0).abs() < 1e-12);
        assert!(endpoint_error(&a, &FlowField::zeros(4, 4).unwrap()).is_err());
    }

    #[test]
    fn epe_matches_double_loop() {
        let a = random_field(9, 7, 1);
        let b = random_field(9, 7, 2);
        let mut sum = 0.0f64;
        for y in 0..7 {
            for x in 0..9 {
                let (u, v) = a.at(x, y);
                let (ur, vr) = b.at(x, y);
                sum += (((u - ur) as f64).powi(2) + ((v - vr) as f64).powi(2)).sqrt();
            }
        }
        assert!((endpoint_error(&a, &b).unwrap() - sum / 63.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_bytes() {
        let bytes = encode_flo(&FlowField::zeros(1, 1).unwrap());
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(&bytes[4..8], &1i32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1i32.to_le_bytes());
        assert!(bytes[12..].iter().all(|&b| b == 0));
    }

    #[test]
    fn hand_built_single_pixel_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"PIEH");
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&2.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
        let flow = decode_flo(&bytes, Path::new("mem")).unwrap();
        assert_eq!(flow.dims(), (1, 1));
        assert_eq!(flow.at(0, 0), (2.5, -1.0));
    }

    #[test]
    fn rejects_malformed_files() {
        let good = encode_flo(&FlowField::uniform(2, 3, 1.0, 2.0).unwrap());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_flo(&bad_magic, Path::new("m")), Err(Error::Format { .. })));
        assert!(matches!(decode_flo(&good[..good.len() - 1], Path::new("m")), Err(Error::Format { .. })));
        assert!(matches!(decode_flo(&good[..8], Path::new("m")), Err(Error::Format { .. })));
        let mut zero_w = good.clone();
        zero_w[4..8].copy_from_slice(&0i32.to_le_bytes());
        assert!(matches!(decode_flo(&zero_w, Path::new("m")), Err(Error::Format { .. })));
        let mut neg_h = good;
        neg_h[8..12].copy_from_slice(&(-3i32).to_le_bytes());
        assert!(matches!(decode_flo(&neg_h, Path::new("m")), Err(Error::Format { .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.flo");
        let flow = random_field(13, 6, 9);
        write_flo(&flow, &path).unwrap();
        assert_eq!(load_flo(&path).unwrap(), flow);
        assert!(matches!(load_flo(dir.path().join("missing.flo")), Err(Error::Io { .. })));
    }

    #[test]
    fn constant_image_gives_finite_flow() {
        let a = Plane::filled(32, 32, 40.0f32).unwrap();
        let f = estimate_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(f.u.as_slice().iter().chain(f.v.as_slice()).all(|d| d.is_finite()));
    }

    #[test]
    fn rejects_mismatched_frames_and_params() {
        let a = Plane::filled(8, 8, 1.0f32).unwrap();
        let b = Plane::filled(8, 9, 1.0f32).unwrap();
        assert!(matches!(
            estimate_flow(&a, &b, &FlowParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = FlowParams { iterations: 0, ..FlowParams::default() };
        assert!(estimate_flow(&a, &a, &bad).is_err());
    }

    proptest! {
        #[test]
        fn flo_round_trip_is_bit_exact(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let flow = random_field(w, h, seed);
            let bytes = encode_flo(&flow);
            prop_assert_eq!(bytes.len(), 12 + 8 * w * h);
            let back = decode_flo(&bytes, Path::new("mem")).unwrap();
            prop_assert_eq!(back.dims(), (w, h));
            for (a, b) in flow.u.as_slice().iter().chain(flow.v.as_slice())
                .zip(back.u.as_slice().iter().chain(back.v.as_slice())) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
