//! Per-frame colorization providers.
//!
//! A provider receives a frame's luminance, optional instance masks and the
//! active prompt, and returns A/B chrominance planes. The engine always
//! pairs that chroma with the request's own luminance.

mod external;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorspace::{LabFrame, CHROMA_MAX, CHROMA_MIN};
use crate::error::{Error, ProviderError, Result};
use crate::plane::{LabelMap, LumaPlane, Plane};
use crate::prompt::PromptRecord;

pub use external::{ExternalColorizer, ExternalSpec, DEFAULT_TIMEOUT, PROTOCOL_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct ColorizeRequest {
    pub frame_index: usize,
    pub luma: LumaPlane,
    pub masks: Option<LabelMap>,
    pub prompt: PromptRecord,
}

impl ColorizeRequest {
    pub fn new(frame_index: usize, luma: LumaPlane, masks: Option<LabelMap>, prompt: PromptRecord) -> Result<Self> {
        if let Some(m) = &masks {
            m.ensure_dims("colorize request masks", luma.dims())?;
        }
        Ok(ColorizeRequest {
            frame_index,
            luma,
            masks,
            prompt,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorizeResponse {
    pub frame_index: usize,
    pub a: Plane<f32>,
    pub b: Plane<f32>,
}

pub trait Colorizer {
    fn name(&self) -> &str;

    fn colorize(&mut self, request: &ColorizeRequest) -> Result<ColorizeResponse>;

    /// Release provider resources. Called once after the last frame.
    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<C: Colorizer + ?Sized> Colorizer for Box<C> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn colorize(&mut self, request: &ColorizeRequest) -> Result<ColorizeResponse> {
        (**self).colorize(request)
    }

    fn shutdown(&mut self) -> Result<()> {
        (**self).shutdown()
    }
}

/// Check a response against its request. Wrong dimensions are fatal;
/// out-of-range chroma is clamped with a warning.
pub fn validate_response(request: &ColorizeRequest, mut response: ColorizeResponse) -> Result<ColorizeResponse> {
    let expected = request.luma.dims();
    for plane in [&response.a, &response.b] {
        if plane.dims() != expected {
            return Err(Error::provider(
                request.frame_index,
                ProviderError::DimensionMismatch {
                    expected_width: expected.0,
                    expected_height: expected.1,
                    actual_width: plane.width(),
                    actual_height: plane.height(),
                },
            ));
        }
    }
    let mut clamped = 0usize;
    for plane in [&mut response.a, &mut response.b] {
        for c in plane.as_mut_slice() {
            if !c.is_finite() {
                return Err(Error::provider(
                    request.frame_index,
                    ProviderError::Malformed("non-finite chroma".into()),
                ));
            }
            if *c < CHROMA_MIN || *c > CHROMA_MAX {
                *c = c.clamp(CHROMA_MIN, CHROMA_MAX);
                clamped += 1;
            }
        }
    }
    if clamped > 0 {
        log::warn!(
            "frame {}: clamped {clamped} chroma samples into [{CHROMA_MIN}, {CHROMA_MAX}]",
            request.frame_index
        );
    }
    response.frame_index = request.frame_index;
    Ok(response)
}

/// Run a provider, validate its reply, and attach the request luminance.
pub fn colorize_frame<C: Colorizer + ?Sized>(provider: &mut C, request: &ColorizeRequest) -> Result<LabFrame> {
    let response = validate_response(request, provider.colorize(request)?)?;
    LabFrame::new(request.luma.clone(), response.a, response.b)
}

/// Returns the ground-truth frame's chroma verbatim.
pub fn oracle_colorize(gt_frame: &LabFrame, request: &ColorizeRequest) -> Result<ColorizeResponse> {
    gt_frame.ensure_dims("oracle ground truth", request.luma.dims())?;
    Ok(ColorizeResponse {
        frame_index: request.frame_index,
        a: gt_frame.a.clone(),
        b: gt_frame.b.clone(),
    })
}

/// Test provider backed by ground-truth color frames.
#[derive(Debug, Clone)]
pub struct OracleColorizer {
    frames: Vec<LabFrame>,
}

impl OracleColorizer {
    pub fn new(frames: Vec<LabFrame>) -> Self {
        OracleColorizer { frames }
    }
}

impl Colorizer for OracleColorizer {
    fn name(&self) -> &str {
        "oracle"
    }

    fn colorize(&mut self, request: &ColorizeRequest) -> Result<ColorizeResponse> {
        let gt = self.frames.get(request.frame_index).ok_or_else(|| {
            Error::provider(
                request.frame_index,
                ProviderError::Other("no ground-truth frame for this index".into()),
            )
        })?;
        oracle_colorize(gt, request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaletteEntry {
    #[serde(rename = "break")]
    pub luma_break: f32,
    pub a: f32,
    pub b: f32,
}

/// Luminance bands mapped to fixed chroma; breaks ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PaletteEntry>", into = "Vec<PaletteEntry>")]
pub struct Palette(Vec<PaletteEntry>);

impl TryFrom<Vec<PaletteEntry>> for Palette {
    type Error = Error;

    fn try_from(entries: Vec<PaletteEntry>) -> Result<Self> {
        Palette::new(entries)
    }
}

impl From<Palette> for Vec<PaletteEntry> {
    fn from(p: Palette) -> Self {
        p.0
    }
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("palette must have at least one entry".into()));
        }
        if entries.windows(2).any(|w| w[0].luma_break > w[1].luma_break) {
            return Err(Error::Config("palette breaks must be sorted ascending".into()));
        }
        Ok(Palette(entries))
    }

    /// Four warm-to-cool bands used when no palette is configured.
    pub fn default_bands() -> Self {
        Palette(vec![
            PaletteEntry { luma_break: 25.0, a: 20.0, b: -30.0 },
            PaletteEntry { luma_break: 50.0, a: -25.0, b: 20.0 },
            PaletteEntry { luma_break: 75.0, a: 30.0, b: 35.0 },
            PaletteEntry { luma_break: 100.0, a: 5.0, b: 40.0 },
        ])
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.0
    }

    /// Index of the first break at or above `l`; the last entry if none.
    pub fn band(&self, l: f32) -> usize {
        self.0
            .iter()
            .position(|e| e.luma_break >= l)
            .unwrap_or(self.0.len() - 1)
    }
}

/// Chroma from luminance bands; instance label k rotates the palette by k entries.
pub fn palette_colorize(request: &ColorizeRequest, palette: &Palette) -> ColorizeResponse {
    let n = palette.0.len();
    let luma = request.luma.as_slice();
    let mut a = Vec::with_capacity(luma.len());
    let mut b = Vec::with_capacity(luma.len());
    for (i, &l) in luma.iter().enumerate() {
        let label = request.masks.as_ref().map_or(0, |m| m.as_slice()[i] as usize);
        let entry = palette.0[(palette.band(l) + label) % n];
        a.push(entry.a);
        b.push(entry.b);
    }
    let (w, h) = request.luma.dims();
    ColorizeResponse {
        frame_index: request.frame_index,
        a: Plane::new(w, h, a).expect("luma dims"),
        b: Plane::new(w, h, b).expect("luma dims"),
    }
}

/// Picks a palette by the request's prompt text, falling back to a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteColorizer {
    pub default: Palette,
    #[serde(default)]
    pub prompts: BTreeMap<String, Palette>,
}

impl PaletteColorizer {
    pub fn new(default: Palette) -> Self {
        PaletteColorizer {
            default,
            prompts: BTreeMap::new(),
        }
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>, palette: Palette) -> Self {
        self.prompts.insert(prompt.into(), palette);
        self
    }

    /// Load either a bare palette array or `{"default": [...], "prompts": {...}}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum File {
            Bare(Palette),
            Keyed(PaletteColorizer),
        }
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: File = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(match parsed {
            File::Bare(p) => PaletteColorizer::new(p),
            File::Keyed(k) => k,
        })
    }
}

impl Default for PaletteColorizer {
    fn default() -> Self {
        PaletteColorizer::new(Palette::default_bands())
    }
}

impl Colorizer for PaletteColorizer {
    fn name(&self) -> &str {
        "palette"
    }

    fn colorize(&mut self, request: &ColorizeRequest) -> Result<ColorizeResponse> {
        let palette = self.prompts.get(&request.prompt.text).unwrap_or(&self.default);
        Ok(palette_colorize(request, palette))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{PromptOrigin, GENERIC_PROMPT};

    fn prompt(text: &str) -> PromptRecord {
        PromptRecord {
            frame_index: 0,
            text: text.into(),
            origin: PromptOrigin::Generic,
        }
    }

    fn half_black_white() -> LumaPlane {
        Plane::from_fn(8, 4, |x, _| if x < 4 { 0.0 } else { 100.0 }).unwrap()
    }

    fn two_band() -> Palette {
        Palette::new(vec![
            PaletteEntry { luma_break: 50.0, a: -20.0, b: 10.0 },
            PaletteEntry { luma_break: 100.0, a: 30.0, b: 40.0 },
            PaletteEntry { luma_break: 100.0, a: 7.0, b: -7.0 },
        ])
        .unwrap()
    }

    #[test]
    fn single_entry_palette_is_uniform() {
        let p = Palette::new(vec![PaletteEntry { luma_break: 100.0, a: 10.0, b: 10.0 }]).unwrap();
        let req = ColorizeRequest::new(3, half_black_white(), None, prompt(GENERIC_PROMPT)).unwrap();
        let r = palette_colorize(&req, &p);
        assert_eq!(r.frame_index, 3);
        assert!(r.a.as_slice().iter().all(|&a| a == 10.0));
        assert!(r.b.as_slice().iter().all(|&b| b == 10.0));
    }

    #[test]
    fn two_band_regions_and_mask_rotation() {
        let p = two_band();
        let req = ColorizeRequest::new(0, half_black_white(), None, prompt("x")).unwrap();
        let r = palette_colorize(&req, &p);
        for y in 0..4 {
            for x in 0..8 {
                let (ea, eb) = if x < 4 { (-20.0, 10.0) } else { (30.0, 40.0) };
                assert_eq!((r.a.get(x, y), r.b.get(x, y)), (ea, eb));
            }
        }

        // White half split into labels 1 (top) and 2 (bottom).
        let masks = Plane::from_fn(8, 4, |x, y| if x < 4 { 0 } else if y < 2 { 1 } else { 2 }).unwrap();
        let req = ColorizeRequest::new(0, half_black_white(), Some(masks), prompt("x")).unwrap();
        let r = palette_colorize(&req, &p);
        // White is band 1; label 1 -> entry 2, label 2 -> entry 0.
        assert_eq!((r.a.get(5, 0), r.b.get(5, 0)), (7.0, -7.0));
        assert_eq!((r.a.get(5, 3), r.b.get(5, 3)), (-20.0, 10.0));
        assert_eq!((r.a.get(1, 1), r.b.get(1, 1)), (-20.0, 10.0));
    }

    #[test]
    fn palette_validation() {
        assert!(Palette::new(vec![]).is_err());
        assert!(Palette::new(vec![
            PaletteEntry { luma_break: 60.0, a: 0.0, b: 0.0 },
            PaletteEntry { luma_break: 40.0, a: 0.0, b: 0.0 },
        ])
        .is_err());
        assert!(serde_json::from_str::<Palette>("[]").is_err());
    }

    #[test]
    fn palette_is_deterministic_and_keyed_by_prompt() {
        let mut c = PaletteColorizer::default().with_prompt("a red scene", two_band());
        let req = ColorizeRequest::new(0, half_black_white(), None, prompt("a red scene")).unwrap();
        assert_eq!(c.colorize(&req).unwrap(), c.colorize(&req).unwrap());
        assert_eq!(c.colorize(&req).unwrap(), palette_colorize(&req, &two_band()));
        let other = ColorizeRequest::new(0, half_black_white(), None, prompt("other")).unwrap();
        assert_eq!(c.colorize(&other).unwrap(), palette_colorize(&other, &Palette::default_bands()));
    }

    #[test]
    fn palette_file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let bare = dir.path().join("bare.json");
        fs::write(&bare, r#"[{"break":100,"a":1,"b":2}]"#).unwrap();
        let c = PaletteColorizer::load(&bare).unwrap();
        assert_eq!(c.default.entries()[0].a, 1.0);
        let keyed = dir.path().join("keyed.json");
        fs::write(&keyed, r#"{"default":[{"break":100,"a":1,"b":2}],"prompts":{"sky":[{"break":100,"a":-5,"b":-30}]}}"#).unwrap();
        let c = PaletteColorizer::load(&keyed).unwrap();
        assert_eq!(c.prompts["sky"].entries()[0].b, -30.0);
    }

    #[test]
    fn oracle_returns_gt_chroma_and_keeps_request_luma() {
        let luma = Plane::filled(4, 3, 33.0f32).unwrap();
        let gt = LabFrame::new(
            Plane::filled(4, 3, 80.0).unwrap(),
            Plane::filled(4, 3, 20.0).unwrap(),
            Plane::filled(4, 3, -15.0).unwrap(),
        )
        .unwrap();
        let req = ColorizeRequest::new(0, luma.clone(), None, prompt(GENERIC_PROMPT)).unwrap();
        let r = oracle_colorize(&gt, &req).unwrap();
        assert!(r.a.as_slice().iter().all(|&a| a == 20.0));
        assert!(r.b.as_slice().iter().all(|&b| b == -15.0));

        let mut oracle = OracleColorizer::new(vec![gt]);
        let frame = colorize_frame(&mut oracle, &req).unwrap();
        assert_eq!(frame.l, luma);
        let late = ColorizeRequest::new(5, luma, None, prompt(GENERIC_PROMPT)).unwrap();
        assert!(matches!(oracle.colorize(&late), Err(Error::Provider { frame: 5, .. })));
    }

    #[test]
    fn validation_clamps_and_rejects() {
        let luma = Plane::filled(2, 2, 50.0f32).unwrap();
        let req = ColorizeRequest::new(4, luma, None, prompt("x")).unwrap();
        let loud = ColorizeResponse {
            frame_index: 4,
            a: Plane::filled(2, 2, 200.0).unwrap(),
            b: Plane::filled(2, 2, -300.0).unwrap(),
        };
        let ok = validate_response(&req, loud).unwrap();
        assert!(ok.a.as_slice().iter().all(|&a| a == CHROMA_MAX));
        assert!(ok.b.as_slice().iter().all(|&b| b == CHROMA_MIN));

        let wrong = ColorizeResponse {
            frame_index: 4,
            a: Plane::filled(3, 2, 0.0).unwrap(),
            b: Plane::filled(3, 2, 0.0).unwrap(),
        };
        assert!(matches!(
            validate_response(&req, wrong),
            Err(Error::Provider { frame: 4, kind: ProviderError::DimensionMismatch { .. } })
        ));
    }

    #[test]
    fn request_rejects_mismatched_masks() {
        let luma = Plane::filled(2, 2, 50.0f32).unwrap();
        let masks = Plane::filled(2, 3, 1u16).unwrap();
        assert!(ColorizeRequest::new(0, luma, Some(masks), prompt("x")).is_err());
    }
}
