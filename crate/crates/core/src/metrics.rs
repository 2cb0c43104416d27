//! Evaluation metrics: PSNR against ground truth, Hasler-Süsstrunk
//! colorfulness, and color distribution consistency (CDC).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::colorspace::Rgb8Image;
use crate::error::{Error, Result};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub fn psnr(result: &Rgb8Image, reference: &Rgb8Image) -> Result<f64> {
    if result.dims() != reference.dims() {
        return Err(Error::dims("psnr", reference.dims(), result.dims()));
    }
    let sse: u64 = result
        .as_bytes()
        .iter()
        .zip(reference.as_bytes())
        .map(|(&a, &b)| {
            let d = a as i64 - b as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / result.as_bytes().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

pub fn colorfulness(img: &Rgb8Image) -> f64 {
    let n = (img.width() * img.height()) as f64;
    let (mut rg_sum, mut yb_sum, mut rg_sq, mut yb_sq) = (0.0, 0.0, 0.0, 0.0);
    for [r, g, b] in img.pixels() {
        let (r, g, b) = (r as f64, g as f64, b as f64);
        let rg = r - g;
        let yb = 0.5 * (r + g) - b;
        rg_sum += rg;
        yb_sum += yb;
        rg_sq += rg * rg;
        yb_sq += yb * yb;
    }
    let rg_mean = rg_sum / n;
    let yb_mean = yb_sum / n;
    let rg_var = (rg_sq / n - rg_mean * rg_mean).max(0.0);
    let yb_var = (yb_sq / n - yb_mean * yb_mean).max(0.0);
    (rg_var + yb_var).sqrt() + 0.3 * (rg_mean * rg_mean + yb_mean * yb_mean).sqrt()
}

pub fn video_colorfulness(frames: &[Rgb8Image]) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::Sequence("colorfulness of an empty video".into()));
    }
    Ok(frames.iter().map(colorfulness).sum::<f64>() / frames.len() as f64)
}

/// Temporal steps and histogram resolution for CDC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdcParams {
    pub steps: Vec<usize>,
    pub bins: usize,
}

impl Default for CdcParams {
    fn default() -> Self {
        CdcParams {
            steps: vec![1, 2, 4],
            bins: 256,
        }
    }
}

/// Per-channel normalized histograms of an RGB image.
pub fn channel_histograms(img: &Rgb8Image, bins: usize) -> [Vec<f64>; 3] {
    let mut hist = [vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]];
    for px in img.pixels() {
        for (c, &v) in px.iter().enumerate() {
            hist[c][v as usize * bins / 256] += 1.0;
        }
    }
    let n = (img.width() * img.height()) as f64;
    for h in &mut hist {
        h.iter_mut().for_each(|x| *x /= n);
    }
    hist
}

/// Jensen-Shannon divergence with natural log; bounded by ln 2.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    total.clamp(0.0, std::f64::consts::LN_2)
}

pub fn cdc(frames: &[Rgb8Image]) -> Result<f64> {
    cdc_with(frames, &CdcParams::default())
}

/// Mean over steps of the mean over frame pairs `(t, t + step)` of the
/// channel-averaged JS divergence between color histograms.
pub fn cdc_with(frames: &[Rgb8Image], params: &CdcParams) -> Result<f64> {
    if params.steps.is_empty() || params.steps.contains(&0) || !(1..=256).contains(&params.bins) {
        return Err(Error::Config(format!("invalid CDC parameters {params:?}")));
    }
    let max_step = *params.steps.iter().max().expect("nonempty");
    if frames.len() <= max_step {
        return Err(Error::Sequence(format!(
            "CDC needs at least {} frames, got {}",
            max_step + 1,
            frames.len()
        )));
    }
    let dims = frames[0].dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
        return Err(Error::dims("cdc frames", dims, f.dims()));
    }
    let hists: Vec<_> = frames.iter().map(|f| channel_histograms(f, params.bins)).collect();
    let mut total = 0.0;
    for &step in &params.steps {
        let pairs = hists.len() - step;
        let sum: f64 = (0..pairs)
            .map(|t| {
                (0..3)
                    .map(|c| js_divergence(&hists[t][c], &hists[t + step][c]))
                    .sum::<f64>()
                    / 3.0
            })
            .sum();
        total += sum / pairs as f64;
    }
    Ok(total / params.steps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub psnr_db: f64,
    pub colorfulness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub colorfulness: f64,
    pub true_colorfulness: f64,
    /// `None` when the ground truth scores zero and the result does not.
    pub colorfulness_ratio: Option<f64>,
    pub cdc: f64,
    pub true_cdc: f64,
    pub cdc_ratio: Option<f64>,
    pub per_frame: Vec<FrameMetrics>,
}

/// `num / den`, unavailable when the denominator is zero. Two zero scores
/// describe identical behaviour and compare as 1.
pub fn metric_ratio(num: f64, den: f64) -> Option<f64> {
    if den != 0.0 {
        Some(num / den)
    } else if num == 0.0 {
        Some(1.0)
    } else {
        None
    }
}

pub fn evaluate(result: &[Rgb8Image], gt: &[Rgb8Image]) -> Result<MetricsReport> {
    evaluate_with(result, gt, &CdcParams::default())
}

pub fn evaluate_with(result: &[Rgb8Image], gt: &[Rgb8Image], cdc_params: &CdcParams) -> Result<MetricsReport> {
    if result.len() != gt.len() {
        return Err(Error::Sequence(format!(
            "result has {} frames, ground truth {}",
            result.len(),
            gt.len()
        )));
    }
    if result.len() < 5 {
        return Err(Error::Sequence(format!("evaluation needs at least 5 frames, got {}", result.len())));
    }
    let mut per_frame = Vec::with_capacity(result.len());
    for (i, (r, g)) in result.iter().zip(gt).enumerate() {
        per_frame.push(FrameMetrics {
            frame: i,
            psnr_db: psnr(r, g)?,
            colorfulness: colorfulness(r),
        });
    }
    let psnr_db = per_frame.iter().map(|f| f.psnr_db).sum::<f64>() / per_frame.len() as f64;
    let colorfulness = per_frame.iter().map(|f| f.colorfulness).sum::<f64>() / per_frame.len() as f64;
    let true_colorfulness = video_colorfulness(gt)?;
    let cdc = cdc_with(result, cdc_params)?;
    let true_cdc = cdc_with(gt, cdc_params)?;
    Ok(MetricsReport {
        psnr_db,
        colorfulness,
        true_colorfulness,
        colorfulness_ratio: metric_ratio(colorfulness, true_colorfulness),
        cdc,
        true_cdc,
        cdc_ratio: metric_ratio(cdc, true_cdc),
        per_frame,
    })
}

impl MetricsReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn csv_header() -> &'static str {
        "video,psnr,colorfulness,colorfulness_ratio,cdc,cdc_ratio"
    }

    /// One CSV row; unavailable ratios are left empty.
    pub fn csv_row(&self, video: &str) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{video},{:.6},{:.6},{},{:.6},{}",
            self.psnr_db,
            self.colorfulness,
            opt(self.colorfulness_ratio),
            self.cdc,
            opt(self.cdc_ratio)
        )
    }

    pub fn write_csv(&self, video: &str, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = format!("{}\n{}\n", Self::csv_header(), self.csv_row(video));
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
