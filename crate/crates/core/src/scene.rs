//! Hard-cut detection on the luminance stream.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::LumaPlane;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub histogram_bins: usize,
    /// L1 distance between normalized histograms, in (0, 2].
    pub change_threshold: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            histogram_bins: 64,
            change_threshold: 0.5,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        if self.histogram_bins < 2 {
            return Err(Error::Config("histogram_bins must be >= 2".into()));
        }
        if !(self.change_threshold > 0.0 && self.change_threshold <= 2.0) {
            return Err(Error::Config(format!(
                "change_threshold must lie in (0, 2], got {}",
                self.change_threshold
            )));
        }
        Ok(())
    }
}

/// Normalized luminance histogram over [0, 100].
pub fn luma_histogram(plane: &LumaPlane, bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0f64; bins];
    for &l in plane.as_slice() {
        let idx = ((l as f64 / 100.0) * bins as f64).floor();
        let idx = (idx.max(0.0) as usize).min(bins - 1);
        hist[idx] += 1.0;
    }
    let n = plane.len() as f64;
    hist.iter_mut().for_each(|h| *h /= n);
    hist
}

pub fn histogram_distance(prev: &LumaPlane, curr: &LumaPlane, bins: usize) -> Result<f64> {
    curr.ensure_dims("scene detection", prev.dims())?;
    let a = luma_histogram(prev, bins);
    let b = luma_histogram(curr, bins);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum())
}

pub fn is_scene_change(prev: &LumaPlane, curr: &LumaPlane, params: &SceneParams) -> Result<bool> {
    params.validate()?;
    Ok(histogram_distance(prev, curr, params.histogram_bins)? > params.change_threshold)
}

/// Indices `t >= 1` where frame `t` starts a new scene.
pub fn detect_cuts(frames: &[LumaPlane], params: &SceneParams) -> Result<BTreeSet<usize>> {
    let mut cuts = BTreeSet::new();
    for (t, pair) in frames.windows(2).enumerate() {
        if is_scene_change(&pair[0], &pair[1], params)? {
            cuts.insert(t + 1);
        }
    }
    Ok(cuts)
}

pub fn load_cut_list(path: impl AsRef<Path>) -> Result<BTreeSet<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let list: Vec<usize> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(list.into_iter().collect())
}

pub fn write_cut_list(cuts: &BTreeSet<usize>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let list: Vec<usize> = cuts.iter().copied().collect();
    let text = serde_json::to_string(&list).expect("integers serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::Plane;
    use proptest::prelude::*;

    #[test]
    fn identical_and_disjoint() {
        let p = SceneParams::default();
        let a = Plane::from_fn(16, 16, |x, y| ((x * 5 + y * 3) % 100) as f32).unwrap();
        assert!(!is_scene_change(&a, &a, &p).unwrap());
        let black = Plane::filled(16, 16, 0.0f32).unwrap();
        let white = Plane::filled(16, 16, 100.0f32).unwrap();
        assert!((histogram_distance(&black, &white, 64).unwrap() - 2.0).abs() < 1e-12);
        assert!(is_scene_change(&black, &white, &p).unwrap());
    }

    #[test]
    fn small_motion_is_not_a_cut() {
        // Smooth gradient shifted by two pixels: direct histogram comparison.
        let a = Plane::from_fn(64, 64, |x, y| (x as f32 + 0.3 * y as f32) * 100.0 / 84.0).unwrap();
        let b = Plane::from_fn(64, 64, |x, y| ((x + 2) as f32 + 0.3 * y as f32) * 100.0 / 84.0).unwrap();
        let d = histogram_distance(&a, &b, 64).unwrap();
        assert!(d < 0.2, "{d}");
        assert!(!is_scene_change(&a, &b, &SceneParams::default()).unwrap());
    }

    #[test]
    fn parameter_validation() {
        let a = Plane::filled(2, 2, 0.0f32).unwrap();
        let bad_bins = SceneParams { histogram_bins: 1, ..SceneParams::default() };
        assert!(is_scene_change(&a, &a, &bad_bins).is_err());
        let bad_thr = SceneParams { change_threshold: 2.5, ..SceneParams::default() };
        assert!(is_scene_change(&a, &a, &bad_thr).is_err());
        let b = Plane::filled(3, 2, 0.0f32).unwrap();
        assert!(is_scene_change(&a, &b, &SceneParams::default()).is_err());
    }

    #[test]
    fn cut_list_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cuts.json");
        let cuts: BTreeSet<usize> = [4, 9, 17].into_iter().collect();
        write_cut_list(&cuts, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "[4,9,17]");
        assert_eq!(load_cut_list(&path).unwrap(), cuts);
        fs::write(&path, "{\"nope\":1}").unwrap();
        assert!(matches!(load_cut_list(&path), Err(Error::Json { .. })));
    }

    proptest! {
        #[test]
        fn symmetric_and_reflexive(seed in any::<u64>(), thr in 0.01f64..2.0) {
            let mut s = seed;
            let mut next = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 40) as f32 / (1u64 << 24) as f32 * 100.0
            };
            let a = Plane::from_fn(8, 8, |_, _| next()).unwrap();
            let b = Plane::from_fn(8, 8, |_, _| next()).unwrap();
            let p = SceneParams { change_threshold: thr, ..SceneParams::default() };
            prop_assert_eq!(is_scene_change(&a, &b, &p).unwrap(), is_scene_change(&b, &a, &p).unwrap());
            prop_assert!(!is_scene_change(&a, &a, &p).unwrap());
        }
    }
}
