//! Deterministic synthetic videos for tests and demos.

use std::collections::BTreeSet;

use crate::colorspace::{lab_to_rgb, LabFrame, Rgb8Image};
use crate::plane::Plane;

fn hash(seed: u64, x: i64, y: i64) -> f32 {
    let mut z = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 40) as f32 / (1u64 << 24) as f32
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Smooth value noise in [0, 1] on an unbounded integer grid.
pub fn noise_at(seed: u64, x: f32, y: f32, cell: f32) -> f32 {
    let (fx, fy) = (x / cell, y / cell);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (smooth(fx - x0), smooth(fy - y0));
    let (i, j) = (x0 as i64, y0 as i64);
    let top = hash(seed, i, j) * (1.0 - tx) + hash(seed, i + 1, j) * tx;
    let bottom = hash(seed, i, j + 1) * (1.0 - tx) + hash(seed, i + 1, j + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Two-octave texture in [0, 1].
pub fn texture_at(seed: u64, x: f32, y: f32) -> f32 {
    0.65 * noise_at(seed, x, y, 9.0) + 0.35 * noise_at(seed.wrapping_add(1), x, y, 4.0)
}

/// A colorful texture viewed through a window whose top-left corner sits at
/// (`ox`, `oy`) in texture coordinates. `l_range` bounds lightness.
pub fn lab_window(width: usize, height: usize, seed: u64, ox: i64, oy: i64, l_range: (f32, f32)) -> LabFrame {
    let at = |s: u64, x: usize, y: usize| texture_at(s, (x as i64 + ox) as f32, (y as i64 + oy) as f32);
    let (lo, hi) = l_range;
    let l = Plane::from_fn(width, height, |x, y| lo + (hi - lo) * at(seed, x, y)).expect("nonzero size");
    let a = Plane::from_fn(width, height, |x, y| 120.0 * at(seed ^ 0xA, x, y) - 60.0).expect("nonzero size");
    let b = Plane::from_fn(width, height, |x, y| 120.0 * at(seed ^ 0xB, x, y) - 50.0).expect("nonzero size");
    LabFrame::new(l, a, b).expect("equal sizes")
}

pub fn textured_rgb(width: usize, height: usize, seed: u64) -> Rgb8Image {
    lab_to_rgb(&lab_window(width, height, seed, 0, 0, (20.0, 90.0)))
}

pub fn static_video(width: usize, height: usize, frames: usize, seed: u64) -> Vec<Rgb8Image> {
    vec![textured_rgb(width, height, seed); frames]
}

/// A window panning `step` pixels per frame, so frame t+1 at (x, y) shows
/// frame t at (x + dx, y + dy) and the trailing border is newly revealed.
pub fn panning_video(width: usize, height: usize, frames: usize, step: (i64, i64), seed: u64) -> Vec<Rgb8Image> {
    panning_video_in(width, height, frames, step, seed, (20.0, 90.0))
}

pub fn panning_video_in(
    width: usize,
    height: usize,
    frames: usize,
    step: (i64, i64),
    seed: u64,
    l_range: (f32, f32),
) -> Vec<Rgb8Image> {
    (0..frames as i64)
        .map(|t| lab_to_rgb(&lab_window(width, height, seed, t * step.0, t * step.1, l_range)))
        .collect()
}

/// `clips` panning clips laid end to end, each in its own lightness band so
/// every boundary is a hard cut. Returns the frames and the cut indices.
pub fn concatenated_clips(
    width: usize,
    height: usize,
    clips: usize,
    frames_per_clip: usize,
    seed: u64,
) -> (Vec<Rgb8Image>, BTreeSet<usize>) {
    let bands = [(8.0, 30.0), (60.0, 92.0), (32.0, 56.0)];
    let mut frames = Vec::with_capacity(clips * frames_per_clip);
    let mut cuts = BTreeSet::new();
    for k in 0..clips {
        if k > 0 {
            cuts.insert(frames.len());
        }
        let step = [(1, 0), (0, 1), (-1, 1)][k % 3];
        frames.extend(panning_video_in(
            width,
            height,
            frames_per_clip,
            step,
            seed.wrapping_add(17 * k as u64),
            bands[k % bands.len()],
        ));
    }
    (frames, cuts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_bounded_and_deterministic() {
        for i in 0..500 {
            let (x, y) = (i as f32 * 0.37, i as f32 * 1.91 - 40.0);
            let v = texture_at(7, x, y);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, texture_at(7, x, y));
        }
        assert_ne!(texture_at(1, 3.5, 2.5), texture_at(2, 3.5, 2.5));
    }

    #[test]
    fn panning_matches_shifted_window() {
        let v = panning_video(20, 10, 3, (2, 1), 5);
        let a = lab_window(20, 10, 5, 4, 2, (20.0, 90.0));
        assert_eq!(v[2], lab_to_rgb(&a));
        assert_eq!(v[1].pixel(3, 4), v[0].pixel(5, 5));
    }

    #[test]
    fn clip_cuts_at_boundaries() {
        let (frames, cuts) = concatenated_clips(8, 8, 4, 5, 0);
        assert_eq!(frames.len(), 20);
        assert_eq!(cuts.into_iter().collect::<Vec<_>>(), vec![5, 10, 15]);
    }
}
