//! Per-frame prompt selection.
//!
//! Generic mode always yields the same text. Detailed mode re-activates the
//! latest supplied entry at each refresh point (frame 0, every multiple of
//! the refresh interval, every scene cut) and keeps it until the next one.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GENERIC_PROMPT: &str = "a colorful image";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrigin {
    Generic,
    ScheduledRefresh,
    SceneChange,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub frame_index: usize,
    pub text: String,
    pub origin: PromptOrigin,
}

/// One line of a prompt file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEntry {
    pub frame: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    #[default]
    Generic,
    Detailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSchedule {
    mode: PromptMode,
    generic_text: String,
    entries: Vec<PromptEntry>,
    refresh_interval_frames: usize,
}

/// Converts a refresh period in seconds to whole frames, at least one.
pub fn refresh_interval_frames(seconds: f64, fps: f64) -> usize {
    ((seconds * fps).round() as usize).max(1)
}

impl PromptSchedule {
    pub fn generic() -> Self {
        Self::generic_with(GENERIC_PROMPT)
    }

    pub fn generic_with(text: impl Into<String>) -> Self {
        PromptSchedule {
            mode: PromptMode::Generic,
            generic_text: text.into(),
            entries: Vec::new(),
            refresh_interval_frames: 1,
        }
    }

    pub fn detailed(mut entries: Vec<PromptEntry>, refresh_interval_frames: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("detailed prompt mode needs at least one entry".into()));
        }
        if refresh_interval_frames < 1 {
            return Err(Error::Config("refresh interval must be >= 1 frame".into()));
        }
        entries.sort_by_key(|e| e.frame);
        if entries[0].frame != 0 {
            return Err(Error::Config(format!(
                "detailed prompts must start at frame 0, first entry is frame {}",
                entries[0].frame
            )));
        }
        if let Some(e) = entries.iter().find(|e| e.text.trim().is_empty()) {
            return Err(Error::Config(format!("empty prompt text at frame {}", e.frame)));
        }
        if entries.windows(2).any(|p| p[0].frame == p[1].frame) {
            return Err(Error::Config("duplicate prompt entries for one frame".into()));
        }
        Ok(PromptSchedule {
            mode: PromptMode::Detailed,
            generic_text: GENERIC_PROMPT.into(),
            entries,
            refresh_interval_frames,
        })
    }

    /// Degenerate schedule that keeps frame 0's prompt for the whole video.
    pub fn fixed_to_first(&self) -> Self {
        let first = self.prompt_for_frame(0, &BTreeSet::new());
        match self.mode {
            PromptMode::Generic => self.clone(),
            PromptMode::Detailed => PromptSchedule {
                mode: PromptMode::Detailed,
                generic_text: self.generic_text.clone(),
                entries: vec![PromptEntry {
                    frame: 0,
                    text: first.text,
                }],
                refresh_interval_frames: usize::MAX,
            },
        }
    }

    pub fn mode(&self) -> PromptMode {
        self.mode
    }

    pub fn entries(&self) -> &[PromptEntry] {
        &self.entries
    }

    pub fn refresh_interval(&self) -> usize {
        self.refresh_interval_frames
    }

    /// Latest refresh point at or before `frame`.
    pub fn refresh_point(&self, frame: usize, scene_cuts: &BTreeSet<usize>) -> usize {
        let interval = (frame / self.refresh_interval_frames) * self.refresh_interval_frames;
        let cut = scene_cuts.range(..=frame).next_back().copied().unwrap_or(0);
        interval.max(cut)
    }

    pub fn prompt_for_frame(&self, frame: usize, scene_cuts: &BTreeSet<usize>) -> PromptRecord {
        if self.mode == PromptMode::Generic {
            return PromptRecord {
                frame_index: frame,
                text: self.generic_text.clone(),
                origin: PromptOrigin::Generic,
            };
        }
        let point = self.refresh_point(frame, scene_cuts);
        // Entries start at frame 0, so a predecessor always exists.
        let idx = self.entries.partition_point(|e| e.frame <= point) - 1;
        let origin = if scene_cuts.contains(&point) {
            PromptOrigin::SceneChange
        } else if point == 0 {
            PromptOrigin::UserSupplied
        } else {
            PromptOrigin::ScheduledRefresh
        };
        PromptRecord {
            frame_index: frame,
            text: self.entries[idx].text.clone(),
            origin,
        }
    }
}

pub fn load_prompt_file(path: impl AsRef<Path>) -> Result<Vec<PromptEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(frame: usize, text: &str) -> PromptEntry {
        PromptEntry {
            frame,
            text: text.into(),
        }
    }

    fn cuts(list: &[usize]) -> BTreeSet<usize> {
        list.iter().copied().collect()
    }

    #[test]
    fn generic_everywhere() {
        let s = PromptSchedule::generic();
        for t in [0, 5, 1000] {
            let r = s.prompt_for_frame(t, &cuts(&[5]));
            assert_eq!(r.text, "a colorful image");
            assert_eq!(r.origin, PromptOrigin::Generic);
            assert_eq!(r.frame_index, t);
        }
    }

    #[test]
    fn persistence_between_refreshes() {
        let s = PromptSchedule::detailed(
            vec![entry(0, "zero"), entry(24, "twenty-four"), entry(48, "forty-eight")],
            refresh_interval_frames(1.0, 24.0),
        )
        .unwrap();
        let r = s.prompt_for_frame(30, &BTreeSet::new());
        assert_eq!(r.text, "twenty-four");
        assert_eq!(r.origin, PromptOrigin::ScheduledRefresh);
        assert_eq!(s.prompt_for_frame(0, &BTreeSet::new()).origin, PromptOrigin::UserSupplied);
    }

    // Straight-line replay of the refresh rule, frame by frame.
    fn simulate(entries: &[PromptEntry], interval: usize, cut_set: &BTreeSet<usize>, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut current = String::new();
        for t in 0..n {
            if t == 0 || t % interval == 0 || cut_set.contains(&t) {
                current = entries.iter().filter(|e| e.frame <= t).last().unwrap().text.clone();
            }
            out.push(current.clone());
        }
        out
    }

    #[test]
    fn scene_cut_refresh_matches_simulation() {
        let entries = vec![entry(0, "a"), entry(24, "b"), entry(37, "c"), entry(48, "d")];
        let s = PromptSchedule::detailed(entries.clone(), 24).unwrap();
        let cut_set = cuts(&[37]);
        let expected = simulate(&entries, 24, &cut_set, 72);
        for t in 0..72 {
            assert_eq!(s.prompt_for_frame(t, &cut_set).text, expected[t], "frame {t}");
        }
        for t in 37..48 {
            let r = s.prompt_for_frame(t, &cut_set);
            assert_eq!(r.text, "c");
            assert_eq!(r.origin, PromptOrigin::SceneChange);
        }
    }

    #[test]
    fn refresh_without_exact_entry_reactivates_earlier_one() {
        let s = PromptSchedule::detailed(vec![entry(0, "a"), entry(10, "b")], 4).unwrap();
        assert_eq!(s.prompt_for_frame(9, &BTreeSet::new()).text, "a");
        assert_eq!(s.prompt_for_frame(11, &BTreeSet::new()).text, "a");
        assert_eq!(s.prompt_for_frame(12, &BTreeSet::new()).text, "b");
    }

    #[test]
    fn fixed_schedule_holds_frame_zero() {
        let s = PromptSchedule::detailed(vec![entry(0, "a"), entry(3, "b")], 3).unwrap();
        let f = s.fixed_to_first();
        for t in 0..20 {
            assert_eq!(f.prompt_for_frame(t, &cuts(&[3, 7])).text, "a");
        }
    }

    #[test]
    fn configuration_errors() {
        assert!(PromptSchedule::detailed(vec![], 24).is_err());
        assert!(PromptSchedule::detailed(vec![entry(2, "x")], 24).is_err());
        assert!(PromptSchedule::detailed(vec![entry(0, " ")], 24).is_err());
        assert!(PromptSchedule::detailed(vec![entry(0, "x")], 0).is_err());
    }

    #[test]
    fn prompt_file_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        fs::write(&path, r#"[{"frame":0,"text":"a red car"},{"frame":24,"text":"a blue sky"}]"#).unwrap();
        let entries = load_prompt_file(&path).unwrap();
        assert_eq!(entries, vec![entry(0, "a red car"), entry(24, "a blue sky")]);
    }

    proptest! {
        #[test]
        fn changes_only_at_refresh_points(interval in 1usize..10, cut_list in proptest::collection::vec(1usize..60, 0..4)) {
            let entries: Vec<_> = (0..60).step_by(3).map(|f| entry(f, &format!("p{f}"))).collect();
            let s = PromptSchedule::detailed(entries, interval).unwrap();
            let cut_set: BTreeSet<usize> = cut_list.into_iter().collect();
            for t in 1..60 {
                let prev = s.prompt_for_frame(t - 1, &cut_set);
                let cur = s.prompt_for_frame(t, &cut_set);
                let is_refresh = t % interval == 0 || cut_set.contains(&t);
                if !is_refresh {
                    prop_assert_eq!(&prev.text, &cur.text);
                }
                if cut_set.contains(&t) {
                    prop_assert_eq!(s.refresh_point(t, &cut_set), t);
                }
            }
        }
    }
}
