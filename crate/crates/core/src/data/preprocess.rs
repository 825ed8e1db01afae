//! Turning raw study annotations into per-frame model inputs.

use std::io::Read;
use std::ops::RangeInclusive;

use serde::Deserialize;

use crate::data::sequence::InteractionSequence;
use crate::error::{Error, Result};
use crate::types::{Gaze, Reliability};

/// Frames per second of the annotated recordings; one model step per frame.
pub const FPS: f64 = 25.0;

/// Reliability bands in meters before the stop line.
pub const REL_LOW_BELOW_M: f64 = 5.0;
pub const REL_HIGH_ABOVE_M: f64 = 15.0;

/// A manually labeled fixation, starting at `start_frame`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct FixationEvent {
    pub start_frame: i64,
    pub label: Gaze,
}

impl FixationEvent {
    pub fn new(start_frame: i64, label: Gaze) -> Self {
        Self { start_frame, label }
    }
}

/// Reads `start_frame,label` records.
pub fn read_fixations<R: Read>(reader: R) -> Result<Vec<FixationEvent>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Per-frame gaze labels: every frame takes the label of the latest fixation
/// starting at or before it. Frames before the first fixation are `G_oth`.
pub fn propagate_fixations(events: &[FixationEvent], n_frames: usize) -> Result<Vec<Gaze>> {
    if events.is_empty() {
        return Err(Error::EmptyFixations);
    }
    for (i, e) in events.iter().enumerate() {
        if e.start_frame < 0 || e.start_frame as usize >= n_frames {
            return Err(Error::FixationOutOfRange { index: i, start: e.start_frame, n_frames });
        }
        if i > 0 && e.start_frame <= events[i - 1].start_frame {
            return Err(Error::UnsortedFixations(i));
        }
    }
    let mut out = vec![Gaze::Other; n_frames];
    for (i, e) in events.iter().enumerate() {
        let end = events.get(i + 1).map_or(n_frames, |n| n.start_frame as usize);
        out[e.start_frame as usize..end].fill(e.label);
    }
    Ok(out)
}

/// Reliability category from the stopping distance before the stop line
/// (negative when the line was crossed). Both band edges belong to `Rel_mid`.
pub fn label_reliability(stop_distance_m: f64) -> Result<Reliability> {
    if !stop_distance_m.is_finite() {
        return Err(Error::NonFinite(stop_distance_m));
    }
    Ok(if stop_distance_m < REL_LOW_BELOW_M {
        Reliability::Low
    } else if stop_distance_m <= REL_HIGH_ABOVE_M {
        Reliability::Mid
    } else {
        Reliability::High
    })
}

/// Frame range of an intersection window padded by `pad_seconds` on both
/// sides, clamped to `0..n_frames`.
pub fn segment_window(
    n_frames: usize,
    window: RangeInclusive<usize>,
    pad_seconds: f64,
) -> Result<RangeInclusive<usize>> {
    if !pad_seconds.is_finite() || pad_seconds < 0.0 {
        return Err(Error::InvalidConfig(format!("padding must be >= 0, got {pad_seconds}")));
    }
    let (start, end) = (*window.start(), *window.end());
    if start > end || start >= n_frames {
        return Err(Error::EmptyWindow);
    }
    let pad = (FPS * pad_seconds).round() as usize;
    Ok(start.saturating_sub(pad)..=(end.saturating_add(pad)).min(n_frames - 1))
}

/// Cuts the padded intersection window out of a whole-drive recording.
/// `window` is in positions relative to the recording's first frame.
pub fn segment_episode(
    recording: &InteractionSequence,
    window: RangeInclusive<usize>,
    pad_seconds: f64,
    id: impl Into<String>,
) -> Result<InteractionSequence> {
    let range = segment_window(recording.len(), window, pad_seconds)?;
    InteractionSequence::new(id, recording.steps()[range].to_vec())
}
