//! Probability map → collar events → depths → motion state.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::SAMPLE_RATE_HZ;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DetectorConfig {
    /// A sample belongs to a run when its probability is at least this.
    #[cfg_attr(feature = "serde", serde(serialize_with = "crate::short_f32"))]
    pub threshold: f32,
    /// Shortest run, in samples, that counts as a collar.
    pub min_duration: u32,
    /// Subtracted from the run centroid; compensates for the delay between
    /// a collar passing and the window that fires on it.
    pub centroid_offset: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_duration: 20,
            centroid_offset: 80,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.min_duration == 0 {
            return Err(Error::InvalidConfig("min_duration must be at least 1".into()));
        }
        if self.centroid_offset as usize > crate::WINDOW_LEN {
            return Err(Error::InvalidConfig(format!(
                "centroid_offset must be at most {}, got {}",
                crate::WINDOW_LEN,
                self.centroid_offset
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollarEvent {
    pub start: u64,
    /// Inclusive.
    pub end: u64,
    pub peak: f32,
    /// Probability-weighted mean index of the run, minus the centroid offset.
    pub centroid: f64,
}

impl CollarEvent {
    pub fn duration(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn timestamp_s(&self) -> f64 {
        self.centroid / SAMPLE_RATE_HZ as f64
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start: u64,
    end: u64,
    peak: f32,
    weight: f64,
    moment: f64,
}

/// Threshold-and-duration detector over a streamed probability map.
///
/// A gap in the index sequence closes the open run.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    run: Option<Run>,
    last: Option<u64>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            run: None,
            last: None,
        })
    }

    pub fn config(&self) -> DetectorConfig {
        self.config
    }

    pub fn update(&mut self, index: u64, probability: f32) -> Result<Option<CollarEvent>> {
        if let Some(prev) = self.last {
            if index <= prev {
                return Err(Error::OutOfOrder {
                    index,
                    previous: prev,
                });
            }
        }
        self.last = Some(index);
        let mut emitted = None;
        if self.run.is_some_and(|r| r.end + 1 != index) {
            emitted = self.close();
        }
        if probability >= self.config.threshold {
            let p = probability as f64;
            let run = self.run.get_or_insert(Run {
                start: index,
                end: index,
                peak: probability,
                weight: 0.0,
                moment: 0.0,
            });
            run.end = index;
            run.peak = run.peak.max(probability);
            run.weight += p;
            // Offsets from the run start keep the products exact in f64.
            run.moment += (index - run.start) as f64 * p;
        } else if self.run.is_some() {
            // A gap close and a falling edge cannot both fire on one index.
            debug_assert!(emitted.is_none());
            emitted = self.close();
        }
        Ok(emitted)
    }

    /// Closes a run left open at the end of the stream.
    pub fn flush(&mut self) -> Option<CollarEvent> {
        self.close()
    }

    /// Runs a whole map, including the final flush.
    pub fn detect_all(&mut self, map: impl IntoIterator<Item = (u64, f32)>) -> Result<Vec<CollarEvent>> {
        let mut events = Vec::new();
        for (i, p) in map {
            events.extend(self.update(i, p)?);
        }
        events.extend(self.flush());
        Ok(events)
    }

    fn close(&mut self) -> Option<CollarEvent> {
        let run = self.run.take()?;
        if run.end - run.start + 1 < self.config.min_duration as u64 {
            return None;
        }
        Some(CollarEvent {
            start: run.start,
            end: run.end,
            peak: run.peak,
            centroid: run.start as f64 + run.moment / run.weight
                - self.config.centroid_offset as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TallyEntry {
    pub joint: u32,
    pub depth_m: f64,
}

/// Reference collar depths, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CasingTally {
    entries: Vec<TallyEntry>,
}

impl CasingTally {
    pub fn new(entries: Vec<TallyEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !e.depth_m.is_finite() {
                return Err(Error::NonFinite("tally depth"));
            }
            if i > 0 && e.depth_m <= entries[i - 1].depth_m {
                return Err(Error::NonMonotoneTally(i));
            }
        }
        Ok(Self { entries })
    }

    /// Numbers joints from 1 in depth order.
    pub fn from_depths(depths: &[f64]) -> Result<Self> {
        Self::new(
            depths
                .iter()
                .enumerate()
                .map(|(i, &depth_m)| TallyEntry {
                    joint: i as u32 + 1,
                    depth_m,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[TallyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn depth(&self, i: usize) -> f64 {
        self.entries[i].depth_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub event: CollarEvent,
    pub tally_index: usize,
    pub joint: u32,
    pub depth_m: f64,
}

/// Assigns event `k` to tally entry `start_joint ± k` in travel order.
pub fn correlate_tally(
    events: &[CollarEvent],
    tally: &CasingTally,
    start_joint: usize,
    direction: Direction,
) -> Result<Vec<Assignment>> {
    if events.is_empty() {
        return Ok(Vec::new());
    }
    if start_joint >= tally.len() {
        return Err(Error::StartJoint {
            start: start_joint,
            len: tally.len(),
        });
    }
    if events.windows(2).any(|w| w[1].centroid < w[0].centroid) {
        return Err(Error::Unsorted("events must be time-ordered"));
    }
    let remaining = match direction {
        Direction::Down => tally.len() - start_joint,
        Direction::Up => start_joint + 1,
    };
    if events.len() > remaining {
        return Err(Error::TallyExhausted {
            events: events.len(),
            remaining,
        });
    }
    Ok(events
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let i = match direction {
                Direction::Down => start_joint + k,
                Direction::Up => start_joint - k,
            };
            Assignment {
                event: *e,
                tally_index: i,
                joint: tally.entries[i].joint,
                depth_m: tally.entries[i].depth_m,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    MovingDown,
    MovingUp,
    Stationary,
    Unknown,
}

impl Motion {
    pub fn as_str(self) -> &'static str {
        match self {
            Motion::MovingDown => "moving_down",
            Motion::MovingUp => "moving_up",
            Motion::Stationary => "stationary",
            Motion::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    pub depth_m: Option<f64>,
    /// Signed, positive when depth increases.
    pub velocity_mps: Option<f64>,
    pub state: Motion,
}

/// Speeds below this count as stationary.
pub const DEFAULT_MIN_SPEED_MPS: f64 = 0.05;

/// Depth, velocity and direction from the latest two assignments.
pub fn estimate_motion(assignments: &[Assignment], min_speed_mps: f64) -> Result<MotionState> {
    for w in assignments.windows(2) {
        let dt = w[1].event.timestamp_s() - w[0].event.timestamp_s();
        if !(dt > 0.0) {
            return Err(Error::TimeDelta(dt));
        }
    }
    let (prev, last) = match assignments {
        [] => {
            return Ok(MotionState {
                depth_m: None,
                velocity_mps: None,
                state: Motion::Unknown,
            })
        }
        [only] => {
            return Ok(MotionState {
                depth_m: Some(only.depth_m),
                velocity_mps: None,
                state: Motion::Unknown,
            })
        }
        [.., a, b] => (a, b),
    };
    let v = (last.depth_m - prev.depth_m) / (last.event.timestamp_s() - prev.event.timestamp_s());
    let state = if libm::fabs(v) < min_speed_mps {
        Motion::Stationary
    } else if v > 0.0 {
        Motion::MovingDown
    } else {
        Motion::MovingUp
    };
    Ok(MotionState {
        depth_m: Some(last.depth_m),
        velocity_mps: Some(v),
        state,
    })
}
