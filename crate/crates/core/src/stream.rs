//! Per-sample inference: normalize, buffer the last 160 samples, run the
//! network once per tick and emit a collar probability.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layer::LayerWeights;
use crate::model::{ArchConfig, Model};
use crate::{sigmoid, WINDOW_LEN};

/// Affine map from raw ADC counts to the model's input scale:
/// `(raw - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Normalizer {
    #[cfg_attr(feature = "serde", serde(serialize_with = "crate::short_f32"))]
    pub offset: f32,
    #[cfg_attr(feature = "serde", serde(serialize_with = "crate::short_f32"))]
    pub scale: f32,
}

impl Normalizer {
    pub fn new(offset: f32, scale: f32) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || !offset.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "normalizer needs finite offset and positive scale, got offset={offset} scale={scale}"
            )));
        }
        Ok(Self { offset, scale })
    }

    #[inline]
    pub fn apply(&self, raw: i16) -> f32 {
        (raw as f32 - self.offset) / self.scale
    }

    /// Mean and population standard deviation over all samples.
    ///
    /// Falls back to unit scale for a constant or empty corpus.
    pub fn fit<'a>(runs: impl IntoIterator<Item = &'a [i16]>) -> Self {
        let (mut n, mut sum, mut sq) = (0u64, 0f64, 0f64);
        for run in runs {
            for &x in run {
                let x = x as f64;
                n += 1;
                sum += x;
                sq += x * x;
            }
        }
        if n == 0 {
            return Self {
                offset: 0.0,
                scale: 1.0,
            };
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        let sd = libm::sqrt(var);
        Self {
            offset: mean as f32,
            scale: if sd > 0.0 { sd as f32 } else { 1.0 },
        }
    }
}

/// Fixed-capacity window over the newest samples.
///
/// Every sample is written twice, `WINDOW_LEN` apart, so the window is
/// always one contiguous slice ordered oldest to newest.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    mirror: [f32; 2 * WINDOW_LEN],
    /// Slot the next sample goes to.
    head: usize,
    fill: usize,
    newest: Option<u64>,
}

impl Default for WindowBuffer {
    fn default() -> Self {
        Self {
            mirror: [0.0; 2 * WINDOW_LEN],
            head: 0,
            fill: 0,
            newest: None,
        }
    }
}

impl WindowBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn capacity(&self) -> usize {
        WINDOW_LEN
    }

    pub fn push(&mut self, value: f32) {
        self.mirror[self.head] = value;
        self.mirror[self.head + WINDOW_LEN] = value;
        self.head = (self.head + 1) % WINDOW_LEN;
        self.fill = (self.fill + 1).min(WINDOW_LEN);
        self.newest = Some(self.newest.map_or(0, |n| n + 1));
    }

    pub fn len(&self) -> usize {
        self.fill
    }

    pub fn is_empty(&self) -> bool {
        self.fill == 0
    }

    pub fn is_full(&self) -> bool {
        self.fill == WINDOW_LEN
    }

    /// Absolute index of the newest sample.
    pub fn newest_index(&self) -> Option<u64> {
        self.newest
    }

    /// Buffered samples, oldest first; `min(pushes, 160)` long.
    pub fn window(&self) -> &[f32] {
        let end = self.head + WINDOW_LEN;
        &self.mirror[end - self.fill..end]
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

/// Output of one inference tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    /// Absolute index of the newest sample in the window.
    pub index: u64,
    pub logit: f32,
    pub probability: f32,
}

/// Collar probability per absolute sample index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbabilityMap {
    entries: Vec<(u64, f32)>,
}

impl ProbabilityMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            entries: Vec::with_capacity(n),
        }
    }

    /// Appends one entry; indices must increase and probabilities lie in `[0, 1]`.
    pub fn push(&mut self, index: u64, probability: f32) -> Result<()> {
        if let Some(&(last, _)) = self.entries.last() {
            if index <= last {
                return Err(Error::OutOfOrder {
                    index,
                    previous: last,
                });
            }
        }
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::InvalidConfig(format!(
                "probability {probability} at index {index} outside [0, 1]"
            )));
        }
        self.entries.push((index, probability));
        Ok(())
    }

    pub fn entries(&self) -> &[(u64, f32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f32)> + '_ {
        self.entries.iter().copied()
    }
}

impl ProbabilityMap {
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, f32)>) -> Result<Self> {
        let mut map = Self::new();
        for (i, p) in entries {
            map.push(i, p)?;
        }
        Ok(map)
    }
}

/// One stream's inference state. All buffers are allocated in
/// [`StreamEngine::new`]; [`StreamEngine::step`] does not allocate.
#[derive(Debug, Clone)]
pub struct StreamEngine {
    model: Model,
    normalizer: Normalizer,
    window: WindowBuffer,
}

impl StreamEngine {
    pub fn new(config: ArchConfig, weights: Vec<LayerWeights>, normalizer: Normalizer) -> Result<Self> {
        if config.input.numel() != WINDOW_LEN || config.input.channels != 1 {
            return Err(Error::InvalidConfig(format!(
                "stream models take a [1 x {WINDOW_LEN}] window, config {} takes {}",
                config.model_id, config.input
            )));
        }
        Ok(Self {
            model: Model::new(config, weights)?,
            normalizer,
            window: WindowBuffer::new(),
        })
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Pushes one raw sample; returns a tick once the window is full.
    pub fn step(&mut self, raw: i16) -> Option<Tick> {
        self.window.push(self.normalizer.apply(raw));
        if !self.window.is_full() {
            return None;
        }
        let logit = self.model.infer(self.window.window());
        Some(Tick {
            index: self.window.newest_index().expect("pushed"),
            logit,
            probability: sigmoid(logit),
        })
    }

    /// Forgets all buffered samples; indices restart at 0.
    pub fn reset(&mut self) {
        self.window.clear();
    }

    /// Streams a whole signal through a freshly reset engine.
    pub fn run(&mut self, samples: &[i16]) -> ProbabilityMap {
        self.reset();
        let mut map = ProbabilityMap::with_capacity(samples.len().saturating_sub(WINDOW_LEN - 1));
        for &s in samples {
            if let Some(t) = self.step(s) {
                map.entries.push((t.index, t.probability));
            }
        }
        map
    }
}
