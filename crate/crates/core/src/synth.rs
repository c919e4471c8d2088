//! Synthetic CCL runs: a tool moving through casing at a piecewise constant
//! speed, an antisymmetric Gaussian doublet at every collar crossing, plus
//! white noise, slow sinusoidal wander and collar-like interference.
//!
//! Amplitudes are in nominal collar units and quantized at [`RAW_SCALE`]
//! counts per unit, so a nominal collar peaks at a quarter of the 16-bit range.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::detect::CasingTally;
use crate::error::{Error, Result};
use crate::stream::Normalizer;
use crate::SAMPLE_RATE_HZ;

/// Raw counts per nominal collar amplitude.
pub const RAW_SCALE: f64 = 8192.0;

/// Half-width, in pulse widths, of the exclusion zone around collars.
pub const INTERFERENCE_GUARD_SIGMAS: f64 = 2.0;

/// Trajectory sampling step in samples.
pub const TRAJECTORY_STEP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeedSegment {
    pub start_s: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthConfig {
    pub seed: u64,
    pub duration_s: f64,
    /// Speed from each `start_s` until the next segment; the first starts at 0.
    pub speed: Vec<SpeedSegment>,
    pub start_depth_m: f64,
    pub joint_mean_m: f64,
    pub joint_sd_m: f64,
    /// Collar depths to use instead of a random tally.
    pub tally_depths_m: Option<Vec<f64>>,
    pub amplitude_mean: f64,
    pub amplitude_sd: f64,
    /// Width of each doublet lobe in milliseconds.
    pub pulse_sigma_ms: f64,
    /// Distance between the two lobe centers, in lobe widths.
    pub lobe_separation: f64,
    pub noise_sd: f64,
    pub interference_per_min: f64,
    pub interference_amplitude: (f64, f64),
    pub wander_amplitude: f64,
    pub wander_period_s: f64,
    /// Fixed collar polarity; random per run when unset.
    pub polarity: Option<i8>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 60.0,
            speed: vec![SpeedSegment {
                start_s: 0.0,
                speed_mps: 1.0,
            }],
            start_depth_m: 1000.0,
            joint_mean_m: 9.6,
            joint_sd_m: 0.2,
            tally_depths_m: None,
            amplitude_mean: 1.0,
            amplitude_sd: 0.15,
            pulse_sigma_ms: 12.0,
            lobe_separation: 3.0,
            noise_sd: 0.08,
            interference_per_min: 6.0,
            interference_amplitude: (0.3, 1.2),
            wander_amplitude: 0.1,
            wander_period_s: 20.0,
            polarity: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("synth: {what}")));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !pos(self.duration_s) {
            return bad("duration_s must be positive");
        }
        match self.speed.first() {
            None => return bad("speed profile is empty"),
            Some(s) if s.start_s != 0.0 => return bad("first speed segment must start at 0"),
            _ => {}
        }
        if self.speed.iter().any(|s| !pos(s.speed_mps)) {
            return bad("speeds must be positive");
        }
        if self.speed.windows(2).any(|w| !(w[1].start_s > w[0].start_s)) {
            return bad("speed segments must start in increasing order");
        }
        if !self.start_depth_m.is_finite() {
            return bad("start_depth_m must be finite");
        }
        if !pos(self.joint_mean_m) || !nonneg(self.joint_sd_m) {
            return bad("joint length needs positive mean and nonnegative sd");
        }
        if let Some(d) = &self.tally_depths_m {
            if d.iter().any(|v| !v.is_finite()) || d.windows(2).any(|w| w[1] <= w[0]) {
                return bad("tally depths must be finite and strictly increasing");
            }
        }
        if !pos(self.amplitude_mean) || !nonneg(self.amplitude_sd) {
            return bad("amplitude needs positive mean and nonnegative sd");
        }
        if !pos(self.pulse_sigma_ms) || !pos(self.lobe_separation) {
            return bad("pulse_sigma_ms and lobe_separation must be positive");
        }
        if !nonneg(self.noise_sd) || !nonneg(self.interference_per_min) || !nonneg(self.wander_amplitude) {
            return bad("noise, interference rate and wander amplitude must be nonnegative");
        }
        let (lo, hi) = self.interference_amplitude;
        if !nonneg(lo) || !(hi.is_finite() && hi >= lo) {
            return bad("interference amplitude range must satisfy 0 <= lo <= hi");
        }
        if !pos(self.wander_period_s) {
            return bad("wander_period_s must be positive");
        }
        if let Some(p) = self.polarity {
            if p != 1 && p != -1 {
                return bad("polarity must be 1 or -1");
            }
        }
        Ok(())
    }

    /// Collar peak to noise sd.
    pub fn snr(&self) -> f64 {
        self.amplitude_mean / self.noise_sd
    }

    fn depth_at(&self, t: f64) -> f64 {
        let mut depth = self.start_depth_m;
        for (k, seg) in self.speed.iter().enumerate() {
            if t <= seg.start_s {
                break;
            }
            let end = self.speed.get(k + 1).map_or(f64::INFINITY, |s| s.start_s).min(t);
            depth += (end - seg.start_s) * seg.speed_mps;
        }
        depth
    }

    /// Time at which the tool reaches `depth`, if it ever does.
    fn time_at(&self, depth: f64) -> Option<f64> {
        let mut d0 = self.start_depth_m;
        if depth < d0 {
            return None;
        }
        for (k, seg) in self.speed.iter().enumerate() {
            let next = self.speed.get(k + 1).map(|s| s.start_s);
            let d1 = next.map_or(f64::INFINITY, |n| d0 + (n - seg.start_s) * seg.speed_mps);
            if depth <= d1 {
                return Some(seg.start_s + (depth - d0) / seg.speed_mps);
            }
            d0 = d1;
        }
        None
    }
}

/// A collar the trajectory crosses inside the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub index: u64,
    /// Position in the tally.
    pub tally_index: usize,
    pub depth_m: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub signal: Vec<i16>,
    /// Collar center sample indices, ascending.
    pub labels: Vec<u64>,
    pub tally: CasingTally,
    /// `(time_s, depth_m)` every [`TRAJECTORY_STEP`] samples.
    pub trajectory: Vec<(f64, f64)>,
    pub crossings: Vec<Crossing>,
    /// Samples saturated by 16-bit quantization.
    pub clipped: usize,
    pub polarity: i8,
}

impl RunArtifacts {
    /// Tally position of the first crossed collar.
    pub fn first_joint(&self) -> usize {
        self.crossings[0].tally_index
    }
}

/// Normalizer that maps raw counts back to nominal collar units.
pub fn nominal_normalizer() -> Normalizer {
    Normalizer {
        offset: 0.0,
        scale: RAW_SCALE as f32,
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated sd")
}

#[inline]
fn gauss(x: f64, sigma: f64) -> f64 {
    libm::exp(-0.5 * (x / sigma) * (x / sigma))
}

/// Adds a two-lobe pulse centered at `center` (samples).
///
/// Lobes sit at `center -/+ sep/2` with amplitudes `a1` and `-a2` times the
/// normalization that makes a symmetric doublet read exactly `a1` at its
/// lobe centers.
fn add_pulse(out: &mut [f64], center: f64, sigma: f64, sep: f64, a1: f64, a2: f64) {
    let norm = 1.0 / (1.0 - gauss(sep, sigma));
    let reach = sep / 2.0 + 6.0 * sigma;
    let lo = libm::floor(center - reach).max(0.0) as usize;
    let hi = (libm::ceil(center + reach) as usize + 1).min(out.len());
    for (i, y) in out.iter_mut().enumerate().take(hi).skip(lo) {
        let x = i as f64 - center;
        *y += norm * (a1 * gauss(x + sep / 2.0, sigma) - a2 * gauss(x - sep / 2.0, sigma));
    }
}

fn add_gaussian(out: &mut [f64], center: f64, sigma: f64, a: f64) {
    let reach = 6.0 * sigma;
    let lo = libm::floor(center - reach).max(0.0) as usize;
    let hi = (libm::ceil(center + reach) as usize + 1).min(out.len());
    for (i, y) in out.iter_mut().enumerate().take(hi).skip(lo) {
        *y += a * gauss(i as f64 - center, sigma);
    }
}

pub fn generate_run(config: &SynthConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let fs = SAMPLE_RATE_HZ as f64;
    let n = libm::round(config.duration_s * fs) as usize;
    if n == 0 {
        return Err(Error::InvalidConfig("synth: run shorter than one sample".into()));
    }
    let end_depth = config.depth_at(n as f64 / fs);

    let depths = match &config.tally_depths_m {
        Some(d) => d.clone(),
        None => {
            let mut r = rng(config.seed, 1);
            let joint = normal(config.joint_mean_m, config.joint_sd_m);
            let min_joint = 0.25 * config.joint_mean_m;
            // One collar above the start so the first crossing is never joint 1.
            let mut d = config.start_depth_m - r.random::<f64>() * config.joint_mean_m;
            let mut out = vec![d];
            while d <= end_depth + config.joint_mean_m {
                d += joint.sample(&mut r).max(min_joint);
                out.push(d);
            }
            out
        }
    };
    let tally = CasingTally::from_depths(&depths)?;

    let mut r = rng(config.seed, 2);
    let polarity = config.polarity.unwrap_or(if r.random::<bool>() { 1 } else { -1 });
    let amp = normal(config.amplitude_mean, config.amplitude_sd);
    let mut crossings = Vec::new();
    for (k, &d) in depths.iter().enumerate() {
        let Some(t) = config.time_at(d) else { continue };
        let index = libm::round(t * fs);
        if index < 0.0 || index >= n as f64 {
            continue;
        }
        crossings.push(Crossing {
            index: index as u64,
            tally_index: k,
            depth_m: d,
            amplitude: amp.sample(&mut r).max(0.1 * config.amplitude_mean),
        });
    }
    if crossings.is_empty() {
        return Err(Error::NoCollars);
    }

    let sigma = config.pulse_sigma_ms * fs / 1000.0;
    let sep = config.lobe_separation * sigma;
    let sign = polarity as f64;
    let mut x = vec![0.0f64; n];
    for c in &crossings {
        add_pulse(&mut x, c.index as f64, sigma, sep, sign * c.amplitude, sign * c.amplitude);
    }

    let mut r = rng(config.seed, 3);
    let expected = config.interference_per_min * config.duration_s / 60.0;
    let count = libm::floor(expected) as usize + usize::from(r.random::<f64>() < expected - libm::floor(expected));
    let guard = INTERFERENCE_GUARD_SIGMAS * sigma;
    let (lo, hi) = config.interference_amplitude;
    for _ in 0..count {
        let mut center = None;
        for _ in 0..64 {
            let c = r.random::<f64>() * n as f64;
            if crossings.iter().all(|k| libm::fabs(k.index as f64 - c) > guard) {
                center = Some(c);
                break;
            }
        }
        let a = lo + (hi - lo) * r.random::<f64>();
        let s = sigma * (0.5 + 1.5 * r.random::<f64>());
        let sgn = if r.random::<bool>() { 1.0 } else { -1.0 };
        let bimodal = r.random::<bool>();
        let ratio = 0.3 + 0.6 * r.random::<f64>();
        let spread = 2.0 + 3.0 * r.random::<f64>();
        let Some(c) = center else { continue };
        if bimodal {
            add_pulse(&mut x, c, s, spread * s, sgn * a, sgn * a * ratio);
        } else {
            add_gaussian(&mut x, c, s, sgn * a);
        }
    }

    let mut r = rng(config.seed, 4);
    if config.wander_amplitude > 0.0 {
        let phase = r.random::<f64>() * core::f64::consts::TAU;
        let w = core::f64::consts::TAU / (config.wander_period_s * fs);
        for (i, y) in x.iter_mut().enumerate() {
            *y += config.wander_amplitude * libm::sin(w * i as f64 + phase);
        }
    }
    if config.noise_sd > 0.0 {
        let noise = normal(0.0, config.noise_sd);
        for y in x.iter_mut() {
            *y += noise.sample(&mut r);
        }
    }

    let mut clipped = 0;
    let signal = x
        .iter()
        .map(|&v| {
            let q = libm::round(v * RAW_SCALE);
            if q > i16::MAX as f64 || q < i16::MIN as f64 {
                clipped += 1;
            }
            q.clamp(i16::MIN as f64, i16::MAX as f64) as i16
        })
        .collect();

    let trajectory = (0..n)
        .step_by(TRAJECTORY_STEP)
        .map(|i| {
            let t = i as f64 / fs;
            (t, config.depth_at(t))
        })
        .collect();

    Ok(RunArtifacts {
        signal,
        labels: crossings.iter().map(|c| c.index).collect(),
        tally,
        trajectory,
        crossings,
        clipped,
        polarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{correlate_tally, CollarEvent, Direction};

    fn quiet() -> SynthConfig {
        SynthConfig {
            noise_sd: 0.0,
            interference_per_min: 0.0,
            wander_amplitude: 0.0,
            amplitude_sd: 0.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn single_collar_at_five_seconds() {
        let cfg = SynthConfig {
            duration_s: 10.0,
            tally_depths_m: Some(vec![1005.0]),
            polarity: Some(1),
            ..quiet()
        };
        let run = generate_run(&cfg).unwrap();
        assert_eq!(run.labels, vec![5000]);
        let s = &run.signal;
        // Antisymmetric about the label, positive lobe first.
        for k in 1..200 {
            assert_eq!(s[5000 - k], -s[5000 + k]);
        }
        assert_eq!(s[5000], 0);
        assert_eq!(s[5000 - 18], RAW_SCALE as i16);
        assert_eq!(s[1000], 0);
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig {
            seed: 42,
            ..SynthConfig::default()
        };
        assert_eq!(generate_run(&cfg).unwrap(), generate_run(&cfg).unwrap());
        let other = generate_run(&SynthConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(generate_run(&SynthConfig { seed: 42, ..SynthConfig::default() }).unwrap().signal, other.signal);
    }

    #[test]
    fn label_count_matches_traversed_interval() {
        for seed in 0..20 {
            let cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            let run = generate_run(&cfg).unwrap();
            let (d0, d1) = (cfg.start_depth_m, cfg.start_depth_m + 60.0);
            let inside = run
                .tally
                .entries()
                .iter()
                .filter(|e| e.depth_m >= d0 && e.depth_m < d1)
                .count();
            assert_eq!(run.labels.len(), inside, "seed {seed}");
        }
    }

    #[test]
    fn labels_correlate_back_to_tally() {
        let cfg = SynthConfig {
            seed: 9,
            speed: vec![
                SpeedSegment {
                    start_s: 0.0,
                    speed_mps: 0.8,
                },
                SpeedSegment {
                    start_s: 25.0,
                    speed_mps: 1.4,
                },
            ],
            ..SynthConfig::default()
        };
        let run = generate_run(&cfg).unwrap();
        let events: Vec<CollarEvent> = run
            .labels
            .iter()
            .map(|&l| CollarEvent {
                start: l,
                end: l,
                peak: 1.0,
                centroid: l as f64,
            })
            .collect();
        let a = correlate_tally(&events, &run.tally, run.first_joint(), Direction::Down).unwrap();
        for (asg, c) in a.iter().zip(&run.crossings) {
            assert_eq!(asg.depth_m, c.depth_m);
            let traj = cfg.depth_at(c.index as f64 / 1000.0);
            assert!((traj - c.depth_m).abs() <= 1.4e-3 / 2.0 + 1e-9);
        }
    }

    #[test]
    fn configured_snr_is_measured() {
        let cfg = SynthConfig {
            seed: 5,
            duration_s: 1200.0,
            wander_amplitude: 0.0,
            interference_per_min: 0.0,
            noise_sd: 0.1,
            amplitude_sd: 0.1,
            polarity: Some(-1),
            ..SynthConfig::default()
        };
        let run = generate_run(&cfg).unwrap();
        assert!(run.crossings.len() >= 100);
        let x: Vec<f64> = run.signal.iter().map(|&v| v as f64 / RAW_SCALE).collect();
        let half = (cfg.lobe_separation * cfg.pulse_sigma_ms / 2.0) as usize;
        let peak: f64 = run
            .crossings
            .iter()
            .map(|c| {
                let i = c.index as usize;
                (x[i + half] - x[i - half]) / 2.0
            })
            .sum::<f64>()
            / run.crossings.len() as f64;
        // Noise from the stretch halfway between consecutive collars.
        let mut quiet = Vec::new();
        for w in run.crossings.windows(2) {
            let mid = ((w[0].index + w[1].index) / 2) as usize;
            quiet.extend_from_slice(&x[mid - 500..mid + 500]);
        }
        let mean = quiet.iter().sum::<f64>() / quiet.len() as f64;
        let sd = (quiet.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / quiet.len() as f64).sqrt();
        let ratio = peak / sd;
        assert!((ratio / cfg.snr() - 1.0).abs() < 0.1, "measured {ratio}, configured {}", cfg.snr());
    }

    #[test]
    fn overflow_is_clipped_and_counted() {
        let cfg = SynthConfig {
            seed: 3,
            interference_per_min: 600.0,
            interference_amplitude: (5.0, 5.0),
            noise_sd: 0.0,
            wander_amplitude: 0.0,
            ..SynthConfig::default()
        };
        let run = generate_run(&cfg).unwrap();
        assert!(run.clipped > 0);
    }

    #[test]
    fn no_collars_is_an_error() {
        let cfg = SynthConfig {
            tally_depths_m: Some(vec![5.0]),
            ..quiet()
        };
        assert_eq!(generate_run(&cfg), Err(Error::NoCollars));
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = SynthConfig::default();
        cfg.speed[0].speed_mps = 0.0;
        assert!(generate_run(&cfg).is_err());
        let cfg = SynthConfig {
            pulse_sigma_ms: -1.0,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
