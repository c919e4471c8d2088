//! Per-tick latency of the streaming engine.

use std::hint::black_box;
use std::time::Instant;

use ccl_core::stream::StreamEngine;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub ticks: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl std::fmt::Display for LatencyStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ticks={} mean_us={:.3} p50_us={:.3} p99_us={:.3} max_us={:.3}",
            self.ticks, self.mean_us, self.p50_us, self.p99_us, self.max_us
        )
    }
}

/// Times every [`StreamEngine::step`] that emits a tick, over `repeats`
/// passes of `samples`. Warm-up steps are not timed.
pub fn bench_engine(engine: &mut StreamEngine, samples: &[i16], repeats: usize) -> LatencyStats {
    let mut times = Vec::with_capacity(samples.len() * repeats.max(1));
    for _ in 0..repeats.max(1) {
        engine.reset();
        for &s in samples {
            let t0 = Instant::now();
            let tick = black_box(engine.step(black_box(s)));
            let dt = t0.elapsed();
            if tick.is_some() {
                times.push(dt.as_nanos() as u64);
            }
        }
    }
    stats(&mut times)
}

fn stats(nanos: &mut [u64]) -> LatencyStats {
    if nanos.is_empty() {
        return LatencyStats {
            ticks: 0,
            mean_us: 0.0,
            p50_us: 0.0,
            p99_us: 0.0,
            max_us: 0.0,
        };
    }
    nanos.sort_unstable();
    let n = nanos.len();
    // Nearest-rank percentile.
    let rank = |q: f64| nanos[((q * n as f64).ceil() as usize).clamp(1, n) - 1] as f64 / 1e3;
    LatencyStats {
        ticks: n,
        mean_us: nanos.iter().sum::<u64>() as f64 / n as f64 / 1e3,
        p50_us: rank(0.50),
        p99_us: rank(0.99),
        max_us: nanos[n - 1] as f64 / 1e3,
    }
}
