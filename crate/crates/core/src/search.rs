//! Exhaustive budget search over a bounded CRN family.
//!
//! Candidates are visited in a fixed order:
//!
//! 1. head input: global average pooling, then flatten
//! 2. input pool kernel (CRN-3 only), ascending
//! 3. block count, ascending
//! 4. shared kernel size, ascending
//! 5. blocks depth-first: channel width ascending (never below the previous
//!    block), then trailing pool (none first, then the configured kernels);
//!    with a pooled head the last block is never pooled
//! 6. head: a single Dense, then a hidden Dense of width 1, 2, ...
//!
//! The first exact `(params, macs)` match wins. Otherwise the candidate with
//! the smallest relative L1 distance is returned, ties going to fewer MACs,
//! then fewer parameters, then enumeration order. Costs only grow as a
//! candidate is extended, so branches whose lower bound already exceeds the
//! best distance are cut without changing the result.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::{layer_cost, CostReport};
use crate::error::{Error, Result};
use crate::layer::{LayerSpec, Padding, DEFAULT_BN_EPSILON};
use crate::model::ArchConfig;
use crate::tensor::Shape;
use crate::zoo::{BlockSpec, ConvStyle, CrnSpec, HeadInput};
use crate::WINDOW_LEN;

/// Parameter/MAC budget with a per-axis relative tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetTarget {
    pub params: u64,
    pub macs: u64,
    pub tolerance: f64,
}

impl BudgetTarget {
    pub fn new(params: u64, macs: u64, tolerance: f64) -> Result<Self> {
        if params == 0 || macs == 0 {
            return Err(Error::InvalidConfig("budget targets must be positive".into()));
        }
        if !(0.0..=0.1).contains(&tolerance) {
            return Err(Error::InvalidConfig(format!(
                "budget tolerance must lie in [0, 0.1], got {tolerance}"
            )));
        }
        Ok(Self {
            params,
            macs,
            tolerance,
        })
    }

    pub const fn exact(params: u64, macs: u64) -> Self {
        Self {
            params,
            macs,
            tolerance: 0.0,
        }
    }

    /// Relative L1 distance of a cost from the target.
    pub fn distance(&self, cost: CostReport) -> f64 {
        let (dp, dm) = self.deviation(cost);
        libm::fabs(dp) + libm::fabs(dm)
    }

    /// Signed relative deviation per axis, `(params, macs)`.
    pub fn deviation(&self, cost: CostReport) -> (f64, f64) {
        (
            (cost.params as f64 - self.params as f64) / self.params as f64,
            (cost.macs as f64 - self.macs as f64) / self.macs as f64,
        )
    }

    pub fn accepts(&self, cost: CostReport) -> bool {
        let (dp, dm) = self.deviation(cost);
        libm::fabs(dp) <= self.tolerance && libm::fabs(dm) <= self.tolerance
    }

    fn lower_bound(&self, partial: CostReport) -> f64 {
        let over = |have: u64, want: u64| have.saturating_sub(want) as f64 / want as f64;
        over(partial.params, self.params) + over(partial.macs, self.macs)
    }
}

/// Architecture families the search can enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Standard convolution blocks.
    Crn1,
    /// Depthwise separable blocks.
    Crn2,
    /// Depthwise separable blocks behind an input average pool.
    Crn3,
    /// `Flatten → Dense(n, 1)` on an `[1 × n]` input.
    SingleDense,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Crn1 => "crn1",
            Family::Crn2 => "crn2",
            Family::Crn3 => "crn3",
            Family::SingleDense => "single-dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBounds {
    pub max_blocks: usize,
    pub min_channels: usize,
    pub max_channels: usize,
    pub kernels: Vec<usize>,
    pub pools: Vec<usize>,
    pub input_pools: Vec<usize>,
    pub max_hidden: usize,
    /// Largest input length tried by [`Family::SingleDense`].
    pub max_dense_inputs: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            max_blocks: 4,
            min_channels: 2,
            max_channels: 32,
            kernels: vec![3, 5, 7, 9],
            pools: vec![2, 4],
            input_pools: vec![2, 4],
            max_hidden: 64,
            max_dense_inputs: WINDOW_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub config: ArchConfig,
    /// Compact form for CRN families.
    pub spec: Option<CrnSpec>,
    pub cost: CostReport,
    pub exact: bool,
    pub distance: f64,
    /// Signed relative deviation `(params, macs)` from the target.
    pub deviation: (f64, f64),
    /// Complete candidates evaluated.
    pub visited: u64,
}

/// Finds a family member whose cost equals `target`, or the nearest one.
pub fn search_budget_config(
    target: BudgetTarget,
    family: Family,
    bounds: &SearchBounds,
) -> Result<SearchOutcome> {
    if family == Family::SingleDense {
        return search_single_dense(target, bounds);
    }
    let style = match family {
        Family::Crn1 => ConvStyle::Standard,
        _ => ConvStyle::Separable,
    };
    let input_pools: Vec<Option<usize>> = if family == Family::Crn3 {
        bounds.input_pools.iter().map(|&p| Some(p)).collect()
    } else {
        vec![None]
    };
    if bounds.max_blocks == 0
        || bounds.kernels.is_empty()
        || bounds.min_channels == 0
        || bounds.min_channels > bounds.max_channels
        || input_pools.is_empty()
    {
        return Err(Error::EmptySearchSpace);
    }

    let mut search = Search {
        target,
        style,
        bounds,
        exact_only: true,
        best: None,
        visited: 0,
        blocks: Vec::with_capacity(bounds.max_blocks),
    };
    // Exact pass with tight pruning, then the nearest-miss pass.
    for exact_only in [true, false] {
        search.exact_only = exact_only;
        for head in [HeadInput::GlobalAvgPool, HeadInput::Flatten] {
            for &input_pool in &input_pools {
                let length = match input_pool {
                    Some(p) if p == 0 || WINDOW_LEN % p != 0 => continue,
                    Some(p) => WINDOW_LEN / p,
                    None => WINDOW_LEN,
                };
                for n_blocks in 1..=bounds.max_blocks {
                    for &kernel in &bounds.kernels {
                        let frame = Frame {
                            head,
                            input_pool,
                            n_blocks,
                            kernel,
                        };
                        search.blocks.clear();
                        search.descend(&frame, 1, length, CostReport::default());
                        if search.found_exact() {
                            return Ok(search.finish(family));
                        }
                    }
                }
            }
        }
        if exact_only {
            search.best = None;
        }
    }
    if search.best.is_none() {
        return Err(Error::EmptySearchSpace);
    }
    Ok(search.finish(family))
}

fn search_single_dense(target: BudgetTarget, bounds: &SearchBounds) -> Result<SearchOutcome> {
    if bounds.max_dense_inputs == 0 {
        return Err(Error::EmptySearchSpace);
    }
    let mut best: Option<(f64, CostReport, usize)> = None;
    let mut visited = 0;
    for n in 1..=bounds.max_dense_inputs {
        visited += 1;
        let cost = layer_cost(&LayerSpec::Dense { n_in: n, n_out: 1 }, Shape::new(1, 1));
        let d = target.distance(cost);
        if better(d, cost, best.map(|b| (b.0, b.1))) {
            best = Some((d, cost, n));
        }
        if d == 0.0 {
            break;
        }
    }
    let (distance, cost, n) = best.expect("nonempty range");
    let config = ArchConfig::new(
        "single-dense",
        Shape::new(1, n),
        vec![LayerSpec::Flatten, LayerSpec::Dense { n_in: n, n_out: 1 }],
    );
    Ok(SearchOutcome {
        config,
        spec: None,
        cost,
        exact: distance == 0.0,
        distance,
        deviation: target.deviation(cost),
        visited,
    })
}

fn better(d: f64, cost: CostReport, best: Option<(f64, CostReport)>) -> bool {
    match best {
        None => true,
        Some((bd, bc)) => {
            if d != bd {
                d < bd
            } else if cost.macs != bc.macs {
                cost.macs < bc.macs
            } else {
                cost.params < bc.params
            }
        }
    }
}

struct Frame {
    head: HeadInput,
    input_pool: Option<usize>,
    n_blocks: usize,
    kernel: usize,
}

struct Best {
    distance: f64,
    cost: CostReport,
    spec: CrnSpec,
}

struct Search<'a> {
    target: BudgetTarget,
    style: ConvStyle,
    bounds: &'a SearchBounds,
    exact_only: bool,
    best: Option<Best>,
    visited: u64,
    blocks: Vec<BlockSpec>,
}

impl Search<'_> {
    fn found_exact(&self) -> bool {
        self.best.as_ref().is_some_and(|b| b.distance == 0.0)
    }

    fn prune(&self, partial: CostReport) -> bool {
        if self.exact_only {
            partial.params > self.target.params || partial.macs > self.target.macs
        } else {
            self.best
                .as_ref()
                .is_some_and(|b| self.target.lower_bound(partial) > b.distance)
        }
    }

    fn descend(&mut self, frame: &Frame, c_in: usize, length: usize, partial: CostReport) {
        if self.found_exact() {
            return;
        }
        let depth = self.blocks.len();
        if depth == frame.n_blocks {
            self.complete(frame, c_in, length, partial);
            return;
        }
        let last = depth + 1 == frame.n_blocks;
        let c_min = if depth == 0 {
            self.bounds.min_channels
        } else {
            c_in
        };
        for channels in c_min..=self.bounds.max_channels {
            let with_block = partial + block_cost(self.style, c_in, channels, frame.kernel, length);
            if self.prune(with_block) {
                // Wider blocks only cost more.
                break;
            }
            let pooled_head = frame.head == HeadInput::GlobalAvgPool;
            let pools = core::iter::once(1).chain(
                self.bounds
                    .pools
                    .iter()
                    .copied()
                    .filter(|&p| !(last && pooled_head) && p > 1),
            );
            for pool in pools {
                if length % pool != 0 || length / pool == 0 {
                    continue;
                }
                self.blocks.push(BlockSpec { channels, pool });
                self.descend(frame, channels, length / pool, with_block);
                self.blocks.pop();
                if self.found_exact() {
                    return;
                }
            }
        }
    }

    fn complete(&mut self, frame: &Frame, channels: usize, length: usize, body: CostReport) {
        let n = match frame.head {
            HeadInput::GlobalAvgPool => channels,
            HeadInput::Flatten => channels * length,
        } as u64;
        let consider = |this: &mut Self, hidden: Option<usize>| {
            let head = match hidden {
                None => CostReport::new(n + 1, n),
                Some(h) => {
                    let h = h as u64;
                    CostReport::new(n * h + h + h + 1, n * h + h)
                }
            };
            let cost = body + head;
            this.visited += 1;
            let d = this.target.distance(cost);
            if this.exact_only && d != 0.0 {
                return;
            }
            if better(d, cost, this.best.as_ref().map(|b| (b.distance, b.cost))) {
                this.best = Some(Best {
                    distance: d,
                    cost,
                    spec: CrnSpec {
                        style: this.style,
                        input_pool: frame.input_pool,
                        kernel: frame.kernel,
                        blocks: this.blocks.clone(),
                        head_input: frame.head,
                        hidden,
                    },
                });
            }
        };
        consider(self, None);
        if self.exact_only {
            // The hidden width is pinned by the remaining MAC budget.
            let rest = self.target.macs.saturating_sub(body.macs);
            if rest > 0 && rest % (n + 1) == 0 {
                let h = (rest / (n + 1)) as usize;
                if (1..=self.bounds.max_hidden).contains(&h) {
                    consider(self, Some(h));
                }
            }
        } else {
            for h in 1..=self.bounds.max_hidden {
                consider(self, Some(h));
            }
        }
    }

    fn finish(self, family: Family) -> SearchOutcome {
        let best = self.best.expect("candidate found");
        let config = best.spec.build(family.as_str());
        debug_assert_eq!(crate::cost::count_costs(&config).ok(), Some(best.cost));
        SearchOutcome {
            config,
            spec: Some(best.spec),
            cost: best.cost,
            exact: best.distance == 0.0,
            distance: best.distance,
            deviation: self.target.deviation(best.cost),
            visited: self.visited,
        }
    }
}

/// Cost of one block (without its pool) at input length `length`.
fn block_cost(style: ConvStyle, c_in: usize, c_out: usize, kernel: usize, length: usize) -> CostReport {
    let out = |c| Shape::new(c, length);
    let bn = |c| layer_cost(
        &LayerSpec::BatchNorm {
            channels: c,
            epsilon: DEFAULT_BN_EPSILON,
        },
        out(c),
    );
    match style {
        ConvStyle::Standard => {
            layer_cost(
                &LayerSpec::Conv1D {
                    c_in,
                    c_out,
                    kernel,
                    stride: 1,
                    padding: Padding::Same,
                },
                out(c_out),
            ) + bn(c_out)
        }
        ConvStyle::Separable => {
            layer_cost(
                &LayerSpec::DepthwiseConv1D {
                    channels: c_in,
                    kernel,
                    stride: 1,
                    padding: Padding::Same,
                },
                out(c_in),
            ) + bn(c_in)
                + layer_cost(&LayerSpec::PointwiseConv1D { c_in, c_out }, out(c_out))
                + bn(c_out)
        }
    }
}
