//! Node-local update loop with TailClip.

use crate::clipping::{biclip_coordinatewise, biclip_l2, l2clip, BiClipThresholds, Schedule};
use crate::error::{Error, Result};
use crate::problems::{Batch, RegressionProblem};
use crate::scalar::Real;
use crate::stream::Streams;
use crate::vectorops::Vector;

/// Clipping applied to each local stochastic gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipKind {
    /// Plain SGD.
    None,
    /// `min{1, u/||g||} g`; the lower schedule is unused.
    L2,
    BiClipCoordinate,
    BiClipL2,
}

impl ClipKind {
    pub fn name(self) -> &'static str {
        match self {
            ClipKind::None => "none",
            ClipKind::L2 => "l2",
            ClipKind::BiClipCoordinate => "biclip-coordinate",
            ClipKind::BiClipL2 => "biclip-l2",
        }
    }
}

impl std::str::FromStr for ClipKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(ClipKind::None),
            "l2" => Ok(ClipKind::L2),
            "biclip-coordinate" | "biclip" => Ok(ClipKind::BiClipCoordinate),
            "biclip-l2" => Ok(ClipKind::BiClipL2),
            other => Err(format!(
                "unknown clip kind `{other}` (expected none, l2, biclip-coordinate, biclip-l2)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// The node's whole shard.
    Full,
    /// Rows sampled without replacement per step; the whole shard if larger.
    Rows(usize),
}

/// Inner optimizer: `z` local steps `x <- x - lr(t) * TailClip(u(t), d(t), g)`.
///
/// All schedules are evaluated at the outer round `t` and held fixed for the
/// epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSpec<T> {
    pub clip: ClipKind,
    pub lr: Schedule<T>,
    pub upper: Schedule<T>,
    pub lower: Schedule<T>,
    pub local_steps: usize,
    pub batch: BatchSize,
}

impl<T: Real> InnerSpec<T> {
    /// Unclipped SGD.
    pub fn sgd(lr: Schedule<T>, local_steps: usize, batch: BatchSize) -> Self {
        Self {
            clip: ClipKind::None,
            lr,
            upper: Schedule::Constant(T::infinity()),
            lower: Schedule::Constant(T::zero()),
            local_steps,
            batch,
        }
    }

    /// Checks the step count, batch size and `d(t) <= u(t)` for `t = 1..=rounds`.
    pub fn validate(&self, rounds: u64) -> Result<()> {
        if self.local_steps == 0 {
            return Err(Error::contract("local_steps must be at least 1"));
        }
        if self.batch == BatchSize::Rows(0) {
            return Err(Error::contract("batch size must be at least 1"));
        }
        if self.clip != ClipKind::None {
            for t in 1..=rounds.max(1) {
                self.thresholds(t)?;
            }
        }
        Ok(())
    }

    pub fn thresholds(&self, t: u64) -> Result<BiClipThresholds<T>> {
        let (u, d) = (self.upper.eval(t), self.lower.eval(t));
        BiClipThresholds::new(u, d).map_err(|_| {
            Error::contract(format!(
                "inner clipping thresholds out of order at round {t}: lower {d} > upper {u}"
            ))
        })
    }

    fn clip(&self, thresholds: &BiClipThresholds<T>, g: Vector<T>) -> Result<Vector<T>> {
        Ok(match self.clip {
            ClipKind::None => g,
            ClipKind::L2 => l2clip(thresholds.upper(), &g)?,
            ClipKind::BiClipCoordinate => biclip_coordinatewise(thresholds, &g),
            ClipKind::BiClipL2 => biclip_l2(thresholds, &g),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome<T> {
    /// `x_{i,z} - x_start`, accumulated step by step.
    pub delta: Vector<T>,
    /// Some coordinate became NaN or infinite.
    pub diverged: bool,
}

/// Runs one node's local epoch for round `round` and returns its displacement.
///
/// Step `k` draws its minibatch and noise from the substream
/// `(round, node, k)`, so epochs may run on any thread in any order.
pub fn local_epoch<T: Real>(
    problem: &RegressionProblem<T>,
    node: usize,
    x_start: &Vector<T>,
    spec: &InnerSpec<T>,
    round: u64,
    streams: &Streams,
) -> Result<EpochOutcome<T>> {
    if x_start.dim() != problem.dims() {
        return Err(Error::DimensionMismatch {
            expected: problem.dims(),
            found: x_start.dim(),
        });
    }
    let lr = spec.lr.eval(round);
    let thresholds = match spec.clip {
        ClipKind::None => BiClipThresholds::disabled(),
        _ => spec.thresholds(round)?,
    };
    let mut x = x_start.clone();
    let mut delta = Vector::zeros(x.dim());
    for step in 0..spec.local_steps {
        let mut rng = streams.local_step(round, node, step);
        let rows = match spec.batch {
            BatchSize::Full => None,
            BatchSize::Rows(size) => problem.sample_batch(node, size, &mut rng),
        };
        let batch = rows.as_deref().map_or(Batch::Full, Batch::Rows);
        let g = problem.node_gradient(node, &x, batch, &mut rng)?;
        let update = spec.clip(&thresholds, g)?;
        for ((xi, di), &gi) in x.as_mut_slice().iter_mut().zip(delta.as_mut_slice()).zip(update.iter()) {
            let s = lr * gi;
            *xi = *xi - s;
            *di = *di - s;
        }
    }
    let diverged = !delta.is_finite();
    Ok(EpochOutcome { delta, diverged })
}
