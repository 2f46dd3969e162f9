//! Participant sampling and pseudogradient aggregation.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::problems::RegressionProblem;
use crate::scalar::Real;
use crate::vectorops::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticipationMode {
    Full,
    UniformSubsample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipationSpec {
    pub rate: f64,
    pub mode: ParticipationMode,
    /// Weight participants by `p_i / sum_{S} p`. Otherwise each participant is
    /// weighted by `p_i` divided by its inclusion probability `|S| / N`.
    pub renormalize: bool,
}

impl ParticipationSpec {
    pub fn full() -> Self {
        Self {
            rate: 1.0,
            mode: ParticipationMode::Full,
            renormalize: true,
        }
    }

    pub fn uniform(rate: f64, renormalize: bool) -> Result<Self> {
        let spec = Self {
            rate,
            mode: ParticipationMode::UniformSubsample,
            renormalize,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::contract(format!(
                "participation rate must lie in (0, 1], got {}",
                self.rate
            )));
        }
        if self.mode == ParticipationMode::Full && self.rate != 1.0 {
            return Err(Error::contract("full participation requires rate 1"));
        }
        Ok(())
    }

    /// `ceil(rate * nodes)`, at least one.
    pub fn sample_size(&self, nodes: usize) -> usize {
        match self.mode {
            ParticipationMode::Full => nodes,
            ParticipationMode::UniformSubsample => {
                // Guard against 0.35 * 10 = 3.5000000000000004 style round-up.
                let raw = self.rate * nodes as f64;
                let size = (raw - raw * 1e-12).ceil() as usize;
                size.clamp(1, nodes)
            }
        }
    }
}

/// Participating node indices in increasing order.
pub fn sample_participants<R: Rng + ?Sized>(nodes: usize, spec: &ParticipationSpec, rng: &mut R) -> Vec<usize> {
    let size = spec.sample_size(nodes);
    if size >= nodes {
        return (0..nodes).collect();
    }
    let mut chosen = index::sample(rng, nodes, size).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Weighted pseudogradient `Delta_t` from the participants' deltas.
///
/// `deltas[k]` belongs to node `participants[k]`; `weights` holds `p_i` for
/// every node. Under full participation or renormalization the result is a
/// convex combination, and it is clamped coordinate-wise into the range of
/// the inputs so rounding cannot push it outside their hull.
pub fn aggregate<T: Real>(
    deltas: &[Vector<T>],
    weights: &[T],
    participants: &[usize],
    renormalize: bool,
) -> Result<Vector<T>> {
    if participants.is_empty() {
        return Err(Error::contract("cannot aggregate over an empty participant set"));
    }
    if deltas.len() != participants.len() {
        return Err(Error::contract(format!(
            "{} deltas for {} participants",
            deltas.len(),
            participants.len()
        )));
    }
    let dim = deltas[0].dim();
    for d in deltas {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: d.dim(),
            });
        }
    }
    let full = participants.len() == weights.len();
    let total: T = participants.iter().map(|&i| weights[i]).sum();
    let convex = full || renormalize;
    let scale = if full {
        T::one()
    } else if renormalize {
        T::one() / total
    } else {
        T::of_usize(weights.len()) / T::of_usize(participants.len())
    };
    let mut out = Vector::zeros(dim);
    for (d, &i) in deltas.iter().zip(participants) {
        out.axpy_in_place(weights[i] * scale, d)?;
    }
    if convex {
        for j in 0..dim {
            let (lo, hi) = deltas.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), d| {
                (lo.min(d[j]), hi.max(d[j]))
            });
            if out[j].is_finite() {
                out[j] = out[j].max(lo).min(hi);
            }
        }
    }
    Ok(out)
}

/// `(sum_S p_i F_i(x)) / (sum_S p_i)`.
pub fn subsampled_objective<T: Real>(
    problem: &RegressionProblem<T>,
    x: &Vector<T>,
    participants: &[usize],
) -> Result<T> {
    if participants.is_empty() {
        return Err(Error::contract("empty participant set"));
    }
    let weights = problem.node_weights();
    let mut num = T::zero();
    let mut den = T::zero();
    for &i in participants {
        num = num + weights[i] * problem.node_objective(i, x)?;
        den = den + weights[i];
    }
    Ok(num / den)
}
