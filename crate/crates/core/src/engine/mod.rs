//! Nested optimization: local epochs on every participant, weighted
//! aggregation into a pseudogradient, and one outer-optimizer step per round.

mod inner;
mod outer;
mod participation;

use rayon::prelude::*;

pub use inner::{local_epoch, BatchSize, ClipKind, EpochOutcome, InnerSpec};
pub use outer::{outer_step, OuterKind, OuterOptState, OuterSpec};
pub use participation::{aggregate, sample_participants, subsampled_objective, ParticipationMode, ParticipationSpec};

use crate::error::Result;
use crate::problems::RegressionProblem;
use crate::scalar::Real;
use crate::stream::Streams;
use crate::vectorops::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport<T> {
    pub round: u64,
    pub participants: Vec<usize>,
    /// Aggregated pseudogradient `Delta_t`.
    pub delta: Vector<T>,
    pub delta_l2_norm: T,
    pub delta_inf_norm: T,
    /// Participants whose epoch produced non-finite values.
    pub diverged_nodes: Vec<usize>,
    /// The global model is no longer finite.
    pub diverged: bool,
}

/// Runs round `t = state.round() + 1` and advances `state`.
///
/// Node epochs run on the current rayon pool. Each reads only its own
/// substreams and results are collected in participant order, so the outcome
/// does not depend on the pool size.
pub fn run_round<T: Real>(
    problem: &RegressionProblem<T>,
    inner: &InnerSpec<T>,
    state: &mut OuterOptState<T>,
    participation: &ParticipationSpec,
    streams: &Streams,
) -> Result<RoundReport<T>> {
    let t = state.round() + 1;
    let participants = sample_participants(problem.nodes(), participation, &mut streams.participation(t));
    let x = state.x().clone();
    let outcomes: Vec<EpochOutcome<T>> = participants
        .par_iter()
        .map(|&node| local_epoch(problem, node, &x, inner, t, streams))
        .collect::<Result<_>>()?;
    let diverged_nodes = participants
        .iter()
        .zip(&outcomes)
        .filter(|(_, o)| o.diverged)
        .map(|(&i, _)| i)
        .collect();
    let deltas: Vec<Vector<T>> = outcomes.into_iter().map(|o| o.delta).collect();
    let delta = aggregate(
        &deltas,
        problem.node_weights(),
        &participants,
        participation.renormalize,
    )?;
    state.step(&delta)?;
    Ok(RoundReport {
        round: t,
        participants,
        delta_l2_norm: delta.l2_norm(),
        delta_inf_norm: delta.linf_norm(),
        delta,
        diverged_nodes,
        diverged: state.diverged(),
    })
}
