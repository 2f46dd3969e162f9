//! Coordinator-side optimizers applied to the aggregated pseudogradient.

use crate::clipping::{biclip_coordinatewise, BiClipThresholds, Schedule};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vectorops::{project_ball, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterKind {
    Avg,
    BiClip,
    Adagrad,
    Rmsprop,
    Adam,
}

impl OuterKind {
    pub fn name(self) -> &'static str {
        match self {
            OuterKind::Avg => "avg",
            OuterKind::BiClip => "biclip",
            OuterKind::Adagrad => "adagrad",
            OuterKind::Rmsprop => "rmsprop",
            OuterKind::Adam => "adam",
        }
    }
}

impl std::str::FromStr for OuterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "avg" => Ok(OuterKind::Avg),
            "biclip" => Ok(OuterKind::BiClip),
            "adagrad" => Ok(OuterKind::Adagrad),
            "rmsprop" => Ok(OuterKind::Rmsprop),
            "adam" => Ok(OuterKind::Adam),
            other => Err(format!(
                "unknown outer kind `{other}` (expected avg, biclip, adagrad, rmsprop, adam)"
            )),
        }
    }
}

/// Hyperparameters of the outer optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSpec<T> {
    pub kind: OuterKind,
    pub lr: Schedule<T>,
    /// `u~(t)`, used by [`OuterKind::BiClip`].
    pub upper: Schedule<T>,
    /// `d~(t)`, used by [`OuterKind::BiClip`].
    pub lower: Schedule<T>,
    pub beta1: T,
    pub beta2: T,
    pub tau: T,
    /// Radius of the ball the model is projected onto after each step.
    pub projection: Option<T>,
}

impl<T: Real> OuterSpec<T> {
    /// `x += delta` every round.
    pub fn avg() -> Self {
        Self {
            kind: OuterKind::Avg,
            lr: Schedule::Constant(T::one()),
            upper: Schedule::Constant(T::infinity()),
            lower: Schedule::Constant(T::zero()),
            beta1: T::of(0.9),
            beta2: T::of(0.99),
            tau: T::of(1e-3),
            projection: None,
        }
    }

    pub fn validate(&self, rounds: u64) -> Result<()> {
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::contract("outer beta1 and beta2 must lie in [0, 1)"));
        }
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(Error::contract("outer tau must be positive and finite"));
        }
        if let Some(radius) = self.projection {
            if !(radius > T::zero()) {
                return Err(Error::contract("projection radius must be positive"));
            }
        }
        if self.kind == OuterKind::BiClip {
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
                "outer clipping thresholds out of order at round {t}: lower {d} > upper {u}"
            ))
        })
    }
}

/// Global model plus outer accumulators. Accumulators a kind does not use
/// stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterOptState<T> {
    spec: OuterSpec<T>,
    x: Vector<T>,
    m: Vector<T>,
    v: Vector<T>,
    round: u64,
    diverged: bool,
}

impl<T: Real> OuterOptState<T> {
    pub fn new(spec: OuterSpec<T>, x0: Vector<T>) -> Self {
        let dim = x0.dim();
        Self {
            spec,
            x: x0,
            m: Vector::zeros(dim),
            v: Vector::zeros(dim),
            round: 0,
            diverged: false,
        }
    }

    pub fn spec(&self) -> &OuterSpec<T> {
        &self.spec
    }

    pub fn x(&self) -> &Vector<T> {
        &self.x
    }

    pub fn m(&self) -> &Vector<T> {
        &self.m
    }

    pub fn v(&self) -> &Vector<T> {
        &self.v
    }

    /// Number of completed steps.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Applies round `t = round + 1` with pseudogradient `delta`.
    pub fn step(&mut self, delta: &Vector<T>) -> Result<()> {
        self.x.ensure_same_dim(delta)?;
        let t = self.round + 1;
        let eta = self.spec.lr.eval(t);
        let (b1, b2, tau) = (self.spec.beta1, self.spec.beta2, self.spec.tau);
        match self.spec.kind {
            OuterKind::Avg => self.x.axpy_in_place(eta, delta)?,
            OuterKind::BiClip => {
                let clipped = biclip_coordinatewise(&self.spec.thresholds(t)?, delta);
                self.x.axpy_in_place(eta, &clipped)?;
            }
            OuterKind::Adagrad => {
                for ((x, v), &d) in self
                    .x
                    .as_mut_slice()
                    .iter_mut()
                    .zip(self.v.as_mut_slice())
                    .zip(delta.iter())
                {
                    *v = *v + d * d;
                    *x = *x + eta * d / (v.sqrt() + tau);
                }
            }
            OuterKind::Rmsprop => {
                for ((x, v), &d) in self
                    .x
                    .as_mut_slice()
                    .iter_mut()
                    .zip(self.v.as_mut_slice())
                    .zip(delta.iter())
                {
                    *v = b2 * *v + (T::one() - b2) * d * d;
                    *x = *x + eta * d / (v.sqrt() + tau);
                }
            }
            OuterKind::Adam => {
                let slots = self.m.as_mut_slice().iter_mut().zip(self.v.as_mut_slice());
                for ((x, (m, v)), &d) in self.x.as_mut_slice().iter_mut().zip(slots).zip(delta.iter()) {
                    *m = b1 * *m + (T::one() - b1) * d;
                    *v = b2 * *v + (T::one() - b2) * d * d;
                    *x = *x + eta * *m / (v.sqrt() + tau);
                }
            }
        }
        if let Some(radius) = self.spec.projection {
            self.x = project_ball(&self.x, radius)?;
        }
        self.round = t;
        if !delta.is_finite() || !self.x.is_finite() {
            self.diverged = true;
        }
        Ok(())
    }
}

/// Functional form of [`OuterOptState::step`].
pub fn outer_step<T: Real>(mut state: OuterOptState<T>, delta: &Vector<T>) -> Result<OuterOptState<T>> {
    state.step(delta)?;
    Ok(state)
}
