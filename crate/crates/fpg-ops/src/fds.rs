//! Chain-level Fisher sensitivity, Hutchinson estimation, and the truncated
//! tail score with its error bound.
//!
//! The chain Jacobian from condition to final action is a sum of per-step
//! condition Jacobians propagated through the state Jacobians of the steps
//! applied after them. Its Frobenius norm is estimated without ever forming
//! the chain matrix via vector-Jacobian probes. The additive surrogate
//! `Ī = Σ_t w_t·I(C,t)` admits a tail truncation whose relative error is
//! bounded by `κ·(Σ_{t>M} w_t)/(Σ_{t≤M} w_t)` with `κ` measured from the
//! realized per-step scores.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::denoiser::{ActionState, Condition, Denoiser};
use crate::fpg::{mean_coefficients, Solver};
use crate::schedule::{fds_prefactor, NoiseSchedule};
use crate::{Error, Result};

/// Which propagation operator links the per-step Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Model-dependent part only: factors `I − (d_s/c_s)·∂ε/∂a_s` with the
    /// per-step injection `J(C,t) = −√((1−ᾱ_t)/ᾱ_t)·∂ε/∂C`. The solver
    /// scalars only rescale sensitivity, so they are normalized away.
    Normalized,
    /// Full solver factors `c_s·I − d_s·∂ε/∂a_s` with injection
    /// `−d_t·∂ε/∂C`: the true derivative of the deterministic mean chain,
    /// used by the brute-force equivalence oracle.
    Full,
}

/// Per-step Jacobians recorded along a reverse trajectory.
#[derive(Debug, Clone)]
pub struct ChainStep {
    pub t: usize,
    /// `∂ε/∂C` at the visited state.
    pub cond_jacobian: DMatrix<f64>,
    /// `∂ε/∂a` at the visited state.
    pub state_jacobian: DMatrix<f64>,
}

/// Jacobians for every visited step, aligned `t = T..1`.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub steps: Vec<ChainStep>,
    pub schedule: NoiseSchedule,
}

fn check_state_order(schedule: &NoiseSchedule, states: &[ActionState]) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let total = schedule.total_steps();
    if states[0].step != total || states[states.len() - 1].step != 1 {
        return Err(Error::InvalidArgument(format!(
            "states must cover t = {total}..1 in visit order"
        )));
    }
    for pair in states.windows(2) {
        if pair[1].step + 1 != pair[0].step {
            return Err(Error::InvalidArgument(
                "states must descend by one step at a time".into(),
            ));
        }
    }
    Ok(())
}

impl ChainTrace {
    /// Record per-step Jacobians at each visited state (`t = T..1`).
    pub fn record(
        model: &Denoiser,
        schedule: &NoiseSchedule,
        cond: &Condition,
        states: &[ActionState],
    ) -> Result<Self> {
        check_state_order(schedule, states)?;
        let mut steps = Vec::with_capacity(states.len());
        for state in states {
            steps.push(ChainStep {
                t: state.step,
                cond_jacobian: model.condition_jacobian(cond, state)?,
                state_jacobian: model.state_jacobian(cond, state)?,
            });
        }
        Ok(ChainTrace {
            steps,
            schedule: schedule.clone(),
        })
    }

    /// Chain Jacobian `J(C) = Σ_t P_{t←}·J(C,t)`.
    ///
    /// The propagation for step `t` is the ordered product of the factors of
    /// the steps applied after it (all `s < t`), so the factor at the final
    /// step `t = 1` is the identity.
    pub fn chain_jacobian(&self, solver: Solver, propagation: Propagation) -> Result<DMatrix<f64>> {
        let d_a = self.steps[0].cond_jacobian.nrows();
        let d_c = self.steps[0].cond_jacobian.ncols();
        let mut total: DMatrix<f64> = DMatrix::zeros(d_a, d_c);
        let mut prefix: DMatrix<f64> = DMatrix::identity(d_a, d_a);
        let eye = DMatrix::<f64>::identity(d_a, d_a);
        // Visit order is t = T..1; process in application order t = 1..T.
        for step in self.steps.iter().rev() {
            let (c, d) = mean_coefficients(solver, &self.schedule, step.t);
            let (inject, factor): (DMatrix<f64>, DMatrix<f64>) = match propagation {
                Propagation::Full => (
                    &step.cond_jacobian * -d,
                    &step.state_jacobian * -d + &eye * c,
                ),
                Propagation::Normalized => {
                    let pf = fds_prefactor(&self.schedule, step.t)?;
                    (
                        &step.cond_jacobian * -pf.sqrt(),
                        &step.state_jacobian * (-d / c) + &eye,
                    )
                }
            };
            total += &prefix * inject;
            prefix *= factor;
        }
        Ok(total)
    }
}

/// Chain Jacobian computed from scratch at the visited states.
pub fn chain_jacobian(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cond: &Condition,
    states: &[ActionState],
    solver: Solver,
    propagation: Propagation,
) -> Result<DMatrix<f64>> {
    ChainTrace::record(model, schedule, cond, states)?.chain_jacobian(solver, propagation)
}

/// Generic Hutchinson estimator of `‖J‖_F²` from the transposed-Jacobian
/// operator: `(1/K)·Σ_k ‖Jᵀ v_k‖²` with standard normal probes.
pub fn hutchinson_frobenius_sq<F>(
    mut apply_jt: F,
    probe_dim: usize,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> f64
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    assert!(probes >= 1, "need at least one probe");
    let mut acc = 0.0;
    for _ in 0..probes {
        let v = DVector::from_fn(probe_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        acc += apply_jt(&v).norm_squared();
    }
    acc / probes as f64
}

/// Unbiased estimate of the chain-Jacobian Frobenius norm squared via
/// vector-Jacobian probes; the chain matrix is never materialized.
#[allow(clippy::too_many_arguments)]
pub fn hutchinson_cfds(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cond: &Condition,
    states: &[ActionState],
    probes: usize,
    solver: Solver,
    propagation: Propagation,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidArgument("probes must be at least 1".into()));
    }
    check_state_order(schedule, states)?;
    let d_a = model.dims().action_dim();
    let mut failure: Option<Error> = None;
    let estimate = hutchinson_frobenius_sq(
        |v| {
            match chain_vjp(model, schedule, cond, states, solver, propagation, v) {
                Ok(y) => y,
                Err(e) => {
                    failure.get_or_insert(e);
                    DVector::zeros(model.dims().cond_dim)
                }
            }
        },
        d_a,
        probes,
        rng,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(estimate),
    }
}

/// `J(C)ᵀ·v` through per-step backward passes: the probe is propagated
/// through the transposed step factors while each step contributes the
/// transposed injection.
fn chain_vjp(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cond: &Condition,
    states: &[ActionState],
    solver: Solver,
    propagation: Propagation,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(model.dims().cond_dim);
    let mut r = v.clone();
    for state in states.iter().rev() {
        let t = state.step;
        let (c, d) = mean_coefficients(solver, schedule, t);
        let (cond_grad, action_grad) = model.vjp(cond, state, &r)?;
        match propagation {
            Propagation::Full => {
                out += cond_grad * -d;
                r = r * c - action_grad * d;
            }
            Propagation::Normalized => {
                let pf = fds_prefactor(schedule, t)?;
                out += cond_grad * -pf.sqrt();
                r -= action_grad * (d / c);
            }
        }
    }
    Ok(out)
}

/// Truncation report: per-step scores, the additive surrogate and its tail,
/// the realized relative truncation error, and the measured bound.
#[derive(Debug, Clone, Serialize)]
pub struct FdsReport {
    pub total_steps: usize,
    pub tail_len: usize,
    /// Step sensitivity `I(C,t) = (1−ᾱ_t)/ᾱ_t·‖∂ε/∂C‖_F²`, ordered `t = 1..T`.
    pub step_scores: Vec<f64>,
    /// `Ī = Σ_t w_t·I(C,t)`.
    pub additive_surrogate: f64,
    /// `Ī_tail = Σ_{t≤M} w_t·I(C,t)`.
    pub tail_surrogate: f64,
    /// Realized relative truncation error `(Ī − Ī_tail)/Ī`.
    pub eta: f64,
    /// Measured head/tail gradient ratio; absent when the tail carries no
    /// gradient (bound unavailable) or the head is empty.
    pub kappa: Option<f64>,
    /// `κ·(Σ_{t>M} w_t)/(Σ_{t≤M} w_t)`; `Some(0)` when the head is empty,
    /// `None` when κ is undefined.
    pub eta_bound: Option<f64>,
    /// Set when the surrogate itself vanished (η defined as 0).
    pub degenerate: bool,
}

impl FdsReport {
    /// Assemble the report from per-step scores ordered `t = 1..T`.
    pub fn from_scores(schedule: &NoiseSchedule, scores: &[f64], tail_len: usize) -> Result<Self> {
        let total = schedule.total_steps();
        if scores.len() != total {
            return Err(Error::DimensionMismatch {
                what: "per-step scores",
                expected: total,
                got: scores.len(),
            });
        }
        if tail_len == 0 || tail_len > total {
            return Err(Error::InvalidArgument(format!(
                "tail length {tail_len} outside 1..={total}"
            )));
        }
        let mut additive = 0.0;
        let mut tail = 0.0;
        for (idx, &score) in scores.iter().enumerate() {
            let t = idx + 1;
            let term = schedule.weight(t) * score;
            additive += term;
            if t <= tail_len {
                tail += term;
            }
        }
        let degenerate = additive <= 0.0;
        let eta = if degenerate {
            0.0
        } else {
            (additive - tail) / additive
        };
        let (kappa, eta_bound) = if tail_len == total {
            (None, Some(0.0))
        } else {
            let head_max = scores[tail_len..]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let tail_min = scores[..tail_len].iter().cloned().fold(f64::INFINITY, f64::min);
            if tail_min <= 0.0 {
                (None, None)
            } else {
                let kappa = head_max / tail_min;
                let (head_w, tail_w) = schedule.head_tail_weight_sums(tail_len)?;
                (Some(kappa), Some(kappa * head_w / tail_w))
            }
        };
        Ok(FdsReport {
            total_steps: total,
            tail_len,
            step_scores: scores.to_vec(),
            additive_surrogate: additive,
            tail_surrogate: tail,
            eta,
            kappa,
            eta_bound,
            degenerate,
        })
    }
}

/// Truncated sensitivity report over a recorded reverse trajectory.
pub fn tfds(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    cond: &Condition,
    states: &[ActionState],
    tail_len: usize,
) -> Result<FdsReport> {
    check_state_order(schedule, states)?;
    let mut scores = vec![0.0; schedule.total_steps()];
    for state in states {
        scores[state.step - 1] = model.step_fds(schedule, cond, state)?;
    }
    FdsReport::from_scores(schedule, &scores, tail_len)
}

/// Streaming tail accumulator: `Û = Σ_{t≤M} ‖∂ε/∂C‖_F²`, the raw unweighted
/// form the sampling loop accumulates per candidate.
#[derive(Debug, Clone)]
pub struct TfdsAccumulator {
    tail_len: usize,
    value: f64,
    observed: usize,
}

impl TfdsAccumulator {
    pub fn new(tail_len: usize) -> Self {
        TfdsAccumulator {
            tail_len,
            value: 0.0,
            observed: 0,
        }
    }

    /// Feed one reverse step's raw condition-gradient norm.
    pub fn observe(&mut self, t: usize, raw_grad_norm_sq: f64) {
        if t <= self.tail_len {
            self.value += raw_grad_norm_sq;
            self.observed += 1;
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn observed_steps(&self) -> usize {
        self.observed
    }
}
