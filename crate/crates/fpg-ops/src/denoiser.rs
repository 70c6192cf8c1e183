//! Conditional noise-prediction network with a strictly linear output head.
//!
//! The trunk is a small smooth multilayer perceptron mapping
//! `(condition, action state, timestep embedding)` to a latent `h`; the
//! prediction is exactly `ε = W·h + b` with no nonlinearity after `h`, so the
//! low-rank factorization of the condition Jacobian through the head holds
//! with equality. All derivative queries are hand-derived and exact:
//!
//! - `condition_jacobian` / `state_jacobian`: reverse-chain input Jacobians,
//! - `step_fds`: the step Fisher sensitivity `(1−ᾱ_t)/ᾱ_t · ‖∂ε/∂C‖_F²`,
//! - `fisher_normal_exact`: the gradient of `step_fds` with respect to the
//!   action state (double backward through the Jacobian chain),
//! - `fisher_normal_latent`: the gradient of the same scalar with respect to
//!   a perturbation injected at the latent `h`, the quantity consumed by the
//!   low-rank head-space projection.
//!
//! Smooth activations are mandatory; kinked activations would leave the
//! second-order queries undefined on crease sets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::derive_rng;
use crate::schedule::{fds_prefactor, NoiseSchedule};
use crate::{Error, Result};

/// Trunk activation. The derivative must be expressible as a function of the
/// activation output (`tanh' = 1 − z²`), which is what makes the latent
/// sensitivity gradient well defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// Linear trunk; turns the network into an affine map. Used by oracle
    /// tests that need exactly-known Jacobians.
    Identity,
}

impl Activation {
    fn apply(&self, q: &mut DVector<f64>) {
        if let Activation::Tanh = self {
            q.apply(|v| *v = v.tanh());
        }
    }

    /// σ'(q) expressed through the activation output z.
    pub(crate) fn deriv_from_output(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Activation::Tanh => z.map(|v| 1.0 - v * v),
            Activation::Identity => DVector::from_element(z.len(), 1.0),
        }
    }

    /// d/dz of σ'(·) viewed as a function of the output z.
    fn sprime_output_grad(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Activation::Tanh => z.map(|v| -2.0 * v),
            Activation::Identity => DVector::zeros(z.len()),
        }
    }
}

/// Network dimensions. The action state flattens `horizon` 2-D waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Condition vector length.
    pub cond_dim: usize,
    /// Number of trajectory waypoints.
    pub horizon: usize,
    /// Width of the two hidden trunk layers.
    pub hidden_dim: usize,
    /// Latent dimension ahead of the linear head.
    pub latent_dim: usize,
    /// Sinusoidal timestep embedding length (even).
    pub time_embed_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            cond_dim: 260,
            horizon: 32,
            hidden_dim: 128,
            latent_dim: 64,
            time_embed_dim: 16,
        }
    }
}

impl ModelDims {
    pub fn action_dim(&self) -> usize {
        2 * self.horizon
    }

    pub fn input_dim(&self) -> usize {
        self.cond_dim + self.action_dim() + self.time_embed_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.cond_dim == 0
            || self.horizon == 0
            || self.hidden_dim == 0
            || self.latent_dim == 0
            || self.time_embed_dim == 0
        {
            return Err(Error::InvalidArgument(
                "all model dimensions must be positive".into(),
            ));
        }
        if self.time_embed_dim % 2 != 0 {
            return Err(Error::InvalidArgument(
                "time_embed_dim must be even".into(),
            ));
        }
        Ok(())
    }
}

/// Encoded observation the denoiser is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    values: DVector<f64>,
}

impl Condition {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("condition vector"));
        }
        Ok(Condition { values })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Noisy action trajectory at a given reverse-diffusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionState {
    pub values: DVector<f64>,
    pub step: usize,
}

impl ActionState {
    pub fn new(values: DVector<f64>, step: usize) -> Self {
        ActionState { values, step }
    }
}

/// Sinusoidal embedding of the (integer) step index.
pub fn time_embedding(step: usize, dim: usize) -> DVector<f64> {
    let half = dim / 2;
    let mut out = DVector::zeros(dim);
    for i in 0..half {
        let freq = (10_000.0f64).powf(-(i as f64) / half as f64);
        let angle = step as f64 * freq;
        out[2 * i] = angle.sin();
        out[2 * i + 1] = angle.cos();
    }
    out
}

/// Cached activations from one forward evaluation.
pub(crate) struct ForwardTrace {
    pub x: DVector<f64>,
    pub z1: DVector<f64>,
    pub z2: DVector<f64>,
    pub h: DVector<f64>,
    pub eps: DVector<f64>,
}

/// Which input block a Jacobian chain differentiates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum InputBlock {
    Condition,
    Action,
}

/// Layer-by-layer forward Jacobian accumulation against one input block:
/// `gammaK = ∂qK/∂θ` (pre-activation), `gK = ∂zK/∂θ`.
pub(crate) struct JacobianChain {
    pub gamma1: DMatrix<f64>,
    pub gamma2: DMatrix<f64>,
    pub gamma3: DMatrix<f64>,
    pub g3: DMatrix<f64>,
}

/// Everything the sampler wants from one model evaluation: the prediction,
/// the raw condition-gradient norm, the step sensitivity, and the latent
/// normal direction.
#[derive(Debug, Clone)]
pub struct FdsPass {
    pub eps: DVector<f64>,
    pub latent: DVector<f64>,
    /// `‖∂ε/∂C‖_F²` without the schedule prefactor (the streaming tail score
    /// accumulates exactly this).
    pub raw_grad_norm_sq: f64,
    /// `(1−ᾱ_t)/ᾱ_t · ‖∂ε/∂C‖_F²`.
    pub step_fds: f64,
    /// Latent-space sensitivity gradient `g_h`.
    pub latent_normal: DVector<f64>,
}

/// The conditional denoiser `ε_θ(C, a_t, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    dims: ModelDims,
    activation: Activation,
    pub(crate) w1: DMatrix<f64>,
    pub(crate) b1: DVector<f64>,
    pub(crate) w2: DMatrix<f64>,
    pub(crate) b2: DVector<f64>,
    pub(crate) w3: DMatrix<f64>,
    pub(crate) b3: DVector<f64>,
    pub(crate) head_w: DMatrix<f64>,
    pub(crate) head_b: DVector<f64>,
    pullback: DMatrix<f64>,
}

fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let bound = 1.0 / (cols as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

fn uniform_vector(rng: &mut impl Rng, len: usize, fan_in: usize) -> DVector<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    DVector::from_fn(len, |_, _| rng.random_range(-bound..bound))
}

/// Scale row i of `m` by `s[i]`, returning a new matrix.
fn row_scale(s: &DVector<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone_owned();
    for mut col in out.column_iter_mut() {
        for (v, &f) in col.iter_mut().zip(s.iter()) {
            *v *= f;
        }
    }
    out
}

/// Per-row inner products of two equally shaped matrices.
fn row_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    debug_assert_eq!(a.shape(), b.shape());
    let mut acc = DVector::zeros(a.nrows());
    for (ca, cb) in a.column_iter().zip(b.column_iter()) {
        for i in 0..acc.len() {
            acc[i] += ca[i] * cb[i];
        }
    }
    acc
}

impl Denoiser {
    /// Fresh model with fan-in-scaled symmetric uniform weights.
    pub fn init(dims: ModelDims, activation: Activation, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = derive_rng(seed, &[0x6d6f_64656c]);
        let d_in = dims.input_dim();
        let w1 = uniform_matrix(&mut rng, dims.hidden_dim, d_in);
        let b1 = uniform_vector(&mut rng, dims.hidden_dim, d_in);
        let w2 = uniform_matrix(&mut rng, dims.hidden_dim, dims.hidden_dim);
        let b2 = uniform_vector(&mut rng, dims.hidden_dim, dims.hidden_dim);
        let w3 = uniform_matrix(&mut rng, dims.latent_dim, dims.hidden_dim);
        let b3 = uniform_vector(&mut rng, dims.latent_dim, dims.hidden_dim);
        let head_w = uniform_matrix(&mut rng, dims.action_dim(), dims.latent_dim);
        let head_b = uniform_vector(&mut rng, dims.action_dim(), dims.latent_dim);
        Self::from_parts(dims, activation, w1, b1, w2, b2, w3, b3, head_w, head_b)
    }

    /// Assemble a model from explicit tensors, validating shapes.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        dims: ModelDims,
        activation: Activation,
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DMatrix<f64>,
        b2: DVector<f64>,
        w3: DMatrix<f64>,
        b3: DVector<f64>,
        head_w: DMatrix<f64>,
        head_b: DVector<f64>,
    ) -> Result<Self> {
        dims.validate()?;
        let shape_checks: [(&str, (usize, usize), (usize, usize)); 8] = [
            ("w1", w1.shape(), (dims.hidden_dim, dims.input_dim())),
            ("b1", (b1.len(), 1), (dims.hidden_dim, 1)),
            ("w2", w2.shape(), (dims.hidden_dim, dims.hidden_dim)),
            ("b2", (b2.len(), 1), (dims.hidden_dim, 1)),
            ("w3", w3.shape(), (dims.latent_dim, dims.hidden_dim)),
            ("b3", (b3.len(), 1), (dims.latent_dim, 1)),
            ("head_w", head_w.shape(), (dims.action_dim(), dims.latent_dim)),
            ("head_b", (head_b.len(), 1), (dims.action_dim(), 1)),
        ];
        for (name, got, expected) in shape_checks {
            if got != expected {
                return Err(Error::InvalidArgument(format!(
                    "{name} has shape {got:?}, expected {expected:?}"
                )));
            }
        }
        let mut model = Denoiser {
            dims,
            activation,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            head_w,
            head_b,
            pullback: DMatrix::zeros(dims.latent_dim, dims.latent_dim),
        };
        model.rebuild_pullback();
        Ok(model)
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Final linear head `W`.
    pub fn head(&self) -> &DMatrix<f64> {
        &self.head_w
    }

    pub fn head_bias(&self) -> &DVector<f64> {
        &self.head_b
    }

    /// Cached pullback metric `M_h = WᵀW`.
    pub fn pullback_metric(&self) -> &DMatrix<f64> {
        &self.pullback
    }

    /// Head-only evaluation `W·h + b`.
    pub fn head_apply(&self, latent: &DVector<f64>) -> DVector<f64> {
        &self.head_w * latent + &self.head_b
    }

    pub(crate) fn rebuild_pullback(&mut self) {
        self.pullback = self.head_w.tr_mul(&self.head_w);
    }

    fn check_inputs(&self, cond: &Condition, state: &ActionState) -> Result<()> {
        if cond.dim() != self.dims.cond_dim {
            return Err(Error::DimensionMismatch {
                what: "condition",
                expected: self.dims.cond_dim,
                got: cond.dim(),
            });
        }
        if state.values.len() != self.dims.action_dim() {
            return Err(Error::DimensionMismatch {
                what: "action state",
                expected: self.dims.action_dim(),
                got: state.values.len(),
            });
        }
        if state.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action state"));
        }
        Ok(())
    }

    pub(crate) fn forward_trace(&self, cond: &Condition, state: &ActionState) -> Result<ForwardTrace> {
        self.check_inputs(cond, state)?;
        let d = &self.dims;
        let mut x = DVector::zeros(d.input_dim());
        x.rows_mut(0, d.cond_dim).copy_from(cond.values());
        x.rows_mut(d.cond_dim, d.action_dim())
            .copy_from(&state.values);
        x.rows_mut(d.cond_dim + d.action_dim(), d.time_embed_dim)
            .copy_from(&time_embedding(state.step, d.time_embed_dim));

        let mut z1 = &self.w1 * &x + &self.b1;
        self.activation.apply(&mut z1);
        let mut z2 = &self.w2 * &z1 + &self.b2;
        self.activation.apply(&mut z2);
        let mut h = &self.w3 * &z2 + &self.b3;
        self.activation.apply(&mut h);
        let eps = &self.head_w * &h + &self.head_b;
        if eps.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("denoiser output"));
        }
        Ok(ForwardTrace { x, z1, z2, h, eps })
    }

    /// Predict the injected noise; returns `(ε, latent h)` with
    /// `ε = W·h + b` exactly.
    pub fn forward(&self, cond: &Condition, state: &ActionState) -> Result<(DVector<f64>, DVector<f64>)> {
        let trace = self.forward_trace(cond, state)?;
        Ok((trace.eps, trace.h))
    }

    fn block_range(&self, block: InputBlock) -> (usize, usize) {
        match block {
            InputBlock::Condition => (0, self.dims.cond_dim),
            InputBlock::Action => (self.dims.cond_dim, self.dims.action_dim()),
        }
    }

    pub(crate) fn jacobian_chain(&self, trace: &ForwardTrace, block: InputBlock) -> JacobianChain {
        let (off, len) = self.block_range(block);
        let s1 = self.activation.deriv_from_output(&trace.z1);
        let s2 = self.activation.deriv_from_output(&trace.z2);
        let s3 = self.activation.deriv_from_output(&trace.h);
        let gamma1 = self.w1.columns(off, len).into_owned();
        let g1 = row_scale(&s1, &gamma1);
        let gamma2 = &self.w2 * &g1;
        let g2 = row_scale(&s2, &gamma2);
        let gamma3 = &self.w3 * &g2;
        let g3 = row_scale(&s3, &gamma3);
        JacobianChain {
            gamma1,
            gamma2,
            gamma3,
            g3,
        }
    }

    /// Exact reverse-chain Jacobian `∂ε/∂C`.
    pub fn condition_jacobian(&self, cond: &Condition, state: &ActionState) -> Result<DMatrix<f64>> {
        let trace = self.forward_trace(cond, state)?;
        let chain = self.jacobian_chain(&trace, InputBlock::Condition);
        Ok(&self.head_w * &chain.g3)
    }

    /// Exact reverse-chain Jacobian `∂ε/∂a`.
    pub fn state_jacobian(&self, cond: &Condition, state: &ActionState) -> Result<DMatrix<f64>> {
        let trace = self.forward_trace(cond, state)?;
        let chain = self.jacobian_chain(&trace, InputBlock::Action);
        Ok(&self.head_w * &chain.g3)
    }

    /// Backward pass: `vᵀ·∂ε/∂(C, a)` for a seed vector `v`, returning the
    /// condition and action blocks of the input gradient.
    pub fn vjp(
        &self,
        cond: &Condition,
        state: &ActionState,
        seed: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        if seed.len() != self.dims.action_dim() {
            return Err(Error::DimensionMismatch {
                what: "vjp seed",
                expected: self.dims.action_dim(),
                got: seed.len(),
            });
        }
        let trace = self.forward_trace(cond, state)?;
        let s1 = self.activation.deriv_from_output(&trace.z1);
        let s2 = self.activation.deriv_from_output(&trace.z2);
        let s3 = self.activation.deriv_from_output(&trace.h);
        let t3 = s3.component_mul(&self.head_w.tr_mul(seed));
        let t2 = s2.component_mul(&self.w3.tr_mul(&t3));
        let t1 = s1.component_mul(&self.w2.tr_mul(&t2));
        let gx = self.w1.tr_mul(&t1);
        let cond_grad = gx.rows(0, self.dims.cond_dim).into_owned();
        let action_grad = gx.rows(self.dims.cond_dim, self.dims.action_dim()).into_owned();
        Ok((cond_grad, action_grad))
    }

    /// Step Fisher sensitivity `(1−ᾱ_t)/ᾱ_t · ‖∂ε/∂C‖_F²`.
    pub fn step_fds(
        &self,
        schedule: &NoiseSchedule,
        cond: &Condition,
        state: &ActionState,
    ) -> Result<f64> {
        let pf = fds_prefactor(schedule, state.step)?;
        let j = self.condition_jacobian(cond, state)?;
        Ok(pf * j.iter().map(|v| v * v).sum::<f64>())
    }

    /// Exact gradient of [`Self::step_fds`] with respect to the action state.
    ///
    /// Derived by differentiating the squared condition-gradient norm through
    /// the activation-derivative factors of the Jacobian chain (the only
    /// state-dependent quantities), then back-propagating the resulting
    /// pre-activation sensitivities to the action inputs.
    pub fn fisher_normal_exact(
        &self,
        schedule: &NoiseSchedule,
        cond: &Condition,
        state: &ActionState,
    ) -> Result<DVector<f64>> {
        let pf = fds_prefactor(schedule, state.step)?;
        let trace = self.forward_trace(cond, state)?;
        let chain = self.jacobian_chain(&trace, InputBlock::Condition);

        let s1 = self.activation.deriv_from_output(&trace.z1);
        let s2 = self.activation.deriv_from_output(&trace.z2);
        let s3 = self.activation.deriv_from_output(&trace.h);
        let r1 = self.activation.sprime_output_grad(&trace.z1).component_mul(&s1);
        let r2 = self.activation.sprime_output_grad(&trace.z2).component_mul(&s2);
        let r3 = self.activation.sprime_output_grad(&trace.h).component_mul(&s3);

        let j = &self.head_w * &chain.g3;
        let u3 = self.head_w.tr_mul(&j);
        let c3 = r3.component_mul(&row_dot(&u3, &chain.gamma3));
        let u2 = self.w3.tr_mul(&row_scale(&s3, &u3));
        let c2 = r2.component_mul(&row_dot(&u2, &chain.gamma2));
        let u1 = self.w2.tr_mul(&row_scale(&s2, &u2));
        let c1 = r1.component_mul(&row_dot(&u1, &chain.gamma1));

        let v2 = c2 + s2.component_mul(&self.w3.tr_mul(&c3));
        let v1 = c1 + s1.component_mul(&self.w2.tr_mul(&v2));
        let w1_a = self
            .w1
            .columns(self.dims.cond_dim, self.dims.action_dim());
        let mut grad = w1_a.tr_mul(&v1);
        grad *= 2.0 * pf;
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fisher normal"));
        }
        Ok(grad)
    }

    /// Gradient of [`Self::step_fds`] with respect to a perturbation injected
    /// additively at the latent `h`, with the pre-head Jacobian chain frozen
    /// at the evaluation point. This is the latent proxy the head-space
    /// projection consumes; the schedule prefactor is included (it cancels in
    /// the projection).
    pub fn fisher_normal_latent(
        &self,
        schedule: &NoiseSchedule,
        cond: &Condition,
        state: &ActionState,
    ) -> Result<DVector<f64>> {
        let pf = fds_prefactor(schedule, state.step)?;
        let trace = self.forward_trace(cond, state)?;
        let chain = self.jacobian_chain(&trace, InputBlock::Condition);
        Ok(self.latent_normal_from(&trace, &chain, pf))
    }

    fn latent_normal_from(
        &self,
        trace: &ForwardTrace,
        chain: &JacobianChain,
        prefactor: f64,
    ) -> DVector<f64> {
        // F(h) = pf·‖W·diag(σ'(h))·Γ3‖²_F with Γ3 frozen;
        // ∂F/∂h_j = 2·pf·(M·D·Γ3 Γ3ᵀ)_{jj}·dσ'/dh_j and M·D·Γ3 = Wᵀ(W·G3).
        let j = &self.head_w * &chain.g3;
        let u3 = self.head_w.tr_mul(&j);
        let rho3 = row_dot(&u3, &chain.gamma3);
        let phi = self.activation.sprime_output_grad(&trace.h);
        2.0 * prefactor * phi.component_mul(&rho3)
    }

    /// One evaluation serving the sampler: prediction, raw condition-gradient
    /// norm, step sensitivity, and the latent normal.
    pub fn fds_pass(
        &self,
        schedule: &NoiseSchedule,
        cond: &Condition,
        state: &ActionState,
    ) -> Result<FdsPass> {
        let pf = fds_prefactor(schedule, state.step)?;
        let trace = self.forward_trace(cond, state)?;
        let chain = self.jacobian_chain(&trace, InputBlock::Condition);
        let j = &self.head_w * &chain.g3;
        let raw: f64 = j.iter().map(|v| v * v).sum();
        let latent_normal = self.latent_normal_from(&trace, &chain, pf);
        Ok(FdsPass {
            eps: trace.eps,
            latent: trace.h,
            raw_grad_norm_sq: raw,
            step_fds: pf * raw,
            latent_normal,
        })
    }

    /// Named views of all parameter tensors, in checkpoint order.
    pub(crate) fn tensors(&self) -> Vec<(&'static str, Vec<f64>, usize, usize)> {
        let mat = |m: &DMatrix<f64>| (m.as_slice().to_vec(), m.nrows(), m.ncols());
        let vec = |v: &DVector<f64>| (v.as_slice().to_vec(), v.len(), 1);
        let mut out = Vec::new();
        for (name, (data, r, c)) in [
            ("w1", mat(&self.w1)),
            ("b1", vec(&self.b1)),
            ("w2", mat(&self.w2)),
            ("b2", vec(&self.b2)),
            ("w3", mat(&self.w3)),
            ("b3", vec(&self.b3)),
            ("head_w", mat(&self.head_w)),
            ("head_b", vec(&self.head_b)),
        ] {
            out.push((name, data, r, c));
        }
        out
    }
}
