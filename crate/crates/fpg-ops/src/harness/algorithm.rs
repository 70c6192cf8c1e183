//! Two-stage inference: parallel guided sampling of K candidates with
//! streaming tail-sensitivity accumulation, then cluster-and-confidence
//! blending of the finished trajectories.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::blending::{blend, BlendDiagnostics, CandidateSet};
use crate::denoiser::{ActionState, Denoiser};
use crate::fds::TfdsAccumulator;
use crate::fpg::{guided_reverse_step, GuidanceMode};
use crate::maze::{encode_condition, inpaint_endpoints, MazeWorld, Trajectory, TsdfGuidance};
use crate::rng::derive_rng;
use crate::schedule::NoiseSchedule;
use crate::{Error, Result};

use super::config::RunConfig;
use super::trace::{CandidateTrace, RunTrace, StepTrace};

const CANDIDATE_TAG: u64 = 0x6361_6e64;

/// Output of one full inference pass on a world.
pub struct Algorithm1Output {
    pub blended: Trajectory,
    pub candidates: CandidateSet,
    pub trace: RunTrace,
}

struct CandidateRun {
    action: Option<DVector<f64>>,
    tfds: f64,
    trace: CandidateTrace,
}

fn sample_candidate(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    world: &MazeWorld,
    guidance: &TsdfGuidance<'_>,
    config: &RunConfig,
    run_seed: u64,
    index: usize,
) -> CandidateRun {
    let total = schedule.total_steps();
    let d_a = model.dims().action_dim();
    let cond = encode_condition(world);
    let mut rng = derive_rng(run_seed, &[CANDIDATE_TAG, index as u64]);
    let init = DVector::from_fn(d_a, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut state = inpaint_endpoints(&ActionState::new(init, total), world);
    let mut accumulator = TfdsAccumulator::new(config.tail_len);
    let mut steps = Vec::with_capacity(total);
    let objective = match config.mode {
        GuidanceMode::None => None,
        _ => Some(guidance as &dyn crate::fpg::GuidanceObjective),
    };

    let mut failure: Option<Error> = None;
    while state.step >= 1 {
        let t = state.step;
        let mut step_trace = StepTrace::new(t);

        // Streaming tail score at the evaluated state, before the update.
        if t <= config.tail_len {
            match model.fds_pass(schedule, &cond, &state) {
                Ok(pass) => {
                    accumulator.observe(t, pass.raw_grad_norm_sq);
                    step_trace.fds_increment = Some(pass.raw_grad_norm_sq);
                    step_trace.step_fds = Some(pass.step_fds);
                }
                Err(e) => {
                    failure = Some(e);
                    steps.push(step_trace);
                    break;
                }
            }
        }

        let gamma = config.gamma_at(t, total);
        match guided_reverse_step(
            model,
            schedule,
            &cond,
            &state,
            objective,
            gamma,
            config.mode,
            config.solver,
            config.recon_clip,
            config.delta_norm_match,
            &mut rng,
        ) {
            Ok(step) => {
                step_trace.loss = step.loss;
                if let Some(p) = &step.projection {
                    step_trace.record_projection(p);
                }
                steps.push(step_trace);
                state = inpaint_endpoints(&step.state, world);
            }
            Err(e) => {
                failure = Some(e);
                steps.push(step_trace);
                break;
            }
        }
    }

    match failure {
        None => CandidateRun {
            action: Some(state.values.clone()),
            tfds: accumulator.value(),
            trace: CandidateTrace {
                index,
                steps,
                tfds: accumulator.value(),
                aborted: false,
                abort_reason: None,
            },
        },
        Some(e) => CandidateRun {
            action: None,
            tfds: accumulator.value(),
            trace: CandidateTrace {
                index,
                steps,
                tfds: accumulator.value(),
                aborted: true,
                abort_reason: Some(e.to_string()),
            },
        },
    }
}

/// Visited states of a single sampled candidate (pre-update, inpainted), in
/// visit order `t = T..1`. Feed them to the chain/truncation diagnostics.
pub fn rollout_states(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    world: &MazeWorld,
    config: &RunConfig,
    run_seed: u64,
) -> Result<Vec<ActionState>> {
    config.validate()?;
    let total = schedule.total_steps();
    let d_a = model.dims().action_dim();
    let cond = encode_condition(world);
    let cell = world.cell_size();
    let guidance = TsdfGuidance::new(
        world,
        config.guidance.mu_cells * cell,
        config.guidance.tau_cells * cell,
        config.guidance.grad_clip,
    );
    let objective = match config.mode {
        GuidanceMode::None => None,
        _ => Some(&guidance as &dyn crate::fpg::GuidanceObjective),
    };
    let mut rng = derive_rng(run_seed, &[CANDIDATE_TAG, 0]);
    let init = DVector::from_fn(d_a, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut state = inpaint_endpoints(&ActionState::new(init, total), world);
    let mut states = Vec::with_capacity(total);
    while state.step >= 1 {
        states.push(state.clone());
        let step = guided_reverse_step(
            model,
            schedule,
            &cond,
            &state,
            objective,
            config.gamma_at(state.step, total),
            config.mode,
            config.solver,
            config.recon_clip,
            config.delta_norm_match,
            &mut rng,
        )?;
        state = inpaint_endpoints(&step.state, world);
    }
    Ok(states)
}

/// Stage 1 (guided sampling with endpoint inpainting and streaming tail
/// scores) followed by Stage 2 (clustering, confidence weighting, blending).
/// Deterministic given `run_seed`; candidates that hit non-finite values are
/// dropped from the blend and recorded as aborted in the trace.
pub fn run_algorithm1(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    world: &MazeWorld,
    config: &RunConfig,
    run_seed: u64,
) -> Result<Algorithm1Output> {
    config.validate()?;
    if schedule.total_steps() != config.schedule.total_steps() {
        return Err(Error::InvalidArgument(
            "schedule does not match configuration".into(),
        ));
    }
    let cell = world.cell_size();
    let guidance = TsdfGuidance::new(
        world,
        config.guidance.mu_cells * cell,
        config.guidance.tau_cells * cell,
        config.guidance.grad_clip,
    );

    let runs: Vec<CandidateRun> = (0..config.candidates)
        .map(|k| sample_candidate(model, schedule, world, &guidance, config, run_seed, k))
        .collect();

    let mut actions = Vec::new();
    let mut scores = Vec::new();
    let mut traces = Vec::new();
    for run in runs {
        if let Some(action) = run.action {
            actions.push(action);
            scores.push(run.tfds);
        }
        traces.push(run.trace);
    }
    if actions.is_empty() {
        return Err(Error::NonFinite("all candidates aborted"));
    }

    let set = CandidateSet::assemble(
        actions,
        scores,
        config.cluster_eps,
        config.cluster_min_pts,
        config.blend_temperature,
    )?;

    let outcome = if config.blend_within_top_cluster {
        // Restrict to the cluster of the most confident candidate.
        let best = set
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let label = set.cluster_labels[best];
        let keep: Vec<usize> = (0..set.len())
            .filter(|&i| set.cluster_labels[i] == label)
            .collect();
        let subset = CandidateSet {
            actions: keep.iter().map(|&i| set.actions[i].clone()).collect(),
            tfds_scores: keep.iter().map(|&i| set.tfds_scores[i]).collect(),
            cluster_labels: keep.iter().map(|&i| set.cluster_labels[i]).collect(),
            weights: keep.iter().map(|&i| set.weights[i]).collect(),
        };
        blend(&subset)?
    } else {
        blend(&set)?
    };

    let trace = RunTrace {
        run_seed,
        mode: config.mode.to_string(),
        gamma: config.gamma,
        candidates: traces,
        blend: Some(BlendDiagnostics {
            tfds_scores: set.tfds_scores.clone(),
            cluster_labels: set.cluster_labels.clone(),
            weights: set.weights.clone(),
            uniform_fallback: outcome.uniform_fallback,
        }),
    };

    Ok(Algorithm1Output {
        blended: Trajectory::from_flat(&outcome.action)?,
        candidates: set,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::{Activation, ModelDims};
    use crate::maze::{generate_world, WorldParams};

    fn quick_world_params() -> WorldParams {
        WorldParams {
            grid_size: 32,
            horizon: 8,
            obstacle_density: 0.12,
            inflation_radius: 1.5,
            truncation_radius: 6.0,
            min_separation: 0.6,
            max_attempts: 16,
        }
    }

    fn quick_config() -> RunConfig {
        RunConfig {
            world: quick_world_params(),
            schedule: crate::schedule::ScheduleConfig::Cosine {
                total_steps: 5,
                offset: 0.008,
            },
            tail_len: 2,
            candidates: 3,
            ..RunConfig::default()
        }
    }

    fn quick_model() -> Denoiser {
        Denoiser::init(
            ModelDims {
                cond_dim: 260,
                horizon: 8,
                hidden_dim: 24,
                latent_dim: 12,
                time_embed_dim: 8,
            },
            Activation::Tanh,
            5,
        )
        .unwrap()
    }

    #[test]
    fn single_candidate_blends_to_itself() {
        let config = RunConfig {
            candidates: 1,
            ..quick_config()
        };
        let schedule = config.schedule.build().unwrap();
        let model = quick_model();
        let world = generate_world(31, &config.world).unwrap();
        let out = run_algorithm1(&model, &schedule, &world, &config, 7).unwrap();
        assert_eq!(out.candidates.len(), 1);
        let diff = (out.blended.flatten() - &out.candidates.actions[0]).abs().max();
        assert!(diff <= 1e-12);
    }

    #[test]
    fn zero_gamma_guided_matches_unguided() {
        let schedule = quick_config().schedule.build().unwrap();
        let model = quick_model();
        let world = generate_world(32, &quick_config().world).unwrap();

        let plain = RunConfig {
            mode: GuidanceMode::None,
            gamma: 0.0,
            ..quick_config()
        };
        let guided = RunConfig {
            mode: GuidanceMode::FpgOps,
            gamma: 0.0,
            ..quick_config()
        };
        let a = run_algorithm1(&model, &schedule, &world, &plain, 11).unwrap();
        let b = run_algorithm1(&model, &schedule, &world, &guided, 11).unwrap();
        for (x, y) in a.candidates.actions.iter().zip(b.candidates.actions.iter()) {
            assert_eq!(x, y);
        }
        assert_eq!(a.blended, b.blended);
    }

    #[test]
    fn trace_replay_reproduces_scores_and_weights() {
        let config = quick_config();
        let schedule = config.schedule.build().unwrap();
        let model = quick_model();
        let world = generate_world(33, &config.world).unwrap();
        let first = run_algorithm1(&model, &schedule, &world, &config, 13).unwrap();
        let second = run_algorithm1(&model, &schedule, &world, &config, 13).unwrap();
        for (a, b) in first
            .candidates
            .tfds_scores
            .iter()
            .zip(second.candidates.tfds_scores.iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in first
            .candidates
            .weights
            .iter()
            .zip(second.candidates.weights.iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // The recorded per-step increments sum to the recorded total.
        for cand in &first.trace.candidates {
            let total: f64 = cand
                .steps
                .iter()
                .filter_map(|s| s.fds_increment)
                .sum();
            assert!((total - cand.tfds).abs() <= 1e-12 * total.max(1e-30));
        }
    }

    #[test]
    fn endpoints_are_inpainted_on_every_candidate() {
        let config = quick_config();
        let schedule = config.schedule.build().unwrap();
        let model = quick_model();
        let world = generate_world(34, &config.world).unwrap();
        let out = run_algorithm1(&model, &schedule, &world, &config, 17).unwrap();
        for action in &out.candidates.actions {
            let n = action.len();
            assert_eq!(action[0], world.start[0]);
            assert_eq!(action[1], world.start[1]);
            assert_eq!(action[n - 2], world.goal[0]);
            assert_eq!(action[n - 1], world.goal[1]);
        }
        // The blend of inpainted candidates keeps the endpoints.
        let flat = out.blended.flatten();
        assert!((flat[0] - world.start[0]).abs() <= 1e-12);
        assert!((flat[flat.len() - 1] - world.goal[1]).abs() <= 1e-12);
    }

    #[test]
    fn trace_is_complete_for_guided_runs() {
        let config = RunConfig {
            mode: GuidanceMode::FpgExact,
            ..quick_config()
        };
        let schedule = config.schedule.build().unwrap();
        let model = quick_model();
        let world = generate_world(35, &config.world).unwrap();
        let out = run_algorithm1(&model, &schedule, &world, &config, 19).unwrap();
        for cand in &out.trace.candidates {
            assert_eq!(cand.steps.len(), schedule.total_steps());
            for step in &cand.steps {
                assert!(step.parallel_norm.is_some(), "guided step lacks projection");
                if step.t <= config.tail_len {
                    assert!(step.fds_increment.is_some());
                }
            }
        }
    }
}
