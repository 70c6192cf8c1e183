//! Estimate the chain-Jacobian Frobenius norm with vector-Jacobian probes
//! and show the 1/K variance decay.

use fpg_ops::denoiser::{Activation, Denoiser, ModelDims};
use fpg_ops::fds::{chain_jacobian, hutchinson_cfds, hutchinson_frobenius_sq, Propagation};
use fpg_ops::fpg::Solver;
use fpg_ops::harness::{rollout_states, RunConfig};
use fpg_ops::maze::{encode_condition, generate_world, WorldParams};
use fpg_ops::rng::derive_rng;
use nalgebra::DMatrix;

fn main() {
    // Explicit matrix first: the estimator converges to the exact norm.
    let j = DMatrix::from_row_slice(3, 4, &[0.5, -1.0, 2.0, 0.3, 0.1, 0.0, -0.7, 1.1, 0.9, -0.4, 0.2, -0.6]);
    let exact: f64 = j.iter().map(|v| v * v).sum();
    println!("explicit 3x4 matrix, ‖J‖_F² = {exact:.6}");
    for probes in [10, 100, 1000, 10000] {
        let mut rng = derive_rng(3, &[probes as u64]);
        let est = hutchinson_frobenius_sq(|v| j.tr_mul(v), 3, probes, &mut rng);
        println!("  probes {probes:>6}: estimate {est:.6} ({:+.2}%)", (est / exact - 1.0) * 100.0);
    }

    // Chain norm through the reverse trajectory of a small model, never
    // materializing the chain matrix.
    let world_params = WorldParams {
        grid_size: 32,
        horizon: 6,
        ..WorldParams::default()
    };
    let config = RunConfig {
        world: world_params,
        schedule: fpg_ops::schedule::ScheduleConfig::Cosine {
            total_steps: 6,
            offset: 0.008,
        },
        tail_len: 3,
        ..RunConfig::default()
    };
    let schedule = config.schedule.build().unwrap();
    let model = Denoiser::init(
        ModelDims {
            cond_dim: 260,
            horizon: 6,
            hidden_dim: 24,
            latent_dim: 12,
            time_embed_dim: 8,
        },
        Activation::Tanh,
        17,
    )
    .unwrap();
    let world = generate_world(23, &config.world).unwrap();
    let states = rollout_states(&model, &schedule, &world, &config, 31).unwrap();
    let cond = encode_condition(&world);

    let chain = chain_jacobian(
        &model,
        &schedule,
        &cond,
        &states,
        Solver::Ddpm,
        Propagation::Normalized,
    )
    .unwrap();
    let chain_exact: f64 = chain.iter().map(|v| v * v).sum();
    println!("\nchain Jacobian over T = 6 steps: exact ‖J(C)‖_F² = {chain_exact:.6}");
    for probes in [8, 64, 512] {
        let mut rng = derive_rng(41, &[probes as u64]);
        let est = hutchinson_cfds(
            &model,
            &schedule,
            &cond,
            &states,
            probes,
            Solver::Ddpm,
            Propagation::Normalized,
            &mut rng,
        )
        .unwrap();
        println!("  probes {probes:>4}: estimate {est:.6} ({:+.2}%)", (est / chain_exact - 1.0) * 100.0);
    }
}
