//! End-to-end: train a small policy, then run the two-stage sampler on one
//! world under every guidance mode and compare rollout metrics.

use fpg_ops::denoiser::{Activation, ModelDims};
use fpg_ops::fpg::GuidanceMode;
use fpg_ops::harness::{run_algorithm1, Dataset, RunConfig};
use fpg_ops::maze::{evaluate_rollout, generate_world, WorldParams};
use fpg_ops::schedule::ScheduleConfig;
use fpg_ops::training::{train_on_dataset, TrainConfig};

fn main() {
    let params = WorldParams {
        grid_size: 32,
        horizon: 8,
        ..WorldParams::default()
    };
    println!("generating 600 worlds and training…");
    let dataset = Dataset::generate(5, 600, &params).unwrap();
    let train_config = TrainConfig {
        epochs: 40,
        batch_size: 64,
        learning_rate: 1e-3,
        schedule: ScheduleConfig::default(),
        dims: ModelDims {
            cond_dim: 260,
            horizon: 8,
            hidden_dim: 96,
            latent_dim: 96,
            time_embed_dim: 16,
        },
        activation: Activation::Tanh,
        ..TrainConfig::default()
    };
    let outcome = train_on_dataset(&train_config, &dataset).unwrap();
    println!(
        "val loss {:.4} → {:.4}\n",
        outcome.report.initial_val_loss, outcome.report.final_val_loss
    );

    let base = RunConfig {
        world: params,
        ..RunConfig::default()
    };
    let world = generate_world(1234, &params).unwrap();
    println!("world 1234: expert path {:.3}", world.expert.path_length());
    for mode in [
        GuidanceMode::None,
        GuidanceMode::Raw,
        GuidanceMode::FpgExact,
        GuidanceMode::FpgOps,
    ] {
        let config = RunConfig { mode, ..base.clone() };
        let out = run_algorithm1(&outcome.model, &outcome.schedule, &world, &config, 99).unwrap();
        let eval = evaluate_rollout(&world, &out.blended);
        println!(
            "{mode:>10}: collisions {:>2}, path {:.3}, success {}, weights {:?}",
            eval.collisions,
            eval.path_length,
            eval.success,
            out.candidates
                .weights
                .iter()
                .map(|w| format!("{w:.2e}"))
                .collect::<Vec<_>>()
        );
    }
}
