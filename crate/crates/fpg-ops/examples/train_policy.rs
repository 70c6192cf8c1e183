//! Train a small denoiser on generated worlds and save a checkpoint.

use fpg_ops::denoiser::{Activation, ModelDims};
use fpg_ops::harness::Dataset;
use fpg_ops::maze::WorldParams;
use fpg_ops::schedule::ScheduleConfig;
use fpg_ops::training::{train_on_dataset, TrainConfig};

fn main() {
    let params = WorldParams {
        grid_size: 32,
        horizon: 8,
        ..WorldParams::default()
    };
    println!("generating 400 worlds…");
    let dataset = Dataset::generate(1, 400, &params).unwrap();

    let config = TrainConfig {
        epochs: 30,
        batch_size: 32,
        learning_rate: 1e-3,
        seed: 0,
        schedule: ScheduleConfig::Cosine {
            total_steps: 10,
            offset: 0.008,
        },
        dims: ModelDims {
            cond_dim: 260,
            horizon: 8,
            hidden_dim: 64,
            latent_dim: 32,
            time_embed_dim: 16,
        },
        activation: Activation::Tanh,
        ..TrainConfig::default()
    };
    println!("training {} epochs…", config.epochs);
    let outcome = train_on_dataset(&config, &dataset).unwrap();
    println!(
        "validation loss {:.4} → {:.4}",
        outcome.report.initial_val_loss, outcome.report.final_val_loss
    );
    for row in outcome.report.metrics.iter().step_by(60) {
        println!("  step {:>4}: loss {:.4}, lr {:.2e}", row.step, row.loss, row.lr);
    }

    std::fs::create_dir_all("out").unwrap();
    fpg_ops::harness::save_checkpoint(
        std::path::Path::new("out/policy.bin"),
        &outcome.model,
        &config.schedule,
        config.seed,
        Some(&config),
    )
    .unwrap();
    println!("checkpoint written to out/policy.bin");
}
