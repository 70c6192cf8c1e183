//! Command-line surface: dataset generation, training, sampling, benchmark
//! evaluation, truncation-bound reports, and rendering.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::denoiser::ModelDims;
use crate::fds::tfds;
use crate::fpg::GuidanceMode;
use crate::maze::{
    evaluate_rollout, generate_world, render, Trajectory,
};
use crate::rng::derive_seed;
use crate::training::{train, TrainConfig};
use crate::{Error, Result};

use super::algorithm::{rollout_states, run_algorithm1};
use super::bench::{format_table, run_benchmark};
use super::checkpoint::load_checkpoint;
use super::config::RunConfig;
use super::dataset::Dataset;

#[derive(Parser)]
#[command(
    name = "fpg",
    version,
    about = "Fisher-preserving guided diffusion sampling on a Maze2D benchmark"
)]
struct Cli {
    /// JSON run-configuration file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of benchmark worlds.
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        count: usize,
        /// Output path (default: <out_dir>/dataset.bin).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a JSON-lines debug export.
        #[arg(long)]
        jsonl: Option<PathBuf>,
        #[arg(long)]
        grid_size: Option<usize>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Train a denoiser on a generated dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint path (default: <out_dir>/checkpoint.bin).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV path (step, loss, lr).
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        latent: Option<usize>,
    },
    /// Run the two-stage sampler on one world.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        world_seed: u64,
        #[arg(long)]
        mode: Option<GuidanceMode>,
        #[arg(long)]
        gamma: Option<f64>,
        /// Write the run trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Render candidates and the blended trajectory as SVG.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Print machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate guidance modes over held-out worlds.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated mode list (default: none,raw,fpg_exact,fpg_ops).
        #[arg(long, alias = "mode", value_delimiter = ',')]
        modes: Vec<GuidanceMode>,
        #[arg(long)]
        worlds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Results JSON path (default: <out_dir>/results.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the full report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Truncation report (per-step scores, η, κ, and the bound) for an
    /// unguided rollout.
    BoundCheck {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        world_seed: u64,
        #[arg(long)]
        tail: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Render a world (optionally with sampled rollouts) to SVG and the
    /// clearance field to PPM.
    Render {
        #[arg(long, default_value_t = 0)]
        world_seed: u64,
        /// SVG output path (default: <out_dir>/world.svg).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the clearance heatmap here.
        #[arg(long)]
        tsdf: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        mode: Option<GuidanceMode>,
    },
    /// Dump the fully resolved configuration as JSON.
    PrintConfig,
}

fn load_run_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Parse `argv` (without the program name) and run; returns the process exit
/// code. Errors print to stderr; usage problems exit with 2.
pub fn cli_entry<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("fpg"))
        .chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = load_run_config(&cli.config)?;
    match cli.command {
        Command::GenData {
            seed,
            count,
            out,
            jsonl,
            grid_size,
            density,
            horizon,
        } => {
            let mut params = config.world;
            if let Some(g) = grid_size {
                params.grid_size = g;
            }
            if let Some(d) = density {
                params.obstacle_density = d;
            }
            if let Some(h) = horizon {
                params.horizon = h;
            }
            let dataset = Dataset::generate(seed, count, &params)?;
            let out = out.unwrap_or_else(|| config.resolve_out_dir().join("dataset.bin"));
            dataset.save(&out)?;
            if let Some(jsonl_path) = jsonl {
                let file = std::fs::File::create(jsonl_path)?;
                dataset.write_jsonl(std::io::BufWriter::new(file))?;
            }
            println!(
                "wrote {} worlds (grid {}, horizon {}) to {}",
                dataset.records.len(),
                dataset.grid_size,
                dataset.horizon,
                out.display()
            );
            Ok(())
        }
        Command::Train {
            data,
            out,
            epochs,
            batch,
            lr,
            seed,
            metrics,
            hidden,
            latent,
        } => {
            let dataset = Dataset::load(&data)?;
            let mut dims = ModelDims {
                horizon: dataset.horizon,
                ..ModelDims::default()
            };
            if let Some(h) = hidden {
                dims.hidden_dim = h;
            }
            if let Some(l) = latent {
                dims.latent_dim = l;
            }
            let train_config = TrainConfig {
                epochs: epochs.unwrap_or(TrainConfig::default().epochs),
                batch_size: batch.unwrap_or(TrainConfig::default().batch_size),
                learning_rate: lr.unwrap_or(TrainConfig::default().learning_rate),
                seed: seed.unwrap_or(0),
                schedule: config.schedule.clone(),
                dims,
                dataset: data,
                checkpoint: out.unwrap_or_else(|| config.resolve_out_dir().join("checkpoint.bin")),
                metrics_csv: metrics,
                ..TrainConfig::default()
            };
            let outcome = train(&train_config)?;
            println!(
                "trained {} epochs; val loss {:.6} → {:.6}; checkpoint at {}",
                train_config.epochs,
                outcome.report.initial_val_loss,
                outcome.report.final_val_loss,
                train_config.checkpoint.display()
            );
            Ok(())
        }
        Command::Sample {
            checkpoint,
            world_seed,
            mode,
            gamma,
            trace,
            render: render_path,
            json,
        } => {
            let loaded = load_checkpoint(&checkpoint)?;
            let mut run_config = RunConfig {
                schedule: loaded.header.schedule.clone(),
                world: world_params_for_model(&config, &loaded.model)?,
                ..config.clone()
            };
            if let Some(m) = mode {
                run_config.mode = m;
            }
            if let Some(g) = gamma {
                run_config.gamma = g;
            }
            let world = generate_world(world_seed, &run_config.world)?;
            let run_seed = derive_seed(run_config.seed, &[0x73616d70, world_seed]);
            let out = run_algorithm1(&loaded.model, &loaded.schedule, &world, &run_config, run_seed)?;
            let eval = evaluate_rollout(&world, &out.blended);
            if let Some(trace_path) = trace {
                let file = std::fs::File::create(&trace_path)?;
                out.trace.write_json(std::io::BufWriter::new(file))?;
            }
            if let Some(svg_path) = render_path {
                let mut overlays = vec![render::Overlay {
                    trajectory: &world.expert,
                    color: "#1f6fd6",
                    width: 0.35,
                }];
                let candidate_trajs: Vec<Trajectory> = out
                    .candidates
                    .actions
                    .iter()
                    .map(|a| Trajectory::from_flat(a).expect("even length"))
                    .collect();
                for t in &candidate_trajs {
                    overlays.push(render::Overlay {
                        trajectory: t,
                        color: "#9aa0a6",
                        width: 0.25,
                    });
                }
                overlays.push(render::Overlay {
                    trajectory: &out.blended,
                    color: "#d62828",
                    width: 0.45,
                });
                render::write_world_svg(&world, &overlays, &svg_path)?;
            }
            if json {
                let doc = json!({
                    "mode": run_config.mode.to_string(),
                    "gamma": run_config.gamma,
                    "world_seed": world_seed,
                    "collisions": eval.collisions,
                    "path_length": eval.path_length,
                    "success": eval.success,
                    "tfds_scores": out.candidates.tfds_scores,
                    "weights": out.candidates.weights,
                    "cluster_labels": out.candidates.cluster_labels,
                });
                println!("{doc}");
            } else {
                println!(
                    "mode {} world {}: collisions {}, path {:.3}, success {}",
                    run_config.mode, world_seed, eval.collisions, eval.path_length, eval.success
                );
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            modes,
            worlds,
            repeats,
            gamma,
            seed,
            out,
            json,
        } => {
            let loaded = load_checkpoint(&checkpoint)?;
            let mut run_config = RunConfig {
                schedule: loaded.header.schedule.clone(),
                world: world_params_for_model(&config, &loaded.model)?,
                ..config.clone()
            };
            if let Some(w) = worlds {
                run_config.eval_worlds = w;
            }
            if let Some(r) = repeats {
                run_config.repeats = r;
            }
            if let Some(g) = gamma {
                run_config.gamma = g;
            }
            if let Some(s) = seed {
                run_config.seed = s;
            }
            let modes = if modes.is_empty() {
                vec![
                    GuidanceMode::None,
                    GuidanceMode::Raw,
                    GuidanceMode::FpgExact,
                    GuidanceMode::FpgOps,
                ]
            } else {
                modes
            };
            let report = run_benchmark(&loaded.model, &loaded.schedule, &run_config, &modes)?;
            if report.empty {
                eprintln!("warning: evaluated zero worlds; table is empty");
            }
            let out = out.unwrap_or_else(|| run_config.resolve_out_dir().join("results.json"));
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                print!("{}", format_table(&report));
                println!("report written to {}", out.display());
            }
            Ok(())
        }
        Command::BoundCheck {
            checkpoint,
            world_seed,
            tail,
            json,
        } => {
            let loaded = load_checkpoint(&checkpoint)?;
            let run_config = RunConfig {
                schedule: loaded.header.schedule.clone(),
                world: world_params_for_model(&config, &loaded.model)?,
                ..config.clone()
            };
            let world = generate_world(world_seed, &run_config.world)?;
            let states = rollout_states(
                &loaded.model,
                &loaded.schedule,
                &world,
                &run_config,
                derive_seed(run_config.seed, &[0x626f756e, world_seed]),
            )?;
            let cond = crate::maze::encode_condition(&world);
            let report = tfds(
                &loaded.model,
                &loaded.schedule,
                &cond,
                &states,
                tail.unwrap_or(run_config.tail_len),
            )?;
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(())
        }
        Command::Render {
            world_seed,
            out,
            tsdf: tsdf_path,
            checkpoint,
            mode,
        } => {
            let world_cfg = match &checkpoint {
                Some(path) => {
                    let loaded = load_checkpoint(path)?;
                    world_params_for_model(&config, &loaded.model)?
                }
                None => config.world,
            };
            let world = generate_world(world_seed, &world_cfg)?;
            let out = out.unwrap_or_else(|| config.resolve_out_dir().join("world.svg"));
            let blended;
            let mut overlays = vec![render::Overlay {
                trajectory: &world.expert,
                color: "#1f6fd6",
                width: 0.35,
            }];
            if let Some(ckpt) = checkpoint {
                let loaded = load_checkpoint(&ckpt)?;
                let mut run_config = RunConfig {
                    schedule: loaded.header.schedule.clone(),
                    world: world_cfg,
                    ..config.clone()
                };
                if let Some(m) = mode {
                    run_config.mode = m;
                }
                let algo = run_algorithm1(
                    &loaded.model,
                    &loaded.schedule,
                    &world,
                    &run_config,
                    derive_seed(run_config.seed, &[0x72656e64, world_seed]),
                )?;
                blended = algo.blended;
                overlays.push(render::Overlay {
                    trajectory: &blended,
                    color: "#d62828",
                    width: 0.45,
                });
            }
            render::write_world_svg(&world, &overlays, &out)?;
            if let Some(ppm) = tsdf_path {
                render::write_tsdf_ppm(&world, &ppm)?;
            }
            println!("rendered {}", out.display());
            Ok(())
        }
        Command::PrintConfig => {
            println!("{}", config.to_json_pretty());
            Ok(())
        }
    }
}

/// The model's conditioning pins the pooled-grid layout and horizon; make
/// sure the configured world matches what the checkpoint was trained on.
fn world_params_for_model(
    config: &RunConfig,
    model: &crate::denoiser::Denoiser,
) -> Result<crate::maze::WorldParams> {
    let mut params = config.world;
    params.horizon = model.dims().horizon;
    if model.dims().cond_dim != crate::maze::CONDITION_DIM {
        return Err(Error::InvalidArgument(format!(
            "model condition dim {} does not match the grid encoding ({})",
            model.dims().cond_dim,
            crate::maze::CONDITION_DIM
        )));
    }
    Ok(params)
}
