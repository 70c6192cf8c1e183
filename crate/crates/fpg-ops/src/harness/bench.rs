//! Benchmark evaluation: per-method rollout metrics over held-out worlds
//! with bootstrap confidence intervals and paired method comparisons.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::denoiser::Denoiser;
use crate::fpg::GuidanceMode;
use crate::maze::{evaluate_rollout, generate_world, MazeWorld, RolloutEval};
use crate::rng::{derive_rng, derive_seed};
use crate::schedule::NoiseSchedule;
use crate::Result;

use super::algorithm::run_algorithm1;
use super::config::RunConfig;

const EVAL_WORLD_TAG: u64 = 0x6576_616c;
const ROLLOUT_TAG: u64 = 0x726f_6c6c;
const BOOTSTRAP_TAG: u64 = 0x626f_6f74;

pub const RESULTS_VERSION: u32 = 1;

/// Aggregated metrics for one guidance mode.
#[derive(Debug, Clone, Serialize)]
pub struct MethodStats {
    pub mode: String,
    pub worlds: usize,
    pub repeats: usize,
    pub mean_collisions: f64,
    /// 95% bootstrap interval for the mean collision count.
    pub collisions_ci95: (f64, f64),
    /// Mean path length over successful rollouts; `None` when none succeed.
    pub mean_path_length: Option<f64>,
    pub success_rate: f64,
    /// Per-world collision counts averaged over repeats (evaluation order).
    pub per_world_collisions: Vec<f64>,
}

/// Paired one-sided comparison: `better` beats `worse` when the 95th
/// percentile of the bootstrapped mean difference stays below zero.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub better: String,
    pub worse: String,
    pub mean_diff: f64,
    pub diff_p95: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub version: u32,
    pub methods: Vec<MethodStats>,
    pub comparisons: Vec<Comparison>,
    pub config: RunConfig,
    /// Set when the report was produced with zero evaluation worlds.
    pub empty: bool,
}

fn bootstrap_quantiles(
    values: &[f64],
    seed: u64,
    resamples: usize,
    quantiles: (f64, f64),
) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = derive_rng(seed, &[BOOTSTRAP_TAG]);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += values[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| means[((resamples - 1) as f64 * q).round() as usize];
    (pick(quantiles.0), pick(quantiles.1))
}

struct ModeOutcome {
    mode: GuidanceMode,
    evals: Vec<RolloutEval>,
    per_world_collisions: Vec<f64>,
}

/// Run every requested mode over held-out seeded worlds. Rollout seeds are
/// shared across modes per (world, repeat), so comparisons are paired.
pub fn run_benchmark(
    model: &Denoiser,
    schedule: &NoiseSchedule,
    config: &RunConfig,
    modes: &[GuidanceMode],
) -> Result<BenchmarkReport> {
    if config.eval_worlds > 0 {
        config.validate()?;
    }
    let worlds: Vec<MazeWorld> = (0..config.eval_worlds)
        .into_par_iter()
        .map(|i| {
            generate_world(
                derive_seed(config.seed, &[EVAL_WORLD_TAG, i as u64]),
                &config.world,
            )
        })
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::new();
    for &mode in modes {
        let mode_config = RunConfig {
            mode,
            ..config.clone()
        };
        let per_world: Vec<Result<Vec<RolloutEval>>> = worlds
            .par_iter()
            .enumerate()
            .map(|(i, world)| {
                (0..config.repeats)
                    .map(|r| {
                        let run_seed =
                            derive_seed(config.seed, &[ROLLOUT_TAG, i as u64, r as u64]);
                        let out = run_algorithm1(model, schedule, world, &mode_config, run_seed)?;
                        Ok(evaluate_rollout(world, &out.blended))
                    })
                    .collect()
            })
            .collect();
        let mut evals = Vec::new();
        let mut per_world_collisions = Vec::new();
        for world_evals in per_world {
            let world_evals = world_evals?;
            let mean: f64 = world_evals.iter().map(|e| e.collisions as f64).sum::<f64>()
                / world_evals.len().max(1) as f64;
            per_world_collisions.push(mean);
            evals.extend(world_evals);
        }
        outcomes.push(ModeOutcome {
            mode,
            evals,
            per_world_collisions,
        });
    }

    let methods: Vec<MethodStats> = outcomes
        .iter()
        .map(|o| {
            let n = o.evals.len();
            let mean_collisions = if n == 0 {
                f64::NAN
            } else {
                o.evals.iter().map(|e| e.collisions as f64).sum::<f64>() / n as f64
            };
            let successes: Vec<&RolloutEval> = o.evals.iter().filter(|e| e.success).collect();
            let mean_path_length = if successes.is_empty() {
                None
            } else {
                Some(successes.iter().map(|e| e.path_length).sum::<f64>() / successes.len() as f64)
            };
            let ci = bootstrap_quantiles(
                &o.per_world_collisions,
                derive_seed(config.seed, &[BOOTSTRAP_TAG, o.mode as u64]),
                2000,
                (0.025, 0.975),
            );
            MethodStats {
                mode: o.mode.to_string(),
                worlds: config.eval_worlds,
                repeats: config.repeats,
                mean_collisions,
                collisions_ci95: ci,
                mean_path_length,
                success_rate: if n == 0 {
                    f64::NAN
                } else {
                    successes.len() as f64 / n as f64
                },
                per_world_collisions: o.per_world_collisions.clone(),
            }
        })
        .collect();

    // Paired comparisons between consecutive modes in the requested order
    // plus the none→last contrast when present.
    let mut comparisons = Vec::new();
    for pair in outcomes.windows(2) {
        comparisons.push(compare(&pair[1], &pair[0], config.seed));
    }

    Ok(BenchmarkReport {
        version: RESULTS_VERSION,
        methods,
        comparisons,
        config: config.clone(),
        empty: config.eval_worlds == 0,
    })
}

fn compare(better: &ModeOutcome, worse: &ModeOutcome, seed: u64) -> Comparison {
    let diffs: Vec<f64> = better
        .per_world_collisions
        .iter()
        .zip(worse.per_world_collisions.iter())
        .map(|(b, w)| b - w)
        .collect();
    let mean_diff = if diffs.is_empty() {
        f64::NAN
    } else {
        diffs.iter().sum::<f64>() / diffs.len() as f64
    };
    let (_, p95) = bootstrap_quantiles(
        &diffs,
        derive_seed(seed, &[BOOTSTRAP_TAG, better.mode as u64, worse.mode as u64]),
        2000,
        (0.05, 0.95),
    );
    Comparison {
        better: better.mode.to_string(),
        worse: worse.mode.to_string(),
        mean_diff,
        diff_p95: p95,
        significant: p95 < 0.0,
    }
}

/// Plain-text summary table.
pub fn format_table(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    out.push_str("mode         collisions   ci95              success   path\n");
    for m in &report.methods {
        let path = m
            .mean_path_length
            .map(|p| format!("{p:.3}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<12} {:<12.4} [{:.4}, {:.4}]  {:<9.3} {}\n",
            m.mode, m.mean_collisions, m.collisions_ci95.0, m.collisions_ci95.1, m.success_rate, path
        ));
    }
    for c in &report.comparisons {
        out.push_str(&format!(
            "{} vs {}: mean diff {:+.4}, p95 {:+.4} ({})\n",
            c.better,
            c.worse,
            c.mean_diff,
            c.diff_p95,
            if c.significant {
                "significant at 95%"
            } else {
                "not significant"
            }
        ));
    }
    out
}
