//! Scratch: per-step guidance-loss trajectories and final displacement.

use fpg_ops::fpg::{GuidanceMode, GuidanceObjective};
use fpg_ops::harness::{load_checkpoint, run_algorithm1, RunConfig};
use fpg_ops::maze::{generate_world, TsdfGuidance};
use fpg_ops::rng::derive_seed;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let loaded = load_checkpoint(std::path::Path::new(&args[1])).unwrap();
    let gamma: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let base = RunConfig {
        schedule: loaded.header.schedule.clone(),
        gamma,
        ..RunConfig::default()
    };
    let total = base.schedule.total_steps();

    // Mean guidance loss per step across worlds and candidates, plus the
    // barrier value of the final blended trajectory.
    for mode in [GuidanceMode::None, GuidanceMode::Raw] {
        let mut per_step = vec![0.0f64; total + 1];
        let mut count = vec![0usize; total + 1];
        let mut final_loss = 0.0;
        let worlds = 30;
        for i in 0..worlds {
            let world = generate_world(derive_seed(7, &[1, i]), &base.world).unwrap();
            let config = RunConfig { mode, ..base.clone() };
            let out = run_algorithm1(
                &loaded.model,
                &loaded.schedule,
                &world,
                &config,
                derive_seed(7, &[2, i]),
            )
            .unwrap();
            let cell = world.cell_size();
            let guidance = TsdfGuidance::new(&world, 1.5 * cell, 0.5 * cell, Some(1.0));
            for cand in &out.trace.candidates {
                for step in &cand.steps {
                    if let Some(l) = step.loss {
                        per_step[step.t] += l;
                        count[step.t] += 1;
                    }
                }
            }
            let (l, _) = guidance.evaluate(&out.blended.flatten(), 1).unwrap();
            final_loss += l;
        }
        print!("{mode:>6}: final blend barrier {:.4} |", final_loss / worlds as f64);
        for t in (1..=total).rev() {
            if count[t] > 0 {
                print!(" t{t}:{:.3}", per_step[t] / count[t] as f64);
            }
        }
        println!();
    }
}
