//! Scratch calibration diagnostics (temporary).

use fpg_ops::fpg::{project_exact, project_ops, GuidanceGradient};
use fpg_ops::harness::{load_checkpoint, rollout_states, RunConfig};
use fpg_ops::maze::{encode_condition, generate_world, TsdfGuidance};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let loaded = load_checkpoint(std::path::Path::new(&args[1])).unwrap();
    let config = RunConfig {
        schedule: loaded.header.schedule.clone(),
        ..RunConfig::default()
    };

    // Head spectrum summary.
    let m = loaded.model.pullback_metric();
    let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)]).sum();
    println!(
        "head: {}x{}, tr(M)/D_h = {:.3} (mean squared singular value of W)",
        loaded.model.head().nrows(),
        loaded.model.head().ncols(),
        trace / m.nrows() as f64
    );

    for world_seed in [2u64, 5] {
        let world = generate_world(world_seed, &config.world).unwrap();
        let cond = encode_condition(&world);
        let cell = world.cell_size();
        let guidance = TsdfGuidance::new(&world, 1.5 * cell, 0.5 * cell, Some(1.0));
        let states = rollout_states(&loaded.model, &loaded.schedule, &world, &config, 42).unwrap();
        println!("== world {world_seed}");
        for s in &states {
            use fpg_ops::fpg::GuidanceObjective;
            let (loss, u) = guidance.evaluate(&s.values, s.step).unwrap();
            let pass = loaded.model.fds_pass(&loaded.schedule, &cond, s).unwrap();
            let ops = project_ops(&u, &loaded.model, &pass.latent_normal).unwrap();
            let g = loaded
                .model
                .fisher_normal_exact(&loaded.schedule, &cond, s)
                .unwrap();
            let ex = project_exact(&GuidanceGradient::new(u.values.clone(), "d").unwrap(), &g);
            let lifted = loaded.model.head() * &pass.latent_normal;
            let cosine = lifted.dot(&g) / (lifted.norm() * g.norm()).max(1e-300);
            println!(
                "  t={:2} loss {:8.3} |u| {:6.3} |d_ops| {:6.3} |d_ex| {:6.3} par_ex {:6.3} par_ops {:6.3} cos(Wg_h,g) {:+.3} fds {:9.3e}",
                s.step,
                loss,
                u.values.norm(),
                ops.delta.norm(),
                ex.delta.norm(),
                ex.parallel_norm,
                ops.parallel_norm,
                cosine,
                pass.step_fds,
            );
        }
    }
}
