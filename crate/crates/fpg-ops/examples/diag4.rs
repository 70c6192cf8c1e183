//! Scratch: where do collisions happen, and how deep?

use fpg_ops::fpg::GuidanceMode;
use fpg_ops::harness::{load_checkpoint, run_algorithm1, RunConfig};
use fpg_ops::maze::{generate_world, Trajectory};
use fpg_ops::rng::derive_seed;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let loaded = load_checkpoint(std::path::Path::new(&args[1])).unwrap();
    let base = RunConfig {
        schedule: loaded.header.schedule.clone(),
        ..RunConfig::default()
    };

    for mode in [GuidanceMode::None, GuidanceMode::Raw] {
        let mut boundary = 0usize;
        let mut interior = 0usize;
        let mut depths = Vec::new();
        let mut lengths = Vec::new(); // collision run length in samples
        let worlds = 40;
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
            let traj: &Trajectory = &out.blended;
            let cell = world.cell_size();
            let step_len = 0.5 * cell;
            // Replicate the dense sampling, tracking run structure.
            let mut run_min = 0.0f64;
            let mut run_len = 0usize;
            let mut inside = false;
            let mut flush = |run_min: &mut f64, run_len: &mut usize, pos: [f64; 2]| {
                let edge = (1.0 - pos[0].abs()).min(1.0 - pos[1].abs());
                if edge < 3.0 * cell {
                    boundary += 1;
                } else {
                    interior += 1;
                }
                depths.push(-*run_min / cell);
                lengths.push(*run_len);
                *run_min = 0.0;
                *run_len = 0;
            };
            for (si, pair) in traj.points.windows(2).enumerate() {
                let d = ((pair[1][0] - pair[0][0]).powi(2) + (pair[1][1] - pair[0][1]).powi(2)).sqrt();
                let n = (d / step_len).ceil().max(1.0) as usize;
                let k0 = if si == 0 { 0 } else { 1 };
                for k in k0..=n {
                    let t = k as f64 / n as f64;
                    let p = [
                        pair[0][0] + t * (pair[1][0] - pair[0][0]),
                        pair[0][1] + t * (pair[1][1] - pair[0][1]),
                    ];
                    let s = world.sample_tsdf(p);
                    if s < 0.0 {
                        if !inside {
                            inside = true;
                        }
                        run_min = run_min.min(s);
                        run_len += 1;
                    } else if inside {
                        inside = false;
                        flush(&mut run_min, &mut run_len, p);
                    }
                }
            }
            if inside {
                let last = *traj.points.last().unwrap();
                flush(&mut run_min, &mut run_len, last);
            }
            lengths.push(0);
            let _ = &mut lengths;
        }
        depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |f: f64| depths.get(((depths.len() - 1) as f64 * f) as usize).copied().unwrap_or(0.0);
        println!(
            "{mode:>6}: events {} (boundary {}, interior {}), depth cells p25/p50/p75/p95 = {:.2}/{:.2}/{:.2}/{:.2}",
            depths.len(),
            boundary,
            interior,
            q(0.25),
            q(0.5),
            q(0.75),
            q(0.95),
        );
    }
}
