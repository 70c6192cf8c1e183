//! Scratch: waypoint- vs segment-level collision structure per mode.

use fpg_ops::fpg::GuidanceMode;
use fpg_ops::harness::{load_checkpoint, run_algorithm1, RunConfig};
use fpg_ops::maze::{evaluate_rollout, generate_world};
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

    for mode in [GuidanceMode::None, GuidanceMode::Raw, GuidanceMode::FpgOps] {
        let mut wp_pen = 0usize; // waypoints inside obstacles
        let mut wp_band = 0usize; // waypoints with clearance < mu
        let mut coll = 0usize;
        let mut path = 0.0;
        let mut kink = 0.0; // mean turning angle, degrees
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
            let eval = evaluate_rollout(&world, &out.blended);
            coll += eval.collisions;
            path += eval.path_length;
            let mu = 1.5 * world.cell_size();
            for p in &out.blended.points {
                let s = world.sample_tsdf(*p);
                if s < 0.0 {
                    wp_pen += 1;
                }
                if s < mu {
                    wp_band += 1;
                }
            }
            let pts = &out.blended.points;
            let mut angles = 0.0;
            let mut count = 0;
            for w in pts.windows(3) {
                let a = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
                let b = [w[2][0] - w[1][0], w[2][1] - w[1][1]];
                let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
                let nb = (b[0] * b[0] + b[1] * b[1]).sqrt();
                if na > 1e-9 && nb > 1e-9 {
                    let cosv = ((a[0] * b[0] + a[1] * b[1]) / (na * nb)).clamp(-1.0, 1.0);
                    angles += cosv.acos().to_degrees();
                    count += 1;
                }
            }
            kink += angles / count.max(1) as f64;
        }
        let n = worlds as f64;
        println!(
            "{mode:>8}: collisions {:.2}, path {:.3}, waypoints inside {:.2}, in-band {:.2}, mean turn {:.1}°",
            coll as f64 / n,
            path / n,
            wp_pen as f64 / n,
            wp_band as f64 / n,
            kink / n
        );
    }
}
