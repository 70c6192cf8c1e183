//! Generate a benchmark world and render it: occupancy + expert trajectory
//! as SVG, clearance field as PPM.

use fpg_ops::maze::{evaluate_rollout, generate_world, render, tsdf_loss, WorldParams};

fn main() {
    let params = WorldParams::default();
    let world = generate_world(7, &params).unwrap();

    println!("grid {}x{}, fill {:.1}%", params.grid_size, params.grid_size, world.grid.fill_fraction() * 100.0);
    println!("start {:?} → goal {:?}", world.start, world.goal);

    let eval = evaluate_rollout(&world, &world.expert);
    println!(
        "expert: {} waypoints, path {:.3}, min clearance {:.4}, collisions {}, success {}",
        world.expert.len(),
        eval.path_length,
        eval.min_clearance,
        eval.collisions,
        eval.success
    );

    let cell = world.cell_size();
    let (loss, grad) = tsdf_loss(&world, &world.expert, 1.5 * cell, 0.5 * cell);
    println!("clearance barrier on the expert: loss {loss:.4}, |grad| {:.4}", grad.norm());

    std::fs::create_dir_all("out").unwrap();
    render::write_world_svg(
        &world,
        &[render::Overlay {
            trajectory: &world.expert,
            color: "#1f6fd6",
            width: 0.4,
        }],
        std::path::Path::new("out/world.svg"),
    )
    .unwrap();
    render::write_tsdf_ppm(&world, std::path::Path::new("out/world_tsdf.ppm")).unwrap();
    println!("wrote out/world.svg and out/world_tsdf.ppm");
}
