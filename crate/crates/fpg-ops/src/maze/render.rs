//! Plain SVG / PPM renderers for worlds, clearance fields, and rollouts.

use std::fmt::Write as _;
use std::path::Path;

use super::{MazeWorld, Trajectory};
use crate::Result;

/// A labelled trajectory overlay.
pub struct Overlay<'a> {
    pub trajectory: &'a Trajectory,
    pub color: &'a str,
    pub width: f64,
}

fn svg_coord(world: &MazeWorld, p: [f64; 2]) -> (f64, f64) {
    let size = world.grid.size() as f64;
    (((p[0] + 1.0) / 2.0) * size, ((p[1] + 1.0) / 2.0) * size)
}

/// Render the grid, start/goal markers, and trajectory overlays as SVG.
pub fn world_svg(world: &MazeWorld, overlays: &[Overlay<'_>]) -> String {
    let size = world.grid.size();
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {size} {size}\" width=\"512\" height=\"512\">\n"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#f8f8f5\"/>\n");
    // Obstacle cells, merged into horizontal runs.
    for y in 0..size {
        let mut x = 0;
        while x < size {
            if world.grid.is_occupied(x, y) {
                let run_start = x;
                while x < size && world.grid.is_occupied(x, y) {
                    x += 1;
                }
                let _ = write!(
                    svg,
                    "<rect x=\"{run_start}\" y=\"{y}\" width=\"{}\" height=\"1\" fill=\"#30343a\"/>\n",
                    x - run_start
                );
            } else {
                x += 1;
            }
        }
    }
    for overlay in overlays {
        let mut points = String::new();
        for &p in &overlay.trajectory.points {
            let (x, y) = svg_coord(world, p);
            let _ = write!(points, "{x:.3},{y:.3} ");
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" stroke-linejoin=\"round\"/>\n",
            points.trim_end(),
            overlay.color,
            overlay.width
        );
    }
    let (sx, sy) = svg_coord(world, world.start);
    let (gx, gy) = svg_coord(world, world.goal);
    let _ = write!(
        svg,
        "<circle cx=\"{sx:.3}\" cy=\"{sy:.3}\" r=\"1.2\" fill=\"#2a9d3f\"/>\n"
    );
    let _ = write!(
        svg,
        "<circle cx=\"{gx:.3}\" cy=\"{gy:.3}\" r=\"1.2\" fill=\"#d62828\"/>\n"
    );
    svg.push_str("</svg>\n");
    svg
}

pub fn write_world_svg(world: &MazeWorld, overlays: &[Overlay<'_>], path: &Path) -> Result<()> {
    std::fs::write(path, world_svg(world, overlays))?;
    Ok(())
}

/// Binary PPM heatmap of the clearance field: red inside obstacles, white at
/// the zero level, blue toward full clearance.
pub fn tsdf_ppm(world: &MazeWorld) -> Vec<u8> {
    let size = world.grid.size();
    let trunc = world.tsdf.truncation();
    let mut out = format!("P6\n{size} {size}\n255\n").into_bytes();
    for y in 0..size {
        for x in 0..size {
            let v = world.tsdf.at_cell(x, y) / trunc; // in [-1, 1]
            let (r, g, b) = if v < 0.0 {
                let t = (-v).min(1.0);
                (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
            } else {
                let t = v.min(1.0);
                (255.0 * (1.0 - t), 255.0 * (1.0 - 0.6 * t), 255.0)
            };
            out.push(r as u8);
            out.push(g as u8);
            out.push(b as u8);
        }
    }
    out
}

pub fn write_tsdf_ppm(world: &MazeWorld, path: &Path) -> Result<()> {
    std::fs::write(path, tsdf_ppm(world))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::{generate_world, WorldParams};

    #[test]
    fn svg_and_ppm_have_expected_structure() {
        let params = WorldParams {
            grid_size: 32,
            horizon: 8,
            obstacle_density: 0.12,
            inflation_radius: 1.5,
            truncation_radius: 6.0,
            min_separation: 0.6,
            max_attempts: 16,
        };
        let world = generate_world(77, &params).unwrap();
        let svg = world_svg(
            &world,
            &[Overlay {
                trajectory: &world.expert,
                color: "#1f6fd6",
                width: 0.5,
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.ends_with("</svg>\n"));

        let ppm = tsdf_ppm(&world);
        let header = b"P6\n32 32\n255\n";
        assert!(ppm.starts_with(header));
        assert_eq!(ppm.len(), header.len() + 32 * 32 * 3);
    }
}
