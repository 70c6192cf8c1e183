//! Maze2D benchmark world: procedural occupancy grids, clearance fields,
//! expert planning, the clearance guidance objective, endpoint inpainting,
//! and rollout metrics. The workspace is normalized to `[-1, 1]²` with the
//! grid cell size `2/G`.

pub mod planner;
pub mod render;
mod tsdf;

pub use tsdf::{sigmoid, softplus, tsdf_loss_flat, TsdfField};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{ActionState, Condition};
use crate::fpg::{GuidanceGradient, GuidanceObjective};
use crate::rng::derive_rng;
use crate::{Error, Result};

/// Binary occupancy grid; `true` marks an obstacle cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    size: usize,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(size: usize) -> Self {
        OccupancyGrid {
            size,
            cells: vec![false; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize, occupied: bool) {
        self.cells[y * self.size + x] = occupied;
    }

    pub fn fill_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }

    /// Obstacles dilated by a Euclidean disc of `radius` cells.
    pub fn inflate(&self, radius: f64) -> OccupancyGrid {
        let r = radius.ceil() as i64;
        let r_sq = radius * radius;
        let mut out = OccupancyGrid::empty(self.size);
        for y in 0..self.size {
            for x in 0..self.size {
                if !self.is_occupied(x, y) {
                    continue;
                }
                for dy in -r..=r {
                    for dx in -r..=r {
                        if (dx * dx + dy * dy) as f64 > r_sq {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx >= 0 && ny >= 0 && nx < self.size as i64 && ny < self.size as i64 {
                            out.set(nx as usize, ny as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    /// Center of cell `(x, y)` in normalized coordinates.
    pub fn cell_center(&self, x: usize, y: usize) -> [f64; 2] {
        let cell = 2.0 / self.size as f64;
        [-1.0 + (x as f64 + 0.5) * cell, -1.0 + (y as f64 + 0.5) * cell]
    }

    /// Row-major LSB-first bitmap used by the dataset format.
    pub fn to_bitmap(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.cells.len().div_ceil(8)];
        for (i, &c) in self.cells.iter().enumerate() {
            if c {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bitmap(size: usize, bytes: &[u8]) -> Result<Self> {
        let expected = (size * size).div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::Dataset(format!(
                "grid bitmap has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let cells = (0..size * size)
            .map(|i| bytes[i / 8] & (1 << (i % 8)) != 0)
            .collect();
        Ok(OccupancyGrid { size, cells })
    }
}

/// Fixed-horizon waypoint sequence in the normalized workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn new(points: Vec<[f64; 2]>) -> Self {
        Trajectory { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Flatten to `(x_1, y_1, …, x_H, y_H)`.
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            out[2 * i] = p[0];
            out[2 * i + 1] = p[1];
        }
        out
    }

    pub fn from_flat(flat: &DVector<f64>) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::InvalidArgument(
                "flattened trajectory length must be even".into(),
            ));
        }
        Ok(Trajectory {
            points: (0..flat.len() / 2)
                .map(|i| [flat[2 * i], flat[2 * i + 1]])
                .collect(),
        })
    }

    pub fn path_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum()
    }
}

/// World generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub grid_size: usize,
    pub horizon: usize,
    /// Target obstacle fill fraction (boundary walls included).
    pub obstacle_density: f64,
    /// Planner obstacle inflation radius, in cells.
    pub inflation_radius: f64,
    /// Distance-field truncation radius, in cells.
    pub truncation_radius: f64,
    /// Minimum start/goal separation in normalized units.
    pub min_separation: f64,
    pub max_attempts: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            grid_size: 64,
            horizon: 32,
            obstacle_density: 0.18,
            inflation_radius: 2.0,
            truncation_radius: 8.0,
            min_separation: 0.9,
            max_attempts: 64,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 16 || self.grid_size % 16 != 0 {
            return Err(Error::InvalidArgument(
                "grid_size must be a positive multiple of 16".into(),
            ));
        }
        if self.horizon < 2 {
            return Err(Error::InvalidArgument("horizon must be at least 2".into()));
        }
        if !(0.0..0.7).contains(&self.obstacle_density) {
            return Err(Error::InvalidArgument(
                "obstacle_density must lie in [0, 0.7)".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        2.0 / self.grid_size as f64
    }
}

/// A generated benchmark world.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeWorld {
    pub grid: OccupancyGrid,
    pub tsdf: TsdfField,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub expert: Trajectory,
}

impl MazeWorld {
    /// Assemble a world from an explicit grid and endpoints, planning the
    /// expert on the inflated grid. Fails when no path exists.
    pub fn from_grid(
        grid: OccupancyGrid,
        start_cell: (usize, usize),
        goal_cell: (usize, usize),
        params: &WorldParams,
    ) -> Result<Self> {
        params.validate()?;
        let inflated = grid.inflate(params.inflation_radius);
        let path = planner::astar(&inflated, start_cell, goal_cell).ok_or_else(|| {
            Error::InvalidArgument("no expert path between the requested endpoints".into())
        })?;
        let short = planner::shortcut(&inflated, &path);
        let polyline: Vec<[f64; 2]> = short.iter().map(|&(x, y)| grid.cell_center(x, y)).collect();
        let waypoints = planner::resample_polyline(&polyline, params.horizon);
        let tsdf = TsdfField::compute(&grid, params.truncation_radius);
        Ok(MazeWorld {
            start: grid.cell_center(start_cell.0, start_cell.1),
            goal: grid.cell_center(goal_cell.0, goal_cell.1),
            expert: Trajectory::new(waypoints),
            grid,
            tsdf,
        })
    }

    pub fn cell_size(&self) -> f64 {
        2.0 / self.grid.size() as f64
    }

    /// Interpolated clearance at a normalized point.
    pub fn sample_tsdf(&self, p: [f64; 2]) -> f64 {
        self.tsdf.sample(p)
    }
}

fn random_grid(rng: &mut impl Rng, params: &WorldParams) -> OccupancyGrid {
    let size = params.grid_size;
    let mut grid = OccupancyGrid::empty(size);
    // Boundary walls.
    for i in 0..size {
        grid.set(i, 0, true);
        grid.set(i, size - 1, true);
        grid.set(0, i, true);
        grid.set(size - 1, i, true);
    }
    // Random rectangles until the target density is met, then a few
    // scattered square blocks. Minimum feature size is kept at one pooled
    // block (grid_size/16) so every obstacle is visible to the condition
    // encoding.
    let min_dim = (size / 16).max(2);
    let mut guard = 0;
    while grid.fill_fraction() < params.obstacle_density && guard < 400 {
        guard += 1;
        let w = rng.random_range(min_dim..=size / 5);
        let h = rng.random_range(min_dim..=size / 5);
        let x0 = rng.random_range(1..size - w - 1);
        let y0 = rng.random_range(1..size - h - 1);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                grid.set(x, y, true);
            }
        }
    }
    let scatter = size / 16;
    for _ in 0..scatter {
        let x = rng.random_range(1..size - min_dim);
        let y = rng.random_range(1..size - min_dim);
        for dy in 0..min_dim {
            for dx in 0..min_dim {
                grid.set(x + dx, y + dy, true);
            }
        }
    }
    grid
}

/// Generate a world with a reachable start/goal pair and a collision-free
/// expert trajectory; retries with fresh obstacles until it succeeds.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<MazeWorld> {
    params.validate()?;
    for attempt in 0..params.max_attempts {
        let mut rng = derive_rng(seed, &[0x776f_726c_64, attempt as u64]);
        let grid = random_grid(&mut rng, params);
        let inflated = grid.inflate(params.inflation_radius);
        let free: Vec<(usize, usize)> = (0..params.grid_size * params.grid_size)
            .filter_map(|i| {
                let cell = (i % params.grid_size, i / params.grid_size);
                (!inflated.is_occupied(cell.0, cell.1)).then_some(cell)
            })
            .collect();
        if free.len() < 2 {
            continue;
        }
        'endpoints: for _ in 0..24 {
            let start_cell = free[rng.random_range(0..free.len())];
            let goal_cell = free[rng.random_range(0..free.len())];
            let sp = grid.cell_center(start_cell.0, start_cell.1);
            let gp = grid.cell_center(goal_cell.0, goal_cell.1);
            let sep = ((sp[0] - gp[0]).powi(2) + (sp[1] - gp[1]).powi(2)).sqrt();
            if sep < params.min_separation {
                continue 'endpoints;
            }
            let Ok(world) = MazeWorld::from_grid(grid.clone(), start_cell, goal_cell, params)
            else {
                continue 'endpoints;
            };
            // The expert must clear every waypoint strictly.
            if world
                .expert
                .points
                .iter()
                .all(|&p| world.sample_tsdf(p) > 0.0)
            {
                return Ok(world);
            }
        }
    }
    Err(Error::WorldGeneration {
        seed,
        attempts: params.max_attempts,
    })
}

/// Deterministic condition encoding: a 16×16 average pool of the occupancy
/// grid (occupied fraction per block, row-major) concatenated with the
/// normalized start and goal.
pub fn encode_grid_condition(grid: &OccupancyGrid, start: [f64; 2], goal: [f64; 2]) -> Condition {
    const POOL: usize = 16;
    let size = grid.size();
    let block = size / POOL;
    let mut values = DVector::zeros(POOL * POOL + 4);
    for py in 0..POOL {
        for px in 0..POOL {
            let mut occupied = 0usize;
            for y in py * block..(py + 1) * block {
                for x in px * block..(px + 1) * block {
                    if grid.is_occupied(x, y) {
                        occupied += 1;
                    }
                }
            }
            values[py * POOL + px] = occupied as f64 / (block * block) as f64;
        }
    }
    let base = POOL * POOL;
    values[base] = start[0];
    values[base + 1] = start[1];
    values[base + 2] = goal[0];
    values[base + 3] = goal[1];
    Condition::new(values).expect("grid encoding is finite")
}

/// [`encode_grid_condition`] for a generated world.
pub fn encode_condition(world: &MazeWorld) -> Condition {
    encode_grid_condition(&world.grid, world.start, world.goal)
}

/// Dimension of [`encode_condition`]'s output.
pub const CONDITION_DIM: usize = 16 * 16 + 4;

/// Overwrite the first and last waypoints with the world's start and goal,
/// leaving every other coordinate untouched. Idempotent.
pub fn inpaint_endpoints(state: &ActionState, world: &MazeWorld) -> ActionState {
    let mut values = state.values.clone();
    let n = values.len();
    values[0] = world.start[0];
    values[1] = world.start[1];
    values[n - 2] = world.goal[0];
    values[n - 1] = world.goal[1];
    ActionState::new(values, state.step)
}

/// Rollout metrics for one trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RolloutEval {
    /// Number of contiguous collision events along the densely sampled path.
    pub collisions: usize,
    /// Total length in normalized units.
    pub path_length: f64,
    /// Final waypoint within goal tolerance and no collision.
    pub success: bool,
    pub goal_distance: f64,
    pub min_clearance: f64,
}

/// Goal tolerance in cells.
pub const GOAL_TOLERANCE_CELLS: f64 = 2.0;

/// Dense collision check (≤ half-cell sampling), path length, and success.
pub fn evaluate_rollout(world: &MazeWorld, traj: &Trajectory) -> RolloutEval {
    let cell = world.cell_size();
    let step_len = 0.5 * cell;
    let mut collisions = 0usize;
    let mut inside = false;
    let mut min_clearance = f64::INFINITY;
    let mut check = |p: [f64; 2]| {
        let s = world.sample_tsdf(p);
        min_clearance = min_clearance.min(s);
        if s < 0.0 {
            if !inside {
                collisions += 1;
            }
            inside = true;
        } else {
            inside = false;
        }
    };
    if traj.len() == 1 {
        check(traj.points[0]);
    } else {
        for (i, pair) in traj.points.windows(2).enumerate() {
            let d = ((pair[1][0] - pair[0][0]).powi(2) + (pair[1][1] - pair[0][1]).powi(2)).sqrt();
            let n = (d / step_len).ceil().max(1.0) as usize;
            let start_k = if i == 0 { 0 } else { 1 };
            for k in start_k..=n {
                let t = k as f64 / n as f64;
                check([
                    pair[0][0] + t * (pair[1][0] - pair[0][0]),
                    pair[0][1] + t * (pair[1][1] - pair[0][1]),
                ]);
            }
        }
    }
    let last = traj.points[traj.len() - 1];
    let goal_distance =
        ((last[0] - world.goal[0]).powi(2) + (last[1] - world.goal[1]).powi(2)).sqrt();
    RolloutEval {
        collisions,
        path_length: traj.path_length(),
        success: collisions == 0 && goal_distance <= GOAL_TOLERANCE_CELLS * cell,
        goal_distance,
        min_clearance,
    }
}

/// Clearance guidance objective: `Σ_i φ((μ − s̃(p_i))/τ)` with the softplus
/// barrier, evaluated on the waypoints of the noisy action state.
///
/// The objective hands the sampler `barrier_scale · ∇L`. With
/// `barrier_scale = τ` this is the gradient of the smoothed hinge penalty
/// `Σ τ·φ((μ−s̃)/τ)` — per-waypoint magnitude `σ(z)·‖∇s̃‖ ≤ 1` decaying
/// smoothly with clearance, which is what keeps guided updates from
/// saturating into same-size pushes at every waypoint near an obstacle.
/// `grad_clip`, when set, additionally caps each waypoint's gradient norm;
/// the raw analytic loss/gradient are exposed via [`tsdf_loss`].
pub struct TsdfGuidance<'a> {
    world: &'a MazeWorld,
    /// Clearance margin, normalized units.
    pub mu: f64,
    /// Barrier temperature, normalized units.
    pub tau: f64,
    /// Multiplier applied to the raw barrier loss and gradient.
    pub barrier_scale: f64,
    /// Per-waypoint gradient norm cap, normalized units.
    pub grad_clip: Option<f64>,
}

impl<'a> TsdfGuidance<'a> {
    /// Smoothed-hinge scaling: `barrier_scale = τ`.
    pub fn new(world: &'a MazeWorld, mu: f64, tau: f64, grad_clip: Option<f64>) -> Self {
        TsdfGuidance {
            world,
            mu,
            tau,
            barrier_scale: tau,
            grad_clip,
        }
    }

    pub fn with_barrier_scale(mut self, scale: f64) -> Self {
        self.barrier_scale = scale;
        self
    }
}

/// Raw clearance loss and analytic gradient for a trajectory.
pub fn tsdf_loss(world: &MazeWorld, traj: &Trajectory, mu: f64, tau: f64) -> (f64, DVector<f64>) {
    tsdf_loss_flat(&world.tsdf, &traj.flatten(), mu, tau)
}

impl GuidanceObjective for TsdfGuidance<'_> {
    fn evaluate(&self, action: &DVector<f64>, _step: usize) -> Result<(f64, GuidanceGradient)> {
        let (mut loss, mut grad) = tsdf_loss_flat(&self.world.tsdf, action, self.mu, self.tau);
        loss *= self.barrier_scale;
        grad *= self.barrier_scale;
        if let Some(cap) = self.grad_clip {
            for i in 0..grad.len() / 2 {
                let gx = grad[2 * i];
                let gy = grad[2 * i + 1];
                let norm = (gx * gx + gy * gy).sqrt();
                if norm > cap {
                    let scale = cap / norm;
                    grad[2 * i] *= scale;
                    grad[2 * i + 1] *= scale;
                }
            }
        }
        Ok((loss, GuidanceGradient::new(grad, self.tag())?))
    }

    fn tag(&self) -> &str {
        "tsdf_clearance"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_params() -> WorldParams {
        WorldParams {
            grid_size: 32,
            horizon: 16,
            obstacle_density: 0.14,
            inflation_radius: 1.5,
            truncation_radius: 6.0,
            min_separation: 0.7,
            max_attempts: 32,
        }
    }

    #[test]
    fn empty_grid_expert_is_straight_segment() {
        let params = WorldParams {
            obstacle_density: 0.0,
            ..quick_params()
        };
        let grid = OccupancyGrid::empty(32);
        let world = MazeWorld::from_grid(grid, (4, 4), (27, 20), &params).unwrap();
        // Shortcutting collapses the staircase; resampling yields the exact
        // segment between the endpoint cell centers.
        let h = world.expert.len();
        assert_eq!(h, params.horizon);
        for (k, p) in world.expert.points.iter().enumerate() {
            let t = k as f64 / (h - 1) as f64;
            let ex = world.start[0] + t * (world.goal[0] - world.start[0]);
            let ey = world.start[1] + t * (world.goal[1] - world.start[1]);
            assert!((p[0] - ex).abs() <= 1e-9 && (p[1] - ey).abs() <= 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let params = quick_params();
        let a = generate_world(123, &params).unwrap();
        let b = generate_world(123, &params).unwrap();
        assert_eq!(a, b);
        let c = generate_world(124, &params).unwrap();
        assert_ne!(a.grid, c.grid);
    }

    #[test]
    fn expert_clears_every_waypoint_and_succeeds() {
        let params = quick_params();
        for seed in 0..12 {
            let world = generate_world(seed, &params).unwrap();
            for &p in &world.expert.points {
                assert!(world.sample_tsdf(p) > 0.0, "seed {seed} waypoint inside");
            }
            let eval = evaluate_rollout(&world, &world.expert);
            assert_eq!(eval.collisions, 0, "seed {seed}");
            assert!(eval.success, "seed {seed}");
        }
    }

    #[test]
    fn blocking_wall_counts_a_collision() {
        let params = quick_params();
        let mut grid = OccupancyGrid::empty(32);
        for y in 4..28 {
            grid.set(16, y, true);
        }
        let world = MazeWorld::from_grid(grid, (4, 16), (27, 16), &params).unwrap();
        // A straight segment through the wall must collide at least once.
        let through = Trajectory::new(vec![world.start, world.goal]);
        let eval = evaluate_rollout(&world, &through);
        assert!(eval.collisions >= 1);
        assert!(!eval.success);
    }

    #[test]
    fn single_point_trajectory_has_zero_length() {
        let params = quick_params();
        let world = generate_world(3, &params).unwrap();
        let point = Trajectory::new(vec![world.goal]);
        let eval = evaluate_rollout(&world, &point);
        assert_eq!(eval.path_length, 0.0);
        assert!(eval.goal_distance <= 1e-12);
    }

    #[test]
    fn inpainting_is_idempotent_and_touches_two_waypoints() {
        let params = quick_params();
        let world = generate_world(5, &params).unwrap();
        let mut rng = derive_rng(6, &[0]);
        let noise = DVector::from_fn(2 * params.horizon, |_, _| rng.random_range(-1.0..1.0));
        let state = ActionState::new(noise.clone(), 7);
        let once = inpaint_endpoints(&state, &world);
        let twice = inpaint_endpoints(&once, &world);
        assert_eq!(once, twice);
        assert_eq!(once.step, 7);
        let mut changed = 0;
        for i in 0..noise.len() {
            if once.values[i] != noise[i] {
                changed += 1;
            }
        }
        assert!(changed <= 4);
        let n = noise.len();
        assert_eq!(once.values[0], world.start[0]);
        assert_eq!(once.values[1], world.start[1]);
        assert_eq!(once.values[n - 2], world.goal[0]);
        assert_eq!(once.values[n - 1], world.goal[1]);
        // Interior untouched.
        for i in 2..n - 2 {
            assert_eq!(once.values[i], noise[i]);
        }
    }

    #[test]
    fn encoding_is_local_and_deterministic() {
        let params = quick_params();
        let world = generate_world(9, &params).unwrap();
        let a = encode_condition(&world);
        let b = encode_condition(&world);
        assert_eq!(a, b);
        assert_eq!(a.dim(), CONDITION_DIM);

        // Empty grid pools to all zeros.
        let empty = MazeWorld::from_grid(
            OccupancyGrid::empty(32),
            (4, 4),
            (27, 27),
            &WorldParams {
                obstacle_density: 0.0,
                ..params
            },
        )
        .unwrap();
        let enc = encode_condition(&empty);
        assert!(enc.values().rows(0, 256).iter().all(|&v| v == 0.0));

        // Flipping one obstacle cell changes exactly one pooled entry.
        let mut flipped = empty.clone();
        flipped.grid.set(10, 12, true);
        let enc_flipped = encode_condition(&flipped);
        let mut differing = Vec::new();
        for i in 0..CONDITION_DIM {
            if enc.values()[i] != enc_flipped.values()[i] {
                differing.push(i);
            }
        }
        // 32/16 = 2-cell blocks: cell (10,12) lands in pool block (5,6).
        assert_eq!(differing, vec![6 * 16 + 5]);
    }

    #[test]
    fn grid_bitmap_roundtrip() {
        let params = quick_params();
        let world = generate_world(11, &params).unwrap();
        let bytes = world.grid.to_bitmap();
        let back = OccupancyGrid::from_bitmap(32, &bytes).unwrap();
        assert_eq!(world.grid, back);
        assert!(OccupancyGrid::from_bitmap(32, &bytes[1..]).is_err());
    }

    #[test]
    fn guidance_clips_per_waypoint_gradient() {
        let params = quick_params();
        let world = generate_world(13, &params).unwrap();
        let cell = world.cell_size();
        let guidance = TsdfGuidance::new(&world, 1.5 * cell, 0.5 * cell, Some(1.0));
        let flat = world.expert.flatten();
        let (_, grad) = guidance.evaluate(&flat, 3).unwrap();
        for i in 0..flat.len() / 2 {
            let n = (grad.values[2 * i].powi(2) + grad.values[2 * i + 1].powi(2)).sqrt();
            assert!(n <= 1.0 + 1e-12);
        }
        // Unclipped raw gradients can exceed the cap near obstacles.
        let raw = TsdfGuidance::new(&world, 1.5 * cell, 0.5 * cell, None);
        let mid = Trajectory::new(vec![[0.0, 0.0]; 4]).flatten();
        let (_, _g) = raw.evaluate(&mid, 3).unwrap();
    }

    #[test]
    fn unreachable_pair_reports_generation_error() {
        // Density so high that endpoint sampling cannot find a separated
        // reachable pair.
        let params = WorldParams {
            obstacle_density: 0.65,
            min_separation: 1.9,
            max_attempts: 2,
            ..quick_params()
        };
        let err = generate_world(1, &params);
        assert!(matches!(err, Err(Error::WorldGeneration { seed: 1, .. })));
    }
}
