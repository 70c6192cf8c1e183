//! Expert path planning on inflated occupancy grids.
//!
//! Shortest paths come from 8-connected A* with Euclidean edge costs and an
//! octile heuristic, followed by greedy line-of-sight shortcutting so the
//! expert does not inherit grid staircase artifacts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::OccupancyGrid;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    priority: f64,
    node: (usize, usize),
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on priority; ties broken by node index for determinism.
        other
            .priority
            .partial_cmp(&self.priority)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn octile(a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = (a.0 as f64 - b.0 as f64).abs();
    let dy = (a.1 as f64 - b.1 as f64).abs();
    let lo = dx.min(dy);
    dx.max(dy) + (SQRT2 - 1.0) * lo
}

/// 8-connected shortest path over free cells, start and goal inclusive.
/// Returns `None` when the goal is unreachable.
pub fn astar(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<Vec<(usize, usize)>> {
    let size = grid.size();
    if grid.is_occupied(start.0, start.1) || grid.is_occupied(goal.0, goal.1) {
        return None;
    }
    let idx = |n: (usize, usize)| n.1 * size + n.0;
    let mut dist = vec![f64::INFINITY; size * size];
    let mut parent = vec![usize::MAX; size * size];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    heap.push(HeapEntry {
        priority: octile(start, goal),
        node: start,
    });

    while let Some(HeapEntry { node, priority }) = heap.pop() {
        if node == goal {
            break;
        }
        let d = dist[idx(node)];
        if priority - octile(node, goal) > d + 1e-12 {
            continue; // stale entry
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = node.0 as i64 + dx;
                let ny = node.1 as i64 + dy;
                if nx < 0 || ny < 0 || nx >= size as i64 || ny >= size as i64 {
                    continue;
                }
                let next = (nx as usize, ny as usize);
                if grid.is_occupied(next.0, next.1) {
                    continue;
                }
                // No corner cutting on diagonal moves.
                if dx != 0 && dy != 0 {
                    let a = ((node.0 as i64 + dx) as usize, node.1);
                    let b = (node.0, (node.1 as i64 + dy) as usize);
                    if grid.is_occupied(a.0, a.1) || grid.is_occupied(b.0, b.1) {
                        continue;
                    }
                }
                let step = if dx != 0 && dy != 0 { SQRT2 } else { 1.0 };
                let cand = d + step;
                if cand + 1e-12 < dist[idx(next)] {
                    dist[idx(next)] = cand;
                    parent[idx(next)] = idx(node);
                    heap.push(HeapEntry {
                        priority: cand + octile(next, goal),
                        node: next,
                    });
                }
            }
        }
    }

    if !dist[idx(goal)].is_finite() {
        return None;
    }
    let mut path = vec![goal];
    let mut cursor = idx(goal);
    while cursor != idx(start) {
        cursor = parent[cursor];
        path.push((cursor % size, cursor / size));
    }
    path.reverse();
    Some(path)
}

/// Straight-segment visibility between two cell centers: every sample along
/// the segment (quarter-cell spacing) must land on a free cell.
pub fn line_of_sight(grid: &OccupancyGrid, a: (usize, usize), b: (usize, usize)) -> bool {
    let ax = a.0 as f64;
    let ay = a.1 as f64;
    let bx = b.0 as f64;
    let by = b.1 as f64;
    let dist = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    let steps = (dist * 4.0).ceil().max(1.0) as usize;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        let x = (ax + t * (bx - ax)).round() as i64;
        let y = (ay + t * (by - ay)).round() as i64;
        if x < 0 || y < 0 || x >= grid.size() as i64 || y >= grid.size() as i64 {
            return false;
        }
        if grid.is_occupied(x as usize, y as usize) {
            return false;
        }
    }
    true
}

/// Greedy shortcutting: repeatedly jump to the farthest path node still in
/// line of sight. On an obstacle-free grid the whole path collapses to its
/// endpoints.
pub fn shortcut(grid: &OccupancyGrid, path: &[(usize, usize)]) -> Vec<(usize, usize)> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !line_of_sight(grid, path[i], path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

/// Resample a polyline by arc length to exactly `count` points.
pub fn resample_polyline(points: &[[f64; 2]], count: usize) -> Vec<[f64; 2]> {
    assert!(count >= 1 && !points.is_empty());
    if points.len() == 1 {
        return vec![points[0]; count];
    }
    let mut cumulative = vec![0.0];
    for pair in points.windows(2) {
        let d = ((pair[1][0] - pair[0][0]).powi(2) + (pair[1][1] - pair[0][1]).powi(2)).sqrt();
        cumulative.push(cumulative.last().unwrap() + d);
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return vec![points[0]; count];
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let target = if count == 1 {
            0.0
        } else {
            total * k as f64 / (count - 1) as f64
        };
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = (cumulative[seg + 1] - cumulative[seg]).max(1e-300);
        let t = ((target - cumulative[seg]) / span).clamp(0.0, 1.0);
        out.push([
            points[seg][0] + t * (points[seg + 1][0] - points[seg][0]),
            points[seg][1] + t * (points[seg + 1][1] - points[seg][1]),
        ]);
    }
    out
}
