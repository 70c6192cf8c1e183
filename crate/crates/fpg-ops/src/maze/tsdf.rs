//! Truncated signed distance field over an occupancy grid.
//!
//! Distances are exact Euclidean cell-center distances computed with the
//! two-pass (rows, then columns) lower-envelope distance transform. The sign
//! convention is positive clearance outside obstacles, negative inside, with
//! values clamped at the truncation radius and scaled to normalized units.

use nalgebra::DVector;

use super::OccupancyGrid;

const INF: f64 = 1e20;

/// One-dimensional squared-distance transform (lower envelope of parabolas).
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = INF;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        d[q] = diff * diff + f[p];
    }
    d
}

/// Squared Euclidean distance (in cells) from every cell to the nearest
/// feature cell, `feature(x, y) = true` marking the sources.
fn squared_edt(size: usize, feature: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut field = vec![INF; size * size];
    for y in 0..size {
        for x in 0..size {
            if feature(x, y) {
                field[y * size + x] = 0.0;
            }
        }
    }
    // Rows, then columns.
    let mut row = vec![0.0; size];
    for y in 0..size {
        row.copy_from_slice(&field[y * size..(y + 1) * size]);
        let d = dt_1d(&row);
        field[y * size..(y + 1) * size].copy_from_slice(&d);
    }
    let mut col = vec![0.0; size];
    for x in 0..size {
        for y in 0..size {
            col[y] = field[y * size + x];
        }
        let d = dt_1d(&col);
        for y in 0..size {
            field[y * size + x] = d[y];
        }
    }
    field
}

/// Truncated signed distance field in normalized workspace units.
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfField {
    size: usize,
    cell_size: f64,
    truncation: f64,
    values: Vec<f64>,
}

impl TsdfField {
    /// Exact two-pass signed distance transform, clamped at
    /// `truncation_radius` (given in cells).
    pub fn compute(grid: &OccupancyGrid, truncation_radius: f64) -> Self {
        let size = grid.size();
        let cell_size = 2.0 / size as f64;
        let to_obstacle = squared_edt(size, |x, y| grid.is_occupied(x, y));
        let to_free = squared_edt(size, |x, y| !grid.is_occupied(x, y));
        let values = (0..size * size)
            .map(|i| {
                let x = i % size;
                let y = i / size;
                let signed = if grid.is_occupied(x, y) {
                    -to_free[i].sqrt()
                } else {
                    to_obstacle[i].min(INF).sqrt()
                };
                signed.clamp(-truncation_radius, truncation_radius) * cell_size
            })
            .collect();
        TsdfField {
            size,
            cell_size,
            truncation: truncation_radius * cell_size,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Truncation radius in normalized units.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    /// Grid value at a cell center.
    pub fn at_cell(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.size + x]
    }

    /// Continuous grid coordinate of a normalized point, clamped into the
    /// cell-center lattice hull.
    fn grid_coord(&self, coord: f64) -> f64 {
        let u = (coord + 1.0) / self.cell_size - 0.5;
        u.clamp(0.0, (self.size - 1) as f64)
    }

    /// Bilinear interpolation of the field at a normalized point; exact at
    /// cell centers, clamped at the boundary.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        let u = self.grid_coord(p[0]);
        let v = self.grid_coord(p[1]);
        let x0 = (u.floor() as usize).min(self.size - 2);
        let y0 = (v.floor() as usize).min(self.size - 2);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let f00 = self.at_cell(x0, y0);
        let f10 = self.at_cell(x0 + 1, y0);
        let f01 = self.at_cell(x0, y0 + 1);
        let f11 = self.at_cell(x0 + 1, y0 + 1);
        f00 * (1.0 - fx) * (1.0 - fy) + f10 * fx * (1.0 - fy) + f01 * (1.0 - fx) * fy + f11 * fx * fy
    }

    /// Gradient of [`Self::sample`] with respect to the normalized point;
    /// zero in clamped directions.
    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let u_raw = (p[0] + 1.0) / self.cell_size - 0.5;
        let v_raw = (p[1] + 1.0) / self.cell_size - 0.5;
        let u = self.grid_coord(p[0]);
        let v = self.grid_coord(p[1]);
        let x0 = (u.floor() as usize).min(self.size - 2);
        let y0 = (v.floor() as usize).min(self.size - 2);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let f00 = self.at_cell(x0, y0);
        let f10 = self.at_cell(x0 + 1, y0);
        let f01 = self.at_cell(x0, y0 + 1);
        let f11 = self.at_cell(x0 + 1, y0 + 1);
        let max = (self.size - 1) as f64;
        let du = if (0.0..=max).contains(&u_raw) {
            ((f10 - f00) * (1.0 - fy) + (f11 - f01) * fy) / self.cell_size
        } else {
            0.0
        };
        let dv = if (0.0..=max).contains(&v_raw) {
            ((f01 - f00) * (1.0 - fx) + (f11 - f10) * fx) / self.cell_size
        } else {
            0.0
        };
        [du, dv]
    }
}

/// Numerically stable softplus barrier `φ(z) = ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `φ'(z) = σ(z)`, the logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Clearance barrier `Σ_i φ((μ − s̃(p_i))/τ)` over the waypoints of a
/// flattened trajectory, with its analytic gradient. `mu` and `tau` are in
/// normalized units.
pub fn tsdf_loss_flat(field: &TsdfField, flat: &DVector<f64>, mu: f64, tau: f64) -> (f64, DVector<f64>) {
    debug_assert!(flat.len() % 2 == 0);
    let mut loss = 0.0;
    let mut grad = DVector::zeros(flat.len());
    for i in 0..flat.len() / 2 {
        let p = [flat[2 * i], flat[2 * i + 1]];
        let s = field.sample(p);
        let z = (mu - s) / tau;
        loss += softplus(z);
        let scale = -sigmoid(z) / tau;
        let g = field.gradient(p);
        grad[2 * i] = scale * g[0];
        grad[2 * i + 1] = scale * g[1];
    }
    (loss, grad)
}
