//! Benchmark dataset persistence.
//!
//! Binary layout (all little-endian, fixed width): an 8-byte magic, a u32
//! format version, u32 grid size, u32 horizon, u64 record count, then per
//! record the occupancy bitmap (row-major, LSB-first), start and goal as
//! 2×f64 each, and the expert waypoints as 2H×f64. A JSON-lines debug
//! export mirrors the same records.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::denoiser::Condition;
use crate::maze::{
    encode_grid_condition, generate_world, MazeWorld, OccupancyGrid, Trajectory, TsdfField,
    WorldParams,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"FPGDATA\0";
const VERSION: u32 = 1;

/// One benchmark world: obstacles, endpoints, and the expert trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub grid: OccupancyGrid,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub expert: Trajectory,
}

impl DatasetRecord {
    pub fn from_world(world: &MazeWorld) -> Self {
        DatasetRecord {
            grid: world.grid.clone(),
            start: world.start,
            goal: world.goal,
            expert: world.expert.clone(),
        }
    }

    /// Deterministic condition encoding for training and sampling.
    pub fn condition(&self) -> Condition {
        encode_grid_condition(&self.grid, self.start, self.goal)
    }

    /// Rebuild the full world (the clearance field is derived, not stored).
    pub fn to_world(&self, truncation_radius: f64) -> MazeWorld {
        MazeWorld {
            tsdf: TsdfField::compute(&self.grid, truncation_radius),
            grid: self.grid.clone(),
            start: self.start,
            goal: self.goal,
            expert: self.expert.clone(),
        }
    }
}

/// A set of generated worlds sharing one grid size and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid_size: usize,
    pub horizon: usize,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    /// Generate `count` worlds with per-record seeds derived from `seed`.
    pub fn generate(seed: u64, count: usize, params: &WorldParams) -> Result<Self> {
        params.validate()?;
        let records: Vec<Result<DatasetRecord>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let world_seed = derive_seed(seed, &[0x6461_7461, i as u64]);
                Ok(DatasetRecord::from_world(&generate_world(world_seed, params)?))
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for r in records {
            out.push(r?);
        }
        Ok(Dataset {
            grid_size: params.grid_size,
            horizon: params.horizon,
            records: out,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid_size as u32).to_le_bytes());
        out.extend_from_slice(&(self.horizon as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for record in &self.records {
            out.extend_from_slice(&record.grid.to_bitmap());
            for v in [record.start[0], record.start[1], record.goal[0], record.goal[1]] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for p in &record.expert.points {
                out.extend_from_slice(&p[0].to_le_bytes());
                out.extend_from_slice(&p[1].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
            if *cursor + n > bytes.len() {
                return Err(Error::Dataset("truncated dataset file".into()));
            }
            let slice = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(slice)
        };
        let read_u32 = |cursor: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(cursor, 4)?.try_into().unwrap()))
        };
        let read_f64 = |cursor: &mut usize| -> Result<f64> {
            Ok(f64::from_le_bytes(take(cursor, 8)?.try_into().unwrap()))
        };

        if take(&mut cursor, 8)? != MAGIC {
            return Err(Error::Dataset("bad magic".into()));
        }
        let version = read_u32(&mut cursor)?;
        if version != VERSION {
            return Err(Error::Dataset(format!("unsupported version {version}")));
        }
        let grid_size = read_u32(&mut cursor)? as usize;
        let horizon = read_u32(&mut cursor)? as usize;
        let count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        let bitmap_len = (grid_size * grid_size).div_ceil(8);
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let grid = OccupancyGrid::from_bitmap(grid_size, take(&mut cursor, bitmap_len)?)?;
            let start = [read_f64(&mut cursor)?, read_f64(&mut cursor)?];
            let goal = [read_f64(&mut cursor)?, read_f64(&mut cursor)?];
            let mut points = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                points.push([read_f64(&mut cursor)?, read_f64(&mut cursor)?]);
            }
            records.push(DatasetRecord {
                grid,
                start,
                goal,
                expert: Trajectory::new(points),
            });
        }
        if cursor != bytes.len() {
            return Err(Error::Dataset("trailing bytes after records".into()));
        }
        Ok(Dataset {
            grid_size,
            horizon,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Dataset::from_bytes(&std::fs::read(path)?)
    }

    /// JSON-lines debug export: one record per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for (i, record) in self.records.iter().enumerate() {
            let line = json!({
                "index": i,
                "grid_size": self.grid_size,
                "start": record.start,
                "goal": record.goal,
                "expert": record.expert.points,
                "occupied": record.grid.fill_fraction(),
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_params() -> WorldParams {
        WorldParams {
            grid_size: 32,
            horizon: 8,
            obstacle_density: 0.12,
            inflation_radius: 1.5,
            truncation_radius: 6.0,
            min_separation: 0.6,
            max_attempts: 16,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let params = quick_params();
        let dataset = Dataset::generate(3, 5, &params).unwrap();
        let bytes = dataset.to_bytes();
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(dataset, back);
    }

    #[test]
    fn generation_is_deterministic_bytes() {
        let params = quick_params();
        let a = Dataset::generate(9, 4, &params).unwrap().to_bytes();
        let b = Dataset::generate(9, 4, &params).unwrap().to_bytes();
        assert_eq!(a, b);
        let c = Dataset::generate(10, 4, &params).unwrap().to_bytes();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_corrupt_files() {
        let params = quick_params();
        let dataset = Dataset::generate(5, 2, &params).unwrap();
        let mut bytes = dataset.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(Dataset::from_bytes(&bytes).is_err());
        let mut bad_magic = dataset.to_bytes();
        bad_magic[0] = b'X';
        assert!(Dataset::from_bytes(&bad_magic).is_err());
    }

    #[test]
    fn jsonl_export_is_parseable() {
        let params = quick_params();
        let dataset = Dataset::generate(7, 3, &params).unwrap();
        let mut buf = Vec::new();
        dataset.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["expert"].as_array().unwrap().len() == 8);
        }
    }

    #[test]
    fn record_world_roundtrip_keeps_expert() {
        let params = quick_params();
        let world = generate_world(21, &params).unwrap();
        let record = DatasetRecord::from_world(&world);
        let rebuilt = record.to_world(params.truncation_radius);
        assert_eq!(rebuilt, world);
    }
}
