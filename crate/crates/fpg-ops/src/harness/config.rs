//! Run configuration with paper-table defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fpg::{GuidanceMode, Solver};
use crate::maze::WorldParams;
use crate::schedule::ScheduleConfig;
use crate::Result;

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "FPG_OPS_OUT";

/// Clearance guidance parameters, in cells (converted to normalized units
/// against the world's grid size at run time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub mu_cells: f64,
    pub tau_cells: f64,
    /// Per-waypoint gradient norm cap in normalized units; `None` disables
    /// clipping.
    pub grad_clip: Option<f64>,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        GuidanceConfig {
            mu_cells: 1.5,
            tau_cells: 0.5,
            grad_clip: Some(1.0),
        }
    }
}

/// Full inference/benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: GuidanceMode,
    /// Guidance scale γ.
    pub gamma: f64,
    /// Linearly ramp γ toward the late denoising steps instead of holding it
    /// constant.
    pub gamma_anneal: bool,
    pub solver: Solver,
    /// Clamp the reconstructed clean action to this magnitude inside the
    /// solver mean; `None` disables clamping.
    pub recon_clip: Option<f64>,
    /// Rescale applied guidance deltas so `‖Δ‖ ≤ ‖u‖` (a no-op for the raw
    /// and exact-projection modes; tames the head-space delta's spectral
    /// gain).
    pub delta_norm_match: bool,
    pub schedule: ScheduleConfig,
    /// Tail length M for the truncated sensitivity score.
    pub tail_len: usize,
    /// Candidate count K.
    pub candidates: usize,
    /// Blending temperature η.
    pub blend_temperature: f64,
    pub cluster_eps: f64,
    pub cluster_min_pts: usize,
    /// Restrict blending to the most confident cluster.
    pub blend_within_top_cluster: bool,
    pub guidance: GuidanceConfig,
    pub world: WorldParams,
    pub seed: u64,
    /// Held-out world count for benchmark evaluation.
    pub eval_worlds: usize,
    /// Rollout repeats per world.
    pub repeats: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: GuidanceMode::FpgOps,
            gamma: 0.05,
            gamma_anneal: false,
            solver: Solver::Ddpm,
            recon_clip: Some(1.0),
            delta_norm_match: true,
            schedule: ScheduleConfig::default(),
            tail_len: 4,
            candidates: 4,
            blend_temperature: 5.0,
            cluster_eps: 0.5,
            cluster_min_pts: 2,
            blend_within_top_cluster: false,
            guidance: GuidanceConfig::default(),
            world: WorldParams::default(),
            seed: 0,
            eval_worlds: 200,
            repeats: 1,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Output directory: environment override, then config, then `.`.
    pub fn resolve_out_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Guidance scale at step `t`; constant unless annealing is enabled, in
    /// which case it ramps linearly toward the final denoising step.
    pub fn gamma_at(&self, t: usize, total: usize) -> f64 {
        if self.gamma_anneal {
            self.gamma * (total - t + 1) as f64 / total as f64
        } else {
            self.gamma
        }
    }

    pub fn validate(&self) -> Result<()> {
        use crate::Error;
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidArgument("gamma must be nonnegative".into()));
        }
        let total = self.schedule.total_steps();
        if self.tail_len == 0 || self.tail_len > total {
            return Err(Error::InvalidArgument(format!(
                "tail_len {} outside 1..={}",
                self.tail_len, total
            )));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidArgument("need at least one candidate".into()));
        }
        if !(self.blend_temperature > 0.0) || !(self.cluster_eps > 0.0) {
            return Err(Error::InvalidArgument(
                "blend temperature and cluster radius must be positive".into(),
            ));
        }
        self.world.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_the_hyperparameter_table() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.schedule.total_steps(), 10);
        assert_eq!(cfg.gamma, 0.05);
        assert_eq!(cfg.candidates, 4);
        assert_eq!(cfg.tail_len, 4);
        assert_eq!(cfg.blend_temperature, 5.0);
        assert_eq!(cfg.cluster_eps, 0.5);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn json_roundtrip_and_partial_overrides() {
        let cfg = RunConfig::default();
        let json = cfg.to_json_pretty();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);

        // Partial documents fall back to defaults.
        let partial: RunConfig = serde_json::from_str(r#"{"gamma": 0.1, "candidates": 8}"#).unwrap();
        assert_eq!(partial.gamma, 0.1);
        assert_eq!(partial.candidates, 8);
        assert_eq!(partial.tail_len, 4);
    }

    #[test]
    fn gamma_annealing_ramps_toward_late_steps() {
        let cfg = RunConfig {
            gamma_anneal: true,
            ..RunConfig::default()
        };
        assert!(cfg.gamma_at(10, 10) < cfg.gamma_at(1, 10));
        assert!((cfg.gamma_at(1, 10) - cfg.gamma).abs() <= 1e-15);
        let flat = RunConfig::default();
        assert_eq!(flat.gamma_at(7, 10), flat.gamma);
    }
}
