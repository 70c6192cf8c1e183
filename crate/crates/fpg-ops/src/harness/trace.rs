//! Run traces: per-step projection diagnostics and sensitivity increments
//! for every guided step, serialized as JSON.

use std::io::Write;

use serde::Serialize;

use crate::blending::BlendDiagnostics;
use crate::fpg::ProjectionResult;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct StepTrace {
    pub t: usize,
    /// Guidance loss at the evaluated state (guided modes only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallel_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orthogonality_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<bool>,
    /// Raw condition-gradient norm added to the running tail score
    /// (recorded for steps `t ≤ M`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fds_increment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_fds: Option<f64>,
}

impl StepTrace {
    pub fn new(t: usize) -> Self {
        StepTrace {
            t,
            loss: None,
            parallel_norm: None,
            orthogonality_residual: None,
            degenerate: None,
            fds_increment: None,
            step_fds: None,
        }
    }

    pub fn record_projection(&mut self, p: &ProjectionResult) {
        self.parallel_norm = Some(p.parallel_norm);
        self.orthogonality_residual = Some(p.orthogonality_residual);
        self.degenerate = Some(p.degenerate);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateTrace {
    pub index: usize,
    pub steps: Vec<StepTrace>,
    /// Final streaming tail score Û.
    pub tfds: f64,
    pub aborted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub run_seed: u64,
    pub mode: String,
    pub gamma: f64,
    pub candidates: Vec<CandidateTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blend: Option<BlendDiagnostics>,
}

impl RunTrace {
    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}
