//! Uncertainty-guided action blending.
//!
//! Sampled candidates are density-clustered over Euclidean distance between
//! flattened trajectories; each candidate's typicality is the normalized size
//! of its cluster, noise points counting as singletons. The composite
//! confidence `exp(−η·Û)·C_typ` combines stability under observation
//! perturbations (the truncated sensitivity score `Û`) with distributional
//! consensus, and the final action is the confidence-weighted average.

use nalgebra::DVector;
use serde::Serialize;

use crate::{Error, Result};

/// Density clustering over flattened trajectories. Core points need
/// `min_pts` neighbors within `eps` (the point itself counts); reachable
/// points share a cluster; every noise point gets its own singleton label.
pub fn cluster_candidates(actions: &[DVector<f64>], eps: f64, min_pts: usize) -> Vec<usize> {
    let n = actions.len();
    if n == 0 {
        return Vec::new();
    }
    let eps_sq = eps * eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| (&actions[i] - &actions[j]).norm_squared() <= eps_sq)
                .collect()
        })
        .collect();

    const UNASSIGNED: usize = usize::MAX;
    let mut labels = vec![UNASSIGNED; n];
    let mut next_label = 0;
    for i in 0..n {
        if labels[i] != UNASSIGNED || neighbors[i].len() < min_pts {
            continue;
        }
        let label = next_label;
        next_label += 1;
        labels[i] = label;
        let mut queue: Vec<usize> = neighbors[i].clone();
        let mut cursor = 0;
        while cursor < queue.len() {
            let q = queue[cursor];
            cursor += 1;
            if labels[q] != UNASSIGNED {
                continue;
            }
            labels[q] = label;
            if neighbors[q].len() >= min_pts {
                queue.extend(neighbors[q].iter().copied());
            }
        }
    }
    // Noise points become singleton clusters.
    for label in labels.iter_mut() {
        if *label == UNASSIGNED {
            *label = next_label;
            next_label += 1;
        }
    }
    labels
}

/// Fraction of candidates sharing candidate `k`'s cluster label.
pub fn typicality(labels: &[usize], k: usize) -> f64 {
    let size = labels.iter().filter(|&&l| l == labels[k]).count();
    size as f64 / labels.len() as f64
}

/// Composite confidence `exp(−η·Û)·C_typ`: decreasing in the sensitivity
/// score, increasing in typicality, in `(0, 1]` for finite inputs.
pub fn composite_confidence(tfds_score: f64, typicality: f64, eta_temp: f64) -> f64 {
    debug_assert!(eta_temp > 0.0, "temperature must be positive");
    debug_assert!(tfds_score >= 0.0, "sensitivity score must be nonnegative");
    (-eta_temp * tfds_score).exp() * typicality
}

/// Sampled candidates with their sensitivity scores, cluster labels, and
/// blending weights.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub actions: Vec<DVector<f64>>,
    pub tfds_scores: Vec<f64>,
    pub cluster_labels: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Per-candidate diagnostics emitted in run traces.
#[derive(Debug, Clone, Serialize)]
pub struct BlendDiagnostics {
    pub tfds_scores: Vec<f64>,
    pub cluster_labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub uniform_fallback: bool,
}

impl CandidateSet {
    /// Cluster the candidates and attach composite-confidence weights.
    pub fn assemble(
        actions: Vec<DVector<f64>>,
        tfds_scores: Vec<f64>,
        eps: f64,
        min_pts: usize,
        eta_temp: f64,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument("no candidates to blend".into()));
        }
        if actions.len() != tfds_scores.len() {
            return Err(Error::DimensionMismatch {
                what: "tfds scores",
                expected: actions.len(),
                got: tfds_scores.len(),
            });
        }
        if !(eps > 0.0) || !(eta_temp > 0.0) {
            return Err(Error::InvalidArgument(
                "cluster radius and blending temperature must be positive".into(),
            ));
        }
        if tfds_scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument(
                "sensitivity scores must be finite and nonnegative".into(),
            ));
        }
        let cluster_labels = cluster_candidates(&actions, eps, min_pts);
        let weights = (0..actions.len())
            .map(|k| composite_confidence(tfds_scores[k], typicality(&cluster_labels, k), eta_temp))
            .collect();
        Ok(CandidateSet {
            actions,
            tfds_scores,
            cluster_labels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Blended trajectory plus the fallback flag.
#[derive(Debug, Clone)]
pub struct BlendOutcome {
    pub action: DVector<f64>,
    /// Set when all weights underflowed to zero and a uniform average was
    /// used instead.
    pub uniform_fallback: bool,
}

/// Confidence-weighted average `Σ C(a_k)·a_k / Σ C(a_k)`.
///
/// Every coordinate stays in the convex hull of the candidates; with finite
/// scores all weights are strictly positive, so blending never discards a
/// candidate (this is an average, not a selection).
pub fn blend(set: &CandidateSet) -> Result<BlendOutcome> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("no candidates to blend".into()));
    }
    let dim = set.actions[0].len();
    let total: f64 = set.weights.iter().sum();
    let (weights, uniform_fallback) = if total > 0.0 {
        (set.weights.clone(), false)
    } else {
        (vec![1.0; set.len()], true)
    };
    let total: f64 = weights.iter().sum();
    let mut action = DVector::zeros(dim);
    for (w, a) in weights.iter().zip(set.actions.iter()) {
        action += a * (*w / total);
    }
    Ok(BlendOutcome {
        action,
        uniform_fallback,
    })
}
