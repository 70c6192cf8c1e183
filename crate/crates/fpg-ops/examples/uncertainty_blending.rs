//! Cluster synthetic candidates, score them, and blend: the second stage of
//! the inference pipeline in isolation.

use fpg_ops::blending::{blend, cluster_candidates, composite_confidence, typicality, CandidateSet};
use fpg_ops::rng::derive_rng;
use nalgebra::DVector;
use rand::Rng;

fn main() {
    let mut rng = derive_rng(3, &[0]);
    // Two modes: five candidates near one corridor, two near another, plus a
    // stray sample. Sensitivity scores favor the big cluster.
    let mut actions: Vec<DVector<f64>> = Vec::new();
    let mut scores = Vec::new();
    for i in 0..5 {
        actions.push(DVector::from_fn(8, |j, _| {
            0.3 + 0.02 * (i as f64) + 0.01 * (j as f64) + rng.random_range(-0.02..0.02)
        }));
        scores.push(rng.random_range(0.05..0.15));
    }
    for i in 0..2 {
        actions.push(DVector::from_fn(8, |j, _| {
            -0.6 - 0.02 * (i as f64) + 0.015 * (j as f64) + rng.random_range(-0.02..0.02)
        }));
        scores.push(rng.random_range(0.2..0.3));
    }
    actions.push(DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0)));
    scores.push(0.8);

    let eps = 0.5;
    let labels = cluster_candidates(&actions, eps, 2);
    println!("cluster labels: {labels:?}");
    for (k, score) in scores.iter().enumerate() {
        let typ = typicality(&labels, k);
        let conf = composite_confidence(*score, typ, 5.0);
        println!(
            "  candidate {k}: sensitivity {score:.3}, typicality {typ:.3}, confidence {conf:.4}"
        );
    }

    let set = CandidateSet::assemble(actions, scores, eps, 2, 5.0).unwrap();
    let out = blend(&set).unwrap();
    println!(
        "\nblended (uniform fallback: {}): first coords = [{:.3}, {:.3}, {:.3}…]",
        out.uniform_fallback, out.action[0], out.action[1], out.action[2]
    );
    println!("the blend sits inside the dominant cluster, pulled by confidence weights");
}
