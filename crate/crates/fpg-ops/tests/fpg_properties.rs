//! Geometric properties of the Fisher-preserving update: descent quality,
//! drift orders, and the intrinsic-safety decomposition.

use fpg_ops::denoiser::{ActionState, Activation, Condition, Denoiser, ModelDims};
use fpg_ops::fpg::{project_exact, GuidanceGradient};
use fpg_ops::gradcheck::log_log_slope;
use fpg_ops::rng::derive_rng;
use fpg_ops::schedule::build_cosine_schedule;
use nalgebra::DVector;
use rand::Rng;

fn dims() -> ModelDims {
    ModelDims {
        cond_dim: 8,
        horizon: 4,
        hidden_dim: 14,
        latent_dim: 10,
        time_embed_dim: 4,
    }
}

fn setup(seed: u64) -> (Denoiser, Condition, ActionState) {
    let model = Denoiser::init(dims(), Activation::Tanh, seed).unwrap();
    let mut rng = derive_rng(seed, &[100]);
    let cond = Condition::new(DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let state = ActionState::new(DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0)), 2);
    (model, cond, state)
}

/// Random gradient with a guaranteed component along the Fisher normal.
fn gradient_with_normal_component(
    seed: u64,
    normal: &DVector<f64>,
) -> GuidanceGradient {
    let mut rng = derive_rng(seed, &[101]);
    let v = DVector::from_fn(normal.len(), |_, _| rng.random_range(-1.0..1.0));
    let u = &v + normal * (0.5 * v.norm() / normal.norm());
    GuidanceGradient::new(u, "synthetic").unwrap()
}

#[test]
fn projected_update_suppresses_first_order_fisher_drift() {
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let gammas = [0.04, 0.02, 0.01, 0.005];
    for seed in 0..8u64 {
        let (model, cond, state) = setup(300 + seed);
        let base = model.step_fds(&schedule, &cond, &state).unwrap();
        let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        let u = gradient_with_normal_component(seed, &normal);
        let projected = project_exact(&u, &normal);
        assert!(!projected.degenerate);

        let drift = |delta: &DVector<f64>, gamma: f64| -> f64 {
            let mut s = state.clone();
            s.values -= delta * gamma;
            (model.step_fds(&schedule, &cond, &s).unwrap() - base).abs()
        };

        let fpg: Vec<f64> = gammas.iter().map(|&g| drift(&projected.delta, g)).collect();
        let raw: Vec<f64> = gammas.iter().map(|&g| drift(&u.values, g)).collect();
        let fpg_slope = log_log_slope(&gammas, &fpg);
        let raw_slope = log_log_slope(&gammas, &raw);
        assert!(
            fpg_slope >= 1.8,
            "seed {seed}: projected drift slope {fpg_slope} below second order"
        );
        assert!(
            (0.8..=1.2).contains(&raw_slope),
            "seed {seed}: raw drift slope {raw_slope} not first order"
        );
    }
}

#[test]
fn projected_step_descends_the_loss_to_first_order() {
    // L(a − γΔ) − L(a) = −γ‖u⊥‖² + O(γ²) against a smooth non-quadratic loss.
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    for seed in 0..8u64 {
        let (model, cond, state) = setup(400 + seed);
        let mut rng = derive_rng(seed, &[102]);
        let anchor = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let loss = |a: &DVector<f64>| -> f64 {
            (a - &anchor).norm_squared() + 0.3 * a.iter().map(|v| v.sin()).sum::<f64>()
        };
        let grad_at = |a: &DVector<f64>| -> DVector<f64> {
            (a - &anchor) * 2.0 + DVector::from_fn(8, |i, _| 0.3 * a[i].cos())
        };

        let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        let u = GuidanceGradient::new(grad_at(&state.values), "loss").unwrap();
        let p = project_exact(&u, &normal);
        let perp_sq = p.delta.norm_squared();
        if perp_sq < 1e-10 {
            continue;
        }

        let gammas = [0.02, 0.01, 0.005, 0.0025];
        let remainders: Vec<f64> = gammas
            .iter()
            .map(|&g| {
                let stepped = &state.values - &p.delta * g;
                (loss(&stepped) - loss(&state.values) + g * perp_sq).abs()
            })
            .collect();
        let slope = log_log_slope(&gammas, &remainders);
        assert!(
            slope >= 1.8,
            "seed {seed}: descent remainder slope {slope} not second order"
        );
        // And the step actually decreases the loss.
        let stepped = &state.values - &p.delta * 0.01;
        assert!(loss(&stepped) < loss(&state.values));
    }
}

#[test]
fn projection_is_steepest_tangent_descent() {
    // No tangent direction improves on −u⊥/‖u⊥‖ to first order.
    let (model, cond, state) = setup(512);
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
    let u = gradient_with_normal_component(512, &normal);
    let p = project_exact(&u, &normal);
    let best = u.values.dot(&(-&p.delta / p.delta.norm()));

    let mut rng = derive_rng(513, &[0]);
    for _ in 0..1000 {
        let v = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let tangent = project_exact(
            &GuidanceGradient::new(v, "probe").unwrap(),
            &normal,
        )
        .delta;
        if tangent.norm() < 1e-12 {
            continue;
        }
        let dir = &tangent / tangent.norm();
        assert!(normal.dot(&dir).abs() <= 1e-8 * normal.norm());
        assert!(
            u.values.dot(&dir) >= best - 1e-6,
            "tangent direction beats the projected gradient"
        );
    }
}

#[test]
fn intrinsic_safety_of_the_orthogonal_component() {
    // Split a perturbation into components along and across the Fisher
    // normal with equal norms: the aligned part moves the sensitivity at
    // first order, the orthogonal part only at second order.
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let gammas = [0.04, 0.02, 0.01, 0.005];
    for seed in 0..6u64 {
        let (model, cond, state) = setup(600 + seed);
        let base = model.step_fds(&schedule, &cond, &state).unwrap();
        let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        let u = gradient_with_normal_component(seed, &normal);
        let p = project_exact(&u, &normal);
        let perp = &p.delta / p.delta.norm();
        let par = &normal / normal.norm();

        let drift = |dir: &DVector<f64>, gamma: f64| -> f64 {
            let mut s = state.clone();
            s.values += dir * gamma;
            (model.step_fds(&schedule, &cond, &s).unwrap() - base).abs()
        };
        let par_drift: Vec<f64> = gammas.iter().map(|&g| drift(&par, g)).collect();
        let perp_drift: Vec<f64> = gammas.iter().map(|&g| drift(&perp, g)).collect();
        let par_slope = log_log_slope(&gammas, &par_drift);
        let perp_slope = log_log_slope(&gammas, &perp_drift);
        assert!(
            (0.8..=1.2).contains(&par_slope),
            "seed {seed}: aligned drift slope {par_slope}"
        );
        assert!(
            perp_slope >= 1.8,
            "seed {seed}: orthogonal drift slope {perp_slope}"
        );
    }
}
