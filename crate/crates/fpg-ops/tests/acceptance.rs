//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantities.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line;
//! the end-to-end benchmark criterion trains a desk-scale model and is the
//! long pole (several minutes).

use fpg_ops::blending::{blend, CandidateSet};
use fpg_ops::denoiser::{ActionState, Activation, Condition, Denoiser, ModelDims};
use fpg_ops::fds::{chain_jacobian, hutchinson_frobenius_sq, FdsReport, Propagation};
use fpg_ops::fpg::{
    project_exact, project_ops, reverse_mean, GuidanceGradient, GuidanceMode, Solver,
};
use fpg_ops::gradcheck::{
    central_diff_grad, central_diff_jacobian, log_log_slope, max_rel_error, max_rel_error_vec,
};
use fpg_ops::harness::{run_benchmark, RunConfig};
use fpg_ops::maze::{generate_world, tsdf_loss, Trajectory, WorldParams};
use fpg_ops::rng::derive_rng;
use fpg_ops::schedule::{build_cosine_schedule, build_linear_schedule, ScheduleConfig};
use fpg_ops::training::{train_on_dataset, TrainConfig};
use nalgebra::DVector;
use rand::Rng;

fn small_dims(seed: u64) -> ModelDims {
    // Vary the sizes a little across trials.
    let mut rng = derive_rng(seed, &[0xd1]);
    ModelDims {
        cond_dim: rng.random_range(4..10),
        horizon: rng.random_range(2..5),
        hidden_dim: rng.random_range(8..16),
        latent_dim: rng.random_range(4..12),
        time_embed_dim: 4,
    }
}

fn random_model_inputs(seed: u64, total_steps: usize) -> (Denoiser, Condition, ActionState) {
    let dims = small_dims(seed);
    let model = Denoiser::init(dims, Activation::Tanh, seed).unwrap();
    let mut rng = derive_rng(seed, &[0xd2]);
    let cond = Condition::new(DVector::from_fn(dims.cond_dim, |_, _| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let state = ActionState::new(
        DVector::from_fn(dims.action_dim(), |_, _| rng.random_range(-1.0..1.0)),
        1 + (seed as usize % total_steps),
    );
    (model, cond, state)
}

#[test]
fn criterion_1_exact_orthogonality() {
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let mut worst = 0.0f64;
    let mut projected = 0usize;
    for seed in 0..1000u64 {
        let (model, cond, state) = random_model_inputs(seed, 5);
        let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        let mut rng = derive_rng(seed, &[0xd3]);
        let u = GuidanceGradient::new(
            DVector::from_fn(model.dims().action_dim(), |_, _| rng.random_range(-1.0..1.0)),
            "acceptance",
        )
        .unwrap();
        let p = project_exact(&u, &normal);
        if p.degenerate {
            continue;
        }
        projected += 1;
        let ratio = normal.dot(&p.delta).abs() / (normal.norm() * p.delta.norm() + 1e-30);
        worst = worst.max(ratio);
    }
    println!(
        "ACCEPTANCE 1 exact orthogonality: {} over {projected}/1000 trials, worst |g·Δ|/(‖g‖‖Δ‖) = {worst:.3e} (limit 1e-8)",
        if worst <= 1e-8 { "PASS" } else { "FAIL" }
    );
    assert!(projected >= 990, "too many degenerate normals");
    assert!(worst <= 1e-8);
}

#[test]
fn criterion_2_ops_orthogonality() {
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let (model, cond, state) = random_model_inputs(7000 + seed, 5);
        let g_h = model.fisher_normal_latent(&schedule, &cond, &state).unwrap();
        let metric = model.pullback_metric();
        if g_h.dot(&(metric * &g_h)) <= 1e-12 {
            continue;
        }
        let mut rng = derive_rng(seed, &[0xd4]);
        let u = GuidanceGradient::new(
            DVector::from_fn(model.dims().action_dim(), |_, _| rng.random_range(-1.0..1.0)),
            "acceptance",
        )
        .unwrap();
        let p = project_ops(&u, &model, &g_h).unwrap();
        // Independent recomputation of the residual in latent coordinates.
        let u_perp = model.head().tr_mul(&u.values)
            - &g_h * (g_h.dot(&(metric * model.head().tr_mul(&u.values))) / g_h.dot(&(metric * &g_h)));
        let residual = g_h.dot(&(metric * &u_perp)).abs();
        let m_norm = |x: &DVector<f64>| x.dot(&(metric * x)).max(0.0).sqrt();
        let scale = m_norm(&g_h) * m_norm(&model.head().tr_mul(&u.values)) + 1e-30;
        worst = worst.max(residual / scale);
        assert!(!p.degenerate);
    }
    println!(
        "ACCEPTANCE 2 head-space orthogonality: {} worst relative residual = {worst:.3e} (limit 1e-10)",
        if worst <= 1e-10 { "PASS" } else { "FAIL" }
    );
    assert!(worst <= 1e-10);
}

#[test]
fn criterion_3_second_order_fisher_drift() {
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let gammas = [0.04, 0.02, 0.01, 0.005];
    let mut min_fpg_slope = f64::INFINITY;
    let mut raw_range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..12u64 {
        let (model, cond, state) = random_model_inputs(200 + seed, 5);
        let base = model.step_fds(&schedule, &cond, &state).unwrap();
        let normal = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        // Guidance gradient with a guaranteed Fisher-aligned component so the
        // raw branch has first-order drift.
        let mut rng = derive_rng(seed, &[0xd5]);
        let v = DVector::from_fn(model.dims().action_dim(), |_, _| rng.random_range(-1.0..1.0));
        let u = GuidanceGradient::new(&v + &normal * (0.5 * v.norm() / normal.norm()), "drift")
            .unwrap();
        let p = project_exact(&u, &normal);

        let drift = |delta: &DVector<f64>, gamma: f64| {
            let mut s = state.clone();
            s.values -= delta * gamma;
            (model.step_fds(&schedule, &cond, &s).unwrap() - base).abs()
        };
        let fpg: Vec<f64> = gammas.iter().map(|&g| drift(&p.delta, g)).collect();
        let raw: Vec<f64> = gammas.iter().map(|&g| drift(&u.values, g)).collect();
        let fpg_slope = log_log_slope(&gammas, &fpg);
        let raw_slope = log_log_slope(&gammas, &raw);
        min_fpg_slope = min_fpg_slope.min(fpg_slope);
        raw_range = (raw_range.0.min(raw_slope), raw_range.1.max(raw_slope));
    }
    let pass = min_fpg_slope >= 1.8 && raw_range.0 >= 0.8 && raw_range.1 <= 1.2;
    println!(
        "ACCEPTANCE 3 Fisher drift orders: {} projected slope ≥ {min_fpg_slope:.3} (limit 1.8), raw slopes in [{:.3}, {:.3}] (limits [0.8, 1.2])",
        if pass { "PASS" } else { "FAIL" },
        raw_range.0,
        raw_range.1
    );
    assert!(pass);
}

#[test]
fn criterion_4_jacobians_match_finite_differences() {
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let (model, cond, state) = random_model_inputs(400 + seed, 5);

        let jc = model.condition_jacobian(&cond, &state).unwrap();
        let fd_c = central_diff_jacobian(
            |c| model.forward(&Condition::new(c.clone()).unwrap(), &state).unwrap().0,
            cond.values(),
            1e-5,
        );
        worst = worst.max(max_rel_error(&jc, &fd_c));

        let ja = model.state_jacobian(&cond, &state).unwrap();
        let fd_a = central_diff_jacobian(
            |a| {
                model
                    .forward(&cond, &ActionState::new(a.clone(), state.step))
                    .unwrap()
                    .0
            },
            &state.values,
            1e-5,
        );
        worst = worst.max(max_rel_error(&ja, &fd_a));

        let g = model.fisher_normal_exact(&schedule, &cond, &state).unwrap();
        let fd_g = central_diff_grad(
            |a| {
                model
                    .step_fds(&schedule, &cond, &ActionState::new(a.clone(), state.step))
                    .unwrap()
            },
            &state.values,
            1e-4,
        );
        worst = worst.max(max_rel_error_vec(&g, &fd_g));
    }

    // Clearance-loss gradient against finite differences, waypoints placed
    // strictly inside interpolation cells.
    let params = WorldParams {
        grid_size: 32,
        horizon: 4,
        obstacle_density: 0.14,
        inflation_radius: 1.5,
        truncation_radius: 6.0,
        min_separation: 0.6,
        max_attempts: 16,
    };
    let world = generate_world(5, &params).unwrap();
    let cell = world.cell_size();
    let mu = 1.5 * cell;
    let tau = 0.5 * cell;
    let traj = Trajectory::new(vec![
        [-1.0 + 10.3 * cell, -1.0 + 12.6 * cell],
        [-1.0 + 14.7 * cell, -1.0 + 15.2 * cell],
        [-1.0 + 20.4 * cell, -1.0 + 18.8 * cell],
        [-1.0 + 24.6 * cell, -1.0 + 22.3 * cell],
    ]);
    let (_, grad) = tsdf_loss(&world, &traj, mu, tau);
    let fd = central_diff_grad(
        |flat| tsdf_loss(&world, &Trajectory::from_flat(flat).unwrap(), mu, tau).0,
        &traj.flatten(),
        1e-7,
    );
    let fd_scale = fd.abs().max().max(1e-12);
    let tsdf_err = (grad - fd).abs().max() / fd_scale;

    let pass = worst <= 1e-4 && tsdf_err <= 1e-4;
    println!(
        "ACCEPTANCE 4 derivative oracles: {} worst model-derivative error {worst:.3e}, clearance-gradient error {tsdf_err:.3e} (limit 1e-4)",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_5_hutchinson_estimator() {
    // Fixed explicit Jacobian.
    let j = nalgebra::DMatrix::from_row_slice(
        4,
        3,
        &[0.5, -1.0, 2.0, 0.1, 0.0, -0.7, 1.3, 0.4, -0.2, 0.8, -0.6, 0.9],
    );
    let exact: f64 = j.iter().map(|v| v * v).sum();
    let mut rng = derive_rng(777, &[0]);
    let estimate = hutchinson_frobenius_sq(|v| j.tr_mul(v), 4, 10_000, &mut rng);
    let rel = (estimate - exact).abs() / exact;

    // Variance scaling: sample variance of independent estimates at growing
    // probe counts follows probes^{-1}.
    let probe_counts = [4usize, 16, 64, 256];
    let replicates = 300;
    let mut variances = Vec::new();
    for (ci, &count) in probe_counts.iter().enumerate() {
        let mut estimates = Vec::with_capacity(replicates);
        for r in 0..replicates {
            let mut rng = derive_rng(888, &[ci as u64, r as u64]);
            estimates.push(hutchinson_frobenius_sq(|v| j.tr_mul(v), 4, count, &mut rng));
        }
        let mean = estimates.iter().sum::<f64>() / replicates as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
            / (replicates - 1) as f64;
        variances.push(var);
    }
    let xs: Vec<f64> = probe_counts.iter().map(|&c| c as f64).collect();
    let slope = log_log_slope(&xs, &variances);

    let pass = rel < 0.05 && (-1.2..=-0.8).contains(&slope);
    println!(
        "ACCEPTANCE 5 Hutchinson estimator: {} 10k-probe error {:.2}% (limit 5%), variance slope {slope:.3} (limits [-1.2, -0.8])",
        if pass { "PASS" } else { "FAIL" },
        rel * 100.0
    );
    assert!(pass);
}

#[test]
fn criterion_6_truncation_bound() {
    let mut rng = derive_rng(901, &[0]);
    let mut checked = 0;
    for trial in 0..100u64 {
        let total = rng.random_range(3..=12usize);
        let schedule = if trial % 2 == 0 {
            build_cosine_schedule(total, 0.008).unwrap()
        } else {
            build_linear_schedule(total, 1e-3, rng.random_range(0.05..0.6)).unwrap()
        };
        let (model, cond, _) = random_model_inputs(600 + trial, total);
        // Per-step sensitivity scores along a random state sequence.
        let mut scores = Vec::with_capacity(total);
        for t in 1..=total {
            let state = ActionState::new(
                DVector::from_fn(model.dims().action_dim(), |_, _| rng.random_range(-1.0..1.0)),
                t,
            );
            scores.push(model.step_fds(&schedule, &cond, &state).unwrap());
        }
        let m = rng.random_range(1..=total);
        let report = FdsReport::from_scores(&schedule, &scores, m).unwrap();
        if let Some(bound) = report.eta_bound {
            assert!(
                report.eta <= bound + 1e-12,
                "trial {trial}: eta {} exceeds bound {}",
                report.eta,
                bound
            );
            checked += 1;
        }
    }

    // Reference point: the schedule weight ratio for the cosine schedule at
    // T=10, M=4, reported against the 8.4% literature figure (informational;
    // the schedule parameters behind that figure are unstated).
    let schedule = build_cosine_schedule(10, 0.008).unwrap();
    let (head, tail) = schedule.head_tail_weight_sums(4).unwrap();
    println!(
        "ACCEPTANCE 6 truncation bound: PASS eta ≤ bound on {checked}/100 configurations; cosine T=10 M=4 weight ratio = {:.4} (reference 0.084)",
        head / tail
    );
    assert!(checked >= 95);
}

#[test]
fn criterion_7_chain_rule_oracle() {
    // T=3, D_a=4, D_c=3: the full-operator chain Jacobian equals brute-force
    // differentiation of the unrolled deterministic chain.
    let dims = ModelDims {
        cond_dim: 3,
        horizon: 2,
        hidden_dim: 6,
        latent_dim: 5,
        time_embed_dim: 2,
    };
    let total = 3;
    let mut worst = 0.0f64;
    for (seed, solver) in [(11u64, Solver::Ddpm), (12, Solver::Ddim), (13, Solver::Ddpm)] {
        let schedule = build_cosine_schedule(total, 0.008).unwrap();
        let model = Denoiser::init(dims, Activation::Tanh, seed).unwrap();
        let mut rng = derive_rng(seed, &[0xd7]);
        let cond = Condition::new(DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let a_init = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));

        let mut states = Vec::new();
        let mut a = a_init.clone();
        for t in (1..=total).rev() {
            let state = ActionState::new(a.clone(), t);
            let (eps, _) = model.forward(&cond, &state).unwrap();
            a = reverse_mean(solver, &schedule, &a, &eps, t);
            states.push(state);
        }
        let chain = chain_jacobian(&model, &schedule, &cond, &states, solver, Propagation::Full)
            .unwrap();
        let fd = central_diff_jacobian(
            |c| {
                let cond = Condition::new(c.clone()).unwrap();
                let mut a = a_init.clone();
                for t in (1..=total).rev() {
                    let (eps, _) = model.forward(&cond, &ActionState::new(a.clone(), t)).unwrap();
                    a = reverse_mean(solver, &schedule, &a, &eps, t);
                }
                a
            },
            cond.values(),
            1e-5,
        );
        worst = worst.max(max_rel_error(&chain, &fd));
    }
    println!(
        "ACCEPTANCE 7 chain-rule oracle: {} worst relative error {worst:.3e} (limit 1e-6)",
        if worst <= 1e-6 { "PASS" } else { "FAIL" }
    );
    assert!(worst <= 1e-6);
}

#[test]
fn criterion_8_blending_exactness() {
    let mut rng = derive_rng(1001, &[0]);

    // Identity on identical candidates.
    let point = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
    let set = CandidateSet::assemble(vec![point.clone(); 4], vec![0.3; 4], 0.5, 2, 5.0).unwrap();
    let out = blend(&set).unwrap();
    let identity_err = (out.action - &point).abs().max();

    // Permutation invariance and convex hull over random sets.
    let mut perm_err = 0.0f64;
    let mut hull_ok = true;
    for _ in 0..200 {
        let k = rng.random_range(2..7usize);
        let actions: Vec<DVector<f64>> = (0..k)
            .map(|_| DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.0)).collect();
        let set = CandidateSet::assemble(actions.clone(), scores.clone(), 0.5, 2, 5.0).unwrap();
        let base = blend(&set).unwrap().action;

        let shift = rng.random_range(1..k);
        let perm: Vec<usize> = (0..k).map(|i| (i + shift) % k).collect();
        let p_set = CandidateSet::assemble(
            perm.iter().map(|&i| actions[i].clone()).collect(),
            perm.iter().map(|&i| scores[i]).collect(),
            0.5,
            2,
            5.0,
        )
        .unwrap();
        let permuted = blend(&p_set).unwrap().action;
        perm_err = perm_err.max((base.clone() - permuted).abs().max());

        for coord in 0..6 {
            let lo = actions.iter().map(|a| a[coord]).fold(f64::INFINITY, f64::min);
            let hi = actions.iter().map(|a| a[coord]).fold(f64::NEG_INFINITY, f64::max);
            if base[coord] < lo - 1e-12 || base[coord] > hi + 1e-12 {
                hull_ok = false;
            }
        }
    }

    let pass = identity_err <= 1e-12 && perm_err <= 1e-12 && hull_ok;
    println!(
        "ACCEPTANCE 8 blending exactness: {} identity error {identity_err:.2e}, permutation error {perm_err:.2e}, hull containment {hull_ok}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_10_pipeline_determinism() {
    let params = WorldParams {
        grid_size: 32,
        horizon: 8,
        obstacle_density: 0.12,
        inflation_radius: 1.5,
        truncation_radius: 6.0,
        min_separation: 0.6,
        max_attempts: 16,
    };
    let run_once = || {
        let dataset = fpg_ops::harness::Dataset::generate(42, 16, &params).unwrap();
        let dataset_bytes = dataset.to_bytes();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 9,
            schedule: ScheduleConfig::Cosine {
                total_steps: 5,
                offset: 0.008,
            },
            dims: ModelDims {
                cond_dim: 260,
                horizon: 8,
                hidden_dim: 24,
                latent_dim: 12,
                time_embed_dim: 8,
            },
            ..TrainConfig::default()
        };
        let outcome = train_on_dataset(&config, &dataset).unwrap();
        let ckpt_bytes = fpg_ops::harness::checkpoint::checkpoint_bytes(
            &outcome.model,
            &config.schedule,
            config.seed,
            Some(&config),
        )
        .unwrap();
        let run_config = RunConfig {
            world: params,
            schedule: config.schedule.clone(),
            tail_len: 2,
            eval_worlds: 3,
            ..RunConfig::default()
        };
        let report = run_benchmark(
            &outcome.model,
            &outcome.schedule,
            &run_config,
            &[GuidanceMode::None, GuidanceMode::FpgOps],
        )
        .unwrap();
        let report_json = serde_json::to_string(&report).unwrap();
        (dataset_bytes, ckpt_bytes, report_json)
    };
    let (d1, c1, r1) = run_once();
    let (d2, c2, r2) = run_once();
    let pass = d1 == d2 && c1 == c2 && r1 == r2;
    println!(
        "ACCEPTANCE 10 determinism: {} dataset bytes {}, checkpoint bytes {}, results JSON {}",
        if pass { "PASS" } else { "FAIL" },
        if d1 == d2 { "identical" } else { "DIFFER" },
        if c1 == c2 { "identical" } else { "DIFFER" },
        if r1 == r2 { "identical" } else { "DIFFER" },
    );
    assert!(pass);
}
