//! Check every analytic derivative of the denoiser against central finite
//! differences on a randomly initialized model.

use fpg_ops::denoiser::{ActionState, Activation, Condition, Denoiser, ModelDims};
use fpg_ops::gradcheck::{central_diff_grad, central_diff_jacobian, max_rel_error, max_rel_error_vec};
use fpg_ops::rng::derive_rng;
use fpg_ops::schedule::build_cosine_schedule;
use nalgebra::DVector;
use rand::Rng;

fn main() {
    let dims = ModelDims {
        cond_dim: 8,
        horizon: 3,
        hidden_dim: 12,
        latent_dim: 10,
        time_embed_dim: 4,
    };
    let schedule = build_cosine_schedule(5, 0.008).unwrap();
    let model = Denoiser::init(dims, Activation::Tanh, 4).unwrap();
    let mut rng = derive_rng(9, &[0]);
    let cond = Condition::new(DVector::from_fn(dims.cond_dim, |_, _| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let state = ActionState::new(
        DVector::from_fn(dims.action_dim(), |_, _| rng.random_range(-1.0..1.0)),
        3,
    );

    let jc = model.condition_jacobian(&cond, &state).unwrap();
    let fd_c = central_diff_jacobian(
        |c| model.forward(&Condition::new(c.clone()).unwrap(), &state).unwrap().0,
        cond.values(),
        1e-5,
    );
    println!(
        "condition Jacobian   ({}x{}): max rel error {:.3e}",
        jc.nrows(),
        jc.ncols(),
        max_rel_error(&jc, &fd_c)
    );

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
    println!(
        "state Jacobian       ({}x{}): max rel error {:.3e}",
        ja.nrows(),
        ja.ncols(),
        max_rel_error(&ja, &fd_a)
    );

    let fds = model.step_fds(&schedule, &cond, &state).unwrap();
    println!("step sensitivity at t={}: {fds:.6}", state.step);

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
    println!(
        "Fisher normal (exact, double backward): max rel error {:.3e}",
        max_rel_error_vec(&g, &fd_g)
    );

    let g_h = model.fisher_normal_latent(&schedule, &cond, &state).unwrap();
    let lifted = model.head() * &g_h;
    let cosine = lifted.dot(&g) / (lifted.norm() * g.norm()).max(1e-300);
    println!("latent Fisher normal: dim {}, W·g_h vs g_t cosine = {cosine:+.4}", g_h.len());
}
