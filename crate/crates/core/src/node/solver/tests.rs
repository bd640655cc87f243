use rand::Rng as _;

use super::*;
use crate::node::dynamics::{f_theta, DynamicsNet, LinearField};
use crate::rng::rng_from;
use crate::tensorcore::grad_check;

fn decay_field(store: &mut ParamStore) -> LinearField {
    LinearField::register(store, "A", &[-1.0], 1).unwrap()
}

fn random_net(store: &mut ParamStore, h: usize, u: usize, seed: u64, time: Option<f64>) -> DynamicsNet {
    let net = DynamicsNet::register(store, "ode", h, u, time, seed).unwrap();
    let mut rng = rng_from(seed, &[5]);
    for p in store.iter_mut() {
        p.value.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
    }
    net
}

#[test]
fn step_count_rule() {
    let cfg = SolveConfig::default();
    assert_eq!(steps_for_gap(3, 7, &cfg).unwrap(), 4);
    let cfg4 = SolveConfig {
        steps_multiplier: 4,
        ..cfg
    };
    assert_eq!(steps_for_gap(3, 7, &cfg4).unwrap(), 16);
    assert!(matches!(steps_for_gap(7, 7, &cfg), Err(Error::Ordering { .. })));
    assert!(matches!(steps_for_gap(8, 7, &cfg), Err(Error::Ordering { .. })));
}

#[test]
fn f_theta_examples() {
    let mut store = ParamStore::new();
    let net = DynamicsNet::register(&mut store, "ode", 1, 1, None, 0).unwrap();
    store.by_name_mut("ode.W_1").unwrap().value = vec![1.0];
    store.by_name_mut("ode.b_1").unwrap().value = vec![0.0];
    store.by_name_mut("ode.W_2").unwrap().value = vec![1.0];
    store.by_name_mut("ode.b_2").unwrap().value = vec![0.0];
    let out = f_theta(&net, &store, &[0.5]).unwrap();
    assert_eq!(out, vec![0.5f64.tanh()]);
    assert!((out[0] - 0.46212).abs() < 1e-5);

    net.zero_output(&mut store);
    assert_eq!(f_theta(&net, &store, &[3.0]).unwrap(), vec![0.0]);

    let mut store = ParamStore::new();
    let net = DynamicsNet::register(&mut store, "ode", 80, 255, None, 1).unwrap();
    assert_eq!(f_theta(&net, &store, &vec![0.1; 80]).unwrap().len(), 80);
    assert!(matches!(f_theta(&net, &store, &[0.1; 79]), Err(Error::Dimension(_))));
}

#[test]
fn zero_field_leaves_state_unchanged() {
    let mut store = ParamStore::new();
    let net = random_net(&mut store, 3, 4, 2, None);
    net.zero_output(&mut store);
    let h0 = [0.25, -1.5, 3.0];
    assert_eq!(euler_solve_vec(&net, &store, &h0, 0.0, 17.0, 9).unwrap(), h0.to_vec());
}

#[test]
fn constant_field_is_integrated_exactly() {
    let mut store = ParamStore::new();
    let net = DynamicsNet::register(&mut store, "ode", 2, 1, None, 0).unwrap();
    net.zero_output(&mut store);
    store.by_name_mut("ode.b_2").unwrap().value = vec![1.0, 0.0];
    assert_eq!(euler_solve_vec(&net, &store, &[1.0, 2.0], 0.0, 3.0, 3).unwrap(), vec![4.0, 2.0]);
}

#[test]
fn decay_matches_closed_form() {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let h = euler_solve_vec(&field, &store, &[1.0], 0.0, 1.0, 4).unwrap();
    assert_eq!(h, vec![0.31640625]);
}

#[test]
fn first_order_convergence_in_the_asymptotic_range() {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let exact = (-1f64).exp();
    let err = |n| (euler_solve_vec(&field, &store, &[1.0], 0.0, 1.0, n).unwrap()[0] - exact).abs();
    for n in [8, 16, 32, 64] {
        let order = (err(n) / err(2 * n)).log2();
        assert!((0.8..=1.2).contains(&order), "n={n}: order {order}");
    }
}

#[test]
fn solve_is_additive_over_subintervals() {
    let mut store = ParamStore::new();
    let net = random_net(&mut store, 4, 6, 3, None);
    let h0 = [0.3, -0.2, 0.9, 0.05];
    let whole = euler_solve_vec(&net, &store, &h0, 0.0, 5.0, 5).unwrap();
    let mid = euler_solve_vec(&net, &store, &h0, 0.0, 2.0, 2).unwrap();
    let split = euler_solve_vec(&net, &store, &mid, 2.0, 5.0, 3).unwrap();
    assert_eq!(whole, split);
}

#[test]
fn divergence_is_reported() {
    let mut store = ParamStore::new();
    let field = LinearField::register(&mut store, "A", &[50.0], 1).unwrap();
    let r = euler_solve_vec(&field, &store, &[1.0], 0.0, 10.0, 10);
    assert!(matches!(r, Err(Error::Divergence { .. })));
}

#[test]
fn invalid_intervals() {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    assert!(euler_solve_vec(&field, &store, &[1.0], 1.0, 1.0, 3).is_err());
    assert!(euler_solve_vec(&field, &store, &[1.0], 0.0, 1.0, 0).is_err());
}

#[test]
fn zero_field_gradients_are_identity() {
    let mut store = ParamStore::new();
    let net = random_net(&mut store, 3, 5, 8, None);
    net.zero_output(&mut store);
    let h0 = Matrix::row_vector(&[0.1, 0.2, -0.4]);
    let sol = euler_solve(&net, &store, &h0, 0.0, 4.0, 4, true).unwrap();
    let g = Matrix::row_vector(&[1.0, -2.0, 0.5]);
    for mode in [GradientMode::Discrete, GradientMode::Adjoint] {
        store.zero_grads();
        let a0 = ode_gradients(&net, &mut store, &sol, &g, mode).unwrap();
        assert_eq!(a0, g);
        // Only the output layer sees gradient when f ≡ 0 (its input is nonzero);
        // everything upstream of W_2 = 0 receives exactly zero.
        assert!(store.by_name("ode.W_1").unwrap().grad.iter().all(|&v| v == 0.0));
        assert!(store.by_name("ode.b_1").unwrap().grad.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn discrete_gradients_need_the_tape() {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let sol = euler_solve(&field, &store, &Matrix::row_vector(&[1.0]), 0.0, 1.0, 2, false).unwrap();
    let g = Matrix::row_vector(&[1.0]);
    assert!(matches!(
        ode_gradients(&field, &mut store, &sol, &g, GradientMode::Discrete),
        Err(Error::State(_))
    ));
    assert!(ode_gradients(&field, &mut store, &sol, &g, GradientMode::Adjoint).is_ok());
}

/// Loss `⟨w, h(t1)⟩` through a random MLP field; gradients w.r.t. θ and h0.
fn discrete_grad_check(time: Option<f64>, seed: u64) {
    let (hd, u, n) = (3, 4, 5);
    let mut store = ParamStore::new();
    let net = random_net(&mut store, hd, u, seed, time);
    store.insert("h0", vec![1, hd], vec![0.4, -0.3, 0.8]).unwrap();
    let w = Matrix::row_vector(&[0.7, -1.1, 0.4]);
    let loss = |s: &ParamStore| -> Result<f64> {
        let h0 = Matrix::row_vector(&s.by_name("h0").unwrap().value);
        let sol = euler_solve(&net, s, &h0, 1.0, 3.5, n, false)?;
        Ok(crate::tensorcore::dot(sol.h1.as_slice(), w.as_slice()))
    };
    let h0 = Matrix::row_vector(&store.by_name("h0").unwrap().value.clone());
    let sol = euler_solve(&net, &store, &h0, 1.0, 3.5, n, true).unwrap();
    store.zero_grads();
    let a0 = ode_gradients(&net, &mut store, &sol, &w, GradientMode::Discrete).unwrap();
    store.by_name_mut("h0").unwrap().grad = a0.into_vec();
    let report = grad_check(&store, loss, 1e-6).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn discrete_gradients_match_finite_differences() {
    for seed in 0..4 {
        discrete_grad_check(None, seed);
    }
    discrete_grad_check(Some(10.0), 7);
}

/// `dL/dθ` for `f = θh`, `θ = −1`, `L = h(1)`, `h(0) = 1`.
fn decay_param_gradient(n: usize, mode: GradientMode) -> f64 {
    let mut store = ParamStore::new();
    let field = decay_field(&mut store);
    let sol = euler_solve(&field, &store, &Matrix::row_vector(&[1.0]), 0.0, 1.0, n, true).unwrap();
    ode_gradients(&field, &mut store, &sol, &Matrix::row_vector(&[1.0]), mode).unwrap();
    store.by_name("A").unwrap().grad[0]
}

#[test]
fn discrete_parameter_gradient_closed_form() {
    // dL/dθ = Σ_k a_{k+1}·dt·h_k = (1 − dt)^(n−1) on the decay problem.
    for n in [1usize, 2, 4, 8, 16] {
        let dt = 1.0 / n as f64;
        let expected = (1.0 - dt).powi(n as i32 - 1);
        let got = decay_param_gradient(n, GradientMode::Discrete);
        assert!((got - expected).abs() < 1e-14, "n={n}: {got} vs {expected}");
    }
}

#[test]
fn adjoint_gap_halves_per_doubling() {
    // Frozen from the closed forms: discrete (1−dt)^(n−1), adjoint
    // dt(1−dt)^n Σ_{m<n} (1−dt²)^m.
    let frozen = [
        (2usize, 0.5625),
        (4, 0.3174285888671875),
        (8, 0.17138504520883296),
        (16, 0.08947143840724657),
        (32, 0.045771504477988736),
    ];
    let mut prev: Option<f64> = None;
    for (n, expected_gap) in frozen {
        let d = decay_param_gradient(n, GradientMode::Discrete);
        let a = decay_param_gradient(n, GradientMode::Adjoint);
        let gap = (a - d).abs() / d.abs();
        assert!((gap - expected_gap).abs() < 1e-12, "n={n}: gap {gap}");
        if let Some(p) = prev {
            let ratio = p / gap;
            assert!((1.6..=2.4).contains(&ratio), "n={n}: ratio {ratio}");
        }
        prev = Some(gap);
    }
}

#[test]
fn adjoint_approaches_discrete_on_mlp_fields() {
    let gap = |n: usize| {
        let mut grads = Vec::new();
        for mode in [GradientMode::Discrete, GradientMode::Adjoint] {
            let mut store = ParamStore::new();
            let net = random_net(&mut store, 3, 4, 21, None);
            let h0 = Matrix::row_vector(&[0.5, -0.5, 0.2]);
            let sol = euler_solve(&net, &store, &h0, 0.0, 2.0, n, true).unwrap();
            let a0 = ode_gradients(&net, &mut store, &sol, &Matrix::row_vector(&[1.0, 1.0, 1.0]), mode).unwrap();
            let mut all: Vec<f64> = a0.into_vec();
            for p in store.iter() {
                all.extend_from_slice(&p.grad);
            }
            grads.push(all);
        }
        let num: f64 = grads[0].iter().zip(&grads[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = grads[0].iter().map(|a| a * a).sum::<f64>().sqrt();
        num / den
    };
    let gaps: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| gap(n)).collect();
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "gaps {gaps:?}");
    }
}
