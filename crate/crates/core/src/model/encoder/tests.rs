
use super::*;
use crate::model::config::TimeFeatures;
use crate::node::SolveConfig;
use crate::model::gradcheck::{self, randomize, toy_config, toy_series};
use crate::train::loss::batch_cross_entropy;

fn series(id: &str, label: usize, times: &[usize], horizon: usize, d: usize, seed: u64) -> TimeSeries {
    toy_series(id, label, times, horizon, d, seed)
}

fn small_config(cell: CellKind, ode: bool, tf: TimeFeatures) -> ModelConfig {
    toy_config(cell, ode, tf)
}

fn model_grad_check(cfg: ModelConfig, batch: &[&TimeSeries]) -> crate::tensorcore::GradCheckReport {
    gradcheck::model_grad_check(cfg, batch, 1e-4).unwrap()
}

#[test]
fn full_model_gradients_single_series() {
    let s = series("toy", 2, &[0, 2, 5], 7, 3, 1);
    for cell in [CellKind::Tanh, CellKind::Lstm, CellKind::Gru] {
        for ode in [true, false] {
            for tf in [TimeFeatures::None, TimeFeatures::DeltaT, TimeFeatures::Pe] {
                let report = model_grad_check(small_config(cell, ode, tf), &[&s]);
                assert!(report.pass, "{cell} ode={ode} {tf}: {report:?}");
                assert!(report.max_rel_err < 1e-4);
            }
        }
    }
}

#[test]
fn full_model_gradients_with_batch_statistics() {
    let a = series("a", 0, &[0, 2, 5], 7, 3, 1);
    let b = series("b", 1, &[1, 2, 6], 7, 3, 2);
    let c = series("c", 2, &[0, 5], 7, 3, 3);
    for cell in [CellKind::Tanh, CellKind::Lstm, CellKind::Gru] {
        for ode in [true, false] {
            let report = model_grad_check(small_config(cell, ode, TimeFeatures::DeltaT), &[&a, &b, &c]);
            assert!(report.pass, "{cell} ode={ode}: {report:?}");
        }
    }
    let deep = ModelConfig {
        gating: crate::cells::GatingConfig { depth: 2, width: 3 },
        time_input: true,
        time_scale: 10.0,
        solve: SolveConfig {
            steps_multiplier: 2,
            ..SolveConfig::default()
        },
        ..small_config(CellKind::Gru, true, TimeFeatures::Pe)
    };
    let report = model_grad_check(deep, &[&a, &b, &c]);
    assert!(report.pass, "{report:?}");
}

#[test]
fn trace_follows_the_step_rule() {
    let net = Network::build(small_config(CellKind::Gru, true, TimeFeatures::None)).unwrap();
    let s = series("t", 0, &[0, 2, 5], 8, 3, 0);
    let fwd = net.0.forward(&net.1, &[&s], &ForwardOptions::eval()).unwrap();
    assert_eq!((fwd.solver_steps, fwd.updates), (8, 3));

    let single = series("one", 0, &[0], 0, 3, 0);
    let fwd = net.0.forward(&net.1, &[&single], &ForwardOptions::eval()).unwrap();
    assert_eq!((fwd.solver_steps, fwd.updates), (0, 1));

    let mut cfg = small_config(CellKind::Gru, true, TimeFeatures::None);
    cfg.solve.steps_multiplier = 3;
    let net = Network::build(cfg).unwrap();
    let fwd = net.0.forward(&net.1, &[&s], &ForwardOptions::eval()).unwrap();
    assert_eq!(fwd.solver_steps, 24);
}

#[test]
fn zero_dynamics_match_the_plain_recurrent_baseline() {
    for cell in [CellKind::Tanh, CellKind::Lstm, CellKind::Gru] {
        let (ode_net, mut ode_store) = Network::build(small_config(cell, true, TimeFeatures::None)).unwrap();
        let (rnn_net, rnn_store) = Network::build(small_config(cell, false, TimeFeatures::None)).unwrap();
        ode_net.dynamics.as_ref().unwrap().zero_output(&mut ode_store);
        let batch: Vec<TimeSeries> = (0..6)
            .map(|i| series(&format!("z{i}"), i % 3, &[i % 3, 4, 6 + i % 2], 9, 3, i as u64))
            .collect();
        let refs: Vec<&TimeSeries> = batch.iter().collect();
        for mode in [BnMode::Eval, BnMode::Train] {
            let opts = ForwardOptions {
                mode,
                record: true,
                ..ForwardOptions::eval()
            };
            let a = ode_net.forward(&ode_store, &refs, &opts).unwrap();
            let b = rnn_net.forward(&rnn_store, &refs, &opts).unwrap();
            assert_eq!(a.trajectories, b.trajectories);
            assert_eq!(a.logits, b.logits);
        }
    }
}

#[test]
fn horizon_dependence() {
    let s = series("h", 0, &[0, 3], 5, 3, 4);
    for ode in [false, true] {
        let mut enc = SequenceEncoder::new(small_config(CellKind::Gru, ode, TimeFeatures::None)).unwrap();
        randomize(&mut enc.params, 9, 0.5);
        let a = enc.encode(&s, 3).unwrap();
        let b = enc.encode(&s, 9).unwrap();
        assert_eq!(a == b, !ode, "ode={ode}");
    }
    let enc = SequenceEncoder::new(small_config(CellKind::Gru, true, TimeFeatures::None)).unwrap();
    assert!(matches!(enc.encode(&s, 2), Err(Error::Ordering { .. })));
}

#[test]
fn channel_mean_extrapolation_depends_on_horizon() {
    let mut cfg = small_config(CellKind::Gru, false, TimeFeatures::DeltaT);
    cfg.extrapolation = Extrapolation::ChannelMean;
    let mut enc = SequenceEncoder::new(cfg).unwrap();
    let s = series("m", 0, &[0, 3], 6, 3, 4);
    assert!(matches!(enc.encode(&s, 6), Err(Error::State(_))));
    assert!(enc.encode(&s, 3).is_ok());
    enc.net.channel_means = Some(vec![0.2, -0.1, 0.4]);
    assert_ne!(enc.encode(&s, 3).unwrap(), enc.encode(&s, 6).unwrap());
}

#[test]
fn encoding_is_deterministic_and_batch_independent() {
    let mut enc = SequenceEncoder::new(small_config(CellKind::Lstm, true, TimeFeatures::Pe)).unwrap();
    randomize(&mut enc.params, 5, 0.5);
    let batch: Vec<TimeSeries> = (0..5)
        .map(|i| series(&format!("d{i}"), 0, &[i, 5 + i], 12 + i, 3, i as u64))
        .collect();
    let refs: Vec<&TimeSeries> = batch.iter().collect();
    let together = enc.predict_batch(&refs).unwrap();
    for (i, s) in batch.iter().enumerate() {
        let (_, alone) = enc.predict(s).unwrap();
        assert_eq!(alone.as_slice(), together.row(i));
        assert_eq!(enc.encode(s, s.horizon).unwrap(), enc.encode(s, s.horizon).unwrap());
    }
}

#[test]
fn classifier_head_properties() {
    let mut enc = SequenceEncoder::new(small_config(CellKind::Gru, true, TimeFeatures::None)).unwrap();
    randomize(&mut enc.params, 2, 1.0);
    let p = enc.classify(&[0.3, -1.0, 2.0, 0.1]).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let head = enc.net.head.clone();
    enc.params.get_mut(head.weight).value.iter_mut().for_each(|v| *v = 0.0);
    enc.params.get_mut(head.bias.unwrap()).value.iter_mut().for_each(|v| *v = 0.0);
    let s = series("u", 1, &[0, 1], 4, 3, 0);
    let (label, probs) = enc.predict(&s).unwrap();
    assert_eq!(label, 0);
    assert!(probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
    assert!(matches!(enc.classify(&[0.0; 3]), Err(Error::Dimension(_))));
    let wrong = series("w", 0, &[0], 2, 4, 0);
    assert!(matches!(enc.predict(&wrong), Err(Error::Dimension(_))));
}

#[test]
fn adjoint_model_gradients_approach_discrete_ones() {
    let a = series("a", 0, &[0, 3], 6, 3, 1);
    let b = series("b", 1, &[2, 5], 6, 3, 2);
    let gap = |m: usize| {
        let mut grads = Vec::new();
        for mode in [GradientMode::Discrete, GradientMode::Adjoint] {
            let mut cfg = small_config(CellKind::Gru, true, TimeFeatures::None);
            cfg.solve = SolveConfig {
                steps_multiplier: m,
                gradient_mode: mode,
            };
            let (net, mut store) = Network::build(cfg).unwrap();
            randomize(&mut store, 4, 0.5);
            let fwd = net.forward(&store, &[&a, &b], &ForwardOptions::train(0)).unwrap();
            let (_, dl) = batch_cross_entropy(&fwd.probs, &[0, 1]).unwrap();
            net.backward(&mut store, &fwd, &dl).unwrap();
            grads.push(store.iter().flat_map(|p| p.grad.clone()).collect::<Vec<f64>>());
        }
        let num: f64 = grads[0].iter().zip(&grads[1]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / grads[0].iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let (g2, g8) = (gap(2), gap(8));
    assert!(g8 < g2 / 2.0, "gaps {g2} {g8}");
}

#[test]
fn running_statistics_pool_over_grid_points() {
    let s1 = BatchStats {
        mean: vec![0.0],
        var: vec![1.0],
        count: 2,
    };
    let s2 = BatchStats {
        mean: vec![2.0],
        var: vec![1.0],
        count: 2,
    };
    let pooled = pool_stats(&[&s1, &s2]).unwrap();
    assert_eq!((pooled.mean[0], pooled.var[0], pooled.count), (1.0, 2.0, 4));
}
