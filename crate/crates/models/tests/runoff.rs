use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twin_models::features::Matrix;
use twin_models::runoff::fixture::{linear_response, synthetic_catchment};
use twin_models::runoff::{
    clamp_nonnegative, decode_runoff, encode_runoff, fit_runoff, gradient_check, param_count, predict_streamflow,
    run_scenario, train, LstmNetwork, RunoffMeta, Scalers, ScenarioSpec, TrainConfig, DENSE1, DENSE2,
};
use twin_models::ModelError;

fn start() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 10, 1, 0, 0, 0).unwrap()
}

fn random_seq(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect())
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Step-by-step recomputation straight from the parameter layout.
fn oracle_forward(net: &LstmNetwork<f64>, seq: &Matrix<f64>) -> f64 {
    let l = net.layout();
    let p = net.params();
    let (d, hn) = (l.input, l.hidden);
    let mut h = vec![0.0; hn];
    let mut c = vec![0.0; hn];
    for t in 0..seq.rows() {
        let x = seq.row(t);
        let pre = |gate: usize, j: usize| {
            let r = gate * hn + j;
            let mut a = p[l.b + r];
            for k in 0..d {
                a += p[l.wx + r * d + k] * x[k];
            }
            for k in 0..hn {
                a += p[l.wh + r * hn + k] * h[k];
            }
            a
        };
        let mut nh = vec![0.0; hn];
        for j in 0..hn {
            let i = sigmoid(pre(0, j));
            let f = sigmoid(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sigmoid(pre(3, j));
            c[j] = f * c[j] + i * g;
            nh[j] = o * c[j].tanh();
        }
        h = nh;
    }
    let z1: Vec<f64> = (0..DENSE1)
        .map(|k| p[l.b1 + k] + (0..hn).map(|j| p[l.w1 + k * hn + j] * h[j]).sum::<f64>())
        .collect();
    let a2: Vec<f64> = (0..DENSE2)
        .map(|k| (p[l.b2 + k] + (0..DENSE1).map(|j| p[l.w2 + k * DENSE1 + j] * z1[j]).sum::<f64>()).max(0.0))
        .collect();
    p[l.b3] + (0..DENSE2).map(|k| p[l.w3 + k] * a2[k]).sum::<f64>()
}

#[test]
fn forward_matches_scalar_oracle() {
    let net = LstmNetwork::<f64>::seeded(3, 4, 99).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seq = random_seq(&mut rng, 2, 3);
    let got = net.predict(&seq).unwrap();
    assert!((got - oracle_forward(&net, &seq)).abs() < 1e-10);
}

#[test]
fn gradient_check_eight_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in 0..5 {
        let net = LstmNetwork::<f64>::seeded(4, 8, 100 + s).unwrap();
        let seq = random_seq(&mut rng, 6, 4);
        let err = gradient_check(&net, &seq, rng.random_range(-1.0..1.0), 1e-5).unwrap();
        assert!(err < 1e-4, "sequence {s}: relative error {err}");
    }
}

#[test]
fn paper_architecture_counts() {
    for width in [17, 38] {
        let net = LstmNetwork::<f64>::zeros(width, 128).unwrap();
        assert_eq!(net.param_count(), 4 * 128 * (width + 128 + 1) + 129 * 64 + 65 * 32 + 33);
        assert_eq!(net.param_count(), param_count(width, 128));
    }
}

#[test]
fn clamp_examples() {
    assert_eq!(clamp_nonnegative(&[-0.5, 0.2]), vec![0.0, 0.2]);
    assert_eq!(clamp_nonnegative(&[1.0, 0.0, 3.5]), vec![1.0, 0.0, 3.5]);
    let z = clamp_nonnegative(&[-0.0f64, 0.0]);
    assert!(z.iter().all(|v| *v == 0.0 && v.is_sign_positive()));
}

fn fixture_scalers() -> (twin_models::runoff::RunoffDataset<f64>, Scalers<f64>, RunoffMeta) {
    let ds = linear_response(3, 400, 6, start()).unwrap();
    let split = ds.split().unwrap();
    let scalers = Scalers::fit(&ds, &split.train).unwrap();
    let meta = RunoffMeta {
        station: ds.station.clone(),
        horizon: 1,
        window: 6,
        columns: ds.columns.clone(),
        scaler_version: scalers.version(),
        model_version: "test".into(),
    };
    (ds, scalers, meta)
}

#[test]
fn zero_network_predicts_clamped_target_center() {
    let (ds, scalers, meta) = fixture_scalers();
    let net = LstmNetwork::<f64>::zeros(2, 4).unwrap();
    let got = predict_streamflow(&net, &scalers, &meta, &ds.window_rows(50), 1).unwrap();
    assert_eq!(got, scalers.target.center[0].max(0.0));

    // A negative center exercises the clamp.
    let mut shifted = scalers.clone();
    shifted.target.center[0] = -3.0;
    let meta2 = RunoffMeta {
        scaler_version: shifted.version(),
        ..meta.clone()
    };
    assert_eq!(predict_streamflow(&net, &shifted, &meta2, &ds.window_rows(50), 1).unwrap(), 0.0);
    // Old metadata against the new scalers is a version mismatch.
    assert!(matches!(
        predict_streamflow(&net, &shifted, &meta, &ds.window_rows(50), 1),
        Err(ModelError::Usage(_))
    ));
    assert!(predict_streamflow(&net, &scalers, &meta, &ds.window_rows(50), 6).is_err());
}

#[test]
fn zeroed_input_column_is_ignored() {
    let (ds, scalers, meta) = fixture_scalers();
    let mut net = LstmNetwork::<f64>::seeded(2, 4, 5).unwrap();
    let l = net.layout();
    for r in 0..4 * l.hidden {
        net.params_mut()[l.wx + r * l.input] = 0.0;
    }
    let w = ds.window_rows(80);
    let mut edited = w.clone();
    for i in 0..edited.rows() {
        edited.row_mut(i)[0] += 7.5;
    }
    let a = predict_streamflow(&net, &scalers, &meta, &w, 1).unwrap();
    let b = predict_streamflow(&net, &scalers, &meta, &edited, 1).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_epochs_returns_initial_net() {
    let (ds, scalers, _) = fixture_scalers();
    let net = LstmNetwork::<f64>::seeded(2, 4, 5).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        hidden: 4,
        ..TrainConfig::toy()
    };
    let t = train(net.clone(), &ds, &scalers, &ds.split().unwrap(), &cfg).unwrap();
    assert_eq!(t.net, net);
    assert!(t.curve.is_empty());
    assert_eq!(t.best_epoch, None);
}

fn linear_cfg() -> TrainConfig {
    TrainConfig {
        hidden: 8,
        epochs: 25,
        batch_size: 16,
        learning_rate: 5e-3,
        seed: 17,
        clip_norm: 1.0,
    }
}

#[test]
fn lstm_learns_linear_response_and_is_deterministic() {
    let ds = linear_response(11, 1200, 6, start()).unwrap();
    let (model, report) = fit_runoff(&ds, &linear_cfg()).unwrap();
    assert!(
        report.val_mae <= 0.7 * report.persistence_val_mae,
        "lstm {} vs persistence {}",
        report.val_mae,
        report.persistence_val_mae
    );
    let (again, report2) = fit_runoff(&ds, &linear_cfg()).unwrap();
    assert_eq!(report.curve, report2.curve);
    assert_eq!(model, again);

    // Scenario behavior on the trained model.
    let w = ds.window_rows(900);
    let id = run_scenario(&ScenarioSpec::identity("06A01", 1), &model, &w).unwrap();
    assert_eq!(id.delta, 0.0);
    assert_eq!(id.baseline, id.perturbed);

    let mut dry = ScenarioSpec::identity("06A01", 1);
    dry.multipliers.insert("rain".into(), 0.0);
    let r = run_scenario(&dry, &model, &w).unwrap();
    // Truth without rain is 0; the trained model lands close to it.
    assert!(r.perturbed < 0.2, "dry response {}", r.perturbed);
    assert_eq!(r.delta, r.perturbed - r.baseline);

    let mut wet = ScenarioSpec::identity("06A01", 1);
    wet.offsets.insert("rain".into(), 0.3);
    let via_spec = run_scenario(&wet, &model, &w).unwrap().perturbed;
    let mut edited = w.clone();
    for i in 0..edited.rows() {
        edited.row_mut(i)[0] += 0.3;
    }
    assert!((via_spec - model.predict(&edited).unwrap()).abs() < 1e-12);

    let mut missing = ScenarioSpec::identity("06A01", 1);
    missing.multipliers.insert("precipitation".into(), 0.5);
    assert!(matches!(run_scenario(&missing, &model, &w), Err(ModelError::MissingInput(v)) if v == "precipitation"));
    let mut flow = ScenarioSpec::identity("06A01", 1);
    flow.offsets.insert("streamflow".into(), 1.0);
    assert!(matches!(run_scenario(&flow, &model, &w), Err(ModelError::Usage(_))));
    let mut unknown = ScenarioSpec::identity("06A01", 1);
    unknown.multipliers.insert("snow".into(), 1.0);
    assert!(matches!(run_scenario(&unknown, &model, &w), Err(ModelError::Usage(_))));
    let mut negative = ScenarioSpec::identity("06A01", 1);
    negative.multipliers.insert("rain".into(), -1.0);
    assert!(matches!(run_scenario(&negative, &model, &w), Err(ModelError::Usage(_))));

    let bytes = encode_runoff(&model);
    let back = decode_runoff::<f64>(&bytes).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.predict(&w).unwrap(), model.predict(&w).unwrap());
    let mut bad = bytes.clone();
    bad[30] ^= 1;
    assert!(decode_runoff::<f64>(&bad).is_err());
}

#[test]
fn catchment_fixture_widths() {
    let base = synthetic_catchment(1, 200, "06A18", 6, 24, false, start()).unwrap();
    assert_eq!(base.width(), 17);
    let exog = synthetic_catchment(1, 200, "06A18", 6, 24, true, start()).unwrap();
    assert_eq!(exog.width(), 38);
    assert!(exog.has_forecast_inputs() && !base.has_forecast_inputs());
    assert!(exog.target.iter().all(|v| *v >= 0.0));
}

#[test]
fn served_predictions_are_nonnegative() {
    let ds = synthetic_catchment(4, 300, "06A01", 1, 12, false, start()).unwrap();
    let split = ds.split().unwrap();
    let scalers = Scalers::fit(&ds, &split.train).unwrap();
    let meta = RunoffMeta {
        station: "06A01".into(),
        horizon: 1,
        window: 12,
        columns: ds.columns.clone(),
        scaler_version: scalers.version(),
        model_version: "x".into(),
    };
    for seed in 0..20 {
        let net = LstmNetwork::<f64>::seeded(17, 4, seed).unwrap();
        for e in ds.sample_ends().step_by(25) {
            assert!(predict_streamflow(&net, &scalers, &meta, &ds.window_rows(e), 1).unwrap() >= 0.0);
        }
    }
}
