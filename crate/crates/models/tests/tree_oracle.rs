use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twin_models::features::Matrix;
use twin_models::learners::{fit_gbrt, fit_tree, GbrtParams, TreeParams};

struct Data {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn sse(idx: &[usize], d: &Data) -> f64 {
    let sw: f64 = idx.iter().map(|&i| d.w[i]).sum();
    if sw == 0.0 {
        return 0.0;
    }
    let mean = idx.iter().map(|&i| d.w[i] * d.y[i]).sum::<f64>() / sw;
    idx.iter().map(|&i| d.w[i] * (d.y[i] - mean).powi(2)).sum()
}

/// Every (feature, threshold) split of `idx`, thresholds between
/// consecutive distinct values.
fn splits(idx: &[usize], d: &Data) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for f in 0..d.x[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| d.x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r) = idx.iter().partition(|&&i| d.x[i][f] <= t);
            out.push((l, r));
        }
    }
    out
}

/// Minimum loss over all trees of depth <= `depth`.
fn best(idx: &[usize], d: &Data, depth: usize) -> f64 {
    let mut m = sse(idx, d);
    if depth == 0 {
        return m;
    }
    for (l, r) in splits(idx, d) {
        m = m.min(best(&l, d, depth - 1) + best(&r, d, depth - 1));
    }
    m
}

fn random_data(rng: &mut ChaCha8Rng) -> Data {
    let n = rng.random_range(2..=32);
    let p = rng.random_range(1..=2);
    let coarse = rng.random_bool(0.5);
    let x = (0..n)
        .map(|_| {
            (0..p)
                .map(|_| if coarse { rng.random_range(0..5) as f64 } else { rng.random_range(-3.0..3.0) })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let w = (0..n)
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.2..2.0) })
        .collect::<Vec<f64>>();
    let mut d = Data { x, y, w };
    if d.w.iter().all(|w| *w == 0.0) {
        d.w[0] = 1.0;
    }
    d
}

fn fitted_loss(d: &Data, depth: usize) -> f64 {
    let m = Matrix::from_rows(d.x[0].len(), &d.x);
    let params = TreeParams {
        max_depth: depth,
        ..TreeParams::default()
    };
    let t = fit_tree(&m, &d.y, &d.w, &params).unwrap();
    assert!(t.depth() <= depth);
    (0..d.y.len()).map(|i| d.w[i] * (d.y[i] - t.predict(&d.x[i])).powi(2)).sum()
}

#[test]
fn tree_matches_exhaustive_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    for case in 0..100 {
        let d = random_data(&mut rng);
        let depth = rng.random_range(0..=2);
        let all: Vec<usize> = (0..d.y.len()).collect();
        let want = best(&all, &d, depth);
        let got = fitted_loss(&d, depth);
        assert!((got - want).abs() < 1e-9, "case {case}: fitted {got}, optimum {want}");
    }
}

#[test]
fn two_points_depth_one_fit_exactly() {
    let m = Matrix::from_rows(1, &[vec![0.0], vec![1.0]]);
    let t = fit_tree(&m, &[0.0, 1.0], &[1.0, 1.0], &TreeParams { max_depth: 1, ..TreeParams::default() }).unwrap();
    assert_eq!([t.predict(&[0.0]), t.predict(&[1.0])], [0.0, 1.0]);
}

#[test]
fn boosting_interpolates_four_points() {
    let m: Matrix<f64> = Matrix::from_rows(1, &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
    let y: [f64; 4] = [1.0, -2.0, 5.0, 0.5];
    let g = fit_gbrt(&m, &y, &[1.0; 4], &GbrtParams::new(5, 1.0, 2, 1)).unwrap();
    let mse: f64 = (0..4).map(|i| (g.predict_row(m.row(i)) - y[i]).powi(2)).sum::<f64>() / 4.0;
    assert!(mse < 1e-12, "{mse}");
}

#[test]
fn more_trees_never_raise_training_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| (6.0 * r[0]).sin() + r[1] * r[1]).collect();
    let m = Matrix::from_rows(2, &rows);
    let loss = |n| {
        let g = fit_gbrt(&m, &y, &vec![1.0; 200], &GbrtParams::new(n, 0.1, 3, 2)).unwrap();
        *g.train_loss.last().unwrap()
    };
    let mut prev = f64::INFINITY;
    for n in [0, 10, 20, 40, 80] {
        let l = loss(n);
        assert!(l <= prev);
        prev = l;
    }
}

proptest! {
    #[test]
    fn scaling_targets_scales_predictions(c in 0.1f64..50.0, ys in prop::collection::vec(-5.0f64..5.0, 6)) {
        // Distinct features and exact-fit depth keep the structure stable.
        let m = Matrix::from_rows(1, &(0..6).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let p = GbrtParams::new(3, 1.0, 3, 1);
        let a = fit_gbrt(&m, &ys, &[1.0; 6], &p).unwrap();
        let scaled: Vec<f64> = ys.iter().map(|v| v * c).collect();
        let b = fit_gbrt(&m, &scaled, &[1.0; 6], &p).unwrap();
        for i in 0..6 {
            let (pa, pb) = (a.predict_row(m.row(i)), b.predict_row(m.row(i)));
            prop_assert!((pb - c * pa).abs() <= 1e-9 * (1.0 + (c * pa).abs()));
        }
    }

    #[test]
    fn same_inputs_same_model(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_data(&mut rng);
        let m = Matrix::from_rows(d.x[0].len(), &d.x);
        let p = GbrtParams::new(8, 0.3, 2, 1);
        prop_assert_eq!(fit_gbrt(&m, &d.y, &d.w, &p).unwrap(), fit_gbrt(&m, &d.y, &d.w, &p).unwrap());
    }
}
