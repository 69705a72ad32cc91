//! Correlation and Sharpe metrics against direct textbook formulas.

use edsmf_core::evaluation::{average_ranks, evaluate, pearson, sharpe, spearman, EvalConfig, PredictionRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(n Σxy − Σx Σy) / sqrt((n Σx² − (Σx)²)(n Σy² − (Σy)²))`
fn pearson_formula(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// Rank by counting: rank_i = 1 + #{j: x_j < x_i} + (#{j: x_j == x_i} − 1) / 2.
fn rank_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn sharpe_formula(r: &[f64]) -> f64 {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    mean / var.sqrt()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn pearson_spearman_sharpe_match_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let n = rng.random_range(3..=60);
        let x = random_vec(&mut rng, n);
        let y = random_vec(&mut rng, n);
        let p = pearson(&x, &y).unwrap();
        assert!((p - pearson_formula(&x, &y)).abs() <= 1e-12);
        let s = spearman(&x, &y).unwrap();
        let oracle = pearson_formula(&rank_by_counting(&x), &rank_by_counting(&y));
        assert!((s - oracle).abs() <= 1e-12);
        let r: Vec<f64> = x.iter().map(|v| v * 0.01).collect();
        assert!((sharpe(&r, 0.0).unwrap() - sharpe_formula(&r)).abs() <= 1e-12);
    }
}

#[test]
fn ties_use_average_ranks() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        // few distinct values => many ties
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        assert_eq!(average_ranks(&x), rank_by_counting(&x));
    }
    assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0, 3.0]), vec![4.0, 1.0, 4.0, 2.0, 4.0]);
    // (1,1,2) vs (1,2,3): ranks (1.5,1.5,3) and (1,2,3)
    let by_hand = pearson_formula(&[1.5, 1.5, 3.0], &[1.0, 2.0, 3.0]);
    assert!((spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - by_hand).abs() <= 1e-12);
}

#[test]
fn single_step_hand_computation() {
    // N = 4; predicted ranks stocks 2, 0, 3, 1 from the top
    let predicted = vec![0.02, -0.01, 0.03, 0.0];
    let realized = vec![0.01, 0.02, -0.01, 0.005];
    let ts = chrono::NaiveDate::from_ymd_opt(2024, 11, 6).unwrap().and_hms_opt(10, 0, 0).unwrap();
    let rec = PredictionRecord { timestamp: ts, predicted: predicted.clone(), realized: realized.clone() };
    let cfg = EvalConfig { precision_at: vec![1, 2, 4], ..EvalConfig::default() };
    let rep = evaluate("hand", &[rec], &cfg).unwrap();
    assert_eq!(rep.steps, 1);
    assert!((rep.ic.unwrap() - pearson_formula(&predicted, &realized)).abs() <= 1e-15);
    // predicted ranks (3,1,4,2), realized ranks (3,4,1,2)
    let ric = pearson_formula(&[3.0, 1.0, 4.0, 2.0], &[3.0, 4.0, 1.0, 2.0]);
    assert!((rep.ric.unwrap() - ric).abs() <= 1e-15);
    assert_eq!(rep.precision(1), Some(0.0)); // stock 2 fell
    assert_eq!(rep.precision(2), Some(0.5)); // stocks 2, 0
    assert_eq!(rep.precision(4), Some(0.75));
    assert_eq!(rep.backtest, vec![-0.01]);
    assert_eq!(rep.sr, None); // one step has no volatility
}
