//! The combined loss against a literal ordered-pair double loop, and its
//! gradient against central differences.

use edsmf_core::training::loss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mean squared error plus alpha times the hinge summed over every ordered
/// pair (i, j), i != j, written as plainly as possible.
fn naive_loss(pred: &[f64], actual: &[f64], alpha: f64) -> f64 {
    let n = pred.len();
    let mut mse = 0.0;
    for i in 0..n {
        mse += (pred[i] - actual[i]).powi(2);
    }
    mse /= n as f64;
    let mut rank = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = -(pred[i] - pred[j]) * (actual[i] - actual[j]);
            rank += v.max(0.0);
        }
    }
    mse + alpha * rank
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=64);
    let pred = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
    let actual = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
    (pred, actual)
}

#[test]
fn matches_naive_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (pred, actual) = random_pair(&mut rng);
        let alpha = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..2.0) };
        let (fast, _) = loss(&pred, &actual, alpha).unwrap();
        let slow = naive_loss(&pred, &actual, alpha);
        assert!((fast - slow).abs() <= 1e-10, "fast {fast} slow {slow}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    // The loss is piecewise quadratic, so a central difference is exact away
    // from kinks and a wide step only fights roundoff.
    let h = 1e-4;
    let mut checked = 0usize;
    for _ in 0..200 {
        let (pred, actual) = random_pair(&mut rng);
        let alpha = 0.1;
        let (_, grad) = loss(&pred, &actual, alpha).unwrap();
        for k in 0..pred.len() {
            // Skip coordinates whose step would cross a hinge kink.
            let near_kink = (0..pred.len()).any(|j| j != k && (pred[k] - pred[j]).abs() <= 2.0 * h);
            if near_kink {
                continue;
            }
            let mut plus = pred.clone();
            let mut minus = pred.clone();
            plus[k] += h;
            minus[k] -= h;
            let fd = (naive_loss(&plus, &actual, alpha) - naive_loss(&minus, &actual, alpha)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
            assert!(rel < 1e-6, "coordinate {k}: analytic {} fd {fd} rel {rel}", grad[k]);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn hinge_subgradient_at_tie_is_zero() {
    // equal predictions: every pair sits on a kink and contributes nothing
    let (_, grad) = loss(&[0.01, 0.01], &[0.0, 0.0], 0.5).unwrap();
    assert_eq!(grad, vec![0.01, 0.01]);
    let (_, grad) = loss(&[0.0, 0.0], &[0.01, -0.01], 0.5).unwrap();
    assert!((grad[0] - -0.01).abs() < 1e-18 && (grad[1] - 0.01).abs() < 1e-18);
}
