use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rvscgd_core::model::{coarse_grad_sample, sample_at};
use rvscgd_core::population::{angle, expected_coarse_grad, population_loss, true_grad};

const K: usize = 20;
const D: usize = 50;

fn unit(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..D).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Smallest slack of `f(w₂) − f(w₁) ≤ ⟨E[g(w₁)], w₂ − w₁⟩ + c‖w₂ − w₁‖²`.
fn descent_slack(w1: &[f64], w2: &[f64], wstar: &[f64], c: f64) -> f64 {
    let g = expected_coarse_grad(w1, wstar, K).unwrap();
    let diff: Vec<f64> = w2.iter().zip(w1).map(|(a, b)| a - b).collect();
    let lhs = population_loss(w2, wstar, K).unwrap() - population_loss(w1, wstar, K).unwrap();
    dot(&g, &diff) + c * dot(&diff, &diff) - lhs
}

#[test]
fn descent_inequality_on_unit_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let wstar = unit(&mut rng);
    let c = K as f64 / (4.0 * PI);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let (a, b) = (unit(&mut rng), unit(&mut rng));
        let (w1, w2) = if angle(&a, &wstar).unwrap() >= angle(&b, &wstar).unwrap() {
            (a, b)
        } else {
            (b, a)
        };
        worst = worst.min(descent_slack(&w1, &w2, &wstar, c));
    }
    assert!(worst >= -1e-12, "slack {worst}");
}

#[test]
fn half_the_descent_coefficient_is_too_small() {
    // Two unit vectors at the same angle to the teacher: the loss does not
    // change but the linear term is −k/(4π)‖Δ‖².
    let mut wstar = vec![0.0; D];
    wstar[0] = 1.0;
    let (c, s) = (0.6f64, 0.8f64);
    let mut w1 = vec![0.0; D];
    let mut w2 = vec![0.0; D];
    w1[0] = c;
    w1[1] = s;
    w2[0] = c;
    w2[2] = s;
    let full = K as f64 / (4.0 * PI);
    assert!(descent_slack(&w1, &w2, &wstar, full).abs() < 1e-12);
    assert!(descent_slack(&w1, &w2, &wstar, full / 2.0) < -0.1);
}

#[test]
fn true_gradient_lipschitz_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let wstar = unit(&mut rng);
    let mut max_ratio = 0.0f64;
    for _ in 0..10_000 {
        let s1 = rng.random_range(0.5..=2.0);
        let s2 = rng.random_range(0.5..=2.0);
        let w1: Vec<f64> = unit(&mut rng).iter().map(|x| x * s1).collect();
        let w2: Vec<f64> = unit(&mut rng).iter().map(|x| x * s2).collect();
        let g1 = true_grad(&w1, &wstar, K).unwrap();
        let g2 = true_grad(&w2, &wstar, K).unwrap();
        max_ratio = max_ratio.max(dist(&g1, &g2) / dist(&w1, &w2));
    }
    println!("max true-gradient difference quotient: {max_ratio:.4}");
    assert!(max_ratio.is_finite());
}

#[test]
fn monte_carlo_coarse_gradient_at_right_angle() {
    let mut w = vec![0.0; D];
    let mut wstar = vec![0.0; D];
    w[0] = 1.0;
    wstar[1] = 1.0;
    let m = 20_000;
    let mut sum = vec![0.0; D];
    let mut sumsq = vec![0.0; D];
    for j in 0..m {
        let g = coarse_grad_sample(&w, &wstar, &sample_at(K, D, 7, j)).unwrap();
        for c in 0..D {
            sum[c] += g[c];
            sumsq[c] += g[c] * g[c];
        }
    }
    let mf = m as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / mf).collect();
    let se = (0..D)
        .map(|c| (sumsq[c] / mf - mean[c] * mean[c]) / (mf - 1.0))
        .sum::<f64>()
        .sqrt();
    // (k/2π)(w − w*) = (10/π)(e₁ − e₂).
    let mut oracle = vec![0.0; D];
    oracle[0] = 10.0 / PI;
    oracle[1] = -10.0 / PI;
    assert!(
        dist(&mean, &oracle) <= 3.0 * se,
        "error {} vs 3 SE {}",
        dist(&mean, &oracle),
        3.0 * se
    );
    let closed = expected_coarse_grad(&w, &wstar, K).unwrap();
    assert!(dist(&closed, &oracle) < 1e-13);
}

fn vec_d() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, D).prop_filter("nonzero", |v| dot(v, v) > 1e-6)
}

proptest! {
    #[test]
    fn loss_is_linear_in_angle(w in vec_d(), t in vec_d()) {
        let n = dot(&t, &t).sqrt();
        let ws: Vec<f64> = t.iter().map(|x| x / n).collect();
        let f = population_loss(&w, &ws, K).unwrap();
        let theta = angle(&w, &ws).unwrap();
        prop_assert!((f - K as f64 * theta / (2.0 * PI)).abs() <= 1e-12);
    }

    #[test]
    fn loss_and_expected_gradient_depend_on_direction_only(w in vec_d(), t in vec_d(), scale in 0.01f64..100.0) {
        let n = dot(&t, &t).sqrt();
        let ws: Vec<f64> = t.iter().map(|x| x / n).collect();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let f1 = population_loss(&w, &ws, K).unwrap();
        let f2 = population_loss(&scaled, &ws, K).unwrap();
        prop_assert!((f1 - f2).abs() <= 1e-12);
        if let (Ok(g1), Ok(g2)) = (expected_coarse_grad(&w, &ws, K), expected_coarse_grad(&scaled, &ws, K)) {
            prop_assert!(dist(&g1, &g2) <= 1e-12);
        }
    }

    #[test]
    fn true_gradient_is_orthogonal_to_w(w in vec_d(), t in vec_d()) {
        let n = dot(&t, &t).sqrt();
        let ws: Vec<f64> = t.iter().map(|x| x / n).collect();
        if let Ok(g) = true_grad(&w, &ws, K) {
            prop_assert!(dot(&g, &w).abs() <= 1e-12 * (1.0 + dot(&w, &w).sqrt()));
            let nw = dot(&w, &w).sqrt();
            let expect = K as f64 / (2.0 * PI * nw);
            prop_assert!((dot(&g, &g).sqrt() - expect).abs() <= 1e-12 * expect);
        }
    }
}
