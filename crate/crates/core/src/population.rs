//! Closed-form population quantities under i.i.d. standard Gaussian patches.
//!
//! With `θ = θ(w, w*)` and `‖w*‖ = 1`:
//!
//! * population loss `f(w) = kθ/(2π)`,
//! * true gradient `∇f(w) = −k/(2π‖w‖) · P_w w* / ‖P_w w*‖`,
//! * expected coarse gradient
//!   `E[g(w)] = (k/π)[ŵ − cos(θ/2)(ŵ + w*)/‖ŵ + w*‖]`, which reduces to
//!   `(k/2π)(w − w*)` on the unit sphere.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::linalg::{check_dim, dot, norm};
use crate::{Error, Result};

/// Norms at or below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

/// Angles between the student, the teacher and the split variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleReport {
    /// `θ(w, w*)`.
    pub theta: f64,
    /// `θ(u, w)`; zero when `degenerate` is set.
    pub gamma: f64,
    /// Set when `u` (or `w`) has zero norm and `gamma` is therefore undefined.
    pub degenerate: bool,
}

/// Angle in `[0, π]` between two nonzero vectors.
///
/// Evaluated as `2·atan2(‖â − b̂‖, ‖â + b̂‖)`, which equals the arccosine of the
/// normalized inner product but keeps full relative accuracy near 0 and π.
pub fn angle(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na <= ZERO_TOL || nb <= ZERO_TOL {
        return Err(Error::DegenerateAngle);
    }
    let (mut minus, mut plus) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x / na, y / nb);
        minus += (p - q) * (p - q);
        plus += (p + q) * (p + q);
    }
    Ok(2.0 * libm::atan2(libm::sqrt(minus), libm::sqrt(plus)))
}

/// `θ(w, w*)` and `θ(u, w)`, flagging an undefined `γ` instead of failing.
pub fn angles(w: &[f64], wstar: &[f64], u: &[f64]) -> Result<AngleReport> {
    let theta = angle(w, wstar)?;
    check_dim(w.len(), u.len())?;
    Ok(match angle(u, w) {
        Ok(gamma) => AngleReport {
            theta,
            gamma,
            degenerate: false,
        },
        Err(Error::DegenerateAngle) => AngleReport {
            theta,
            gamma: 0.0,
            degenerate: true,
        },
        Err(e) => return Err(e),
    })
}

/// Population risk of the halved squared loss.
///
/// Evaluates the Gaussian closed form
/// `⅛[1ᵀ(I + 11ᵀ)1 − 2·1ᵀ((1 − 2θ/π)I + 11ᵀ)1 + 1ᵀ(I + 11ᵀ)1]`
/// with the quadratic forms expanded in `k`; the result equals `kθ/(2π)`.
/// Depends on `w` only through its direction.
pub fn population_loss(w: &[f64], wstar: &[f64], k: usize) -> Result<f64> {
    let theta = angle(w, wstar)?;
    Ok(loss_from_angle(theta, k))
}

pub(crate) fn loss_from_angle(theta: f64, k: usize) -> f64 {
    let k = k as f64;
    let outer = k + k * k;
    let mixed = (1.0 - 2.0 * theta / PI) * k + k * k;
    let f = (outer - 2.0 * mixed + outer) / 8.0;
    debug_assert!((f - k * theta / (2.0 * PI)).abs() <= 1e-9 * (1.0 + f));
    f
}

/// True gradient of the population loss, defined for `θ ∈ (0, π)`.
pub fn true_grad(w: &[f64], wstar: &[f64], k: usize) -> Result<Vec<f64>> {
    check_dim(w.len(), wstar.len())?;
    let nw = norm(w);
    if nw <= ZERO_TOL {
        return Err(Error::SingularGradient);
    }
    let w_hat: Vec<f64> = w.iter().map(|x| x / nw).collect();
    let c = dot(&w_hat, wstar);
    let proj: Vec<f64> = wstar.iter().zip(&w_hat).map(|(s, h)| s - c * h).collect();
    let np = norm(&proj);
    // ‖P_w w*‖ = sin θ, so this rejects θ ∈ {0, π}.
    if np <= ZERO_TOL {
        return Err(Error::SingularGradient);
    }
    let scale = -(k as f64) / (2.0 * PI * nw * np);
    Ok(proj.iter().map(|p| scale * p).collect())
}

/// Expected coarse gradient `E_Z[g(w, Z)]`, defined for `θ < π`.
pub fn expected_coarse_grad(w: &[f64], wstar: &[f64], k: usize) -> Result<Vec<f64>> {
    check_dim(w.len(), wstar.len())?;
    let nw = norm(w);
    if nw <= ZERO_TOL {
        return Err(Error::DegenerateAngle);
    }
    let theta = angle(w, wstar)?;
    let w_hat: Vec<f64> = w.iter().map(|x| x / nw).collect();
    let mid: Vec<f64> = w_hat.iter().zip(wstar).map(|(h, s)| h + s).collect();
    let nm = norm(&mid);
    if nm <= ZERO_TOL {
        return Err(Error::SingularDirection);
    }
    let half = libm::cos(theta / 2.0) / nm;
    let kp = k as f64 / PI;
    Ok(w_hat
        .iter()
        .zip(&mid)
        .map(|(h, m)| kp * (h - half * m))
        .collect())
}

/// `⟨E[g(w)], ∇f(w)⟩`, which is `k² sin θ / (4π²‖w‖)` and hence positive on
/// `θ ∈ (0, π)`.
pub fn grad_correlation(w: &[f64], wstar: &[f64], k: usize) -> Result<f64> {
    let g = expected_coarse_grad(w, wstar, k)?;
    let t = true_grad(w, wstar, k)?;
    Ok(dot(&g, &t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn e(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn angle_examples() {
        assert!((angle(&e(0, 3), &e(1, 3)).unwrap() - PI / 2.0).abs() < 1e-15);
        let v = [0.3, -1.2, 2.0];
        let neg = [-0.3, 1.2, -2.0];
        let dbl = [0.6, -2.4, 4.0];
        assert_eq!(angle(&v, &v).unwrap(), 0.0);
        assert!((angle(&v, &neg).unwrap() - PI).abs() < 1e-15);
        assert!(angle(&v, &dbl).unwrap() < 1e-15);
        assert_eq!(angle(&[0.0; 3], &v), Err(Error::DegenerateAngle));
        assert!(angle(&v, &[1.0]).is_err());
    }

    #[test]
    fn angle_resolves_tiny_separations() {
        let a = [1.0, 0.0];
        let b = [libm::cos(1e-9), libm::sin(1e-9)];
        assert!((angle(&a, &b).unwrap() - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn angle_report_flags_zero_split() {
        let r = angles(&e(0, 2), &e(1, 2), &[0.0, 0.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.gamma, 0.0);
        assert!((r.theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn population_loss_examples() {
        let ws = e(1, 50);
        assert_eq!(population_loss(&ws, &ws, 20).unwrap(), 0.0);
        assert!((population_loss(&e(0, 50), &ws, 20).unwrap() - 5.0).abs() < 1e-12);
        // Magnitude of the sweep result at s = 2.
        assert!((loss_from_angle(0.0076, 20) - 0.0242).abs() < 1e-4);
        assert!(population_loss(&[0.0; 50], &ws, 20).is_err());
    }

    #[test]
    fn true_grad_example() {
        let g = true_grad(&e(0, 5), &e(1, 5), 20).unwrap();
        let expect = -20.0 / (2.0 * PI);
        assert!((g[1] - expect).abs() < 1e-14);
        assert!((g[1] + 3.1831).abs() < 1e-4);
        assert!(g.iter().enumerate().all(|(i, x)| i == 1 || *x == 0.0));
        assert_eq!(dot(&g, &e(0, 5)), 0.0);
    }

    #[test]
    fn true_grad_singular_cases() {
        let ws = e(0, 3);
        assert_eq!(true_grad(&ws, &ws, 20), Err(Error::SingularGradient));
        assert_eq!(
            true_grad(&[-2.0, 0.0, 0.0], &ws, 20),
            Err(Error::SingularGradient)
        );
        assert_eq!(true_grad(&[0.0; 3], &ws, 20), Err(Error::SingularGradient));
    }

    #[test]
    fn expected_coarse_grad_examples() {
        let ws = e(1, 4);
        assert!(expected_coarse_grad(&ws, &ws, 20)
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-15));
        let twice: Vec<f64> = ws.iter().map(|x| 2.0 * x).collect();
        assert!(expected_coarse_grad(&twice, &ws, 20)
            .unwrap()
            .iter()
            .all(|x| x.abs() < 1e-15));
        let g = expected_coarse_grad(&e(0, 4), &ws, 20).unwrap();
        let c = 10.0 / PI;
        assert!((g[0] - c).abs() < 1e-13 && (g[1] + c).abs() < 1e-13);
        assert_eq!(
            expected_coarse_grad(&[0.0, -1.0, 0.0, 0.0], &ws, 20),
            Err(Error::SingularDirection)
        );
    }

    #[test]
    fn correlation_at_right_angle() {
        let c = grad_correlation(&e(0, 50), &e(1, 50), 20).unwrap();
        assert!((c - 400.0 / (4.0 * PI * PI)).abs() < 1e-12);
        assert!((c - 10.132).abs() < 1e-3);
    }
}
