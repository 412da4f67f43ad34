//! Sparsity penalties and their proximal (thresholding) operators.
//!
//! For a penalty `ρ` and strength `tau > 0` the scalar prox is
//!
//! ```text
//! prox(x) = argmin_y ½(y − x)² + tau·ρ(y)
//! ```
//!
//! which is soft thresholding for ℓ1, hard thresholding for ℓ0 and a
//! trigonometric closed form for the transformed ℓ1 penalty
//! `ρ_a(x) = (a + 1)|x| / (a + |x|)`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Which penalty drives the `u` update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    L1,
    L0,
    /// Transformed ℓ1 with shape parameter `a > 0`. Small `a` approaches ℓ0,
    /// large `a` approaches ℓ1.
    Tl1 {
        a: f64,
    },
}

impl Penalty {
    pub fn tl1(a: f64) -> Result<Self> {
        if a.is_finite() && a > 0.0 {
            Ok(Penalty::Tl1 { a })
        } else {
            Err(Error::Domain(
                "transformed-l1 shape parameter must be positive",
            ))
        }
    }

    /// Scalar penalty `ρ(x)`.
    pub fn rho(&self, x: f64) -> f64 {
        match *self {
            Penalty::L1 => libm::fabs(x),
            Penalty::L0 => {
                if x != 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Penalty::Tl1 { a } => {
                let ax = libm::fabs(x);
                (a + 1.0) * ax / (a + ax)
            }
        }
    }

    /// Magnitude at or below which the prox returns zero.
    pub fn threshold(&self, tau: ProxParam) -> f64 {
        let tau = tau.get();
        match *self {
            Penalty::L1 => tau,
            Penalty::L0 => libm::sqrt(2.0 * tau),
            Penalty::Tl1 { a } => tl1_threshold(a, tau),
        }
    }
}

/// Effective prox strength, always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProxParam(f64);

impl ProxParam {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(ProxParam(tau))
        } else {
            Err(Error::Domain("prox parameter must be positive and finite"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `Σ ρ(v_i)`.
pub fn penalty_value(penalty: &Penalty, v: &[f64]) -> Result<f64> {
    if !crate::linalg::is_finite(v) {
        return Err(Error::Domain("penalty input must be finite"));
    }
    Ok(v.iter().map(|&x| penalty.rho(x)).sum())
}

/// Exact scalar prox. Dead-zone boundaries map to zero for every penalty.
pub fn prox_scalar(penalty: &Penalty, tau: ProxParam, x: f64) -> f64 {
    let ax = libm::fabs(x);
    match *penalty {
        Penalty::L1 => {
            let t = tau.get();
            if ax <= t {
                0.0
            } else {
                x - libm::copysign(t, x)
            }
        }
        Penalty::L0 => {
            if ax > libm::sqrt(2.0 * tau.get()) {
                x
            } else {
                0.0
            }
        }
        Penalty::Tl1 { a } => {
            if ax > tl1_threshold(a, tau.get()) {
                tl1_shrink(a, tau.get(), x)
            } else {
                0.0
            }
        }
    }
}

/// Componentwise prox.
pub fn prox_vector(penalty: &Penalty, tau: ProxParam, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&xi| prox_scalar(penalty, tau, xi)).collect()
}

/// Dead-zone half width of the transformed-ℓ1 prox.
pub fn tl1_threshold(a: f64, tau: f64) -> f64 {
    if tau <= a * a / (2.0 * (a + 1.0)) {
        tau * (a + 1.0) / a
    } else {
        libm::sqrt(2.0 * tau * (a + 1.0)) - a / 2.0
    }
}

/// The nonzero branch `g_tau(x)` of the transformed-ℓ1 prox.
fn tl1_shrink(a: f64, tau: f64, x: f64) -> f64 {
    let ax = libm::fabs(x);
    let s = a + ax;
    // Analytically inside [-1, 1] above the threshold; clamp rounding drift.
    let arg = (1.0 - 27.0 * tau * a * (a + 1.0) / (2.0 * s * s * s)).clamp(-1.0, 1.0);
    let phi = libm::acos(arg);
    let mag = 2.0 / 3.0 * s * libm::cos(phi / 3.0) - 2.0 * a / 3.0 + ax / 3.0;
    libm::copysign(mag, x)
}

/// Grid-search prox used to check the closed forms.
///
/// The grid is the lattice `{ j·step : j ∈ ℤ } ∩ [lo, hi]`, anchored at the
/// origin so that `0` is a candidate whenever `lo ≤ 0 ≤ hi`. Ties go to the
/// candidate of smaller magnitude, then to the smaller value.
pub fn brute_force_prox(
    penalty: &Penalty,
    tau: ProxParam,
    x: f64,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<f64> {
    if !step.is_finite() || step <= 0.0 || lo.is_nan() || hi.is_nan() || lo >= hi || !x.is_finite()
    {
        return Err(Error::Domain(
            "brute-force prox needs lo < hi, step > 0 and finite x",
        ));
    }
    let first = libm::ceil(lo / step) as i64;
    let last = libm::floor(hi / step) as i64;
    if first > last {
        return Err(Error::Domain("brute-force prox grid is empty"));
    }
    let objective = |y: f64| 0.5 * (y - x) * (y - x) + tau.get() * penalty.rho(y);
    let mut best_y = first as f64 * step;
    let mut best = objective(best_y);
    for j in first + 1..=last {
        let y = j as f64 * step;
        let val = objective(y);
        let better = val < best
            || (val == best
                && (libm::fabs(y) < libm::fabs(best_y)
                    || (libm::fabs(y) == libm::fabs(best_y) && y < best_y)));
        if better {
            best = val;
            best_y = y;
        }
    }
    Ok(best_y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau(t: f64) -> ProxParam {
        ProxParam::new(t).unwrap()
    }

    #[test]
    fn penalty_values() {
        assert_eq!(penalty_value(&Penalty::L1, &[1.0, -2.0, 0.0]).unwrap(), 3.0);
        assert_eq!(
            penalty_value(&Penalty::tl1(1.0).unwrap(), &[1.0]).unwrap(),
            1.0
        );
        assert_eq!(penalty_value(&Penalty::L0, &[0.5, 0.0, -0.1]).unwrap(), 2.0);
        assert_eq!(penalty_value(&Penalty::L0, &[0.0; 4]).unwrap(), 0.0);
        assert!(penalty_value(&Penalty::L1, &[f64::NAN]).is_err());
        assert!(penalty_value(&Penalty::L1, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ProxParam::new(0.0).is_err());
        assert!(ProxParam::new(-1.0).is_err());
        assert!(ProxParam::new(f64::NAN).is_err());
        assert!(Penalty::tl1(0.0).is_err());
        assert!(Penalty::tl1(-2.0).is_err());
    }

    #[test]
    fn soft_threshold() {
        assert!((prox_scalar(&Penalty::L1, tau(0.1), 0.25) - 0.15).abs() < 1e-15);
        assert!((prox_scalar(&Penalty::L1, tau(0.1), -0.25) + 0.15).abs() < 1e-15);
        assert_eq!(prox_scalar(&Penalty::L1, tau(0.1), 0.1), 0.0);
        assert_eq!(prox_scalar(&Penalty::L1, tau(0.1), -0.1), 0.0);
    }

    #[test]
    fn hard_threshold() {
        assert_eq!(prox_scalar(&Penalty::L0, tau(0.1), 0.4), 0.0);
        assert_eq!(prox_scalar(&Penalty::L0, tau(0.1), 0.5), 0.5);
        assert_eq!(prox_scalar(&Penalty::L0, tau(0.1), -0.5), -0.5);
        // Exactly on the boundary maps to zero.
        let t = libm::sqrt(0.2);
        assert_eq!(prox_scalar(&Penalty::L0, tau(0.1), t), 0.0);
    }

    #[test]
    fn vector_prox() {
        let out = prox_vector(&Penalty::L1, tau(0.1), &[0.25, -0.05, 0.0]);
        assert!((out[0] - 0.15).abs() < 1e-15);
        assert_eq!(&out[1..], &[0.0, 0.0]);
        assert_eq!(prox_vector(&Penalty::L0, tau(0.1), &[0.5, 0.3]), [0.5, 0.0]);
        for p in [Penalty::L1, Penalty::L0, Penalty::Tl1 { a: 1.0 }] {
            assert_eq!(prox_vector(&p, tau(0.3), &[0.0; 5]), [0.0; 5]);
        }
    }

    #[test]
    fn tl1_threshold_branches() {
        assert!((tl1_threshold(1.0, 0.05) - 0.1).abs() < 1e-15);
        assert!((tl1_threshold(1.0, 0.5) - (libm::sqrt(2.0) - 0.5)).abs() < 1e-15);
        // Both branches agree at the switch point.
        let lo = 0.25 * 2.0;
        let hi = libm::sqrt(2.0 * 0.25 * 2.0) - 0.5;
        assert!((tl1_threshold(1.0, 0.25) - 0.5).abs() < 1e-15);
        assert!((lo - hi).abs() < 1e-15);
    }

    #[test]
    fn tl1_closed_form_matches_grid_search() {
        let p = Penalty::tl1(1.0).unwrap();
        let oracle = brute_force_prox(&p, tau(0.05), 0.3, -1.0, 1.0, 1e-5).unwrap();
        let closed = prox_scalar(&p, tau(0.05), 0.3);
        assert!((oracle - closed).abs() <= 2e-5, "{oracle} vs {closed}");
        assert!((closed - 0.2343).abs() < 1e-4, "{closed}");
    }

    #[test]
    fn tl1_dead_zone_matches_grid_search_in_jump_regime() {
        // tau = 0.5 > a²/(2(a+1)) = 0.25 puts the prox in its discontinuous regime.
        let p = Penalty::tl1(1.0).unwrap();
        let t = tl1_threshold(1.0, 0.5);
        for x in [t - 1e-3, t - 1e-4] {
            let y = brute_force_prox(&p, tau(0.5), x, -2.0, 2.0, 1e-5).unwrap();
            assert_eq!(y, 0.0, "x = {x}");
        }
        for x in [t + 1e-4, t + 1e-3] {
            let y = brute_force_prox(&p, tau(0.5), x, -2.0, 2.0, 1e-5).unwrap();
            assert!(y > 0.1, "x = {x}, y = {y}");
        }
    }

    #[test]
    fn brute_force_examples() {
        let y = brute_force_prox(&Penalty::L1, tau(0.1), 0.25, -1.0, 1.0, 1e-4).unwrap();
        assert!((y - 0.15).abs() <= 1e-4);
        let y = brute_force_prox(&Penalty::L0, tau(0.1), 0.4, -1.0, 1.0, 1e-4).unwrap();
        assert!(y.abs() <= 1e-4);
        for p in [Penalty::L1, Penalty::L0, Penalty::Tl1 { a: 2.0 }] {
            assert_eq!(
                brute_force_prox(&p, tau(0.2), 0.0, -1.0, 1.0, 1e-3).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn brute_force_rejects_bad_grids() {
        assert!(brute_force_prox(&Penalty::L1, tau(0.1), 0.0, 1.0, -1.0, 1e-3).is_err());
        assert!(brute_force_prox(&Penalty::L1, tau(0.1), 0.0, -1.0, 1.0, 0.0).is_err());
        // No lattice point inside (0.11, 0.19) at step 0.1.
        assert!(brute_force_prox(&Penalty::L1, tau(0.1), 0.0, 0.11, 0.19, 0.1).is_err());
    }

    #[test]
    fn tl1_approaches_l1_for_large_shape() {
        let big = Penalty::tl1(1e6).unwrap();
        for i in -30..=30 {
            let x = i as f64 * 0.1;
            for t in [0.05, 0.3, 0.9] {
                let a = prox_scalar(&big, tau(t), x);
                let b = prox_scalar(&Penalty::L1, tau(t), x);
                assert!((a - b).abs() <= 1e-4, "x={x} tau={t}: {a} vs {b}");
            }
        }
    }
}
