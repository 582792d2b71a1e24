//! Closed-form constants of the eigenvalue bound: sphere volumes, the
//! dimensional constant K_n, the bound K_n·n·(2σ_n)^{2/n}, and the conformally
//! invariant gradient integral that ties them together.

use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::quad1d::gauss_legendre;
use std::f64::consts::PI;

/// Sphere dimension n >= 2 (points live in R^{n+1}).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dimension(u32);

impl Dimension {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Dimension(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Ambient dimension n + 1.
    #[inline]
    pub fn ambient(self) -> usize {
        self.0 as usize + 1
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// ln of the volume of the unit k-sphere, k >= 1: σ_k = 2 π^{(k+1)/2} / Γ((k+1)/2).
fn ln_sphere_volume_raw(k: u32) -> f64 {
    let kf = k as f64;
    (2.0f64).ln() + (kf + 1.0) / 2.0 * PI.ln() - ln_gamma((kf + 1.0) / 2.0)
}

/// Volume of the unit n-sphere σ_n.
pub fn sphere_volume(n: Dimension) -> f64 {
    ln_sphere_volume_raw(n.get()).exp()
}

/// The dimensional constant
/// K_n = (n+1)/n · ( Γ(n) Γ((n+1)/2) / (Γ(n+1/2) Γ(n/2)) )^{2/n},
/// evaluated in log space so large n stays finite. K_2 = 1 exactly.
pub fn k_constant(n: Dimension) -> f64 {
    let nf = n.as_f64();
    let lg = ln_gamma(nf) + ln_gamma((nf + 1.0) / 2.0) - ln_gamma(nf + 0.5) - ln_gamma(nf / 2.0);
    (nf + 1.0) / nf * (2.0 / nf * lg).exp()
}

/// Conjectured sharp bound n·(2σ_n)^{2/n}.
pub fn conjecture_bound(n: Dimension) -> f64 {
    let nf = n.as_f64();
    nf * (2.0 / nf * ((2.0f64).ln() + ln_sphere_volume_raw(n.get()))).exp()
}

/// Proven bound K_n·n·(2σ_n)^{2/n}.
pub fn theorem_bound(n: Dimension) -> f64 {
    k_constant(n) * conjecture_bound(n)
}

/// The constants bundle reported by the CLI.
#[derive(Clone, Copy, Debug)]
pub struct BoundConstants {
    pub sigma_n: f64,
    pub k_n: f64,
    pub theorem_bound: f64,
    pub conjecture_bound: f64,
}

pub fn bound_constants(n: Dimension) -> BoundConstants {
    BoundConstants {
        sigma_n: sphere_volume(n),
        k_n: k_constant(n),
        theorem_bound: theorem_bound(n),
        conjecture_bound: conjecture_bound(n),
    }
}

/// ∫_{S^n} (1 - (s·x)^2)^{n/2} dσ(x), the n-th power norm of the tangential
/// gradient of the linear function x ↦ s·x; independent of the unit vector s.
///
/// Computed by Gauss-Legendre quadrature of the zonal reduction
/// σ_{n-1} ∫_{-1}^{1} (1-t²)^{n/2} (1-t²)^{(n-2)/2} dt; the integrand is the
/// polynomial (1-t²)^{n-1}, so the rule is exact.
pub fn grad_norm_integral(n: Dimension) -> f64 {
    let nf = n.as_f64();
    let (nodes, weights) = gauss_legendre(n.get() as usize + 2);
    let zonal: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(t, w)| w * (1.0 - t * t).powf(nf / 2.0) * (1.0 - t * t).powf((nf - 2.0) / 2.0))
        .sum();
    ln_sphere_volume_raw(n.get() - 1).exp() * zonal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::gamma;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn rejects_low_dimension() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(1).is_err());
        assert!(Dimension::new(2).is_ok());
    }

    #[test]
    fn classical_sphere_volumes() {
        assert!((sphere_volume(dim(2)) - 4.0 * PI).abs() < 1e-12);
        assert!((sphere_volume(dim(3)) - 2.0 * PI * PI).abs() < 1e-12);
        // sigma_4 = 8 pi^2 / 3
        assert!((sphere_volume(dim(4)) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn k2_is_one() {
        assert!((k_constant(dim(2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k3_matches_direct_gamma_evaluation() {
        // (4/3)(32/(15 pi))^{2/3}, evaluated independently
        let direct = 4.0 / 3.0 * (32.0 / (15.0 * PI)).powf(2.0 / 3.0);
        assert!((k_constant(dim(3)) - direct).abs() < 1e-13);
        assert!((k_constant(dim(3)) - 1.030096633064952).abs() < 1e-12);
    }

    #[test]
    fn k_range_for_moderate_dimensions() {
        for n in 3..=50 {
            let k = k_constant(dim(n));
            assert!(k > 1.0 && k <= 1.04, "K_{n} = {k}");
        }
    }

    #[test]
    fn k_decreases_to_one_after_interior_maximum() {
        // the maximum sits at n = 4; beyond it K_n decreases monotonically,
        // with K_n - 1 ~ 0.3069/n, so the 1e-3 mark is first crossed near n = 307
        let mut prev = k_constant(dim(4));
        for n in 5..=400 {
            let k = k_constant(dim(n));
            assert!(k < prev, "K not decreasing at n = {n}");
            assert!(k > 1.0);
            prev = k;
        }
        assert!(k_constant(dim(307)) - 1.0 < 1e-3);
        assert!(k_constant(dim(1000)) - 1.0 < 1e-3);
    }

    #[test]
    fn theorem_bound_values() {
        assert!((theorem_bound(dim(2)) - 16.0 * PI).abs() < 1e-10);
        // frozen from direct Gamma evaluation: K_3 · 3 · (4π²)^{2/3}
        assert!((theorem_bound(dim(3)) - 35.829359684718561).abs() < 1e-10);
        for n in 2..=20 {
            let ratio = theorem_bound(dim(n)) / conjecture_bound(dim(n));
            assert!((ratio - k_constant(dim(n))).abs() < 1e-12);
        }
    }

    #[test]
    fn conjecture_below_theorem_for_n_at_least_3() {
        assert!((conjecture_bound(dim(2)) - theorem_bound(dim(2))).abs() < 1e-10);
        for n in 3..=50 {
            assert!(conjecture_bound(dim(n)) < theorem_bound(dim(n)));
        }
    }

    #[test]
    fn gradient_integral_closed_form() {
        assert!((grad_norm_integral(dim(2)) - 8.0 * PI / 3.0).abs() < 1e-13);
        // sigma_{n-1} sqrt(pi) Γ(n)/Γ(n+1/2) with sigma_{n-1} = 2 π^{n/2}/Γ(n/2)
        for n in 2..=6 {
            let nf = n as f64;
            let sigma_prev = 2.0 * PI.powf(nf / 2.0) / gamma(nf / 2.0);
            let closed = sigma_prev * PI.sqrt() * gamma(nf) / gamma(nf + 0.5);
            let quad = grad_norm_integral(dim(n));
            assert!((quad - closed).abs() < 1e-12 * closed, "n = {n}: {quad} vs {closed}");
        }
    }

    #[test]
    fn gamma_identity_links_integral_to_bound() {
        // 2^{2/n} (n+1) I_n^{2/n} = K_n n (2 σ_n)^{2/n}
        for n in 2..=8 {
            let nf = n as f64;
            let lhs = (2.0f64).powf(2.0 / nf) * (nf + 1.0) * grad_norm_integral(dim(n)).powf(2.0 / nf);
            let rhs = theorem_bound(dim(n));
            assert!((lhs - rhs).abs() < 1e-10 * rhs, "n = {n}: {lhs} vs {rhs}");
        }
    }
}
