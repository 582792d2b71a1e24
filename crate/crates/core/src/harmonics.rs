//! Real orthonormal spherical harmonics on S² and S³, with tangential
//! gradients in separable component form.
//!
//! S² harmonics use normalized associated Legendre functions with polar axis
//! e₃; S³ harmonics factor through Gegenbauer polynomials along the e₁ axis
//! with an S² harmonic on the transverse sphere. Gradients are returned as
//! per-basis component vectors c so that ⟨∇Y_i, ∇Y_j⟩ = Σ_c c_i c_j, which is
//! what quadratic-form assembly needs.

use crate::constants::Dimension;
use crate::error::{Error, Result};
use crate::gamma::ln_gamma;
use crate::geom::SpherePoint;
use std::f64::consts::PI;

/// Number of independent harmonics of degree exactly l on Sⁿ.
pub fn harmonic_space_dim(n: Dimension, l: u32) -> usize {
    match n.get() {
        2 => 2 * l as usize + 1,
        3 => ((l + 1) * (l + 1)) as usize,
        _ => unreachable!("bases exist only for n = 2, 3"),
    }
}

/// Total dimension of the space of harmonics of degree <= l_max on Sⁿ.
pub fn basis_dim(n: Dimension, l_max: u32) -> usize {
    (0..=l_max).map(|l| harmonic_space_dim(n, l)).sum()
}

/// Laplace eigenvalue of degree-l harmonics on Sⁿ: l(l + n - 1).
pub fn eigenvalue(n: Dimension, l: u32) -> f64 {
    let lf = l as f64;
    lf * (lf + n.as_f64() - 1.0)
}

/// Orthonormal harmonic basis up to a degree cutoff.
#[derive(Clone, Debug)]
pub enum Basis {
    S2(S2Basis),
    S3(S3Basis),
}

impl Basis {
    pub fn new(n: Dimension, l_max: u32) -> Result<Basis> {
        match n.get() {
            2 => Ok(Basis::S2(S2Basis::new(l_max))),
            3 => Ok(Basis::S3(S3Basis::new(l_max))),
            other => Err(Error::UnsupportedGridDimension(other)),
        }
    }

    pub fn dimension(&self) -> Dimension {
        match self {
            Basis::S2(_) => Dimension::new(2).unwrap(),
            Basis::S3(_) => Dimension::new(3).unwrap(),
        }
    }

    pub fn l_max(&self) -> u32 {
        match self {
            Basis::S2(b) => b.l_max,
            Basis::S3(b) => b.l_max,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Basis::S2(b) => b.len(),
            Basis::S3(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Degree of the idx-th basis function.
    pub fn degree(&self, idx: usize) -> u32 {
        match self {
            Basis::S2(b) => b.degrees[idx],
            Basis::S3(b) => b.degrees[idx],
        }
    }

    /// Number of gradient component vectors.
    pub fn gradient_components(&self) -> usize {
        match self {
            Basis::S2(_) => 2,
            Basis::S3(_) => 3,
        }
    }

    pub fn values(&self, x: &SpherePoint, out: &mut [f64]) {
        match self {
            Basis::S2(b) => b.values(x, out),
            Basis::S3(b) => b.values(x, out),
        }
    }

    /// Values plus gradient components; `grads` must hold
    /// `gradient_components()` slices of length `len()`. Only valid away from
    /// the coordinate poles of the parametrization (quadrature nodes are).
    pub fn values_and_gradients(&self, x: &SpherePoint, vals: &mut [f64], grads: &mut [Vec<f64>]) {
        match self {
            Basis::S2(b) => {
                let (first, rest) = grads.split_at_mut(1);
                b.values_and_gradients(x, vals, &mut first[0], &mut rest[0]);
            }
            Basis::S3(b) => b.values_and_gradients(x, vals, grads),
        }
    }

    /// Σ coeffs[i] Y_i(x).
    pub fn eval_sum(&self, coeffs: &[f64], x: &SpherePoint) -> f64 {
        debug_assert_eq!(coeffs.len(), self.len());
        let mut vals = vec![0.0; self.len()];
        self.values(x, &mut vals);
        vals.iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }
}

// ---------------------------------------------------------------------------
// S²
// ---------------------------------------------------------------------------

/// Index order: l ascending, m from -l to l. idx = l² + (m + l).
#[derive(Clone, Debug)]
pub struct S2Basis {
    pub l_max: u32,
    degrees: Vec<u32>,
    orders: Vec<i32>,
    /// normalization per (l, |m|), triangular layout
    norms: Vec<f64>,
}

fn tri(l: u32, m: u32) -> usize {
    (l * (l + 1) / 2 + m) as usize
}

impl S2Basis {
    pub fn new(l_max: u32) -> S2Basis {
        let dim = ((l_max + 1) * (l_max + 1)) as usize;
        let mut degrees = Vec::with_capacity(dim);
        let mut orders = Vec::with_capacity(dim);
        for l in 0..=l_max {
            for m in -(l as i32)..=(l as i32) {
                degrees.push(l);
                orders.push(m);
            }
        }
        let mut norms = vec![0.0; tri(l_max, l_max) + 1];
        for l in 0..=l_max {
            for m in 0..=l {
                let lf = l as f64;
                let mf = m as f64;
                let ln_ratio = ln_gamma(lf - mf + 1.0) - ln_gamma(lf + mf + 1.0);
                norms[tri(l, m)] = ((2.0 * lf + 1.0) / (4.0 * PI) * ln_ratio.exp()).sqrt();
            }
        }
        S2Basis {
            l_max,
            degrees,
            orders,
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// Associated Legendre table (no Condon-Shortley phase) at u, plus the
    /// θ-derivative table when requested.
    fn legendre(&self, u: f64, sin_theta: f64, dtheta: Option<&mut Vec<f64>>) -> Vec<f64> {
        let l_max = self.l_max;
        let size = tri(l_max, l_max) + 1;
        let mut p = vec![0.0; size];
        p[0] = 1.0;
        let mut pmm = 1.0;
        for m in 0..=l_max {
            if m > 0 {
                pmm *= (2.0 * m as f64 - 1.0) * sin_theta;
                p[tri(m, m)] = pmm;
            }
            if m < l_max {
                p[tri(m + 1, m)] = u * (2.0 * m as f64 + 1.0) * p[tri(m, m)];
            }
            for l in m + 2..=l_max {
                let lf = l as f64;
                let mf = m as f64;
                p[tri(l, m)] = ((2.0 * lf - 1.0) * u * p[tri(l - 1, m)]
                    - (lf + mf - 1.0) * p[tri(l - 2, m)])
                    / (lf - mf);
            }
        }
        if let Some(dp) = dtheta {
            dp.resize(size, 0.0);
            let s = sin_theta.max(1e-280);
            for m in 0..=l_max {
                for l in m..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    let prev = if l > m { p[tri(l - 1, m)] } else { 0.0 };
                    dp[tri(l, m)] = (lf * u * p[tri(l, m)] - (lf + mf) * prev) / s;
                }
            }
        }
        p
    }

    fn angles(x: &SpherePoint) -> (f64, f64, f64) {
        let v = x.vector();
        let u = v[2].clamp(-1.0, 1.0);
        let sin_theta = (v[0] * v[0] + v[1] * v[1]).sqrt();
        let phi = v[1].atan2(v[0]);
        (u, sin_theta, phi)
    }

    pub fn values(&self, x: &SpherePoint, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let (u, sin_theta, phi) = Self::angles(x);
        let p = self.legendre(u, sin_theta, None);
        let sqrt2 = std::f64::consts::SQRT_2;
        for (idx, (&l, &m)) in self.degrees.iter().zip(&self.orders).enumerate() {
            let am = m.unsigned_abs();
            let base = self.norms[tri(l, am)] * p[tri(l, am)];
            out[idx] = match m.cmp(&0) {
                std::cmp::Ordering::Equal => base,
                std::cmp::Ordering::Greater => sqrt2 * base * (m as f64 * phi).cos(),
                std::cmp::Ordering::Less => sqrt2 * base * (am as f64 * phi).sin(),
            };
        }
    }

    /// Gradient components: c_θ = ∂_θ Y and c_φ = (1/sinθ) ∂_φ Y, so that
    /// ⟨∇Y_i, ∇Y_j⟩ = c_θi c_θj + c_φi c_φj. Valid at interior nodes.
    pub fn values_and_gradients(
        &self,
        x: &SpherePoint,
        vals: &mut [f64],
        c_theta: &mut [f64],
        c_phi: &mut [f64],
    ) {
        let (u, sin_theta, phi) = Self::angles(x);
        let mut dp = Vec::new();
        let p = self.legendre(u, sin_theta, Some(&mut dp));
        let s = sin_theta.max(1e-280);
        let sqrt2 = std::f64::consts::SQRT_2;
        for (idx, (&l, &m)) in self.degrees.iter().zip(&self.orders).enumerate() {
            let am = m.unsigned_abs();
            let norm = self.norms[tri(l, am)];
            let (t, dt) = match m.cmp(&0) {
                std::cmp::Ordering::Equal => (1.0, 0.0),
                std::cmp::Ordering::Greater => {
                    let a = m as f64 * phi;
                    (sqrt2 * a.cos(), -sqrt2 * m as f64 * a.sin())
                }
                std::cmp::Ordering::Less => {
                    let a = am as f64 * phi;
                    (sqrt2 * a.sin(), sqrt2 * am as f64 * a.cos())
                }
            };
            vals[idx] = norm * p[tri(l, am)] * t;
            c_theta[idx] = norm * dp[tri(l, am)] * t;
            c_phi[idx] = if m == 0 { 0.0 } else { norm * p[tri(l, am)] / s * dt };
        }
    }
}

// ---------------------------------------------------------------------------
// S³
// ---------------------------------------------------------------------------

/// Index order: l ascending, l₂ ascending within l, m from -l₂ to l₂.
#[derive(Clone, Debug)]
pub struct S3Basis {
    pub l_max: u32,
    degrees: Vec<u32>,
    sub_degrees: Vec<u32>,
    orders: Vec<i32>,
    s2: S2Basis,
    /// normalization per (l, l₂), triangular layout
    norms: Vec<f64>,
}

impl S3Basis {
    pub fn new(l_max: u32) -> S3Basis {
        let mut degrees = Vec::new();
        let mut sub_degrees = Vec::new();
        let mut orders = Vec::new();
        for l in 0..=l_max {
            for l2 in 0..=l {
                for m in -(l2 as i32)..=(l2 as i32) {
                    degrees.push(l);
                    sub_degrees.push(l2);
                    orders.push(m);
                }
            }
        }
        // 1/h with h = π 2^{1-2λ} Γ(k+2λ) / (k! (k+λ) Γ(λ)²), λ = l₂+1, k = l-l₂
        let mut norms = vec![0.0; tri(l_max, l_max) + 1];
        for l in 0..=l_max {
            for l2 in 0..=l {
                let lambda = l2 as f64 + 1.0;
                let k = (l - l2) as f64;
                let ln_h = PI.ln() + (1.0 - 2.0 * lambda) * (2.0f64).ln()
                    + ln_gamma(k + 2.0 * lambda)
                    - ln_gamma(k + 1.0)
                    - (k + lambda).ln()
                    - 2.0 * ln_gamma(lambda);
                norms[tri(l, l2)] = (-0.5 * ln_h).exp();
            }
        }
        S3Basis {
            l_max,
            degrees,
            sub_degrees,
            orders,
            s2: S2Basis::new(l_max),
            norms,
        }
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// Gegenbauer table C_k^{(λ)}(u) for λ = 1..=λ_max, k = 0..=k_max.
    fn gegenbauer(u: f64, lambda_max: u32, k_max: u32) -> Vec<Vec<f64>> {
        let mut table = Vec::with_capacity(lambda_max as usize);
        for li in 1..=lambda_max {
            let lambda = li as f64;
            let mut row = vec![0.0; k_max as usize + 1];
            row[0] = 1.0;
            if k_max >= 1 {
                row[1] = 2.0 * lambda * u;
            }
            for k in 2..=k_max as usize {
                let kf = k as f64;
                row[k] = (2.0 * (kf + lambda - 1.0) * u * row[k - 1]
                    - (kf + 2.0 * lambda - 2.0) * row[k - 2])
                    / kf;
            }
            table.push(row);
        }
        table
    }

    fn split(x: &SpherePoint) -> (f64, f64, SpherePoint) {
        let v = x.vector();
        let u = v[0].clamp(-1.0, 1.0);
        let rho = (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
        let y = if rho > 1e-280 {
            SpherePoint::from_coords(&[v[1] / rho, v[2] / rho, v[3] / rho])
                .expect("unit transverse direction")
        } else {
            SpherePoint::axis(3, 2)
        };
        (u, rho, y)
    }

    /// Radial factor F_{l,l₂}(u) = N (1-u²)^{l₂/2} C_{l-l₂}^{(l₂+1)}(u).
    fn radial(&self, u: f64, rho: f64) -> Vec<f64> {
        let geg = Self::gegenbauer(u, self.l_max + 1, self.l_max);
        let mut f = vec![0.0; tri(self.l_max, self.l_max) + 1];
        let mut rho_pow = 1.0;
        for l2 in 0..=self.l_max {
            if l2 > 0 {
                rho_pow *= rho;
            }
            for l in l2..=self.l_max {
                let k = (l - l2) as usize;
                f[tri(l, l2)] = self.norms[tri(l, l2)] * rho_pow * geg[l2 as usize][k];
            }
        }
        f
    }

    /// Radial factors plus u-derivatives.
    fn radial_with_derivative(&self, u: f64, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let geg = Self::gegenbauer(u, self.l_max + 2, self.l_max);
        let size = tri(self.l_max, self.l_max) + 1;
        let mut f = vec![0.0; size];
        let mut df = vec![0.0; size];
        let mut rho_pow = 1.0; // (1-u²)^{l₂/2}
        for l2 in 0..=self.l_max {
            if l2 > 0 {
                rho_pow *= rho;
            }
            // (1-u²)^{(l₂-2)/2}, needed only when l₂ >= 1
            let rho_pow_m2 = if l2 == 0 { 0.0 } else { rho_pow / (rho * rho) };
            let lambda = l2 as f64 + 1.0;
            for l in l2..=self.l_max {
                let k = (l - l2) as usize;
                let c = geg[l2 as usize][k];
                let dc = if k == 0 {
                    0.0
                } else {
                    2.0 * lambda * geg[l2 as usize + 1][k - 1]
                };
                let norm = self.norms[tri(l, l2)];
                f[tri(l, l2)] = norm * rho_pow * c;
                df[tri(l, l2)] = norm * (-(l2 as f64) * u * rho_pow_m2 * c + rho_pow * dc);
            }
        }
        (f, df)
    }

    pub fn values(&self, x: &SpherePoint, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let (u, rho, y) = Self::split(x);
        let f = self.radial(u, rho);
        let mut z = vec![0.0; self.s2.len()];
        self.s2.values(&y, &mut z);
        for idx in 0..self.len() {
            let l = self.degrees[idx];
            let l2 = self.sub_degrees[idx];
            let m = self.orders[idx];
            let z_idx = (l2 * l2) as usize + (m + l2 as i32) as usize;
            out[idx] = f[tri(l, l2)] * z[z_idx];
        }
    }

    /// Gradient components g₁ = sinχ F' Z, g₂ = (F/sinχ) c_θ(Z),
    /// g₃ = (F/sinχ) c_φ(Z); ⟨∇Y_i, ∇Y_j⟩ = Σ g_c,i g_c,j.
    pub fn values_and_gradients(&self, x: &SpherePoint, vals: &mut [f64], grads: &mut [Vec<f64>]) {
        let (u, rho, y) = Self::split(x);
        let rho_s = rho.max(1e-280);
        let (f, df) = self.radial_with_derivative(u, rho);
        let nz = self.s2.len();
        let mut z = vec![0.0; nz];
        let mut zt = vec![0.0; nz];
        let mut zp = vec![0.0; nz];
        self.s2.values_and_gradients(&y, &mut z, &mut zt, &mut zp);
        for idx in 0..self.len() {
            let l = self.degrees[idx];
            let l2 = self.sub_degrees[idx];
            let m = self.orders[idx];
            let z_idx = (l2 * l2) as usize + (m + l2 as i32) as usize;
            let fi = f[tri(l, l2)];
            let dfi = df[tri(l, l2)];
            vals[idx] = fi * z[z_idx];
            grads[0][idx] = rho * dfi * z[z_idx];
            if l2 == 0 {
                grads[1][idx] = 0.0;
                grads[2][idx] = 0.0;
            } else {
                grads[1][idx] = fi / rho_s * zt[z_idx];
                grads[2][idx] = fi / rho_s * zp[z_idx];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::grid;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn dims_count_harmonics() {
        assert_eq!(basis_dim(dim(2), 3), 16);
        assert_eq!(basis_dim(dim(3), 2), 1 + 4 + 9);
        assert_eq!(Basis::new(dim(2), 15).unwrap().len(), 256);
        assert_eq!(Basis::new(dim(3), 10).unwrap().len(), 506);
    }

    fn quadrature_gram(n: u32, l_max: u32, with_grads: bool) -> (usize, Vec<f64>, Basis) {
        let basis = Basis::new(dim(n), l_max).unwrap();
        let g = grid(dim(n), 2 * l_max + 2).unwrap();
        let nb = basis.len();
        let nc = basis.gradient_components();
        let mut gram = vec![0.0; nb * nb];
        let mut vals = vec![0.0; nb];
        let mut grads: Vec<Vec<f64>> = vec![vec![0.0; nb]; nc];
        for (x, w) in g.iter() {
            if with_grads {
                basis.values_and_gradients(x, &mut vals, &mut grads);
                for i in 0..nb {
                    for j in i..nb {
                        let mut dot = 0.0;
                        for gc in &grads {
                            dot += gc[i] * gc[j];
                        }
                        gram[i * nb + j] += w * dot;
                    }
                }
            } else {
                basis.values(x, &mut vals);
                for i in 0..nb {
                    for j in i..nb {
                        gram[i * nb + j] += w * vals[i] * vals[j];
                    }
                }
            }
        }
        (nb, gram, basis)
    }

    #[test]
    fn s2_orthonormal_under_quadrature() {
        let (nb, gram, _) = quadrature_gram(2, 6, false);
        for i in 0..nb {
            for j in i..nb {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i * nb + j] - expect).abs() < 1e-11,
                    "({i},{j}): {}",
                    gram[i * nb + j]
                );
            }
        }
    }

    #[test]
    fn s3_orthonormal_under_quadrature() {
        let (nb, gram, _) = quadrature_gram(3, 4, false);
        for i in 0..nb {
            for j in i..nb {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i * nb + j] - expect).abs() < 1e-10,
                    "({i},{j}): {}",
                    gram[i * nb + j]
                );
            }
        }
    }

    #[test]
    fn gradients_reproduce_laplace_eigenvalues() {
        // ∫⟨∇Y_i, ∇Y_j⟩ dσ = l(l + n - 1) δ_ij
        for n in [2u32, 3] {
            let l_max = if n == 2 { 5 } else { 4 };
            let (nb, gram, basis) = quadrature_gram(n, l_max, true);
            for i in 0..nb {
                for j in i..nb {
                    let expect = if i == j {
                        eigenvalue(dim(n), basis.degree(i))
                    } else {
                        0.0
                    };
                    assert!(
                        (gram[i * nb + j] - expect).abs() < 1e-9,
                        "n={n} ({i},{j}): {} vs {expect}",
                        gram[i * nb + j]
                    );
                }
            }
        }
    }

    #[test]
    fn s2_degree_sum_is_rotation_invariant() {
        // Σ_m Y_lm(x)² = (2l+1)/(4π) for every x
        use crate::geom::random_unit_vector;
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let basis = S2Basis::new(8);
        let mut vals = vec![0.0; basis.len()];
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..20 {
            let x = random_unit_vector(3, &mut rng);
            basis.values(&x, &mut vals);
            for l in 0..=8u32 {
                let start = (l * l) as usize;
                let end = ((l + 1) * (l + 1)) as usize;
                let sum: f64 = vals[start..end].iter().map(|v| v * v).sum();
                let expect = (2.0 * l as f64 + 1.0) / (4.0 * PI);
                assert!((sum - expect).abs() < 1e-11, "l = {l}");
            }
        }
    }

    #[test]
    fn low_degree_values_match_closed_forms() {
        let basis = S2Basis::new(2);
        let x = SpherePoint::from_coords(&[0.3, -0.5, (1.0f64 - 0.34).sqrt()]).unwrap();
        let mut vals = vec![0.0; basis.len()];
        basis.values(&x, &mut vals);
        let v = x.vector();
        // Y_00 = 1/sqrt(4π); Y_{1,·} are sqrt(3/4π)·(y, z, x) in (-1, 0, +1) order
        assert!((vals[0] - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-14);
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((vals[1] - c1 * v[1]).abs() < 1e-14);
        assert!((vals[2] - c1 * v[2]).abs() < 1e-14);
        assert!((vals[3] - c1 * v[0]).abs() < 1e-14);
    }
}
