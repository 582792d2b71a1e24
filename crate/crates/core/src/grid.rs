//! Quadrature grids on S² and S³.
//!
//! S² uses a Gauss-Legendre × uniform-azimuth product rule (polar axis e₃),
//! S³ a Gauss-Chebyshev(2nd kind) × S² product (polar axis e₁). Both are exact
//! for polynomials — hence for products of spherical harmonics — up to the
//! declared order.
//!
//! `cap_panel_grid` builds polar-angle panel rules split exactly at a cap
//! boundary {x·e₁ = h}, for integrands that are smooth on each side of the
//! cap but kinked across it.

use crate::constants::Dimension;
use crate::error::{Error, Result};
use crate::geom::SpherePoint;
use crate::par;
use crate::quad1d::{gauss_chebyshev2, gauss_legendre, gauss_legendre_on};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    n: Dimension,
    order: u32,
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    #[inline]
    pub fn dimension(&self) -> Dimension {
        self.n
    }

    #[inline]
    pub fn order(&self) -> u32 {
        self.order
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpherePoint, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    /// Deterministic quadrature of a pointwise function.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&SpherePoint) -> f64 + Sync + Send,
    {
        let idx: Vec<usize> = (0..self.len()).collect();
        par::sum(&idx, |&i| self.weights[i] * f(&self.nodes[i]))
    }

    pub fn total_weight(&self) -> f64 {
        par::sum(&self.weights, |w| *w)
    }
}

/// Product quadrature grid on Sⁿ exact for polynomials of degree <= order.
/// Only n = 2 and n = 3 are provided.
pub fn grid(n: Dimension, order: u32) -> Result<QuadratureGrid> {
    if order < 1 {
        return Err(Error::InvalidInput("grid order must be at least 1".into()));
    }
    match n.get() {
        2 => Ok(grid_s2(order)),
        3 => Ok(grid_s3(order)),
        other => Err(Error::UnsupportedGridDimension(other)),
    }
}

fn grid_s2(order: u32) -> QuadratureGrid {
    let n_polar = (order as usize + 2) / 2; // GL exact to 2n-1 >= order
    let n_azimuth = order as usize + 1;
    let (us, uw) = gauss_legendre(n_polar);

    let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(n_polar * n_azimuth);
    let dphi = 2.0 * PI / n_azimuth as f64;
    for (u, wu) in us.iter().zip(&uw) {
        let rho = (1.0 - u * u).sqrt();
        for j in 0..n_azimuth {
            let phi = dphi * j as f64;
            nodes.push(
                SpherePoint::from_coords(&[rho * phi.cos(), rho * phi.sin(), *u])
                    .expect("grid node on sphere"),
            );
            weights.push(wu * dphi);
        }
    }
    QuadratureGrid {
        n: Dimension::new(2).unwrap(),
        order,
        nodes,
        weights,
    }
}

fn grid_s3(order: u32) -> QuadratureGrid {
    // u = x·e₁ with slice weight sqrt(1-u²): Gauss-Chebyshev 2nd kind
    let n_u = (order as usize + 2) / 2;
    let (us, uw) = gauss_chebyshev2(n_u);
    let inner = grid_s2(order);

    let mut nodes = Vec::with_capacity(n_u * inner.len());
    let mut weights = Vec::with_capacity(n_u * inner.len());
    for (u, wu) in us.iter().zip(&uw) {
        let rho = (1.0 - u * u).sqrt();
        for (y, wy) in inner.iter() {
            let yv = y.vector();
            nodes.push(
                SpherePoint::from_coords(&[*u, rho * yv[0], rho * yv[1], rho * yv[2]])
                    .expect("grid node on sphere"),
            );
            weights.push(wu * wy);
        }
    }
    QuadratureGrid {
        n: Dimension::new(3).unwrap(),
        order,
        nodes,
        weights,
    }
}

/// Panel grid for a cap about an arbitrary axis: the e₁-aligned rule with all
/// nodes rotated so the split circle lies exactly on the cap boundary.
pub fn cap_panel_grid_about(
    n: Dimension,
    axis: &SpherePoint,
    threshold: f64,
    polar_nodes: usize,
    azimuth: u32,
) -> Result<QuadratureGrid> {
    let base = cap_panel_grid(n, threshold, polar_nodes, azimuth)?;
    // maps e₁ to the axis
    let rot = crate::linalg::map_to_first_axis(axis.vector()).transpose();
    let nodes = base
        .nodes
        .iter()
        .map(|x| SpherePoint::new(rot.apply(x.vector())).expect("rotated node"))
        .collect();
    Ok(QuadratureGrid {
        n,
        order: 0,
        nodes,
        weights: base.weights,
    })
}

/// Polar-angle panel grid for a cap around e₁ with membership threshold
/// h ∈ (-1, 1): θ-panels [0, arccos h] and [arccos h, π], Gauss-Legendre in θ
/// with `polar_nodes` points per panel. For S² the transverse rule is a
/// uniform azimuth with `azimuth` points; for S³ it is an S² grid of order
/// `azimuth`.
pub fn cap_panel_grid(
    n: Dimension,
    threshold: f64,
    polar_nodes: usize,
    azimuth: u32,
) -> Result<QuadratureGrid> {
    if !(-1.0..1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!(
            "cap threshold must lie in (-1, 1), got {threshold}"
        )));
    }
    let theta_split = threshold.acos();
    let mut panels = Vec::new();
    for (a, b) in [(0.0, theta_split), (theta_split, PI)] {
        panels.push(gauss_legendre_on(polar_nodes, a, b));
    }

    match n.get() {
        2 => {
            let m = azimuth as usize;
            let dphi = 2.0 * PI / m as f64;
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for (ts, tw) in &panels {
                for (theta, wt) in ts.iter().zip(tw) {
                    let (s, c) = theta.sin_cos();
                    for j in 0..m {
                        let phi = dphi * j as f64;
                        nodes.push(
                            SpherePoint::from_coords(&[c, s * phi.cos(), s * phi.sin()])
                                .expect("panel node"),
                        );
                        // dσ = sinθ dθ dφ with polar axis e₁
                        weights.push(wt * s * dphi);
                    }
                }
            }
            Ok(QuadratureGrid {
                n,
                order: 0,
                nodes,
                weights,
            })
        }
        3 => {
            let inner = grid_s2(azimuth);
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for (ts, tw) in &panels {
                for (theta, wt) in ts.iter().zip(tw) {
                    let (s, c) = theta.sin_cos();
                    for (y, wy) in inner.iter() {
                        let yv = y.vector();
                        nodes.push(
                            SpherePoint::from_coords(&[c, s * yv[0], s * yv[1], s * yv[2]])
                                .expect("panel node"),
                        );
                        // dσ₃ = sin²θ dθ dσ₂ with polar axis e₁
                        weights.push(wt * s * s * wy);
                    }
                }
            }
            Ok(QuadratureGrid {
                n,
                order: 0,
                nodes,
                weights,
            })
        }
        other => Err(Error::UnsupportedGridDimension(other)),
    }
}
