//! Laplace eigenvalues of conformal metrics by spherical-harmonic Galerkin
//! discretization, the scale-invariant products λ_k·Vol^{2/n}, and metric
//! normalization (volume one, vanishing first moments, maximal direction e₁).
//!
//! For g = e^{2w} g₀ the weak forms reduce to weighted round-sphere integrals:
//! ∫|∇u|²_g dv_g = ∫|∇u|²₀ e^{(n-2)w} dv₀ and ∫u² dv_g = ∫u² e^{nw} dv₀, so
//! the discrete problem is A v = λ B v over harmonics of degree ≤ L with
//! weighted stiffness and mass matrices. For n = 2 the stiffness weight is 1
//! and A is exactly diag(l(l+1)).

use crate::constants::Dimension;
use crate::error::{Error, Result};
use crate::grid::{grid, QuadratureGrid};
use crate::harmonics::{eigenvalue, Basis};
use crate::linalg::map_to_first_axis;
use crate::measure::{hersch_renormalize, DiscreteMeasure, HerschOptions};
use crate::metric::{ConformalMetric, LogConformalFactor, NormalizedMetric};
use crate::par;
use crate::quadform::{gram, maximal_direction, MULTIPLICITY_TOLERANCE};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Eigenvalues and volume of a conformal metric, Galerkin-discretized.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: u32,
    pub basis_l: u32,
    pub grid_order: u32,
    /// ascending, starting at λ₀ ≈ 0, repeated with multiplicity
    pub eigenvalues: Vec<f64>,
    pub volume: f64,
}

impl SpectrumReport {
    /// λ_k · Vol^{2/n}.
    pub fn lambda_invariant(&self, k: usize) -> f64 {
        lambda_invariant(self, k)
    }
}

pub fn lambda_invariant(report: &SpectrumReport, k: usize) -> f64 {
    assert!(
        k < report.eigenvalues.len(),
        "eigenvalue index {k} beyond computed range {}",
        report.eigenvalues.len()
    );
    report.eigenvalues[k] * report.volume.powf(2.0 / report.n as f64)
}

/// Solver options; defaults follow the desk-scale targets (L = 15 on S²,
/// L = 10 on S³, grid order 2L + 12).
#[derive(Clone, Copy, Debug)]
pub struct SpectrumOptions {
    pub basis_l: u32,
    pub grid_order: u32,
    pub k_max: usize,
}

impl SpectrumOptions {
    pub fn for_dimension(n: Dimension) -> Self {
        let basis_l = if n.get() == 2 { 15 } else { 10 };
        SpectrumOptions {
            basis_l,
            grid_order: 2 * basis_l + 12,
            k_max: 9,
        }
    }

    pub fn with_basis(mut self, l: u32) -> Self {
        self.basis_l = l;
        self.grid_order = 2 * l + 12;
        self
    }
}

/// Weighted symmetric product Σ_k rows_a[i][k] rows_b[j][k] assembled in
/// parallel over rows.
fn symmetric_product(rows: &[Vec<f64>], out: &mut DMatrix<f64>) {
    let nb = rows.len();
    let mut upper: Vec<Vec<f64>> = vec![Vec::new(); nb];
    par::fill_indexed(&mut upper, |i| {
        let ri = &rows[i];
        (i..nb)
            .map(|j| {
                let rj = &rows[j];
                let mut s = 0.0;
                for k in 0..ri.len() {
                    s += ri[k] * rj[k];
                }
                s
            })
            .collect()
    });
    for i in 0..nb {
        for (off, v) in upper[i].iter().enumerate() {
            let j = i + off;
            out[(i, j)] += v;
            if i != j {
                out[(j, i)] += v;
            }
        }
    }
}

/// Basis value tables scaled by sqrt of the quadrature weight times a
/// positive pointwise factor, row-major over basis functions.
fn scaled_tables<G: LogConformalFactor>(
    g: &G,
    basis: &Basis,
    quad: &QuadratureGrid,
    weight_exponent: f64,
    with_gradients: bool,
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let nb = basis.len();
    let nc = basis.gradient_components();
    let nodes: Vec<usize> = (0..quad.len()).collect();
    // node-major evaluation, then transpose into basis-major rows
    let per_node: Vec<(Vec<f64>, Vec<Vec<f64>>)> = par::map_collect(&nodes, |&k| {
        let x = &quad.nodes()[k];
        let scale = (quad.weights()[k] * (weight_exponent * g.log_factor(x)).exp()).sqrt();
        let mut vals = vec![0.0; nb];
        if with_gradients {
            let mut grads = vec![vec![0.0; nb]; nc];
            basis.values_and_gradients(x, &mut vals, &mut grads);
            for v in vals.iter_mut() {
                *v *= scale;
            }
            for gc in grads.iter_mut() {
                for v in gc.iter_mut() {
                    *v *= scale;
                }
            }
            (vals, grads)
        } else {
            basis.values(x, &mut vals);
            for v in vals.iter_mut() {
                *v *= scale;
            }
            (vals, Vec::new())
        }
    });

    let nk = quad.len();
    let mut value_rows = vec![vec![0.0; nk]; nb];
    let mut grad_rows: Vec<Vec<Vec<f64>>> = if with_gradients {
        vec![vec![vec![0.0; nk]; nb]; nc]
    } else {
        Vec::new()
    };
    for (k, (vals, grads)) in per_node.iter().enumerate() {
        for i in 0..nb {
            value_rows[i][k] = vals[i];
        }
        for (c, gc) in grads.iter().enumerate() {
            for i in 0..nb {
                grad_rows[c][i][k] = gc[i];
            }
        }
    }
    (value_rows, grad_rows)
}

/// Solve the generalized problem A v = λ B v for a conformal metric.
pub fn spectrum<G: LogConformalFactor>(g: &G, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let n = g.dimension();
    if let Some(lw) = g.harmonic_degree() {
        if opts.basis_l < lw + 2 {
            return Err(Error::InvalidInput(format!(
                "basis degree {} too small: the conformal factor has degree {lw}, need at least {}",
                opts.basis_l,
                lw + 2
            )));
        }
    }
    let basis = Basis::new(n, opts.basis_l)?;
    let nb = basis.len();
    if opts.k_max + 1 > nb {
        return Err(Error::InvalidInput(format!(
            "k_max {} needs a basis larger than {nb}",
            opts.k_max
        )));
    }
    let quad = grid(n, opts.grid_order)?;
    let nf = n.as_f64();

    // mass matrix, weight e^{nw}
    let mut b = DMatrix::<f64>::zeros(nb, nb);
    let (value_rows, _) = scaled_tables(g, &basis, &quad, nf, false);
    symmetric_product(&value_rows, &mut b);
    drop(value_rows);

    // stiffness, weight e^{(n-2)w}; diagonal and exact when n = 2
    let mut a = DMatrix::<f64>::zeros(nb, nb);
    if n.get() == 2 {
        for i in 0..nb {
            a[(i, i)] = eigenvalue(n, basis.degree(i));
        }
    } else {
        let (_, grad_rows) = scaled_tables(g, &basis, &quad, nf - 2.0, true);
        for rows in &grad_rows {
            symmetric_product(rows, &mut a);
        }
    }

    let volume = par::sum(&(0..quad.len()).collect::<Vec<_>>(), |&k| {
        quad.weights()[k] * (nf * g.log_factor(&quad.nodes()[k])).exp()
    });

    // reduce with B = L Lᵀ, then C = L⁻¹ A L⁻ᵀ symmetric
    let chol = nalgebra::Cholesky::new(b).ok_or(Error::MassNotPositiveDefinite {
        basis_l: opts.basis_l,
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&a)
        .ok_or(Error::MassNotPositiveDefinite { basis_l: opts.basis_l })?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::MassNotPositiveDefinite { basis_l: opts.basis_l })?;
    // symmetrize rounding
    let c = (&c + c.transpose()) * 0.5;

    let eig = nalgebra::SymmetricEigen::new(c);
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigenvalues.truncate(opts.k_max + 1);

    Ok(SpectrumReport {
        n: n.get(),
        basis_l: opts.basis_l,
        grid_order: opts.grid_order,
        eigenvalues,
        volume,
    })
}

/// Options controlling metric normalization.
#[derive(Clone, Copy, Debug)]
pub struct NormalizeOptions {
    pub grid_order: u32,
    pub multiplicity_tolerance: f64,
    pub hersch: HerschOptions,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            grid_order: 30,
            multiplicity_tolerance: MULTIPLICITY_TOLERANCE,
            hersch: HerschOptions::default(),
        }
    }
}

/// Bring a metric to the reference position: volume one, vanishing first
/// moments of its volume measure, gram maximal direction rotated to e₁
/// (or flagged multiple, in which case the rotation maps the top eigenvector
/// to e₁ anyway and the flag is reported).
pub fn normalize(g: &ConformalMetric, opts: &NormalizeOptions) -> Result<NormalizedMetric> {
    let n = g.dimension();
    let quad = grid(n, opts.grid_order)?;
    let raw = DiscreteMeasure::from_metric(g, &quad);
    let volume = raw.mass();
    let log_scale = -volume.ln() / n.as_f64();

    let unit = raw.scaled(1.0 / volume);
    let renorm = hersch_renormalize(&unit, &opts.hersch)?;
    let pushed = unit.pushforward(&crate::geom::SphereMap::Moebius(renorm.xi));
    let q = gram(&pushed);
    let dir = maximal_direction(&q, opts.multiplicity_tolerance);
    let rotation = map_to_first_axis(dir.s.vector());

    Ok(NormalizedMetric::compose(
        g.clone(),
        log_scale,
        renorm.xi,
        rotation,
        dir.relative_gap(),
        dir.multiple,
        dir.value,
    ))
}

/// Serialize a spectrum report to JSON.
pub fn spectrum_to_json(report: &SpectrumReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::BallPoint;
    use crate::metric::ConformalMetric;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn round_sphere_spectrum_s2() {
        let g = ConformalMetric::round(dim(2));
        let opts = SpectrumOptions {
            basis_l: 15,
            grid_order: 42,
            k_max: 15,
        };
        let report = spectrum(&g, &opts).unwrap();
        assert!((report.volume - 4.0 * PI).abs() < 1e-10);
        // l(l+1) with multiplicity 2l+1
        let expected: Vec<f64> = (0..=3u32)
            .flat_map(|l| std::iter::repeat((l * (l + 1)) as f64).take(2 * l as usize + 1))
            .collect();
        for (k, e) in expected.iter().enumerate() {
            assert!(
                (report.eigenvalues[k] - e).abs() < 1e-8,
                "λ_{k} = {} vs {e}",
                report.eigenvalues[k]
            );
        }
        // Hersch equality case
        assert!((report.lambda_invariant(1) - 8.0 * PI).abs() < 1e-6);
        assert!((report.lambda_invariant(2) - 8.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn round_sphere_spectrum_s3() {
        let g = ConformalMetric::round(dim(3));
        let opts = SpectrumOptions {
            basis_l: 5,
            grid_order: 14,
            k_max: 5,
        };
        let report = spectrum(&g, &opts).unwrap();
        assert!((report.volume - 2.0 * PI * PI).abs() < 1e-9);
        // l(l+2) with multiplicity (l+1)²: 0, 3 ×4, 8 ×9
        let expected = [0.0, 3.0, 3.0, 3.0, 3.0, 8.0];
        for (k, e) in expected.iter().enumerate() {
            assert!(
                (report.eigenvalues[k] - e).abs() < 1e-8,
                "λ_{k} = {} vs {e}",
                report.eigenvalues[k]
            );
        }
    }

    #[test]
    fn lambda_invariant_is_scale_invariant() {
        let mut rng = StdRng::seed_from_u64(21);
        let g = ConformalMetric::random(dim(2), 2, 0.3, &mut rng);
        let opts = SpectrumOptions {
            basis_l: 10,
            grid_order: 32,
            k_max: 4,
        };
        let base = spectrum(&g, &opts).unwrap();
        let scaled = spectrum(&g.shifted(0.8), &opts).unwrap();
        for k in 1..=4 {
            let a = lambda_invariant(&base, k);
            let b = lambda_invariant(&scaled, k);
            assert!((a - b).abs() < 1e-10 * a.abs(), "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn pullback_metric_is_isospectral_to_round() {
        // strongest solver test: the pullback by d_ξ is an isometric copy
        let xi = BallPoint::from_coords(&[0.1, -0.15, 0.1]).unwrap();
        let g = ConformalMetric::moebius_pullback(dim(2), xi).unwrap();
        let opts = SpectrumOptions {
            basis_l: 17,
            grid_order: 60,
            k_max: 8,
        };
        let report = spectrum(&g, &opts).unwrap();
        let expected = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
        for (k, e) in expected.iter().enumerate() {
            assert!(
                (report.eigenvalues[k] - e).abs() < 1e-6,
                "λ_{k} = {} vs {e}",
                report.eigenvalues[k]
            );
        }
    }

    #[test]
    fn galerkin_eigenvalues_decrease_with_basis() {
        let mut rng = StdRng::seed_from_u64(23);
        let g = ConformalMetric::random(dim(2), 3, 0.3, &mut rng);
        let coarse = spectrum(
            &g,
            &SpectrumOptions { basis_l: 8, grid_order: 40, k_max: 5 },
        )
        .unwrap();
        let fine = spectrum(
            &g,
            &SpectrumOptions { basis_l: 10, grid_order: 40, k_max: 5 },
        )
        .unwrap();
        for k in 0..=5 {
            assert!(
                fine.eigenvalues[k] <= coarse.eigenvalues[k] + 1e-10,
                "k = {k}: {} vs {}",
                fine.eigenvalues[k],
                coarse.eigenvalues[k]
            );
        }
    }

    #[test]
    fn rotation_invariance_of_spectrum() {
        // rotating the coefficient pattern of a zonal metric around e₃ by
        // relabeling cos/sin components must not change the spectrum
        let n = dim(2);
        // w = c·Y_{2,1}; rotating 90° about e₃ sends cos φ to -sin φ,
        // i.e. the coefficient moves to (2,-1) with a sign flip
        let mut c1 = vec![0.0; 9];
        c1[7] = 0.4; // (l=2, m=1)
        let mut c2 = vec![0.0; 9];
        c2[5] = -0.4; // (l=2, m=-1)
        let g1 = ConformalMetric::harmonic(n, 2, c1).unwrap();
        let g2 = ConformalMetric::harmonic(n, 2, c2).unwrap();
        let opts = SpectrumOptions { basis_l: 9, grid_order: 30, k_max: 4 };
        let r1 = spectrum(&g1, &opts).unwrap();
        let r2 = spectrum(&g2, &opts).unwrap();
        for k in 0..=4 {
            assert!(
                (r1.eigenvalues[k] - r2.eigenvalues[k]).abs() < 1e-8,
                "k = {k}"
            );
        }
    }

    #[test]
    fn hersch_bound_on_sampled_metrics() {
        // Λ_{n,1}(g) ≤ n σ_n^{2/n} (1 + quadrature slack)
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..3 {
            let g = ConformalMetric::random(dim(2), 3, 0.3, &mut rng);
            let report = spectrum(
                &g,
                &SpectrumOptions { basis_l: 12, grid_order: 40, k_max: 2 },
            )
            .unwrap();
            let bound = 2.0 * (4.0 * PI);
            assert!(lambda_invariant(&report, 1) <= bound + 1e-3);
        }
    }

    #[test]
    fn normalize_round_metric() {
        let g = ConformalMetric::round(dim(2));
        let norm = normalize(&g, &NormalizeOptions::default()).unwrap();
        assert!(norm.multiple, "round measure is isotropic");
        assert!((norm.log_scale() - (-(4.0 * PI).ln() / 2.0)).abs() < 1e-10);
        // normalized volume is one
        let quad = grid(dim(2), 30).unwrap();
        let nu = DiscreteMeasure::from_metric(&norm, &quad);
        assert!((nu.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn normalize_recovers_pullback() {
        // pushforward-round by d_η: normalization must undo it
        let eta = BallPoint::from_coords(&[0.2, 0.25, -0.1]).unwrap();
        let g = ConformalMetric::moebius_pullback(dim(2), eta).unwrap();
        let opts = NormalizeOptions {
            grid_order: 40,
            ..NormalizeOptions::default()
        };
        let norm = normalize(&g, &opts).unwrap();
        // the normalized metric must be the round metric of volume one:
        // w_N constant = -ln(4π)/2 everywhere
        let expect = -(4.0 * PI).ln() / 2.0;
        let quad = grid(dim(2), 20).unwrap();
        for (x, _) in quad.iter().step_by(17) {
            let w = norm.log_factor(x);
            assert!((w - expect).abs() < 1e-6, "w = {w} vs {expect}");
        }
    }

    #[test]
    fn normalize_invariants_on_random_metric() {
        let mut rng = StdRng::seed_from_u64(31);
        let g = ConformalMetric::random(dim(2), 2, 0.35, &mut rng);
        let opts = NormalizeOptions {
            grid_order: 36,
            ..NormalizeOptions::default()
        };
        let norm = normalize(&g, &opts).unwrap();
        let quad = grid(dim(2), 36).unwrap();
        let nu = DiscreteMeasure::from_metric(&norm, &quad);
        assert!((nu.mass() - 1.0).abs() < 1e-8, "volume {}", nu.mass());
        let moment = nu.first_moment();
        assert!(moment.norm() < 1e-7, "moment {:?}", moment.as_slice());
        let dir = maximal_direction(&gram(&nu), MULTIPLICITY_TOLERANCE);
        if !dir.multiple {
            assert!(
                dir.s.vector()[0].abs() > 1.0 - 1e-6,
                "top direction {:?}",
                dir.s.vector().as_slice()
            );
        }
    }

    #[test]
    fn mass_matrix_rejection_is_detected() {
        // an aggressively under-resolved grid cannot make B positive definite
        let mut rng = StdRng::seed_from_u64(37);
        let g = ConformalMetric::random(dim(2), 2, 0.3, &mut rng);
        let r = spectrum(
            &g,
            &SpectrumOptions { basis_l: 12, grid_order: 6, k_max: 2 },
        );
        match r {
            Err(Error::MassNotPositiveDefinite { .. }) => {}
            Ok(_) => panic!("expected mass-matrix rejection"),
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }
}
