//! The balanced-cap Rayleigh certificate for λ₂(g)·Vol^{2/n} < K_n·n·(2σ_n)^{2/n}.
//!
//! For a normalized metric the certificate dispatches on three branches:
//! the metric's own gram form is multiple (linear test functions suffice),
//! some cap measure along the tracked path is multiple (folded test functions
//! from its top eigenspace suffice), or — the generic case — a balanced cap
//! radius r* is located where the mixed energy and mass terms cancel, and the
//! pair {X_{e₁}, ψ_{r*}} certifies the bound via the two-dimensional min-max
//! principle.
//!
//! All cap integrals use polar panel grids split exactly at the cap boundary,
//! and every per-radius step recomputes the measure, its renormalization
//! point, and the signed maximal direction on that same grid, so the folded
//! test function is orthogonal to constants at solver tolerance by
//! construction.

use crate::constants::{conjecture_bound, grad_norm_integral, theorem_bound, Dimension};
use crate::error::{Error, Result};
use crate::geom::{
    cap_reflection, cap_reflection_jacobian, moebius_apply, moebius_jacobian, BallPoint, Cap,
    SphereMap, SpherePoint,
};
use crate::grid::{cap_panel_grid, QuadratureGrid};
use crate::linalg::Vector;
use crate::measure::{hersch_renormalize, DiscreteMeasure, HerschOptions};
use crate::metric::{ConformalMetric, LogConformalFactor, NormalizedMetric};
use crate::par;
use crate::quadform::{gram, maximal_direction, MaximalDirection, MULTIPLICITY_TOLERANCE};
use crate::spectral::{normalize, NormalizeOptions};
use serde::{Deserialize, Serialize};

/// The folded test function u_a^s: X_s∘d_ξ on the cap, X_s∘d_ξ∘τ_a outside.
#[derive(Clone, Copy, Debug)]
pub struct TestFunction {
    pub cap: Cap,
    pub xi: BallPoint,
    pub s: SpherePoint,
}

impl TestFunction {
    pub fn eval(&self, x: &SpherePoint) -> f64 {
        let y = if self.cap.margin(x) >= 0.0 {
            moebius_apply(&self.xi, x)
        } else {
            moebius_apply(&self.xi, &cap_reflection(&self.cap, x))
        }
        .expect("moebius map on sphere points");
        self.s.dot(&y)
    }

    /// Tangential gradient with respect to the round metric.
    pub fn gradient(&self, x: &SpherePoint) -> Vector {
        let ambient = if self.cap.margin(x) >= 0.0 {
            let jac = moebius_jacobian(&self.xi, x);
            jac.transpose().apply(self.s.vector())
        } else {
            let mid = cap_reflection(&self.cap, x);
            let j_outer = moebius_jacobian(&self.xi, &mid);
            let j_inner = cap_reflection_jacobian(&self.cap, x);
            j_inner
                .transpose()
                .apply(&j_outer.transpose().apply(self.s.vector()))
        };
        // project out the normal component
        ambient.add_scaled(-ambient.dot(x.vector()), x.vector())
    }
}

/// The six certificate integrals at a cap radius, for the axis function
/// φ = X_{e₁} and the folded function ψ_r. Energy terms are weak-form
/// gradient integrals divided by the conformally invariant
/// (∫|∇X_{e₁}|ⁿ dv₀)^{2/n}; mass terms are L²(dv_g) products scaled by n+1.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RayleighCoefficients {
    pub r: f64,
    /// normalized Dirichlet energy of φ
    pub energy_axis: f64,
    /// normalized Dirichlet energy of ψ_r
    pub energy_cap: f64,
    /// normalized mixed energy of (φ, ψ_r)
    pub energy_cross: f64,
    /// (n+1)∫φ² dv_g
    pub mass_axis: f64,
    /// (n+1)∫ψ_r² dv_g
    pub mass_cap: f64,
    /// (n+1)∫φψ_r dv_g
    pub mass_cross: f64,
}

impl RayleighCoefficients {
    /// energy_cross - 2^{2/n}·mass_cross, the function of r whose zero
    /// selects the balanced cap.
    pub fn balance(&self, n: Dimension) -> f64 {
        self.energy_cross - (2.0f64).powf(2.0 / n.as_f64()) * self.mass_cross
    }

    /// Margins of the strict coefficient boxes (positive means satisfied):
    /// 1 - energy_axis, 2^{2/n} - energy_cap, mass_axis - 1, mass_cap - 1.
    pub fn box_margins(&self, n: Dimension) -> [f64; 4] {
        let two = (2.0f64).powf(2.0 / n.as_f64());
        [
            1.0 - self.energy_axis,
            two - self.energy_cap,
            self.mass_axis - 1.0,
            self.mass_cap - 1.0,
        ]
    }
}

/// Certificate branches, after the dichotomy on multiplicities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    MetricMultiple,
    CapMultiple,
    BalancedCap,
}

/// The certificate record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub n: u32,
    pub branch: Branch,
    /// balanced cap radius (balanced-cap branch)
    pub r_star: Option<f64>,
    /// radius where a multiple cap measure was found (cap-multiple branch)
    pub r_multiple: Option<f64>,
    pub coefficients: Option<RayleighCoefficients>,
    /// top of q(x,y) over the test plane; the bound needs sup_q < 2^{2/n}
    pub sup_q: Option<f64>,
    /// sup of the Rayleigh quotient over the certifying plane, volume-one scale
    pub minmax_value: f64,
    pub theorem_bound: f64,
    pub conjecture_bound: f64,
    pub passed: bool,
    /// relative gram gap of the normalized metric
    pub metric_gap: f64,
    /// scanned balance samples (r, α_r - 2^{2/n}β_r)
    pub scan: Vec<(f64, f64)>,
    pub bisections: usize,
    pub balance_residual: Option<f64>,
    pub boundary_atom_warnings: usize,
    /// relative gap of the cap gram form on the cap-multiple branch
    pub multiple_gap: Option<f64>,
    /// pipeline parameters the certificate was computed with
    pub options: CertifyEcho,
    /// balanced-cap branch: whether the scanned balance endpoints show the
    /// positive-at-small-r / negative-at-large-r pattern of the coherent lift
    pub endpoint_conform: Option<bool>,
}

/// The parameters echoed into each certificate for reproducibility.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CertifyEcho {
    pub normalize_grid_order: u32,
    pub polar_nodes: usize,
    pub transverse: u32,
    pub balance_tolerance: f64,
    pub multiplicity_tolerance: f64,
}

/// Options for the certificate pipeline.
#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_samples: usize,
    /// sign anchor radius near -1 (tracked before the scan starts)
    pub anchor_r: f64,
    /// Gauss-Legendre nodes per polar panel
    pub polar_nodes: usize,
    /// azimuth points (S²) or transverse S² grid order (S³)
    pub transverse: u32,
    pub balance_tolerance: f64,
    pub max_bisections: usize,
    pub multiplicity_tolerance: f64,
    pub hersch: HerschOptions,
    pub normalize_grid_order: u32,
}

impl CertifyOptions {
    pub fn echo(&self) -> CertifyEcho {
        CertifyEcho {
            normalize_grid_order: self.normalize_grid_order,
            polar_nodes: self.polar_nodes,
            transverse: self.transverse,
            balance_tolerance: self.balance_tolerance,
            multiplicity_tolerance: self.multiplicity_tolerance,
        }
    }

    pub fn for_dimension(n: Dimension) -> Self {
        if n.get() == 2 {
            CertifyOptions {
                scan_min: -0.95,
                scan_max: 0.95,
                scan_samples: 40,
                anchor_r: -0.99,
                polar_nodes: 36,
                transverse: 64,
                balance_tolerance: 1e-8,
                max_bisections: 60,
                multiplicity_tolerance: MULTIPLICITY_TOLERANCE,
                hersch: HerschOptions::default(),
                normalize_grid_order: 36,
            }
        } else {
            CertifyOptions {
                scan_min: -0.95,
                scan_max: 0.95,
                scan_samples: 40,
                anchor_r: -0.99,
                polar_nodes: 24,
                transverse: 16,
                balance_tolerance: 1e-8,
                max_bisections: 60,
                multiplicity_tolerance: MULTIPLICITY_TOLERANCE,
                hersch: HerschOptions::default(),
                normalize_grid_order: 24,
            }
        }
    }
}

/// One fully resolved cap radius on its panel grid.
#[derive(Clone)]
pub struct CapStep {
    pub r: f64,
    pub cap: Cap,
    pub grid: QuadratureGrid,
    /// log factors at grid nodes
    pub log_factors: Vec<f64>,
    pub xi: BallPoint,
    pub direction: MaximalDirection,
    /// lift-signed maximal direction (valid when not multiple)
    pub s: SpherePoint,
    pub boundary_assignments: usize,
}

impl CapStep {
    pub fn test_function(&self) -> TestFunction {
        TestFunction {
            cap: self.cap,
            xi: self.xi,
            s: self.s,
        }
    }
}

/// Panel-grid pipeline bound to one normalized metric.
pub struct CapPipeline<'a> {
    metric: &'a NormalizedMetric,
    n: Dimension,
    opts: CertifyOptions,
    /// (∫|∇X_{e₁}|ⁿ dv₀)^{2/n}
    energy_denominator: f64,
}

impl<'a> CapPipeline<'a> {
    pub fn new(metric: &'a NormalizedMetric, opts: CertifyOptions) -> Self {
        let n = metric.dimension();
        CapPipeline {
            metric,
            n,
            opts,
            energy_denominator: grad_norm_integral(n).powf(2.0 / n.as_f64()),
        }
    }

    /// Build the panel grid, metric measure, renormalization and maximal
    /// direction at radius r. `sign_hint` propagates the lift sign; at the
    /// anchor the boundary condition (s ≈ -e₁) is applied instead.
    pub fn step(
        &self,
        r: f64,
        warm: Option<BallPoint>,
        sign_hint: Option<&SpherePoint>,
    ) -> Result<CapStep> {
        let dim = self.n.ambient();
        let e1 = SpherePoint::axis(dim, 0);
        let cap = Cap::new(r, e1)?;
        let grid = cap_panel_grid(
            self.n,
            cap.threshold(),
            self.opts.polar_nodes,
            self.opts.transverse,
        )?;
        let node_idx: Vec<usize> = (0..grid.len()).collect();
        let log_factors = par::map_collect(&node_idx, |&k| {
            self.metric.log_factor(&grid.nodes()[k])
        });
        let nf = self.n.as_f64();
        let atoms: Vec<crate::measure::Atom> = node_idx
            .iter()
            .map(|&k| crate::measure::Atom {
                point: grid.nodes()[k],
                weight: grid.weights()[k] * (nf * log_factors[k]).exp(),
            })
            .collect();
        let dvg = DiscreteMeasure::new(self.n, atoms)?;
        let lifted = dvg.lift(&cap);
        let mut hersch = self.opts.hersch;
        hersch.initial = warm;
        let renorm = hersch_renormalize(&lifted.measure, &hersch)?;
        let nu_a = lifted
            .measure
            .pushforward(&SphereMap::Moebius(renorm.xi));
        let direction = maximal_direction(&gram(&nu_a), self.opts.multiplicity_tolerance);

        let raw = direction.s;
        let s = match sign_hint {
            Some(prev) => {
                if raw.dot(prev) < 0.0 {
                    raw.antipode()
                } else {
                    raw
                }
            }
            None => {
                let dot = raw.dot(&e1);
                if dot.abs() < 0.2 {
                    return Err(Error::AnchorFailed { r, dot: dot.abs() });
                }
                if dot > 0.0 {
                    raw.antipode()
                } else {
                    raw
                }
            }
        };

        Ok(CapStep {
            r,
            cap,
            grid,
            log_factors,
            xi: renorm.xi,
            direction,
            s,
            boundary_assignments: lifted.boundary_assignments,
        })
    }

    /// The six certificate integrals on the step's own panel grid.
    pub fn coefficients(&self, step: &CapStep) -> RayleighCoefficients {
        let nf = self.n.as_f64();
        let psi = step.test_function();
        let idx: Vec<usize> = (0..step.grid.len()).collect();
        let sums: [f64; 6] = par::fold(&idx, |&k, acc: &mut [f64; 6]| {
            let x = &step.grid.nodes()[k];
            let w = step.grid.weights()[k];
            let lf = step.log_factors[k];
            let we = w * ((nf - 2.0) * lf).exp();
            let wm = w * (nf * lf).exp();
            let x0 = x.vector()[0];
            let value = psi.eval(x);
            let grad = psi.gradient(x);
            // ∇φ = e₁ - x₀ x
            let grad_phi_sq = 1.0 - x0 * x0;
            let cross = grad[0] - x0 * grad.dot(x.vector());
            acc[0] += we * grad_phi_sq;
            acc[1] += we * grad.norm_sq();
            acc[2] += we * cross;
            acc[3] += wm * x0 * x0;
            acc[4] += wm * value * value;
            acc[5] += wm * x0 * value;
        });
        RayleighCoefficients {
            r: step.r,
            energy_axis: sums[0] / self.energy_denominator,
            energy_cap: sums[1] / self.energy_denominator,
            energy_cross: sums[2] / self.energy_denominator,
            mass_axis: (nf + 1.0) * sums[3],
            mass_cap: (nf + 1.0) * sums[4],
            mass_cross: (nf + 1.0) * sums[5],
        }
    }

    /// Min-max value of the plane spanned by φ and ψ_r from the coefficients.
    pub fn minmax_from_coefficients(&self, c: &RayleighCoefficients) -> (f64, f64) {
        let num = [
            [c.energy_axis, c.energy_cross],
            [c.energy_cross, c.energy_cap],
        ];
        let den = [
            [c.mass_axis, c.mass_cross],
            [c.mass_cross, c.mass_cap],
        ];
        let sup_q = top_generalized_eigenvalue(num, den);
        let nf = self.n.as_f64();
        (sup_q, sup_q * (nf + 1.0) * self.energy_denominator)
    }
}

/// Largest root of det(N - λ D) = 0 for symmetric 2x2 with D positive definite.
pub fn top_generalized_eigenvalue(n: [[f64; 2]; 2], d: [[f64; 2]; 2]) -> f64 {
    let a = d[0][0] * d[1][1] - d[0][1] * d[0][1];
    debug_assert!(a > 0.0, "denominator form must be positive definite");
    let b = -(n[0][0] * d[1][1] + n[1][1] * d[0][0] - 2.0 * n[0][1] * d[0][1]);
    let c = n[0][0] * n[1][1] - n[0][1] * n[0][1];
    let disc = (b * b - 4.0 * a * c).max(0.0);
    (-b + disc.sqrt()) / (2.0 * a)
}

/// Locate the balanced cap radius by coarse scan plus bisection.
///
/// Returns the scan record, the root step and its coefficients, and the
/// bisection count, or the step where a multiple cap measure interrupted
/// tracking.
enum ScanOutcome {
    Balanced {
        scan: Vec<(f64, f64)>,
        step: CapStep,
        coefficients: RayleighCoefficients,
        bisections: usize,
        boundary_warnings: usize,
    },
    Multiple {
        scan: Vec<(f64, f64)>,
        step: CapStep,
        boundary_warnings: usize,
    },
    /// equal endpoint signs: the tracked lift carries monodromy, so a
    /// multiple cap measure exists somewhere in the family
    Monodromy {
        scan: Vec<(f64, f64)>,
        boundary_warnings: usize,
    },
}

/// Track from `prev` to radius `r`, halving the step whenever the maximal
/// direction rotates too fast to transport the lift sign unambiguously.
fn advance(
    pipeline: &CapPipeline<'_>,
    prev: &CapStep,
    r: f64,
    depth: usize,
    boundary_warnings: &mut usize,
) -> Result<CapStep> {
    let step = pipeline.step(r, Some(prev.xi), Some(&prev.s))?;
    *boundary_warnings += step.boundary_assignments;
    if step.direction.multiple {
        return Ok(step);
    }
    let dot = step.s.dot(&prev.s);
    let span = (r - prev.r).abs();
    // a near-degenerate top eigenvalue lets the direction rotate through ~pi
    // within one coarse step without a visible alignment drop, so small gaps
    // force refinement as well
    let min_gap = step
        .direction
        .relative_gap()
        .min(prev.direction.relative_gap());
    let ambiguous = dot < 0.98 || (min_gap < 0.03 && span > 2e-3);
    if !ambiguous || span <= 1e-5 || depth == 0 {
        return Ok(step);
    }
    let mid = advance(pipeline, prev, 0.5 * (prev.r + r), depth - 1, boundary_warnings)?;
    if mid.direction.multiple {
        return Ok(mid);
    }
    advance(pipeline, &mid, r, depth - 1, boundary_warnings)
}

fn scan_and_bisect(pipeline: &CapPipeline<'_>, opts: &CertifyOptions) -> Result<ScanOutcome> {
    let mut scan: Vec<(f64, f64)> = Vec::new();
    let mut boundary_warnings = 0usize;

    // anchor near -1 fixes the global lift sign
    let anchor = pipeline.step(opts.anchor_r, None, None)?;
    if anchor.direction.multiple {
        return Ok(ScanOutcome::Multiple {
            scan,
            step: anchor,
            boundary_warnings,
        });
    }
    boundary_warnings += anchor.boundary_assignments;

    let mut bracket: Option<(CapStep, f64, CapStep, f64)> = None;
    let mut prev: Option<(CapStep, f64)> = None;
    let mut tracked = anchor;
    for i in 0..opts.scan_samples {
        let r = opts.scan_min
            + (opts.scan_max - opts.scan_min) * i as f64 / (opts.scan_samples as f64 - 1.0);
        let step = advance(pipeline, &tracked, r, 16, &mut boundary_warnings)?;
        if step.direction.multiple {
            return Ok(ScanOutcome::Multiple {
                scan,
                step,
                boundary_warnings,
            });
        }
        tracked = step.clone();
        let g = pipeline.coefficients(&step).balance(pipeline.n);
        scan.push((r, g));
        if let Some((ps, pg)) = prev.take() {
            if bracket.is_none() && pg * g < 0.0 {
                bracket = Some((ps, pg, step.clone(), g));
            }
        }
        prev = Some((step, g));
    }

    // the balanced-cap construction applies when the balance function crosses
    // from positive at the small-r end to negative at the large-r end; a scan
    // with equal endpoint signs certifies lift monodromy, i.e. a multiple cap
    // measure hides in the family, and the caller dispatches accordingly
    let first = scan.first().copied().unwrap_or((opts.scan_min, f64::NAN));
    let last = scan.last().copied().unwrap_or((opts.scan_max, f64::NAN));
    let endpoints_conform = first.1 > 0.0 && last.1 < 0.0;
    let (mut lo, mut g_lo, mut hi, mut g_hi) = match bracket {
        Some(b) if endpoints_conform => b,
        _ => {
            return Ok(ScanOutcome::Monodromy {
                scan,
                boundary_warnings,
            });
        }
    };

    let mut bisections = 0usize;
    loop {
        // accept whichever endpoint already satisfies the balance tolerance
        if g_lo.abs() <= opts.balance_tolerance {
            let coefficients = pipeline.coefficients(&lo);
            return Ok(ScanOutcome::Balanced {
                scan,
                step: lo,
                coefficients,
                bisections,
                boundary_warnings,
            });
        }
        if g_hi.abs() <= opts.balance_tolerance {
            let coefficients = pipeline.coefficients(&hi);
            return Ok(ScanOutcome::Balanced {
                scan,
                step: hi,
                coefficients,
                bisections,
                boundary_warnings,
            });
        }
        if bisections >= opts.max_bisections {
            // return the better endpoint with its residual recorded
            let (step, _g) = if g_lo.abs() < g_hi.abs() {
                (lo, g_lo)
            } else {
                (hi, g_hi)
            };
            let coefficients = pipeline.coefficients(&step);
            return Ok(ScanOutcome::Balanced {
                scan,
                step,
                coefficients,
                bisections,
                boundary_warnings,
            });
        }
        let mid_r = 0.5 * (lo.r + hi.r);
        let step = advance(pipeline, &lo, mid_r, 16, &mut boundary_warnings)?;
        if step.direction.multiple {
            return Ok(ScanOutcome::Multiple {
                scan,
                step,
                boundary_warnings,
            });
        }
        let g_mid = pipeline.coefficients(&step).balance(pipeline.n);
        bisections += 1;
        if (g_lo > 0.0) == (g_mid > 0.0) {
            lo = step;
            g_lo = g_mid;
        } else {
            hi = step;
            g_hi = g_mid;
        }
    }
}



/// Two-by-two Rayleigh matrices of a pair of mean-zero functions on a grid.
fn plane_minmax<F1, F2>(
    n: Dimension,
    grid: &QuadratureGrid,
    log_factors: &[f64],
    f1: F1,
    f2: F2,
) -> f64
where
    F1: Fn(&SpherePoint) -> (f64, Vector) + Sync + Send,
    F2: Fn(&SpherePoint) -> (f64, Vector) + Sync + Send,
{
    let nf = n.as_f64();
    let idx: Vec<usize> = (0..grid.len()).collect();
    let sums: [f64; 6] = par::fold(&idx, |&k, acc: &mut [f64; 6]| {
        let x = &grid.nodes()[k];
        let w = grid.weights()[k];
        let lf = log_factors[k];
        let we = w * ((nf - 2.0) * lf).exp();
        let wm = w * (nf * lf).exp();
        let (v1, g1) = f1(x);
        let (v2, g2) = f2(x);
        acc[0] += we * g1.norm_sq();
        acc[1] += we * g1.dot(&g2);
        acc[2] += we * g2.norm_sq();
        acc[3] += wm * v1 * v1;
        acc[4] += wm * v1 * v2;
        acc[5] += wm * v2 * v2;
    });
    let num = [[sums[0], sums[1]], [sums[1], sums[2]]];
    let den = [[sums[3], sums[4]], [sums[4], sums[5]]];
    top_generalized_eigenvalue(num, den)
}

/// Min-max value of the plane {u_a^{s1}, u_a^{s2}} on a panel grid aligned
/// with the cap, for a normalized metric.
fn folded_plane_minmax(
    normalized: &NormalizedMetric,
    opts: &CertifyOptions,
    cap: &Cap,
    xi: &BallPoint,
    s1: &SpherePoint,
    s2: &SpherePoint,
) -> Result<f64> {
    let n = normalized.dimension();
    let quad = crate::grid::cap_panel_grid_about(
        n,
        cap.center(),
        cap.threshold(),
        opts.polar_nodes,
        opts.transverse,
    )?;
    let idx: Vec<usize> = (0..quad.len()).collect();
    let log_factors = par::map_collect(&idx, |&k| normalized.log_factor(&quad.nodes()[k]));
    let u1 = TestFunction { cap: *cap, xi: *xi, s: *s1 };
    let u2 = TestFunction { cap: *cap, xi: *xi, s: *s2 };
    let folded = |u: TestFunction| move |x: &SpherePoint| (u.eval(x), u.gradient(x));
    Ok(plane_minmax(n, &quad, &log_factors, folded(u1), folded(u2)))
}

/// Search the cap family for the smallest relative gram gap; used when the
/// axis scan certifies that a multiple cap measure must exist (the tracked
/// lift carries monodromy and the balance function never changes sign).
fn min_gap_cap(
    normalized: &NormalizedMetric,
    opts: &CertifyOptions,
) -> Result<(Cap, crate::quadform::CapFamily)> {
    use crate::quadform::{renormalized_family, PipelineOptions};
    let n = normalized.dimension();
    let quad = crate::grid::grid(n, opts.normalize_grid_order)?;
    let nu = DiscreteMeasure::from_metric(normalized, &quad);
    let pipe_opts = PipelineOptions {
        hersch: opts.hersch,
        multiplicity_tolerance: opts.multiplicity_tolerance,
    };

    let axes_grid = crate::grid::grid(n, if n.get() == 2 { 9 } else { 5 })?;
    let radii: Vec<f64> = (0..13).map(|i| -0.9 + 1.8 * i as f64 / 12.0).collect();
    let mut candidates: Vec<(f64, SpherePoint)> = Vec::new();
    for p in axes_grid.nodes() {
        for &r in &radii {
            candidates.push((r, *p));
        }
    }
    let gaps: Vec<f64> = par::map_collect(&candidates, |(r, p)| {
        match Cap::new(*r, *p) {
            Ok(cap) => match renormalized_family(&nu, &cap, &pipe_opts) {
                Ok(fam) => fam.direction.relative_gap(),
                Err(_) => f64::INFINITY,
            },
            Err(_) => f64::INFINITY,
        }
    });
    let mut best = 0usize;
    for (i, g) in gaps.iter().enumerate() {
        if g < &gaps[best] {
            best = i;
        }
    }
    let (mut r, mut p) = candidates[best];

    // local refinement in (r, tangent displacement of the axis)
    let mut radius = 0.25f64;
    let mut best_gap = gaps[best];
    for _ in 0..24 {
        let frame = crate::geom::tangent_frame(&p);
        let mut trial: Vec<(f64, SpherePoint)> = vec![(r, p)];
        for dr in [-radius, radius] {
            let rr = (r + dr).clamp(-0.93, 0.93);
            trial.push((rr, p));
        }
        for u in &frame {
            for sgn in [-1.0, 1.0] {
                let moved = SpherePoint::new(
                    p.vector()
                        .scale((sgn * radius).cos())
                        .add_scaled((sgn * radius).sin(), u),
                )
                .expect("rotated axis");
                trial.push((r, moved));
            }
        }
        let trial_gaps: Vec<f64> = par::map_collect(&trial, |(rr, pp)| {
            match Cap::new(*rr, *pp) {
                Ok(cap) => match renormalized_family(&nu, &cap, &pipe_opts) {
                    Ok(fam) => fam.direction.relative_gap(),
                    Err(_) => f64::INFINITY,
                },
                Err(_) => f64::INFINITY,
            }
        });
        let mut local_best = 0usize;
        for (i, g) in trial_gaps.iter().enumerate() {
            if g < &trial_gaps[local_best] {
                local_best = i;
            }
        }
        if local_best == 0 {
            radius *= 0.5;
        } else {
            r = trial[local_best].0;
            p = trial[local_best].1;
            best_gap = trial_gaps[local_best];
        }
        if radius < 1e-4 && best_gap < 0.02 {
            break;
        }
    }
    let cap = Cap::new(r, p)?;
    let fam = renormalized_family(&nu, &cap, &pipe_opts)?;
    Ok((cap, fam))
}

/// Produce a bound certificate for a conformal metric.
pub fn certify(g: &ConformalMetric, opts: &CertifyOptions) -> Result<BoundCertificate> {
    let normalized = normalize(
        g,
        &NormalizeOptions {
            grid_order: opts.normalize_grid_order,
            multiplicity_tolerance: opts.multiplicity_tolerance,
            hersch: opts.hersch,
        },
    )?;
    certify_normalized(&normalized, opts)
}

/// Certificate for an already-normalized metric.
pub fn certify_normalized(
    normalized: &NormalizedMetric,
    opts: &CertifyOptions,
) -> Result<BoundCertificate> {
    let n = normalized.dimension();
    let t_bound = theorem_bound(n);
    let c_bound = conjecture_bound(n);

    if normalized.multiple {
        // metric-multiple branch: E = {X_s, s in the top eigenspace}
        let quad = crate::grid::grid(n, opts.normalize_grid_order)?;
        let node_idx: Vec<usize> = (0..quad.len()).collect();
        let log_factors =
            par::map_collect(&node_idx, |&k| normalized.log_factor(&quad.nodes()[k]));
        let nu = DiscreteMeasure::new(
            n,
            node_idx
                .iter()
                .map(|&k| crate::measure::Atom {
                    point: quad.nodes()[k],
                    weight: quad.weights()[k] * (n.as_f64() * log_factors[k]).exp(),
                })
                .collect(),
        )?;
        let dir = maximal_direction(&gram(&nu), opts.multiplicity_tolerance);
        let (s1, s2) = (dir.s, dir.second);
        let linear = |s: SpherePoint| {
            move |x: &SpherePoint| {
                let grad = s.vector().add_scaled(-s.dot(x), x.vector());
                (s.dot(x), grad)
            }
        };
        let minmax = plane_minmax(n, &quad, &log_factors, linear(s1), linear(s2));
        return Ok(BoundCertificate {
            n: n.get(),
            branch: Branch::MetricMultiple,
            r_star: None,
            r_multiple: None,
            coefficients: None,
            sup_q: None,
            minmax_value: minmax,
            theorem_bound: t_bound,
            conjecture_bound: c_bound,
            passed: minmax < t_bound,
            metric_gap: normalized.gap,
            scan: Vec::new(),
            bisections: 0,
            balance_residual: None,
            boundary_atom_warnings: 0,
            multiple_gap: None,
            options: opts.echo(),
            endpoint_conform: None,
        });
    }

    let pipeline = CapPipeline::new(normalized, *opts);
    match scan_and_bisect(&pipeline, opts)? {
        ScanOutcome::Monodromy {
            scan,
            boundary_warnings,
        } => {
            // Equal endpoint signs mean the anchored lift carries monodromy:
            // by the parity argument a multiple cap measure must exist in the
            // family, so hunt it down and certify with the folded plane there.
            let (cap, fam) = min_gap_cap(normalized, opts)?;
            let minmax = folded_plane_minmax(
                normalized,
                opts,
                &cap,
                &fam.renormalization.xi,
                &fam.direction.s,
                &fam.direction.second,
            )?;
            Ok(BoundCertificate {
                n: n.get(),
                branch: Branch::CapMultiple,
                r_star: None,
                r_multiple: Some(cap.r()),
                coefficients: None,
                sup_q: None,
                minmax_value: minmax,
                theorem_bound: t_bound,
                conjecture_bound: c_bound,
                passed: minmax < t_bound,
                metric_gap: normalized.gap,
                scan,
                bisections: 0,
                balance_residual: None,
                boundary_atom_warnings: boundary_warnings,
                multiple_gap: Some(fam.direction.relative_gap()),
                options: opts.echo(),
                endpoint_conform: Some(false),
            })
        }
        ScanOutcome::Multiple {
            scan,
            step,
            boundary_warnings,
        } => {
            // cap-multiple branch: E = {u_a^s, s in the top eigenspace of ν_a}
            let u1 = TestFunction {
                cap: step.cap,
                xi: step.xi,
                s: step.direction.s,
            };
            let u2 = TestFunction {
                cap: step.cap,
                xi: step.xi,
                s: step.direction.second,
            };
            let folded = |u: TestFunction| move |x: &SpherePoint| (u.eval(x), u.gradient(x));
            let minmax = plane_minmax(
                n,
                &step.grid,
                &step.log_factors,
                folded(u1),
                folded(u2),
            );
            Ok(BoundCertificate {
                n: n.get(),
                branch: Branch::CapMultiple,
                r_star: None,
                r_multiple: Some(step.r),
                coefficients: None,
                sup_q: None,
                minmax_value: minmax,
                theorem_bound: t_bound,
                conjecture_bound: c_bound,
                passed: minmax < t_bound,
                metric_gap: normalized.gap,
                scan,
                bisections: 0,
                balance_residual: None,
                boundary_atom_warnings: boundary_warnings,
                multiple_gap: Some(step.direction.relative_gap()),
                options: opts.echo(),
                endpoint_conform: None,
            })
        }
        ScanOutcome::Balanced {
            scan,
            step,
            coefficients,
            bisections,
            boundary_warnings,
        } => {
            let (sup_q, minmax) = pipeline.minmax_from_coefficients(&coefficients);
            let residual = coefficients.balance(n).abs();
            let conform = scan.first().map(|f| f.1 > 0.0).unwrap_or(false)
                && scan.last().map(|l| l.1 < 0.0).unwrap_or(false);
            Ok(BoundCertificate {
                n: n.get(),
                branch: Branch::BalancedCap,
                r_star: Some(step.r),
                r_multiple: None,
                coefficients: Some(coefficients),
                sup_q: Some(sup_q),
                minmax_value: minmax,
                theorem_bound: t_bound,
                conjecture_bound: c_bound,
                passed: minmax < t_bound,
                metric_gap: normalized.gap,
                scan,
                bisections,
                balance_residual: Some(residual),
                boundary_atom_warnings: boundary_warnings,
                multiple_gap: None,
                options: opts.echo(),
                endpoint_conform: Some(conform),
            })
        }
    }
}

/// The folded test function at radius r on the axis family, with the lift
/// sign transported from the boundary anchor.
pub fn test_function(g: &NormalizedMetric, r: f64, opts: &CertifyOptions) -> Result<TestFunction> {
    let step = tracked_step(g, r, opts)?;
    if step.direction.multiple {
        return Err(Error::MultiplicityEncountered {
            r: step.r,
            gap: step.direction.relative_gap(),
        });
    }
    Ok(step.test_function())
}

/// The six certificate integrals at radius r on the axis family.
pub fn rayleigh_coefficients(
    g: &NormalizedMetric,
    r: f64,
    opts: &CertifyOptions,
) -> Result<RayleighCoefficients> {
    let pipeline = CapPipeline::new(g, *opts);
    let step = tracked_step_on(&pipeline, r, opts)?;
    if step.direction.multiple {
        return Err(Error::MultiplicityEncountered {
            r: step.r,
            gap: step.direction.relative_gap(),
        });
    }
    Ok(pipeline.coefficients(&step))
}

/// The balanced cap radius r* with |α - 2^{2/n}β| ≤ the balance tolerance.
pub fn balanced_cap(g: &NormalizedMetric, opts: &CertifyOptions) -> Result<f64> {
    let pipeline = CapPipeline::new(g, *opts);
    match scan_and_bisect(&pipeline, opts)? {
        ScanOutcome::Balanced { step, .. } => Ok(step.r),
        ScanOutcome::Multiple { step, .. } => Err(Error::MultiplicityEncountered {
            r: step.r,
            gap: step.direction.relative_gap(),
        }),
        ScanOutcome::Monodromy { scan, .. } => {
            let first = scan.first().copied().unwrap_or((f64::NAN, f64::NAN));
            let last = scan.last().copied().unwrap_or((f64::NAN, f64::NAN));
            Err(Error::NoSignChange {
                r_min: first.0,
                g_min: first.1,
                r_max: last.0,
                g_max: last.1,
            })
        }
    }
}

fn tracked_step(g: &NormalizedMetric, r: f64, opts: &CertifyOptions) -> Result<CapStep> {
    let pipeline = CapPipeline::new(g, *opts);
    tracked_step_on(&pipeline, r, opts)
}

fn tracked_step_on(pipeline: &CapPipeline<'_>, r: f64, opts: &CertifyOptions) -> Result<CapStep> {
    let anchor = pipeline.step(opts.anchor_r, None, None)?;
    if anchor.direction.multiple || (r - opts.anchor_r).abs() < 1e-12 {
        return Ok(anchor);
    }
    let mut warnings = 0usize;
    advance(pipeline, &anchor, r, 16, &mut warnings)
}

pub fn certificate_to_json(cert: &BoundCertificate) -> Result<String> {
    Ok(serde_json::to_string_pretty(cert)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ConformalMetric;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn generalized_eigenvalue_2x2() {
        // N = diag(2, 6), D = I: top is 6
        let top = top_generalized_eigenvalue([[2.0, 0.0], [0.0, 6.0]], [[1.0, 0.0], [0.0, 1.0]]);
        assert!((top - 6.0).abs() < 1e-14);
        // scaling D scales the eigenvalue inversely
        let top = top_generalized_eigenvalue([[2.0, 0.0], [0.0, 6.0]], [[2.0, 0.0], [0.0, 2.0]]);
        assert!((top - 3.0).abs() < 1e-14);
    }

    #[test]
    fn round_metric_certificate_is_metric_multiple() {
        let g = ConformalMetric::round(dim(2));
        let cert = certify(&g, &CertifyOptions::for_dimension(dim(2))).unwrap();
        assert_eq!(cert.branch, Branch::MetricMultiple);
        assert!(cert.passed);
        // the round min-max over linear functions sits at Λ_{2,2} = 8π of the
        // volume-one round sphere, far below the 16π bound
        assert!((cert.minmax_value - 8.0 * PI).abs() < 1e-6);
        assert!(cert.minmax_value < cert.theorem_bound);
        assert!((cert.theorem_bound - 16.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn test_function_is_continuous_and_mean_zero() {
        let mut rng = StdRng::seed_from_u64(41);
        let g = ConformalMetric::random(dim(2), 3, 0.3, &mut rng);
        let opts = CertifyOptions::for_dimension(dim(2));
        let normalized = normalize(
            &g,
            &NormalizeOptions {
                grid_order: opts.normalize_grid_order,
                ..NormalizeOptions::default()
            },
        )
        .unwrap();
        assert!(!normalized.multiple);
        let pipeline = CapPipeline::new(&normalized, opts);
        let hint = SpherePoint::axis(3, 0);
        let step = pipeline.step(-0.2, None, Some(&hint)).unwrap();
        let psi = step.test_function();

        // continuity across the boundary circle: both rules agree there
        for x in step.cap.boundary_samples(16) {
            let inside = moebius_apply(&step.xi, &x).unwrap();
            let outside = moebius_apply(&step.xi, &cap_reflection(&step.cap, &x)).unwrap();
            assert!(
                (psi.s.dot(&inside) - psi.s.dot(&outside)).abs() < 1e-8,
                "discontinuity at the cap boundary"
            );
        }

        // mean-zero against the metric measure on the panel grid
        let nf = 2.0;
        let mut mean = 0.0;
        let mut mass = 0.0;
        for (k, (x, w)) in step.grid.iter().enumerate() {
            let wm = w * (nf * step.log_factors[k]).exp();
            mean += wm * psi.eval(x);
            mass += wm;
        }
        assert!(
            (mean / mass).abs() < 1e-8,
            "test function mean {} of mass {}",
            mean,
            mass
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(43);
        let g = ConformalMetric::random(dim(2), 2, 0.25, &mut rng);
        let opts = CertifyOptions::for_dimension(dim(2));
        let normalized = normalize(&g, &NormalizeOptions::default()).unwrap();
        let pipeline = CapPipeline::new(&normalized, opts);
        let hint = SpherePoint::axis(3, 0);
        let step = pipeline.step(0.1, None, Some(&hint)).unwrap();
        let psi = step.test_function();

        let h = 1e-6_f64;
        for _ in 0..100 {
            let x = crate::geom::random_unit_vector(3, &mut rng);
            if step.cap.margin(&x).abs() < 1e-3 {
                continue; // gradient jumps across the interface
            }
            let grad = psi.gradient(&x);
            for u in crate::geom::tangent_frame(&x) {
                let fwd = SpherePoint::new(x.vector().scale(h.cos()).add_scaled(h.sin(), &u))
                    .unwrap();
                let bwd = SpherePoint::new(x.vector().scale(h.cos()).add_scaled(-h.sin(), &u))
                    .unwrap();
                let fd = (psi.eval(&fwd) - psi.eval(&bwd)) / (2.0 * h);
                assert!(
                    (grad.dot(&u) - fd).abs() < 1e-6,
                    "gradient component {} vs fd {fd}",
                    grad.dot(&u)
                );
            }
        }
    }

    #[test]
    fn folded_function_of_complement_is_negated() {
        // with lift-coherent signs, u_{a*} = -u_a pointwise; the complement's
        // direction comes from the symmetry map with the flipped sign
        use crate::quadform::{renormalized_family, symmetry_map, PipelineOptions};
        let mut rng = StdRng::seed_from_u64(53);
        let g = ConformalMetric::random(dim(2), 3, 0.3, &mut rng);
        let normalized = normalize(&g, &NormalizeOptions::default()).unwrap();
        let quad = crate::grid::grid(dim(2), 30).unwrap();
        let nu = DiscreteMeasure::from_metric(&normalized, &quad);
        let cap = Cap::new(0.3, SpherePoint::axis(3, 0)).unwrap();
        let opts = PipelineOptions::default();
        let fam = renormalized_family(&nu, &cap, &opts).unwrap();
        let fam_star = renormalized_family(&nu, &cap.complement(), &opts).unwrap();
        let r_a = symmetry_map(&cap, &fam.renormalization.xi, &fam_star.renormalization.xi);
        let s = fam.direction.s;
        // claim-2 coherent sign for the complement
        let s_star = r_a.apply(&s).antipode();

        let u = TestFunction { cap, xi: fam.renormalization.xi, s };
        let u_star = TestFunction {
            cap: cap.complement(),
            xi: fam_star.renormalization.xi,
            s: s_star,
        };
        for _ in 0..200 {
            let x = crate::geom::random_unit_vector(3, &mut rng);
            let lhs = u_star.eval(&x);
            let rhs = -u.eval(&x);
            assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn folded_function_tends_to_negative_axis_function() {
        // near r = -1 the folded function approaches -X_{e1} in L²(dv_g)
        let mut rng = StdRng::seed_from_u64(59);
        let g = ConformalMetric::random(dim(2), 2, 0.25, &mut rng);
        let opts = CertifyOptions::for_dimension(dim(2));
        let normalized = normalize(&g, &NormalizeOptions::default()).unwrap();
        let pipeline = CapPipeline::new(&normalized, opts);
        let step = pipeline.step(-0.99, None, None).unwrap();
        let psi = step.test_function();
        let mut err = 0.0;
        let mut mass = 0.0;
        for (k, (x, w)) in step.grid.iter().enumerate() {
            let wm = w * (2.0 * step.log_factors[k]).exp();
            let d = psi.eval(x) + x.vector()[0];
            err += wm * d * d;
            mass += wm;
        }
        assert!(err / mass < 1e-3, "L² distance² to -X_e1: {}", err / mass);
    }

    #[test]
    fn random_s2_metric_balanced_cap_certificate() {
        let mut rng = StdRng::seed_from_u64(47);
        let g = ConformalMetric::random(dim(2), 3, 0.3, &mut rng);
        let opts = CertifyOptions::for_dimension(dim(2));
        let cert = certify(&g, &opts).unwrap();
        assert!(cert.passed, "certificate failed: {cert:?}");
        assert!(cert.minmax_value < cert.theorem_bound);
        match cert.branch {
            Branch::BalancedCap => {
                let c = cert.coefficients.unwrap();
                assert!(cert.balance_residual.unwrap() <= 1e-8);
                let sup_q = cert.sup_q.unwrap();
                assert!(sup_q < (2.0f64).powf(1.0) + 1e-10, "sup_q = {sup_q}");
                for m in c.box_margins(dim(2)) {
                    assert!(m > -1e-10, "box margin {m}");
                }
                // scan endpoints: positive at the smallest r, negative at the largest
                assert!(cert.scan.first().unwrap().1 > 0.0);
                assert!(cert.scan.last().unwrap().1 < 0.0);
            }
            other => panic!("expected balanced cap branch, got {other:?}"),
        }
    }
}
