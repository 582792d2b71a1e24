//! The gram quadratic form Q(s) = ∫ (s·x)² dν, its maximal direction and
//! multiplicity, the cap pipeline ν_a = (d_{ξ(a)})_* μ_a, the symmetry check
//! relating a cap and its complement, and the sign-continuous lift of the
//! maximal direction along cap paths.

use crate::constants::Dimension;
use crate::error::{Error, Result};
use crate::geom::{BallPoint, Cap, SphereMap, SpherePoint};
use crate::linalg::{jacobi_eigen, SmallMatrix, Vector};
use crate::measure::{hersch_renormalize, DiscreteMeasure, HerschOptions, RenormalizationPoint};
use crate::par;
use std::io::Write;

/// Default relative eigenvalue gap below which a measure counts as multiple.
pub const MULTIPLICITY_TOLERANCE: f64 = 1e-4;

/// Second-moment matrix Q_ij = Σ w x_i x_j of a measure.
#[derive(Clone, Copy, Debug)]
pub struct GramMatrix {
    matrix: SmallMatrix,
    n: Dimension,
}

impl GramMatrix {
    #[inline]
    pub fn matrix(&self) -> &SmallMatrix {
        &self.matrix
    }

    #[inline]
    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Q(s) = sᵀ Q s.
    pub fn quadratic(&self, s: &SpherePoint) -> f64 {
        self.matrix.apply(s.vector()).dot(s.vector())
    }
}

pub fn gram(nu: &DiscreteMeasure) -> GramMatrix {
    let dim = nu.dimension().ambient();
    let flat: [f64; 16] = par::fold(nu.atoms(), |a, acc: &mut [f64; 16]| {
        let v = a.point.vector();
        for i in 0..dim {
            let wi = a.weight * v[i];
            for j in 0..dim {
                acc[i * 4 + j] += wi * v[j];
            }
        }
    });
    let mut matrix = SmallMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            matrix.set(i, j, flat[i * 4 + j]);
        }
    }
    GramMatrix {
        matrix,
        n: nu.dimension(),
    }
}

/// Top eigenpair of a gram form with a multiplicity flag.
#[derive(Clone, Copy, Debug)]
pub struct MaximalDirection {
    /// unit top eigenvector; sign is arbitrary until fixed by lift tracking
    pub s: SpherePoint,
    /// top eigenvalue
    pub value: f64,
    /// absolute gap to the second eigenvalue
    pub gap: f64,
    /// second eigenvector, spanning the top space with s when multiple
    pub second: SpherePoint,
    pub multiple: bool,
}

impl MaximalDirection {
    pub fn relative_gap(&self) -> f64 {
        if self.value > 0.0 {
            self.gap / self.value
        } else {
            0.0
        }
    }
}

pub fn maximal_direction(q: &GramMatrix, tol: f64) -> MaximalDirection {
    let d = q.matrix.dim();
    let (vals, vecs) = jacobi_eigen(&q.matrix);
    let top = vals[d - 1];
    let second = vals[d - 2];
    let gap = top - second;
    MaximalDirection {
        s: SpherePoint::new(vecs.column(d - 1)).expect("unit eigenvector"),
        value: top,
        gap,
        second: SpherePoint::new(vecs.column(d - 2)).expect("unit eigenvector"),
        multiple: gap <= tol * top.max(f64::MIN_POSITIVE),
    }
}

/// Output of the per-cap pipeline: lift, renormalize, push forward, diagonalize.
#[derive(Clone, Debug)]
pub struct CapFamily {
    pub cap: Cap,
    pub renormalization: RenormalizationPoint,
    /// ν_a = (d_{ξ(a)})_* μ_a
    pub measure: DiscreteMeasure,
    pub direction: MaximalDirection,
    pub boundary_assignments: usize,
}

/// Options shared by the cap pipeline operations.
#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    pub hersch: HerschOptions,
    pub multiplicity_tolerance: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            hersch: HerschOptions::default(),
            multiplicity_tolerance: MULTIPLICITY_TOLERANCE,
        }
    }
}

/// dμ_a, ξ(a), dν_a and the maximal direction in one pass.
pub fn renormalized_family(
    g_measure: &DiscreteMeasure,
    cap: &Cap,
    opts: &PipelineOptions,
) -> Result<CapFamily> {
    let lifted = g_measure.lift(cap);
    let renormalization = hersch_renormalize(&lifted.measure, &opts.hersch)?;
    let measure = lifted
        .measure
        .pushforward(&SphereMap::Moebius(renormalization.xi));
    let direction = maximal_direction(&gram(&measure), opts.multiplicity_tolerance);
    Ok(CapFamily {
        cap: *cap,
        renormalization,
        measure,
        direction,
        boundary_assignments: lifted.boundary_assignments,
    })
}

/// The orthogonal map R_a = d_{ξ*} ∘ τ_a ∘ d_{-ξ}, realized as a point map.
pub fn symmetry_map(cap: &Cap, xi: &BallPoint, xi_star: &BallPoint) -> SphereMap {
    SphereMap::Chain(vec![
        SphereMap::Moebius(xi.negate()),
        SphereMap::CapReflection(*cap),
        SphereMap::Moebius(*xi_star),
    ])
}

/// Residuals of the cap/complement symmetry: |ξ* + τ_a(-ξ)|,
/// 1 - |⟨s*, R_a s⟩|, and the orthogonality defect of R_a on a frame.
#[derive(Clone, Copy, Debug)]
pub struct SymmetryReport {
    pub xi_residual: f64,
    pub direction_residual: f64,
    pub frame_defect: f64,
    pub gap: f64,
    pub gap_star: f64,
}

/// Verify -ξ(a*) = τ_a(-ξ(a)) and [s(a*)] = R_a [s(a)] on a concrete pair.
pub fn complement_symmetry_check(
    g_measure: &DiscreteMeasure,
    cap: &Cap,
    opts: &PipelineOptions,
) -> Result<SymmetryReport> {
    let fam = renormalized_family(g_measure, cap, opts)?;
    let fam_star = renormalized_family(g_measure, &cap.complement(), opts)?;

    // -ξ* = τ_a(-ξ), with τ_a acting on interior points
    let tau_ball = cap_reflection_ball(cap, &fam.renormalization.xi.negate())?;
    let xi_residual = fam_star
        .renormalization
        .xi
        .vector()
        .add(tau_ball.vector())
        .norm();

    let r_a = symmetry_map(
        cap,
        &fam.renormalization.xi,
        &fam_star.renormalization.xi,
    );
    let mapped = r_a.apply(&fam.direction.s);
    let direction_residual = 1.0 - mapped.dot(&fam_star.direction.s).abs();

    // orthogonality defect of R_a acting on the coordinate frame
    let dim = g_measure.dimension().ambient();
    let mut images: Vec<Vector> = Vec::with_capacity(dim);
    for i in 0..dim {
        images.push(*r_a.apply(&SpherePoint::axis(dim, i)).vector());
    }
    let mut frame_defect = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let expect = if i == j { 1.0 } else { 0.0 };
            frame_defect = frame_defect.max((images[i].dot(&images[j]) - expect).abs());
        }
    }

    Ok(SymmetryReport {
        xi_residual,
        direction_residual,
        frame_defect,
        gap: fam.direction.relative_gap(),
        gap_star: fam_star.direction.relative_gap(),
    })
}

/// τ_a on an interior ball point.
pub fn cap_reflection_ball(a: &Cap, x: &BallPoint) -> Result<BallPoint> {
    let c = a.moebius_center();
    let pulled = crate::geom::moebius_apply_ball(&c.negate(), x)?;
    let reflected = BallPoint::new(
        pulled
            .vector()
            .add_scaled(-2.0 * a.center().vector().dot(pulled.vector()), a.center().vector()),
    )?;
    crate::geom::moebius_apply_ball(&c, &reflected)
}

/// One sample of the sign-continuous lift along a cap path.
#[derive(Clone, Copy, Debug)]
pub struct LiftSample {
    pub r: f64,
    pub s: SpherePoint,
    pub xi: BallPoint,
    pub relative_gap: f64,
}

/// Where a lift stopped because the top eigenvalue became multiple.
#[derive(Clone, Copy, Debug)]
pub struct MultiplicityHit {
    pub r: f64,
    pub relative_gap: f64,
}

/// Sign-continuous lift of the maximal direction along r ↦ a_{r,p}.
#[derive(Clone, Debug)]
pub struct LiftPath {
    pub p: SpherePoint,
    pub samples: Vec<LiftSample>,
    /// set when tracking stopped at a multiple measure (the easy branch of
    /// the bound applies there); samples before the hit are kept
    pub multiplicity: Option<MultiplicityHit>,
}

impl LiftPath {
    /// Lift value at a grid radius, if sampled.
    pub fn at(&self, r: f64) -> Option<&LiftSample> {
        self.samples
            .iter()
            .find(|s| (s.r - r).abs() < 1e-12)
    }

    /// CSV export: r, s₀..s_n, gap.
    pub fn to_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.p.dim();
        let mut header = vec!["r".to_string()];
        header.extend((0..dim).map(|i| format!("s{i}")));
        header.push("gap".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![s.r.to_string()];
            row.extend(s.s.vector().as_slice().iter().map(|v| v.to_string()));
            row.push(s.relative_gap.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Track the lift over an ascending r grid starting near -1, anchored at the
/// boundary condition s → -e₁, refining steps when the direction rotates fast.
///
/// The measure must be normalized: vanishing first moments and gram maximal
/// direction along ±e₁.
pub fn lift_path(
    g_measure: &DiscreteMeasure,
    p: &SpherePoint,
    r_grid: &[f64],
    opts: &PipelineOptions,
) -> Result<LiftPath> {
    if r_grid.len() < 2 {
        return Err(Error::InvalidInput("lift path needs at least two radii".into()));
    }
    for pair in r_grid.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidInput("r grid must ascend".into()));
        }
    }

    let dim = g_measure.dimension().ambient();
    let e1 = SpherePoint::axis(dim, 0);
    let mut samples: Vec<LiftSample> = Vec::with_capacity(r_grid.len());
    let mut multiplicity = None;
    let mut warm: Option<BallPoint> = None;
    let mut prev_s: Option<SpherePoint> = None;

    // (r, reference direction for sign continuation)
    let mut queue: Vec<f64> = r_grid.to_vec();
    queue.reverse(); // pop from the back = ascending order

    while let Some(r) = queue.pop() {
        let cap = Cap::new(r, *p)?;
        let mut local = *opts;
        local.hersch.initial = warm;
        let fam = match renormalized_family(g_measure, &cap, &local) {
            Ok(f) => f,
            Err(Error::BoundaryEscape { norm, residual }) => {
                return Err(Error::BoundaryEscape { norm, residual })
            }
            Err(e) => return Err(e),
        };
        warm = Some(fam.renormalization.xi);

        if fam.direction.multiple {
            multiplicity = Some(MultiplicityHit {
                r,
                relative_gap: fam.direction.relative_gap(),
            });
            break;
        }

        let raw = fam.direction.s;
        let signed = match &prev_s {
            None => {
                // anchor: the boundary condition fixes s ≈ -e₁ as r → -1
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
            Some(prev) => {
                let dot = raw.dot(prev);
                // refine while steps are ambiguous: visible rotation, or a
                // small gap that lets the direction swing by ~pi between
                // samples without a visible alignment drop
                let prev_sample = samples.last().copied();
                let prev_r = prev_sample.map(|s| s.r).unwrap_or(r - 1e-2);
                let prev_gap = prev_sample.map(|s| s.relative_gap).unwrap_or(1.0);
                let span = r - prev_r;
                let min_gap = prev_gap.min(fam.direction.relative_gap());
                let ambiguous = dot.abs() < 0.98 || (min_gap < 0.03 && span > 2e-3);
                if ambiguous && span > 1e-5 {
                    queue.push(r);
                    queue.push(0.5 * (prev_r + r));
                    continue;
                }
                if dot < 0.0 {
                    raw.antipode()
                } else {
                    raw
                }
            }
        };
        prev_s = Some(signed);
        samples.push(LiftSample {
            r,
            s: signed,
            xi: fam.renormalization.xi,
            relative_gap: fam.direction.relative_gap(),
        });
    }

    Ok(LiftPath {
        p: *p,
        samples,
        multiplicity,
    })
}

/// One claim-2 comparison: the lift at a* against -R_a (lift at a).
#[derive(Clone, Copy, Debug)]
pub struct SignSample {
    pub r: f64,
    /// ⟨s(a*), R_a s(a)⟩; the sign claim says this sits near -1
    pub dot: f64,
}

/// Check s(a*) = -R_a s(a) along a symmetric radius grid by tracking the two
/// lifts (for p and -p) from the boundary condition and comparing mirrored
/// samples.
pub fn complement_sign_check(
    g_measure: &DiscreteMeasure,
    p: &SpherePoint,
    r_values: &[f64],
    opts: &PipelineOptions,
) -> Result<Vec<SignSample>> {
    // symmetric grid containing ±r for each requested radius, plus anchors
    let mut grid: Vec<f64> = Vec::new();
    for &r in r_values {
        grid.push(r);
        grid.push(-r);
    }
    let anchor = r_values
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b.abs()))
        .max(0.9);
    grid.push(-anchor.clamp(0.99, 0.995));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let path_p = lift_path(g_measure, p, &grid, opts)?;
    let path_m = lift_path(g_measure, &p.antipode(), &grid, opts)?;
    if let Some(hit) = path_p.multiplicity.or(path_m.multiplicity) {
        return Err(Error::MultiplicityEncountered {
            r: hit.r,
            gap: hit.relative_gap,
        });
    }

    let mut out = Vec::new();
    for &r in r_values {
        let sample = path_p
            .at(r)
            .ok_or_else(|| Error::InvalidInput(format!("radius {r} missing from lift")))?;
        let mirror = path_m
            .at(-r)
            .ok_or_else(|| Error::InvalidInput(format!("radius {} missing from lift", -r)))?;
        let cap = Cap::new(r, *p)?;
        let r_a = symmetry_map(&cap, &sample.xi, &mirror.xi);
        let dot = mirror.s.dot(&r_a.apply(&sample.s));
        out.push(SignSample { r, dot });
    }
    Ok(out)
}
