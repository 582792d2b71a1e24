//! Numerical Brouwer degree for maps Sⁿ → Sⁿ and the parity check for maps
//! satisfying the cap symmetry f(-p) = R_p f(p).
//!
//! The degree is the normalized integral of the Jacobian determinant in
//! consistently oriented tangent frames, with finite differences along
//! geodesics; signed preimage counting at a regular value provides an
//! independent cross-check.

use crate::constants::{sphere_volume, Dimension};
use crate::error::{Error, Result};
use crate::geom::{reflection, tangent_frame, SpherePoint};
use crate::grid::grid;
use crate::linalg::{solve, SmallMatrix, Vector};
use crate::par;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read};

/// An even polynomial field q(p) = v₀ + Σ (p·a)(p·b) c; projecting it to the
/// tangent space gives an even tangent field, the building block of
/// equivariant maps.
#[derive(Clone, Debug)]
pub struct EvenField {
    pub constant: Vector,
    pub quadratic: Vec<(Vector, Vector, Vector)>,
}

impl EvenField {
    fn eval(&self, p: &SpherePoint) -> Vector {
        let mut q = self.constant;
        for (a, b, c) in &self.quadratic {
            q = q.add_scaled(a.dot(p.vector()) * b.dot(p.vector()), c);
        }
        q
    }
}

/// Concrete sphere maps for degree experiments.
#[derive(Clone, Debug)]
pub enum SampledMap {
    Identity,
    Antipodal,
    /// x ↦ M x for orthogonal M (not equivariant in general)
    Orthogonal(SmallMatrix),
    /// normalize(amplitude · P_p q(p) + base_sign · p): equivariant for any
    /// even field q, perturbing the identity (+1) or the antipodal map (-1)
    EvenFieldMap {
        base_sign: f64,
        amplitude: f64,
        field: EvenField,
    },
    /// conjugation A ∘ f ∘ Aᵀ, preserving equivariance
    Conjugated {
        rotation: SmallMatrix,
        inner: Box<SampledMap>,
    },
    /// outer composition M ∘ f; multiplies the degree by det M
    ComposeOrthogonal {
        outer: SmallMatrix,
        inner: Box<SampledMap>,
    },
    /// smooth interpolation of scattered samples by a Gaussian kernel
    Interpolated {
        samples: Vec<(SpherePoint, SpherePoint)>,
        kernel_radius: f64,
    },
}

impl SampledMap {
    pub fn eval(&self, p: &SpherePoint) -> SpherePoint {
        match self {
            SampledMap::Identity => *p,
            SampledMap::Antipodal => p.antipode(),
            SampledMap::Orthogonal(m) => {
                SpherePoint::new(m.apply(p.vector())).expect("orthogonal image")
            }
            SampledMap::EvenFieldMap {
                base_sign,
                amplitude,
                field,
            } => {
                let q = field.eval(p);
                let tangent = q.add_scaled(-q.dot(p.vector()), p.vector());
                let raw = p.vector().scale(*base_sign).add_scaled(*amplitude, &tangent);
                SpherePoint::new(raw).expect("perturbation keeps a normal component")
            }
            SampledMap::Conjugated { rotation, inner } => {
                let pulled = SpherePoint::new(rotation.transpose().apply(p.vector()))
                    .expect("rotation image");
                let mapped = inner.eval(&pulled);
                SpherePoint::new(rotation.apply(mapped.vector())).expect("rotation image")
            }
            SampledMap::ComposeOrthogonal { outer, inner } => {
                let mapped = inner.eval(p);
                SpherePoint::new(outer.apply(mapped.vector())).expect("orthogonal image")
            }
            SampledMap::Interpolated {
                samples,
                kernel_radius,
            } => {
                let mut acc = Vector::zeros(p.dim());
                let inv = 1.0 / (kernel_radius * kernel_radius);
                for (q, fq) in samples {
                    let d2 = p.vector().sub(q.vector()).norm_sq();
                    acc = acc.add_scaled((-d2 * inv).exp(), fq.vector());
                }
                SpherePoint::new(acc).expect("kernel average away from zero")
            }
        }
    }

    /// Load scattered samples from CSV with header p0..pn,f0..fn.
    pub fn from_sample_csv<R: Read>(input: R, kernel_radius: f64) -> Result<SampledMap> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty map sample file".into()))??;
        let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        if !cols.len().is_multiple_of(2) || cols.len() < 6 {
            return Err(Error::Csv(
                "expected header p0..pn,f0..fn with matching coordinate counts".into(),
            ));
        }
        let ambient = cols.len() / 2;
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Csv(format!("line {}: {e}", lineno + 2)))?;
            if fields.len() != 2 * ambient {
                return Err(Error::Csv(format!(
                    "line {}: expected {} fields",
                    lineno + 2,
                    2 * ambient
                )));
            }
            samples.push((
                SpherePoint::from_coords(&fields[..ambient])?,
                SpherePoint::from_coords(&fields[ambient..])?,
            ));
        }
        if samples.is_empty() {
            return Err(Error::Csv("no samples".into()));
        }
        Ok(SampledMap::Interpolated {
            samples,
            kernel_radius,
        })
    }
}

/// Degree computation output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DegreeReport {
    pub degree: i64,
    pub raw_integral: f64,
    pub rounding_gap: f64,
    pub method: String,
}

/// Differential of the map along a tangent direction, by a geodesic central
/// difference, projected onto the image tangent space.
fn differential(f: &SampledMap, x: &SpherePoint, u: &Vector, image: &SpherePoint) -> Vector {
    let h = 1e-5_f64;
    let fwd = SpherePoint::new(x.vector().scale(h.cos()).add_scaled(h.sin(), u))
        .expect("geodesic step");
    let bwd = SpherePoint::new(x.vector().scale(h.cos()).add_scaled(-h.sin(), u))
        .expect("geodesic step");
    let d = f.eval(&fwd).vector().sub(f.eval(&bwd).vector()).scale(1.0 / (2.0 * h));
    d.add_scaled(-d.dot(image.vector()), image.vector())
}

/// Signed Jacobian determinant of f at x in oriented tangent frames.
fn jacobian_determinant(f: &SampledMap, x: &SpherePoint) -> f64 {
    let image = f.eval(x);
    let frame_x = tangent_frame(x);
    let frame_y = tangent_frame(&image);
    let n = frame_x.len();
    let mut m = SmallMatrix::zeros(n);
    for (j, u) in frame_x.iter().enumerate() {
        let df = differential(f, x, u, &image);
        for (i, v) in frame_y.iter().enumerate() {
            m.set(i, j, v.dot(&df));
        }
    }
    m.determinant()
}

/// Brouwer degree by the normalized Jacobian integral.
pub fn degree(f: &SampledMap, n: Dimension, grid_order: u32) -> Result<DegreeReport> {
    let quad = grid(n, grid_order)?;
    let idx: Vec<usize> = (0..quad.len()).collect();
    let total = par::sum(&idx, |&k| {
        quad.weights()[k] * jacobian_determinant(f, &quad.nodes()[k])
    });
    let raw = total / sphere_volume(n);
    let rounded = raw.round();
    let gap = (raw - rounded).abs();
    if gap >= 0.1 {
        return Err(Error::NonIntegerDegree { raw, gap });
    }
    Ok(DegreeReport {
        degree: rounded as i64,
        raw_integral: raw,
        rounding_gap: gap,
        method: "jacobian-integral".into(),
    })
}

/// Brouwer degree by signed preimage counting at the regular value `target`.
pub fn degree_by_preimages(
    f: &SampledMap,
    n: Dimension,
    target: &SpherePoint,
    grid_order: u32,
) -> Result<DegreeReport> {
    let quad = grid(n, grid_order)?;
    let frame_z = tangent_frame(target);
    let dim_t = frame_z.len();

    let mut roots: Vec<(SpherePoint, f64)> = Vec::new();
    for seed in quad.nodes() {
        if f.eval(seed).dot(target) < 0.8 {
            continue;
        }
        // Newton in the target's tangent coordinates
        let mut x = *seed;
        let mut converged = false;
        for _ in 0..40 {
            let image = f.eval(&x);
            let mut res = Vector::zeros(dim_t);
            for (i, v) in frame_z.iter().enumerate() {
                res.set(i, v.dot(image.vector()));
            }
            if res.norm() < 1e-11 {
                converged = image.dot(target) > 0.0;
                break;
            }
            let frame_x = tangent_frame(&x);
            let mut jac = SmallMatrix::zeros(dim_t);
            for (j, u) in frame_x.iter().enumerate() {
                let df = differential(f, &x, u, &image);
                for (i, v) in frame_z.iter().enumerate() {
                    jac.set(i, j, v.dot(&df));
                }
            }
            let Some(du) = solve(&jac, &res.neg()) else { break };
            if du.norm() > 0.8 {
                break; // diverging seed
            }
            let mut step = Vector::zeros(x.dim());
            for (j, u) in frame_x.iter().enumerate() {
                step = step.add_scaled(du[j], u);
            }
            let t = step.norm();
            let moved = x.vector().scale(t.cos()).add_scaled(if t > 0.0 { t.sin() / t } else { 0.0 }, &step);
            x = SpherePoint::new(moved).expect("geodesic step");
        }
        if !converged {
            continue;
        }
        if roots.iter().any(|(r, _)| r.vector().sub(x.vector()).norm() < 1e-5) {
            continue;
        }
        let det = jacobian_determinant(f, &x);
        if det.abs() < 1e-8 {
            return Err(Error::NonIntegerDegree {
                raw: f64::NAN,
                gap: 1.0,
            });
        }
        roots.push((x, det.signum()));
    }

    let total: f64 = roots.iter().map(|(_, s)| s).sum();
    Ok(DegreeReport {
        degree: total as i64,
        raw_integral: total,
        rounding_gap: 0.0,
        method: "preimage-count".into(),
    })
}

/// Max over a test grid of |f(-p) - R_p f(p)|.
pub fn equivariance_residual(f: &SampledMap, n: Dimension) -> f64 {
    let quad = grid(n, 21).expect("test grid");
    let vals = par::map_collect(quad.nodes(), |p| {
        let lhs = f.eval(&p.antipode());
        let rhs = reflection(p, &f.eval(p));
        lhs.vector().sub(rhs.vector()).norm()
    });
    vals.into_iter().fold(0.0, f64::max)
}

/// Equivariance residual plus degree and the parity verdict: odd degree for
/// even n, degree one for odd n.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParityReport {
    pub equivariance_residual: f64,
    pub degree: DegreeReport,
    pub parity_ok: bool,
}

pub fn degree_parity_check(f: &SampledMap, n: Dimension, grid_order: u32) -> Result<ParityReport> {
    let residual = equivariance_residual(f, n);
    if residual > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "map is not equivariant: residual {residual:.3e} exceeds 1e-6"
        )));
    }
    let report = degree(f, n, grid_order)?;
    let parity_ok = if n.get().is_multiple_of(2) {
        report.degree.rem_euclid(2) == 1
    } else {
        report.degree == 1
    };
    Ok(ParityReport {
        equivariance_residual: residual,
        degree: report,
        parity_ok,
    })
}

/// Deterministic corpus of equivariant maps: the identity, the antipodal map,
/// rotation conjugates, and even-field perturbations of both at a range of
/// amplitudes.
pub fn equivariant_sample_maps(n: Dimension, seed: u64) -> Vec<(String, SampledMap)> {
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    let dim = n.ambient();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut random_field = |terms: usize| EvenField {
        constant: *crate::geom::random_unit_vector(dim, &mut rng).vector(),
        quadratic: (0..terms)
            .map(|_| {
                (
                    *crate::geom::random_unit_vector(dim, &mut rng).vector(),
                    *crate::geom::random_unit_vector(dim, &mut rng).vector(),
                    *crate::geom::random_unit_vector(dim, &mut rng).vector(),
                )
            })
            .collect(),
    };

    let mut maps: Vec<(String, SampledMap)> = vec![
        ("identity".into(), SampledMap::Identity),
        ("antipodal".into(), SampledMap::Antipodal),
    ];
    for (label, amp) in [("small", 0.25), ("medium", 0.9), ("large", 1.8)] {
        maps.push((
            format!("identity-perturbed-{label}"),
            SampledMap::EvenFieldMap {
                base_sign: 1.0,
                amplitude: amp,
                field: random_field(2),
            },
        ));
    }
    maps.push((
        "antipodal-perturbed".into(),
        SampledMap::EvenFieldMap {
            base_sign: -1.0,
            amplitude: 0.7,
            field: random_field(2),
        },
    ));
    let mut rng2 = StdRng::seed_from_u64(seed ^ 0x5bd1e995);
    maps.push((
        "conjugated-perturbed".into(),
        SampledMap::Conjugated {
            rotation: crate::geom::random_rotation(dim, &mut rng2),
            inner: Box::new(SampledMap::EvenFieldMap {
                base_sign: 1.0,
                amplitude: 1.1,
                field: random_field(1),
            }),
        },
    ));
    maps
}
