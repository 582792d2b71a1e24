//! Finite atomic measures on Sⁿ: metric volume measures on quadrature grids,
//! pushforwards, cap lifts, and Hersch renormalization.

use crate::constants::Dimension;
use crate::error::{Error, Result};
use crate::geom::{moebius_vector_unchecked, Cap, SphereMap, SpherePoint};
use crate::geom::{cap_reflection, BallPoint};
use crate::grid::QuadratureGrid;
use crate::linalg::{solve, SmallMatrix, Vector};
use crate::metric::LogConformalFactor;
use crate::par;
use std::io::{BufRead, BufReader, Read, Write};

/// One weighted atom.
#[derive(Clone, Copy, Debug)]
pub struct Atom {
    pub point: SpherePoint,
    pub weight: f64,
}

/// Finite atomic measure with nonnegative weights and positive total mass.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    n: Dimension,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(n: Dimension, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut mass = 0.0;
        for a in &atoms {
            if a.point.dim() != n.ambient() {
                return Err(Error::InvalidMeasure(format!(
                    "atom dimension {} does not match ambient {}",
                    a.point.dim(),
                    n.ambient()
                )));
            }
            if !a.weight.is_finite() || a.weight < 0.0 {
                return Err(Error::InvalidMeasure(format!("bad weight {}", a.weight)));
            }
            mass += a.weight;
        }
        if mass <= 0.0 {
            return Err(Error::InvalidMeasure("total mass must be positive".into()));
        }
        Ok(DiscreteMeasure { n, atoms })
    }

    /// Volume measure of g = e^{2w} g₀ sampled on a grid: weights w_i e^{n w(x_i)}.
    pub fn from_metric<G: LogConformalFactor>(g: &G, grid: &QuadratureGrid) -> Self {
        let n = grid.dimension();
        debug_assert_eq!(n, g.dimension());
        let nf = n.as_f64();
        let idx: Vec<usize> = (0..grid.len()).collect();
        let atoms = par::map_collect(&idx, |&i| {
            let x = grid.nodes()[i];
            Atom {
                point: x,
                weight: grid.weights()[i] * (nf * g.log_factor(&x)).exp(),
            }
        });
        DiscreteMeasure { n, atoms }
    }

    /// The grid itself as the round volume measure.
    pub fn from_grid(grid: &QuadratureGrid) -> Self {
        let atoms = grid
            .iter()
            .map(|(x, w)| Atom { point: *x, weight: w })
            .collect();
        DiscreteMeasure {
            n: grid.dimension(),
            atoms,
        }
    }

    #[inline]
    pub fn dimension(&self) -> Dimension {
        self.n
    }

    #[inline]
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        par::sum(&self.atoms, |a| a.weight)
    }

    /// First moment Σ w x.
    pub fn first_moment(&self) -> Vector {
        moment_of(&self.atoms, self.n, None)
    }

    /// Atoms moved by the map, weights unchanged; mass preserved exactly.
    pub fn pushforward(&self, map: &SphereMap) -> DiscreteMeasure {
        let atoms = par::map_collect(&self.atoms, |a| Atom {
            point: map.apply(&a.point),
            weight: a.weight,
        });
        DiscreteMeasure { n: self.n, atoms }
    }

    /// Scale all weights by a positive constant.
    pub fn scaled(&self, factor: f64) -> DiscreteMeasure {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                point: a.point,
                weight: a.weight * factor,
            })
            .collect();
        DiscreteMeasure { n: self.n, atoms }
    }

    /// Lift into the cap: atoms inside a stay, atoms inside a* are replaced by
    /// their τ_a images with unchanged weights. Atoms numerically on ∂a
    /// (|margin| < 1e-12) are assigned to a and counted.
    pub fn lift(&self, cap: &Cap) -> LiftedMeasure {
        let results = par::map_collect(&self.atoms, |a| {
            let margin = cap.margin(&a.point);
            if margin >= -1e-12 {
                let boundary = margin < 1e-12;
                (Atom { point: a.point, weight: a.weight }, boundary)
            } else {
                (
                    Atom {
                        point: cap_reflection(cap, &a.point),
                        weight: a.weight,
                    },
                    false,
                )
            }
        });
        let boundary_assignments = results.iter().filter(|(_, b)| *b).count();
        let atoms = results.into_iter().map(|(a, _)| a).collect();
        LiftedMeasure {
            measure: DiscreteMeasure { n: self.n, atoms },
            boundary_assignments,
        }
    }

    /// CSV export with header x0,...,xn,weight.
    pub fn to_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.n.ambient();
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        for a in &self.atoms {
            let mut row: Vec<String> = a.point.vector().as_slice().iter().map(|v| v.to_string()).collect();
            row.push(a.weight.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// CSV import; the header row is required and fixes the dimension.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Csv("empty measure file".into()))??;
        let cols: Vec<&str> = header.split(',').map(|s| s.trim()).collect();
        if cols.len() < 4 || cols[cols.len() - 1] != "weight" {
            return Err(Error::Csv(
                "expected header x0,...,xn,weight with at least three coordinates".into(),
            ));
        }
        let ambient = cols.len() - 1;
        let n = Dimension::new(ambient as u32 - 1)?;
        let mut atoms = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != ambient + 1 {
                return Err(Error::Csv(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 2,
                    ambient + 1,
                    fields.len()
                )));
            }
            let mut coords = Vec::with_capacity(ambient);
            for f in &fields[..ambient] {
                coords.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Csv(format!("line {}: {e}", lineno + 2)))?,
                );
            }
            let weight = fields[ambient]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("line {}: {e}", lineno + 2)))?;
            atoms.push(Atom {
                point: SpherePoint::from_coords(&coords)?,
                weight,
            });
        }
        DiscreteMeasure::new(n, atoms)
    }
}

/// Result of folding a measure into a cap.
#[derive(Clone, Debug)]
pub struct LiftedMeasure {
    pub measure: DiscreteMeasure,
    /// atoms that sat numerically on the cap boundary and were assigned to a
    pub boundary_assignments: usize,
}

/// Options for the renormalization solver.
#[derive(Clone, Copy, Debug)]
pub struct HerschOptions {
    /// relative residual |Σ w d_ξ(x)| / mass
    pub tolerance: f64,
    pub max_iterations: usize,
    /// hard cap on |ξ| during iteration
    pub boundary_cap: f64,
    /// starting point; defaults to the origin
    pub initial: Option<BallPoint>,
}

impl Default for HerschOptions {
    fn default() -> Self {
        HerschOptions {
            tolerance: 1e-10,
            max_iterations: 200,
            boundary_cap: 1.0 - 1e-9,
            initial: None,
        }
    }
}

/// The renormalization point of a measure with its solver diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct RenormalizationPoint {
    pub xi: BallPoint,
    pub residual: f64,
    pub iterations: usize,
}

/// Moment map M(ξ) = Σ w d_ξ(x); the renormalization point is its zero.
pub fn moment_at(nu: &DiscreteMeasure, xi: &Vector) -> Vector {
    moment_of(nu.atoms(), nu.dimension(), Some(xi))
}

fn moment_of(atoms: &[Atom], n: Dimension, xi: Option<&Vector>) -> Vector {
    let dim = n.ambient();
    let acc: [f64; 4] = match xi {
        // entries past dim are zero-padded, so the 0..4 loop is safe
        None => par::fold(atoms, |a, acc: &mut [f64; 4]| {
            for k in 0..4 {
                acc[k] += a.weight * a.point.vector()[k];
            }
        }),
        Some(xi) => par::fold(atoms, |a, acc: &mut [f64; 4]| {
            let y = moebius_vector_unchecked(xi, a.point.vector());
            for k in 0..dim {
                acc[k] += a.weight * y[k];
            }
        }),
    };
    let mut v = Vector::zeros(dim);
    for k in 0..dim {
        v.set(k, acc[k]);
    }
    v
}

/// Find ξ with Σ w·d_ξ(x) = 0 by damped Newton with a finite-difference
/// Jacobian, falling back to relaxed fixed-point steps, with |ξ| capped away
/// from the boundary.
pub fn hersch_renormalize(nu: &DiscreteMeasure, opts: &HerschOptions) -> Result<RenormalizationPoint> {
    let dim = nu.dimension().ambient();
    let mass = nu.mass();
    if nu.len() < 2 {
        return Err(Error::InvalidMeasure(
            "renormalization of a single atom escapes to the boundary".into(),
        ));
    }

    let mut xi = match &opts.initial {
        Some(b) => *b.vector(),
        None => Vector::zeros(dim),
    };
    let cap = opts.boundary_cap;
    let clamp = |v: Vector| -> (Vector, bool) {
        let norm = v.norm();
        if norm >= cap {
            (v.scale(cap / norm * (1.0 - 1e-12)), true)
        } else {
            (v, false)
        }
    };

    let mut m = moment_of(nu.atoms(), nu.dimension(), Some(&xi));
    let mut res = m.norm() / mass;
    let mut consecutive_clamps = 0usize;

    for iter in 0..opts.max_iterations {
        if res <= opts.tolerance {
            return Ok(RenormalizationPoint {
                xi: BallPoint::new(xi)?,
                residual: res,
                iterations: iter,
            });
        }

        // finite-difference Jacobian of the moment map
        let h = 1e-6_f64.min((1.0 - xi.norm()) / 8.0).max(1e-9);
        let mut jac = SmallMatrix::zeros(dim);
        for j in 0..dim {
            let mut fwd = xi;
            fwd.set(j, fwd[j] + h);
            let mut bwd = xi;
            bwd.set(j, bwd[j] - h);
            let mf = moment_of(nu.atoms(), nu.dimension(), Some(&fwd));
            let mb = moment_of(nu.atoms(), nu.dimension(), Some(&bwd));
            for i in 0..dim {
                jac.set(i, j, (mf[i] - mb[i]) / (2.0 * h));
            }
        }

        let newton = solve(&jac, &m.neg());
        let mut accepted = false;
        let mut clamped_step = false;
        if let Some(delta) = newton {
            let mut t = 1.0;
            for _ in 0..7 {
                let (cand, clamped) = clamp(xi.add_scaled(t, &delta));
                let mc = moment_of(nu.atoms(), nu.dimension(), Some(&cand));
                if mc.norm() / mass < (1.0 - 0.25 * t) * res {
                    xi = cand;
                    m = mc;
                    res = m.norm() / mass;
                    accepted = true;
                    clamped_step = clamped;
                    break;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // relaxed fixed-point step toward reducing the moment
            let (cand, clamped) = clamp(xi.add_scaled(-0.5 / mass, &m));
            let mc = moment_of(nu.atoms(), nu.dimension(), Some(&cand));
            if mc.norm().is_finite() {
                xi = cand;
                m = mc;
                res = m.norm() / mass;
                clamped_step = clamped;
            } else {
                // degenerate map at the boundary; hold position and count it
                clamped_step = true;
            }
        }
        if !res.is_finite() {
            return Err(Error::BoundaryEscape {
                norm: xi.norm(),
                residual: f64::INFINITY,
            });
        }
        consecutive_clamps = if clamped_step { consecutive_clamps + 1 } else { 0 };
        if consecutive_clamps >= 8 {
            return Err(Error::BoundaryEscape {
                norm: xi.norm(),
                residual: res,
            });
        }
    }

    if res <= opts.tolerance {
        return Ok(RenormalizationPoint {
            xi: BallPoint::new(xi)?,
            residual: res,
            iterations: opts.max_iterations,
        });
    }
    if xi.norm() > 1.0 - 1e-6 {
        Err(Error::BoundaryEscape {
            norm: xi.norm(),
            residual: res,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: opts.max_iterations,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{random_rotation, random_unit_vector};
    use crate::grid::grid;
    use crate::metric::ConformalMetric;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};
    use std::f64::consts::PI;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn round_measure(n: u32, order: u32) -> DiscreteMeasure {
        DiscreteMeasure::from_grid(&grid(dim(n), order).unwrap())
    }

    #[test]
    fn metric_measure_masses() {
        let g2 = grid(dim(2), 20).unwrap();
        let round = ConformalMetric::round(dim(2));
        let nu = DiscreteMeasure::from_metric(&round, &g2);
        assert!((nu.mass() - 4.0 * PI).abs() < 1e-10);

        let shifted = round.shifted(0.35);
        let nu_c = DiscreteMeasure::from_metric(&shifted, &g2);
        assert!((nu_c.mass() - (2.0 * 0.35f64).exp() * 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn pullback_metric_preserves_total_volume() {
        // w = log conformal factor of d_eta: mass stays σ_n
        for n in [2u32, 3] {
            let order = if n == 2 { 40 } else { 40 };
            let g = grid(dim(n), order).unwrap();
            let mut coords = vec![0.0; n as usize + 1];
            coords[1] = 0.45;
            let xi = BallPoint::from_coords(&coords).unwrap();
            let metric = ConformalMetric::moebius_pullback(dim(n), xi).unwrap();
            let nu = DiscreteMeasure::from_metric(&metric, &g);
            let vol = crate::constants::sphere_volume(dim(n));
            assert!((nu.mass() - vol).abs() < 1e-8 * vol, "n = {n}: {}", nu.mass());
        }
    }

    #[test]
    fn pushforward_preserves_mass_and_inverts() {
        let nu = round_measure(2, 14);
        let xi = BallPoint::from_coords(&[0.3, -0.2, 0.1]).unwrap();
        let fwd = nu.pushforward(&SphereMap::Moebius(xi));
        assert_eq!(fwd.mass().to_bits(), nu.mass().to_bits());
        let back = fwd.pushforward(&SphereMap::Moebius(xi.negate()));
        for (a, b) in nu.atoms().iter().zip(back.atoms()) {
            assert!(a.point.vector().sub(b.point.vector()).norm() < 1e-10);
        }
    }

    #[test]
    fn lift_keeps_atoms_in_cap_closure_and_mass() {
        let mut rng = StdRng::seed_from_u64(2);
        for n in [2u32, 3] {
            let nu = round_measure(n, 12);
            let p = random_unit_vector(n as usize + 1, &mut rng);
            let a = Cap::new(0.4, p).unwrap();
            let lifted = nu.lift(&a);
            assert_eq!(lifted.boundary_assignments, 0);
            assert!((lifted.measure.mass() - nu.mass()).abs() < 1e-14 * nu.mass());
            for atom in lifted.measure.atoms() {
                assert!(a.margin(&atom.point) >= -1e-12);
            }
        }
    }

    #[test]
    fn lift_of_complement_is_reflection_pushforward() {
        let mut rng = StdRng::seed_from_u64(3);
        let nu = round_measure(2, 16);
        let p = random_unit_vector(3, &mut rng);
        let a = Cap::new(-0.25, p).unwrap();
        let lift_star = nu.lift(&a.complement()).measure;
        let reflected = nu.lift(&a).measure.pushforward(&SphereMap::CapReflection(a));
        for (x, y) in lift_star.atoms().iter().zip(reflected.atoms()) {
            assert!(x.point.vector().sub(y.point.vector()).norm() < 1e-10);
            assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        }
    }

    #[test]
    fn hersch_balanced_measures_renormalize_at_origin() {
        let nu = round_measure(2, 16);
        let r = hersch_renormalize(&nu, &HerschOptions::default()).unwrap();
        assert!(r.xi.norm() < 1e-10);
        assert!(r.residual <= 1e-10);

        let two = DiscreteMeasure::new(
            dim(2),
            vec![
                Atom { point: SpherePoint::axis(3, 0), weight: 1.0 },
                Atom { point: SpherePoint::axis(3, 0).antipode(), weight: 1.0 },
            ],
        )
        .unwrap();
        let r = hersch_renormalize(&two, &HerschOptions::default()).unwrap();
        assert!(r.xi.norm() < 1e-12);
    }

    #[test]
    fn hersch_recovers_pushforward_center() {
        let nu = round_measure(2, 20);
        let eta = BallPoint::from_coords(&[0.0, 0.4, 0.0]).unwrap();
        let pushed = nu.pushforward(&SphereMap::Moebius(eta));
        let r = hersch_renormalize(&pushed, &HerschOptions::default()).unwrap();
        assert!(
            r.xi.vector().add(eta.vector()).norm() < 1e-8,
            "xi = {:?}",
            r.xi.vector().as_slice()
        );
    }

    #[test]
    fn hersch_unique_under_random_restarts() {
        let mut rng = StdRng::seed_from_u64(4);
        let nu = round_measure(2, 16);
        let eta = BallPoint::from_coords(&[0.25, -0.35, 0.1]).unwrap();
        let pushed = nu.pushforward(&SphereMap::Moebius(eta));
        let reference = hersch_renormalize(&pushed, &HerschOptions::default()).unwrap();
        for _ in 0..20 {
            let start = crate::geom::random_ball_point(3, 0.8, &mut rng);
            let opts = HerschOptions {
                initial: Some(start),
                ..HerschOptions::default()
            };
            let r = hersch_renormalize(&pushed, &opts).unwrap();
            assert!(
                r.xi.vector().sub(reference.xi.vector()).norm() < 1e-8,
                "restart diverged: {:?}",
                r.xi.vector().as_slice()
            );
        }
    }

    #[test]
    fn hersch_is_rotation_equivariant() {
        let mut rng = StdRng::seed_from_u64(5);
        let nu = round_measure(2, 16);
        let eta = BallPoint::from_coords(&[0.2, 0.3, -0.1]).unwrap();
        let pushed = nu.pushforward(&SphereMap::Moebius(eta));
        let base = hersch_renormalize(&pushed, &HerschOptions::default()).unwrap();
        for _ in 0..5 {
            let rot = random_rotation(3, &mut rng);
            let rotated = pushed.pushforward(&SphereMap::Orthogonal(rot));
            let r = hersch_renormalize(&rotated, &HerschOptions::default()).unwrap();
            let expect = rot.apply(base.xi.vector());
            assert!(r.xi.vector().sub(&expect).norm() < 1e-8);
        }
    }

    #[test]
    fn hersch_rejects_concentrated_measures() {
        let one = DiscreteMeasure::new(
            dim(2),
            vec![
                Atom { point: SpherePoint::axis(3, 0), weight: 1.0 },
                Atom { point: SpherePoint::axis(3, 0), weight: 2.0 },
            ],
        )
        .unwrap();
        match hersch_renormalize(&one, &HerschOptions::default()) {
            Err(Error::BoundaryEscape { .. }) => {}
            other => panic!("expected BoundaryEscape, got {other:?}"),
        }
    }

    #[test]
    fn csv_roundtrip() {
        let mut rng = StdRng::seed_from_u64(6);
        let atoms: Vec<Atom> = (0..50)
            .map(|_| Atom {
                point: random_unit_vector(3, &mut rng),
                weight: rng.random_range(0.0..2.0),
            })
            .collect();
        let nu = DiscreteMeasure::new(dim(2), atoms).unwrap();
        let mut buf = Vec::new();
        nu.to_csv(&mut buf).unwrap();
        let back = DiscreteMeasure::from_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), nu.len());
        for (a, b) in nu.atoms().iter().zip(back.atoms()) {
            assert!(a.point.vector().sub(b.point.vector()).norm() < 1e-12);
            assert!((a.weight - b.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_measures() {
        assert!(DiscreteMeasure::new(dim(2), vec![]).is_err());
        let bad = vec![Atom {
            point: SpherePoint::axis(3, 0),
            weight: -1.0,
        }];
        assert!(DiscreteMeasure::new(dim(2), bad).is_err());
        let zero = vec![Atom {
            point: SpherePoint::axis(3, 0),
            weight: 0.0,
        }];
        assert!(DiscreteMeasure::new(dim(2), zero).is_err());
    }
}
