//! Conformal geometry of the closed unit ball: the Moebius family d_xi,
//! hyperplane reflections, caps and their conformal reflections.

use crate::error::{Error, Result};
use crate::linalg::{SmallMatrix, Vector};
use rand::{Rng, RngExt};

/// Unit vector in R^{n+1}; renormalized on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint(Vector);

impl SpherePoint {
    pub fn new(v: Vector) -> Result<Self> {
        match v.normalized() {
            Some(u) => Ok(SpherePoint(u)),
            None => Err(Error::NotOnSphere(v.norm())),
        }
    }

    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        SpherePoint::new(Vector::from_slice(coords))
    }

    /// i-th standard basis vector.
    pub fn axis(dim: usize, i: usize) -> Self {
        SpherePoint(Vector::basis(dim, i))
    }

    #[inline]
    pub fn vector(&self) -> &Vector {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint(self.0.neg())
    }
}

/// Interior point of the unit ball, |x| < 1 strictly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallPoint(Vector);

impl BallPoint {
    pub fn new(v: Vector) -> Result<Self> {
        if v.norm() >= 1.0 {
            return Err(Error::NotInBall(v.norm()));
        }
        Ok(BallPoint(v))
    }

    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        BallPoint::new(Vector::from_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        BallPoint(Vector::zeros(dim))
    }

    #[inline]
    pub fn vector(&self) -> &Vector {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn negate(&self) -> BallPoint {
        BallPoint(self.0.neg())
    }
}

/// Caps degenerate as |r| -> 1; constructions treat those only as limits.
pub const CAP_RADIUS_LIMIT: f64 = 1.0 - 1e-6;

/// Spherical cap a_{r,p} = d_{rp}(hemisphere around p), (r, p) in (-1,1) x S^n.
#[derive(Clone, Copy, Debug)]
pub struct Cap {
    r: f64,
    p: SpherePoint,
}

impl Cap {
    pub fn new(r: f64, p: SpherePoint) -> Result<Self> {
        if !r.is_finite() || r.abs() > CAP_RADIUS_LIMIT {
            return Err(Error::DegenerateCap(r));
        }
        Ok(Cap { r, p })
    }

    #[inline]
    pub fn r(&self) -> f64 {
        self.r
    }

    #[inline]
    pub fn center(&self) -> &SpherePoint {
        &self.p
    }

    /// The symmetric cap a* = a_{-r,-p}, the complement of the closure of a.
    pub fn complement(&self) -> Cap {
        Cap {
            r: -self.r,
            p: self.p.antipode(),
        }
    }

    /// Membership threshold: x in a_{r,p} iff x·p > 2r/(1+r²).
    pub fn threshold(&self) -> f64 {
        2.0 * self.r / (1.0 + self.r * self.r)
    }

    /// The Moebius center rp of the defining map d_{rp}.
    pub fn moebius_center(&self) -> BallPoint {
        BallPoint(self.p.vector().scale(self.r))
    }

    /// Signed membership margin d_{-rp}(x)·p; positive inside a.
    pub fn margin(&self, x: &SpherePoint) -> f64 {
        let pulled = moebius_apply(&self.moebius_center().negate(), x)
            .expect("cap pullback is regular for valid caps");
        pulled.dot(&self.p)
    }

    /// Points on the boundary circle d_{rp}({y : y·p = 0}), deterministically spread.
    pub fn boundary_samples(&self, count: usize) -> Vec<SpherePoint> {
        let dim = self.p.dim();
        let frame = tangent_frame(&self.p);
        let mut out = Vec::with_capacity(count);
        for j in 0..count {
            let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.3) / count as f64;
            let mut y = frame[0].scale(t.cos()).add(&frame[1].scale(t.sin()));
            if dim == 4 {
                // mix in the third tangent direction so samples cover the 2-sphere boundary
                let s = (1.3 * t).sin() * 0.7;
                y = y.scale((1.0 - s * s).sqrt()).add_scaled(s, &frame[2]);
            }
            let y = SpherePoint::new(y).expect("unit boundary direction");
            out.push(
                moebius_apply(&self.moebius_center(), &y).expect("cap boundary map is regular"),
            );
        }
        out
    }
}

/// d_xi(x) = [(1-|xi|²)x + (1+2 xi·x+|x|²) xi] / (1+2 xi·x+|x|²|xi|²)
/// applied to a sphere point; the image is renormalized to contain drift.
pub fn moebius_apply(xi: &BallPoint, x: &SpherePoint) -> Result<SpherePoint> {
    let v = moebius_vector(xi.vector(), x.vector())?;
    SpherePoint::new(v)
}

/// Same map on interior points; preserves the open ball.
pub fn moebius_apply_ball(xi: &BallPoint, x: &BallPoint) -> Result<BallPoint> {
    let v = moebius_vector(xi.vector(), x.vector())?;
    // guard against rounding pushing an interior point onto the boundary
    if v.norm() >= 1.0 {
        return Err(Error::NotInBall(v.norm()));
    }
    BallPoint::new(v)
}

pub(crate) fn moebius_vector(xi: &Vector, x: &Vector) -> Result<Vector> {
    let xx = x.norm_sq();
    let ss = xi.norm_sq();
    let dot = xi.dot(x);
    let den = 1.0 + 2.0 * dot + xx * ss;
    if den.abs() < 1e-14 {
        return Err(Error::SingularMap(den.abs()));
    }
    Ok(x.scale((1.0 - ss) / den).add_scaled((1.0 + 2.0 * dot + xx) / den, xi))
}

/// Same map without the singularity guard; the denominator (1-|xi||x|)² is
/// positive for |xi| < 1, |x| <= 1, merely tiny when xi runs to the boundary.
/// Used by the renormalization solver, whose residual blows up (and whose
/// boundary-escape detection fires) instead of aborting mid-sweep.
pub(crate) fn moebius_vector_unchecked(xi: &Vector, x: &Vector) -> Vector {
    let xx = x.norm_sq();
    let ss = xi.norm_sq();
    let dot = xi.dot(x);
    let den = 1.0 + 2.0 * dot + xx * ss;
    x.scale((1.0 - ss) / den).add_scaled((1.0 + 2.0 * dot + xx) / den, xi)
}

/// Ambient differential of d_xi at x (|x| <= 1), as a full (n+1)x(n+1) matrix.
pub fn moebius_jacobian(xi: &BallPoint, x: &SpherePoint) -> SmallMatrix {
    let s = xi.vector();
    let p = x.vector();
    let dim = p.dim();
    let xx = p.norm_sq();
    let ss = s.norm_sq();
    let dot = s.dot(p);
    let den = 1.0 + 2.0 * dot + xx * ss;
    let num = p.scale(1.0 - ss).add_scaled(1.0 + 2.0 * dot + xx, s);

    // dN/dx = (1-|xi|²) I + xi (2 xi + 2x)^T,  dD/dx = 2 xi + 2|xi|² x
    let mut jac = SmallMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let dn = if i == j { 1.0 - ss } else { 0.0 } + s[i] * (2.0 * s[j] + 2.0 * p[j]);
            let dd = 2.0 * s[j] + 2.0 * ss * p[j];
            jac.set(i, j, dn / den - num[i] * dd / (den * den));
        }
    }
    jac
}

/// Conformal stretch of d_xi on the sphere: (1-|xi|²)/|x+xi|².
pub fn conformal_factor(xi: &BallPoint, x: &SpherePoint) -> f64 {
    let ss = xi.vector().norm_sq();
    (1.0 - ss) / (1.0 + 2.0 * xi.vector().dot(x.vector()) + ss)
}

/// Hyperplane reflection R_p(x) = x - 2 (p·x) p.
pub fn reflection(p: &SpherePoint, x: &SpherePoint) -> SpherePoint {
    SpherePoint::new(reflection_vector(p.vector(), x.vector())).expect("reflection preserves norm")
}

fn reflection_vector(p: &Vector, x: &Vector) -> Vector {
    x.add_scaled(-2.0 * p.dot(x), p)
}

/// Conformal reflection across the boundary of a cap:
/// tau_{a_{r,p}} = d_{rp} ∘ R_p ∘ d_{-rp}. Involution; exchanges a and a*.
pub fn cap_reflection(a: &Cap, x: &SpherePoint) -> SpherePoint {
    let c = a.moebius_center();
    let pulled = moebius_apply(&c.negate(), x).expect("cap reflection inner map");
    let reflected = reflection(a.center(), &pulled);
    moebius_apply(&c, &reflected).expect("cap reflection outer map")
}

/// Ambient differential of tau_a at x by the chain rule.
pub fn cap_reflection_jacobian(a: &Cap, x: &SpherePoint) -> SmallMatrix {
    let c = a.moebius_center();
    let pulled = moebius_apply(&c.negate(), x).expect("cap reflection inner map");
    let reflected = reflection(a.center(), &pulled);

    let j_inner = moebius_jacobian(&c.negate(), x);
    // reflection differential: I - 2 p p^T
    let dim = x.dim();
    let p = a.center().vector();
    let mut j_refl = SmallMatrix::identity(dim);
    for i in 0..dim {
        for j in 0..dim {
            j_refl.add_assign(i, j, -2.0 * p[i] * p[j]);
        }
    }
    let j_outer = moebius_jacobian(&c, &reflected);
    j_outer.matmul(&j_refl.matmul(&j_inner))
}

/// x in a_{r,p}, computed from the defining pullback d_{-rp}(x)·p > 0.
pub fn cap_contains(a: &Cap, x: &SpherePoint) -> bool {
    a.margin(x) > 0.0
}

/// Maps of the sphere used for measure pushforwards.
#[derive(Clone, Debug)]
pub enum SphereMap {
    Moebius(BallPoint),
    Reflection(SpherePoint),
    CapReflection(Cap),
    Orthogonal(SmallMatrix),
    /// Composition, applied left to right.
    Chain(Vec<SphereMap>),
}

impl SphereMap {
    pub fn apply(&self, x: &SpherePoint) -> SpherePoint {
        match self {
            SphereMap::Moebius(xi) => moebius_apply(xi, x).expect("moebius map on valid inputs"),
            SphereMap::Reflection(p) => reflection(p, x),
            SphereMap::CapReflection(a) => cap_reflection(a, x),
            SphereMap::Orthogonal(m) => {
                SpherePoint::new(m.apply(x.vector())).expect("orthogonal image")
            }
            SphereMap::Chain(maps) => {
                let mut y = *x;
                for m in maps {
                    y = m.apply(&y);
                }
                y
            }
        }
    }
}

/// Orthonormal tangent frame at x, oriented so (frame, x) is a positively
/// oriented basis of R^{n+1}.
pub fn tangent_frame(x: &SpherePoint) -> Vec<Vector> {
    let dim = x.dim();
    // drop the coordinate axis most parallel to x, Gram-Schmidt the rest
    let mut skip = 0;
    for i in 1..dim {
        if x.vector()[i].abs() > x.vector()[skip].abs() {
            skip = i;
        }
    }
    let mut frame: Vec<Vector> = Vec::with_capacity(dim - 1);
    for i in 0..dim {
        if i == skip {
            continue;
        }
        let mut v = Vector::basis(dim, i).add_scaled(-x.vector()[i], x.vector());
        for f in &frame {
            v = v.add_scaled(-v.dot(f), f);
        }
        frame.push(v.normalized().expect("independent tangent direction"));
    }
    // fix orientation
    let mut m = SmallMatrix::zeros(dim);
    for (j, f) in frame.iter().enumerate() {
        for i in 0..dim {
            m.set(i, j, f[i]);
        }
    }
    for i in 0..dim {
        m.set(i, dim - 1, x.vector()[i]);
    }
    if m.determinant() < 0.0 {
        frame.swap(0, 1);
    }
    frame
}

/// Uniform random unit vector via normalized Gaussians (Box-Muller).
pub fn random_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> SpherePoint {
    loop {
        let mut v = Vector::zeros(dim);
        let mut i = 0;
        while i < dim {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random();
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            v.set(i, radius * angle.cos());
            if i + 1 < dim {
                v.set(i + 1, radius * angle.sin());
            }
            i += 2;
        }
        if let Ok(p) = SpherePoint::new(v) {
            return p;
        }
    }
}

/// Random interior ball point with |x| <= max_norm.
pub fn random_ball_point<R: Rng>(dim: usize, max_norm: f64, rng: &mut R) -> BallPoint {
    let dir = random_unit_vector(dim, rng);
    let t: f64 = rng.random::<f64>().powf(1.0 / dim as f64) * max_norm;
    BallPoint::new(dir.vector().scale(t)).expect("scaled interior point")
}

/// Haar-ish random rotation (Gram-Schmidt of Gaussian columns, det +1).
pub fn random_rotation<R: Rng>(dim: usize, rng: &mut R) -> SmallMatrix {
    let mut cols: Vec<Vector> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = *random_unit_vector(dim, rng).vector();
        for c in &cols {
            v = v.add_scaled(-v.dot(c), c);
        }
        if let Some(u) = v.normalized() {
            cols.push(u);
        }
    }
    let mut m = SmallMatrix::zeros(dim);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..dim {
            m.set(i, j, c[i]);
        }
    }
    if m.determinant() < 0.0 {
        // flip one column to land in SO(n+1)
        for i in 0..dim {
            m.set(i, 0, -m.get(i, 0));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn e(dim: usize, i: usize) -> SpherePoint {
        SpherePoint::axis(dim, i)
    }

    #[test]
    fn moebius_at_origin_is_identity() {
        let xi = BallPoint::origin(3);
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_unit_vector(3, &mut rng);
            let y = moebius_apply(&xi, &x).unwrap();
            assert!(y.vector().sub(x.vector()).norm() < 1e-15);
        }
    }

    #[test]
    fn moebius_fixes_axis_poles() {
        for &r in &[0.3, 0.9] {
            let p = e(3, 0);
            let xi = BallPoint::new(p.vector().scale(r)).unwrap();
            let plus = moebius_apply(&xi, &p).unwrap();
            let minus = moebius_apply(&xi, &p.antipode()).unwrap();
            assert!(plus.vector().sub(p.vector()).norm() < 1e-14, "r = {r}");
            assert!(minus.vector().add(p.vector()).norm() < 1e-14, "r = {r}");
        }
    }

    #[test]
    fn moebius_preserves_sphere_and_inverts() {
        let mut rng = StdRng::seed_from_u64(7);
        for dim in [3usize, 4] {
            for _ in 0..100 {
                let xi = random_ball_point(dim, 0.95, &mut rng);
                let x = random_unit_vector(dim, &mut rng);
                let y = moebius_apply(&xi, &x).unwrap();
                assert!((y.vector().norm() - 1.0).abs() < 1e-10);
                let back = moebius_apply(&xi.negate(), &y).unwrap();
                assert!(back.vector().sub(x.vector()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn moebius_preserves_ball_interior() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let xi = random_ball_point(3, 0.9, &mut rng);
            let b = random_ball_point(3, 0.99, &mut rng);
            let image = moebius_apply_ball(&xi, &b).unwrap();
            assert!(image.norm() < 1.0);
            let back = moebius_apply_ball(&xi.negate(), &image).unwrap();
            assert!(back.vector().sub(b.vector()).norm() < 1e-10);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(3);
        let h = 1e-6_f64;
        for dim in [3usize, 4] {
            for _ in 0..20 {
                let xi = random_ball_point(dim, 0.8, &mut rng);
                let x = random_unit_vector(dim, &mut rng);
                let jac = moebius_jacobian(&xi, &x);
                for j in 0..dim {
                    let mut fwd = *x.vector();
                    fwd.set(j, fwd[j] + h);
                    let mut bwd = *x.vector();
                    bwd.set(j, bwd[j] - h);
                    let yf = moebius_vector(xi.vector(), &fwd).unwrap();
                    let yb = moebius_vector(xi.vector(), &bwd).unwrap();
                    for i in 0..dim {
                        let fd = (yf[i] - yb[i]) / (2.0 * h);
                        assert!(
                            (jac.get(i, j) - fd).abs() < 1e-7,
                            "dim {dim} entry ({i},{j}): {} vs {fd}",
                            jac.get(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conformal_factor_matches_tangent_stretch() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..30 {
            let xi = random_ball_point(3, 0.8, &mut rng);
            let x = random_unit_vector(3, &mut rng);
            let lambda = conformal_factor(&xi, &x);
            let frame = tangent_frame(&x);
            let d = 1e-6_f64;
            for u in &frame {
                // geodesic step through x in direction u
                let fwd = x.vector().scale(d.cos()).add_scaled(d.sin(), u);
                let bwd = x.vector().scale(d.cos()).add_scaled(-d.sin(), u);
                let yf = moebius_vector(xi.vector(), &fwd).unwrap();
                let yb = moebius_vector(xi.vector(), &bwd).unwrap();
                let stretch = yf.sub(&yb).norm() / (2.0 * d);
                assert!(
                    (stretch - lambda).abs() < 1e-6 * lambda.max(1.0),
                    "{stretch} vs {lambda}"
                );
            }
        }
    }

    #[test]
    fn conformal_factor_at_origin_is_one() {
        let xi = BallPoint::origin(3);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..10 {
            let x = random_unit_vector(3, &mut rng);
            assert!((conformal_factor(&xi, &x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reflection_basics() {
        let p = e(3, 0);
        let img = reflection(&p, &p);
        assert!(img.vector().add(p.vector()).norm() < 1e-15);
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let q = random_unit_vector(3, &mut rng);
            let x = random_unit_vector(3, &mut rng);
            let y = random_unit_vector(3, &mut rng);
            let twice = reflection(&q, &reflection(&q, &x));
            assert!(twice.vector().sub(x.vector()).norm() < 1e-14);
            let d1 = reflection(&q, &x).dot(&reflection(&q, &y));
            assert!((d1 - x.dot(&y)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_reflection_at_zero_radius_is_hyperplane_reflection() {
        let mut rng = StdRng::seed_from_u64(17);
        let p = random_unit_vector(3, &mut rng);
        let a = Cap::new(0.0, p).unwrap();
        for _ in 0..20 {
            let x = random_unit_vector(3, &mut rng);
            let lhs = cap_reflection(&a, &x);
            let rhs = reflection(&p, &x);
            assert!(lhs.vector().sub(rhs.vector()).norm() < 1e-13);
        }
    }

    #[test]
    fn cap_reflection_is_involution_and_swaps_sides() {
        let mut rng = StdRng::seed_from_u64(19);
        for dim in [3usize, 4] {
            for _ in 0..50 {
                let p = random_unit_vector(dim, &mut rng);
                let r = rng.random_range(-0.9..0.9);
                let a = Cap::new(r, p).unwrap();
                let x = random_unit_vector(dim, &mut rng);
                if a.margin(&x).abs() < 1e-6 {
                    continue;
                }
                let y = cap_reflection(&a, &x);
                assert_ne!(cap_contains(&a, &x), cap_contains(&a, &y));
                let back = cap_reflection(&a, &y);
                assert!(back.vector().sub(x.vector()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cap_boundary_is_fixed() {
        let mut rng = StdRng::seed_from_u64(23);
        for dim in [3usize, 4] {
            let p = random_unit_vector(dim, &mut rng);
            let a = Cap::new(0.55, p).unwrap();
            for x in a.boundary_samples(24) {
                assert!(a.margin(&x).abs() < 1e-12);
                let y = cap_reflection(&a, &x);
                assert!(y.vector().sub(x.vector()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cap_membership_and_complement() {
        let e1 = e(3, 0);
        let a0 = Cap::new(0.0, e1).unwrap();
        assert!(cap_contains(&a0, &e1));
        assert!(!cap_contains(&a0, &e1.antipode()));

        let a = Cap::new(0.5, e1).unwrap();
        let c = a.complement();
        assert!((c.r() + 0.5).abs() < 1e-15);
        assert!(c.center().vector().add(e1.vector()).norm() < 1e-15);
        let cc = c.complement();
        assert!((cc.r() - a.r()).abs() < 1e-15);

        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..200 {
            let x = random_unit_vector(3, &mut rng);
            if a.margin(&x).abs() < 1e-9 {
                continue;
            }
            assert!(cap_contains(&a, &x) ^ cap_contains(&c, &x));
        }
    }

    #[test]
    fn membership_threshold_matches_definition() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..100 {
            let p = random_unit_vector(3, &mut rng);
            let r = rng.random_range(-0.95..0.95);
            let a = Cap::new(r, p).unwrap();
            let x = random_unit_vector(3, &mut rng);
            let by_margin = a.margin(&x) > 0.0;
            let by_threshold = x.dot(&p) > a.threshold();
            assert_eq!(by_margin, by_threshold);
        }
    }

    #[test]
    fn rejects_degenerate_caps() {
        let p = e(3, 0);
        assert!(Cap::new(1.0 - 1e-7, p).is_err());
        assert!(Cap::new(-0.9999999, p).is_err());
        assert!(Cap::new(0.999, p).is_ok());
    }

    #[test]
    fn tangent_frames_are_oriented_orthonormal() {
        let mut rng = StdRng::seed_from_u64(37);
        for dim in [3usize, 4] {
            for _ in 0..50 {
                let x = random_unit_vector(dim, &mut rng);
                let frame = tangent_frame(&x);
                assert_eq!(frame.len(), dim - 1);
                for (i, u) in frame.iter().enumerate() {
                    assert!(u.dot(x.vector()).abs() < 1e-12);
                    for (j, v) in frame.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((u.dot(v) - expect).abs() < 1e-12);
                    }
                }
                let mut m = SmallMatrix::zeros(dim);
                for (j, f) in frame.iter().enumerate() {
                    for i in 0..dim {
                        m.set(i, j, f[i]);
                    }
                }
                for i in 0..dim {
                    m.set(i, dim - 1, x.vector()[i]);
                }
                assert!(m.determinant() > 0.0);
            }
        }
    }

    #[test]
    fn random_rotation_is_special_orthogonal() {
        let mut rng = StdRng::seed_from_u64(41);
        for dim in [3usize, 4] {
            let rot = random_rotation(dim, &mut rng);
            let prod = rot.matmul(&rot.transpose());
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((prod.get(i, j) - expect).abs() < 1e-12);
                }
            }
            assert!((rot.determinant() - 1.0).abs() < 1e-10);
        }
    }
}
