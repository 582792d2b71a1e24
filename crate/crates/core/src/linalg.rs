//! Small fixed-size vectors and symmetric matrices for ambient dimensions up to 4.
//!
//! Points on S^n and in B^{n+1} live in R^{n+1} with n+1 <= 4 at desk scale.
//! Entries past `dim` are kept at zero so inner products can run over the full
//! backing array without branching.

/// Ambient vector in R^{dim}, dim <= 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector {
    data: [f64; 4],
    dim: usize,
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=4).contains(&dim));
        Vector { data: [0.0; 4], dim }
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        let mut v = Vector::zeros(coords.len());
        v.data[..coords.len()].copy_from_slice(coords);
        v
    }

    /// i-th standard basis vector of R^{dim}.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.data[i] = 1.0;
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let a = &self.data;
        let b = &other.data;
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Vector {
        let mut out = *self;
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n < 1e-300 {
            return None;
        }
        Some(self.scale(1.0 / n))
    }

    #[inline]
    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (v, o) in out.data.iter_mut().zip(&other.data) {
            *v += o;
        }
        out
    }

    #[inline]
    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (v, o) in out.data.iter_mut().zip(&other.data) {
            *v -= o;
        }
        out
    }

    #[inline]
    pub fn neg(&self) -> Vector {
        self.scale(-1.0)
    }

    /// self + s * other
    #[inline]
    pub fn add_scaled(&self, s: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (v, o) in out.data.iter_mut().zip(&other.data) {
            *v += s * o;
        }
        out
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.data[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(i < self.dim);
        self.data[i] = value;
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.sub(other).norm()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

/// Dense symmetric-friendly matrix on R^{dim}, dim <= 4, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMatrix {
    data: [[f64; 4]; 4],
    dim: usize,
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=4).contains(&dim));
        SmallMatrix { data: [[0.0; 4]; 4], dim }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SmallMatrix::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i][j] = value;
    }

    #[inline]
    pub fn add_assign(&mut self, i: usize, j: usize, value: f64) {
        self.data[i][j] += value;
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.data[i][j] * v[j];
            }
            out.set(i, s);
        }
        out
    }

    pub fn transpose(&self) -> SmallMatrix {
        let mut out = SmallMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i][j] = self.data[j][i];
            }
        }
        out
    }

    pub fn matmul(&self, other: &SmallMatrix) -> SmallMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = SmallMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.data[i][k] * other.data[k][j];
                }
                out.data[i][j] = s;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i][i]).sum()
    }

    /// Column j as a vector.
    pub fn column(&self, j: usize) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for i in 0..self.dim {
            v.set(i, self.data[i][j]);
        }
        v
    }

    pub fn determinant(&self) -> f64 {
        let d = self.dim;
        let m = &self.data;
        match d {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            4 => {
                let mut det = 0.0;
                for j in 0..4 {
                    let mut sub = SmallMatrix::zeros(3);
                    for (si, row) in m.iter().enumerate().skip(1) {
                        let mut sj = 0;
                        for (cj, &val) in row.iter().enumerate().take(4) {
                            if cj == j {
                                continue;
                            }
                            sub.data[si - 1][sj] = val;
                            sj += 1;
                        }
                    }
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    det += sign * m[0][j] * sub.determinant();
                }
                det
            }
            _ => unreachable!(),
        }
    }
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting.
/// Returns None when the matrix is numerically singular.
pub fn solve(m: &SmallMatrix, rhs: &Vector) -> Option<Vector> {
    let d = m.dim();
    let mut a = m.data;
    let mut b = [0.0; 4];
    b[..d].copy_from_slice(rhs.as_slice());

    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..d {
            let f = a[r][col] / a[col][col];
            for c in col..d {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = Vector::zeros(d);
    for col in (0..d).rev() {
        let mut s = b[col];
        for c in col + 1..d {
            s -= a[col][c] * x[c];
        }
        x.set(col, s / a[col][col]);
    }
    Some(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order with matching orthonormal eigenvectors
/// as columns of the returned matrix.
pub fn jacobi_eigen(m: &SmallMatrix) -> (Vector, SmallMatrix) {
    let d = m.dim();
    let mut a = *m;
    let mut v = SmallMatrix::identity(d);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                off += a.data[i][j] * a.data[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a.data[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a.data[q][q] - a.data[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a.data[k][p];
                    let akq = a.data[k][q];
                    a.data[k][p] = c * akp - s * akq;
                    a.data[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a.data[p][k];
                    let aqk = a.data[q][k];
                    a.data[p][k] = c * apk - s * aqk;
                    a.data[q][k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v.data[k][p];
                    let vkq = v.data[k][q];
                    v.data[k][p] = c * vkp - s * vkq;
                    v.data[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a.data[i][i].partial_cmp(&a.data[j][j]).unwrap());
    let mut vals = Vector::zeros(d);
    let mut vecs = SmallMatrix::zeros(d);
    for (slot, &idx) in order.iter().enumerate() {
        vals.set(slot, a.data[idx][idx]);
        for k in 0..d {
            vecs.data[k][slot] = v.data[k][idx];
        }
    }
    (vals, vecs)
}

/// Orthogonal matrix mapping the unit vector `v` to the first basis vector,
/// built as a Householder reflection (identity when v is already e1).
pub fn map_to_first_axis(v: &Vector) -> SmallMatrix {
    let d = v.dim();
    let e1 = Vector::basis(d, 0);
    let u = v.sub(&e1);
    let un = u.norm_sq();
    if un < 1e-28 {
        return SmallMatrix::identity(d);
    }
    let mut h = SmallMatrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            h.data[i][j] -= 2.0 * u[i] * u[j] / un;
        }
    }
    h
}
