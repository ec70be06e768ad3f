//! Dense square matrices of tiny dimension (n ≤ 5 in practice) with the
//! symmetric eigensolver the curvature computations need. Row-major
//! storage, closed forms for n ≤ 2 and cyclic Jacobi sweeps above that;
//! robustness matters here, speed does not.

/// A square `n × n` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    a: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "row {i} has wrong length");
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Diagonal matrix with the given entries.
    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Rank-one update target: `self + s * v vᵀ`, returned as a new matrix.
    pub fn add_outer_scaled(&self, v: &[f64], s: f64) -> Self {
        assert_eq!(v.len(), self.n);
        let mut m = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                *m.at_mut(i, j) += s * v[i] * v[j];
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.a {
            *v *= s;
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = self.clone();
        for (v, w) in m.a.iter_mut().zip(&other.a) {
            *v += w;
        }
        m
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut m = self.clone();
        for (v, w) in m.a.iter_mut().zip(&other.a) {
            *v -= w;
        }
        m
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    *m.at_mut(i, j) += aik * other.get(k, j);
                }
            }
        }
        m
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `Σ_ij a_ij b_ij`.
    pub fn frob_dot(&self, other: &Matrix) -> f64 {
        assert_eq!(self.n, other.n);
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_dot(self).sqrt()
    }

    /// Largest asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Force exact symmetry by averaging mirrored entries.
    pub fn symmetrized(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    /// Attempt a Cholesky factorization; `true` iff every pivot is
    /// strictly positive, i.e. the (symmetric) matrix is positive
    /// definite.
    pub fn cholesky_is_positive_definite(&self) -> bool {
        let n = self.n;
        let mut l = vec![0.0_f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    /// Symmetric eigendecomposition `A = V diag(λ) Vᵀ` with eigenvalues
    /// sorted ascending and eigenvectors as the columns of `V`.
    ///
    /// The input is assumed symmetric (only the upper triangle is
    /// trusted). Closed form for n ≤ 2, cyclic Jacobi otherwise.
    pub fn eigh(&self) -> (Vec<f64>, Matrix) {
        match self.n {
            0 => (Vec::new(), Matrix::zeros(0)),
            1 => (vec![self.get(0, 0)], Matrix::identity(1)),
            2 => self.eigh2(),
            _ => self.eigh_jacobi(),
        }
    }

    fn eigh2(&self) -> (Vec<f64>, Matrix) {
        let a = self.get(0, 0);
        let b = 0.5 * (self.get(0, 1) + self.get(1, 0));
        let c = self.get(1, 1);
        let mid = 0.5 * (a + c);
        let half_gap = 0.5 * (a - c);
        let r = half_gap.hypot(b);
        let lo = mid - r;
        let hi = mid + r;
        let mut v = Matrix::identity(2);
        if b.abs() > 0.0 {
            // Eigenvector of the smaller eigenvalue; pick the formula
            // with the larger denominator for stability.
            let (x, y) = if half_gap >= 0.0 {
                (lo - c, b)
            } else {
                (b, lo - a)
            };
            let norm = x.hypot(y);
            let (x, y) = (x / norm, y / norm);
            v = Matrix::from_rows(&[&[x, -y], &[y, x]]);
        } else if a > c {
            // Already diagonal but out of order; swap the axes.
            v = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        }
        (vec![lo, hi], v)
    }

    fn eigh_jacobi(&self) -> (Vec<f64>, Matrix) {
        let n = self.n;
        let mut a = self.symmetrized();
        let mut v = Matrix::identity(n);
        let scale = a.frob_norm().max(1e-300);
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a.get(p, q).abs();
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let mut pairs: Vec<(f64, usize)> =
            (0..n).map(|i| (a.get(i, i), i)).collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut vs = Matrix::zeros(n);
        for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
            for k in 0..n {
                vs.set(k, new_col, v.get(k, old_col));
            }
        }
        (lambdas, vs)
    }
}
