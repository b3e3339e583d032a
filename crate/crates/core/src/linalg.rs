//! Small dense kernels backing the QP solver.
//!
//! Matrices are flat `f64` slices in row-major order unless a function says
//! otherwise. Sizes here never exceed a few hundred, so nothing is blocked.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
}

/// y += alpha * x
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// y = M x for an `rows x cols` row-major matrix.
pub(crate) fn mat_vec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    (0..rows).map(|i| dot(&m[i * cols..(i + 1) * cols], x)).collect()
}

/// y = Mᵀ x for an `rows x cols` row-major matrix.
pub(crate) fn mat_t_vec(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; cols];
    for i in 0..rows {
        if x[i] != 0.0 {
            axpy(x[i], &m[i * cols..(i + 1) * cols], &mut y);
        }
    }
    y
}

/// In-place Cholesky factorization of a symmetric positive definite matrix.
///
/// On success the lower triangle holds L with A = L Lᵀ. Fails when a pivot
/// drops below `rel_tol` times the largest diagonal entry.
pub(crate) fn cholesky(a: &mut [f64], n: usize, rel_tol: f64) -> bool {
    let scale = (0..n).fold(0.0, |m, i| f64::max(m, libm::fabs(a[i * n + i])));
    let floor = rel_tol * f64::max(scale, f64::MIN_POSITIVE);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > floor) {
            return false;
        }
        let ljj = libm::sqrt(diag);
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    true
}

/// Solves L Lᵀ x = b in place given the factor from [`cholesky`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * n + k] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= l[k * n + i] * b[k];
        }
        b[i] = v / l[i * n + i];
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Returns the eigenvalues and the eigenvectors stored as columns of a
/// row-major `n x n` matrix.
pub(crate) fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = m[i * n + j] * m[i * n + j];
                total += x;
                if i != j {
                    off += x;
                }
            }
        }
        if off <= 1e-30 * f64::max(total, f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| m[i * n + i]).collect();
    (eig, v)
}

/// Minimum-norm solution of the symmetric PSD system A x = b.
///
/// Eigen-directions with eigenvalue below `rel_tol * max|λ|` are treated as
/// exactly singular. The second return value is the residual ‖A x − b‖∞.
pub(crate) fn pinv_solve(a: &[f64], n: usize, b: &[f64], rel_tol: f64) -> (Vec<f64>, f64) {
    let (eig, vecs) = symmetric_eigen(a, n);
    let lmax = eig.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)));
    let cutoff = rel_tol * lmax;
    let mut x = vec![0.0; n];
    for k in 0..n {
        if libm::fabs(eig[k]) <= cutoff || eig[k] == 0.0 {
            continue;
        }
        let coef = (0..n).map(|i| vecs[i * n + k] * b[i]).sum::<f64>() / eig[k];
        for i in 0..n {
            x[i] += coef * vecs[i * n + k];
        }
    }
    let ax = mat_vec(a, n, n, &x);
    let res = ax.iter().zip(b).fold(0.0, |m, (p, q)| f64::max(m, libm::fabs(p - q)));
    (x, res)
}

/// Orthogonal decomposition of the row space of an `m x n` matrix A,
/// computed as a column-pivoted Householder QR of Aᵀ.
///
/// Aᵀ Π = Q R with the first `rank` columns of Q spanning range(Aᵀ) and the
/// remaining columns spanning ker(A).
pub(crate) struct RowSpace {
    n: usize,
    m: usize,
    rank: usize,
    /// Column-major `n x m`: R on and above the diagonal, reflectors below.
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl RowSpace {
    pub(crate) fn new(a: &[f64], m: usize, n: usize, rank_tol: f64) -> Self {
        // Column j of Aᵀ is row j of A.
        let mut qr = a.to_vec();
        let mut perm: Vec<usize> = (0..m).collect();
        let mut tau = Vec::new();
        let mut rank = 0;
        let mut lead = 0.0;
        for k in 0..m.min(n) {
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..m {
                let col = &qr[j * n + k..(j + 1) * n];
                let nrm = dot(col, col);
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            let best_norm = libm::sqrt(best_norm);
            if k == 0 {
                lead = best_norm;
            }
            if best_norm <= rank_tol * lead || best_norm == 0.0 {
                break;
            }
            if best != k {
                for i in 0..n {
                    qr.swap(k * n + i, best * n + i);
                }
                perm.swap(k, best);
            }
            let x0 = qr[k * n + k];
            let beta = -libm::copysign(best_norm, x0);
            let t = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            for i in k + 1..n {
                qr[k * n + i] *= scale;
            }
            qr[k * n + k] = beta;
            for j in k + 1..m {
                let mut w = qr[j * n + k];
                for i in k + 1..n {
                    w += qr[k * n + i] * qr[j * n + i];
                }
                w *= t;
                qr[j * n + k] -= w;
                for i in k + 1..n {
                    qr[j * n + i] -= w * qr[k * n + i];
                }
            }
            tau.push(t);
            rank += 1;
        }
        Self { n, m, rank, qr, tau, perm }
    }

    pub(crate) fn rank(&self) -> usize {
        self.rank
    }

    fn apply_reflector(&self, k: usize, v: &mut [f64]) {
        let n = self.n;
        let refl = &self.qr[k * n..(k + 1) * n];
        let mut w = v[k];
        for i in k + 1..n {
            w += refl[i] * v[i];
        }
        w *= self.tau[k];
        v[k] -= w;
        for i in k + 1..n {
            v[i] -= w * refl[i];
        }
    }

    /// v ← Q v
    pub(crate) fn apply_q(&self, v: &mut [f64]) {
        for k in (0..self.rank).rev() {
            self.apply_reflector(k, v);
        }
    }

    /// v ← Qᵀ v
    pub(crate) fn apply_qt(&self, v: &mut [f64]) {
        for k in 0..self.rank {
            self.apply_reflector(k, v);
        }
    }

    fn r(&self, row: usize, col: usize) -> f64 {
        self.qr[col * self.n + row]
    }

    /// Minimum-norm solution of A x = b together with the infinity-norm
    /// residual of the rows that the rank truncation dropped.
    pub(crate) fn particular(&self, b: &[f64]) -> (Vec<f64>, f64) {
        let r = self.rank;
        let bp: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // R11ᵀ c = b̃[..r]
        let mut c = vec![0.0; self.n];
        for i in 0..r {
            let mut v = bp[i];
            for k in 0..i {
                v -= self.r(k, i) * c[k];
            }
            c[i] = v / self.r(i, i);
        }
        let mut inconsistency: f64 = 0.0;
        for i in r..self.m {
            let v: f64 = (0..r).map(|k| self.r(k, i) * c[k]).sum();
            inconsistency = inconsistency.max(libm::fabs(v - bp[i]));
        }
        self.apply_q(&mut c);
        (c, inconsistency)
    }

    /// Orthonormal basis of ker(A) as a row-major `n x (n - rank)` matrix.
    pub(crate) fn null_basis(&self) -> Vec<f64> {
        let n = self.n;
        let p = n - self.rank;
        let mut z = vec![0.0; n * p];
        let mut e = vec![0.0; n];
        for j in 0..p {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[self.rank + j] = 1.0;
            self.apply_q(&mut e);
            for i in 0..n {
                z[i * p + j] = e[i];
            }
        }
        z
    }

    /// Least-squares multipliers λ for Aᵀ λ = rhs; rows dropped by the rank
    /// truncation receive zero.
    pub(crate) fn multipliers(&self, rhs: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let mut q = rhs.to_vec();
        self.apply_qt(&mut q);
        let mut lt = vec![0.0; self.m];
        for i in (0..r).rev() {
            let mut v = q[i];
            for k in i + 1..r {
                v -= self.r(i, k) * lt[k];
            }
            lt[i] = v / self.r(i, i);
        }
        let mut lambda = vec![0.0; self.m];
        for (i, &p) in self.perm.iter().enumerate() {
            lambda[p] = lt[i];
        }
        lambda
    }
}
