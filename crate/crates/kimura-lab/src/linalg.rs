//! Small numerical kernels: finite-difference weights on arbitrary nodes,
//! sparse/tridiagonal linear solves, a dense matrix exponential, and a
//! Jacobi eigensolver for the tiny symmetric matrices of the ellipticity
//! check. Everything is deterministic and single-threaded.

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Finite-difference weights (Fornberg's algorithm)
// ---------------------------------------------------------------------------

/// Weights of derivative order `m` at `x0` for the given stencil nodes.
///
/// Classic recursive generation; exact for polynomials up to degree
/// `nodes.len() - 1`, so 3 nodes give quadratic-exact first and second
/// derivatives and 4 one-sided nodes give a second-order boundary stencil.
pub fn fd_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let nn = nodes.len();
    assert!(m < nn, "need more than m nodes for an m-th derivative");
    // c[k][j]: weight of node j for derivative order k.
    let mut c = vec![vec![0.0; nn]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..nn {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c.pop().unwrap()
}

// ---------------------------------------------------------------------------
// Sparse matrix (CSR) and linear solves
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<u32>,
    pub val: Vec<f64>,
}

/// Row-wise builder; duplicate column entries within a row are summed.
pub struct CsrBuilder {
    n: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl CsrBuilder {
    pub fn new(n: usize) -> Self {
        CsrBuilder {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.rows[row].push((col as u32, value));
        }
    }

    pub fn clear_row(&mut self, row: usize) {
        self.rows[row].clear();
    }

    pub fn finish(mut self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for r in &mut self.rows {
            r.sort_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < r.len() {
                let c = r[i].0;
                let mut v = 0.0;
                while i < r.len() && r[i].0 == c {
                    v += r[i].1;
                    i += 1;
                }
                col.push(c);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col,
            val,
        }
    }
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.val[k] * x[self.col[k] as usize];
            }
            out[r] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec(x, &mut out);
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col[k] as usize == r {
                    d[r] = self.val[k];
                }
            }
        }
        d
    }

    /// True when every entry lies on the three central diagonals.
    pub fn is_tridiagonal(&self) -> bool {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col[k] as usize;
                if c + 1 < r || c > r + 1 {
                    return false;
                }
            }
        }
        true
    }
}

/// Thomas elimination for tridiagonal systems; the direct path of the solver.
pub fn solve_tridiagonal(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.col[k] as usize;
            match c as i64 - r as i64 {
                -1 => lower[r] = a.val[k],
                0 => diag[r] = a.val[k],
                1 => upper[r] = a.val[k],
                _ => return Err(Error::LinearSolve("matrix is not tridiagonal".into())),
            }
        }
    }
    let mut c_star = vec![0.0; n];
    let mut d_star = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::LinearSolve("zero pivot in tridiagonal solve".into()));
    }
    c_star[0] = upper[0] / diag[0];
    d_star[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c_star[i - 1];
        if denom == 0.0 {
            return Err(Error::LinearSolve("zero pivot in tridiagonal solve".into()));
        }
        c_star[i] = upper[i] / denom;
        d_star[i] = (rhs[i] - lower[i] * d_star[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_star[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_star[i] - c_star[i] * x[i + 1];
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// BiCGSTAB with Jacobi preconditioning; the iterative path for 2-D systems.
pub fn solve_bicgstab(
    a: &CsrMatrix,
    rhs: &[f64],
    x0: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.n;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm2(rhs).max(f64::MIN_POSITIVE);
    let tol = rel_tol * bnorm;

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    if norm2(&r) <= tol {
        return Ok(x);
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];

    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (rho ~ 0)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            phat[i] = p[i] * inv_diag[i];
        }
        a.matvec(&phat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (r_hat . v ~ 0)".into()));
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(x);
        }
        for i in 0..n {
            shat[i] = s[i] * inv_diag[i];
        }
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (t = 0)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol {
            return Ok(x);
        }
        if omega.abs() < 1e-300 {
            return Err(Error::LinearSolve("BiCGSTAB breakdown (omega ~ 0)".into()));
        }
    }
    Err(Error::LinearSolve(format!(
        "BiCGSTAB did not converge in {max_iter} iterations (residual {:.3e}, target {:.3e})",
        norm2(&r),
        tol
    )))
}

/// Direct when tridiagonal, BiCGSTAB otherwise.
pub fn solve_sparse(
    a: &CsrMatrix,
    rhs: &[f64],
    guess: &[f64],
    rel_tol: f64,
) -> Result<Vec<f64>> {
    if a.is_tridiagonal() {
        solve_tridiagonal(a, rhs)
    } else {
        let max_iter = 40 * (a.n as f64).sqrt() as usize + 400;
        solve_bicgstab(a, rhs, guess, rel_tol, max_iter)
    }
}

// ---------------------------------------------------------------------------
// Dense matrices, matrix exponential
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>, // row-major
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = dot(&self.data[i * n..(i + 1) * n], x);
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum())
            .fold(0.0f64, f64::max)
    }
}

/// `exp(M)` by scaling-and-squaring with a truncated Taylor series.
///
/// The series is summed until the term's inf-norm falls below 1e-16 times the
/// partial sum's, tighter than the 1e-12 tail the oracle needs. Sizes here are
/// tiny (monomial bases), so no Padé machinery is warranted.
pub fn expm(m: &DenseMatrix) -> DenseMatrix {
    let norm = m.norm_inf();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = m.scale(0.5f64.powi(s as i32));
    let mut sum = DenseMatrix::identity(m.n);
    let mut term = DenseMatrix::identity(m.n);
    for k in 1..200 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        sum.add_assign(&term);
        if term.norm_inf() <= 1e-16 * sum.norm_inf() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (Jacobi rotations) for the ellipticity check
// ---------------------------------------------------------------------------

/// Eigenvalues of a small symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.n;
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + a.norm_inf()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
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
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fornberg_central_second_derivative_uniform() {
        let w = fd_weights(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn fornberg_one_sided_first_derivative() {
        let w = fd_weights(0.0, &[0.0, 1.0, 2.0], 1);
        assert_abs_diff_eq!(w[0], -1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[2], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn fornberg_exact_on_quadratics_nonuniform() {
        // Graded nodes: derivative of x^2 and of x at the middle node.
        let nodes = [0.04, 0.16, 0.36];
        let x0 = nodes[1];
        let w1 = fd_weights(x0, &nodes, 1);
        let w2 = fd_weights(x0, &nodes, 2);
        let f: Vec<f64> = nodes.iter().map(|&x| x * x).collect();
        let d1: f64 = w1.iter().zip(&f).map(|(w, v)| w * v).sum();
        let d2: f64 = w2.iter().zip(&f).map(|(w, v)| w * v).sum();
        assert_abs_diff_eq!(d1, 2.0 * x0, epsilon = 1e-12);
        assert_abs_diff_eq!(d2, 2.0, epsilon = 1e-12);
    }

    fn small_system() -> (CsrMatrix, Vec<f64>) {
        // -u'' on 5 uniform nodes with Dirichlet ends, rhs chosen so x known.
        let mut b = CsrBuilder::new(5);
        for i in 0..5 {
            if i == 0 || i == 4 {
                b.add(i, i, 1.0);
            } else {
                b.add(i, i - 1, -1.0);
                b.add(i, i, 2.0);
                b.add(i, i + 1, -1.0);
            }
        }
        let a = b.finish();
        let x_true = vec![0.0, 0.5, 1.2, 0.7, 0.0];
        let rhs = a.apply(&x_true);
        (a, rhs)
    }

    #[test]
    fn tridiagonal_solve_recovers_solution() {
        let (a, rhs) = small_system();
        assert!(a.is_tridiagonal());
        let x = solve_tridiagonal(&a, &rhs).unwrap();
        for (xi, ti) in x.iter().zip([0.0, 0.5, 1.2, 0.7, 0.0]) {
            assert_abs_diff_eq!(*xi, ti, epsilon = 1e-12);
        }
    }

    #[test]
    fn bicgstab_matches_direct() {
        let (a, rhs) = small_system();
        let x = solve_bicgstab(&a, &rhs, &vec![0.0; 5], 1e-13, 200).unwrap();
        let xd = solve_tridiagonal(&a, &rhs).unwrap();
        for (xi, ti) in x.iter().zip(&xd) {
            assert!((xi - ti).abs() <= 1e-10);
        }
    }

    #[test]
    fn csr_builder_sums_duplicates() {
        let mut b = CsrBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.0);
        b.add(0, 1, -1.0);
        b.add(1, 1, 1.0);
        let a = b.finish();
        assert_eq!(a.apply(&[1.0, 1.0]), vec![2.0, 1.0]);
    }

    #[test]
    fn expm_nilpotent_2x2() {
        // exp([[0, b], [0, 0]]) = [[1, b], [0, 1]]
        let mut m = DenseMatrix::zeros(2);
        m.set(0, 1, 0.5);
        let e = expm(&m);
        assert_abs_diff_eq!(e.get(0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.get(0, 1), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.get(1, 0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.get(1, 1), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_diagonal() {
        let mut m = DenseMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 1, -2.0);
        let e = expm(&m);
        assert_abs_diff_eq!(e.get(0, 0), 1f64.exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.get(1, 1), (-2f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.get(0, 1), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn expm_rotation_block() {
        // exp([[0, -w], [w, 0]]) rotates by w.
        let w = 1.3;
        let mut m = DenseMatrix::zeros(2);
        m.set(0, 1, -w);
        m.set(1, 0, w);
        let e = expm(&m);
        assert_abs_diff_eq!(e.get(0, 0), w.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.get(1, 0), w.sin(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_2x2() {
        let mut m = DenseMatrix::zeros(2);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        m.set(0, 1, 0.4);
        m.set(1, 0, 0.4);
        let eig = symmetric_eigenvalues(&m);
        assert_abs_diff_eq!(eig[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 1.4, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_eigenvalues_3x3() {
        let mut m = DenseMatrix::zeros(3);
        let entries = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, entries[i][j]);
            }
        }
        let eig = symmetric_eigenvalues(&m);
        let s2 = std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(eig[0], 2.0 - s2, epsilon = 1e-10);
        assert_abs_diff_eq!(eig[1], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig[2], 2.0 + s2, epsilon = 1e-10);
    }
}
