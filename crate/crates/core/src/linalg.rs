//! Sparse linear algebra used by every solver in the crate.
//!
//! Factorizations are delegated to faer's sparse LU with partial pivoting.
//! Complex systems are solved through their real 2n x 2n form
//! `[[Re M, -Im M], [Im M, Re M]]`, and bordered systems whose border rows
//! are dense are factored through an augmented system in which each dense
//! row is replaced by a chain of running partial sums.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is singular to working precision ({0})")]
    Singular(String),
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
}

/// Compressed-row sparse matrix with `f64` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros are kept so that patterns stay stable across assemblies.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k])))
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        self.iter().collect()
    }

    /// Entry lookup; linear in the row length.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).filter(|&(cc, _)| cc == c).map(|(_, v)| v).sum()
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows && self.ncols == other.ncols && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    /// Values in storage order; pairs with [`SparseMatrix::iter`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn matvec_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| x[c] * v).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, other: &SparseMatrix, alpha: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.iter().map(|(r, c, v)| (r, c, alpha * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for (_, c, v) in self.iter() {
            sums[c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Real form of the complex matrix `re + i im`.
pub fn realify(re: &SparseMatrix, im: &SparseMatrix) -> SparseMatrix {
    let n = re.nrows();
    assert_eq!((re.nrows(), re.ncols()), (im.nrows(), im.ncols()));
    let mut t = Vec::with_capacity(2 * (re.nnz() + im.nnz()));
    for (r, c, v) in re.iter() {
        t.push((r, c, v));
        t.push((r + n, c + n, v));
    }
    for (r, c, v) in im.iter() {
        t.push((r, c + n, -v));
        t.push((r + n, c, v));
    }
    SparseMatrix::from_triplets(2 * n, 2 * re.ncols(), &t)
}

pub fn split_complex(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * z.len());
    out.extend(z.iter().map(|c| c.re));
    out.extend(z.iter().map(|c| c.im));
    out
}

pub fn join_complex(x: &[f64]) -> Vec<Complex64> {
    let n = x.len() / 2;
    (0..n).map(|i| Complex64::new(x[i], x[i + n])).collect()
}

/// Sparse LU factorization of a real square matrix.
pub struct RealLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for RealLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealLu").field("n", &self.n).finish()
    }
}

impl RealLu {
    pub fn factor(m: &SparseMatrix) -> Result<Self, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        let triplets: Vec<Triplet<usize, usize, f64>> =
            m.iter().filter(|&(_, _, v)| v != 0.0).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(m.nrows(), m.ncols(), &triplets)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => {
                LinalgError::Singular(format!("structurally singular at pivot {index}"))
            }
            other => LinalgError::Factorization(format!("{other:?}")),
        })?;
        Ok(Self { n: m.nrows(), lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.solve_impl(rhs, false)
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.solve_impl(rhs, true)
    }

    fn solve_impl(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.n {
            return Err(LinalgError::Dimension { expected: self.n, got: rhs.len() });
        }
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        if transpose {
            self.lu.solve_transpose_in_place(x.as_mut());
        } else {
            self.lu.solve_in_place(x.as_mut());
        }
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(LinalgError::Singular("non-finite solution".into()))
        }
    }

    /// Hager's estimate of `||M^{-1}||_1`.
    pub fn inverse_norm_one_estimate(&self) -> Result<f64, LinalgError> {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x)?;
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi)?;
            let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        Ok(est)
    }
}

/// LU of a complex matrix through its real form.
#[derive(Debug)]
pub struct ComplexLu {
    n: usize,
    real: RealLu,
    norm_one: f64,
}

impl ComplexLu {
    pub fn factor(re: &SparseMatrix, im: &SparseMatrix) -> Result<Self, LinalgError> {
        let r = realify(re, im);
        let norm_one = r.norm_one();
        Ok(Self { n: re.nrows(), real: RealLu::factor(&r)?, norm_one })
    }

    /// Factors `shift * I - a`.
    pub fn factor_shifted(a: &SparseMatrix, shift: Complex64) -> Result<Self, LinalgError> {
        let n = a.nrows();
        let re = SparseMatrix::identity(n).scaled(shift.re).add_scaled(a, -1.0);
        let im = SparseMatrix::identity(n).scaled(shift.im);
        Self::factor(&re, &im)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        Ok(join_complex(&self.real.solve(&split_complex(rhs))?))
    }

    /// Solves with the conjugate transpose.
    pub fn solve_adjoint(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        Ok(join_complex(&self.real.solve_transpose(&split_complex(rhs))?))
    }

    /// 1-norm condition estimate of the real form.
    pub fn condition_estimate(&self) -> Result<f64, LinalgError> {
        Ok(self.norm_one * self.real.inverse_norm_one_estimate()?)
    }
}

/// Square matrix `[[core, columns], [rows, corner]]` with `p` border
/// rows/columns stored sparsely.
#[derive(Clone, Debug)]
pub struct BorderedMatrix {
    core: SparseMatrix,
    columns: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    corner: Vec<Vec<f64>>,
}

impl BorderedMatrix {
    pub fn new(core: SparseMatrix, columns: Vec<Vec<(usize, f64)>>, rows: Vec<Vec<(usize, f64)>>, corner: Vec<Vec<f64>>) -> Self {
        let p = columns.len();
        assert_eq!(core.nrows(), core.ncols());
        assert_eq!(rows.len(), p);
        assert_eq!(corner.len(), p);
        assert!(corner.iter().all(|r| r.len() == p));
        Self { core, columns, rows, corner }
    }

    /// Keeps the nonzero entries of a dense vector.
    pub fn sparse_from_dense(v: &[f64]) -> Vec<(usize, f64)> {
        v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, x)| (i, *x)).collect()
    }

    pub fn core(&self) -> &SparseMatrix {
        &self.core
    }

    pub fn border(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.core.nrows() + self.border()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.core.nrows();
        let p = self.border();
        assert_eq!(x.len(), n + p);
        let mut out = self.core.matvec(&x[..n]);
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[n + j];
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let mut s: f64 = row.iter().map(|&(k, v)| v * x[k]).sum();
            s += (0..p).map(|j| self.corner[i][j] * x[n + j]).sum::<f64>();
            out.push(s);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let p = self.border();
        let corner = (0..p).map(|i| (0..p).map(|j| self.corner[j][i]).collect()).collect();
        Self { core: self.core.transpose(), columns: self.rows.clone(), rows: self.columns.clone(), corner }
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.transpose().apply(y)
    }

    /// Augmented-system factorization; see the module documentation.
    pub fn factor(&self) -> Result<BorderedLu, LinalgError> {
        let n = self.core.nrows();
        let p = self.border();
        let aux_total: usize = self.rows.iter().map(|r| r.len()).sum();
        let dim = n + p + aux_total;
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(self.core.nnz() + 4 * aux_total + n * p);
        t.extend(self.core.iter());
        for (j, col) in self.columns.iter().enumerate() {
            t.extend(col.iter().map(|&(i, v)| (i, n + j, v)));
        }
        let mut final_rows = Vec::with_capacity(p);
        let mut row = n;
        let mut aux = n + p;
        for (i, entries) in self.rows.iter().enumerate() {
            for (s, &(k, c)) in entries.iter().enumerate() {
                t.push((row, aux + s, 1.0));
                if s > 0 {
                    t.push((row, aux + s - 1, -1.0));
                }
                t.push((row, k, -c));
                row += 1;
            }
            if !entries.is_empty() {
                t.push((row, aux + entries.len() - 1, 1.0));
            }
            for j in 0..p {
                if self.corner[i][j] != 0.0 {
                    t.push((row, n + j, self.corner[i][j]));
                }
            }
            final_rows.push(row);
            row += 1;
            aux += entries.len();
        }
        debug_assert_eq!(row, dim);
        let lu = RealLu::factor(&SparseMatrix::from_triplets(dim, dim, &t))?;
        Ok(BorderedLu { n, p, dim, final_rows, lu })
    }
}

pub struct BorderedLu {
    n: usize,
    p: usize,
    dim: usize,
    final_rows: Vec<usize>,
    lu: RealLu,
}

impl BorderedLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.n + self.p {
            return Err(LinalgError::Dimension { expected: self.n + self.p, got: rhs.len() });
        }
        let mut full = vec![0.0; self.dim];
        full[..self.n].copy_from_slice(&rhs[..self.n]);
        for (i, &r) in self.final_rows.iter().enumerate() {
            full[r] = rhs[self.n + i];
        }
        let mut x = self.lu.solve(&full)?;
        x.truncate(self.n + self.p);
        Ok(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn cnorm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = norm2(&v);
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_complex_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let s = cnorm2(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Orthonormalizes the columns in place (modified Gram-Schmidt, two passes).
/// Columns that collapse are replaced by fresh random directions.
fn orthonormalize(cols: &mut [Vec<Complex64>], rng: &mut ChaCha8Rng) {
    for k in 0..cols.len() {
        for _pass in 0..2 {
            for j in 0..k {
                let (head, tail) = cols.split_at_mut(k);
                let c = cdot(&tail[0], &head[j]);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= c * y;
                }
            }
        }
        let s = cnorm2(&cols[k]);
        if s == 0.0 || !s.is_finite() {
            cols[k] = random_complex_unit(cols[k].len(), rng);
            return orthonormalize(cols, rng);
        }
        cols[k].iter_mut().for_each(|x| *x /= s);
    }
}

/// Estimates the `count` smallest singular values of the complex matrix `M`
/// by inverse subspace iteration on `(M^H M)^{-1}`.
///
/// `apply` evaluates `M x` exactly; `lu` factors `M` or a tiny perturbation of
/// it. Ritz values are computed against `apply`, so a perturbed factorization
/// only affects the subspace, not the reported values.
pub fn smallest_singular_values(
    apply: &dyn Fn(&[Complex64]) -> Vec<Complex64>,
    lu: &ComplexLu,
    count: usize,
    max_iter: usize,
    seed: u64,
) -> Result<Vec<f64>, LinalgError> {
    let n = lu.dim();
    let block = (count + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<Complex64>> = (0..block).map(|_| random_complex_unit(n, &mut rng)).collect();
    orthonormalize(&mut q, &mut rng);
    let mut prev: Vec<f64> = vec![f64::NAN; block];
    let mut ritz = prev.clone();
    for _ in 0..max_iter {
        for col in q.iter_mut() {
            let y = lu.solve_adjoint(col)?;
            *col = lu.solve(&y)?;
        }
        orthonormalize(&mut q, &mut rng);
        ritz = rayleigh_ritz_singular(apply, &mut q);
        let converged = ritz.iter().zip(&prev).take(count).all(|(a, b)| (a - b).abs() <= 1e-13 * b.abs() + 1e-15);
        prev = ritz.clone();
        if converged {
            break;
        }
    }
    ritz.truncate(count);
    Ok(ritz)
}

/// Rotates `q` onto the Ritz vectors of `M^H M` and returns the Ritz
/// singular values in ascending order.
fn rayleigh_ritz_singular(apply: &dyn Fn(&[Complex64]) -> Vec<Complex64>, q: &mut [Vec<Complex64>]) -> Vec<f64> {
    let b = q.len();
    let mq: Vec<Vec<Complex64>> = q.iter().map(|c| apply(c)).collect();
    // Hermitian b x b Gram matrix, embedded as a real symmetric 2b x 2b matrix.
    let mut g = DMatrix::<f64>::zeros(2 * b, 2 * b);
    for i in 0..b {
        for j in 0..b {
            let h = cdot(&mq[j], &mq[i]);
            g[(i, j)] = h.re;
            g[(i + b, j + b)] = h.re;
            g[(i, j + b)] = -h.im;
            g[(i + b, j)] = h.im;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..2 * b).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[c]).unwrap());
    // Eigenvalues of the real embedding come in pairs; take one of each pair
    // and rebuild the corresponding complex Ritz vector.
    let mut values = Vec::with_capacity(b);
    let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(b);
    for &k in &order {
        if values.len() == b {
            break;
        }
        let coeff: Vec<Complex64> = (0..b).map(|i| Complex64::new(eig.eigenvectors[(i, k)], eig.eigenvectors[(i + b, k)])).collect();
        let mut v = vec![Complex64::new(0.0, 0.0); q[0].len()];
        for (i, c) in coeff.iter().enumerate() {
            for (x, y) in v.iter_mut().zip(&q[i]) {
                *x += c * y;
            }
        }
        // Skip the partner of an already accepted pair.
        let mut w = v.clone();
        for prev in &vectors {
            let c = cdot(&w, prev);
            for (x, y) in w.iter_mut().zip(prev) {
                *x -= c * y;
            }
        }
        let s = cnorm2(&w);
        if s < 1e-6 {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= s);
        values.push(eig.eigenvalues[k].max(0.0).sqrt());
        vectors.push(w);
    }
    if vectors.len() == b {
        q.clone_from_slice(&vectors);
    }
    values
}

/// Power iteration for `||M^{-1}||_2` using a factorization of `M`.
pub fn inverse_norm_estimate(lu: &ComplexLu, iters: usize, seed: u64) -> Result<f64, LinalgError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_complex_unit(lu.dim(), &mut rng);
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let y = lu.solve(&x)?;
        est = cnorm2(&y);
        let z = lu.solve_adjoint(&y)?;
        let s = cnorm2(&z);
        if s == 0.0 {
            break;
        }
        x = z.into_iter().map(|v| v / s).collect();
    }
    Ok(est)
}

/// Smallest singular value of a real bordered matrix by inverse power
/// iteration on `(M^T M)^{-1}`. Returns 0 when `M` cannot be factored.
pub fn bordered_smallest_singular_value(m: &BorderedMatrix, iters: usize, seed: u64) -> f64 {
    let (lu, lut) = match (m.factor(), m.transpose().factor()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_unit(m.dim(), &mut rng);
    let mut est = f64::INFINITY;
    for _ in 0..iters.max(1) {
        let y = match lut.solve(&x).and_then(|y| lu.solve(&y)) {
            Ok(y) => y,
            Err(_) => return 0.0,
        };
        let s = norm2(&y);
        if s == 0.0 || !s.is_finite() {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / s).collect();
        let next = norm2(&m.apply(&x));
        let done = (est - next).abs() <= 1e-10 * next;
        est = next;
        if done {
            break;
        }
    }
    est
}
