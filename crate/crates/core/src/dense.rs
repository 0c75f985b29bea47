//! Dense real linear-algebra primitives.
//!
//! Factorizations come from `nalgebra` except LU, which is implemented here
//! so that transposed solves (needed by the 1-norm condition estimator) reuse
//! the same factors. Every routine is a pure function of its inputs.

use nalgebra::{DMatrix, Schur, SVD};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

pub type Mat<T = f64> = DMatrix<T>;
pub type Complex = num_complex::Complex<f64>;

/// Largest matrix handed to the dense eigensolver.
pub const EIGEN_DIM_CAP: usize = 1024;
/// Largest Kronecker-assembled Sylvester operator.
pub const KRON_DIM_CAP: usize = 4096;

/// Eigenvalues of a square matrix, in the order the solver produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<Complex>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted by non-increasing real part, ties by non-increasing imaginary part.
    pub fn sorted_by_real_desc(&self) -> Vec<Complex> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        v
    }

    /// Sorted by non-decreasing modulus, ties by real part then imaginary part.
    pub fn sorted_by_modulus(&self) -> Vec<Complex> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| {
            a.norm()
                .total_cmp(&b.norm())
                .then(a.re.total_cmp(&b.re))
                .then(a.im.total_cmp(&b.im))
        });
        v
    }

    /// True if every non-real value has its conjugate within `tol`.
    pub fn is_conjugation_closed(&self, tol: f64) -> bool {
        let mut used = vec![false; self.values.len()];
        for (i, z) in self.values.iter().enumerate() {
            if z.im.abs() <= tol || used[i] {
                continue;
            }
            let partner = self
                .values
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && !used[j])
                .map(|(j, w)| (j, (w - z.conj()).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match partner {
                Some((j, d)) if d <= tol => {
                    used[i] = true;
                    used[j] = true;
                }
                _ => return false,
            }
        }
        true
    }
}

/// Builds a matrix from row-major data, rejecting NaN and infinities.
pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Mat> {
    if data.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} entries supplied for a {rows}x{cols} matrix",
            data.len()
        )));
    }
    let m = Mat::from_row_slice(rows, cols, data);
    check_finite(&m)?;
    Ok(m)
}

/// Builds a matrix from nested rows, rejecting ragged input and non-finite values.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::DimensionMismatch("ragged rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    from_row_slice(r, c, &flat)
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn check_finite<T: Real>(m: &Mat<T>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn cast<T: Real, U: Real>(m: &Mat<T>) -> Mat<U> {
    m.map(|x| U::of(x.to_f64()))
}

pub fn frobenius<T: Real>(m: &Mat<T>) -> T {
    m.norm()
}

/// Maximum absolute column sum.
pub fn one_norm<T: Real>(m: &Mat<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, x| acc + x.abs()))
        .fold(T::zero(), |a, b| a.max(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub frobenius: f64,
    pub spectral: f64,
}

pub fn norms<T: Real>(m: &Mat<T>) -> Result<Norms> {
    Ok(Norms { frobenius: frobenius(m).to_f64(), spectral: spectral_norm(m)? })
}

pub fn spectral_norm<T: Real>(m: &Mat<T>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Singular values in non-increasing order.
pub fn singular_values<T: Real>(m: &Mat<T>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, T::eps(), 0).ok_or(Error::NoConvergence {
        what: "SVD",
        iterations: 0,
    })?;
    let mut s: Vec<f64> = svd.singular_values.iter().map(|x| x.to_f64()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn smallest_singular_value<T: Real>(m: &Mat<T>) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0).max(0.0))
}

/// All eigenvalues of a square matrix (Hessenberg reduction + Francis QR).
pub fn eigenvalues<T: Real>(m: &Mat<T>) -> Result<Spectrum> {
    square(m)?;
    let n = m.nrows();
    if n > EIGEN_DIM_CAP {
        return Err(Error::DimensionCap { requested: n, cap: EIGEN_DIM_CAP });
    }
    if n == 0 {
        return Ok(Spectrum { values: Vec::new() });
    }
    let max_iter = 100 * n.max(10);
    // The Francis sweep has no exceptional shifts and can cycle. Similar
    // matrices share a spectrum, so retry on the transpose and then on a fixed
    // random orthogonal similarity before giving up.
    let schur = Schur::try_new(m.clone(), T::eps(), max_iter)
        .or_else(|| Schur::try_new(m.transpose(), T::eps(), max_iter))
        .or_else(|| {
            let q = scrambler::<T>(n);
            Schur::try_new(q.transpose() * m * &q, T::eps(), max_iter)
        })
        .ok_or(Error::NoConvergence { what: "Schur QR iteration", iterations: max_iter })?;
    let values = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex::new(z.re.to_f64(), z.im.to_f64()))
        .collect();
    Ok(Spectrum { values })
}

fn scrambler<T: Real>(n: usize) -> Mat<T> {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    Mat::<T>::from_fn(n, n, |_, _| T::of(r.gen_range(-1.0..1.0))).qr().q()
}

/// `I_q ⊗ M − Nᵀ ⊗ I_p`: the matrix of `X ↦ MX − XN` acting on column-stacked `X`.
pub fn kron_sylvester_operator<T: Real>(m: &Mat<T>, n: &Mat<T>) -> Result<Mat<T>> {
    kron_sylvester_operator_capped(m, n, KRON_DIM_CAP)
}

pub fn kron_sylvester_operator_capped<T: Real>(m: &Mat<T>, n: &Mat<T>, cap: usize) -> Result<Mat<T>> {
    square(m)?;
    square(n)?;
    let (p, q) = (m.nrows(), n.nrows());
    let dim = p * q;
    if dim > cap {
        return Err(Error::DimensionCap { requested: dim, cap });
    }
    let mut k = Mat::<T>::zeros(dim, dim);
    // block (bi, bj) is δ_{bi,bj} M − N[bj, bi] I
    for bj in 0..q {
        for bi in 0..q {
            let nij = n[(bj, bi)];
            for i in 0..p {
                if bi == bj {
                    for j in 0..p {
                        k[(bi * p + i, bj * p + j)] = m[(i, j)];
                    }
                }
                k[(bi * p + i, bj * p + i)] -= nij;
            }
        }
    }
    Ok(k)
}

fn square<T: Real>(m: &Mat<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: Real = f64> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors `m`; fails with `SingularMatrix` when a pivot falls below
    /// `ε·‖M‖_F·dim`.
    pub fn new(m: &Mat<T>) -> Result<Self> {
        Self::with_relative_threshold(m, T::eps() * T::of(m.nrows() as f64))
    }

    /// Factors `m`, failing when a pivot falls below `rel·‖M‖_F`.
    pub fn with_relative_threshold(m: &Mat<T>, rel: T) -> Result<Self> {
        square(m)?;
        let n = m.nrows();
        let threshold = rel * frobenius(m);
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv_row, piv_val) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_val <= threshold {
                return Err(Error::SingularMatrix {
                    pivot: piv_val.to_f64(),
                    threshold: threshold.to_f64(),
                });
            }
            if piv_row != k {
                lu.swap_rows(k, piv_row);
                perm.swap(k, piv_row);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == T::zero() {
                    continue;
                }
                for i in k + 1..n {
                    let lik = lu[(i, k)];
                    lu[(i, j)] -= lik * ukj;
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves `M X = rhs`.
    pub fn solve(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        let n = self.dim();
        if rhs.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, matrix has dimension {n}",
                rhs.nrows()
            )));
        }
        let mut x = Mat::<T>::zeros(n, rhs.ncols());
        for c in 0..rhs.ncols() {
            for i in 0..n {
                x[(i, c)] = rhs[(self.perm[i], c)];
            }
            for k in 0..n {
                let xk = x[(k, c)];
                if xk != T::zero() {
                    for i in k + 1..n {
                        x[(i, c)] -= self.lu[(i, k)] * xk;
                    }
                }
            }
            for k in (0..n).rev() {
                x[(k, c)] /= self.lu[(k, k)];
                let xk = x[(k, c)];
                if xk != T::zero() {
                    for i in 0..k {
                        x[(i, c)] -= self.lu[(i, k)] * xk;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Solves `Mᵀ X = rhs`.
    pub fn solve_transpose(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        let n = self.dim();
        if rhs.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, matrix has dimension {n}",
                rhs.nrows()
            )));
        }
        let mut out = Mat::<T>::zeros(n, rhs.ncols());
        let mut y = vec![T::zero(); n];
        for c in 0..rhs.ncols() {
            // Uᵀ z = b
            for k in 0..n {
                let mut s = rhs[(k, c)];
                for i in 0..k {
                    s -= self.lu[(i, k)] * y[i];
                }
                y[k] = s / self.lu[(k, k)];
            }
            // Lᵀ w = z
            for k in (0..n).rev() {
                let mut s = y[k];
                for i in k + 1..n {
                    s -= self.lu[(i, k)] * y[i];
                }
                y[k] = s;
            }
            for i in 0..n {
                out[(self.perm[i], c)] = y[i];
            }
        }
        Ok(out)
    }

    /// Hager's estimate of `‖M⁻¹‖₁`.
    pub fn inverse_one_norm_estimate(&self) -> Result<T> {
        let n = self.dim();
        if n == 0 {
            return Ok(T::zero());
        }
        let mut x = Mat::<T>::from_element(n, 1, T::one() / T::of(n as f64));
        let mut est = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x)?;
            let new_est = y.iter().fold(T::zero(), |a, v| a + v.abs());
            let xi = y.map(|v| if v >= T::zero() { T::one() } else { -T::one() });
            let z = self.solve_transpose(&xi)?;
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, -T::one()), |b, c| if c.1 > b.1 { c } else { b });
            let ztx = z.iter().zip(x.iter()).fold(T::zero(), |a, (p, q)| a + *p * *q);
            est = est.max(new_est);
            if zmax <= ztx {
                break;
            }
            x.fill(T::zero());
            x[(jmax, 0)] = T::one();
        }
        Ok(est)
    }
}

pub fn lu_solve<T: Real>(m: &Mat<T>, rhs: &Mat<T>) -> Result<Mat<T>> {
    Lu::new(m)?.solve(rhs)
}

/// 1-norm condition estimate `‖M‖₁·est(‖M⁻¹‖₁)`; infinite when `M` is singular.
pub fn condition_estimate<T: Real>(m: &Mat<T>) -> f64 {
    match Lu::new(m) {
        Ok(lu) => match lu.inverse_one_norm_estimate() {
            Ok(inv) => (one_norm(m) * inv).to_f64(),
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

/// Thin QR with nonnegative diagonal in `R`.
pub fn thin_qr<T: Real>(m: &Mat<T>) -> Result<(Mat<T>, Mat<T>)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::DimensionMismatch(format!("thin QR needs rows >= cols, got {rows}x{cols}")));
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let threshold = T::eps() * frobenius(m) * T::of(rows as f64);
    for i in 0..cols {
        if r[(i, i)] < T::zero() {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
        if r[(i, i)] <= threshold {
            return Err(Error::RankDeficient {
                index: i,
                value: r[(i, i)].to_f64(),
                threshold: threshold.to_f64(),
            });
        }
    }
    Ok((q, r))
}

/// Orthonormal basis of the column span (thin QR factor).
pub fn orthonormalize<T: Real>(m: &Mat<T>) -> Result<Mat<T>> {
    Ok(thin_qr(m)?.0)
}

/// Completes orthonormal `basis` (p×k) to a p×p orthogonal matrix whose
/// first k columns are `basis`.
pub fn complete_basis<T: Real>(basis: &Mat<T>) -> Result<Mat<T>> {
    use rand::{Rng, SeedableRng};
    let (p, k) = basis.shape();
    if k > p {
        return Err(Error::DimensionMismatch(format!("basis has {k} columns in dimension {p}")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut full = Mat::<T>::zeros(p, p);
    full.columns_mut(0, k).copy_from(basis);
    for j in k..p {
        for i in 0..p {
            full[(i, j)] = T::of(rng.gen_range(-1.0..1.0));
        }
    }
    let (mut q, _) = thin_qr(&full)?;
    q.columns_mut(0, k).copy_from(basis);
    Ok(q)
}
