//! Problem model: coefficient blocks, linearizing matrix, residuals,
//! M-matrix classification and the Cayley transform.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::{self, Mat};
use crate::{mm, Complex, Error, Real, Result};

/// Descriptive metadata carried alongside generated problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMetadata {
    pub family: String,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
    pub generator_version: String,
}

/// `X C X − A X − X D + B = 0` with `A` m×m, `B` m×n, `C` n×m, `D` n×n.
#[derive(Debug, Clone, PartialEq)]
pub struct NareProblem<T: Real = f64> {
    a: Mat<T>,
    b: Mat<T>,
    c: Mat<T>,
    d: Mat<T>,
    pub metadata: Option<ProblemMetadata>,
}

impl<T: Real> NareProblem<T> {
    pub fn new(a: Mat<T>, b: Mat<T>, c: Mat<T>, d: Mat<T>) -> Result<Self> {
        let m = a.nrows();
        let n = d.nrows();
        if m == 0 || n == 0 {
            return Err(Error::DimensionMismatch("m and n must both be at least 1".into()));
        }
        let want = [("A", &a, m, m), ("B", &b, m, n), ("C", &c, n, m), ("D", &d, n, n)];
        for (name, mat, r, cc) in want {
            if mat.shape() != (r, cc) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {r}x{cc}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            dense::check_finite(mat)?;
        }
        Ok(NareProblem { a, b, c, d, metadata: None })
    }

    pub fn with_metadata(mut self, meta: ProblemMetadata) -> Self {
        self.metadata = Some(meta);
        self
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn a(&self) -> &Mat<T> {
        &self.a
    }

    pub fn b(&self) -> &Mat<T> {
        &self.b
    }

    pub fn c(&self) -> &Mat<T> {
        &self.c
    }

    pub fn d(&self) -> &Mat<T> {
        &self.d
    }

    /// Same problem in another precision.
    pub fn cast<U: Real>(&self) -> NareProblem<U> {
        NareProblem {
            a: dense::cast(&self.a),
            b: dense::cast(&self.b),
            c: dense::cast(&self.c),
            d: dense::cast(&self.d),
            metadata: self.metadata.clone(),
        }
    }

    /// `H = [[D, −C], [B, −A]]`.
    pub fn build_h(&self) -> LinearizingMatrix<T> {
        let (n, m) = (self.n(), self.m());
        let mut h = Mat::<T>::zeros(n + m, n + m);
        h.view_mut((0, 0), (n, n)).copy_from(&self.d);
        h.view_mut((0, n), (n, m)).copy_from(&(-&self.c));
        h.view_mut((n, 0), (m, n)).copy_from(&self.b);
        h.view_mut((n, n), (m, m)).copy_from(&(-&self.a));
        LinearizingMatrix { h, n, m }
    }

    /// `M = [[D, −C], [−B, A]]`.
    pub fn build_m(&self) -> Mat<T> {
        let (n, m) = (self.n(), self.m());
        let mut out = Mat::<T>::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.d);
        out.view_mut((0, n), (n, m)).copy_from(&(-&self.c));
        out.view_mut((n, 0), (m, n)).copy_from(&(-&self.b));
        out.view_mut((n, n), (m, m)).copy_from(&self.a);
        out
    }

    /// Largest diagonal entry of `A` and `D`.
    pub fn gamma_star(&self) -> T {
        self.a.diagonal().iter().chain(self.d.diagonal().iter()).fold(T::min_value().unwrap(), |acc, &x| {
            acc.max(x)
        })
    }

    fn check_x(&self, x: &Mat<T>) -> Result<()> {
        if x.shape() != (self.m(), self.n()) {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                self.m(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `R(X) = XCX − AX − XD + B`.
    pub fn residual(&self, x: &Mat<T>) -> Result<Mat<T>> {
        self.check_x(x)?;
        Ok(x * &self.c * x - &self.a * x - x * &self.d + &self.b)
    }

    /// `‖R(X)‖_F / (‖XCX + B‖_F + ‖AX + XD‖_F)`.
    pub fn relative_residual(&self, x: &Mat<T>) -> Result<f64> {
        self.check_x(x)?;
        let xcx_b = x * &self.c * x + &self.b;
        let ax_xd = &self.a * x + x * &self.d;
        let r = &xcx_b - &ax_xd;
        let denom = xcx_b.norm() + ax_xd.norm();
        if denom < T::eps() {
            return Err(Error::DegenerateDenominator(denom.to_f64()));
        }
        Ok((r.norm() / denom).to_f64())
    }

    /// Residual of the dual equation `YBY − YA − DY + C = 0`, relative as above.
    pub fn dual_relative_residual(&self, y: &Mat<T>) -> Result<f64> {
        if y.shape() != (self.n(), self.m()) {
            return Err(Error::DimensionMismatch(format!(
                "Y is {}x{}, expected {}x{}",
                y.nrows(),
                y.ncols(),
                self.n(),
                self.m()
            )));
        }
        let yby_c = y * &self.b * y + &self.c;
        let ya_dy = y * &self.a + &self.d * y;
        let denom = yby_c.norm() + ya_dy.norm();
        if denom < T::eps() {
            return Err(Error::DegenerateDenominator(denom.to_f64()));
        }
        Ok(((&yby_c - &ya_dy).norm() / denom).to_f64())
    }
}

impl NareProblem<f64> {
    pub fn to_envelope(&self) -> ProblemEnvelope {
        ProblemEnvelope {
            m: self.m(),
            n: self.n(),
            a: dense::to_rows(&self.a),
            b: dense::to_rows(&self.b),
            c: dense::to_rows(&self.c),
            d: dense::to_rows(&self.d),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_envelope(env: ProblemEnvelope) -> Result<Self> {
        let grab = |name: &str, rows: &[Vec<f64>], r: usize, c: usize| -> Result<Mat> {
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(Error::DimensionMismatch(format!("{name} must be {r}x{c}")));
            }
            dense::from_rows(rows)
        };
        let (m, n) = (env.m, env.n);
        let p = NareProblem::new(
            grab("A", &env.a, m, m)?,
            grab("B", &env.b, m, n)?,
            grab("C", &env.c, n, m)?,
            grab("D", &env.d, n, n)?,
        )?;
        Ok(match env.metadata {
            Some(meta) => p.with_metadata(meta),
            None => p,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_envelope())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_envelope(serde_json::from_str(s)?)
    }

    /// Loads either a JSON envelope file or a directory holding `A.mtx`..`D.mtx`.
    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Self::read_mm_bundle(path)
        } else {
            Self::from_json(&std::fs::read_to_string(path)?)
        }
    }

    pub fn read_mm_bundle(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Mat> { mm::read_file(&dir.join(format!("{name}.mtx"))) };
        NareProblem::new(read("A")?, read("B")?, read("C")?, read("D")?)
    }

    pub fn write_mm_bundle(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, mat) in [("A", &self.a), ("B", &self.b), ("C", &self.c), ("D", &self.d)] {
            mm::write_file(&dir.join(format!("{name}.mtx")), mat)?;
        }
        Ok(())
    }
}

/// Serialized form `{m, n, A, B, C, D, metadata?}` with row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemEnvelope {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ProblemMetadata>,
}

/// The (n+m)×(n+m) matrix `[[D, −C], [B, −A]]` with its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizingMatrix<T: Real = f64> {
    h: Mat<T>,
    n: usize,
    m: usize,
}

/// Eigenvalues of `H` split into the n antistable and m stable ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSplit {
    /// Non-increasing real part, ties by non-increasing imaginary part.
    pub sorted: Vec<Complex>,
    /// Real parts of the boundary eigenvalues (both real for an M-NARE).
    pub lambda_n: f64,
    pub lambda_n1: f64,
    /// The boundary eigenvalues themselves; a shifted matrix may have a
    /// complex pair there.
    pub boundary: [Complex; 2],
}

impl SpectralSplit {
    pub fn antistable(&self, n: usize) -> &[Complex] {
        &self.sorted[..n]
    }

    pub fn stable(&self, n: usize) -> &[Complex] {
        &self.sorted[n..]
    }
}

impl<T: Real> LinearizingMatrix<T> {
    pub fn from_matrix(h: Mat<T>, n: usize, m: usize) -> Result<Self> {
        if h.shape() != (n + m, n + m) || n == 0 || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, partition n={n}, m={m}",
                h.nrows(),
                h.ncols()
            )));
        }
        dense::check_finite(&h)?;
        Ok(LinearizingMatrix { h, n, m })
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.h
    }

    pub fn into_matrix(self) -> Mat<T> {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn d(&self) -> Mat<T> {
        self.h.view((0, 0), (self.n, self.n)).clone_owned()
    }

    pub fn c(&self) -> Mat<T> {
        -self.h.view((0, self.n), (self.n, self.m)).clone_owned()
    }

    pub fn b(&self) -> Mat<T> {
        self.h.view((self.n, 0), (self.m, self.n)).clone_owned()
    }

    pub fn a(&self) -> Mat<T> {
        -self.h.view((self.n, self.n), (self.m, self.m)).clone_owned()
    }

    /// Reads the blocks back as a Riccati problem (possibly not an M-NARE).
    pub fn to_problem(&self) -> Result<NareProblem<T>> {
        NareProblem::new(self.a(), self.b(), self.c(), self.d())
    }

    /// Tolerance used when deciding on which side of the imaginary axis an
    /// eigenvalue lies.
    pub fn split_tolerance(&self) -> f64 {
        T::eps().sqrt().to_f64() * dense::frobenius(&self.h).to_f64()
    }

    /// Splits the spectrum into n antistable and m stable eigenvalues and
    /// extracts the two boundary eigenvalues `λ_n`, `λ_{n+1}`.
    pub fn split_spectrum(&self) -> Result<SpectralSplit> {
        let spec = dense::eigenvalues(&self.h)?;
        self.split_given(spec.sorted_by_real_desc())
    }

    pub(crate) fn split_given(&self, sorted: Vec<Complex>) -> Result<SpectralSplit> {
        let tol = self.split_tolerance();
        let (ln, ln1) = (sorted[self.n - 1], sorted[self.n]);
        if ln.re < -tol || ln1.re > tol {
            return Err(Error::ClassificationAmbiguous { n: self.n, m: self.m });
        }
        Ok(SpectralSplit { lambda_n: ln.re, lambda_n1: ln1.re, boundary: [ln, ln1], sorted })
    }

    /// `‖H [I; X] − [I; X](D − CX)‖_F / ‖H‖_F`.
    pub fn verify_invariant_pair(&self, x: &Mat<T>) -> Result<f64> {
        let (n, m) = (self.n, self.m);
        if x.shape() != (m, n) {
            return Err(Error::DimensionMismatch(format!("X must be {m}x{n}")));
        }
        let mut ix = Mat::<T>::zeros(n + m, n);
        ix.view_mut((0, 0), (n, n)).fill_with_identity();
        ix.view_mut((n, 0), (m, n)).copy_from(x);
        let closed = self.d() - self.c() * x;
        let defect = &self.h * &ix - &ix * closed;
        Ok((defect.norm() / self.h.norm()).to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MMatrixTag {
    NonsingularM,
    SingularM,
    NotM,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MMatrixClass {
    pub tag: MMatrixTag,
    /// `s − ρ(N)` for `M = sI − N`; NaN when the sign pattern already fails.
    pub spectral_abscissa_evidence: f64,
}

impl MMatrixClass {
    pub fn is_m_matrix(&self) -> bool {
        self.tag != MMatrixTag::NotM
    }
}

/// Classifies a square matrix as a nonsingular M-matrix, a singular
/// M-matrix, or neither.
pub fn classify_mmatrix<T: Real>(m: &Mat<T>) -> Result<MMatrixClass> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("M must be square".into()));
    }
    let mm: Mat = dense::cast(m);
    let dim = mm.nrows();
    let fro = mm.norm();
    for j in 0..dim {
        for i in 0..dim {
            if i != j && mm[(i, j)] > 1e-14 * fro {
                return Ok(MMatrixClass { tag: MMatrixTag::NotM, spectral_abscissa_evidence: f64::NAN });
            }
        }
    }
    let s = (0..dim).map(|i| mm[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let n = Mat::identity(dim, dim) * s - &mm;
    let rho = dense::eigenvalues(&n)?.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let evidence = s - rho;
    let tag = if evidence.abs() <= 1e-10 * s.abs() {
        MMatrixTag::SingularM
    } else if evidence > 0.0 {
        MMatrixTag::NonsingularM
    } else {
        MMatrixTag::NotM
    };
    Ok(MMatrixClass { tag, spectral_abscissa_evidence: evidence })
}

/// `‖X̃ − X*‖_F / ‖X*‖_F`.
pub fn relative_error<T: Real>(xt: &Mat<T>, xs: &Mat<T>) -> Result<f64> {
    if xt.shape() != xs.shape() {
        return Err(Error::DimensionMismatch("relative_error operands differ in shape".into()));
    }
    let nrm = xs.norm();
    if nrm == T::zero() {
        return Err(Error::ZeroReference);
    }
    Ok(((xt - xs).norm() / nrm).to_f64())
}

/// Cayley transform `(z − γ)/(z + γ)`.
pub fn cayley(z: Complex, gamma: f64) -> Result<Complex> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("Cayley parameter must be nonzero and finite, got {gamma}")));
    }
    let den = z + gamma;
    if den.norm() < f64::EPSILON * (z.norm() + gamma.abs()) {
        return Err(Error::PoleHit { re: z.re, im: z.im });
    }
    Ok((z - gamma) / den)
}

/// An approximate minimal solution with its quality measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T: Real = f64> {
    pub x: Mat<T>,
    /// Relative residual against the original equation.
    pub residual: f64,
    pub iterations: usize,
}
