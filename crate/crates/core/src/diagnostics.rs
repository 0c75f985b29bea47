//! Criticality and conditioning measures: gap, Cayley gap, sep, relsep,
//! subspace distances and the central-pair condition number.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dense::{self, Mat};
use crate::nare::{cayley, LinearizingMatrix, NareProblem};
use crate::sda::{predicted_rate, sda_solve, SdaConfig};
use crate::shift::{compute_central_pair, IterationConfig};
use crate::{Error, Real, Result, Spectrum};

/// `|λ_n − λ_{n+1}|`.
pub fn gap_of<T: Real>(h: &LinearizingMatrix<T>) -> Result<f64> {
    let split = h.split_spectrum()?;
    Ok((split.boundary[0] - split.boundary[1]).norm())
}

/// `max_{i≤n} |C_γ(λ_i)| / min_{j>n} |C_γ(λ_j)|`; valid for shifted matrices too.
pub fn cayley_gap<T: Real>(h: &LinearizingMatrix<T>, gamma: f64) -> Result<f64> {
    predicted_rate(h, gamma)
}

/// `|C_γ(λ_n)| / |C_γ(λ_{n+1})|`, the boundary-eigenvalue form of the Cayley gap.
pub fn cayley_gap_boundary<T: Real>(h: &LinearizingMatrix<T>, gamma: f64) -> Result<f64> {
    let split = h.split_spectrum()?;
    let num = cayley(split.boundary[0], gamma)?.norm();
    let den = cayley(split.boundary[1], gamma)?.norm();
    Ok(num / den)
}

/// Frobenius-norm separation `σ_min(I ⊗ M − Nᵀ ⊗ I)`.
pub fn sep_f<T: Real>(m: &Mat<T>, n: &Mat<T>) -> Result<f64> {
    dense::smallest_singular_value(&dense::kron_sylvester_operator(m, n)?)
}

/// Largest invariant-subspace defect accepted by [`relsep_of_subspace`].
pub const INVARIANCE_TOL: f64 = 1e-8;

/// `sep_F(A₁₁, A₂₂) / ‖H‖₂`, where `A₁₁`, `A₂₂` are the diagonal blocks of
/// `QᵀHQ` for an orthogonal `Q` whose leading columns span `basis`.
pub fn relsep_of_subspace<T: Real>(h: &Mat<T>, basis: &Mat<T>) -> Result<f64> {
    let (dim, k) = basis.shape();
    if h.shape() != (dim, dim) || k == 0 || k >= dim {
        return Err(Error::DimensionMismatch("basis must be dim×k with 0 < k < dim".into()));
    }
    let q = dense::complete_basis(basis)?;
    let t = q.transpose() * h * &q;
    let defect = (t.view((k, 0), (dim - k, k)).norm() / h.norm()).to_f64();
    if defect > INVARIANCE_TOL {
        return Err(Error::NotInvariant { defect });
    }
    let a11 = t.view((0, 0), (k, k)).clone_owned();
    let a22 = t.view((k, k), (dim - k, dim - k)).clone_owned();
    Ok(sep_f(&a11, &a22)? / dense::spectral_norm(h)?)
}

/// `‖B₁B₁ᵀ − B₂B₂ᵀ‖₂` for orthonormal bases.
pub fn subspace_distance<T: Real>(b1: &Mat<T>, b2: &Mat<T>) -> Result<f64> {
    if b1.nrows() != b2.nrows() {
        return Err(Error::DimensionMismatch("bases live in different ambient spaces".into()));
    }
    dense::spectral_norm(&(b1 * b1.transpose() - b2 * b2.transpose()))
}

/// `(n + ‖X‖_F²)^{1/2} (n + ‖X̃‖_F²)^{1/2} · dist`, bounding `‖X − X̃‖_F` by
/// the distance between `span[I; X]` and `span[I; X̃]`.
pub fn solution_distance_bound<T: Real>(x: &Mat<T>, xt: &Mat<T>, dist: f64) -> Result<f64> {
    if x.shape() != xt.shape() {
        return Err(Error::DimensionMismatch("X and X~ differ in shape".into()));
    }
    let n = x.ncols() as f64;
    let nx = x.norm().to_f64();
    let nxt = xt.norm().to_f64();
    Ok((n + nx * nx).sqrt() * (n + nxt * nxt).sqrt() * dist)
}

/// Orthonormal basis of `span[I; X]`.
pub fn graph_basis<T: Real>(x: &Mat<T>) -> Result<Mat<T>> {
    let (m, n) = x.shape();
    let mut g = Mat::<T>::zeros(n + m, n);
    g.view_mut((0, 0), (n, n)).fill_with_identity();
    g.view_mut((n, 0), (m, n)).copy_from(x);
    dense::orthonormalize(&g)
}

/// Smallest distance from the central eigenvalues to the rest of the spectrum.
/// Central values are matched greedily to `σ(H)` with tolerance `1e-6·‖H‖_F`.
pub fn delta_central<T: Real>(h: &Mat<T>, central: &Spectrum) -> Result<f64> {
    let spec = dense::eigenvalues(h)?;
    let tol = 1e-6 * h.norm().to_f64().max(f64::MIN_POSITIVE);
    let mut used = vec![false; spec.len()];
    for c in &central.values {
        let best = spec
            .values
            .iter()
            .enumerate()
            .filter(|&(i, _)| !used[i])
            .map(|(i, z)| (i, (z - c).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, d)) if d <= tol => used[i] = true,
            _ => return Err(Error::MatchFailure { re: c.re, im: c.im }),
        }
    }
    let mut delta = f64::INFINITY;
    for c in &central.values {
        for (i, z) in spec.values.iter().enumerate() {
            if !used[i] {
                delta = delta.min((z - c).norm());
            }
        }
    }
    Ok(delta)
}

/// `‖(UᵀV)⁻¹‖₂ = 1 / σ_min(UᵀV)`.
pub fn cond_uv<T: Real>(u: &Mat<T>, v: &Mat<T>) -> Result<f64> {
    let utv = u.transpose() * v;
    if utv.nrows() != utv.ncols() {
        return Err(Error::DimensionMismatch("UᵀV must be square".into()));
    }
    let smin = dense::smallest_singular_value(&utv)?;
    if smin <= T::eps().to_f64() {
        return Err(Error::UVSingular);
    }
    Ok(1.0 / smin)
}

/// Criticality summary of one problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub m: usize,
    pub gamma: f64,
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub gap: f64,
    pub cayley_gap: f64,
    /// `sep_F` of the blocks split off by `W = span[I; X]`, X the minimal solution.
    pub sep_f_w: Option<f64>,
    pub relsep_w: Option<f64>,
    /// relsep of the right central subspace.
    pub relsep_central: Option<f64>,
    pub delta_central: f64,
    pub cond_uv: Option<f64>,
    /// Reasons for any metric left empty.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnoseOptions {
    pub k: usize,
    pub iteration: IterationConfig,
    pub sda: SdaConfig,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions { k: 2, iteration: IterationConfig::default(), sda: SdaConfig::default() }
    }
}

/// Computes every metric that applies; metrics that cannot be evaluated
/// (operator too large, solver failure) are left empty with a note.
pub fn diagnose(p: &NareProblem, opts: &DiagnoseOptions) -> Result<DiagnosticsReport> {
    let h = p.build_h();
    let split = h.split_spectrum()?;
    let gamma = opts.sda.gamma.unwrap_or_else(|| p.gamma_star());
    let mut notes = Vec::new();
    let n = p.n();
    let boundary = Spectrum { values: vec![split.sorted[n - 1], split.sorted[n]] };
    let delta = delta_central(h.matrix(), &boundary)?;

    let (mut sep_w, mut relsep_w) = (None, None);
    match sda_solve(p, &opts.sda) {
        Ok(out) => {
            let w = graph_basis(&out.x)?;
            match relsep_of_subspace(h.matrix(), &w) {
                Ok(r) => {
                    relsep_w = Some(r);
                    sep_w = Some(r * dense::spectral_norm(h.matrix())?);
                }
                Err(e) => notes.push(format!("relsep_w: {e}")),
            }
        }
        Err(e) => notes.push(format!("relsep_w: {e}")),
    }

    let (mut relsep_c, mut cuv) = (None, None);
    match compute_central_pair(h.matrix(), opts.k, &opts.iteration) {
        Ok(cs) => {
            cuv = Some(cs.cond_uv);
            match relsep_of_subspace(h.matrix(), &cs.v) {
                Ok(r) => relsep_c = Some(r),
                Err(e) => notes.push(format!("relsep_central: {e}")),
            }
        }
        Err(e) => notes.push(format!("central pair: {e}")),
    }

    Ok(DiagnosticsReport {
        n,
        m: p.m(),
        gamma,
        lambda_n: split.lambda_n,
        lambda_n1: split.lambda_n1,
        gap: (split.boundary[0] - split.boundary[1]).norm(),
        cayley_gap: cayley_gap(&h, gamma)?,
        sep_f_w: sep_w,
        relsep_w,
        relsep_central: relsep_c,
        delta_central: delta,
        cond_uv: cuv,
        notes,
    })
}

impl DiagnosticsReport {
    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
        let rows = [
            ("n", self.n.to_string()),
            ("m", self.m.to_string()),
            ("gamma", format!("{:.6e}", self.gamma)),
            ("lambda_n", format!("{:.6e}", self.lambda_n)),
            ("lambda_n+1", format!("{:.6e}", self.lambda_n1)),
            ("gap(H)", format!("{:.3e}", self.gap)),
            ("gap_C(H)", format!("{:.6}", self.cayley_gap)),
            ("sep_F(W)", opt(self.sep_f_w)),
            ("relsep(W)", opt(self.relsep_w)),
            ("relsep(V)", opt(self.relsep_central)),
            ("delta", format!("{:.3e}", self.delta_central)),
            ("cond(U'V)", opt(self.cond_uv)),
        ];
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<width$}  {v:>14}");
        }
        for note in &self.notes {
            let _ = writeln!(s, "note: {note}");
        }
        s
    }
}
