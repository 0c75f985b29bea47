//! Central invariant subspaces, shift selection, shifted linearizing matrices
//! and the SuShi driver.
//!
//! The subspace shift replaces `H` by `Ĥ = H (I + s V (UᵀV)⁻¹ Uᵀ)`, where `V`
//! and `U` span the right and left invariant subspaces of the k eigenvalues
//! of smallest modulus. `Ĥ` has the same right invariant subspaces as `H`,
//! with those k eigenvalues multiplied by `1 + s`, so the Riccati equation
//! read off `Ĥ` has the same minimal solution but a wider gap.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dense::{self, Lu, Mat};
use crate::nare::{classify_mmatrix, LinearizingMatrix, NareProblem, Solution};
use crate::sda::{sda_solve_with, SdaConfig, SdaOutcome, SdaTraceRecord};
use crate::{Error, Real, Result, Spectrum};

/// Result of an inverse orthogonal iteration run.
#[derive(Debug, Clone)]
pub struct InverseIteration<T: Real = f64> {
    /// Orthonormal basis of the best iterate.
    pub q: Mat<T>,
    /// Index of the best iterate.
    pub steps: usize,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Estimate of `|ξ_k| / |ξ_{k+1}|` from the residual decay.
    pub t_estimate: f64,
    /// `‖HQ − Q(QᵀHQ)‖_F / ‖H‖_F` per iteration.
    pub residuals: Vec<f64>,
    /// Largest principal-angle sine between consecutive iterates.
    pub distances: Vec<f64>,
    pub converged: bool,
}

impl<T: Real> InverseIteration<T> {
    pub fn best_residual(&self) -> f64 {
        self.residuals.get(self.steps.wrapping_sub(1)).copied().unwrap_or(f64::INFINITY)
    }
}

/// Parameters of the inverse orthogonal iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig { tol: 1e-15, max_iters: 100, seed: 1 }
    }
}

/// LU of `H` for inverse iteration. Near-singularity is the expected case
/// (the wanted eigenvalues are the smallest ones), so only pivots at the
/// level of `ε²‖H‖_F` count as singular.
fn factor_h<T: Real>(h: &Mat<T>) -> Result<Lu<T>> {
    Lu::with_relative_threshold(h, T::eps() * T::eps()).map_err(|_| Error::SingularH)
}

fn seeded_basis<T: Real>(dim: usize, k: usize, seed: u64) -> Result<Mat<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..dim * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    dense::orthonormalize(&Mat::<T>::from_iterator(dim, k, data.into_iter().map(T::of)))
}

fn invariance_residual<T: Real>(h: &Mat<T>, q: &Mat<T>, h_norm: T) -> f64 {
    let hq = h * q;
    let proj = q.transpose() * &hq;
    ((hq - q * proj).norm() / h_norm).to_f64()
}

/// Sine of the largest principal angle between the spans of orthonormal `a` and `b`.
fn max_angle_sine<T: Real>(a: &Mat<T>, b: &Mat<T>) -> f64 {
    let r = b - a * (a.transpose() * b);
    dense::spectral_norm(&r).unwrap_or(f64::NAN)
}

/// Geometric mean of the last (up to 3) residual-decay ratios, skipping the
/// first transient ratio and ratios that reach the roundoff floor.
fn rate_from_residuals<T: Real>(res: &[f64]) -> f64 {
    let floor = 1e2 * T::eps().to_f64();
    let ratios: Vec<f64> = res.windows(2).map(|w| w[1] / w[0]).collect();
    let clean: Vec<f64> = ratios
        .iter()
        .enumerate()
        .filter(|&(j, _)| j >= 1 && res[j + 1] > floor && res[j] > floor)
        .map(|(_, &r)| r)
        .collect();
    let pool = if clean.is_empty() {
        ratios.iter().copied().filter(|&r| r.is_finite() && r > 0.0).collect()
    } else {
        clean
    };
    if pool.is_empty() {
        return 0.0;
    }
    let tail = &pool[pool.len().saturating_sub(3)..];
    (tail.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).sum::<f64>() / tail.len() as f64).exp()
}

/// Orthonormal basis of the iterate. Nearly parallel columns are expected
/// when the wanted block is close to a Jordan block, so rank loss falls
/// back to the plain Householder factor instead of failing.
fn orthonormal_iterate<T: Real>(m: &Mat<T>) -> Mat<T> {
    dense::orthonormalize(m).unwrap_or_else(|_| m.clone().qr().q())
}

fn run_iteration<T: Real>(
    h: &Mat<T>,
    k: usize,
    cfg: &IterationConfig,
    solve: &dyn Fn(&Mat<T>) -> Result<Mat<T>>,
) -> Result<InverseIteration<T>> {
    let dim = h.nrows();
    if k == 0 || k >= dim {
        return Err(Error::InvalidArgument(format!("k must lie in 1..{dim}, got {k}")));
    }
    let h_norm = h.norm();
    let tol = cfg.tol.max(T::eps().to_f64());
    // below this the iterate is as good as the arithmetic allows
    let floor = 0.01 * T::eps().to_f64().sqrt();
    let mut q = seeded_basis::<T>(dim, k, cfg.seed)?;
    let mut residuals = Vec::new();
    let mut distances = Vec::new();
    let mut best = (f64::INFINITY, q.clone(), 0usize);
    let mut stall = 0;
    let mut converged = false;
    for j in 1..=cfg.max_iters {
        let next = orthonormal_iterate(&solve(&q)?);
        distances.push(max_angle_sine(&q, &next));
        q = next;
        let r = invariance_residual(h, &q, h_norm);
        residuals.push(r);
        if r < 0.5 * best.0 {
            best = (r, q.clone(), j);
            stall = 0;
        } else {
            stall += 1;
        }
        if r <= tol {
            converged = true;
            break;
        }
        if best.0 < floor && stall >= 2 {
            converged = true;
            break;
        }
    }
    let iterations = residuals.len();
    Ok(InverseIteration {
        t_estimate: rate_from_residuals::<T>(&residuals[..best.2.max(1).min(iterations)]),
        q: best.1,
        steps: best.2,
        iterations,
        residuals,
        distances,
        converged,
    })
}

/// Basis of the invariant subspace of `h` for its k smallest-modulus
/// eigenvalues: `Q ← qr(H⁻¹ Q)` from a seeded random start.
pub fn inverse_orthogonal_iteration<T: Real>(h: &Mat<T>, k: usize, cfg: &IterationConfig) -> Result<InverseIteration<T>> {
    let lu = factor_h(h)?;
    run_iteration(h, k, cfg, &|q| lu.solve(q))
}

/// Right (`v`) and left (`u`) central bases with the data derived from them.
#[derive(Debug, Clone)]
pub struct CentralSubspaces<T: Real = f64> {
    pub v: Mat<T>,
    pub u: Mat<T>,
    pub k: usize,
    /// Eigenvalues of `VᵀHV`, by non-decreasing modulus.
    pub central_eigs: Spectrum,
    pub inv_iter_steps: usize,
    pub inv_iter_steps_left: usize,
    /// `|ξ_k| / |ξ_{k+1}|`.
    pub rate_estimate_t: f64,
    /// Estimated `|ξ_{k+1}|`.
    pub xi_next: f64,
    /// `‖(UᵀV)⁻¹‖₂`.
    pub cond_uv: f64,
    pub residual_v: f64,
    pub residual_u: f64,
    pub h_norm: f64,
}

/// Modulus of the (k+1)-st smallest eigenvalue from power iteration on the
/// compression of `H⁻¹` to the orthogonal complement of `V`.
fn estimate_next_modulus<T: Real>(lu: &Lu<T>, v: &Mat<T>, seed: u64) -> Result<f64> {
    let dim = v.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let project = |x: Mat<T>| -> Mat<T> { &x - v * (v.transpose() * &x) };
    let mut x = project(Mat::<T>::from_iterator(dim, 1, (0..dim).map(|_| T::of(rng.gen_range(-1.0..1.0)))));
    x /= x.norm();
    let mut growth = Vec::new();
    for _ in 0..8 {
        let y = project(lu.solve(&x)?);
        let ny = y.norm();
        if ny == T::zero() || !ny.is_finite() {
            break;
        }
        growth.push(ny.to_f64());
        x = y / ny;
    }
    if growth.is_empty() {
        return Ok(f64::INFINITY);
    }
    let tail = &growth[growth.len().saturating_sub(4)..];
    let mean_log = tail.iter().map(|g| g.ln()).sum::<f64>() / tail.len() as f64;
    Ok((-mean_log).exp())
}

/// Computes `V` from the iteration on `H` and `U` from the iteration on `Hᵀ`,
/// reusing one LU factorization of `H`.
pub fn compute_central_pair<T: Real>(h: &Mat<T>, k: usize, cfg: &IterationConfig) -> Result<CentralSubspaces<T>> {
    let lu = factor_h(h)?;
    let ht = h.transpose();
    let right = run_iteration(h, k, cfg, &|q| lu.solve(q))?;
    let left = run_iteration(&ht, k, &IterationConfig { seed: cfg.seed.wrapping_add(1), ..*cfg }, &|q| {
        lu.solve_transpose(q)
    })?;
    let accept = T::eps().to_f64().sqrt();
    for it in [&right, &left] {
        if !it.converged && it.best_residual() > accept {
            return Err(Error::NoConvergence { what: "inverse orthogonal iteration", iterations: it.iterations });
        }
    }
    let (residual_v, residual_u) = (right.best_residual(), left.best_residual());
    let (v, u) = (right.q, left.q);
    let central_eigs = Spectrum { values: dense::eigenvalues(&(v.transpose() * h * &v))?.sorted_by_modulus() };
    let cond_uv = crate::diagnostics::cond_uv(&u, &v)?;
    if cond_uv > 1e8 {
        return Err(Error::CentralPairIllConditioned { cond: cond_uv });
    }
    let xi_next = estimate_next_modulus(&lu, &v, cfg.seed.wrapping_add(2))?;
    let xi_k = central_eigs.values.last().map_or(0.0, |z| z.norm());
    Ok(CentralSubspaces {
        k,
        central_eigs,
        inv_iter_steps: right.steps,
        inv_iter_steps_left: left.steps,
        rate_estimate_t: xi_k / xi_next,
        xi_next,
        cond_uv,
        residual_v,
        residual_u,
        h_norm: h.norm().to_f64(),
        v,
        u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KDetection {
    pub k: usize,
    /// True when no k up to `k_max` converged fast enough.
    pub k_max_reached: bool,
    /// `(k, t)` for every probed k.
    pub probes: Vec<(usize, f64)>,
}

/// Enlarges k from `k0` until the probe basis after `probe_iters` steps shows
/// a rate `t = |ξ_k| / |ξ_{k+1}| ≤ slow_threshold`.
pub fn detect_k<T: Real>(
    h: &Mat<T>,
    k0: usize,
    k_max: usize,
    slow_threshold: f64,
    probe_iters: usize,
    seed: u64,
) -> Result<KDetection> {
    if k0 < 1 || k0 > k_max || k_max >= h.nrows() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k0 <= k_max < {}, got k0={k0}, k_max={k_max}",
            h.nrows()
        )));
    }
    let lu = factor_h(h)?;
    let cfg = IterationConfig { tol: 0.0, max_iters: probe_iters, seed };
    let mut probes = Vec::new();
    for k in k0..=k_max {
        let it = run_iteration(h, k, &cfg, &|q| lu.solve(q))?;
        let xi_k = dense::eigenvalues(&(it.q.transpose() * h * &it.q))?
            .values
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let t = xi_k / estimate_next_modulus(&lu, &it.q, seed.wrapping_add(2))?;
        probes.push((k, t));
        if t <= slow_threshold {
            return Ok(KDetection { k, k_max_reached: false, probes });
        }
    }
    Ok(KDetection { k: k_max, k_max_reached: true, probes })
}

/// Shift amount and the quantities it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftPlan {
    pub s: f64,
    pub k: usize,
    pub xi1: f64,
    pub xi_k: f64,
    pub xi_next: f64,
    /// True when the rule's value fell outside `[S_MIN, S_MAX]`.
    pub clamped: bool,
}

pub const S_MIN: f64 = 0.1;
pub const S_MAX: f64 = 1e6;

impl ShiftPlan {
    /// `s = |ξ_{k+1}| / |ξ₁| − 1`, clamped to `[S_MIN, S_MAX]`.
    pub fn from_moduli(k: usize, xi1: f64, xi_k: f64, xi_next: f64) -> ShiftPlan {
        let raw = xi_next / xi1 - 1.0;
        let s = if raw.is_nan() { S_MIN } else { raw.clamp(S_MIN, S_MAX) };
        ShiftPlan { s, k, xi1, xi_k, xi_next, clamped: s != raw }
    }
}

/// Picks `s` so that `(1+s)|ξ₁|` reaches the estimated `|ξ_{k+1}|`, or uses `s_override`.
pub fn choose_shift_s<T: Real>(cs: &CentralSubspaces<T>, s_override: Option<f64>) -> Result<ShiftPlan> {
    let xi1 = cs.central_eigs.values.first().map_or(0.0, |z| z.norm());
    let xi_k = cs.central_eigs.values.last().map_or(0.0, |z| z.norm());
    if xi1 < T::eps().to_f64() * cs.h_norm {
        return Err(Error::DegenerateSpectrum { xi1 });
    }
    if let Some(s) = s_override {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("s must be positive and finite, got {s}")));
        }
        return Ok(ShiftPlan { s, k: cs.k, xi1, xi_k, xi_next: cs.xi_next, clamped: false });
    }
    Ok(ShiftPlan::from_moduli(cs.k, xi1, xi_k, cs.xi_next))
}

/// `Ĥ = H (I + s V (UᵀV)⁻¹ Uᵀ)`.
pub fn build_shifted_h<T: Real>(h: &LinearizingMatrix<T>, v: &Mat<T>, u: &Mat<T>, s: f64) -> Result<LinearizingMatrix<T>> {
    let hm = h.matrix();
    if v.nrows() != hm.nrows() || u.shape() != v.shape() {
        return Err(Error::DimensionMismatch("U and V must be (n+m)×k".into()));
    }
    let utv = u.transpose() * v;
    let lu = Lu::new(&utv).map_err(|_| Error::UVSingular)?;
    let w = lu.solve(&u.transpose())?;
    // H V = V (VᵀHV) for an exact invariant V; the projected form keeps the
    // iteration's residual HV − V(VᵀHV) from being amplified by s.
    let hv = v * (v.transpose() * hm * v);
    let shifted = hm + hv * w * T::of(s);
    LinearizingMatrix::from_matrix(shifted, h.n(), h.m())
}

/// `H + s v uᵀ / (uᵀv)`: moves the eigenvalue of right eigenvector `v` by `s`
/// when `u` is a left eigenvector for another eigenvalue or `v`'s own.
pub fn classical_shift<T: Real>(h: &Mat<T>, v: &Mat<T>, u: &Mat<T>, s: f64) -> Result<Mat<T>> {
    let dim = h.nrows();
    if v.shape() != (dim, 1) || u.shape() != (dim, 1) {
        return Err(Error::DimensionMismatch("u and v must be column vectors matching H".into()));
    }
    let dot = u.dot(v);
    if dot.abs() < T::of(1e-12) * u.norm() * v.norm() {
        return Err(Error::OrthogonalPair { dot: dot.to_f64() });
    }
    Ok(h + v * u.transpose() * (T::of(s) / dot))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SushiOptions {
    /// Fixed k; `None` runs the adaptive detection from `k0`.
    pub k: Option<usize>,
    pub k0: usize,
    pub k_max: usize,
    pub slow_threshold: f64,
    pub probe_iters: usize,
    /// Fixed shift; `None` applies the modulus rule.
    pub s: Option<f64>,
    pub iteration: IterationConfig,
    pub sda: SdaConfig,
    /// Skip the M-matrix check.
    pub force: bool,
}

impl Default for SushiOptions {
    fn default() -> Self {
        SushiOptions {
            k: None,
            k0: 2,
            k_max: 6,
            slow_threshold: 0.5,
            probe_iters: 8,
            s: None,
            iteration: IterationConfig::default(),
            sda: SdaConfig::default(),
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub classify_ms: f64,
    pub detect_k_ms: f64,
    pub central_pair_ms: f64,
    pub shift_ms: f64,
    pub sda_ms: f64,
    pub total_ms: f64,
}

/// Machine-readable summary of a SuShi run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SushiReport {
    pub k: usize,
    pub k_max_reached: bool,
    pub s: f64,
    pub s_clamped: bool,
    /// `[re, im]` pairs, non-decreasing modulus.
    pub central_eigs: Vec<[f64; 2]>,
    pub inv_iter_steps: usize,
    pub inv_iter_steps_left: usize,
    pub rate_estimate_t: f64,
    pub cond_uv: f64,
    pub sda_steps: usize,
    /// Relative residual against the original equation.
    pub residual: f64,
    /// Relative residual against the shifted equation that SDA solved.
    pub shifted_residual: f64,
    pub converged: bool,
    pub gamma: f64,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct SushiResult<T: Real = f64> {
    pub solution: Solution<T>,
    pub central: CentralSubspaces<T>,
    pub plan: ShiftPlan,
    pub sda: SdaOutcome<T>,
    pub report: SushiReport,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn sushi_solve<T: Real>(p: &NareProblem<T>, opts: &SushiOptions) -> Result<SushiResult<T>> {
    sushi_solve_with(p, opts, &mut |_| {})
}

/// Detect k, compute the central pair, choose s, shift, and run SDA on the
/// shifted equation with the Cayley parameter of the original one.
pub fn sushi_solve_with<T: Real>(
    p: &NareProblem<T>,
    opts: &SushiOptions,
    observer: &mut dyn FnMut(&SdaTraceRecord),
) -> Result<SushiResult<T>> {
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    if !opts.force {
        let class = classify_mmatrix(&p.build_m()).map_err(|e| e.at("classify"))?;
        if !class.is_m_matrix() {
            return Err(Error::NotMNare(format!("s - rho(N) = {:e}", class.spectral_abscissa_evidence)).at("classify"));
        }
    }
    timings.classify_ms = ms(t);

    let h = p.build_h();
    let t = Instant::now();
    let (k, k_max_reached) = match opts.k {
        Some(k) => (k, false),
        None => {
            let k_max = opts.k_max.min(h.dim() - 1).max(opts.k0);
            let det = detect_k(h.matrix(), opts.k0, k_max, opts.slow_threshold, opts.probe_iters, opts.iteration.seed)
                .map_err(|e| e.at("detect_k"))?;
            (det.k, det.k_max_reached)
        }
    };
    timings.detect_k_ms = ms(t);

    let t = Instant::now();
    let central = compute_central_pair(h.matrix(), k, &opts.iteration).map_err(|e| e.at("central_pair"))?;
    timings.central_pair_ms = ms(t);

    let t = Instant::now();
    let plan = choose_shift_s(&central, opts.s).map_err(|e| e.at("shift_parameter"))?;
    let shifted = build_shifted_h(&h, &central.v, &central.u, plan.s).map_err(|e| e.at("shifted_matrix"))?;
    let shifted_problem = shifted.to_problem().map_err(|e| e.at("shifted_matrix"))?;
    timings.shift_ms = ms(t);

    let t = Instant::now();
    let sda_cfg = SdaConfig { gamma: Some(opts.sda.gamma.unwrap_or_else(|| p.gamma_star().to_f64())), ..opts.sda };
    let sda = sda_solve_with(&shifted_problem, &sda_cfg, Some(p), observer).map_err(|e| e.at("sda"))?;
    timings.sda_ms = ms(t);
    timings.total_ms = ms(start);

    let residual = sda.residual;
    let shifted_residual = shifted_problem.relative_residual(&sda.x).unwrap_or(f64::NAN);
    let report = SushiReport {
        k,
        k_max_reached,
        s: plan.s,
        s_clamped: plan.clamped,
        central_eigs: central.central_eigs.values.iter().map(|z| [z.re, z.im]).collect(),
        inv_iter_steps: central.inv_iter_steps,
        inv_iter_steps_left: central.inv_iter_steps_left,
        rate_estimate_t: central.rate_estimate_t,
        cond_uv: central.cond_uv,
        sda_steps: sda.steps,
        residual,
        shifted_residual,
        converged: sda.converged,
        gamma: sda.gamma,
        timings,
    };
    Ok(SushiResult {
        solution: Solution { x: sda.x.clone(), residual, iterations: sda.steps },
        central,
        plan,
        sda,
        report,
    })
}
