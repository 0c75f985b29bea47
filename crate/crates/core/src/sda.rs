//! Structured Doubling Algorithm with Cayley initialization.
//!
//! For the m×n unknown `X` the iteration carries `E` (n×n), `F` (m×m),
//! `G` (n×m) and `H` (m×n). The m×n iterate `H_k` converges to the minimal
//! solution `X` and `G_k` to the solution `Y` of the dual equation
//! `Y B Y − Y A − D Y + C = 0`.

use serde::Serialize;

use crate::dense::{self, Lu, Mat};
use crate::nare::{cayley, LinearizingMatrix, NareProblem};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdaConfig {
    /// Cayley parameter; `None` selects `γ*` of the problem being solved.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_steps: usize,
    /// Largest tolerated 1-norm condition estimate of `I − G H`.
    pub breakdown_threshold: f64,
}

impl Default for SdaConfig {
    fn default() -> Self {
        SdaConfig { gamma: None, tol: 1e-15, max_steps: 60, breakdown_threshold: 1e13 }
    }
}

impl SdaConfig {
    /// Tolerance actually used in precision `T` (never below its epsilon).
    pub fn effective_tol<T: Real>(&self) -> f64 {
        self.tol.max(T::eps().to_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdaState<T: Real = f64> {
    pub e: Mat<T>,
    pub f: Mat<T>,
    pub g: Mat<T>,
    pub h: Mat<T>,
    pub step: usize,
}

/// One line of the per-step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdaTraceRecord {
    pub step: usize,
    pub rel_change: f64,
    pub residual: f64,
    pub cond_i_gh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdaOutcome<T: Real = f64> {
    /// Approximate minimal solution (m×n).
    pub x: Mat<T>,
    /// Approximate dual solution (n×m).
    pub y: Mat<T>,
    /// Index of the returned iterate.
    pub steps: usize,
    /// Steps executed, including the one that detected the residual plateau.
    pub steps_performed: usize,
    /// Relative residual of `x` against the reference equation.
    pub residual: f64,
    /// Relative residual after each executed step.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub gamma: f64,
    /// Relative residual of `y` in the dual of the equation actually iterated on.
    pub dual_residual: f64,
}

/// Initial quadruple from the Cayley transform with parameter `γ`.
pub fn sda_init<T: Real>(a: &Mat<T>, b: &Mat<T>, c: &Mat<T>, d: &Mat<T>, gamma: T) -> Result<SdaState<T>> {
    let (m, n) = (a.nrows(), d.nrows());
    let ag = a + Mat::<T>::identity(m, m) * gamma;
    let dg = d + Mat::<T>::identity(n, n) * gamma;
    let ag_lu: Lu<T> = Lu::new(&ag).map_err(|_| Error::InitSingular { which: "A_gamma" })?;
    let dg_lu: Lu<T> = Lu::new(&dg).map_err(|_| Error::InitSingular { which: "D_gamma" })?;
    let dinv_c = dg_lu.solve(c)?;
    let ainv_b = ag_lu.solve(b)?;
    let w = &ag - b * &dinv_c;
    let v = &dg - c * &ainv_b;
    let w_lu: Lu<T> = Lu::new(&w).map_err(|_| Error::InitSingular { which: "W_gamma" })?;
    let v_lu: Lu<T> = Lu::new(&v).map_err(|_| Error::InitSingular { which: "V_gamma" })?;
    let two_g = gamma + gamma;
    let e = Mat::<T>::identity(n, n) - v_lu.solve(&Mat::identity(n, n))? * two_g;
    let f = Mat::<T>::identity(m, m) - w_lu.solve(&Mat::identity(m, m))? * two_g;
    // G = 2γ (D_γ⁻¹ C) W⁻¹,  H = 2γ (W⁻¹ B) D_γ⁻¹
    let g = w_lu.solve_transpose(&dinv_c.transpose())?.transpose() * two_g;
    let h = dg_lu.solve_transpose(&w_lu.solve(b)?.transpose())?.transpose() * two_g;
    Ok(SdaState { e, f, g, h, step: 0 })
}

/// One doubling step. Returns the new state and the condition estimate of `I − GH`.
pub fn sda_step<T: Real>(s: &SdaState<T>, cfg: &SdaConfig) -> Result<(SdaState<T>, f64)> {
    let n = s.e.nrows();
    let m = s.f.nrows();
    let step = s.step + 1;
    let igh = Mat::<T>::identity(n, n) - &s.g * &s.h;
    let lu = Lu::new(&igh).map_err(|_| Error::Breakdown { step, condition: f64::INFINITY })?;
    let cond = (dense::one_norm(&igh) * lu.inverse_one_norm_estimate()?).to_f64();
    if !cond.is_finite() || cond > cfg.breakdown_threshold {
        return Err(Error::Breakdown { step, condition: cond });
    }
    // (I − GH)⁻¹ [E | G F]
    let mut rhs = Mat::<T>::zeros(n, n + m);
    rhs.columns_mut(0, n).copy_from(&s.e);
    rhs.columns_mut(n, m).copy_from(&(&s.g * &s.f));
    let sol = lu.solve(&rhs)?;
    let e_new = &s.e * sol.columns(0, n);
    let g_new = &s.g + &s.e * sol.columns(n, m);
    // (I − HG)⁻¹ R = R + H (I − GH)⁻¹ G R  with R = [F | H E]
    let mut r = Mat::<T>::zeros(m, m + n);
    r.columns_mut(0, m).copy_from(&s.f);
    r.columns_mut(m, n).copy_from(&(&s.h * &s.e));
    let ihg_inv_r = &r + &s.h * lu.solve(&(&s.g * &r))?;
    let f_new = &s.f * ihg_inv_r.columns(0, m);
    let h_new = &s.h + &s.f * ihg_inv_r.columns(m, n);
    Ok((SdaState { e: e_new, f: f_new, g: g_new, h: h_new, step }, cond))
}

/// Runs SDA on `p`, measuring residuals against `p`.
pub fn sda_solve<T: Real>(p: &NareProblem<T>, cfg: &SdaConfig) -> Result<SdaOutcome<T>> {
    sda_solve_with(p, cfg, None, &mut |_| {})
}

/// Runs SDA on `p`. Residuals are measured against `reference` when given
/// (the original equation when `p` is a shifted one), otherwise against `p`.
/// `observer` receives one record per step.
pub fn sda_solve_with<T: Real>(
    p: &NareProblem<T>,
    cfg: &SdaConfig,
    reference: Option<&NareProblem<T>>,
    observer: &mut dyn FnMut(&SdaTraceRecord),
) -> Result<SdaOutcome<T>> {
    let reference = reference.unwrap_or(p);
    if (reference.m(), reference.n()) != (p.m(), p.n()) {
        return Err(Error::DimensionMismatch("reference problem has different block sizes".into()));
    }
    let gamma = match cfg.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}"))),
        None => p.gamma_star().to_f64(),
    };
    let tol = cfg.effective_tol::<T>();
    let mut state = sda_init(p.a(), p.b(), p.c(), p.d(), T::of(gamma))?;
    let mut history: Vec<f64> = Vec::new();
    // (state, residual) of the iterate to return if the residual stalls next step
    let mut prev: Option<(SdaState<T>, f64)> = None;
    let mut stop: Option<(SdaState<T>, f64)> = None;
    for _ in 0..cfg.max_steps {
        let (next, cond) = sda_step(&state, cfg)?;
        let xn = next.h.norm();
        let change = if xn > T::zero() { ((&next.h - &state.h).norm() / xn).to_f64() } else { 0.0 };
        let residual = reference.relative_residual(&next.h).unwrap_or(f64::NAN);
        history.push(residual);
        observer(&SdaTraceRecord { step: next.step, rel_change: change, residual, cond_i_gh: cond });
        if !change.is_finite() || !residual.is_finite() {
            return Err(Error::Breakdown { step: next.step, condition: cond });
        }
        if change <= tol {
            stop = Some((next, residual));
            break;
        }
        // Residual plateau: the previous iterate was already at the
        // attainable accuracy and this step did not halve the residual.
        if let Some((_, prev_res)) = &prev {
            if *prev_res <= tol.sqrt() && residual > 0.5 * prev_res {
                stop = prev.take();
                break;
            }
        }
        state = next;
        prev = Some((state.clone(), residual));
    }
    let steps_performed = history.len();
    let (state, residual, converged) = match stop {
        Some((st, res)) => (st, res, res <= tol.sqrt()),
        None => {
            let res = history.last().copied().unwrap_or(f64::NAN);
            if res > 100.0 * tol {
                return Err(Error::NoConvergence { what: "SDA", iterations: cfg.max_steps });
            }
            (state, res, true)
        }
    };
    let dual_residual = p.dual_relative_residual(&state.g).unwrap_or(f64::NAN);
    Ok(SdaOutcome {
        x: state.h,
        y: state.g,
        steps: state.step,
        steps_performed,
        residual,
        residual_history: history,
        converged,
        gamma,
        dual_residual,
    })
}

/// `max_{i≤n} |C_γ(λ_i)| / min_{j>n} |C_γ(λ_j)|`, the quadratic convergence
/// rate of SDA on a matrix with this spectrum.
pub fn predicted_rate<T: Real>(h: &LinearizingMatrix<T>, gamma: f64) -> Result<f64> {
    let split = h.split_spectrum()?;
    let n = h.n();
    let mut num: f64 = 0.0;
    for z in split.antistable(n) {
        num = num.max(cayley(*z, gamma)?.norm());
    }
    let mut den = f64::INFINITY;
    for z in split.stable(n) {
        // a stable eigenvalue at the pole −γ maps to infinity
        match cayley(*z, gamma) {
            Ok(c) => den = den.min(c.norm()),
            Err(Error::PoleHit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn scalar_init_matches_hand_values() {
        // a=d=2, b=c=1, γ=2: A_γ=D_γ=4, W=V=15/4
        let s = sda_init(&m1(2.0), &m1(1.0), &m1(1.0), &m1(2.0), 2.0).unwrap();
        let e0 = 1.0 - 4.0 / (15.0 / 4.0);
        let g0 = 4.0 * 0.25 / (15.0 / 4.0);
        for (got, want) in [(s.e[(0, 0)], e0), (s.f[(0, 0)], e0), (s.g[(0, 0)], g0), (s.h[(0, 0)], g0)] {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn scalar_step_matches_recurrence() {
        let cfg = SdaConfig::default();
        let s0 = sda_init(&m1(2.0), &m1(1.0), &m1(1.0), &m1(2.0), 2.0).unwrap();
        let (e, g) = (s0.e[(0, 0)], s0.g[(0, 0)]);
        let (s1, _) = sda_step(&s0, &cfg).unwrap();
        let den = 1.0 - g * g;
        assert!((s1.e[(0, 0)] - e * e / den).abs() < 1e-15);
        assert!((s1.g[(0, 0)] - (g + e * e * g / den)).abs() < 1e-15);
        assert_eq!(s1.step, 1);
    }

    #[test]
    fn decoupled_init_and_step() {
        let a = Mat::from_row_slice(2, 2, &[3.0, -1.0, 0.0, 2.0]);
        let d = Mat::from_row_slice(2, 2, &[4.0, 0.0, -1.0, 5.0]);
        let z = Mat::zeros(2, 2);
        let gamma = 5.0;
        let s = sda_init(&a, &z, &z, &d, gamma).unwrap();
        assert!(s.g.iter().all(|&x| x == 0.0) && s.h.iter().all(|&x| x == 0.0));
        let dg = &d + Mat::identity(2, 2) * gamma;
        let e0: Mat = Mat::identity(2, 2) - dg.try_inverse().unwrap() * (2.0 * gamma);
        assert!((&s.e - &e0).norm() < 1e-15);
        let mut st = s.clone();
        let mut pow = e0.clone();
        for _ in 0..5 {
            st = sda_step(&st, &SdaConfig::default()).unwrap().0;
            pow = &pow * &pow;
            assert!((&st.e - &pow).norm() <= 1e-14 * pow.norm().max(1e-300) + 1e-300);
            assert!(st.g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn breakdown_on_singular_i_minus_gh() {
        let s = SdaState { e: m1(1.0), f: m1(1.0), g: m1(2.0), h: m1(0.5), step: 3 };
        assert!(matches!(sda_step(&s, &SdaConfig::default()), Err(Error::Breakdown { step: 4, .. })));
    }

    #[test]
    fn init_singular_names_matrix() {
        let r = sda_init(&m1(-1.0), &m1(0.0), &m1(0.0), &m1(1.0), 1.0);
        assert!(matches!(r, Err(Error::InitSingular { which: "A_gamma" })));
    }

    #[test]
    fn scalar_solve_reaches_smaller_root() {
        let (a, b, c, d) = (3.0, 1.0, 1.5, 2.0);
        let p = NareProblem::new(m1(a), m1(b), m1(c), m1(d)).unwrap();
        let out = sda_solve(&p, &SdaConfig::default()).unwrap();
        let s = a + d;
        let root = 2.0 * b / (s + (s * s - 4.0 * b * c).sqrt());
        assert!(out.converged);
        assert!((out.x[(0, 0)] - root).abs() < 1e-14);
        assert!(out.dual_residual < 1e-14);
    }

    #[test]
    fn diagonal_rate_is_zero() {
        let h = LinearizingMatrix::from_matrix(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1, 1).unwrap();
        assert_eq!(predicted_rate(&h, 1.0).unwrap(), 0.0);
    }
}
