//! Benchmark generators: the neutron transport equation and random M-matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dense::{self, Mat};
use crate::nare::{NareProblem, ProblemMetadata};
use crate::{Error, Result};

pub const GENERATOR_VERSION: &str = concat!("nare-sushi ", env!("CARGO_PKG_VERSION"));
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.3), uniform [0,1) via rand 0.8";

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    // P_n(z) and P_n'(z) by the three-term recurrence
    let legendre = |z: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let pn1 = if n == 1 { 1.0 } else { p0 };
        (p1, nf * (z * p1 - pn1) / (z * z - 1.0))
    };
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut done = false;
        for _ in 0..100 {
            let (pn, dp) = legendre(z);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                done = true;
                break;
            }
        }
        if !done || !z.is_finite() {
            return Err(Error::QuadratureFailure);
        }
        let dp = legendre(z).1;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// How the transport angular integral is discretized on (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// n/4 equal panels with 4-point Gauss–Legendre each; plain GL(n) when 4 ∤ n.
    #[default]
    Composite4,
    /// A single n-point Gauss–Legendre rule.
    GaussLegendre,
}

/// Nodes and weights on (0, 1).
pub fn transport_nodes(n: usize, rule: Quadrature) -> Result<(Vec<f64>, Vec<f64>)> {
    let map = |x: &[f64], w: &[f64], panel: usize, panels: usize| -> (Vec<f64>, Vec<f64>) {
        let h = 1.0 / panels as f64;
        let om = x.iter().map(|&t| (panel as f64 + (t + 1.0) / 2.0) * h).collect();
        let cw = w.iter().map(|&v| v / 2.0 * h).collect();
        (om, cw)
    };
    match rule {
        Quadrature::Composite4 if n.is_multiple_of(4) => {
            let (x, w) = gauss_legendre(4)?;
            let panels = n / 4;
            let (mut om, mut cw) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for p in 0..panels {
                let (o, c) = map(&x, &w, p, panels);
                om.extend(o);
                cw.extend(c);
            }
            Ok((om, cw))
        }
        _ => {
            let (x, w) = gauss_legendre(n)?;
            Ok(map(&x, &w, 0, 1))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportSpec {
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    #[serde(default)]
    pub quadrature: Quadrature,
}

impl TransportSpec {
    /// The benchmark path `(α, c) = (β, 1 − β)`.
    pub fn beta(n: usize, beta: f64) -> Self {
        TransportSpec { n, alpha: beta, c: 1.0 - beta, quadrature: Quadrature::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::InvalidArgument(format!("c must lie in (0, 1], got {}", self.c)));
        }
        Ok(())
    }
}

/// Riccati equation of the neutron transport model (square, m = n).
pub fn transport_problem(spec: &TransportSpec) -> Result<NareProblem> {
    spec.validate()?;
    let n = spec.n;
    let (om, cw) = transport_nodes(n, spec.quadrature)?;
    let (alpha, c) = (spec.alpha, spec.c);
    let delta: Vec<f64> = om.iter().map(|w| 1.0 / (c * w * (1.0 + alpha))).collect();
    let gam: Vec<f64> = om.iter().map(|w| 1.0 / (c * w * (1.0 - alpha))).collect();
    let q: Vec<f64> = cw.iter().zip(&om).map(|(ci, wi)| ci / (2.0 * wi)).collect();
    let a = Mat::from_fn(n, n, |i, j| if i == j { delta[i] } else { 0.0 } - q[j]);
    let b = Mat::from_element(n, n, 1.0);
    let cm = Mat::from_fn(n, n, |i, j| q[i] * q[j]);
    let d = Mat::from_fn(n, n, |i, j| if i == j { gam[i] } else { 0.0 } - q[i]);
    let meta = ProblemMetadata {
        family: "transport".into(),
        parameters: json!({ "n": n, "alpha": alpha, "c": c, "quadrature": spec.quadrature }),
        seed: None,
        rng: None,
        generator_version: GENERATOR_VERSION.into(),
    };
    Ok(NareProblem::new(a, b, cm, d)?.with_metadata(meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMnareSpec {
    pub n: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// `M = (ρ(N) + α) I − N` with `N` uniform on [0,1) entrywise (size 2n),
/// carved into `[[D, −C], [−B, A]]`.
pub fn random_mnare(spec: &RandomMnareSpec) -> Result<NareProblem> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", spec.alpha)));
    }
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // row-major fill so the stream maps to entries in reading order
    let data: Vec<f64> = (0..4 * n * n).map(|_| rng.gen::<f64>()).collect();
    let nn = Mat::from_row_slice(2 * n, 2 * n, &data);
    let rho = dense::eigenvalues(&nn)?.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let m = Mat::identity(2 * n, 2 * n) * (rho + spec.alpha) - nn;
    let d = m.view((0, 0), (n, n)).clone_owned();
    let c = -m.view((0, n), (n, n)).clone_owned();
    let b = -m.view((n, 0), (n, n)).clone_owned();
    let a = m.view((n, n), (n, n)).clone_owned();
    let meta = ProblemMetadata {
        family: "random".into(),
        parameters: json!({ "n": n, "alpha": spec.alpha }),
        seed: Some(spec.seed),
        rng: Some(RNG_NAME.into()),
        generator_version: GENERATOR_VERSION.into(),
    };
    Ok(NareProblem::new(a, b, c, d)?.with_metadata(meta))
}

/// Problem with prescribed `A`, `C`, `D` for which `X0` is an exact solution:
/// `B = A X0 + X0 D − X0 C X0`.
pub fn reverse_engineered_problem(x0: &Mat, a: &Mat, c: &Mat, d: &Mat) -> Result<NareProblem> {
    let (m, n) = x0.shape();
    if a.shape() != (m, m) || c.shape() != (n, m) || d.shape() != (n, n) {
        return Err(Error::DimensionMismatch("X0, A, C, D have inconsistent shapes".into()));
    }
    let b = a * x0 + x0 * d - x0 * c * x0;
    NareProblem::new(a.clone(), b, c.clone(), d.clone())
}
