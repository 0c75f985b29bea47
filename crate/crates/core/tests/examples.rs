//! Worked examples: benchmark values with known reference numbers and small
//! problems with closed-form answers.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nare_sushi::dense::{self, Mat};
use nare_sushi::diagnostics::{
    cayley_gap, cond_uv, delta_central, gap_of, graph_basis, relsep_of_subspace, sep_f, solution_distance_bound,
    subspace_distance,
};
use nare_sushi::nare::{classify_mmatrix, MMatrixTag};
use nare_sushi::problems::{
    random_mnare, reverse_engineered_problem, transport_problem, RandomMnareSpec, TransportSpec,
};
use nare_sushi::sda::{sda_solve, SdaConfig};
use nare_sushi::shift::{
    build_shifted_h, classical_shift, compute_central_pair, detect_k, sushi_solve, IterationConfig, SushiOptions,
};
use nare_sushi::{Complex, NareProblem, Spectrum};

fn transport(n: usize, beta: f64) -> NareProblem {
    transport_problem(&TransportSpec::beta(n, beta)).unwrap()
}

fn random(n: usize, seed: u64) -> NareProblem {
    random_mnare(&RandomMnareSpec { n, alpha: 1e-3, seed }).unwrap()
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn delta_of(p: &NareProblem) -> f64 {
    let h = p.build_h();
    let split = h.split_spectrum().unwrap();
    let n = p.n();
    delta_central(h.matrix(), &Spectrum { values: vec![split.sorted[n - 1], split.sorted[n]] }).unwrap()
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

#[test]
fn transport_gaps_shrink_with_beta() {
    let gaps: Vec<f64> = [1e-3, 1e-6, 1e-12].iter().map(|&b| gap_of(&transport(4, b).build_h()).unwrap()).collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
    assert!(close(gaps[0], 0.11, 0.05), "{gaps:?}");
    assert!(close(gaps[1], 3.5e-3, 0.02), "{gaps:?}");
    assert!(close(gaps[2], 3.5e-6, 0.02), "{gaps:?}");
}

#[test]
fn critical_transport_has_double_zero() {
    let p = transport_problem(&TransportSpec { n: 4, alpha: 0.0, c: 1.0, quadrature: Default::default() }).unwrap();
    let h = p.build_h();
    let norm = h.matrix().norm();
    let split = h.split_spectrum().unwrap();
    assert!(split.lambda_n.abs() <= 1e-8 * norm, "{}", split.lambda_n);
    assert!(split.lambda_n1.abs() <= 1e-8 * norm, "{}", split.lambda_n1);
    assert_eq!(classify_mmatrix(&p.build_m()).unwrap().tag, MMatrixTag::SingularM);
}

#[test]
fn transport_n32_separation_of_central_pair() {
    let p = transport(32, 1e-6);
    assert!(close(gap_of(&p.build_h()).unwrap(), 3.5e-3, 0.02));
    assert!((delta_of(&p) - 1.0).abs() < 0.05, "{}", delta_of(&p));
}

#[test]
fn random_n50_gap_and_delta_orders_of_magnitude() {
    let p = random(50, 1);
    let gap = gap_of(&p.build_h()).unwrap();
    let delta = delta_of(&p);
    assert!((0.1..2.0).contains(&gap), "gap {gap}");
    assert!((10.0..200.0).contains(&delta), "delta {delta}");
}

#[test]
fn cayley_gap_before_and_after_shift() {
    for beta in [1e-3, 1e-12] {
        let p = transport(4, beta);
        let h = p.build_h();
        let gamma = p.gamma_star();
        let cs = compute_central_pair(h.matrix(), 2, &IterationConfig::default()).unwrap();
        let mut xi: Vec<f64> = dense::eigenvalues(h.matrix()).unwrap().values.iter().map(|z| z.norm()).collect();
        xi.sort_by(f64::total_cmp);
        let hs = build_shifted_h(&h, &cs.v, &cs.u, xi[2] / xi[0] - 1.0).unwrap();
        let before = cayley_gap(&h, gamma).unwrap();
        let after = cayley_gap(&hs, gamma).unwrap();
        if beta == 1e-3 {
            assert!((before - 0.98).abs() < 0.01, "{before}");
        }
        assert!((after - 0.69).abs() < 0.01, "beta {beta}: {after}");
    }
}

#[test]
fn relsep_of_solution_subspace_and_central_subspace() {
    let p = transport(4, 1e-3);
    let h = p.build_h();
    let x = sda_solve(&p, &SdaConfig::default()).unwrap().x;
    let rw = relsep_of_subspace(h.matrix(), &graph_basis(&x).unwrap()).unwrap();
    assert!((rw - 4.5e-3).abs() < 1e-4, "{rw}");
    let cs = compute_central_pair(h.matrix(), 2, &IterationConfig::default()).unwrap();
    let rv = relsep_of_subspace(h.matrix(), &cs.v).unwrap();
    assert!((rv - 2.9e-2).abs() < 1e-3, "{rv}");
    // U'V conditioning stays within the Sylvester bound
    assert!(cs.cond_uv.is_finite() && cs.cond_uv >= 1.0);
}

#[test]
fn sda_iteration_counts_on_benchmarks() {
    for (p, want, res_cap) in [
        (transport(32, 1e-3), 15, 1e-13),
        (transport(32, 1e-12), 27, 1e-13),
        (transport(128, 1e-6), 21, 1e-12),
        (random(50, 1), 12, 1e-13),
    ] {
        let out = sda_solve(&p, &SdaConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.steps.abs_diff(want) <= 2, "steps {} want {want}", out.steps);
        assert!(out.residual <= res_cap, "residual {:e}", out.residual);
    }
}

#[test]
fn transport_n32_beta1e6_residual_level() {
    let out = sda_solve(&transport(32, 1e-6), &SdaConfig::default()).unwrap();
    assert_eq!(out.steps, 20);
    assert!(out.residual < 1e-13, "{:e}", out.residual);
}

#[test]
fn sushi_iteration_counts_on_benchmarks() {
    let p = transport(128, 1e-3);
    let r = sushi_solve(&p, &SushiOptions::default()).unwrap().report;
    assert!(r.sda_steps.abs_diff(13) <= 2 && r.inv_iter_steps.abs_diff(12) <= 3, "{r:?}");
    assert!(r.residual < 1e-12);

    let p = random(100, 1);
    let r = sushi_solve(&p, &SushiOptions::default()).unwrap().report;
    assert!(r.sda_steps <= 6, "{r:?}");
    assert!(r.inv_iter_steps.abs_diff(7) <= 3, "{r:?}");
    assert!(r.residual < 1e-12);
}

#[test]
fn sushi_on_nearly_critical_transport_takes_few_steps() {
    let p = transport(32, 1e-12);
    let r = sushi_solve(&p, &SushiOptions::default()).unwrap().report;
    assert_eq!(r.k, 2);
    assert!(r.sda_steps.abs_diff(11) <= 2, "{r:?}");
    assert!(r.inv_iter_steps.abs_diff(3) <= 3, "{r:?}");
    // the shifted equation keeps [I; X] only to about s·eps
    assert!(r.residual < 1e-9, "{:e}", r.residual);
}

#[test]
fn detect_k_on_transport_returns_two() {
    let h = transport(32, 1e-6).build_h();
    let det = detect_k(h.matrix(), 2, 6, 0.5, 8, 1).unwrap();
    assert_eq!(det.k, 2);
    assert!(!det.k_max_reached);
}

#[test]
fn rate_estimate_on_planted_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut d = vec![0.01, 0.02];
    d.extend((0..10).map(|_| rng.gen_range(1.0..2.0)));
    let xi3 = d[2..].iter().cloned().fold(f64::INFINITY, f64::min);
    let s = Mat::identity(12, 12) + rand_mat(&mut rng, 12, 12) * 0.1;
    let h = &s * Mat::from_diagonal(&DVector::from_vec(d)) * s.clone().try_inverse().unwrap();
    let cs = compute_central_pair(&h, 2, &IterationConfig::default()).unwrap();
    let want = 0.02 / xi3;
    assert!(cs.rate_estimate_t > want / 3.0 && cs.rate_estimate_t < want * 3.0, "{} vs {want}", cs.rate_estimate_t);
}

#[test]
fn rank_one_shift_on_critical_transport_moves_one_zero() {
    let p = transport_problem(&TransportSpec { n: 4, alpha: 0.0, c: 1.0, quadrature: Default::default() }).unwrap();
    let h = p.build_h();
    // H = diag(I, −I)·M, so ker M = ker H
    let svd = p.build_m().svd(false, true);
    let (imin, _) = svd.singular_values.argmin();
    let v = svd.v_t.unwrap().row(imin).transpose();
    let v = Mat::from_column_slice(8, 1, v.as_slice());
    let u = &v / v.norm_squared();
    let shifted = classical_shift(h.matrix(), &v, &u, 1.0).unwrap();
    let before = dense::eigenvalues(h.matrix()).unwrap().sorted_by_real_desc();
    let after = dense::eigenvalues(&shifted).unwrap().sorted_by_real_desc();
    let norm = h.matrix().norm();
    // the eigenvalue 1 appears; the double zero loses exactly one copy
    assert!(after.iter().any(|z| (z - Complex::new(1.0, 0.0)).norm() < 1e-6));
    let zeros_after = after.iter().filter(|z| z.norm() < 1e-6 * norm).count();
    assert_eq!(zeros_after, 1, "{after:?}");
    // the three nonzero antistable eigenvalues are untouched
    for z in &before[..3] {
        assert!(after.iter().any(|w| (w - z).norm() < 1e-8 * norm), "{z} missing");
    }
}

#[test]
fn scalar_nare_residual_at_quadratic_root() {
    let (a, b, c, d) = (2.0f64, 1.0, 1.0, 2.0);
    let x = ((a + d) - ((a + d) * (a + d) - 4.0 * b * c).sqrt()) / (2.0 * c);
    let p = NareProblem::new(
        Mat::from_element(1, 1, a),
        Mat::from_element(1, 1, b),
        Mat::from_element(1, 1, c),
        Mat::from_element(1, 1, d),
    )
    .unwrap();
    let xm = Mat::from_element(1, 1, x);
    assert!(p.residual(&xm).unwrap()[(0, 0)].abs() < 1e-15);
    assert!(p.relative_residual(&xm).unwrap() < 1e-15);
    assert!(p.build_h().verify_invariant_pair(&xm).unwrap() <= 1e-15);
    let out = sda_solve(&p, &SdaConfig::default()).unwrap();
    assert!((out.x[(0, 0)] - x).abs() < 1e-14);
}

#[test]
fn reverse_engineered_problem_recovers_x0() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let x0 = Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.2));
    let a = Mat::identity(n, n) * 4.0 - Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.3));
    let d = Mat::identity(n, n) * 4.0 - Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.3));
    let c = Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.3));
    let p = reverse_engineered_problem(&x0, &a, &c, &d).unwrap();
    let r = p.residual(&x0).unwrap().norm();
    let scale = p.b().norm() + (p.a() * &x0).norm() + (&x0 * p.d()).norm();
    assert!(r <= 1e-13 * scale, "{r}");
    assert!(p.relative_residual(&x0).unwrap() <= 1e-14);
}

#[test]
fn invariant_pair_defect_equals_scaled_residual() {
    let p = transport(8, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = rand_mat(&mut rng, 8, 8);
    let defect = p.build_h().verify_invariant_pair(&x).unwrap();
    let want = p.residual(&x).unwrap().norm() / p.build_h().matrix().norm();
    assert!(defect > 0.0 && (defect - want).abs() <= 1e-14 * want);

    let p = transport(32, 1e-3);
    let x = sda_solve(&p, &SdaConfig::default()).unwrap().x;
    assert!(p.build_h().verify_invariant_pair(&x).unwrap() <= 1e-12);
}

#[test]
fn gamma_star_matches_diagonal_scan() {
    let p = transport(4, 1e-3);
    let mut g = f64::NEG_INFINITY;
    for i in 0..4 {
        g = g.max(p.a()[(i, i)]).max(p.d()[(i, i)]);
    }
    assert_eq!(p.gamma_star(), g);
}

#[test]
fn sep_of_nilpotent_pair_is_below_gap() {
    // gap between σ([[0,100],[0,0]]) and σ([0]) is 0, and sep must be 0 too
    let m = Mat::from_row_slice(2, 2, &[0.0, 100.0, 0.0, 0.0]);
    let n = Mat::zeros(1, 1);
    assert!(sep_f(&m, &n).unwrap() < 1e-12);
    // shifting N away: sep is far below the eigenvalue gap of 1
    let n = Mat::from_element(1, 1, 1.0);
    let sep = sep_f(&m, &n).unwrap();
    assert!(sep < 0.011 && sep > 0.0, "{sep}");
}

#[test]
fn sep_of_symmetric_blocks_equals_eigenvalue_distance() {
    let h = Mat::from_row_slice(4, 4, &[
        2.0, 1.0, 0.0, 0.0, //
        1.0, 2.0, 0.0, 0.0, //
        0.0, 0.0, -1.0, 0.5, //
        0.0, 0.0, 0.5, -1.0,
    ]);
    let basis = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let rs = relsep_of_subspace(&h, &basis).unwrap();
    // eigenvalues {1, 3} and {-1.5, -0.5}: closest pair distance 1.5, ‖H‖₂ = 3
    assert!((rs - 0.5).abs() < 1e-12, "{rs}");
}

#[test]
fn shifted_relsep_of_solution_subspace() {
    let p = transport(4, 1e-3);
    let h = p.build_h();
    let x = sda_solve(&p, &SdaConfig::default()).unwrap().x;
    let cs = compute_central_pair(h.matrix(), 2, &IterationConfig::default()).unwrap();
    let mut xi: Vec<f64> = dense::eigenvalues(h.matrix()).unwrap().values.iter().map(|z| z.norm()).collect();
    xi.sort_by(f64::total_cmp);
    let hs = build_shifted_h(&h, &cs.v, &cs.u, xi[2] / xi[0] - 1.0).unwrap();
    let r = relsep_of_subspace(hs.matrix(), &graph_basis(&x).unwrap()).unwrap();
    assert!((r - 2.3e-2).abs() < 1e-3, "{r}");
}

#[test]
fn subspace_distance_of_rotated_line() {
    let t = std::f64::consts::FRAC_PI_6;
    let a = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
    let b = Mat::from_column_slice(2, 1, &[t.cos(), t.sin()]);
    assert!((subspace_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn cond_uv_of_lines_is_secant() {
    let t = 0.7f64;
    let v = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
    let u = Mat::from_column_slice(2, 1, &[t.cos(), t.sin()]);
    assert!((cond_uv(&u, &v).unwrap() - 1.0 / t.cos()).abs() < 1e-14);
}

#[test]
fn perturbed_solution_obeys_graph_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 3;
    let a = Mat::identity(n, n) * 3.0 - Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.5));
    let d = Mat::identity(n, n) * 3.0 - Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.5));
    let b = Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.5));
    let c = Mat::from_fn(n, n, |_, _| rng.gen_range(0.0..0.5));
    let p = NareProblem::new(a.clone(), b.clone(), c.clone(), d.clone()).unwrap();
    let pt = NareProblem::new(a, b.add_scalar(1e-5), c, d).unwrap();
    let x = sda_solve(&p, &SdaConfig::default()).unwrap().x;
    let xt = sda_solve(&pt, &SdaConfig::default()).unwrap().x;
    let w = graph_basis(&x).unwrap();
    let wt = graph_basis(&xt).unwrap();
    let dist = (&w * w.transpose() - &wt * wt.transpose()).norm();
    assert!((&x - &xt).norm() <= solution_distance_bound(&x, &xt, dist).unwrap() * (1.0 + 1e-12));
}

#[test]
fn dominant_random_problem_converges_quickly() {
    let p = random_mnare(&RandomMnareSpec { n: 10, alpha: 1e3, seed: 4 }).unwrap();
    let out = sda_solve(&p, &SdaConfig::default()).unwrap();
    assert!(out.steps <= 8, "{}", out.steps);
}

#[test]
fn random_m_matrix_smallest_eigenvalue_is_alpha() {
    for alpha in [1e-1, 1e-3] {
        let p = random_mnare(&RandomMnareSpec { n: 6, alpha, seed: 3 }).unwrap();
        let min_re = dense::eigenvalues(&p.build_m()).unwrap().values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        assert!(min_re > 0.0 && min_re <= alpha * (1.0 + 1e-8), "{min_re}");
        assert_eq!(classify_mmatrix(&p.build_m()).unwrap().tag, MMatrixTag::NonsingularM);
    }
}

#[test]
fn generators_are_deterministic() {
    let a = random_mnare(&RandomMnareSpec { n: 7, alpha: 1e-3, seed: 42 }).unwrap();
    let b = random_mnare(&RandomMnareSpec { n: 7, alpha: 1e-3, seed: 42 }).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let c = random_mnare(&RandomMnareSpec { n: 7, alpha: 1e-3, seed: 43 }).unwrap();
    assert_ne!(a.a(), c.a());
}

#[test]
fn problem_roundtrips_through_json_and_matrix_market() {
    let p = random(4, 8);
    let q = NareProblem::from_json(&p.to_json().unwrap()).unwrap();
    assert_eq!(p.a(), q.a());
    assert_eq!(p.metadata, q.metadata);
    let dir = std::env::temp_dir().join(format!("nare-mm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    p.write_mm_bundle(&dir).unwrap();
    let r = NareProblem::load(&dir).unwrap();
    for (x, y) in [(p.a(), r.a()), (p.b(), r.b()), (p.c(), r.c()), (p.d(), r.d())] {
        assert_eq!(x, y);
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn eigensolver_recovers_when_francis_sweep_cycles() {
    // plain Francis QR cycles on this 12x12 H without converging
    let p = random_mnare(&RandomMnareSpec { n: 6, alpha: 10f64.powf(-3.544373728200874), seed: 10351190216406011604 })
        .unwrap();
    let h = p.build_h();
    let eig = dense::eigenvalues(h.matrix()).unwrap().values;
    assert_eq!(eig.len(), 12);
    let trace: f64 = (0..12).map(|i| h.matrix()[(i, i)]).sum();
    let sum: Complex = eig.iter().sum();
    assert!((sum.re - trace).abs() <= 1e-10 * h.matrix().norm() && sum.im.abs() <= 1e-10);
}
