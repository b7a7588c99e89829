use nalgebra::{DMatrix, DVector};
use oadlab::design::info_matrix;
use oadlab::fod::{curvature_report, design_curvature, round_to_exact, solve_fod, v_star, HessianMethod};
use oadlab::{Criterion, Design, Error, ErrorModel, FodOptions, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn full_design(spec: &ModelSpec, w: &[f64]) -> Design {
    let support: Vec<usize> = (0..spec.num_candidates()).filter(|&i| w[i] > 0.0).collect();
    let weights = support.iter().map(|&i| w[i]).collect();
    Design { support, weights }
}

fn psi(spec: &ModelSpec, crit: &Criterion, w: &[f64]) -> f64 {
    crit.value(&info_matrix(spec, &full_design(spec, w)).entries).unwrap()
}

/// Classical multiplicative weight iteration on the full candidate set.
/// D: wᵢ ← wᵢ fᵢᵀM⁻¹fᵢ / p.  A: wᵢ ∝ wᵢ (fᵢᵀM⁻²fᵢ)^{1/2}.
fn multiplicative(spec: &ModelSpec, crit: &Criterion, iters: usize) -> Vec<f64> {
    let n = spec.num_candidates();
    let mut w = vec![1.0 / n as f64; n];
    for _ in 0..iters {
        let m = info_matrix(spec, &full_design(spec, &w)).entries;
        let minv = m.try_inverse().unwrap();
        let score: Vec<f64> = (0..n)
            .map(|i| {
                let f = spec.feature(i);
                let u = &minv * f;
                match crit {
                    Criterion::D => f.dot(&u),
                    _ => u.dot(&u).sqrt(),
                }
            })
            .collect();
        let total: f64 = w.iter().zip(&score).map(|(a, b)| a * b).sum();
        for (wi, s) in w.iter_mut().zip(&score) {
            *wi *= s / total;
        }
    }
    w
}

/// R* from an independently coded central-difference Hessian of Ψ in the
/// first d-1 weights.
fn r_star_oracle(psi_of: impl Fn(&[f64]) -> f64, w: &[f64]) -> f64 {
    let d = w.len();
    let m = d - 1;
    let h = 1e-4;
    let eval = |u: &[f64]| {
        let mut full = u.to_vec();
        full.push(1.0 - u.iter().sum::<f64>());
        psi_of(&full)
    };
    let base = &w[..m];
    let mut hess = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let at = |si: f64, sj: f64| {
                let mut u = base.to_vec();
                u[i] += si * h;
                u[j] += sj * h;
                eval(&u)
            };
            hess[(i, j)] = -(at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    // covariance of a one-hot indicator, first d-1 coordinates
    let mut cov = DMatrix::zeros(m, m);
    for k in 0..m {
        cov[(k, k)] += w[k];
    }
    let wv = DVector::from_column_slice(base);
    cov -= &wv * wv.transpose();
    (hess * cov).trace() / (2.0 * eval(base))
}

#[test]
fn treatment_optimum_is_uniform() {
    for crit in [Criterion::D, Criterion::A] {
        let spec = ModelSpec::treatment(5).unwrap();
        let r = solve_fod(&spec, &crit, None, &FodOptions::default()).unwrap();
        assert_eq!(r.design.d(), 5);
        for w in &r.design.weights {
            assert!((w - 0.2).abs() < 1e-9);
        }
        assert!(r.get_violation >= -1e-7);
    }
    let r = solve_fod(&ModelSpec::treatment(4).unwrap(), &Criterion::D, None, &FodOptions::default()).unwrap();
    assert!((r.criterion_value - 0.25).abs() < 1e-12);
}

#[test]
fn quadratic_line_d_optimum_is_thirds() {
    let spec = ModelSpec::quadratic(1).unwrap();
    let r = solve_fod(&spec, &Criterion::D, None, &FodOptions::default()).unwrap();
    assert_eq!(r.design.support, vec![0, 1, 2]);
    for w in &r.design.weights {
        assert!((w - 1.0 / 3.0).abs() < 1e-8);
    }
}

#[test]
fn solver_matches_multiplicative_algorithm() {
    for (model, crit) in [
        ("quadratic:1", Criterion::A),
        ("quadratic:2", Criterion::D),
        ("quadratic:2", Criterion::A),
        ("interaction:3", Criterion::D),
        ("interaction:3", Criterion::A),
    ] {
        let spec = ModelSpec::parse(model).unwrap();
        let r = solve_fod(&spec, &crit, None, &FodOptions::default()).unwrap();
        let w = multiplicative(&spec, &crit, 20_000);
        let oracle = psi(&spec, &crit, &w);
        assert!(r.criterion_value >= oracle * (1.0 - 1e-10), "{model} {crit}: {} < {oracle}", r.criterion_value);
        assert!((r.criterion_value / oracle - 1.0).abs() < 1e-6, "{model} {crit}");
    }
}

#[test]
fn no_random_design_beats_the_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = ModelSpec::quadratic(2).unwrap();
    for crit in [Criterion::D, Criterion::A] {
        let best = solve_fod(&spec, &crit, None, &FodOptions::default()).unwrap().criterion_value;
        for _ in 0..2000 {
            let raw: Vec<f64> = (0..9).map(|_| -rng.random::<f64>().ln()).collect();
            let t: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / t).collect();
            assert!(psi(&spec, &crit, &w) <= best * (1.0 + 1e-12));
        }
    }
}

#[test]
fn treatment_c_optimum_is_proportional_to_contrast() {
    // cᵀM⁻¹c = Σ cᵢ²/wᵢ is minimised at wᵢ ∝ |cᵢ|
    let c = vec![1.0, -2.0, 0.5, 1.5];
    let spec = ModelSpec::treatment(4).unwrap();
    let r = solve_fod(&spec, &Criterion::c(c.clone()).unwrap(), None, &FodOptions::default()).unwrap();
    let total: f64 = c.iter().map(|x: &f64| x.abs()).sum();
    for (&i, &w) in r.design.support.iter().zip(&r.design.weights) {
        assert!((w - c[i].abs() / total).abs() < 1e-8);
    }
    assert!((r.criterion_value - 1.0 / (total * total)).abs() < 1e-10);
}

#[test]
fn trace_is_monotone() {
    let spec = ModelSpec::quadratic(3).unwrap();
    let opts = FodOptions { record_trace: true, ..FodOptions::default() };
    for crit in [Criterion::D, Criterion::A] {
        let r = solve_fod(&spec, &crit, None, &opts).unwrap();
        assert!(r.trace.len() > 1);
        for pair in r.trace.windows(2) {
            assert!(pair[1] >= pair[0] * (1.0 - 1e-12), "{crit}: {} -> {}", pair[0], pair[1]);
        }
    }
}

#[test]
fn iteration_budget_reports_best_design() {
    let spec = ModelSpec::quadratic(4).unwrap();
    let opts = FodOptions { max_iter: 1, first_order_steps: 0, ..FodOptions::default() };
    match solve_fod(&spec, &Criterion::A, None, &opts) {
        Err(Error::NonConvergence { best, violation, .. }) => {
            assert!(violation < 0.0);
            assert!((best.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn rounding_examples() {
    let r = round_to_exact(&Design::uniform(vec![0, 1, 2, 3]), 16).unwrap();
    assert_eq!(r.counts, vec![4, 4, 4, 4]);
    let r = round_to_exact(&Design::uniform(vec![0, 1, 2]), 10).unwrap();
    assert_eq!(r.counts, vec![4, 3, 3]);
    let d = Design { support: vec![0, 1, 2], weights: vec![0.5, 0.3, 0.2] };
    assert_eq!(round_to_exact(&d, 7).unwrap().counts, vec![4, 2, 1]);
    let tiny = Design { support: vec![0, 1, 2], weights: vec![0.98, 0.01, 0.01] };
    assert_eq!(round_to_exact(&tiny, 5).unwrap().counts, vec![3, 1, 1]);
    assert!(matches!(round_to_exact(&Design::uniform(vec![0, 1, 2]), 2), Err(Error::InfeasibleRounding(_))));
}

#[test]
fn v_star_is_one_hot_covariance() {
    let w = [0.1, 0.25, 0.4, 0.25];
    let v = v_star(&w);
    assert_eq!(v.nrows(), 3);
    let mut cov = DMatrix::<f64>::zeros(3, 3);
    for (k, &wk) in w.iter().enumerate() {
        let mut e = DVector::<f64>::zeros(3);
        if k < 3 {
            e[k] = 1.0;
        }
        cov += &e * e.transpose() * wk;
    }
    let mean = DVector::from_column_slice(&w[..3]);
    cov -= &mean * mean.transpose();
    assert!((v.clone() - cov).amax() < 1e-15);
    let tr: f64 = w[..3].iter().map(|x| x * (1.0 - x)).sum();
    assert!((v.trace() - tr).abs() < 1e-15);
}

#[test]
fn treatment_curvature_closed_forms() {
    for s in 1..=9 {
        let spec = ModelSpec::treatment(s).unwrap();
        for (crit, want) in [(Criterion::D, (s as f64 - 1.0) / 2.0), (Criterion::A, s as f64 - 1.0)] {
            let fod = solve_fod(&spec, &crit, None, &FodOptions::default()).unwrap();
            for method in [HessianMethod::FiniteDifference, HessianMethod::Analytic] {
                let c = design_curvature(&spec, &crit, &fod.design, method).unwrap();
                assert!((c.r_star - want).abs() < 1e-5, "s={s} {crit} {method:?}: {}", c.r_star);
            }
        }
    }
}

#[test]
fn curvature_matches_independent_finite_differences() {
    for (model, crit) in [
        ("quadratic:1", Criterion::D),
        ("quadratic:2", Criterion::D),
        ("quadratic:2", Criterion::A),
        ("interaction:3", Criterion::D),
        ("interaction:4", Criterion::A),
    ] {
        let spec = ModelSpec::parse(model).unwrap();
        let fod = solve_fod(&spec, &crit, None, &FodOptions::default()).unwrap();
        let support = fod.design.support.clone();
        let psi_of = |w: &[f64]| {
            crit.value(&info_matrix(&spec, &Design { support: support.clone(), weights: w.to_vec() }).entries)
                .unwrap()
        };
        let want = r_star_oracle(psi_of, &fod.design.weights);
        let fd = design_curvature(&spec, &crit, &fod.design, HessianMethod::FiniteDifference).unwrap();
        let an = design_curvature(&spec, &crit, &fod.design, HessianMethod::Analytic).unwrap();
        assert!((fd.r_star - want).abs() < 1e-4 * want.max(1.0), "{model} {crit}: {} vs {want}", fd.r_star);
        assert!((an.r_star - want).abs() < 1e-4 * want.max(1.0), "{model} {crit}: {} vs {want}", an.r_star);
        let eig = an.h_star.clone().symmetric_eigenvalues();
        assert!(eig.min() >= -1e-9 * eig.max().max(1.0));
    }
}

#[test]
fn log_det_scale_gives_a_different_ratio() {
    // R* depends on the homogeneous scale of Ψ; log det is not homogeneous
    let spec = ModelSpec::treatment(4).unwrap();
    let w = [0.25; 4];
    let log_det = |w: &[f64]| {
        info_matrix(&spec, &Design { support: vec![0, 1, 2, 3], weights: w.to_vec() }).entries.determinant().ln()
    };
    let alt = r_star_oracle(log_det, &w);
    assert!((alt - 1.5).abs() > 0.1, "log-det variant {alt}");
}

#[test]
fn single_point_design_has_no_curvature() {
    let spec = ModelSpec::treatment(1).unwrap();
    let fod = solve_fod(&spec, &Criterion::D, None, &FodOptions::default()).unwrap();
    let c = design_curvature(&spec, &Criterion::D, &fod.design, HessianMethod::Auto).unwrap();
    assert_eq!(c.r_star, 0.0);
    assert_eq!(c.d, 1);
}

#[test]
fn non_optimal_design_is_rejected_or_flagged() {
    // off the optimum: a finite ratio or a curvature error, never NaN
    let spec = ModelSpec::treatment(3).unwrap();
    let d = Design { support: vec![0, 1, 2], weights: vec![0.7, 0.2, 0.1] };
    match design_curvature(&spec, &Criterion::D, &d, HessianMethod::FiniteDifference) {
        Ok(c) => assert!(c.r_star.is_finite()),
        Err(e) => assert!(matches!(e, Error::Curvature(_))),
    }
}

#[test]
fn curvature_report_scalars() {
    let spec = ModelSpec::treatment(4).unwrap();
    let fod = solve_fod(&spec, &Criterion::D, None, &FodOptions::default()).unwrap();
    let err = ErrorModel::student_t(1.0).unwrap();
    let r = curvature_report(&spec, &Criterion::D, &fod, &err, 200, HessianMethod::Auto).unwrap();
    assert!((r.r_star - 1.5).abs() < 1e-6);
    assert!((r.gamma_sq - 2.5).abs() < 1e-6);
    assert!((r.s_star - 1.0 / (1.0 - 2.5 * 1.5 / 200.0)).abs() < 1e-6);
    let m = &r.moments;
    let h = 1.0 + 4.0 / (2.0 * 200.0 * m.mu * m.mu) * (m.mu3 * m.mu3 / m.mu + m.mu4);
    assert!((r.h - h).abs() < 1e-12);

    let normal = curvature_report(&spec, &Criterion::D, &fod, &ErrorModel::Normal, 50, HessianMethod::Auto).unwrap();
    assert_eq!(normal.s_star, 1.0);

    assert!(matches!(
        curvature_report(&spec, &Criterion::D, &fod, &err, 3, HessianMethod::Auto),
        Err(Error::Curvature(_))
    ));
}
