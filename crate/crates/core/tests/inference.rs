use nalgebra::{DMatrix, DVector};
use oadlab::design::{InfoMatrix, InfoScale};
use oadlab::inference::{chi2_test, ellipsoid_log_volume, fit_mle, FitResult};
use oadlab::road::PointBuffer;
use oadlab::{ErrorDraw, ErrorModel, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn simulate(
    err: &ErrorModel,
    features: &[DVector<f64>],
    counts: &[usize],
    beta: &DVector<f64>,
    seed: u64,
) -> Vec<PointBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    features
        .iter()
        .zip(counts)
        .map(|(f, &n)| {
            let mut b = PointBuffer::default();
            for d in err.sample(n, &mut rng) {
                b.y.push(f.dot(beta) + d.epsilon);
                if let Some(a) = d.ancillary {
                    b.a.push(a);
                }
            }
            b
        })
        .collect()
}

fn loglik(err: &ErrorModel, features: &[DVector<f64>], bufs: &[PointBuffer], beta: &DVector<f64>) -> f64 {
    let mut l = 0.0;
    for (f, b) in features.iter().zip(bufs) {
        for (k, &y) in b.y.iter().enumerate() {
            l += err.log_density(&ErrorDraw { epsilon: y - f.dot(beta), ancillary: b.a.get(k).copied() });
        }
    }
    l
}

#[test]
fn normal_errors_give_least_squares() {
    let spec = ModelSpec::quadratic(2).unwrap();
    let features: Vec<_> = spec.features().to_vec();
    let counts: Vec<usize> = (0..9).map(|i| 2 + i % 3).collect();
    let beta = DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3, -1.0, 0.7]);
    let bufs = simulate(&ErrorModel::Normal, &features, &counts, &beta, 8);
    let fit = fit_mle(&ErrorModel::Normal, &features, &bufs, 1e-8).unwrap();

    // stacked design matrix over every observation
    let rows: Vec<(&DVector<f64>, f64)> =
        features.iter().zip(&bufs).flat_map(|(f, b)| b.y.iter().map(move |&y| (f, y))).collect();
    let x = DMatrix::from_fn(rows.len(), 6, |i, k| rows[i].0[k]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let xtx = x.transpose() * &x;
    let ols = xtx.clone().lu().solve(&(x.transpose() * y)).unwrap();
    assert!((&fit.beta_hat - &ols).amax() < 1e-9);
    assert!((&fit.j.entries - &xtx).amax() < 1e-9);
}

#[test]
fn treatment_estimates_are_point_estimates() {
    let err = ErrorModel::student_t(1.0).unwrap();
    let spec = ModelSpec::treatment(3).unwrap();
    let features = spec.features().to_vec();
    let bufs = simulate(&err, &features, &[5, 7, 9], &DVector::from_vec(vec![1.0, 2.0, 3.0]), 2);
    let fit = fit_mle(&err, &features, &bufs, 1e-8).unwrap();
    assert!((&fit.beta_hat - &fit.eta_hat).amax() < 1e-12);
}

/// Repeated zoom of a full tensor grid around the best point.
fn grid_search(f: impl Fn(&DVector<f64>) -> f64, centre: DVector<f64>, mut half: f64, levels: usize) -> DVector<f64> {
    let p = centre.len();
    let k = 11usize;
    let mut best = centre;
    for _ in 0..levels {
        let mut top = (f64::NEG_INFINITY, best.clone());
        let total = k.pow(p as u32);
        for idx in 0..total {
            let mut b = best.clone();
            let mut r = idx;
            for j in 0..p {
                let step = (r % k) as f64 / (k - 1) as f64;
                b[j] += half * (2.0 * step - 1.0);
                r /= k;
            }
            let v = f(&b);
            if v > top.0 {
                top = (v, b);
            }
        }
        best = top.1;
        half *= 0.3;
    }
    best
}

#[test]
fn student_mle_matches_grid_search() {
    let err = ErrorModel::student_t(1.0).unwrap();
    let spec = ModelSpec::interaction(2).unwrap();
    let features = spec.features().to_vec();
    let beta = DVector::from_vec(vec![0.5, 1.0, -1.0, 0.25]);
    let bufs = simulate(&err, &features, &[10; 4], &beta, 40);
    let fit = fit_mle(&err, &features, &bufs, 1e-8).unwrap();
    let oracle = grid_search(|b| loglik(&err, &features, &bufs, b), beta.clone(), 4.0, 12);
    assert!((&fit.beta_hat - &oracle).amax() < 1e-3, "{} vs {}", fit.beta_hat, oracle);
}

#[test]
fn overdetermined_fit_is_a_likelihood_maximum() {
    // more support points than parameters: the full-likelihood path
    for err in [ErrorModel::student_t(2.0).unwrap(), ErrorModel::gamma_hyperbola(0.5).unwrap()] {
        let spec = ModelSpec::quadratic(1).unwrap();
        let features: Vec<_> = spec.features().to_vec();
        let extra = features.iter().cloned().chain(std::iter::once(features[1].clone())).collect::<Vec<_>>();
        let beta = DVector::from_vec(vec![1.0, 2.0, -3.0]);
        let bufs = simulate(&err, &extra, &[12, 12, 12, 12], &beta, 17);
        let fit = fit_mle(&err, &extra, &bufs, 1e-8).unwrap();
        assert!(fit.converged);
        let l0 = loglik(&err, &extra, &bufs, &fit.beta_hat);
        let oracle = grid_search(|b| loglik(&err, &extra, &bufs, b), fit.beta_hat.clone(), 0.05, 10);
        assert!(l0 >= loglik(&err, &extra, &bufs, &oracle) - 1e-9, "{err}");
    }
}

#[test]
fn ellipsoid_examples() {
    let v = ellipsoid_log_volume(&DMatrix::identity(2, 2), 0.05).unwrap();
    assert!((v - (PI * 5.991464547107979).ln()).abs() < 1e-9);

    let j = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 4.0]);
    let a = ellipsoid_log_volume(&j, 0.05).unwrap();
    let b = ellipsoid_log_volume(&(&j * 4.0), 0.05).unwrap();
    assert!((a - b - 3.0 * 2f64.ln()).abs() < 1e-12);

    // treatment s=4, Normal, 25 observations per point: J = 25 I
    let q: f64 = 9.487729036781154;
    let want = (PI * PI / 2.0).ln() + 2.0 * q.ln() - 2.0 * 25f64.ln();
    let got = ellipsoid_log_volume(&(DMatrix::identity(4, 4) * 25.0), 0.05).unwrap();
    assert!((got - want).abs() < 1e-9);

    assert!(ellipsoid_log_volume(&DMatrix::zeros(2, 2), 0.05).is_err());
}

fn fit_with(beta: Vec<f64>, j: DMatrix<f64>) -> FitResult {
    let p = beta.len();
    FitResult {
        beta_hat: DVector::from_vec(beta),
        j: InfoMatrix { entries: j, scale: InfoScale::TotalObserved },
        eta_hat: DVector::zeros(p),
        info: vec![0.0; p],
        converged: true,
        loglik: 0.0,
        iterations: 0,
    }
}

#[test]
fn chi2_examples() {
    let c = DVector::from_vec(vec![1.0]);
    let t = chi2_test(&fit_with(vec![0.5], DMatrix::from_element(1, 1, 16.0)), &c, 0.0, 0.05).unwrap();
    assert!((t.statistic - 4.0).abs() < 1e-12);
    assert!((t.c_value - 16.0).abs() < 1e-12);
    assert!((t.critical - 3.841458820694124).abs() < 1e-9);
    assert!(t.reject);

    let c = DVector::from_vec(vec![1.0, -1.0]);
    let t = chi2_test(&fit_with(vec![2.0, 1.5], DMatrix::identity(2, 2)), &c, 0.5, 0.05).unwrap();
    assert_eq!(t.statistic, 0.0);
    assert!(!t.reject);

    assert!(chi2_test(&fit_with(vec![0.0, 0.0], DMatrix::identity(2, 2)), &DVector::zeros(2), 0.0, 0.05).is_err());
}

#[test]
fn information_floor_applies_per_point() {
    let err = ErrorModel::student_t(1.0).unwrap();
    let spec = ModelSpec::treatment(2).unwrap();
    let features = spec.features().to_vec();
    let bufs = vec![PointBuffer { y: vec![-1.0, 1.0], a: vec![] }, PointBuffer { y: vec![0.0, 0.1, -0.1], a: vec![] }];
    let fit = fit_mle(&err, &features, &bufs, 0.25).unwrap();
    assert_eq!(fit.info[0], 0.25);
    assert!(fit.info[1] > 0.25);
}

#[test]
fn shape_errors() {
    let err = ErrorModel::Normal;
    let spec = ModelSpec::treatment(2).unwrap();
    let features = spec.features().to_vec();
    assert!(fit_mle(&err, &features, &[PointBuffer::default()], 1e-8).is_err());
    let bufs = vec![PointBuffer { y: vec![1.0], a: vec![] }, PointBuffer::default()];
    assert!(fit_mle(&err, &features, &bufs, 1e-8).is_err());
    // support too small for the parameter count
    let q = ModelSpec::quadratic(1).unwrap();
    let few = q.features()[..2].to_vec();
    let bufs = vec![PointBuffer { y: vec![1.0], a: vec![] }; 2];
    assert!(fit_mle(&err, &few, &bufs, 1e-8).is_err());
}
