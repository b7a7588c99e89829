use nalgebra::{DMatrix, DVector};
use oadlab::design::{get_certificate, info_matrix, sensitivities, sensitivity};
use oadlab::{Criterion, Design, ModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// ψ = 1/Ψ along (1-α)M + α f fᵀ, differentiated at α = 0.
fn directional_oracle(crit: &Criterion, m: &DMatrix<f64>, f: &DVector<f64>) -> f64 {
    let psi = |a: f64| 1.0 / crit.value(&(m * (1.0 - a) + f * f.transpose() * a)).unwrap();
    // M is interior, so small negative α is admissible; Richardson on the central difference
    let c = |h: f64| (psi(h) - psi(-h)) / (2.0 * h);
    let h = 1e-3;
    (4.0 * c(0.5 * h) - c(h)) / 3.0
}

#[test]
fn info_matrix_examples() {
    let t4 = ModelSpec::treatment(4).unwrap();
    let m = info_matrix(&t4, &Design::uniform(vec![0, 1, 2, 3])).entries;
    assert_eq!(m, DMatrix::from_diagonal_element(4, 4, 0.25));

    let q1 = ModelSpec::quadratic(1).unwrap();
    let m = info_matrix(&q1, &Design::uniform(vec![0, 1, 2])).entries;
    // moments of x over {0, ½, 1}: E1 = ½, E2 = 5/12, E3 = 3/8, E4 = 17/48
    let (e1, e2, e3, e4) = (0.5, 5.0 / 12.0, 3.0 / 8.0, 17.0 / 48.0);
    let want = DMatrix::from_row_slice(3, 3, &[1.0, e1, e2, e1, e2, e3, e2, e3, e4]);
    assert!((m - want).amax() < 1e-15);

    let single = info_matrix(&q1, &Design { support: vec![2], weights: vec![1.0] }).entries;
    assert_eq!(single.rank(1e-12), 1);
}

#[test]
fn criterion_values() {
    let i2 = DMatrix::<f64>::identity(2, 2);
    assert!(close(Criterion::D.value(&i2).unwrap(), 1.0, 1e-15));
    let q = DMatrix::from_diagonal_element(4, 4, 0.25);
    assert!(close(Criterion::D.value(&q).unwrap(), 0.25, 1e-15));
    assert!(close(Criterion::A.value(&q).unwrap(), 1.0 / 16.0, 1e-15));
    let c = Criterion::c(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(close(c.value(&q).unwrap(), 0.25, 1e-15));
    // singular M: D returns 0, A refuses
    let sing = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    assert_eq!(Criterion::D.value(&sing).unwrap(), 0.0);
    assert!(Criterion::A.value(&sing).is_err());
    // |M|^{1/2} reporting scale
    assert!(close(Criterion::D.report_value(&q).unwrap(), 1.0 / 16.0, 1e-15));
}

fn random_spd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p + 2, |_, _| rng.random::<f64>() - 0.5);
    &a * a.transpose() + DMatrix::identity(p, p) * 0.05
}

#[test]
fn homogeneity_and_concavity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let crits = [Criterion::D, Criterion::A, Criterion::c(vec![1.0, -2.0, 0.5, 1.0]).unwrap()];
    for _ in 0..200 {
        let m1 = random_spd(&mut rng, 4);
        let m2 = random_spd(&mut rng, 4);
        let lam: f64 = rng.random();
        let t = 0.1 + 5.0 * rng.random::<f64>();
        for crit in &crits {
            let v1 = crit.value(&m1).unwrap();
            let v2 = crit.value(&m2).unwrap();
            assert!(close(crit.value(&(&m1 * t)).unwrap(), t * v1, 1e-12));
            let mix = crit.value(&(&m1 * lam + &m2 * (1.0 - lam))).unwrap();
            assert!(mix >= lam * v1 + (1.0 - lam) * v2 - 1e-10, "{crit}");
        }
    }
}

#[test]
fn sensitivity_examples() {
    let t4 = ModelSpec::treatment(4).unwrap();
    let uniform = Design::uniform(vec![0, 1, 2, 3]);
    for x in 0..4 {
        assert!(sensitivity(&Criterion::D, &t4, &uniform, x).unwrap().abs() < 1e-14);
    }
    let t2 = ModelSpec::treatment(2).unwrap();
    let skewed = Design { support: vec![0, 1], weights: vec![0.9, 0.1] };
    assert!(sensitivity(&Criterion::D, &t2, &skewed, 1).unwrap() < 0.0);

    let d = Design { support: vec![0, 1], weights: vec![0.75, 0.25] };
    let m = info_matrix(&t2, &d).entries;
    for x in 0..2 {
        let want = directional_oracle(&Criterion::D, &m, t2.feature(x));
        let got = sensitivity(&Criterion::D, &t2, &d, x).unwrap();
        assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "x={x}: {got} vs {want}");
    }
}

#[test]
fn sensitivities_match_directional_derivatives_on_random_designs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = ModelSpec::quadratic(2).unwrap();
    let crits = [Criterion::D, Criterion::A, Criterion::c(vec![1.0, 1.0, 0.0, 0.5, 0.0, -1.0]).unwrap()];
    for _ in 0..20 {
        let raw: Vec<f64> = (0..9).map(|_| 0.05 + rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let design = Design { support: (0..9).collect(), weights: raw.iter().map(|w| w / total).collect() };
        let m = info_matrix(&spec, &design).entries;
        for crit in &crits {
            let phi = sensitivities(crit, &spec, &design).unwrap();
            for (x, &got) in phi.iter().enumerate() {
                let want = directional_oracle(crit, &m, spec.feature(x));
                assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{crit} x={x}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn certificates() {
    let t6 = ModelSpec::treatment(6).unwrap();
    let cert = get_certificate(&Criterion::D, &t6, &Design::uniform((0..6).collect()), 1e-8).unwrap();
    assert!(cert.optimal);

    let t2 = ModelSpec::treatment(2).unwrap();
    let d = Design { support: vec![0, 1], weights: vec![0.6, 0.4] };
    let cert = get_certificate(&Criterion::D, &t2, &d, 1e-8).unwrap();
    assert!(!cert.optimal);
    // the second treatment, 0-based index 1
    assert_eq!(cert.worst_point, 1);

    let q1 = ModelSpec::quadratic(1).unwrap();
    let cert = get_certificate(&Criterion::D, &q1, &Design::uniform(vec![0, 1, 2]), 1e-10).unwrap();
    assert!(cert.optimal);
}

#[test]
fn uniform_is_best_on_a_simplex_grid_for_quadratic_line() {
    // brute-force det over a fine simplex grid on {0, ½, 1}
    let q1 = ModelSpec::quadratic(1).unwrap();
    let mut best = (0.0, 0.0, 0.0);
    let steps = 300;
    for i in 1..steps {
        for j in 1..steps - i {
            let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
            let d = Design { support: vec![0, 1, 2], weights: vec![a, b, 1.0 - a - b] };
            let v = Criterion::D.value(&info_matrix(&q1, &d).entries).unwrap();
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    assert!((best.1 - 1.0 / 3.0).abs() < 0.01 && (best.2 - 1.0 / 3.0).abs() < 0.01);
}

#[test]
fn criterion_parsing() {
    assert_eq!(Criterion::parse("D").unwrap(), Criterion::D);
    assert_eq!(Criterion::parse("A").unwrap(), Criterion::A);
    assert_eq!(Criterion::parse("c:[1, 2]").unwrap(), Criterion::c(vec![1.0, 2.0]).unwrap());
    assert!(Criterion::parse("c:[0,0]").is_err());
    assert!(Criterion::parse("E").is_err());
}
