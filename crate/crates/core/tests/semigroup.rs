use approx::assert_relative_eq;
use levyflat::hilbert::{GridSpace, HVector};
use levyflat::spde::Semigroup;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<HVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| HVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect()
}

fn tridiagonal(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i as i64 - j as i64 {
        0 => -2.0,
        1 => 0.7,
        -1 => 1.3,
        _ => 0.0,
    })
}

#[test]
fn law_holds_for_identity_and_matrix_generators() {
    let space = GridSpace::chebyshev(12, 5.0, "xi").unwrap();
    let vs = random_vectors(12, 10, 1);
    let semigroups = [
        Semigroup::identity(&space),
        Semigroup::matrix_generator(&space, tridiagonal(12)).unwrap(),
        Semigroup::matrix_generator(&space, DMatrix::from_fn(12, 12, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2))
            .unwrap(),
    ];
    for s in &semigroups {
        for (t, u) in [(0.1, 0.2), (0.5, 0.5), (1.0, 0.25), (0.03, 1.7)] {
            assert!(s.law_defect(t, u, &vs).unwrap() < 1e-8, "{:?} at ({t}, {u})", s.kind());
        }
        for v in &vs {
            assert_eq!(&s.apply(0.0, v).unwrap(), v);
        }
    }
}

#[test]
fn pseudo_contractivity_on_random_vectors() {
    let cheb = GridSpace::chebyshev(32, 10.0, "xi").unwrap();
    let semigroups = [
        Semigroup::identity(&cheb),
        Semigroup::matrix_generator(&cheb, tridiagonal(32)).unwrap(),
        Semigroup::shift(&cheb).unwrap(),
    ];
    let vs = random_vectors(32, 50, 2);
    for s in &semigroups {
        for t in [0.1, 0.5, 1.0] {
            let bound = (s.beta() * t).exp();
            for v in &vs {
                let lhs = cheb.norm(&s.apply(t, v).unwrap());
                assert!(lhs <= bound * cheb.norm(v) + 1e-8, "{:?}: t = {t}", s.kind());
            }
        }
    }
}

#[test]
fn matrix_generator_minus_identity_scales_by_e() {
    let space = GridSpace::euclidean(4).unwrap();
    let s = Semigroup::matrix_generator(&space, -DMatrix::identity(4, 4)).unwrap();
    let v = HVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
    let out = s.apply(1.0, &v).unwrap();
    for i in 0..4 {
        assert_relative_eq!(out[i], (-1.0f64).exp() * v[i], max_relative = 1e-14);
    }
}

#[test]
fn shift_reproduces_constants_and_linear_data() {
    let space = GridSpace::chebyshev(40, 10.0, "xi").unwrap();
    let s = Semigroup::shift(&space).unwrap();
    let ones = space.sample(|_| 1.0);
    for t in [0.1, 0.3, 2.0, 25.0] {
        let out = s.apply(t, &ones).unwrap();
        assert!(out.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }
    let lin = space.sample(|x| x);
    let out = s.apply(0.3, &lin).unwrap();
    for (i, &x) in space.points().iter().enumerate() {
        let expected = if x + 0.3 <= 10.0 { x + 0.3 } else { 10.0 };
        assert_relative_eq!(out[i], expected, epsilon = 1e-12);
    }
}

#[test]
fn shift_law_defect_shrinks_under_refinement() {
    let f = |x: f64| 0.04 - 0.02 * (-x / 2.0).exp() + 0.1 * (0.7 * x).sin() * (-0.1 * x).exp();
    let defect = |n: usize| {
        let space = GridSpace::chebyshev(n, 10.0, "xi").unwrap();
        let s = Semigroup::shift(&space).unwrap();
        let v = space.sample(f);
        s.law_defect(0.37, 0.52, &[v]).unwrap()
    };
    let (d32, d64, d128) = (defect(32), defect(64), defect(128));
    assert!(d64 < 0.5 * d32, "{d32} -> {d64}");
    assert!(d128 < 0.5 * d64, "{d64} -> {d128}");
}

#[test]
fn negative_time_is_rejected() {
    let space = GridSpace::euclidean(3).unwrap();
    let err = Semigroup::identity(&space).apply(-0.1, &HVector::zeros(3)).unwrap_err();
    assert!(err.is_config());
}
