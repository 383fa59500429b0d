use cartan_core::algebra::{expm, Mat};
use cartan_core::coframing::{builtin_coframing, mc_algebra, mc_group_element, Chart, Coframing};
use cartan_core::error::Error;
use cartan_core::expr::Expr;
use cartan_core::morphism::*;
use cartan_core::rolling::{builtin_surface, frame_bundle_se2};
use std::f64::consts::PI;

/// Coframing with ω' = B ω for a constant matrix B.
fn rotated(cof: &Coframing, b: &Mat) -> Coframing {
    let n = cof.dim();
    let omega = (0..n)
        .map(|i| (0..n).map(|j| Expr::linear_combination(&(0..n).map(|k| (b[(i, k)], cof.omega[k][j].clone())).collect::<Vec<_>>())).collect())
        .collect();
    Coframing::new("changed", cof.chart.clone(), omega, None).unwrap()
}

fn constant_coframing(c: &Mat) -> Coframing {
    let n = c.nrows();
    let omega = (0..n).map(|i| (0..n).map(|j| Expr::num(c[(i, j)])).collect()).collect();
    Coframing::new("const", Chart::unbounded(n), omega, None).unwrap()
}

/// Residual of A[u, v] = [Au, Av] over basis pairs.
fn lie_morphism_residual(name: &str, a: &Mat) -> f64 {
    let g = mc_algebra(name).unwrap();
    let n = g.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
            u[i] = 1.0;
            v[j] = 1.0;
            let lhs = a * g.bracket_coords(&u, &v);
            let au: Vec<f64> = (a * nalgebra::DVector::from_vec(u)).iter().copied().collect();
            let av: Vec<f64> = (a * nalgebra::DVector::from_vec(v)).iter().copied().collect();
            worst = worst.max((lhs - g.bracket_coords(&au, &av)).amax());
        }
    }
    worst
}

fn so3_conjugation() -> (Mat, Mat) {
    let g = mc_algebra("mc-so3").unwrap();
    let r = expm(&g.element(&[0.3, -0.5, 0.9])).unwrap();
    (g.adjoint(&r).unwrap(), r)
}

#[test]
fn identity_pairs_have_zero_obstruction() {
    for name in ["sin-example", "parabola", "mc-so3", "mc-heisenberg"] {
        let c = builtin_coframing(name).unwrap();
        let n = c.dim();
        let m: Vec<f64> = (0..n).map(|i| 0.3 - 0.2 * i as f64).collect();
        let r = hits_to_order(&c, &c, &Mat::identity(n, n), &m, &m, 3, 1e-8).unwrap();
        assert!(r.hits, "{name}: {:?}", r.norms);
        assert_eq!(r.norms.len(), 4);
        assert!(r.norms.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn lie_algebra_morphisms_have_zero_obstruction() {
    let (ad, _) = so3_conjugation();
    let se2 = mc_algebra("mc-se2").unwrap();
    let ad_se2 = se2.adjoint(&mc_group_element("mc-se2", &[0.4, -1.0, 0.7]).unwrap()).unwrap();
    let scale = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 1.0]));
    for (name, a) in [("mc-so3", ad), ("mc-se2", ad_se2), ("mc-heisenberg", scale)] {
        assert!(lie_morphism_residual(name, &a) < 1e-12, "{name} map is not a Lie morphism");
        let c = builtin_coframing(name).unwrap();
        for j in 0..=3 {
            let ob = obstruction(&c, &c, &a, &[0.0; 3], &[0.0; 3], j).unwrap();
            assert!(ob.norm < 1e-10, "{name} order {j}: {}", ob.norm);
        }
    }
}

#[test]
fn plane_and_sphere_differ_by_curvature() {
    let plane = builtin_coframing("mc-se2").unwrap();
    let sphere = frame_bundle_se2(&builtin_surface("sphere").unwrap()).unwrap();
    let ob = obstruction(&plane, &sphere, &Mat::identity(3, 3), &[0.0; 3], &[PI / 2.0, 0.2, 0.4], 0).unwrap();
    assert!((ob.norm - 1.0).abs() <= 1e-6, "{}", ob.norm);
    // the gap sits in the rotation component of T(e1, e2)
    assert!((ob.tensor.get(&[0, 1, 2]).abs() - 1.0).abs() <= 1e-6);
    let r = hits_to_order(&plane, &sphere, &Mat::identity(3, 3), &[0.0; 3], &[PI / 2.0, 0.2, 0.4], 1, 1e-3).unwrap();
    assert!(!r.hits);
    assert!(obstruction(&plane, &sphere, &Mat::identity(2, 3), &[0.0; 3], &[1.0, 0.0, 0.0], 0).is_err());
}

#[test]
fn flat_frame_change_hits_and_integrates_to_affine_map() {
    let c0 = Mat::from_row_slice(2, 2, &[1.0, 0.4, -0.2, 0.8]);
    let c1 = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.3, 2.0]);
    let b = Mat::from_row_slice(2, 2, &[0.9, -0.3, 0.6, 1.2]);
    let (f0, f1) = (constant_coframing(&c0), constant_coframing(&c1));
    let (m0, m1) = ([0.2, -0.1], [1.0, 2.0]);
    assert!(hits_to_order(&f0, &f1, &b, &m0, &m1, 3, 1e-8).unwrap().hits);
    let grid = integrate_morphism(&f0, &f1, &b, &m0, &m1, 0.5, 1e-8).unwrap();
    assert_eq!(grid.source.len(), 25);
    let lin = c1.clone().try_inverse().unwrap() * &b * &c0;
    for (x, y) in grid.source.iter().zip(&grid.target) {
        let want = nalgebra::DVector::from_column_slice(&m1) + &lin * (nalgebra::DVector::from_column_slice(x) - nalgebra::DVector::from_column_slice(&m0));
        assert!((nalgebra::DVector::from_column_slice(y) - want).amax() <= 1e-6);
    }
}

#[test]
fn identity_pair_integrates_to_identity() {
    let c = builtin_coframing("sin-example").unwrap();
    let grid = integrate_morphism(&c, &c, &Mat::identity(2, 2), &[0.5, 0.3], &[0.5, 0.3], 0.4, 1e-8).unwrap();
    for (x, y) in grid.source.iter().zip(&grid.target) {
        assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-12));
    }
}

#[test]
fn so3_conjugation_integrates_to_group_homomorphism() {
    let (ad, r) = so3_conjugation();
    let c = builtin_coframing("mc-so3").unwrap();
    let g = mc_algebra("mc-so3").unwrap();
    let grid = integrate_morphism_grid(&c, &c, &ad, &[0.0; 3], &[0.0; 3], 0.3, 3, 1e-8).unwrap();
    let rinv = r.transpose();
    for ((u, x), y) in grid.normal.iter().zip(&grid.source).zip(&grid.target) {
        let gx = mc_group_element("mc-so3", x).unwrap();
        let gy = mc_group_element("mc-so3", y).unwrap();
        // normal coordinates are exponential coordinates at the identity
        assert!((&gx - expm(&g.element(u)).unwrap()).amax() <= 1e-7);
        assert!((gy - &r * gx * &rinv).amax() <= 1e-7);
    }
}

#[test]
fn obstructed_pair_is_refused() {
    let plane = builtin_coframing("mc-se2").unwrap();
    let sphere = frame_bundle_se2(&builtin_surface("sphere").unwrap()).unwrap();
    let e = integrate_morphism(&plane, &sphere, &Mat::identity(3, 3), &[0.0; 3], &[1.5, 0.0, 0.0], 0.2, 1e-8).unwrap_err();
    assert!(matches!(e, Error::ObstructionTooLarge(_)));
}

#[test]
fn local_uniqueness() {
    let (ad, _) = so3_conjugation();
    let c = builtin_coframing("mc-so3").unwrap();
    let run = |m1: [f64; 3]| integrate_morphism_grid(&c, &c, &ad, &[0.1, 0.0, 0.0], &m1, 0.2, 3, 1e-8).unwrap();
    let base = run([0.0; 3]);
    let again = run([0.0; 3]);
    assert_eq!(base.target, again.target);
    let spread = |d: f64| {
        let g = run([d, -d, 0.5 * d]);
        g.target.iter().zip(&base.target).flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max) / d
    };
    let (a, b) = (spread(1e-3), spread(1e-4));
    assert!(a > 0.0 && b > 0.0 && a / b < 10.0 && b / a < 10.0, "{a} {b}");
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn obstruction_naturality(b in proptest::collection::vec(-0.4f64..0.4, 4), a in proptest::collection::vec(-1.0f64..1.0, 4), m in proptest::collection::vec(-0.8f64..0.8, 4)) {
            let b = Mat::identity(2, 2) + Mat::from_row_slice(2, 2, &b);
            let binv = b.clone().try_inverse().unwrap();
            let a = Mat::from_row_slice(2, 2, &a);
            let c0 = builtin_coframing("sin-example").unwrap();
            let c0b = rotated(&c0, &b);
            let c1 = builtin_coframing("parabola").unwrap();
            let (m0, m1) = ([m[0], m[1]], [m[2], 1.0 + m[3]]);
            for j in 0..=1 {
                let ob = obstruction(&c0, &c1, &a, &m0, &m1, j).unwrap();
                let obb = obstruction(&c0b, &c1, &(&a * &binv), &m0, &m1, j).unwrap();
                let mut want = ob.tensor.clone();
                for k in 1..want.rank() {
                    want = want.map_slot(k, &binv.transpose());
                }
                let err = obb.tensor.sub(&want).norm();
                prop_assert!(err <= 1e-8 * want.norm().max(1.0), "order {}: {}", j, err);
            }
        }
    }
}
