use cartan_core::algebra::{affine_to_projective, builtin_model, euclid_to_affine, expm, geodesic_inclusion, Mat, ModelMorphism};
use cartan_core::cartan::*;
use cartan_core::coframing::{simpson, Chart};
use cartan_core::development::SourceCurve;
use cartan_core::expr::{parse, parse_in, Expr, Var};
use cartan_core::ode::Status;
use cartan_core::rolling::SurfaceMetric;
use cartan_core::tensor::Tensor;
use cartan_core::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn curve(src: &[&str]) -> SourceCurve {
    SourceCurve::Exprs(src.iter().map(|s| parse(s).unwrap()).collect())
}

fn euclid(s: &str) -> CartanGauge {
    builtin_gauge(&format!("euclid({s})")).unwrap()
}

/// Surface with Gauss curvature −2/(1 + x1²).
fn bump() -> SurfaceMetric {
    SurfaceMetric::from_strings("bump", Chart::unbounded(2), "1", "0", "(1 + x1^2)^2").unwrap()
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|k| f64::from(u8::from(k == i))).collect()
}

/// Value at (x, h) of the tensor function whose identity-section value is
/// level `j` of the tower, after flowing the constant field `b` for time `s`.
fn flowed_level(g: &CartanGauge, x: &[f64], b: &[f64], s: f64, j: usize) -> Tensor {
    let size = g.model.g.size;
    let b = b.to_vec();
    let tr = bundle_flow(g, move |_| Ok(b.clone()), x, &Mat::identity(size, size), (0.0, s), 1e-13).unwrap();
    assert!(tr.base.status.is_completed());
    let y = tr.base.last().to_vec();
    let h = tr.frames.last().unwrap();
    transport_tensor(&g.model, h, &curvature_tower(g, &y, j).unwrap().tensors[j]).unwrap()
}

/// Central differences of level j − 1 along every constant field.
fn fd_level(g: &CartanGauge, x: &[f64], j: usize) -> Tensor {
    let d = g.model.dim();
    let eps = 1e-4;
    let base = curvature_tower(g, x, j - 1).unwrap().tensors[j - 1].clone();
    let mut shape = base.shape.clone();
    shape.push(d);
    let mut out = Tensor::zeros(&shape);
    for c in 0..d {
        let e = unit(d, c);
        let minus: Vec<f64> = e.iter().map(|v| -v).collect();
        let fwd = flowed_level(g, x, &e, eps, j - 1);
        let bwd = flowed_level(g, x, &minus, eps, j - 1);
        for idx in base.indices() {
            let mut full = idx.clone();
            full.push(c);
            out.set(&full, (fwd.get(&idx) - bwd.get(&idx)) / (2.0 * eps));
        }
    }
    out
}

#[test]
fn builtin_flat_gauges_have_no_curvature() {
    for m in ["flat-R2(trivial)", "flat-R2(SO2)", "flat-R2(R+SO2)", "flat-R2(GLn)", "flat-R3(On)", "sphere-S2", "sl3-projective-point", "sl3-projective-pointed-line"] {
        let g = builtin_gauge(&format!("flat({m})")).unwrap();
        for x in g.chart.sample_grid(3) {
            let tower = curvature_tower(&g, &x, 2).unwrap();
            for t in &tower.tensors {
                assert!(t.norm() <= 1e-10, "{m} at {x:?}: {}", t.norm());
            }
        }
    }
    assert!(matches!(flat_gauge("nonsense"), Err(Error::UnknownModel(_))));
}

#[test]
fn round_sphere_curvature() {
    for (name, k) in [("sphere", 1.0), ("sphere(2)", 0.25)] {
        let g = euclid(name);
        for x in [[0.7, 0.0], [PI / 2.0, 1.3], [2.5, -4.0]] {
            let tower = curvature_tower(&g, &x, 2).unwrap();
            let k0 = &tower.tensors[0];
            assert_eq!(k0.shape, vec![3, 2, 2]);
            assert!((k0.get(&[0, 0, 1]) - k).abs() <= 1e-8, "{name}: {}", k0.get(&[0, 0, 1]));
            assert!((k0.get(&[0, 1, 0]) + k).abs() <= 1e-8);
            let mut rest = k0.clone();
            rest.set(&[0, 0, 1], 0.0);
            rest.set(&[0, 1, 0], 0.0);
            assert!(rest.norm() <= 1e-8, "torsion-free");
            assert!(tower.tensors[1].norm() <= 1e-6);
            assert!(tower.tensors[2].norm() <= 1e-6);
        }
    }
}

#[test]
fn curvature_matches_finite_difference_of_gamma() {
    // dγ_J on the soldering frame; the J row receives no brackets in se(2)
    let g = euclid_bump();
    let h = 1e-5;
    for x in [[0.3, 0.1], [-1.2, 2.0], [2.0, -0.5]] {
        let d = |k: usize, l: usize| {
            let mut p = x;
            p[k] += h;
            let mut m = x;
            m[k] -= h;
            (g.gamma_at(&p).unwrap()[(0, l)] - g.gamma_at(&m).unwrap()[(0, l)]) / (2.0 * h)
        };
        let curl = d(0, 1) - d(1, 0);
        let det = g.soldering_at(&x).unwrap().determinant();
        let k = curvature(&g, &x).unwrap();
        assert!((k.get(&[0, 0, 1]) - curl / det).abs() <= 1e-7);
        assert!((k.get(&[0, 0, 1]) + 2.0 / (1.0 + x[0] * x[0])).abs() <= 1e-8);
    }
}

fn euclid_bump() -> CartanGauge {
    riemannian_gauge(&bump()).unwrap()
}

#[test]
fn tower_matches_frame_flow_differences() {
    let cases: Vec<(CartanGauge, Vec<f64>)> = vec![
        (euclid_bump(), vec![0.4, -0.3]),
        (euclid_bump(), vec![-1.1, 0.8]),
        (builtin_gauge("projective(sphere)").unwrap(), vec![1.1, 0.4]),
        (disguise(&euclid_bump(), &euclid_to_affine(2).unwrap()).unwrap(), vec![0.5, 0.2]),
    ];
    for (g, x) in cases {
        let tower = curvature_tower(&g, &x, 2).unwrap();
        for j in 1..=2 {
            let fd = fd_level(&g, &x, j);
            let err = tower.tensors[j].sub(&fd).norm();
            assert!(err <= 1e-6, "{} level {j}: {err}", g.name);
        }
        assert!(tower.tensors[1].norm() > 1e-3 || g.name.contains("sphere"));
    }
}

/// γ' = Ad(h)⁻¹γ + h⁻¹dh for h = exp(φ(x) J) on a se(2) gauge.
fn gauge_change(g: &CartanGauge, phi: &str) -> CartanGauge {
    let phi_e = parse_in(phi, 2).unwrap();
    let m = g.model.g.adjoint(&g.model.h_exp(&[-PI / 2.0]).unwrap()).unwrap();
    let gamma = g.gamma();
    let cos = Expr::call(cartan_core::expr::Func::Cos, vec![phi_e.clone()]);
    let sin = Expr::call(cartan_core::expr::Func::Sin, vec![phi_e.clone()]);
    let mut out = gamma.clone();
    for k in 0..2 {
        out[0][k] = Expr::add(gamma[0][k].clone(), phi_e.diff(Var::X(k)));
        for r in 1..3 {
            let mut acc = Expr::mul(cos.clone(), gamma[r][k].clone());
            for s in 1..3 {
                acc = Expr::add(acc, Expr::mul(Expr::mul(Expr::num(m[(r, s)]), sin.clone()), gamma[s][k].clone()));
            }
            out[r][k] = acc;
        }
    }
    CartanGauge::new("changed", g.model.clone(), g.chart.clone(), out).unwrap()
}

#[test]
fn gauge_change_by_pure_h_form_keeps_curvature() {
    let phi = "0.3*sin(x1)*x2 + 0.5*x1^2";
    for (g, pts) in [(euclid("plane"), vec![[0.2, 0.1], [-1.0, 2.0]]), (euclid("sphere"), vec![[1.0, 0.3], [2.0, -1.0]])] {
        let g2 = gauge_change(&g, phi);
        for x in pts {
            let k = curvature(&g, &x).unwrap();
            let k2 = curvature(&g2, &x).unwrap();
            assert!(k2.sub(&k).norm() <= 1e-8, "{}", g.name);
            let f = parse_in(phi, 2).unwrap().eval(&x, 0.0).unwrap();
            let moved = transport_tensor(&g.model, &g.model.h_exp(&[f]).unwrap(), &k).unwrap();
            assert!(k2.sub(&moved).norm() <= 1e-8);
        }
    }
    // the changed gauge has a nonconstant tower on the bump, matched by transport
    let g = euclid_bump();
    let g2 = gauge_change(&g, phi);
    let x = [0.7, -0.4];
    let h = g.model.h_exp(&[parse_in(phi, 2).unwrap().eval(&x, 0.0).unwrap()]).unwrap();
    let t = curvature_tower(&g, &x, 2).unwrap();
    let t2 = curvature_tower(&g2, &x, 2).unwrap();
    for j in 0..=2 {
        let moved = transport_tensor(&g.model, &h, &t.tensors[j]).unwrap();
        assert!(t2.tensors[j].sub(&moved).norm() <= 1e-8, "level {j}");
    }
}

#[test]
fn phi_obstruction_examples() {
    let flat = builtin_gauge("flat(flat-R2(SO2))").unwrap();
    let id = ModelMorphism::identity(&flat.model);
    let n = phi_obstruction(&flat, &flat, &id, &[0.0, 0.0], &[1.0, 2.0], 2).unwrap();
    assert!(n.iter().all(|v| *v <= 1e-12));

    let plane = euclid("plane");
    let sphere = euclid("sphere");
    let n = phi_obstruction(&plane, &sphere, &id, &[0.0, 0.0], &[1.0, 0.5], 2).unwrap();
    assert!((n[0] - 1.0).abs() <= 1e-6);
    assert!(n[1] <= 1e-6 && n[2] <= 1e-6);

    let geo = builtin_gauge("flat(sl3-projective-pointed-line)").unwrap();
    let proj = disguise(&euclid_bump(), &euclid_to_affine(2).unwrap().then(&affine_to_projective(2).unwrap()).unwrap()).unwrap();
    let n = phi_obstruction(&geo, &proj, &geodesic_inclusion().unwrap(), &[0.0], &[0.3, 0.2], 0).unwrap();
    assert_eq!(n[0], 0.0);
    assert!(matches!(phi_obstruction(&plane, &proj, &id, &[0.0, 0.0], &[0.0, 0.0], 0), Err(Error::BadMorphism(_))));
}

#[test]
fn disguise_examples() {
    let e2a = euclid_to_affine(2).unwrap();
    let a2p = affine_to_projective(2).unwrap();
    let aff = disguise(&euclid("plane"), &e2a).unwrap();
    assert_eq!(aff.model.name, "flat-R2(GLn)");
    let proj = disguise(&aff, &a2p).unwrap();
    for x in [[0.0, 0.0], [1.5, -2.0]] {
        assert!(curvature(&aff, &x).unwrap().norm() <= 1e-12);
        assert!(curvature(&proj, &x).unwrap().norm() <= 1e-12);
    }
    let sph_aff = builtin_gauge("affine(sphere)").unwrap();
    let sph_proj = builtin_gauge("projective(sphere)").unwrap();
    let mut worst: f64 = 0.0;
    for x in sph_aff.chart.sample_grid(5) {
        worst = worst.max(disguise_residual(&sph_aff, &a2p, &sph_proj, &x).unwrap());
    }
    assert_eq!(sph_aff.chart.sample_grid(5).len(), 25);
    assert!(worst <= 1e-6, "{worst}");
    // not a disguise: the quotient block is not square
    assert!(matches!(disguise(&builtin_gauge("flat(sl3-projective-pointed-line)").unwrap(), &geodesic_inclusion().unwrap()), Err(Error::NotADisguise(_))));
}

#[test]
fn mutation_into_the_sphere_model() {
    // identity matrix from se(2) = [J, P1, P2] to so(3) = [J, P1, P2]: equivariant,
    // not a Lie map. By hand [P1, P2] = −J in so(3) and 0 in se(2), so
    // K1(e1, e2) = K0(e1, e2) − J.
    let g0 = euclid("plane");
    let target = builtin_model("sphere-S2").unwrap();
    let phi = ModelMorphism::new("mutate", g0.model.clone(), target, Mat::identity(3, 3), cartan_core::algebra::GroupMap::Identity).unwrap();
    for (s, k) in [("plane", 0.0), ("sphere", 1.0), ("sphere(2)", 0.25)] {
        let g = euclid(s);
        let m = disguise(&g, &phi).unwrap();
        for x in [[0.9, 0.1], [2.0, 3.0]] {
            assert!(disguise_residual(&g, &phi, &m, &x).unwrap() <= 1e-8);
            let k1 = curvature(&m, &x).unwrap();
            assert!((k1.get(&[0, 0, 1]) - (k - 1.0)).abs() <= 1e-8, "{s}");
            assert!(k1.get(&[1, 0, 1]).abs() + k1.get(&[2, 0, 1]).abs() <= 1e-8);
        }
    }
}

#[test]
fn disguise_functoriality_is_structural() {
    let e2a = euclid_to_affine(2).unwrap();
    let a2p = affine_to_projective(2).unwrap();
    for s in ["sphere", "plane-polar", "cone(0.5)"] {
        let g = euclid(s);
        let two = disguise(&disguise(&g, &e2a).unwrap(), &a2p).unwrap();
        let one = disguise(&g, &e2a.then(&a2p).unwrap()).unwrap();
        assert_eq!(two.gamma(), one.gamma(), "{s}");
        assert_eq!(two.model.name, one.model.name);
    }
}

#[test]
fn lift_examples() {
    let g = builtin_gauge("projective(sphere)").unwrap();
    let x = [1.0, 0.5];
    let k = curvature(&g, &x).unwrap();
    let full = lift(&g, g.model.h_dim).unwrap();
    assert_eq!(curvature(&full, &x).unwrap(), k);
    let pointed = lift(&g, 5).unwrap();
    assert_eq!(pointed.model.h_dim, 5);
    assert_eq!(pointed.base_dim(), 3);
    let k5 = curvature(&pointed, &x).unwrap();
    assert_eq!(k5.shape, vec![8, 3, 3]);
    for idx in k5.indices() {
        let want = if idx[1] == 0 || idx[2] == 0 { 0.0 } else { k.get(&[idx[0], idx[1] - 1, idx[2] - 1]) };
        assert_eq!(k5.get(&idx), want);
    }
    let bare = lift(&g, 0).unwrap();
    assert_eq!(bare.base_dim(), 8);
    assert_eq!(curvature_tower(&bare, &x, 1).unwrap().tensors[1].shape, vec![8, 8, 8, 8]);
    let gl = builtin_gauge("affine(sphere)").unwrap();
    // gl(2) basis E00, E01, E10, E11: [E01, E10] leaves the first three
    assert!(matches!(lift(&gl, 3), Err(Error::NotASubalgebra(3))));
    assert!(lift(&gl, 2).is_ok());
    assert!(matches!(lift(&gl, 5), Err(Error::NotASubalgebra(5))));
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn frames(h0: Mat, x1: Vec<f64>, h1: Mat) -> Frames {
    Frames { h0, x1, h1 }
}

#[test]
fn flat_development_is_a_rigid_motion() {
    let g = euclid("plane");
    let id = ModelMorphism::identity(&g.model);
    let fr = frames(Mat::identity(3, 3), vec![1.0, -1.0], rotation_frame(0.4).unwrap());
    let c = curve(&["t", "t^2/2"]);
    let tol = 1e-9;
    let tr = develop_base_curve(&g, &g, &id, &c, &fr, (0.0, 2.0), tol).unwrap();
    assert!(tr.status.is_completed());
    let src = |t: f64| vec![t, t * t / 2.0];
    let ts: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
    let ys: Vec<Vec<f64>> = ts.iter().map(|&t| tr.interpolate(t).0).collect();
    for i in 0..ts.len() {
        for j in 0..i {
            assert!((dist(&ys[i], &ys[j]) - dist(&src(ts[i]), &src(ts[j]))).abs() <= 1e-7);
        }
    }
    // orientation kept: signed area of a triangle
    let area = |p: &[f64], q: &[f64], r: &[f64]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (a, b, c2) = (src(0.0), src(1.0), src(2.0));
    assert!((area(&ys[0], &ys[10], &ys[20]) - area(&a, &b, &c2)).abs() <= 1e-7);
    assert!(dist(&ys[20], &[3.0, 1.0]) > 0.1, "frame rotation must act");
}

fn embed(x: &[f64]) -> [f64; 3] {
    [x[0].sin() * x[1].cos(), x[0].sin() * x[1].sin(), x[0].cos()]
}

#[test]
fn plane_segment_develops_onto_great_circle() {
    let plane = euclid("plane");
    let sphere = euclid("sphere");
    let id = ModelMorphism::identity(&plane.model);
    let heading: f64 = 0.5;
    let c = SourceCurve::Exprs(vec![parse(&format!("t*{:?}", heading.cos())).unwrap(), parse(&format!("t*{:?}", heading.sin())).unwrap()]);
    let fr = frames(Mat::identity(3, 3), vec![PI / 2.0, 0.3], Mat::identity(3, 3));
    let tr = develop_base_curve(&plane, &sphere, &id, &c, &fr, (0.0, PI / 2.0), 1e-10).unwrap();
    assert!(tr.status.is_completed());
    let m = 4000;
    let pts: Vec<[f64; 3]> = (0..=m).map(|i| embed(&tr.interpolate(PI / 2.0 * i as f64 / m as f64).0)).collect();
    let len: f64 = pts.windows(2).map(|w| dist(&w[0], &w[1])).sum();
    assert!((len - PI / 2.0).abs() <= 1e-5, "{len}");
    let (p, q) = (pts[0], pts[m]);
    let nrm = [p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2], p[0] * q[1] - p[1] * q[0]];
    let nn = dist(&nrm, &[0.0; 3]);
    let worst = pts.iter().map(|r| (r[0] * nrm[0] + r[1] * nrm[1] + r[2] * nrm[2]).abs() / nn).fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn long_segment_leaves_the_hemisphere() {
    let plane = euclid("plane");
    let hemi = euclid("hemisphere");
    let id = ModelMorphism::identity(&plane.model);
    let fr = frames(Mat::identity(3, 3), vec![0.0, 0.0], Mat::identity(3, 3));
    let tr = develop_base_curve(&plane, &hemi, &id, &curve(&["t", "0"]), &fr, (0.0, 3.5), 1e-9).unwrap();
    match tr.status {
        // from the pole the equator is a quarter circle away
        Status::ChartExit(t) => assert!(t > 1.5 && t < PI / 2.0, "{t}"),
        s => panic!("expected chart exit, got {s:?}"),
    }
    let r = dist(tr.last(), &[0.0, 0.0]);
    assert!(r > 0.999);
}

#[test]
fn canonical_metric_examples() {
    let plane = euclid("plane");
    assert!((canonical_base_metric(&plane, &[0.3, 0.4], &[1.0, 0.0], None).unwrap() - 1.0).abs() <= 1e-14);
    let sphere = euclid("sphere");
    for (x, u) in [([0.6f64, 0.2], [1.0, 0.0]), ([0.6, 0.2], [0.0, 1.0]), ([2.2, -1.0], [0.3, -0.7])] {
        let want = (u[0] * u[0] + x[0].sin().powi(2) * u[1] * u[1]).sqrt();
        let got = canonical_base_metric(&sphere, &x, &u, None).unwrap();
        assert!((got - want).abs() <= 1e-8 * want);
        let scaled = canonical_base_metric(&sphere, &x, &u, Some(&(Mat::identity(3, 3) * 4.0))).unwrap();
        assert!((scaled - 2.0 * got).abs() <= 1e-12);
        // J is orthogonal to the translations, so its weight does not matter
        let p = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![7.0, 1.0, 1.0]));
        assert!((canonical_base_metric(&sphere, &x, &u, Some(&p)).unwrap() - got).abs() <= 1e-12);
    }
    let bad = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0]));
    assert!(matches!(canonical_base_metric(&sphere, &[1.0, 0.0], &[1.0, 0.0], Some(&bad)), Err(Error::NotInvariant(_))));
}

#[test]
fn projected_flow_lines_are_shorter() {
    let sphere = euclid("sphere");
    for b in [[0.4, 1.0, -0.5], [2.0, 0.1, 0.2], [0.0, 0.6, 0.8]] {
        let bb = b.to_vec();
        let span = 1.5;
        let tr = bundle_flow(&sphere, move |_| Ok(bb.clone()), &[1.2, 0.3], &Mat::identity(3, 3), (0.0, span), 1e-10).unwrap();
        assert!(tr.base.status.is_completed());
        let ts: Vec<f64> = (0..=600).map(|i| span * i as f64 / 600.0).collect();
        let speeds: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let (x, v) = tr.base.interpolate(t);
                canonical_base_metric(&sphere, &x, &v, None).unwrap()
            })
            .collect();
        let base = simpson(&ts, &speeds);
        let total = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt() * span;
        assert!(base <= total + 1e-8, "{base} > {total}");
        assert!((base - (b[1] * b[1] + b[2] * b[2]).sqrt() * span).abs() <= 1e-7);
    }
}

#[test]
fn bundle_frames_stay_in_the_structure_group() {
    let g = builtin_gauge("projective(sphere)").unwrap();
    let b: Vec<f64> = (0..8).map(|i| 0.1 * (i as f64 - 3.0)).collect();
    let tr = bundle_flow(&g, move |_| Ok(b.clone()), &[1.0, 0.0], &Mat::identity(3, 3), (0.0, 1.0), 1e-10).unwrap();
    for h in &tr.frames {
        // stabilizer of [e0]: first column is a multiple of e0, det 1
        assert!(h[(1, 0)].abs() <= 1e-8 && h[(2, 0)].abs() <= 1e-8);
        assert!((h.determinant() - 1.0).abs() <= 1e-8);
    }
}

fn so2_frame(a: f64) -> Mat {
    expm(&(builtin_model("flat-R2(SO2)").unwrap().g.element(&[a, 0.0, 0.0]))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bundle_development_is_frame_equivariant(a in -3.0f64..3.0, k1 in -0.5f64..0.5, k2 in -0.5f64..0.5) {
        let g0 = euclid("sphere");
        let g1 = builtin_gauge("projective(sphere)").unwrap();
        let phi = euclid_to_affine(2).unwrap().then(&affine_to_projective(2).unwrap()).unwrap();
        let c = SourceCurve::Exprs(vec![parse(&format!("1.2 + {k1:?}*t")).unwrap(), parse(&format!("{k2:?}*t + 0.2*t^2")).unwrap()]);
        let tol = 1e-9;
        let plain = Frames { h0: Mat::identity(3, 3), x1: vec![1.4, 0.2], h1: Mat::identity(3, 3) };
        let h = so2_frame(a);
        let moved = Frames { h0: h.clone(), x1: vec![1.4, 0.2], h1: phi.map_group(&h).unwrap() };
        // compare step endpoints, not dense output
        for end in [0.25, 0.5, 1.0] {
            let t0 = develop_base_curve(&g0, &g1, &phi, &c, &plain, (0.0, end), tol).unwrap();
            let t1 = develop_base_curve(&g0, &g1, &phi, &c, &moved, (0.0, end), tol).unwrap();
            prop_assert!(t0.status.is_completed() && t1.status.is_completed());
            prop_assert!(dist(t0.last(), t1.last()) <= 10.0 * tol);
        }
    }

    #[test]
    fn geodesic_model_always_hits_at_order_zero(c in proptest::collection::vec(-0.3f64..0.3, 16)) {
        let model = builtin_model("sl3-projective-point").unwrap();
        let gamma: Vec<Vec<Expr>> = (0..8)
            .map(|r| {
                (0..2)
                    .map(|k| {
                        let base = if r == 6 + k { 1.0 } else { 0.0 };
                        parse_in(&format!("{:?} + {:?}*x1*x2", base + c[2 * r + k], c[(2 * r + k + 5) % 16]), 2).unwrap()
                    })
                    .collect()
            })
            .collect();
        let chart = Chart::boxed(vec![-0.5, -0.5], vec![0.5, 0.5]).unwrap();
        if let Ok(g1) = CartanGauge::new("random", model, chart, gamma) {
            let geo = builtin_gauge("flat(sl3-projective-pointed-line)").unwrap();
            let n = phi_obstruction(&geo, &g1, &geodesic_inclusion().unwrap(), &[0.0], &[0.1, -0.2], 0).unwrap();
            prop_assert_eq!(n[0], 0.0);
        }
    }
}

