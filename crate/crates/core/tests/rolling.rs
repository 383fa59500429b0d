use cartan_core::coframing::{builtin_coframing, halton, Chart};
use cartan_core::rolling::*;
use std::f64::consts::PI;

/// Graph z = h(x, y) with h = x²/2 + xy/3 + y²/5, plus its closed-form curvature.
fn graph() -> (SurfaceMetric, impl Fn(f64, f64) -> f64) {
    let hx = "(x1 + x2/3)";
    let hy = "(x1/3 + 2*x2/5)";
    let s = SurfaceMetric::from_strings(
        "graph",
        Chart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
        &format!("1 + {hx}^2"),
        &format!("{hx}*{hy}"),
        &format!("1 + {hy}^2"),
    )
    .unwrap();
    let k = |x: f64, y: f64| {
        let (hx, hy) = (x + y / 3.0, x / 3.0 + 2.0 * y / 5.0);
        (1.0 * 0.4 - 1.0 / 9.0) / (1.0 + hx * hx + hy * hy).powi(2)
    };
    (s, k)
}

#[test]
fn gauss_curvature_oracles() {
    let (g, k) = graph();
    for p in g.chart.sample_grid(4) {
        assert!((g.gauss_curvature(&p).unwrap() - k(p[0], p[1])).abs() < 1e-12);
    }
    for (name, want) in [("sphere", 1.0), ("sphere(3)", 1.0 / 9.0), ("sphere(2)", 0.25), ("plane", 0.0), ("plane-polar", 0.0)] {
        let s = builtin_surface(name).unwrap();
        for p in s.chart.sample_grid(4) {
            assert!((s.gauss_curvature(&p).unwrap() - want).abs() < 1e-10, "{name}");
        }
    }
}

#[test]
fn structure_equations_hold() {
    let (g, _) = graph();
    let mut surfaces = vec![g];
    for name in ["plane", "plane-polar", "sphere", "sphere(3)"] {
        surfaces.push(builtin_surface(name).unwrap());
    }
    for s in &surfaces {
        let pts: Vec<Vec<f64>> = s.chart.sample_grid(4).into_iter().enumerate().map(|(i, mut p)| {
            p.push(0.7 * i as f64 - 1.0);
            p
        }).collect();
        let r = structure_residual(s, &pts).unwrap();
        assert!(r <= 1e-8, "{}: {r}", s.name);
    }
}

#[test]
fn plane_frame_bundle_is_se2_maurer_cartan() {
    let plane = builtin_surface("plane").unwrap();
    let fb = frame_bundle_coframing(&plane).unwrap();
    assert_eq!(fb.omega[2][2].as_const(), Some(1.0));
    assert!(fb.omega[2][0].as_const() == Some(0.0) && fb.omega[2][1].as_const() == Some(0.0));
    let se = frame_bundle_se2(&plane).unwrap();
    let mc = builtin_coframing("mc-se2").unwrap();
    for x in [[0.1, 0.2, 0.3], [1.0, -2.0, 2.5]] {
        assert!((se.omega_at(&x).unwrap() - mc.omega_at(&x).unwrap()).amax() < 1e-15);
    }
}

#[test]
fn degenerate_metric_rejected() {
    let bad = SurfaceMetric::from_strings("bad", Chart::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(), "x1", "0", "1");
    assert!(matches!(bad, Err(cartan_core::Error::DegenerateMetric(_))));
}

fn configs(rs: &RollingSpace, count: usize) -> Vec<Vec<f64>> {
    (1..=count)
        .map(|s| {
            let u: Vec<f64> = (0..5).map(|i| halton(s, i)).collect();
            vec![0.3 + 2.5 * u[0], 2.0 * PI * u[1], 0.3 + 2.5 * u[2], 2.0 * PI * u[3], 2.0 * PI * u[4]]
        })
        .filter(|p| rs.chart.contains(p))
        .collect()
}

#[test]
fn unequal_spheres_are_nondegenerate() {
    let rs = rolling_space(&builtin_surface("sphere").unwrap(), &builtin_surface("sphere(3)").unwrap()).unwrap();
    let pts = configs(&rs, 20);
    assert_eq!(pts.len(), 20);
    for p in pts {
        assert_eq!(growth_ranks(&rs, &p).unwrap(), (2, 3, 5), "{p:?}");
    }
}

#[test]
fn equal_curvature_is_degenerate() {
    let rs = rolling_space(&builtin_surface("sphere").unwrap(), &builtin_surface("sphere").unwrap()).unwrap();
    for p in configs(&rs, 20) {
        assert_ne!(growth_ranks(&rs, &p).unwrap(), (2, 3, 5));
    }
    let flat = rolling_space(&builtin_surface("plane").unwrap(), &builtin_surface("plane").unwrap()).unwrap();
    for p in [[0.1, 0.2, 0.3, 0.4, 0.5], [-3.0, 1.0, 2.0, 0.0, 4.0]] {
        let (r0, r1, r2) = growth_ranks(&flat, &p).unwrap();
        assert_eq!(r0, 2);
        assert!(r1 <= 3 && r2 < 5);
    }
}

#[test]
fn ranks_invariant_under_swap_and_reparameterization() {
    let (sph, pl, pol) = (builtin_surface("sphere(2)").unwrap(), builtin_surface("plane").unwrap(), builtin_surface("plane-polar").unwrap());
    let a = rolling_space(&sph, &pl).unwrap();
    let b = rolling_space(&pl, &sph).unwrap();
    let c = rolling_space(&sph, &pol).unwrap();
    for p in configs(&a, 10) {
        let ra = growth_ranks(&a, &p).unwrap();
        assert_eq!(ra, (2, 3, 5));
        // swapped roles: ψ changes sign
        assert_eq!(growth_ranks(&b, &[p[2], p[3], p[0], p[1], -p[4]]).unwrap(), ra);
        // same plane point in polar coordinates; the polar frame is rotated by the angle
        let (r, phi) = (p[2].hypot(p[3]), p[3].atan2(p[2]));
        assert_eq!(growth_ranks(&c, &[p[0], p[1], r, phi, p[4] - phi]).unwrap(), ra);
    }
}

fn closure_time(ch: &Characteristic, t_min: f64, t_max: f64, angle: &[usize]) -> Option<f64> {
    let x0 = &ch.curve.x[0];
    let dist = |t: f64| -> f64 {
        let (x, _) = ch.curve.interpolate(t);
        x.iter()
            .zip(x0)
            .enumerate()
            .map(|(i, (a, b))| {
                let d = a - b;
                if angle.contains(&i) { (d / (2.0 * PI)).round().mul_add(-2.0 * PI, d).abs() } else { d.abs() }
            })
            .fold(0.0, f64::max)
    };
    // coarse sweep, then ternary refinement of each local minimum
    let h = 1e-2;
    let mut t = t_min + h;
    while t + h <= t_max {
        let (a, b, c) = (dist(t - h), dist(t), dist(t + h));
        if b <= a && b <= c && b < 0.1 {
            let (mut lo, mut hi) = (t - h, t + h);
            for _ in 0..100 {
                let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if dist(m1) < dist(m2) { hi = m2 } else { lo = m1 }
            }
            let tm = 0.5 * (lo + hi);
            if dist(tm) <= 1e-4 {
                return Some(tm);
            }
        }
        t += h;
    }
    None
}

#[test]
fn characteristic_of_unequal_spheres_closes() {
    let rs = rolling_space(&builtin_surface("sphere").unwrap(), &builtin_surface("sphere(3)").unwrap()).unwrap();
    let a = GeodesicStart { point: vec![PI / 2.0, 0.0], direction: vec![0.0, 1.0] };
    let b = GeodesicStart { point: vec![PI / 2.0, 0.0], direction: vec![0.0, 1.0 / 3.0] };
    let tol = 1e-10;
    let ch = characteristic_curve(&rs, &a, &b, 1.0, (0.0, 8.0 * PI), tol).unwrap();
    assert!(ch.curve.status.is_completed());
    assert!(tangency_residual(&rs, &ch.curve).unwrap() <= 10.0 * tol);
    assert!(geodesic_residual(&rs.s, &ch.lift).unwrap() <= 1e-8);
    assert!(geodesic_residual(&rs.s2, &ch.lift2).unwrap() <= 1e-8);
    let t = closure_time(&ch, 1.0, 8.0 * PI, &[1, 3, 4]).expect("closes");
    assert!((t - 6.0 * PI).abs() < 1e-2, "{t}");

    // a tilted great circle on the small sphere
    let a = GeodesicStart { point: vec![1.0, 0.3], direction: vec![0.6, 0.8 / 1f64.sin()] };
    let b = GeodesicStart { point: vec![2.0, -0.5], direction: vec![0.0, 1.0 / (3.0 * 2f64.sin())] };
    let ch = characteristic_curve(&rs, &a, &b, 1.0, (0.0, 3.0), tol).unwrap();
    assert!(tangency_residual(&rs, &ch.curve).unwrap() <= 10.0 * tol);
    assert!(geodesic_residual(&rs.s, &ch.lift).unwrap() <= 1e-8);
}

#[test]
fn flat_characteristic_is_a_line() {
    let pl = builtin_surface("plane").unwrap();
    let rs = rolling_space(&pl, &pl).unwrap();
    let a = GeodesicStart { point: vec![0.0, 0.0], direction: vec![0.6, 0.8] };
    let b = GeodesicStart { point: vec![1.0, 2.0], direction: vec![1.0, 0.0] };
    let ch = characteristic_curve(&rs, &a, &b, 1.0, (0.0, 5.0), 1e-10).unwrap();
    let psi0 = ch.curve.x[0][4];
    for (t, x) in ch.curve.t.iter().zip(&ch.curve.x) {
        assert!((x[0] - 0.6 * t).abs() < 1e-9 && (x[1] - 0.8 * t).abs() < 1e-9);
        assert!((x[2] - 1.0 - t).abs() < 1e-9 && (x[3] - 2.0).abs() < 1e-9);
        assert!((x[4] - psi0).abs() < 1e-12);
    }
    assert!(tangency_residual(&rs, &ch.curve).unwrap() <= 1e-9);
}

#[test]
fn sphere_on_plane_projections() {
    let rs = rolling_space(&builtin_surface("sphere").unwrap(), &builtin_surface("plane").unwrap()).unwrap();
    let a = GeodesicStart { point: vec![1.2, 0.0], direction: vec![0.8, 0.6 / 1.2f64.sin()] };
    let b = GeodesicStart { point: vec![0.0, 0.0], direction: vec![1.0, 0.0] };
    let ch = characteristic_curve(&rs, &a, &b, 1.0, (0.0, 4.0), 1e-10).unwrap();
    assert!(geodesic_residual(&rs.s, &ch.lift).unwrap() <= 1e-8);
    // great circle: the position vectors stay in the plane normal to x(0) × x'(0)
    let emb = |p: &[f64]| [p[0].sin() * p[1].cos(), p[0].sin() * p[1].sin(), p[0].cos()];
    let p0 = emb(&a.point);
    let h = 1e-6;
    let q = emb(&[a.point[0] + h * a.direction[0], a.point[1] + h * a.direction[1]]);
    let v0 = [(q[0] - p0[0]) / h, (q[1] - p0[1]) / h, (q[2] - p0[2]) / h];
    let nrm = [p0[1] * v0[2] - p0[2] * v0[1], p0[2] * v0[0] - p0[0] * v0[2], p0[0] * v0[1] - p0[1] * v0[0]];
    let nn = (nrm[0].powi(2) + nrm[1].powi(2) + nrm[2].powi(2)).sqrt();
    for x in &ch.curve.x {
        let q = emb(&x[..2]);
        assert!(((q[0] * nrm[0] + q[1] * nrm[1] + q[2] * nrm[2]) / nn).abs() < 1e-5);
        // plane side: straight line along x'
        assert!(x[3].abs() < 1e-9);
    }
}
