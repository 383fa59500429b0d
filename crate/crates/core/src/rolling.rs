//! Surfaces, their orthonormal frame bundles, and the 2-plane field of
//! rolling one surface on another without slipping or twisting.

use nalgebra::{DMatrix, DVector};

use crate::coframing::{jet_inverse, Chart, Coframing};
use crate::error::{Error, Result};
use crate::expr::{parse_in, Expr, Func, Jet, Var};
use crate::ode::{integrate, OdeOptions, Trajectory};

/// First fundamental form E dx² + 2F dx dy + G dy² on a 2-dim chart.
#[derive(Clone, Debug)]
pub struct SurfaceMetric {
    pub name: String,
    pub chart: Chart,
    pub e: Expr,
    pub f: Expr,
    pub g: Expr,
}

/// Orthonormal coframe by Gram–Schmidt on (dx, dy) and its connection form,
/// all as dx/dy component pairs.
#[derive(Clone, Debug)]
pub struct SurfaceFrame {
    pub eta1: [Expr; 2],
    pub eta2: [Expr; 2],
    pub eta12: [Expr; 2],
}

fn cos(e: Expr) -> Expr {
    Expr::call(Func::Cos, vec![e])
}

fn sin(e: Expr) -> Expr {
    Expr::call(Func::Sin, vec![e])
}

impl SurfaceMetric {
    pub fn new(name: &str, chart: Chart, e: Expr, f: Expr, g: Expr) -> Result<SurfaceMetric> {
        if chart.dim() != 2 {
            return Err(Error::SizeMismatch("surface charts are 2-dimensional".into()));
        }
        if [&e, &f, &g].iter().any(|x| x.arity() > 2 || x.uses_t()) {
            return Err(Error::Invalid("metric coefficients must use x1, x2 only".into()));
        }
        let s = SurfaceMetric { name: name.to_string(), chart, e, f, g };
        for p in s.chart.sample_grid(5) {
            let m = s.metric_at(&p)?;
            if !(m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0 && m.determinant() > 0.0) {
                return Err(Error::DegenerateMetric(format!("{} at {p:?}", s.name)));
            }
        }
        Ok(s)
    }

    pub fn from_strings(name: &str, chart: Chart, e: &str, f: &str, g: &str) -> Result<SurfaceMetric> {
        SurfaceMetric::new(name, chart, parse_in(e, 2)?, parse_in(f, 2)?, parse_in(g, 2)?)
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (e, f, g) = (self.e.eval(x, 0.0)?, self.f.eval(x, 0.0)?, self.g.eval(x, 0.0)?);
        Ok(DMatrix::from_row_slice(2, 2, &[e, f, f, g]))
    }

    /// Gram–Schmidt frame η1 = √E dx + F/√E dy, η2 = √((EG−F²)/E) dy, and
    /// η12 solving dη1 = −η12∧η2, dη2 = η12∧η1.
    pub fn frame(&self) -> SurfaceFrame {
        let se = Expr::sqrt(self.e.clone());
        let p = se.clone();
        let q = Expr::div(self.f.clone(), se);
        let det = Expr::sub(Expr::mul(self.e.clone(), self.g.clone()), Expr::mul(self.f.clone(), self.f.clone()));
        let r = Expr::sqrt(Expr::div(det, self.e.clone()));
        let (x, y) = (Var::X(0), Var::X(1));
        // dη1 = a η1∧η2, dη2 = b η1∧η2
        let vol = Expr::mul(p.clone(), r.clone());
        let a = Expr::div(Expr::sub(q.diff(x), p.diff(y)), vol.clone());
        let b = Expr::div(r.diff(x), vol);
        let eta12 = [
            Expr::neg_folded(Expr::mul(a.clone(), p.clone())),
            Expr::neg_folded(Expr::add(Expr::mul(a, q.clone()), Expr::mul(b, r.clone()))),
        ];
        SurfaceFrame { eta1: [p, q], eta2: [Expr::num(0.0), r], eta12 }
    }

    /// Gauss curvature from metric jets (Brioschi formula).
    pub fn gauss_curvature(&self, x: &[f64]) -> Result<f64> {
        let (e, f, g) = (self.e.eval_jet(x, 2)?, self.f.eval_jet(x, 2)?, self.g.eval_jet(x, 2)?);
        let d = |j: &Jet, v: &[usize]| j.partial(v);
        let (ev, fv, gv) = (e.value(), f.value(), g.value());
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let a = det3([
            [-0.5 * d(&e, &[1, 1]) + d(&f, &[0, 1]) - 0.5 * d(&g, &[0, 0]), 0.5 * d(&e, &[0]), d(&f, &[0]) - 0.5 * d(&e, &[1])],
            [d(&f, &[1]) - 0.5 * d(&g, &[0]), ev, fv],
            [0.5 * d(&g, &[1]), fv, gv],
        ]);
        let b = det3([[0.0, 0.5 * d(&e, &[1]), 0.5 * d(&g, &[0])], [0.5 * d(&e, &[1]), ev, fv], [0.5 * d(&g, &[0]), fv, gv]]);
        Ok((a - b) / (ev * gv - fv * fv).powi(2))
    }

    /// Christoffel symbols Γ[k][i][j] of the Levi-Civita connection.
    pub fn christoffel(&self, x: &[f64]) -> Result<[[[f64; 2]; 2]; 2]> {
        let jets = [self.e.eval_jet(x, 1)?, self.f.eval_jet(x, 1)?, self.g.eval_jet(x, 1)?];
        let gij = |i: usize, j: usize| -> &Jet { &jets[i + j] };
        let ginv = self.metric_at(x)?.try_inverse().ok_or_else(|| Error::DegenerateMetric(format!("{x:?}")))?;
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, ok) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    ok[i][j] = (0..2)
                        .map(|l| 0.5 * ginv[(k, l)] * (gij(j, l).partial(&[i]) + gij(i, l).partial(&[j]) - gij(i, j).partial(&[l])))
                        .sum();
                }
            }
        }
        Ok(out)
    }
}

/// Named surfaces: `plane`, `plane-polar`, `sphere` and `sphere(<r>)`
/// (colatitude/longitude chart), `hemisphere` (orthographic chart of the
/// open upper unit hemisphere) and `cone(<β>)`, the flat metric
/// dr² + β²r²dφ² of cone angle 2πβ written in u = r cos φ, v = r sin φ on
/// the punctured square.
pub fn builtin_surface(name: &str) -> Result<SurfaceMetric> {
    let pi = std::f64::consts::PI;
    if name == "hemisphere" {
        let chart = Chart::new(vec![-1.0, -1.0], vec![1.0, 1.0], Some(parse_in("0.9999 - x1^2 - x2^2", 2)?))?;
        let w = "(1 - x1^2 - x2^2)";
        return SurfaceMetric::from_strings(name, chart, &format!("1 + x1^2/{w}"), &format!("x1*x2/{w}"), &format!("1 + x2^2/{w}"));
    }
    if let Some(b) = name.strip_prefix("cone(").and_then(|r| r.strip_suffix(')')).and_then(|r| r.parse::<f64>().ok()) {
        if !(b > 0.0) {
            return Err(Error::DegenerateMetric(name.to_string()));
        }
        let chart = Chart::new(vec![-2.0, -2.0], vec![2.0, 2.0], Some(parse_in("x1^2 + x2^2 - 0.01", 2)?))?;
        let b2 = format!("{:?}", b * b);
        let r2 = "(x1^2 + x2^2)";
        return SurfaceMetric::from_strings(
            name,
            chart,
            &format!("(x1^2 + {b2}*x2^2)/{r2}"),
            &format!("(1 - {b2})*x1*x2/{r2}"),
            &format!("(x2^2 + {b2}*x1^2)/{r2}"),
        );
    }
    let radius = match name {
        "sphere" => Some(1.0),
        _ => name.strip_prefix("sphere(").and_then(|r| r.strip_suffix(')')).and_then(|r| r.parse::<f64>().ok()),
    };
    if let Some(r) = radius {
        if !(r > 0.0) {
            return Err(Error::DegenerateMetric(name.to_string()));
        }
        let chart = Chart::boxed(vec![0.01, f64::NEG_INFINITY], vec![pi - 0.01, f64::INFINITY])?;
        let r2 = format!("{:?}", r * r);
        return SurfaceMetric::from_strings(name, chart, &r2, "0", &format!("{r2}*sin(x1)^2"));
    }
    match name {
        "plane" => SurfaceMetric::from_strings(name, Chart::unbounded(2), "1", "0", "1"),
        "plane-polar" => {
            let chart = Chart::boxed(vec![0.05, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY])?;
            SurfaceMetric::from_strings(name, chart, "1", "0", "x1^2")
        }
        _ => Err(Error::Invalid(format!("unknown surface `{name}`"))),
    }
}

/// Coframing (ω1, ω2, ω12) on (x, y, θ): ω = R(θ)η rotated frame and
/// ω12 = dθ + η12, so dω1 = −ω12∧ω2, dω2 = ω12∧ω1, dω12 = K ω1∧ω2.
pub fn frame_bundle_coframing(s: &SurfaceMetric) -> Result<Coframing> {
    let fr = s.frame();
    let th = Expr::x(2);
    let (c, sn) = (cos(th.clone()), sin(th));
    let row = |a: &[Expr; 2], b: &[Expr; 2], ca: Expr, cb: Expr| -> Vec<Expr> {
        let mut r: Vec<Expr> = (0..2).map(|k| Expr::add(Expr::mul(ca.clone(), a[k].clone()), Expr::mul(cb.clone(), b[k].clone()))).collect();
        r.push(Expr::num(0.0));
        r
    };
    let w1 = row(&fr.eta1, &fr.eta2, c.clone(), Expr::neg_folded(sn.clone()));
    let w2 = row(&fr.eta1, &fr.eta2, sn, c);
    let w12 = vec![fr.eta12[0].clone(), fr.eta12[1].clone(), Expr::num(1.0)];
    let mut lo = s.chart.lo.clone();
    let mut hi = s.chart.hi.clone();
    lo.push(f64::NEG_INFINITY);
    hi.push(f64::INFINITY);
    let chart = Chart::new(lo, hi, s.chart.inside.clone())?;
    Ok(Coframing::new(&format!("frame-bundle({})", s.name), chart, vec![w1, w2, w12], None)?.with_frame_angle(2))
}

/// The same coframing ordered (ω12, ω1, ω2), matching the se(2) basis
/// (rotation first) of the Euclidean plane model.
pub fn frame_bundle_se2(s: &SurfaceMetric) -> Result<Coframing> {
    let mut c = frame_bundle_coframing(s)?;
    c.omega.rotate_right(1);
    Ok(Coframing::new(&c.name, c.chart.clone(), c.omega.clone(), None)?.with_frame_angle(2))
}

/// Max residual of the three structure equations on the frame bundle,
/// with K from the Brioschi formula.
pub fn structure_residual(s: &SurfaceMetric, points: &[Vec<f64>]) -> Result<f64> {
    let fb = frame_bundle_coframing(s)?;
    let mut worst: f64 = 0.0;
    for p in points {
        let w = fb.omega_jet(p, 1)?;
        let val = |i: usize, k: usize| w[i][k].value();
        let d = |i: usize, k: usize, l: usize| w[i][l].partial(&[k]) - w[i][k].partial(&[l]);
        let wedge = |i: usize, j: usize, k: usize, l: usize| val(i, k) * val(j, l) - val(i, l) * val(j, k);
        let kk = s.gauss_curvature(&p[..2])?;
        for k in 0..3 {
            for l in k + 1..3 {
                worst = worst
                    .max((d(0, k, l) + wedge(2, 1, k, l)).abs())
                    .max((d(1, k, l) - wedge(2, 0, k, l)).abs())
                    .max((d(2, k, l) - kk * wedge(0, 1, k, l)).abs());
            }
        }
    }
    Ok(worst)
}

/// Configuration space (x, y, x', y', ψ) with θ = 0 fixed on the first
/// surface and ψ the frame angle on the second.
#[derive(Clone, Debug)]
pub struct RollingSpace {
    pub s: SurfaceMetric,
    pub s2: SurfaceMetric,
    pub chart: Chart,
    /// Fields X_{e1}, X_{e2} spanning the plane field.
    pub fields: [Vec<Expr>; 2],
}

/// Build the rolling distribution: X_u has (ẋ, ẏ) = η⁻¹u,
/// (ẋ', ẏ') = η'⁻¹R(ψ)ᵀu and ψ̇ = η12(ẋ) − η12'(ẋ').
pub fn rolling_space(s: &SurfaceMetric, s2: &SurfaceMetric) -> Result<RollingSpace> {
    let (f1, f2) = (s.frame(), s2.frame());
    let shift = [Expr::x(2), Expr::x(3)];
    let sub = |e: &Expr| e.substitute(&shift);
    let f2 = SurfaceFrame {
        eta1: [sub(&f2.eta1[0]), sub(&f2.eta1[1])],
        eta2: [sub(&f2.eta2[0]), sub(&f2.eta2[1])],
        eta12: [sub(&f2.eta12[0]), sub(&f2.eta12[1])],
    };
    // inverse of the triangular frame [[p, q], [0, r]] applied to (u1, u2)
    let tri_inv = |fr: &SurfaceFrame, u: [Expr; 2]| -> [Expr; 2] {
        let (p, q, r) = (fr.eta1[0].clone(), fr.eta1[1].clone(), fr.eta2[1].clone());
        let dy = Expr::div(u[1].clone(), r);
        let dx = Expr::div(Expr::sub(u[0].clone(), Expr::mul(q, dy.clone())), p);
        [dx, dy]
    };
    let pair = |fr: &[Expr; 2], v: &[Expr; 2]| Expr::add(Expr::mul(fr[0].clone(), v[0].clone()), Expr::mul(fr[1].clone(), v[1].clone()));
    let psi = Expr::x(4);
    let (c, sn) = (cos(psi.clone()), sin(psi));
    let field = |u: [f64; 2]| -> Vec<Expr> {
        let v = tri_inv(&f1, [Expr::num(u[0]), Expr::num(u[1])]);
        // R(ψ)ᵀu
        let ru = [
            Expr::add(Expr::mul(c.clone(), Expr::num(u[0])), Expr::mul(sn.clone(), Expr::num(u[1]))),
            Expr::sub(Expr::mul(c.clone(), Expr::num(u[1])), Expr::mul(sn.clone(), Expr::num(u[0]))),
        ];
        let v2 = tri_inv(&f2, ru);
        let dpsi = Expr::sub(pair(&f1.eta12, &v), pair(&f2.eta12, &v2));
        vec![v[0].clone(), v[1].clone(), v2[0].clone(), v2[1].clone(), dpsi]
    };
    let fields = [field([1.0, 0.0]), field([0.0, 1.0])];
    let mut lo = s.chart.lo.clone();
    let mut hi = s.chart.hi.clone();
    lo.extend_from_slice(&s2.chart.lo);
    hi.extend_from_slice(&s2.chart.hi);
    lo.push(f64::NEG_INFINITY);
    hi.push(f64::INFINITY);
    let chart = Chart::boxed(lo, hi)?;
    let rs = RollingSpace { s: s.clone(), s2: s2.clone(), chart, fields };
    for p in rs.chart.sample_grid(3) {
        let vals: Vec<f64> = rs.fields.iter().flatten().map(|e| e.eval(&p, 0.0)).collect::<Result<_>>()?;
        let m = DMatrix::from_column_slice(5, 2, &vals);
        let sv = m.singular_values();
        if !(sv.min() > 1e-8 * sv.max()) {
            return Err(Error::DegenerateMetric(format!("plane field degenerates at {p:?}")));
        }
    }
    Ok(rs)
}

fn lie(x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = &(&x[0] * &y[k].derivative(0)) - &(&y[0] * &x[k].derivative(0));
            for j in 1..n {
                acc = &acc + &(&(&x[j] * &y[k].derivative(j)) - &(&y[j] * &x[k].derivative(j)));
            }
            acc
        })
        .collect()
}

fn numeric_rank(cols: &[Vec<f64>]) -> usize {
    let n = cols[0].len();
    let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= 1e-8 * top).count()
}

/// Ranks of P, P⁽¹⁾ = P + [P, P] and P⁽²⁾ = P⁽¹⁾ + [P⁽¹⁾, P⁽¹⁾].
pub fn growth_ranks(rs: &RollingSpace, point: &[f64]) -> Result<(usize, usize, usize)> {
    if !rs.chart.contains(point) {
        return Err(Error::OutsideChart(point.to_vec()));
    }
    let jets: Vec<Vec<Jet>> = rs.fields.iter().map(|f| f.iter().map(|e| e.eval_jet(point, 2)).collect::<Result<_>>()).collect::<Result<_>>()?;
    let x3 = lie(&jets[0], &jets[1]);
    let x4 = lie(&jets[0], &x3);
    let x5 = lie(&jets[1], &x3);
    let v = |f: &[Jet]| f.iter().map(Jet::value).collect::<Vec<f64>>();
    let (a, b, c, d, e) = (v(&jets[0]), v(&jets[1]), v(&x3), v(&x4), v(&x5));
    Ok((
        numeric_rank(&[a.clone(), b.clone()]),
        numeric_rank(&[a.clone(), b.clone(), c.clone()]),
        numeric_rank(&[a, b, c, d, e]),
    ))
}

/// Unit-speed geodesic data on one surface.
#[derive(Clone, Debug)]
pub struct GeodesicStart {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
}

/// A characteristic together with its frame-bundle lifts.
#[derive(Clone, Debug)]
pub struct Characteristic {
    pub curve: Trajectory,
    pub lift: Trajectory,
    pub lift2: Trajectory,
}

fn frame_angle(s: &SurfaceMetric, g: &GeodesicStart) -> Result<f64> {
    let fr = s.frame();
    let ev = |e: &Expr| e.eval(&g.point, 0.0);
    let d = &g.direction;
    let a = ev(&fr.eta1[0])? * d[0] + ev(&fr.eta1[1])? * d[1];
    let b = ev(&fr.eta2[0])? * d[0] + ev(&fr.eta2[1])? * d[1];
    if ((a * a + b * b).sqrt() - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!("direction {d:?} is not unit on {}", s.name)));
    }
    Ok(-b.atan2(a))
}

/// Roll along geodesics: flow e1 on both frame bundles (the second at
/// `ratio` times the speed), so both frames are parallel along their
/// geodesics, then read off ψ = θ' − θ.
pub fn characteristic_curve(rs: &RollingSpace, a: &GeodesicStart, b: &GeodesicStart, ratio: f64, t_span: (f64, f64), tol: f64) -> Result<Characteristic> {
    let (fb1, fb2) = (frame_bundle_coframing(&rs.s)?, frame_bundle_coframing(&rs.s2)?);
    let th1 = frame_angle(&rs.s, a)?;
    let th2 = frame_angle(&rs.s2, b)?;
    let x0 = [a.point[0], a.point[1], th1, b.point[0], b.point[1], th2];
    let rhs = |_: f64, x: &[f64]| -> Result<Vec<f64>> {
        let w1 = crate::coframing::frame_inverse(&fb1.omega_at(&x[..3])?, &x[..3])?;
        let w2 = crate::coframing::frame_inverse(&fb2.omega_at(&x[3..])?, &x[3..])?;
        let mut out: Vec<f64> = w1.column(0).iter().copied().collect();
        out.extend(w2.column(0).iter().map(|v| ratio * v));
        Ok(out)
    };
    let inside = |x: &[f64]| fb1.chart.contains(&x[..3]) && fb2.chart.contains(&x[3..]);
    let joint = integrate(rhs, inside, &x0, t_span.0, t_span.1, OdeOptions::new(tol))?;
    let split = |r: std::ops::Range<usize>| Trajectory {
        t: joint.t.clone(),
        x: joint.x.iter().map(|x| x[r.clone()].to_vec()).collect(),
        v: joint.v.iter().map(|v| v[r.clone()].to_vec()).collect(),
        status: joint.status,
        accepted: joint.accepted,
        rejected: joint.rejected,
    };
    let five = |x: &[f64]| vec![x[0], x[1], x[3], x[4], x[5] - x[2]];
    let curve = Trajectory {
        t: joint.t.clone(),
        x: joint.x.iter().map(|x| five(x)).collect(),
        v: joint.v.iter().map(|x| five(x)).collect(),
        status: joint.status,
        accepted: joint.accepted,
        rejected: joint.rejected,
    };
    Ok(Characteristic { curve, lift: split(0..3), lift2: split(3..6) })
}

/// Max over samples of the defect of ω1 = ω1', ω2 = ω2', ω12 = ω12' on
/// the velocity of a 5-space curve.
pub fn tangency_residual(rs: &RollingSpace, curve: &Trajectory) -> Result<f64> {
    let (f1, f2) = (rs.s.frame(), rs.s2.frame());
    let mut worst: f64 = 0.0;
    for (x, v) in curve.x.iter().zip(&curve.v) {
        let (p, p2) = (&x[..2], &x[2..4]);
        let ap = |fr: &[Expr; 2], at: &[f64], d: &[f64]| -> Result<f64> { Ok(fr[0].eval(at, 0.0)? * d[0] + fr[1].eval(at, 0.0)? * d[1]) };
        let u = [ap(&f1.eta1, p, &v[..2])?, ap(&f1.eta2, p, &v[..2])?];
        let e2 = [ap(&f2.eta1, p2, &v[2..4])?, ap(&f2.eta2, p2, &v[2..4])?];
        let (c, s) = (x[4].cos(), x[4].sin());
        let u2 = [c * e2[0] - s * e2[1], s * e2[0] + c * e2[1]];
        let conn = ap(&f1.eta12, p, &v[..2])? - ap(&f2.eta12, p2, &v[2..4])? - v[4];
        worst = worst.max((u[0] - u2[0]).abs()).max((u[1] - u2[1]).abs()).max(conn.abs());
    }
    Ok(worst)
}

/// Max over samples of |ẍ + Γ(ẋ, ẋ)| for the projection of a frame-bundle
/// flow line of a constant multiple of e1; the acceleration comes from
/// jets of the generating field, Γ from the metric.
pub fn geodesic_residual(s: &SurfaceMetric, lift: &Trajectory) -> Result<f64> {
    let fb = frame_bundle_coframing(s)?;
    let mut worst: f64 = 0.0;
    for (x, v) in lift.x.iter().zip(&lift.v) {
        let w = fb.omega_jet(x, 1)?;
        let inv = jet_inverse(&w).ok_or_else(|| Error::SingularCoframe(x.clone()))?;
        let field: Vec<&Jet> = (0..3).map(|k| &inv[k][0]).collect();
        let fv: Vec<f64> = field.iter().map(|j| j.value()).collect();
        let lambda = DVector::from_column_slice(v).dot(&DVector::from_vec(fv.clone())) / fv.iter().map(|a| a * a).sum::<f64>();
        let gam = s.christoffel(&x[..2])?;
        for k in 0..2 {
            let acc: f64 = lambda * lambda * (0..3).map(|j| field[k].partial(&[j]) * fv[j]).sum::<f64>();
            let g: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| gam[k][i][j] * v[i] * v[j]).sum();
            worst = worst.max((acc + g).abs());
        }
    }
    Ok(worst)
}
