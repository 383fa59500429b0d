//! First variation of Cartan geometry morphisms and the Jacobi equation of
//! projective connections.

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::{affine_to_projective, euclid_to_affine, geodesic_inclusion, LocalModel, Mat, ModelMorphism};
use crate::cartan::{builtin_gauge, bundle_rhs, curvature, rotation_frame, same_model, source_driver, transport_tensor, CartanGauge, Frames};
use crate::development::SourceCurve;
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::ode::{integrate, OdeOptions, Status, Trajectory};
use crate::tensor::Tensor;

/// A morphism from the bundle lift of a source base curve, given by the
/// frames it starts from (see [`crate::cartan::develop_bundle_curve`]).
#[derive(Clone, Debug)]
pub struct MorphismCurve {
    pub curve: SourceCurve,
    pub frames: Frames,
    pub t_span: (f64, f64),
}

impl MorphismCurve {
    /// The curve c(t) = t of the geodesic model through the identity frame,
    /// developed from (x1, h1): a geodesic of a projective connection.
    pub fn geodesic(x1: Vec<f64>, h1: Mat, t_end: f64) -> Result<MorphismCurve> {
        Ok(MorphismCurve { curve: SourceCurve::Exprs(vec![parse("t")?]), frames: Frames { h0: Mat::identity(3, 3), x1, h1 }, t_span: (0.0, t_end) })
    }
}

/// The projective frame induced by rotating an orthonormal frame by `angle`.
pub fn projective_rotation(angle: f64) -> Result<Mat> {
    euclid_to_affine(2)?.then(&affine_to_projective(2)?)?.map_group(&rotation_frame(angle)?)
}

/// Coordinates on g1/Φg0 through a complement W of Φg0. The first `q_dim`
/// columns of W also span Q = g1/(Φg0 + h1); the rest lie in h1.
#[derive(Clone, Debug)]
pub struct Complement {
    pub w: Mat,
    pub q_dim: usize,
    /// Rows of [Φg0 | W]⁻¹ belonging to W: g1 → g1/Φg0.
    proj: Mat,
}

fn rank(m: &Mat) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max().max(1.0);
    sv.iter().filter(|s| **s > 1e-9 * top).count()
}

fn hstack(cols: &[DVector<f64>], rows: usize) -> Mat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

impl Complement {
    pub fn new(phi: &ModelMorphism) -> Result<Complement> {
        let d1 = phi.target.dim();
        let h1 = phi.target.h_dim;
        let image: Vec<DVector<f64>> = phi.lie_map.column_iter().map(|c| c.into_owned()).collect();
        let mut span = Vec::new();
        for c in image {
            let mut trial = span.clone();
            trial.push(c);
            if rank(&hstack(&trial, d1)) == trial.len() {
                span = trial;
            }
        }
        let e = |i: usize| DVector::from_fn(d1, |k, _| f64::from(u8::from(k == i)));
        let mut picked: Vec<DVector<f64>> = Vec::new();
        let mut with_h: Vec<DVector<f64>> = span.iter().cloned().chain((0..h1).map(e)).collect();
        let base = rank(&hstack(&with_h, d1));
        for i in h1..d1 {
            with_h.push(e(i));
            if rank(&hstack(&with_h, d1)) == base + picked.len() + 1 {
                picked.push(e(i));
            } else {
                with_h.pop();
            }
        }
        let q_dim = picked.len();
        for i in 0..h1 {
            let mut trial: Vec<DVector<f64>> = span.iter().chain(&picked).cloned().collect();
            trial.push(e(i));
            if rank(&hstack(&trial, d1)) == trial.len() {
                picked.push(e(i));
            }
        }
        let full: Vec<DVector<f64>> = span.iter().chain(&picked).cloned().collect();
        let inv = hstack(&full, d1).try_inverse().ok_or_else(|| Error::Invalid("no complement of Φg0".into()))?;
        let proj = inv.rows(span.len(), picked.len()).into_owned();
        Ok(Complement { w: hstack(&picked, d1), q_dim, proj })
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Coordinates of v + Φg0.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.proj * v
    }

    /// ρ(u) for u ∈ g1 (already mapped by Φ) on g1/Φg0.
    pub fn rho(&self, model: &LocalModel, u: &[f64]) -> Mat {
        &self.proj * model.g.ad(u) * &self.w
    }
}

/// R(x, h)(A, B): a ∈ (g0/h0)* ⊗ Q* ⊗ (g1/Φg0), stored [out, A, B].
#[derive(Clone, Debug, Serialize)]
pub struct MorphismCurvature {
    pub point: Vec<f64>,
    pub tensor: Tensor,
    /// Largest g1/Φg0 component of K1(Φ̄A, Φ̄B) over basis pairs of g0/h0.
    pub lift_residual: f64,
}

/// Contract K1 (already at the right frame) into R.
fn contract(k1: &Tensor, phi: &ModelMorphism, comp: &Complement) -> (Tensor, f64) {
    let h1 = phi.target.h_dim;
    let q1 = phi.target.base_dim();
    let qb = phi.quotient_block();
    let q0 = qb.ncols();
    let d1 = phi.target.dim();
    let eval = |u: &DVector<f64>, v: &DVector<f64>| {
        let mut out = DVector::zeros(d1);
        for c in 0..d1 {
            for i in 0..q1 {
                for j in 0..q1 {
                    out[c] += k1.get(&[c, i, j]) * u[i] * v[j];
                }
            }
        }
        comp.project(&out)
    };
    let bar = |v: DVector<f64>| v.rows(h1, q1).into_owned();
    let mut r = Tensor::zeros(&[comp.dim(), q0, comp.q_dim]);
    let mut resid: f64 = 0.0;
    for a in 0..q0 {
        let u = qb.column(a).into_owned();
        for b in 0..comp.q_dim {
            let v = bar(comp.w.column(b).into_owned());
            let val = eval(&u, &v);
            for o in 0..comp.dim() {
                r.set(&[o, a, b], val[o]);
            }
        }
        for b in 0..q0 {
            resid = resid.max(eval(&u, &qb.column(b).into_owned()).amax());
        }
    }
    (r, resid)
}

fn morphism_curvature_at(g1: &CartanGauge, phi: &ModelMorphism, comp: &Complement, x: &[f64], h: &Mat) -> Result<MorphismCurvature> {
    let k = transport_tensor(&g1.model, h, &curvature(g1, x)?)?;
    let (tensor, lift_residual) = contract(&k, phi, comp);
    if lift_residual > 1e-6 {
        return Err(Error::IllDefined(lift_residual));
    }
    Ok(MorphismCurvature { point: x.to_vec(), tensor, lift_residual })
}

/// R at the identity section over x1.
pub fn morphism_curvature(g1: &CartanGauge, phi: &ModelMorphism, x1: &[f64]) -> Result<MorphismCurvature> {
    if !same_model(&phi.target, &g1.model) {
        return Err(Error::BadMorphism(format!("{} does not map into {}", phi.name, g1.model.name)));
    }
    let comp = Complement::new(phi)?;
    let size = g1.model.g.size;
    morphism_curvature_at(g1, phi, &comp, x1, &Mat::identity(size, size))
}

#[derive(Clone, Debug, Serialize)]
pub struct VariationSolution {
    pub t: Vec<f64>,
    /// a(t) in the coordinates of [`Complement`].
    pub a: Vec<Vec<f64>>,
    pub status: Status,
}

fn pack(x: &[f64], h: &Mat, a: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.extend(h.iter());
    s.extend_from_slice(a);
    s
}

/// Joint right-hand side for (x, h, a_1, …, a_m) with m copies of the
/// linear variation equation.
struct Layout {
    n: usize,
    size: usize,
}

impl Layout {
    fn split<'s>(&self, s: &'s [f64]) -> (&'s [f64], Mat, &'s [f64]) {
        let k = self.n + self.size * self.size;
        (&s[..self.n], Mat::from_column_slice(self.size, self.size, &s[self.n..k]), &s[k..])
    }
}

fn check_curve(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism, mc: &MorphismCurve) -> Result<()> {
    if !same_model(&phi.source, &g0.model) || !same_model(&phi.target, &g1.model) {
        return Err(Error::BadMorphism(format!("{} does not map {} to {}", phi.name, g0.model.name, g1.model.name)));
    }
    if !g1.chart.contains(&mc.frames.x1) {
        return Err(Error::OutsideChart(mc.frames.x1.clone()));
    }
    Ok(())
}

/// Integrate a family of variations along the morphism curve.
fn integrate_family<F>(g1: &CartanGauge, driver: F, frames: &Frames, a0: &[Vec<f64>], t_span: (f64, f64), tol: f64, step: &dyn Fn(&[f64], &Mat, &[f64], &[f64]) -> Result<Vec<f64>>) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let lay = Layout { n: g1.chart_dim(), size: g1.model.g.size };
    let flat: Vec<f64> = a0.iter().flatten().copied().collect();
    let m = a0.first().map_or(0, Vec::len);
    let rhs = |t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let (x, h, a) = lay.split(s);
        let b = driver(t)?;
        let (xd, hd) = bundle_rhs(g1, x, &h, &b)?;
        let mut out = pack(&xd, &hd, &[]);
        for col in a.chunks(m.max(1)) {
            out.extend(step(x, &h, &b, col)?);
        }
        Ok(out)
    };
    let inside = |s: &[f64]| g1.chart.contains(&s[..lay.n]);
    integrate(rhs, inside, &pack(&frames.x1, &frames.h1, &flat), t_span.0, t_span.1, OdeOptions::new(tol))
}

fn generic_step<'a>(g1: &'a CartanGauge, phi: &'a ModelMorphism, comp: &'a Complement) -> impl Fn(&[f64], &Mat, &[f64], &[f64]) -> Result<Vec<f64>> + 'a {
    move |x, h, b, a| {
        let r = morphism_curvature_at(g1, phi, comp, x, h)?.tensor;
        let h1 = phi.target.h_dim;
        // Φ̄ω̄0 in g0/h0 coordinates: solve through the quotient block
        let qb = phi.quotient_block();
        let bb = DVector::from_column_slice(&b[h1..]);
        let w0 = qb.clone().svd(true, true).solve(&bb, 1e-12).map_err(|e| Error::Invalid(e.to_string()))?;
        let av = DVector::from_column_slice(a);
        let mut da = -(comp.rho(&g1.model, b) * &av);
        for o in 0..comp.dim() {
            for i in 0..qb.ncols() {
                for j in 0..comp.q_dim {
                    da[o] += r.get(&[o, i, j]) * w0[i] * av[j];
                }
            }
        }
        Ok(da.iter().copied().collect())
    }
}

/// Integrate ∇a = R(Φω̄0, ā) along the bundle development of the curve.
pub fn integrate_first_variation(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism, mc: &MorphismCurve, a0: &[f64], tol: f64) -> Result<VariationSolution> {
    check_curve(g0, g1, phi, mc)?;
    let comp = Complement::new(phi)?;
    if a0.len() != comp.dim() || a0.iter().any(|v| !v.is_finite()) {
        return Err(Error::SizeMismatch(format!("a0 must have {} finite entries", comp.dim())));
    }
    let driver = source_driver(g0, phi, &mc.curve, &mc.frames.h0)?;
    let step = generic_step(g1, phi, &comp);
    let tr = integrate_family(g1, driver, &mc.frames, &[a0.to_vec()], mc.t_span, tol, &step)?;
    let k = g1.chart_dim() + g1.model.g.size.pow(2);
    Ok(VariationSolution { t: tr.t.clone(), a: tr.x.iter().map(|s| s[k..].to_vec()).collect(), status: tr.status })
}

/// Solution of the projective Jacobi system, split as (a^I_0, a^I_1).
#[derive(Clone, Debug, Serialize)]
pub struct JacobiSolution {
    pub t: Vec<f64>,
    pub a_0: Vec<Vec<f64>>,
    pub a_1: Vec<Vec<f64>>,
    pub status: Status,
}

/// The geodesic model: pointed lines, one base coordinate, ω0 = E10 dx.
pub fn geodesic_model_gauge() -> Result<CartanGauge> {
    builtin_gauge("flat(sl3-projective-pointed-line)")
}

/// Right-hand side of the displayed projective system, read off the
/// matrices of ω (= b) and K1(e1, eJ) with indices 0, 1, I.
fn projective_step(g: &CartanGauge) -> impl Fn(&[f64], &Mat, &[f64], &[f64]) -> Result<Vec<f64>> + '_ {
    move |x, h, b, a| {
        let n1 = g.model.g.size;
        let m = n1 - 2;
        let om = g.model.g.element(b);
        let k = transport_tensor(&g.model, h, &curvature(g, x)?)?;
        // quotient index i ↔ E_{i+1,0}
        let kmat = |j: usize| {
            let coeffs: Vec<f64> = (0..g.model.dim()).map(|c| k.get(&[c, 0, j])).collect();
            g.model.g.element(&coeffs)
        };
        let (a0, a1) = a.split_at(m);
        let mut d0 = vec![0.0; m];
        let mut d1 = vec![0.0; m];
        let ks: Vec<Mat> = (1..=m).map(kmat).collect();
        for i in 0..m {
            let ii = i + 2;
            d0[i] = a0[i] * om[(0, 0)] + a1[i] * om[(1, 0)];
            d1[i] = a0[i] * om[(0, 1)] + a1[i] * om[(1, 1)];
            for j in 0..m {
                let jj = j + 2;
                d0[i] += -om[(ii, jj)] * a0[j] + ks[j][(ii, 0)] * om[(1, 0)] * a0[j];
                d1[i] += -om[(ii, jj)] * a1[j] + ks[j][(ii, 1)] * om[(1, 0)] * a0[j];
            }
        }
        d0.extend(d1);
        Ok(d0)
    }
}

fn check_projective(g: &CartanGauge, mc: &MorphismCurve) -> Result<(CartanGauge, ModelMorphism)> {
    let phi = geodesic_inclusion()?;
    if !same_model(&phi.target, &g.model) {
        return Err(Error::BadMorphism(format!("{} is not a projective connection on a surface", g.name)));
    }
    if mc.curve.dim() != 1 {
        return Err(Error::SizeMismatch("the geodesic model has a 1-dimensional base".into()));
    }
    let g0 = geodesic_model_gauge()?;
    check_curve(&g0, g, &phi, mc)?;
    Ok((g0, phi))
}

/// Torsion entries K^I_{01J} along the samples of a trajectory.
fn torsion_along(g: &CartanGauge, tr: &Trajectory) -> Result<f64> {
    let n = g.chart_dim();
    let size = g.model.g.size;
    let m = size - 2;
    let mut worst: f64 = 0.0;
    for s in &tr.x {
        let h = Mat::from_column_slice(size, size, &s[n..n + size * size]);
        let k = transport_tensor(&g.model, &h, &curvature(g, &s[..n])?)?;
        for j in 1..=m {
            let coeffs: Vec<f64> = (0..g.model.dim()).map(|c| k.get(&[c, 0, j])).collect();
            let km = g.model.g.element(&coeffs);
            for i in 2..size {
                worst = worst.max(km[(i, 0)].abs());
            }
        }
    }
    Ok(worst)
}

fn run_projective(g: &CartanGauge, mc: &MorphismCurve, a0: &[Vec<f64>], t_span: (f64, f64), frames: &Frames, tol: f64) -> Result<Trajectory> {
    let (g0, phi) = check_projective(g, mc)?;
    let driver = source_driver(&g0, &phi, &mc.curve, &mc.frames.h0)?;
    let step = projective_step(g);
    let tr = integrate_family(g, driver, frames, a0, t_span, tol, &step)?;
    let t = torsion_along(g, &tr)?;
    if t > 1e-6 {
        return Err(Error::NotTorsionFree(t));
    }
    Ok(tr)
}

/// Integrate the projective Jacobi system along the development of a curve
/// of the geodesic model; a0 = (a^I_0, a^I_1).
pub fn projective_jacobi(g: &CartanGauge, geodesic: &MorphismCurve, a0: &[f64], tol: f64) -> Result<JacobiSolution> {
    let m = g.model.g.size.saturating_sub(2);
    if a0.len() != 2 * m {
        return Err(Error::SizeMismatch(format!("a0 must have {} entries", 2 * m)));
    }
    let tr = run_projective(g, geodesic, &[a0.to_vec()], geodesic.t_span, &geodesic.frames, tol)?;
    let k = g.chart_dim() + g.model.g.size.pow(2);
    Ok(JacobiSolution {
        t: tr.t.clone(),
        a_0: tr.x.iter().map(|s| s[k..k + m].to_vec()).collect(),
        a_1: tr.x.iter().map(|s| s[k + m..k + 2 * m].to_vec()).collect(),
        status: tr.status,
    })
}

/// Determinant of the a^I_0 block of the solutions with a^I_0(0) = 0 and
/// a^I_1(0) = e_J, from a joint state.
fn det_block(s: &[f64], k: usize, m: usize) -> f64 {
    let block = Mat::from_fn(m, m, |i, j| s[k + j * 2 * m + i]);
    block.determinant()
}

/// First t* in (t0, t_max] where a nonzero Jacobi field with a^I_0(t0) = 0
/// has a^I_0(t*) = 0; None if there is none.
pub fn conjugate_point(g: &CartanGauge, geodesic: &MorphismCurve, t_max: f64, tol: f64) -> Result<Option<f64>> {
    let m = g.model.g.size.saturating_sub(2);
    let a0: Vec<Vec<f64>> = (0..m).map(|j| (0..2 * m).map(|i| f64::from(u8::from(i == m + j))).collect()).collect();
    let t0 = geodesic.t_span.0;
    let tr = run_projective(g, geodesic, &a0, (t0, t_max), &geodesic.frames, tol)?;
    let n = g.chart_dim();
    let size = g.model.g.size;
    let k = n + size * size;
    // skip the zero at the start: compare signs from the first step on
    let mut prev: Option<(usize, f64)> = None;
    for (i, s) in tr.x.iter().enumerate().skip(1) {
        let d = det_block(s, k, m);
        if let Some((pi, pd)) = prev {
            if d == 0.0 || pd.signum() != d.signum() {
                return bisect(g, geodesic, &tr, pi, i, k, m, tol).map(Some);
            }
        }
        prev = Some((i, d));
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn bisect(g: &CartanGauge, geodesic: &MorphismCurve, tr: &Trajectory, lo_i: usize, hi_i: usize, k: usize, m: usize, tol: f64) -> Result<f64> {
    let n = g.chart_dim();
    let size = g.model.g.size;
    let (mut lo, mut hi) = (tr.t[lo_i], tr.t[hi_i]);
    let start = &tr.x[lo_i];
    let sign_lo = det_block(start, k, m).signum();
    let frames = Frames { h0: geodesic.frames.h0.clone(), x1: start[..n].to_vec(), h1: Mat::from_column_slice(size, size, &start[n..k]) };
    let a: Vec<Vec<f64>> = start[k..].chunks(2 * m).map(<[f64]>::to_vec).collect();
    let t_lo = lo;
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        let part = run_projective(g, geodesic, &a, (t_lo, mid), &frames, tol)?;
        if !part.status.is_completed() {
            return Err(Error::IntegrationEscaped);
        }
        if det_block(part.last(), k, m).signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
