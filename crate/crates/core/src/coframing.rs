//! Coframings on a single chart: constant vector fields, their flows,
//! canonical lengths, torsion towers and bracket towers.

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::Mat;
use crate::error::{Error, Result};
use crate::expr::{parse_in, Expr, Jet, Program};
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::tensor::Tensor;

/// Box with optional infinite sides plus an optional `inside > 0` predicate.
#[derive(Clone, Debug)]
pub struct Chart {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub inside: Option<Expr>,
    prog: Option<Arc<Program>>,
}

impl Chart {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, inside: Option<Expr>) -> Result<Chart> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::SizeMismatch("chart bounds".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a.is_nan() || b.is_nan() || a > b) {
            return Err(Error::Invalid("chart box is empty".into()));
        }
        if let Some(p) = &inside {
            if p.arity() > lo.len() {
                return Err(Error::UnknownIdentifier(format!("x{}", p.arity())));
            }
        }
        let prog = inside.as_ref().map(|p| Arc::new(Program::compile(p)));
        Ok(Chart { lo, hi, inside, prog })
    }

    pub fn unbounded(n: usize) -> Chart {
        Chart::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n], None).expect("valid chart")
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Chart> {
        Chart::new(lo, hi, None)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if x.iter().zip(self.lo.iter().zip(&self.hi)).any(|(v, (a, b))| v < a || v > b) {
            return false;
        }
        match &self.prog {
            Some(p) => matches!(p.eval(x, 0.0), Ok(v) if v > 0.0),
            None => true,
        }
    }

    /// The box with infinite sides replaced by finite stand-ins, used for
    /// sampling.
    pub fn finite_box(&self) -> (Vec<f64>, Vec<f64>) {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| match (a.is_finite(), b.is_finite()) {
                (true, true) => (a, b),
                (true, false) => (a, a + 4.0),
                (false, true) => (b - 4.0, b),
                (false, false) => (-2.0, 2.0),
            })
            .unzip()
    }

    /// Tensor grid with `k` interior nodes per axis, filtered by the
    /// predicate. Falls back to Halton points when `k^n` exceeds 4096.
    pub fn sample_grid(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let (lo, hi) = self.finite_box();
        let node = |i: usize, u: f64| lo[i] + u * (hi[i] - lo[i]);
        let total = (k as f64).powi(n as i32);
        let pts: Vec<Vec<f64>> = if total > 4096.0 {
            (1..=4096).map(|s| (0..n).map(|i| node(i, halton(s, i))).collect()).collect()
        } else {
            let total = total as usize;
            (0..total)
                .map(|mut s| {
                    (0..n)
                        .map(|i| {
                            let r = s % k;
                            s /= k;
                            node(i, (r as f64 + 1.0) / (k as f64 + 1.0))
                        })
                        .collect()
                })
                .collect()
        };
        pts.into_iter().filter(|p| self.contains(p)).collect()
    }
}

/// Halton coordinate `dim` of sample `index` (1-based).
pub fn halton(index: usize, dim: usize) -> f64 {
    const PRIMES: [u8; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];
    halton::number(PRIMES[dim % PRIMES.len()], index)
}

/// Anything that supplies an invertible frame matrix on a chart.
pub trait Coframe: Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    fn omega_at(&self, x: &[f64]) -> Result<Mat>;
    /// Coordinate index of a periodic frame angle, if any.
    fn frame_angle(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct Coframing {
    pub name: String,
    pub chart: Chart,
    /// Row i holds the dx-components of the i-th form.
    pub omega: Vec<Vec<Expr>>,
    pub inner: Mat,
    /// Coordinate index of a frame angle, when the coframing lives on a
    /// planar frame bundle; monodromy reports its change as a rotation.
    pub frame_angle: Option<usize>,
    progs: Arc<Vec<Program>>,
}

impl Coframing {
    pub fn new(name: &str, chart: Chart, omega: Vec<Vec<Expr>>, inner: Option<Mat>) -> Result<Coframing> {
        let n = chart.dim();
        if omega.len() != n || omega.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch(format!("coframe must be {n}x{n}")));
        }
        for e in omega.iter().flatten() {
            if e.arity() > n {
                return Err(Error::UnknownIdentifier(format!("x{}", e.arity())));
            }
            if e.uses_t() {
                return Err(Error::UnknownIdentifier("t".into()));
            }
        }
        let inner = inner.unwrap_or_else(|| Mat::identity(n, n));
        if inner.nrows() != n || inner.ncols() != n {
            return Err(Error::SizeMismatch("inner product".into()));
        }
        if (&inner - inner.transpose()).amax() > 1e-12 || inner.clone().cholesky().is_none() {
            return Err(Error::Invalid("inner product must be symmetric positive definite".into()));
        }
        let progs = Arc::new(omega.iter().flatten().map(Program::compile).collect());
        Ok(Coframing { name: name.to_string(), chart, omega, inner, frame_angle: None, progs })
    }

    pub fn from_strings(name: &str, chart: Chart, rows: &[Vec<&str>]) -> Result<Coframing> {
        let n = chart.dim();
        let omega = rows.iter().map(|r| r.iter().map(|s| parse_in(s, n)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        Coframing::new(name, chart, omega, None)
    }

    pub fn with_frame_angle(mut self, k: usize) -> Coframing {
        self.frame_angle = Some(k);
        self
    }

    pub fn with_inner(mut self, inner: Mat) -> Result<Coframing> {
        let c = Coframing::new(&self.name, self.chart.clone(), self.omega.clone(), Some(inner))?;
        self.inner = c.inner;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Certify invertibility: |det| ≥ 1e-8 on the 5ⁿ sample grid.
    pub fn validate(&self) -> Result<()> {
        for p in self.chart.sample_grid(5) {
            let w = self.omega_at(&p)?;
            if !(w.determinant().abs() >= 1e-8) {
                return Err(Error::SingularCoframe(p));
            }
        }
        Ok(())
    }

    pub fn omega_at(&self, x: &[f64]) -> Result<Mat> {
        let n = self.dim();
        let mut m = Mat::zeros(n, n);
        for (k, p) in self.progs.iter().enumerate() {
            m[(k / n, k % n)] = p.eval(x, 0.0)?;
        }
        Ok(m)
    }

    pub fn omega_jet(&self, x: &[f64], order: usize) -> Result<Vec<Vec<Jet>>> {
        self.omega.iter().map(|r| r.iter().map(|e| e.eval_jet(x, order)).collect()).collect()
    }

    pub fn require_inside(&self, x: &[f64]) -> Result<()> {
        if self.chart.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideChart(x.to_vec()))
        }
    }
}

impl Coframe for Coframing {
    fn dim(&self) -> usize {
        Coframing::dim(self)
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.chart.contains(x)
    }
    fn omega_at(&self, x: &[f64]) -> Result<Mat> {
        Coframing::omega_at(self, x)
    }
    fn frame_angle(&self) -> Option<usize> {
        self.frame_angle
    }
}

/// Inverse of a frame matrix, refusing Frobenius condition numbers above 1e12.
pub fn frame_inverse(w: &Mat, x: &[f64]) -> Result<Mat> {
    let inv = w.clone().try_inverse().ok_or_else(|| Error::SingularCoframe(x.to_vec()))?;
    let cond = w.norm() * inv.norm();
    if !(cond <= 1e12) {
        return Err(Error::SingularCoframe(x.to_vec()));
    }
    Ok(inv)
}

fn solve_frame(w: &Mat, v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let inv = frame_inverse(w, x)?;
    Ok((0..v.len()).map(|i| (0..v.len()).map(|j| inv[(i, j)] * v[j]).sum()).collect())
}

/// The vector field dual to `v`: ω(x)⁻¹ v.
pub fn constant_field(cof: &dyn Coframe, v: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if v.len() != cof.dim() {
        return Err(Error::SizeMismatch("field vector".into()));
    }
    if !cof.contains(x) {
        return Err(Error::OutsideChart(x.to_vec()));
    }
    solve_frame(&cof.omega_at(x)?, v, x)
}

/// Time-dependent V-vector driving a flow.
#[derive(Clone, Debug)]
pub enum Driver {
    Constant(Vec<f64>),
    Exprs(Vec<Expr>),
    /// `first` before time `at`, `second` afterwards.
    Switch { at: f64, first: Vec<f64>, second: Vec<f64> },
}

impl Driver {
    pub fn dim(&self) -> usize {
        match self {
            Driver::Constant(v) => v.len(),
            Driver::Exprs(e) => e.len(),
            Driver::Switch { first, .. } => first.len(),
        }
    }

    /// Compiled evaluator.
    pub fn compile(&self) -> impl Fn(f64) -> Result<Vec<f64>> + Sync + '_ {
        let progs: Vec<Program> = match self {
            Driver::Exprs(e) => e.iter().map(Program::compile).collect(),
            _ => Vec::new(),
        };
        move |t| match self {
            Driver::Constant(v) => Ok(v.clone()),
            Driver::Exprs(_) => progs.iter().map(|p| p.eval(&[], t)).collect(),
            Driver::Switch { at, first, second } => Ok(if t < *at { first.clone() } else { second.clone() }),
        }
    }
}

/// Integrate x' = ω(x)⁻¹ f(t) for an arbitrary driver closure.
pub fn flow_with<F>(cof: &dyn Coframe, f: F, x0: &[f64], t0: f64, t1: f64, opts: OdeOptions) -> Result<Trajectory>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if x0.len() != cof.dim() {
        return Err(Error::SizeMismatch("start point".into()));
    }
    let rhs = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let v = f(t)?;
        solve_frame(&cof.omega_at(x)?, &v, x)
    };
    integrate(rhs, |x| cof.contains(x), x0, t0, t1, opts)
}

pub fn flow(cof: &dyn Coframe, driver: &Driver, x0: &[f64], t0: f64, t1: f64, opts: OdeOptions) -> Result<Trajectory> {
    if driver.dim() != cof.dim() {
        return Err(Error::SizeMismatch("driver dimension".into()));
    }
    let f = driver.compile();
    flow_with(cof, f, x0, t0, t1, opts)
}

/// Torsion T⁽⁰⁾ and its frame derivatives at a point. `tensors[j]` has
/// shape `[n; j + 3]`, indexed (value, slot, slot, derivative slots...).
#[derive(Clone, Debug, Serialize)]
pub struct TorsionTower {
    pub point: Vec<f64>,
    pub tensors: Vec<Tensor>,
}

impl TorsionTower {
    pub fn depth(&self) -> usize {
        self.tensors.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.tensors[0].shape[0]
    }

    /// T⁽⁰⁾(v, w).
    pub fn apply(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let t = &self.tensors[0];
        let n = self.dim();
        (0..n).map(|i| (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| t.get(&[i, a, b]) * v[a] * w[b]).sum()).collect()
    }
}

/// Inverse of a jet matrix by Gauss–Jordan elimination with partial
/// pivoting on the values.
pub(crate) fn jet_inverse(w: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = w.len();
    let (nv, ord) = (w[0][0].nvars(), w[0][0].order());
    let mut a: Vec<Vec<Jet>> = w.to_vec();
    let mut b: Vec<Vec<Jet>> = (0..n).map(|i| (0..n).map(|j| Jet::constant(nv, ord, f64::from(u8::from(i == j)))).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))?;
        if a[piv][col].value() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let r = a[col][col].recip()?;
        for j in 0..n {
            a[col][j] = &a[col][j] * &r;
            b[col][j] = &b[col][j] * &r;
        }
        for i in 0..n {
            if i == col || a[i][col].coeffs().iter().all(|&c| c == 0.0) {
                continue;
            }
            let f = a[i][col].clone();
            for j in 0..n {
                a[i][j] = &a[i][j] - &(&f * &a[col][j]);
                b[i][j] = &b[i][j] - &(&f * &b[col][j]);
            }
        }
    }
    Some(b)
}

fn index_list(n: usize, rank: usize) -> Vec<Vec<usize>> {
    Tensor::zeros(&vec![n; rank]).indices().collect()
}

/// Torsion tower from coordinate jets of ω of order at least `p + 1`.
pub(crate) fn tower_from_jets(w: &[Vec<Jet>], x: &[f64], p: usize) -> Result<Vec<Tensor>> {
    let n = w.len();
    let winv = jet_inverse(&w.iter().map(|r| r.iter().map(|j| j.truncate(p)).collect()).collect::<Vec<_>>())
        .ok_or_else(|| Error::SingularCoframe(x.to_vec()))?;
    // dω in coordinates, then on the frame
    let mut m: Vec<Jet> = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for k in 0..n {
            for b in 0..n {
                let mut acc: Option<Jet> = None;
                for l in 0..n {
                    let d = &w[i][l].derivative(k) - &w[i][k].derivative(l);
                    let term = &d * &winv[l][b];
                    acc = Some(match acc {
                        Some(s) => &s + &term,
                        None => term,
                    });
                }
                m.push(acc.expect("n > 0"));
            }
        }
    }
    let mut cur: Vec<Jet> = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut acc: Option<Jet> = None;
                for k in 0..n {
                    let term = &winv[k][a] * &m[(i * n + k) * n + b];
                    acc = Some(match acc {
                        Some(s) => &s + &term,
                        None => term,
                    });
                }
                cur.push(acc.expect("n > 0"));
            }
        }
    }
    let mut out = Vec::with_capacity(p + 1);
    for j in 0..=p {
        let mut t = Tensor::zeros(&vec![n; j + 3]);
        t.data = cur.iter().map(Jet::value).collect();
        // exact antisymmetry in the two form slots
        let stride = n.pow(j as u32);
        for i in 0..n {
            for a in 0..n {
                for b in a..n {
                    for r in 0..stride {
                        let ab = ((i * n + a) * n + b) * stride + r;
                        let ba = ((i * n + b) * n + a) * stride + r;
                        let v = 0.5 * (t.data[ab] - t.data[ba]);
                        t.data[ab] = v;
                        t.data[ba] = -v;
                    }
                }
            }
        }
        out.push(t);
        if j == p {
            break;
        }
        let derivs: Vec<Vec<Jet>> = cur.iter().map(|e| (0..n).map(|k| e.derivative(k)).collect()).collect();
        let mut next = Vec::with_capacity(cur.len() * n);
        for d in &derivs {
            for c in 0..n {
                let mut acc = &d[0] * &winv[0][c];
                for k in 1..n {
                    acc = &acc + &(&d[k] * &winv[k][c]);
                }
                next.push(acc);
            }
        }
        cur = next;
    }
    Ok(out)
}

/// T⁽⁰⁾..T⁽ᵖ⁾ at `x` for the convention dω = ½ T ω∧ω, so that
/// T(v, w) = dω(v⃗, w⃗) with dα(X, Y) = X α(Y) − Y α(X) − α([X, Y]).
pub fn torsion_tower(cof: &Coframing, x: &[f64], p: usize) -> Result<TorsionTower> {
    if p > 3 {
        return Err(Error::Invalid("torsion tower depth is at most 3".into()));
    }
    cof.require_inside(x)?;
    frame_inverse(&cof.omega_at(x)?, x)?;
    let w = cof.omega_jet(x, p + 1)?;
    Ok(TorsionTower { point: x.to_vec(), tensors: tower_from_jets(&w, x, p)? })
}

/// Frame-derivative data of a V-valued function: `d[i]` has shape
/// `[n; i + 1]` with entry (a, c1..ci) = (L_ci ... L_c1 f)^a.
type FrameJet = Vec<Tensor>;

/// ω of the iterated bracket [v⃗1, [v⃗2, ..., [v⃗(p-1), v⃗p]]] from torsion
/// data alone, through τ_{q+1}(v, ...) = L_v τ_q − T(v, τ_q).
pub fn bracket_tower(cof: &Coframing, x: &[f64], vs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = vs.len();
    if p == 0 || p > 4 {
        return Err(Error::Invalid("bracket tower takes 1 to 4 vectors".into()));
    }
    let n = cof.dim();
    if vs.iter().any(|v| v.len() != n) {
        return Err(Error::SizeMismatch("bracket vectors".into()));
    }
    if p == 1 {
        constant_field(cof, &vs[0], x)?;
        return Ok(vs[0].clone());
    }
    let tower = torsion_tower(cof, x, p - 2)?;
    Ok(bracket_from_tower(&tower.tensors, vs))
}

pub(crate) fn bracket_from_tower(torsion: &[Tensor], vs: &[Vec<f64>]) -> Vec<f64> {
    let p = vs.len();
    let n = vs[0].len();
    let mut f: FrameJet = (0..p).map(|i| Tensor::zeros(&vec![n; i + 1])).collect();
    f[0].data.clone_from(&vs[p - 1]);
    for s in (0..p - 1).rev() {
        let v = &vs[s];
        let k = f.len() - 2;
        let mut g: FrameJet = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let mut gi = Tensor::zeros(&vec![n; i + 1]);
            for idx in index_list(n, i + 1) {
                let (a, cs) = (idx[0], &idx[1..]);
                let mut val = 0.0;
                // Lie derivative along v: contract the first derivative slot
                for (b, vb) in v.iter().enumerate() {
                    if *vb != 0.0 {
                        let mut j = vec![a, b];
                        j.extend_from_slice(cs);
                        val += vb * f[i + 1].get(&j);
                    }
                }
                // Leibniz expansion of T(v, F) over ordered subsets of the slots
                for mask in 0u32..(1 << i) {
                    let sel: Vec<usize> = (0..i).filter(|q| mask & (1 << q) != 0).map(|q| cs[q]).collect();
                    let rest: Vec<usize> = (0..i).filter(|q| mask & (1 << q) == 0).map(|q| cs[q]).collect();
                    let t = &torsion[sel.len()];
                    let fr = &f[rest.len()];
                    for (b, vb) in v.iter().enumerate() {
                        if *vb == 0.0 {
                            continue;
                        }
                        for d in 0..n {
                            let mut ti = vec![a, b, d];
                            ti.extend_from_slice(&sel);
                            let mut fi = vec![d];
                            fi.extend_from_slice(&rest);
                            val -= vb * t.get(&ti) * fr.get(&fi);
                        }
                    }
                }
                gi.set(&idx, val);
            }
            g.push(gi);
        }
        f = g;
    }
    f[0].data.clone()
}

/// ∫ |ω(x')|_G dt over the samples by composite Simpson on the nonuniform
/// grid.
pub fn curve_length(cof: &Coframing, traj: &Trajectory) -> Result<f64> {
    let speeds = traj
        .x
        .iter()
        .zip(&traj.v)
        .map(|(x, v)| {
            let w = cof.omega_at(x)?;
            let u = &w * nalgebra::DVector::from_column_slice(v);
            Ok((u.dot(&(&cof.inner * &u))).max(0.0).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(simpson(&traj.t, &speeds))
}

/// Composite Simpson on a nonuniform grid; an odd trailing interval uses the
/// quadratic through the last three samples.
pub fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let m = t.len();
    if m < 2 {
        return 0.0;
    }
    if m == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < m {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        s += (h0 + h1) / 6.0 * ((2.0 - h1 / h0) * f[i] + (h0 + h1).powi(2) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < m {
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let (f0, f1, f2) = (f[i - 1], f[i], f[i + 1]);
        let c = (h0 * (f2 - f1) + h1 * (f0 - f1)) / (h0 * h1 * (h0 + h1));
        let b = (f2 - f1 - c * h1 * h1) / h1;
        s += f1 * h1 + b * h1 * h1 / 2.0 + c * h1.powi(3) / 3.0;
    }
    s
}

/// max over the grid of the max-abs entry of L_Y ω, from
/// (L_Y ω)ⁱⱼ = ∂ⱼ(ωⁱₖ Yᵏ) + Yᵏ(∂ₖωⁱⱼ − ∂ⱼωⁱₖ).
pub fn symmetry_residual(cof: &Coframing, y: &[Expr], grid: &[Vec<f64>]) -> Result<f64> {
    let n = cof.dim();
    if y.len() != n {
        return Err(Error::SizeMismatch("symmetry field".into()));
    }
    let mut worst: f64 = 0.0;
    for x in grid {
        let w = cof.omega_jet(x, 1)?;
        let yj: Vec<Jet> = y.iter().map(|e| e.eval_jet(x, 1)).collect::<Result<_>>()?;
        for i in 0..n {
            let contracted = (1..n).fold(&w[i][0] * &yj[0], |acc, k| &acc + &(&w[i][k] * &yj[k]));
            for j in 0..n {
                let mut v = contracted.partial(&[j]);
                for k in 0..n {
                    v += yj[k].value() * (w[i][j].partial(&[k]) - w[i][k].partial(&[j]));
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Named example coframings.
///
/// `flat-R<n>`, `sin-example` (dx/(2+sin(x²y)), dy), `parabola`
/// ((dx, dy)/f with f large along y = x²), `mc-so2`, `mc-so3`, `mc-se2`,
/// `mc-heisenberg` (Maurer–Cartan forms in the builtin algebra bases).
pub fn builtin_coframing(name: &str) -> Result<Coframing> {
    if let Some(n) = name.strip_prefix("flat-R").and_then(|d| d.parse::<usize>().ok()).filter(|&n| n > 0) {
        let omega = (0..n).map(|i| (0..n).map(|j| Expr::num(f64::from(u8::from(i == j)))).collect()).collect();
        return Coframing::new(name, Chart::unbounded(n), omega, None);
    }
    let box2 = |lo: [f64; 2], hi: [f64; 2]| Chart::boxed(lo.to_vec(), hi.to_vec());
    match name {
        "sin-example" => Coframing::from_strings(name, Chart::unbounded(2), &[vec!["1/(2+sin(x1^2*x2))", "0"], vec!["0", "1"]]),
        "parabola" => {
            let f = "(1 + (sqrt(1+4*x1^2)*(1+x1^2) - 1)*exp(-(x2-x1^2)^2))";
            let a = format!("1/{f}");
            Coframing::from_strings(name, box2([-3.0, -1.0], [3.0, 10.0])?, &[vec![&a, "0"], vec!["0", &a]])
        }
        "mc-so2" => Coframing::from_strings(name, Chart::unbounded(1), &[vec!["1"]]),
        "mc-se2" => {
            // g = (exp(x3 J), (x1, x2)); equals the orthonormal frame bundle
            // coframing (ω12, ω1, ω2) of the plane
            let c = Chart::unbounded(3);
            Ok(Coframing::from_strings(name, c, &[vec!["0", "0", "1"], vec!["cos(x3)", "-sin(x3)", "0"], vec!["sin(x3)", "cos(x3)", "0"]])?
                .with_frame_angle(2))
        }
        "mc-so3" => {
            // g = exp(x1 L1) exp(x2 L2) exp(x3 L3)
            let c = Chart::boxed(vec![-3.0, -1.4, -3.0], vec![3.0, 1.4, 3.0])?;
            Coframing::from_strings(
                name,
                c,
                &[vec!["cos(x2)*cos(x3)", "sin(x3)", "0"], vec!["-cos(x2)*sin(x3)", "cos(x3)", "0"], vec!["sin(x2)", "0", "1"]],
            )
        }
        "mc-heisenberg" => Coframing::from_strings(name, Chart::unbounded(3), &[vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "-x1", "1"]]),
        _ => Err(Error::Invalid(format!("unknown coframing `{name}`"))),
    }
}

/// Group element of the Maurer–Cartan coordinates used by
/// [`builtin_coframing`], as an ambient matrix.
pub fn mc_group_element(name: &str, x: &[f64]) -> Result<Mat> {
    use crate::algebra::{builtin_algebra, expm};
    match name {
        "mc-so2" => {
            let j = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
            expm(&(j * x[0]))
        }
        "mc-se2" => {
            let (c, s) = (x[2].cos(), x[2].sin());
            Ok(Mat::from_row_slice(3, 3, &[c, s, x[0], -s, c, x[1], 0.0, 0.0, 1.0]))
        }
        "mc-so3" => {
            let g = builtin_algebra("so3")?;
            Ok(expm(&(&g.basis[0] * x[0]))? * expm(&(&g.basis[1] * x[1]))? * expm(&(&g.basis[2] * x[2]))?)
        }
        "mc-heisenberg" => Ok(Mat::from_row_slice(3, 3, &[1.0, x[0], x[2], 0.0, 1.0, x[1], 0.0, 0.0, 1.0])),
        _ => Err(Error::Invalid(format!("no group element map for `{name}`"))),
    }
}

/// Algebra whose Maurer–Cartan form a builtin coframing is.
pub fn mc_algebra(name: &str) -> Result<crate::algebra::MatrixLieAlgebra> {
    use crate::algebra::{builtin_algebra, MatrixLieAlgebra};
    match name {
        "mc-so2" => MatrixLieAlgebra::new("so2", 2, vec![Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])]),
        "mc-se2" => builtin_algebra("se2"),
        "mc-so3" => builtin_algebra("so3"),
        "mc-heisenberg" => builtin_algebra("heisenberg"),
        _ => Err(Error::Invalid(format!("`{name}` is not a Maurer–Cartan coframing"))),
    }
}
