//! Cartan geometries in gauge form: a g-valued 1-form γ on a base chart,
//! standing for ω = Ad(h)⁻¹γ + h⁻¹dh on chart × H.

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::{affine_to_projective, builtin_model, euclid_to_affine, expm, sample_coefficients, LocalModel, Mat, ModelMorphism};
use crate::coframing::{jet_inverse, Chart, Coframing};
use crate::development::{curve_evaluator, SourceCurve};
use crate::error::{Error, Result};
use crate::expr::{parse_in, Expr, Jet, Program};
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::rolling::{builtin_surface, SurfaceMetric};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct CartanGauge {
    pub name: String,
    pub model: LocalModel,
    pub chart: Chart,
    /// γ = mix · atoms; disguises only touch `mix`.
    atoms: Vec<Vec<Expr>>,
    mix: Mat,
    /// First soldering row. Equals `model.h_dim` except after a lift, which
    /// keeps the original soldering and enlarges the base only formally.
    solder: usize,
    progs: Arc<Vec<Program>>,
}

fn snap(c: f64) -> f64 {
    const S: f64 = (1u64 << 40) as f64;
    (c * S).round() / S
}

impl CartanGauge {
    /// `gamma` has one row per basis vector of g and one column per chart
    /// coordinate.
    pub fn new(name: &str, model: LocalModel, chart: Chart, gamma: Vec<Vec<Expr>>) -> Result<CartanGauge> {
        let m = gamma.len();
        CartanGauge::assemble(name, model.h_dim, model, chart, gamma, Mat::identity(m, m))
    }

    pub fn from_strings(name: &str, model: LocalModel, chart: Chart, gamma: &[Vec<&str>]) -> Result<CartanGauge> {
        let n = chart.dim();
        let g = gamma.iter().map(|r| r.iter().map(|s| parse_in(s, n)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        CartanGauge::new(name, model, chart, g)
    }

    fn assemble(name: &str, solder: usize, model: LocalModel, chart: Chart, atoms: Vec<Vec<Expr>>, mix: Mat) -> Result<CartanGauge> {
        let n = chart.dim();
        if model.dim() - solder != n {
            return Err(Error::SizeMismatch(format!("chart dimension {n} but g/h has dimension {}", model.dim() - solder)));
        }
        if mix.nrows() != model.dim() || mix.ncols() != atoms.len() || atoms.iter().any(|r| r.len() != n) {
            return Err(Error::SizeMismatch(format!("gamma must be {}x{n}", model.dim())));
        }
        for e in atoms.iter().flatten() {
            if e.arity() > n {
                return Err(Error::UnknownIdentifier(format!("x{}", e.arity())));
            }
            if e.uses_t() {
                return Err(Error::UnknownIdentifier("t".into()));
            }
        }
        let progs = Arc::new(atoms.iter().flatten().map(Program::compile).collect());
        let g = CartanGauge { name: name.to_string(), model, chart, atoms, mix, solder, progs };
        for p in g.chart.sample_grid(5) {
            if !(g.soldering_at(&p)?.determinant().abs() >= 1e-8) {
                return Err(Error::SingularCoframe(p));
            }
        }
        Ok(g)
    }

    pub fn base_dim(&self) -> usize {
        self.model.base_dim()
    }

    pub fn chart_dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn is_lifted(&self) -> bool {
        self.solder != self.model.h_dim
    }

    /// γ as expressions (coefficients rounded to 2⁻⁴⁰ so equal compositions
    /// of linear maps print identically).
    pub fn gamma(&self) -> Vec<Vec<Expr>> {
        let n = self.chart_dim();
        (0..self.mix.nrows())
            .map(|a| {
                (0..n)
                    .map(|k| {
                        let terms: Vec<(f64, Expr)> = (0..self.atoms.len()).map(|m| (snap(self.mix[(a, m)]), self.atoms[m][k].clone())).collect();
                        Expr::linear_combination(&terms)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn gamma_at(&self, x: &[f64]) -> Result<Mat> {
        let n = self.chart_dim();
        let mut atoms = Mat::zeros(self.atoms.len(), n);
        for (k, p) in self.progs.iter().enumerate() {
            atoms[(k / n, k % n)] = p.eval(x, 0.0)?;
        }
        Ok(&self.mix * atoms)
    }

    /// The g/h block of γ(x) (n × n).
    pub fn soldering_at(&self, x: &[f64]) -> Result<Mat> {
        let g = self.gamma_at(x)?;
        Ok(g.rows(self.solder, g.nrows() - self.solder).into_owned())
    }

    /// The soldering form as a coframing of the base chart.
    pub fn soldering(&self) -> Result<Coframing> {
        let gamma = self.gamma();
        Coframing::new(&format!("{}-solder", self.name), self.chart.clone(), gamma[self.solder..].to_vec(), None)
    }

    fn gamma_jets(&self, x: &[f64], order: usize) -> Result<Vec<Vec<Jet>>> {
        let n = self.chart_dim();
        let atoms: Vec<Vec<Jet>> = self.atoms.iter().map(|r| r.iter().map(|e| e.eval_jet(x, order)).collect::<Result<_>>()).collect::<Result<_>>()?;
        let zero = Jet::constant(n, order, 0.0);
        Ok((0..self.mix.nrows())
            .map(|a| {
                (0..n)
                    .map(|k| {
                        let mut acc = zero.clone();
                        for (m, row) in atoms.iter().enumerate() {
                            let c = self.mix[(a, m)];
                            if c != 0.0 {
                                acc = &acc + &row[k].scale(c);
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect())
    }

    fn require_inside(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.chart_dim() && self.chart.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideChart(x.to_vec()))
        }
    }
}

/// Nonzero structure constants (c, a, b, C^c_ab).
fn nonzero_constants(model: &LocalModel) -> Vec<(usize, usize, usize, f64)> {
    let t = model.g.structure_constants();
    t.indices().filter_map(|i| {
        let v = t.get(&i);
        (v != 0.0).then_some((i[0], i[1], i[2], v))
    }).collect()
}

/// Curvature and its covariant derivatives as jets, in the original
/// (unlifted) quotient. Shape of level i: [g, q, q, g^i].
fn curvature_jets(g: &CartanGauge, x: &[f64], depth: usize) -> Result<Vec<(Vec<usize>, Vec<Jet>)>> {
    let n = g.chart_dim();
    let d = g.model.dim();
    let hs = g.solder;
    let consts = nonzero_constants(&g.model);
    let gam = g.gamma_jets(x, depth + 1)?;
    let theta: Vec<Vec<Jet>> = gam[hs..].iter().map(|r| r.iter().map(|j| j.truncate(depth)).collect()).collect();
    let tinv = jet_inverse(&theta).ok_or_else(|| Error::SingularCoframe(x.to_vec()))?;
    let zero = Jet::constant(n, depth, 0.0);
    // Ω_kl = ∂_k γ_l − ∂_l γ_k + [γ_k, γ_l]
    let mut omega = vec![zero.clone(); d * n * n];
    for c in 0..d {
        for k in 0..n {
            for l in 0..n {
                omega[(c * n + k) * n + l] = &gam[c][l].derivative(k) - &gam[c][k].derivative(l);
            }
        }
    }
    for &(c, a, b, v) in &consts {
        for k in 0..n {
            for l in 0..n {
                let t = (&gam[a][k] * &gam[b][l]).scale(v);
                let o = &mut omega[(c * n + k) * n + l];
                *o = &*o + &t;
            }
        }
    }
    let mut k0 = vec![zero.clone(); d * n * n];
    for c in 0..d {
        for i in 0..n {
            for j in 0..n {
                let mut acc = zero.clone();
                for k in 0..n {
                    for l in 0..n {
                        acc = &acc + &(&omega[(c * n + k) * n + l] * &(&tinv[k][i] * &tinv[l][j]));
                    }
                }
                k0[(c * n + i) * n + j] = acc;
            }
        }
    }
    let mut levels = vec![(vec![d, n, n], k0)];
    for _ in 0..depth {
        let (shape, f) = levels.last().expect("nonempty");
        let next = covariant_step(g, &gam, &tinv, &consts, shape, f);
        let mut s = shape.clone();
        s.push(d);
        levels.push((s, next));
    }
    Ok(levels)
}

/// One covariant derivative along the constant fields of the gauge at the
/// identity section; h-directions act through the infinitesimal equivariance.
fn covariant_step(g: &CartanGauge, gam: &[Vec<Jet>], tinv: &[Vec<Jet>], consts: &[(usize, usize, usize, f64)], shape: &[usize], f: &[Jet]) -> Vec<Jet> {
    let n = g.chart_dim();
    let d = g.model.dim();
    let hs = g.solder;
    let order = f[0].order() - 1;
    let zero = Jet::constant(n, order, 0.0);
    let rank = shape.len();
    let idx: Vec<Vec<usize>> = Tensor::zeros(shape).indices().collect();
    let offset = |i: &[usize]| i.iter().zip(shape).fold(0, |acc, (&a, &m)| acc * m + a);
    let derivs: Vec<Vec<Jet>> = f.iter().map(|e| (0..n).map(|k| e.derivative(k)).collect()).collect();
    let f_low: Vec<Jet> = f.iter().map(|e| e.truncate(order)).collect();
    let mut out = vec![zero.clone(); f.len() * d];
    for c in 0..d {
        // horizontal part X and vertical part ξ of the constant field e_c
        let x_part: Vec<Jet> = (0..n).map(|k| if c >= hs { tinv[k][c - hs].truncate(order) } else { zero.clone() }).collect();
        let xi: Vec<Jet> = (0..hs)
            .map(|i| {
                if c < hs {
                    Jet::constant(n, order, f64::from(u8::from(i == c)))
                } else {
                    let mut acc = zero.clone();
                    for k in 0..n {
                        acc = &acc - &(&gam[i][k] * &x_part[k]);
                    }
                    acc
                }
            })
            .collect();
        // ad(ξ)[u][v]
        let mut ad = vec![zero.clone(); d * d];
        for &(u, i, v, s) in consts {
            if i < hs {
                let e = &mut ad[u * d + v];
                *e = &*e + &xi[i].scale(s);
            }
        }
        for (pos, ix) in idx.iter().enumerate() {
            let mut acc = zero.clone();
            for k in 0..n {
                acc = &acc + &(&x_part[k] * &derivs[pos][k]);
            }
            // −ad(ξ) on the output slot
            let mut j = ix.clone();
            for p in 0..d {
                let a = &ad[ix[0] * d + p];
                if a.coeffs().iter().any(|&v| v != 0.0) {
                    j[0] = p;
                    acc = &acc - &(a * &f_low[offset(&j)]);
                }
            }
            // +ad(ξ) on each argument slot (quotient block for the two form slots)
            for s in 1..rank {
                let mut j = ix.clone();
                let quotient = s <= 2;
                let (lo, width) = if quotient { (hs, n) } else { (0, d) };
                for p in 0..width {
                    let a = &ad[(lo + p) * d + lo + ix[s]];
                    if a.coeffs().iter().any(|&v| v != 0.0) {
                        j[s] = p;
                        acc = &acc + &(a * &f_low[offset(&j)]);
                    }
                }
            }
            out[pos * d + c] = acc;
        }
    }
    out
}

fn to_tensor(shape: &[usize], jets: &[Jet]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    t.data = jets.iter().map(Jet::value).collect();
    let n = shape[1];
    let stride: usize = shape[3..].iter().product();
    for c in 0..shape[0] {
        for a in 0..n {
            for b in a..n {
                for r in 0..stride {
                    let ab = ((c * n + a) * n + b) * stride + r;
                    let ba = ((c * n + b) * n + a) * stride + r;
                    let v = 0.5 * (t.data[ab] - t.data[ba]);
                    t.data[ab] = v;
                    t.data[ba] = -v;
                }
            }
        }
    }
    t
}

/// Embed the two form slots of an unlifted tensor into the lifted quotient,
/// where the extra fibre directions come first and K vanishes on them.
fn pad_lift(g: &CartanGauge, t: Tensor) -> Tensor {
    if !g.is_lifted() {
        return t;
    }
    let q = g.chart_dim();
    let ql = g.base_dim();
    let off = ql - q;
    let emb = Mat::from_fn(ql, q, |i, j| f64::from(u8::from(i == j + off)));
    t.map_slot(1, &emb).map_slot(2, &emb)
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureTower {
    pub point: Vec<f64>,
    /// ∇ⁱK with shape [g, q, q, g^i] in model coordinates.
    pub tensors: Vec<Tensor>,
}

impl CurvatureTower {
    pub fn depth(&self) -> usize {
        self.tensors.len() - 1
    }
}

/// K at the identity section over x, from dγ + ½[γ, γ] on the soldering frame.
pub fn curvature(g: &CartanGauge, x: &[f64]) -> Result<Tensor> {
    Ok(curvature_tower(g, x, 0)?.tensors.remove(0))
}

pub fn curvature_tower(g: &CartanGauge, x: &[f64], depth: usize) -> Result<CurvatureTower> {
    if depth > 2 {
        return Err(Error::Invalid("curvature tower depth is at most 2".into()));
    }
    g.require_inside(x)?;
    let levels = curvature_jets(g, x, depth)?;
    Ok(CurvatureTower { point: x.to_vec(), tensors: levels.iter().map(|(s, j)| pad_lift(g, to_tensor(s, j))).collect() })
}

/// Quotient block of Ad(h): the induced action on g/h.
fn quotient_ad(model: &LocalModel, ad: &Mat) -> Mat {
    let hd = model.h_dim;
    ad.view((hd, hd), (model.base_dim(), model.base_dim())).into_owned()
}

/// ∇ⁱK at the point (x, h) of chart × H from its value at (x, 1):
/// Ad(h)⁻¹ on the output, ρ̄(h) on the form slots, Ad(h) on the others.
pub fn transport_tensor(model: &LocalModel, h: &Mat, t: &Tensor) -> Result<Tensor> {
    let ad = model.g.adjoint(h)?;
    let adinv = model.g.adjoint(&h.clone().try_inverse().ok_or_else(|| Error::Invalid("singular frame".into()))?)?;
    let q = quotient_ad(model, &ad).transpose();
    let mut out = t.map_slot(0, &adinv).map_slot(1, &q).map_slot(2, &q);
    let adt = ad.transpose();
    for k in 3..t.rank() {
        out = out.map_slot(k, &adt);
    }
    Ok(out)
}

/// Models agree when they have the same h and the same basis matrices;
/// names are only labels (`sl3-projective` and `sl3-projective-point`).
pub(crate) fn same_model(a: &LocalModel, b: &LocalModel) -> bool {
    a.h_dim == b.h_dim && a.g.size == b.g.size && a.dim() == b.dim() && a.g.basis.iter().zip(&b.g.basis).all(|(x, y)| (x - y).amax() <= 1e-14)
}

fn check_phi(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism) -> Result<()> {
    if !same_model(&phi.source, &g0.model) || !same_model(&phi.target, &g1.model) {
        return Err(Error::BadMorphism(format!("{} does not map {} to {}", phi.name, g0.model.name, g1.model.name)));
    }
    Ok(())
}

/// Pull a target tensor back along Φ: Φ̄ on the form slots, Φ on the others.
fn pull_back(t1: &Tensor, phi: &ModelMorphism) -> Tensor {
    let qb = phi.quotient_block().transpose();
    let lt = phi.lie_map.transpose();
    let mut out = t1.map_slot(1, &qb).map_slot(2, &qb);
    for k in 3..t1.rank() {
        out = out.map_slot(k, &lt);
    }
    out
}

/// Max-abs norms of ∇ʲK1·(Λ²Φ̄ ⊗ Φ^⊗j) − Φ·∇ʲK0 for j = 0..=depth.
pub fn phi_obstruction(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism, x0: &[f64], x1: &[f64], depth: usize) -> Result<Vec<f64>> {
    check_phi(g0, g1, phi)?;
    let t0 = curvature_tower(g0, x0, depth)?;
    let t1 = curvature_tower(g1, x1, depth)?;
    Ok(t0
        .tensors
        .iter()
        .zip(&t1.tensors)
        .map(|(a, b)| pull_back(b, phi).sub(&a.map_slot(0, &phi.lie_map)).norm())
        .collect())
}

/// The Φ-disguise: same chart, γ1 = Φ ∘ γ0.
pub fn disguise(g0: &CartanGauge, phi: &ModelMorphism) -> Result<CartanGauge> {
    if !same_model(&phi.source, &g0.model) {
        return Err(Error::NotADisguise(format!("{} is not modelled on {}", g0.name, phi.source.name)));
    }
    if g0.is_lifted() {
        return Err(Error::NotADisguise("lifted gauges cannot be disguised".into()));
    }
    let qb = phi.quotient_block();
    if qb.nrows() != qb.ncols() || !(qb.determinant().abs() >= 1e-8) {
        return Err(Error::NotADisguise(format!("{} is not a base isomorphism", phi.name)));
    }
    CartanGauge::assemble(
        &format!("{}({})", phi.name, g0.name),
        phi.target.h_dim,
        phi.target.clone(),
        g0.chart.clone(),
        g0.atoms.clone(),
        &phi.lie_map * &g0.mix,
    )
}

/// max |K1(Φ̄v, Φ̄w) − ΦK0(v, w) − [Φγ0 v⃗, Φγ0 w⃗] + Φ[γ0 v⃗, γ0 w⃗]| over
/// basis pairs, with v⃗ the soldering frame of g0.
pub fn disguise_residual(g0: &CartanGauge, phi: &ModelMorphism, g1: &CartanGauge, x: &[f64]) -> Result<f64> {
    let k0 = curvature(g0, x)?;
    let k1 = pull_back(&curvature(g1, x)?, phi);
    let gam = g0.gamma_at(x)?;
    let frame = g0.soldering_at(x)?.try_inverse().ok_or_else(|| Error::SingularCoframe(x.to_vec()))?;
    let n = g0.chart_dim();
    let d1 = phi.target.dim();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let va = &gam * frame.column(a);
            let vb = &gam * frame.column(b);
            let (pa, pb) = (&phi.lie_map * &va, &phi.lie_map * &vb);
            let br1 = phi.target.g.bracket_coords(pa.as_slice(), pb.as_slice());
            let br0 = &phi.lie_map * phi.source.g.bracket_coords(va.as_slice(), vb.as_slice());
            for c in 0..d1 {
                let pk0: f64 = (0..phi.source.dim()).map(|s| phi.lie_map[(c, s)] * k0.get(&[s, a, b])).sum();
                let want = pk0 + br1[c] - br0[c];
                worst = worst.max((k1.get(&[c, a, b]) - want).abs());
            }
        }
    }
    Ok(worst)
}

/// Shrink the structure algebra to the first k basis vectors of h.
pub fn lift(g: &CartanGauge, k: usize) -> Result<CartanGauge> {
    if k > g.model.h_dim {
        return Err(Error::NotASubalgebra(k));
    }
    for &(c, a, b, v) in &nonzero_constants(&g.model) {
        if a < k && b < k && c >= k && v.abs() > 1e-10 {
            return Err(Error::NotASubalgebra(k));
        }
    }
    let model = LocalModel::new(&format!("{}/lift{k}", g.model.name), g.model.g.clone(), k)?;
    let mut out = g.clone();
    out.name = format!("lift{k}({})", g.name);
    out.model = model;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BundleTrajectory {
    pub base: Trajectory,
    /// Frame h(t) ∈ H at each base sample, as ambient matrices.
    pub frames: Vec<Mat>,
}

/// Velocity of a curve (x, h) in chart × H whose ω-pullback is b:
/// x' = θ(x)⁻¹ ρ̄(h) b̄ and h' = h b − γ(x)(x') h.
pub(crate) fn bundle_rhs(g: &CartanGauge, x: &[f64], h: &Mat, b: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let model = &g.model;
    let hd = model.h_dim;
    let ad = model.g.adjoint(h)?;
    let q = quotient_ad(model, &ad);
    let bm = DVector::from_column_slice(&b[hd..]);
    let theta = g.soldering_at(x)?;
    let xdot = theta.lu().solve(&(q * bm)).ok_or_else(|| Error::SingularCoframe(x.to_vec()))?;
    let gx = g.gamma_at(x)? * &xdot;
    let hdot = h * model.g.element(b) - model.g.element(gx.as_slice()) * h;
    Ok((xdot.iter().copied().collect(), hdot))
}

fn pack(x: &[f64], h: &Mat) -> Vec<f64> {
    let mut s = x.to_vec();
    s.extend(h.iter());
    s
}

fn unpack(s: &[f64], n: usize, size: usize) -> (&[f64], Mat) {
    (&s[..n], Mat::from_column_slice(size, size, &s[n..n + size * size]))
}

/// Integrate the curve in chart × H with prescribed ω-pullback b(t).
pub fn bundle_flow<F>(g: &CartanGauge, b: F, x1: &[f64], h1: &Mat, t_span: (f64, f64), tol: f64) -> Result<BundleTrajectory>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    if g.is_lifted() {
        return Err(Error::Invalid("bundle curves need an unlifted gauge".into()));
    }
    g.require_inside(x1)?;
    let n = g.chart_dim();
    let size = g.model.g.size;
    if h1.nrows() != size || h1.ncols() != size {
        return Err(Error::SizeMismatch(format!("frame must be {size}x{size}")));
    }
    let rhs = |t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let (x, h) = unpack(s, n, size);
        let (xd, hd) = bundle_rhs(g, x, &h, &b(t)?)?;
        Ok(pack(&xd, &hd))
    };
    let inside = |s: &[f64]| g.chart.contains(&s[..n]);
    let tr = integrate(rhs, inside, &pack(x1, h1), t_span.0, t_span.1, OdeOptions::new(tol))?;
    Ok(split_bundle(tr, n, size))
}

fn split_bundle(tr: Trajectory, n: usize, size: usize) -> BundleTrajectory {
    let frames = tr.x.iter().map(|s| unpack(s, n, size).1).collect();
    let base = Trajectory {
        t: tr.t,
        x: tr.x.into_iter().map(|s| s[..n].to_vec()).collect(),
        v: tr.v.into_iter().map(|s| s[..n].to_vec()).collect(),
        status: tr.status,
        accepted: tr.accepted,
        rejected: tr.rejected,
    };
    BundleTrajectory { base, frames }
}

/// Frames for a bundle development: the source lift is the identity section
/// times h0; the target starts at (x1, h1).
#[derive(Clone, Debug)]
pub struct Frames {
    pub h0: Mat,
    pub x1: Vec<f64>,
    pub h1: Mat,
}

/// ω0 along the lift of a base curve through the constant section h0,
/// mapped by Φ.
pub(crate) fn source_driver<'a>(g0: &'a CartanGauge, phi: &'a ModelMorphism, curve: &'a SourceCurve, h0: &Mat) -> Result<impl Fn(f64) -> Result<Vec<f64>> + 'a> {
    if g0.is_lifted() {
        return Err(Error::Invalid("bundle curves need an unlifted gauge".into()));
    }
    if curve.dim() != g0.chart_dim() {
        return Err(Error::SizeMismatch("curve dimension".into()));
    }
    let inv = h0.clone().try_inverse().ok_or_else(|| Error::Invalid("singular frame".into()))?;
    let adinv = g0.model.g.adjoint(&inv)?;
    let c = curve_evaluator(curve);
    Ok(move |t: f64| -> Result<Vec<f64>> {
        let (x, v) = c(t)?;
        if !g0.chart.contains(&x) {
            return Err(Error::OutsideChart(x));
        }
        let w = &adinv * (g0.gamma_at(&x)? * DVector::from_vec(v));
        Ok((&phi.lie_map * w).iter().copied().collect())
    })
}

/// Develop the bundle lift of a base curve of g0 into g1 with A = Φ.
pub fn develop_bundle_curve(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism, curve: &SourceCurve, frames: &Frames, t_span: (f64, f64), tol: f64) -> Result<BundleTrajectory> {
    check_phi(g0, g1, phi)?;
    let b = source_driver(g0, phi, curve, &frames.h0)?;
    bundle_flow(g1, b, &frames.x1, &frames.h1, t_span, tol)
}

/// Base projection of [`develop_bundle_curve`].
pub fn develop_base_curve(g0: &CartanGauge, g1: &CartanGauge, phi: &ModelMorphism, curve: &SourceCurve, frames: &Frames, t_span: (f64, f64), tol: f64) -> Result<Trajectory> {
    Ok(develop_bundle_curve(g0, g1, phi, curve, frames, t_span, tol)?.base)
}

/// Length of u at x in the base metric induced by an H-invariant inner
/// product on g (the quotient norm of γ(x)u modulo h).
pub fn canonical_base_metric(g: &CartanGauge, x: &[f64], u: &[f64], inner: Option<&Mat>) -> Result<f64> {
    g.require_inside(x)?;
    let d = g.model.dim();
    let p = inner.cloned().unwrap_or_else(|| Mat::identity(d, d));
    if p.shape() != (d, d) {
        return Err(Error::SizeMismatch("inner product".into()));
    }
    let mut worst: f64 = 0.0;
    for c in sample_coefficients(g.model.h_dim, 4) {
        let ad = g.model.g.adjoint(&g.model.h_exp(&c)?)?;
        worst = worst.max((ad.transpose() * &p * &ad - &p).amax());
    }
    if worst > 1e-8 {
        return Err(Error::NotInvariant(worst));
    }
    let w = g.gamma_at(x)? * DVector::from_column_slice(u);
    let hd = g.model.h_dim;
    let pm = p.view((hd, hd), (d - hd, d - hd)).into_owned();
    let schur = if hd == 0 {
        pm
    } else {
        let phh = p.view((0, 0), (hd, hd)).into_owned();
        let phm = p.view((0, hd), (hd, d - hd)).into_owned();
        let inv = phh.try_inverse().ok_or_else(|| Error::Invalid("inner product".into()))?;
        pm - phm.transpose() * inv * phm
    };
    let v = w.rows(hd, d - hd).into_owned();
    Ok((v.transpose() * schur * v)[(0, 0)].max(0.0).sqrt())
}

/// Levi-Civita gauge of a surface on the Euclidean model: γ = η12 J + η1 P1 + η2 P2.
pub fn riemannian_gauge(s: &SurfaceMetric) -> Result<CartanGauge> {
    let f = s.frame();
    let model = builtin_model("flat-R2(SO2)")?;
    CartanGauge::new(&format!("euclid({})", s.name), model, s.chart.clone(), vec![f.eta12.to_vec(), f.eta1.to_vec(), f.eta2.to_vec()])
}

/// Maurer–Cartan gauge of a model along a section: translation coordinates
/// for flat and projective models, exp(x1 P1)·exp(x2 P2) for the sphere.
pub fn flat_gauge(model_name: &str) -> Result<CartanGauge> {
    let model = builtin_model(model_name)?;
    let (d, hd, n) = (model.dim(), model.h_dim, model.base_dim());
    if model_name == "sphere-S2" {
        let g = &model.g;
        let br = g.coords(&crate::algebra::bracket(&g.basis[2], &g.basis[1])?);
        let sq = g.coords(&crate::algebra::bracket(&g.basis[2], &g.element(br.as_slice()))?);
        // exp(−s ad P2) P1 = cos s P1 − sin s [P2, P1] needs ad(P2)² P1 = −P1
        if (sq + DVector::from_column_slice(&[0.0, 1.0, 0.0])).amax() > 1e-12 {
            return Err(Error::Invalid("unexpected sphere basis".into()));
        }
        let gamma = (0..d)
            .map(|k| {
                let p1 = f64::from(u8::from(k == 1));
                let first = Expr::linear_combination(&[(p1, parse_in("cos(x2)", 2)?), (-br[k], parse_in("sin(x2)", 2)?)]);
                Ok(vec![first, Expr::num(f64::from(u8::from(k == 2)))])
            })
            .collect::<Result<Vec<_>>>()?;
        // the section stops being an immersion at x2 = ±π/2
        let chart = Chart::boxed(vec![f64::NEG_INFINITY, -1.5], vec![f64::INFINITY, 1.5])?;
        return CartanGauge::new(&format!("flat({model_name})"), model, chart, gamma);
    }
    let gamma: Vec<Vec<Expr>> = (0..d).map(|k| (0..n).map(|i| Expr::num(f64::from(u8::from(k == hd + i)))).collect()).collect();
    let g = CartanGauge::new(&format!("flat({model_name})"), model, Chart::unbounded(n), gamma)?;
    // translation sections are only Maurer–Cartan when the translations commute
    if curvature(&g, &vec![0.0; n])?.norm() > 1e-12 {
        return Err(Error::UnknownModel(format!("no flat gauge for {model_name}")));
    }
    Ok(g)
}

/// Named gauges: `flat(<model>)`, `euclid(<surface>)`, `affine(<surface>)`
/// and `projective(<surface>)` (the disguises of the Levi-Civita gauge).
pub fn builtin_gauge(name: &str) -> Result<CartanGauge> {
    let arg = |p: &str| name.strip_prefix(p).and_then(|r| r.strip_suffix(')'));
    if let Some(m) = arg("flat(") {
        return flat_gauge(m);
    }
    if let Some(s) = arg("euclid(") {
        return riemannian_gauge(&builtin_surface(s)?);
    }
    if let Some(s) = arg("affine(") {
        return disguise(&riemannian_gauge(&builtin_surface(s)?)?, &euclid_to_affine(2)?);
    }
    if let Some(s) = arg("projective(") {
        let aff = disguise(&riemannian_gauge(&builtin_surface(s)?)?, &euclid_to_affine(2)?)?;
        return disguise(&aff, &affine_to_projective(2)?);
    }
    Err(Error::UnknownModel(name.to_string()))
}

/// Rotation of the Euclidean plane frame by `angle`, as an element of the
/// structure group of `flat-R2(SO2)`.
pub fn rotation_frame(angle: f64) -> Result<Mat> {
    builtin_model("flat-R2(SO2)")?.h_exp(&[angle])
}

/// Group exponential convenience for frames: h = exp(Σ cᵢ hᵢ).
pub fn frame_exp(model: &LocalModel, c: &[f64]) -> Result<Mat> {
    if c.len() != model.h_dim {
        return Err(Error::SizeMismatch("frame coordinates".into()));
    }
    let mut full = vec![0.0; model.dim()];
    full[..c.len()].copy_from_slice(c);
    expm(&model.g.element(&full))
}
