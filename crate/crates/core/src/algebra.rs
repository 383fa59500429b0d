//! Matrix Lie algebras, local models (H, g) and model morphisms.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::sync::Arc;

pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;

pub fn bracket(x: &Mat, y: &Mat) -> Result<Mat> {
    if x.shape() != y.shape() || x.nrows() != x.ncols() {
        return Err(Error::SizeMismatch(format!("{:?} vs {:?}", x.shape(), y.shape())));
    }
    Ok(x * y - y * x)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(x: &Mat) -> Result<Mat> {
    if x.nrows() != x.ncols() {
        return Err(Error::SizeMismatch(format!("{:?} not square", x.shape())));
    }
    if x.iter().any(|v| !v.is_finite() || v.abs() > 1e100) {
        return Err(Error::Overflow);
    }
    let n = x.nrows();
    let norm1 = (0..n).map(|j| x.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > THETA13 { (norm1 / THETA13).log2().ceil() as i32 } else { 0 };
    let a = x / 2f64.powi(s);
    let id = Mat::identity(n, n);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::Overflow)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow);
    }
    Ok(r)
}

/// Finite-dimensional Lie algebra realized by a basis of square matrices.
#[derive(Clone)]
pub struct MatrixLieAlgebra {
    pub name: String,
    pub size: usize,
    pub basis: Vec<Mat>,
    pinv: Mat,
    /// c[(k, i, j)]: [e_i, e_j] = sum_k c^k_ij e_k.
    consts: Tensor,
}

impl fmt::Debug for MatrixLieAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixLieAlgebra({}, dim {}, size {})", self.name, self.dim(), self.size)
    }
}

impl MatrixLieAlgebra {
    /// Validate a basis: independence (relative singular value 1e-10),
    /// bracket closure (relative residual 1e-10) and the Jacobi identity.
    pub fn new(name: &str, size: usize, basis: Vec<Mat>) -> Result<MatrixLieAlgebra> {
        let d = basis.len();
        for b in &basis {
            if b.shape() != (size, size) {
                return Err(Error::SizeMismatch(format!("basis element {:?} in size {size}", b.shape())));
            }
        }
        let flat = Mat::from_fn(size * size, d, |r, c| basis[c][(r / size, r % size)]);
        let pinv = if d == 0 {
            Mat::zeros(0, size * size)
        } else {
            let svd = flat.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-10 * smax.max(1e-300) {
                return Err(Error::Dependent);
            }
            svd.pseudo_inverse(0.0).map_err(|e| Error::Invalid(e.to_string()))?
        };
        let mut alg = MatrixLieAlgebra { name: name.to_string(), size, basis, pinv, consts: Tensor::zeros(&[d, d, d]) };
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let br = bracket(&alg.basis[i], &alg.basis[j])?;
                let (c, res) = alg.coords_with_residual(&br);
                let scale = alg.basis[i].norm() * alg.basis[j].norm();
                worst = worst.max(res / scale.max(1e-300));
                for k in 0..d {
                    alg.consts.set(&[k, i, j], c[k]);
                }
            }
        }
        if worst > 1e-10 {
            return Err(Error::NotClosed(worst));
        }
        let jac = alg.jacobi_residual();
        if jac > 1e-10 {
            return Err(Error::Invalid(format!("Jacobi identity residual {jac:e}")));
        }
        Ok(alg)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn element(&self, c: &[f64]) -> Mat {
        let mut m = Mat::zeros(self.size, self.size);
        for (ci, b) in c.iter().zip(&self.basis) {
            if *ci != 0.0 {
                m += b * *ci;
            }
        }
        m
    }

    /// Least-squares coordinates and the Frobenius residual of the fit.
    pub fn coords_with_residual(&self, x: &Mat) -> (Vect, f64) {
        let flat = Vect::from_iterator(self.size * self.size, (0..self.size * self.size).map(|r| x[(r / self.size, r % self.size)]));
        let c = &self.pinv * &flat;
        let back = self.element(c.as_slice());
        (c, (x - back).norm())
    }

    pub fn coords(&self, x: &Mat) -> Vect {
        self.coords_with_residual(x).0
    }

    pub fn structure_constants(&self) -> &Tensor {
        &self.consts
    }

    /// Bracket in coordinates, using the structure constants.
    pub fn bracket_coords(&self, u: &[f64], v: &[f64]) -> Vect {
        let d = self.dim();
        let mut out = Vect::zeros(d);
        for i in 0..d {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if v[j] == 0.0 {
                    continue;
                }
                let w = u[i] * v[j];
                for k in 0..d {
                    out[k] += w * self.consts.get(&[k, i, j]);
                }
            }
        }
        out
    }

    /// Matrix of ad(u) acting on coordinates.
    pub fn ad(&self, u: &[f64]) -> Mat {
        let d = self.dim();
        Mat::from_fn(d, d, |k, j| (0..d).map(|i| u[i] * self.consts.get(&[k, i, j])).sum())
    }

    /// Matrix of Ad(g) acting on coordinates (conjugation by an ambient matrix).
    pub fn adjoint(&self, g: &Mat) -> Result<Mat> {
        let ginv = g.clone().try_inverse().ok_or_else(|| Error::Invalid("singular group element".into()))?;
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for j in 0..d {
            let c = self.coords(&(g * &self.basis[j] * &ginv));
            m.set_column(j, &c);
        }
        Ok(m)
    }

    pub fn jacobi_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        let e = |i: usize| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        };
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let jk = self.bracket_coords(&e(j), &e(k));
                    let ki = self.bracket_coords(&e(k), &e(i));
                    let ij = self.bracket_coords(&e(i), &e(j));
                    let s = self.bracket_coords(&e(i), jk.as_slice())
                        + self.bracket_coords(&e(j), ki.as_slice())
                        + self.bracket_coords(&e(k), ij.as_slice());
                    worst = worst.max(s.amax());
                }
            }
        }
        worst
    }

    /// Sub-algebra spanned by the first `k` basis vectors.
    pub fn prefix(&self, k: usize, name: &str) -> Result<MatrixLieAlgebra> {
        MatrixLieAlgebra::new(name, self.size, self.basis[..k].to_vec())
    }
}

/// A local model: Lie algebra g with h spanned by its first `h_dim` basis
/// vectors. Group elements of H are ambient matrices acting by conjugation.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub name: String,
    pub g: MatrixLieAlgebra,
    pub h_dim: usize,
}

impl LocalModel {
    pub fn new(name: &str, g: MatrixLieAlgebra, h_dim: usize) -> Result<LocalModel> {
        if h_dim > g.dim() {
            return Err(Error::Invalid(format!("h dimension {h_dim} exceeds g dimension {}", g.dim())));
        }
        let m = LocalModel { name: name.to_string(), g, h_dim };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Dimension of g/h, the base dimension.
    pub fn base_dim(&self) -> usize {
        self.g.dim() - self.h_dim
    }

    pub fn h(&self) -> Result<MatrixLieAlgebra> {
        self.g.prefix(self.h_dim, &format!("{}-h", self.name))
    }

    /// Element of H from h-coordinates via the exponential.
    pub fn h_exp(&self, c: &[f64]) -> Result<Mat> {
        let mut full = vec![0.0; self.dim()];
        full[..c.len()].copy_from_slice(c);
        expm(&self.g.element(&full))
    }

    /// Checks that h is a subalgebra and that Ad of sampled group elements
    /// preserves h; the induced action on g/h is then well defined.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let hd = self.h_dim;
        for i in 0..hd {
            for j in 0..hd {
                for k in hd..d {
                    let c = self.g.structure_constants().get(&[k, i, j]);
                    if c.abs() > 1e-10 {
                        return Err(Error::NotASubalgebra(hd));
                    }
                }
            }
        }
        for (s, sample) in sample_coefficients(hd, 4).into_iter().enumerate() {
            let h = self.h_exp(&sample)?;
            let ad = self.g.adjoint(&h)?;
            for j in 0..hd {
                for k in hd..d {
                    if ad[(k, j)].abs() > 1e-8 {
                        return Err(Error::Invalid(format!("Ad of sample {s} does not preserve h")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Deterministic small coefficient vectors used as group-element samples.
pub(crate) fn sample_coefficients(dim: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|s| (0..dim).map(|i| 0.6 * (((s * 7 + i * 3 + 1) as f64) * 0.754877666).sin()).collect())
        .collect()
}

/// How a model morphism acts on group elements of H0.
#[derive(Clone)]
pub enum GroupMap {
    /// Both models share the ambient matrix group; elements map to themselves.
    Identity,
    /// GL(n) ⋉ R^n into PSL(n+1): permute the translation column into the
    /// first column and normalize the determinant.
    AffineToProjective(usize),
    Custom(Arc<dyn Fn(&Mat) -> Mat + Send + Sync>),
}

impl fmt::Debug for GroupMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupMap::Identity => write!(f, "Identity"),
            GroupMap::AffineToProjective(n) => write!(f, "AffineToProjective({n})"),
            GroupMap::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn move_last_first(n1: usize) -> Mat {
    // P e_{n} = e_0, P e_i = e_{i+1}
    Mat::from_fn(n1, n1, |a, b| if (b + 1) % n1 == a { 1.0 } else { 0.0 })
}

#[derive(Clone, Debug)]
pub struct ModelMorphism {
    pub name: String,
    pub source: LocalModel,
    pub target: LocalModel,
    /// dim g1 × dim g0 matrix.
    pub lie_map: Mat,
    pub group_map: GroupMap,
}

impl ModelMorphism {
    pub fn new(name: &str, source: LocalModel, target: LocalModel, lie_map: Mat, group_map: GroupMap) -> Result<ModelMorphism> {
        if lie_map.shape() != (target.dim(), source.dim()) {
            return Err(Error::SizeMismatch(format!("lie map {:?}", lie_map.shape())));
        }
        let m = ModelMorphism { name: name.to_string(), source, target, lie_map, group_map };
        m.validate()?;
        Ok(m)
    }

    /// Morphism between models sharing an ambient size whose g0 sits inside g1.
    pub fn inclusion(name: &str, source: LocalModel, target: LocalModel) -> Result<ModelMorphism> {
        if source.g.size != target.g.size {
            return Err(Error::SizeMismatch("inclusion needs equal ambient sizes".into()));
        }
        let mut lie = Mat::zeros(target.dim(), source.dim());
        for (j, b) in source.g.basis.iter().enumerate() {
            let (c, res) = target.g.coords_with_residual(b);
            if res > 1e-10 {
                return Err(Error::BadMorphism(format!("basis vector {j} of {} not in {}", source.name, target.name)));
            }
            lie.set_column(j, &c);
        }
        ModelMorphism::new(name, source, target, lie, GroupMap::Identity)
    }

    pub fn identity(model: &LocalModel) -> ModelMorphism {
        let d = model.dim();
        ModelMorphism {
            name: format!("id({})", model.name),
            source: model.clone(),
            target: model.clone(),
            lie_map: Mat::identity(d, d),
            group_map: GroupMap::Identity,
        }
    }

    pub fn map_group(&self, h: &Mat) -> Result<Mat> {
        Ok(match &self.group_map {
            GroupMap::Identity => h.clone(),
            GroupMap::AffineToProjective(n) => {
                let p = move_last_first(n + 1);
                let det = h.determinant();
                if det <= 0.0 {
                    return Err(Error::Invalid("affine element with nonpositive determinant".into()));
                }
                (&p * h * p.transpose()) / det.powf(1.0 / (*n as f64 + 1.0))
            }
            GroupMap::Custom(f) => f(h),
        })
    }

    pub fn apply(&self, a: &[f64]) -> Vect {
        &self.lie_map * Vect::from_column_slice(a)
    }

    /// Composition `other ∘ self`.
    pub fn then(&self, other: &ModelMorphism) -> Result<ModelMorphism> {
        if self.target.name != other.source.name {
            return Err(Error::BadMorphism(format!("{} does not feed {}", self.name, other.name)));
        }
        let (f, g) = (self.clone(), other.clone());
        ModelMorphism::new(
            &format!("{}∘{}", other.name, self.name),
            self.source.clone(),
            other.target.clone(),
            &other.lie_map * &self.lie_map,
            GroupMap::Custom(Arc::new(move |h| {
                let h1 = f.map_group(h).expect("group map");
                g.map_group(&h1).expect("group map")
            })),
        )
    }

    /// Block of Φ on g0/h0 → g1/h1 (well defined since Φ(h0) ⊆ h1).
    pub fn quotient_block(&self) -> Mat {
        let (h0, h1) = (self.source.h_dim, self.target.h_dim);
        self.lie_map.view((h1, h0), (self.target.base_dim(), self.source.base_dim())).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        let (h0, h1) = (self.source.h_dim, self.target.h_dim);
        let (g0, g1) = (&self.source.g, &self.target.g);
        for j in 0..h0 {
            for i in h1..g1.dim() {
                if self.lie_map[(i, j)].abs() > 1e-10 {
                    return Err(Error::BadMorphism("Φ(h0) leaves h1".into()));
                }
            }
        }
        // Φ[X, A] = [ΦX, ΦA] for X in h0 and all A: Lie on h0 and h0-equivariant.
        let e = |d: usize, i: usize| {
            let mut v = vec![0.0; d];
            v[i] = 1.0;
            v
        };
        for i in 0..h0 {
            for j in 0..g0.dim() {
                let lhs = self.apply(g0.bracket_coords(&e(g0.dim(), i), &e(g0.dim(), j)).as_slice());
                let rhs = g1.bracket_coords(self.lie_map.column(i).as_slice(), self.lie_map.column(j).as_slice());
                if (lhs - rhs).amax() > 1e-10 {
                    return Err(Error::BadMorphism(format!("bracket residual at ({i}, {j})")));
                }
            }
        }
        for sample in sample_coefficients(h0, 3) {
            let h = self.source.h_exp(&sample)?;
            let hh = self.map_group(&h)?;
            let ad0 = g0.adjoint(&h)?;
            let ad1 = g1.adjoint(&hh)?;
            let res = (&self.lie_map * ad0 - ad1 * &self.lie_map).amax();
            if res > 1e-8 {
                return Err(Error::BadMorphism(format!("equivariance residual {res:e}")));
            }
        }
        Ok(())
    }
}

fn unit(n: usize, i: usize, j: usize) -> Mat {
    let mut m = Mat::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

/// Builtin abstract algebras used for Maurer–Cartan examples.
pub fn builtin_algebra(name: &str) -> Result<MatrixLieAlgebra> {
    match name {
        "so3" => {
            // [L1, L2] = L3 and cyclic
            let l1 = unit(3, 2, 1) - unit(3, 1, 2);
            let l2 = unit(3, 0, 2) - unit(3, 2, 0);
            let l3 = unit(3, 1, 0) - unit(3, 0, 1);
            MatrixLieAlgebra::new("so3", 3, vec![l1, l2, l3])
        }
        "se2" => Ok(builtin_model("flat-R2(SO2)")?.g),
        "aff1" => MatrixLieAlgebra::new("aff1", 2, vec![unit(2, 0, 0), unit(2, 0, 1)]),
        "heisenberg" => MatrixLieAlgebra::new("heisenberg", 3, vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)]),
        "sl2" => MatrixLieAlgebra::new("sl2", 2, vec![unit(2, 0, 0) - unit(2, 1, 1), unit(2, 0, 1), unit(2, 1, 0)]),
        _ => Err(Error::UnknownModel(name.to_string())),
    }
}

fn flat_model(name: &str, n: usize, h: &str) -> Result<LocalModel> {
    let n1 = n + 1;
    let block: Vec<Mat> = match h {
        "trivial" => vec![],
        "SO2" | "R+SO2" if n != 2 => return Err(Error::UnknownModel(name.to_string())),
        "SO2" => vec![unit(n1, 0, 1) - unit(n1, 1, 0)],
        "R+SO2" => vec![unit(n1, 0, 0) + unit(n1, 1, 1), unit(n1, 0, 1) - unit(n1, 1, 0)],
        _ if h == "On" || h == format!("O{n}") => {
            let mut v = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    v.push(unit(n1, i, j) - unit(n1, j, i));
                }
            }
            v
        }
        _ if h == "GLn" || h == format!("GL{n}") => {
            let mut v = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    v.push(unit(n1, i, j));
                }
            }
            v
        }
        _ => return Err(Error::UnknownModel(name.to_string())),
    };
    let hd = block.len();
    let mut basis = block;
    for i in 0..n {
        basis.push(unit(n1, i, n));
    }
    LocalModel::new(name, MatrixLieAlgebra::new(name, n1, basis)?, hd)
}

/// sl(N) with the point stabilizer of [e0] as h. Basis: Cartan diagonal,
/// first-row entries, remaining off-diagonal pairs (upper before lower),
/// then the quotient E_{i0}.
fn projective_point_basis(n1: usize) -> (Vec<Mat>, usize) {
    let mut basis = Vec::new();
    for k in 0..n1 - 1 {
        basis.push(unit(n1, k, k) - unit(n1, k + 1, k + 1));
    }
    for j in 1..n1 {
        basis.push(unit(n1, 0, j));
    }
    for i in 1..n1 {
        for j in i + 1..n1 {
            basis.push(unit(n1, i, j));
        }
    }
    for i in 1..n1 {
        for j in 1..i {
            basis.push(unit(n1, i, j));
        }
    }
    let hd = basis.len();
    for i in 1..n1 {
        basis.push(unit(n1, i, 0));
    }
    (basis, hd)
}

/// Registry of local models.
///
/// Names: `flat-R<n>(<H>)` with H one of trivial, SO2, R+SO2, On / O<n>,
/// GLn / GL<n> (a literal `n` means 2), `sphere-S2`, `sl<N>-projective`
/// (alias `sl3-projective-point`, and `sln-projective` for N = 3) and
/// `sl3-projective-pointed-line`.
pub fn builtin_model(name: &str) -> Result<LocalModel> {
    let unknown = || Error::UnknownModel(name.to_string());
    if let Some(rest) = name.strip_prefix("flat-R") {
        let open = rest.find('(').ok_or_else(unknown)?;
        let (dim, h) = rest.split_at(open);
        let h = h.strip_prefix('(').and_then(|h| h.strip_suffix(')')).ok_or_else(unknown)?;
        let n = if dim == "n" { 2 } else { dim.parse::<usize>().map_err(|_| unknown())? };
        if n == 0 {
            return Err(unknown());
        }
        return flat_model(name, n, h);
    }
    if name == "trivial" {
        return flat_model(name, 2, "trivial");
    }
    if name == "sphere-S2" {
        let basis = vec![unit(3, 0, 1) - unit(3, 1, 0), unit(3, 0, 2) - unit(3, 2, 0), unit(3, 1, 2) - unit(3, 2, 1)];
        return LocalModel::new(name, MatrixLieAlgebra::new(name, 3, basis)?, 1);
    }
    if name == "sl3-projective-pointed-line" {
        let (b, _) = projective_point_basis(3);
        // line through [e0], [e1]: drop E21 from h, keep E10 as the quotient
        let basis = vec![b[0].clone(), b[1].clone(), b[2].clone(), b[3].clone(), b[4].clone(), b[6].clone()];
        return LocalModel::new(name, MatrixLieAlgebra::new(name, 3, basis)?, 5);
    }
    let n1 = match name {
        "sl3-projective-point" | "sln-projective" => 3,
        _ => name
            .strip_prefix("sl")
            .and_then(|r| r.strip_suffix("-projective"))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&d| d >= 2)
            .ok_or_else(unknown)?,
    };
    let (basis, hd) = projective_point_basis(n1);
    LocalModel::new(name, MatrixLieAlgebra::new(name, n1, basis)?, hd)
}

/// Forget the metric: `flat-R<n>(On)` (or SO2) into `flat-R<n>(GLn)`.
pub fn euclid_to_affine(n: usize) -> Result<ModelMorphism> {
    let src = if n == 2 { builtin_model("flat-R2(SO2)")? } else { builtin_model(&format!("flat-R{n}(On)"))? };
    let tgt = builtin_model(&format!("flat-R{n}(GLn)"))?;
    ModelMorphism::inclusion(&format!("euclid-to-affine({n})"), src, tgt)
}

/// The block embedding GL(n) ⋉ R^n → PSL(n+1), X ↦ P X Pᵀ − tr(X)/(n+1) I.
pub fn affine_to_projective(n: usize) -> Result<ModelMorphism> {
    let src = builtin_model(&format!("flat-R{n}(GLn)"))?;
    let tgt = builtin_model(&format!("sl{}-projective", n + 1))?;
    let p = move_last_first(n + 1);
    let mut lie = Mat::zeros(tgt.dim(), src.dim());
    for (j, b) in src.g.basis.iter().enumerate() {
        let tr = b.trace();
        let img = &p * b * p.transpose() - Mat::identity(n + 1, n + 1) * (tr / (n as f64 + 1.0));
        let (c, res) = tgt.g.coords_with_residual(&img);
        debug_assert!(res < 1e-12);
        lie.set_column(j, &c);
    }
    ModelMorphism::new(&format!("affine-to-projective({n})"), src, tgt, lie, GroupMap::AffineToProjective(n))
}

/// Geodesic model inclusion: pointed-line stabilizer data into the point model.
pub fn geodesic_inclusion() -> Result<ModelMorphism> {
    ModelMorphism::inclusion(
        "geodesic-inclusion",
        builtin_model("sl3-projective-pointed-line")?,
        builtin_model("sl3-projective-point")?,
    )
}

/// Builtin model morphisms by name.
pub fn builtin_morphism(name: &str) -> Result<ModelMorphism> {
    let arg = |prefix: &str| -> Option<usize> { name.strip_prefix(prefix)?.strip_suffix(')')?.parse().ok() };
    if let Some(n) = arg("euclid-to-affine(") {
        return euclid_to_affine(n);
    }
    if let Some(n) = arg("affine-to-projective(") {
        return affine_to_projective(n);
    }
    if name == "geodesic-inclusion" {
        return geodesic_inclusion();
    }
    if let Some(m) = name.strip_prefix("identity(").and_then(|r| r.strip_suffix(')')) {
        return Ok(ModelMorphism::identity(&builtin_model(m)?));
    }
    Err(Error::UnknownModel(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bracket_basics() {
        let so3 = builtin_algebra("so3").unwrap();
        let b = bracket(&so3.basis[0], &so3.basis[1]).unwrap();
        // direct multiply oracle
        let direct = &so3.basis[0] * &so3.basis[1] - &so3.basis[1] * &so3.basis[0];
        assert_eq!(b, direct);
        assert!((b - &so3.basis[2]).amax() < 1e-15);
        let x = Mat::from_diagonal(&Vect::from_vec(vec![1.0, 2.0]));
        let y = Mat::from_diagonal(&Vect::from_vec(vec![-3.0, 0.5]));
        assert_eq!(bracket(&x, &y).unwrap().amax(), 0.0);
        assert_eq!(bracket(&x, &x).unwrap().amax(), 0.0);
        assert!(bracket(&x, &Mat::zeros(3, 3)).is_err());
    }

    #[test]
    fn expm_examples() {
        let z = Mat::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), Mat::identity(3, 3));
        let j = unit(2, 1, 0) - unit(2, 0, 1);
        let r = expm(&(j.clone() * (2.0 * PI))).unwrap();
        assert!((r - Mat::identity(2, 2)).amax() < 1e-10);
        let th = 0.9;
        let r = expm(&(j * th)).unwrap();
        assert!((r[(0, 0)] - th.cos()).abs() < 1e-14 && (r[(1, 0)] - th.sin()).abs() < 1e-14);
        let n = Mat::from_row_slice(3, 3, &[0.0, 2.0, -1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let series = Mat::identity(3, 3) + &n + &n * &n * 0.5;
        assert!((expm(&n).unwrap() - series).amax() < 1e-13);
        assert!(matches!(expm(&(Mat::identity(2, 2) * 1e101)), Err(Error::Overflow)));
    }

    #[test]
    fn expm_relative_accuracy_on_normal_matrices() {
        // symmetric matrices: compare against eigen-decomposition
        let a = Mat::from_row_slice(3, 3, &[1.0, 2.0, -0.5, 2.0, -3.0, 1.5, -0.5, 1.5, 4.0]) * 1.2;
        let eig = a.clone().symmetric_eigen();
        let d = Mat::from_diagonal(&eig.eigenvalues.map(f64::exp));
        let want = &eig.eigenvectors * d * eig.eigenvectors.transpose();
        let got = expm(&a).unwrap();
        assert!(((got - &want).norm() / want.norm()) < 1e-12);
    }

    #[test]
    fn structure_constants_examples() {
        let ab = MatrixLieAlgebra::new("abelian", 3, vec![unit(3, 0, 0), unit(3, 1, 1), unit(3, 2, 2)]).unwrap();
        assert_eq!(ab.structure_constants().norm(), 0.0);
        let so3 = builtin_algebra("so3").unwrap();
        let c = so3.structure_constants();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let eps = match (i, j, k) {
                        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
                        (1, 0, 2) | (2, 1, 0) | (0, 2, 1) => -1.0,
                        _ => 0.0,
                    };
                    assert!((c.get(&[k, i, j]) - eps).abs() < 1e-12);
                }
            }
        }
        let se2 = builtin_algebra("se2").unwrap();
        let c = se2.structure_constants();
        let nonzero: Vec<_> = c.indices().filter(|ix| c.get(ix).abs() > 1e-12 && ix[1] < ix[2]).collect();
        assert_eq!(nonzero.len(), 2);
        assert!(MatrixLieAlgebra::new("bad", 2, vec![unit(2, 0, 1), unit(2, 1, 0)]).is_err());
        assert!(matches!(MatrixLieAlgebra::new("dep", 2, vec![unit(2, 0, 1), unit(2, 0, 1) * 2.0]), Err(Error::Dependent)));
    }

    #[test]
    fn builtin_dimensions() {
        let m = builtin_model("flat-Rn(SO2)").unwrap();
        assert_eq!((m.dim(), m.h_dim), (3, 1));
        let m = builtin_model("sl3-projective-point").unwrap();
        assert_eq!((m.dim(), m.h_dim), (8, 6));
        let m = builtin_model("flat-R2(trivial)").unwrap();
        assert_eq!((m.dim(), m.h_dim), (2, 0));
        let m = builtin_model("sl3-projective-pointed-line").unwrap();
        assert_eq!((m.dim(), m.h_dim), (6, 5));
        assert!(matches!(builtin_model("flat-R3(SO2)"), Err(Error::UnknownModel(_))));
        assert!(matches!(builtin_model("nope"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn adjoint_matches_exp_of_ad() {
        for name in [
            "flat-R2(trivial)",
            "flat-R2(SO2)",
            "flat-R2(R+SO2)",
            "flat-R3(On)",
            "flat-R2(GLn)",
            "sphere-S2",
            "sl3-projective-point",
            "sl3-projective-pointed-line",
            "sl4-projective",
        ] {
            let m = builtin_model(name).unwrap();
            let d = m.dim();
            for i in 0..d {
                for &t in &[-1.0, -0.3, 0.5, 1.0] {
                    let mut x = vec![0.0; d];
                    x[i] = t;
                    let g = expm(&m.g.element(&x)).unwrap();
                    let ad_g = m.g.adjoint(&g).unwrap();
                    let exp_ad = expm(&m.g.ad(&x)).unwrap();
                    let rel = (&ad_g - &exp_ad).amax() / exp_ad.amax();
                    assert!(rel < 1e-8, "{name} {i} {t}: {rel}");
                }
            }
        }
    }

    #[test]
    fn builtin_morphisms_validate() {
        let ea = euclid_to_affine(2).unwrap();
        let ap = affine_to_projective(2).unwrap();
        let comp = ea.then(&ap).unwrap();
        assert_eq!(comp.lie_map.shape(), (8, 3));
        assert!(comp.quotient_block().determinant().abs() > 0.5);
        let gi = geodesic_inclusion().unwrap();
        assert_eq!(gi.quotient_block().shape(), (2, 1));
        euclid_to_affine(3).unwrap();
        affine_to_projective(3).unwrap();
    }
}
