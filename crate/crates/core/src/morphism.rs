//! Coframing morphisms: obstruction tensors, hitting to finite order and
//! local morphisms built by flowing paired constant fields.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::Mat;
use crate::coframing::{constant_field, torsion_tower, Coframing};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Default hitting tolerance, relative to the torsion scale at the two points.
pub const DEFAULT_HIT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct Obstruction {
    pub order: usize,
    /// Shape [n1, n0, n0, n0^j]: (T1⁽ʲ⁾ ∘ (Λ²A ⊗ A^⊗j) − A·T0⁽ʲ⁾).
    pub tensor: Tensor,
    pub norm: f64,
}

fn check_map(cof0: &Coframing, cof1: &Coframing, a: &Mat) -> Result<()> {
    if a.nrows() != cof1.dim() || a.ncols() != cof0.dim() {
        return Err(Error::SizeMismatch(format!("A must be {}x{}", cof1.dim(), cof0.dim())));
    }
    Ok(())
}

fn difference(t0: &Tensor, t1: &Tensor, a: &Mat) -> Tensor {
    let at = a.transpose();
    let mut pulled = t1.clone();
    for k in 1..t1.rank() {
        pulled = pulled.map_slot(k, &at);
    }
    pulled.sub(&t0.map_slot(0, a))
}

fn obstructions(cof0: &Coframing, cof1: &Coframing, a: &Mat, m0: &[f64], m1: &[f64], p: usize) -> Result<(Vec<Obstruction>, f64)> {
    check_map(cof0, cof1, a)?;
    let t0 = torsion_tower(cof0, m0, p)?;
    let t1 = torsion_tower(cof1, m1, p)?;
    let scale = t0.tensors.iter().chain(&t1.tensors).map(Tensor::norm).fold(0.0, f64::max);
    let obs = (0..=p)
        .map(|j| {
            let tensor = difference(&t0.tensors[j], &t1.tensors[j], a);
            Obstruction { order: j, norm: tensor.norm(), tensor }
        })
        .collect();
    Ok((obs, scale))
}

/// The order-j obstruction at the pair (m0, m1).
pub fn obstruction(cof0: &Coframing, cof1: &Coframing, a: &Mat, m0: &[f64], m1: &[f64], j: usize) -> Result<Obstruction> {
    let (mut obs, _) = obstructions(cof0, cof1, a, m0, m1, j)?;
    Ok(obs.pop().expect("tower has j + 1 entries"))
}

#[derive(Clone, Debug, Serialize)]
pub struct HitReport {
    /// Whether m0 hits m1 to the requested order; says nothing beyond it.
    pub hits: bool,
    pub norms: Vec<f64>,
    /// tol · max(1, largest torsion entry at either point).
    pub threshold: f64,
}

pub fn hits_to_order(cof0: &Coframing, cof1: &Coframing, a: &Mat, m0: &[f64], m1: &[f64], p: usize, tol: f64) -> Result<HitReport> {
    if p > 3 {
        return Err(Error::Invalid("hitting order is at most 3".into()));
    }
    let (obs, scale) = obstructions(cof0, cof1, a, m0, m1, p)?;
    let norms: Vec<f64> = obs.iter().map(|o| o.norm).collect();
    let threshold = tol * scale.max(1.0);
    Ok(HitReport { hits: norms.iter().all(|&n| n <= threshold), norms, threshold })
}

#[derive(Clone, Debug, Serialize)]
pub struct MorphismGrid {
    pub radius: f64,
    pub per_axis: usize,
    /// Normal coordinates u ∈ V0 of each node.
    pub normal: Vec<Vec<f64>>,
    /// exp of the constant field u from m0.
    pub source: Vec<Vec<f64>>,
    /// exp of the constant field A u from m1: the image of the source node.
    pub target: Vec<Vec<f64>>,
    /// max over nodes of |ω1(dy) − A ω0(dx)| by fourth-order differencing.
    pub residual: f64,
}

/// Fixed-step RK4 along the paired field (ω0⁻¹u, ω1⁻¹Au) for unit time.
/// A fixed step keeps the discretisation error smooth in u, so the grid
/// can be differenced.
fn paired_flow(cof0: &Coframing, cof1: &Coframing, a: &Mat, m0: &[f64], m1: &[f64], u: &[f64], steps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n0 = m0.len();
    let au: Vec<f64> = (a * DVector::from_column_slice(u)).iter().copied().collect();
    let rhs = |s: &[f64]| -> Result<Vec<f64>> {
        let (x, y) = s.split_at(n0);
        if !cof0.chart.contains(x) || !cof1.chart.contains(y) {
            return Err(Error::IntegrationEscaped);
        }
        let mut d = constant_field(cof0, u, x)?;
        d.extend(constant_field(cof1, &au, y)?);
        Ok(d)
    };
    let mut s: Vec<f64> = m0.iter().chain(m1).copied().collect();
    let h = 1.0 / steps as f64;
    let axpy = |s: &[f64], k: &[f64], c: f64| s.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = rhs(&s)?;
        let k2 = rhs(&axpy(&s, &k1, h / 2.0))?;
        let k3 = rhs(&axpy(&s, &k2, h / 2.0))?;
        let k4 = rhs(&axpy(&s, &k3, h))?;
        for i in 0..s.len() {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let (x, y) = s.split_at(n0);
    if !cof0.chart.contains(x) || !cof1.chart.contains(y) {
        return Err(Error::IntegrationEscaped);
    }
    Ok((x.to_vec(), y.to_vec()))
}

/// Local morphism through (m0, m1) with linear part A, sampled on a
/// `per_axis`ⁿ grid of normal coordinates in [−radius, radius]ⁿ.
pub fn integrate_morphism_grid(
    cof0: &Coframing,
    cof1: &Coframing,
    a: &Mat,
    m0: &[f64],
    m1: &[f64],
    radius: f64,
    per_axis: usize,
    tol: f64,
) -> Result<MorphismGrid> {
    check_map(cof0, cof1, a)?;
    if !(radius > 0.0) || per_axis < 2 || !(tol > 0.0) {
        return Err(Error::Invalid("radius, grid size and tol must be positive".into()));
    }
    let report = hits_to_order(cof0, cof1, a, m0, m1, 2, tol)?;
    if !report.hits {
        return Err(Error::ObstructionTooLarge(report.norms.iter().copied().fold(0.0, f64::max)));
    }
    let n0 = cof0.dim();
    let steps = (2.0 * tol.powf(-0.25)).ceil().max(50.0) as usize;
    let h = 1e-3 * radius.max(1.0);
    let normal: Vec<Vec<f64>> = Tensor::zeros(&vec![per_axis; n0])
        .indices()
        .map(|idx| idx.iter().map(|&i| radius * (2.0 * i as f64 / (per_axis - 1) as f64 - 1.0)).collect())
        .collect();
    let nodes: Vec<(Vec<f64>, Vec<f64>, f64)> = normal
        .par_iter()
        .map(|u| {
            let (x, y) = paired_flow(cof0, cof1, a, m0, m1, u, steps)?;
            let (w0, w1) = (cof0.omega_at(&x)?, cof1.omega_at(&y)?);
            let mut worst: f64 = 0.0;
            for k in 0..n0 {
                let shifted = |c: f64| {
                    let mut v = u.clone();
                    v[k] += c * h;
                    paired_flow(cof0, cof1, a, m0, m1, &v, steps)
                };
                let (p2, p1, n1, n2) = (shifted(2.0)?, shifted(1.0)?, shifted(-1.0)?, shifted(-2.0)?);
                let d = |f: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| {
                    DVector::from_iterator(f(&p1).len(), (0..f(&p1).len()).map(|i| (-f(&p2)[i] + 8.0 * f(&p1)[i] - 8.0 * f(&n1)[i] + f(&n2)[i]) / (12.0 * h)))
                };
                let dx = d(|p| &p.0);
                let dy = d(|p| &p.1);
                worst = worst.max((&w1 * dy - a * (&w0 * dx)).amax());
            }
            Ok((x, y, worst))
        })
        .collect::<Result<_>>()?;
    let residual = nodes.iter().map(|n| n.2).fold(0.0, f64::max);
    if residual > 10.0 * tol {
        return Err(Error::ObstructionTooLarge(residual));
    }
    let (source, target) = nodes.into_iter().map(|(x, y, _)| (x, y)).unzip();
    Ok(MorphismGrid { radius, per_axis, normal, source, target, residual })
}

/// [`integrate_morphism_grid`] with five nodes per axis.
pub fn integrate_morphism(cof0: &Coframing, cof1: &Coframing, a: &Mat, m0: &[f64], m1: &[f64], radius: f64, tol: f64) -> Result<MorphismGrid> {
    integrate_morphism_grid(cof0, cof1, a, m0, m1, radius, 5, tol)
}
