//! Developments of curves from one coframed manifold into another, loop
//! monodromy, and the completeness probe.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::Mat;
use crate::coframing::{flow, flow_with, halton, Coframe, Coframing, Driver};
use crate::error::{Error, Result};
use crate::expr::{Expr, Program, Var};
use crate::ode::{OdeOptions, Status, Trajectory};

/// Source curve: either closed-form in `t` or sampled (cubic Hermite).
#[derive(Clone, Debug)]
pub enum SourceCurve {
    Exprs(Vec<Expr>),
    Sampled(Trajectory),
}

/// Position and velocity of a source curve; closed-form velocities are
/// differentiated symbolically.
pub fn curve_evaluator(curve: &SourceCurve) -> impl Fn(f64) -> Result<(Vec<f64>, Vec<f64>)> + '_ {
    let progs: Option<(Vec<Program>, Vec<Program>)> = match curve {
        SourceCurve::Exprs(e) => Some((e.iter().map(Program::compile).collect(), e.iter().map(|c| Program::compile(&c.diff(Var::T))).collect())),
        SourceCurve::Sampled(_) => None,
    };
    move |t| match (curve, &progs) {
        (SourceCurve::Exprs(_), Some((pos, vel))) => {
            Ok((pos.iter().map(|p| p.eval(&[], t)).collect::<Result<_>>()?, vel.iter().map(|p| p.eval(&[], t)).collect::<Result<_>>()?))
        }
        (SourceCurve::Sampled(tr), _) => Ok(tr.interpolate(t)),
        _ => unreachable!("programs exist for closed-form curves"),
    }
}

impl SourceCurve {
    pub fn dim(&self) -> usize {
        match self {
            SourceCurve::Exprs(e) => e.len(),
            SourceCurve::Sampled(t) => t.dim(),
        }
    }
}

pub struct DevelopmentProblem<'a> {
    pub source: &'a dyn Coframe,
    pub target: &'a dyn Coframe,
    /// Linear map V0 → V1 (n1 × n0).
    pub a: Mat,
    pub curve: SourceCurve,
    pub start: Vec<f64>,
    pub t_span: (f64, f64),
    pub tol: f64,
    /// Require the driver to be nowhere zero (immersed-curve mode).
    pub immersed: bool,
}

impl DevelopmentProblem<'_> {
    fn check(&self) -> Result<()> {
        let (n0, n1) = (self.source.dim(), self.target.dim());
        if self.a.nrows() != n1 || self.a.ncols() != n0 {
            return Err(Error::SizeMismatch(format!("A must be {n1}x{n0}")));
        }
        if self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("A has non-finite entries".into()));
        }
        if self.start.len() != n1 || !self.target.contains(&self.start) {
            return Err(Error::OutsideChart(self.start.clone()));
        }
        if self.curve.dim() != n0 {
            return Err(Error::SizeMismatch("curve dimension".into()));
        }
        Ok(())
    }

    /// Position and velocity of the source curve.
    pub fn curve_evaluator(&self) -> impl Fn(f64) -> Result<(Vec<f64>, Vec<f64>)> + '_ {
        curve_evaluator(&self.curve)
    }

    /// f(t) = ω0(c(t)) c'(t).
    pub fn driver(&self) -> impl Fn(f64) -> Result<Vec<f64>> + '_ {
        let c = self.curve_evaluator();
        move |t| {
            let (x, v) = c(t)?;
            let w = self.source.omega_at(&x)?;
            Ok((&w * DVector::from_vec(v)).iter().copied().collect())
        }
    }

    fn driver_samples(&self) -> Vec<f64> {
        match &self.curve {
            SourceCurve::Sampled(tr) => tr.t.clone(),
            SourceCurve::Exprs(_) => (0..=1000).map(|i| self.t_span.0 + (self.t_span.1 - self.t_span.0) * i as f64 / 1000.0).collect(),
        }
    }
}

/// Integrate the target flow of A f(t) from the start point.
pub fn develop(p: &DevelopmentProblem) -> Result<Trajectory> {
    p.check()?;
    let f = p.driver();
    if p.immersed {
        for t in p.driver_samples() {
            let v = f(t)?;
            if v.iter().map(|a| a * a).sum::<f64>().sqrt() < 1e-6 {
                return Err(Error::Invalid(format!("driver vanishes near t = {t}")));
            }
        }
    }
    let a = &p.a;
    let g = |t: f64| -> Result<Vec<f64>> {
        let v = f(t)?;
        Ok((a * DVector::from_vec(v)).iter().copied().collect())
    };
    flow_with(p.target, g, &p.start, p.t_span.0, p.t_span.1, OdeOptions::new(p.tol))
}

/// max over samples of |ω1(dev) dev' − A f(t)|.
pub fn development_residual(p: &DevelopmentProblem, dev: &Trajectory) -> Result<f64> {
    let f = p.driver();
    let mut worst: f64 = 0.0;
    for ((t, x), v) in dev.t.iter().zip(&dev.x).zip(&dev.v) {
        if !p.target.contains(x) {
            continue;
        }
        let lhs = p.target.omega_at(x)? * DVector::from_column_slice(v);
        let rhs = &p.a * DVector::from_vec(f(*t)?);
        worst = worst.max((lhs - rhs).amax());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonodromyResult {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    /// End minus start; a frame-angle coordinate is reduced to (−π, π].
    pub displacement: Vec<f64>,
    pub closed: bool,
    pub rotation: Option<f64>,
    /// For planar frame-bundle targets (x, y, θ): the Euclidean motion g
    /// with g · frame(start) = frame(end).
    pub group_element: Option<Vec<Vec<f64>>>,
    pub status: Status,
}

fn wrap_angle(a: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = a - tau * (a / tau).round();
    if r <= -std::f64::consts::PI {
        r + tau
    } else {
        r
    }
}

fn euclid_frame(x: &[f64]) -> Mat {
    let (c, s) = (x[2].cos(), x[2].sin());
    Mat::from_row_slice(3, 3, &[c, s, x[0], -s, c, x[1], 0.0, 0.0, 1.0])
}

/// Develop once around a closed source curve.
pub fn monodromy(p: &DevelopmentProblem) -> Result<MonodromyResult> {
    p.check()?;
    let c = p.curve_evaluator();
    let (a, _) = c(p.t_span.0)?;
    let (b, _) = c(p.t_span.1)?;
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    if gap > 1e-10 {
        return Err(Error::Invalid(format!("source curve is not closed (gap {gap:e})")));
    }
    let dev = develop(p)?;
    let end = dev.last().to_vec();
    let mut displacement: Vec<f64> = end.iter().zip(&p.start).map(|(e, s)| e - s).collect();
    let angle = p.target.frame_angle();
    if let Some(k) = angle {
        displacement[k] = wrap_angle(displacement[k]);
    }
    let norm = displacement.iter().map(|d| d * d).sum::<f64>().sqrt();
    let group_element = match angle {
        Some(2) if p.target.dim() == 3 => {
            let g = euclid_frame(&end) * euclid_frame(&p.start).try_inverse().expect("rigid motion");
            Some((0..3).map(|i| (0..3).map(|j| g[(i, j)]).collect()).collect())
        }
        _ => None,
    };
    Ok(MonodromyResult {
        start: p.start.clone(),
        end,
        closed: dev.status.is_completed() && norm <= 10.0 * p.tol,
        rotation: angle.map(|k| displacement[k]),
        displacement,
        group_element,
        status: dev.status,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeBudget {
    pub n_directions: usize,
    pub n_starts: usize,
    pub t_max: f64,
    pub tol: f64,
    /// Offset into the low-discrepancy sequence.
    pub seed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EscapeWitness {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    /// Second direction of a piecewise-constant field, switched in at t_max/2.
    pub switched_to: Option<Vec<f64>>,
    pub exit_time: f64,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "verdict")]
pub enum ProbeVerdict {
    #[serde(rename = "escape")]
    Escape(EscapeWitness),
    #[serde(rename = "no-escape-found")]
    NoEscapeFound { flows: usize },
}

fn unit_direction(index: usize, offset: usize, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|i| 2.0 * halton(index, offset + i) - 1.0).collect();
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-9 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return e;
    }
    v.into_iter().map(|a| a / norm).collect()
}

/// Flow constant and piecewise-constant unit fields from Halton starts and
/// report the first escape in the deterministic (start, direction, kind)
/// order. Finding none proves nothing.
pub fn completeness_probe(cof: &Coframing, budget: &ProbeBudget) -> Result<ProbeVerdict> {
    if budget.n_directions == 0 || budget.n_starts == 0 || !(budget.t_max > 0.0) || !(budget.tol > 0.0) {
        return Err(Error::Invalid("probe budget must be positive".into()));
    }
    let n = cof.dim();
    let (lo, hi) = cof.chart.finite_box();
    let mut starts = Vec::with_capacity(budget.n_starts);
    let mut idx = budget.seed;
    while starts.len() < budget.n_starts {
        idx += 1;
        if idx > budget.seed + 1000 * budget.n_starts {
            return Err(Error::Invalid("could not sample starts inside the chart".into()));
        }
        let p: Vec<f64> = (0..n).map(|i| lo[i] + (0.1 + 0.8 * halton(idx, i)) * (hi[i] - lo[i])).collect();
        if cof.chart.contains(&p) {
            starts.push(p);
        }
    }
    let mut jobs = Vec::new();
    for (s, start) in starts.iter().enumerate() {
        for d in 0..budget.n_directions {
            let k = budget.seed + s * budget.n_directions + d + 1;
            let first = unit_direction(k, n, n);
            let second = unit_direction(k, 2 * n, n);
            jobs.push((start.clone(), first.clone(), None));
            jobs.push((start.clone(), first, Some(second)));
        }
    }
    let opts = OdeOptions::new(budget.tol);
    let results: Vec<Result<Option<EscapeWitness>>> = jobs
        .par_iter()
        .map(|(start, first, second)| {
            let driver = match second {
                None => Driver::Constant(first.clone()),
                Some(s) => Driver::Switch { at: 0.5 * budget.t_max, first: first.clone(), second: s.clone() },
            };
            let tr = flow(cof, &driver, start, 0.0, budget.t_max, opts)?;
            Ok(match tr.status {
                Status::ChartExit(t) | Status::BlowUp(t) => Some(EscapeWitness {
                    start: start.clone(),
                    direction: first.clone(),
                    switched_to: second.clone(),
                    exit_time: t,
                    status: tr.status,
                }),
                _ => None,
            })
        })
        .collect();
    for r in results {
        if let Some(w) = r? {
            return Ok(ProbeVerdict::Escape(w));
        }
    }
    Ok(ProbeVerdict::NoEscapeFound { flows: jobs.len() })
}
