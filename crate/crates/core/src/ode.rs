//! Dormand–Prince 5(4) integration with chart-exit, blow-up and
//! step-underflow termination, plus the sampled-curve type shared by every
//! module.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "t")]
pub enum Status {
    #[serde(rename = "completed")]
    Completed,
    #[serde(rename = "chart-exit")]
    ChartExit(f64),
    #[serde(rename = "blow-up")]
    BlowUp(f64),
    #[serde(rename = "step-underflow")]
    StepUnderflow(f64),
}

impl Status {
    pub fn is_completed(&self) -> bool {
        matches!(self, Status::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::ChartExit(_) => "chart-exit",
            Status::BlowUp(_) => "blow-up",
            Status::StepUnderflow(_) => "step-underflow",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match *self {
            Status::Completed => None,
            Status::ChartExit(t) | Status::BlowUp(t) | Status::StepUnderflow(t) => Some(t),
        }
    }
}

/// Time-sampled curve. `v` holds the velocity at each sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub status: Status,
    pub accepted: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> &[f64] {
        self.x.last().expect("nonempty trajectory")
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("nonempty trajectory")
    }

    /// Build from bare samples, estimating velocities with Fritsch–Carlson
    /// monotone slopes.
    pub fn from_samples(t: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Trajectory> {
        if t.len() != x.len() || t.len() < 2 {
            return Err(Error::Invalid("need at least two samples with matching lengths".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sample times must increase strictly".into()));
        }
        let n = x[0].len();
        let m = t.len();
        let mut v = vec![vec![0.0; n]; m];
        for k in 0..n {
            let d: Vec<f64> = (0..m - 1).map(|i| (x[i + 1][k] - x[i][k]) / (t[i + 1] - t[i])).collect();
            v[0][k] = d[0];
            v[m - 1][k] = d[m - 2];
            for i in 1..m - 1 {
                v[i][k] = if d[i - 1] * d[i] <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
                    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
                };
            }
        }
        Ok(Trajectory { t, x, v, status: Status::Completed, accepted: 0, rejected: 0 })
    }

    /// Cubic Hermite position and velocity at `t` (clamped to the span).
    pub fn interpolate(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let m = self.t.len();
        if m == 1 || t <= self.t[0] {
            return (self.x[0].clone(), self.v[0].clone());
        }
        if t >= self.t[m - 1] {
            return (self.x[m - 1].clone(), self.v[m - 1].clone());
        }
        let i = match self.t.binary_search_by(|p| p.partial_cmp(&t).expect("finite times")) {
            Ok(i) => return (self.x[i].clone(), self.v[i].clone()),
            Err(i) => i - 1,
        };
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s * s * s - 3.0 * s * s + 1.0,
            s * s * s - 2.0 * s * s + s,
            -2.0 * s * s * s + 3.0 * s * s,
            s * s * s - s * s,
        );
        let (d00, d10, d01, d11) = (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        let (x0, x1, v0, v1) = (&self.x[i], &self.x[i + 1], &self.v[i], &self.v[i + 1]);
        let pos = (0..x0.len()).map(|k| h00 * x0[k] + h10 * h * v0[k] + h01 * x1[k] + h11 * h * v1[k]).collect();
        let vel = (0..x0.len()).map(|k| (d00 * x0[k] + d01 * x1[k]) / h + d10 * v0[k] + d11 * v1[k]).collect();
        (pos, vel)
    }
}

/// The local error controller runs this much tighter than the requested
/// tolerance, so that global errors over desk-scale spans stay within a few
/// multiples of `tol`.
pub const LOCAL_TOLERANCE_FACTOR: f64 = 0.01;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Target accuracy, used as both relative and absolute tolerance.
    pub tol: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(tol: f64) -> OdeOptions {
        OdeOptions { tol, max_step: None, max_steps: 2_000_000 }
    }

    pub fn max_step(mut self, h: f64) -> OdeOptions {
        self.max_step = Some(h);
        self
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Continuous extension of one accepted step.
struct Dense {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn at(&self, t: f64) -> Vec<f64> {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len()).map(|i| r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])))).collect()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Integrate `x' = f(t, x)` from `t0` to `t1`. `inside` is the chart
/// predicate; leaving it ends the run with a located chart-exit. Right-hand
/// side failures shrink the step and, if persistent, end in step-underflow.
pub fn integrate<F, P>(f: F, inside: P, x0: &[f64], t0: f64, t1: f64, opts: OdeOptions) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> bool,
{
    if !(opts.tol > 0.0) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    if !(t1 >= t0) {
        return Err(Error::Invalid("time span must be increasing".into()));
    }
    if !inside(x0) {
        return Err(Error::OutsideChart(x0.to_vec()));
    }
    let n = x0.len();
    let span = t1 - t0;
    let tol = opts.tol * LOCAL_TOLERANCE_FACTOR;
    let f0 = f(t0, x0)?;
    let mut traj = Trajectory { t: vec![t0], x: vec![x0.to_vec()], v: vec![f0.clone()], status: Status::Completed, accepted: 0, rejected: 0 };
    if span == 0.0 {
        return Ok(traj);
    }
    let hmax = opts.max_step.unwrap_or(span).min(span);
    let hmin = 1e-14 * span.max(t0.abs());
    let blow_h = 1e-12 * span;

    // starting step from the size of the solution and its derivative
    let sc: Vec<f64> = x0.iter().map(|v| tol + tol * v.abs()).collect();
    let d0 = (x0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span.max(1.0) } else { 0.01 * d0 / d1 };
    h = h.min(hmax).max(hmin * 10.0);

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k1 = f0;
    let mut last_rejected = false;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    loop {
        if traj.accepted + traj.rejected >= opts.max_steps {
            traj.status = Status::StepUnderflow(t);
            return Ok(traj);
        }
        if t + h > t1 || (t1 - (t + h)) < 1e-12 * span {
            h = t1 - t;
        }
        k[0].clone_from(&k1);
        let mut stage_failed = false;
        for s in 1..7 {
            let xs: Vec<f64> = (0..n).map(|i| x[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>()).collect();
            match f(t + C[s] * h, &xs) {
                Ok(v) if v.iter().all(|q| q.is_finite()) => k[s] = v,
                _ => {
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            traj.rejected += 1;
            h *= 0.25;
            last_rejected = true;
            if h < hmin {
                traj.status = Status::StepUnderflow(t);
                return Ok(traj);
            }
            continue;
        }
        let xn: Vec<f64> = (0..n).map(|i| x[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()).collect();
        let err = {
            let s: f64 = (0..n)
                .map(|i| {
                    let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                    let sc = tol + tol * x[i].abs().max(xn[i].abs());
                    (e / sc).powi(2)
                })
                .sum();
            (s / n.max(1) as f64).sqrt()
        };
        if !err.is_finite() || err > 1.0 {
            traj.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            last_rejected = true;
            if h < hmin {
                traj.status = if norm(&x) > 1e8 { Status::BlowUp(t) } else { Status::StepUnderflow(t) };
                return Ok(traj);
            }
            continue;
        }
        // accepted
        traj.accepted += 1;
        let tn = t + h;
        if !inside(&xn) {
            let ydiff: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
            let dense = Dense {
                t0: t,
                h,
                r: [
                    x.clone(),
                    ydiff.clone(),
                    bspl.clone(),
                    (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect(),
                    (0..n).map(|i| h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>()).collect(),
                ],
            };
            let (mut lo, mut hi) = (t, tn);
            while hi - lo > 1e-13 * span.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if inside(&dense.at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let xe = dense.at(hi);
            let ve = f(hi, &xe).unwrap_or_else(|_| k[6].clone());
            traj.t.push(hi);
            traj.x.push(xe);
            traj.v.push(ve);
            traj.status = Status::ChartExit(hi);
            return Ok(traj);
        }
        t = tn;
        x = xn;
        k1 = k[6].clone();
        traj.t.push(t);
        traj.x.push(x.clone());
        traj.v.push(k1.clone());
        if h < blow_h && norm(&x) > 1e8 {
            traj.status = Status::BlowUp(t);
            return Ok(traj);
        }
        if t >= t1 {
            return Ok(traj);
        }
        let mut fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(hmax);
        if h < hmin {
            traj.status = if norm(&x) > 1e8 { Status::BlowUp(t) } else { Status::StepUnderflow(t) };
            return Ok(traj);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_accuracy() {
        let tr = integrate(|_, x| Ok(vec![-x[0]]), |_| true, &[1.0], 0.0, 5.0, OdeOptions::new(1e-10)).unwrap();
        assert!(tr.status.is_completed());
        assert!((tr.last()[0] - (-5f64).exp()).abs() < 1e-9);
        assert_eq!(tr.t_end(), 5.0);
    }

    #[test]
    fn harmonic_oscillator_and_velocity_samples() {
        let tr = integrate(|_, x| Ok(vec![x[1], -x[0]]), |_| true, &[0.0, 1.0], 0.0, 10.0, OdeOptions::new(1e-10)).unwrap();
        for (t, v) in tr.t.iter().zip(&tr.v) {
            assert!((v[0] - t.cos()).abs() < 1e-8);
        }
        let (p, _) = tr.interpolate(3.3);
        assert!((p[0] - 3.3f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn chart_exit_located() {
        // x' = 1 from 0, box x < 0.7
        let tr = integrate(|_, _| Ok(vec![1.0]), |x| x[0] < 0.7, &[0.0], 0.0, 2.0, OdeOptions::new(1e-8)).unwrap();
        match tr.status {
            Status::ChartExit(ts) => assert!((ts - 0.7).abs() < 1e-10),
            s => panic!("{s:?}"),
        }
        assert!(tr.x[..tr.len() - 1].iter().all(|x| x[0] < 0.7));
    }

    #[test]
    fn blow_up_detected() {
        // x' = x^2 from 1 blows up at t = 1
        let tr = integrate(|_, x| Ok(vec![x[0] * x[0]]), |_| true, &[1.0], 0.0, 2.0, OdeOptions::new(1e-8)).unwrap();
        match tr.status {
            Status::BlowUp(ts) => assert!((ts - 1.0).abs() < 1e-4, "{ts}"),
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn exit_inside_long_step_uses_dense_output() {
        // sin t crosses 0.5 at pi/6; loose tolerance means large steps
        let f = |_: f64, x: &[f64]| Ok(vec![x[1], -x[0]]);
        let tr = integrate(f, |x| x[0] < 0.5, &[0.0, 1.0], 0.0, 3.0, OdeOptions::new(1e-9)).unwrap();
        let ts = tr.status.time().unwrap();
        assert!((ts - std::f64::consts::FRAC_PI_6).abs() < 1e-8, "{ts}");
    }

    #[test]
    fn monotone_samples_stay_monotone() {
        let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let x: Vec<Vec<f64>> = [0.0, 0.0, 1.0, 1.0, 1.0, 3.0].iter().map(|&v| vec![v]).collect();
        let tr = Trajectory::from_samples(t, x).unwrap();
        let mut prev = -1.0;
        for k in 0..=500 {
            let (p, _) = tr.interpolate(k as f64 * 0.01);
            assert!(p[0] >= prev - 1e-15);
            prev = p[0];
        }
    }
}
