//! Free cyclic actions on the two homogeneous spaces of G2 covered by
//! SU(2) × SU(2): the gcd criteria and a fixed-point enumeration.

use num_integer::Integer;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Generator with eigenvalue phases p1/q1 and p2/q2 (lowest terms).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CyclicAction {
    pub p1: u64,
    pub q1: u64,
    pub p2: u64,
    pub q2: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Space {
    P1,
    P2,
}

pub const MAX_ORDER: u64 = 1_000_000;

impl CyclicAction {
    pub fn new(p1: u64, q1: u64, p2: u64, q2: u64) -> Result<CyclicAction> {
        for (p, q) in [(p1, q1), (p2, q2)] {
            if q == 0 || p >= q || p.gcd(&q) != 1 {
                return Err(Error::Invalid(format!("{p}/{q} is not a reduced phase in [0, 1)")));
            }
        }
        Ok(CyclicAction { p1, q1, p2, q2 })
    }

    pub fn order(&self) -> u64 {
        self.q1.lcm(&self.q2)
    }
}

fn divides_twice_gcd(c: &CyclicAction, second: i128) -> bool {
    let q = i128::from(c.q1) * i128::from(c.q2);
    let g = q.gcd(&second.abs());
    (2 * i128::from(c.q1.gcd(&c.q2))) % g == 0
}

pub fn free_on_p2(c: &CyclicAction) -> bool {
    divides_twice_gcd(c, i128::from(c.p1) * i128::from(c.q2) - i128::from(c.q1) * i128::from(c.p2))
}

pub fn free_on_p1(c: &CyclicAction) -> bool {
    divides_twice_gcd(c, i128::from(c.p1) * i128::from(c.q2) + 3 * i128::from(c.q1) * i128::from(c.p2))
}

/// Fixed-point test for every nontrivial power of the generator. Phases are
/// integers modulo the order L, so eigenvalue sets {±a} compare exactly.
pub fn brute_force_free(c: &CyclicAction, which: Space) -> Result<bool> {
    let l = c.order();
    if l > MAX_ORDER {
        return Err(Error::TooLarge(l));
    }
    let (s1, s2) = (l / c.q1, l / c.q2);
    let same_pair = |a: u64, b: u64| a == b || (a + b) % l == 0;
    for k in 1..l {
        let a = (k * c.p1 % c.q1) * s1;
        let b = (k * c.p2 % c.q2) * s2;
        // (1, 1) and (−1, −1) act trivially
        let central = a == b && (a == 0 || 2 * a == l);
        if central {
            continue;
        }
        let fixed = match which {
            Space::P2 => same_pair(a, b),
            // eigenvalues of γ1⁻¹ are those of γ1
            Space::P1 => same_pair(a, 3 * b % l),
        };
        if fixed {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct SurveyRow {
    #[serde(flatten)]
    pub action: CyclicAction,
    pub formula_p1: bool,
    pub formula_p2: bool,
    pub oracle_p1: bool,
    pub oracle_p2: bool,
    pub agree: bool,
    /// `formula-oracle` when the gcd criteria and the enumeration differ;
    /// `prime-family` for (2/q, 1/q) with q prime when either verdict says
    /// the action is not free on both spaces.
    pub anomaly: Vec<&'static str>,
}

fn is_prime(q: u64) -> bool {
    q >= 2 && (2..).take_while(|d| d * d <= q).all(|d| q % d != 0)
}

pub fn survey_row(c: CyclicAction) -> Result<SurveyRow> {
    let (formula_p1, formula_p2) = (free_on_p1(&c), free_on_p2(&c));
    let oracle_p1 = brute_force_free(&c, Space::P1)?;
    let oracle_p2 = brute_force_free(&c, Space::P2)?;
    let agree = formula_p1 == oracle_p1 && formula_p2 == oracle_p2;
    let mut anomaly = Vec::new();
    if !agree {
        anomaly.push("formula-oracle");
    }
    let family = c.q1 == c.q2 && c.p1 == 2 && c.p2 == 1 && is_prime(c.q1);
    if family && !(formula_p1 && formula_p2 && oracle_p1 && oracle_p2) {
        anomaly.push("prime-family");
    }
    Ok(SurveyRow { action: c, formula_p1, formula_p2, oracle_p1, oracle_p2, agree, anomaly })
}

/// Every reduced action with q1, q2 ≤ qmax, in lexicographic (p1, q1, p2, q2) order.
pub fn survey(qmax: u64) -> Result<Vec<SurveyRow>> {
    if qmax == 0 || qmax > 60 {
        return Err(Error::Invalid(format!("qmax must lie in 1..=60, got {qmax}")));
    }
    let phases: Vec<(u64, u64)> = (1..=qmax).flat_map(|q| (0..q).filter(move |p| p.gcd(&q) == 1).map(move |p| (p, q))).collect();
    let mut actions: Vec<CyclicAction> = phases.iter().flat_map(|&(p1, q1)| phases.iter().map(move |&(p2, q2)| CyclicAction { p1, q1, p2, q2 })).collect();
    actions.sort();
    actions.into_par_iter().map(survey_row).collect()
}
