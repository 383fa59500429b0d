use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Truncated multivariate Taylor polynomial. Coefficients are stored in
/// graded order (all degree-0 terms, then degree-1, ...), so truncating to a
/// lower order is a prefix slice.
#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<Layout>,
    c: Vec<f64>,
}

#[derive(Debug)]
struct Layout {
    n: usize,
    order: usize,
    idx: Vec<Vec<u8>>,
    deg_start: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    mul: Vec<(u32, u32, u32)>,
    /// deriv[k][b] = (source index of b + e_k, factor b_k + 1), b indexing the order-1 layout.
    deriv: Vec<Vec<(u32, f64)>>,
}

fn layout(n: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(l) = cache.lock().expect("jet layout cache").get(&(n, order)) {
        return l.clone();
    }
    let l = Arc::new(Layout::build(n, order));
    cache.lock().expect("jet layout cache").entry((n, order)).or_insert(l).clone()
}

impl Layout {
    fn build(n: usize, order: usize) -> Layout {
        let mut idx: Vec<Vec<u8>> = Vec::new();
        let mut deg_start = Vec::new();
        for d in 0..=order {
            deg_start.push(idx.len());
            let mut cur = vec![0u8; n];
            fill(&mut idx, &mut cur, 0, d);
        }
        deg_start.push(idx.len());
        let lookup: HashMap<Vec<u8>, usize> = idx.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let deg = |a: &[u8]| a.iter().map(|&x| x as usize).sum::<usize>();
        let mut mul = Vec::new();
        for (i, a) in idx.iter().enumerate() {
            for (j, b) in idx.iter().enumerate() {
                if deg(a) + deg(b) > order {
                    continue;
                }
                let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u32, j as u32, lookup[&s] as u32));
            }
        }
        let mut deriv = vec![Vec::new(); n];
        if order > 0 {
            let lower = deg_start[order];
            for (k, dk) in deriv.iter_mut().enumerate() {
                for b in &idx[..lower] {
                    let mut s = b.clone();
                    s[k] += 1;
                    dk.push((lookup[&s] as u32, f64::from(b[k]) + 1.0));
                }
            }
        }
        Layout { n, order, idx, deg_start, lookup, mul, deriv }
    }
}

// Enumerate all multi-indices of total degree `d` in lexicographic order.
fn fill(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, pos: usize, d: usize) {
    let n = cur.len();
    if n == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = d as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=d).rev() {
        cur[pos] = k as u8;
        fill(out, cur, pos + 1, d - k);
    }
    cur[pos] = 0;
}

impl Jet {
    pub fn constant(n: usize, order: usize, v: f64) -> Jet {
        let layout = layout(n, order);
        let mut c = vec![0.0; layout.idx.len()];
        c[0] = v;
        Jet { layout, c }
    }

    /// The coordinate function `x_i` expanded at value `v`.
    pub fn variable(n: usize, order: usize, i: usize, v: f64) -> Jet {
        let mut j = Jet::constant(n, order, v);
        if order > 0 {
            let mut e = vec![0u8; n];
            e[i] = 1;
            let k = j.layout.lookup[&e];
            j.c[k] = 1.0;
        }
        j
    }

    pub fn nvars(&self) -> usize {
        self.layout.n
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }

    /// Taylor coefficients in graded order.
    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Multi-indices matching [`Jet::coeffs`].
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        &self.layout.idx
    }

    /// Partial derivative `d^k f / dx_{i1} ... dx_{ik}` for the listed
    /// variable indices (order of the list is irrelevant).
    pub fn partial(&self, vars: &[usize]) -> f64 {
        assert!(vars.len() <= self.order(), "partial beyond jet order");
        let mut a = vec![0u8; self.nvars()];
        for &v in vars {
            a[v] += 1;
        }
        let fact: f64 = a.iter().map(|&k| (1..=k as u32).product::<u32>() as f64).product();
        self.c[self.layout.lookup[&a]] * fact
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars()).map(|k| self.partial(&[k])).collect()
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.nvars(), order);
        let c = self.c[..layout.idx.len()].to_vec();
        Jet { layout, c }
    }

    /// Partial derivative as a jet of one lower order.
    pub fn derivative(&self, k: usize) -> Jet {
        assert!(self.order() > 0, "derivative of an order-0 jet");
        let layout = layout(self.nvars(), self.order() - 1);
        let c = self.layout.deriv[k].iter().map(|&(s, f)| self.c[s as usize] * f).collect();
        Jet { layout, c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { layout: self.layout.clone(), c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    fn zip(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.nvars(), o.nvars(), "jet variable count mismatch");
        let order = self.order().min(o.order());
        let layout = layout(self.nvars(), order);
        let c = (0..layout.idx.len()).map(|i| f(self.c[i], o.c[i])).collect();
        Jet { layout, c }
    }

    fn product(&self, o: &Jet) -> Jet {
        assert_eq!(self.nvars(), o.nvars(), "jet variable count mismatch");
        let order = self.order().min(o.order());
        let layout = layout(self.nvars(), order);
        let mut c = vec![0.0; layout.idx.len()];
        for &(i, j, k) in &layout.mul {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { layout, c }
    }

    /// `sum_k d[k] h^k` with `h` the nilpotent part of `self`.
    fn compose(&self, d: &[f64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let top = self.order();
        let mut r = Jet::constant(self.nvars(), top, d[top]);
        for k in (0..top).rev() {
            r = r.product(&h);
            r.c[0] += d[k];
        }
        r
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut d = vec![e; self.order() + 1];
        let mut f = 1.0;
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            f *= k as f64;
            *dk /= f;
        }
        self.compose(&d)
    }

    fn trig(&self, phase: usize) -> Jet {
        let a = self.value();
        let cyc = [a.sin(), a.cos(), -a.sin(), -a.cos()];
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut f = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                f *= k as f64;
            }
            d.push(cyc[(k + phase) % 4] / f);
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        self.trig(0)
    }

    pub fn cos(&self) -> Jet {
        self.trig(1)
    }

    pub fn ln(&self) -> Option<Jet> {
        let a = self.value();
        if a <= 0.0 || !a.is_finite() {
            return None;
        }
        let mut d = vec![a.ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (k as f64 * a.powi(k as i32)));
        }
        Some(self.compose(&d))
    }

    /// `self^r` for a constant exponent. Integer exponents accept any base
    /// (nonzero when negative powers appear); others need a positive base.
    pub fn powf(&self, r: f64) -> Option<Jet> {
        let a = self.value();
        let integral = r.fract() == 0.0 && r.abs() < 1e9;
        let order = self.order();
        if !integral && a <= 0.0 && !(a == 0.0 && r > order as f64) {
            return None;
        }
        if integral && r < 0.0 && a == 0.0 {
            return None;
        }
        let mut d = Vec::with_capacity(order + 1);
        let mut binom = 1.0;
        for k in 0..=order {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            if binom == 0.0 {
                d.push(0.0);
                continue;
            }
            let e = r - k as f64;
            let p = if integral { a.powi(e as i32) } else { a.powf(e) };
            if !p.is_finite() {
                return None;
            }
            d.push(binom * p);
        }
        Some(self.compose(&d))
    }

    pub fn recip(&self) -> Option<Jet> {
        self.powf(-1.0)
    }

    pub fn div(&self, o: &Jet) -> Option<Jet> {
        if o.value() == 0.0 {
            return None;
        }
        Some(self.product(&o.recip()?))
    }

    pub fn abs(&self) -> Option<Jet> {
        let a = self.value();
        if a == 0.0 && self.order() > 0 {
            return None;
        }
        Some(if a < 0.0 { -self } else { self.clone() })
    }

    /// `atan(self)` via the series of `1/(1+u^2)` integrated termwise.
    pub fn atan(&self) -> Jet {
        let a = self.value();
        let order = self.order();
        // g(s) = 1/(1 + (a+s)^2) = 1/(p0 + p1 s + p2 s^2)
        let p = [1.0 + a * a, 2.0 * a, 1.0];
        let mut g = vec![0.0; order.max(1)];
        for k in 0..g.len() {
            let mut acc = if k == 0 { 1.0 } else { 0.0 };
            for j in 1..=k.min(2) {
                acc -= p[j] * g[k - j];
            }
            g[k] = acc / p[0];
        }
        let mut d = vec![a.atan()];
        for k in 1..=order {
            d.push(g[k - 1] / k as f64);
        }
        self.compose(&d)
    }

    pub fn atan2(y: &Jet, x: &Jet) -> Option<Jet> {
        let (y0, x0) = (y.value(), x.value());
        if y0 == 0.0 && x0 == 0.0 {
            return None;
        }
        let theta = y0.atan2(x0);
        Some(if x0.abs() >= y0.abs() {
            let u = y.div(x)?;
            u.atan().add_scalar(theta - (y0 / x0).atan())
        } else {
            let u = x.div(y)?;
            (-&u.atan()).add_scalar(theta + (x0 / y0).atan())
        })
    }

    /// Number of coefficients of total degree exactly `d`.
    pub fn degree_range(&self, d: usize) -> std::ops::Range<usize> {
        self.layout.deg_start[d]..self.layout.deg_start[d + 1]
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.product(o)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
