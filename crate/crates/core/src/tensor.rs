use serde::Serialize;

/// Dense row-major real tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn add_at(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] += v;
    }

    /// Max-abs entry; zero for empty tensors.
    pub fn norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, o: &Tensor) -> Tensor {
        assert_eq!(self.shape, o.shape, "tensor shape mismatch");
        Tensor { shape: self.shape.clone(), data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|a| a * s).collect() }
    }

    /// Iterate over all multi-indices in storage order.
    pub fn indices(&self) -> IndexIter {
        IndexIter { shape: self.shape.clone(), cur: vec![0; self.shape.len()], done: self.data.is_empty() }
    }

    /// Apply a linear map `m` (rows = new size, cols = old size) to slot `k`.
    pub fn map_slot(&self, k: usize, m: &nalgebra::DMatrix<f64>) -> Tensor {
        assert_eq!(m.ncols(), self.shape[k], "slot size mismatch");
        let mut shape = self.shape.clone();
        shape[k] = m.nrows();
        let mut out = Tensor::zeros(&shape);
        for idx in self.indices() {
            let v = self.get(&idx);
            if v == 0.0 {
                continue;
            }
            let mut j = idx.clone();
            for r in 0..m.nrows() {
                let c = m[(r, idx[k])];
                if c != 0.0 {
                    j[k] = r;
                    out.add_at(&j, c * v);
                }
            }
        }
        out
    }
}

pub struct IndexIter {
    shape: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl Iterator for IndexIter {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut k = self.shape.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.cur[k] += 1;
            if self.cur[k] < self.shape[k] {
                break;
            }
            self.cur[k] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_iteration_matches_offsets() {
        let t = Tensor::zeros(&[2, 3, 2]);
        for (n, idx) in t.indices().enumerate() {
            assert_eq!(t.offset(&idx), n);
        }
        assert_eq!(t.indices().count(), 12);
        assert_eq!(Tensor::zeros(&[2, 0]).indices().count(), 0);
        assert_eq!(Tensor::zeros(&[]).indices().count(), 1);
    }
}
