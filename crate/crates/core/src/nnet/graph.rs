//! Reverse-mode differentiation over a closed set of matrix primitives.

use rayon::prelude::*;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    Softmax(Var),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    MaxPool { x: Var, argmax: Vec<usize> },
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Tape of values and the primitives that produced them.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    parallel: bool,
}

/// Gradients of a scalar (or summed) output with respect to every node.
#[derive(Debug)]
pub struct Gradients(Vec<Option<Tensor>>);

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.0.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, zeros if the output does not depend on it.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor {
            shape: like.shape.clone(),
            data: vec![0.0; like.len()],
        })
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn matmul(a: &Tensor, b: &Tensor, parallel: bool) -> Tensor {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    let row = |(i, o): (usize, &mut [f64])| {
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            for (o, bv) in o.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    };
    if m == 0 {
        return Tensor::zeros(n, 0);
    }
    if parallel {
        out.par_chunks_mut(m).enumerate().for_each(row);
    } else {
        out.chunks_mut(m).enumerate().for_each(row);
    }
    Tensor {
        shape: vec![n, m],
        data: out,
    }
}

fn col_sums(t: &Tensor) -> Tensor {
    let c = t.cols();
    let mut out = vec![0.0; c];
    for r in t.data.chunks(c.max(1)) {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v;
        }
    }
    Tensor {
        shape: vec![1, c],
        data: out,
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect(),
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => t.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// A graph whose matrix products split work across rows with rayon.
    /// Each row is still summed in a fixed order, so values are identical.
    pub fn parallel() -> Self {
        Graph {
            nodes: Vec::new(),
            parallel: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var) -> Result<(usize, usize)> {
        self.value(v).dims2()
    }

    pub fn leaf(&mut self, t: Tensor) -> Result<Var> {
        t.dims2()?;
        Ok(self.push(t, Op::Leaf))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((n, k), (k2, m)) = (self.dims(a)?, self.dims(b)?);
        if k != k2 {
            return Err(Error::shape(format!("matmul {n}x{k} by {k2}x{m}")));
        }
        let out = matmul(self.value(a), self.value(b), self.parallel);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.dims(a)? != self.dims(b)? {
            return Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape,
                self.value(b).shape
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    fn row_broadcast(&self, a: Var, r: Var, what: &str) -> Result<()> {
        let ((_, c), (one, c2)) = (self.dims(a)?, self.dims(r)?);
        if one != 1 || c != c2 {
            return Err(Error::shape(format!("{what}: row vector 1x{c} expected, got {one}x{c2}")));
        }
        Ok(())
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast(a, row, "add_row")?;
        let (av, rv) = (self.value(a), self.value(row));
        let c = av.cols().max(1);
        let data = av.data.iter().enumerate().map(|(i, x)| x + rv.data[i % c]).collect();
        let out = Tensor {
            shape: av.shape.clone(),
            data,
        };
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    /// Multiplies every row of `a` elementwise by a `1 x c` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast(a, row, "mul_row")?;
        let (av, rv) = (self.value(a), self.value(row));
        let c = av.cols().max(1);
        let data = av.data.iter().enumerate().map(|(i, x)| x * rv.data[i % c]).collect();
        let out = Tensor {
            shape: av.shape.clone(),
            data,
        };
        Ok(self.push(out, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let av = self.value(a);
        let out = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().map(|x| x * s).collect(),
        };
        self.push(out, Op::Scale(a, s))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let out = Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().map(|&x| gelu(x)).collect(),
        };
        self.push(out, Op::Gelu(a))
    }

    /// Per-row normalization to zero mean and unit variance, no affine.
    pub fn layer_norm(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a)?;
        if c == 0 {
            return Err(Error::shape("layer_norm over zero columns"));
        }
        let av = self.value(a);
        let mut data = vec![0.0; r * c];
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let x = &av.data[i * c..(i + 1) * c];
            let mean = x.iter().sum::<f64>() / c as f64;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in data[i * c..(i + 1) * c].iter_mut().zip(x) {
                *o = (v - mean) * s;
            }
            inv_std.push(s);
        }
        let out = Tensor {
            shape: vec![r, c],
            data,
        };
        Ok(self.push(out, Op::LayerNorm { x: a, inv_std }))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a)?;
        let av = self.value(a);
        let mut data = av.data.clone();
        for i in 0..r {
            let row = &mut data[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        let out = Tensor {
            shape: vec![r, c],
            data,
        };
        Ok(self.push(out, Op::Softmax(a)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.dims(a)?;
        let out = self.value(a).transpose();
        Ok(self.push(out, Op::Transpose(a)))
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (r, c) = self.dims(a)?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::IndexOutOfRange { index: bad, len: r });
        }
        let av = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(&av.data[i * c..(i + 1) * c]);
        }
        let out = Tensor {
            shape: vec![idx.len(), c],
            data,
        };
        Ok(self.push(out, Op::GatherRows(a, idx.to_vec())))
    }

    /// Column-wise max over consecutive groups of `k` rows. Ties go to the
    /// first row of the group holding the maximum.
    pub fn max_pool_groups(&mut self, a: Var, k: usize) -> Result<Var> {
        let (r, c) = self.dims(a)?;
        if k == 0 || r % k != 0 {
            return Err(Error::shape(format!("{r} rows do not split into groups of {k}")));
        }
        let av = self.value(a);
        let groups = r / k;
        let mut data = vec![0.0; groups * c];
        let mut argmax = vec![0; groups * c];
        for g in 0..groups {
            for j in 0..c {
                let mut best = g * k;
                for row in g * k + 1..(g + 1) * k {
                    if av.data[row * c + j] > av.data[best * c + j] {
                        best = row;
                    }
                }
                data[g * c + j] = av.data[best * c + j];
                argmax[g * c + j] = best;
            }
        }
        let out = Tensor {
            shape: vec![groups, c],
            data,
        };
        Ok(self.push(out, Op::MaxPool { x: a, argmax }))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((r, ca), (r2, cb)) = (self.dims(a)?, self.dims(b)?);
        if r != r2 {
            return Err(Error::shape(format!("concat_cols rows {r} vs {r2}")));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut data = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            data.extend_from_slice(&av.data[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&bv.data[i * cb..(i + 1) * cb]);
        }
        let out = Tensor {
            shape: vec![r, ca + cb],
            data,
        };
        Ok(self.push(out, Op::ConcatCols(a, b)))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.dims(a)?;
        if start > end || end > c {
            return Err(Error::shape(format!("column slice {start}..{end} of {c}")));
        }
        let av = self.value(a);
        let mut data = Vec::with_capacity(r * (end - start));
        for i in 0..r {
            data.extend_from_slice(&av.data[i * c + start..i * c + end]);
        }
        let out = Tensor {
            shape: vec![r, end - start],
            data,
        };
        Ok(self.push(out, Op::SliceCols(a, start)))
    }

    /// Mean of all entries as a `1 x 1` tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::shape("mean of an empty tensor"));
        }
        let m = av.data.iter().sum::<f64>() / av.len() as f64;
        Ok(self.push(Tensor::filled(1, 1, m), Op::Mean(a)))
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        self.mean(sq)
    }

    /// Back-propagates from `out`, seeding its gradient with ones, so a
    /// non-scalar output is differentiated as the sum of its entries.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let ov = self.value(out);
        grads[out.0] = Some(Tensor {
            shape: ov.shape.clone(),
            data: vec![1.0; ov.len()],
        });
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    accumulate(&mut grads[a.0], matmul(&g, &bv.transpose(), self.parallel));
                    accumulate(&mut grads[b.0], matmul(&av.transpose(), &g, self.parallel));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    let neg = Tensor {
                        shape: g.shape.clone(),
                        data: g.data.iter().map(|v| -v).collect(),
                    };
                    accumulate(&mut grads[b.0], neg);
                }
                Op::Mul(a, b) => {
                    accumulate(&mut grads[a.0], zip_map(&g, self.value(*b), |x, y| x * y));
                    accumulate(&mut grads[b.0], zip_map(&g, self.value(*a), |x, y| x * y));
                }
                Op::AddRow(a, r) => {
                    accumulate(&mut grads[r.0], col_sums(&g));
                    accumulate(&mut grads[a.0], g.clone());
                }
                Op::MulRow(a, r) => {
                    let (av, rv) = (self.value(*a), self.value(*r));
                    let c = av.cols().max(1);
                    let da = Tensor {
                        shape: g.shape.clone(),
                        data: g.data.iter().enumerate().map(|(i, v)| v * rv.data[i % c]).collect(),
                    };
                    accumulate(&mut grads[r.0], col_sums(&zip_map(&g, av, |x, y| x * y)));
                    accumulate(&mut grads[a.0], da);
                }
                Op::Scale(a, s) => {
                    let da = Tensor {
                        shape: g.shape.clone(),
                        data: g.data.iter().map(|v| v * s).collect(),
                    };
                    accumulate(&mut grads[a.0], da);
                }
                Op::Gelu(a) => {
                    accumulate(&mut grads[a.0], zip_map(&g, self.value(*a), |d, x| d * gelu_grad(x)));
                }
                Op::LayerNorm { x, inv_std } => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut dx = vec![0.0; y.len()];
                    for (i, s) in inv_std.iter().enumerate() {
                        let gy = &g.data[i * c..(i + 1) * c];
                        let yy = &y.data[i * c..(i + 1) * c];
                        let mg = gy.iter().sum::<f64>() / c as f64;
                        let mgy = gy.iter().zip(yy).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for j in 0..c {
                            dx[i * c + j] = s * (gy[j] - mg - yy[j] * mgy);
                        }
                    }
                    accumulate(
                        &mut grads[x.0],
                        Tensor {
                            shape: y.shape.clone(),
                            data: dx,
                        },
                    );
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut dx = vec![0.0; y.len()];
                    for i in 0..y.rows() {
                        let gy = &g.data[i * c..(i + 1) * c];
                        let yy = &y.data[i * c..(i + 1) * c];
                        let dot: f64 = gy.iter().zip(yy).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            dx[i * c + j] = yy[j] * (gy[j] - dot);
                        }
                    }
                    accumulate(
                        &mut grads[a.0],
                        Tensor {
                            shape: y.shape.clone(),
                            data: dx,
                        },
                    );
                }
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.transpose()),
                Op::GatherRows(a, idx) => {
                    let av = self.value(*a);
                    let c = av.cols();
                    let mut dx = vec![0.0; av.len()];
                    for (k, &i) in idx.iter().enumerate() {
                        for j in 0..c {
                            dx[i * c + j] += g.data[k * c + j];
                        }
                    }
                    accumulate(
                        &mut grads[a.0],
                        Tensor {
                            shape: av.shape.clone(),
                            data: dx,
                        },
                    );
                }
                Op::MaxPool { x, argmax } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let mut dx = vec![0.0; xv.len()];
                    for (o, &row) in argmax.iter().enumerate() {
                        dx[row * c + o % c] += g.data[o];
                    }
                    accumulate(
                        &mut grads[x.0],
                        Tensor {
                            shape: xv.shape.clone(),
                            data: dx,
                        },
                    );
                }
                Op::ConcatCols(a, b) => {
                    let (ca, cb) = (self.value(*a).cols(), self.value(*b).cols());
                    let r = g.rows();
                    let (mut da, mut db) = (Vec::with_capacity(r * ca), Vec::with_capacity(r * cb));
                    for i in 0..r {
                        let row = &g.data[i * (ca + cb)..(i + 1) * (ca + cb)];
                        da.extend_from_slice(&row[..ca]);
                        db.extend_from_slice(&row[ca..]);
                    }
                    accumulate(&mut grads[a.0], Tensor { shape: vec![r, ca], data: da });
                    accumulate(&mut grads[b.0], Tensor { shape: vec![r, cb], data: db });
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let (c, w) = (av.cols(), g.cols());
                    let mut dx = vec![0.0; av.len()];
                    for i in 0..g.rows() {
                        dx[i * c + start..i * c + start + w].copy_from_slice(&g.data[i * w..(i + 1) * w]);
                    }
                    accumulate(
                        &mut grads[a.0],
                        Tensor {
                            shape: av.shape.clone(),
                            data: dx,
                        },
                    );
                }
                Op::Mean(a) => {
                    let av = self.value(*a);
                    let v = g.data[0] / av.len() as f64;
                    accumulate(
                        &mut grads[a.0],
                        Tensor {
                            shape: av.shape.clone(),
                            data: vec![v; av.len()],
                        },
                    );
                }
            }
            grads[idx] = Some(g);
        }
        Gradients(grads)
    }
}
