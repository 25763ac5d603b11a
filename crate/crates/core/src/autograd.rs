//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation of one forward pass. Parameters are
//! read in place from a [`ParamStore`]; everything else is owned by the
//! graph. Vectors are represented as `1 × d` matrices.

use ndarray::{s, Array2, Axis, Zip};

use crate::params::{Grads, ParamId, ParamStore};

pub type Mat = Array2<f64>;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Gelu(Var),
    Softmax(Var),
    Normalize(Var),
    Embed(ParamId, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    MeanRows(Var),
    MeanOf(Vec<Var>),
    CrossEntropy(Var, Vec<usize>),
    Dot(Var),
}

struct Node {
    op: Op,
    value: Mat,
    /// Op-specific cache: softmax probabilities, inverse std, or a constant.
    aux: Option<Mat>,
}

const LN_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044715;

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    fn push(&mut self, op: Op, value: Mat, aux: Option<Mat>) -> Var {
        self.nodes.push(Node { op, value, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.get(id),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(Op::Input, value, None)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Op::Param(id), Mat::zeros((0, 0)), None)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), v, None)
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(Op::MatMulT(a, b), v, None)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), v, None)
    }

    /// `a + row` with `row` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(Op::AddRow(a, row), v, None)
    }

    /// `a ⊙ row` with `row` broadcast over the rows of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) * self.value(row);
        self.push(Op::MulRow(a, row), v, None)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a) * factor;
        self.push(Op::Scale(a, factor), v, None)
    }

    /// `a + c` for a constant `c` that receives no gradient.
    pub fn add_const(&mut self, a: Var, c: &Mat) -> Var {
        let v = self.value(a) + c;
        self.push(Op::AddConst(a), v, None)
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| 0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh()));
        self.push(Op::Gelu(a), v, None)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(Op::Softmax(a), v, None)
    }

    /// Per-row standardization to zero mean and unit variance.
    pub fn normalize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let d = x.ncols() as f64;
        let mut out = x.clone();
        let mut inv = Mat::zeros((x.nrows(), 1));
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let r = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * r);
            inv[[i, 0]] = r;
        }
        self.push(Op::Normalize(a), out, Some(inv))
    }

    /// Rows `ids` of parameter matrix `table`.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Var {
        let t = self.store.get(table);
        let v = t.select(Axis(0), ids);
        self.push(Op::Embed(table, ids.to_vec()), v, None)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column mismatch");
        self.push(Op::ConcatRows(parts.to_vec()), v, None)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        self.push(Op::ConcatCols(parts.to_vec()), v, None)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(Op::SliceCols(a, start, end), v, None)
    }

    /// Column means, as a `1 × d` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = x.mean_axis(Axis(0)).expect("mean of empty matrix").insert_axis(Axis(0));
        self.push(Op::MeanRows(a), v, None)
    }

    /// Element-wise average of same-shaped nodes.
    pub fn mean_of(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "mean_of needs at least one input");
        let mut acc = self.value(parts[0]).clone();
        for &p in &parts[1..] {
            acc += self.value(p);
        }
        acc /= parts.len() as f64;
        self.push(Op::MeanOf(parts.to_vec()), acc, None)
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let probs = softmax_rows(self.value(logits));
        let x = self.value(logits);
        let nll: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let row = x.row(i);
                let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - row[t]
            })
            .sum();
        self.push(
            Op::CrossEntropy(logits, targets.to_vec()),
            Mat::from_elem((1, 1), nll),
            Some(probs),
        )
    }

    /// `Σ a ⊙ w` for a constant weight matrix `w`.
    pub fn dot_const(&mut self, a: Var, w: &Mat) -> Var {
        let v = (self.value(a) * w).sum();
        self.push(Op::Dot(a), Mat::from_elem((1, 1), v), Some(w.clone()))
    }

    /// Gradients of scalar node `loss` with respect to every node and parameter.
    pub fn backward(&self, loss: Var) -> Gradients {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Mat>> = vec![None; n];
        let mut params = Grads::zeros_like(self.store);
        grads[loss.0] = Some(Mat::from_elem((1, 1), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => grads[idx] = Some(g),
                Op::Param(id) => params.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::MulRow(a, row) => {
                    let dr = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let da = &g * self.value(*row);
                    acc(&mut grads, *row, dr);
                    acc(&mut grads, *a, da);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::AddConst(a) => acc(&mut grads, *a, g),
                Op::Gelu(a) => {
                    let mut da = self.value(*a).mapv(|x| {
                        let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
                        0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
                    });
                    da *= &g;
                    acc(&mut grads, *a, da);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut da = &g * y;
                    let dots = da.sum_axis(Axis(1)).insert_axis(Axis(1));
                    Zip::from(&mut da).and(y).and_broadcast(&dots).for_each(|d, &yv, &s| {
                        *d -= yv * s;
                    });
                    acc(&mut grads, *a, da);
                }
                Op::Normalize(a) => {
                    let y = &node.value;
                    let inv = node.aux.as_ref().unwrap();
                    let d = y.ncols() as f64;
                    let mean_g = g.sum_axis(Axis(1)).insert_axis(Axis(1)) / d;
                    let mean_gy = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1)) / d;
                    let mut da = g.clone();
                    Zip::from(&mut da)
                        .and(y)
                        .and_broadcast(&mean_g)
                        .and_broadcast(&mean_gy)
                        .and_broadcast(inv)
                        .for_each(|dx, &yv, &mg, &mgy, &r| {
                            *dx = r * (*dx - mg - yv * mgy);
                        });
                    acc(&mut grads, *a, da);
                }
                Op::Embed(table, ids) => {
                    params.scatter_rows(*table, ids, &g, self.store.get(*table).nrows())
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let r = self.value(p).nrows();
                        acc(&mut grads, p, g.slice(s![start..start + r, ..]).to_owned());
                        start += r;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let c = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., start..start + c]).to_owned());
                        start += c;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let x = self.value(*a);
                    let mut da = Mat::zeros(x.raw_dim());
                    da.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads, *a, da);
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let rows = x.nrows();
                    let da = g.broadcast(x.raw_dim()).unwrap().to_owned() / rows as f64;
                    acc(&mut grads, *a, da);
                }
                Op::MeanOf(parts) => {
                    let k = parts.len() as f64;
                    for &p in parts {
                        acc(&mut grads, p, &g / k);
                    }
                }
                Op::CrossEntropy(logits, targets) => {
                    let mut da = node.aux.as_ref().unwrap().clone();
                    for (i, &t) in targets.iter().enumerate() {
                        da[[i, t]] -= 1.0;
                    }
                    da *= g[[0, 0]];
                    acc(&mut grads, *logits, da);
                }
                Op::Dot(a) => {
                    let w = node.aux.as_ref().unwrap();
                    acc(&mut grads, *a, w * g[[0, 0]]);
                }
            }
        }
        Gradients { nodes: grads, params }
    }
}

fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    nodes: Vec<Option<Mat>>,
    pub params: Grads,
}

impl Gradients {
    /// Gradient with respect to node `v`, if the loss depends on it.
    pub fn of(&self, v: Var) -> Option<&Mat> {
        self.nodes[v.0].as_ref()
    }
}
