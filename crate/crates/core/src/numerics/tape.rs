//! Reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its value; [`GradientTape::gradient_of`]
//! walks the nodes backwards and accumulates adjoints into the registered
//! parameters. Nodes that do not depend on any parameter are skipped.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::matrix::{gemm, product, DenseMatrix, Trans};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Handle to a trainable matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Handle to a value recorded on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Trans, Var, Trans),
    SpMM(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    RepeatRow(Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    Gather(Var, Vec<usize>),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    LogSigmoid(Var),
    NormalizeRows(Var, Vec<f64>),
    MatchRowNorms(Var, Var),
    RowDot(Var, Var),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct GradientTape {
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, Var>,
}

/// Gradients of one scalar with respect to every registered parameter.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: BTreeMap<ParamId, DenseMatrix>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Result<&DenseMatrix> {
        self.by_param.get(&id).ok_or(Error::MissingHandle(id.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &DenseMatrix)> {
        self.by_param.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_finite(&self) -> bool {
        self.by_param.values().all(DenseMatrix::is_finite)
    }
}

impl GradientTape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: DenseMatrix, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = match op {
            Op::Param => true,
            _ => inputs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(value, Op::Leaf, &[])
    }

    /// Records a trainable parameter. Registering the same id twice returns
    /// the first handle.
    pub fn param(&mut self, id: ParamId, value: &DenseMatrix) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(value.clone(), Op::Param, &[]);
        self.params.insert(id, v);
        v
    }

    fn check(&self, op: &'static str, a: Var, b: Var, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::shape(op, self.shape(a), self.shape(b)))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_t(a, Trans::No, b, Trans::No)
    }

    /// `op(a) · op(b)` where `op` optionally transposes.
    pub fn matmul_t(&mut self, a: Var, ta: Trans, b: Var, tb: Trans) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        let inner_a = if ta == Trans::No { ac } else { ar };
        let inner_b = if tb == Trans::No { br } else { bc };
        self.check("matmul", a, b, inner_a == inner_b)?;
        let value = product(self.value(a), ta, self.value(b), tb);
        Ok(self.push(value, Op::MatMul(a, ta, b, tb), &[a, b]))
    }

    pub fn spmm(&mut self, s: &Arc<CsrMatrix>, a: Var) -> Result<Var> {
        if s.cols() != self.shape(a).0 {
            return Err(Error::shape("spmm", (s.rows(), s.cols()), self.shape(a)));
        }
        let value = s.mul_dense(self.value(a));
        Ok(self.push(value, Op::SpMM(Arc::clone(s), a), &[a]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).scale(factor);
        self.push(value, Op::Scale(a, factor), &[a])
    }

    /// Adds a `1 × d` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        self.check("add_row", a, row, self.shape(row) == (1, ac))?;
        let mut value = self.value(a).clone();
        let r = self.value(row).row(0).to_vec();
        for i in 0..ar {
            for (v, x) in value.row_mut(i).iter_mut().zip(&r) {
                *v += x;
            }
        }
        Ok(self.push(value, Op::AddRow(a, row), &[a, row]))
    }

    /// Stacks `n` copies of a `1 × d` row.
    pub fn repeat_row(&mut self, row: Var, n: usize) -> Result<Var> {
        if self.shape(row).0 != 1 {
            return Err(Error::shape("repeat_row", self.shape(row), (1, n)));
        }
        let src = self.value(row).row(0).to_vec();
        let mut value = DenseMatrix::zeros(n, src.len());
        for i in 0..n {
            value.row_mut(i).copy_from_slice(&src);
        }
        Ok(self.push(value, Op::RepeatRow(row), &[row]))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        self.check("concat_cols", a, b, ar == br)?;
        let mut value = DenseMatrix::zeros(ar, ac + bc);
        for i in 0..ar {
            let row = value.row_mut(i);
            row[..ac].copy_from_slice(self.nodes[a.0].value.row(i));
            row[ac..].copy_from_slice(self.nodes[b.0].value.row(i));
        }
        Ok(self.push(value, Op::ConcatCols(a, b), &[a, b]))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        self.check("concat_rows", a, b, ac == bc)?;
        let mut data = Vec::with_capacity((ar + br) * ac);
        data.extend_from_slice(self.value(a).data());
        data.extend_from_slice(self.value(b).data());
        let value = DenseMatrix::from_vec(ar + br, ac, data)?;
        Ok(self.push(value, Op::ConcatRows(a, b), &[a, b]))
    }

    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let rows = self.shape(a).0;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("gather_rows", self.shape(a), (bad, 0)));
        }
        let value = self.value(a).select_rows(indices);
        Ok(self.push(value, Op::Gather(a, indices.to_vec()), &[a]))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a), &[a])
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut value = src.clone();
        for i in 0..src.rows() {
            let row = value.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            for v in row.iter_mut() {
                *v -= lse;
            }
        }
        self.push(value, Op::LogSoftmaxRows(a), &[a])
    }

    /// Elementwise `ln σ(x)`, computed without overflow.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(log_sigmoid);
        self.push(value, Op::LogSigmoid(a), &[a])
    }

    /// Scales each row to unit L2 norm; all-zero rows stay zero.
    pub fn normalize_rows(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut value = src.clone();
        let mut norms = Vec::with_capacity(src.rows());
        for i in 0..src.rows() {
            let row = value.row_mut(i);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
            norms.push(norm);
        }
        self.push(value, Op::NormalizeRows(a, norms), &[a])
    }

    /// Row `r` of `a` rescaled to the L2 norm of row `r` of `like`; a zero
    /// row in either input gives a zero row.
    pub fn match_row_norms(&mut self, a: Var, like: Var) -> Result<Var> {
        self.check("match_row_norms", a, like, self.shape(a) == self.shape(like))?;
        let (src, target) = (self.value(a), self.value(like));
        let mut value = src.clone();
        for i in 0..src.rows() {
            let (na, nl) = (row_norm(src.row(i)), row_norm(target.row(i)));
            let factor = if na > 0.0 { nl / na } else { 0.0 };
            value.row_mut(i).iter_mut().for_each(|v| *v *= factor);
        }
        Ok(self.push(value, Op::MatchRowNorms(a, like), &[a, like]))
    }

    /// Row-wise inner products as an `n × 1` column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check("row_dot", a, b, self.shape(a) == self.shape(b))?;
        let (x, y) = (self.value(a), self.value(b));
        let data = (0..x.rows())
            .map(|i| x.row(i).iter().zip(y.row(i)).map(|(p, q)| p * q).sum())
            .collect();
        let value = DenseMatrix::from_vec(x.rows(), 1, data)?;
        Ok(self.push(value, Op::RowDot(a, b), &[a, b]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(a).mean());
        self.push(value, Op::Mean(a), &[a])
    }

    /// Exact gradients of the `1 × 1` node `loss` with respect to every
    /// parameter registered on this tape.
    pub fn gradient_of(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("gradient_of", self.shape(loss), (1, 1)));
        }
        let mut adj: Vec<Option<DenseMatrix>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(DenseMatrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            if let Op::Param = node.op {
                adj[idx] = Some(g);
                continue;
            }
            self.backward(node, &g, &mut adj);
        }

        let by_param = self
            .params
            .iter()
            .map(|(&id, &v)| {
                let g = adj[v.0]
                    .take()
                    .unwrap_or_else(|| DenseMatrix::zeros(self.shape(v).0, self.shape(v).1));
                (id, g)
            })
            .collect();
        Ok(Gradients { by_param })
    }

    fn accumulate(&self, adj: &mut [Option<DenseMatrix>], target: Var, g: DenseMatrix) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        match &mut adj[target.0] {
            Some(existing) => existing.axpy(1.0, &g),
            slot @ None => *slot = Some(g),
        }
    }

    fn accumulate_product(
        &self,
        adj: &mut [Option<DenseMatrix>],
        target: Var,
        a: &DenseMatrix,
        ta: Trans,
        b: &DenseMatrix,
        tb: Trans,
    ) {
        if !self.nodes[target.0].needs_grad {
            return;
        }
        match &mut adj[target.0] {
            Some(existing) => gemm(1.0, a, ta, b, tb, 1.0, existing),
            slot @ None => *slot = Some(product(a, ta, b, tb)),
        }
    }

    fn backward(&self, node: &Node, g: &DenseMatrix, adj: &mut [Option<DenseMatrix>]) {
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, ta, b, tb) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                match (ta, tb) {
                    (Trans::No, Trans::No) => {
                        self.accumulate_product(adj, *a, g, Trans::No, bv, Trans::Yes);
                        self.accumulate_product(adj, *b, av, Trans::Yes, g, Trans::No);
                    }
                    (Trans::No, Trans::Yes) => {
                        self.accumulate_product(adj, *a, g, Trans::No, bv, Trans::No);
                        self.accumulate_product(adj, *b, g, Trans::Yes, av, Trans::No);
                    }
                    (Trans::Yes, Trans::No) => {
                        self.accumulate_product(adj, *a, bv, Trans::No, g, Trans::Yes);
                        self.accumulate_product(adj, *b, av, Trans::No, g, Trans::No);
                    }
                    (Trans::Yes, Trans::Yes) => {
                        self.accumulate_product(adj, *a, bv, Trans::Yes, g, Trans::Yes);
                        self.accumulate_product(adj, *b, g, Trans::Yes, av, Trans::Yes);
                    }
                }
            }
            Op::SpMM(s, a) => {
                if self.nodes[a.0].needs_grad {
                    self.accumulate(adj, *a, s.transpose_mul_dense(g));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    let ga = g.hadamard(self.value(*b)).expect("shapes fixed at record time");
                    self.accumulate(adj, *a, ga);
                }
                if self.nodes[b.0].needs_grad {
                    let gb = g.hadamard(self.value(*a)).expect("shapes fixed at record time");
                    self.accumulate(adj, *b, gb);
                }
            }
            Op::Scale(a, f) => self.accumulate(adj, *a, g.scale(*f)),
            Op::AddRow(a, row) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *row, DenseMatrix::row_vector(&g.column_sums()));
            }
            Op::RepeatRow(row) => {
                self.accumulate(adj, *row, DenseMatrix::row_vector(&g.column_sums()));
            }
            Op::ConcatCols(a, b) => {
                let ac = self.shape(*a).1;
                let (rows, cols) = g.shape();
                let mut ga = DenseMatrix::zeros(rows, ac);
                let mut gb = DenseMatrix::zeros(rows, cols - ac);
                for i in 0..rows {
                    ga.row_mut(i).copy_from_slice(&g.row(i)[..ac]);
                    gb.row_mut(i).copy_from_slice(&g.row(i)[ac..]);
                }
                self.accumulate(adj, *a, ga);
                self.accumulate(adj, *b, gb);
            }
            Op::ConcatRows(a, b) => {
                let (ar, cols) = self.shape(*a);
                let split = ar * cols;
                let ga = DenseMatrix::from_vec(ar, cols, g.data()[..split].to_vec())
                    .expect("split length matches");
                let gb = DenseMatrix::from_vec(g.rows() - ar, cols, g.data()[split..].to_vec())
                    .expect("split length matches");
                self.accumulate(adj, *a, ga);
                self.accumulate(adj, *b, gb);
            }
            Op::Gather(a, indices) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = DenseMatrix::zeros(rows, cols);
                for (i, &r) in indices.iter().enumerate() {
                    for (o, x) in ga.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += x;
                    }
                }
                self.accumulate(adj, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut ga = g.clone();
                for i in 0..y.rows() {
                    let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(p, q)| p * q).sum();
                    for (o, yv) in ga.row_mut(i).iter_mut().zip(y.row(i)) {
                        *o = yv * (*o - dot);
                    }
                }
                self.accumulate(adj, *a, ga);
            }
            Op::LogSoftmaxRows(a) => {
                let y = &node.value;
                let mut ga = g.clone();
                for i in 0..y.rows() {
                    let total: f64 = g.row(i).iter().sum();
                    for (o, yv) in ga.row_mut(i).iter_mut().zip(y.row(i)) {
                        *o -= yv.exp() * total;
                    }
                }
                self.accumulate(adj, *a, ga);
            }
            Op::LogSigmoid(a) => {
                // d/dx ln σ(x) = σ(-x)
                let ga = g
                    .zip_map(self.value(*a), |gv, x| gv * sigmoid(-x))
                    .expect("shapes fixed at record time");
                self.accumulate(adj, *a, ga);
            }
            Op::NormalizeRows(a, norms) => {
                let y = &node.value;
                let mut ga = g.clone();
                for (i, &norm) in norms.iter().enumerate() {
                    let row = ga.row_mut(i);
                    if norm == 0.0 {
                        row.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(p, q)| p * q).sum();
                    for (o, yv) in row.iter_mut().zip(y.row(i)) {
                        *o = (*o - yv * dot) / norm;
                    }
                }
                self.accumulate(adj, *a, ga);
            }
            Op::MatchRowNorms(a, like) => {
                // y = n_l · a/n_a: ∂a = (n_l/n_a)(g − (g·u)u), ∂like = (g·u) like/n_l
                let (av, lv) = (self.value(*a), self.value(*like));
                let mut ga = DenseMatrix::zeros(av.rows(), av.cols());
                let mut gl = DenseMatrix::zeros(lv.rows(), lv.cols());
                for i in 0..av.rows() {
                    let (na, nl) = (row_norm(av.row(i)), row_norm(lv.row(i)));
                    if na == 0.0 || nl == 0.0 {
                        continue;
                    }
                    let dot: f64 = g.row(i).iter().zip(av.row(i)).map(|(p, q)| p * q).sum::<f64>() / na;
                    for ((o, gv), x) in ga.row_mut(i).iter_mut().zip(g.row(i)).zip(av.row(i)) {
                        *o = nl / na * (gv - dot * x / na);
                    }
                    for (o, x) in gl.row_mut(i).iter_mut().zip(lv.row(i)) {
                        *o = dot * x / nl;
                    }
                }
                self.accumulate(adj, *a, ga);
                self.accumulate(adj, *like, gl);
            }
            Op::RowDot(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = bv.clone();
                let mut gb = av.clone();
                for i in 0..av.rows() {
                    let s = g.get(i, 0);
                    ga.row_mut(i).iter_mut().for_each(|v| *v *= s);
                    gb.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                self.accumulate(adj, *a, ga);
                self.accumulate(adj, *b, gb);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.accumulate(adj, *a, DenseMatrix::filled(r, c, g.as_scalar()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                let n = (r * c).max(1) as f64;
                self.accumulate(adj, *a, DenseMatrix::filled(r, c, g.as_scalar() / n));
            }
        }
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RandomSource;

    /// Central differences of `f` at `x`, entry by entry.
    fn finite_difference(x: &DenseMatrix, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
        let h = 1e-5;
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            out.data_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn sum_of_squares() {
        let mut tape = GradientTape::new();
        let x = tape.param(ParamId(0), &DenseMatrix::row_vector(&[1.0, 2.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        let grads = tape.gradient_of(loss).unwrap();
        assert_eq!(grads.get(ParamId(0)).unwrap(), &DenseMatrix::row_vector(&[2.0, 4.0]));
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut tape = GradientTape::new();
        tape.param(ParamId(0), &DenseMatrix::row_vector(&[1.0, 2.0]));
        let c = tape.constant(DenseMatrix::scalar(3.0));
        let grads = tape.gradient_of(c).unwrap();
        assert_eq!(grads.get(ParamId(0)).unwrap(), &DenseMatrix::zeros(1, 2));
    }

    #[test]
    fn unregistered_parameter_is_an_error() {
        let mut tape = GradientTape::new();
        let x = tape.param(ParamId(0), &DenseMatrix::scalar(1.0));
        let grads = tape.gradient_of(x).unwrap();
        assert!(matches!(grads.get(ParamId(5)), Err(Error::MissingHandle(5))));
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = RandomSource::new(11);
        let x0 = rng.standard_normal(4, 3);
        let w = rng.standard_normal(3, 3);
        let row = rng.standard_normal(1, 3);
        let s = Arc::new(CsrMatrix::from_triplets(
            4,
            4,
            vec![(0, 1, 0.5), (1, 0, 0.5), (2, 3, 1.0), (3, 2, 1.0), (1, 2, 0.3)],
        ));

        let build = |tape: &mut GradientTape, xv: &DenseMatrix| -> Var {
            let x = tape.param(ParamId(0), xv);
            let wc = tape.constant(w.clone());
            let rc = tape.constant(row.clone());
            let a = tape.spmm(&s, x).unwrap();
            let b = tape.matmul(a, wc).unwrap();
            let b = tape.add_row(b, rc).unwrap();
            let c = tape.matmul_t(b, Trans::No, x, Trans::Yes).unwrap();
            let c = tape.softmax_rows(c);
            let d = tape.matmul_t(c, Trans::Yes, x, Trans::No).unwrap();
            let e = tape.normalize_rows(d);
            let e = tape.match_row_norms(e, b).unwrap();
            let f = tape.gather_rows(e, &[0, 2, 2, 3]).unwrap();
            let g = tape.concat_cols(f, x).unwrap();
            let h = tape.log_softmax_rows(g);
            let i = tape.row_dot(f, x).unwrap();
            let i = tape.log_sigmoid(i);
            let top = tape.gather_rows(x, &[1]).unwrap();
            let rep = tape.repeat_row(top, 2).unwrap();
            let tail = tape.gather_rows(x, &[0, 3]).unwrap();
            let stacked = tape.concat_rows(rep, tail).unwrap();
            let diff = tape.sub(stacked, x).unwrap();
            let sq = tape.mul(diff, diff).unwrap();
            let l1 = tape.mean(h);
            let l2 = tape.sum(i);
            let l3 = tape.mean(sq);
            let l = tape.add(l1, l2).unwrap();
            let l = tape.add(l, l3).unwrap();
            tape.scale(l, -0.7)
        };

        let mut tape = GradientTape::new();
        let loss = build(&mut tape, &x0);
        let analytic = tape.gradient_of(loss).unwrap().get(ParamId(0)).unwrap().clone();
        let numeric = finite_difference(&x0, |x| {
            let mut t = GradientTape::new();
            let l = build(&mut t, x);
            t.value(l).as_scalar()
        });
        assert!(rel_err(&analytic, &numeric) < 1e-4, "{analytic:?} vs {numeric:?}");
    }

    #[test]
    fn matched_norms() {
        let mut tape = GradientTape::new();
        let a = tape.constant(DenseMatrix::from_rows(&[[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]]));
        let b = tape.constant(DenseMatrix::from_rows(&[[0.0, 10.0], [1.0, 1.0], [0.0, 0.0]]));
        let m = tape.match_row_norms(a, b).unwrap();
        assert_eq!(tape.value(m), &DenseMatrix::from_rows(&[[6.0, 8.0], [0.0, 0.0], [0.0, 0.0]]));
        let same = tape.match_row_norms(a, a).unwrap();
        assert_eq!(tape.value(same), tape.value(a));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
    }
}
