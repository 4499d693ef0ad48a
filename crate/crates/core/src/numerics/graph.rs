use super::kernels::{self, LayerNormCache};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        cache: LayerNormCache<T>,
    },
    Gelu(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Row(Var, usize),
    Col(Var, usize),
    MeanRows(Var),
    Sum(Var),
    Bce(Var, T),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Tape of operations recorded in execution order.
///
/// Nodes are appended as ops run, so inputs always precede their consumers
/// and a single reverse sweep is a valid topological order for backward.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

fn matrix_dims(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (1, shape[0]),
        _ => (
            shape[..shape.len() - 1].iter().product(),
            shape[shape.len() - 1],
        ),
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        matrix_dims(self.nodes[v.0].value.shape())
    }

    fn mat(rows: usize, cols: usize, data: Vec<T>) -> Tensor<T> {
        Tensor::matrix(rows, cols, data).expect("kernel output matches its shape")
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let (n2, p) = self.dims(b);
        if n != n2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: vec![m, n],
                right: vec![n2, p],
            });
        }
        let out = kernels::matmul(self.value(a).data(), self.value(b).data(), m, n, p);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Self::mat(m, p, out), Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let (p, n2) = self.dims(b);
        if n != n2 {
            return Err(Error::Dimension {
                op: "matmul_nt",
                left: vec![m, n],
                right: vec![p, n2],
            });
        }
        let out = kernels::matmul_nt(self.value(a).data(), self.value(b).data(), m, n, p);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Self::mat(m, p, out), Op::MatMulNt(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.dims(a), self.dims(b));
        if sa != sb {
            return Err(Error::Dimension {
                op: "add",
                left: vec![sa.0, sa.1],
                right: vec![sb.0, sb.1],
            });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        let rg = self.rg(a) || self.rg(b);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// `x + bias` with `bias` broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.value(bias).numel() != n {
            return Err(Error::Dimension {
                op: "add_row",
                left: vec![m, n],
                right: self.value(bias).shape().to_vec(),
            });
        }
        let b = self.value(bias).data();
        let data = self
            .value(x)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b).map(|(&v, &bb)| v + bb))
            .collect();
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(Self::mat(m, n, data), Op::AddRow(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let value = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, s), rg)
    }

    pub fn row_softmax(&mut self, x: Var) -> Var {
        let (m, n) = self.dims(x);
        let out = kernels::row_softmax(self.value(x).data(), m, n);
        let rg = self.rg(x);
        self.push(Self::mat(m, n, out), Op::Softmax(x), rg)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.value(gain).numel() != n || self.value(bias).numel() != n {
            return Err(Error::Dimension {
                op: "layer_norm",
                left: vec![m, n],
                right: self.value(gain).shape().to_vec(),
            });
        }
        if eps <= T::zero() {
            return Err(Error::Contract("layer_norm eps must be positive".into()));
        }
        let (out, cache) = kernels::layer_norm(
            self.value(x).data(),
            self.value(gain).data(),
            self.value(bias).data(),
            m,
            n,
            eps,
        );
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Self::mat(m, n, out),
            Op::LayerNorm {
                x,
                gain,
                bias,
                cache,
            },
            rg,
        ))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(kernels::gelu);
        let rg = self.rg(x);
        self.push(value, Op::Gelu(x), rg)
    }

    /// Stack matrices vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_rows of zero tensors".into()))?;
        let cols = self.dims(first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if c != cols {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    left: vec![rows, cols],
                    right: vec![r, c],
                });
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Self::mat(rows, cols, data),
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    /// Place matrices side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("concat_cols of zero tensors".into()))?;
        let rows = self.dims(first).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.dims(p);
            if r != rows {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    left: vec![rows, cols],
                    right: vec![r, c],
                });
            }
            cols += c;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Self::mat(rows, cols, data),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    /// Row `r` as a `1 x n` matrix.
    pub fn row(&mut self, x: Var, r: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if r >= m {
            return Err(Error::Contract(format!(
                "row {r} out of range for {m} rows"
            )));
        }
        let data = self.value(x).row(r).to_vec();
        let rg = self.rg(x);
        Ok(self.push(Self::mat(1, n, data), Op::Row(x, r), rg))
    }

    /// Column `c` as an `m x 1` matrix.
    pub fn col(&mut self, x: Var, c: usize) -> Result<Var> {
        let (m, n) = self.dims(x);
        if c >= n {
            return Err(Error::Contract(format!(
                "column {c} out of range for {n} columns"
            )));
        }
        let data = (0..m).map(|r| self.value(x).get(r, c)).collect();
        let rg = self.rg(x);
        Ok(self.push(Self::mat(m, 1, data), Op::Col(x, c), rg))
    }

    /// Column means as a `1 x n` matrix.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (m, n) = self.dims(x);
        let inv = T::one() / T::c(m as f64);
        let v = self.value(x);
        let data = (0..n)
            .map(|c| (0..m).map(|r| v.get(r, c)).sum::<T>() * inv)
            .collect();
        let rg = self.rg(x);
        self.push(Self::mat(1, n, data), Op::MeanRows(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum::<T>();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Sigmoid binary cross-entropy of a single logit against a {0,1} label.
    pub fn bce_with_logits(&mut self, logit: Var, label: T) -> Result<Var> {
        if self.value(logit).numel() != 1 {
            return Err(Error::Contract(
                "bce_with_logits expects a single logit".into(),
            ));
        }
        let l = kernels::bce_with_logits(self.value(logit).item(), label);
        let rg = self.rg(logit);
        Ok(self.push(Tensor::scalar(l), Op::Bce(logit, label), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let shapes = self
            .nodes
            .iter()
            .map(|n| n.value.shape().to_vec())
            .collect();
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.backprop_node(node, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => {
                let shape = self.value(v).shape().to_vec();
                *slot = Some(g.reshape(shape).expect("gradient has input numel"));
            }
        }
    }

    fn backprop_node(&self, node: &Node<T>, dy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let g = dy.data();
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, n) = self.dims(a);
                let p = self.dims(b).1;
                if self.rg(a) {
                    let da = kernels::matmul_nt(g, self.value(b).data(), m, p, n);
                    self.accumulate(grads, a, Self::mat(m, n, da));
                }
                if self.rg(b) {
                    let db = kernels::matmul_tn(self.value(a).data(), g, m, n, p);
                    self.accumulate(grads, b, Self::mat(n, p, db));
                }
            }
            &Op::MatMulNt(a, b) => {
                let (m, n) = self.dims(a);
                let p = self.dims(b).0;
                if self.rg(a) {
                    let da = kernels::matmul(g, self.value(b).data(), m, p, n);
                    self.accumulate(grads, a, Self::mat(m, n, da));
                }
                if self.rg(b) {
                    let db = kernels::matmul_tn(g, self.value(a).data(), m, p, n);
                    self.accumulate(grads, b, Self::mat(p, n, db));
                }
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, dy.clone());
                self.accumulate(grads, b, dy.clone());
            }
            &Op::AddRow(x, bias) => {
                self.accumulate(grads, x, dy.clone());
                if self.rg(bias) {
                    let (m, n) = self.dims(x);
                    let db = (0..n)
                        .map(|c| (0..m).map(|r| g[r * n + c]).sum::<T>())
                        .collect();
                    self.accumulate(grads, bias, Self::mat(1, n, db));
                }
            }
            &Op::Scale(x, s) => self.accumulate(grads, x, dy.map(|v| v * s)),
            &Op::Softmax(x) => {
                let (m, n) = self.dims(x);
                let y = node.value.data();
                let mut dx = vec![T::zero(); m * n];
                for r in 0..m {
                    let yr = &y[r * n..(r + 1) * n];
                    let gr = &g[r * n..(r + 1) * n];
                    let inner = kernels::dot(yr, gr);
                    for c in 0..n {
                        dx[r * n + c] = yr[c] * (gr[c] - inner);
                    }
                }
                self.accumulate(grads, x, Self::mat(m, n, dx));
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                cache,
            } => {
                let (m, n) = self.dims(*x);
                let xh = &cache.normalized;
                let gv = self.value(*gain).data();
                if self.rg(*gain) {
                    let dg = (0..n)
                        .map(|c| (0..m).map(|r| g[r * n + c] * xh[r * n + c]).sum::<T>())
                        .collect();
                    self.accumulate(grads, *gain, Self::mat(1, n, dg));
                }
                if self.rg(*bias) {
                    let db = (0..n)
                        .map(|c| (0..m).map(|r| g[r * n + c]).sum::<T>())
                        .collect();
                    self.accumulate(grads, *bias, Self::mat(1, n, db));
                }
                if self.rg(*x) {
                    let nf = T::c(n as f64);
                    let mut dx = vec![T::zero(); m * n];
                    for r in 0..m {
                        let dxh: Vec<T> = (0..n).map(|c| g[r * n + c] * gv[c]).collect();
                        let sum_dxh = dxh.iter().copied().sum::<T>();
                        let sum_dxh_xh = kernels::dot(&dxh, &xh[r * n..(r + 1) * n]);
                        let scale = cache.inv_std[r] / nf;
                        for c in 0..n {
                            dx[r * n + c] =
                                scale * (nf * dxh[c] - sum_dxh - xh[r * n + c] * sum_dxh_xh);
                        }
                    }
                    self.accumulate(grads, *x, Self::mat(m, n, dx));
                }
            }
            &Op::Gelu(x) => {
                let xv = self.value(x).data();
                let dx: Vec<T> = xv
                    .iter()
                    .zip(g)
                    .map(|(&v, &gg)| gg * kernels::gelu_grad(v))
                    .collect();
                let value =
                    Tensor::new(self.value(x).shape().to_vec(), dx).expect("gelu gradient shape");
                self.accumulate(grads, x, value);
            }
            Op::ConcatRows(parts) => {
                let cols = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let (r, _) = self.dims(p);
                    if self.rg(p) {
                        let slice = g[offset * cols..(offset + r) * cols].to_vec();
                        self.accumulate(grads, p, Self::mat(r, cols, slice));
                    }
                    offset += r;
                }
            }
            Op::ConcatCols(parts) => {
                let (rows, total) = (node.value.rows(), node.value.cols());
                let mut offset = 0;
                for &p in parts {
                    let c = self.dims(p).1;
                    if self.rg(p) {
                        let mut slice = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            slice.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                        }
                        self.accumulate(grads, p, Self::mat(rows, c, slice));
                    }
                    offset += c;
                }
            }
            &Op::Row(x, r) => {
                let (m, n) = self.dims(x);
                let mut dx = vec![T::zero(); m * n];
                dx[r * n..(r + 1) * n].copy_from_slice(g);
                self.accumulate(grads, x, Self::mat(m, n, dx));
            }
            &Op::Col(x, c) => {
                let (m, n) = self.dims(x);
                let mut dx = vec![T::zero(); m * n];
                for r in 0..m {
                    dx[r * n + c] = g[r];
                }
                self.accumulate(grads, x, Self::mat(m, n, dx));
            }
            &Op::MeanRows(x) => {
                let (m, n) = self.dims(x);
                let inv = T::one() / T::c(m as f64);
                let dx = (0..m * n).map(|i| g[i % n] * inv).collect();
                self.accumulate(grads, x, Self::mat(m, n, dx));
            }
            &Op::Sum(x) => {
                let value = Tensor::filled(self.value(x).shape(), g[0]);
                self.accumulate(grads, x, value);
            }
            &Op::Bce(logit, label) => {
                let p = kernels::sigmoid(self.value(logit).item());
                let value = Tensor::filled(self.value(logit).shape(), (p - label) * g[0]);
                self.accumulate(grads, logit, value);
            }
        }
    }
}
