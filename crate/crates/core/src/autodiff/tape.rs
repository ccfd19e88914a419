use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive kinds recorded on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    Add,
    Sub,
    MulElem,
    Matmul,
    Affine,
    LeakyRelu,
    Tanh,
    Exp,
    Log,
    Square,
    Sqrt,
    Softplus,
    Scale,
    Offset,
    Clamp,
    Sum,
    Mean,
    RowSum,
    Broadcast,
    Transpose,
    ConcatRows,
    SliceRows,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    MulElem(Var, Var),
    Matmul(Var, Var),
    Affine(Var, Var, Var),
    LeakyRelu(Var, T),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sqrt(Var),
    Softplus(Var),
    Scale(Var, T),
    Offset(Var, T),
    Clamp(Var, T, T),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Broadcast(Var, usize),
    Transpose(Var),
    ConcatRows(Var, Var),
    SliceRows(Var, usize, usize),
}

impl<T> Op<T> {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::MulElem(..) => OpKind::MulElem,
            Op::Matmul(..) => OpKind::Matmul,
            Op::Affine(..) => OpKind::Affine,
            Op::LeakyRelu(..) => OpKind::LeakyRelu,
            Op::Tanh(..) => OpKind::Tanh,
            Op::Exp(..) => OpKind::Exp,
            Op::Log(..) => OpKind::Log,
            Op::Square(..) => OpKind::Square,
            Op::Sqrt(..) => OpKind::Sqrt,
            Op::Softplus(..) => OpKind::Softplus,
            Op::Scale(..) => OpKind::Scale,
            Op::Offset(..) => OpKind::Offset,
            Op::Clamp(..) => OpKind::Clamp,
            Op::Sum(..) => OpKind::Sum,
            Op::Mean(..) => OpKind::Mean,
            Op::RowSum(..) => OpKind::RowSum,
            Op::Broadcast(..) => OpKind::Broadcast,
            Op::Transpose(..) => OpKind::Transpose,
            Op::ConcatRows(..) => OpKind::ConcatRows,
            Op::SliceRows(..) => OpKind::SliceRows,
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::MulElem(a, b)
            | Op::Matmul(a, b)
            | Op::ConcatRows(a, b) => vec![a, b],
            Op::Affine(x, w, b) => vec![x, w, b],
            Op::LeakyRelu(a, _)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::Sqrt(a)
            | Op::Softplus(a)
            | Op::Scale(a, _)
            | Op::Offset(a, _)
            | Op::Clamp(a, _, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::RowSum(a)
            | Op::Broadcast(a, _)
            | Op::Transpose(a)
            | Op::SliceRows(a, _, _) => vec![a],
        }
    }
}

/// Linear record of primitive operations supporting one reverse sweep.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    ops: Vec<Op<T>>,
    values: Vec<Tensor<T>>,
    needs_grad: Vec<bool>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the root w.r.t. `var`; zeros when `var` does not reach the root.
    pub fn wrt(&self, var: Var) -> Tensor<T> {
        let shape = self.shapes[var.0].clone();
        match &self.grads[var.0] {
            Some(g) => Tensor::from_parts(shape, g.clone()),
            None => Tensor::zeros(&shape),
        }
    }

    /// Raw gradient buffer, `None` when `var` is unreachable from the root.
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads[var.0].as_deref()
    }

    /// Moves the gradient for `var` out of the collection (zeros when unreachable).
    pub fn take(&mut self, var: Var) -> Vec<T> {
        let len = self.shapes[var.0].iter().product();
        self.grads[var.0].take().unwrap_or_else(|| vec![T::zero(); len])
    }
}

fn mismatch(op: &'static str, a: &Tensor<impl Scalar>, b: &Tensor<impl Scalar>) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn require_matrix<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize)> {
    if t.shape().len() == 2 {
        Ok((t.shape()[0], t.shape()[1]))
    } else {
        Err(Error::ShapeMismatch {
            op,
            lhs: t.shape().to_vec(),
            rhs: vec![],
        })
    }
}

fn map<T: Scalar>(t: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
}

fn zip<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(mismatch(op, a, b));
    }
    Ok(Tensor::from_parts(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    ))
}

fn softplus<T: Scalar>(x: T) -> T {
    // max(x, 0) + log(1 + exp(-|x|))
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `m x k` times `k x n`, both row-major.
fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    T::gemm(m, k, n, T::one(), a, (k, 1), b, (n, 1), T::zero(), &mut c, (n, 1));
    c
}

fn compute<T: Scalar>(op: &Op<T>, values: &[Tensor<T>]) -> Result<Tensor<T>> {
    let v = |var: &Var| &values[var.0];
    Ok(match op {
        Op::Leaf => unreachable!("leaves are never recomputed"),
        Op::Add(a, b) => zip("add", v(a), v(b), |x, y| x + y)?,
        Op::Sub(a, b) => zip("sub", v(a), v(b), |x, y| x - y)?,
        Op::MulElem(a, b) => zip("mul_elem", v(a), v(b), |x, y| x * y)?,
        Op::Matmul(a, b) => {
            let (a, b) = (v(a), v(b));
            let (m, k) = require_matrix("matmul", a)?;
            let (k2, n) = require_matrix("matmul", b)?;
            if k != k2 {
                return Err(mismatch("matmul", a, b));
            }
            Tensor::from_parts(vec![m, n], matmul_raw(a.data(), b.data(), m, k, n))
        }
        Op::Affine(x, w, bias) => {
            let (x, w, bias) = (v(x), v(w), v(bias));
            let (m, k) = require_matrix("affine", x)?;
            let (k2, n) = require_matrix("affine", w)?;
            if k != k2 {
                return Err(mismatch("affine", x, w));
            }
            if bias.shape() != [1, n] {
                return Err(mismatch("affine", w, bias));
            }
            let mut out = Vec::with_capacity(m * n);
            for _ in 0..m {
                out.extend_from_slice(bias.data());
            }
            T::gemm(m, k, n, T::one(), x.data(), (k, 1), w.data(), (n, 1), T::one(), &mut out, (n, 1));
            Tensor::from_parts(vec![m, n], out)
        }
        Op::LeakyRelu(a, slope) => {
            let s = *slope;
            map(v(a), |x| if x > T::zero() { x } else { x * s })
        }
        Op::Tanh(a) => map(v(a), T::tanh),
        Op::Exp(a) => {
            let out = map(v(a), T::exp);
            if !out.is_finite() {
                return Err(Error::Domain {
                    op: "exp",
                    detail: "overflow".into(),
                });
            }
            out
        }
        Op::Log(a) => {
            if let Some(bad) = v(a).data().iter().find(|&&x| x <= T::zero()) {
                return Err(Error::Domain {
                    op: "log",
                    detail: format!("non-positive input {bad}"),
                });
            }
            map(v(a), T::ln)
        }
        Op::Square(a) => map(v(a), |x| x * x),
        Op::Sqrt(a) => {
            if let Some(bad) = v(a).data().iter().find(|&&x| x < T::zero()) {
                return Err(Error::Domain {
                    op: "sqrt",
                    detail: format!("negative input {bad}"),
                });
            }
            map(v(a), T::sqrt)
        }
        Op::Softplus(a) => map(v(a), softplus),
        Op::Scale(a, c) => {
            let c = *c;
            map(v(a), |x| x * c)
        }
        Op::Offset(a, c) => {
            let c = *c;
            map(v(a), |x| x + c)
        }
        Op::Clamp(a, lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            map(v(a), |x| x.max(lo).min(hi))
        }
        Op::Sum(a) => Tensor::scalar(v(a).data().iter().copied().sum()),
        Op::Mean(a) => {
            let a = v(a);
            if a.is_empty() {
                return Err(Error::Domain {
                    op: "mean",
                    detail: "empty input".into(),
                });
            }
            let n = T::from_usize(a.len()).unwrap();
            Tensor::scalar(a.data().iter().copied().sum::<T>() / n)
        }
        Op::RowSum(a) => {
            let a = v(a);
            let (m, n) = require_matrix("row_sum", a)?;
            let data = (0..m)
                .map(|i| a.data()[i * n..(i + 1) * n].iter().copied().sum())
                .collect();
            Tensor::from_parts(vec![m, 1], data)
        }
        Op::Broadcast(a, rows) => {
            let a = v(a);
            let (r, n) = require_matrix("broadcast", a)?;
            if r != 1 {
                return Err(Error::ShapeMismatch {
                    op: "broadcast",
                    lhs: a.shape().to_vec(),
                    rhs: vec![*rows, n],
                });
            }
            let mut out = Vec::with_capacity(rows * n);
            for _ in 0..*rows {
                out.extend_from_slice(a.data());
            }
            Tensor::from_parts(vec![*rows, n], out)
        }
        Op::Transpose(a) => {
            let a = v(a);
            let (m, n) = require_matrix("transpose", a)?;
            let mut out = vec![T::zero(); m * n];
            for i in 0..m {
                for j in 0..n {
                    out[j * m + i] = a.data()[i * n + j];
                }
            }
            Tensor::from_parts(vec![n, m], out)
        }
        Op::ConcatRows(a, b) => {
            let (a, b) = (v(a), v(b));
            let (ra, ca) = require_matrix("concat_rows", a)?;
            let (rb, cb) = require_matrix("concat_rows", b)?;
            if ca != cb {
                return Err(mismatch("concat_rows", a, b));
            }
            let mut out = Vec::with_capacity((ra + rb) * ca);
            out.extend_from_slice(a.data());
            out.extend_from_slice(b.data());
            Tensor::from_parts(vec![ra + rb, ca], out)
        }
        Op::SliceRows(a, start, end) => {
            let a = v(a);
            let (m, _) = require_matrix("slice_rows", a)?;
            if start > end || *end > m {
                return Err(Error::ShapeMismatch {
                    op: "slice_rows",
                    lhs: a.shape().to_vec(),
                    rhs: vec![*start, *end],
                });
            }
            a.slice_rows(*start, *end)
        }
    })
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            ops: Vec::new(),
            values: Vec::new(),
            needs_grad: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Records an input tensor. Its `requires_grad` flag decides whether
    /// gradients are tracked for it.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let needs = tensor.requires_grad();
        let mut value = tensor;
        value.clear_grad();
        self.push_raw(Op::Leaf, value, needs)
    }

    /// Records a tensor that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    /// Records a trainable input.
    pub fn param(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    /// Every recorded handle, in recording order.
    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.ops.len()).map(Var)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.values[var.0]
    }

    pub fn kind(&self, var: Var) -> OpKind {
        self.ops[var.0].kind()
    }

    /// Input handles of a node, in argument order.
    pub fn inputs(&self, var: Var) -> Vec<Var> {
        self.ops[var.0].inputs()
    }

    fn push_raw(&mut self, op: Op<T>, value: Tensor<T>, needs_grad: bool) -> Var {
        self.ops.push(op);
        self.values.push(value);
        self.needs_grad.push(needs_grad);
        Var(self.ops.len() - 1)
    }

    fn push(&mut self, op: Op<T>) -> Result<Var> {
        let value = compute(&op, &self.values)?;
        let needs = op.inputs().iter().any(|v| self.needs_grad[v.0]);
        Ok(self.push_raw(op, value, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MulElem(a, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Matmul(a, b))
    }

    /// `x * w + b`, with the `1 x out` bias row added to every batch row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.push(Op::Affine(x, w, b))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Result<Var> {
        self.push(Op::LeakyRelu(a, slope))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Log(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Square(a))
    }

    /// Elementwise square root; its derivative at 0 is taken as 0.
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sqrt(a))
    }

    /// `log(1 + exp(x))` in overflow-free form.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Softplus(a))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        self.push(Op::Scale(a, c))
    }

    pub fn offset(&mut self, a: Var, c: T) -> Result<Var> {
        self.push(Op::Offset(a, c))
    }

    /// Clamps into `[lo, hi]`; gradient passes only inside the interval.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Result<Var> {
        self.push(Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Mean(a))
    }

    /// Sums each row of an `m x n` matrix into an `m x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        self.push(Op::RowSum(a))
    }

    /// Repeats a `1 x n` row `rows` times.
    pub fn broadcast(&mut self, a: Var, rows: usize) -> Result<Var> {
        self.push(Op::Broadcast(a, rows))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Transpose(a))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::ConcatRows(a, b))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.push(Op::SliceRows(a, start, end))
    }

    /// Recomputes every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor<T>>> {
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.values.len());
        for (op, recorded) in self.ops.iter().zip(&self.values) {
            let value = match op {
                Op::Leaf => recorded.clone(),
                _ => compute(op, &values)?,
            };
            values.push(value);
        }
        Ok(values)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let root_value = &self.values[root.0];
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot {
                shape: root_value.shape().to_vec(),
            });
        }
        let n = root.0 + 1;
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.ops.len()];
        grads[root.0] = Some(vec![T::one()]);

        for idx in (0..n).rev() {
            if !self.needs_grad[idx] {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.values.iter().map(|v| v.shape().to_vec()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], var: Var, contribution: Vec<T>) {
        if !self.needs_grad[var.0] {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contribution) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contribution),
        }
    }

    fn elementwise(
        &self,
        grads: &mut [Option<Vec<T>>],
        a: Var,
        g: &[T],
        f: impl Fn(T, T, T) -> T,
        out: &[T],
    ) {
        if !self.needs_grad[a.0] {
            return;
        }
        let x = self.values[a.0].data();
        let contribution = g
            .iter()
            .zip(x)
            .zip(out)
            .map(|((&g, &x), &y)| f(g, x, y))
            .collect();
        self.accumulate(grads, a, contribution);
    }

    fn propagate(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out = self.values[idx].data();
        match &self.ops[idx] {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.to_vec());
                self.accumulate(grads, *b, g.iter().map(|&v| -v).collect());
            }
            Op::MulElem(a, b) => {
                let (av, bv) = (self.values[a.0].data(), self.values[b.0].data());
                if self.needs_grad[a.0] {
                    self.accumulate(grads, *a, g.iter().zip(bv).map(|(&g, &b)| g * b).collect());
                }
                if self.needs_grad[b.0] {
                    self.accumulate(grads, *b, g.iter().zip(av).map(|(&g, &a)| g * a).collect());
                }
            }
            Op::Matmul(a, b) => self.matmul_backward(*a, *b, None, g, grads),
            Op::Affine(x, w, b) => self.matmul_backward(*x, *w, Some(*b), g, grads),
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                self.elementwise(grads, *a, g, |g, x, _| if x > T::zero() { g } else { g * s }, out)
            }
            Op::Tanh(a) => self.elementwise(grads, *a, g, |g, _, y| g * (T::one() - y * y), out),
            Op::Exp(a) => self.elementwise(grads, *a, g, |g, _, y| g * y, out),
            Op::Log(a) => self.elementwise(grads, *a, g, |g, x, _| g / x, out),
            Op::Square(a) => {
                let two = T::one() + T::one();
                self.elementwise(grads, *a, g, |g, x, _| g * two * x, out)
            }
            Op::Sqrt(a) => {
                let half = T::of(0.5);
                self.elementwise(
                    grads,
                    *a,
                    g,
                    |g, _, y| if y > T::zero() { g * half / y } else { T::zero() },
                    out,
                )
            }
            Op::Softplus(a) => self.elementwise(grads, *a, g, |g, x, _| g * sigmoid(x), out),
            Op::Scale(a, c) => {
                let c = *c;
                self.elementwise(grads, *a, g, |g, _, _| g * c, out)
            }
            Op::Offset(a, _) => self.accumulate(grads, *a, g.to_vec()),
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                self.elementwise(
                    grads,
                    *a,
                    g,
                    |g, x, _| if x >= lo && x <= hi { g } else { T::zero() },
                    out,
                )
            }
            Op::Sum(a) => {
                let len = self.values[a.0].len();
                self.accumulate(grads, *a, vec![g[0]; len]);
            }
            Op::Mean(a) => {
                let len = self.values[a.0].len();
                let share = g[0] / T::from_usize(len).unwrap();
                self.accumulate(grads, *a, vec![share; len]);
            }
            Op::RowSum(a) => {
                let cols = self.values[a.0].cols();
                let contribution = g
                    .iter()
                    .flat_map(|&gi| std::iter::repeat_n(gi, cols))
                    .collect();
                self.accumulate(grads, *a, contribution);
            }
            Op::Broadcast(a, rows) => {
                let cols = self.values[a.0].cols();
                let mut acc = vec![T::zero(); cols];
                for r in 0..*rows {
                    for (s, &v) in acc.iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                        *s += v;
                    }
                }
                self.accumulate(grads, *a, acc);
            }
            Op::Transpose(a) => {
                let (m, n) = (self.values[a.0].rows(), self.values[a.0].cols());
                let mut gt = vec![T::zero(); m * n];
                for i in 0..m {
                    for j in 0..n {
                        gt[i * n + j] = g[j * m + i];
                    }
                }
                self.accumulate(grads, *a, gt);
            }
            Op::ConcatRows(a, b) => {
                let split = self.values[a.0].len();
                self.accumulate(grads, *a, g[..split].to_vec());
                self.accumulate(grads, *b, g[split..].to_vec());
            }
            Op::SliceRows(a, start, _) => {
                let src = &self.values[a.0];
                let cols = src.cols();
                let mut full = vec![T::zero(); src.len()];
                full[start * cols..start * cols + g.len()].copy_from_slice(g);
                self.accumulate(grads, *a, full);
            }
        }
    }

    fn matmul_backward(
        &self,
        a: Var,
        b: Var,
        bias: Option<Var>,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
    ) {
        let (av, bv) = (&self.values[a.0], &self.values[b.0]);
        let (m, k) = (av.rows(), av.cols());
        let n = bv.cols();
        if self.needs_grad[a.0] {
            // dA = G * B^T
            let mut da = vec![T::zero(); m * k];
            T::gemm(m, n, k, T::one(), g, (n, 1), bv.data(), (1, n), T::zero(), &mut da, (k, 1));
            self.accumulate(grads, a, da);
        }
        if self.needs_grad[b.0] {
            // dB = A^T * G
            let mut db = vec![T::zero(); k * n];
            T::gemm(k, m, n, T::one(), av.data(), (1, k), g, (n, 1), T::zero(), &mut db, (n, 1));
            self.accumulate(grads, b, db);
        }
        if let Some(bias) = bias {
            if self.needs_grad[bias.0] {
                let mut db = vec![T::zero(); n];
                for r in 0..m {
                    for (s, &v) in db.iter_mut().zip(&g[r * n..(r + 1) * n]) {
                        *s += v;
                    }
                }
                self.accumulate(grads, bias, db);
            }
        }
    }
}
