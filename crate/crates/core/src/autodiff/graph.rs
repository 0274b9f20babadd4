use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{invalid, Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Value(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Value, Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Concat { inputs: Vec<Value>, axis: usize },
    Gather { input: Value, rows: Vec<usize> },
    ReduceMax { input: Value, argmax: Vec<usize> },
    ReduceMean { input: Value, axis: usize },
    ReduceSum { input: Value, axis: usize },
    SumAll(Value),
    Relu(Value),
    Softmax { input: Value, axis: usize },
    Square(Value),
    Sqrt(Value),
    Reciprocal(Value),
    Abs(Value),
    Transpose(Value),
    Reshape(Value),
    Tile { input: Value, axis: usize, reps: usize },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    param: Option<ParamId>,
    requires_grad: bool,
}

/// Computation graph for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

/// `(outer, len, inner)` split of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Output shape of a suffix-broadcast binary op, plus which side repeats.
fn broadcast(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a == b || a.ends_with(b) {
        Ok(a.to_vec())
    } else if b.ends_with(a) {
        Ok(b.to_vec())
    } else {
        Err(Error::Shape {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        })
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Value {
        self.nodes.push(Node {
            value,
            op,
            param: None,
            requires_grad,
        });
        Value(self.nodes.len() - 1)
    }

    fn rg(&self, v: Value) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn tensor(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn data(&self, v: Value) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn shape(&self, v: Value) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, v: Value) -> f64 {
        self.nodes[v.0].value.item()
    }

    /// Gradient of the last `backward` root with respect to `v`, if any
    /// flowed to it.
    pub fn grad(&self, v: Value) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// A constant input; receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf that receives a gradient but is not a stored parameter.
    pub fn input(&mut self, t: Tensor) -> Value {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Value {
        let v = self.push(store.get(id).value.clone(), Op::Leaf, true);
        self.nodes[v.0].param = Some(id);
        v
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let out = matmul_raw(self.data(a), self.data(b), m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::MatMul(a, b), rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Value,
        b: Value,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<(Tensor, bool)> {
        let shape = broadcast(name, self.shape(a), self.shape(b))?;
        let (da, db) = (self.data(a), self.data(b));
        let n: usize = shape.iter().product();
        let out = (0..n)
            .map(|i| f(da[i % da.len()], db[i % db.len()]))
            .collect();
        Ok((Tensor::new(shape, out)?, self.rg(a) || self.rg(b)))
    }

    /// Elementwise sum; the shorter shape must be a suffix of the longer and
    /// is repeated over the leading axes.
    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        let (t, rg) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        let (t, rg) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        let (t, rg) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Value, s: f64) -> Result<Value> {
        let c = self.constant(Tensor::scalar(s));
        self.mul(a, c)
    }

    pub fn add_scalar(&mut self, a: Value, s: f64) -> Result<Value> {
        let c = self.constant(Tensor::scalar(s));
        self.add(a, c)
    }

    pub fn concat(&mut self, inputs: &[Value], axis: usize) -> Result<Value> {
        let first = inputs
            .first()
            .ok_or_else(|| invalid("concat of zero inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(invalid(format!("concat axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let ok = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !ok {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = split_axis(&shape, axis);
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in inputs {
                let len = self.shape(*v)[axis];
                let block = len * inner;
                out.extend_from_slice(&self.data(*v)[o * block..(o + 1) * block]);
            }
        }
        let rg = inputs.iter().any(|v| self.rg(*v));
        let t = Tensor::new(shape, out)?;
        Ok(self.push(
            t,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Select rows (entries along axis 0), with repetition allowed.
    pub fn gather(&mut self, input: Value, rows: &[usize]) -> Result<Value> {
        let shape = self.shape(input).to_vec();
        if shape.is_empty() {
            return Err(invalid("gather on a scalar"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= shape[0]) {
            return Err(invalid(format!("gather row {bad} out of range for {shape:?}")));
        }
        let width: usize = shape[1..].iter().product();
        let src = self.data(input);
        let mut out = Vec::with_capacity(rows.len() * width);
        for &r in rows {
            out.extend_from_slice(&src[r * width..(r + 1) * width]);
        }
        let mut oshape = shape;
        oshape[0] = rows.len();
        let rg = self.rg(input);
        let t = Tensor::new(oshape, out)?;
        Ok(self.push(
            t,
            Op::Gather {
                input,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    fn check_axis(&self, op: &'static str, v: Value, axis: usize) -> Result<Vec<usize>> {
        let shape = self.shape(v).to_vec();
        if axis >= shape.len() {
            return Err(invalid(format!("{op}: axis {axis} out of range for {shape:?}")));
        }
        Ok(shape)
    }

    /// Maximum along `axis`; ties resolve to the lowest position.
    pub fn reduce_max(&mut self, input: Value, axis: usize) -> Result<Value> {
        let shape = self.check_axis("reduce_max", input, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        if len == 0 {
            return Err(invalid("reduce_max over an empty axis"));
        }
        let src = self.data(input);
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let mut best = base;
                for a in 1..len {
                    let idx = base + a * inner;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.push(src[best]);
                argmax.push(best);
            }
        }
        let mut oshape = shape;
        oshape.remove(axis);
        let rg = self.rg(input);
        let t = Tensor::new(oshape, out)?;
        Ok(self.push(t, Op::ReduceMax { input, argmax }, rg))
    }

    fn reduce_sum_raw(&self, input: Value, axis: usize) -> Result<(Vec<usize>, Vec<f64>, usize)> {
        let shape = self.check_axis("reduce", input, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.data(input);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let row = &src[(o * len + a) * inner..(o * len + a + 1) * inner];
                for (acc, x) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += x;
                }
            }
        }
        let mut oshape = shape;
        oshape.remove(axis);
        Ok((oshape, out, len))
    }

    pub fn reduce_sum(&mut self, input: Value, axis: usize) -> Result<Value> {
        let (shape, out, _) = self.reduce_sum_raw(input, axis)?;
        let rg = self.rg(input);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::ReduceSum { input, axis }, rg))
    }

    pub fn reduce_mean(&mut self, input: Value, axis: usize) -> Result<Value> {
        let (shape, mut out, len) = self.reduce_sum_raw(input, axis)?;
        if len == 0 {
            return Err(invalid("reduce_mean over an empty axis"));
        }
        for x in &mut out {
            *x /= len as f64;
        }
        let rg = self.rg(input);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::ReduceMean { input, axis }, rg))
    }

    /// Sum of every entry, as a scalar.
    pub fn sum(&mut self, input: Value) -> Value {
        let s: f64 = self.data(input).iter().sum();
        let rg = self.rg(input);
        self.push(Tensor::scalar(s), Op::SumAll(input), rg)
    }

    /// Mean of every entry, as a scalar.
    pub fn mean(&mut self, input: Value) -> Result<Value> {
        let n = self.tensor(input).len();
        if n == 0 {
            return Err(invalid("mean of an empty array"));
        }
        let s = self.sum(input);
        self.scale(s, 1.0 / n as f64)
    }

    fn unary(&mut self, input: Value, op: Op, f: impl Fn(f64) -> f64) -> Value {
        let src = self.tensor(input);
        let t = Tensor::new(src.shape().to_vec(), src.data().iter().map(|&x| f(x)).collect())
            .expect("unary op preserves shape");
        let rg = self.rg(input);
        self.push(t, op, rg)
    }

    pub fn relu(&mut self, x: Value) -> Value {
        self.unary(x, Op::Relu(x), |v| v.max(0.0))
    }

    pub fn square(&mut self, x: Value) -> Value {
        self.unary(x, Op::Square(x), |v| v * v)
    }

    /// Square root; the backward rule treats `sqrt(0)` as having zero slope.
    pub fn sqrt(&mut self, x: Value) -> Value {
        self.unary(x, Op::Sqrt(x), f64::sqrt)
    }

    pub fn reciprocal(&mut self, x: Value) -> Value {
        self.unary(x, Op::Reciprocal(x), |v| 1.0 / v)
    }

    /// Absolute value; subgradient 0 at the kink.
    pub fn abs(&mut self, x: Value) -> Value {
        self.unary(x, Op::Abs(x), f64::abs)
    }

    /// Softmax along `axis`, max-shifted.
    pub fn softmax(&mut self, input: Value, axis: usize) -> Result<Value> {
        let shape = self.check_axis("softmax", input, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.data(input);
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |a: usize| (o * len + a) * inner + i;
                let max = (0..len).map(|a| src[at(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for a in 0..len {
                    let e = (src[at(a)] - max).exp();
                    out[at(a)] = e;
                    total += e;
                }
                for a in 0..len {
                    out[at(a)] /= total;
                }
            }
        }
        let rg = self.rg(input);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Softmax { input, axis }, rg))
    }

    pub fn transpose(&mut self, x: Value) -> Result<Value> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(Error::Shape {
                op: "transpose",
                lhs: shape,
                rhs: vec![],
            });
        }
        let (r, c) = (shape[0], shape[1]);
        let t = Tensor::new(vec![c, r], transpose_raw(self.data(x), r, c))?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Transpose(x), rg))
    }

    pub fn reshape(&mut self, x: Value, shape: &[usize]) -> Result<Value> {
        let src = self.tensor(x);
        if shape.iter().product::<usize>() != src.len() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: src.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let t = Tensor::new(shape.to_vec(), src.data().to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(t, Op::Reshape(x), rg))
    }

    /// Repeat the whole array `reps` times along `axis`.
    pub fn tile(&mut self, input: Value, axis: usize, reps: usize) -> Result<Value> {
        let shape = self.check_axis("tile", input, axis)?;
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.data(input);
        let block = len * inner;
        let mut out = Vec::with_capacity(src.len() * reps);
        for o in 0..outer {
            for _ in 0..reps {
                out.extend_from_slice(&src[o * block..(o + 1) * block]);
            }
        }
        let mut oshape = shape;
        oshape[axis] *= reps;
        let rg = self.rg(input);
        let t = Tensor::new(oshape, out)?;
        Ok(self.push(t, Op::Tile { input, axis, reps }, rg))
    }

    /// Populate gradients of the scalar `root` with respect to every node it
    /// depends on. Replaces gradients from any earlier call.
    pub fn backward(&mut self, root: Value) -> Result<()> {
        let rshape = self.shape(root);
        if !(rshape.is_empty() || rshape == [1]) {
            return Err(invalid(format!(
                "backward needs a scalar root, got shape {rshape:?}"
            )));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(vec![1.0]);
        for id in (0..=root.0).rev() {
            let Some(g) = self.grads[id].take() else {
                continue;
            };
            if self.nodes[id].requires_grad {
                self.backprop(id, &g);
            }
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn acc(&mut self, v: Value, contribution: impl FnOnce(usize) -> Vec<f64>) {
        if !self.rg(v) {
            return;
        }
        let n = self.nodes[v.0].value.len();
        match &mut self.grads[v.0] {
            Some(g) => {
                for (a, b) in g.iter_mut().zip(contribution(n)) {
                    *a += b;
                }
            }
            slot @ None => *slot = Some(contribution(n)),
        }
    }

    /// Sum a full-shape gradient down to an operand that was broadcast.
    fn unbroadcast(g: &[f64], n: usize) -> Vec<f64> {
        if g.len() == n {
            return g.to_vec();
        }
        let mut out = vec![0.0; n];
        for (i, x) in g.iter().enumerate() {
            out[i % n] += x;
        }
        out
    }

    fn backprop(&mut self, id: usize, g: &[f64]) {
        // Inputs always precede `id`, so the borrow split is safe via indices.
        let op = std::mem::replace(&mut self.nodes[id].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a).to_vec(), self.shape(*b).to_vec());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if self.rg(*a) {
                    let bt = transpose_raw(self.data(*b), k, n);
                    let da = matmul_raw(g, &bt, m, n, k);
                    self.acc(*a, |_| da);
                }
                if self.rg(*b) {
                    let at = transpose_raw(self.data(*a), m, k);
                    let db = matmul_raw(&at, g, k, m, n);
                    self.acc(*b, |_| db);
                }
            }
            Op::Add(a, b) => {
                self.acc(*a, |n| Self::unbroadcast(g, n));
                self.acc(*b, |n| Self::unbroadcast(g, n));
            }
            Op::Sub(a, b) => {
                self.acc(*a, |n| Self::unbroadcast(g, n));
                self.acc(*b, |n| {
                    let mut d = Self::unbroadcast(g, n);
                    d.iter_mut().for_each(|x| *x = -*x);
                    d
                });
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                if self.rg(a) {
                    let db = self.data(b);
                    let full: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x * db[i % db.len()])
                        .collect();
                    self.acc(a, |n| Self::unbroadcast(&full, n));
                }
                if self.rg(b) {
                    let da = self.data(a);
                    let full: Vec<f64> = g
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x * da[i % da.len()])
                        .collect();
                    self.acc(b, |n| Self::unbroadcast(&full, n));
                }
            }
            Op::Concat { inputs, axis } => {
                let shape = self.nodes[id].value.shape().to_vec();
                let (outer, total, inner) = split_axis(&shape, *axis);
                let mut offset = 0;
                for v in inputs {
                    let len = self.shape(*v)[*axis];
                    if self.rg(*v) {
                        let mut d = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let start = (o * total + offset) * inner;
                            d.extend_from_slice(&g[start..start + len * inner]);
                        }
                        self.acc(*v, |_| d);
                    }
                    offset += len;
                }
            }
            Op::Gather { input, rows } => {
                let width: usize = self.shape(*input)[1..].iter().product();
                self.acc(*input, |n| {
                    let mut d = vec![0.0; n];
                    for (k, &r) in rows.iter().enumerate() {
                        for (dst, src) in d[r * width..(r + 1) * width]
                            .iter_mut()
                            .zip(&g[k * width..(k + 1) * width])
                        {
                            *dst += src;
                        }
                    }
                    d
                });
            }
            Op::ReduceMax { input, argmax, .. } => {
                self.acc(*input, |n| {
                    let mut d = vec![0.0; n];
                    for (x, &src) in g.iter().zip(argmax) {
                        d[src] += x;
                    }
                    d
                });
            }
            Op::ReduceSum { input, axis } | Op::ReduceMean { input, axis } => {
                let shape = self.shape(*input).to_vec();
                let (outer, len, inner) = split_axis(&shape, *axis);
                let factor = if matches!(op, Op::ReduceMean { .. }) {
                    1.0 / len as f64
                } else {
                    1.0
                };
                self.acc(*input, |n| {
                    let mut d = vec![0.0; n];
                    for o in 0..outer {
                        for a in 0..len {
                            for i in 0..inner {
                                d[(o * len + a) * inner + i] = g[o * inner + i] * factor;
                            }
                        }
                    }
                    d
                });
            }
            Op::SumAll(input) => self.acc(*input, |n| vec![g[0]; n]),
            Op::Relu(x) => {
                let d: Vec<f64> = self
                    .data(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| if v > 0.0 { gi } else { 0.0 })
                    .collect();
                self.acc(*x, |_| d);
            }
            Op::Square(x) => {
                let d: Vec<f64> = self
                    .data(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| 2.0 * v * gi)
                    .collect();
                self.acc(*x, |_| d);
            }
            Op::Sqrt(x) => {
                let d: Vec<f64> = self.nodes[id]
                    .value
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&y, &gi)| if y > 0.0 { gi / (2.0 * y) } else { 0.0 })
                    .collect();
                self.acc(*x, |_| d);
            }
            Op::Reciprocal(x) => {
                let d: Vec<f64> = self.nodes[id]
                    .value
                    .data()
                    .iter()
                    .zip(g)
                    .map(|(&y, &gi)| -y * y * gi)
                    .collect();
                self.acc(*x, |_| d);
            }
            Op::Abs(x) => {
                let d: Vec<f64> = self
                    .data(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gi)| {
                        if v > 0.0 {
                            gi
                        } else if v < 0.0 {
                            -gi
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.acc(*x, |_| d);
            }
            Op::Softmax { input, axis } => {
                let shape = self.shape(*input).to_vec();
                let (outer, len, inner) = split_axis(&shape, *axis);
                let y = self.nodes[id].value.data();
                let mut d = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |a: usize| (o * len + a) * inner + i;
                        let dot: f64 = (0..len).map(|a| y[at(a)] * g[at(a)]).sum();
                        for a in 0..len {
                            d[at(a)] = y[at(a)] * (g[at(a)] - dot);
                        }
                    }
                }
                self.acc(*input, |_| d);
            }
            Op::Transpose(x) => {
                let s = self.shape(*x).to_vec();
                let d = transpose_raw(g, s[1], s[0]);
                self.acc(*x, |_| d);
            }
            Op::Reshape(x) => self.acc(*x, |_| g.to_vec()),
            Op::Tile { input, axis, reps } => {
                let shape = self.shape(*input).to_vec();
                let (outer, len, inner) = split_axis(&shape, *axis);
                let block = len * inner;
                self.acc(*input, |n| {
                    let mut d = vec![0.0; n];
                    for o in 0..outer {
                        for r in 0..*reps {
                            let src = &g[(o * reps + r) * block..(o * reps + r + 1) * block];
                            for (dst, s) in d[o * block..(o + 1) * block].iter_mut().zip(src) {
                                *dst += s;
                            }
                        }
                    }
                    d
                });
            }
        }
        self.nodes[id].op = op;
    }

    /// Gradients of every parameter leaf, summed per parameter.
    pub fn param_grads(&self, store: &ParamStore) -> Gradients {
        let mut out = Gradients::zeros(store);
        self.accumulate_param_grads(&mut out);
        out
    }

    pub fn accumulate_param_grads(&self, into: &mut Gradients) {
        for (node, g) in self.nodes.iter().zip(&self.grads) {
            if let (Some(id), Some(g)) = (node.param, g) {
                into.add(id, g);
            }
        }
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let x = a[i * k + p];
            for (o, y) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += x * y;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}
