//! Reverse-mode autodiff over the layer set used by the models.

use crate::error::{Error, Result};

use super::kernels::{self, Activation, ConvShape, NormCache};
use super::{ParamStore, Real, Tensor};

/// Logarithm inputs are clamped this far from 0 and 1.
pub const LOG_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param { store: u64, index: usize },
    Conv2d { x: Var, w: Var, b: Var, shape: ConvShape },
    ConvTranspose2d { x: Var, w: Var, b: Var, shape: ConvShape },
    InstanceNorm { x: Var, gamma: Var, beta: Var, cache: NormCache<T> },
    Act { x: Var, kind: Activation },
    Concat { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, c: T },
    Sum { x: Var },
    Mean { x: Var },
    AbsDiffMean { a: Var, b: Var },
    LogMean { x: Var, complement: bool },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Parameters of one store placed on a graph.
pub struct Bound<'s, T> {
    store: &'s ParamStore<T>,
    vars: Vec<Var>,
}

impl<T: Real> Bound<'_, T> {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.store
            .index_of(name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named `{name}`")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Tape of operations. Node values are kept until the graph is dropped;
/// gradients of the most recent [`Graph::backward`] call stay inspectable.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of `v` from the last backward pass, if `v` was reached.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool, what: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("output of {what}")));
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input; gradients are not propagated past it.
    pub fn constant(&mut self, t: Tensor<T>) -> Result<Var> {
        self.push(t, Op::Leaf, false, "constant")
    }

    /// Differentiable leaf not tied to a parameter store (gradient read via [`Graph::grad`]).
    pub fn input(&mut self, t: Tensor<T>) -> Result<Var> {
        self.push(t, Op::Param { store: 0, index: 0 }, true, "input")
    }

    /// Places every parameter of `store` on the tape as a differentiable leaf.
    pub fn bind<'s>(&mut self, store: &'s ParamStore<T>) -> Result<Bound<'s, T>> {
        let mut vars = Vec::with_capacity(store.len());
        for i in 0..store.len() {
            let mut t = store.tensor(i).clone();
            t.clear_grad();
            vars.push(self.push(t, Op::Param { store: store.id(), index: i }, true, store.name(i))?);
        }
        Ok(Bound { store, vars })
    }

    /// Places parameters as constants: gradients may flow through the layers
    /// they feed, but are never computed for the parameters themselves.
    pub fn bind_frozen<'s>(&mut self, store: &'s ParamStore<T>) -> Result<Bound<'s, T>> {
        let mut vars = Vec::with_capacity(store.len());
        for i in 0..store.len() {
            let mut t = store.tensor(i).clone();
            t.clear_grad();
            vars.push(self.constant(t)?);
        }
        Ok(Bound { store, vars })
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let shape = kernels::conv2d_shape(
            self.value(x).shape(),
            self.value(w).shape(),
            self.value(b).shape(),
            stride,
            pad,
        )?;
        let out = kernels::conv2d_forward(&shape, self.value(x).data(), self.value(w).data(), self.value(b).data());
        let value = Tensor::new(&[shape.n, shape.o, shape.geom.oh, shape.geom.ow], out)?;
        let rg = self.any_grad(&[x, w, b]);
        self.push(value, Op::Conv2d { x, w, b, shape }, rg, "conv2d")
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let shape = kernels::conv_transpose2d_shape(
            self.value(x).shape(),
            self.value(w).shape(),
            self.value(b).shape(),
            stride,
            pad,
        )?;
        let out = kernels::conv_transpose2d_forward(
            &shape,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let value = Tensor::new(&[shape.n, shape.o, shape.geom.h, shape.geom.w], out)?;
        let rg = self.any_grad(&[x, w, b]);
        self.push(value, Op::ConvTranspose2d { x, w, b, shape }, rg, "conv_transpose2d")
    }

    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("instance_norm eps {eps} must be positive")));
        }
        let dims = self.value(x).dims4()?;
        let c = dims.1;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.value(v).shape() != [c] {
                return Err(Error::Shape(format!(
                    "{name} shape {:?}, expected [{c}]",
                    self.value(v).shape()
                )));
            }
        }
        let (out, cache) = kernels::instance_norm_forward(
            dims,
            self.value(x).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            T::of(eps),
        );
        let value = Tensor::new(self.value(x).shape(), out)?;
        let rg = self.any_grad(&[x, gamma, beta]);
        self.push(value, Op::InstanceNorm { x, gamma, beta, cache }, rg, "instance_norm")
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Result<Var> {
        kind.validate()?;
        let value = self.value(x).map(|v| kind.apply(v));
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Act { x, kind }, rg, "activation")
    }

    /// Concatenation along the channel axis of two NCHW tensors.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca, h, w) = self.value(a).dims4()?;
        let (nb, cb, hb, wb) = self.value(b).dims4()?;
        if (n, h, w) != (nb, hb, wb) {
            return Err(Error::Shape(format!(
                "cannot concatenate {:?} and {:?} along channels",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let plane = h * w;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(n * (ca + cb) * plane);
        for i in 0..n {
            out.extend_from_slice(&da[i * ca * plane..(i + 1) * ca * plane]);
            out.extend_from_slice(&db[i * cb * plane..(i + 1) * cb * plane]);
        }
        let value = Tensor::new(&[n, ca + cb, h, w], out)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Concat { a, b }, rg, "concat")
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.value(a).shape(), data)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Add { a, b }, rg, "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(self.value(a).shape(), data)?;
        let rg = self.any_grad(&[a, b]);
        self.push(value, Op::Mul { a, b }, rg, "mul")
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let c = T::of(c);
        let value = self.value(x).map(|v| v * c);
        let rg = self.any_grad(&[x]);
        self.push(value, Op::Scale { x, c }, rg, "scale")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().copied().sum();
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg, "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.data().iter().copied().sum::<T>() / T::of(t.len() as f64);
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::Mean { x }, rg, "mean")
    }

    /// `mean(|a - b|)`.
    pub fn l1_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "l1")?;
        let (ta, tb) = (self.value(a), self.value(b));
        let s = ta.data().iter().zip(tb.data()).map(|(&x, &y)| (x - y).abs()).sum::<T>() / T::of(ta.len() as f64);
        let rg = self.any_grad(&[a, b]);
        self.push(Tensor::scalar(s), Op::AbsDiffMean { a, b }, rg, "l1_mean")
    }

    /// `mean(log(clamp(p)))` where `p = x` or `p = 1 - x` when `complement`.
    /// Inputs must lie in `[0, 1]`; `p` is clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]`.
    pub fn log_mean(&mut self, x: Var, complement: bool) -> Result<Var> {
        let t = self.value(x);
        if let Some(bad) = t.data().iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::InvalidArgument(format!("probability {bad} outside [0, 1]")));
        }
        let s = t.data().iter().map(|&v| clamp_prob(v, complement).ln()).sum::<T>() / T::of(t.len() as f64);
        let rg = self.any_grad(&[x]);
        self.push(Tensor::scalar(s), Op::LogMean { x, complement }, rg, "log_mean")
    }

    /// Computes gradients of the scalar `loss` with respect to every node
    /// that requires them, then overwrites the gradient buffers of every
    /// parameter in `stores`. Parameters of those stores that are not bound
    /// on this graph have their gradient cleared; bound but unreachable
    /// parameters receive zeros.
    pub fn backward(&mut self, loss: Var, stores: &mut [&mut ParamStore<T>]) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for store in stores.iter_mut() {
            store.clear_grads();
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { store, index } = node.op {
                if let Some(s) = stores.iter_mut().find(|s| s.id() == store) {
                    let g = grads[i].clone().unwrap_or_else(|| vec![T::zero(); node.value.len()]);
                    let t = s.tensor_mut(index);
                    match t.grad_mut() {
                        // the same store bound twice on one graph: sum the contributions
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                        None => t.set_grad(g)?,
                    }
                }
            }
        }
        for store in stores.iter() {
            for (name, t) in store.iter() {
                if t.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                    return Err(Error::NonFinite(format!("gradient of `{name}`")));
                }
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param { .. } => {}
            Op::Conv2d { x, w, b, shape } => {
                let r = kernels::conv2d_backward(
                    shape,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    g,
                    (needs(*x), needs(*w), needs(*b)),
                );
                accumulate_opt(grads, *x, r.dx);
                accumulate_opt(grads, *w, r.dw);
                accumulate_opt(grads, *b, r.db);
            }
            Op::ConvTranspose2d { x, w, b, shape } => {
                let r = kernels::conv_transpose2d_backward(
                    shape,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    g,
                    (needs(*x), needs(*w), needs(*b)),
                );
                accumulate_opt(grads, *x, r.dx);
                accumulate_opt(grads, *w, r.dw);
                accumulate_opt(grads, *b, r.db);
            }
            Op::InstanceNorm { x, gamma, beta, cache } => {
                let dims = self.value(*x).dims4().expect("checked in forward");
                let (dx, dgamma, dbeta) =
                    kernels::instance_norm_backward(dims, cache, self.value(*gamma).data(), g);
                if needs(*x) {
                    accumulate(grads, *x, dx);
                }
                if needs(*gamma) {
                    accumulate(grads, *gamma, dgamma);
                }
                if needs(*beta) {
                    accumulate(grads, *beta, dbeta);
                }
            }
            Op::Act { x, kind } => {
                let xs = self.value(*x).data();
                let ys = node.value.data();
                let d = g
                    .iter()
                    .zip(xs.iter().zip(ys))
                    .map(|(&gv, (&xv, &yv))| gv * kind.derivative(xv, yv))
                    .collect();
                accumulate(grads, *x, d);
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4().expect("checked in forward");
                let cb = self.value(*b).dims4().expect("checked in forward").1;
                let plane = h * w;
                let mut ga = Vec::with_capacity(n * ca * plane);
                let mut gb = Vec::with_capacity(n * cb * plane);
                for s in 0..n {
                    let base = s * (ca + cb) * plane;
                    ga.extend_from_slice(&g[base..base + ca * plane]);
                    gb.extend_from_slice(&g[base + ca * plane..base + (ca + cb) * plane]);
                }
                if needs(*a) {
                    accumulate(grads, *a, ga);
                }
                if needs(*b) {
                    accumulate(grads, *b, gb);
                }
            }
            Op::Add { a, b } => {
                if needs(*a) {
                    accumulate(grads, *a, g.to_vec());
                }
                if needs(*b) {
                    accumulate(grads, *b, g.to_vec());
                }
            }
            Op::Mul { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if needs(*a) {
                    accumulate(grads, *a, g.iter().zip(vb).map(|(&x, &y)| x * y).collect());
                }
                if needs(*b) {
                    accumulate(grads, *b, g.iter().zip(va).map(|(&x, &y)| x * y).collect());
                }
            }
            Op::Scale { x, c } => accumulate(grads, *x, g.iter().map(|&v| v * *c).collect()),
            Op::Sum { x } => accumulate(grads, *x, vec![g[0]; self.value(*x).len()]),
            Op::Mean { x } => {
                let n = self.value(*x).len();
                accumulate(grads, *x, vec![g[0] / T::of(n as f64); n]);
            }
            Op::AbsDiffMean { a, b } => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let k = g[0] / T::of(va.len() as f64);
                let da: Vec<T> = va.iter().zip(vb).map(|(&x, &y)| k * sign(x - y)).collect();
                if needs(*b) {
                    accumulate(grads, *b, da.iter().map(|&v| -v).collect());
                }
                if needs(*a) {
                    accumulate(grads, *a, da);
                }
            }
            Op::LogMean { x, complement } => {
                let vx = self.value(*x).data();
                let k = g[0] / T::of(vx.len() as f64);
                let lo = T::of(LOG_CLAMP);
                let hi = T::one() - lo;
                let d = vx
                    .iter()
                    .map(|&v| {
                        let p = if *complement { T::one() - v } else { v };
                        if p < lo || p > hi {
                            T::zero()
                        } else if *complement {
                            -k / p
                        } else {
                            k / p
                        }
                    })
                    .collect();
                accumulate(grads, *x, d);
            }
        }
    }
}

fn clamp_prob<T: Real>(v: T, complement: bool) -> T {
    let p = if complement { T::one() - v } else { v };
    let lo = T::of(LOG_CLAMP);
    p.max(lo).min(T::one() - lo)
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a = *a + b),
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_opt<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, g: Option<Vec<T>>) {
    if let Some(g) = g {
        accumulate(grads, v, g);
    }
}
