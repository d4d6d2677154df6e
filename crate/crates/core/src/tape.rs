//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation in construction order. Nodes only
//! reference earlier nodes, so the recording order is already a topological
//! order and [`Tape::backward`] is a single reverse sweep.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{invert_perm, numel, permute_data, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        shared_rhs: bool,
    },
    /// `b` is broadcast by wrapping its flat index (scalar or trailing-suffix shapes).
    Binary { kind: BinaryKind, a: Var, b: Var },
    Scale { a: Var, factor: f64 },
    AddScalar { a: Var },
    Square { a: Var },
    Sum { a: Var },
    Mean { a: Var },
    Softmax {
        a: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Gelu { a: Var },
    Dropout { a: Var, mask: Vec<f64> },
    Reshape { a: Var },
    Permute { a: Var, perm: Vec<usize> },
    Concat {
        parts: Vec<(Var, usize)>,
        outer: usize,
        inner: usize,
    },
    Narrow {
        a: Var,
        outer: usize,
        inner: usize,
        axis_len: usize,
        start: usize,
        len: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Whether stochastic layers are active.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn rand::RngCore),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// require gradients or is not reachable from the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

/// Operation recorder. Confined to one thread; build a fresh tape per forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|&p| self.requires(p));
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn raw(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).expect("op produced consistent shape")
    }

    /// Matrix product over the last two axes.
    ///
    /// `a` is `[.., m, k]`; `b` is either a shared `[k, n]` matrix or
    /// `[.., k, n]` with the same leading dimensions as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let shared_rhs = sb.len() == 2;
        if !shared_rhs && sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(Error::dim("matmul", &sa, &sb));
        }
        let batch = numel(&sa[..sa.len() - 2]);
        let mut out = vec![0.0; batch * m * n];
        {
            let av = self.value(a).data();
            let bv = self.value(b).data();
            if shared_rhs {
                gemm(av, bv, &mut out, batch * m, k, n);
            } else {
                for i in 0..batch {
                    gemm(
                        &av[i * m * k..(i + 1) * m * k],
                        &bv[i * k * n..(i + 1) * k * n],
                        &mut out[i * m * n..(i + 1) * m * n],
                        m,
                        k,
                        n,
                    );
                }
            }
        }
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        let op = Op::MatMul {
            a,
            b,
            batch,
            m,
            k,
            n,
            shared_rhs,
        };
        Ok(self.push(Self::raw(shape, out), op, &[a, b]))
    }

    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var, name: &'static str) -> Result<Var> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        let nb = numel(sb);
        let suffix = sb.len() <= sa.len() && sa[sa.len() - sb.len()..] == *sb;
        if !(nb == 1 || suffix) {
            return Err(Error::dim(name, sa, sb));
        }
        let shape = sa.to_vec();
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let data: Vec<f64> = av
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let y = bv[i % nb];
                match kind {
                    BinaryKind::Add => x + y,
                    BinaryKind::Sub => x - y,
                    BinaryKind::Mul => x * y,
                }
            })
            .collect();
        Ok(self.push(Self::raw(shape, data), Op::Binary { kind, a, b }, &[a, b]))
    }

    /// `a + b`; `b` may be a scalar or match a trailing suffix of `a`'s shape.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b, "mul")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale { a, factor }, &[a])
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        self.push(value, Op::AddScalar { a }, &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square { a }, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { a }, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.numel() as f64;
        self.push(Tensor::scalar(s), Op::Mean { a }, &[a])
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(Error::Parameter(format!(
                "softmax axis {axis} out of range for shape {shape:?}"
            )));
        }
        let outer = numel(&shape[..axis]);
        let len = shape[axis];
        let inner = numel(&shape[axis + 1..]);
        let x = self.value(a).data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| o * len * inner + l * inner + i;
                let max = (0..len).map(|l| x[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for l in 0..len {
                    let e = (x[at(l)] - max).exp();
                    y[at(l)] = e;
                    total += e;
                }
                for l in 0..len {
                    y[at(l)] /= total;
                }
            }
        }
        let op = Op::Softmax {
            a,
            outer,
            len,
            inner,
        };
        Ok(self.push(Self::raw(shape, y), op, &[a]))
    }

    /// Normalizes over the last axis, then applies `gamma * x + beta`.
    ///
    /// Rows whose variance plus `eps` is zero map to `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let width = *shape.last().ok_or_else(|| Error::dim("layer_norm", &shape, &[]))?;
        for p in [gamma, beta] {
            if self.shape(p) != [width] {
                return Err(Error::dim("layer_norm", &shape, self.shape(p)));
            }
        }
        if eps < 0.0 {
            return Err(Error::Parameter(format!("layer_norm eps {eps} is negative")));
        }
        let xv = self.value(x).data();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let rows = xv.len() / width;
        let mut normalized = vec![0.0; xv.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.len()];
        for r in 0..rows {
            let row = &xv[r * width..(r + 1) * width];
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
            let denom = (var + eps).sqrt();
            let inv = if denom > 0.0 { 1.0 / denom } else { 0.0 };
            inv_std[r] = inv;
            for j in 0..width {
                let h = (row[j] - mean) * inv;
                normalized[r * width + j] = h;
                out[r * width + j] = g[j] * h + b[j];
            }
        }
        let op = Op::LayerNorm {
            x,
            gamma,
            beta,
            normalized,
            inv_std,
        };
        Ok(self.push(Self::raw(shape, out), op, &[x, gamma, beta]))
    }

    /// Exact GELU, `x * Φ(x)`.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu);
        self.push(value, Op::Gelu { a }, &[a])
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`.
    pub fn dropout(&mut self, a: Var, p: f64, mode: &mut Mode<'_>) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Parameter(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        let rng = match mode {
            Mode::Train(rng) if p > 0.0 => rng,
            _ => return Ok(a),
        };
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(a).numel())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let v = self.value(a);
        let data = v.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Self::raw(v.shape().to_vec(), data);
        Ok(self.push(value, Op::Dropout { a, mask }, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape { a }, &[a]))
    }

    /// Output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let value = self.value(a).permute(perm)?;
        let op = Op::Permute {
            a,
            perm: perm.to_vec(),
        };
        Ok(self.push(value, op, &[a]))
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*parts.first().ok_or_else(|| Error::Parameter("concat of nothing".into()))?)
            .to_vec();
        if axis >= first.len() {
            return Err(Error::Parameter(format!(
                "concat axis {axis} out of range for shape {first:?}"
            )));
        }
        let mut total = 0;
        let mut recorded = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::dim("concat", &first, s));
            }
            recorded.push((p, s[axis]));
            total += s[axis];
        }
        let outer = numel(&first[..axis]);
        let inner = numel(&first[axis + 1..]);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &(p, len) in &recorded {
                let block = len * inner;
                out.extend_from_slice(&self.value(p).data()[o * block..(o + 1) * block]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let op = Op::Concat {
            parts: recorded,
            outer,
            inner,
        };
        Ok(self.push(Self::raw(shape, out), op, parts))
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::Parameter(format!(
                "narrow({axis}, {start}, {len}) invalid for shape {shape:?}"
            )));
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let axis_len = shape[axis];
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * axis_len * inner + start * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let op = Op::Narrow {
            a,
            outer,
            inner,
            axis_len,
            start,
            len,
        };
        Ok(self.push(Self::raw(out_shape, out), op, &[a]))
    }

    /// `x · w + b` over the last axis of `x`, with `w: [in, out]` and `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add(y, b),
            None => Ok(y),
        }
    }

    /// Mean squared error against a constant target (scalar or same shape).
    pub fn mse(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let t = self.constant(target);
        let diff = self.sub(pred, t)?;
        let sq = self.square(diff);
        Ok(self.mean(sq))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| Self::raw(self.nodes[i].value.shape().to_vec(), data))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.requires(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.value(v).numel()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul {
                a,
                b,
                batch,
                m,
                k,
                n,
                shared_rhs,
            } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                acc(a, &mut |da| {
                    if shared_rhs {
                        gemm_nt(g, bv, da, batch * m, n, k);
                    } else {
                        for i in 0..batch {
                            gemm_nt(
                                &g[i * m * n..(i + 1) * m * n],
                                &bv[i * k * n..(i + 1) * k * n],
                                &mut da[i * m * k..(i + 1) * m * k],
                                m,
                                n,
                                k,
                            );
                        }
                    }
                });
                acc(b, &mut |db| {
                    if shared_rhs {
                        gemm_tn(av, g, db, batch * m, k, n);
                    } else {
                        for i in 0..batch {
                            gemm_tn(
                                &av[i * m * k..(i + 1) * m * k],
                                &g[i * m * n..(i + 1) * m * n],
                                &mut db[i * k * n..(i + 1) * k * n],
                                m,
                                k,
                                n,
                            );
                        }
                    }
                });
            }
            &Op::Binary { kind, a, b } => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let nb = bv.len();
                acc(a, &mut |da| {
                    for (i, d) in da.iter_mut().enumerate() {
                        *d += match kind {
                            BinaryKind::Add | BinaryKind::Sub => g[i],
                            BinaryKind::Mul => g[i] * bv[i % nb],
                        };
                    }
                });
                acc(b, &mut |db| {
                    for (i, &gi) in g.iter().enumerate() {
                        db[i % nb] += match kind {
                            BinaryKind::Add => gi,
                            BinaryKind::Sub => -gi,
                            BinaryKind::Mul => gi * av[i],
                        };
                    }
                });
            }
            &Op::Scale { a, factor } => acc(a, &mut |da| {
                da.iter_mut().zip(g).for_each(|(d, gi)| *d += gi * factor)
            }),
            &Op::AddScalar { a } => acc(a, &mut |da| {
                da.iter_mut().zip(g).for_each(|(d, gi)| *d += gi)
            }),
            &Op::Square { a } => {
                let av = self.value(a).data();
                acc(a, &mut |da| {
                    for ((d, gi), x) in da.iter_mut().zip(g).zip(av) {
                        *d += 2.0 * x * gi;
                    }
                })
            }
            &Op::Sum { a } => acc(a, &mut |da| da.iter_mut().for_each(|d| *d += g[0])),
            &Op::Mean { a } => acc(a, &mut |da| {
                let s = g[0] / da.len() as f64;
                da.iter_mut().for_each(|d| *d += s)
            }),
            &Op::Softmax {
                a,
                outer,
                len,
                inner,
            } => {
                let y = node.value.data();
                acc(a, &mut |da| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |l: usize| o * len * inner + l * inner + i;
                            let dot: f64 = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                            for l in 0..len {
                                da[at(l)] += y[at(l)] * (g[at(l)] - dot);
                            }
                        }
                    }
                })
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                normalized,
                inv_std,
            } => {
                let gv = self.value(*gamma).data();
                let width = gv.len();
                acc(*x, &mut |dx| {
                    for (r, &inv) in inv_std.iter().enumerate() {
                        let span = r * width..(r + 1) * width;
                        let gr = &g[span.clone()];
                        let hr = &normalized[span.clone()];
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..width {
                            let dh = gr[j] * gv[j];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[j];
                        }
                        let w = width as f64;
                        for j in 0..width {
                            let dh = gr[j] * gv[j];
                            dx[span.start + j] += inv * (dh - sum_dh / w - hr[j] * sum_dh_h / w);
                        }
                    }
                });
                acc(*gamma, &mut |dg| {
                    for (i, gi) in g.iter().enumerate() {
                        dg[i % width] += gi * normalized[i];
                    }
                });
                acc(*beta, &mut |db| {
                    for (i, gi) in g.iter().enumerate() {
                        db[i % width] += gi;
                    }
                });
            }
            &Op::Gelu { a } => {
                let av = self.value(a).data();
                acc(a, &mut |da| {
                    for ((d, gi), &x) in da.iter_mut().zip(g).zip(av) {
                        *d += gi * gelu_grad(x);
                    }
                })
            }
            Op::Dropout { a, mask } => acc(*a, &mut |da| {
                for ((d, gi), m) in da.iter_mut().zip(g).zip(mask) {
                    *d += gi * m;
                }
            }),
            &Op::Reshape { a } => acc(a, &mut |da| {
                da.iter_mut().zip(g).for_each(|(d, gi)| *d += gi)
            }),
            Op::Permute { a, perm } => {
                let back = permute_data(g, node.value.shape(), &invert_perm(perm));
                acc(*a, &mut |da| {
                    da.iter_mut().zip(&back).for_each(|(d, gi)| *d += gi)
                })
            }
            Op::Concat {
                parts,
                outer,
                inner,
            } => {
                let total: usize = parts.iter().map(|(_, l)| l).sum();
                let mut offset = 0;
                for &(p, len) in parts {
                    acc(p, &mut |dp| {
                        for o in 0..*outer {
                            let src = o * total * inner + offset * inner;
                            let dst = o * len * inner;
                            for j in 0..len * inner {
                                dp[dst + j] += g[src + j];
                            }
                        }
                    });
                    offset += len;
                }
            }
            &Op::Narrow {
                a,
                outer,
                inner,
                axis_len,
                start,
                len,
            } => acc(a, &mut |da| {
                for o in 0..outer {
                    let dst = o * axis_len * inner + start * inner;
                    let src = o * len * inner;
                    for j in 0..len * inner {
                        da[dst + j] += g[src + j];
                    }
                }
            }),
        }
    }
}

/// Elementwise GELU on plain values.
pub fn gelu(x: f64) -> f64 {
    x * std_normal_cdf(x)
}

fn gelu_grad(x: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    std_normal_cdf(x) + x * pdf
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

// out[m×n] += a[m×k] · b[k×n]
fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

// out[m×k] += a[m×n] · b[k×n]ᵀ
fn gemm_nt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, n: usize, k: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

// out[k×n] += a[m×k]ᵀ · g[m×n]
fn gemm_tn(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}
