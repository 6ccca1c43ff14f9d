//! Eager computation graph with reverse-mode gradients.
//!
//! Every operation is evaluated as soon as it is recorded; the graph keeps
//! the values and the operation that produced them so [`Graph::backward`]
//! can walk the nodes in reverse order.

use super::array::{pooled_map, CxArray};
use super::ops;
use crate::{Error, Result, C64};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Param(usize),
    Dense(Var, Var),
    SplitTanh(Var),
    Magnitude(Var),
    Recombine(Var, Var),
    Transpose(Var),
    Conv1d(Var, Var),
    Depthwise(Var, Var),
    DepthwiseMulti(Var, Var),
    Sub(Var, Var),
    Mse(Var),
}

struct Node {
    value: CxArray,
    op: Op,
    needs_grad: bool,
}

/// Parameter gradients produced by [`Graph::backward`], indexed by the id
/// passed to [`Graph::param`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: Vec<Option<CxArray>>,
}

impl Gradients {
    pub fn get(&self, param_id: usize) -> Option<&CxArray> {
        self.by_param.get(param_id).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, param_id: usize) -> Option<CxArray> {
        self.by_param.get_mut(param_id).and_then(|g| g.take())
    }

    fn add(&mut self, id: usize, g: CxArray) {
        if self.by_param.len() <= id {
            self.by_param.resize(id + 1, None);
        }
        match &mut self.by_param[id] {
            Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
            slot => *slot = Some(g),
        }
    }
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: CxArray, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> Result<&Node> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::InvalidArgument(format!("variable {} not in this graph", v.0)))
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn value(&self, v: Var) -> &CxArray {
        &self.nodes[v.0].value
    }

    /// Constant data (inputs, targets, phase factors).
    pub fn input(&mut self, value: CxArray) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, id: usize, value: CxArray) -> Var {
        self.push(value, Op::Param(id), true)
    }

    pub fn dense(&mut self, x: Var, w: Var) -> Result<Var> {
        let v = ops::dense(&self.node(x)?.value, &self.node(w)?.value)?;
        let ng = self.grad_flag(&[x, w]);
        Ok(self.push(v, Op::Dense(x, w), ng))
    }

    pub fn split_tanh(&mut self, x: Var) -> Result<Var> {
        let v = ops::split_tanh(&self.node(x)?.value);
        let ng = self.grad_flag(&[x]);
        Ok(self.push(v, Op::SplitTanh(x), ng))
    }

    /// Returns `(magnitude, unit phase)`. The phase is recorded as a constant.
    pub fn mag_phase_split(&mut self, x: Var) -> Result<(Var, Var)> {
        let (m, p) = ops::mag_phase_split(&self.node(x)?.value);
        let ng = self.grad_flag(&[x]);
        let mag = self.push(m, Op::Magnitude(x), ng);
        let phase = self.push(p, Op::Leaf, false);
        Ok((mag, phase))
    }

    pub fn recombine(&mut self, y: Var, phase: Var) -> Result<Var> {
        let v = ops::recombine(&self.node(y)?.value, &self.node(phase)?.value)?;
        let ng = self.grad_flag(&[y]);
        Ok(self.push(v, Op::Recombine(y, phase), ng))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let v = ops::transpose(&self.node(x)?.value)?;
        let ng = self.grad_flag(&[x]);
        Ok(self.push(v, Op::Transpose(x), ng))
    }

    pub fn conv1d_causal(&mut self, x: Var, k: Var) -> Result<Var> {
        let v = ops::conv1d_causal(&self.node(x)?.value, &self.node(k)?.value)?;
        let ng = self.grad_flag(&[x, k]);
        Ok(self.push(v, Op::Conv1d(x, k), ng))
    }

    pub fn depthwise_conv(&mut self, x: Var, k: Var) -> Result<Var> {
        let v = ops::depthwise_conv(&self.node(x)?.value, &self.node(k)?.value)?;
        let ng = self.grad_flag(&[x, k]);
        Ok(self.push(v, Op::Depthwise(x, k), ng))
    }

    pub fn depthwise_conv_multi(&mut self, x: Var, k: Var) -> Result<Var> {
        let v = ops::depthwise_conv_multi(&self.node(x)?.value, &self.node(k)?.value)?;
        let ng = self.grad_flag(&[x, k]);
        Ok(self.push(v, Op::DepthwiseMulti(x, k), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = ops::sub(&self.node(a)?.value, &self.node(b)?.value)?;
        let ng = self.grad_flag(&[a, b]);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    /// Mean of `|r|²` as a one-element array.
    pub fn mse_loss(&mut self, r: Var) -> Result<Var> {
        let loss = super::loss::mse_loss(&self.node(r)?.value);
        let ng = self.grad_flag(&[r]);
        Ok(self.push(CxArray::scalar(C64::new(loss, 0.0)), Op::Mse(r), ng))
    }

    /// Gradients of the scalar `loss` with respect to every parameter node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.node(loss)?;
        if root.value.len() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got dims {:?}",
                root.value.dims()
            )));
        }
        let mut grads: Vec<Option<CxArray>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(CxArray::scalar(C64::new(1.0, 0.0)));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let send = |v: Var, gv: CxArray, grads: &mut Vec<Option<CxArray>>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.data_mut().iter_mut().zip(gv.data()).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(gv),
                }
            };
            let val = |v: Var| &self.nodes[v.0].value;
            let need = |v: Var| self.nodes[v.0].needs_grad;
            match node.op {
                Op::Leaf => {}
                Op::Param(id) => out.add(id, g),
                Op::Dense(x, w) => {
                    let (gx, gw) = ops::dense_backward(val(x), val(w), &g, need(x));
                    if let Some(gx) = gx {
                        send(x, gx, &mut grads);
                    }
                    send(w, gw, &mut grads);
                }
                Op::SplitTanh(x) => send(x, ops::split_tanh_backward(&node.value, &g), &mut grads),
                Op::Magnitude(x) => send(x, ops::magnitude_backward(val(x), &g), &mut grads),
                Op::Recombine(y, phase) => send(y, ops::recombine_backward(val(phase), &g), &mut grads),
                Op::Transpose(x) => send(x, ops::transpose(&g)?, &mut grads),
                Op::Conv1d(x, k) => {
                    let (gx, gk) = ops::conv1d_causal_backward(val(x), val(k), &g, need(x));
                    if let Some(gx) = gx {
                        send(x, gx, &mut grads);
                    }
                    send(k, gk, &mut grads);
                }
                Op::Depthwise(x, k) => {
                    let (gx, gk) = ops::depthwise_conv_backward(val(x), val(k), &g, need(x));
                    if let Some(gx) = gx {
                        send(x, gx, &mut grads);
                    }
                    send(k, gk, &mut grads);
                }
                Op::DepthwiseMulti(x, k) => {
                    let (gx, gk) = ops::depthwise_conv_multi_backward(val(x), val(k), &g, need(x));
                    if let Some(gx) = gx {
                        send(x, gx, &mut grads);
                    }
                    send(k, gk, &mut grads);
                }
                Op::Sub(a, b) => {
                    if need(b) {
                        let neg = pooled_map(g.data(), |v| -v);
                        let gb = CxArray::from_parts_unchecked(neg, g.dims().to_vec(), g.axes().to_vec());
                        send(b, gb, &mut grads);
                    }
                    send(a, g, &mut grads);
                }
                Op::Mse(r) => {
                    let seed = g.data()[0].re;
                    send(r, super::loss::mse_loss_backward(val(r), seed), &mut grads);
                }
            }
        }
        Ok(out)
    }
}
