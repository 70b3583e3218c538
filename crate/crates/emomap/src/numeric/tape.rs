use crate::error::{EmoError, Result};

use super::matrix::ParamRef;

const BCE_EPS: f64 = 1e-7;

/// Elementwise (or, for softmax, vector-normalized) nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Activation::Relu => v.iter().map(|x| x.max(0.0)).collect(),
            Activation::Tanh => v.iter().map(|x| x.tanh()).collect(),
            Activation::Sigmoid => v.iter().map(|x| sigmoid(*x)).collect(),
            Activation::Softmax => softmax(v),
            Activation::Identity => v.to_vec(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            "identity" => Ok(Activation::Identity),
            other => Err(EmoError::Config(format!("unknown activation '{other}'"))),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Max-subtracted softmax; output is a probability vector.
fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Loss criteria. `CrossEntropy` consumes raw logits (fused log-softmax);
/// `BinaryCrossEntropy` consumes probabilities, clamped to `[eps, 1-eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Mse,
    CrossEntropy,
    BinaryCrossEntropy,
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::BinaryCrossEntropy => "binary_cross_entropy",
        }
    }

    fn validate_gold(&self, pred_len: usize, gold: &[f64]) -> Result<()> {
        if gold.len() != pred_len {
            return Err(EmoError::Dimension(format!(
                "loss: prediction length {} vs gold length {}",
                pred_len,
                gold.len()
            )));
        }
        if let LossKind::CrossEntropy = self {
            // Gold must be a probability distribution (one-hot or a soft
            // teacher label); anything else is rejected.
            let sum: f64 = gold.iter().sum();
            if gold.iter().any(|g| *g < 0.0 || *g > 1.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(EmoError::Validation(
                    "cross_entropy gold must be a probability distribution".into(),
                ));
            }
        }
        Ok(())
    }

    fn forward(&self, pred: &[f64], gold: &[f64]) -> f64 {
        match self {
            LossKind::Mse => {
                let n = pred.len() as f64;
                pred.iter()
                    .zip(gold)
                    .map(|(p, g)| (p - g) * (p - g))
                    .sum::<f64>()
                    / n
            }
            LossKind::CrossEntropy => {
                let m = pred.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + pred.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
                -pred
                    .iter()
                    .zip(gold)
                    .map(|(p, g)| g * (p - lse))
                    .sum::<f64>()
            }
            LossKind::BinaryCrossEntropy => {
                let n = pred.len() as f64;
                pred.iter()
                    .zip(gold)
                    .map(|(p, g)| {
                        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                        -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }

    /// d(loss)/d(pred), scaled by the upstream gradient `gy`.
    fn backward(&self, pred: &[f64], gold: &[f64], gy: f64, gx: &mut [f64]) {
        match self {
            LossKind::Mse => {
                let n = pred.len() as f64;
                for ((gx, p), g) in gx.iter_mut().zip(pred).zip(gold) {
                    *gx += gy * 2.0 * (p - g) / n;
                }
            }
            LossKind::CrossEntropy => {
                let probs = softmax(pred);
                for ((gx, q), g) in gx.iter_mut().zip(&probs).zip(gold) {
                    *gx += gy * (q - g);
                }
            }
            LossKind::BinaryCrossEntropy => {
                let n = pred.len() as f64;
                for ((gx, p), g) in gx.iter_mut().zip(pred).zip(gold) {
                    let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                    *gx += gy * (pc - g) / (pc * (1.0 - pc)) / n;
                }
            }
        }
    }
}

/// Cosine similarity of two non-zero vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(EmoError::Dimension(format!(
            "cosine: lengths {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(EmoError::DegenerateVector(
            "cosine of a zero-norm vector".into(),
        ));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Node {
    Input,
    Affine {
        w: ParamRef,
        b: Option<ParamRef>,
        x: NodeId,
    },
    Activation {
        kind: Activation,
        x: NodeId,
    },
    /// Inverted dropout; mask entries are 0 or 1/(1-p).
    Dropout {
        x: NodeId,
        mask: Vec<f64>,
    },
    /// Loss against a constant gold vector.
    Loss {
        kind: LossKind,
        pred: NodeId,
        gold: Vec<f64>,
    },
    /// Mean squared difference between two differentiable vectors.
    SquaredDiffMean {
        a: NodeId,
        b: NodeId,
    },
    /// `1 - cos(u, v)` where `u`, `v` are rows of (possibly distinct) weight
    /// matrices. Gradients flow straight into the parameters.
    RowCosineLoss {
        wu: ParamRef,
        row_u: usize,
        wv: ParamRef,
        row_v: usize,
    },
    Concat {
        parts: Vec<NodeId>,
    },
    /// Scalar-weighted sum of scalar nodes.
    WeightedSum {
        terms: Vec<(f64, NodeId)>,
    },
}

/// Records a forward pass of primitive operations in topological order; the
/// backward pass visits them in exact reverse order and accumulates gradients
/// into the touched parameters.
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<Vec<f64>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.values[id.0][0]
    }

    fn push(&mut self, node: Node, value: Vec<f64>) -> NodeId {
        self.nodes.push(node);
        self.values.push(value);
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Node::Input, value)
    }

    /// `Wx (+ b)`; the head formula uses this with `b` absent.
    pub fn affine(&mut self, w: &ParamRef, b: Option<&ParamRef>, x: NodeId) -> Result<NodeId> {
        let mut out = {
            let wp = w.borrow();
            wp.value.matvec(self.value(x))?
        };
        if let Some(b) = b {
            let bp = b.borrow();
            if bp.value.rows() != out.len() || bp.value.cols() != 1 {
                return Err(EmoError::Dimension(format!(
                    "affine: bias shape {}x{} vs output length {}",
                    bp.value.rows(),
                    bp.value.cols(),
                    out.len()
                )));
            }
            for (o, bv) in out.iter_mut().zip(bp.value.data()) {
                *o += bv;
            }
        }
        Ok(self.push(
            Node::Affine {
                w: w.clone(),
                b: b.cloned(),
                x,
            },
            out,
        ))
    }

    pub fn activation(&mut self, kind: Activation, x: NodeId) -> NodeId {
        let out = kind.apply(self.value(x));
        self.push(Node::Activation { kind, x }, out)
    }

    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> Result<NodeId> {
        if mask.len() != self.value(x).len() {
            return Err(EmoError::Dimension("dropout mask length mismatch".into()));
        }
        let out = self
            .value(x)
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        Ok(self.push(Node::Dropout { x, mask }, out))
    }

    pub fn loss(&mut self, kind: LossKind, pred: NodeId, gold: Vec<f64>) -> Result<NodeId> {
        let pv = self.value(pred);
        kind.validate_gold(pv.len(), &gold)?;
        let l = kind.forward(pv, &gold);
        Ok(self.push(Node::Loss { kind, pred, gold }, vec![l]))
    }

    pub fn squared_diff_mean(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() {
            return Err(EmoError::Dimension(format!(
                "squared_diff_mean: lengths {} vs {}",
                va.len(),
                vb.len()
            )));
        }
        let n = va.len() as f64;
        let l = va
            .iter()
            .zip(vb)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        Ok(self.push(Node::SquaredDiffMean { a, b }, vec![l]))
    }

    pub fn row_cosine_loss(
        &mut self,
        wu: &ParamRef,
        row_u: usize,
        wv: &ParamRef,
        row_v: usize,
    ) -> Result<NodeId> {
        let c = {
            let u = wu.borrow();
            let v = wv.borrow();
            cosine(u.value.row(row_u), v.value.row(row_v))?
        };
        Ok(self.push(
            Node::RowCosineLoss {
                wu: wu.clone(),
                row_u,
                wv: wv.clone(),
                row_v,
            },
            vec![1.0 - c],
        ))
    }

    pub fn concat(&mut self, parts: Vec<NodeId>) -> NodeId {
        let out: Vec<f64> = parts
            .iter()
            .flat_map(|p| self.value(*p).iter().copied())
            .collect();
        self.push(Node::Concat { parts }, out)
    }

    pub fn weighted_sum(&mut self, terms: Vec<(f64, NodeId)>) -> Result<NodeId> {
        let mut acc = 0.0;
        for (w, id) in &terms {
            let v = self.value(*id);
            if v.len() != 1 {
                return Err(EmoError::Dimension(
                    "weighted_sum expects scalar nodes".into(),
                ));
            }
            acc += w * v[0];
        }
        Ok(self.push(Node::WeightedSum { terms }, vec![acc]))
    }

    /// Reverse pass from a scalar root; gradients accumulate additively into
    /// every trainable parameter reached.
    pub fn backward(&self, root: NodeId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(EmoError::Validation(
                "backward on an empty graph (no forward pass recorded)".into(),
            ));
        }
        if self.values[root.0].len() != 1 {
            return Err(EmoError::Validation(
                "backward root must be a scalar node".into(),
            ));
        }
        let mut grads: Vec<Vec<f64>> = self.values.iter().map(|v| vec![0.0; v.len()]).collect();
        grads[root.0][0] = 1.0;

        for idx in (0..=root.0).rev() {
            if grads[idx].iter().all(|g| *g == 0.0) {
                continue;
            }
            match &self.nodes[idx] {
                Node::Input => {}
                Node::Affine { w, b, x } => {
                    let gy = std::mem::take(&mut grads[idx]);
                    let xv = &self.values[x.0];
                    {
                        let mut wp = w.borrow_mut();
                        if wp.trainable {
                            for (i, gyi) in gy.iter().enumerate() {
                                if *gyi == 0.0 {
                                    continue;
                                }
                                let grow = wp.grad.row_mut(i);
                                for (g, xj) in grow.iter_mut().zip(xv) {
                                    *g += gyi * xj;
                                }
                            }
                        }
                        let gx = &mut grads[x.0];
                        for (i, gyi) in gy.iter().enumerate() {
                            if *gyi == 0.0 {
                                continue;
                            }
                            let wrow = wp.value.row(i);
                            for (g, wij) in gx.iter_mut().zip(wrow) {
                                *g += gyi * wij;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let mut bp = b.borrow_mut();
                        if bp.trainable {
                            for (g, gyi) in bp.grad.data_mut().iter_mut().zip(&gy) {
                                *g += gyi;
                            }
                        }
                    }
                }
                Node::Activation { kind, x } => {
                    let gy = std::mem::take(&mut grads[idx]);
                    let out = &self.values[idx];
                    let gx = &mut grads[x.0];
                    match kind {
                        Activation::Relu => {
                            for ((g, o), gyi) in gx.iter_mut().zip(out).zip(&gy) {
                                if *o > 0.0 {
                                    *g += gyi;
                                }
                            }
                        }
                        Activation::Tanh => {
                            for ((g, o), gyi) in gx.iter_mut().zip(out).zip(&gy) {
                                *g += gyi * (1.0 - o * o);
                            }
                        }
                        Activation::Sigmoid => {
                            for ((g, o), gyi) in gx.iter_mut().zip(out).zip(&gy) {
                                *g += gyi * o * (1.0 - o);
                            }
                        }
                        Activation::Softmax => {
                            let dot: f64 = gy.iter().zip(out).map(|(g, o)| g * o).sum();
                            for ((g, o), gyi) in gx.iter_mut().zip(out).zip(&gy) {
                                *g += o * (gyi - dot);
                            }
                        }
                        Activation::Identity => {
                            for (g, gyi) in gx.iter_mut().zip(&gy) {
                                *g += gyi;
                            }
                        }
                    }
                }
                Node::Dropout { x, mask } => {
                    let gy = std::mem::take(&mut grads[idx]);
                    let gx = &mut grads[x.0];
                    for ((g, m), gyi) in gx.iter_mut().zip(mask).zip(&gy) {
                        *g += gyi * m;
                    }
                }
                Node::Loss { kind, pred, gold } => {
                    let gy = grads[idx][0];
                    let pv = self.values[pred.0].clone();
                    kind.backward(&pv, gold, gy, &mut grads[pred.0]);
                }
                Node::SquaredDiffMean { a, b } => {
                    let gy = grads[idx][0];
                    let n = self.values[a.0].len() as f64;
                    let (va, vb) = (self.values[a.0].clone(), self.values[b.0].clone());
                    for ((g, x), y) in grads[a.0].iter_mut().zip(&va).zip(&vb) {
                        *g += gy * 2.0 * (x - y) / n;
                    }
                    for ((g, y), x) in grads[b.0].iter_mut().zip(&vb).zip(&va) {
                        *g += gy * 2.0 * (y - x) / n;
                    }
                }
                Node::RowCosineLoss {
                    wu,
                    row_u,
                    wv,
                    row_v,
                } => {
                    let gy = grads[idx][0];
                    // d(1-cos)/du = -(v/(|u||v|) - cos * u/|u|^2)
                    let (u, v): (Vec<f64>, Vec<f64>) = {
                        let a = wu.borrow();
                        let b = wv.borrow();
                        (a.value.row(*row_u).to_vec(), b.value.row(*row_v).to_vec())
                    };
                    let nu = norm(&u);
                    let nv = norm(&v);
                    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                    let c = dot / (nu * nv);
                    {
                        let mut a = wu.borrow_mut();
                        if a.trainable {
                            let grow = a.grad.row_mut(*row_u);
                            for ((g, vi), ui) in grow.iter_mut().zip(&v).zip(&u) {
                                *g += -gy * (vi / (nu * nv) - c * ui / (nu * nu));
                            }
                        }
                    }
                    {
                        let mut b = wv.borrow_mut();
                        if b.trainable {
                            let grow = b.grad.row_mut(*row_v);
                            for ((g, ui), vi) in grow.iter_mut().zip(&u).zip(&v) {
                                *g += -gy * (ui / (nu * nv) - c * vi / (nv * nv));
                            }
                        }
                    }
                }
                Node::Concat { parts } => {
                    let gy = std::mem::take(&mut grads[idx]);
                    let mut offset = 0;
                    for p in parts {
                        let len = self.values[p.0].len();
                        for (g, gyi) in grads[p.0].iter_mut().zip(&gy[offset..offset + len]) {
                            *g += gyi;
                        }
                        offset += len;
                    }
                }
                Node::WeightedSum { terms } => {
                    let gy = grads[idx][0];
                    for (w, id) in terms {
                        grads[id.0][0] += gy * w;
                    }
                }
            }
        }
        Ok(())
    }
}
