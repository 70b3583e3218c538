use rand::Rng;

use crate::error::Result;

use super::matrix::{param, Matrix, ParamRef};
use super::tape::{Activation, NodeId, Tape};

/// One affine layer with its activation.
pub struct Dense {
    pub w: ParamRef,
    pub b: Option<ParamRef>,
    pub activation: Activation,
}

/// A small fully connected network. Label encoders and content encoders are
/// both instances of this with different widths.
pub struct FeedForward {
    layers: Vec<Dense>,
}

impl FeedForward {
    /// `widths` lists layer sizes including input and output, e.g.
    /// `[3, 128, 128, 100]`. Hidden layers use `hidden_activation`; the last
    /// layer uses `output_activation`. Weights get Glorot-uniform init,
    /// biases start at zero.
    pub fn new<R: Rng>(
        widths: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let mut layers = Vec::new();
        for k in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[k], widths[k + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            let w = param(Matrix::from_vec(fan_out, fan_in, data).expect("init shape"));
            let b = bias.then(|| param(Matrix::zeros(fan_out, 1)));
            let activation = if k + 1 == widths.len() - 1 {
                output_activation
            } else {
                hidden_activation
            };
            layers.push(Dense { w, b, activation });
        }
        FeedForward { layers }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        FeedForward { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.borrow().value.cols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().w.borrow().value.rows()
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        self.forward_with_dropout(tape, x, None)
    }

    /// Forward pass with inverted dropout applied after every hidden
    /// activation. `dropout` supplies `(rate, rng)`; pass `None` at inference.
    pub fn forward_with_dropout(
        &self,
        tape: &mut Tape,
        x: NodeId,
        mut dropout: Option<(f64, &mut dyn rand::RngCore)>,
    ) -> Result<NodeId> {
        let mut cur = x;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            cur = tape.affine(&layer.w, layer.b.as_ref(), cur)?;
            if layer.activation != Activation::Identity {
                cur = tape.activation(layer.activation, cur);
            }
            if k < last {
                if let Some((rate, rng)) = dropout.as_mut() {
                    if *rate > 0.0 {
                        let keep = 1.0 - *rate;
                        let mask: Vec<f64> = (0..tape.value(cur).len())
                            .map(|_| {
                                if rng.gen_range(0.0..1.0) < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        cur = tape.dropout(cur, mask)?;
                    }
                }
            }
        }
        Ok(cur)
    }

    /// Pure forward pass on a scratch tape.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let input = tape.input(x.to_vec());
        let out = self.forward(&mut tape, input)?;
        Ok(tape.value(out).to_vec())
    }

    pub fn params(&self) -> Vec<ParamRef> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.w.clone());
            if let Some(b) = &layer.b {
                out.push(b.clone());
            }
        }
        out
    }

    pub fn set_trainable(&self, trainable: bool) {
        for p in self.params() {
            p.borrow_mut().trainable = trainable;
        }
    }
}
