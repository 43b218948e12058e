use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::tensor::{Graph, Result, Tensor, TensorError, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

/// One affine layer; `weight` is `[in, out]` so a batch `[n, in]`
/// multiplies from the left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Width list and activation, e.g. `[2, 32, 32, 2]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Architecture {
    pub fn new(widths: &[usize], activation: Activation) -> Self {
        Self {
            widths: widths.to_vec(),
            activation,
        }
    }
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: &Architecture, rng: &mut Rng) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_in(-limit, limit))
                    .collect();
                Layer {
                    weight: Tensor::raw(vec![fan_in, fan_out], data),
                    bias: Tensor::zeros(&[fan_out]),
                }
            })
            .collect();
        Self {
            layers,
            activation: arch.activation,
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| Layer {
                weight: Tensor::zeros(&[w[0], w[1]]),
                bias: Tensor::zeros(&[w[1]]),
            })
            .collect();
        Self {
            layers,
            activation: arch.activation,
        }
    }

    /// Single linear layer with identity weight.
    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![Layer {
                weight: Tensor::identity(dim),
                bias: Tensor::zeros(&[dim]),
            }],
            activation: Activation::Tanh,
        }
    }

    pub fn architecture(&self) -> Architecture {
        let mut widths = vec![self.input_dim()];
        widths.extend(self.layers.iter().map(|l| l.bias.len()));
        Architecture {
            widths,
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }

    /// Parameters in layer order, weight before bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks that layer shapes chain and every entry is finite.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.layers.is_empty() {
            return Err("network has no layers".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            let ws = l.weight.shape();
            if ws.len() != 2 || l.bias.shape() != [ws[1]] {
                return Err(format!(
                    "layer {i}: weight {:?} and bias {:?} do not agree",
                    ws,
                    l.bias.shape()
                ));
            }
            if i > 0 && self.layers[i - 1].bias.len() != ws[0] {
                return Err(format!("layer {i}: input width {} does not chain", ws[0]));
            }
            if !l.weight.is_finite() || !l.bias.is_finite() {
                return Err(format!("layer {i}: non-finite entry"));
            }
        }
        Ok(())
    }

    /// Registers the parameters on `g` as trainable leaves.
    pub fn bind(&self, g: &mut Graph) -> BoundMlp {
        self.bind_with(g, true)
    }

    /// Registers the parameters as constants (frozen nets).
    pub fn bind_frozen(&self, g: &mut Graph) -> BoundMlp {
        self.bind_with(g, false)
    }

    fn bind_with(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let mut leaf = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        let layers = self
            .layers
            .iter()
            .map(|l| (leaf(&l.weight), leaf(&l.bias)))
            .collect();
        BoundMlp {
            layers,
            activation: self.activation,
        }
    }

    /// Plain forward pass outside any graph.
    pub fn forward_plain(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&l.weight)?;
            let n = l.bias.len();
            for (j, v) in z.data_mut().iter_mut().enumerate() {
                *v += l.bias.data()[j % n];
            }
            if i < last {
                z = match self.activation {
                    Activation::Tanh => z.map(f64::tanh),
                    Activation::Relu => z.map(|v| v.max(0.0)),
                };
            }
            h = z;
        }
        Ok(h)
    }
}

/// An [`MlpParams`] registered on a graph.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub layers: Vec<(Var, Var)>,
    pub activation: Activation,
}

impl BoundMlp {
    /// Affine + activation stack; the final layer is linear.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let in_dim = g.value(self.layers[0].0).shape()[0];
        let xs = g.value(x).shape();
        if xs.len() != 2 || xs[1] != in_dim {
            return Err(TensorError::ShapeMismatch {
                op: "forward_mlp",
                lhs: xs.to_vec(),
                rhs: vec![in_dim],
            });
        }
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let z = g.matmul(h, w)?;
            let z = g.add_row(z, b)?;
            h = if i < last {
                match self.activation {
                    Activation::Tanh => g.tanh(z),
                    Activation::Relu => g.relu(z),
                }
            } else {
                z
            };
        }
        Ok(h)
    }

    pub fn vars(&self) -> Vec<Var> {
        self.layers.iter().flat_map(|&(w, b)| [w, b]).collect()
    }

    /// Gradients in the same order as [`MlpParams::tensors`].
    pub fn grads(&self, g: &Graph) -> Vec<Tensor> {
        self.vars().into_iter().map(|v| g.grad(v).clone()).collect()
    }

    pub fn grad_norm(&self, g: &Graph) -> f64 {
        self.vars()
            .into_iter()
            .map(|v| g.grad(v).norm_sq())
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_outputs_zero() {
        let net = MlpParams::zeros(&Architecture::new(&[2, 8, 3], Activation::Tanh));
        let mut g = Graph::new();
        let b = net.bind(&mut g);
        let x = g.constant(Tensor::from_rows(&[vec![1.0, -4.0], vec![0.5, 9.0]]).unwrap());
        let y = b.forward(&mut g, x).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 3]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = MlpParams::identity(2);
        let x = Tensor::from_rows(&[vec![1.25, -3.0]]).unwrap();
        let mut g = Graph::new();
        let b = net.bind(&mut g);
        let xv = g.constant(x.clone());
        let y = b.forward(&mut g, xv).unwrap();
        assert_eq!(g.value(y), &x);
        assert_eq!(net.forward_plain(&x).unwrap(), x);
    }

    #[test]
    fn wrong_input_width_is_shape_error() {
        let net = MlpParams::zeros(&Architecture::new(&[2, 4, 1], Activation::Tanh));
        let mut g = Graph::new();
        let b = net.bind(&mut g);
        let x = g.constant(Tensor::zeros(&[5, 3]));
        assert!(matches!(
            b.forward(&mut g, x),
            Err(TensorError::ShapeMismatch {
                op: "forward_mlp",
                ..
            })
        ));
    }

    #[test]
    fn graph_and_plain_forward_agree() {
        let mut rng = Rng::seed(5);
        let net = MlpParams::init(
            &Architecture::new(&[2, 16, 16, 3], Activation::Relu),
            &mut rng,
        );
        let x = rng.normal_tensor(7, 2);
        let mut g = Graph::new();
        let b = net.bind_frozen(&mut g);
        let xv = g.constant(x.clone());
        let y = b.forward(&mut g, xv).unwrap();
        assert_eq!(g.value(y), &net.forward_plain(&x).unwrap());
        assert!(!g.requires_grad(y));
    }

    #[test]
    fn validate_catches_broken_chain() {
        let mut net = MlpParams::zeros(&Architecture::new(&[2, 4, 1], Activation::Tanh));
        assert!(net.validate().is_ok());
        net.layers[1].weight = Tensor::zeros(&[3, 1]);
        assert!(net.validate().unwrap_err().contains("layer 1"));
        assert_eq!(net.architecture().widths, vec![2, 4, 1]);
    }
}
