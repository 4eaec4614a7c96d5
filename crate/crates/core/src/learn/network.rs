//! Fully connected value network with rectifier hidden layers and a linear
//! head, trained by backpropagation in 64-bit floats.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Parameter gradients, shaped like the layers.
pub type Grads = Vec<Dense>;

/// Activations kept from a forward pass for backpropagation.
pub struct Cache {
    /// Input of each layer (post-rectifier for hidden layers).
    inputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// He-initialised network with the given layer widths, zero biases.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Self {
        let layers = dims
            .windows(2)
            .map(|d| {
                let normal = Normal::new(0.0, (2.0 / d[0] as f64).sqrt()).expect("finite std");
                Dense {
                    w: Array2::from_shape_fn((d[1], d[0]), |_| normal.sample(rng)),
                    b: Array1::zeros(d[1]),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Mlp {
            layers: dims
                .windows(2)
                .map(|d| Dense {
                    w: Array2::zeros((d[1], d[0])),
                    b: Array1::zeros(d[1]),
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_width()];
        d.extend(self.layers.iter().map(|l| l.b.len()));
        d
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.w.ncols())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass over a batch of rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Cache)> {
        if x.ncols() != self.input_width() {
            return Err(Error::InputWidth {
                expected: self.input_width(),
                got: x.ncols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w.t());
            z += &layer.b;
            if k < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(h);
            h = z;
        }
        Ok((h, Cache { inputs }))
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(self.forward_batch(x)?.row(0).to_vec())
    }

    /// Gradients of a scalar loss given `d_out = ∂loss/∂output` for the batch
    /// that produced `cache`.
    pub fn backward(&self, cache: &Cache, d_out: Array2<f64>) -> Grads {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for k in (0..self.layers.len()).rev() {
            let input = &cache.inputs[k];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if k > 0 {
                let mut d_in = delta.dot(&self.layers[k].w);
                // Rectifier derivative, read from the layer's (post-ReLU) input.
                ndarray::Zip::from(&mut d_in).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = d_in;
            }
        }
        grads.reverse();
        grads
    }

    pub fn copy_from(&mut self, other: &Mlp) {
        self.layers.clone_from(&other.layers);
    }
}

pub fn grad_norm(g: &Grads) -> f64 {
    g.iter()
        .map(|d| d.w.iter().map(|x| x * x).sum::<f64>() + d.b.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Stochastic gradient descent with classical momentum.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Dense>,
}

impl SgdMomentum {
    pub fn new(net: &Mlp, lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: Mlp::zeros(&net.dims()).layers,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        for ((layer, vel), g) in net.layers.iter_mut().zip(&mut self.velocity).zip(grads) {
            vel.w.zip_mut_with(&g.w, |v, &gi| *v = self.momentum * *v + gi);
            vel.b.zip_mut_with(&g.b, |v, &gi| *v = self.momentum * *v + gi);
            layer.w.scaled_add(-self.lr, &vel.w);
            layer.b.scaled_add(-self.lr, &vel.b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[97, 512, 512, 512, 2]);
        assert_eq!(net.forward(&vec![0.3; 97]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.param_count(), 97 * 512 + 512 + 2 * (512 * 512 + 512) + 512 * 2 + 2);
    }

    #[test]
    fn toy_net_by_hand() {
        // 2 inputs → 2 hidden (ReLU) → 2 outputs.
        let net = Mlp {
            layers: vec![
                Dense { w: array![[1.0, -2.0], [0.5, 0.25]], b: array![0.1, -0.2] },
                Dense { w: array![[1.0, 2.0], [-1.0, 3.0]], b: array![0.0, 0.5] },
            ],
        };
        let x = [2.0, 1.0];
        // h = relu([2 − 2 + 0.1, 1 + 0.25 − 0.2]) = [0.1, 1.05]
        let h = [0.1f64, 1.05f64];
        let expected = [h[0] + 2.0 * h[1], -h[0] + 3.0 * h[1] + 0.5];
        let y = net.forward(&x).unwrap();
        assert!((y[0] - expected[0]).abs() < 1e-9);
        assert!((y[1] - expected[1]).abs() < 1e-9);
        assert_eq!(net.forward(&x).unwrap(), y);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let net = Mlp::zeros(&[4, 3, 2]);
        assert!(matches!(net.forward(&[1.0; 5]), Err(Error::InputWidth { expected: 4, got: 5 })));
    }

    #[test]
    fn momentum_update() {
        let mut net = Mlp::zeros(&[1, 1]);
        let mut opt = SgdMomentum::new(&net, 0.5, 0.9);
        let g = vec![Dense { w: array![[1.0]], b: array![2.0] }];
        opt.step(&mut net, &g);
        assert_eq!(net.layers[0].w[[0, 0]], -0.5);
        opt.step(&mut net, &g);
        // velocity 1.9 → −0.5 − 0.95
        assert!((net.layers[0].w[[0, 0]] + 1.45).abs() < 1e-12);
        assert!((net.layers[0].b[0] + 2.9).abs() < 1e-12);
    }
}
