//! Shallow parameter networks `w = v·tanh(M·x + b) + c`.
//!
//! Parameters live in one flat slice, laid out as `M` (row-major, `W × D`),
//! then `b`, then `v`, then `c`, so a whole model is a single vector that the
//! optimizer can update in place.

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Shape of one parameter network; the weights themselves are held by the
/// owner as a flat slice of length [`NetShape::num_params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub input_dim: usize,
    pub width: usize,
}

impl NetShape {
    pub fn new(input_dim: usize, width: usize) -> Self {
        Self { input_dim, width }
    }

    /// `D·W + 2W + 1`.
    pub fn num_params(&self) -> usize {
        self.input_dim * self.width + 2 * self.width + 1
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b = self.input_dim * self.width;
        let v = b + self.width;
        (b, v, v + self.width)
    }

    /// Scalar output and hidden activations `a = tanh(M·x + b)`.
    pub fn forward(&self, params: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
        debug_assert_eq!(params.len(), self.num_params());
        debug_assert_eq!(x.len(), self.input_dim);
        let (ob, ov, oc) = self.offsets();
        let mut w = params[oc];
        for j in 0..self.width {
            let row = &params[j * self.input_dim..(j + 1) * self.input_dim];
            let z: f64 = params[ob + j] + row.iter().zip(x).map(|(m, x)| m * x).sum::<f64>();
            hidden[j] = z.tanh();
            w += params[ov + j] * hidden[j];
        }
        w
    }

    /// `grad += g·∂w/∂θ` given the activations of a previous forward pass.
    pub fn accumulate_grad(&self, params: &[f64], x: &[f64], hidden: &[f64], g: f64, grad: &mut [f64]) {
        let (ob, ov, oc) = self.offsets();
        grad[oc] += g;
        for j in 0..self.width {
            grad[ov + j] += g * hidden[j];
            let dz = g * params[ov + j] * (1.0 - hidden[j] * hidden[j]);
            grad[ob + j] += dz;
            let row = &mut grad[j * self.input_dim..(j + 1) * self.input_dim];
            for (r, xi) in row.iter_mut().zip(x) {
                *r += dz * xi;
            }
        }
    }

    /// Weights `M`, `v` i.i.d. normal with standard deviation `scale`;
    /// biases zero.
    pub fn init<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R, out: &mut [f64]) {
        let (ob, ov, oc) = self.offsets();
        out.fill(0.0);
        if scale == 0.0 {
            return;
        }
        let normal = Normal::new(0.0, scale).expect("finite non-negative scale");
        for p in out[..ob].iter_mut() {
            *p = normal.sample(rng);
        }
        for p in out[ov..oc].iter_mut() {
            *p = normal.sample(rng);
        }
    }
}
