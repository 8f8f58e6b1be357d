//! One-hidden-layer perceptron: tansig hidden units, linear outputs.
//!
//! Parameters are packed into a flat [`ParamVector`] in the order
//! `W1` (row-major, `n_hidden × n_in`), `b1`, `W2` (row-major,
//! `n_out × n_hidden`), `b2`. Row `k` of a [`MlpNetwork::jacobian`] holds the
//! derivatives of one output with respect to every parameter in that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Normalizer;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Beyond this magnitude tansig returns exactly ±1.
pub const TANSIG_SATURATION: f64 = 20.0;

/// Hyperbolic-tangent sigmoid, `2 / (1 + exp(-2x)) - 1`.
pub fn tansig(x: f64) -> f64 {
    if x > TANSIG_SATURATION {
        1.0
    } else if x < -TANSIG_SATURATION {
        -1.0
    } else {
        2.0 / (1.0 + (-2.0 * x).exp()) - 1.0
    }
}

/// Derivative of tansig expressed through its output `h = tansig(x)`.
pub fn tansig_derivative(h: f64) -> f64 {
    1.0 - h * h
}

/// Flat weight/bias vector in the documented packing order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
    b2: Vec<f64>,
    input_normalizer: Normalizer,
    target_normalizer: Normalizer,
}

/// Normalizer that leaves values in `[-1, 1]` unchanged.
fn identity_normalizer(n: usize) -> Normalizer {
    Normalizer::new(vec![-1.0; n], vec![1.0; n]).expect("valid bounds")
}

pub fn parameter_count(n_in: usize, n_hidden: usize, n_out: usize) -> usize {
    n_hidden * n_in + n_hidden + n_out * n_hidden + n_out
}

fn check_counts(n_in: usize, n_hidden: usize, n_out: usize) -> Result<()> {
    if n_in == 0 || n_hidden == 0 || n_out == 0 {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {n_in}-{n_hidden}-{n_out}"
        )));
    }
    Ok(())
}

/// Seeded uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per
/// layer, zero biases, identity normalizers.
pub fn init_weights(n_in: usize, n_hidden: usize, n_out: usize, seed: u64) -> Result<MlpNetwork> {
    check_counts(n_in, n_hidden, n_out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |rows: usize, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..rows * fan_in).map(|_| rng.random_range(-bound..=bound)).collect();
        Matrix::new(rows, fan_in, data)
    };
    let w1 = layer(n_hidden, n_in)?;
    let w2 = layer(n_out, n_hidden)?;
    Ok(MlpNetwork {
        n_in,
        n_hidden,
        n_out,
        w1,
        b1: vec![0.0; n_hidden],
        w2,
        b2: vec![0.0; n_out],
        input_normalizer: identity_normalizer(n_in),
        target_normalizer: identity_normalizer(n_out),
    })
}

impl MlpNetwork {
    /// Network with every weight and bias zero.
    pub fn zeros(n_in: usize, n_hidden: usize, n_out: usize) -> Result<Self> {
        check_counts(n_in, n_hidden, n_out)?;
        Ok(MlpNetwork {
            n_in,
            n_hidden,
            n_out,
            w1: Matrix::zeros(n_hidden, n_in),
            b1: vec![0.0; n_hidden],
            w2: Matrix::zeros(n_out, n_hidden),
            b2: vec![0.0; n_out],
            input_normalizer: identity_normalizer(n_in),
            target_normalizer: identity_normalizer(n_out),
        })
    }

    pub fn from_parts(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        let (n_hidden, n_in, n_out) = (w1.rows(), w1.cols(), w2.rows());
        if b1.len() != n_hidden || w2.cols() != n_hidden || b2.len() != n_out {
            return Err(Error::Shape(format!(
                "inconsistent layers: W1 {}x{}, b1 {}, W2 {}x{}, b2 {}",
                w1.rows(),
                w1.cols(),
                b1.len(),
                w2.rows(),
                w2.cols(),
                b2.len()
            )));
        }
        if b1.iter().chain(&b2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("bias".into()));
        }
        Ok(MlpNetwork {
            n_in,
            n_hidden,
            n_out,
            w1,
            b1,
            w2,
            b2,
            input_normalizer: identity_normalizer(n_in),
            target_normalizer: identity_normalizer(n_out),
        })
    }

    /// Attaches the native-unit normalizers used by [`predict`](Self::predict).
    pub fn with_normalizers(mut self, input: Normalizer, target: Normalizer) -> Result<Self> {
        if input.len() != self.n_in || target.len() != self.n_out {
            return Err(Error::Shape(format!(
                "normalizers cover {} inputs and {} outputs, network has {} and {}",
                input.len(),
                target.len(),
                self.n_in,
                self.n_out
            )));
        }
        self.input_normalizer = input;
        self.target_normalizer = target;
        Ok(self)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn b1(&self) -> &[f64] {
        &self.b1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    pub fn input_normalizer(&self) -> &Normalizer {
        &self.input_normalizer
    }

    pub fn target_normalizer(&self) -> &Normalizer {
        &self.target_normalizer
    }

    pub fn parameter_count(&self) -> usize {
        parameter_count(self.n_in, self.n_hidden, self.n_out)
    }

    pub fn params(&self) -> ParamVector {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend_from_slice(self.w1.as_slice());
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(self.w2.as_slice());
        p.extend_from_slice(&self.b2);
        ParamVector(p)
    }

    /// Copy of this network carrying `params` instead of its own weights.
    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "parameter vector has length {}, network needs {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let (w1, rest) = params.split_at(self.n_hidden * self.n_in);
        let (b1, rest) = rest.split_at(self.n_hidden);
        let (w2, b2) = rest.split_at(self.n_out * self.n_hidden);
        if let Some(k) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {k}")));
        }
        Ok(MlpNetwork {
            w1: Matrix::new(self.n_hidden, self.n_in, w1.to_vec())?,
            b1: b1.to_vec(),
            w2: Matrix::new(self.n_out, self.n_hidden, w2.to_vec())?,
            b2: b2.to_vec(),
            ..self.clone()
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::Shape(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.n_in
            )));
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|j| tansig(dot(self.w1.row(j), x) + self.b1[j]))
            .collect()
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        (0..self.n_out).map(|o| dot(self.w2.row(o), h) + self.b2[o]).collect()
    }

    /// Normalized input to normalized output.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.output(&self.hidden(x)))
    }

    /// Outputs for a whole batch, flattened sample-major.
    pub fn forward_batch<X: AsRef<[f64]>>(&self, batch: &[X]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.len() * self.n_out);
        for x in batch {
            out.extend(self.forward(x.as_ref())?);
        }
        Ok(out)
    }

    /// Native-unit input to native-unit output through the attached
    /// normalizers.
    pub fn predict(&self, raw: &[f64]) -> Result<Vec<f64>> {
        let x = self.input_normalizer.apply(raw)?;
        self.target_normalizer.invert(&self.forward(&x)?)
    }

    /// Exact Jacobian of every output with respect to every parameter,
    /// `(batch.len() * n_out) × parameter_count`, by backpropagation.
    pub fn jacobian<X: AsRef<[f64]>>(&self, batch: &[X]) -> Result<Matrix> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        let p = self.parameter_count();
        let (nh, ni, no) = (self.n_hidden, self.n_in, self.n_out);
        let b1_at = nh * ni;
        let w2_at = b1_at + nh;
        let b2_at = w2_at + no * nh;

        let mut data = vec![0.0; batch.len() * no * p];
        let mut delta = vec![0.0; nh];
        for (s, x) in batch.iter().enumerate() {
            let x = x.as_ref();
            self.check_input(x)?;
            let h = self.hidden(x);
            for o in 0..no {
                let row = &mut data[(s * no + o) * p..(s * no + o + 1) * p];
                // Seed the output with 1 and push it back through W2 and tansig.
                for j in 0..nh {
                    delta[j] = self.w2.get(o, j) * tansig_derivative(h[j]);
                }
                for j in 0..nh {
                    for i in 0..ni {
                        row[j * ni + i] = delta[j] * x[i];
                    }
                    row[b1_at + j] = delta[j];
                    row[w2_at + o * nh + j] = h[j];
                }
                row[b2_at + o] = 1.0;
            }
        }
        Matrix::new(batch.len() * no, p, data)
    }
}

pub fn forward(net: &MlpNetwork, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}

pub fn jacobian<X: AsRef<[f64]>>(net: &MlpNetwork, batch: &[X]) -> Result<Matrix> {
    net.jacobian(batch)
}
