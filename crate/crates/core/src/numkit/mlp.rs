use serde::{Deserialize, Serialize};

use super::{dot, glorot_init, DenseMatrix, Rng};
use crate::error::{dim_err, Result};

/// Two-layer perceptron `w2 * tanh(w1 * x + b1) + b2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: DenseMatrix::zeros(hidden, input),
            b1: vec![0.0; hidden],
            w2: DenseMatrix::zeros(output, hidden),
            b2: vec![0.0; output],
        }
    }

    /// Glorot weights, zero biases.
    pub fn random(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot_init(hidden, input, rng),
            b1: vec![0.0; hidden],
            w2: glorot_init(output, hidden, rng),
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return dim_err(format!("MLP input of {} for width {}", x.len(), self.input_dim()));
        }
        let hidden: Vec<f64> =
            (0..self.hidden_dim()).map(|h| (dot(self.w1.row(h), x) + self.b1[h]).tanh()).collect();
        let mut out = self.b2.clone();
        for (o, v) in out.iter_mut().enumerate() {
            *v += dot(self.w2.row(o), &hidden);
        }
        Ok(out)
    }

    /// Forward pass on `onehot(index, width) ++ rest` without building the
    /// concatenated vector.
    pub fn forward_onehot(&self, index: usize, width: usize, rest: &[f64]) -> Result<Vec<f64>> {
        if index >= width || width + rest.len() != self.input_dim() {
            return dim_err(format!(
                "one-hot {index}/{width} plus {} features for MLP width {}",
                rest.len(),
                self.input_dim()
            ));
        }
        let mut pre = self.b1.clone();
        for (h, p) in pre.iter_mut().enumerate() {
            let row = self.w1.row(h);
            *p += row[index] + dot(&row[width..], rest);
        }
        let hidden: Vec<f64> = pre.into_iter().map(f64::tanh).collect();
        let mut out = self.b2.clone();
        for (o, v) in out.iter_mut().enumerate() {
            *v += dot(self.w2.row(o), &hidden);
        }
        Ok(out)
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [self.w1.data_mut(), &mut self.b1, self.w2.data_mut(), &mut self.b2]
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 4] {
        [self.w1.data(), &self.b1, self.w2.data(), &self.b2]
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_passes_bias() {
        let mut m = Mlp::zeros(3, 2, 1);
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0]);
        m.b2[0] = 2.5;
        assert_eq!(m.forward(&[1.0, 2.0, 3.0]).unwrap(), vec![2.5]);
    }

    #[test]
    fn onehot_matches_dense_input() {
        let m = Mlp::random(5, 4, 2, &mut Rng::new(13));
        let rest = [0.3, -0.7];
        let dense = m.forward(&[0.0, 1.0, 0.0, 0.3, -0.7]).unwrap();
        let sparse = m.forward_onehot(1, 3, &rest).unwrap();
        for (a, b) in dense.iter().zip(&sparse) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_two_layer() {
        let m = Mlp {
            w1: DenseMatrix::from_rows(&[[1.0, -1.0], [0.5, 2.0]]).unwrap(),
            b1: vec![0.1, -0.2],
            w2: DenseMatrix::from_rows(&[[3.0, -1.0]]).unwrap(),
            b2: vec![0.25],
        };
        let x = [0.4, 0.2];
        let h0 = (0.4f64 - 0.2 + 0.1).tanh();
        let h1 = (0.2f64 + 0.4 - 0.2).tanh();
        let want = 3.0 * h0 - h1 + 0.25;
        assert!((m.forward(&x).unwrap()[0] - want).abs() < 1e-15);
    }
}
