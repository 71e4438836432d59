use ndarray::{Array1, Array2, Axis};

/// Fully connected layer, weights stored output-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            w: Array2::zeros((out_dim, in_dim)),
            b: Array1::zeros(out_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Linear pre-activation for a batch of rows.
    pub fn affine(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// tanh(Wx + b).
    pub fn forward_tanh(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.affine(x);
        z.mapv_inplace(f64::tanh);
        z
    }

    /// Backprop through the tanh nonlinearity. `out` is the cached
    /// activation; returns the gradient w.r.t. the layer input and
    /// accumulates parameter gradients.
    pub fn backward_tanh(
        &self,
        input: &Array2<f64>,
        out: &Array2<f64>,
        d_out: &Array2<f64>,
        grads: &mut Dense,
    ) -> Array2<f64> {
        let dz = d_out * &(1.0 - out * out);
        grads.w += &dz.t().dot(input);
        grads.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.w)
    }

    /// Backprop through the linear output layer.
    pub fn backward_linear(
        &self,
        input: &Array2<f64>,
        d_out: &Array2<f64>,
        grads: &mut Dense,
    ) -> Array2<f64> {
        grads.w += &d_out.t().dot(input);
        grads.b += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.w)
    }
}
