//! LSTM with full gating, run in either time direction. A bidirectional
//! layer is one cell per direction with the hidden states concatenated.

use ndarray::{s, Array1, Array2};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One direction of an LSTM layer. Gate rows are packed
/// [input, forget, cell, output] along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDir {
    pub w_ih: Array2<f64>, // 4H x in
    pub w_hh: Array2<f64>, // 4H x H
    pub b: Array1<f64>,    // 4H
}

/// Cached gate and state activations in sequence order.
pub struct LstmCache {
    pub i: Array2<f64>,
    pub f: Array2<f64>,
    pub g: Array2<f64>,
    pub o: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

impl LstmDir {
    pub fn zeros(hidden: usize, in_dim: usize) -> Self {
        LstmDir {
            w_ih: Array2::zeros((4 * hidden, in_dim)),
            w_hh: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn in_dim(&self) -> usize {
        self.w_ih.ncols()
    }

    /// Run over the sequence; `reverse` flips the processing order while
    /// rows of the outputs stay in sequence order.
    pub fn forward(&self, x: &Array2<f64>, reverse: bool) -> LstmCache {
        let t_count = x.nrows();
        let h_dim = self.hidden_dim();
        let mut cache = LstmCache {
            i: Array2::zeros((t_count, h_dim)),
            f: Array2::zeros((t_count, h_dim)),
            g: Array2::zeros((t_count, h_dim)),
            o: Array2::zeros((t_count, h_dim)),
            c: Array2::zeros((t_count, h_dim)),
            tanh_c: Array2::zeros((t_count, h_dim)),
            h: Array2::zeros((t_count, h_dim)),
        };
        let mut h_prev = Array1::zeros(h_dim);
        let mut c_prev: Array1<f64> = Array1::zeros(h_dim);
        let order: Vec<usize> = if reverse {
            (0..t_count).rev().collect()
        } else {
            (0..t_count).collect()
        };
        for &t in &order {
            let x_t = x.row(t);
            let z = self.w_ih.dot(&x_t) + self.w_hh.dot(&h_prev) + &self.b;
            let mut h_t = Array1::zeros(h_dim);
            let mut c_t = Array1::zeros(h_dim);
            for k in 0..h_dim {
                let i_k = sigmoid(z[k]);
                let f_k = sigmoid(z[h_dim + k]);
                let g_k = z[2 * h_dim + k].tanh();
                let o_k = sigmoid(z[3 * h_dim + k]);
                let c_k = f_k * c_prev[k] + i_k * g_k;
                let tc_k = c_k.tanh();
                cache.i[[t, k]] = i_k;
                cache.f[[t, k]] = f_k;
                cache.g[[t, k]] = g_k;
                cache.o[[t, k]] = o_k;
                cache.c[[t, k]] = c_k;
                cache.tanh_c[[t, k]] = tc_k;
                c_t[k] = c_k;
                h_t[k] = o_k * tc_k;
            }
            cache.h.row_mut(t).assign(&h_t);
            h_prev = h_t;
            c_prev = c_t;
        }
        cache
    }

    /// Backpropagation through time. `d_h` holds gradients w.r.t. the
    /// sequence-ordered hidden outputs. Returns the gradient w.r.t. the
    /// layer input and accumulates parameter gradients.
    pub fn backward(
        &self,
        x: &Array2<f64>,
        cache: &LstmCache,
        d_h: &Array2<f64>,
        reverse: bool,
        grads: &mut LstmDir,
    ) -> Array2<f64> {
        let t_count = x.nrows();
        let h_dim = self.hidden_dim();
        let mut d_x = Array2::zeros((t_count, x.ncols()));
        let mut dh_next: Array1<f64> = Array1::zeros(h_dim);
        let mut dc_next: Array1<f64> = Array1::zeros(h_dim);

        // Walk the processing order backwards.
        let order: Vec<usize> = if reverse {
            (0..t_count).collect()
        } else {
            (0..t_count).rev().collect()
        };
        for &t in &order {
            // State feeding this step: the previously *processed* frame.
            let prev: Option<usize> = if reverse {
                if t + 1 < t_count {
                    Some(t + 1)
                } else {
                    None
                }
            } else {
                t.checked_sub(1)
            };
            let mut dz = Array1::zeros(4 * h_dim);
            let mut dc = Array1::zeros(h_dim);
            for k in 0..h_dim {
                let dh = d_h[[t, k]] + dh_next[k];
                let (i_k, f_k, g_k, o_k) = (
                    cache.i[[t, k]],
                    cache.f[[t, k]],
                    cache.g[[t, k]],
                    cache.o[[t, k]],
                );
                let tc = cache.tanh_c[[t, k]];
                let c_prev = prev.map_or(0.0, |p| cache.c[[p, k]]);
                let dck = dh * o_k * (1.0 - tc * tc) + dc_next[k];
                dz[k] = dck * g_k * i_k * (1.0 - i_k);
                dz[h_dim + k] = dck * c_prev * f_k * (1.0 - f_k);
                dz[2 * h_dim + k] = dck * i_k * (1.0 - g_k * g_k);
                dz[3 * h_dim + k] = dh * tc * o_k * (1.0 - o_k);
                dc[k] = dck * f_k;
            }
            let x_t = x.row(t);
            for r in 0..4 * h_dim {
                let dz_r = dz[r];
                if dz_r == 0.0 {
                    continue;
                }
                for c in 0..x.ncols() {
                    grads.w_ih[[r, c]] += dz_r * x_t[c];
                }
                if let Some(p) = prev {
                    for c in 0..h_dim {
                        grads.w_hh[[r, c]] += dz_r * cache.h[[p, c]];
                    }
                }
                grads.b[r] += dz_r;
            }
            for c in 0..x.ncols() {
                let mut acc = 0.0;
                for r in 0..4 * h_dim {
                    acc += dz[r] * self.w_ih[[r, c]];
                }
                d_x[[t, c]] = acc;
            }
            for c in 0..h_dim {
                let mut acc = 0.0;
                for r in 0..4 * h_dim {
                    acc += dz[r] * self.w_hh[[r, c]];
                }
                dh_next[c] = acc;
            }
            dc_next = dc;
        }
        d_x
    }
}

/// Bidirectional layer: forward and backward cells, outputs concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub fwd: LstmDir,
    pub bwd: LstmDir,
}

pub struct BiLstmCache {
    pub fwd: LstmCache,
    pub bwd: LstmCache,
}

impl BiLstm {
    pub fn zeros(hidden: usize, in_dim: usize) -> Self {
        BiLstm {
            fwd: LstmDir::zeros(hidden, in_dim),
            bwd: LstmDir::zeros(hidden, in_dim),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, BiLstmCache) {
        let fwd = self.fwd.forward(x, false);
        let bwd = self.bwd.forward(x, true);
        let h_dim = self.fwd.hidden_dim();
        let mut out = Array2::zeros((x.nrows(), 2 * h_dim));
        out.slice_mut(s![.., ..h_dim]).assign(&fwd.h);
        out.slice_mut(s![.., h_dim..]).assign(&bwd.h);
        (out, BiLstmCache { fwd, bwd })
    }

    pub fn backward(
        &self,
        x: &Array2<f64>,
        cache: &BiLstmCache,
        d_out: &Array2<f64>,
        grads: &mut BiLstm,
    ) -> Array2<f64> {
        let h_dim = self.fwd.hidden_dim();
        let d_fwd = d_out.slice(s![.., ..h_dim]).to_owned();
        let d_bwd = d_out.slice(s![.., h_dim..]).to_owned();
        let dx_f = self
            .fwd
            .backward(x, &cache.fwd, &d_fwd, false, &mut grads.fwd);
        let dx_b = self
            .bwd
            .backward(x, &cache.bwd, &d_bwd, true, &mut grads.bwd);
        dx_f + dx_b
    }
}
