//! LSTM cell and two-layer scorer with explicit backpropagation.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

/// Gate layout inside the stacked `4H` rows: input, forget, cell, output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / hidden as f64).sqrt();
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(ndarray::s![hidden..2 * hidden]).fill(1.0);
        Self { w: uniform(4 * hidden, input, bound, rng), u: uniform(4 * hidden, hidden, bound, rng), b }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let w = self.w.as_slice().unwrap();
        let u = self.u.as_slice().unwrap();
        let (ni, nh) = (x.len(), h.len());
        (0..4 * nh)
            .map(|r| {
                let wr = &w[r * ni..(r + 1) * ni];
                let ur = &u[r * nh..(r + 1) * nh];
                self.b[r]
                    + wr.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    + ur.iter().zip(h).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn step_cached(&self, x: Vec<f64>, h_prev: Vec<f64>, c_prev: Vec<f64>) -> StepCache {
        let nh = self.hidden();
        let a = self.preactivation(&x, &h_prev);
        let i: Vec<f64> = a[..nh].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = a[nh..2 * nh].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = a[2 * nh..3 * nh].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = a[3 * nh..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..nh).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..nh).map(|k| o[k] * tanh_c[k]).collect();
        StepCache { x, h_prev, c_prev, i, f, g, o, tanh_c, h, c }
    }

    /// One inference step; returns the new `(h, c)`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let cache = self.step_cached(x.to_vec(), h.to_vec(), c.to_vec());
        (cache.h, cache.c)
    }

    /// Backpropagates `dh`/`dc` through one cached step, accumulating into
    /// `grads`. Returns gradients for the previous hidden and cell state.
    pub(crate) fn backward_step(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc_next: &[f64],
        grads: &mut LstmGrads,
    ) -> (Vec<f64>, Vec<f64>) {
        let nh = self.hidden();
        let ni = self.input_size();
        let mut da = vec![0.0; 4 * nh];
        let mut dc_prev = vec![0.0; nh];
        for k in 0..nh {
            let dc = dc_next[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let d_o = dh[k] * cache.tanh_c[k];
            let d_i = dc * cache.g[k];
            let d_g = dc * cache.i[k];
            let d_f = dc * cache.c_prev[k];
            dc_prev[k] = dc * cache.f[k];
            da[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
            da[nh + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
            da[2 * nh + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
            da[3 * nh + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
        }
        let u = self.u.as_slice().unwrap();
        let mut dh_prev = vec![0.0; nh];
        for (r, &dar) in da.iter().enumerate() {
            if dar == 0.0 {
                continue;
            }
            let gw = &mut grads.w[r * ni..(r + 1) * ni];
            for (g, x) in gw.iter_mut().zip(&cache.x) {
                *g += dar * x;
            }
            let gu = &mut grads.u[r * nh..(r + 1) * nh];
            let ur = &u[r * nh..(r + 1) * nh];
            for k in 0..nh {
                gu[k] += dar * cache.h_prev[k];
                dh_prev[k] += dar * ur[k];
            }
            grads.b[r] += dar;
        }
        (dh_prev, dc_prev)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LstmGrads {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros(cell: &LstmCell) -> Self {
        Self { w: vec![0.0; cell.w.len()], u: vec![0.0; cell.u.len()], b: vec![0.0; cell.b.len()] }
    }
}

/// `score_i = w2 · tanh(W1z z_i + W1h h + b1)`. An output bias would cancel
/// in the softmax, so there is none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub w1z: Array2<f64>,
    pub w1h: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
}

impl Scorer {
    pub fn init(embed: usize, hidden: usize, mlp: usize, rng: &mut impl Rng) -> Self {
        let b_in = (6.0 / (embed + hidden + mlp) as f64).sqrt();
        let b_out = (6.0 / (mlp + 1) as f64).sqrt();
        Self {
            w1z: uniform(mlp, embed, b_in, rng),
            w1h: uniform(mlp, hidden, b_in, rng),
            b1: Array1::zeros(mlp),
            w2: Array1::from_shape_fn(mlp, |_| rng.gen_range(-b_out..b_out)),
        }
    }

    pub fn mlp_dim(&self) -> usize {
        self.b1.len()
    }

    /// `Z W1zᵀ + b1`, one row per POI. Independent of the sequence.
    pub fn project_pois(&self, z: &Array2<f64>) -> Array2<f64> {
        z.dot(&self.w1z.t()) + &self.b1
    }

    fn hidden_term(&self, h: &[f64]) -> Vec<f64> {
        let w = self.w1h.as_slice().unwrap();
        let nh = h.len();
        (0..self.mlp_dim())
            .map(|m| w[m * nh..(m + 1) * nh].iter().zip(h).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn logits(&self, projected: &Array2<f64>, h: &[f64]) -> Vec<f64> {
        let ht = self.hidden_term(h);
        let w2 = self.w2.as_slice().unwrap();
        projected
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&ht).zip(w2).map(|((p, q), w)| w * (p + q).tanh()).sum())
            .collect()
    }

    /// Backward pass for one step given `d_logits`. Accumulates `w1h`/`w2`
    /// gradients into `grads`, the per-POI pre-activation gradients into
    /// `d_projected` (for `w1z`/`b1` later), and returns `dh`.
    pub(crate) fn backward(
        &self,
        projected: &Array2<f64>,
        h: &[f64],
        d_logits: &[f64],
        grads: &mut ScorerGrads,
        d_projected: &mut Array2<f64>,
    ) -> Vec<f64> {
        let ht = self.hidden_term(h);
        let w2 = self.w2.as_slice().unwrap();
        let m_dim = self.mlp_dim();
        let mut da_sum = vec![0.0; m_dim];
        for (i, row) in projected.rows().into_iter().enumerate() {
            let dl = d_logits[i];
            if dl == 0.0 {
                continue;
            }
            let mut dp = d_projected.row_mut(i);
            for m in 0..m_dim {
                let u = (row[m] + ht[m]).tanh();
                grads.w2[m] += dl * u;
                let da = dl * w2[m] * (1.0 - u * u);
                dp[m] += da;
                da_sum[m] += da;
            }
        }
        let nh = h.len();
        let w1h = self.w1h.as_slice().unwrap();
        let mut dh = vec![0.0; nh];
        for m in 0..m_dim {
            let gw = &mut grads.w1h[m * nh..(m + 1) * nh];
            let wr = &w1h[m * nh..(m + 1) * nh];
            for k in 0..nh {
                gw[k] += da_sum[m] * h[k];
                dh[k] += da_sum[m] * wr[k];
            }
        }
        dh
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ScorerGrads {
    pub w1z: Vec<f64>,
    pub w1h: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl ScorerGrads {
    pub fn zeros(s: &Scorer) -> Self {
        Self {
            w1z: vec![0.0; s.w1z.len()],
            w1h: vec![0.0; s.w1h.len()],
            b1: vec![0.0; s.b1.len()],
            w2: vec![0.0; s.w2.len()],
        }
    }
}
