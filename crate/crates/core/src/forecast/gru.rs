//! Gated recurrent unit cell: forward pass, cached forward for training, and
//! the matching backward pass.
//!
//! Gate layout follows the common `[reset | update | candidate]` stacking:
//!
//! ```text
//! r  = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z  = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out += W x` for a row-major `rows × cols` matrix.
pub(crate) fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), out.len() * cols);
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

/// `out += Wᵀ g` for a row-major `rows × cols` matrix.
pub(crate) fn matvec_t_add(w: &[f64], cols: usize, g: &[f64], out: &mut [f64]) {
    for (row, &gi) in w.chunks_exact(cols).zip(g) {
        if gi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * gi;
        }
    }
}

/// `W += g xᵀ`.
pub(crate) fn outer_add(w: &mut [f64], cols: usize, g: &[f64], x: &[f64]) {
    for (row, &gi) in w.chunks_exact_mut(cols).zip(g) {
        if gi == 0.0 {
            continue;
        }
        for (a, b) in row.iter_mut().zip(x) {
            *a += gi * b;
        }
    }
}

/// Borrowed weights of one GRU cell.
#[derive(Debug, Clone, Copy)]
pub struct GruCell<'a> {
    pub input_width: usize,
    pub hidden_width: usize,
    /// `3H × I`
    pub w_ih: &'a [f64],
    /// `3H × H`
    pub w_hh: &'a [f64],
    pub b_ih: &'a [f64],
    pub b_hh: &'a [f64],
}

/// Owned weights of one GRU cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCellParams {
    pub input_width: usize,
    pub hidden_width: usize,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

impl GruCellParams {
    pub fn zeros(input_width: usize, hidden_width: usize) -> Self {
        let g = 3 * hidden_width;
        Self {
            input_width,
            hidden_width,
            w_ih: vec![0.0; g * input_width],
            w_hh: vec![0.0; g * hidden_width],
            b_ih: vec![0.0; g],
            b_hh: vec![0.0; g],
        }
    }

    pub fn view(&self) -> GruCell<'_> {
        GruCell {
            input_width: self.input_width,
            hidden_width: self.hidden_width,
            w_ih: &self.w_ih,
            w_hh: &self.w_hh,
            b_ih: &self.b_ih,
            b_hh: &self.b_hh,
        }
    }
}

/// Intermediate values of one cell step, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub n: Vec<f64>,
    /// `W_hn h + b_hn`
    pub hn: Vec<f64>,
}

/// Parameter gradients of one cell, same layout as [`GruCell`].
pub(crate) struct CellGrads<'a> {
    pub w_ih: &'a mut [f64],
    pub w_hh: &'a mut [f64],
    pub b_ih: &'a mut [f64],
    pub b_hh: &'a mut [f64],
}

impl GruCell<'_> {
    fn check(&self, input: &[f64], hidden: &[f64]) -> Result<()> {
        let g = 3 * self.hidden_width;
        let shapes_ok = input.len() == self.input_width
            && hidden.len() == self.hidden_width
            && self.w_ih.len() == g * self.input_width
            && self.w_hh.len() == g * self.hidden_width
            && self.b_ih.len() == g
            && self.b_hh.len() == g;
        if shapes_ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "GRU cell {}→{} given input {} and hidden {}",
                self.input_width,
                self.hidden_width,
                input.len(),
                hidden.len()
            )))
        }
    }

    fn preactivations(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut gi = self.b_ih.to_vec();
        matvec_add(self.w_ih, self.input_width, x, &mut gi);
        let mut gh = self.b_hh.to_vec();
        matvec_add(self.w_hh, self.hidden_width, h, &mut gh);
        (gi, gh)
    }

    pub(crate) fn forward_cached(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, StepCache) {
        let hw = self.hidden_width;
        let (gi, gh) = self.preactivations(x, h);
        let mut r = vec![0.0; hw];
        let mut z = vec![0.0; hw];
        let mut n = vec![0.0; hw];
        let mut out = vec![0.0; hw];
        for j in 0..hw {
            r[j] = sigmoid(gi[j] + gh[j]);
            z[j] = sigmoid(gi[hw + j] + gh[hw + j]);
            n[j] = (gi[2 * hw + j] + r[j] * gh[2 * hw + j]).tanh();
            out[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
        }
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            r,
            z,
            n,
            hn: gh[2 * hw..].to_vec(),
        };
        (out, cache)
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hw = self.hidden_width;
        let (gi, gh) = self.preactivations(x, h);
        (0..hw)
            .map(|j| {
                let r = sigmoid(gi[j] + gh[j]);
                let z = sigmoid(gi[hw + j] + gh[hw + j]);
                let n = (gi[2 * hw + j] + r * gh[2 * hw + j]).tanh();
                (1.0 - z) * n + z * h[j]
            })
            .collect()
    }

    /// Accumulates parameter gradients for one step and returns
    /// `(d input, d previous hidden)` given `d h'`.
    pub(crate) fn backward(&self, cache: &StepCache, dh: &[f64], grads: CellGrads<'_>) -> (Vec<f64>, Vec<f64>) {
        let hw = self.hidden_width;
        let mut g_in = vec![0.0; 3 * hw];
        let mut g_hid = vec![0.0; 3 * hw];
        let mut dh_prev = vec![0.0; hw];
        for j in 0..hw {
            let (r, z, n) = (cache.r[j], cache.z[j], cache.n[j]);
            let dn = dh[j] * (1.0 - z);
            let dz = dh[j] * (cache.h_prev[j] - n);
            dh_prev[j] = dh[j] * z;
            let dan = dn * (1.0 - n * n);
            let dr = dan * cache.hn[j];
            let dar = dr * r * (1.0 - r);
            let daz = dz * z * (1.0 - z);
            g_in[j] = dar;
            g_in[hw + j] = daz;
            g_in[2 * hw + j] = dan;
            g_hid[j] = dar;
            g_hid[hw + j] = daz;
            g_hid[2 * hw + j] = dan * r;
        }
        outer_add(grads.w_ih, self.input_width, &g_in, &cache.x);
        outer_add(grads.w_hh, hw, &g_hid, &cache.h_prev);
        for (b, g) in grads.b_ih.iter_mut().zip(&g_in) {
            *b += g;
        }
        for (b, g) in grads.b_hh.iter_mut().zip(&g_hid) {
            *b += g;
        }
        let mut dx = vec![0.0; self.input_width];
        matvec_t_add(self.w_ih, self.input_width, &g_in, &mut dx);
        matvec_t_add(self.w_hh, hw, &g_hid, &mut dh_prev);
        (dx, dh_prev)
    }
}

/// One GRU step: returns the next hidden state.
pub fn gru_cell_forward(input: &[f64], hidden: &[f64], cell: &GruCell<'_>) -> Result<Vec<f64>> {
    cell.check(input, hidden)?;
    Ok(cell.forward_unchecked(input, hidden))
}
