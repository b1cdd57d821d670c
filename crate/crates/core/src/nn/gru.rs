use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of trainable values of a dual-bias GRU with a linear head.
pub const fn param_count(input: usize, hidden: usize, classes: usize) -> usize {
    3 * (hidden * input + hidden * hidden + 2 * hidden) + classes * hidden + classes
}

/// Same count for a GRU with one bias vector per gate.
pub const fn single_bias_param_count(input: usize, hidden: usize, classes: usize) -> usize {
    3 * (hidden * input + hidden * hidden + hidden) + classes * hidden + classes
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    w_ir: usize,
    w_iz: usize,
    w_in: usize,
    w_hr: usize,
    w_hz: usize,
    w_hn: usize,
    b_ir: usize,
    b_iz: usize,
    b_in: usize,
    b_hr: usize,
    b_hz: usize,
    b_hn: usize,
    w_out: usize,
    b_out: usize,
}

impl Layout {
    fn new(i: usize, h: usize, c: usize) -> Self {
        let w_ir = 0;
        let w_iz = w_ir + h * i;
        let w_in = w_iz + h * i;
        let w_hr = w_in + h * i;
        let w_hz = w_hr + h * h;
        let w_hn = w_hz + h * h;
        let b_ir = w_hn + h * h;
        let b_iz = b_ir + h;
        let b_in = b_iz + h;
        let b_hr = b_in + h;
        let b_hz = b_hr + h;
        let b_hn = b_hz + h;
        let w_out = b_hn + h;
        let b_out = w_out + c * h;
        Self {
            w_ir,
            w_iz,
            w_in,
            w_hr,
            w_hz,
            w_hn,
            b_ir,
            b_iz,
            b_in,
            b_hr,
            b_hz,
            b_hn,
            w_out,
            b_out,
        }
    }
}

/// Names and shapes (rows, cols) of the parameter tensors in storage order.
pub fn tensor_shapes(input: usize, hidden: usize, classes: usize) -> [(&'static str, usize, usize); 14] {
    let (i, h, c) = (input, hidden, classes);
    [
        ("w_ir", h, i),
        ("w_iz", h, i),
        ("w_in", h, i),
        ("w_hr", h, h),
        ("w_hz", h, h),
        ("w_hn", h, h),
        ("b_ir", h, 1),
        ("b_iz", h, 1),
        ("b_in", h, 1),
        ("b_hr", h, 1),
        ("b_hz", h, 1),
        ("b_hn", h, 1),
        ("w_out", c, h),
        ("b_out", c, 1),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_size: usize,
    pub hidden_size: usize,
    pub n_classes: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        Self {
            input_size: crate::features::N_FEATURES,
            hidden_size: 16,
            n_classes: crate::radar::GestureClass::COUNT,
        }
    }
}

/// GRU sequence classifier (PyTorch gate convention, separate input and
/// hidden biases) with a per-step linear read-out and log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    shape: ModelShape,
    layout: Layout,
    params: Vec<f64>,
}

/// Per-step activations kept for backpropagation.
struct Trace {
    r: Array2<f64>,
    z: Array2<f64>,
    n: Array2<f64>,
    hn: Array2<f64>,
    /// Hidden states h_0..h_T (h_0 = 0).
    h: Array2<f64>,
    log_probs: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter_mut().for_each(|v| *v -= lse);
}

impl GruModel {
    /// All-zero model.
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        if shape.input_size == 0 || shape.hidden_size == 0 || shape.n_classes == 0 {
            return Err(Error::InvalidConfig(format!("degenerate model shape {shape:?}")));
        }
        Ok(Self {
            shape,
            layout: Layout::new(shape.input_size, shape.hidden_size, shape.n_classes),
            params: vec![0.0; param_count(shape.input_size, shape.hidden_size, shape.n_classes)],
        })
    }

    /// Uniform(-1/sqrt(hidden), 1/sqrt(hidden)) initialization.
    pub fn init<R: Rng + ?Sized>(shape: ModelShape, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(shape)?;
        let bound = 1.0 / (shape.hidden_size as f64).sqrt();
        for p in model.params.iter_mut() {
            *p = rng.random_range(-bound..bound);
        }
        Ok(model)
    }

    pub fn from_params(shape: ModelShape, params: Vec<f64>) -> Result<Self> {
        let mut model = Self::zeros(shape)?;
        if params.len() != model.params.len() {
            return Err(Error::dims(model.params.len(), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("non-finite model parameter".into()));
        }
        model.params = params;
        Ok(model)
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, seq: &ArrayView2<'_, f64>) -> Result<()> {
        if seq.ncols() != self.shape.input_size {
            return Err(Error::dims(
                format!("{} input features", self.shape.input_size),
                seq.ncols(),
            ));
        }
        if seq.nrows() == 0 {
            return Err(Error::InvalidArgument("empty sequence".into()));
        }
        if seq.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite input".into()));
        }
        Ok(())
    }

    fn block(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.params[offset..offset + rows * cols])
            .expect("tensor inside parameter vector")
    }

    fn run(&self, seq: &ArrayView2<'_, f64>) -> Trace {
        let (nh, nc) = (self.shape.hidden_size, self.shape.n_classes);
        let ni = self.shape.input_size;
        let t_len = seq.nrows();
        let l = &self.layout;
        let p = &self.params;
        // input projections for all steps at once
        let a_r = seq.dot(&self.block(l.w_ir, nh, ni).t());
        let a_z = seq.dot(&self.block(l.w_iz, nh, ni).t());
        let a_n = seq.dot(&self.block(l.w_in, nh, ni).t());
        let (w_hr, w_hz, w_hn) = (
            &p[l.w_hr..l.w_hr + nh * nh],
            &p[l.w_hz..l.w_hz + nh * nh],
            &p[l.w_hn..l.w_hn + nh * nh],
        );
        let mut tr = Trace {
            r: Array2::zeros((t_len, nh)),
            z: Array2::zeros((t_len, nh)),
            n: Array2::zeros((t_len, nh)),
            hn: Array2::zeros((t_len, nh)),
            h: Array2::zeros((t_len + 1, nh)),
            log_probs: Array2::zeros((t_len, nc)),
        };
        let mut h_prev = vec![0.0; nh];
        for t in 0..t_len {
            let mut h_next = tr.h.row_mut(t + 1);
            for j in 0..nh {
                let row = j * nh..(j + 1) * nh;
                let r = sigmoid(a_r[[t, j]] + p[l.b_ir + j] + p[l.b_hr + j] + dot(&w_hr[row.clone()], &h_prev));
                let z = sigmoid(a_z[[t, j]] + p[l.b_iz + j] + p[l.b_hz + j] + dot(&w_hz[row.clone()], &h_prev));
                let hn = p[l.b_hn + j] + dot(&w_hn[row], &h_prev);
                let n = (a_n[[t, j]] + p[l.b_in + j] + r * hn).tanh();
                h_next[j] = (1.0 - z) * n + z * h_prev[j];
                tr.r[[t, j]] = r;
                tr.z[[t, j]] = z;
                tr.n[[t, j]] = n;
                tr.hn[[t, j]] = hn;
            }
            h_prev.iter_mut().zip(h_next.iter()).for_each(|(a, b)| *a = *b);
        }
        let head = self.block(l.w_out, nc, nh);
        tr.log_probs = tr.h.slice(s![1.., ..]).dot(&head.t());
        for mut row in tr.log_probs.rows_mut() {
            row += &ArrayView1::from(&p[l.b_out..l.b_out + nc]);
            log_softmax(row.as_slice_mut().expect("standard layout"));
        }
        tr
    }

    /// Per-step log class probabilities, shape [T][n_classes].
    pub fn forward(&self, seq: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&seq)?;
        Ok(self.run(&seq).log_probs)
    }

    /// Hidden states h_1..h_T, shape [T][hidden].
    pub fn hidden_states(&self, seq: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&seq)?;
        Ok(self.run(&seq).h.slice(s![1.., ..]).to_owned())
    }

    /// Mean per-step NLL of `labels` under the model; adds
    /// `scale * d(loss)/d(params)` into `grad`.
    pub fn loss_and_grad(
        &self,
        seq: ArrayView2<'_, f64>,
        labels: &[usize],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_input(&seq)?;
        if labels.len() != seq.nrows() {
            return Err(Error::dims(seq.nrows(), labels.len()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::dims(self.params.len(), grad.len()));
        }
        let (nh, nc) = (self.shape.hidden_size, self.shape.n_classes);
        if let Some(&bad) = labels.iter().find(|&&c| c >= nc) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        let t_len = seq.nrows();
        let tr = self.run(&seq);
        let loss = -labels
            .iter()
            .enumerate()
            .map(|(t, &c)| tr.log_probs[[t, c]])
            .sum::<f64>()
            / t_len as f64;

        let l = self.layout;
        let p = &self.params;
        let step_scale = scale / t_len as f64;
        let mut d_logits = tr.log_probs.mapv(f64::exp);
        for (t, &c) in labels.iter().enumerate() {
            d_logits[[t, c]] -= 1.0;
        }
        d_logits *= step_scale;
        let h_out = tr.h.slice(s![1.., ..]);
        let h_in = tr.h.slice(s![..t_len, ..]);
        let dh_out = d_logits.dot(&self.block(l.w_out, nc, nh));

        let mut d_r = Array2::<f64>::zeros((t_len, nh));
        let mut d_z = Array2::<f64>::zeros((t_len, nh));
        let mut d_n = Array2::<f64>::zeros((t_len, nh));
        let mut d_hn = Array2::<f64>::zeros((t_len, nh));
        let (w_hr, w_hz, w_hn) = (
            &p[l.w_hr..l.w_hr + nh * nh],
            &p[l.w_hz..l.w_hz + nh * nh],
            &p[l.w_hn..l.w_hn + nh * nh],
        );
        let mut carry = vec![0.0; nh];
        let mut dh = vec![0.0; nh];
        for t in (0..t_len).rev() {
            for j in 0..nh {
                dh[j] = dh_out[[t, j]] + carry[j];
            }
            for j in 0..nh {
                let (r, z, n, hn) = (tr.r[[t, j]], tr.z[[t, j]], tr.n[[t, j]], tr.hn[[t, j]]);
                let dn = dh[j] * (1.0 - z) * (1.0 - n * n);
                d_n[[t, j]] = dn;
                d_z[[t, j]] = dh[j] * (h_in[[t, j]] - n) * z * (1.0 - z);
                d_hn[[t, j]] = dn * r;
                d_r[[t, j]] = dn * hn * r * (1.0 - r);
                carry[j] = dh[j] * z;
            }
            for j in 0..nh {
                let (gr, gz, gn) = (d_r[[t, j]], d_z[[t, j]], d_hn[[t, j]]);
                let row = j * nh..(j + 1) * nh;
                for (((c, a), b), e) in carry
                    .iter_mut()
                    .zip(&w_hr[row.clone()])
                    .zip(&w_hz[row.clone()])
                    .zip(&w_hn[row])
                {
                    *c += a * gr + b * gz + e * gn;
                }
            }
        }

        let mut add = |offset: usize, rows: usize, value: Array2<f64>| {
            let target = &mut grad[offset..offset + rows * value.ncols()];
            for (g, v) in target.iter_mut().zip(value.iter()) {
                *g += v;
            }
        };
        add(l.w_ir, nh, d_r.t().dot(&seq));
        add(l.w_iz, nh, d_z.t().dot(&seq));
        add(l.w_in, nh, d_n.t().dot(&seq));
        add(l.w_hr, nh, d_r.t().dot(&h_in));
        add(l.w_hz, nh, d_z.t().dot(&h_in));
        add(l.w_hn, nh, d_hn.t().dot(&h_in));
        add(l.w_out, nc, d_logits.t().dot(&h_out));
        let col_sums = |m: &Array2<f64>| m.sum_axis(Axis(0));
        let (sr, sz, sn, shn, so) = (
            col_sums(&d_r),
            col_sums(&d_z),
            col_sums(&d_n),
            col_sums(&d_hn),
            col_sums(&d_logits),
        );
        for j in 0..nh {
            grad[l.b_ir + j] += sr[j];
            grad[l.b_hr + j] += sr[j];
            grad[l.b_iz + j] += sz[j];
            grad[l.b_hz + j] += sz[j];
            grad[l.b_in + j] += sn[j];
            grad[l.b_hn + j] += shn[j];
        }
        for c in 0..nc {
            grad[l.b_out + c] += so[c];
        }
        Ok(loss)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut parameters = serde_json::Map::new();
        let shapes = tensor_shapes(self.shape.input_size, self.shape.hidden_size, self.shape.n_classes);
        let mut offset = 0;
        for (name, rows, cols) in shapes {
            let block = &self.params[offset..offset + rows * cols];
            offset += rows * cols;
            let value = if cols == 1 {
                serde_json::to_value(block)?
            } else {
                serde_json::to_value(block.chunks(cols).collect::<Vec<_>>())?
            };
            parameters.insert(name.to_string(), value);
        }
        let file = serde_json::json!({
            "config": self.shape,
            "parameter_count": self.params.len(),
            "parameters": parameters,
        });
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            config: ModelShape,
            parameters: serde_json::Map<String, serde_json::Value>,
        }
        let file: File = serde_json::from_str(text)?;
        let s = file.config;
        let mut params = Vec::with_capacity(param_count(s.input_size, s.hidden_size, s.n_classes));
        for (name, rows, cols) in tensor_shapes(s.input_size, s.hidden_size, s.n_classes) {
            let value = file
                .parameters
                .get(name)
                .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            let flat: Vec<f64> = if cols == 1 {
                serde_json::from_value(value.clone())?
            } else {
                let m: Vec<Vec<f64>> = serde_json::from_value(value.clone())?;
                if m.iter().any(|row| row.len() != cols) {
                    return Err(Error::Format(format!("tensor {name} has ragged rows")));
                }
                m.concat()
            };
            if flat.len() != rows * cols {
                return Err(Error::Format(format!(
                    "tensor {name}: expected {} values, found {}",
                    rows * cols,
                    flat.len()
                )));
            }
            params.extend(flat);
        }
        Self::from_params(s, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Mean over steps of -log_probs[t][labels[t]].
pub fn nll_loss(log_probs: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if labels.len() != log_probs.nrows() || labels.is_empty() {
        return Err(Error::dims(log_probs.nrows(), labels.len()));
    }
    let mut total = 0.0;
    for (t, &c) in labels.iter().enumerate() {
        if c >= log_probs.ncols() {
            return Err(Error::InvalidArgument(format!("label {c} out of range")));
        }
        total -= log_probs[[t, c]];
    }
    Ok(total / labels.len() as f64)
}

/// Compares analytic gradients with central finite differences (step `eps`)
/// and returns the relative error `|num - ana| / max(|num|, 1e-8)` (L2 norms)
/// for every parameter tensor.
pub fn gradient_check(
    model: &GruModel,
    seq: ArrayView2<'_, f64>,
    labels: &[usize],
    eps: f64,
) -> Result<Vec<(&'static str, f64)>> {
    let mut grad = vec![0.0; model.param_count()];
    model.loss_and_grad(seq, labels, 1.0, &mut grad)?;
    let s = model.shape();
    let mut probe = model.clone();
    let mut out = Vec::new();
    let mut offset = 0;
    for (name, rows, cols) in tensor_shapes(s.input_size, s.hidden_size, s.n_classes) {
        let range = offset..offset + rows * cols;
        offset += rows * cols;
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in range {
            let orig = probe.params[i];
            probe.params[i] = orig + eps;
            let up = nll_loss(probe.forward(seq)?.view(), labels)?;
            probe.params[i] = orig - eps;
            let down = nll_loss(probe.forward(seq)?.view(), labels)?;
            probe.params[i] = orig;
            let num = (up - down) / (2.0 * eps);
            diff += (num - grad[i]).powi(2);
            norm += num * num;
        }
        out.push((name, diff.sqrt() / norm.sqrt().max(1e-8)));
    }
    Ok(out)
}
