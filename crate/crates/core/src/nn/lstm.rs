//! LSTM with peephole connections:
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + w_ci ⊙ c_{t-1} + b_i)
//! f_t = σ(W_xf x_t + W_hf h_{t-1} + w_cf ⊙ c_{t-1} + b_f)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + w_co ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```
//!
//! Peephole weights act diagonally, so they are stored as vectors. Inputs
//! are batches laid out `batch x features`, one matrix per time step.

use ndarray::{Array1, Array2, Axis};

use super::dense::{sigmoid, uniform_matrix, uniform_vector};
use super::params::array_param_set;
use crate::error::{Error, Result};
use crate::rng::Rng64;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_xi: Array2<f64>,
    pub w_hi: Array2<f64>,
    pub w_ci: Array1<f64>,
    pub w_xf: Array2<f64>,
    pub w_hf: Array2<f64>,
    pub w_cf: Array1<f64>,
    pub w_xc: Array2<f64>,
    pub w_hc: Array2<f64>,
    pub w_xo: Array2<f64>,
    pub w_ho: Array2<f64>,
    pub w_co: Array1<f64>,
    pub b_i: Array1<f64>,
    pub b_f: Array1<f64>,
    pub b_c: Array1<f64>,
    pub b_o: Array1<f64>,
}

array_param_set!(LstmParams {
    w_xi, w_hi, w_ci, w_xf, w_hf, w_cf, w_xc, w_hc, w_xo, w_ho, w_co, b_i, b_f, b_c, b_o
});

#[derive(Debug, Clone)]
struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
}

/// Per-step activations recorded by [`LstmParams::forward`] for BPTT.
#[derive(Debug, Clone)]
pub struct LstmTape {
    input_size: usize,
    hidden_size: usize,
    steps: Vec<StepCache>,
}

impl LstmTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Output gate activation `o_t` of step `t` (0-based).
    pub fn output_gate(&self, t: usize) -> &Array2<f64> {
        &self.steps[t].o
    }

    pub fn input_gate(&self, t: usize) -> &Array2<f64> {
        &self.steps[t].i
    }

    pub fn forget_gate(&self, t: usize) -> &Array2<f64> {
        &self.steps[t].f
    }

    pub fn cell(&self, t: usize) -> &Array2<f64> {
        &self.steps[t].c
    }
}

impl LstmParams {
    /// Uniform in ±1/√hidden with the forget bias at +1.
    pub fn new(input_size: usize, hidden_size: usize, rng: &mut Rng64) -> Self {
        let k = 1.0 / (hidden_size.max(1) as f64).sqrt();
        let mut m = |cols| uniform_matrix(hidden_size, cols, k, rng);
        let (w_xi, w_hi) = (m(input_size), m(hidden_size));
        let (w_xf, w_hf) = (m(input_size), m(hidden_size));
        let (w_xc, w_hc) = (m(input_size), m(hidden_size));
        let (w_xo, w_ho) = (m(input_size), m(hidden_size));
        let mut v = || uniform_vector(hidden_size, k, rng);
        let (w_ci, w_cf, w_co) = (v(), v(), v());
        let (b_i, b_c, b_o) = (v(), v(), v());
        LstmParams {
            w_xi,
            w_hi,
            w_ci,
            w_xf,
            w_hf,
            w_cf,
            w_xc,
            w_hc,
            w_xo,
            w_ho,
            w_co,
            b_i,
            b_f: Array1::ones(hidden_size),
            b_c,
            b_o,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let m = |cols| Array2::zeros((hidden_size, cols));
        let v = || Array1::zeros(hidden_size);
        LstmParams {
            w_xi: m(input_size),
            w_hi: m(hidden_size),
            w_ci: v(),
            w_xf: m(input_size),
            w_hf: m(hidden_size),
            w_cf: v(),
            w_xc: m(input_size),
            w_hc: m(hidden_size),
            w_xo: m(input_size),
            w_ho: m(hidden_size),
            w_co: v(),
            b_i: v(),
            b_f: v(),
            b_c: v(),
            b_o: v(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_xi.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_xi.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let (h, n) = (self.hidden_size(), self.input_size());
        let mats = [
            ("W_xi", &self.w_xi, n),
            ("W_hi", &self.w_hi, h),
            ("W_xf", &self.w_xf, n),
            ("W_hf", &self.w_hf, h),
            ("W_xc", &self.w_xc, n),
            ("W_hc", &self.w_hc, h),
            ("W_xo", &self.w_xo, n),
            ("W_ho", &self.w_ho, h),
        ];
        for (name, m, cols) in mats {
            if m.dim() != (h, cols) {
                return Err(Error::shape(name, format!("({h}, {cols})"), format!("{:?}", m.dim())));
            }
        }
        let vecs = [
            ("W_ci", &self.w_ci),
            ("W_cf", &self.w_cf),
            ("W_co", &self.w_co),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ];
        for (name, v) in vecs {
            if v.len() != h {
                return Err(Error::shape(name, h, v.len()));
            }
        }
        Ok(())
    }

    /// Runs the recurrence from h_0 = c_0 = 0 over `xs` (one
    /// `batch x input` matrix per step) and returns every h_t.
    pub fn forward(&self, xs: &[Array2<f64>]) -> Result<(Vec<Array2<f64>>, LstmTape)> {
        self.check_shapes()?;
        let Some(first) = xs.first() else {
            return Err(Error::validation("lstm input", "sequence is empty"));
        };
        let batch = first.nrows();
        let hidden = self.hidden_size();
        let mut h = Array2::zeros((batch, hidden));
        let mut c = Array2::zeros((batch, hidden));
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for (t, x) in xs.iter().enumerate() {
            if x.dim() != (batch, self.input_size()) {
                return Err(Error::shape(
                    format!("x_{}", t + 1),
                    format!("({batch}, {})", self.input_size()),
                    format!("{:?}", x.dim()),
                ));
            }
            let mut i = x.dot(&self.w_xi.t()) + h.dot(&self.w_hi.t()) + &c * &self.w_ci + &self.b_i;
            i.mapv_inplace(sigmoid);
            let mut f = x.dot(&self.w_xf.t()) + h.dot(&self.w_hf.t()) + &c * &self.w_cf + &self.b_f;
            f.mapv_inplace(sigmoid);
            let mut g = x.dot(&self.w_xc.t()) + h.dot(&self.w_hc.t()) + &self.b_c;
            g.mapv_inplace(f64::tanh);
            let c_new = &f * &c + &i * &g;
            let mut o = x.dot(&self.w_xo.t()) + h.dot(&self.w_ho.t()) + &c_new * &self.w_co + &self.b_o;
            o.mapv_inplace(sigmoid);
            let tanh_c = c_new.mapv(f64::tanh);
            let h_new = &o * &tanh_c;
            steps.push(StepCache {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new.clone()),
                i,
                f,
                g,
                o,
                c: c_new,
                tanh_c,
            });
            hs.push(h_new);
        }
        Ok((
            hs,
            LstmTape {
                input_size: self.input_size(),
                hidden_size: hidden,
                steps,
            },
        ))
    }

    /// Backpropagation through time. `dh[t]` is the loss gradient with
    /// respect to h_{t+1}; returns parameter gradients and input gradients.
    pub fn backward(&self, tape: &LstmTape, dh: &[Array2<f64>]) -> Result<(LstmParams, Vec<Array2<f64>>)> {
        if tape.input_size != self.input_size() || tape.hidden_size != self.hidden_size() {
            return Err(Error::shape(
                "lstm tape",
                format!("({}, {})", self.input_size(), self.hidden_size()),
                format!("({}, {})", tape.input_size, tape.hidden_size),
            ));
        }
        if dh.len() != tape.steps.len() {
            return Err(Error::shape("lstm output gradients", tape.steps.len(), dh.len()));
        }
        let mut grads = LstmParams::zeros(self.input_size(), self.hidden_size());
        let mut dxs = vec![Array2::zeros((0, 0)); tape.steps.len()];
        let Some(last) = tape.steps.last() else {
            return Ok((grads, dxs));
        };
        let mut dh_next = Array2::<f64>::zeros(last.h_prev.dim());
        let mut dc_next = Array2::<f64>::zeros(last.c_prev.dim());
        for (t, s) in tape.steps.iter().enumerate().rev() {
            if dh[t].dim() != s.o.dim() {
                return Err(Error::shape(format!("dh_{}", t + 1), format!("{:?}", s.o.dim()), format!("{:?}", dh[t].dim())));
            }
            let dh_t = &dh[t] + &dh_next;
            let mut da_o = &dh_t * &s.tanh_c;
            da_o.zip_mut_with(&s.o, |d, &o| *d *= o * (1.0 - o));
            let mut dc = &dh_t * &s.o;
            dc.zip_mut_with(&s.tanh_c, |d, &tc| *d *= 1.0 - tc * tc);
            dc = dc + &dc_next + &da_o * &self.w_co;

            let mut da_i = &dc * &s.g;
            da_i.zip_mut_with(&s.i, |d, &i| *d *= i * (1.0 - i));
            let mut da_f = &dc * &s.c_prev;
            da_f.zip_mut_with(&s.f, |d, &f| *d *= f * (1.0 - f));
            let mut da_g = &dc * &s.i;
            da_g.zip_mut_with(&s.g, |d, &g| *d *= 1.0 - g * g);

            grads.w_xi += &da_i.t().dot(&s.x);
            grads.w_hi += &da_i.t().dot(&s.h_prev);
            grads.w_ci += &(&da_i * &s.c_prev).sum_axis(Axis(0));
            grads.b_i += &da_i.sum_axis(Axis(0));
            grads.w_xf += &da_f.t().dot(&s.x);
            grads.w_hf += &da_f.t().dot(&s.h_prev);
            grads.w_cf += &(&da_f * &s.c_prev).sum_axis(Axis(0));
            grads.b_f += &da_f.sum_axis(Axis(0));
            grads.w_xc += &da_g.t().dot(&s.x);
            grads.w_hc += &da_g.t().dot(&s.h_prev);
            grads.b_c += &da_g.sum_axis(Axis(0));
            grads.w_xo += &da_o.t().dot(&s.x);
            grads.w_ho += &da_o.t().dot(&s.h_prev);
            grads.w_co += &(&da_o * &s.c).sum_axis(Axis(0));
            grads.b_o += &da_o.sum_axis(Axis(0));

            dc_next = &dc * &s.f + &da_i * &self.w_ci + &da_f * &self.w_cf;
            dh_next = da_i.dot(&self.w_hi) + da_f.dot(&self.w_hf) + da_g.dot(&self.w_hc) + da_o.dot(&self.w_ho);
            dxs[t] = da_i.dot(&self.w_xi) + da_f.dot(&self.w_xf) + da_g.dot(&self.w_xc) + da_o.dot(&self.w_xo);
        }
        Ok((grads, dxs))
    }

    /// Backward pass when only the final hidden state carries loss.
    pub fn backward_last(&self, tape: &LstmTape, dh_last: &Array2<f64>) -> Result<(LstmParams, Vec<Array2<f64>>)> {
        let mut dh = vec![Array2::zeros(dh_last.dim()); tape.len()];
        if let Some(last) = dh.last_mut() {
            *last = dh_last.clone();
        }
        self.backward(tape, &dh)
    }
}
