use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::nn::{visit_mut_prefixed, visit_prefixed, Activation, LstmParams, LstmTape, MlpParams, MlpTape, ParamSet};
use crate::rng::Rng64;

/// LSTM over a fixed window of observations, then an MLP head with tanh
/// outputs in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNet {
    pub lstm: LstmParams,
    pub head: MlpParams,
    pub window: usize,
}

#[derive(Debug, Clone)]
pub struct ActorTape {
    lstm: LstmTape,
    head: MlpTape,
}

impl ParamSet for ActorNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed("lstm", &self.lstm, f);
        visit_prefixed("head", &self.head, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_mut_prefixed("lstm", &mut self.lstm, f);
        visit_mut_prefixed("head", &mut self.head, f);
    }
}

impl ActorNet {
    pub fn new(obs_len: usize, hidden: usize, scores: usize, window: usize, rng: &mut Rng64) -> Self {
        let mut head = MlpParams::new(&[hidden, hidden, scores], Activation::Relu, Activation::Tanh, rng);
        // small final layer keeps early scores away from tanh saturation
        let last = head.layers.last_mut().expect("two layers");
        last.weight.mapv_inplace(|w| w * 0.1);
        last.bias.mapv_inplace(|b| b * 0.1);
        ActorNet {
            lstm: LstmParams::new(obs_len, hidden, rng),
            head,
            window: window.max(1),
        }
    }

    pub fn obs_len(&self) -> usize {
        self.lstm.input_size()
    }

    pub fn score_len(&self) -> usize {
        self.head.output_size()
    }

    /// Zero-pads a history at the front to the window, keeping its most
    /// recent entries. The result is `window * obs_len` long.
    pub fn pad_window(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.obs_len();
        let keep = history.len().min(self.window);
        let mut out = vec![0.0; (self.window - keep) * d];
        for obs in &history[history.len() - keep..] {
            if obs.len() != d {
                return Err(Error::shape("observation", d, obs.len()));
            }
            out.extend_from_slice(obs);
        }
        Ok(out)
    }

    fn inputs(&self, windows: &[&[f64]]) -> Result<Vec<Array2<f64>>> {
        let d = self.obs_len();
        if let Some(w) = windows.iter().find(|w| w.len() != self.window * d) {
            return Err(Error::shape("observation window", self.window * d, w.len()));
        }
        Ok((0..self.window)
            .map(|t| Array2::from_shape_fn((windows.len(), d), |(b, j)| windows[b][t * d + j]))
            .collect())
    }

    /// Batched scores for padded windows.
    pub fn forward(&self, windows: &[&[f64]]) -> Result<(Array2<f64>, ActorTape)> {
        let (hs, lstm) = self.lstm.forward(&self.inputs(windows)?)?;
        let (out, head) = self.head.forward(hs.last().expect("window >= 1"))?;
        Ok((out, ActorTape { lstm, head }))
    }

    /// Scores for one history (any length; padded or cut to the window).
    pub fn act(&self, history: &[Vec<f64>]) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Err(Error::validation("history", "needs at least one observation"));
        }
        let w = self.pad_window(history)?;
        Ok(self.forward(&[&w])?.0.row(0).to_vec())
    }

    pub fn backward(&self, tape: &ActorTape, dscores: &Array2<f64>) -> Result<ActorNet> {
        let (head, dh) = self.head.backward(&tape.head, dscores)?;
        let (lstm, _) = self.lstm.backward_last(&tape.lstm, &dh)?;
        Ok(ActorNet {
            lstm,
            head,
            window: self.window,
        })
    }
}

/// MLP on `[observation, raw scores]` with a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub mlp: MlpParams,
    pub obs_len: usize,
}

impl ParamSet for CriticNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        visit_prefixed("mlp", &self.mlp, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        visit_mut_prefixed("mlp", &mut self.mlp, f);
    }
}

impl CriticNet {
    pub fn new(obs_len: usize, action_len: usize, hidden: usize, rng: &mut Rng64) -> Self {
        CriticNet {
            mlp: MlpParams::new(&[obs_len + action_len, hidden, hidden, 1], Activation::Relu, Activation::Identity, rng),
            obs_len,
        }
    }

    pub fn action_len(&self) -> usize {
        self.mlp.input_size() - self.obs_len
    }

    fn join(&self, obs: &Array2<f64>, actions: &Array2<f64>) -> Result<Array2<f64>> {
        if obs.ncols() != self.obs_len {
            return Err(Error::shape("critic observation", self.obs_len, obs.ncols()));
        }
        if actions.ncols() != self.action_len() {
            return Err(Error::shape("critic action", self.action_len(), actions.ncols()));
        }
        if obs.nrows() != actions.nrows() {
            return Err(Error::shape("critic batch", obs.nrows(), actions.nrows()));
        }
        Ok(ndarray::concatenate![ndarray::Axis(1), *obs, *actions])
    }

    /// Values, one per row.
    pub fn forward(&self, obs: &Array2<f64>, actions: &Array2<f64>) -> Result<(Array2<f64>, MlpTape)> {
        self.mlp.forward(&self.join(obs, actions)?)
    }

    pub fn value(&self, obs: &Array2<f64>, actions: &Array2<f64>) -> Result<Array2<f64>> {
        self.mlp.infer(&self.join(obs, actions)?)
    }

    /// Parameter gradients and the gradient with respect to the actions.
    pub fn backward(&self, tape: &MlpTape, dq: &Array2<f64>) -> Result<(CriticNet, Array2<f64>)> {
        let (mlp, dx) = self.mlp.backward(tape, dq)?;
        let da = dx.slice(s![.., self.obs_len..]).to_owned();
        Ok((CriticNet { mlp, obs_len: self.obs_len }, da))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{fill, grad_check};

    #[test]
    fn zero_actor_scores_zero() {
        let mut rng = Rng64::new(0);
        let mut a = ActorNet::new(5, 4, 3, 8, &mut rng);
        fill(&mut a, 0.0);
        assert_eq!(a.act(&[vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn short_history_equals_explicit_padding() {
        let mut rng = Rng64::new(1);
        let a = ActorNet::new(3, 4, 2, 4, &mut rng);
        let obs = vec![0.5, -0.2, 0.9];
        let short = a.act(&[obs.clone()]).unwrap();
        let padded = a.act(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], obs.clone()]).unwrap();
        assert_eq!(short, padded);
        assert_eq!(a.act(&[obs.clone()]).unwrap(), short);
        let long: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; 3]).collect();
        assert_eq!(a.act(&long).unwrap(), a.act(&long[2..]).unwrap());
    }

    #[test]
    fn actor_errors() {
        let mut rng = Rng64::new(1);
        let a = ActorNet::new(3, 4, 2, 4, &mut rng);
        assert!(a.act(&[]).is_err());
        assert!(a.act(&[vec![0.0; 2]]).is_err());
        assert!(a.forward(&[&[0.0; 5]]).is_err());
    }

    #[test]
    fn actor_gradient_check() {
        let mut rng = Rng64::new(2);
        let a = ActorNet::new(3, 3, 2, 3, &mut rng);
        let w1: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin()).collect();
        let w2: Vec<f64> = (0..9).map(|i| (i as f64 * 0.91).cos()).collect();
        let windows: Vec<&[f64]> = vec![&w1, &w2];
        let weights = Array2::from_shape_vec((2, 2), vec![0.3, -1.0, 0.7, 0.2]).unwrap();
        let loss = |net: &ActorNet| -> Result<f64> { Ok((net.forward(&windows)?.0 * &weights).sum()) };
        let (_, tape) = a.forward(&windows).unwrap();
        let g = a.backward(&tape, &weights).unwrap();
        assert!(grad_check(&a, &g, loss, 1e-5).unwrap() < 1e-5);
    }

    #[test]
    fn critic_gradient_check() {
        let mut rng = Rng64::new(3);
        let c = CriticNet::new(3, 2, 5, &mut rng);
        let obs = Array2::from_shape_vec((2, 3), vec![0.1, 0.5, -0.3, 0.9, -0.7, 0.2]).unwrap();
        let act = Array2::from_shape_vec((2, 2), vec![0.4, -0.6, 0.8, 0.1]).unwrap();
        let (_, tape) = c.forward(&obs, &act).unwrap();
        let (g, da) = c.backward(&tape, &Array2::ones((2, 1))).unwrap();
        let err = grad_check(&c, &g, |n| Ok(n.value(&obs, &act)?.sum()), 1e-5).unwrap();
        assert!(err < 1e-5);
        // action gradient by central differences
        for b in 0..2 {
            for j in 0..2 {
                let mut hi = act.clone();
                let mut lo = act.clone();
                hi[[b, j]] += 1e-6;
                lo[[b, j]] -= 1e-6;
                let fd = (c.value(&obs, &hi).unwrap().sum() - c.value(&obs, &lo).unwrap().sum()) / 2e-6;
                assert!((fd - da[[b, j]]).abs() < 1e-6);
            }
        }
        assert!(c.forward(&obs, &Array2::zeros((2, 3))).is_err());
    }
}
