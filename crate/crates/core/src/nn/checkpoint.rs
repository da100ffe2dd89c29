use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "mmsched-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Version-tagged JSON document of named flat arrays with their shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params<P: ParamSet + ?Sized>(params: &P) -> Self {
        let mut tensors = Vec::new();
        params.visit(&mut |name, shape, data| {
            tensors.push(NamedTensor {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            tensors,
        }
    }

    /// Copies values into `params`; names and shapes must match exactly.
    pub fn restore<P: ParamSet + ?Sized>(&self, params: &mut P) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::validation(
                "checkpoint",
                format!("unsupported {} v{}", self.format, self.version),
            ));
        }
        let mut expected = Vec::new();
        params.visit(&mut |name, shape, _| expected.push((name.to_string(), shape.to_vec())));
        if expected.len() != self.tensors.len() {
            return Err(Error::shape("checkpoint tensors", expected.len(), self.tensors.len()));
        }
        for ((name, shape), t) in expected.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::shape(name.clone(), format!("{shape:?}"), format!("{} {:?}", t.name, t.shape)));
            }
        }
        let mut k = 0;
        params.visit_mut(&mut |_, d| {
            d.copy_from_slice(&self.tensors[k].data);
            k += 1;
        });
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LstmParams, MlpParams};
    use crate::rng::Rng64;

    #[test]
    fn lstm_checkpoint_restores_exactly() {
        let mut rng = Rng64::new(2);
        let p = LstmParams::new(3, 5, &mut rng);
        let ck = Checkpoint::from_params(&p);
        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let mut q = LstmParams::zeros(3, 5);
        back.restore(&mut q).unwrap();
        assert_eq!(p, q);
        assert_eq!(ck.tensors[0].name, "w_xi");
        assert_eq!(ck.tensors[0].shape, vec![5, 3]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = Rng64::new(2);
        let p = MlpParams::new(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng);
        let mut q = MlpParams::new(&[2, 3, 1], Activation::Relu, Activation::Identity, &mut rng);
        assert!(Checkpoint::from_params(&p).restore(&mut q).is_err());
    }
}
