use genboot_tensor::Tensor;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Architecture, NetworkParams, ParamBlock, ParamKind};
use crate::rng::GbRng;

/// Weights are drawn iid `N(0, sd^2)`; biases start at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSpec {
    pub sd: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec { sd: 0.02 }
    }
}

pub fn init_network(arch: &dyn Architecture, init: &InitSpec, rng: &mut GbRng) -> Result<NetworkParams> {
    if !(init.sd > 0.0 && init.sd.is_finite()) {
        return Err(Error::Config(format!("init sd must be positive, got {}", init.sd)));
    }
    let normal = Normal::new(0.0, init.sd).expect("sd validated above");
    let blocks = arch
        .param_specs()
        .into_iter()
        .map(|spec| {
            let n: usize = spec.shape.iter().product();
            let data = match spec.kind {
                ParamKind::Weight => (0..n).map(|_| rng.sample(normal)).collect(),
                ParamKind::Bias => vec![0.0; n],
            };
            ParamBlock {
                name: spec.name,
                kind: spec.kind,
                value: Tensor::new(spec.shape, data).expect("shape from spec"),
            }
        })
        .collect();
    Ok(NetworkParams::new(blocks))
}
