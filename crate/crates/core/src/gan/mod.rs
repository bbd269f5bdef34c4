//! Temporal convolution generator and critic, adversarial losses and the
//! training loop.

mod arch;
pub mod config;
mod loss;
mod noise;
mod train;

use std::io::{Read, Write};

use rand::SeedableRng;

pub use arch::{receptive_field, Discriminator, Generator};
pub use config::{DiscriminatorArch, GanConfig, GeneratorArch, Objective};
pub use loss::{
    basic_gan_losses, basic_gan_losses_from, basic_generator_loss, critic_loss, generator_loss, interpolate,
    wgan_discriminator_loss, wgan_generator_loss, BasicGanLosses, CriticLoss, PROB_CLAMP,
};
pub use noise::{noise_batch, NoiseBlock};
pub use train::{train, BatchSupplier, CriticStep, GeneratorStep, TraceRecord, TrainOutput, Trainer, TrainingTrace};

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, NetworkParams};
use crate::path::SamplePath;
use crate::rng::GbRng;

/// Runs the generator over `noise` and returns the generated path.
pub fn generate(config: &GanConfig, gen_params: &NetworkParams, noise: &NoiseBlock) -> Result<SamplePath> {
    Generator::new(config).generate(gen_params, noise)
}

/// Critic score of one path.
pub fn discriminate(config: &GanConfig, disc_params: &NetworkParams, path: &SamplePath) -> Result<f64> {
    Discriminator::new(config).score(disc_params, path)
}

/// Everything needed to resume or sample from a trained model.
#[derive(Clone, Debug)]
pub struct GanModel {
    pub config: GanConfig,
    pub generator: NetworkParams,
    pub discriminator: NetworkParams,
    pub rng: GbRng,
}

const GEN_PREFIX: &str = "gen/";
const DISC_PREFIX: &str = "disc/";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(s.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}

impl GanModel {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut ck = Checkpoint::default();
        let config = serde_json::to_string(&self.config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.metadata.insert("config".into(), config);
        ck.metadata.insert("rng.seed".into(), hex(&self.rng.get_seed()));
        ck.metadata
            .insert("rng.stream".into(), self.rng.get_stream().to_string());
        ck.metadata
            .insert("rng.word_pos".into(), self.rng.get_word_pos().to_string());
        ck.push_network(GEN_PREFIX, &self.generator);
        ck.push_network(DISC_PREFIX, &self.discriminator);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta = |k: &str| {
            ck.metadata
                .get(k)
                .ok_or_else(|| Error::Checkpoint(format!("missing metadata `{k}`")))
        };
        let config: GanConfig =
            serde_json::from_str(meta("config")?).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
        config.validate()?;
        let seed = unhex(meta("rng.seed")?).ok_or_else(|| Error::Checkpoint("bad rng.seed".into()))?;
        let stream: u64 = meta("rng.stream")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad rng.stream".into()))?;
        let word_pos: u128 = meta("rng.word_pos")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad rng.word_pos".into()))?;
        let mut rng = GbRng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);

        let model = GanModel {
            generator: ck.network(GEN_PREFIX),
            discriminator: ck.network(DISC_PREFIX),
            rng,
            config,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        use crate::nn::Architecture;
        let pairs: [(&str, Vec<_>, &NetworkParams); 2] = [
            ("generator", Generator::new(&self.config).param_specs(), &self.generator),
            (
                "discriminator",
                Discriminator::new(&self.config).param_specs(),
                &self.discriminator,
            ),
        ];
        for (who, specs, params) in pairs {
            let ok = specs.len() == params.blocks().len()
                && specs
                    .iter()
                    .zip(params.blocks())
                    .all(|(s, b)| s.name == b.name && s.shape == b.value.shape());
            if !ok {
                return Err(Error::Checkpoint(format!(
                    "{who} blocks do not match the stored config"
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        self.to_checkpoint()?.write_to(w)
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read_from(r)?)
    }
}
