use std::io::Write;
use std::time::Instant;

use genboot_tensor::{evaluate, gradient, Bindings, Expr, Tensor};

use crate::error::{Error, Result};
use crate::gan::arch::{Discriminator, Generator};
use crate::gan::config::{GanConfig, Objective};
use crate::gan::loss::{basic_gan_losses_from, basic_generator_loss, generator_loss, wgan_discriminator_loss};
use crate::gan::noise::noise_batch;
use crate::nn::{adam_step, init_network, AdamState, NetworkParams};
use crate::rng::GbRng;

/// Source of real training blocks.
pub trait BatchSupplier {
    fn block_len(&self) -> usize;

    /// `(n, block_len)` batch of real blocks.
    fn next_batch(&mut self, n: usize, rng: &mut GbRng) -> Result<Tensor>;
}

/// One trace row. Negative steps are the critic-only warm-up updates;
/// positive steps are outer iterations and report their last critic update
/// and last generator update.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: i64,
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub penalty: Option<f64>,
    pub grad_norm_d: Option<f64>,
    pub grad_norm_g: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainingTrace {
    /// CSV with columns `step,loss_d,loss_g,penalty,wall_ms`, preceded by
    /// `comments` as `#` lines. Missing values are left empty.
    pub fn write_csv(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "step,loss_d,loss_g,penalty,wall_ms")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.step,
                opt(r.loss_d),
                opt(r.loss_g),
                opt(r.penalty),
                opt(r.wall_ms)
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticStep {
    pub loss: f64,
    pub penalty: Option<f64>,
    pub grad_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorStep {
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub generator: NetworkParams,
    pub discriminator: NetworkParams,
    pub trace: TrainingTrace,
}

fn grad_norm(grads: &[Tensor]) -> f64 {
    grads.iter().flat_map(|g| g.data()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Adversarial training state: both networks, their optimisers and the
/// random stream.
pub struct Trainer {
    config: GanConfig,
    generator: Generator,
    discriminator: Discriminator,
    gen_params: NetworkParams,
    disc_params: NetworkParams,
    gen_adam: AdamState,
    disc_adam: AdamState,
    block_len: usize,
    rng: GbRng,
    step: i64,
    trace: TrainingTrace,
    started: Instant,
}

impl Trainer {
    /// Fresh networks, generator first, both drawn from `rng`.
    pub fn new(config: GanConfig, block_len: usize, mut rng: GbRng) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(&config);
        let discriminator = Discriminator::new(&config);
        let gen_params = init_network(&generator, &config.init, &mut rng)?;
        let disc_params = init_network(&discriminator, &config.init, &mut rng)?;
        Self::from_params(config, gen_params, disc_params, block_len, rng)
    }

    pub fn from_params(
        config: GanConfig,
        gen_params: NetworkParams,
        disc_params: NetworkParams,
        block_len: usize,
        rng: GbRng,
    ) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(&config);
        let discriminator = Discriminator::new(&config);
        if block_len < discriminator.min_len() {
            return Err(Error::TooShort {
                len: block_len,
                reason: format!("training blocks must have length >= {}", discriminator.min_len()),
            });
        }
        Ok(Trainer {
            gen_adam: AdamState::new(&gen_params, config.adam),
            disc_adam: AdamState::new(&disc_params, config.adam),
            config,
            generator,
            discriminator,
            gen_params,
            disc_params,
            block_len,
            rng,
            step: 0,
            trace: TrainingTrace::default(),
            started: Instant::now(),
        })
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn gen_params(&self) -> &NetworkParams {
        &self.gen_params
    }

    pub fn disc_params(&self) -> &NetworkParams {
        &self.disc_params
    }

    pub fn gen_adam(&self) -> &AdamState {
        &self.gen_adam
    }

    pub fn disc_adam(&self) -> &AdamState {
        &self.disc_adam
    }

    pub fn trace(&self) -> &TrainingTrace {
        &self.trace
    }

    pub fn rng(&self) -> &GbRng {
        &self.rng
    }

    fn fake_noise(&mut self) -> Tensor {
        noise_batch(
            self.config.batch_size,
            self.block_len,
            self.generator.window(),
            self.config.noise_dim,
            &mut self.rng,
        )
    }

    fn non_finite(&self) -> Error {
        Error::NonFiniteLoss {
            step: self.step,
            trace: Box::new(self.trace.clone()),
        }
    }

    /// One critic update on a fresh real batch and a fresh fake batch.
    pub fn discriminator_update(&mut self, supplier: &mut dyn BatchSupplier) -> Result<CriticStep> {
        let n = self.config.batch_size;
        let real = supplier.next_batch(n, &mut self.rng)?;
        if real.shape() != [n, self.block_len] {
            return Err(Error::Config(format!(
                "batch supplier returned {:?}, expected [{n}, {}]",
                real.shape(),
                self.block_len
            )));
        }
        let noise = self.fake_noise();
        let fake = self.generator.generate_batch(&self.gen_params, &noise)?;

        let leaves = self.disc_params.leaves();
        let disc = &self.discriminator;
        let (loss, penalty) = match self.config.objective {
            Objective::WganGp => {
                let l = wgan_discriminator_loss(disc, &leaves, &real, &fake, self.config.lambda, &mut self.rng)?;
                (l.total, Some(l.penalty))
            }
            Objective::BasicGan => {
                let l =
                    basic_gan_losses_from(|x| disc.build(&leaves, x), &Expr::constant(real), &Expr::constant(fake))?;
                (l.discriminator.neg(), None)
            }
        };
        let grads = gradient(&loss, leaves.all())?;
        let mut roots = vec![loss];
        roots.extend(penalty.iter().cloned());
        roots.extend(grads);
        let mut values = evaluate(&roots, &self.disc_params.bindings())?.into_iter();
        let loss = values.next().expect("loss root").item();
        let penalty = penalty.map(|_| values.next().expect("penalty root").item());
        let grads: Vec<Tensor> = values.collect();
        if !loss.is_finite() || penalty.is_some_and(|p| !p.is_finite()) {
            return Err(self.non_finite());
        }
        adam_step(&mut self.disc_params, &grads, &mut self.disc_adam, self.config.lr_d)?;
        Ok(CriticStep {
            loss,
            penalty,
            grad_norm: grad_norm(&grads),
        })
    }

    /// One generator update on a fresh fake batch; the critic is held fixed.
    pub fn generator_update(&mut self) -> Result<GeneratorStep> {
        let noise = self.fake_noise();
        let gen_leaves = self.gen_params.leaves_with_prefix("gen/");
        let disc_leaves = self.disc_params.leaves_with_prefix("disc/");
        let fake = self.generator.build(&gen_leaves, &Expr::constant(noise))?;
        let disc = &self.discriminator;
        let critic = |x: &Expr| disc.build(&disc_leaves, x);
        let loss = match self.config.objective {
            Objective::WganGp => generator_loss(critic, &fake)?,
            Objective::BasicGan => basic_generator_loss(critic, &fake)?,
        };
        let grads = gradient(&loss, gen_leaves.all())?;
        let mut roots = vec![loss];
        roots.extend(grads);
        let mut bindings = Bindings::new();
        self.gen_params.bind_with_prefix("gen/", &mut bindings);
        self.disc_params.bind_with_prefix("disc/", &mut bindings);
        let mut values = evaluate(&roots, &bindings)?.into_iter();
        let loss = values.next().expect("loss root").item();
        let grads: Vec<Tensor> = values.collect();
        if !loss.is_finite() {
            return Err(self.non_finite());
        }
        adam_step(&mut self.gen_params, &grads, &mut self.gen_adam, self.config.lr_g)?;
        Ok(GeneratorStep {
            loss,
            grad_norm: grad_norm(&grads),
        })
    }

    fn wall_ms(&self) -> Option<f64> {
        self.config
            .record_wall_time
            .then(|| self.started.elapsed().as_secs_f64() * 1e3)
    }

    /// Warm-up critic updates, then the configured number of outer steps.
    pub fn run(&mut self, supplier: &mut dyn BatchSupplier) -> Result<()> {
        let n_init = self.config.n_init as i64;
        for i in 0..n_init {
            self.step = i - n_init;
            let d = self.discriminator_update(supplier)?;
            self.trace.records.push(TraceRecord {
                step: self.step,
                loss_d: Some(d.loss),
                loss_g: None,
                penalty: d.penalty,
                grad_norm_d: Some(d.grad_norm),
                grad_norm_g: None,
                wall_ms: self.wall_ms(),
            });
        }
        for s in 1..=self.config.total_steps as i64 {
            self.step = s;
            let mut d = None;
            for _ in 0..self.config.n_discriminator {
                d = Some(self.discriminator_update(supplier)?);
            }
            let mut g = None;
            for _ in 0..self.config.n_generator {
                g = Some(self.generator_update()?);
            }
            self.trace.records.push(TraceRecord {
                step: s,
                loss_d: d.map(|d| d.loss),
                loss_g: g.map(|g| g.loss),
                penalty: d.and_then(|d| d.penalty),
                grad_norm_d: d.map(|d| d.grad_norm),
                grad_norm_g: g.map(|g| g.grad_norm),
                wall_ms: self.wall_ms(),
            });
        }
        Ok(())
    }

    pub fn into_output(self) -> (TrainOutput, GbRng) {
        (
            TrainOutput {
                generator: self.gen_params,
                discriminator: self.disc_params,
                trace: self.trace,
            },
            self.rng,
        )
    }
}

/// Initialises both networks from `rng` and trains them on blocks from
/// `supplier`. `rng` is left where training stopped.
pub fn train(config: &GanConfig, supplier: &mut dyn BatchSupplier, rng: &mut GbRng) -> Result<TrainOutput> {
    let mut trainer = Trainer::new(config.clone(), supplier.block_len(), rng.clone())?;
    trainer.run(supplier)?;
    let (out, rest) = trainer.into_output();
    *rng = rest;
    Ok(out)
}
