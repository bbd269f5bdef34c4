use genboot_tensor::{gradient, Expr, Tensor};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gan::arch::{Discriminator, Generator};
use crate::nn::ParamLeaves;
use crate::rng::GbRng;

/// Probabilities are clamped to this distance from 0 and 1 before logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Critic loss and its two parts, all scalar expressions.
#[derive(Clone, Debug)]
pub struct CriticLoss {
    pub total: Expr,
    /// `mean D(fake) - mean D(real)`.
    pub wasserstein: Expr,
    /// `mean (|grad D(x_hat)| - 1)^2`, before weighting.
    pub penalty: Expr,
}

fn check_pair(real: &Tensor, fake: &Tensor) -> Result<()> {
    if real.rank() != 2 || real.shape() != fake.shape() {
        return Err(Error::Config(format!(
            "real batch {:?} and fake batch {:?} must both be (batch, len) and equal",
            real.shape(),
            fake.shape()
        )));
    }
    Ok(())
}

/// Row-wise convex combinations `a_i * real_i + (1 - a_i) * fake_i` with one
/// `a_i ~ U(0, 1)` per row.
pub fn interpolate(real: &Tensor, fake: &Tensor, rng: &mut GbRng) -> Result<Tensor> {
    check_pair(real, fake)?;
    let len = real.shape()[1];
    let mut out = Vec::with_capacity(real.len());
    for (r, f) in real.data().chunks(len).zip(fake.data().chunks(len)) {
        let a: f64 = rng.random();
        out.extend(r.iter().zip(f).map(|(&r, &f)| a * r + (1.0 - a) * f));
    }
    Ok(Tensor::new(real.shape().to_vec(), out)?)
}

/// Penalised critic loss for any critic mapping `(batch, len)` paths to
/// per-path scores.
pub fn critic_loss<F>(critic: F, real: &Tensor, fake: &Tensor, lambda: f64, rng: &mut GbRng) -> Result<CriticLoss>
where
    F: Fn(&Expr) -> Result<Expr>,
{
    check_pair(real, fake)?;
    let x_hat = Expr::constant(interpolate(real, fake, rng)?);
    let d_real = critic(&Expr::constant(real.clone()))?;
    let d_fake = critic(&Expr::constant(fake.clone()))?;
    let wasserstein = d_fake.mean().sub(&d_real.mean())?;

    // Critic scores are per-row, so the gradient of their sum holds each
    // row's own input gradient.
    let d_hat = critic(&x_hat)?;
    let grad = gradient(&d_hat.sum(), std::slice::from_ref(&x_hat))?.remove(0);
    let penalty = grad.l2_norm_rows()?.add_scalar(-1.0).square().mean();
    let total = wasserstein.add(&penalty.scale(lambda))?;
    Ok(CriticLoss {
        total,
        wasserstein,
        penalty,
    })
}

pub fn wgan_discriminator_loss(
    disc: &Discriminator,
    disc_leaves: &ParamLeaves,
    real: &Tensor,
    fake: &Tensor,
    lambda: f64,
    rng: &mut GbRng,
) -> Result<CriticLoss> {
    critic_loss(|x| disc.build(disc_leaves, x), real, fake, lambda, rng)
}

/// `-mean D(fake)` for any critic.
pub fn generator_loss<F>(critic: F, fake: &Expr) -> Result<Expr>
where
    F: Fn(&Expr) -> Result<Expr>,
{
    Ok(critic(fake)?.mean().neg())
}

/// Generator loss on a `(batch, rows, noise_dim)` noise tensor, as an
/// expression in both parameter sets; differentiate it with respect to the
/// generator leaves only.
pub fn wgan_generator_loss(
    gen: &Generator,
    gen_leaves: &ParamLeaves,
    disc: &Discriminator,
    disc_leaves: &ParamLeaves,
    noise: &Tensor,
) -> Result<Expr> {
    let fake = gen.build(gen_leaves, &Expr::constant(noise.clone()))?;
    generator_loss(|x| disc.build(disc_leaves, x), &fake)
}

/// Losses of the original minimax objective. `discriminator` is the
/// objective the critic ascends; training descends its negation.
#[derive(Clone, Debug)]
pub struct BasicGanLosses {
    pub discriminator: Expr,
    pub generator: Expr,
}

fn clamped_prob(logits: Expr) -> Expr {
    logits.sigmoid().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `mean log(1 - D(fake))` of the original objective, with `D` the clamped
/// sigmoid of the critic's logits.
pub fn basic_generator_loss<F>(critic: F, fake: &Expr) -> Result<Expr>
where
    F: Fn(&Expr) -> Result<Expr>,
{
    Ok(clamped_prob(critic(fake)?).affine(-1.0, 1.0).log().mean())
}

/// Original GAN losses for a critic producing logits; probabilities are the
/// clamped sigmoid of the logits.
pub fn basic_gan_losses_from<F>(critic: F, real: &Expr, fake: &Expr) -> Result<BasicGanLosses>
where
    F: Fn(&Expr) -> Result<Expr>,
{
    if real.shape() != fake.shape() {
        return Err(Error::Config(format!(
            "real batch {:?} and fake batch {:?} differ",
            real.shape(),
            fake.shape()
        )));
    }
    let p_real = clamped_prob(critic(real)?);
    let log_not_fake = basic_generator_loss(&critic, fake)?;
    Ok(BasicGanLosses {
        discriminator: p_real.log().mean().add(&log_not_fake)?,
        generator: log_not_fake,
    })
}

pub fn basic_gan_losses(
    disc: &Discriminator,
    disc_leaves: &ParamLeaves,
    gen: &Generator,
    gen_leaves: &ParamLeaves,
    real: &Tensor,
    noise: &Tensor,
) -> Result<BasicGanLosses> {
    let fake = gen.build(gen_leaves, &Expr::constant(noise.clone()))?;
    basic_gan_losses_from(|x| disc.build(disc_leaves, x), &Expr::constant(real.clone()), &fake)
}
