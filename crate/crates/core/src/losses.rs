//! Training objectives.
//!
//! Every loss is expressed as a quantity to *minimize*. Each has a tape form
//! (`*_on`, used during training) and a plain-value convenience wrapper that
//! runs the same tape code on constants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::networks::{CriticVars, EncoderOutput, EncoderVars, JointCriticNet, LEAKY_SLOPE};
use crate::scalar::Scalar;

/// Default weight of the encoder term in the combined objective.
pub const DEFAULT_LAMBDA: f64 = 10.0;

/// `0.5 * ln(2 pi)`.
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Generator objective for the logistic (vanilla) GAN.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLossMode {
    /// `mean log(1 - sigmoid(fake))`, the literal minimax objective.
    Minimax,
    /// `-mean log sigmoid(fake)`.
    #[default]
    NonSaturating,
}

fn check_same<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Negative batch-mean Gaussian log-likelihood of the latents `z` under the
/// encoder's prediction: mean over rows of
/// `0.5 * M * ln(2 pi) + 0.5 * sum(logvar) + 0.5 * sum((z - mean)^2 * exp(-logvar))`.
pub fn encoder_nll_on<T: Scalar>(tape: &mut Tape<T>, z: Var, enc: EncoderVars) -> Result<Var> {
    check_same("encoder_nll", tape.value(z), tape.value(enc.enc_mean))?;
    let m = tape.value(z).cols();
    let diff = tape.sub(z, enc.enc_mean)?;
    let mut quad = tape.square(diff)?;
    if let Some(lv) = enc.logvar {
        let neg = tape.scale(lv, -T::one())?;
        let precision = tape.exp(neg)?;
        quad = tape.mul_elem(quad, precision)?;
    }
    let mut per_row = tape.row_sum(quad)?;
    if let Some(lv) = enc.logvar {
        let logdet = tape.row_sum(lv)?;
        per_row = tape.add(per_row, logdet)?;
    }
    let mean = tape.mean(per_row)?;
    let half = tape.scale(mean, T::of(0.5))?;
    tape.offset(half, T::of(HALF_LN_2PI * m as f64))
}

pub fn encoder_nll<T: Scalar>(z: &Tensor<T>, out: &EncoderOutput<T>) -> Result<T> {
    check_same("encoder_nll", z, &out.enc_mean)?;
    check_same("encoder_nll", z, &out.logvar)?;
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let enc = EncoderVars {
        enc_mean: tape.constant(out.enc_mean.clone()),
        logvar: Some(tape.constant(out.logvar.clone())),
    };
    let nll = encoder_nll_on(&mut tape, zv, enc)?;
    tape.value(nll).item()
}

/// `-[mean log sigmoid(real) + mean log(1 - sigmoid(fake))]`, via softplus.
pub fn vanilla_d_loss_on<T: Scalar>(tape: &mut Tape<T>, real: Var, fake: Var) -> Result<Var> {
    let neg_real = tape.scale(real, -T::one())?;
    let sp_real = tape.softplus(neg_real)?;
    let sp_fake = tape.softplus(fake)?;
    let a = tape.mean(sp_real)?;
    let b = tape.mean(sp_fake)?;
    tape.add(a, b)
}

pub fn vanilla_g_loss_on<T: Scalar>(
    tape: &mut Tape<T>,
    fake: Var,
    mode: GeneratorLossMode,
) -> Result<Var> {
    match mode {
        GeneratorLossMode::Minimax => {
            // log(1 - sigmoid(f)) = -softplus(f)
            let sp = tape.softplus(fake)?;
            let m = tape.mean(sp)?;
            tape.scale(m, -T::one())
        }
        GeneratorLossMode::NonSaturating => {
            let neg = tape.scale(fake, -T::one())?;
            let sp = tape.softplus(neg)?;
            tape.mean(sp)
        }
    }
}

/// `(mean(fake) - mean(real), -mean(fake))`.
pub fn wgan_losses_on<T: Scalar>(tape: &mut Tape<T>, real: Var, fake: Var) -> Result<(Var, Var)> {
    let mr = tape.mean(real)?;
    let mf = tape.mean(fake)?;
    let critic = tape.sub(mf, mr)?;
    let gen = tape.scale(mf, -T::one())?;
    Ok((critic, gen))
}

fn scores_tensor<T: Scalar>(scores: &[T]) -> Tensor<T> {
    Tensor::from_parts(vec![scores.len(), 1], scores.to_vec())
}

fn nonempty<T>(op: &'static str, s: &[T]) -> Result<()> {
    if s.is_empty() {
        return Err(invalid(format!("{op}: empty score batch")));
    }
    Ok(())
}

pub fn vanilla_d_loss<T: Scalar>(real_scores: &[T], fake_scores: &[T]) -> Result<T> {
    nonempty("vanilla_d_loss", real_scores)?;
    nonempty("vanilla_d_loss", fake_scores)?;
    let mut tape = Tape::new();
    let r = tape.constant(scores_tensor(real_scores));
    let f = tape.constant(scores_tensor(fake_scores));
    let l = vanilla_d_loss_on(&mut tape, r, f)?;
    tape.value(l).item()
}

pub fn vanilla_g_loss<T: Scalar>(fake_scores: &[T], mode: GeneratorLossMode) -> Result<T> {
    nonempty("vanilla_g_loss", fake_scores)?;
    let mut tape = Tape::new();
    let f = tape.constant(scores_tensor(fake_scores));
    let l = vanilla_g_loss_on(&mut tape, f, mode)?;
    tape.value(l).item()
}

/// Returns `(critic_loss, gen_loss)`.
pub fn wgan_losses<T: Scalar>(real_scores: &[T], fake_scores: &[T]) -> Result<(T, T)> {
    nonempty("wgan_losses", real_scores)?;
    nonempty("wgan_losses", fake_scores)?;
    let mut tape = Tape::new();
    let r = tape.constant(scores_tensor(real_scores));
    let f = tape.constant(scores_tensor(fake_scores));
    let (c, g) = wgan_losses_on(&mut tape, r, f)?;
    Ok((tape.value(c).item()?, tape.value(g).item()?))
}

/// Per-sample interpolation coefficients `t ~ U(0, 1)`.
pub fn interpolation_weights<T: Scalar>(n: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..n).map(|_| T::of(rng.random::<f64>())).collect()
}

/// `t * real + (1 - t) * fake`, row by row.
pub fn interpolate<T: Scalar>(real: &Tensor<T>, fake: &Tensor<T>, t: &[T]) -> Result<Tensor<T>> {
    check_same("gradient_penalty", real, fake)?;
    if t.len() != real.rows() {
        return Err(Error::ShapeMismatch {
            op: "gradient_penalty",
            lhs: real.shape().to_vec(),
            rhs: vec![t.len()],
        });
    }
    let cols = real.cols();
    let data = real
        .data()
        .iter()
        .zip(fake.data())
        .enumerate()
        .map(|(i, (&r, &f))| {
            let ti = t[i / cols];
            ti * r + (T::one() - ti) * f
        })
        .collect();
    Ok(Tensor::from_parts(real.shape().to_vec(), data))
}

/// Input-gradient of the critic score, `d score / d x` per row, written out in
/// closed form on the tape.
///
/// Leaky-ReLU slopes are piecewise constant, so the gradient is a product of
/// the transposed weights and the activation masks at `x`. Recording that
/// product with the masks as constants makes the input-gradient itself an
/// ordinary tape expression whose parameter gradients come from a single
/// first-order backward pass.
pub fn closed_form_input_gradient_on<T: Scalar>(
    tape: &mut Tape<T>,
    critic: &JointCriticNet<T>,
    vars: &CriticVars,
    x: Var,
) -> Result<Var> {
    let rows = tape.value(x).rows();
    let trunk = critic.trunk_on(tape, vars, x)?;
    let slope = T::of(LEAKY_SLOPE);
    let masks: Vec<Var> = trunk
        .pre_activations
        .iter()
        .map(|&a| {
            let value = tape.value(a);
            let mask = value
                .data()
                .iter()
                .map(|&v| if v > T::zero() { T::one() } else { slope })
                .collect();
            let mask = Tensor::from_parts(value.shape().to_vec(), mask);
            tape.constant(mask)
        })
        .collect();

    let ws_t = tape.transpose(vars.score.weight)?;
    let mut delta = tape.broadcast(ws_t, rows)?;
    let last = masks.len() - 1;
    delta = tape.mul_elem(delta, masks[last])?;
    for layer in (1..vars.trunk.len()).rev() {
        let wt = tape.transpose(vars.trunk[layer].weight)?;
        delta = tape.matmul(delta, wt)?;
        delta = tape.mul_elem(delta, masks[layer - 1])?;
    }
    let w0t = tape.transpose(vars.trunk[0].weight)?;
    tape.matmul(delta, w0t)
}

/// `mean_i (||d score / d x_hat_i|| - 1)^2` at `x_hat = t * real + (1 - t) * fake`.
pub fn gradient_penalty_on<T: Scalar>(
    tape: &mut Tape<T>,
    critic: &JointCriticNet<T>,
    vars: &CriticVars,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    t: &[T],
) -> Result<Var> {
    let x_hat = interpolate(real, fake, t)?;
    let xv = tape.constant(x_hat);
    let grad = closed_form_input_gradient_on(tape, critic, vars, xv)?;
    let sq = tape.square(grad)?;
    let norm2 = tape.row_sum(sq)?;
    let norm = tape.sqrt(norm2)?;
    let gap = tape.offset(norm, -T::one())?;
    let gap2 = tape.square(gap)?;
    tape.mean(gap2)
}

/// Gradient penalty value with interpolation weights drawn from `seed`.
pub fn gradient_penalty<T: Scalar>(
    critic: &JointCriticNet<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    seed: u64,
) -> Result<T> {
    check_same("gradient_penalty", real, fake)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = interpolation_weights(real.rows(), &mut rng);
    let mut tape = Tape::new();
    let vars = critic.bind(&mut tape, false);
    let p = gradient_penalty_on(&mut tape, critic, &vars, real, fake, &t)?;
    tape.value(p).item()
}

/// `d score / d x` for each row of `x`, via a backward pass with `x` as the tracked leaf.
pub fn input_gradient<T: Scalar>(critic: &JointCriticNet<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let vars = critic.bind(&mut tape, false);
    let xv = tape.param(x.clone());
    let trunk = critic.trunk_on(&mut tape, &vars, xv)?;
    let s = critic.score_on(&mut tape, &vars, trunk.output)?;
    // Rows are independent, so the gradient of the sum separates per row.
    let total = tape.sum(s)?;
    Ok(tape.backward(total)?.wrt(xv))
}

/// Components of one side of the combined objective.
///
/// `total = adversarial_term + lambda * encoder_term + penalty_term`, where
/// `penalty_term` already includes the penalty coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adversarial_term: f64,
    pub encoder_term: f64,
    pub penalty_term: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Combines the adversarial loss, the encoder NLL and the (weighted) penalty.
pub fn gael_objective(
    adversarial_term: f64,
    encoder_term: f64,
    penalty_term: f64,
    lambda: f64,
) -> Result<LossBreakdown> {
    if !(lambda >= 0.0) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    Ok(LossBreakdown {
        adversarial_term,
        encoder_term,
        penalty_term,
        lambda,
        total: adversarial_term + lambda * encoder_term + penalty_term,
    })
}
