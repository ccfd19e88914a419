//! The adversarial encoder training loop, checkpoints, and post-training
//! encoding and generation.
//!
//! Each step runs `n_critic` critic/encoder updates followed by one
//! generator update. The encoder term only ever sees generated samples,
//! whose latent codes are known; real data never enters it.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::data::{sample_prior, sample_prior_with, ToyGmmSpec};
use crate::error::{invalid, Error, Result};
use crate::gmm::GmmModel;
use crate::losses::{
    encoder_nll_on, gradient_penalty_on, interpolation_weights, vanilla_d_loss_on,
    vanilla_g_loss_on, wgan_losses_on, GeneratorLossMode, DEFAULT_LAMBDA,
};
use crate::metrics::{mode_metrics, ModeMetrics, DEFAULT_MIN_FRAC};
use crate::networks::{CriticArch, CriticRecord, GeneratorNet, GeneratorRecord, JointCriticNet};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GanKind {
    Vanilla,
    #[default]
    WganGp,
}

impl GanKind {
    pub fn default_n_critic(self) -> usize {
        match self {
            GanKind::Vanilla => 1,
            GanKind::WganGp => 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gan_kind: GanKind,
    /// Weight of the encoder term.
    pub lambda: f64,
    pub learn_sigma: bool,
    /// Also add the encoder term to the generator objective.
    pub couple_generator_to_encoder_loss: bool,
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub batch_size: usize,
    pub n_critic: usize,
    pub total_steps: u64,
    pub adam: AdamConfig,
    pub gp_coefficient: f64,
    pub generator_loss: GeneratorLossMode,
    pub seed: u64,
    /// Checkpoint cadence in steps; 0 disables intermediate checkpoints.
    pub checkpoint_every: u64,
    /// Mode-coverage snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: u64,
    pub snapshot_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_kind(GanKind::WganGp)
    }
}

impl TrainConfig {
    pub fn for_kind(gan_kind: GanKind) -> Self {
        Self {
            gan_kind,
            lambda: DEFAULT_LAMBDA,
            learn_sigma: false,
            couple_generator_to_encoder_loss: false,
            latent_dim: 2,
            generator_hidden: vec![128, 128, 128],
            critic_hidden: vec![128, 128, 128],
            batch_size: 256,
            n_critic: gan_kind.default_n_critic(),
            total_steps: 30_000,
            adam: AdamConfig::default(),
            gp_coefficient: 10.0,
            generator_loss: GeneratorLossMode::default(),
            seed: 0,
            checkpoint_every: 0,
            snapshot_every: 100,
            snapshot_samples: 5000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda must be a finite non-negative number"));
        }
        if self.batch_size < 2 {
            return Err(invalid("batch_size must be at least 2"));
        }
        if self.n_critic == 0 {
            return Err(invalid("n_critic must be at least 1"));
        }
        if self.latent_dim == 0 {
            return Err(invalid("latent_dim must be positive"));
        }
        if self.critic_hidden.is_empty() || self.critic_hidden.contains(&0) || self.generator_hidden.contains(&0) {
            return Err(invalid("hidden widths must be positive and the critic needs a trunk"));
        }
        if !(self.gp_coefficient >= 0.0) || !self.gp_coefficient.is_finite() {
            return Err(invalid("gp_coefficient must be a finite non-negative number"));
        }
        let a = self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.epsilon > 0.0) {
            return Err(invalid("invalid optimizer hyperparameters"));
        }
        Ok(())
    }

    fn generator_widths(&self, data_dim: usize) -> Vec<usize> {
        let mut w = vec![self.latent_dim];
        w.extend(&self.generator_hidden);
        w.push(data_dim);
        w
    }

    fn critic_arch(&self, data_dim: usize) -> CriticArch {
        CriticArch {
            data_dim,
            hidden: self.critic_hidden.clone(),
            latent_dim: self.latent_dim,
            learn_sigma: self.learn_sigma,
        }
    }
}

/// Known mode centers used for coverage snapshots during training.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeProbe<T> {
    pub centers: Tensor<T>,
    pub sigma: f64,
    pub min_frac: f64,
}

impl<T: Scalar> ModeProbe<T> {
    pub fn from_spec(spec: &ToyGmmSpec) -> Self {
        Self {
            centers: spec.centers(),
            sigma: spec.mode_std,
            min_frac: DEFAULT_MIN_FRAC,
        }
    }
}

/// One row of the metric log. Snapshot fields are set every `snapshot_every` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    /// Adversarial critic loss of the last critic update.
    pub adv: f64,
    /// Encoder negative log-likelihood (unweighted) of the last critic update.
    pub enc: f64,
    /// Gradient penalty (unweighted); zero for the vanilla objective.
    pub gp: f64,
    #[serde(skip)]
    pub gen: f64,
    pub modes_covered: Option<usize>,
    pub off_manifold_frac: Option<f64>,
}

/// Writes the metric log as CSV: `step,adv,enc,gp,modes_covered,off_manifold_frac`.
pub fn write_metric_log<W: Write>(out: W, log: &[StepLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in log {
        w.serialize(row)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of the concatenated critic batch that reached the encoder term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EncoderAudit {
    pub fake_rows: u64,
    pub real_rows: u64,
}

/// Loss values of one critic update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticLosses<T> {
    pub adversarial: T,
    pub encoder: T,
    pub penalty: T,
    pub total: T,
}

/// Gradients and losses of a critic/encoder pass, ordered like
/// [`JointCriticNet::params`].
#[derive(Clone, Debug)]
pub struct CriticPass<T> {
    pub losses: CriticLosses<T>,
    pub grads: Vec<Vec<T>>,
    pub audit: EncoderAudit,
}

/// Gradients and loss of a generator pass, ordered like [`GeneratorNet::params`].
#[derive(Clone, Debug)]
pub struct GeneratorPass<T> {
    pub loss: T,
    pub grads: Vec<Vec<T>>,
}

fn overlap(a: (usize, usize), b: (usize, usize)) -> u64 {
    a.1.min(b.1).saturating_sub(a.0.max(b.0)) as u64
}

fn check_finite<T: Scalar>(v: T, step: u64, component: &'static str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { step, component })
    }
}

/// Training state: networks, optimizers and the sampling stream.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    config: TrainConfig,
    data: Tensor<T>,
    generator: GeneratorNet<T>,
    critic: JointCriticNet<T>,
    gen_opt: AdamState<T>,
    critic_opt: AdamState<T>,
    rng: ChaCha8Rng,
    step: u64,
    probe: Option<ModeProbe<T>>,
    audit: EncoderAudit,
}

impl<T: Scalar> Trainer<T> {
    /// Fresh networks initialized from `config.seed`.
    pub fn new(config: TrainConfig, data: Tensor<T>, probe: Option<ModeProbe<T>>) -> Result<Self> {
        config.validate()?;
        Self::check_data(&data)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d = data.cols();
        let generator = GeneratorNet::init(&config.generator_widths(d), rng.random())?;
        let critic = JointCriticNet::init(&config.critic_arch(d), rng.random())?;
        let gen_opt = AdamState::new(config.adam, &generator.params());
        let critic_opt = AdamState::new(config.adam, &critic.params());
        Ok(Self {
            config,
            data,
            generator,
            critic,
            gen_opt,
            critic_opt,
            rng,
            step: 0,
            probe,
            audit: EncoderAudit::default(),
        })
    }

    /// Restores a checkpoint so training continues exactly where it stopped.
    pub fn resume(ckpt: &Checkpoint, data: Tensor<T>, probe: Option<ModeProbe<T>>) -> Result<Self> {
        ckpt.check_version()?;
        ckpt.config.validate()?;
        Self::check_data(&data)?;
        let generator: GeneratorNet<T> = ckpt.generator.to_net()?;
        let critic: JointCriticNet<T> = ckpt.critic.to_net()?;
        if generator.data_dim() != data.cols() || critic.data_dim() != data.cols() {
            return Err(invalid("checkpoint data width differs from the dataset"));
        }
        let gen_opt = ckpt.generator_optimizer.to_state(&generator.params())?;
        let critic_opt = ckpt.critic_optimizer.to_state(&critic.params())?;
        Ok(Self {
            config: ckpt.config.clone(),
            data,
            generator,
            critic,
            gen_opt,
            critic_opt,
            rng: ckpt.rng.to_rng()?,
            step: ckpt.step,
            probe,
            audit: EncoderAudit::default(),
        })
    }

    fn check_data(data: &Tensor<T>) -> Result<()> {
        if data.shape().len() != 2 || data.rows() == 0 || data.cols() == 0 {
            return Err(invalid("training data must be a non-empty matrix"));
        }
        if !data.is_finite() {
            return Err(invalid("training data contains non-finite values"));
        }
        Ok(())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Overrides the step budget used by [`Self::run`].
    pub fn set_total_steps(&mut self, total: u64) {
        self.config.total_steps = total;
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn generator(&self) -> &GeneratorNet<T> {
        &self.generator
    }

    pub fn critic(&self) -> &JointCriticNet<T> {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut JointCriticNet<T> {
        &mut self.critic
    }

    pub fn encoder_audit(&self) -> EncoderAudit {
        self.audit
    }

    /// Critic/encoder loss and gradients for given real rows, latents and
    /// interpolation weights. Generated samples enter as constants.
    pub fn critic_pass(&self, real: &Tensor<T>, z: &Tensor<T>, t: &[T]) -> Result<CriticPass<T>> {
        let b = real.rows();
        let fake = self.generator.forward(z)?;
        let mut tape = Tape::new();
        let vars = self.critic.bind(&mut tape, true);
        let real_v = tape.constant(real.clone());
        let fake_v = tape.constant(fake.clone());
        let x = tape.concat_rows(real_v, fake_v)?;
        let trunk = self.critic.trunk_on(&mut tape, &vars, x)?;
        let scores = self.critic.score_on(&mut tape, &vars, trunk.output)?;
        let real_scores = tape.slice_rows(scores, 0, b)?;
        let fake_scores = tape.slice_rows(scores, b, 2 * b)?;

        let adv = match self.config.gan_kind {
            GanKind::Vanilla => vanilla_d_loss_on(&mut tape, real_scores, fake_scores)?,
            GanKind::WganGp => wgan_losses_on(&mut tape, real_scores, fake_scores)?.0,
        };

        let enc_rows = (b, 2 * b);
        let fake_features = tape.slice_rows(trunk.output, enc_rows.0, enc_rows.1)?;
        let enc = self.critic.encoder_on(&mut tape, &vars, fake_features)?;
        let zv = tape.constant(z.clone());
        let nll = encoder_nll_on(&mut tape, zv, enc)?;
        let audit = EncoderAudit {
            fake_rows: overlap(enc_rows, (b, 2 * b)),
            real_rows: overlap(enc_rows, (0, b)),
        };

        let mut total = adv;
        let mut penalty = None;
        if self.config.gan_kind == GanKind::WganGp {
            let gp = gradient_penalty_on(&mut tape, &self.critic, &vars, real, &fake, t)?;
            penalty = Some(gp);
            if self.config.gp_coefficient != 0.0 {
                let w = tape.scale(gp, T::of(self.config.gp_coefficient))?;
                total = tape.add(total, w)?;
            }
        }
        if self.config.lambda != 0.0 {
            let w = tape.scale(nll, T::of(self.config.lambda))?;
            total = tape.add(total, w)?;
        }

        let item = |v: Var| tape.value(v).data()[0];
        let losses = CriticLosses {
            adversarial: item(adv),
            encoder: item(nll),
            penalty: penalty.map_or(T::zero(), item),
            total: item(total),
        };
        let mut grads = tape.backward(total)?;
        let grads = JointCriticNet::<T>::param_vars(&vars)
            .into_iter()
            .map(|v| grads.take(v))
            .collect();
        Ok(CriticPass {
            losses,
            grads,
            audit,
        })
    }

    /// Generator loss and gradients for latents `z`.
    pub fn generator_pass(&self, z: &Tensor<T>) -> Result<GeneratorPass<T>> {
        let mut tape = Tape::new();
        let gvars = self.generator.bind(&mut tape, true);
        let cvars = self.critic.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let fake = self.generator.forward_on(&mut tape, &gvars, zv)?;
        let trunk = self.critic.trunk_on(&mut tape, &cvars, fake)?;
        let scores = self.critic.score_on(&mut tape, &cvars, trunk.output)?;
        let mut loss = match self.config.gan_kind {
            GanKind::Vanilla => vanilla_g_loss_on(&mut tape, scores, self.config.generator_loss)?,
            GanKind::WganGp => {
                let mf = tape.mean(scores)?;
                tape.scale(mf, -T::one())?
            }
        };
        if self.config.couple_generator_to_encoder_loss && self.config.lambda != 0.0 {
            let enc = self.critic.encoder_on(&mut tape, &cvars, trunk.output)?;
            let nll = encoder_nll_on(&mut tape, zv, enc)?;
            let w = tape.scale(nll, T::of(self.config.lambda))?;
            loss = tape.add(loss, w)?;
        }
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss)?;
        let grads = GeneratorNet::<T>::param_vars(&gvars)
            .into_iter()
            .map(|v| grads.take(v))
            .collect();
        Ok(GeneratorPass { loss: value, grads })
    }

    fn draw_real(&mut self) -> Tensor<T> {
        let n = self.data.rows();
        let idx: Vec<usize> = (0..self.config.batch_size)
            .map(|_| self.rng.random_range(0..n))
            .collect();
        self.data.select_rows(&idx)
    }

    /// One full step: `n_critic` critic/encoder updates, then one generator update.
    pub fn train_step(&mut self) -> Result<StepLog> {
        let step = self.step + 1;
        let (b, m) = (self.config.batch_size, self.config.latent_dim);
        let mut last = None;
        for _ in 0..self.config.n_critic {
            let real = self.draw_real();
            let z = sample_prior_with::<T>(b, m, &mut self.rng);
            let t = match self.config.gan_kind {
                GanKind::WganGp => interpolation_weights(b, &mut self.rng),
                GanKind::Vanilla => vec![T::zero(); b],
            };
            let pass = self.critic_pass(&real, &z, &t)?;
            check_finite(pass.losses.adversarial, step, "adversarial")?;
            check_finite(pass.losses.encoder, step, "encoder")?;
            check_finite(pass.losses.penalty, step, "gradient_penalty")?;
            self.audit.fake_rows += pass.audit.fake_rows;
            self.audit.real_rows += pass.audit.real_rows;
            let mut params = self.critic.params_mut();
            for (p, g) in params.iter_mut().zip(pass.grads) {
                p.set_grad(g)?;
            }
            self.critic_opt.step(&mut params)?;
            params.iter_mut().for_each(|p| p.clear_grad());
            last = Some(pass.losses);
        }
        let z = sample_prior_with::<T>(b, m, &mut self.rng);
        let gpass = self.generator_pass(&z)?;
        check_finite(gpass.loss, step, "generator")?;
        let mut params = self.generator.params_mut();
        for (p, g) in params.iter_mut().zip(gpass.grads) {
            p.set_grad(g)?;
        }
        self.gen_opt.step(&mut params)?;
        params.iter_mut().for_each(|p| p.clear_grad());
        self.step = step;

        let losses = last.expect("n_critic >= 1");
        let mut log = StepLog {
            step,
            adv: losses.adversarial.to_f64_exact(),
            enc: losses.encoder.to_f64_exact(),
            gp: losses.penalty.to_f64_exact(),
            gen: gpass.loss.to_f64_exact(),
            modes_covered: None,
            off_manifold_frac: None,
        };
        let every = self.config.snapshot_every;
        if every > 0 && step.is_multiple_of(every) {
            if let Some(m) = self.snapshot()? {
                log.modes_covered = Some(m.modes_covered);
                log.off_manifold_frac = Some(m.off_manifold_frac);
            }
        }
        Ok(log)
    }

    /// Mode coverage of prior samples at the current step. Uses its own
    /// random stream, so it never perturbs training.
    pub fn snapshot(&self) -> Result<Option<ModeMetrics>> {
        let Some(probe) = &self.probe else {
            return Ok(None);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.step.max(1));
        let z = sample_prior_with::<T>(self.config.snapshot_samples, self.config.latent_dim, &mut rng);
        let x = self.generator.forward(&z)?;
        mode_metrics(&x, &probe.centers, probe.sigma, probe.min_frac).map(Some)
    }

    /// Trains until `config.total_steps`, calling `on_checkpoint` every
    /// `checkpoint_every` steps.
    pub fn run_with(
        &mut self,
        mut on_checkpoint: impl FnMut(&Checkpoint) -> Result<()>,
    ) -> Result<Vec<StepLog>> {
        let mut log = Vec::new();
        while self.step < self.config.total_steps {
            log.push(self.train_step()?);
            let every = self.config.checkpoint_every;
            if every > 0 && self.step.is_multiple_of(every) {
                on_checkpoint(&self.checkpoint())?;
            }
        }
        Ok(log)
    }

    pub fn run(&mut self) -> Result<Vec<StepLog>> {
        self.run_with(|_| Ok(()))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            scalar: T::NAME.to_string(),
            step: self.step,
            config: self.config.clone(),
            generator: (&self.generator).into(),
            critic: (&self.critic).into(),
            generator_optimizer: (&self.gen_opt).into(),
            critic_optimizer: (&self.critic_opt).into(),
            rng: RngState::capture(&self.rng),
        }
    }
}

/// Result of [`train_gael`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<StepLog>,
}

/// Trains from scratch for `config.total_steps` and returns the last-step checkpoint.
pub fn train_gael<T: Scalar>(
    config: &TrainConfig,
    data: &Tensor<T>,
    probe: Option<ModeProbe<T>>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), data.clone(), probe)?;
    let log = trainer.run()?;
    Ok(TrainOutcome {
        checkpoint: trainer.checkpoint(),
        log,
    })
}

/// Serialized Adam state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl<T: Scalar> From<&AdamState<T>> for AdamRecord {
    fn from(s: &AdamState<T>) -> Self {
        let conv = |m: &Vec<Vec<T>>| {
            m.iter()
                .map(|v| v.iter().map(|x| x.to_f64_exact()).collect())
                .collect()
        };
        Self {
            config: s.config,
            step: s.step,
            first_moment: conv(&s.first_moment),
            second_moment: conv(&s.second_moment),
        }
    }
}

impl AdamRecord {
    fn to_state<T: Scalar>(&self, params: &[&Tensor<T>]) -> Result<AdamState<T>> {
        let shapes_ok = |m: &Vec<Vec<f64>>| {
            m.len() == params.len() && m.iter().zip(params).all(|(v, p)| v.len() == p.len())
        };
        if !shapes_ok(&self.first_moment) || !shapes_ok(&self.second_moment) {
            return Err(invalid("optimizer state does not match the network parameters"));
        }
        let conv = |m: &Vec<Vec<f64>>| {
            m.iter()
                .map(|v| v.iter().map(|&x| T::of(x)).collect())
                .collect()
        };
        Ok(AdamState {
            config: self.config,
            step: self.step,
            first_moment: conv(&self.first_moment),
            second_moment: conv(&self.second_moment),
        })
    }
}

/// Position of the training random stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Word position as a decimal string (it is a 128-bit counter).
    pub word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn to_rng(&self) -> Result<ChaCha8Rng> {
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| invalid("checkpoint rng word_pos is not an integer"))?;
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Everything needed to continue training or to use the trained networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Scalar type the run used (`f32` or `f64`).
    pub scalar: String,
    pub step: u64,
    pub config: TrainConfig,
    pub generator: GeneratorRecord,
    pub critic: CriticRecord,
    pub generator_optimizer: AdamRecord,
    pub critic_optimizer: AdamRecord,
    pub rng: RngState,
}

impl Checkpoint {
    fn check_version(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: self.format_version,
                expected: CHECKPOINT_FORMAT_VERSION,
            });
        }
        Ok(())
    }

    pub fn generator_net<T: Scalar>(&self) -> Result<GeneratorNet<T>> {
        self.check_version()?;
        self.generator.to_net()
    }

    pub fn critic_net<T: Scalar>(&self) -> Result<JointCriticNet<T>> {
        self.check_version()?;
        self.critic.to_net()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(s)?;
        ckpt.check_version()?;
        Ok(ckpt)
    }
}

/// Default row block for [`encode_dataset`].
pub const ENCODE_BATCH: usize = 1024;

/// Encoder means for every row of `data`, evaluated in blocks of `batch` rows.
pub fn encode_dataset<T: Scalar>(
    critic: &JointCriticNet<T>,
    data: &Tensor<T>,
    batch: usize,
) -> Result<Tensor<T>> {
    if data.shape().len() != 2 || (data.rows() > 0 && data.cols() != critic.data_dim()) {
        return Err(Error::ShapeMismatch {
            op: "encode_dataset",
            lhs: data.shape().to_vec(),
            rhs: vec![critic.data_dim()],
        });
    }
    let batch = batch.max(1);
    let m = critic.latent_dim();
    let mut out = Vec::with_capacity(data.rows() * m);
    let mut start = 0;
    while start < data.rows() {
        let end = (start + batch).min(data.rows());
        let enc = critic.encode(&data.slice_rows(start, end))?;
        out.extend_from_slice(enc.enc_mean.data());
        start = end;
    }
    Tensor::matrix(data.rows(), m, out)
}

/// Where generator inputs come from.
#[derive(Clone, Copy, Debug)]
pub enum LatentSource<'a, T> {
    Prior,
    Gmm(&'a GmmModel<T>),
}

/// `G(z)` for `n` latents drawn from `source`.
pub fn generate<T: Scalar>(
    generator: &GeneratorNet<T>,
    source: LatentSource<'_, T>,
    n: usize,
    seed: u64,
) -> Result<Tensor<T>> {
    let m = generator.latent_dim();
    let z = match source {
        LatentSource::Prior => sample_prior(n, m, seed),
        LatentSource::Gmm(gmm) => {
            if gmm.dim() != m {
                return Err(Error::ShapeMismatch {
                    op: "generate",
                    lhs: vec![gmm.dim()],
                    rhs: vec![m],
                });
            }
            gmm.sample(n, seed).0
        }
    };
    generator.forward(&z)
}
