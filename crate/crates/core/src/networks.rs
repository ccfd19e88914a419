//! Generator MLP and the joint critic whose trunk feeds both the adversarial
//! score head and the encoder heads.
//!
//! Parameters live in plain [`Tensor`]s. To differentiate, a network is first
//! bound onto a [`Tape`] (each parameter becomes a leaf) and then evaluated
//! with the `*_on` methods. Inference helpers build a throwaway tape with the
//! parameters recorded as constants, so both paths run the same kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Negative-side slope of every leaky-ReLU in the networks.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Bounds applied to the encoder's log-variance output.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

/// Fully connected layer: `y = x * weight + bias`, weight stored `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    /// Uniform weights with variance `gain / fan_in`, zero bias.
    fn init(fan_in: usize, fan_out: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let bound = (3.0 * gain / fan_in as f64).sqrt();
        let weight = (0..fan_in * fan_out)
            .map(|_| T::of(rng.random_range(-bound..bound)))
            .collect();
        Self {
            weight: Tensor::from_parts(vec![fan_in, fan_out], weight),
            bias: Tensor::zeros(&[1, fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> LinearVars {
        LinearVars {
            weight: tape.leaf(self.weight.clone().with_requires_grad(trainable)),
            bias: tape.leaf(self.bias.clone().with_requires_grad(trainable)),
        }
    }
}

/// Tape handles of one bound [`Linear`] layer.
#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

/// He-style gain for a layer followed by a leaky-ReLU.
pub fn leaky_gain() -> f64 {
    2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)
}

/// Initializes a stack of layers for `widths = [in, h1, ..., out]`.
///
/// Layers listed in `activated` use the leaky-ReLU gain; the rest use unit gain.
pub fn init_weights<T: Scalar>(
    widths: &[usize],
    activated: impl Fn(usize) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Linear<T>>> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(invalid(format!("layer widths {widths:?} must list at least two positive sizes")));
    }
    Ok(widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let gain = if activated(i) { leaky_gain() } else { 1.0 };
            Linear::init(w[0], w[1], gain, rng)
        })
        .collect())
}

fn width_check<T: Scalar>(op: &'static str, x: &Tensor<T>, expected: usize) -> Result<()> {
    if x.shape().len() != 2 || x.cols() != expected {
        return Err(Error::ShapeMismatch {
            op,
            lhs: x.shape().to_vec(),
            rhs: vec![expected],
        });
    }
    Ok(())
}

/// Generator `G`: latent `M` -> hidden leaky-ReLU layers -> linear output of width `D_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet<T> {
    layers: Vec<Linear<T>>,
}

/// Bound generator parameters.
#[derive(Clone, Debug)]
pub struct GeneratorVars {
    pub layers: Vec<LinearVars>,
}

impl<T: Scalar> GeneratorNet<T> {
    /// `widths = [M, hidden..., D_x]`.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = widths.len().saturating_sub(2);
        let layers = init_weights(widths, |i| i < last, &mut rng)?;
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Linear<T>>) -> Result<Self> {
        check_chain(&layers)?;
        Ok(Self { layers })
    }

    pub fn latent_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn data_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn widths(&self) -> Vec<usize> {
        widths_of(&self.layers)
    }

    pub fn layers(&self) -> &[Linear<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear<T>] {
        &mut self.layers
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> GeneratorVars {
        GeneratorVars {
            layers: self.layers.iter().map(|l| l.bind(tape, trainable)).collect(),
        }
    }

    /// Flattened handles in the same order as [`Self::params`].
    pub fn param_vars(vars: &GeneratorVars) -> Vec<Var> {
        vars.layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    pub fn forward_on(&self, tape: &mut Tape<T>, vars: &GeneratorVars, z: Var) -> Result<Var> {
        width_check("generator_forward", tape.value(z), self.latent_dim())?;
        let slope = T::of(LEAKY_SLOPE);
        let mut h = z;
        let last = vars.layers.len() - 1;
        for (i, layer) in vars.layers.iter().enumerate() {
            h = tape.affine(h, layer.weight, layer.bias)?;
            if i < last {
                h = tape.leaky_relu(h, slope)?;
            }
        }
        Ok(h)
    }

    /// `G(z)` for a batch of latents.
    pub fn forward(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let out = self.forward_on(&mut tape, &vars, zv)?;
        Ok(tape.value(out).clone())
    }
}

fn widths_of<T: Scalar>(layers: &[Linear<T>]) -> Vec<usize> {
    let mut widths = vec![layers[0].fan_in()];
    widths.extend(layers.iter().map(Linear::fan_out));
    widths
}

fn check_chain<T: Scalar>(layers: &[Linear<T>]) -> Result<()> {
    if layers.is_empty() {
        return Err(invalid("network needs at least one layer"));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.weight.shape().len() != 2 || l.bias.shape() != [1, l.fan_out()] {
            return Err(invalid(format!("layer {i}: bias shape does not match weight")));
        }
        if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
            return Err(invalid(format!("layer {i}: input width does not match previous output")));
        }
    }
    Ok(())
}

/// Encoder outputs for a batch: `P(z | x) = N(enc_mean, diag(exp(logvar)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput<T> {
    pub enc_mean: Tensor<T>,
    /// All zeros when the variance is not learned (identity covariance).
    pub logvar: Tensor<T>,
}

/// Shape of a [`JointCriticNet`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticArch {
    pub data_dim: usize,
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub learn_sigma: bool,
}

/// Critic/discriminator with encoder heads on a shared trunk.
///
/// The trunk is `D_x -> hidden...` with leaky-ReLU after every layer; the
/// score, mean and (optional) log-variance heads are single linear layers
/// reading the same trunk output.
#[derive(Clone, Debug, PartialEq)]
pub struct JointCriticNet<T> {
    trunk: Vec<Linear<T>>,
    score: Linear<T>,
    enc_mean: Linear<T>,
    enc_logvar: Option<Linear<T>>,
}

/// Bound critic parameters.
#[derive(Clone, Debug)]
pub struct CriticVars {
    pub trunk: Vec<LinearVars>,
    pub score: LinearVars,
    pub enc_mean: LinearVars,
    pub enc_logvar: Option<LinearVars>,
}

/// Trunk pre-activations and output for one batch.
#[derive(Clone, Debug)]
pub struct TrunkPass {
    pub pre_activations: Vec<Var>,
    pub output: Var,
}

/// Tape handles of the encoder heads.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub enc_mean: Var,
    /// `None` when the variance is fixed to identity.
    pub logvar: Option<Var>,
}

impl<T: Scalar> JointCriticNet<T> {
    pub fn init(arch: &CriticArch, seed: u64) -> Result<Self> {
        if arch.hidden.is_empty() || arch.latent_dim == 0 {
            return Err(invalid("critic needs at least one hidden layer and a positive latent width"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![arch.data_dim];
        widths.extend(&arch.hidden);
        let trunk = init_weights(&widths, |_| true, &mut rng)?;
        let h = *arch.hidden.last().unwrap();
        let score = Linear::init(h, 1, 1.0, &mut rng);
        let enc_mean = Linear::init(h, arch.latent_dim, 1.0, &mut rng);
        let enc_logvar = arch
            .learn_sigma
            .then(|| Linear::init(h, arch.latent_dim, 1.0, &mut rng));
        Ok(Self {
            trunk,
            score,
            enc_mean,
            enc_logvar,
        })
    }

    pub fn from_parts(
        trunk: Vec<Linear<T>>,
        score: Linear<T>,
        enc_mean: Linear<T>,
        enc_logvar: Option<Linear<T>>,
    ) -> Result<Self> {
        check_chain(&trunk)?;
        let h = trunk[trunk.len() - 1].fan_out();
        let heads = [Some(&score), Some(&enc_mean), enc_logvar.as_ref()];
        for head in heads.into_iter().flatten() {
            check_chain(std::slice::from_ref(head))?;
            if head.fan_in() != h {
                return Err(invalid("head input width does not match trunk output"));
            }
        }
        if score.fan_out() != 1 {
            return Err(invalid("score head must output a single value"));
        }
        if let Some(lv) = &enc_logvar {
            if lv.fan_out() != enc_mean.fan_out() {
                return Err(invalid("log-variance head width must match mean head"));
            }
        }
        Ok(Self {
            trunk,
            score,
            enc_mean,
            enc_logvar,
        })
    }

    pub fn arch(&self) -> CriticArch {
        CriticArch {
            data_dim: self.data_dim(),
            hidden: self.trunk.iter().map(Linear::fan_out).collect(),
            latent_dim: self.latent_dim(),
            learn_sigma: self.learn_sigma(),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.trunk[0].fan_in()
    }

    pub fn latent_dim(&self) -> usize {
        self.enc_mean.fan_out()
    }

    pub fn learn_sigma(&self) -> bool {
        self.enc_logvar.is_some()
    }

    pub fn trunk(&self) -> &[Linear<T>] {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut [Linear<T>] {
        &mut self.trunk
    }

    pub fn score_head(&self) -> &Linear<T> {
        &self.score
    }

    pub fn score_head_mut(&mut self) -> &mut Linear<T> {
        &mut self.score
    }

    pub fn mean_head(&self) -> &Linear<T> {
        &self.enc_mean
    }

    pub fn mean_head_mut(&mut self) -> &mut Linear<T> {
        &mut self.enc_mean
    }

    pub fn logvar_head(&self) -> Option<&Linear<T>> {
        self.enc_logvar.as_ref()
    }

    /// Trunk, then score, mean and log-variance heads.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.trunk
            .iter()
            .chain([&self.score, &self.enc_mean])
            .chain(self.enc_logvar.as_ref())
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.trunk
            .iter_mut()
            .chain([&mut self.score, &mut self.enc_mean])
            .chain(self.enc_logvar.as_mut())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn bind(&self, tape: &mut Tape<T>, trainable: bool) -> CriticVars {
        CriticVars {
            trunk: self.trunk.iter().map(|l| l.bind(tape, trainable)).collect(),
            score: self.score.bind(tape, trainable),
            enc_mean: self.enc_mean.bind(tape, trainable),
            enc_logvar: self.enc_logvar.as_ref().map(|l| l.bind(tape, trainable)),
        }
    }

    /// Flattened handles in the same order as [`Self::params`].
    pub fn param_vars(vars: &CriticVars) -> Vec<Var> {
        vars.trunk
            .iter()
            .chain([&vars.score, &vars.enc_mean])
            .chain(vars.enc_logvar.as_ref())
            .flat_map(|l| [l.weight, l.bias])
            .collect()
    }

    pub fn trunk_on(&self, tape: &mut Tape<T>, vars: &CriticVars, x: Var) -> Result<TrunkPass> {
        width_check("critic_trunk", tape.value(x), self.data_dim())?;
        let slope = T::of(LEAKY_SLOPE);
        let mut pre_activations = Vec::with_capacity(vars.trunk.len());
        let mut h = x;
        for layer in &vars.trunk {
            let a = tape.affine(h, layer.weight, layer.bias)?;
            pre_activations.push(a);
            h = tape.leaky_relu(a, slope)?;
        }
        Ok(TrunkPass {
            pre_activations,
            output: h,
        })
    }

    /// Raw (unsquashed) score per row of the trunk output, shape `B x 1`.
    pub fn score_on(&self, tape: &mut Tape<T>, vars: &CriticVars, trunk_out: Var) -> Result<Var> {
        tape.affine(trunk_out, vars.score.weight, vars.score.bias)
    }

    /// Encoder heads on the trunk output; log-variance is clamped to `[-10, 10]`.
    pub fn encoder_on(
        &self,
        tape: &mut Tape<T>,
        vars: &CriticVars,
        trunk_out: Var,
    ) -> Result<EncoderVars> {
        let enc_mean = tape.affine(trunk_out, vars.enc_mean.weight, vars.enc_mean.bias)?;
        let logvar = match &vars.enc_logvar {
            Some(head) => {
                let raw = tape.affine(trunk_out, head.weight, head.bias)?;
                Some(tape.clamp(raw, T::of(LOGVAR_MIN), T::of(LOGVAR_MAX))?)
            }
            None => None,
        };
        Ok(EncoderVars { enc_mean, logvar })
    }

    fn inference(&self, x: &Tensor<T>, op: &'static str) -> Result<(Tape<T>, CriticVars, Var)> {
        width_check(op, x, self.data_dim())?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let trunk = self.trunk_on(&mut tape, &vars, xv)?;
        Ok((tape, vars, trunk.output))
    }

    fn encoder_values(&self, tape: &Tape<T>, enc: EncoderVars) -> EncoderOutput<T> {
        let enc_mean = tape.value(enc.enc_mean).clone();
        let logvar = match enc.logvar {
            Some(v) => tape.value(v).clone(),
            None => Tensor::zeros(enc_mean.shape()),
        };
        EncoderOutput { enc_mean, logvar }
    }

    /// Critic score for each row of `x`, shape `B x 1`.
    pub fn critic_score(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (mut tape, vars, trunk) = self.inference(x, "critic_score")?;
        let s = self.score_on(&mut tape, &vars, trunk)?;
        Ok(tape.value(s).clone())
    }

    pub fn encode(&self, x: &Tensor<T>) -> Result<EncoderOutput<T>> {
        let (mut tape, vars, trunk) = self.inference(x, "encode")?;
        let enc = self.encoder_on(&mut tape, &vars, trunk)?;
        Ok(self.encoder_values(&tape, enc))
    }

    /// Score and encoding from a single trunk evaluation.
    pub fn evaluate(&self, x: &Tensor<T>) -> Result<(Tensor<T>, EncoderOutput<T>)> {
        let (mut tape, vars, trunk) = self.inference(x, "critic_evaluate")?;
        let s = self.score_on(&mut tape, &vars, trunk)?;
        let enc = self.encoder_on(&mut tape, &vars, trunk)?;
        Ok((tape.value(s).clone(), self.encoder_values(&tape, enc)))
    }
}

/// `G(Enc(x))`: the encoder mean decoded by the generator, with no sampling noise.
pub fn reconstruct<T: Scalar>(
    generator: &GeneratorNet<T>,
    critic: &JointCriticNet<T>,
    x: &Tensor<T>,
) -> Result<Tensor<T>> {
    if generator.latent_dim() != critic.latent_dim() {
        return Err(invalid(format!(
            "generator latent width {} differs from encoder width {}",
            generator.latent_dim(),
            critic.latent_dim()
        )));
    }
    let enc = critic.encode(x)?;
    generator.forward(&enc.enc_mean)
}

/// Serialized layer: flat row-major weight (`inputs x outputs`) and bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl<T: Scalar> From<&Linear<T>> for LinearRecord {
    fn from(l: &Linear<T>) -> Self {
        Self {
            inputs: l.fan_in(),
            outputs: l.fan_out(),
            weight: l.weight.data().iter().map(|v| v.to_f64_exact()).collect(),
            bias: l.bias.data().iter().map(|v| v.to_f64_exact()).collect(),
        }
    }
}

impl LinearRecord {
    pub fn to_linear<T: Scalar>(&self) -> Result<Linear<T>> {
        let conv = |v: &[f64]| v.iter().map(|&x| T::of(x)).collect::<Vec<_>>();
        Ok(Linear {
            weight: Tensor::matrix(self.inputs, self.outputs, conv(&self.weight))?,
            bias: Tensor::matrix(1, self.outputs, conv(&self.bias))?,
        })
    }
}

/// Serialized generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    pub widths: Vec<usize>,
    pub leaky_slope: f64,
    pub layers: Vec<LinearRecord>,
}

impl<T: Scalar> From<&GeneratorNet<T>> for GeneratorRecord {
    fn from(net: &GeneratorNet<T>) -> Self {
        Self {
            widths: net.widths(),
            leaky_slope: LEAKY_SLOPE,
            layers: net.layers.iter().map(LinearRecord::from).collect(),
        }
    }
}

impl GeneratorRecord {
    pub fn to_net<T: Scalar>(&self) -> Result<GeneratorNet<T>> {
        let layers = self
            .layers
            .iter()
            .map(LinearRecord::to_linear)
            .collect::<Result<Vec<_>>>()?;
        let net = GeneratorNet::from_layers(layers)?;
        if net.widths() != self.widths {
            return Err(invalid("generator widths do not match layer records"));
        }
        Ok(net)
    }
}

/// Serialized joint critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticRecord {
    pub arch: CriticArch,
    pub leaky_slope: f64,
    pub trunk: Vec<LinearRecord>,
    pub score_head: LinearRecord,
    pub mean_head: LinearRecord,
    pub logvar_head: Option<LinearRecord>,
}

impl<T: Scalar> From<&JointCriticNet<T>> for CriticRecord {
    fn from(net: &JointCriticNet<T>) -> Self {
        Self {
            arch: net.arch(),
            leaky_slope: LEAKY_SLOPE,
            trunk: net.trunk.iter().map(LinearRecord::from).collect(),
            score_head: (&net.score).into(),
            mean_head: (&net.enc_mean).into(),
            logvar_head: net.enc_logvar.as_ref().map(LinearRecord::from),
        }
    }
}

impl CriticRecord {
    pub fn to_net<T: Scalar>(&self) -> Result<JointCriticNet<T>> {
        let trunk = self
            .trunk
            .iter()
            .map(LinearRecord::to_linear)
            .collect::<Result<Vec<_>>>()?;
        let net = JointCriticNet::from_parts(
            trunk,
            self.score_head.to_linear()?,
            self.mean_head.to_linear()?,
            self.logvar_head.as_ref().map(LinearRecord::to_linear).transpose()?,
        )?;
        if net.arch() != self.arch {
            return Err(invalid("critic architecture does not match layer records"));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_difference, relative_error};

    fn arch(learn_sigma: bool) -> CriticArch {
        CriticArch {
            data_dim: 2,
            hidden: vec![16, 16],
            latent_dim: 2,
            learn_sigma,
        }
    }

    fn batch(rows: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::matrix(rows, 2, (0..rows * 2).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn generator_output_shape() {
        let g = GeneratorNet::<f64>::init(&[2, 32, 32, 2], 1).unwrap();
        assert_eq!(g.forward(&batch(16, 2)).unwrap().shape(), &[16, 2]);
    }

    #[test]
    fn generator_rejects_wrong_width() {
        let g = GeneratorNet::<f64>::init(&[3, 8, 2], 1).unwrap();
        assert!(matches!(
            g.forward(&batch(4, 2)),
            Err(Error::ShapeMismatch { op: "generator_forward", .. })
        ));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut g = GeneratorNet::<f64>::init(&[2, 8, 8, 2], 3).unwrap();
        for p in g.params_mut() {
            p.data_mut().fill(0.0);
        }
        let out = g.forward(&batch(5, 9)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let g = GeneratorNet::<f64>::init(&[2, 6, 5, 2], 8).unwrap();
        let z = batch(4, 10);
        let mean_out = |net: &GeneratorNet<f64>| {
            let mut tape = Tape::new();
            let vars = net.bind(&mut tape, true);
            let zv = tape.constant(z.clone());
            let out = net.forward_on(&mut tape, &vars, zv).unwrap();
            let m = tape.mean(out).unwrap();
            (tape, vars, m)
        };
        let (tape, vars, m) = mean_out(&g);
        let grads = tape.backward(m).unwrap();
        for (pi, var) in GeneratorNet::<f64>::param_vars(&vars).into_iter().enumerate() {
            let analytic = grads.wrt(var).into_data();
            let base = g.params()[pi].data().to_vec();
            let numeric = central_difference(
                |probe| {
                    let mut net = g.clone();
                    net.params_mut()[pi].data_mut().copy_from_slice(probe);
                    net.forward(&z).unwrap().data().iter().sum::<f64>() / 8.0
                },
                &base,
                1e-5,
            );
            let err = relative_error(&analytic, &numeric, 1e-6);
            assert!(err < 1e-4, "param {pi}: {err}");
        }
    }

    #[test]
    fn critic_shapes_and_identity_logvar() {
        let c = JointCriticNet::<f64>::init(&arch(false), 4).unwrap();
        let x = batch(32, 5);
        assert_eq!(c.critic_score(&batch(8, 1)).unwrap().shape(), &[8, 1]);
        let enc = c.encode(&x).unwrap();
        assert_eq!(enc.enc_mean.shape(), &[32, 2]);
        assert!(enc.logvar.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_inputs_identical_scores() {
        let c = JointCriticNet::<f64>::init(&arch(true), 4).unwrap();
        let x = Tensor::matrix(2, 2, vec![0.3, -0.1, 0.3, -0.1]).unwrap();
        let s = c.critic_score(&x).unwrap();
        assert_eq!(s.data()[0].to_bits(), s.data()[1].to_bits());
    }

    #[test]
    fn evaluate_shares_one_trunk_pass() {
        let c = JointCriticNet::<f64>::init(&arch(true), 4).unwrap();
        let x = batch(6, 3);
        let (s, enc) = c.evaluate(&x).unwrap();
        assert_eq!(s, c.critic_score(&x).unwrap());
        assert_eq!(enc, c.encode(&x).unwrap());

        let mut tape = Tape::new();
        let vars = c.bind(&mut tape, true);
        let xv = tape.constant(x);
        let trunk = c.trunk_on(&mut tape, &vars, xv).unwrap();
        let score = c.score_on(&mut tape, &vars, trunk.output).unwrap();
        let e = c.encoder_on(&mut tape, &vars, trunk.output).unwrap();
        assert_eq!(tape.inputs(score)[0], trunk.output);
        assert_eq!(tape.inputs(e.enc_mean)[0], trunk.output);
    }

    #[test]
    fn trunk_perturbation_moves_score_and_encoding() {
        let c = JointCriticNet::<f64>::init(&arch(true), 4).unwrap();
        let x = batch(4, 6);
        let (s0, e0) = c.evaluate(&x).unwrap();
        let mut perturbed = c.clone();
        perturbed.trunk_mut()[0].weight.data_mut()[0] += 0.5;
        let (s1, e1) = perturbed.evaluate(&x).unwrap();
        assert_ne!(s0, s1);
        assert_ne!(e0.enc_mean, e1.enc_mean);
        assert_ne!(e0.logvar, e1.logvar);
    }

    #[test]
    fn logvar_is_clamped() {
        let mut c = JointCriticNet::<f64>::init(&arch(true), 4).unwrap();
        let head = c.enc_logvar.as_mut().unwrap();
        head.bias.data_mut().copy_from_slice(&[1e3, -1e3]);
        let enc = c.encode(&batch(3, 1)).unwrap();
        for row in 0..3 {
            let lv = enc.logvar.row(row);
            assert_eq!(lv, &[LOGVAR_MAX, LOGVAR_MIN]);
        }
    }

    #[test]
    fn reconstruct_is_generator_of_encoder_mean() {
        let g = GeneratorNet::<f64>::init(&[2, 8, 2], 1).unwrap();
        let c = JointCriticNet::<f64>::init(&arch(false), 2).unwrap();
        let x = batch(7, 3);
        let r = reconstruct(&g, &c, &x).unwrap();
        assert_eq!(r.shape(), x.shape());
        assert_eq!(r, g.forward(&c.encode(&x).unwrap().enc_mean).unwrap());
    }

    #[test]
    fn init_is_reproducible_with_zero_bias() {
        let a = GeneratorNet::<f64>::init(&[2, 8, 2], 42).unwrap();
        let b = GeneratorNet::<f64>::init(&[2, 8, 2], 42).unwrap();
        assert_eq!(a, b);
        assert!(a.layers().iter().all(|l| l.bias.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn init_variance_matches_he_scaling() {
        for fan_in in [64, 128, 256] {
            let g = GeneratorNet::<f64>::init(&[fan_in, 256, 2], fan_in as u64).unwrap();
            let w = g.layers()[0].weight.data();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let target = 2.0 / (fan_in as f64 * (1.0 + LEAKY_SLOPE * LEAKY_SLOPE));
            assert!((var / target - 1.0).abs() < 0.2, "fan_in {fan_in}: {var} vs {target}");
        }
    }

    #[test]
    fn records_round_trip_bitwise() {
        let c = JointCriticNet::<f64>::init(&arch(true), 4).unwrap();
        let json = serde_json::to_string(&CriticRecord::from(&c)).unwrap();
        let back: CriticRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_net::<f64>().unwrap(), c);

        let g = GeneratorNet::<f32>::init(&[2, 8, 2], 4).unwrap();
        let json = serde_json::to_string(&GeneratorRecord::from(&g)).unwrap();
        let back: GeneratorRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_net::<f32>().unwrap(), g);
    }
}
