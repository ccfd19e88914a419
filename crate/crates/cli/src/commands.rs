use std::fs;
use std::path::Path;

use serde::Serialize;

use gael::autodiff::{AdamConfig, Tensor};
use gael::data::{load_csv, make_grid_dataset, save_csv, ToyGmmSpec};
use gael::error::Error;
use gael::gmm::{fit_em, CovarianceMode, EmConfig, GmmModel, GmmRecord};
use gael::metrics::{mode_metrics, ClusteringReport, ModeMetrics};
use gael::trainer::{
    encode_dataset, generate, write_metric_log, Checkpoint, GanKind, LatentSource, ModeProbe,
    TrainConfig, Trainer, ENCODE_BATCH,
};
use gael::{Result, Scalar};

use crate::manifest::{push_unique, write_atomic, CommandEcho, RunManifest};
use crate::svg;
use crate::{
    Cli, ClusterArgs, Command, CovarianceArg, EncodeArgs, EvalArgs, FitGmmArgs, GanArg,
    GenerateArgs, MakeDataArgs, PlotArgs, Precision, TrainArgs,
};

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_gmm<T: Scalar>(path: &Path) -> Result<GmmModel<T>> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str::<GmmRecord>(&text)?.to_model()
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&fs::read_to_string(path)?)
}

fn echo<S: Serialize>(command: &str, config: &S) -> Result<CommandEcho> {
    Ok(CommandEcho {
        command: command.to_string(),
        config: serde_json::to_value(config)?,
    })
}

/// Changes a command makes to the manifest.
type ManifestUpdate = Box<dyn FnOnce(&mut RunManifest)>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let update: ManifestUpdate = match &cli.command {
        Command::MakeData(a) => make_data(a)?,
        Command::Train(a) => train(a)?,
        Command::Encode(a) => encode(a)?,
        Command::FitGmm(a) => fit_gmm(a)?,
        Command::Generate(a) => generate_cmd(a)?,
        Command::Cluster(a) => cluster(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Plot(a) => plot(a)?,
    };
    if let Some(path) = &cli.manifest {
        let mut m = RunManifest::load_or_new(path)?;
        update(&mut m);
        m.save(path)?;
    }
    Ok(())
}

fn make_data(a: &MakeDataArgs) -> Result<ManifestUpdate> {
    let spec = ToyGmmSpec {
        grid_side: a.grid_side as usize,
        spacing: a.spacing,
        mode_std: a.std,
        center_offset: 0.0,
    };
    let (ds, truth) = make_grid_dataset::<f64>(&spec, a.n as usize, a.seed)?;
    save_csv(&a.out, ds.samples(), Some(ds.labels()))?;
    let truth_path = a.truth_out.clone().unwrap_or_else(|| a.out.with_extension("gmm.json"));
    write_json(&truth_path, &GmmRecord::from(&truth))?;
    eprintln!(
        "wrote {} samples from {} modes to {}",
        ds.len(),
        spec.n_modes(),
        a.out.display()
    );
    let (out, e) = (a.out.clone(), echo("make-data", a)?);
    Ok(Box::new(move |m| {
        m.dataset = Some(out);
        m.truth_gmm = Some(truth_path);
        m.commands.push(e);
    }))
}

fn train_config(a: &TrainArgs) -> TrainConfig {
    let kind = match a.gan {
        GanArg::Vanilla => GanKind::Vanilla,
        GanArg::WganGp => GanKind::WganGp,
    };
    TrainConfig {
        lambda: a.lambda,
        learn_sigma: a.learn_sigma,
        couple_generator_to_encoder_loss: a.couple,
        latent_dim: a.latent_dim as usize,
        generator_hidden: a.hidden.clone(),
        critic_hidden: a.hidden.clone(),
        batch_size: a.batch_size,
        n_critic: a.n_critic.unwrap_or(kind.default_n_critic()),
        total_steps: a.steps,
        adam: AdamConfig {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            ..AdamConfig::default()
        },
        gp_coefficient: a.gp_coefficient,
        seed: a.seed,
        checkpoint_every: a.checkpoint_every,
        ..TrainConfig::for_kind(kind)
    }
}

/// Centers and coverage scale of a reference mixture.
fn probe_from<T: Scalar>(gmm: &GmmModel<f64>) -> Result<ModeProbe<T>> {
    let d = gmm.dim();
    let centers: Vec<Vec<T>> = gmm
        .means()
        .into_iter()
        .map(|m| m.into_iter().map(T::of).collect())
        .collect();
    let max_var = (0..gmm.n_components())
        .flat_map(|k| {
            let c = gmm.full_covariance(k);
            (0..d).map(move |i| c[i * d + i])
        })
        .fold(0.0f64, f64::max);
    Ok(ModeProbe {
        centers: Tensor::from_rows(&centers)?,
        sigma: max_var.sqrt(),
        min_frac: gael::metrics::DEFAULT_MIN_FRAC,
    })
}

fn train(a: &TrainArgs) -> Result<ManifestUpdate> {
    match a.precision {
        Precision::F32 => train_as::<f32>(a),
        Precision::F64 => train_as::<f64>(a),
    }
}

fn train_as<T: Scalar>(a: &TrainArgs) -> Result<ManifestUpdate> {
    let config = train_config(a);
    config.validate()?;
    let (x, _) = load_csv::<T>(&a.data)?;
    let probe = match &a.truth_gmm {
        Some(p) => Some(probe_from::<T>(&read_gmm::<f64>(p)?)?),
        None => None,
    };
    fs::create_dir_all(&a.out_dir)?;
    let mut trainer = Trainer::new(config.clone(), x, probe)?;
    let mut checkpoints = Vec::new();
    let out_dir = a.out_dir.clone();
    let log = trainer.run_with(|c| {
        let path = out_dir.join(format!("checkpoint_step{:06}.json", c.step));
        write_atomic(&path, c.to_json()?.as_bytes())?;
        checkpoints.push(path);
        Ok(())
    })?;
    let final_path = a.out_dir.join("checkpoint.json");
    write_atomic(&final_path, trainer.checkpoint().to_json()?.as_bytes())?;
    checkpoints.push(final_path);
    let log_path = a.out_dir.join("metrics.csv");
    let mut buf = Vec::new();
    write_metric_log(&mut buf, &log)?;
    write_atomic(&log_path, &buf)?;

    if let Some(last) = log.last() {
        eprintln!(
            "trained {} steps: adv {:.4} enc {:.4} gp {:.4}",
            last.step, last.adv, last.enc, last.gp
        );
    }
    let e = echo("train", &config)?;
    let data = a.data.clone();
    let update = move |m: &mut RunManifest| {
        m.dataset.get_or_insert(data);
        for c in &checkpoints {
            push_unique(&mut m.checkpoints, c);
        }
        m.metric_log = Some(log_path);
        m.commands.push(e);
    };
    let run_manifest_path = a.out_dir.join("manifest.json");
    let mut run_manifest = RunManifest::load_or_new(&run_manifest_path)?;
    update.clone()(&mut run_manifest);
    run_manifest.save(&run_manifest_path)?;
    Ok(Box::new(update))
}

fn encode(a: &EncodeArgs) -> Result<ManifestUpdate> {
    let ckpt = read_checkpoint(&a.ckpt)?;
    match ckpt.scalar.as_str() {
        "f32" => encode_as::<f32>(&ckpt, a)?,
        _ => encode_as::<f64>(&ckpt, a)?,
    }
    let (out, e) = (a.out.clone(), echo("encode", a)?);
    Ok(Box::new(move |m| {
        m.latents = Some(out);
        m.commands.push(e);
    }))
}

fn encode_as<T: Scalar>(ckpt: &Checkpoint, a: &EncodeArgs) -> Result<()> {
    let critic = ckpt.critic_net::<T>()?;
    let (x, labels) = load_csv::<T>(&a.data)?;
    let z = encode_dataset(&critic, &x, ENCODE_BATCH)?;
    save_csv(&a.out, &z, labels.as_deref())
}

fn fit_gmm(a: &FitGmmArgs) -> Result<ManifestUpdate> {
    let (z, _) = load_csv::<f64>(&a.latents)?;
    let config = EmConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        n_restarts: a.restarts as usize,
        seed: a.seed,
        covariance_mode: match a.covariance {
            CovarianceArg::Full => CovarianceMode::Full,
            CovarianceArg::Diagonal => CovarianceMode::Diagonal,
        },
    };
    let fit = fit_em(&z, a.k as usize, &config)?;
    write_atomic(&a.out, format!("{}\n", fit.model.to_json()?).as_bytes())?;
    eprintln!(
        "fitted {} components: log-likelihood {:.6} after {} iterations",
        a.k, fit.log_likelihood, fit.iterations
    );
    let (out, e) = (a.out.clone(), echo("fit-gmm", a)?);
    Ok(Box::new(move |m| {
        m.gmm = Some(out);
        m.commands.push(e);
    }))
}

fn generate_cmd(a: &GenerateArgs) -> Result<ManifestUpdate> {
    let ckpt = read_checkpoint(&a.ckpt)?;
    match ckpt.scalar.as_str() {
        "f32" => generate_as::<f32>(&ckpt, a)?,
        _ => generate_as::<f64>(&ckpt, a)?,
    }
    let (out, e) = (a.out.clone(), echo("generate", a)?);
    Ok(Box::new(move |m| {
        push_unique(&mut m.samples, &out);
        m.commands.push(e);
    }))
}

fn generate_as<T: Scalar>(ckpt: &Checkpoint, a: &GenerateArgs) -> Result<()> {
    let g = ckpt.generator_net::<T>()?;
    let samples = match &a.gmm {
        Some(p) => {
            let gmm = read_gmm::<T>(p)?;
            generate(&g, LatentSource::Gmm(&gmm), a.n as usize, a.seed)?
        }
        None => generate(&g, LatentSource::Prior, a.n as usize, a.seed)?,
    };
    save_csv(&a.out, &samples, None)
}

#[derive(Serialize)]
struct ClusterReport {
    #[serde(flatten)]
    scores: ClusteringReport,
    n: usize,
    k: usize,
}

fn cluster(a: &ClusterArgs) -> Result<ManifestUpdate> {
    let gmm = read_gmm::<f64>(&a.gmm)?;
    let (z, _) = load_csv::<f64>(&a.latents)?;
    let (_, labels) = load_csv::<f64>(&a.labels)?;
    let labels = labels.ok_or_else(|| usage(format!("{} has no label column", a.labels.display())))?;
    if labels.len() != z.rows() {
        return Err(Error::ShapeMismatch {
            op: "cluster",
            lhs: z.shape().to_vec(),
            rhs: vec![labels.len()],
        });
    }
    let pred = gmm.predict(&z)?;
    let report = ClusterReport {
        scores: ClusteringReport::compute(&pred, &labels)?,
        n: labels.len(),
        k: gmm.n_components(),
    };
    write_json(&a.report, &report)?;
    eprintln!(
        "nmi {:.4} ari {:.4} acc {:.4}",
        report.scores.nmi, report.scores.ari, report.scores.acc
    );
    let (out, e) = (a.report.clone(), echo("cluster", a)?);
    Ok(Box::new(move |m| {
        push_unique(&mut m.reports, &out);
        m.commands.push(e);
    }))
}

#[derive(Serialize)]
struct EvalReport {
    #[serde(flatten)]
    metrics: ModeMetrics,
    n_samples: usize,
    n_modes: usize,
    sigma: f64,
    min_frac: f64,
}

fn eval(a: &EvalArgs) -> Result<ManifestUpdate> {
    let truth = read_gmm::<f64>(&a.truth_gmm)?;
    let probe = probe_from::<f64>(&truth)?;
    let (x, _) = load_csv::<f64>(&a.samples)?;
    let metrics = mode_metrics(&x, &probe.centers, probe.sigma, a.min_frac)?;
    eprintln!(
        "modes covered {} of {}, off-manifold fraction {:.4}",
        metrics.modes_covered,
        truth.n_components(),
        metrics.off_manifold_frac
    );
    let report = EvalReport {
        metrics,
        n_samples: x.rows(),
        n_modes: truth.n_components(),
        sigma: probe.sigma,
        min_frac: a.min_frac,
    };
    write_json(&a.report, &report)?;
    let (out, e) = (a.report.clone(), echo("eval", a)?);
    Ok(Box::new(move |m| {
        push_unique(&mut m.reports, &out);
        m.commands.push(e);
    }))
}

fn points_2d(x: &Tensor<f64>, what: &Path) -> Result<Vec<[f64; 2]>> {
    if x.cols() != 2 {
        return Err(usage(format!(
            "{} has {} columns; plots need 2D points",
            what.display(),
            x.cols()
        )));
    }
    Ok((0..x.rows()).map(|i| [x.at(i, 0), x.at(i, 1)]).collect())
}

fn plot(a: &PlotArgs) -> Result<ManifestUpdate> {
    let (x, _) = load_csv::<f64>(&a.points)?;
    let points = points_2d(&x, &a.points)?;
    let centers = match &a.centers {
        Some(p) => {
            let gmm = read_gmm::<f64>(p)?;
            let means: Vec<Vec<f64>> = gmm.means();
            points_2d(&Tensor::from_rows(&means)?, p)?
        }
        None => Vec::new(),
    };
    write_atomic(&a.out, svg::scatter(&points, &centers).as_bytes())?;
    let (out, e) = (a.out.clone(), echo("plot", a)?);
    Ok(Box::new(move |m| {
        push_unique(&mut m.plots, &out);
        m.commands.push(e);
    }))
}
