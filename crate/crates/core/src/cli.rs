//! Command-line entry points: `synth`, `train`, `eval` and `sweep`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::data::{generate_synthetic, load_dataset, save_dataset, DatasetBundle, Holdout, SyntheticSpec};
use crate::error::{Error, Result};
use crate::scoring::Ensemble;
use crate::selection::PaceMode;
use crate::trainer::{evaluate, sweep_beta, train, train_boosting_only, write_sweep_csv, TrainInputs};

#[derive(Debug, Parser)]
#[command(name = "bzscr", version, about = "Boosted zero-shot classification with semantic correlation regularization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic zero-shot dataset.
    Synth(SynthArgs),
    /// Train an ensemble on a data directory.
    Train(TrainArgs),
    /// Evaluate a trained model on the unseen-class test set.
    Eval(EvalArgs),
    /// Train and evaluate once per beta/N value.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 15)]
    pub classes: usize,
    #[arg(long, default_value_t = 10)]
    pub seen: usize,
    /// Embedding dimension d.
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Rank of the embedding matrix (>= dim for full rank).
    #[arg(long, default_value_t = 8)]
    pub latent: usize,
    /// Feature dimension m.
    #[arg(long, default_value_t = 16)]
    pub feat: usize,
    #[arg(long, default_value_t = 60)]
    pub per_class: usize,
    #[arg(long, default_value_t = 0.25)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags that override the matching config keys.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub nu_over_n: Option<f64>,
    #[arg(long)]
    pub beta_over_n: Option<f64>,
    #[arg(long)]
    pub t_es: Option<usize>,
    #[arg(long)]
    pub max_iters_outer: Option<usize>,
    #[arg(long, value_parser = parse_pace_mode)]
    pub pace_mode: Option<PaceMode>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub zeta0: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub p_step: Option<f64>,
    #[arg(long)]
    pub solver_max_iters: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub power_tol: Option<f64>,
    /// Pin all sample weights to 1.
    #[arg(long)]
    pub boosting_only: bool,
}

fn parse_pace_mode(s: &str) -> std::result::Result<PaceMode, String> {
    match s {
        "geometric" => Ok(PaceMode::Geometric),
        "quantile" => Ok(PaceMode::Quantile),
        other => Err(format!("unknown pace mode {other:?}; expected geometric or quantile")),
    }
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { c.$($field).+ = v; })*
            };
        }
        set!(
            seed => seed,
            nu_over_n => nu_over_n,
            beta_over_n => beta_over_n,
            t_es => t_es,
            max_iters_outer => max_iters_outer,
            pace_mode => pace.mode,
            lambda0 => pace.lambda0,
            zeta0 => pace.zeta0,
            lambda_max => pace.lambda_max,
            mu => pace.mu,
            p0 => pace.p0,
            p_step => pace.p_step,
            solver_max_iters => solver.max_iters,
            grad_tol => solver.grad_tol,
            epsilon => solver.epsilon,
            power_tol => solver.power_tol,
        );
        if self.boosting_only {
            c.boosting_only = true;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fail if any weight solve stopped before reaching its tolerance.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Selects the divergence source used for the mean divergence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated beta/N values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut config);
    config.train_config()?;
    Ok(config)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        classes: a.classes,
        seen: a.seen,
        embed_dim: a.dim,
        latent_dim: a.latent,
        feature_dim: a.feat,
        samples_per_class: a.per_class,
        noise_scale: a.noise,
    };
    let data = generate_synthetic(&spec, a.seed)?;
    let bundle = DatasetBundle {
        train: data.train,
        test: Some(data.test),
        embeddings: data.embeddings,
        split: data.split,
        holdout: Holdout::default(),
        delta: None,
        path_lengths: None,
    };
    save_dataset(&a.out, &bundle)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = load_config(a.config.as_deref(), &a.overrides)?;
    let train_config = config.train_config()?;
    let bundle = load_dataset(&a.data)?;
    let delta = config.divergence(&bundle)?;
    let inputs = TrainInputs {
        data: &bundle.train,
        embeddings: &bundle.embeddings,
        split: &bundle.split,
        delta: &delta,
        holdout: bundle.holdout,
    };
    let (ens, trace) = if config.boosting_only {
        train_boosting_only(&inputs, &train_config)?
    } else {
        train(&inputs, &train_config)?
    };

    create_dir(&a.out)?;
    config.save(a.out.join("effective_config.json"))?;
    ens.save(a.out.join("model.json"), bundle.train.feature_dim(), bundle.embeddings.embed_dim())?;
    trace.write_csv(a.out.join("trace.csv"))?;
    if let Some(test) = &bundle.test {
        evaluate(&ens, test, &bundle.embeddings, &delta, bundle.split.unseen())?.save(a.out.join("report.json"))?;
    }
    if a.strict && !trace.solver_always_converged() {
        return Err(Error::InvalidInput(
            "strict mode: a weight solve hit its iteration limit before converging".into(),
        ));
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let overrides = Overrides {
        seed: a.seed,
        ..Overrides::default()
    };
    let config = load_config(a.config.as_deref(), &overrides)?;
    let model_path = a.model.join_if_dir("model.json");
    if !model_path.exists() {
        return Err(Error::MissingFile(model_path));
    }
    let (ens, m, d) = Ensemble::load(&model_path)?;
    let bundle = load_dataset(&a.data)?;
    if m != bundle.train.feature_dim() || d != bundle.embeddings.embed_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model expects m = {m}, d = {d}; data has m = {}, d = {}",
            bundle.train.feature_dim(),
            bundle.embeddings.embed_dim()
        )));
    }
    let test = bundle
        .test
        .as_ref()
        .ok_or_else(|| Error::MissingFile(a.data.join("test").join("features.csv")))?;
    let delta = config.divergence(&bundle)?;
    let report = evaluate(&ens, test, &bundle.embeddings, &delta, bundle.split.unseen())?;
    create_dir(&a.out)?;
    report.save(a.out.join("report.json"))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let config = load_config(a.config.as_deref(), &a.overrides)?;
    let train_config = config.train_config()?;
    let bundle = load_dataset(&a.data)?;
    let delta = config.divergence(&bundle)?;
    let test = bundle
        .test
        .as_ref()
        .ok_or_else(|| Error::MissingFile(a.data.join("test").join("features.csv")))?;
    let inputs = TrainInputs {
        data: &bundle.train,
        embeddings: &bundle.embeddings,
        split: &bundle.split,
        delta: &delta,
        holdout: bundle.holdout,
    };
    let rows = sweep_beta(&inputs, test, &train_config, &a.grid)?;
    create_dir(&a.out)?;
    config.save(a.out.join("effective_config.json"))?;
    write_sweep_csv(a.out.join("sweep.csv"), &rows)
}

trait JoinIfDir {
    fn join_if_dir(&self, file: &str) -> PathBuf;
}

impl JoinIfDir for PathBuf {
    fn join_if_dir(&self, file: &str) -> PathBuf {
        if self.is_dir() {
            self.join(file)
        } else {
            self.clone()
        }
    }
}
