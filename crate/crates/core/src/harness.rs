//! Experiment plumbing: TOML experiment configs, multi-seed runs, aggregation into
//! steps-to-expert tables, the verification suites and the `meairl` command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversarial::{proposition1_alignment_gap, AdversarialError, ExpertBuffer};
use crate::dynamics::{ContinuousSample, TabularSample};
use crate::mdp::{
    discounted_occupancy, make_gridworld, make_noisy_pointmass, ContinuousEnv, DemoError,
    Demonstrations, MdpError, TabularMdp, TabularPolicy,
};
use crate::meairl::{
    expert_mean_return, generate_expert_continuous, generate_expert_tabular, mean_std,
    run_behavior_cloning_continuous, run_behavior_cloning_tabular, run_meairl_continuous,
    run_meairl_tabular, ExpertTraining, MeairlError, TabularEnv, TrainingConfig, TrainingRecord,
};
use crate::rng::rng_from_seed;
use crate::shaping::{
    check_policy_invariance, q_shift_identity_gap, shape_reward, Potential, ShapingError,
};
use crate::theory::{sweep_theorem2, sweep_theorem3, SweepSpec, TheoryError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Demo(#[from] DemoError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("training: {0}")]
    Training(#[from] MeairlError),
    #[error(transparent)]
    Expert(#[from] AdversarialError),
    #[error("invariance suite: {0}")]
    Shaping(#[from] ShapingError),
    #[error("bound sweep: {0}")]
    Theory(#[from] TheoryError),
    #[error("aggregate: {0}")]
    Aggregate(String),
}

impl HarnessError {
    /// `2` for configuration problems, `1` for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Environment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Gridworld {
        width: usize,
        height: usize,
        slip: f64,
        goal_reward: f64,
        discount: f64,
        horizon: usize,
    },
    Pointmass {
        noise_std: f64,
        discount: f64,
        horizon: usize,
    },
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self::Gridworld {
            width: 5,
            height: 5,
            slip: 0.3,
            goal_reward: 10.0,
            discount: 0.99,
            horizon: 100,
        }
    }
}

/// A constructed environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Tabular(TabularEnv),
    Continuous { name: String, env: ContinuousEnv },
}

impl EnvSpec {
    pub fn build(&self) -> Result<Env, HarnessError> {
        match *self {
            Self::Gridworld {
                width,
                height,
                slip,
                goal_reward,
                discount,
                horizon,
            } => {
                if horizon == 0 {
                    return Err(HarnessError::Config("env.horizon must be positive".into()));
                }
                let mdp = make_gridworld(width, height, slip, goal_reward, discount)
                    .map_err(|e| HarnessError::Config(format!("env: {e}")))?;
                Ok(Env::Tabular(TabularEnv {
                    name: format!("gridworld_{width}x{height}_slip{slip}"),
                    mdp,
                    horizon,
                }))
            }
            Self::Pointmass {
                noise_std,
                discount,
                horizon,
            } => {
                if horizon == 0 || !(0.0..1.0).contains(&discount) {
                    return Err(HarnessError::Config(
                        "env.horizon must be positive and env.discount in [0, 1)".into(),
                    ));
                }
                let mut env = make_noisy_pointmass(noise_std)
                    .map_err(|e| HarnessError::Config(format!("env: {e}")))?;
                env.horizon = horizon;
                env.discount = discount;
                Ok(Env::Continuous {
                    name: format!("pointmass_noise{noise_std}"),
                    env,
                })
            }
        }
    }
}

/// Algorithm run by `train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Meairl,
    AirlSampleBaseline,
    BcNone,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Meairl => "meairl",
            Self::AirlSampleBaseline => "airl_sample_baseline",
            Self::BcNone => "bc_none",
        }
    }
}

/// Everything one `train` / `expert` invocation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Expert episodes generated per seed when `demos` is not set.
    pub expert_episodes: usize,
    /// Demonstration file shared by all seeds; generated per seed when absent.
    pub demos: Option<PathBuf>,
    pub env: EnvSpec,
    /// Per-seed `seed` is taken from `seeds`; the field here is ignored.
    pub training: TrainingConfig,
    pub expert_training: ExpertTraining,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Meairl,
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("runs"),
            expert_episodes: 40,
            demos: None,
            env: EnvSpec::default(),
            training: TrainingConfig::default(),
            expert_training: ExpertTraining::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Config(format!("{}: {source}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.expert_episodes == 0 {
            return Err(HarnessError::Config(
                "expert_episodes must be at least 1".into(),
            ));
        }
        self.training
            .validate()
            .map_err(|e| HarnessError::Config(format!("training: {e}")))?;
        self.env.build().map(|_| ())
    }

    /// Training config for one seed and the configured variant.
    pub fn training_for(&self, seed: u64) -> TrainingConfig {
        let cfg = TrainingConfig {
            seed,
            ..self.training.clone()
        };
        match self.variant {
            Variant::AirlSampleBaseline => cfg.sample_baseline(),
            _ => cfg,
        }
    }

    /// Output directory with the `MEAIRL_OUT` override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        std::env::var_os("MEAIRL_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }
}

/// Demonstrations for `seed`: the configured file, or a fresh expert rollout.
pub fn expert_demos(
    cfg: &ExperimentConfig,
    env: &Env,
    seed: u64,
) -> Result<Demonstrations, HarnessError> {
    if let Some(path) = &cfg.demos {
        return Ok(Demonstrations::read(path)?);
    }
    Ok(match env {
        Env::Tabular(t) => generate_expert_tabular(t, seed, cfg.expert_episodes)?,
        Env::Continuous { name, env } => {
            generate_expert_continuous(env, name, seed, cfg.expert_episodes, &cfg.expert_training)?
        }
    })
}

pub fn demo_return(env: &Env, demos: &Demonstrations) -> Result<f64, HarnessError> {
    Ok(match env {
        Env::Tabular(t) => expert_mean_return(demos, Some(&t.mdp), None)?,
        Env::Continuous { env, .. } => expert_mean_return(demos, None, Some(env))?,
    })
}

/// Runs the configured variant for one seed.
pub fn run_seed(
    cfg: &ExperimentConfig,
    env: &Env,
    demos: &Demonstrations,
    seed: u64,
) -> Result<RunOutput, HarnessError> {
    let tc = cfg.training_for(seed);
    Ok(match env {
        Env::Tabular(t) => {
            let expert = ExpertBuffer::<TabularSample>::from_demonstrations(demos)?;
            let record = match cfg.variant {
                Variant::BcNone => run_behavior_cloning_tabular(t, &expert, &tc)?.0,
                _ => run_meairl_tabular(t, &expert, &tc)?.record,
            };
            RunOutput {
                record,
                checkpoints: Vec::new(),
            }
        }
        Env::Continuous { env, .. } => {
            let expert = ExpertBuffer::<ContinuousSample>::from_demonstrations(demos)?;
            match cfg.variant {
                Variant::BcNone => RunOutput {
                    record: run_behavior_cloning_continuous(env, &expert, &tc)?.0,
                    checkpoints: Vec::new(),
                },
                _ => {
                    let out = run_meairl_continuous(env, &expert, &tc)?;
                    RunOutput {
                        record: out.record,
                        checkpoints: out.checkpoints,
                    }
                }
            }
        }
    })
}

pub struct RunOutput {
    pub record: TrainingRecord,
    pub checkpoints: Vec<(usize, String)>,
}

fn write_file(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

/// `train`: one record per seed in `<out>/<variant>/seed<k>.csv`, the resolved config
/// in `<out>/<variant>/config.toml` and per-seed expert returns in
/// `<out>/<variant>/expert_returns.csv`. Returns the variant directory.
pub fn train(cfg: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    let env = cfg.env.build()?;
    let dir = cfg.resolved_output_dir().join(cfg.variant.name());
    write_file(&dir.join("config.toml"), &cfg.to_toml())?;
    let mut expert_csv = String::from("seed,expert_return\n");
    for &seed in &cfg.seeds {
        let demos = expert_demos(cfg, &env, seed)?;
        let _ = writeln!(expert_csv, "{seed},{}", demo_return(&env, &demos)?);
        let out = run_seed(cfg, &env, &demos, seed)?;
        write_file(&dir.join(format!("seed{seed}.csv")), &out.record.to_csv())?;
        for (step, text) in &out.checkpoints {
            write_file(
                &dir.join(format!("checkpoints/seed{seed}_step{step}.txt")),
                text,
            )?;
        }
    }
    write_file(&dir.join("expert_returns.csv"), &expert_csv)?;
    Ok(dir)
}

/// `expert`: demonstrations for every seed in `<out>/demos/seed<k>.txt`.
pub fn write_experts(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, HarnessError> {
    let env = cfg.env.build()?;
    let dir = cfg.resolved_output_dir().join("demos");
    let mut paths = Vec::new();
    for &seed in &cfg.seeds {
        let demos = expert_demos(cfg, &env, seed)?;
        let path = dir.join(format!("seed{seed}.txt"));
        write_file(&path, &demos.to_text())?;
        paths.push(path);
    }
    Ok(paths)
}

/// Per-step statistics across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: usize,
    pub mean: f64,
    /// Sample standard deviation across records (0 for a single record).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rows: Vec<AggregateRow>,
    /// First step whose across-seed mean return reaches the expert return.
    pub steps_to_expert: Option<usize>,
}

impl Aggregate {
    pub fn steps_to_expert_cell(&self) -> String {
        self.steps_to_expert
            .map_or_else(|| "X".to_string(), |s| s.to_string())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,mean_return,std_return\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.step, r.mean, r.std);
        }
        out
    }
}

/// Mean and standard deviation of `return_mean` across records on a shared grid.
pub fn aggregate(
    records: &[TrainingRecord],
    expert_return: f64,
) -> Result<Aggregate, HarnessError> {
    let first = records
        .first()
        .ok_or_else(|| HarnessError::Aggregate("no records".into()))?;
    let grid: Vec<usize> = first.rows.iter().map(|r| r.step).collect();
    for (i, r) in records.iter().enumerate() {
        if r.rows.iter().map(|x| x.step).ne(grid.iter().copied()) {
            return Err(HarnessError::Aggregate(format!(
                "record {i} uses a different evaluation grid"
            )));
        }
    }
    let rows: Vec<AggregateRow> = grid
        .iter()
        .enumerate()
        .map(|(k, &step)| {
            let xs: Vec<f64> = records.iter().map(|r| r.rows[k].return_mean).collect();
            let (mean, std) = mean_std(&xs);
            AggregateRow { step, mean, std }
        })
        .collect();
    let steps_to_expert = rows
        .iter()
        .find(|r| r.mean >= expert_return)
        .map(|r| r.step);
    Ok(Aggregate {
        rows,
        steps_to_expert,
    })
}

/// One variant's directory loaded for `compare`.
struct VariantRuns {
    name: String,
    records: Vec<(String, TrainingRecord)>,
    expert_return: f64,
}

fn load_variant_dir(dir: &Path) -> Result<VariantRuns, HarnessError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_stem()
                    .is_some_and(|s| s.to_string_lossy().starts_with("seed"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Aggregate(format!(
            "{}: no seed*.csv records",
            dir.display()
        )));
    }
    let mut records = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(io_err(f))?;
        let stem = f
            .file_stem()
            .expect("filtered above")
            .to_string_lossy()
            .into_owned();
        records.push((stem, TrainingRecord::from_csv(&text)?));
    }
    let er_path = dir.join("expert_returns.csv");
    let text = std::fs::read_to_string(&er_path).map_err(io_err(&er_path))?;
    let mut returns = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let v = line
            .split(',')
            .nth(1)
            .and_then(|x| x.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                HarnessError::Aggregate(format!("{}: malformed line {line:?}", er_path.display()))
            })?;
        returns.push(v);
    }
    Ok(VariantRuns {
        name,
        records,
        expert_return: mean_std(&returns).0,
    })
}

/// `compare`: steps-to-threshold table over variant directories written by `train`.
/// The threshold is `fraction` times the mean expert return of each directory, or a
/// fixed `expert_return` when given. Per-step mean and std across seeds go to
/// `<dir>/aggregate.csv`.
pub fn compare(
    dirs: &[PathBuf],
    fraction: f64,
    expert_return: Option<f64>,
) -> Result<String, HarnessError> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "variant,threshold,steps_to_expert,per_seed,final_mean,final_std"
    );
    for d in dirs {
        let v = load_variant_dir(d)?;
        let threshold = expert_return.unwrap_or(fraction * v.expert_return);
        let records: Vec<TrainingRecord> = v.records.iter().map(|(_, r)| r.clone()).collect();
        let agg = aggregate(&records, threshold)?;
        write_file(&d.join("aggregate.csv"), &agg.to_csv())?;
        let per_seed: Vec<String> = v
            .records
            .iter()
            .map(|(name, r)| {
                format!(
                    "{name}={}",
                    r.steps_to(threshold)
                        .map_or("X".to_string(), |s| s.to_string())
                )
            })
            .collect();
        let last = agg.rows.last().cloned().unwrap_or(AggregateRow {
            step: 0,
            mean: f64::NAN,
            std: f64::NAN,
        });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            v.name,
            threshold,
            agg.steps_to_expert_cell(),
            per_seed.join(" "),
            last.mean,
            last.std
        );
    }
    Ok(out)
}

/// Random tabular instances checked for advantage invariance under exact-kernel
/// shaping and the `Q_R = Q_R̂ + φ` identity.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSuite {
    pub instances: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub gammas: Vec<f64>,
    /// Potentials are drawn from `U[-potential_scale, potential_scale]`.
    pub potential_scale: f64,
    /// Threshold applied to both gaps.
    pub tol: f64,
    /// Bellman residual for the identity (the advantage comparison uses the oracle
    /// tolerance); its gap carries `2·tol/(1−γ)` of solver error.
    pub identity_solver_tol: f64,
    pub seed: u64,
}

impl Default for InvarianceSuite {
    fn default() -> Self {
        Self {
            instances: 200,
            max_states: 10,
            max_actions: 4,
            gammas: vec![0.5, 0.9, 0.99],
            potential_scale: 5.0,
            tol: 1e-8,
            identity_solver_tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSummary {
    pub instances: usize,
    pub max_advantage_gap: f64,
    pub max_q_shift_gap: f64,
    pub tol: f64,
}

impl InvarianceSummary {
    pub fn advantage_ok(&self) -> bool {
        self.max_advantage_gap <= self.tol
    }

    pub fn q_shift_ok(&self) -> bool {
        self.max_q_shift_gap <= self.tol
    }
}

pub fn run_invariance_suite(suite: &InvarianceSuite) -> Result<InvarianceSummary, HarnessError> {
    let mut rng = rng_from_seed(suite.seed);
    let mut out = InvarianceSummary {
        instances: suite.instances,
        max_advantage_gap: 0.0,
        max_q_shift_gap: 0.0,
        tol: suite.tol,
    };
    for i in 0..suite.instances {
        let gamma = suite.gammas[i % suite.gammas.len()];
        let ns = rng.random_range(1..=suite.max_states);
        let na = rng.random_range(1..=suite.max_actions);
        let mdp = TabularMdp::random(ns, na, gamma, &mut rng);
        let c = suite.potential_scale;
        let phi = Potential::new((0..ns).map(|_| rng.random_range(-c..=c)).collect())?;
        let shaped = shape_reward(&mdp, &phi, mdp.kernel())?;
        let rep = check_policy_invariance(&mdp, mdp.reward(), &shaped.table, suite.tol)?;
        out.max_advantage_gap = out.max_advantage_gap.max(rep.max_advantage_gap);
        out.max_q_shift_gap = out.max_q_shift_gap.max(q_shift_identity_gap(
            &mdp,
            &phi,
            mdp.kernel(),
            suite.identity_solver_tol,
        )?);
    }
    Ok(out)
}

/// Largest discriminator / MCE gradient alignment gap over random instances whose
/// expert occupancy comes from a random policy on the same MDP.
pub fn run_alignment_suite(instances: usize, gamma: f64, seed: u64) -> Result<f64, HarnessError> {
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let ns = rng.random_range(2..=6);
        let na = rng.random_range(2..=4);
        let mdp = TabularMdp::random(ns, na, gamma, &mut rng);
        let theta: Vec<f64> = (0..ns * na).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let probs: Vec<f64> = (0..ns * na).map(|_| rng.random_range(0.05..=1.0)).collect();
        let expert = TabularPolicy::from_unnormalized(ns, na, probs)?;
        let occ = discounted_occupancy(&mdp, &expert, 1e-13)?;
        let gap = proposition1_alignment_gap(&mdp, &theta, &occ, None, 1e-12)?;
        worst = worst.max(gap);
    }
    Ok(worst)
}

#[derive(Parser, Debug)]
#[command(
    name = "meairl",
    version,
    about = "Model-enhanced adversarial IRL experiments and verifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate expert demonstrations for every configured seed.
    Expert {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Train the configured variant on every seed and write training records.
    Train {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Check advantage invariance and the Q-shift identity on random MDPs.
    VerifyInvariance {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the reward-error and optimal-value bound sweeps and write their CSVs.
    VerifyBounds {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (overridden by `MEAIRL_OUT`).
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Aggregate `train` outputs into a steps-to-expert table.
    Compare {
        /// Variant directories written by `train`.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Threshold as a fraction of the mean expert return.
        #[arg(long, default_value_t = 0.9)]
        fraction: f64,
        /// Fixed threshold instead of the fraction.
        #[arg(long)]
        expert_return: Option<f64>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(default: &Path) -> PathBuf {
    std::env::var_os("MEAIRL_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| default.to_path_buf())
}

fn execute(cmd: Command) -> Result<bool, HarnessError> {
    match cmd {
        Command::Expert { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for p in write_experts(&cfg)? {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Train { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = train(&cfg)?;
            println!("wrote {}", dir.display());
            Ok(true)
        }
        Command::VerifyInvariance {
            instances,
            tol,
            seed,
        } => {
            let s = run_invariance_suite(&InvarianceSuite {
                instances,
                tol,
                seed,
                ..InvarianceSuite::default()
            })?;
            println!(
                "instances={} max_advantage_gap={:.3e} max_q_shift_gap={:.3e} tol={:.1e}",
                s.instances, s.max_advantage_gap, s.max_q_shift_gap, s.tol
            );
            let ok = s.advantage_ok() && s.q_shift_ok();
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::VerifyBounds {
            instances,
            seed,
            out,
        } => {
            let spec = SweepSpec {
                instances,
                seed,
                ..SweepSpec::default()
            };
            let dir = out_dir(&out);
            let t2 = sweep_theorem2(&spec)?;
            let t3 = sweep_theorem3(&spec)?;
            write_file(&dir.join("reward_error_sweep.csv"), &t2.to_csv())?;
            write_file(&dir.join("value_gap_sweep.csv"), &t3.to_csv())?;
            println!(
                "reward error: instances={} violations={} max_ratio={:.4}",
                t2.rows.len(),
                t2.violations,
                t2.max_ratio
            );
            println!(
                "optimal value: instances={} violations={} max_ratio={:.3e} max_policy_gap_in_estimate={:.4} max_transfer_gap={:.4}",
                t3.rows.len(),
                t3.violations,
                t3.max_ratio,
                t3.max_policy_gap_in_estimate,
                t3.max_transfer_gap
            );
            let ok = t2.holds() && t3.holds();
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::Compare {
            dirs,
            fraction,
            expert_return,
            out,
        } => {
            let table = compare(&dirs, fraction, expert_return)?;
            print!("{table}");
            if let Some(path) = out {
                write_file(&path, &table)?;
            }
            Ok(true)
        }
    }
}

/// Entry point of the `meairl` binary; returns the process exit code.
pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
