use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use krr_sketch::evaluation::{
    evaluate_selection, generate_synthetic, CheckpointMetrics, RiskSetting, SyntheticSpec, TargetFn,
};
use krr_sketch::kernel::gram;
use krr_sketch::leverage::{alpha, beta, exact_rls};
use krr_sketch::nystrom::DESK_SCALE_CAP;
use krr_sketch::par::map_indices;
use krr_sketch::pipeline::{
    batch_budget, batch_exact, exact_oracle, ink_estimate_run, ink_oracle_run, streaming_budget,
    InkConfig, RunCheckpoint,
};
use krr_sketch::{Dataset, RngHandle, Selection};

use crate::config::{Algorithm, RunArgs, RunConfig};
use crate::ingest;
use crate::output::{
    self, CheckpointRecord, CheckpointTiming, CheckpointsFile, Timing, SPEC_VERSION,
};

/// What a command reports beyond success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    ConditionFailed,
}

pub struct RunOutput {
    pub config: RunConfig,
    pub records: Vec<CheckpointRecord>,
    pub timing: Timing,
    pub max_q: usize,
}

/// Runs the configured algorithm over `dataset`. The returned config has its
/// budget filled in.
pub fn execute(mut config: RunConfig, dataset: &Dataset) -> Result<RunOutput> {
    let start = Instant::now();
    let rng = RngHandle::new(config.seed);
    let n = dataset.len();
    match config.algorithm {
        Algorithm::BatchExact => {
            let m = match config.budget {
                Some(m) => m as usize,
                None => {
                    let deff = exact_rls(&gram(dataset, &config.kernel, n)?, config.gamma)?.deff;
                    batch_budget(deff, config.epsilon, config.delta, n)?
                }
            };
            config.budget = Some(m as u64);
            let run = batch_exact(dataset, config.kernel, config.gamma, m, rng)?;
            let mut counts = std::collections::BTreeMap::new();
            for &i in &run.draws {
                *counts.entry(i).or_insert(0u64) += 1;
            }
            let record = CheckpointRecord {
                t: n,
                q: counts.len(),
                deff_tilde: run.profile.deff,
                dictionary_indices: counts.keys().map(|i| i + 1).collect(),
                weights: counts.values().copied().collect(),
            };
            let elapsed = start.elapsed().as_secs_f64();
            Ok(RunOutput {
                max_q: record.q,
                timing: Timing {
                    spec_version: SPEC_VERSION,
                    total_secs: elapsed,
                    checkpoints: vec![CheckpointTiming {
                        t: n,
                        elapsed_secs: elapsed,
                    }],
                },
                records: vec![record],
                config,
            })
        }
        Algorithm::InkOracle | Algorithm::InkEstimate => {
            let q_bar = config.budget.expect("validated");
            let mut ink = InkConfig::new(config.gamma, q_bar)
                .with_checkpoints(config.checkpoint_every)
                .with_scope(config.scope.into());
            ink.safety_factor = config.safety_factor;
            let run = if config.algorithm == Algorithm::InkOracle {
                check_desk_scale(n, "the exact oracle")?;
                let mut oracle = exact_oracle(dataset, config.kernel, config.gamma)?;
                ink_oracle_run(dataset, config.kernel, ink, &mut oracle, rng)?
            } else {
                ink_estimate_run(dataset, config.kernel, ink, config.epsilon, rng)?
            };
            Ok(RunOutput {
                max_q: run.trace.q.iter().copied().max().unwrap_or(0),
                timing: Timing {
                    spec_version: SPEC_VERSION,
                    total_secs: start.elapsed().as_secs_f64(),
                    checkpoints: run
                        .checkpoints
                        .iter()
                        .map(|c| CheckpointTiming {
                            t: c.t,
                            elapsed_secs: c.elapsed_secs,
                        })
                        .collect(),
                },
                records: run.checkpoints.iter().map(record_of).collect(),
                config,
            })
        }
    }
}

fn record_of(cp: &RunCheckpoint) -> CheckpointRecord {
    CheckpointRecord {
        t: cp.t,
        q: cp.q,
        deff_tilde: cp.deff_tilde,
        dictionary_indices: cp.indices.iter().map(|i| i + 1).collect(),
        weights: cp.weights.clone(),
    }
}

fn check_desk_scale(n: usize, what: &str) -> Result<()> {
    if n > DESK_SCALE_CAP {
        bail!("refusing to run {what} on {n} points: the desk-scale limit is {DESK_SCALE_CAP}");
    }
    Ok(())
}

/// Rebuilds the weighted selection a checkpoint describes.
fn selection_of(
    record: &CheckpointRecord,
    config: &RunConfig,
    dataset: &Dataset,
) -> Result<Selection> {
    if record.dictionary_indices.len() != record.weights.len() {
        bail!(
            "checkpoint t={}: indices and weights differ in length",
            record.t
        );
    }
    if record
        .dictionary_indices
        .iter()
        .any(|&i| i == 0 || i > record.t)
    {
        bail!(
            "checkpoint t={}: dictionary index outside 1..={}",
            record.t,
            record.t
        );
    }
    match config.algorithm {
        Algorithm::BatchExact => {
            let p =
                exact_rls(&gram(dataset, &config.kernel, record.t)?, config.gamma)?.probabilities;
            let draws: Vec<usize> = record
                .dictionary_indices
                .iter()
                .zip(&record.weights)
                .flat_map(|(&i, &c)| std::iter::repeat_n(i - 1, c as usize))
                .collect();
            Ok(Selection::from_draws(&draws, &p)?)
        }
        _ => {
            let cp = RunCheckpoint {
                t: record.t,
                q: record.q,
                deff_tilde: record.deff_tilde,
                indices: record.dictionary_indices.iter().map(|i| i - 1).collect(),
                weights: record.weights.clone(),
                elapsed_secs: 0.0,
            };
            Ok(cp.selection()?)
        }
    }
}

/// Second pass: checks every checkpoint against the dense Gram matrix.
pub fn evaluate(
    config: &RunConfig,
    dataset: &Dataset,
    records: &[CheckpointRecord],
    risk: Option<&RiskSetting>,
) -> Result<Vec<CheckpointMetrics>> {
    check_desk_scale(dataset.len(), "verification")?;
    if let Some(r) = records.iter().find(|r| r.t > dataset.len()) {
        bail!(
            "checkpoint t={} exceeds the {} points in the dataset",
            r.t,
            dataset.len()
        );
    }
    map_indices(records.len(), |j| -> Result<CheckpointMetrics> {
        let r = &records[j];
        let sel = selection_of(r, config, dataset)?;
        Ok(evaluate_selection(
            dataset,
            &config.kernel,
            config.gamma,
            config.epsilon,
            risk,
            &sel,
            r.q,
            r.deff_tilde,
        )?)
    })
    .into_iter()
    .collect()
}

fn write_verification(
    dir: &Path,
    config: &RunConfig,
    metrics: &[CheckpointMetrics],
) -> Result<bool> {
    output::write_verify(&dir.join(output::VERIFY_FILE), metrics)?;
    let report = output::conditions(config.gamma, config.epsilon, metrics);
    output::write_json(&dir.join(output::CONDITIONS_FILE), &report)?;
    Ok(report.all_hold)
}

pub fn run(args: &RunArgs) -> Result<Outcome> {
    let (config, out_dir) = args.resolve()?;
    let dataset = ingest::load(&config.input)?;
    let out = execute(config, &dataset)?;
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let file = CheckpointsFile {
        spec_version: SPEC_VERSION.into(),
        config_echo: out.config.clone(),
        checkpoints: out.records.clone(),
    };
    output::write_json(&out_dir.join(output::CHECKPOINTS_FILE), &file)?;
    output::write_metrics(&out_dir.join(output::METRICS_FILE), &out.records)?;
    output::write_json(&out_dir.join(output::TIMING_FILE), &out.timing)?;
    let last = out.records.last().expect("at least one checkpoint");
    println!(
        "{} points, {} checkpoints, final Q = {}, deff_tilde = {:.6}",
        dataset.len(),
        out.records.len(),
        last.q,
        last.deff_tilde
    );
    if !out.config.verify {
        return Ok(Outcome::Ok);
    }
    let metrics = evaluate(&out.config, &dataset, &out.records, None)?;
    let ok = write_verification(&out_dir, &out.config, &metrics)?;
    report_conditions(&metrics);
    Ok(if ok {
        Outcome::Ok
    } else {
        Outcome::ConditionFailed
    })
}

fn report_conditions(metrics: &[CheckpointMetrics]) {
    let failed: Vec<usize> = metrics
        .iter()
        .filter(|m| !(m.lower_ok && m.upper_ok))
        .map(|m| m.t)
        .collect();
    if failed.is_empty() {
        println!(
            "reconstruction condition holds at all {} checkpoints",
            metrics.len()
        );
    } else {
        println!(
            "reconstruction condition fails at {} of {} checkpoints (t = {:?})",
            failed.len(),
            metrics.len(),
            failed
        );
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Directory holding a previous run's checkpoints.json
    #[arg(long, env = "KRR_SKETCH_RUN")]
    pub run: PathBuf,
    /// Dataset to re-stream; defaults to the run's recorded input
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Noise-free targets f*, one per line; enables risk columns
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Noise level used with --truth
    #[arg(long, default_value_t = 0.0)]
    pub noise_std: f64,
    /// Where to write the reports; defaults to the run directory
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let file = output::read_checkpoints(&args.run)?;
    let mut config = file.config_echo;
    if let Some(p) = &args.input {
        config.input.path = p.clone();
    }
    config.validate()?;
    let dataset = ingest::load(&config.input)?;
    let risk = match &args.truth {
        Some(p) => {
            let f_star = ingest::read_vector(p)?;
            if f_star.len() != dataset.len() {
                bail!(
                    "{} has {} values for {} points",
                    p.display(),
                    f_star.len(),
                    dataset.len()
                );
            }
            if !(args.noise_std.is_finite() && args.noise_std >= 0.0) {
                bail!("noise std must be nonnegative, got {}", args.noise_std);
            }
            Some(RiskSetting {
                f_star,
                noise_std: args.noise_std,
                mu: config.mu,
            })
        }
        None => None,
    };
    let metrics = evaluate(&config, &dataset, &file.checkpoints, risk.as_ref())?;
    let dir = args.output.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let ok = write_verification(&dir, &config, &metrics)?;
    report_conditions(&metrics);
    Ok(if ok {
        Outcome::Ok
    } else {
        Outcome::ConditionFailed
    })
}

#[derive(Debug, Clone, Args)]
pub struct SuggestArgs {
    /// Anticipated final effective dimension
    #[arg(long)]
    pub deff: f64,
    #[arg(long, default_value_t = crate::config::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = crate::config::DEFAULT_DELTA)]
    pub delta: f64,
    /// Stream length
    #[arg(long)]
    pub n: usize,
    /// λ_max(K)/γ, used in β
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// Budget for an exact leverage oracle (α = β = 1)
    #[arg(long)]
    pub exact_oracle: bool,
}

pub fn suggest_budget(args: &SuggestArgs) -> Result<()> {
    let (a, b) = if args.exact_oracle {
        (1.0, 1.0)
    } else {
        (alpha(args.epsilon)?, beta(args.epsilon, args.rho)?)
    };
    let q_bar = streaming_budget(args.deff, args.epsilon, args.delta, args.n, a, b)?;
    println!("alpha = {a}");
    println!("beta = {b}");
    println!("q_bar = {q_bar}");
    println!("cap = {}", 8 * q_bar);
    println!(
        "batch_m = {}",
        batch_budget(args.deff, args.epsilon, args.delta, args.n)?
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds, starting at --seed
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
}

pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs independent seeds concurrently and writes one summary row per seed.
/// Exits 2 when any seed hit an invariant violation.
pub fn sweep(args: &SweepArgs) -> Result<Outcome> {
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let (config, out_dir) = args.run.resolve()?;
    let dataset = ingest::load(&config.input)?;
    let rows = map_indices(args.seeds as usize, |k| {
        let mut c = config.clone();
        c.seed = config.seed + k as u64;
        let seed = c.seed;
        (seed, sweep_one(c, &dataset))
    });
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join(SWEEP_FILE);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record([
        "seed",
        "status",
        "final_Q",
        "max_Q",
        "deff_tilde",
        "condition_holds",
        "final_spectral_gap",
    ])?;
    let mut first_invariant = None;
    for (seed, res) in &rows {
        match res {
            Ok(s) => w.write_record([
                seed.to_string(),
                "ok".into(),
                s.final_q.to_string(),
                s.max_q.to_string(),
                output::num(s.deff_tilde),
                s.holds.map(|h| h.to_string()).unwrap_or_default(),
                s.gap.map(output::num).unwrap_or_default(),
            ])?,
            Err(e) => {
                if let Some(krr_sketch::Error::Invariant(msg)) =
                    e.downcast_ref::<krr_sketch::Error>()
                {
                    first_invariant.get_or_insert_with(|| format!("seed {seed}: {msg}"));
                    w.write_record([
                        seed.to_string(),
                        "invariant".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ])?;
                } else {
                    return Err(anyhow::anyhow!("seed {seed}: {e:#}"));
                }
            }
        }
    }
    w.flush()?;
    let ok = rows.iter().filter(|(_, r)| r.is_ok()).count();
    println!(
        "{ok} of {} seeds completed; summary in {}",
        rows.len(),
        path.display()
    );
    match first_invariant {
        Some(msg) => Err(krr_sketch::Error::Invariant(msg).into()),
        None => Ok(Outcome::Ok),
    }
}

struct SweepRow {
    final_q: usize,
    max_q: usize,
    deff_tilde: f64,
    holds: Option<bool>,
    gap: Option<f64>,
}

fn sweep_one(config: RunConfig, dataset: &Dataset) -> Result<SweepRow> {
    let out = execute(config, dataset)?;
    let last = out.records.last().expect("at least one checkpoint");
    let (holds, gap) = if out.config.verify {
        let m = evaluate(&out.config, dataset, &out.records, None)?;
        (
            Some(m.iter().all(|x| x.lower_ok && x.upper_ok)),
            m.last().map(|x| x.spectral_gap),
        )
    } else {
        (None, None)
    };
    Ok(SweepRow {
        final_q: last.q,
        max_q: out.max_q,
        deff_tilde: last.deff_tilde,
        holds,
        gap,
    })
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Sine,
    Radial,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    #[arg(long, value_enum, default_value_t = Target::Sine)]
    pub target: Target,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV with header x1..xd,y
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the noise-free targets, one per line
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Writes a clustered gaussian fixed-design problem.
pub fn generate(args: &GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec::new(args.n, args.d, args.clusters);
    spec.sigma = args.noise_std;
    spec.target = match args.target {
        Target::Sine => TargetFn::SineSum,
        Target::Radial => TargetFn::Radial,
        Target::Linear => TargetFn::Linear,
    };
    let problem = generate_synthetic(&spec, &RngHandle::new(args.seed))?;
    let y = problem.dataset.labels().expect("synthetic data is labeled");
    ingest::write_csv(&args.output, &problem.dataset, y)?;
    if let Some(p) = &args.truth {
        let text: String = problem.f_star.iter().map(|f| format!("{f:?}\n")).collect();
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}
