//! Experiment runner for the causal-rl crate.
//!
//! Subcommands: `train`, `discover`, `augment`, `semgen`, `eval`. Every
//! subcommand is idempotent given identical inputs and `--overwrite`, exits
//! nonzero unless all declared outputs were written and validated, and is
//! bit-deterministic for a fixed seed (the `wallclock_s` metrics column is
//! the sole documented exception).

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use causal_rl::agent::{
    read_metrics_csv, run as train_run, write_metrics_csv, AgentConfig, AgentMode, TrainOutcome,
};
use causal_rl::augment::augment_batch;
use causal_rl::causal::{
    fit_action_reward_weights, DiscoveryConfig, MatricesExport, DEFAULT_CAUSAL_SAMPLE_SIZE,
    DEFAULT_THETA,
};
use causal_rl::envs::io::{read_transitions_jsonl, write_sem_csv, write_transitions_jsonl};
use causal_rl::envs::sem::{sem_generate, NoiseDist, SemMdpView, SemSpec};
use causal_rl::envs::EnvSpec;
use causal_rl::eval::{final_mean_return, normalized_score, optimality_gap, reference_returns};
use causal_rl::numkit::{save_networks, Matrix};
use causal_rl::{CoreError, Result};

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "causal-rl", version, about = "Causal discovery, counterfactual augmentation, and empowerment-regularized SAC on synthetic factored MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train agents (one worker per seed) and write metrics, matrices, and
    /// checkpoints under the output directory.
    Train(TrainArgs),
    /// Fit causal matrices from a JSONL transition file.
    Discover(DiscoverArgs),
    /// Counterfactually augment a JSONL transition file.
    Augment(AugmentArgs),
    /// Generate a linear-SEM dataset (CSV, or JSONL transitions).
    Semgen(SemgenArgs),
    /// Summarize metrics directories into normalized scores.
    Eval(EvalArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config mirroring the AgentConfig field names.
    #[arg(long)]
    config: PathBuf,
    /// Environment name, e.g. distractor-reacher-8 or dead-actuator-4.
    #[arg(long)]
    env: String,
    /// Comma-separated seed list, e.g. 0,1,2,3.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long)]
    out: PathBuf,
    /// Run plain SAC instead of the full pipeline.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    /// JSONL transition file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// Accept batches smaller than the causal sample size.
    #[arg(long)]
    allow_small: bool,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct AugmentArgs {
    /// JSONL transition file.
    #[arg(long)]
    input: PathBuf,
    /// Matrices JSON produced by `discover`.
    #[arg(long)]
    matrices: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fraction of the batch to augment.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    /// Threshold override; defaults to the theta stored in the matrices file.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct SemgenArgs {
    /// SEM spec JSON (see README for the schema).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write JSONL transitions instead of CSV (requires `mdp` in the spec).
    #[arg(long)]
    as_transitions: bool,
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory written by `train` (contains manifest.json).
    #[arg(long)]
    metrics_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Episodes in the final-return window.
    #[arg(long, default_value_t = 20)]
    window: usize,
    #[arg(long)]
    overwrite: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Augment(a) => cmd_augment(a),
        Command::Semgen(a) => cmd_semgen(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn guard_output(path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(CoreError::invalid_config(
            "out",
            format!("{} exists; pass --overwrite to replace it", path.display()),
        ));
    }
    Ok(())
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|e| CoreError::invalid_config("seeds", format!("bad seed `{part}`: {e}")))
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let config_text = std::fs::read_to_string(&args.config).map_err(|e| {
        CoreError::invalid_config(
            "config",
            format!("cannot read {}: {e}", args.config.display()),
        )
    })?;
    let base_config: AgentConfig = serde_json::from_str(&config_text)
        .map_err(|e| CoreError::invalid_config("config", e.to_string()))?;
    base_config.validate()?;
    let env_spec = EnvSpec::by_name(&args.env)?;
    let seeds = parse_seeds(&args.seeds)?;
    if seeds.is_empty() {
        return Err(CoreError::invalid_config("seeds", "empty seed list"));
    }
    guard_output(&args.out, args.overwrite)?;
    if args.out.exists() {
        std::fs::remove_dir_all(&args.out)?;
    }
    std::fs::create_dir_all(&args.out)?;

    let mode = if args.baseline {
        AgentMode::BaselineSac
    } else {
        AgentMode::Cip
    };

    // Seeds run as independent workers with no shared mutable state.
    let mut handles = Vec::new();
    for &seed in &seeds {
        let mut config = base_config.clone();
        config.seed = seed;
        let spec = env_spec.clone();
        handles.push((
            seed,
            std::thread::spawn(move || train_run(&config, &spec, mode)),
        ));
    }
    let mut outputs = Vec::new();
    for (seed, handle) in handles {
        let outcome: TrainOutcome = handle
            .join()
            .map_err(|_| CoreError::invalid_config("train", "worker panicked"))?
            .map_err(|e| CoreError::invalid_config("train", format!("seed {seed}: {e}")))?;
        let seed_dir = args.out.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir)?;

        let metrics_path = seed_dir.join("metrics.csv");
        write_metrics_csv(&metrics_path, &outcome.rows)?;

        let export = MatricesExport::new(
            &outcome.agent.snapshot.matrices,
            &outcome.agent.snapshot.weights,
            outcome.agent.snapshot.u_set.theta,
        );
        let matrices_path = seed_dir.join("matrices.json");
        std::fs::write(&matrices_path, serde_json::to_string_pretty(&export)?)?;

        let ckpt_path = seed_dir.join("checkpoint.bin");
        save_networks(
            &ckpt_path,
            &[
                ("policy", &outcome.agent.policy),
                ("q1", &outcome.agent.q1),
                ("q2", &outcome.agent.q2),
                ("q1_target", &outcome.agent.q1_target),
                ("q2_target", &outcome.agent.q2_target),
                ("inverse_dynamics", outcome.agent.inverse.net()),
            ],
        )?;
        for name in ["metrics.csv", "matrices.json", "checkpoint.bin"] {
            outputs.push(format!("seed_{seed}/{name}"));
        }
    }

    let references = reference_returns(&env_spec, 0);
    let manifest = RunManifest {
        content_hash: RunManifest::content_hash_for(&base_config, &args.env, args.baseline),
        config: base_config,
        seeds,
        env: args.env.clone(),
        baseline: args.baseline,
        outputs,
        references,
    };
    manifest.save(&args.out.join("manifest.json"))?;

    // Validate every declared output before reporting success.
    for rel in &manifest.outputs {
        let p = args.out.join(rel);
        if !p.exists() {
            return Err(CoreError::invalid_config(
                "out",
                format!("declared output missing: {rel}"),
            ));
        }
        if rel.ends_with("metrics.csv") {
            read_metrics_csv(&p)?;
        } else if rel.ends_with("matrices.json") {
            let _: MatricesExport = serde_json::from_str(&std::fs::read_to_string(&p)?)?;
        } else if rel.ends_with("checkpoint.bin") {
            causal_rl::numkit::load_networks(&p)?;
        }
    }
    RunManifest::load(&args.out.join("manifest.json"))?;
    println!(
        "trained {} seed(s) on {} -> {}",
        manifest.seeds.len(),
        args.env,
        args.out.display()
    );
    Ok(())
}

fn cmd_discover(args: DiscoverArgs) -> Result<()> {
    guard_output(&args.out, args.overwrite)?;
    let transitions = read_transitions_jsonl(&args.input)?;
    let cfg = if args.allow_small {
        DiscoveryConfig::allow_small()
    } else {
        DiscoveryConfig {
            min_samples: DEFAULT_CAUSAL_SAMPLE_SIZE,
        }
    };
    // One pass yields both reward rows (state and action blocks).
    let (matrices, weights) = fit_action_reward_weights(&transitions, &cfg)?;
    let export = MatricesExport::new(&matrices, &weights, args.theta);
    std::fs::write(&args.out, serde_json::to_string_pretty(&export)?)?;
    let _: MatricesExport = serde_json::from_str(&std::fs::read_to_string(&args.out)?)?;
    println!(
        "discovered structure from {} transitions -> {}",
        matrices.fitted_on,
        args.out.display()
    );
    Ok(())
}

fn cmd_augment(args: AugmentArgs) -> Result<()> {
    guard_output(&args.out, args.overwrite)?;
    let transitions = read_transitions_jsonl(&args.input)?;
    let export: MatricesExport =
        serde_json::from_str(&std::fs::read_to_string(&args.matrices)?)?;
    let matrices = export.to_matrices();
    let theta = args.theta.unwrap_or(export.theta);
    let (synthetic, stats) =
        augment_batch(&transitions, &matrices, theta, args.rate, args.seed);
    let mut all = transitions;
    all.extend(synthetic);
    write_transitions_jsonl(&args.out, &all)?;
    read_transitions_jsonl(&args.out)?;
    println!(
        "sources {} skips {} additions {} -> {}",
        stats.sources,
        stats.skipped,
        stats.additions,
        args.out.display()
    );
    Ok(())
}

/// SEM spec file schema: coefficients as nested rows, per-variable noise, and
/// an optional MDP column split for transition output.
#[derive(Debug, Serialize, Deserialize)]
struct SemGenFile {
    b: Vec<Vec<f64>>,
    noise: Vec<NoiseDist>,
    reward_index: usize,
    #[serde(default)]
    mdp: Option<MdpSplit>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MdpSplit {
    d_s: usize,
    d_a: usize,
}

fn cmd_semgen(args: SemgenArgs) -> Result<()> {
    guard_output(&args.out, args.overwrite)?;
    let raw = std::fs::read_to_string(&args.spec).map_err(|e| {
        CoreError::invalid_config("spec", format!("cannot read {}: {e}", args.spec.display()))
    })?;
    let file: SemGenFile =
        serde_json::from_str(&raw).map_err(|e| CoreError::invalid_config("spec", e.to_string()))?;
    let p = file.b.len();
    let spec = SemSpec::new(Matrix::from_rows(&file.b), file.noise, file.reward_index)?;
    if args.as_transitions {
        let split = file.mdp.ok_or_else(|| {
            CoreError::invalid_config("spec", "`mdp` split required for --as-transitions")
        })?;
        let view = SemMdpView::new(spec, split.d_s, split.d_a)?;
        let ts = if args.n == 0 {
            Vec::new()
        } else {
            view.transitions(args.n, args.seed)
        };
        write_transitions_jsonl(&args.out, &ts)?;
        read_transitions_jsonl(&args.out)?;
    } else {
        let data = if args.n == 0 {
            Matrix::zeros(0, p)
        } else {
            sem_generate(&spec, args.n, args.seed)
        };
        write_sem_csv(&args.out, &data)?;
        causal_rl::envs::io::read_sem_csv(&args.out)?;
    }
    println!("generated {} rows x {p} columns -> {}", args.n, args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    guard_output(&args.out, args.overwrite)?;
    let manifest_path = args.metrics_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(CoreError::invalid_config(
            "metrics_dir",
            format!("no manifest.json under {}", args.metrics_dir.display()),
        ));
    }
    let manifest = RunManifest::load(&manifest_path)?;
    let refs = manifest.references;
    let mut lines = vec!["task,seed,final_return,normalized_score,optimality_gap".to_string()];
    let mut scores = Vec::new();
    let mut finals = Vec::new();
    for seed in &manifest.seeds {
        let rows = read_metrics_csv(&args.metrics_dir.join(format!("seed_{seed}/metrics.csv")))?;
        if rows.is_empty() {
            return Err(CoreError::invalid_config(
                "metrics_dir",
                format!("seed {seed} has no finished episodes"),
            ));
        }
        let fin = final_mean_return(&rows, args.window);
        let score = normalized_score(fin, &refs);
        lines.push(format!(
            "{},{seed},{fin},{score},{}",
            manifest.env,
            optimality_gap(&[score])
        ));
        scores.push(score);
        finals.push(fin);
    }
    if scores.is_empty() {
        return Err(CoreError::invalid_config("metrics_dir", "no seeds found"));
    }
    let mean_final = finals.iter().sum::<f64>() / finals.len() as f64;
    let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
    lines.push(format!(
        "{},mean,{mean_final},{mean_score},{}",
        manifest.env,
        optimality_gap(&scores)
    ));
    std::fs::write(&args.out, lines.join("\n") + "\n")?;
    println!(
        "evaluated {} seed(s): normalized {mean_score:.1} gap {:.3} -> {}",
        scores.len(),
        optimality_gap(&scores),
        args.out.display()
    );
    Ok(())
}
