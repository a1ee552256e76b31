// Learning-curve calibration across modes/envs. Prints normalized AUC and
// final scores so acceptance step counts can be frozen from measurements.
use causal_rl::agent::{run, AgentConfig, AgentMode};
use causal_rl::envs::EnvSpec;
use causal_rl::eval::{final_mean_return, normalized_score, reference_returns, return_auc};
use std::time::Instant;

fn config(steps: usize, seed: u64) -> AgentConfig {
    AgentConfig {
        batch_size: std::env::var("CAL_BATCH").ok().and_then(|v| v.parse().ok()).unwrap_or(64),
        hidden: vec![32, 32],
        total_steps: steps,
        seed,
        causal_update_interval: 2000,
        ..AgentConfig::default()
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let seeds: Vec<u64> = args
        .get(2)
        .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![0, 1]);
    let envs: Vec<String> = args
        .get(3)
        .map(|s| s.split(',').map(String::from).collect())
        .unwrap_or_else(|| vec!["distractor-reacher-0".into()]);
    let modes: Vec<(&str, AgentMode)> = vec![
        ("sac", AgentMode::BaselineSac),
        ("cip", AgentMode::Cip),
        ("noaug", AgentMode::Cip),   // augment_rate = 0 override below
        ("noemp", AgentMode::CipNoEmpowerment),
    ];
    let which: Vec<String> = args
        .get(4)
        .map(|s| s.split(',').map(String::from).collect())
        .unwrap_or_else(|| vec!["sac".into(), "cip".into()]);

    for env_name in &envs {
        let spec = EnvSpec::by_name(env_name).unwrap();
        let refs = reference_returns(&spec, 0);
        println!("== {env_name}: refs random {:.2} oracle {:.2}", refs.random, refs.oracle);
        for (name, mode) in &modes {
            if !which.contains(&name.to_string()) {
                continue;
            }
            for &seed in &seeds {
                let mut cfg = config(steps, seed);
                if *name == "noaug" {
                    cfg.augment_rate = 0.0;
                }
                let t0 = Instant::now();
                let out = run(&cfg, &spec, *mode).unwrap();
                let auc = return_auc(&out.rows);
                let fin = final_mean_return(&out.rows, 20);
                let score = normalized_score(fin, &refs);
                let auc_norm = 100.0 * (auc - refs.random) / (refs.oracle - refs.random);
                println!(
                    "{env_name} {name} seed {seed}: auc {auc:8.2} (norm {auc_norm:6.1}) final {fin:8.2} score {score:6.1} refits {} [{:.0}s]",
                    out.snapshots.len(),
                    t0.elapsed().as_secs_f64()
                );
            }
        }
    }
}
