//! Experiment pipelines behind the CLI: classifier training, agent training,
//! frozen-policy evaluation, and the jammer sweep.
//!
//! Every pipeline resolves its parameters from one config file, derives all
//! randomness from a single master seed, and writes its outputs plus a
//! resolved config snapshot and a run-info file into the output directory, so
//! a run can be reproduced byte for byte from the directory alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::{Td3Agent, Td3Config};
use crate::baseline::{optimize_static_fir, NoFirPolicy};
use crate::channel::{preset_cycle, ChannelPreset};
use crate::classifier::{train_classifier, ClassifierBundle, TrainSpec};
use crate::config::Config;
use crate::env::{
    evaluate_policy, run_training_episode, ActionPolicy, EpisodeLog, ExploreSchedule, RewardTable,
    ScenarioConfig, ScenarioKind,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::waveform::ModScheme;

/// Episode-index families; keeps training, model selection, optimization and
/// final evaluation on disjoint channel realizations.
pub mod families {
    pub const TRAINING: u64 = 0;
    pub const SELECTION: u64 = 10_000_000;
    pub const EVALUATION: u64 = 20_000_000;
    pub const SWEEP: u64 = 40_000_000;
}

/// Which frozen policy an evaluation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Chares,
    None,
    Static,
}

impl PolicyKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "chares" => Ok(PolicyKind::Chares),
            "none" => Ok(PolicyKind::None),
            "static" => Ok(PolicyKind::Static),
            other => Err(Error::Config(format!("unknown policy '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Chares => "chares",
            PolicyKind::None => "none",
            PolicyKind::Static => "static",
        }
    }
}

/// Everything a pipeline needs, resolved once from the config file.
pub struct Resolved {
    pub config: Config,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub train_preset: ChannelPreset,
    pub reward_table: RewardTable,
}

fn parse_schemes(config: &Config) -> Result<Vec<ModScheme>> {
    config
        .list_or("waveform", "schemes", "bpsk,qam16,qam64")
        .iter()
        .map(|s| ModScheme::from_name(s))
        .collect()
}

/// Resolve the scenario and companions from a config plus CLI overrides.
pub fn resolve(
    config: &Config,
    seed_override: Option<u64>,
    out_dir_override: Option<&Path>,
) -> Result<Resolved> {
    let mut config = config.clone();
    let seed = match seed_override {
        Some(s) => s,
        None => config.u64_or("experiment", "seed", 42)?,
    };
    let out_dir = match out_dir_override {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(config.str_or("experiment", "out_dir", "runs/default")),
    };
    config.set("experiment", "seed", seed);
    config.set("experiment", "out_dir", out_dir.display());

    let kind = ScenarioKind::parse(&config.str_or("scenario", "mode", "mla"))?;
    let schemes = parse_schemes(&config)?;
    let devices = match kind {
        ScenarioKind::Sla => crate::env::default_devices(
            config.usize_or("scenario", "sla_devices", 4)?,
            derive_seed(seed, "sla-devices", 0),
        ),
        _ => Vec::new(),
    };
    let eval_preset_name = config.str_or("scenario", "eval_preset", "mid_snr");
    let presets = preset_cycle(&eval_preset_name)?;
    let train_preset = crate::channel::preset(&config.str_or(
        "scenario",
        "train_preset",
        "high_snr_train",
    ))?;

    let scenario = ScenarioConfig {
        kind,
        schemes,
        devices,
        protected_device: config.usize_or("scenario", "sla_protected", 2)?,
        presets,
        jammer_override_db: None,
        forced_class: None,
        episode_len: config.usize_or("scenario", "episode_len", 64)?,
        batch_waveforms: config.usize_or("scenario", "batch_waveforms", 32)?,
        input_len: config.usize_or("waveform", "input_len", 64)?,
        sps: config.usize_or("waveform", "sps", 2)?,
        num_taps: config.usize_or("agent", "taps", 11)?,
        alpha: config.f64_or("agent", "alpha", 0.1)?,
        seed: derive_seed(seed, "scenario", 0),
    };
    scenario.validate()?;

    let reward_table = RewardTable {
        success: config.f64_or("reward", "success", 2.0)?,
        up: config.f64_or("reward", "up", 1.0)?,
        down: config.f64_or("reward", "down", -1.0)?,
        same: config.f64_or("reward", "same", 0.0)?,
        epsilon_tol: config.f64_or("reward", "epsilon_tol", 1e-4)?,
    };

    Ok(Resolved { config, seed, out_dir, scenario, train_preset, reward_table })
}

/// Write the resolved config snapshot and run provenance into the directory.
fn write_run_provenance(resolved: &Resolved, command: &str) -> Result<()> {
    std::fs::create_dir_all(&resolved.out_dir)?;
    std::fs::write(resolved.out_dir.join("config.resolved"), resolved.config.to_text())?;
    let git = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string());
    let mut info = String::new();
    let _ = writeln!(info, "command = {command}");
    let _ = writeln!(info, "seed = {}", resolved.seed);
    let _ = writeln!(info, "git = {git}");
    std::fs::write(resolved.out_dir.join("run_info.txt"), info)?;
    Ok(())
}

fn agent_config_from(config: &Config, scenario: &ScenarioConfig) -> Result<Td3Config> {
    let mut c = Td3Config::for_taps(scenario.state_dim(), scenario.num_taps);
    c.alpha = scenario.alpha;
    c.gamma = config.f64_or("agent", "gamma", c.gamma)?;
    c.delay = config.u64_or("agent", "delay", c.delay)?;
    c.polyak = config.f64_or("agent", "polyak", c.polyak)?;
    c.batch_size = config.usize_or("agent", "batch_size", c.batch_size)?;
    c.buffer_capacity = config.usize_or("agent", "buffer_capacity", c.buffer_capacity)?;
    c.sigma_explore = config.f64_or("agent", "sigma_explore", c.sigma_explore)?;
    c.sigma_smooth = config.f64_or("agent", "sigma_smooth", c.sigma_smooth)?;
    c.clip_smooth = config.f64_or("agent", "clip_smooth", c.clip_smooth)?;
    c.actor_hidden =
        config.usize_list_or("agent", "actor_hidden", "30,30,30,30,30,30,30,30,30,30")?;
    c.critic_hidden =
        config.usize_list_or("agent", "critic_hidden", "30,30,30,30,30,30,30,30,30,30")?;
    c.actor_lr = config.f64_or("agent", "actor_lr", c.actor_lr)?;
    c.critic_lr = config.f64_or("agent", "critic_lr", c.critic_lr)?;
    if config.bool_or("agent", "lr_decay", false)? {
        c.lr_decay_steps = Some(config.u64_or("training", "steps", 40_000)?);
    }
    Ok(c)
}

/// Train the receiver-side classifier under the training channel regime and
/// write checkpoint, sidecar, per-class validation report, and provenance.
pub fn cmd_train_classifier(resolved: &Resolved) -> Result<PathBuf> {
    write_run_provenance(resolved, "train-classifier")?;
    let scenario = &resolved.scenario;
    let train_preset = resolved.train_preset.clone();
    let seed = resolved.seed;
    let num_classes = scenario.num_classes();

    let spec = TrainSpec {
        hidden: resolved.config.usize_list_or("classifier", "hidden", "256,64")?,
        examples: resolved.config.usize_or("classifier", "examples", 4000)?,
        epochs: resolved.config.usize_or("classifier", "epochs", 40)?,
        batch_size: resolved.config.usize_or("classifier", "batch_size", 32)?,
        learning_rate: resolved.config.f64_or("classifier", "learning_rate", 5e-4)?,
        val_fraction: resolved.config.f64_or("classifier", "val_fraction", 0.15)?,
        min_accuracy: resolved.config.f64_or("classifier", "min_accuracy", 0.80)?,
        threshold_init: resolved.config.bool_or("classifier", "threshold_init", true)?,
        sps: scenario.sps,
    };

    let scenario_for_data = scenario.clone();
    let mut generate = |i: u64| {
        let class = (i % num_classes as u64) as usize;
        let example_seed = derive_seed(seed, "classifier-data", i);
        let clean = scenario_for_data.clean_waveform(class, example_seed)?;
        let mut channel = train_preset.sample_model(derive_seed(example_seed, "channel", 0));
        Ok((channel.apply(&clean), class))
    };
    let bundle = train_classifier(
        &mut generate,
        &scenario.class_names(),
        scenario.input_len,
        train_preset.name,
        &spec,
        derive_seed(seed, "classifier-train", 0),
    )?;

    // Per-class validation table on a fresh stream through the same regime.
    let rows = resolved.config.usize_or("classifier", "report_examples_per_class", 150)?;
    let mut report = String::from("class,accuracy\n");
    for class in 0..num_classes {
        let mut correct = 0usize;
        for i in 0..rows {
            let example_seed = derive_seed(seed, "classifier-report", (class * rows + i) as u64);
            let clean = scenario.clean_waveform(class, example_seed)?;
            let mut channel = train_preset.sample_model(derive_seed(example_seed, "channel", 0));
            if bundle.classify_one(&channel.apply(&clean))?.0 == class {
                correct += 1;
            }
        }
        let _ = writeln!(
            report,
            "{},{:.4}",
            scenario.class_names()[class],
            correct as f64 / rows as f64
        );
    }

    let base = resolved.out_dir.join("classifier");
    bundle.save(&base)?;
    std::fs::write(resolved.out_dir.join("classifier_report.csv"), report)?;
    Ok(base)
}

fn classifier_path(resolved: &Resolved, override_path: Option<&Path>) -> PathBuf {
    match override_path {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(resolved.config.str_or(
            "classifier",
            "checkpoint",
            &resolved.out_dir.join("classifier").display().to_string(),
        )),
    }
}

fn agent_dir(resolved: &Resolved, override_path: Option<&Path>) -> PathBuf {
    match override_path {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(resolved.config.str_or(
            "agent",
            "checkpoint",
            &resolved.out_dir.join("agent").display().to_string(),
        )),
    }
}

fn load_classifier(resolved: &Resolved, override_path: Option<&Path>) -> Result<ClassifierBundle> {
    let path = classifier_path(resolved, override_path);
    let bundle = ClassifierBundle::load(&path)?;
    if bundle.num_classes() != resolved.scenario.num_classes()
        || bundle.input_len() != resolved.scenario.input_len
    {
        return Err(Error::MissingDependency(format!(
            "classifier at {} does not match the scenario (classes {}, input {})",
            path.display(),
            bundle.num_classes(),
            bundle.input_len()
        )));
    }
    Ok(bundle)
}

/// Append one episode's step records to the JSONL log, asserting the
/// accuracy/success identity on the way out.
fn append_jsonl(log: &mut String, episode: &EpisodeLog, table: &RewardTable) {
    let by_reward = episode.steps.iter().filter(|s| s.reward == table.success).count();
    let by_vote = episode.steps.iter().filter(|s| s.correct).count();
    assert_eq!(by_reward, by_vote, "success-reward/accuracy identity violated");
    for record in &episode.steps {
        log.push_str(&serde_json::to_string(record).expect("step records serialize"));
        log.push('\n');
    }
}

/// Train the agent inside the deployed-regime loop; track the best-scoring
/// snapshot on a held-out selection family; write the best checkpoint, the
/// final checkpoint, the per-step JSONL training log, and the selection
/// curve.
pub fn cmd_train_agent(
    resolved: &Resolved,
    classifier_override: Option<&Path>,
) -> Result<PathBuf> {
    write_run_provenance(resolved, "train-agent")?;
    let classifier = load_classifier(resolved, classifier_override)?;
    let scenario = &resolved.scenario;

    let total_steps = resolved.config.u64_or("training", "steps", 40_000)?;
    let schedule = ExploreSchedule {
        warmup_steps: resolved.config.u64_or("training", "warmup_steps", 2_000)?,
        uniform_prob: resolved.config.f64_or("training", "uniform_prob", 0.10)?,
        zero_anchor_prob: resolved.config.f64_or("training", "zero_anchor_prob", 0.05)?,
    };
    let eval_every = resolved.config.u64_or("training", "eval_every_episodes", 40)?.max(1);
    let eval_episodes = resolved.config.usize_or("training", "eval_episodes", 32)?;

    let mut agent = Td3Agent::new(
        agent_config_from(&resolved.config, scenario)?,
        derive_seed(resolved.seed, "agent-init", 0),
    )?;

    let episodes = (total_steps / scenario.episode_len as u64).max(1);
    let mut train_log = String::new();
    let mut curve = String::from("steps,selection_accuracy\n");
    let mut best: Option<(f64, Td3Agent)> = None;
    for episode in 0..episodes {
        let log = run_training_episode(
            scenario,
            &classifier,
            &mut agent,
            &resolved.reward_table,
            schedule,
            families::TRAINING + episode,
        )?;
        append_jsonl(&mut train_log, &log, &resolved.reward_table);

        if (episode + 1) % eval_every == 0 || episode + 1 == episodes {
            let stats = evaluate_policy(
                scenario,
                &classifier,
                &agent,
                &resolved.reward_table,
                eval_episodes,
                families::SELECTION + episode * 1000,
            )?;
            let _ = writeln!(curve, "{},{:.4}", agent.step_count(), stats.accuracy);
            if best.as_ref().map_or(true, |(acc, _)| stats.accuracy > *acc) {
                best = Some((stats.accuracy, agent.clone()));
            }
        }
    }

    let (_, best_agent) = best.expect("at least one selection evaluation ran");
    let dir = agent_dir(resolved, None);
    best_agent.save(&dir)?;
    agent.save(&resolved.out_dir.join("agent_final"))?;
    std::fs::write(resolved.out_dir.join("train_log.jsonl"), train_log)?;
    std::fs::write(resolved.out_dir.join("selection_curve.csv"), curve)?;
    Ok(dir)
}

struct FrozenActorPolicy(crate::nn::Mlp);

impl ActionPolicy for FrozenActorPolicy {
    fn action(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.infer(state)?.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }
}

fn build_policy(
    resolved: &Resolved,
    kind: PolicyKind,
    classifier: &ClassifierBundle,
    agent_override: Option<&Path>,
) -> Result<Box<dyn ActionPolicy>> {
    match kind {
        PolicyKind::None => Ok(Box::new(NoFirPolicy::new(resolved.scenario.action_dim()))),
        PolicyKind::Chares => {
            let dir = agent_dir(resolved, agent_override);
            let agent = Td3Agent::load(&dir, derive_seed(resolved.seed, "agent-eval", 0))?;
            if agent.config().state_dim != resolved.scenario.state_dim() {
                return Err(Error::MissingDependency(format!(
                    "agent at {} does not match the scenario state dimension",
                    dir.display()
                )));
            }
            Ok(Box::new(FrozenActorPolicy(agent.actor().clone())))
        }
        PolicyKind::Static => {
            let budget = resolved.config.usize_or("static_fir", "budget", 400)?;
            let mut train_scenario = resolved.scenario.clone();
            train_scenario.seed = derive_seed(resolved.seed, "static-train", 0);
            let policy = optimize_static_fir(
                &train_scenario,
                classifier,
                budget,
                derive_seed(resolved.seed, "static-fir", 0),
            )?;
            // Persist the optimized per-class actions next to the results.
            let mut meta = Config::new();
            for (class, action) in policy.actions().iter().enumerate() {
                let values: Vec<String> = action.iter().map(|v| format!("{v:.12}")).collect();
                meta.set("static_fir", &format!("class{class}"), values.join(","));
            }
            std::fs::create_dir_all(&resolved.out_dir)?;
            std::fs::write(resolved.out_dir.join("static_fir.meta"), meta.to_text())?;
            Ok(Box::new(policy))
        }
    }
}

/// Evaluate one frozen policy across the scenario's SNR grid: per-SNR
/// accuracy CSV plus the overall reward-outcome distribution CSV.
pub fn cmd_evaluate(
    resolved: &Resolved,
    kind: PolicyKind,
    classifier_override: Option<&Path>,
    agent_override: Option<&Path>,
) -> Result<PathBuf> {
    write_run_provenance(resolved, &format!("evaluate --policy {}", kind.name()))?;
    let classifier = load_classifier(resolved, classifier_override)?;
    let policy = build_policy(resolved, kind, &classifier, agent_override)?;

    let episodes = resolved.config.usize_or("evaluation", "episodes", 200)?;
    let grid = resolved.config.f64_list_or("evaluation", "snr_grid_db", "6,8,10,12,14")?;

    let mut accuracy_csv = String::from("snr_db,episodes,accuracy\n");
    let mut success = 0.0;
    let mut up = 0.0;
    let mut same = 0.0;
    let mut down = 0.0;
    let per_point = (episodes / grid.len().max(1)).max(1);
    for (gi, snr_db) in grid.iter().enumerate() {
        let mut pinned = resolved.scenario.clone();
        for preset in &mut pinned.presets {
            preset.snr_db_range = Some((*snr_db, *snr_db));
        }
        let stats = evaluate_policy(
            &pinned,
            &classifier,
            policy.as_ref(),
            &resolved.reward_table,
            per_point,
            families::EVALUATION + gi as u64 * 100_000,
        )?;
        let _ = writeln!(accuracy_csv, "{snr_db},{per_point},{:.4}", stats.accuracy);
        success += stats.frac_success;
        up += stats.frac_up;
        same += stats.frac_same;
        down += stats.frac_down;
    }
    let n = grid.len() as f64;
    let mut outcome_csv = String::from("policy,frac_success,frac_up,frac_same,frac_down\n");
    let _ = writeln!(
        outcome_csv,
        "{},{:.4},{:.4},{:.4},{:.4}",
        kind.name(),
        success / n,
        up / n,
        same / n,
        down / n
    );

    let acc_path = resolved.out_dir.join(format!("eval_accuracy_{}.csv", kind.name()));
    std::fs::write(&acc_path, accuracy_csv)?;
    std::fs::write(
        resolved.out_dir.join(format!("eval_outcomes_{}.csv", kind.name())),
        outcome_csv,
    )?;
    Ok(acc_path)
}

/// Evaluate all three policies across the jammer power grid; one CSV row per
/// (power, policy).
pub fn cmd_sweep_jammer(
    resolved: &Resolved,
    classifier_override: Option<&Path>,
    agent_override: Option<&Path>,
) -> Result<PathBuf> {
    write_run_provenance(resolved, "sweep-jammer")?;
    let classifier = load_classifier(resolved, classifier_override)?;
    let powers = resolved.config.f64_list_or("sweep", "jammer_powers_db", "-10,-5,0,5")?;
    let episodes = resolved.config.usize_or("sweep", "episodes", 60)?;

    let policies: Vec<(PolicyKind, Box<dyn ActionPolicy>)> = vec![
        (
            PolicyKind::Chares,
            build_policy(resolved, PolicyKind::Chares, &classifier, agent_override)?,
        ),
        (PolicyKind::None, build_policy(resolved, PolicyKind::None, &classifier, None)?),
        (PolicyKind::Static, build_policy(resolved, PolicyKind::Static, &classifier, None)?),
    ];

    let mut csv = String::from("jammer_db,policy,accuracy\n");
    for (pi, power) in powers.iter().enumerate() {
        let mut pinned = resolved.scenario.clone();
        pinned.jammer_override_db = Some(Some(*power));
        for (kind, policy) in &policies {
            let stats = evaluate_policy(
                &pinned,
                &classifier,
                policy.as_ref(),
                &resolved.reward_table,
                episodes,
                families::SWEEP + pi as u64 * 100_000,
            )?;
            let _ = writeln!(csv, "{power},{},{:.4}", kind.name(), stats.accuracy);
        }
    }
    let path = resolved.out_dir.join("jammer_sweep.csv");
    std::fs::write(&path, csv)?;
    Ok(path)
}

/// The default experiment configuration, written by `--emit-default-config`.
pub fn default_config_text() -> String {
    let mut c = Config::new();
    c.set("experiment", "seed", 42);
    c.set("experiment", "out_dir", "runs/mla");
    c.set("waveform", "input_len", 64);
    c.set("waveform", "sps", 2);
    c.set("waveform", "schemes", "bpsk,qam16,qam64");
    c.set("scenario", "mode", "mla");
    c.set("scenario", "train_preset", "high_snr_train");
    c.set("scenario", "eval_preset", "mid_snr");
    c.set("scenario", "episode_len", 64);
    c.set("scenario", "batch_waveforms", 32);
    c.set("classifier", "hidden", "256,64");
    c.set("classifier", "examples", 4000);
    c.set("classifier", "epochs", 40);
    c.set("classifier", "learning_rate", "0.0005");
    c.set("agent", "taps", 11);
    c.set("agent", "alpha", "0.1");
    c.set("agent", "gamma", "0.5");
    c.set("agent", "actor_hidden", "64,64");
    c.set("agent", "critic_hidden", "64,64");
    c.set("agent", "actor_lr", "0.0003");
    c.set("agent", "critic_lr", "0.0003");
    c.set("agent", "sigma_explore", "0.2");
    c.set("agent", "batch_size", 128);
    c.set("agent", "lr_decay", "true");
    c.set("training", "steps", 40000);
    c.set("training", "warmup_steps", 2000);
    c.set("evaluation", "episodes", 200);
    c.set("evaluation", "snr_grid_db", "6,8,10,12,14");
    c.set("sweep", "jammer_powers_db", "-10,-5,0,5");
    c.set("sweep", "episodes", 60);
    c.to_text()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> Config {
        let mut c = Config::parse(&default_config_text()).unwrap();
        c.set("experiment", "out_dir", dir.display());
        c.set("experiment", "seed", 7);
        c.set("waveform", "input_len", 32);
        c.set("classifier", "examples", 600);
        c.set("classifier", "epochs", 6);
        c.set("classifier", "hidden", "64,32");
        c.set("classifier", "min_accuracy", "0.5");
        c.set("classifier", "report_examples_per_class", 40);
        c.set("scenario", "episode_len", 4);
        c.set("scenario", "batch_waveforms", 4);
        c.set("agent", "actor_hidden", "16");
        c.set("agent", "critic_hidden", "16");
        c.set("agent", "batch_size", 16);
        c.set("training", "steps", 64);
        c.set("training", "warmup_steps", 16);
        c.set("training", "eval_every_episodes", 8);
        c.set("training", "eval_episodes", 2);
        c.set("evaluation", "episodes", 10);
        c.set("evaluation", "snr_grid_db", "10,14");
        c.set("sweep", "jammer_powers_db", "-5,0");
        c.set("sweep", "episodes", 2);
        c.set("static_fir", "budget", 100);
        c
    }

    #[test]
    fn full_pipeline_smoke_and_reproducibility() {
        let dir = std::env::temp_dir().join("chares-runner-smoke");
        std::fs::remove_dir_all(&dir).ok();
        let config = tiny_config(&dir);
        let resolved = resolve(&config, None, None).unwrap();

        cmd_train_classifier(&resolved).unwrap();
        let report = std::fs::read_to_string(dir.join("classifier_report.csv")).unwrap();
        assert_eq!(report.lines().count(), 1 + resolved.scenario.num_classes());

        cmd_train_agent(&resolved, None).unwrap();
        let log = std::fs::read_to_string(dir.join("train_log.jsonl")).unwrap();
        assert_eq!(log.lines().count(), 64); // one record per training step
        for line in log.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["reward"].is_number());
            assert_eq!(v["action"].as_array().unwrap().len(), 22);
        }

        cmd_evaluate(&resolved, PolicyKind::Chares, None, None).unwrap();
        cmd_evaluate(&resolved, PolicyKind::None, None, None).unwrap();
        let acc = std::fs::read_to_string(dir.join("eval_accuracy_none.csv")).unwrap();
        assert_eq!(acc.lines().count(), 3); // header + 2 grid points
        for line in acc.lines().skip(1) {
            let a: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
        let outcomes = std::fs::read_to_string(dir.join("eval_outcomes_none.csv")).unwrap();
        let fracs: Vec<f64> = outcomes
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!((fracs.iter().sum::<f64>() - 1.0).abs() < 1e-6);

        cmd_sweep_jammer(&resolved, None, None).unwrap();
        let sweep = std::fs::read_to_string(dir.join("jammer_sweep.csv")).unwrap();
        assert_eq!(sweep.lines().count(), 1 + 2 * 3); // powers x policies

        // Reruns are byte-identical.
        let eval_bytes = std::fs::read(dir.join("eval_accuracy_chares.csv")).unwrap();
        let sweep_bytes = std::fs::read(dir.join("jammer_sweep.csv")).unwrap();
        cmd_evaluate(&resolved, PolicyKind::Chares, None, None).unwrap();
        cmd_sweep_jammer(&resolved, None, None).unwrap();
        assert_eq!(std::fs::read(dir.join("eval_accuracy_chares.csv")).unwrap(), eval_bytes);
        assert_eq!(std::fs::read(dir.join("jammer_sweep.csv")).unwrap(), sweep_bytes);

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_classifier_is_a_dependency_error() {
        let dir = std::env::temp_dir().join("chares-runner-missing");
        std::fs::remove_dir_all(&dir).ok();
        let config = tiny_config(&dir);
        let resolved = resolve(&config, None, None).unwrap();
        match cmd_train_agent(&resolved, None) {
            Err(Error::MissingDependency(_)) => {}
            other => panic!("expected MissingDependency, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn seed_and_out_dir_overrides_win() {
        let config = Config::parse(&default_config_text()).unwrap();
        let resolved = resolve(&config, Some(99), Some(Path::new("/tmp/elsewhere"))).unwrap();
        assert_eq!(resolved.seed, 99);
        assert_eq!(resolved.out_dir, PathBuf::from("/tmp/elsewhere"));
        assert_eq!(resolved.config.get("experiment", "seed"), Some("99"));
    }
}
