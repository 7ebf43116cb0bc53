//! Shared fixtures for unit tests: a small MLA scenario and a classifier
//! trained once per test binary.

use std::sync::OnceLock;

use crate::channel::preset;
use crate::classifier::{train_classifier, ClassifierBundle, TrainSpec};
use crate::env::{ScenarioConfig, ScenarioKind};
use crate::rng::derive_seed;
use crate::waveform::ModScheme;

pub fn mla_scenario(seed: u64, preset_name: &str) -> ScenarioConfig {
    ScenarioConfig {
        kind: ScenarioKind::Mla,
        schemes: vec![ModScheme::Bpsk, ModScheme::Qam16, ModScheme::Qam64],
        devices: Vec::new(),
        protected_device: 0,
        presets: vec![preset(preset_name).unwrap()],
        jammer_override_db: None,
        forced_class: None,
        episode_len: 8,
        batch_waveforms: 8,
        input_len: 64,
        sps: 2,
        num_taps: 11,
        alpha: 0.1,
        seed,
    }
}

/// MLA classifier trained on the clean high-SNR regime; built once and shared
/// across all tests in the binary.
pub fn test_classifier() -> &'static ClassifierBundle {
    static CLF: OnceLock<ClassifierBundle> = OnceLock::new();
    CLF.get_or_init(|| {
        let scenario = mla_scenario(400, "high_snr_train");
        let regime = scenario.presets[0].clone();
        let mut generate = |i: u64| {
            let class = (i % 3) as usize;
            let seed = derive_seed(701, "clf-data", i);
            let clean = scenario.clean_waveform(class, seed)?;
            let mut ch = regime.sample_model(derive_seed(seed, "clf-chan", 0));
            Ok((ch.apply(&clean), class))
        };
        let spec = TrainSpec { examples: 3000, epochs: 25, ..TrainSpec::default() };
        train_classifier(
            &mut generate,
            &scenario.class_names(),
            scenario.input_len,
            "high_snr_train",
            &spec,
            31,
        )
        .expect("test classifier trains")
    })
}


#[cfg(test)]
mod rl_probe {
    use super::*;
    use crate::agent::{Td3Agent, Td3Config};
    use crate::baseline::NoFirPolicy;
    use crate::env::{evaluate_policy, run_exploit_episode, run_training_episode, ActionPolicy, RewardTable};
    use crate::error::Result;
    use rand::RngExt;
    use crate::rng::stream;

    struct ConstPolicy(Vec<f64>);
    impl ActionPolicy for ConstPolicy {
        fn action(&self, _s: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    #[ignore]
    fn gain_axis_scan() {
        let clf = test_classifier();
        let mut scenario = mla_scenario(2000, "mid_snr");
        scenario.episode_len = 4;
        scenario.batch_waveforms = 16;
        let table = RewardTable::default();
        for class in 0..3usize {
            let mut sc = scenario.clone();
            sc.forced_class = Some(class);
            print!("class {class}: ");
            for t in [-1.0f64, -0.5, 0.0, 0.5, 1.0] {
                let mut action = vec![0.0; sc.action_dim()];
                action[0] = t;
                action[1] = t;
                let mut correct = 0usize;
                let mut total = 0usize;
                for ep in 0..100u64 {
                    let log = run_exploit_episode(&sc, clf, &ConstPolicy(action.clone()), &table, 7_000_000 + ep).unwrap();
                    correct += log.steps.iter().filter(|s| s.correct).count();
                    total += log.steps.len();
                }
                print!("t={t}: {:.3}  ", correct as f64 / total as f64);
            }
            println!();
        }
    }

    fn train_variant(
        examples: usize,
        epochs: usize,
        input_len: usize,
        hidden: Vec<usize>,
        lr: f64,
    ) -> ClassifierBundle {
        let mut scenario = mla_scenario(400, "high_snr_train");
        scenario.input_len = input_len;
        let regime = scenario.presets[0].clone();
        let mut generate = |i: u64| {
            let class = (i % 3) as usize;
            let seed = derive_seed(701, "clf-data", i);
            let clean = scenario.clean_waveform(class, seed)?;
            let mut ch = regime.sample_model(derive_seed(seed, "clf-chan", 0));
            Ok((ch.apply(&clean), class))
        };
        let spec = TrainSpec {
            examples,
            epochs,
            hidden,
            learning_rate: lr,
            min_accuracy: 0.0,
            ..TrainSpec::default()
        };
        train_classifier(
            &mut generate,
            &scenario.class_names(),
            scenario.input_len,
            "high_snr_train",
            &spec,
            31,
        )
        .unwrap()
    }

    fn snr_curve_of(clf: &ClassifierBundle, input_len: usize) {
        let mut scenario = mla_scenario(2000, "mid_snr");
        scenario.input_len = input_len;
        for snr_db in [30.0, 16.0, 14.0, 12.0, 10.0, 8.0, 6.0] {
            let mut per_class = [0usize; 3];
            let n = 200;
            for class in 0..3usize {
                for i in 0..n {
                    let seed = crate::rng::derive_seed(3100, "snrcurve", (class * n + i) as u64);
                    let clean = scenario.clean_waveform(class, seed).unwrap();
                    let mut ch = crate::channel::ChannelModel::flat(Some(snr_db), seed);
                    if clf.classify_one(&ch.apply(&clean)).unwrap().0 == class {
                        per_class[class] += 1;
                    }
                }
            }
            println!(
                "  snr {snr_db:>4} dB: bpsk {:.2} qam16 {:.2} qam64 {:.2}",
                per_class[0] as f64 / n as f64,
                per_class[1] as f64 / n as f64,
                per_class[2] as f64 / n as f64
            );
        }
    }

    #[test]
    #[ignore]
    fn phase_center_scan() {
        let clf = test_classifier();
        let table = RewardTable::default();
        for center in [std::f64::consts::FRAC_PI_2, 2.0, std::f64::consts::PI] {
            println!("phase center {center:.2} rad:");
            let mut scenario = mla_scenario(2000, "mid_snr");
            scenario.episode_len = 4;
            scenario.batch_waveforms = 16;
            scenario.presets[0].path_phase_center = center;
            for class in 0..3usize {
                let mut sc = scenario.clone();
                sc.forced_class = Some(class);
                let zero = {
                    let mut correct = 0;
                    let mut total = 0;
                    for ep in 0..40u64 {
                        let log = run_exploit_episode(&sc, clf, &ConstPolicy(vec![0.0; sc.action_dim()]), &table, 9_700_000 + ep).unwrap();
                        correct += log.steps.iter().filter(|s| s.correct).count();
                        total += log.steps.len();
                    }
                    correct as f64 / total as f64
                };
                // Per-episode oracle with random search.
                let mut rng = stream(906 + class as u64);
                let mut bests = Vec::new();
                for ep in 0..8u64 {
                    let mut best = 0.0f64;
                    for _ in 0..60 {
                        let a: Vec<f64> = (0..sc.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let log = run_exploit_episode(&sc, clf, &ConstPolicy(a), &table, 9_800_000 + ep).unwrap();
                        best = best.max(log.accuracy());
                    }
                    bests.push(best);
                }
                println!("  class {class}: zero {zero:.3} oracle {:.3}", bests.iter().sum::<f64>() / 8.0);
            }
        }
    }

    #[test]
    #[ignore]
    fn spread_scan() {
        let clf = test_classifier();
        let table = RewardTable::default();
        for spread in [0.45f64, 0.55] {
            println!("spread {spread}:");
            let mut scenario = mla_scenario(2000, "mid_snr");
            scenario.episode_len = 4;
            scenario.batch_waveforms = 16;
            scenario.presets[0].path_spread = spread;
            let eval_class = |class: usize, action: &[f64], family: u64| -> f64 {
                let mut sc = scenario.clone();
                sc.forced_class = Some(class);
                let mut correct = 0usize;
                let mut total = 0usize;
                for ep in 0..40u64 {
                    let log = run_exploit_episode(&sc, clf, &ConstPolicy(action.to_vec()), &table, family + ep).unwrap();
                    correct += log.steps.iter().filter(|s| s.correct).count();
                    total += log.steps.len();
                }
                correct as f64 / total as f64
            };
            let mut zero_sum = 0.0;
            let mut fresh_sum = 0.0;
            for class in 0..3usize {
                let mut score = |a: &[f64]| eval_class(class, a, 9_000_000);
                let es = crate::baseline::es_maximize(&mut score, scenario.action_dim(), 500, 17).unwrap();
                let fresh = eval_class(class, &es.action, 9_500_000);
                let zero = eval_class(class, &vec![0.0; scenario.action_dim()], 9_500_000);
                let corner = es.action.iter().filter(|v| v.abs() > 0.8).count();
                println!("  class {class}: zero {zero:.3} fresh {fresh:.3} corner-components {corner}/22");
                zero_sum += zero;
                fresh_sum += fresh;
            }
            println!("  mean zero {:.3} static {:.3} ratio {:.2}", zero_sum / 3.0, fresh_sum / 3.0, fresh_sum / zero_sum);
        }
    }

    #[test]
    #[ignore]
    fn static_headroom() {
        let clf = test_classifier();
        let mut scenario = mla_scenario(2000, "mid_snr");
        scenario.episode_len = 4;
        scenario.batch_waveforms = 16;
        let table = RewardTable::default();

        let eval_class = |class: usize, action: &[f64], family: u64| -> f64 {
            let mut sc = scenario.clone();
            sc.forced_class = Some(class);
            let mut correct = 0usize;
            let mut total = 0usize;
            for ep in 0..40u64 {
                let log = run_exploit_episode(&sc, clf, &ConstPolicy(action.to_vec()), &table, family + ep).unwrap();
                correct += log.steps.iter().filter(|s| s.correct).count();
                total += log.steps.len();
            }
            correct as f64 / total as f64
        };

        for class in 0..3usize {
            let mut score = |a: &[f64]| eval_class(class, a, 9_000_000);
            let es = crate::baseline::es_maximize(&mut score, scenario.action_dim(), 600, 17).unwrap();
            let fresh = eval_class(class, &es.action, 9_500_000);
            let zero = eval_class(class, &vec![0.0; scenario.action_dim()], 9_500_000);
            println!("class {class}: zero {zero:.3} static-train {:.3} static-fresh {fresh:.3}", es.score);
            let fmt: Vec<String> = es.action.iter().map(|v| format!("{v:+.2}")).collect();
            println!("  action: {}", fmt.join(" "));
            // Keep only the two largest-|.| complex taps of the offset.
            let mut mags: Vec<(usize, f64)> = (0..scenario.action_dim() / 2)
                .map(|m| (m, (es.action[2 * m].powi(2) + es.action[2 * m + 1].powi(2)).sqrt()))
                .collect();
            mags.sort_by(|a, b| b.1.total_cmp(&a.1));
            let mut sparse = vec![0.0; scenario.action_dim()];
            for (m, _) in mags.iter().take(2) {
                sparse[2 * m] = es.action[2 * m];
                sparse[2 * m + 1] = es.action[2 * m + 1];
            }
            let sparse_fresh = eval_class(class, &sparse, 9_500_000);
            println!("  sparse(top2 taps) fresh: {sparse_fresh:.3}");
        }
    }

    #[test]
    #[ignore]
    fn echo_headroom() {
        let clf = test_classifier();
        let mut rng = stream(905);
        for (paths, spread) in [(2usize, 0.45f64), (2, 0.65), (3, 0.45)] {
            println!("paths {paths} spread {spread}:");
            let mut scenario = mla_scenario(2000, "mid_snr");
            scenario.episode_len = 4;
            scenario.batch_waveforms = 16;
            scenario.presets[0].num_paths = paths;
            scenario.presets[0].path_spread = spread;
            let table = RewardTable::default();
            for class in 0..3usize {
                let mut sc = scenario.clone();
                sc.forced_class = Some(class);
                let mut zeros = Vec::new();
                let mut bests = Vec::new();
                for ep in 0..10u64 {
                    let mut best = 0.0f64;
                    for trial in 0..80 {
                        let a: Vec<f64> = if trial == 0 {
                            vec![0.0; sc.action_dim()]
                        } else {
                            (0..sc.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
                        };
                        let log = run_exploit_episode(&sc, clf, &ConstPolicy(a), &table, 8_100_000 + ep).unwrap();
                        if trial == 0 {
                            zeros.push(log.accuracy());
                        }
                        best = best.max(log.accuracy());
                    }
                    bests.push(best);
                }
                println!(
                    "  class {class}: zero {:.3} oracle {:.3}",
                    zeros.iter().sum::<f64>() / 10.0,
                    bests.iter().sum::<f64>() / 10.0
                );
            }
        }
    }

    #[test]
    #[ignore]
    fn robust_variants() {
        println!("variant A: L=64 [256,128] ex5000 ep60");
        let a = train_variant(5000, 60, 64, vec![256, 128], 5e-4);
        snr_curve_of(&a, 64);
        println!("variant B: L=128 [256,128] ex5000 ep60");
        let b = train_variant(5000, 60, 128, vec![256, 128], 5e-4);
        snr_curve_of(&b, 128);
    }

    #[test]
    #[ignore]
    fn snr_curve() {
        let clf = test_classifier();
        let scenario = mla_scenario(2000, "mid_snr");
        for snr_db in [30.0, 22.0, 16.0, 14.0, 12.0, 10.0, 8.0, 6.0] {
            let mut per_class = [0usize; 3];
            let n = 200;
            for class in 0..3usize {
                for i in 0..n {
                    let seed = crate::rng::derive_seed(3100, "snrcurve", (class * n + i) as u64);
                    let clean = scenario.clean_waveform(class, seed).unwrap();
                    let mut ch = crate::channel::ChannelModel::flat(Some(snr_db), seed);
                    if clf.classify_one(&ch.apply(&clean)).unwrap().0 == class {
                        per_class[class] += 1;
                    }
                }
            }
            println!(
                "snr {snr_db:>4} dB: bpsk {:.2} qam16 {:.2} qam64 {:.2}",
                per_class[0] as f64 / n as f64,
                per_class[1] as f64 / n as f64,
                per_class[2] as f64 / n as f64
            );
        }
    }

    #[test]
    #[ignore]
    fn per_class_oracle() {
        let clf = test_classifier();
        let mut scenario = mla_scenario(2000, "mid_snr");
        scenario.episode_len = 4;
        scenario.batch_waveforms = 16;
        let table = RewardTable::default();
        let mut rng = stream(901);
        for class in 0..3usize {
            let mut sc = scenario.clone();
            sc.forced_class = Some(class);
            let mut bests = Vec::new();
            let mut zeros = Vec::new();
            for ep in 0..10u64 {
                let mut best = 0.0f64;
                for trial in 0..80 {
                    let a: Vec<f64> = if trial == 0 {
                        vec![0.0; sc.action_dim()]
                    } else {
                        (0..sc.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
                    };
                    let log = run_exploit_episode(&sc, clf, &ConstPolicy(a), &table, 8_000_000 + ep).unwrap();
                    let acc = log.accuracy();
                    if trial == 0 {
                        zeros.push(acc);
                    }
                    best = best.max(acc);
                }
                bests.push(best);
            }
            println!(
                "class {class}: zero {:.3} oracle {:.3}",
                zeros.iter().sum::<f64>() / 10.0,
                bests.iter().sum::<f64>() / 10.0
            );
        }
    }

    #[test]
    #[ignore]
    fn headroom_and_learning() {
        let clf = test_classifier();
        let mut scenario = mla_scenario(2000, "mid_snr");
        scenario.episode_len = 16;
        scenario.batch_waveforms = 16;
        let table = RewardTable::default();

        // Baseline accuracy.
        let nofir = NoFirPolicy::new(scenario.action_dim());
        let base = evaluate_policy(&scenario, clf, &nofir, &table, 60, 5_000_000).unwrap();
        println!("no-FIR accuracy: {:.3}", base.accuracy);

        // Oracle: best constant action per episode via random search.
        let mut rng = stream(42);
        let mut oracle_acc = Vec::new();
        for ep in 0..12u64 {
            let mut best = 0.0f64;
            for trial in 0..60 {
                let a: Vec<f64> = if trial == 0 {
                    vec![0.0; scenario.action_dim()]
                } else {
                    (0..scenario.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
                };
                let log = run_exploit_episode(&scenario, clf, &ConstPolicy(a), &table, 5_100_000 + ep).unwrap();
                best = best.max(log.accuracy());
            }
            oracle_acc.push(best);
        }
        let oracle = oracle_acc.iter().sum::<f64>() / oracle_acc.len() as f64;
        println!("per-episode constant-filter oracle: {oracle:.3}");

        // Static per-class ceiling via ES.
        let static_policy = crate::baseline::optimize_static_fir(&scenario, clf, 400, 77).unwrap();
        let st = evaluate_policy(&scenario, clf, &static_policy, &table, 60, 5_000_000).unwrap();
        println!("static per-class (ES budget 400): {:.3}", st.accuracy);

        // Production-shaped run: W=32, best-checkpoint tracking.
        let _ = (NoFirPolicy::new(1), 0);
        for (agent_seed, gamma) in [(11u64, 0.5), (11, 0.0)] {
            let mut sc = scenario.clone();
            sc.episode_len = 64;
            sc.batch_waveforms = 32;
            let mut config = Td3Config::for_taps(sc.state_dim(), sc.num_taps);
            config.actor_hidden = vec![64, 64];
            config.critic_hidden = vec![64, 64];
            config.gamma = gamma;
            config.actor_lr = 2e-4;
            config.critic_lr = 1e-3;
            config.sigma_explore = 0.2;
            config.sigma_smooth = 0.2;
            config.clip_smooth = 0.5;
            config.batch_size = 128;
            config.lr_decay_steps = Some(30_000);
            let mut agent = Td3Agent::new(config, agent_seed).unwrap();
            println!("seed {agent_seed} gamma {gamma}");
            let episodes = 30_000 / 64u64;
            let mut best_acc = -1.0f64;
            let mut best_actor: Option<crate::nn::Mlp> = None;
            for ep in 0..episodes {
                run_training_episode(&sc, clf, &mut agent, &table, crate::env::ExploreSchedule::default(), ep).unwrap();
                if (ep + 1) % 40 == 0 {
                    let eval = evaluate_policy(&sc, clf, &agent, &table, 32, 6_000_000 + 1000 * ep).unwrap();
                    println!("  {} steps: exploit acc {:.3}", agent.step_count(), eval.accuracy);
                    if eval.accuracy > best_acc {
                        best_acc = eval.accuracy;
                        best_actor = Some(agent.actor().clone());
                    }
                }
            }
            // Fresh-pool comparison.
            struct FrozenActor(crate::nn::Mlp);
            impl ActionPolicy for FrozenActor {
                fn action(&self, s: &[f64]) -> Result<Vec<f64>> {
                    self.0.infer(s)
                }
            }
            let frozen = FrozenActor(best_actor.unwrap());
            let fresh_best = evaluate_policy(&sc, clf, &frozen, &table, 100, 7_000_000).unwrap();
            let fresh_last = evaluate_policy(&sc, clf, &agent, &table, 100, 7_000_000).unwrap();
            let nofir2 = evaluate_policy(&sc, clf, &NoFirPolicy::new(sc.action_dim()), &table, 100, 7_000_000).unwrap();
            println!("  fresh pool: best-ckpt {:.3} last {:.3} no-FIR {:.3} ratio {:.2}",
                fresh_best.accuracy, fresh_last.accuracy, nofir2.accuracy,
                fresh_best.accuracy / nofir2.accuracy);
            // Per-class behavior of the final policy.
            for class in 0..3usize {
                let mut pinned = sc.clone();
                pinned.forced_class = Some(class);
                let ev = evaluate_policy(&pinned, clf, &agent, &table, 30, 7_500_000).unwrap();
                let zv = evaluate_policy(&pinned, clf, &NoFirPolicy::new(sc.action_dim()), &table, 30, 7_500_000).unwrap();
                // Policy's action on the initial state of this class.
                let init = crate::env::WscState::initial(3, class, sc.action_dim()).flatten();
                let a = agent.act_exploit(&init).unwrap();
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                println!("  class {class}: agent {:.3} zero {:.3} |a(init)| {norm:.2}", ev.accuracy, zv.accuracy);
            }
        }
    }
}
