//! Non-adaptive comparison policies: the pass-through filter and a single
//! offline-optimized filter per class held static across all channels.


use crate::classifier::ClassifierBundle;
use crate::env::{run_exploit_episode, ActionPolicy, RewardTable, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, gauss, stream};

/// Always transmits unmodified waveforms (the zero action renders to the
/// pass-through filter).
#[derive(Debug, Clone)]
pub struct NoFirPolicy {
    action_dim: usize,
}

impl NoFirPolicy {
    pub fn new(action_dim: usize) -> Self {
        NoFirPolicy { action_dim }
    }
}

impl ActionPolicy for NoFirPolicy {
    fn action(&self, _state: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.action_dim])
    }
}

/// One offline-optimized action per class, chosen by the target one-hot in
/// the state and then held fixed regardless of feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticFirPolicy {
    num_classes: usize,
    actions: Vec<Vec<f64>>,
}

impl StaticFirPolicy {
    pub fn new(actions: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::invalid("static policy needs at least one action"));
        }
        let dim = actions[0].len();
        if actions.iter().any(|a| a.len() != dim) {
            return Err(Error::invalid("static actions must share one dimension"));
        }
        Ok(StaticFirPolicy { num_classes: actions.len(), actions })
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    /// Stable digest of the frozen actions.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for a in &self.actions {
            for v in a {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

impl ActionPolicy for StaticFirPolicy {
    fn action(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() < 2 * self.num_classes {
            return Err(Error::invalid("state too short to carry the target one-hot"));
        }
        let onehot = &state[self.num_classes..2 * self.num_classes];
        let mut class = 0usize;
        for (i, v) in onehot.iter().enumerate() {
            if *v > onehot[class] {
                class = i;
            }
        }
        Ok(self.actions[class].clone())
    }
}

/// Result of an evolutionary search.
#[derive(Debug, Clone)]
pub struct EsResult {
    pub action: Vec<f64>,
    pub score: f64,
    /// Best score after each generation; nondecreasing by elitism.
    pub history: Vec<f64>,
}

/// Derivative-free (1+lambda) evolution strategy over the [-1,1]^dim box with
/// lambda = 8, starting from (and never regressing below) the zero action.
pub fn es_maximize(
    score: &mut dyn FnMut(&[f64]) -> f64,
    dim: usize,
    budget: usize,
    seed: u64,
) -> Result<EsResult> {
    if budget < 100 {
        return Err(Error::invalid("search budget must be at least 100 evaluations"));
    }
    if dim == 0 {
        return Err(Error::invalid("search dimension must be positive"));
    }
    const LAMBDA: usize = 8;
    let mut rng = stream(derive_seed(seed, "es", 0));
    let mut elite = vec![0.0; dim];
    let mut elite_score = score(&elite);
    let mut evals = 1usize;
    let mut sigma = 0.3;
    let mut history = vec![elite_score];

    while evals + LAMBDA <= budget {
        let mut improved = false;
        for _ in 0..LAMBDA {
            let candidate: Vec<f64> = elite
                .iter()
                .map(|e| (e + sigma * gauss(&mut rng)).clamp(-1.0, 1.0))
                .collect();
            let s = score(&candidate);
            evals += 1;
            if s > elite_score {
                elite = candidate;
                elite_score = s;
                improved = true;
            }
        }
        // Shrink steps once progress stalls, never below a search floor.
        if !improved {
            sigma = (sigma * 0.85).max(0.02);
        }
        history.push(elite_score);
    }
    Ok(EsResult { action: elite, score: elite_score, history })
}

/// The success-rate objective for one class: mean fraction of correctly
/// classified batches over a fixed set of channel realizations drawn from the
/// scenario's presets. Deterministic in (scenario, seed).
fn class_score(
    scenario: &ScenarioConfig,
    classifier: &ClassifierBundle,
    class: usize,
    action: &[f64],
    realizations: usize,
    episode_family: u64,
) -> Result<f64> {
    let mut pinned = scenario.clone();
    pinned.forced_class = Some(class);
    let policy = ConstPolicy(action.to_vec());
    let table = RewardTable::default();
    let mut correct = 0usize;
    let mut total = 0usize;
    for r in 0..realizations {
        let log = run_exploit_episode(
            &pinned,
            classifier,
            &policy,
            &table,
            episode_family + r as u64,
        )?;
        correct += log.steps.iter().filter(|s| s.correct).count();
        total += log.steps.len();
    }
    Ok(correct as f64 / total as f64)
}

struct ConstPolicy(Vec<f64>);

impl ActionPolicy for ConstPolicy {
    fn action(&self, _state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }
}

/// Offline search for one static filter per class against a frozen set of
/// training channels. `budget` is the evaluation count per class.
pub fn optimize_static_fir(
    scenario: &ScenarioConfig,
    classifier: &ClassifierBundle,
    budget: usize,
    seed: u64,
) -> Result<StaticFirPolicy> {
    let mut train_scenario = scenario.clone();
    // Keep optimization episodes short and disjoint from evaluation seeds.
    train_scenario.episode_len = scenario.episode_len.min(4);
    let realizations = 6;
    let episode_family = 1_000_000;

    let mut actions = Vec::with_capacity(scenario.num_classes());
    for class in 0..scenario.num_classes() {
        let mut score = |a: &[f64]| {
            class_score(&train_scenario, classifier, class, a, realizations, episode_family)
                .unwrap_or(0.0)
        };
        let result = es_maximize(
            &mut score,
            scenario.action_dim(),
            budget,
            derive_seed(seed, "static-fir", class as u64),
        )?;
        actions.push(result.action);
    }
    StaticFirPolicy::new(actions)
}
