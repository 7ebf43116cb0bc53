//! The closed loop: synthesize a batch of waveforms for the episode's true
//! class, filter them with the taps rendered from the agent's action, push
//! them through the channel, collect the classifier's feedback, and score the
//! action against the previous feedback.

use num_complex::Complex64;
use rand::RngExt;

use crate::agent::{ActionMode, Td3Agent, Trajectory};
use crate::channel::{ChannelModel, ChannelPreset};
use crate::classifier::{ClassifierBundle, Feedback};
use crate::dsp::{clamp_taps, fir_apply};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::waveform::{apply_impairment, modulate, random_bits, DeviceImpairment, ModScheme};

/// Reward values and the softmax dead band. Defaults: success 2, improved 1,
/// unchanged 0, degraded -1, dead band 1e-4.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    pub success: f64,
    pub up: f64,
    pub down: f64,
    pub same: f64,
    pub epsilon_tol: f64,
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable { success: 2.0, up: 1.0, down: -1.0, same: 0.0, epsilon_tol: 1e-4 }
    }
}

/// Pure reward rule. Correct majority label wins outright; otherwise the
/// change of the true class's mean softmax against the previous feedback
/// decides, with `epsilon_tol` absorbing quantization-scale wiggle. With no
/// previous feedback and a wrong label there is nothing to compare, so the
/// unchanged reward applies.
pub fn compute_reward(
    prev: Option<&Feedback>,
    cur: &Feedback,
    true_class: usize,
    table: &RewardTable,
) -> f64 {
    if cur.majority_label == true_class {
        return table.success;
    }
    match prev {
        None => table.same,
        Some(p) => {
            let delta = cur.mean_softmax[true_class] - p.mean_softmax[true_class];
            if delta > table.epsilon_tol {
                table.up
            } else if delta < -table.epsilon_tol {
                table.down
            } else {
                table.same
            }
        }
    }
}

/// What the agent observes: the receiver's mean softmax, the target class,
/// and the action it played last.
#[derive(Debug, Clone, PartialEq)]
pub struct WscState {
    pub mean_softmax: Vec<f64>,
    pub target_onehot: Vec<f64>,
    pub prev_action: Vec<f64>,
}

impl WscState {
    /// Episode-start state: uniform softmax, zero previous action.
    pub fn initial(num_classes: usize, true_class: usize, action_dim: usize) -> Self {
        let mut target_onehot = vec![0.0; num_classes];
        target_onehot[true_class] = 1.0;
        WscState {
            mean_softmax: vec![1.0 / num_classes as f64; num_classes],
            target_onehot,
            prev_action: vec![0.0; action_dim],
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out =
            Vec::with_capacity(self.mean_softmax.len() * 2 + self.prev_action.len());
        out.extend_from_slice(&self.mean_softmax);
        out.extend_from_slice(&self.target_onehot);
        out.extend_from_slice(&self.prev_action);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Multi-label: the true class is a modulation scheme drawn per episode.
    Mla,
    /// Single-label: devices share one modulation; the protected device is
    /// the fixed true class.
    Sla,
    /// MLA under an additive jammer.
    Adv,
}

impl ScenarioKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "mla" => Ok(ScenarioKind::Mla),
            "sla" => Ok(ScenarioKind::Sla),
            "adv" => Ok(ScenarioKind::Adv),
            other => Err(Error::Config(format!("unknown scenario mode '{other}'"))),
        }
    }
}

/// Everything needed to run episodes of one problem configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// MLA/ADV: the selectable classes. SLA: the single shared modulation.
    pub schemes: Vec<ModScheme>,
    /// SLA device signatures (one class per device); empty otherwise.
    pub devices: Vec<DeviceImpairment>,
    /// SLA: index of the device the loop protects.
    pub protected_device: usize,
    /// Channel regimes cycled by episode index.
    pub presets: Vec<ChannelPreset>,
    /// Overrides the preset jammer power when set (jammer sweeps).
    pub jammer_override_db: Option<Option<f64>>,
    /// Pins the per-episode class draw (per-class baseline optimization).
    pub forced_class: Option<usize>,
    pub episode_len: usize,
    pub batch_waveforms: usize,
    pub input_len: usize,
    pub sps: usize,
    pub num_taps: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn num_classes(&self) -> usize {
        match self.kind {
            ScenarioKind::Mla | ScenarioKind::Adv => self.schemes.len(),
            ScenarioKind::Sla => self.devices.len(),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        match self.kind {
            ScenarioKind::Mla | ScenarioKind::Adv => {
                self.schemes.iter().map(|s| s.name().to_string()).collect()
            }
            ScenarioKind::Sla => {
                (0..self.devices.len()).map(|i| format!("device{i}")).collect()
            }
        }
    }

    pub fn action_dim(&self) -> usize {
        2 * self.num_taps
    }

    pub fn state_dim(&self) -> usize {
        2 * self.num_classes() + self.action_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.episode_len == 0 || self.batch_waveforms == 0 {
            return Err(Error::invalid("episode length and batch size must be positive"));
        }
        if self.presets.is_empty() {
            return Err(Error::invalid("scenario needs at least one channel preset"));
        }
        if self.sps == 0 || self.input_len % self.sps != 0 {
            return Err(Error::invalid("input_len must be a positive multiple of sps"));
        }
        if self.num_taps == 0 || !(self.alpha > 0.0) {
            return Err(Error::invalid("tap count and alpha must be positive"));
        }
        match self.kind {
            ScenarioKind::Mla | ScenarioKind::Adv => {
                if self.schemes.len() < 2 {
                    return Err(Error::invalid("MLA/ADV need at least two schemes"));
                }
            }
            ScenarioKind::Sla => {
                if self.schemes.is_empty() {
                    return Err(Error::invalid("SLA needs the shared modulation scheme"));
                }
                if self.devices.len() < 2 {
                    return Err(Error::invalid("SLA needs at least two devices"));
                }
                if self.protected_device >= self.devices.len() {
                    return Err(Error::invalid("protected device index out of range"));
                }
            }
        }
        Ok(())
    }

    /// The scheme transmitted for a given class index.
    fn scheme_for_class(&self, class: usize) -> ModScheme {
        match self.kind {
            ScenarioKind::Mla | ScenarioKind::Adv => self.schemes[class],
            ScenarioKind::Sla => self.schemes[0],
        }
    }

    /// Waveform generator used both for classifier training data and inside
    /// episodes: bits -> modulation -> (SLA) device impairment. The result
    /// still needs filtering and the channel.
    pub fn clean_waveform(&self, class: usize, seed: u64) -> Result<crate::dsp::IqBuffer> {
        let scheme = self.scheme_for_class(class);
        let symbols = self.input_len / self.sps;
        let bits = random_bits(symbols * scheme.bits_per_symbol(), derive_seed(seed, "bits", 0));
        let wave = modulate(&bits, scheme, self.sps)?;
        Ok(match self.kind {
            ScenarioKind::Sla => {
                apply_impairment(&wave, &self.devices[class], derive_seed(seed, "device", 0))
            }
            _ => wave,
        })
    }
}

/// Deterministic spread of device signatures for SLA experiments.
pub fn default_devices(count: usize, seed: u64) -> Vec<DeviceImpairment> {
    let mut rng = stream(derive_seed(seed, "devices", 0));
    (0..count)
        .map(|_| {
            DeviceImpairment::new(
                rng.random_range(0.86..1.14),
                rng.random_range(-0.15..0.15),
                Complex64::new(rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04)),
                rng.random_range(0.0..0.004),
            )
            .expect("generated impairments satisfy the bounds")
        })
        .collect()
}

/// What one environment step hands back.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub feedback: Feedback,
    pub next_state: WscState,
    pub reward: f64,
}

/// One live episode: fixed true class, drifting channel, feedback memory.
pub struct Env<'a> {
    scenario: &'a ScenarioConfig,
    classifier: &'a ClassifierBundle,
    table: RewardTable,
    channel: ChannelModel,
    true_class: usize,
    episode_seed: u64,
    step_index: u64,
    prev_feedback: Option<Feedback>,
    state: WscState,
}

impl<'a> Env<'a> {
    pub fn new_episode(
        scenario: &'a ScenarioConfig,
        classifier: &'a ClassifierBundle,
        table: RewardTable,
        episode_index: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        if classifier.num_classes() != scenario.num_classes() {
            return Err(Error::invalid("classifier classes do not match the scenario"));
        }
        if classifier.input_len() != scenario.input_len {
            return Err(Error::invalid("classifier input length does not match the scenario"));
        }
        let episode_seed = derive_seed(scenario.seed, "episode", episode_index);
        let true_class = match (scenario.forced_class, scenario.kind) {
            (Some(class), _) => {
                if class >= scenario.num_classes() {
                    return Err(Error::invalid("forced class out of range"));
                }
                class
            }
            (None, ScenarioKind::Sla) => scenario.protected_device,
            (None, _) => {
                let mut rng = stream(derive_seed(episode_seed, "class", 0));
                rng.random_range(0..scenario.num_classes())
            }
        };
        let preset: &ChannelPreset =
            &scenario.presets[(episode_index % scenario.presets.len() as u64) as usize];
        let mut channel = preset.sample_model(derive_seed(episode_seed, "channel", 0));
        if let Some(jam) = scenario.jammer_override_db {
            channel.set_jammer_power_db(jam);
        }
        Ok(Env {
            scenario,
            classifier,
            table,
            channel,
            true_class,
            episode_seed,
            step_index: 0,
            prev_feedback: None,
            state: WscState::initial(
                scenario.num_classes(),
                true_class,
                scenario.action_dim(),
            ),
        })
    }

    pub fn state(&self) -> &WscState {
        &self.state
    }

    pub fn true_class(&self) -> usize {
        self.true_class
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    /// Transmit one batch under `action` and score it.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != self.scenario.action_dim() {
            return Err(Error::invalid(format!(
                "action has {} components, scenario expects {}",
                action.len(),
                self.scenario.action_dim()
            )));
        }
        let filter = clamp_taps(action, self.scenario.alpha)?;

        let w = self.scenario.batch_waveforms;
        let mut batch = Vec::with_capacity(w);
        for i in 0..w {
            let wave_seed = derive_seed(
                self.episode_seed,
                "waveform",
                self.step_index * w as u64 + i as u64,
            );
            let clean = self.scenario.clean_waveform(self.true_class, wave_seed)?;
            let shaped = fir_apply(&clean, &filter)?;
            batch.push(self.channel.apply(&shaped));
        }
        let feedback = self.classifier.classify_batch(&batch)?;
        let reward =
            compute_reward(self.prev_feedback.as_ref(), &feedback, self.true_class, &self.table);

        let next_state = WscState {
            mean_softmax: feedback.mean_softmax.clone(),
            target_onehot: self.state.target_onehot.clone(),
            prev_action: action.to_vec(),
        };
        self.prev_feedback = Some(feedback.clone());
        self.state = next_state.clone();
        self.step_index += 1;
        self.channel.step();
        Ok(StepOutcome { feedback, next_state, reward })
    }
}

/// Anything that can pick an action from a flattened state.
pub trait ActionPolicy {
    fn action(&self, state: &[f64]) -> Result<Vec<f64>>;
}

impl ActionPolicy for Td3Agent {
    fn action(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.act_exploit(state)
    }
}

/// One logged step of an episode.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: u64,
    pub reward: f64,
    pub correct: bool,
    pub softmax_true: f64,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: u64,
    pub true_class: usize,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Fraction of steps whose batch was classified correctly. Identical to
    /// the fraction of steps earning the success reward.
    pub fn accuracy(&self) -> f64 {
        self.steps.iter().filter(|s| s.correct).count() as f64 / self.steps.len() as f64
    }

    pub fn mean_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum::<f64>() / self.steps.len() as f64
    }
}

/// Exploration schedule knobs for [`run_training_episode`].
#[derive(Debug, Clone, Copy)]
pub struct ExploreSchedule {
    /// Uniform random actions for this many leading agent steps, so the
    /// critics see broad (action, reward) coverage before the actor starts
    /// following them.
    pub warmup_steps: u64,
    /// After warm-up, keep playing a fully uniform action with this
    /// probability. Policy-local noise alone never revisits distant regions
    /// once the policy drifts, and the critics go stale there.
    pub uniform_prob: f64,
    /// After warm-up, play the zero action with this probability. Keeps the
    /// critics calibrated at the pass-through baseline, so the actor only
    /// leaves it for genuinely better actions.
    pub zero_anchor_prob: f64,
}

impl Default for ExploreSchedule {
    fn default() -> Self {
        ExploreSchedule { warmup_steps: 2000, uniform_prob: 0.10, zero_anchor_prob: 0.05 }
    }
}

/// Run one episode with exploration noise, feeding every transition into the
/// agent's training step.
pub fn run_training_episode(
    scenario: &ScenarioConfig,
    classifier: &ClassifierBundle,
    agent: &mut Td3Agent,
    table: &RewardTable,
    schedule: ExploreSchedule,
    episode_index: u64,
) -> Result<EpisodeLog> {
    if agent.config().state_dim != scenario.state_dim()
        || agent.config().action_dim != scenario.action_dim()
    {
        return Err(Error::invalid("agent dimensions do not match the scenario"));
    }
    let mut env = Env::new_episode(scenario, classifier, table.clone(), episode_index)?;
    let mut explore_rng = stream(derive_seed(scenario.seed, "explore-schedule", episode_index));
    let mut steps = Vec::with_capacity(scenario.episode_len);
    let true_class = env.true_class();
    for step in 0..scenario.episode_len {
        let state = env.state().flatten();
        let draw: f64 = explore_rng.random_range(0.0..1.0);
        let action = if agent.step_count() < schedule.warmup_steps
            || draw < schedule.uniform_prob
        {
            (0..scenario.action_dim()).map(|_| explore_rng.random_range(-1.0..1.0)).collect()
        } else if draw < schedule.uniform_prob + schedule.zero_anchor_prob {
            vec![0.0; scenario.action_dim()]
        } else {
            agent.select_action(&state, ActionMode::Explore)?
        };
        let outcome = env.step(&action)?;
        agent.train_step(Trajectory {
            state,
            action: action.clone(),
            reward: outcome.reward,
            next_state: outcome.next_state.flatten(),
        })?;
        steps.push(StepRecord {
            episode: episode_index,
            step: step as u64,
            reward: outcome.reward,
            correct: outcome.feedback.majority_label == true_class,
            softmax_true: outcome.feedback.mean_softmax[true_class],
            action,
        });
    }
    Ok(EpisodeLog { episode: episode_index, true_class, steps })
}

/// Run one frozen-policy episode (no exploration, no learning).
pub fn run_exploit_episode(
    scenario: &ScenarioConfig,
    classifier: &ClassifierBundle,
    policy: &dyn ActionPolicy,
    table: &RewardTable,
    episode_index: u64,
) -> Result<EpisodeLog> {
    let mut env = Env::new_episode(scenario, classifier, table.clone(), episode_index)?;
    let mut steps = Vec::with_capacity(scenario.episode_len);
    let true_class = env.true_class();
    for step in 0..scenario.episode_len {
        let state = env.state().flatten();
        let action = policy.action(&state)?;
        let outcome = env.step(&action)?;
        steps.push(StepRecord {
            episode: episode_index,
            step: step as u64,
            reward: outcome.reward,
            correct: outcome.feedback.majority_label == true_class,
            softmax_true: outcome.feedback.mean_softmax[true_class],
            action,
        });
    }
    Ok(EpisodeLog { episode: episode_index, true_class, steps })
}

/// Accuracy plus the reward-outcome distribution over a block of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub episodes: usize,
    pub accuracy: f64,
    pub frac_success: f64,
    pub frac_up: f64,
    pub frac_same: f64,
    pub frac_down: f64,
}

pub fn evaluate_policy(
    scenario: &ScenarioConfig,
    classifier: &ClassifierBundle,
    policy: &dyn ActionPolicy,
    table: &RewardTable,
    episodes: usize,
    episode_offset: u64,
) -> Result<EvalStats> {
    let mut counts = [0usize; 4]; // success, up, same, down
    let mut correct = 0usize;
    let mut total = 0usize;
    for e in 0..episodes {
        let log = run_exploit_episode(
            scenario,
            classifier,
            policy,
            table,
            episode_offset + e as u64,
        )?;
        for s in &log.steps {
            total += 1;
            if s.correct {
                correct += 1;
            }
            let slot = if s.reward == table.success {
                0
            } else if s.reward == table.up {
                1
            } else if s.reward == table.same {
                2
            } else {
                3
            };
            counts[slot] += 1;
        }
    }
    Ok(EvalStats {
        episodes,
        accuracy: correct as f64 / total as f64,
        frac_success: counts[0] as f64 / total as f64,
        frac_up: counts[1] as f64 / total as f64,
        frac_same: counts[2] as f64 / total as f64,
        frac_down: counts[3] as f64 / total as f64,
    })
}
