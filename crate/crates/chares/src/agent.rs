//! Twin-critic delayed deterministic policy gradient agent.
//!
//! One actor maps the feedback state to a raw action in (-1,1)^action_dim
//! (rendered into FIR taps downstream); two critics score state-action pairs.
//! Targets use the elementwise minimum of the two target critics over a
//! smoothed target action; the actor and the target networks update only
//! every `delay` steps.

use std::path::Path;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::nn::{adam_step, checkpoint, Activation, AdamState, Gradients, Mlp};
use crate::rng::{derive_seed, gauss, stream, Stream};

/// One replay entry: (s, a, r, s').
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring buffer with uniform with-replacement sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: Vec<Trajectory>,
    capacity: usize,
    write_head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { entries: Vec::new(), capacity: capacity.max(1), write_head: 0 }
    }

    pub fn push(&mut self, trajectory: Trajectory) {
        if self.entries.len() < self.capacity {
            self.entries.push(trajectory);
        } else {
            self.entries[self.write_head] = trajectory;
        }
        self.write_head = (self.write_head + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample(&self, rng: &mut Stream, batch_size: usize) -> Vec<Trajectory> {
        use rand::RngExt;
        (0..batch_size)
            .map(|_| self.entries[rng.random_range(0..self.entries.len())].clone())
            .collect()
    }
}

/// Hyperparameters. The numeric defaults are the experiment-grade settings:
/// discount 0.99, update delay 2, target blend 0.05, batch 64, buffer 10000,
/// 11 taps inside a 0.1 box.
#[derive(Debug, Clone, PartialEq)]
pub struct Td3Config {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Taps rendered from the action (informational; the env does the
    /// rendering). action_dim == 2 * num_taps when used with filters.
    pub num_taps: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub delay: u64,
    pub polyak: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub sigma_explore: f64,
    pub sigma_smooth: f64,
    pub clip_smooth: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// When set, both step sizes decay linearly from their base value to a
    /// 5% floor over this many training steps.
    pub lr_decay_steps: Option<u64>,
}

impl Td3Config {
    /// Config for a filter-synthesis agent: action is 2 reals per tap.
    pub fn for_taps(state_dim: usize, num_taps: usize) -> Self {
        Td3Config {
            state_dim,
            action_dim: 2 * num_taps,
            num_taps,
            alpha: 0.1,
            gamma: 0.99,
            delay: 2,
            polyak: 0.05,
            batch_size: 64,
            buffer_capacity: 10_000,
            sigma_explore: 0.1,
            sigma_smooth: 0.05,
            clip_smooth: 0.1,
            actor_hidden: vec![30; 10],
            critic_hidden: vec![30; 10],
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            lr_decay_steps: None,
        }
    }

    /// Config with an explicit action dimension (toy problems).
    pub fn with_action_dim(state_dim: usize, action_dim: usize) -> Self {
        let mut c = Td3Config::for_taps(state_dim, 1);
        c.action_dim = action_dim;
        c.num_taps = 0;
        c
    }

    fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::invalid("state and action dimensions must be positive"));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::invalid("buffer capacity must hold at least one batch"));
        }
        if self.delay == 0 {
            return Err(Error::invalid("update delay must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.polyak) {
            return Err(Error::invalid("polyak blend must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-step training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Pre-update MSBE of each critic, when an update ran.
    pub critic_loss: Option<(f64, f64)>,
    pub actor_updated: bool,
    pub buffer_size: usize,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    config: Td3Config,
    actor: Mlp,
    critic1: Mlp,
    critic2: Mlp,
    target_actor: Mlp,
    target_critic1: Mlp,
    target_critic2: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    buffer: ReplayBuffer,
    step_count: u64,
    rng: Stream,
}

/// Action selection mode: exploration adds clipped Gaussian noise, the
/// exploit path is the bare deterministic policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Exploit,
}

impl Td3Agent {
    pub fn new(config: Td3Config, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut actor_dims = vec![config.state_dim];
        actor_dims.extend_from_slice(&config.actor_hidden);
        actor_dims.push(config.action_dim);
        let mut actor_acts = vec![Activation::Relu; config.actor_hidden.len()];
        actor_acts.push(Activation::Tanh);
        let actor = Mlp::new(&actor_dims, &actor_acts, derive_seed(seed, "actor-init", 0))?;
        // Shrink the actor head so the initial policy sits at the zero action
        // (the pass-through filter) instead of a random tanh corner.
        let actor = scale_final_layer(&actor, 0.01)?;

        let mut critic_dims = vec![config.state_dim + config.action_dim];
        critic_dims.extend_from_slice(&config.critic_hidden);
        critic_dims.push(1);
        let mut critic_acts = vec![Activation::Relu; config.critic_hidden.len()];
        critic_acts.push(Activation::Linear);
        let critic1 = Mlp::new(&critic_dims, &critic_acts, derive_seed(seed, "critic1-init", 0))?;
        let critic2 = Mlp::new(&critic_dims, &critic_acts, derive_seed(seed, "critic2-init", 0))?;

        let actor_opt = AdamState::new(&actor, config.actor_lr);
        let critic1_opt = AdamState::new(&critic1, config.critic_lr);
        let critic2_opt = AdamState::new(&critic2, config.critic_lr);
        Ok(Td3Agent {
            target_actor: actor.clone(),
            target_critic1: critic1.clone(),
            target_critic2: critic2.clone(),
            actor,
            critic1,
            critic2,
            actor_opt,
            critic1_opt,
            critic2_opt,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            step_count: 0,
            rng: stream(derive_seed(seed, "agent-stream", 0)),
            config,
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic1(&self) -> &Mlp {
        &self.critic1
    }

    pub fn critic2(&self) -> &Mlp {
        &self.critic2
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic1(&self) -> &Mlp {
        &self.target_critic1
    }

    pub fn target_critic2(&self) -> &Mlp {
        &self.target_critic2
    }

    /// Checksum across all six networks; constant under exploit-only use.
    pub fn checksum(&self) -> u64 {
        self.actor.checksum()
            ^ self.critic1.checksum().rotate_left(8)
            ^ self.critic2.checksum().rotate_left(16)
            ^ self.target_actor.checksum().rotate_left(24)
            ^ self.target_critic1.checksum().rotate_left(32)
            ^ self.target_critic2.checksum().rotate_left(40)
    }

    /// Deterministic policy output; never mutates the agent.
    pub fn act_exploit(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        self.actor.infer(state)
    }

    /// Policy output, optionally perturbed by exploration noise and clipped
    /// back into the action box.
    pub fn select_action(&mut self, state: &[f64], mode: ActionMode) -> Result<Vec<f64>> {
        let mut action = self.act_exploit(state)?;
        if mode == ActionMode::Explore {
            for a in &mut action {
                *a = (*a + self.config.sigma_explore * gauss(&mut self.rng)).clamp(-1.0, 1.0);
            }
        }
        Ok(action)
    }

    /// Bellman targets: smoothed target action on the next state, scored by
    /// the elementwise minimum of the two target critics.
    pub fn compute_targets(&mut self, batch: &[Trajectory]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::invalid("target computation needs a nonempty batch"));
        }
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            let mut next_action = self.target_actor.infer(&t.next_state)?;
            for a in &mut next_action {
                let noise = (self.config.sigma_smooth * gauss(&mut self.rng))
                    .clamp(-self.config.clip_smooth, self.config.clip_smooth);
                *a = (*a + noise).clamp(-1.0, 1.0);
            }
            let sa = concat_state_action(&t.next_state, &next_action);
            let q1 = self.target_critic1.infer(&sa)?[0];
            let q2 = self.target_critic2.infer(&sa)?[0];
            targets.push(t.reward + self.config.gamma * q1.min(q2));
        }
        Ok(targets)
    }

    /// One Adam step on each critic against the shared targets. Returns the
    /// pre-update mean squared error of each critic.
    pub fn critic_update(&mut self, batch: &[Trajectory]) -> Result<(f64, f64)> {
        let targets = self.compute_targets(batch)?;
        let l1 = update_one_critic(&mut self.critic1, &mut self.critic1_opt, batch, &targets)?;
        let l2 = update_one_critic(&mut self.critic2, &mut self.critic2_opt, batch, &targets)?;
        Ok((l1, l2))
    }

    /// Gradient of the mean first-critic score of the policy's own actions,
    /// chained through the critic's action-input gradient.
    pub fn actor_gradient(&self, batch: &[Trajectory]) -> Result<Gradients> {
        if batch.is_empty() {
            return Err(Error::invalid("actor update needs a nonempty batch"));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = Gradients::zeros_like(&self.actor);
        for t in batch {
            let actor_cache = self.actor.forward(&t.state)?;
            let action = actor_cache.output();
            let critic_cache = self.critic1.forward(&concat_state_action(&t.state, action))?;
            let (_, input_grad) = self.critic1.backward(&critic_cache, &[scale])?;
            let action_grad = &input_grad[self.config.state_dim..];
            let (g, _) = self.actor.backward(&actor_cache, action_grad)?;
            total.add_assign(&g);
        }
        Ok(total)
    }

    /// Delayed deterministic policy-gradient ascent on the actor. Errors if
    /// called off the `delay` schedule. Critics are left untouched.
    pub fn actor_update(&mut self, batch: &[Trajectory]) -> Result<()> {
        self.check_schedule("actor update")?;
        let mut grads = self.actor_gradient(batch)?;
        grads.scale(-1.0); // ascend
        adam_step(&mut self.actor, &grads, &mut self.actor_opt)
    }

    /// Blend every target network toward its main network. Errors if called
    /// off the `delay` schedule.
    pub fn polyak_update(&mut self) -> Result<()> {
        self.check_schedule("target update")?;
        let omega = self.config.polyak;
        self.target_actor.blend_from(&self.actor, omega)?;
        self.target_critic1.blend_from(&self.critic1, omega)?;
        self.target_critic2.blend_from(&self.critic2, omega)?;
        Ok(())
    }

    /// Store a trajectory and run whatever updates the schedule allows.
    pub fn train_step(&mut self, trajectory: Trajectory) -> Result<StepDiagnostics> {
        if trajectory.state.len() != self.config.state_dim
            || trajectory.next_state.len() != self.config.state_dim
            || trajectory.action.len() != self.config.action_dim
        {
            return Err(Error::invalid("trajectory dimensions do not match the agent"));
        }
        self.buffer.push(trajectory);

        if let Some(horizon) = self.config.lr_decay_steps {
            let frac = 1.0 - self.step_count as f64 / horizon as f64;
            let scale = frac.max(0.05);
            self.actor_opt.learning_rate = self.config.actor_lr * scale;
            self.critic1_opt.learning_rate = self.config.critic_lr * scale;
            self.critic2_opt.learning_rate = self.config.critic_lr * scale;
        }

        let mut diagnostics = StepDiagnostics {
            critic_loss: None,
            actor_updated: false,
            buffer_size: self.buffer.len(),
        };
        if self.buffer.len() >= self.config.batch_size {
            let batch = self.buffer.sample(&mut self.rng, self.config.batch_size);
            diagnostics.critic_loss = Some(self.critic_update(&batch)?);
            if self.step_count % self.config.delay == 0 {
                self.actor_update(&batch)?;
                self.polyak_update()?;
                diagnostics.actor_updated = true;
            }
        }
        self.step_count += 1;
        Ok(diagnostics)
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.config.state_dim {
            return Err(Error::invalid(format!(
                "state has {} components, agent expects {}",
                state.len(),
                self.config.state_dim
            )));
        }
        Ok(())
    }

    fn check_schedule(&self, what: &str) -> Result<()> {
        if self.step_count % self.config.delay != 0 {
            return Err(Error::ContractViolation(format!(
                "{what} at step {} violates the every-{} schedule",
                self.step_count, self.config.delay
            )));
        }
        Ok(())
    }

    /// Persist all six networks plus a hyperparameter sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        checkpoint::write(&dir.join("actor.chnn"), &self.actor)?;
        checkpoint::write(&dir.join("critic1.chnn"), &self.critic1)?;
        checkpoint::write(&dir.join("critic2.chnn"), &self.critic2)?;
        checkpoint::write(&dir.join("target_actor.chnn"), &self.target_actor)?;
        checkpoint::write(&dir.join("target_critic1.chnn"), &self.target_critic1)?;
        checkpoint::write(&dir.join("target_critic2.chnn"), &self.target_critic2)?;

        let c = &self.config;
        let mut meta = Config::new();
        meta.set("agent", "state_dim", c.state_dim);
        meta.set("agent", "action_dim", c.action_dim);
        meta.set("agent", "num_taps", c.num_taps);
        meta.set("agent", "alpha", c.alpha);
        meta.set("agent", "gamma", c.gamma);
        meta.set("agent", "delay", c.delay);
        meta.set("agent", "polyak", c.polyak);
        meta.set("agent", "batch_size", c.batch_size);
        meta.set("agent", "buffer_capacity", c.buffer_capacity);
        meta.set("agent", "sigma_explore", c.sigma_explore);
        meta.set("agent", "sigma_smooth", c.sigma_smooth);
        meta.set("agent", "clip_smooth", c.clip_smooth);
        meta.set("agent", "actor_lr", c.actor_lr);
        meta.set("agent", "critic_lr", c.critic_lr);
        meta.set(
            "agent",
            "actor_hidden",
            c.actor_hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        meta.set(
            "agent",
            "critic_hidden",
            c.critic_hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        );
        meta.set("agent", "lr_decay_steps", c.lr_decay_steps.unwrap_or(0));
        meta.set("agent", "step_count", self.step_count);
        std::fs::write(dir.join("agent.meta"), meta.to_text())?;
        Ok(())
    }

    /// Load a checkpoint written by [`Td3Agent::save`]. Optimizer moments and
    /// the replay buffer start fresh; the step counter is restored.
    pub fn load(dir: &Path, seed: u64) -> Result<Self> {
        let meta = Config::from_path(&dir.join("agent.meta"))
            .map_err(|e| Error::MissingDependency(format!("agent sidecar: {e}")))?;
        let mut config = Td3Config::for_taps(
            meta.usize_or("agent", "state_dim", 0)?,
            meta.usize_or("agent", "num_taps", 0)?,
        );
        config.action_dim = meta.usize_or("agent", "action_dim", config.action_dim)?;
        config.alpha = meta.f64_or("agent", "alpha", config.alpha)?;
        config.gamma = meta.f64_or("agent", "gamma", config.gamma)?;
        config.delay = meta.u64_or("agent", "delay", config.delay)?;
        config.polyak = meta.f64_or("agent", "polyak", config.polyak)?;
        config.batch_size = meta.usize_or("agent", "batch_size", config.batch_size)?;
        config.buffer_capacity =
            meta.usize_or("agent", "buffer_capacity", config.buffer_capacity)?;
        config.sigma_explore = meta.f64_or("agent", "sigma_explore", config.sigma_explore)?;
        config.sigma_smooth = meta.f64_or("agent", "sigma_smooth", config.sigma_smooth)?;
        config.clip_smooth = meta.f64_or("agent", "clip_smooth", config.clip_smooth)?;
        config.actor_lr = meta.f64_or("agent", "actor_lr", config.actor_lr)?;
        config.critic_lr = meta.f64_or("agent", "critic_lr", config.critic_lr)?;
        config.actor_hidden = meta.usize_list_or("agent", "actor_hidden", "30")?;
        config.critic_hidden = meta.usize_list_or("agent", "critic_hidden", "30")?;
        config.lr_decay_steps = match meta.u64_or("agent", "lr_decay_steps", 0)? {
            0 => None,
            n => Some(n),
        };
        config.validate()?;

        let actor = checkpoint::read(&dir.join("actor.chnn"))?;
        let critic1 = checkpoint::read(&dir.join("critic1.chnn"))?;
        let critic2 = checkpoint::read(&dir.join("critic2.chnn"))?;
        let target_actor = checkpoint::read(&dir.join("target_actor.chnn"))?;
        let target_critic1 = checkpoint::read(&dir.join("target_critic1.chnn"))?;
        let target_critic2 = checkpoint::read(&dir.join("target_critic2.chnn"))?;
        if actor.input_dim() != config.state_dim
            || actor.output_dim() != config.action_dim
            || critic1.input_dim() != config.state_dim + config.action_dim
        {
            return Err(Error::Format("checkpoint shapes disagree with the sidecar".into()));
        }

        let actor_opt = AdamState::new(&actor, config.actor_lr);
        let critic1_opt = AdamState::new(&critic1, config.critic_lr);
        let critic2_opt = AdamState::new(&critic2, config.critic_lr);
        Ok(Td3Agent {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            step_count: meta.u64_or("agent", "step_count", 0)?,
            rng: stream(derive_seed(seed, "agent-stream", 1)),
            actor,
            critic1,
            critic2,
            target_actor,
            target_critic1,
            target_critic2,
            actor_opt,
            critic1_opt,
            critic2_opt,
            config,
        })
    }
}

fn scale_final_layer(net: &Mlp, factor: f64) -> Result<Mlp> {
    let last = net.layers().len() - 1;
    let params: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i == last {
                (
                    l.weights().iter().map(|w| w * factor).collect(),
                    l.biases().iter().map(|b| b * factor).collect(),
                )
            } else {
                (l.weights().to_vec(), l.biases().to_vec())
            }
        })
        .collect();
    Mlp::from_params(&net.dims(), &net.activations(), params)
}

fn concat_state_action(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut sa = Vec::with_capacity(state.len() + action.len());
    sa.extend_from_slice(state);
    sa.extend_from_slice(action);
    sa
}

fn update_one_critic(
    critic: &mut Mlp,
    opt: &mut AdamState,
    batch: &[Trajectory],
    targets: &[f64],
) -> Result<f64> {
    let inv_b = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(critic);
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let cache = critic.forward(&concat_state_action(&t.state, &t.action))?;
        let q = cache.output()[0];
        loss += (q - y) * (q - y) * inv_b;
        let (g, _) = critic.backward(&cache, &[2.0 * (q - y) * inv_b])?;
        grads.add_assign(&g);
    }
    adam_step(critic, &grads, opt)?;
    Ok(loss)
}
