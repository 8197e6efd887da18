use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mgtn::{AgentNetwork, GradientSet, ACTIONS};
use crate::tensor::DenseTensor;

use super::{Action, AdamConfig, AdamState, AgentError, Environment, Experience, ReplayBuffer, Result};

/// How the bootstrap value of `s'` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// `r + gamma * max_a' Q_target(s', a')`.
    #[default]
    TargetMax,
    /// `r + gamma * Q_target(s', argmax_a' Q_online(s', a'))`.
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TargetUpdate {
    /// Hard copy at the end of every episode.
    #[default]
    EpisodeEnd,
    /// Hard copy every `every` environment steps, and at episode end.
    Steps { every: usize },
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of all
/// environment steps, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            decay_fraction: 0.8,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: usize, total_steps: usize) -> f64 {
        let horizon = (self.decay_fraction * total_steps as f64).max(1.0);
        let frac = (step as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub target_mode: TargetMode,
    pub target_update: TargetUpdate,
    pub replay_capacity: usize,
    pub adam: AdamConfig,
    /// Set by the caller, never read from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 15,
            batch_size: 64,
            gamma: 0.9,
            epsilon: EpsilonSchedule::default(),
            target_mode: TargetMode::TargetMax,
            target_update: TargetUpdate::EpisodeEnd,
            replay_capacity: 10_000,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must be at least batch_size");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return bad("epsilon start/end must lie in [0, 1]");
        }
        if !(e.decay_fraction > 0.0 && e.decay_fraction <= 1.0) {
            return bad("epsilon decay_fraction must lie in (0, 1]");
        }
        if self.adam.learning_rate.is_nan() || self.adam.learning_rate <= 0.0 {
            return bad("learning rate must be positive");
        }
        if let TargetUpdate::Steps { every: 0 } = self.target_update {
            return bad("target_update.every must be positive");
        }
        Ok(())
    }
}

fn argmax(q: [f64; ACTIONS]) -> Action {
    // ties go to Buy
    if q[1] > q[0] {
        Action::Sell
    } else {
        Action::Buy
    }
}

/// Greedy action, ties broken toward Buy.
pub fn greedy_action(net: &AgentNetwork, state: &DenseTensor) -> Result<Action> {
    Ok(argmax(net.forward(state)?))
}

/// Epsilon-greedy action. With probability `epsilon` a uniform random action,
/// otherwise the greedy one (ties broken toward Buy).
pub fn select_action(net: &AgentNetwork, state: &DenseTensor, epsilon: f64, rng: &mut impl Rng) -> Result<Action> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(Action::from_index(rng.random_range(0..ACTIONS)));
    }
    Ok(argmax(net.forward(state)?))
}

/// Regression targets for a batch; terminal transitions get `y = r`.
pub fn bellman_targets(
    online: &AgentNetwork,
    target: &AgentNetwork,
    batch: &[Experience],
    gamma: f64,
    mode: TargetMode,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|e| {
            if e.terminal {
                return Ok(e.reward);
            }
            let q_next = target.forward(&e.next_state)?;
            let bootstrap = match mode {
                TargetMode::TargetMax => q_next[0].max(q_next[1]),
                TargetMode::Decoupled => q_next[argmax(online.forward(&e.next_state)?).index()],
            };
            Ok(e.reward + gamma * bootstrap)
        })
        .collect()
}

/// Loss and summed gradients of `mean_b (y_b - Q(s_b, a_b))^2` on a batch.
pub(crate) fn batch_loss_and_grad(
    online: &AgentNetwork,
    batch: &[Experience],
    targets: &[f64],
) -> Result<(f64, GradientSet)> {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let mut grads = GradientSet::zeros_like(online);
    for (e, &y) in batch.iter().zip(targets) {
        let cache = online.forward_cached(&e.state)?;
        let diff = cache.q()[e.action.index()] - y;
        loss += diff * diff;
        let mut dq = [0.0; ACTIONS];
        dq[e.action.index()] = 2.0 * diff / n;
        grads.accumulate(&online.backward(&cache, dq)?);
    }
    Ok((loss / n, grads))
}

/// Samples a batch, regresses the taken-action values onto fixed targets and
/// applies one Adam update. Returns the batch loss before the update.
pub fn train_step(
    online: &mut AgentNetwork,
    target: &AgentNetwork,
    buffer: &mut ReplayBuffer,
    adam: &mut AdamState,
    config: &TrainConfig,
) -> Result<f64> {
    if buffer.len() < config.batch_size {
        return Err(AgentError::InsufficientBuffer {
            have: buffer.len(),
            need: config.batch_size,
        });
    }
    let batch = buffer.sample(config.batch_size)?;
    let targets = bellman_targets(online, target, &batch, config.gamma, config.target_mode)?;
    let (loss, grads) = batch_loss_and_grad(online, &batch, &targets)?;
    adam.step(online.params_mut(), &grads)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub global_step: usize,
    pub action: Action,
    pub reward: f64,
    pub epsilon: f64,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeReport {
    pub episode: usize,
    pub steps: usize,
    pub cumulative_reward: f64,
    pub mean_loss: Option<f64>,
    pub epsilon_end: f64,
    #[serde(skip)]
    pub records: Vec<StepRecord>,
}

/// Online and target networks with their optimizer, replay memory and
/// exploration stream. Every random draw derives from `config.seed`.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub online: AgentNetwork,
    pub target: AgentNetwork,
    pub buffer: ReplayBuffer,
    pub adam: AdamState,
    pub config: TrainConfig,
    rng: ChaCha8Rng,
    global_step: usize,
    total_steps: usize,
}

impl Trainer {
    /// `total_steps` is the planned number of environment steps across all
    /// episodes; it fixes the epsilon schedule.
    pub fn new(online: AgentNetwork, config: TrainConfig, total_steps: usize) -> Result<Self> {
        config.validate()?;
        let target = online.clone();
        let params: Vec<&DenseTensor> = online.params().into_iter().map(|(_, p)| p).collect();
        let adam = AdamState::new(config.adam, &params);
        let buffer = ReplayBuffer::new(config.replay_capacity, config.seed.wrapping_add(0x5eed))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            online,
            target,
            buffer,
            adam,
            config,
            rng,
            global_step: 0,
            total_steps: total_steps.max(1),
        })
    }

    pub fn global_step(&self) -> usize {
        self.global_step
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.global_step, self.total_steps)
    }

    pub fn sync_target(&mut self) {
        self.target
            .copy_params_from(&self.online)
            .expect("target is a clone of online");
    }

    /// Plays one episode: act, store, one train step per env step once the
    /// buffer holds a batch, and a hard target copy at the end.
    pub fn run_episode<E: Environment>(&mut self, env: &mut E, episode: usize) -> Result<EpisodeReport> {
        let mut state = env.reset();
        let mut records = Vec::new();
        let mut cumulative = 0.0;
        loop {
            let epsilon = self.epsilon();
            let action = select_action(&self.online, &state, epsilon, &mut self.rng)?;
            let tr = env.step(action)?;
            cumulative += tr.reward;
            self.buffer.push(Experience {
                state: state.clone(),
                action,
                reward: tr.reward,
                next_state: tr.next_state.clone(),
                terminal: tr.terminal,
            });
            let loss = if self.buffer.len() >= self.config.batch_size {
                Some(train_step(
                    &mut self.online,
                    &self.target,
                    &mut self.buffer,
                    &mut self.adam,
                    &self.config,
                )?)
            } else {
                None
            };
            records.push(StepRecord {
                global_step: self.global_step,
                action,
                reward: tr.reward,
                epsilon,
                loss,
            });
            self.global_step += 1;
            if let TargetUpdate::Steps { every } = self.config.target_update {
                if self.global_step.is_multiple_of(every) {
                    self.sync_target();
                }
            }
            if tr.terminal {
                break;
            }
            state = tr.next_state;
        }
        self.sync_target();
        let losses: Vec<f64> = records.iter().filter_map(|r| r.loss).collect();
        let mean_loss = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        Ok(EpisodeReport {
            episode,
            steps: records.len(),
            cumulative_reward: cumulative,
            mean_loss,
            epsilon_end: self.epsilon(),
            records,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use crate::mgtn::AgentSpec;
    use crate::rl::Transition;
    use std::sync::Arc;

    fn spec() -> AgentSpec {
        AgentSpec {
            input_features: 2,
            hidden_features: 3,
            lags: 3,
            nodes: 2,
            dense_out_modes: vec![2, 2, 1],
            tt_ranks: vec![1, 2, 2, 1],
        }
    }

    fn net(seed: u64) -> AgentNetwork {
        let s = spec();
        let mut n = AgentNetwork::new(
            s.clone(),
            &crate::graph::time_graph(s.lags).unwrap(),
            &Adjacency::empty(s.nodes),
        )
        .unwrap();
        n.init_params(seed);
        n
    }

    /// Network whose Q-values are the constant `q` for every input.
    fn constant_net(q: [f64; 2]) -> AgentNetwork {
        let mut n = net(0);
        n.set_param("output.weight", DenseTensor::zeros(&[2, 4])).unwrap();
        n.set_param("output.bias", DenseTensor::new(vec![2], q.to_vec()).unwrap())
            .unwrap();
        n
    }

    fn state(v: f64) -> Arc<DenseTensor> {
        Arc::new(DenseTensor::from_fn(&spec().input_shape(), |ix| {
            v * (1.0 + ix[0] as f64 - ix[1] as f64 + ix[2] as f64)
        }))
    }

    fn exp(s: f64, action: Action, reward: f64, terminal: bool) -> Experience {
        Experience {
            state: state(s),
            action,
            reward,
            next_state: state(-s),
            terminal,
        }
    }

    /// Two alternating states; Buy pays `+0.1 * sign`, Sell the opposite.
    struct ToyEnv {
        len: usize,
        t: usize,
    }

    impl ToyEnv {
        fn sign(&self) -> f64 {
            if self.t.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        }
    }

    impl Environment for ToyEnv {
        fn reset(&mut self) -> Arc<DenseTensor> {
            self.t = 0;
            state(self.sign())
        }

        fn step(&mut self, action: Action) -> Result<Transition> {
            let reward = 0.1 * self.sign() * action.direction();
            self.t += 1;
            Ok(Transition {
                reward,
                next_state: state(self.sign()),
                terminal: self.t == self.len,
            })
        }
    }

    #[test]
    fn epsilon_schedule() {
        let e = EpsilonSchedule::default();
        assert_eq!(e.value(0, 100), 1.0);
        assert!((e.value(40, 100) - 0.55).abs() < 1e-12);
        assert!((e.value(80, 100) - 0.1).abs() < 1e-12);
        assert!((e.value(99, 100) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn greedy_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = state(1.0);
        assert_eq!(
            select_action(&constant_net([1.0, -1.0]), &s, 0.0, &mut rng).unwrap(),
            Action::Buy
        );
        assert_eq!(
            select_action(&constant_net([-1.0, 1.0]), &s, 0.0, &mut rng).unwrap(),
            Action::Sell
        );
        assert_eq!(
            select_action(&constant_net([0.3, 0.3]), &s, 0.0, &mut rng).unwrap(),
            Action::Buy
        );
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let net = constant_net([1.0, -1.0]);
        let s = state(1.0);
        let sells = (0..n)
            .filter(|_| select_action(&net, &s, 1.0, &mut rng).unwrap() == Action::Sell)
            .count() as f64;
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((sells - n as f64 / 2.0).abs() < 3.0 * sigma, "{sells}");
    }

    #[test]
    fn bellman_examples() {
        let online = constant_net([0.9, 0.2]);
        let target = constant_net([0.1, 0.5]);
        let batch = [exp(1.0, Action::Buy, 0.003, true), exp(1.0, Action::Sell, 0.01, false)];
        let y = bellman_targets(&online, &target, &batch, 0.9, TargetMode::TargetMax).unwrap();
        assert_eq!(y[0], 0.003);
        assert!((y[1] - 0.46).abs() < 1e-15);
        let y = bellman_targets(&online, &target, &batch, 0.0, TargetMode::TargetMax).unwrap();
        assert_eq!(y, vec![0.003, 0.01]);
        // online prefers Buy at s', so the decoupled target reads Q̃(s', Buy)
        let y = bellman_targets(&online, &target, &batch, 0.9, TargetMode::Decoupled).unwrap();
        assert!((y[1] - (0.01 + 0.9 * 0.1)).abs() < 1e-15);
    }

    fn trainer_parts(q: [f64; 2], batch: usize) -> (AgentNetwork, AgentNetwork, ReplayBuffer, AdamState, TrainConfig) {
        let online = constant_net(q);
        let target = online.clone();
        let config = TrainConfig {
            batch_size: batch,
            gamma: 0.0,
            replay_capacity: 16,
            ..TrainConfig::default()
        };
        let params: Vec<&DenseTensor> = online.params().into_iter().map(|(_, p)| p).collect();
        let adam = AdamState::new(config.adam, &params);
        let buffer = ReplayBuffer::new(config.replay_capacity, 3).unwrap();
        (online, target, buffer, adam, config)
    }

    #[test]
    fn matched_targets_give_zero_loss_and_no_update() {
        let (mut online, target, mut buffer, mut adam, config) = trainer_parts([0.2, -0.4], 4);
        for k in 0..6 {
            let (a, r) = if k % 2 == 0 {
                (Action::Buy, 0.2)
            } else {
                (Action::Sell, -0.4)
            };
            buffer.push(exp(k as f64, a, r, false));
        }
        let before = online.clone();
        let loss = train_step(&mut online, &target, &mut buffer, &mut adam, &config).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(online, before);
    }

    #[test]
    fn single_sample_loss_is_squared_mismatch() {
        let (mut online, target, mut buffer, mut adam, config) = trainer_parts([0.2, -0.4], 1);
        buffer.push(exp(1.0, Action::Sell, 0.1, true));
        let loss = train_step(&mut online, &target, &mut buffer, &mut adam, &config).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
        assert_ne!(online, target);
    }

    #[test]
    fn insufficient_buffer() {
        let (mut online, target, mut buffer, mut adam, config) = trainer_parts([0.0, 0.0], 4);
        buffer.push(exp(1.0, Action::Buy, 0.1, true));
        assert!(matches!(
            train_step(&mut online, &target, &mut buffer, &mut adam, &config),
            Err(AgentError::InsufficientBuffer { have: 1, need: 4 })
        ));
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut online = net(5);
        online
            .set_param(
                "hidden.bias",
                DenseTensor::new(vec![4], vec![0.05, -0.02, 0.03, 0.01]).unwrap(),
            )
            .unwrap();
        let batch: Vec<Experience> = (0..5)
            .map(|k| {
                exp(
                    0.3 * (k as f64 - 2.0) + 0.1,
                    Action::from_index(k % 2),
                    0.05 * k as f64,
                    false,
                )
            })
            .collect();
        let targets = vec![0.1, -0.2, 0.3, 0.0, 0.05];
        let (_, grads) = batch_loss_and_grad(&online, &batch, &targets).unwrap();
        let h = 1e-5;
        let mut probe = online.clone();
        for (a, name) in online.param_names().iter().enumerate() {
            for idx in 0..online.params()[a].1.len().min(6) {
                let v = probe.params_mut()[a].data()[idx];
                probe.params_mut()[a].data_mut()[idx] = v + h;
                let up = batch_loss_and_grad(&probe, &batch, &targets).unwrap().0;
                probe.params_mut()[a].data_mut()[idx] = v - h;
                let down = batch_loss_and_grad(&probe, &batch, &targets).unwrap().0;
                probe.params_mut()[a].data_mut()[idx] = v;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.arrays()[a].data()[idx];
                let rel = crate::mgtn::gradcheck::relative_error(analytic, numeric);
                assert!(rel < 1e-4, "{name}[{idx}]: {analytic} vs {numeric}");
            }
        }
    }

    fn checksum(n: &AgentNetwork) -> Vec<u64> {
        n.params()
            .iter()
            .flat_map(|(_, p)| p.data().iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn episode_loop_accounting_and_target_copy() {
        let config = TrainConfig {
            batch_size: 4,
            replay_capacity: 32,
            seed: 7,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(net(1), config.clone(), 24).unwrap();
        let mut env = ToyEnv { len: 12, t: 0 };
        let target_before = checksum(&trainer.target);
        let report = trainer.run_episode(&mut env, 0).unwrap();
        assert_eq!(report.steps, 12);
        let sum: f64 = report.records.iter().map(|r| r.reward).sum();
        assert_eq!(report.cumulative_reward, sum);
        assert!(report.records[..3].iter().all(|r| r.loss.is_none()));
        assert!(report.records[3..].iter().all(|r| r.loss.is_some_and(|l| l >= 0.0)));
        assert_eq!(checksum(&trainer.target), checksum(&trainer.online));
        assert_ne!(checksum(&trainer.target), target_before);
        assert_eq!(trainer.global_step(), 12);

        let mut again = Trainer::new(net(1), config, 24).unwrap();
        let mut env = ToyEnv { len: 12, t: 0 };
        let rerun = again.run_episode(&mut env, 0).unwrap();
        assert_eq!(rerun, report);
        assert_eq!(checksum(&again.online), checksum(&trainer.online));
    }

    #[test]
    fn target_is_frozen_between_copies() {
        let (mut online, target, mut buffer, mut adam, mut config) = trainer_parts([0.0, 0.0], 2);
        config.gamma = 0.5;
        for k in 0..4 {
            buffer.push(exp(k as f64 + 0.5, Action::from_index(k % 2), 0.1, false));
        }
        let frozen = checksum(&target);
        for _ in 0..5 {
            train_step(&mut online, &target, &mut buffer, &mut adam, &config).unwrap();
        }
        assert_eq!(checksum(&target), frozen);
        assert_ne!(checksum(&online), frozen);
    }

    #[test]
    fn myopic_regression_converges_on_toy() {
        let config = TrainConfig {
            batch_size: 8,
            replay_capacity: 64,
            gamma: 0.0,
            adam: AdamConfig {
                learning_rate: 5e-3,
                ..AdamConfig::default()
            },
            seed: 2,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(net(3), config, 30 * 20).unwrap();
        let error = |n: &AgentNetwork| {
            let mut e = 0.0;
            for sign in [1.0, -1.0] {
                let q = n.forward(&state(sign)).unwrap();
                e += (q[0] - 0.1 * sign).abs() + (q[1] + 0.1 * sign).abs();
            }
            e / 4.0
        };
        let mut history = vec![error(&trainer.online)];
        for ep in 0..30 {
            let mut env = ToyEnv { len: 20, t: 0 };
            trainer.run_episode(&mut env, ep).unwrap();
            if ep % 10 == 9 {
                history.push(error(&trainer.online));
            }
        }
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-3, "{history:?}");
        }
        assert!(history.last().unwrap() < &(0.25 * history[0]), "{history:?}");
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let c = TrainConfig {
            replay_capacity: 8,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
        let c = TrainConfig {
            target_update: TargetUpdate::Steps { every: 0 },
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
