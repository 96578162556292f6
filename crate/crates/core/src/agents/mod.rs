//! DQN, MeDQN(U) and MeDQN(R) learners.
//!
//! All three share the same skeleton: ε-greedy acting, a FIFO transition buffer, a target
//! network refreshed every `c_target` steps and a learning event every `c_current` steps.
//! The MeDQN variants run `epochs` inner gradient steps per event on
//! `L_DQN + λ(t) · L_consolid`, where the consolidation states come from the running
//! state box (U) or from the replay buffer (R).

mod config;
mod losses;
mod schedule;

use rand::Rng;

pub use config::{AgentConfig, AgentKind, LossReduction};
pub use losses::{
    argmax, combined_loss, consolidation_loss, dqn_loss, dqn_targets, states_matrix,
    td_loss_with_targets, Batch, CombinedLoss,
};
pub use schedule::{EpsilonSchedule, LambdaSchedule};

use crate::error::{Error, Result};
use crate::nn::{Matrix, MlpParams, Optimizer};
use crate::replay::{StateBounds, Transition, TransitionBuffer};

/// Losses observed by one learning event, measured before its first gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LearnStats {
    pub loss_dqn: f64,
    pub loss_consolid: f64,
    pub lambda: f64,
    pub optimizer_steps: usize,
}

#[derive(Clone, Debug)]
pub struct QAgent {
    kind: AgentKind,
    config: AgentConfig,
    n_actions: usize,
    q: MlpParams,
    target: MlpParams,
    optimizer: Optimizer,
    buffer: TransitionBuffer,
    bounds: StateBounds,
    epsilon: EpsilonSchedule,
    lambda: LambdaSchedule,
    syncs: u64,
}

impl QAgent {
    pub fn new<R: Rng + ?Sized>(
        kind: AgentKind,
        config: AgentConfig,
        state_dim: usize,
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let q = MlpParams::init(&config.layer_sizes(state_dim, n_actions), rng)?;
        let optimizer = Optimizer::new(config.optimizer, config.lr)?;
        Ok(QAgent {
            kind,
            n_actions,
            target: q.clone(),
            q,
            optimizer,
            buffer: TransitionBuffer::new(config.buffer_capacity, state_dim),
            bounds: StateBounds::new(state_dim),
            epsilon: config.epsilon_schedule(),
            lambda: config.lambda_schedule(),
            syncs: 0,
            config,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn q_params(&self) -> &MlpParams {
        &self.q
    }

    pub fn q_params_mut(&mut self) -> &mut MlpParams {
        &mut self.q
    }

    pub fn target_params(&self) -> &MlpParams {
        &self.target
    }

    pub fn buffer(&self) -> &TransitionBuffer {
        &self.buffer
    }

    pub fn bounds(&self) -> &StateBounds {
        &self.bounds
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn sync_count(&self) -> u64 {
        self.syncs
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        self.epsilon.at(t)
    }

    pub fn lambda_at(&self, t: u64) -> f64 {
        if self.kind.consolidates() {
            self.lambda.at(t)
        } else {
            0.0
        }
    }

    pub fn q_values(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.q.forward_one(s)
    }

    pub fn greedy_action(&self, s: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(s)?))
    }

    /// ε-greedy action at step `t`. Always consumes one uniform draw, plus one more when exploring.
    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], t: u64, rng: &mut R) -> Result<usize> {
        let eps = self.epsilon.at(t);
        if rng.gen::<f64>() < eps {
            Ok(rng.gen_range(0..self.n_actions))
        } else {
            self.greedy_action(s)
        }
    }

    /// Records a visited state in the running bounds (used by MeDQN(U)).
    pub fn observe_state(&mut self, s: &[f64]) -> Result<()> {
        self.bounds.update(s)
    }

    pub fn store(&mut self, t: Transition) -> Result<()> {
        if t.a >= self.n_actions {
            return Err(Error::InvalidAction {
                action: t.a,
                n_actions: self.n_actions,
            });
        }
        self.buffer.push(t)
    }

    pub fn sync_target(&mut self) {
        self.target = self.q.clone();
        self.syncs += 1;
    }

    /// Whether step `t` (1-based count of environment steps) triggers a learning event.
    pub fn should_learn(&self, t: u64) -> bool {
        t > self.config.warmup_steps && t.is_multiple_of(self.config.c_current)
    }

    pub fn should_sync(&self, t: u64) -> bool {
        t.is_multiple_of(self.config.c_target)
    }

    /// Runs the learning event appropriate for this agent's kind.
    pub fn learn_step<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Result<Option<LearnStats>> {
        match self.kind {
            AgentKind::Dqn | AgentKind::DqnS => self.learn_step_dqn(t, rng),
            AgentKind::MedqnU => self.learn_step_medqn_u(t, rng).map(Some),
            AgentKind::MedqnR => self.learn_step_medqn_r(t, rng),
        }
    }

    /// One gradient step on `L_DQN` from a sampled mini-batch. Skipped on an empty buffer.
    pub fn learn_step_dqn<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Result<Option<LearnStats>> {
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let batch = Batch::from_transitions(&self.buffer.sample_transitions(self.config.batch_size, rng)?)?;
        self.update_on(&batch, StateSource::None, 1, t, rng).map(Some)
    }

    /// Reads the whole (one-mini-batch) buffer, then takes `epochs` steps with pseudo-states
    /// drawn afresh from the state box each time.
    pub fn learn_step_medqn_u<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Result<LearnStats> {
        if !self.bounds.is_initialized() {
            return Err(Error::UninitializedBounds);
        }
        if self.buffer.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let batch = Batch::from_transitions(&self.buffer.all())?;
        self.update_on(&batch, StateSource::Bounds, self.config.epochs, t, rng)
    }

    /// Samples one transition mini-batch, then takes `epochs` steps with real states
    /// resampled from the buffer each time.
    pub fn learn_step_medqn_r<R: Rng + ?Sized>(&mut self, t: u64, rng: &mut R) -> Result<Option<LearnStats>> {
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let batch = Batch::from_transitions(&self.buffer.sample_transitions(self.config.batch_size, rng)?)?;
        self.update_on(&batch, StateSource::Buffer, self.config.epochs, t, rng)
            .map(Some)
    }

    /// A plain DQN gradient step on a caller-supplied batch.
    pub fn dqn_update_on<R: Rng + ?Sized>(&mut self, batch: &Batch, t: u64, rng: &mut R) -> Result<LearnStats> {
        self.update_on(batch, StateSource::None, 1, t, rng)
    }

    fn consolidation_states<R: Rng + ?Sized>(&self, source: StateSource, rng: &mut R) -> Result<Matrix> {
        let n = self.config.batch_size;
        match source {
            StateSource::None => unreachable!("consolidation states requested without a source"),
            StateSource::Bounds => {
                let states = self.bounds.sample_uniform(n, rng)?;
                states_matrix(states.iter().map(Vec::as_slice))
            }
            StateSource::Buffer => states_matrix(self.buffer.sample_states(n, rng)?),
        }
    }

    fn update_on<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        source: StateSource,
        epochs: usize,
        t: u64,
        rng: &mut R,
    ) -> Result<LearnStats> {
        let lambda = self.lambda_at(t);
        let consolidate = !matches!(source, StateSource::None) && !self.lambda.is_disabled();
        // θ⁻ is fixed for the whole event, so the TD targets are too.
        let targets = dqn_targets(batch, &self.target, self.config.gamma)?;
        let (td_scale, consolid_scale) = match self.config.loss_reduction {
            LossReduction::Sum => (1.0, 1.0),
            LossReduction::Mean => (1.0 / batch.len() as f64, 1.0 / self.n_actions as f64),
        };
        let mut stats = LearnStats {
            lambda,
            ..LearnStats::default()
        };
        for epoch in 0..epochs {
            let (mut loss_dqn, mut grads) = td_loss_with_targets(batch, &targets, &self.q)?;
            if td_scale != 1.0 {
                loss_dqn *= td_scale;
                grads.scale(td_scale);
            }
            let mut loss_consolid = 0.0;
            if consolidate {
                let states = self.consolidation_states(source, rng)?;
                let (lc, cgrads) = consolidation_loss(&states, &self.q, &self.target)?;
                grads.add_scaled(&cgrads, lambda * consolid_scale)?;
                loss_consolid = lc * consolid_scale;
            }
            if !(loss_dqn.is_finite() && loss_consolid.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "loss at step {t} (dqn {loss_dqn}, consolidation {loss_consolid})"
                )));
            }
            if epoch == 0 {
                stats.loss_dqn = loss_dqn;
                stats.loss_consolid = loss_consolid;
            }
            self.optimizer.step(&mut self.q, &grads)?;
            stats.optimizer_steps += 1;
        }
        Ok(stats)
    }
}

#[derive(Clone, Copy, Debug)]
enum StateSource {
    None,
    Bounds,
    Buffer,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Task;
    use crate::nn::{GradientSet, OptimizerKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(kind: AgentKind) -> AgentConfig {
        let mut c = AgentConfig::preset(Task::MountainCar, kind);
        c.hidden = vec![8];
        c.warmup_steps = 0;
        c
    }

    fn random_transition(rng: &mut ChaCha8Rng) -> Transition {
        Transition {
            s: vec![rng.gen_range(-1.2..0.6), rng.gen_range(-0.07..0.07)],
            a: rng.gen_range(0..3),
            r: -1.0,
            s_next: vec![rng.gen_range(-1.2..0.6), rng.gen_range(-0.07..0.07)],
            terminal: rng.gen_bool(0.1),
            truncated: false,
        }
    }

    fn filled_agent(kind: AgentKind, config: AgentConfig, seed: u64) -> (QAgent, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agent = QAgent::new(kind, config, 2, 3, &mut rng).unwrap();
        for _ in 0..40 {
            let t = random_transition(&mut rng);
            agent.observe_state(&t.s).unwrap();
            agent.store(t).unwrap();
        }
        (agent, rng)
    }

    fn agent_with_output_bias(bias: [f64; 3]) -> QAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = QAgent::new(AgentKind::Dqn, small_config(AgentKind::Dqn), 2, 3, &mut rng).unwrap();
        let q = agent.q_params_mut();
        let last = q.n_layers() - 1;
        q.weight_mut(last).as_mut_slice().fill(0.0);
        q.bias_mut(last).copy_from_slice(&bias);
        agent
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let agent = agent_with_output_bias([0.1, 0.7, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // t past the decay horizon with end = 0 is greedy; use a dedicated schedule here
        let mut a2 = agent.clone();
        a2.epsilon = EpsilonSchedule { start: 0.0, end: 0.0, decay_steps: 0 };
        assert_eq!(a2.act(&[0.0, 0.0], 0, &mut rng).unwrap(), 1);
        let mut tie = agent_with_output_bias([0.5, 0.5, 0.2]);
        tie.epsilon = a2.epsilon;
        assert_eq!(tie.act(&[0.3, 0.01], 5, &mut rng).unwrap(), 0);
    }

    #[test]
    fn uniform_when_epsilon_one() {
        let agent = agent_with_output_bias([0.0, 9.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[agent.act(&[0.0, 0.0], 0, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn sync_copies_and_freezes() {
        let (mut agent, mut rng) = filled_agent(AgentKind::DqnS, small_config(AgentKind::DqnS), 3);
        let frozen = agent.target_params().clone();
        for t in 1..=10 {
            agent.learn_step(t, &mut rng).unwrap();
        }
        assert_eq!(agent.target_params(), &frozen);
        assert_ne!(agent.q_params(), &frozen);
        agent.sync_target();
        assert_eq!(agent.target_params(), agent.q_params());
        let states = Matrix::from_rows(&[[0.1, 0.0], [-0.5, 0.02]]).unwrap();
        let (loss, _) = consolidation_loss(&states, agent.q_params(), agent.target_params()).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn learning_touches_only_theta() {
        let (mut agent, mut rng) = filled_agent(AgentKind::Dqn, small_config(AgentKind::Dqn), 4);
        let before = agent.q_params().clone();
        let inserts = agent.buffer().insert_count();
        agent.learn_step_dqn(1, &mut rng).unwrap().unwrap();
        assert_eq!(agent.buffer().insert_count(), inserts);
        assert_ne!(agent.q_params(), &before);
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let mut config = small_config(AgentKind::Dqn);
        config.lr = 0.0;
        let (mut agent, mut rng) = filled_agent(AgentKind::Dqn, config, 5);
        let before = agent.q_params().clone();
        agent.learn_step_dqn(1, &mut rng).unwrap();
        assert_eq!(agent.q_params(), &before);
    }

    #[test]
    fn logged_loss_matches_pre_step_recomputation() {
        for (reduction, scale) in [(LossReduction::Sum, 1.0), (LossReduction::Mean, 1.0 / 32.0)] {
            let mut config = small_config(AgentKind::Dqn);
            config.loss_reduction = reduction;
            let (mut agent, _) = filled_agent(AgentKind::Dqn, config, 6);
            let before = agent.q_params().clone();
            let target = agent.target_params().clone();
            // replay the batch draw with a cloned rng to recover the exact mini-batch
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut probe = rng.clone();
            let batch = Batch::from_transitions(&agent.buffer().sample_transitions(32, &mut probe).unwrap()).unwrap();
            let stats = agent.learn_step_dqn(1, &mut rng).unwrap().unwrap();
            let (expected, _) = dqn_loss(&batch, &before, &target, 0.99).unwrap();
            assert_eq!(stats.loss_dqn, expected * scale, "{reduction}");
        }
    }

    #[test]
    fn mean_reduction_is_sum_rescaled() {
        // Under SGD the update is linear in the gradient, so mean reduction with λ equals
        // sum reduction with the TD gradient divided by the batch size and λ by |A|.
        let run = |reduction, lr, lambda: f64| {
            let mut config = small_config(AgentKind::MedqnR);
            config.optimizer = OptimizerKind::Sgd;
            config.lr = lr;
            config.lambda_start = lambda;
            config.lambda_end = lambda;
            config.epochs = 1;
            config.loss_reduction = reduction;
            let (mut agent, mut rng) = filled_agent(AgentKind::MedqnR, config, 8);
            let before = agent.q_params().clone();
            agent.learn_step(2_000, &mut rng).unwrap();
            let mut delta = GradientSet::zeros_like(&before);
            for ((d, a), b) in delta.tensors_mut().zip(agent.q_params().tensors()).zip(before.tensors()) {
                for ((x, y), z) in d.iter_mut().zip(a).zip(b) {
                    *x = y - z;
                }
            }
            delta
        };
        let mean = run(LossReduction::Mean, 0.032, 3.0);
        let sum = run(LossReduction::Sum, 0.001, 32.0);
        for (a, b) in mean.tensors().zip(sum.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn medqn_u_runs_e_optimizer_steps() {
        let (mut agent, mut rng) = filled_agent(AgentKind::MedqnU, small_config(AgentKind::MedqnU), 7);
        let stats = agent.learn_step_medqn_u(10, &mut rng).unwrap();
        assert_eq!(stats.optimizer_steps, 4);
        assert_eq!(agent.optimizer().steps_taken(), 4);
        assert!(stats.lambda > 0.01);
    }

    #[test]
    fn medqn_u_requires_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut agent = QAgent::new(AgentKind::MedqnU, small_config(AgentKind::MedqnU), 2, 3, &mut rng).unwrap();
        agent.store(random_transition(&mut rng)).unwrap();
        assert!(matches!(agent.learn_step_medqn_u(1, &mut rng), Err(Error::UninitializedBounds)));
    }

    #[test]
    fn medqn_u_draws_fresh_pseudo_states_per_epoch() {
        let (agent, mut rng) = filled_agent(AgentKind::MedqnU, small_config(AgentKind::MedqnU), 9);
        // the inner loop draws one pseudo-state batch per epoch from a single stream
        let mut trace = rng.clone();
        let draws: Vec<Matrix> = (0..4)
            .map(|_| agent.consolidation_states(StateSource::Bounds, &mut trace).unwrap())
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(draws[i], draws[j]);
            }
        }
        let mut a = agent.clone();
        a.learn_step_medqn_u(10, &mut rng).unwrap();
        // after the event the shared stream has advanced exactly as the four traced draws did
        assert_eq!(rng.gen::<u64>(), trace.gen::<u64>());
    }

    #[test]
    fn medqn_u_reduces_to_dqn_step() {
        let mut config = small_config(AgentKind::MedqnU);
        config.epochs = 1;
        config.lambda_start = 0.0;
        config.lambda_end = 0.0;
        let (mut medqn, mut rng) = filled_agent(AgentKind::MedqnU, config.clone(), 10);
        let mut dqn = medqn.clone();
        dqn.kind = AgentKind::Dqn;
        let batch = Batch::from_transitions(&medqn.buffer().all()).unwrap();
        let mut rng2 = rng.clone();
        medqn.learn_step_medqn_u(50, &mut rng).unwrap();
        dqn.dqn_update_on(&batch, 50, &mut rng2).unwrap();
        assert_eq!(medqn.q_params(), dqn.q_params());
    }

    #[test]
    fn medqn_r_consolidates_on_stored_states() {
        let (agent, mut rng) = filled_agent(AgentKind::MedqnR, small_config(AgentKind::MedqnR), 11);
        let states = agent.consolidation_states(StateSource::Buffer, &mut rng).unwrap();
        for s in states.iter_rows() {
            assert!(agent.buffer().iter().any(|t| t.s.as_slice() == s));
        }
    }

    #[test]
    fn medqn_r_without_consolidation_is_repeated_dqn() {
        let mut config = small_config(AgentKind::MedqnR);
        config.lambda_start = 0.0;
        config.lambda_end = 0.0;
        config.epochs = 3;
        let (mut medqn, mut rng) = filled_agent(AgentKind::MedqnR, config, 12);
        let mut reference = medqn.clone();
        let mut rng2 = rng.clone();
        medqn.learn_step_medqn_r(5, &mut rng).unwrap();
        let batch = Batch::from_transitions(&reference.buffer.sample_transitions(32, &mut rng2).unwrap()).unwrap();
        for _ in 0..3 {
            reference.dqn_update_on(&batch, 5, &mut rng2).unwrap();
        }
        assert_eq!(medqn.q_params(), reference.q_params());
    }

    #[test]
    fn greedy_action_invariant_to_positive_output_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let agent = QAgent::new(AgentKind::Dqn, small_config(AgentKind::Dqn), 2, 3, &mut rng).unwrap();
        let states: Vec<[f64; 2]> = (0..200).map(|_| [rng.gen_range(-1.2..0.6), rng.gen_range(-0.07..0.07)]).collect();
        for scale in [0.01, 0.5, 3.0, 100.0] {
            let mut scaled = agent.clone();
            let q = scaled.q_params_mut();
            let last = q.n_layers() - 1;
            q.weight_mut(last).map_inplace(|w| w * scale);
            q.bias_mut(last).iter_mut().for_each(|b| *b *= scale);
            for s in &states {
                assert_eq!(agent.greedy_action(s).unwrap(), scaled.greedy_action(s).unwrap());
            }
        }
    }

    #[test]
    fn pure_consolidation_step_pulls_toward_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let q_hat = MlpParams::init(&[2, 16, 3], &mut rng).unwrap();
            let mut q = MlpParams::init(&[2, 16, 3], &mut rng).unwrap();
            let states = Matrix::from_vec(32, 2, (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let (before, grads) = consolidation_loss(&states, &q, &q_hat).unwrap();
            let mut opt = Optimizer::new(crate::nn::OptimizerKind::Sgd, 1e-4).unwrap();
            opt.step(&mut q, &grads).unwrap();
            let (after, _) = consolidation_loss(&states, &q, &q_hat).unwrap();
            assert!(after < before, "{after} !< {before}");
        }
    }
}
