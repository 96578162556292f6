//! TD and consolidation objectives. Targets and target-network outputs are treated as
//! constants: every gradient here is with respect to the online parameters only.

use crate::error::{Error, Result};
use crate::nn::{GradientSet, Matrix, MlpParams};
use crate::replay::Transition;

/// Column-stacked view of a transition mini-batch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub terminal: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<T: std::borrow::Borrow<Transition>>(batch: &[T]) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let states = states_matrix(batch.iter().map(|t| t.borrow().s.as_slice()))?;
        let next_states = states_matrix(batch.iter().map(|t| t.borrow().s_next.as_slice()))?;
        Ok(Batch {
            states,
            next_states,
            actions: batch.iter().map(|t| t.borrow().a).collect(),
            rewards: batch.iter().map(|t| t.borrow().r).collect(),
            terminal: batch.iter().map(|t| t.borrow().terminal).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

pub fn states_matrix<'a>(states: impl IntoIterator<Item = &'a [f64]>) -> Result<Matrix> {
    let rows: Vec<&[f64]> = states.into_iter().collect();
    Matrix::from_rows(&rows)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `y = r` at true terminals, otherwise `r + γ max_a' Q̂(s', a')`. Time-limit cuts bootstrap.
pub fn dqn_targets(batch: &Batch, target: &MlpParams, gamma: f64) -> Result<Vec<f64>> {
    let next_q = target.forward(&batch.next_states)?;
    Ok(next_q
        .iter_rows()
        .zip(&batch.rewards)
        .zip(&batch.terminal)
        .map(|((q, &r), &done)| {
            if done {
                r
            } else {
                r + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect())
}

/// `Σ_batch (y − Q(s, a; θ))²` against precomputed targets.
pub fn td_loss_with_targets(
    batch: &Batch,
    targets: &[f64],
    q: &MlpParams,
) -> Result<(f64, GradientSet)> {
    if targets.len() != batch.len() {
        return Err(Error::shape("td loss", batch.len(), targets.len()));
    }
    let cache = q.forward_cached(&batch.states)?;
    let out = cache.output();
    let mut upstream = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for (i, (&a, &y)) in batch.actions.iter().zip(targets).enumerate() {
        if a >= out.cols() {
            return Err(Error::InvalidAction {
                action: a,
                n_actions: out.cols(),
            });
        }
        let err = out[(i, a)] - y;
        loss += err * err;
        upstream[(i, a)] = 2.0 * err;
    }
    let grads = q.backward_cached(&cache, &upstream)?;
    Ok((loss, grads))
}

pub fn dqn_loss(
    batch: &Batch,
    q: &MlpParams,
    target: &MlpParams,
    gamma: f64,
) -> Result<(f64, GradientSet)> {
    let y = dqn_targets(batch, target, gamma)?;
    td_loss_with_targets(batch, &y, q)
}

/// Mean over states of `Σ_a (Q(s, a; θ) − Q̂(s, a; θ⁻))²`.
pub fn consolidation_loss(
    states: &Matrix,
    q: &MlpParams,
    target: &MlpParams,
) -> Result<(f64, GradientSet)> {
    if states.rows() == 0 {
        return Err(Error::EmptyBuffer);
    }
    let teacher = target.forward(states)?;
    let cache = q.forward_cached(states)?;
    let out = cache.output();
    let m = states.rows() as f64;
    let mut upstream = Matrix::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for ((u, p), t) in upstream
        .as_mut_slice()
        .iter_mut()
        .zip(out.as_slice())
        .zip(teacher.as_slice())
    {
        let diff = p - t;
        loss += diff * diff;
        *u = 2.0 * diff / m;
    }
    let grads = q.backward_cached(&cache, &upstream)?;
    Ok((loss / m, grads))
}

#[derive(Clone, Debug)]
pub struct CombinedLoss {
    pub total: f64,
    pub dqn: f64,
    pub consolid: f64,
    pub grads: GradientSet,
}

/// `L_DQN + λ · L_consolid` with gradients summed the same way.
pub fn combined_loss(
    batch: &Batch,
    states: &Matrix,
    q: &MlpParams,
    target: &MlpParams,
    gamma: f64,
    lambda: f64,
) -> Result<CombinedLoss> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let (dqn, mut grads) = dqn_loss(batch, q, target, gamma)?;
    let (consolid, cgrads) = consolidation_loss(states, q, target)?;
    grads.add_scaled(&cgrads, lambda)?;
    Ok(CombinedLoss {
        total: dqn + lambda * consolid,
        dqn,
        consolid,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A single linear layer with zero bias: Q(s, ·) = W s. With one-hot states it is a table.
    fn tabular(table: &[[f64; 2]]) -> MlpParams {
        let n_states = table.len();
        let mut w = Matrix::zeros(2, n_states);
        for (s, row) in table.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                w[(a, s)] = v;
            }
        }
        MlpParams::from_parts(vec![w], vec![vec![0.0; 2]]).unwrap()
    }

    fn one_hot(i: usize, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn transition(s: Vec<f64>, a: usize, r: f64, s_next: Vec<f64>, terminal: bool) -> Transition {
        Transition {
            s,
            a,
            r,
            s_next,
            terminal,
            truncated: false,
        }
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.1, 0.7, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.2]), 0);
        assert_eq!(argmax(&[1.0, 1.0, 1.0]), 0);
    }

    #[test]
    fn terminal_target_is_reward() {
        let target = tabular(&[[5.0, 9.0]]);
        let b = Batch::from_transitions(&[transition(vec![1.0], 0, -1.0, vec![1.0], true)]).unwrap();
        assert_eq!(dqn_targets(&b, &target, 0.99).unwrap(), vec![-1.0]);
    }

    #[test]
    fn bootstrap_uses_max() {
        let w = Matrix::from_vec(3, 1, vec![1.0, -2.0, 0.5]).unwrap();
        let target = MlpParams::from_parts(vec![w], vec![vec![0.0; 3]]).unwrap();
        let b = Batch::from_transitions(&[transition(vec![1.0], 0, 0.0, vec![1.0], false)]).unwrap();
        assert_eq!(dqn_targets(&b, &target, 0.99).unwrap(), vec![0.99]);
    }

    #[test]
    fn truncated_transitions_bootstrap() {
        let target = tabular(&[[3.0, 1.0]]);
        let mut t = transition(vec![1.0], 0, -1.0, vec![1.0], false);
        t.truncated = true;
        let b = Batch::from_transitions(&[t]).unwrap();
        assert_eq!(dqn_targets(&b, &target, 0.5).unwrap(), vec![0.5]);
    }

    #[test]
    fn tabular_targets_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let table: Vec<[f64; 2]> = (0..3).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
        let target = tabular(&table);
        let gamma = 0.9;
        let batch: Vec<Transition> = (0..20)
            .map(|_| {
                let s = rng.gen_range(0..3);
                let s2 = rng.gen_range(0..3);
                transition(one_hot(s, 3), rng.gen_range(0..2), rng.gen_range(-1.0..1.0), one_hot(s2, 3), rng.gen_bool(0.3))
            })
            .collect();
        let y = dqn_targets(&Batch::from_transitions(&batch).unwrap(), &target, gamma).unwrap();
        for (t, y) in batch.iter().zip(y) {
            let s2 = t.s_next.iter().position(|&v| v == 1.0).unwrap();
            let best = if table[s2][0] >= table[s2][1] { table[s2][0] } else { table[s2][1] };
            let expected = if t.terminal { t.r } else { t.r + gamma * best };
            assert!((y - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_predictions_give_zero_td_loss() {
        let q = tabular(&[[-1.0, 2.0]]);
        let b = Batch::from_transitions(&[
            transition(vec![1.0], 0, -1.0, vec![1.0], true),
            transition(vec![1.0], 1, 2.0, vec![1.0], true),
        ])
        .unwrap();
        let (loss, g) = dqn_loss(&b, &q, &q, 0.99).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn scalar_td_loss() {
        let q = tabular(&[[0.0, 0.0]]);
        let b = Batch::from_transitions(&[transition(vec![1.0], 0, 2.0, vec![1.0], true)]).unwrap();
        assert_eq!(dqn_loss(&b, &q, &q, 0.99).unwrap().0, 4.0);
    }

    #[test]
    fn consolidation_hand_value() {
        // rows (1,2),(3,4) vs (1,1),(3,5)
        let q = tabular(&[[1.0, 2.0], [3.0, 4.0]]);
        let q_hat = tabular(&[[1.0, 1.0], [3.0, 5.0]]);
        let states = Matrix::from_rows(&[one_hot(0, 2), one_hot(1, 2)]).unwrap();
        let (loss, _) = consolidation_loss(&states, &q, &q_hat).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn consolidation_zero_at_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = MlpParams::init(&[2, 8, 3], &mut rng).unwrap();
        let states = Matrix::from_vec(5, 2, (0..10).map(|i| i as f64 / 7.0).collect()).unwrap();
        let (loss, g) = consolidation_loss(&states, &q, &q.clone()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.is_zero());
    }

    #[test]
    fn consolidation_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = MlpParams::init(&[2, 8, 3], &mut rng).unwrap();
        let q_hat = MlpParams::init(&[2, 8, 3], &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let mut rev = rows.clone();
        rev.reverse();
        let a = consolidation_loss(&Matrix::from_rows(&rows).unwrap(), &q, &q_hat).unwrap().0;
        let b = consolidation_loss(&Matrix::from_rows(&rev).unwrap(), &q, &q_hat).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn combined_loss_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let q = MlpParams::init(&[2, 8, 3], &mut rng).unwrap();
        let q_hat = MlpParams::init(&[2, 8, 3], &mut rng).unwrap();
        let batch: Vec<Transition> = (0..4)
            .map(|_| transition(vec![rng.gen(), rng.gen()], rng.gen_range(0..3), -1.0, vec![rng.gen(), rng.gen()], false))
            .collect();
        let b = Batch::from_transitions(&batch).unwrap();
        let states = Matrix::from_vec(3, 2, (0..6).map(|i| i as f64 * 0.2).collect()).unwrap();

        let (dqn, dqn_g) = dqn_loss(&b, &q, &q_hat, 0.99).unwrap();
        let zero = combined_loss(&b, &states, &q, &q_hat, 0.99, 0.0).unwrap();
        assert_eq!(zero.total, dqn);
        assert_eq!(zero.grads, dqn_g);

        let same = combined_loss(&b, &states, &q, &q, 0.99, 3.0).unwrap();
        let (dqn_same, _) = dqn_loss(&b, &q, &q, 0.99).unwrap();
        assert_eq!(same.total, dqn_same);

        let weighted = combined_loss(&b, &states, &q, &q_hat, 0.99, 2.0).unwrap();
        assert!((weighted.total - (weighted.dqn + 2.0 * weighted.consolid)).abs() < 1e-12);
        assert!(combined_loss(&b, &states, &q, &q_hat, 0.99, -1.0).is_err());
    }
}
