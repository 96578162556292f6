use rand::Rng;

use crate::error::{Error, Result};
use crate::par;

/// Tabular Q, Q̂ and a state distribution, for checking the uniform-sampling upper bound.
#[derive(Clone, Debug)]
pub struct TabularInstance {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `n_states × n_actions`.
    pub q: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub d_pi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    /// `Σ_s d(s) Σ_a (q − q̂)²`
    pub l_consolid: f64,
    /// `(1/|S|) Σ_s Σ_a (q − q̂)²`
    pub l_uniform: f64,
    pub holds: bool,
}

pub const BOUND_TOLERANCE: f64 = 1e-12;

impl TabularInstance {
    pub fn validate(&self) -> Result<()> {
        let cells = self.n_states * self.n_actions;
        if self.n_states == 0 || self.q.len() != cells || self.q_hat.len() != cells || self.d_pi.len() != self.n_states {
            return Err(Error::shape(
                "TabularInstance",
                format!("{} states x {} actions", self.n_states, self.n_actions),
                format!("q {}, q_hat {}, d_pi {}", self.q.len(), self.q_hat.len(), self.d_pi.len()),
            ));
        }
        let total: f64 = self.d_pi.iter().sum();
        if self.d_pi.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("d_pi must be a distribution, sums to {total}")));
        }
        Ok(())
    }

    /// Random tables in `[-5, 5]` and a Dirichlet(1) state distribution.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_states: usize, max_actions: usize) -> Self {
        let n_states = rng.gen_range(1..=max_states);
        let n_actions = rng.gen_range(1..=max_actions);
        let cells = n_states * n_actions;
        let q = (0..cells).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let q_hat = (0..cells).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let weights: Vec<f64> = (0..n_states).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = weights.iter().sum();
        let mut d_pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // put the rounding residue on the last entry so the sum is 1 to the last ulp or so
        let partial: f64 = d_pi[..n_states - 1].iter().sum();
        d_pi[n_states - 1] = (1.0 - partial).max(0.0);
        TabularInstance {
            n_states,
            n_actions,
            q,
            q_hat,
            d_pi,
        }
    }
}

pub fn check_upper_bound(inst: &TabularInstance) -> Result<BoundCheck> {
    inst.validate()?;
    let mut l_consolid = 0.0;
    let mut total = 0.0;
    for s in 0..inst.n_states {
        let row = s * inst.n_actions..(s + 1) * inst.n_actions;
        let gap: f64 = inst.q[row.clone()]
            .iter()
            .zip(&inst.q_hat[row])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        l_consolid += inst.d_pi[s] * gap;
        total += gap;
    }
    let n = inst.n_states as f64;
    let l_uniform = total / n;
    Ok(BoundCheck {
        l_consolid,
        l_uniform,
        holds: l_consolid <= n * l_uniform + BOUND_TOLERANCE,
    })
}

#[derive(Clone, Debug)]
pub struct BoundSuiteReport {
    pub instances: usize,
    pub violations: usize,
    /// Largest `l_consolid − |S| · l_uniform` seen (negative when the bound is slack everywhere).
    pub worst_margin: f64,
}

impl BoundSuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `instances` random instances (|S| ≤ 20, |A| ≤ 5), each seeded from `seed` and its index.
pub fn check_bound_suite(instances: usize, seed: u64) -> Result<BoundSuiteReport> {
    let idx: Vec<u64> = (0..instances as u64).collect();
    let results = par::map(&idx, |&i| {
        let mut rng = crate::harness::rng_for(seed, i);
        let inst = TabularInstance::random(&mut rng, 20, 5);
        check_upper_bound(&inst).map(|c| (c, inst.n_states as f64))
    });
    let mut report = BoundSuiteReport {
        instances,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
    };
    for r in results {
        let (c, n) = r?;
        if !c.holds {
            report.violations += 1;
        }
        report.worst_margin = report.worst_margin.max(c.l_consolid - n * c.l_uniform);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_tables() {
        let inst = TabularInstance {
            n_states: 2,
            n_actions: 2,
            q: vec![1.0, 2.0, 3.0, 4.0],
            q_hat: vec![1.0, 2.0, 3.0, 4.0],
            d_pi: vec![0.3, 0.7],
        };
        let c = check_upper_bound(&inst).unwrap();
        assert_eq!((c.l_consolid, c.l_uniform, c.holds), (0.0, 0.0, true));
    }

    #[test]
    fn single_state_equality() {
        let inst = TabularInstance {
            n_states: 1,
            n_actions: 3,
            q: vec![1.0, -2.0, 0.5],
            q_hat: vec![0.0, 0.0, 0.0],
            d_pi: vec![1.0],
        };
        let c = check_upper_bound(&inst).unwrap();
        assert_eq!(c.l_consolid, c.l_uniform);
        assert!(c.holds);
    }

    #[test]
    fn random_instances_are_valid_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            TabularInstance::random(&mut rng, 20, 5).validate().unwrap();
        }
    }

    #[test]
    fn rejects_bad_distribution() {
        let inst = TabularInstance {
            n_states: 2,
            n_actions: 1,
            q: vec![0.0; 2],
            q_hat: vec![0.0; 2],
            d_pi: vec![0.6, 0.6],
        };
        assert!(check_upper_bound(&inst).is_err());
    }

    #[test]
    fn suite_has_no_violations() {
        let report = check_bound_suite(1000, 7).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.worst_margin <= 1e-12);
    }
}
