/// Sample mean with the standard error of the mean (sample standard deviation over √n).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                n,
                mean: f64::NAN,
                sd: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Summary { n, mean, sd: 0.0, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        Summary {
            n,
            mean,
            sd,
            se: sd / (n as f64).sqrt(),
        }
    }

    pub fn two_se(&self) -> f64 {
        2.0 * self.se
    }

    /// `2·sqrt(se_a² + se_b²)`, the margin for comparing two independent means.
    pub fn two_se_combined(&self, other: &Summary) -> f64 {
        2.0 * self.se.hypot(other.se)
    }
}

/// Exponential moving average `s_i = w·s_{i-1} + (1-w)·x_i` seeded with `s_0 = x_0`.
pub fn ema(values: &[f64], weight: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut s = match values.first() {
        Some(&x) => x,
        None => return out,
    };
    for &x in values {
        s = weight * s + (1.0 - weight) * x;
        out.push(s);
    }
    out
}

/// Most frequent value, ties broken toward the smallest.
pub fn mode(values: impl IntoIterator<Item = usize>) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_hand_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.sd - sd).abs() < 1e-15);
        assert!((s.two_se() - sd).abs() < 1e-15);
        let one = Summary::of(&[7.0]);
        assert_eq!((one.mean, one.se), (7.0, 0.0));
        assert!(Summary::of(&[]).mean.is_nan());
    }

    #[test]
    fn combined_margin() {
        let a = Summary { n: 4, mean: 0.0, sd: 0.0, se: 3.0 };
        let b = Summary { n: 4, mean: 0.0, sd: 0.0, se: 4.0 };
        assert_eq!(a.two_se_combined(&b), 10.0);
    }

    #[test]
    fn ema_of_constant_is_constant() {
        assert_eq!(ema(&[2.0; 5], 0.9), vec![2.0; 5]);
        let e = ema(&[0.0, 10.0], 0.9);
        assert!((e[1] - 1.0).abs() < 1e-12);
        assert!(ema(&[], 0.9).is_empty());
    }

    #[test]
    fn mode_prefers_smallest_on_tie() {
        assert_eq!(mode([2, 1, 2, 1, 0]), Some(1));
        assert_eq!(mode([2, 2, 0]), Some(2));
        assert_eq!(mode(std::iter::empty()), None);
    }
}
