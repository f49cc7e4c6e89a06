//! Paired comparisons between variants evaluated on the same trials.

/// One-sided paired comparison of `a` against `b` (smaller is better), over
/// the pairs where both values are finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedComparison {
    pub pairs: usize,
    /// Mean of `a - b`.
    pub mean_difference: f64,
    pub stderr: f64,
    /// `mean_difference / stderr`.
    pub t: f64,
}

impl PairedComparison {
    pub fn new(a: &[f64], b: &[f64]) -> Self {
        let d: Vec<f64> = a
            .iter()
            .zip(b)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| x - y)
            .collect();
        let n = d.len();
        if n < 2 {
            return Self {
                pairs: n,
                mean_difference: d.first().copied().unwrap_or(f64::NAN),
                stderr: f64::NAN,
                t: f64::NAN,
            };
        }
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let stderr = (var / n as f64).sqrt();
        let t = if stderr > 0.0 {
            mean / stderr
        } else if mean < 0.0 {
            f64::NEG_INFINITY
        } else if mean > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Self {
            pairs: n,
            mean_difference: mean,
            stderr,
            t,
        }
    }

    /// `a` smaller than `b` at the one-sided 5% level. The normal quantile is
    /// used, which is accurate for the trial counts involved (n >= 30).
    pub fn significantly_smaller(&self) -> bool {
        self.t < -1.6449
    }

    /// `a` not larger than `b` beyond `sigmas` standard errors.
    pub fn not_larger(&self, sigmas: f64) -> bool {
        if self.pairs == 0 {
            return false;
        }
        if !self.stderr.is_finite() {
            return self.mean_difference <= 0.0;
        }
        self.mean_difference <= sigmas * self.stderr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clear_difference_is_significant() {
        let a: Vec<f64> = (0..50).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + 0.5 + 0.01 * (i % 3) as f64).collect();
        let c = PairedComparison::new(&a, &b);
        assert_eq!(c.pairs, 50);
        assert!(c.significantly_smaller());
        assert!(c.not_larger(0.0));
        assert!(!PairedComparison::new(&b, &a).significantly_smaller());
    }

    #[test]
    fn identical_inputs_are_not_significant() {
        let a = [1.0, 2.0, 3.0];
        let c = PairedComparison::new(&a, &a);
        assert_eq!(c.t, 0.0);
        assert!(!c.significantly_smaller());
        assert!(c.not_larger(0.0));
    }

    #[test]
    fn non_finite_pairs_are_skipped() {
        let c = PairedComparison::new(&[1.0, f64::NAN, 2.0, 0.5], &[2.0, 1.0, f64::INFINITY, 1.5]);
        assert_eq!(c.pairs, 2);
        assert_eq!(c.mean_difference, -1.0);
    }
}
