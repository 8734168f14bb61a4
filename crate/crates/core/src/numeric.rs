//! Compensated summation helpers.
//!
//! Accumulations that feed the estimators use Kahan summation in a fixed
//! input order so results do not depend on how work is partitioned across
//! threads.

/// Kahan (compensated) sum in iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanAccumulator::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanAccumulator {
    sum: f64,
    comp: f64,
}

impl KahanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean via compensated summation.
pub fn mean(values: &[f64]) -> f64 {
    kahan_sum(values.iter().copied()) / values.len() as f64
}

/// n-1 sample variance via compensated summation.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    assert!(n >= 2);
    let m = mean(values);
    kahan_sum(values.iter().map(|v| (v - m) * (v - m))) / (n as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let vals = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(kahan_sum(vals), 2.0);
    }

    #[test]
    fn variance_of_unit_spaced_values() {
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
    }
}
