//! Cached log-factorials for hypergeometric weights.

/// Table of `ln(n!)` for `n = 0..=max`.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    values: Vec<f64>,
}

impl LnFactorial {
    pub fn new(max: u64) -> Self {
        let max = max as usize;
        let mut values = Vec::with_capacity(max + 1);
        values.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..=max {
            acc += (k as f64).ln();
            values.push(acc);
        }
        LnFactorial { values }
    }

    pub fn max(&self) -> u64 {
        (self.values.len() - 1) as u64
    }

    /// `ln(n!)`. Panics if `n` exceeds the table.
    #[inline]
    pub fn get(&self, n: u64) -> f64 {
        self.values[n as usize]
    }

    /// `Σ ln(n_c!)` over all counts.
    pub fn sum(&self, counts: &[u64]) -> f64 {
        counts.iter().map(|&c| self.get(c)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        let lf = LnFactorial::new(10);
        assert_eq!(lf.get(0), 0.0);
        assert_eq!(lf.get(1), 0.0);
        assert!((lf.get(5) - 120f64.ln()).abs() < 1e-12);
        assert!((lf.get(10) - 3628800f64.ln()).abs() < 1e-12);
        assert_eq!(lf.max(), 10);
    }
}
