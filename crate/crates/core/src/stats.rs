//! Replica statistics.

use serde::Serialize;

/// Mean with replica-based standard error.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Sample mean and `s / √n`; the error is infinite below two values.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::INFINITY,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            f64::INFINITY
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Estimate { mean, stderr, n }
    }

    /// Proportion estimate with binomial standard error.
    pub fn proportion(successes: usize, n: usize) -> Self {
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::INFINITY,
                n,
            };
        }
        let p = successes as f64 / n as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// `√(se₁² + se₂²)`.
    pub fn pooled_stderr(&self, other: &Estimate) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Running mean and variance (Welford), merged in a fixed order.
#[derive(Copy, Clone, Debug, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: if self.n == 0 { f64::NAN } else { self.mean },
            stderr: if self.n < 2 {
                f64::INFINITY
            } else {
                (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
            },
            n: self.n,
        }
    }
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_direct() {
        let v: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let direct = Estimate::from_values(&v);
        let mut a = Accumulator::default();
        let mut b = Accumulator::default();
        v[..40].iter().for_each(|&x| a.push(x));
        v[40..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        let e = a.estimate();
        assert!((e.mean - direct.mean).abs() < 1e-12);
        assert!((e.stderr - direct.stderr).abs() < 1e-12);
    }

    #[test]
    fn wilson_edges() {
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100, Z95);
        assert!(lo > 0.95);
        assert!((hi - 1.0).abs() < 1e-12);
    }
}
