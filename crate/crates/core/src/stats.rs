//! One-pass central-moment accumulation (Welford's recurrence extended to
//! the fourth moment), used for replication statistics and the standard
//! error of the sample variance.

/// Running mean and central moments of a stream of observations.
#[derive(Debug, Clone, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n0 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n0;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (n-1 divisor); undefined below two samples.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| self.m2 / (self.n as f64 - 1.0))
    }

    /// Standard error of the mean.
    pub fn se_mean(&self) -> Option<f64> {
        self.sample_variance().map(|v| (v / self.n as f64).sqrt())
    }

    /// Standard error of the unbiased sample variance, from the estimated
    /// fourth central moment:
    /// `sqrt((m4 - s^4 * (n-3)/(n-1)) / n)`.
    pub fn se_variance(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let s2 = self.m2 / (n - 1.0);
        let m4 = self.m4 / n;
        let inner = (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
        Some(inner.max(0.0).sqrt())
    }
}
