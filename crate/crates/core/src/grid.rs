use crate::error::{Error, Result};

/// Strictly increasing sequence of instants `t_0 < ... < t_N`, `N >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least two instants, got {}",
                times.len()
            )));
        }
        if let Some(bad) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite instant {bad}")));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "instants not strictly increasing at index {}: {} then {}",
                w,
                times[w],
                times[w + 1]
            )));
        }
        Ok(Self { times })
    }

    /// `steps` equal intervals covering `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("zero steps".into()));
        }
        let h = (t1 - t0) / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * h).collect();
        times[steps] = t1;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn horizon(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn step(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Subdivide every interval into `factor` equal pieces. Original instants are kept bit-exact.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidGrid("refinement factor must be positive".into()));
        }
        let mut times = Vec::with_capacity(self.intervals() * factor + 1);
        for w in self.times.windows(2) {
            let h = (w[1] - w[0]) / factor as f64;
            times.push(w[0]);
            for j in 1..factor {
                times.push(w[0] + j as f64 * h);
            }
        }
        times.push(self.end());
        Self::new(times)
    }

    /// Index of `t` in the grid, matching to a relative tolerance of 1e-12 of the horizon.
    pub fn position(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().abs().max(self.end().abs()).max(1.0);
        let idx = self.times.partition_point(|&s| s < t - tol);
        (idx < self.times.len() && (self.times[idx] - t).abs() <= tol).then_some(idx)
    }

    /// Grid of the time-reversed path: `t -> t_0 + t_N - t`.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.start(), self.end());
        let mut times: Vec<f64> = self.times.iter().rev().map(|t| a + b - t).collect();
        times[0] = a;
        let last = times.len() - 1;
        times[last] = b;
        Self { times }
    }

    /// The sub-grid made of every `stride`-th instant. `stride` must divide `N`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.intervals() % stride != 0 {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} does not divide {} intervals",
                self.intervals()
            )));
        }
        Self::new(self.times.iter().step_by(stride).copied().collect())
    }
}
