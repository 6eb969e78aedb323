//! Per-feature sufficient statistics maintained inside leaves.

/// Welford running mean / variance with min-max tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl GaussianStats {
    pub fn new() -> Self {
        GaussianStats { count: 0, mean: 0.0, m2: 0.0 }
    }

    pub fn add(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance; zero until two observations arrive.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Gaussian estimate of P(X <= x). Degenerates to a step function when
    /// the observed variance is zero.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let sd = self.std_dev();
        if sd < 1e-12 {
            return if x >= self.mean { 1.0 } else { 0.0 };
        }
        0.5 * (1.0 + erf((x - self.mean) / (sd * std::f64::consts::SQRT_2)))
    }
}

impl Default for GaussianStats {
    fn default() -> Self {
        Self::new()
    }
}

/// Abramowitz-Stegun 7.1.26 rational approximation, max abs error 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

/// Attribute observer for classification leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassObserver {
    /// `table[category][class]` counts.
    Nominal { table: Vec<Vec<u64>> },
    /// Per-class Gaussians plus the global observed range.
    Numeric {
        per_class: Vec<GaussianStats>,
        min: f64,
        max: f64,
    },
}

impl ClassObserver {
    pub fn nominal(categories: usize, classes: usize) -> Self {
        ClassObserver::Nominal {
            table: vec![vec![0; classes]; categories],
        }
    }

    pub fn numeric(classes: usize) -> Self {
        ClassObserver::Numeric {
            per_class: vec![GaussianStats::new(); classes],
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn observe_nominal(&mut self, category: usize, class: usize) {
        match self {
            ClassObserver::Nominal { table } => table[category][class] += 1,
            ClassObserver::Numeric { .. } => unreachable!("numeric observer fed a category"),
        }
    }

    pub fn observe_numeric(&mut self, x: f64, class: usize) {
        match self {
            ClassObserver::Numeric { per_class, min, max } => {
                per_class[class].add(x);
                if x < *min {
                    *min = x;
                }
                if x > *max {
                    *max = x;
                }
            }
            ClassObserver::Nominal { .. } => unreachable!("nominal observer fed a number"),
        }
    }

    /// Number of scalar fields held, for the memory cost model.
    pub fn field_count(&self) -> usize {
        match self {
            ClassObserver::Nominal { table } => table.iter().map(Vec::len).sum(),
            ClassObserver::Numeric { per_class, .. } => per_class.len() * 3 + 2,
        }
    }
}

/// Running (count, sum, sum of squares) triple for regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TargetMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl TargetMoments {
    pub fn add(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    pub fn merge(&mut self, other: &TargetMoments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        (self.sum_sq / n - (self.sum / n) * (self.sum / n)).max(0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

pub const REGRESSION_HISTOGRAM_BINS: usize = 64;

/// Attribute observer for regression leaves.
///
/// Numeric features buffer raw values until the first grace period, then
/// freeze an equal-width histogram over the observed range; bin boundaries
/// become the candidate thresholds.
#[derive(Debug, Clone, PartialEq)]
pub enum RegObserver {
    Nominal { per_category: Vec<TargetMoments> },
    Numeric {
        buffer: Vec<(f64, f64)>,
        bins: Option<NumericHistogram>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericHistogram {
    pub lo: f64,
    pub hi: f64,
    pub bins: Vec<TargetMoments>,
}

impl NumericHistogram {
    fn bin_index(&self, x: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let w = (self.hi - self.lo) / self.bins.len() as f64;
        (((x - self.lo) / w).floor() as i64).clamp(0, self.bins.len() as i64 - 1) as usize
    }

    pub fn add(&mut self, x: f64, y: f64) {
        let i = self.bin_index(x);
        self.bins[i].add(y);
    }

    /// Threshold at the upper edge of bin `i` (i in 0..bins-1).
    pub fn boundary(&self, i: usize) -> f64 {
        let w = (self.hi - self.lo) / self.bins.len() as f64;
        self.lo + w * (i + 1) as f64
    }
}

impl RegObserver {
    pub fn nominal(categories: usize) -> Self {
        RegObserver::Nominal {
            per_category: vec![TargetMoments::default(); categories],
        }
    }

    pub fn numeric() -> Self {
        RegObserver::Numeric { buffer: Vec::new(), bins: None }
    }

    pub fn observe_nominal(&mut self, category: usize, y: f64) {
        match self {
            RegObserver::Nominal { per_category } => per_category[category].add(y),
            RegObserver::Numeric { .. } => unreachable!("numeric observer fed a category"),
        }
    }

    pub fn observe_numeric(&mut self, x: f64, y: f64) {
        match self {
            RegObserver::Numeric { buffer, bins } => match bins {
                Some(h) => h.add(x, y),
                None => buffer.push((x, y)),
            },
            RegObserver::Nominal { .. } => unreachable!("nominal observer fed a number"),
        }
    }

    /// Freezes the histogram over the range seen so far and replays the
    /// buffered values into it. No-op once frozen or with an empty buffer.
    pub fn freeze(&mut self) {
        if let RegObserver::Numeric { buffer, bins } = self {
            if bins.is_some() || buffer.is_empty() {
                return;
            }
            let lo = buffer.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = buffer.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let mut hist = NumericHistogram {
                lo,
                hi,
                bins: vec![TargetMoments::default(); REGRESSION_HISTOGRAM_BINS],
            };
            for (x, y) in buffer.drain(..) {
                hist.add(x, y);
            }
            *bins = Some(hist);
        }
    }

    pub fn field_count(&self) -> usize {
        match self {
            RegObserver::Nominal { per_category } => per_category.len() * 3,
            RegObserver::Numeric { buffer, bins } => {
                buffer.len() * 2
                    + bins.as_ref().map_or(0, |h| h.bins.len() * 3 + 2)
            }
        }
    }
}
