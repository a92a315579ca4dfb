//! Small test-statistics toolbox shared by the verification suites:
//! Wilson score intervals, chi-square goodness of fit, Kolmogorov-Smirnov
//! distances and running moments.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::{Error, Result};

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy)]
pub struct WilsonInterval {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wilson interval at `z` standard normal quantiles (z = 1.96 for 95 %).
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<WilsonInterval> {
    if trials == 0 {
        return Err(Error::InvalidParam("wilson interval needs trials > 0".into()));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Ok(WilsonInterval { p_hat: p, lo: (center - half).max(0.0), hi: (center + half).min(1.0) })
}

/// Chi-square statistic and p-value for observed counts against expected
/// counts. Degrees of freedom is `len - 1 - fitted`.
pub fn chi_square_pvalue(observed: &[u64], expected: &[f64], fitted: usize) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidParam("chi-square needs matching bins".into()));
    }
    let df = observed.len() - 1 - fitted;
    if df == 0 {
        return Err(Error::InvalidParam("chi-square has zero degrees of freedom".into()));
    }
    let mut stat = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            return Err(Error::InvalidParam("chi-square expected counts must be positive".into()));
        }
        let d = o as f64 - e;
        stat += d * d / e;
    }
    let dist = ChiSquared::new(df as f64)
        .map_err(|e| Error::InvalidParam(format!("chi-square df: {e}")))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Two-sample chi-square homogeneity test on matching count vectors.
/// Bins empty in both samples are skipped; degrees of freedom is the number
/// of used bins minus one.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<(f64, f64)> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidParam("two-sample chi-square needs matching bins".into()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InvalidParam("two-sample chi-square needs nonempty samples".into()));
    }
    let k1 = (nb as f64 / na as f64).sqrt();
    let k2 = (na as f64 / nb as f64).sqrt();
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let tot = x + y;
        if tot == 0 {
            continue;
        }
        used += 1;
        let d = k1 * x as f64 - k2 * y as f64;
        stat += d * d / tot as f64;
    }
    if used < 2 {
        return Err(Error::InvalidParam("two-sample chi-square needs two used bins".into()));
    }
    let dist = ChiSquared::new((used - 1) as f64)
        .map_err(|e| Error::InvalidParam(format!("chi-square df: {e}")))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    // unwrap: parameters are fixed and valid
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// One-sample Kolmogorov-Smirnov distance of `samples` against `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
        }
        if xb <= xa {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..101 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Folds another accumulator in, as if its samples had been pushed here.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (n1, n2) = (self.n as f64, other.n as f64);
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}
