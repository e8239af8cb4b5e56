//! Small statistics toolbox: autocorrelation, batch means, Kolmogorov–Smirnov,
//! permutation tests and least squares.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Normalized autocorrelations `ρ_0 = 1, ρ_1, …, ρ_max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return vec![1.0; max_lag.min(n.saturating_sub(1)) + 1];
    }
    (0..=max_lag.min(n.saturating_sub(1)))
        .map(|lag| {
            let s: f64 = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
            s / n as f64 / c0
        })
        .collect()
}

/// Integrated autocorrelation time `1 + 2 Σ_k ρ_k`, the sum truncated at the
/// first nonpositive autocorrelation.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum::<f64>();
    if c0 == 0.0 {
        // a constant chain carries no more information than one draw
        return n as f64;
    }
    let mut tau = 1.0;
    for lag in 1..n {
        let s: f64 = c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum();
        let rho = s / c0;
        if rho <= 0.0 {
            break;
        }
        tau += 2.0 * rho;
    }
    tau
}

pub fn effective_sample_size_of(x: &[f64]) -> f64 {
    x.len() as f64 / integrated_autocorrelation(x)
}

/// Number of contiguous batches used for batch-means standard errors.
pub const BATCHES: usize = 40;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: f64,
}

impl Estimate {
    /// Mean of a correlated series with a batch-means standard error.
    ///
    /// Series shorter than `10 * BATCHES` fall back to an IACT-corrected
    /// standard error.
    pub fn from_series(x: &[f64]) -> Self {
        let n = x.len();
        let m = mean(x);
        let var = variance(x);
        if n < 2 || var == 0.0 {
            return Estimate {
                mean: m,
                std_error: 0.0,
                n_effective: n as f64,
            };
        }
        let se = if n >= 10 * BATCHES {
            let size = n / BATCHES;
            let means: Vec<f64> = (0..BATCHES).map(|b| mean(&x[b * size..(b + 1) * size])).collect();
            (variance(&means) / BATCHES as f64).sqrt()
        } else {
            (var * integrated_autocorrelation(x) / n as f64).sqrt()
        };
        Estimate {
            mean: m,
            std_error: se,
            n_effective: var / (se * se),
        }
    }

    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            std_error: 0.0,
            n_effective: f64::INFINITY,
        }
    }

    /// Number of standard errors separating the mean from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.std_error == 0.0 {
            return if self.mean == value { 0.0 } else { f64::INFINITY };
        }
        (self.mean - value) / self.std_error
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Estimate {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            n_effective: self.n_effective,
        }
    }
}

/// Pools estimates of the same quantity from independent chains, weighting
/// each by its number of draws.
pub fn pool(parts: &[(Estimate, usize)]) -> Estimate {
    let total: usize = parts.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Estimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            n_effective: 0.0,
        };
    }
    let w = |n: usize| n as f64 / total as f64;
    Estimate {
        mean: parts.iter().map(|(e, n)| w(*n) * e.mean).sum(),
        std_error: parts
            .iter()
            .map(|(e, n)| (w(*n) * e.std_error).powi(2))
            .sum::<f64>()
            .sqrt(),
        n_effective: parts.iter().map(|(e, _)| e.n_effective).sum(),
    }
}

/// Value at `x = 0` of the weighted least-squares line through the points
/// `(x_i, y_i ± se_i)`. Points with zero error get the smallest positive
/// error present, or unit weights when every error is zero.
pub fn extrapolate_to_zero(x: &[f64], y: &[Estimate]) -> Estimate {
    let floor = y
        .iter()
        .map(|e| e.std_error)
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weight = |e: &Estimate| {
        if floor.is_infinite() {
            1.0
        } else {
            e.std_error.max(floor).powi(-2)
        }
    };
    let (mut sw, mut swx, mut swxx, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (xi, e) in x.iter().zip(y) {
        let w = weight(e);
        sw += w;
        swx += w * xi;
        swxx += w * xi * xi;
        swy += w * e.mean;
        swxy += w * xi * e.mean;
    }
    let det = sw * swxx - swx * swx;
    let intercept = (swxx * swy - swx * swxy) / det;
    let std_error = if floor.is_infinite() { 0.0 } else { (swxx / det).sqrt() };
    Estimate {
        mean: intercept,
        std_error,
        n_effective: y.iter().map(|e| e.n_effective).sum(),
    }
}

/// `sqrt(Σ se²)` for independent estimates.
pub fn combined_se(parts: &[Estimate]) -> f64 {
    parts.iter().map(|e| e.std_error * e.std_error).sum::<f64>().sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small-λ form of the theta series
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| ((2 * k - 1) as f64).powi(2) * c)
            .map(f64::exp)
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: f64,
}

/// One-sample KS test of `sample` against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        n,
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        n: n_eff,
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationResult {
    pub correlation: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Two-sided permutation test of zero Pearson correlation.
pub fn permutation_correlation_test<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    permutations: usize,
    rng: &mut R,
) -> PermutationResult {
    let observed = pearson(x, y);
    let mut shuffled = y.to_vec();
    let mut extreme = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(rng);
        if pearson(x, &shuffled).abs() >= observed.abs() {
            extreme += 1;
        }
    }
    PermutationResult {
        correlation: observed,
        p_value: (1 + extreme) as f64 / (1 + permutations) as f64,
        permutations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub residual_ss: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = if n > 2 {
        (residual_ss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    LinearFit {
        slope,
        intercept,
        slope_se,
        residual_ss,
        points: n,
    }
}

/// Two-sided Student-t critical value at confidence `level`.
pub fn t_critical(level: f64, dof: f64) -> f64 {
    let p = 0.5 + 0.5 * level;
    if dof.is_infinite() {
        return Normal::standard().inverse_cdf(p);
    }
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}
