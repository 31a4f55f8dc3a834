//! Small statistical toolbox: binomial confidence intervals, delete-one
//! jackknife, exact Poisson tails, and least-squares decay fits share these
//! helpers so every estimator reports uncertainty the same way.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point estimate with a symmetric confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub half_width: f64,
    pub replicas: u64,
    pub level: f64,
    pub seed: u64,
}

impl EstimateWithCI {
    pub fn contains(&self, value: f64) -> bool {
        (self.point - value).abs() <= self.half_width
    }

    pub fn lo(&self) -> f64 {
        self.point - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.point + self.half_width
    }
}

/// Normal-approximation CI for a proportion of `successes` in `n` trials.
pub fn proportion_ci(successes: u64, n: u64, level: f64, seed: u64) -> Result<EstimateWithCI> {
    if n == 0 {
        return Err(Error::stats("proportion over zero replicas"));
    }
    if successes > n {
        return Err(Error::invariant(format!("{successes} successes out of {n} trials")));
    }
    let p = successes as f64 / n as f64;
    let z = normal_quantile(0.5 + level / 2.0)?;
    let half = z * (p * (1.0 - p) / n as f64).sqrt();
    Ok(EstimateWithCI { point: p, half_width: half, replicas: n, level, seed })
}

/// Normal-approximation CI for a sample mean.
pub fn mean_ci(values: &[f64], level: f64, seed: u64) -> Result<EstimateWithCI> {
    let n = values.len();
    if n < 2 {
        return Err(Error::stats("mean CI needs at least two replicas"));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let z = normal_quantile(0.5 + level / 2.0)?;
    Ok(EstimateWithCI {
        point: mean,
        half_width: z * (var / nf).sqrt(),
        replicas: n as u64,
        level,
        seed,
    })
}

/// Inverse standard-normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9 over the whole open interval).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::param(format!("quantile level {p} outside (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    Ok(x)
}

/// Complementary error function (Numerical Recipes' Chebyshev fit).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// P(Poisson(mean) >= k), by direct summation from the mode.
pub fn poisson_upper_tail(mean: f64, k: u64) -> f64 {
    poisson_tail(mean, k, true)
}

/// P(Poisson(mean) <= k).
pub fn poisson_lower_tail(mean: f64, k: u64) -> f64 {
    poisson_tail(mean, k, false)
}

fn poisson_tail(mean: f64, k: u64, upper: bool) -> f64 {
    assert!(mean >= 0.0 && mean.is_finite(), "mean {mean}");
    if mean == 0.0 {
        return if upper {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            1.0
        };
    }
    // Each branch sums the side whose terms decay geometrically away from k,
    // so small tails are never computed as a difference of near-1 quantities.
    let ln_pmf_k = k as f64 * mean.ln() - mean - ln_factorial(k);
    if upper {
        if k == 0 {
            return 1.0;
        }
        if k as f64 > mean {
            // Ascending from k: term ratio mean/(n+1) < 1, no cancellation.
            let mut term = ln_pmf_k.exp();
            let mut s = term;
            let mut n = k;
            while term > s * 1e-18 {
                n += 1;
                term *= mean / n as f64;
                s += term;
            }
            s.min(1.0)
        } else {
            (1.0 - poisson_tail(mean, k - 1, false)).max(0.0)
        }
    } else if (k as f64) < mean {
        // Descending from k: term ratio n/mean < 1, no cancellation.
        let mut term = ln_pmf_k.exp();
        let mut s = term;
        let mut n = k;
        while n > 0 && term > s * 1e-18 {
            term *= n as f64 / mean;
            n -= 1;
            s += term;
        }
        s.min(1.0)
    } else {
        (1.0 - poisson_tail(mean, k + 1, true)).max(0.0)
    }
}

fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0)
}

/// Lanczos log-gamma, good to ~1e-13 relative for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Delete-one jackknife half-width for a statistic computed from per-replica
/// pairs. `stat` maps the n retained pairs' sufficient sums to the statistic.
pub fn jackknife_half_width<F>(pairs: &[(f64, f64)], stat: F, level: f64) -> Result<f64>
where
    F: Fn(&[(f64, f64)]) -> f64,
{
    let n = pairs.len();
    if n < 2 {
        return Err(Error::stats("jackknife needs at least two replicas"));
    }
    let mut loo = Vec::with_capacity(n);
    let mut held = Vec::with_capacity(n - 1);
    for i in 0..n {
        held.clear();
        held.extend_from_slice(&pairs[..i]);
        held.extend_from_slice(&pairs[i + 1..]);
        loo.push(stat(&held));
    }
    let nf = n as f64;
    let mean = loo.iter().sum::<f64>() / nf;
    let var = loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (nf - 1.0) / nf;
    let z = normal_quantile(0.5 + level / 2.0)?;
    Ok(z * var.sqrt())
}

/// Total variation distance between finite distributions on 0..len.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    let mut s = 0.0;
    for i in 0..len {
        let a = p.get(i).copied().unwrap_or(0.0);
        let b = q.get(i).copied().unwrap_or(0.0);
        s += (a - b).abs();
    }
    s / 2.0
}
