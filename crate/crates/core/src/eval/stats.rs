//! Paired significance tests and effect sizes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::factorial::ln_binomial;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("{0} outside [0, 1]")]
    DomainError(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("differences have zero variance")]
    ZeroVariance,
    #[error("non-finite input")]
    NonFinite,
}

/// Below this many discordant pairs the exact binomial test is used.
pub const MCNEMAR_EXACT_BELOW: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquaredCc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    /// Pairs where the first method succeeds and the second fails.
    pub b: u64,
    /// Pairs where the first method fails and the second succeeds.
    pub c: u64,
    /// Continuity-corrected chi-squared statistic, 1 df.
    pub statistic: f64,
    /// p-value of the selected method.
    pub p_value: f64,
    pub method: McNemarMethod,
    pub exact_p: f64,
    pub chi2_p: f64,
}

/// Two-sided exact binomial p-value for `k` successes out of `n` at 1/2.
pub fn binomial_two_sided(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let lo = k.min(n - k);
    let ln_half = (0.5f64).ln() * n as f64;
    let tail: f64 = (0..=lo).map(|i| (ln_binomial(n, i) + ln_half).exp()).sum();
    (2.0 * tail).min(1.0)
}

pub fn mcnemar(pairs: &[(bool, bool)]) -> McNemar {
    let b = pairs.iter().filter(|(a, x)| *a && !*x).count() as u64;
    let c = pairs.iter().filter(|(a, x)| !*a && *x).count() as u64;
    mcnemar_counts(b, c)
}

pub fn mcnemar_counts(b: u64, c: u64) -> McNemar {
    let n = b + c;
    if n == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::ExactBinomial,
            exact_p: 1.0,
            chi2_p: 1.0,
        };
    }
    let diff = (b as f64 - c as f64).abs();
    let statistic = (diff - 1.0).max(0.0).powi(2) / n as f64;
    let chi2_p = ChiSquared::new(1.0).expect("one degree of freedom").sf(statistic);
    let exact_p = binomial_two_sided(b, n);
    let (method, p_value) = if n < MCNEMAR_EXACT_BELOW {
        (McNemarMethod::ExactBinomial, exact_p)
    } else {
        (McNemarMethod::ChiSquaredCc, chi2_p)
    };
    McNemar {
        b,
        c,
        statistic,
        p_value,
        method,
        exact_p,
        chi2_p,
    }
}

/// Effect size for two proportions: `2 asin(sqrt(p1)) - 2 asin(sqrt(p2))`.
pub fn cohens_h(p1: f64, p2: f64) -> Result<f64, StatsError> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::DomainError(p));
        }
    }
    Ok(2.0 * p1.sqrt().asin() - 2.0 * p2.sqrt().asin())
}

fn mean_sd(xs: &[f64]) -> Result<(f64, f64), StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples { need: 2, got: xs.len() });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Zero-variance input; `p_value` is then 1 for zero mean and 0 otherwise.
    pub degenerate: bool,
}

/// Two-sided one-sample t-test on paired differences.
pub fn paired_t(diffs: &[f64]) -> Result<PairedT, StatsError> {
    let (mean, sd) = mean_sd(diffs)?;
    let n = diffs.len() as f64;
    let df = n - 1.0;
    if sd == 0.0 {
        let zero = mean == 0.0;
        return Ok(PairedT {
            t: if zero { 0.0 } else { mean.signum() * f64::INFINITY },
            df,
            p_value: if zero { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let t = mean * n.sqrt() / sd;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let p_value = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(PairedT {
        t,
        df,
        p_value,
        degenerate: false,
    })
}

/// Mean difference over the sample standard deviation of the differences.
pub fn cohens_d(diffs: &[f64]) -> Result<f64, StatsError> {
    let (mean, sd) = mean_sd(diffs)?;
    if sd == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(mean / sd)
}
