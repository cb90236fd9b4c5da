//! Poisson photon-number statistics of a coherent state.
//!
//! The probability mass function uses the saddle-point expansion
//! `pmf(n; mu) = exp(-stirlerr(n) - bd0(n, mu)) / sqrt(2 pi n)`, which stays
//! accurate to a few ulps for photon numbers in the tens of thousands where
//! the naive `n ln mu - mu - ln n!` form loses ten or more digits to
//! cancellation.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)` for integer `n <= 15`.
const STIRLERR_TABLE: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_1,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_87,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// Error term of Stirling's approximation to `ln(n!)`.
pub(crate) fn stirlerr(n: u64) -> f64 {
    if n < 16 {
        return STIRLERR_TABLE[n as usize];
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = n as f64;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation
/// when `x` is close to `np`.
pub(crate) fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// Natural log of the Poisson probability mass, assuming `mu > 0`.
fn ln_pmf_unchecked(mu: f64, n: u64) -> f64 {
    if n == 0 {
        return -mu;
    }
    let nf = n as f64;
    -stirlerr(n) - bd0(nf, mu) - LN_SQRT_2PI - 0.5 * nf.ln()
}

/// Poisson mass without argument validation; `mu` must be finite and `>= 0`.
pub(crate) fn pmf_unchecked(mu: f64, n: u64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    ln_pmf_unchecked(mu, n).exp()
}

fn check_mean(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::Domain(format!(
            "mean photon number must be finite and non-negative, got {mu}"
        )));
    }
    Ok(())
}

/// Probability of finding exactly `n` photons in a coherent state with mean
/// photon number `mu`: `e^(-mu) mu^n / n!`.
pub fn poisson_pmf(mu: f64, n: u64) -> Result<f64> {
    check_mean(mu)?;
    Ok(pmf_unchecked(mu, n).clamp(0.0, 1.0))
}

/// Upper tail `P(X > k)` without argument validation.
///
/// Below the mean the complement of the lower sum is used, above it the
/// tail is summed directly so that tiny tail masses keep full relative
/// precision.
pub(crate) fn sf_unchecked(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    if (k as f64) + 1.0 > mu {
        // Terms decrease monotonically from k + 1 onward.
        let mut n = k + 1;
        let mut term = pmf_unchecked(mu, n);
        let mut sum = 0.0;
        loop {
            sum += term;
            n += 1;
            term *= mu / n as f64;
            if term <= sum * 1e-17 || term == 0.0 {
                break;
            }
        }
        sum.min(1.0)
    } else {
        // Sum from k downward; terms decrease monotonically below the mode.
        let mut term = pmf_unchecked(mu, k);
        let mut sum = 0.0;
        let mut n = k;
        loop {
            sum += term;
            if n == 0 {
                break;
            }
            term *= n as f64 / mu;
            n -= 1;
            if term <= sum * 1e-17 || term == 0.0 {
                break;
            }
        }
        (1.0 - sum).max(0.0)
    }
}

/// Upper tail `P(X > k) = 1 - CDF(k; mu)` of the Poisson distribution.
pub fn poisson_sf(mu: f64, k: u64) -> Result<f64> {
    check_mean(mu)?;
    Ok(sf_unchecked(mu, k))
}

/// Cumulative distribution `P(X <= k)`.
pub fn poisson_cdf(mu: f64, k: u64) -> Result<f64> {
    check_mean(mu)?;
    Ok(1.0 - sf_unchecked(mu, k))
}

/// Truncation order used by the forward model: beyond it the Poisson mass
/// is below `e^-70` for any mean.
pub fn truncation_order(mu: f64) -> u64 {
    (mu + 12.0 * mu.sqrt() + 40.0).ceil() as u64
}
