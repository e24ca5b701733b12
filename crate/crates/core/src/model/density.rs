//! Univariate log densities.
//!
//! `Err` means the distribution parameters themselves are invalid; a value
//! outside the support yields `Ok(-inf)`.

use std::f64::consts::PI;

use libm::lgamma;

pub(crate) type Density = Result<f64, String>;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

pub(crate) fn normal(x: f64, mean: f64, sd: f64) -> Density {
    positive("sd", sd)?;
    if !mean.is_finite() {
        return Err(format!("mean must be finite, got {mean}"));
    }
    let z = (x - mean) / sd;
    Ok(-HALF_LN_2PI - sd.ln() - 0.5 * z * z)
}

pub(crate) fn gamma(x: f64, shape: f64, rate: f64) -> Density {
    positive("shape", shape)?;
    positive("rate", rate)?;
    if x <= 0.0 || !x.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((shape - 1.0) * x.ln() - rate * x + shape * rate.ln() - lgamma(shape))
}

pub(crate) fn beta(x: f64, a: f64, b: f64) -> Density {
    positive("a", a)?;
    positive("b", b)?;
    if x <= 0.0 || x >= 1.0 || x.is_nan() {
        return Ok(f64::NEG_INFINITY);
    }
    let log_beta = lgamma(a) + lgamma(b) - lgamma(a + b);
    Ok((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - log_beta)
}

/// `k * ln(p)` with `0 * ln(0) = 0`.
fn xlogy(k: f64, p: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * p.ln()
    }
}

pub(crate) fn binomial(k: f64, size: f64, prob: f64) -> Density {
    if !(size >= 0.0 && size.fract() == 0.0 && size.is_finite()) {
        return Err(format!("size must be a nonnegative integer, got {size}"));
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(format!("prob must lie in [0, 1], got {prob}"));
    }
    if k < 0.0 || k > size || k.fract() != 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_choose = lgamma(size + 1.0) - lgamma(k + 1.0) - lgamma(size - k + 1.0);
    Ok(log_choose + xlogy(k, prob) + xlogy(size - k, 1.0 - prob))
}

pub(crate) fn poisson(k: f64, rate: f64) -> Density {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(format!("rate must be nonnegative and finite, got {rate}"));
    }
    if k < 0.0 || k.fract() != 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(xlogy(k, rate) - rate - lgamma(k + 1.0))
}

/// Constant term of a `dim`-variate normal log density.
pub(crate) fn mvn_constant(dim: usize) -> f64 {
    -0.5 * dim as f64 * (2.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn standard_normal_mode() {
        assert!(close(normal(0.0, 0.0, 1.0).unwrap(), -0.918_938_533_204_672_7, 1e-12));
    }

    #[test]
    fn unit_exponential_at_one() {
        assert!(close(gamma(1.0, 1.0, 1.0).unwrap(), -1.0, 1e-12));
    }

    #[test]
    fn support_and_parameter_errors_differ() {
        assert_eq!(gamma(-0.5, 2.0, 1.0), Ok(f64::NEG_INFINITY));
        assert!(gamma(1.0, 0.0, 1.0).is_err());
        assert!(normal(0.0, 0.0, -1.0).is_err());
        assert_eq!(beta(1.2, 2.0, 2.0), Ok(f64::NEG_INFINITY));
        assert_eq!(binomial(4.0, 3.0, 0.5), Ok(f64::NEG_INFINITY));
        assert!(binomial(1.0, 2.5, 0.5).is_err());
        assert_eq!(poisson(-1.0, 2.0), Ok(f64::NEG_INFINITY));
    }

    #[test]
    fn discrete_densities_sum_to_one() {
        let total: f64 = (0..=7).map(|k| binomial(k as f64, 7.0, 0.3).unwrap().exp()).sum();
        assert!(close(total, 1.0, 1e-12));
        let total: f64 = (0..80).map(|k| poisson(k as f64, 6.5).unwrap().exp()).sum();
        assert!(close(total, 1.0, 1e-12));
        assert_eq!(binomial(0.0, 5.0, 0.0), Ok(0.0));
    }

    #[test]
    fn beta_uniform_and_symmetric() {
        assert!(close(beta(0.3, 1.0, 1.0).unwrap(), 0.0, 1e-12));
        assert!(close(beta(0.2, 2.0, 5.0).unwrap(), beta(0.8, 5.0, 2.0).unwrap(), 1e-12));
        // Beta(2, 2) at 0.5: 6 * 0.25
        assert!(close(beta(0.5, 2.0, 2.0).unwrap(), 1.5f64.ln(), 1e-12));
    }
}
