//! Von Mises circular distribution: log-density and weighted maximum
//! likelihood fitting via the standard piecewise inverse of A(k) = I1/I0.

use std::f64::consts::PI;

use super::HmmError;

/// Concentration ceiling; keeps exp(kappa) representable and bounds the
/// asymptotic Bessel expansion.
pub const KAPPA_MAX: f64 = 700.0;

/// log I0(kappa): power series for moderate kappa, the asymptotic expansion
/// e^k / sqrt(2 pi k) * (1 + 1/(8k) + ...) for large kappa.
pub fn log_bessel_i0(kappa: f64) -> f64 {
    assert!(kappa >= 0.0, "kappa must be nonnegative");
    if kappa < 30.0 {
        let q = kappa * kappa / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= q / ((k * k) as f64);
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        sum.ln()
    } else {
        let inv = 1.0 / kappa;
        // Coefficients ((2k-1)!!)^2 / (k! 8^k).
        let series = 1.0
            + inv * (1.0 / 8.0
                + inv * (9.0 / 128.0
                    + inv * (225.0 / 3072.0 + inv * (11025.0 / 98304.0 + inv * 893025.0 / 3932160.0))));
        kappa - 0.5 * (2.0 * PI * kappa).ln() + series.ln()
    }
}

/// Log-density of the von Mises distribution at `theta`.
pub fn von_mises_log_density(theta: f64, mean_dir: f64, kappa: f64) -> f64 {
    kappa * (theta - mean_dir).cos() - (2.0 * PI).ln() - log_bessel_i0(kappa)
}

/// Piecewise approximation of the inverse of A(k) = I1(k)/I0(k).
pub fn kappa_from_rbar(r_bar: f64) -> f64 {
    let r = r_bar.clamp(0.0, 1.0);
    let kappa = if r < 0.53 {
        2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
    } else if r < 0.85 {
        -0.4 + 1.39 * r + 0.43 / (1.0 - r)
    } else {
        let denom = r.powi(3) - 4.0 * r * r + 3.0 * r;
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / denom
        }
    };
    kappa.clamp(0.0, KAPPA_MAX)
}

/// Weighted maximum-likelihood fit: mean direction from the weighted
/// resultant, concentration from the piecewise inverse, clamped to
/// [0, KAPPA_MAX].
pub fn fit_von_mises(angles: &[f64], weights: &[f64]) -> Result<(f64, f64), HmmError> {
    assert_eq!(angles.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(HmmError::ZeroWeight);
    }
    let mut c = 0.0;
    let mut s = 0.0;
    for (&theta, &w) in angles.iter().zip(weights) {
        c += w * theta.cos();
        s += w * theta.sin();
    }
    let r_bar = (c * c + s * s).sqrt() / total;
    let mean_dir = if c == 0.0 && s == 0.0 {
        0.0
    } else {
        crate::features::wrap_angle(s.atan2(c))
    };
    Ok((mean_dir, kappa_from_rbar(r_bar)))
}
