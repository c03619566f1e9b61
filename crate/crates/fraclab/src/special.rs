//! Real Gamma-function helpers on top of `libm`.

use core::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln|Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `sin(πx)` with exact argument reduction, so integers give exact zeros.
pub fn sin_pi(x: f64) -> f64 {
    let mut r = x - 2.0 * libm::round(x / 2.0); // r in [-1, 1]
    let mut sign = 1.0;
    if r < 0.0 {
        r = -r;
        sign = -1.0;
    }
    if r > 0.5 {
        r = 1.0 - r;
    }
    if r == 0.0 {
        return 0.0;
    }
    sign * libm::sin(PI * r)
}

/// `1/Γ(x)` for every real `x`; zero at the poles `0, -1, -2, ...`.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == libm::floor(x) {
        return 0.0;
    }
    if x >= 0.5 {
        if x > 170.0 {
            libm::exp(-ln_gamma(x))
        } else {
            1.0 / gamma(x)
        }
    } else {
        // reflection: 1/Γ(x) = Γ(1-x) sin(πx) / π
        let y = 1.0 - x;
        let s = sin_pi(x) / PI;
        if y > 170.0 {
            s * libm::exp(ln_gamma(y))
        } else {
            s * gamma(y)
        }
    }
}

/// Euler Beta function for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    libm::exp(ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reciprocal_gamma_at_poles_and_negatives() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        // Γ(-0.5) = -2√π
        let want = -1.0 / (2.0 * PI.sqrt());
        assert!((rgamma(-0.5) - want).abs() < 1e-15);
        assert!((rgamma(5.0) - 1.0 / 24.0).abs() < 1e-17);
    }

    #[test]
    fn sin_pi_is_exact_on_integers() {
        for k in -5..5 {
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(-1.5) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn beta_half_half_is_pi() {
        assert!((beta(0.5, 0.5) - PI).abs() < 1e-13);
    }
}
