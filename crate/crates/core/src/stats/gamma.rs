use super::StatsError;

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// P(a, x) by its power series; converges quickly for x < a + 1.
fn lower_series(a: f64, x: f64) -> Result<f64, StatsError> {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    Err(StatsError::NoConvergence)
}

/// Q(a, x) by Lentz's continued fraction; used for x >= a + 1.
fn upper_fraction(a: f64, x: f64) -> Result<f64, StatsError> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h * (-x + a * x.ln() - ln_gamma(a)).exp());
        }
    }
    Err(StatsError::NoConvergence)
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
pub fn regularized_gamma_q(a: f64, x: f64) -> Result<f64, StatsError> {
    if !(x >= 0.0) {
        return Err(StatsError::InvalidX(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let q = if x < a + 1.0 {
        1.0 - lower_series(a, x)?
    } else {
        upper_fraction(a, x)?
    };
    Ok(q.clamp(0.0, 1.0))
}

/// Upper-tail probability of the chi-squared distribution with `df` degrees
/// of freedom.
pub fn chi_squared_sf(x: f64, df: u64) -> Result<f64, StatsError> {
    if df < 1 {
        return Err(StatsError::InvalidDf(df));
    }
    regularized_gamma_q(df as f64 / 2.0, x / 2.0).map_err(|e| match e {
        StatsError::InvalidX(_) => StatsError::InvalidX(x),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..25u32 {
            // Γ(n) = (n-1)!
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((ln_gamma(0.5) - sqrt_pi.ln()).abs() < 1e-13);
        assert!((ln_gamma(1.5) - (sqrt_pi / 2.0).ln()).abs() < 1e-13);
    }

    #[test]
    fn sf_at_zero_is_one() {
        for df in 1..30 {
            assert_eq!(chi_squared_sf(0.0, df).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_forms() {
        // df = 2: sf = exp(-x/2)
        for &x in &[0.1, 1.0, 5.0, 30.0, 200.0] {
            let got = chi_squared_sf(x, 2).unwrap();
            assert!((got - (-x / 2.0f64).exp()).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn critical_values() {
        assert!((chi_squared_sf(3.841, 1).unwrap() - 0.05).abs() < 1e-3);
        assert!((chi_squared_sf(6.6667, 1).unwrap() - 0.0098).abs() < 1e-3);
        assert!((chi_squared_sf(18.467, 4).unwrap() - 0.001).abs() < 1e-5);
    }

    #[test]
    fn errors() {
        assert_eq!(chi_squared_sf(1.0, 0), Err(StatsError::InvalidDf(0)));
        assert!(matches!(chi_squared_sf(-1.0, 3), Err(StatsError::InvalidX(_))));
        assert!(matches!(chi_squared_sf(f64::NAN, 3), Err(StatsError::InvalidX(_))));
        assert_eq!(chi_squared_sf(f64::INFINITY, 3).unwrap(), 0.0);
    }
}
