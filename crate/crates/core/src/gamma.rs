//! Gamma function.
//!
//! Lanczos approximation with g = 7 and 9 coefficients, accurate to better
//! than 1e-14 relative error on the range used by the fractional operators
//! (arguments in (0, 3]).

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (poles at non-positive integers).
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula: gamma(x) gamma(1-x) = pi / sin(pi x).
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

#[cfg(test)]
mod tests {
    use super::gamma;

    // Reference values from an independent implementation (CPython's
    // math.gamma, which wraps the platform tgamma).
    const REFERENCE: [(f64, f64); 18] = [
        (0.1, 9.513507698668732),
        (0.25, 3.6256099082219087),
        (0.4, 2.2181595437576878),
        (0.5, 1.7724538509055159),
        (0.6, 1.4891922488128169),
        (0.75, 1.2254167024651779),
        (0.9, 1.068628702119319),
        (1.0, 1.0),
        (1.2, 0.9181687423997604),
        (1.4, 0.8872638175030755),
        (1.5, 0.886226925452758),
        (1.6, 0.8935153492876903),
        (1.8, 0.9313837709802428),
        (2.0, 1.0),
        (2.2, 1.1018024908797126),
        (2.5, 1.3293403881791372),
        (2.7, 1.5446858458505939),
        (3.0, 2.0),
    ];

    #[test]
    fn matches_reference_to_1e14() {
        for &(x, want) in &REFERENCE {
            let got = gamma(x);
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-14, "gamma({x}) = {got}, want {want}, rel {rel:.2e}");
        }
    }

    #[test]
    fn recurrence_holds() {
        // gamma(x+1) = x gamma(x) across the working interval.
        let mut x = 0.05;
        while x < 2.0 {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert!(
                ((lhs - rhs) / lhs).abs() < 5e-14,
                "recurrence fails at {x}: {lhs} vs {rhs}"
            );
            x += 0.013;
        }
    }

    #[test]
    fn half_integer_closed_forms() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma(0.5) - sqrt_pi).abs() / sqrt_pi < 1e-14);
        assert!((gamma(1.5) - 0.5 * sqrt_pi).abs() < 1e-14);
        assert!((gamma(2.5) - 0.75 * sqrt_pi).abs() < 1e-14);
    }
}
