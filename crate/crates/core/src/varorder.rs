//! Time-dependent fractional order `alpha(t)` and kinetic coefficient `k(t)`.
//!
//! The solver requires `0 < alpha(t) <= 1` and `k(t) > 0` on the whole time
//! interval, plus a mild continuity condition at `t = 0`:
//! `(alpha(t) - alpha(0)) ln t -> 0`. [`check_assumptions`] probes all three
//! conditions on sampled grids and reports violations instead of erroring.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shared scalar function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The order function `alpha(t)` together with its derivative.
///
/// The derivative is carried explicitly because manufacturing source data
/// requires `d/dt [t^{alpha(t)}]`, which involves `alpha'(t)`.
#[derive(Clone)]
pub struct VarOrder {
    alpha: TimeFn,
    alpha_prime: TimeFn,
    /// `alpha(0)`.
    pub alpha0: f64,
    /// `alpha(T)` at the horizon the order was built for.
    pub alpha1: f64,
}

impl VarOrder {
    /// Constant order `alpha(t) = order`.
    ///
    /// No range validation happens here so that out-of-range orders can be
    /// fed to [`check_assumptions`] and show up in its report.
    pub fn constant(order: f64) -> Self {
        VarOrder {
            alpha: Arc::new(move |_| order),
            alpha_prime: Arc::new(|_| 0.0),
            alpha0: order,
            alpha1: order,
        }
    }

    /// Smooth transition from `alpha_start` at `t = 0` to `alpha_end` at
    /// `t = 1`:
    ///
    /// ```text
    /// alpha(t) = alpha_end + (alpha_start - alpha_end) ((1-t) - sin(2 pi (1-t)) / (2 pi))
    /// ```
    ///
    /// The sine term makes `alpha'(0) = alpha'(1) = 0`, so the order settles
    /// flat at both ends of the unit interval.
    pub fn smooth_transition(alpha_start: f64, alpha_end: f64) -> Result<Self> {
        for (name, v) in [("alpha_start", alpha_start), ("alpha_end", alpha_end)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParam {
                    name,
                    reason: format!("{v} is outside (0, 1]"),
                });
            }
        }
        let span = alpha_start - alpha_end;
        let alpha = move |t: f64| {
            let s = 1.0 - t;
            alpha_end + span * (s - (2.0 * PI * s).sin() / (2.0 * PI))
        };
        let alpha_prime = move |t: f64| {
            // d/dt [(1-t) - sin(2 pi (1-t))/(2 pi)] = cos(2 pi (1-t)) - 1
            span * ((2.0 * PI * (1.0 - t)).cos() - 1.0)
        };
        Ok(VarOrder {
            alpha0: alpha(0.0),
            alpha1: alpha(1.0),
            alpha: Arc::new(alpha),
            alpha_prime: Arc::new(alpha_prime),
        })
    }

    /// User-supplied order function and derivative; `horizon` fixes the time
    /// at which `alpha1` is recorded.
    pub fn from_fns<F, G>(alpha: F, alpha_prime: G, horizon: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        VarOrder {
            alpha0: alpha(0.0),
            alpha1: alpha(horizon),
            alpha: Arc::new(alpha),
            alpha_prime: Arc::new(alpha_prime),
        }
    }

    pub fn alpha(&self, t: f64) -> f64 {
        (self.alpha)(t)
    }

    pub fn alpha_prime(&self, t: f64) -> f64 {
        (self.alpha_prime)(t)
    }
}

/// Kinetic coefficient `k(t)` with its sampled lower bound.
#[derive(Clone)]
pub struct Kinetic {
    k: TimeFn,
    /// Minimum of `k` over the sampling grid used at construction.
    pub k_min: f64,
}

impl Kinetic {
    pub fn constant(value: f64) -> Self {
        Kinetic {
            k: Arc::new(move |_| value),
            k_min: value,
        }
    }

    /// Wrap a coefficient function, sampling `[0, horizon]` uniformly to
    /// record the lower bound.
    pub fn from_fn<F>(k: F, horizon: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let samples = 257;
        let mut k_min = f64::INFINITY;
        for i in 0..samples {
            let t = horizon * i as f64 / (samples - 1) as f64;
            k_min = k_min.min(k(t));
        }
        Kinetic {
            k: Arc::new(k),
            k_min,
        }
    }

    pub fn k(&self, t: f64) -> f64 {
        (self.k)(t)
    }
}

/// One failed condition: which check, where, and the offending value.
#[derive(Debug, Clone)]
pub struct Violation {
    pub condition: &'static str,
    pub t: f64,
    pub value: f64,
}

/// Outcome of [`check_assumptions`]; `passed` is true exactly when
/// `violations` is empty.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        AssumptionReport {
            passed: violations.is_empty(),
            violations,
        }
    }
}

pub const COND_ALPHA_RANGE: &str = "0 < alpha(t) <= 1";
pub const COND_K_POSITIVE: &str = "k(t) > 0";
pub const COND_LOG_LIMIT: &str = "(alpha(t) - alpha(0)) ln t -> 0";

/// Probe the standing assumptions on `alpha` and `k` over `[0, horizon]`.
///
/// Bounds are checked on a uniform grid of `samples` points (including both
/// endpoints). The limit condition at `t = 0` has no finite test, so it is
/// checked by a surrogate: on a log-spaced grid `t = 1e-2 .. 1e-12`
/// (scaled by `horizon`), `|(alpha(t) - alpha(0)) ln t|` must be
/// non-increasing over the three smallest samples.
pub fn check_assumptions(
    vo: &VarOrder,
    kinetic: &Kinetic,
    horizon: f64,
    samples: usize,
) -> Result<AssumptionReport> {
    if samples < 16 {
        return Err(Error::InvalidParam {
            name: "samples",
            reason: format!("{samples} < 16"),
        });
    }
    if horizon <= 0.0 {
        return Err(Error::InvalidParam {
            name: "horizon",
            reason: format!("{horizon} <= 0"),
        });
    }

    let mut violations = Vec::new();
    for i in 0..samples {
        let t = horizon * i as f64 / (samples - 1) as f64;
        let a = vo.alpha(t);
        if !(a > 0.0 && a <= 1.0) {
            violations.push(Violation {
                condition: COND_ALPHA_RANGE,
                t,
                value: a,
            });
        }
        let k = kinetic.k(t);
        if !(k > 0.0) {
            violations.push(Violation {
                condition: COND_K_POSITIVE,
                t,
                value: k,
            });
        }
    }

    // Log-spaced grid accumulating at t = 0, exponents -2 down to -12.
    let log_points = samples.max(21);
    let mut magnitudes = Vec::with_capacity(log_points);
    for j in 0..log_points {
        let expo = -2.0 - 10.0 * j as f64 / (log_points - 1) as f64;
        let t = horizon * 10f64.powf(expo);
        let m = ((vo.alpha(t) - vo.alpha0) * t.ln()).abs();
        magnitudes.push((t, m));
        let a = vo.alpha(t);
        if !(a > 0.0 && a <= 1.0) {
            violations.push(Violation {
                condition: COND_ALPHA_RANGE,
                t,
                value: a,
            });
        }
        if !(kinetic.k(t) > 0.0) {
            violations.push(Violation {
                condition: COND_K_POSITIVE,
                t,
                value: kinetic.k(t),
            });
        }
    }
    // The grid above runs from largest t to smallest, so the three smallest
    // samples sit at the tail. Non-increase there (up to roundoff slack) is
    // the testable surrogate for the limit.
    let tail = &magnitudes[log_points - 3..];
    for w in tail.windows(2) {
        let (_, m_larger_t) = w[0];
        let (t_small, m_smaller_t) = w[1];
        if m_smaller_t > m_larger_t + 1e-12 {
            violations.push(Violation {
                condition: COND_LOG_LIMIT,
                t: t_small,
                value: m_smaller_t,
            });
        }
    }

    Ok(AssumptionReport::from_violations(violations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_transition_endpoints() {
        let vo = VarOrder::smooth_transition(0.6, 0.4).unwrap();
        assert!((vo.alpha(0.0) - 0.6).abs() < 1e-15);
        assert!((vo.alpha(1.0) - 0.4).abs() < 1e-15);
        // sin(pi) = 0 and (1-t) = 0.5 make the midpoint exact.
        assert!((vo.alpha(0.5) - 0.5).abs() < 1e-14);
        assert!((vo.alpha0 - 0.6).abs() < 1e-14);
        assert!((vo.alpha1 - 0.4).abs() < 1e-14);
        // Flat at both ends.
        assert!(vo.alpha_prime(0.0).abs() < 1e-14);
        assert!(vo.alpha_prime(1.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_transition_rejects_out_of_range() {
        assert!(VarOrder::smooth_transition(1.5, 0.4).is_err());
        assert!(VarOrder::smooth_transition(0.6, 0.0).is_err());
        assert!(VarOrder::smooth_transition(-0.1, 0.5).is_err());
    }

    #[test]
    fn smooth_transition_degenerates_to_constant() {
        let vo = VarOrder::smooth_transition(0.7, 0.7).unwrap();
        for i in 0..=40 {
            let t = i as f64 / 40.0;
            assert!((vo.alpha(t) - 0.7).abs() < 1e-15);
            assert!(vo.alpha_prime(t).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let vo = VarOrder::smooth_transition(0.6, 0.4).unwrap();
        let eps = 1e-6;
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.01..0.99);
            let fd = (vo.alpha(t + eps) - vo.alpha(t - eps)) / (2.0 * eps);
            assert!(
                (vo.alpha_prime(t) - fd).abs() < 1e-6,
                "derivative mismatch at t={t}"
            );
        }
    }

    #[test]
    fn assumptions_pass_for_transition_family() {
        let vo = VarOrder::smooth_transition(0.6, 0.4).unwrap();
        let k = Kinetic::constant(1.0);
        let report = check_assumptions(&vo, &k, 1.0, 64).unwrap();
        assert!(report.passed, "violations: {:?}", report.violations);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn assumptions_flag_order_above_one() {
        let vo = VarOrder::constant(1.1);
        let k = Kinetic::constant(1.0);
        let report = check_assumptions(&vo, &k, 1.0, 32).unwrap();
        assert!(!report.passed);
        assert!(report
            .violations
            .iter()
            .all(|v| v.condition == COND_ALPHA_RANGE));
    }

    #[test]
    fn assumptions_flag_vanishing_kinetic() {
        let vo = VarOrder::constant(0.5);
        let k = Kinetic::from_fn(|t| t, 1.0);
        let report = check_assumptions(&vo, &k, 1.0, 32).unwrap();
        assert!(!report.passed);
        let near_zero = report
            .violations
            .iter()
            .find(|v| v.condition == COND_K_POSITIVE)
            .expect("k violation recorded");
        assert!(near_zero.t < 1e-2);
    }

    #[test]
    fn samples_precondition() {
        let vo = VarOrder::constant(0.5);
        let k = Kinetic::constant(1.0);
        assert!(check_assumptions(&vo, &k, 1.0, 8).is_err());
    }
}
