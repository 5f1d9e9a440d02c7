//! Quadrature oracles for the continuous variable-order operators.
//!
//! For an order function `alpha(t)` the operators are, with `a = alpha(t)`
//! frozen at the evaluation time,
//!
//! ```text
//! I^{alpha(t)} g (t)      = 1/Gamma(a) * integral_0^t g(s) (t-s)^{a-1} ds
//! D_C^{1-alpha(t)} g (t)  = I^{alpha(t)} g' (t)
//! D_RL^{1-alpha(t)} g (t) = D_C^{1-alpha(t)} g (t) + g(0) t^{a-1} / Gamma(a)
//! ```
//!
//! The integrand is algebraically singular at `s = t` (kernel) and possibly
//! at `s = 0` (data like `g'(s) ~ s^{alpha(0)-1}`). Panels shrink
//! geometrically into both endpoints, Gauss-Legendre handles each panel,
//! and the panel depth doubles until two successive refinements agree to
//! the requested relative tolerance.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::tmesh::pow_guarded;
use crate::varorder::{TimeFn, VarOrder};

/// Scalar function of time, with an optional analytic derivative.
#[derive(Clone)]
pub struct ScalarFn {
    value: TimeFn,
    derivative: Option<TimeFn>,
}

impl ScalarFn {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarFn {
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative<F, G>(value: F, derivative: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarFn {
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn from_arcs(value: TimeFn, derivative: Option<TimeFn>) -> Self {
        ScalarFn { value, derivative }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        match &self.derivative {
            Some(d) => Ok(d(t)),
            None => Err(Error::MissingDerivative),
        }
    }

    fn derivative_fn(&self) -> Result<ScalarFn> {
        match &self.derivative {
            Some(d) => Ok(ScalarFn {
                value: d.clone(),
                derivative: None,
            }),
            None => Err(Error::MissingDerivative),
        }
    }
}

/// Tolerances and budget for the adaptive quadrature.
#[derive(Debug, Clone)]
pub struct QuadConfig {
    /// Relative tolerance on the panel-doubling comparison.
    pub rel_tol: f64,
    /// Hard cap on the panel count per evaluation.
    pub max_panels: usize,
    /// Per-level shrink exponent toward each endpoint: successive panel
    /// widths decrease by the factor `2^grading`.
    pub grading: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-10,
            max_panels: 1 << 16,
            grading: 3.0,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadConfig {
            rel_tol,
            ..QuadConfig::default()
        }
    }
}

const GL_POINTS: usize = 24;

/// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton
/// iteration on the Legendre polynomial.
fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gl_rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Composite rule over `[0, length]` with `levels + 1` panels shrinking
/// geometrically (factor `2^grading` per level) into the origin, where the
/// integrand may be algebraically singular. Gauss-Legendre nodes stay in
/// panel interiors, so the singular point itself is never sampled.
fn integrate_origin_graded<F: Fn(f64) -> f64>(f: &F, length: f64, levels: usize, grading: f64) -> f64 {
    let shrink = (-grading * std::f64::consts::LN_2).exp();
    let mut sum = 0.0;
    let mut hi = length;
    for _ in 0..levels {
        let lo = hi * shrink;
        if hi > lo {
            sum += gl_panel(f, lo, hi);
        }
        hi = lo;
    }
    // Innermost stub touching the origin.
    if hi > 0.0 {
        sum += gl_panel(f, 0.0, hi);
    }
    sum
}

/// Panel-doubling driver: refine the graded stack until two successive
/// composite values agree to `rel_tol` relatively.
fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, length: f64, cfg: &QuadConfig) -> Result<f64> {
    let mut levels = 8usize;
    let mut prev = integrate_origin_graded(f, length, levels, cfg.grading);
    loop {
        levels *= 2;
        if (levels + 1) * 2 > cfg.max_panels {
            return Err(Error::QuadratureStalled {
                panels: levels + 1,
                estimate: f64::NAN,
                target: cfg.rel_tol,
            });
        }
        let cur = integrate_origin_graded(f, length, levels, cfg.grading);
        let diff = (cur - prev).abs();
        if diff <= cfg.rel_tol * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Variable-order fractional integral `I^{alpha(t)} g (t)`.
///
/// The integrand is singular at `s = t` (kernel) and possibly at `s = 0`
/// (data). Splitting at `t/2` and substituting `u = t - s` on the upper half
/// places both singularities at the origin of their half, where panels can
/// shrink indefinitely without losing floating-point resolution.
pub fn frac_integral_vo(g: &ScalarFn, vo: &VarOrder, t: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParam {
            name: "t",
            reason: format!("{t} <= 0"),
        });
    }
    if !(cfg.rel_tol > 0.0) || cfg.max_panels < 8 {
        return Err(Error::InvalidParam {
            name: "quad config",
            reason: format!(
                "rel_tol {} must be positive and max_panels {} at least 8",
                cfg.rel_tol, cfg.max_panels
            ),
        });
    }
    let a = vo.alpha(t);
    let mid = 0.5 * t;
    let lower = |s: f64| g.value(s) * pow_guarded(t - s, a - 1.0);
    let upper = |u: f64| g.value(t - u) * pow_guarded(u, a - 1.0);
    let raw =
        integrate_adaptive(&lower, mid, cfg)? + integrate_adaptive(&upper, t - mid, cfg)?;
    Ok(raw / gamma(a))
}

/// Variable-order Caputo derivative of order `1 - alpha(t)`: the fractional
/// integral applied to `g'`.
pub fn caputo_vo(g: &ScalarFn, vo: &VarOrder, t: f64, cfg: &QuadConfig) -> Result<f64> {
    let dg = g.derivative_fn()?;
    frac_integral_vo(&dg, vo, t, cfg)
}

/// Variable-order Riemann-Liouville derivative of order `1 - alpha(t)`:
/// Caputo plus the initial-value term `g(0) t^{alpha(t)-1} / Gamma(alpha(t))`.
pub fn riemann_liouville_vo(g: &ScalarFn, vo: &VarOrder, t: f64, cfg: &QuadConfig) -> Result<f64> {
    let c = caputo_vo(g, vo, t, cfg)?;
    let a = vo.alpha(t);
    Ok(c + g.value(0.0) * t.powf(a - 1.0) / gamma(a))
}
