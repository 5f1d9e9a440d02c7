//! Temporal meshes and the discrete variable-order fractional operator.
//!
//! Nodes follow `t_n = T (n/N)^r`; `r = 1` is the uniform partition and
//! `r > 1` concentrates nodes near `t = 0` where solutions with
//! `alpha(0) < 1` are singular. The discrete operator is the L1-type sum
//!
//! ```text
//! delta^{1-alpha(t_n)} g = 1/Gamma(1+alpha(t_n)) * sum_k b^n_k (g_k - g_{k-1})
//! ```
//!
//! with convolution weights
//! `b^n_k = ((t_n - t_{k-1})^{alpha(t_n)} - (t_n - t_k)^{alpha(t_n)}) / tau_k`.

use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::varorder::VarOrder;

/// Graded partition of `[0, T]`.
#[derive(Debug, Clone)]
pub struct TimeMesh {
    /// Final time `T`.
    pub horizon: f64,
    /// Number of steps `N`.
    pub steps: usize,
    /// Grading exponent `r >= 1`.
    pub grading: f64,
    /// Nodes `t_0 .. t_N`.
    pub nodes: Vec<f64>,
    /// Step sizes `tau_1 .. tau_N` (length `N`).
    pub taus: Vec<f64>,
}

impl TimeMesh {
    /// Build `t_n = T (n/N)^r`.
    pub fn graded(horizon: f64, steps: usize, grading: f64) -> Result<Self> {
        if horizon <= 0.0 {
            return Err(Error::InvalidParam {
                name: "horizon",
                reason: format!("{horizon} <= 0"),
            });
        }
        if steps == 0 {
            return Err(Error::InvalidParam {
                name: "steps",
                reason: "0 steps".into(),
            });
        }
        if !(grading >= 1.0) {
            return Err(Error::InvalidParam {
                name: "grading",
                reason: format!("{grading} < 1"),
            });
        }
        let n_f = steps as f64;
        let nodes: Vec<f64> = (0..=steps)
            .map(|n| horizon * (n as f64 / n_f).powf(grading))
            .collect();
        let taus: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        debug_assert!(taus.iter().all(|&t| t > 0.0));
        Ok(TimeMesh {
            horizon,
            steps,
            grading,
            nodes,
            taus,
        })
    }

    /// Uniform partition (`r = 1`).
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        TimeMesh::graded(horizon, steps, 1.0)
    }

    /// Node `t_n`, `0 <= n <= N`.
    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// Step size `tau_n`, `1 <= n <= N`.
    pub fn tau(&self, n: usize) -> f64 {
        self.taus[n - 1]
    }
}

/// `x^a` with the `x = 0` case pinned to zero for positive exponents.
///
/// Graded meshes make `t_n - t_k` span many orders of magnitude; `powf`
/// handles the tiny-base cases, and the guard keeps `0^a` from producing
/// NaN when `a` could be 0 in degenerate call sites.
#[inline]
pub(crate) fn pow_guarded(x: f64, a: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(a)
    }
}

/// `(x + step)^a - x^a` without cancellation: `x^a expm1(a ln1p(step/x))`.
///
/// The subtractive form loses most of its digits when `step << x`, which is
/// exactly the regime of late-step weights on graded meshes.
#[inline]
fn pow_diff(x: f64, step: f64, a: f64) -> f64 {
    if x == 0.0 {
        step.powf(a)
    } else {
        x.powf(a) * (a * (step / x).ln_1p()).exp_m1()
    }
}

/// One row of convolution weights `b^n_1 .. b^n_n` at step `n`.
#[derive(Debug, Clone)]
pub struct WeightRow {
    /// Step index `n`.
    pub step: usize,
    /// `alpha(t_n)`.
    pub alpha_n: f64,
    /// Weights `b^n_k`, `k = 1..=n` (index `k-1`).
    pub weights: Vec<f64>,
}

/// Compute the weight row for step `n` (`1 <= n <= N`).
///
/// The last weight uses the exact form `tau_n^{alpha_n - 1}`; the
/// subtractive formula would cancel there.
pub fn weight_row(mesh: &TimeMesh, vo: &VarOrder, n: usize) -> Result<WeightRow> {
    if n < 1 || n > mesh.steps {
        return Err(Error::StepIndex {
            index: n,
            max: mesh.steps,
        });
    }
    let t_n = mesh.node(n);
    let alpha_n = vo.alpha(t_n);
    let mut weights = Vec::with_capacity(n);
    for k in 1..n {
        // (t_n - t_{k-1})^a - (t_n - t_k)^a over tau_k.
        weights.push(pow_diff(t_n - mesh.node(k), mesh.tau(k), alpha_n) / mesh.tau(k));
    }
    weights.push(pow_guarded(mesh.tau(n), alpha_n - 1.0));
    Ok(WeightRow {
        step: n,
        alpha_n,
        weights,
    })
}

/// All weight rows precomputed, for repeated marches over the same mesh.
#[derive(Debug, Clone)]
pub struct WeightCache {
    rows: Vec<WeightRow>,
}

impl WeightCache {
    pub fn build(mesh: &TimeMesh, vo: &VarOrder) -> Result<Self> {
        let rows = (1..=mesh.steps)
            .map(|n| weight_row(mesh, vo, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightCache { rows })
    }

    pub fn row(&self, n: usize) -> &WeightRow {
        &self.rows[n - 1]
    }
}

/// Apply the discrete operator to a scalar history `g(t_0) .. g(t_n)`.
pub fn discrete_caputo(history: &[f64], mesh: &TimeMesh, vo: &VarOrder, n: usize) -> Result<f64> {
    let row = weight_row(mesh, vo, n)?;
    apply_weight_row(history, &row)
}

/// Same as [`discrete_caputo`] with a precomputed row.
pub fn apply_weight_row(history: &[f64], row: &WeightRow) -> Result<f64> {
    let n = row.step;
    if history.len() != n + 1 {
        return Err(Error::HistoryLength {
            got: history.len(),
            expected: n + 1,
        });
    }
    let mut sum = 0.0;
    for k in 1..=n {
        sum += row.weights[k - 1] * (history[k] - history[k - 1]);
    }
    Ok(sum / gamma(1.0 + row.alpha_n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::{caputo_vo, QuadConfig, ScalarFn};
    use rand::{Rng, SeedableRng};

    #[test]
    fn uniform_nodes() {
        let mesh = TimeMesh::graded(1.0, 4, 1.0).unwrap();
        let want = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (got, want) in mesh.nodes.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn graded_nodes() {
        let mesh = TimeMesh::graded(1.0, 4, 2.0).unwrap();
        let want = [0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0];
        for (got, want) in mesh.nodes.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        let mesh = TimeMesh::graded(2.0, 2, 3.0).unwrap();
        let want = [0.0, 0.25, 2.0];
        for (got, want) in mesh.nodes.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TimeMesh::graded(1.0, 0, 1.0).is_err());
        assert!(TimeMesh::graded(1.0, 4, 0.5).is_err());
        assert!(TimeMesh::graded(0.0, 4, 1.0).is_err());
    }

    #[test]
    fn grading_one_is_uniform_nodewise() {
        let graded = TimeMesh::graded(2.5, 17, 1.0).unwrap();
        for (n, &t) in graded.nodes.iter().enumerate() {
            let uniform = 2.5 * n as f64 / 17.0;
            assert!((t - uniform).abs() <= 1e-15 * 2.5);
        }
    }

    #[test]
    fn step_bound_inequality() {
        // r T (n-1)^{r-1} / N^r <= tau_n <= r T n^{r-1} / N^r
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let steps = rng.random_range(1..=64usize);
            let r: f64 = rng.random_range(1.0..5.0);
            let horizon: f64 = rng.random_range(0.5..3.0);
            let mesh = TimeMesh::graded(horizon, steps, r).unwrap();
            let n_pow = (steps as f64).powf(r);
            for n in 1..=steps {
                let tau = mesh.tau(n);
                let lo = r * horizon * ((n - 1) as f64).powf(r - 1.0) / n_pow;
                let hi = r * horizon * (n as f64).powf(r - 1.0) / n_pow;
                assert!(
                    lo <= tau * (1.0 + 1e-12) && tau <= hi * (1.0 + 1e-12),
                    "tau bound fails: N={steps} r={r} n={n}: {lo} <= {tau} <= {hi}"
                );
            }
        }
    }

    #[test]
    fn weights_for_constant_order_one_are_unit() {
        let mesh = TimeMesh::graded(1.0, 6, 2.5).unwrap();
        let vo = VarOrder::constant(1.0);
        for n in 1..=6 {
            let row = weight_row(&mesh, &vo, n).unwrap();
            for &b in &row.weights {
                assert!((b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_step_weight_is_exact_power() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let vo = VarOrder::constant(0.5);
        let row = weight_row(&mesh, &vo, 1).unwrap();
        assert_eq!(row.weights.len(), 1);
        assert!((row.weights[0] - 2.0).abs() < 1e-14); // 0.25^{-0.5}
    }

    #[test]
    fn two_step_weights_match_direct_evaluation() {
        // Independently computed: b^2_1 = (1 - sqrt(0.5))/0.5 = 2 - sqrt(2),
        // b^2_2 = sqrt(2).
        let mesh = TimeMesh::uniform(1.0, 2).unwrap();
        let vo = VarOrder::constant(0.5);
        let row = weight_row(&mesh, &vo, 2).unwrap();
        let sqrt2 = std::f64::consts::SQRT_2;
        assert!((row.weights[0] - (2.0 - sqrt2)).abs() < 1e-14);
        assert!((row.weights[1] - sqrt2).abs() < 1e-14);
    }

    #[test]
    fn weight_row_index_errors() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let vo = VarOrder::constant(0.5);
        assert!(weight_row(&mesh, &vo, 0).is_err());
        assert!(weight_row(&mesh, &vo, 5).is_err());
    }

    #[test]
    fn weight_monotonicity_and_sandwich() {
        // b^n_n = tau_n^{alpha-1} > ... > b^n_1 > 0 and the mean-value
        // bounds, on random meshes and order families.
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        for case in 0..200 {
            let steps = rng.random_range(1..=64usize);
            let r: f64 = rng.random_range(1.0..5.0);
            let mesh = TimeMesh::graded(1.0, steps, r).unwrap();
            let vo = match case % 3 {
                0 => VarOrder::constant(rng.random_range(0.05..1.0)),
                1 => VarOrder::smooth_transition(
                    rng.random_range(0.1..1.0),
                    rng.random_range(0.1..1.0),
                )
                .unwrap(),
                _ => VarOrder::constant(1.0),
            };
            let n = rng.random_range(1..=steps);
            let row = weight_row(&mesh, &vo, n).unwrap();
            let t_n = mesh.node(n);
            let a = row.alpha_n;

            let bn_exact = mesh.tau(n).powf(a - 1.0);
            let last = *row.weights.last().unwrap();
            assert!(((last - bn_exact) / bn_exact).abs() < 1e-12);

            for k in 1..=n {
                let b = row.weights[k - 1];
                assert!(b > 0.0);
                if k > 1 {
                    assert!(
                        row.weights[k - 2] < b * (1.0 + 1e-13),
                        "weights not increasing at n={n} k={k}"
                    );
                }
                if k < n {
                    let lo = a * (t_n - mesh.node(k - 1)).powf(a - 1.0);
                    let hi = a * (t_n - mesh.node(k)).powf(a - 1.0);
                    assert!(
                        lo <= b * (1.0 + 1e-12) && b <= hi * (1.0 + 1e-12),
                        "sandwich fails at n={n} k={k}: {lo} <= {b} <= {hi}"
                    );
                }
            }
        }
    }

    #[test]
    fn discrete_operator_vanishes_on_constants() {
        let mesh = TimeMesh::graded(1.0, 8, 3.0).unwrap();
        let vo = VarOrder::smooth_transition(0.6, 0.4).unwrap();
        let history = vec![2.75; 9];
        for n in 1..=8 {
            let v = discrete_caputo(&history[..=n], &mesh, &vo, n).unwrap();
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_operator_exact_on_linear_data() {
        // For g(t) = c0 + c1 t the sum telescopes to
        // c1 t_n^{alpha_n} / Gamma(1 + alpha_n), the exact operator value.
        let mut rng = rand::rngs::StdRng::seed_from_u64(37);
        for _ in 0..50 {
            let steps = rng.random_range(1..=48usize);
            let r: f64 = rng.random_range(1.0..4.0);
            let mesh = TimeMesh::graded(1.0, steps, r).unwrap();
            let vo =
                VarOrder::smooth_transition(rng.random_range(0.2..1.0), rng.random_range(0.2..1.0))
                    .unwrap();
            let c0: f64 = rng.random_range(-2.0..2.0);
            let c1: f64 = rng.random_range(-2.0..2.0);
            let history: Vec<f64> = mesh.nodes.iter().map(|&t| c0 + c1 * t).collect();
            let n = rng.random_range(1..=steps);
            let got = discrete_caputo(&history[..=n], &mesh, &vo, n).unwrap();
            let t_n = mesh.node(n);
            let a = vo.alpha(t_n);
            let want = c1 * t_n.powf(a) / gamma(1.0 + a);
            assert!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "linear exactness fails: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn history_length_is_checked() {
        let mesh = TimeMesh::uniform(1.0, 4).unwrap();
        let vo = VarOrder::constant(0.5);
        let history = vec![0.0; 4];
        assert!(matches!(
            discrete_caputo(&history, &mesh, &vo, 4),
            Err(Error::HistoryLength { got: 4, expected: 5 })
        ));
    }

    #[test]
    fn matches_quadrature_oracle_on_quadratic() {
        // g(t) = t^2, constant order 0.5, uniform mesh: the discrete value
        // at t = 1 approaches the continuous Caputo operator.
        let mesh = TimeMesh::uniform(1.0, 64).unwrap();
        let vo = VarOrder::constant(0.5);
        let history: Vec<f64> = mesh.nodes.iter().map(|&t| t * t).collect();
        let got = discrete_caputo(&history, &mesh, &vo, 64).unwrap();
        let g = ScalarFn::with_derivative(|t| t * t, |t| 2.0 * t);
        let want = caputo_vo(&g, &vo, 1.0, &QuadConfig::default()).unwrap();
        assert!(
            (got - want).abs() < 2e-3,
            "discrete {got} vs quadrature {want}"
        );
    }

    #[test]
    fn weight_cache_matches_rows() {
        let mesh = TimeMesh::graded(1.0, 12, 2.0).unwrap();
        let vo = VarOrder::smooth_transition(0.8, 0.5).unwrap();
        let cache = WeightCache::build(&mesh, &vo).unwrap();
        for n in 1..=12 {
            let row = weight_row(&mesh, &vo, n).unwrap();
            assert_eq!(cache.row(n).weights, row.weights);
        }
    }
}
