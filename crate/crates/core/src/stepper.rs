//! The fully discrete scheme: implicit Euler in time coupled with the
//! discrete fractional memory term, marching `u_h^0 .. u_h^N`.
//!
//! At step `n` the scheme solves, with `a_n = alpha(t_n)`,
//! `A_n = k(t_n) / Gamma(1 + a_n)` and weights `b^n_k`,
//!
//! ```text
//! [ (1/tau_n) M + A + A_n b^n_n M ] u^n
//!     = M [ (1/tau_n) u^{n-1} + A_n ( sum_{k<n} (b^n_{k+1} - b^n_k) u^k + b^n_1 u^0 ) ]
//!       - k(t_n) t_n^{a_n - 1} / Gamma(a_n) * (u_0, phi)
//!       + (f(., t_n), phi)
//! ```
//!
//! The history sum is accumulated into a single coefficient vector so each
//! step performs one mass matvec regardless of `n`. The initial state is the
//! Ritz projection of `u_0`, while the memory source term pairs the exact
//! `u_0` in the load integral.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femspace::{
    assemble_lumped_mass, assemble_mass, assemble_stiffness, interpolate, load_vector,
    ritz_project, DiffusionTensor, FieldVector, ScalarField, SpatialMesh,
};
use crate::gamma::gamma;
use crate::sparsela::{cg_solve, tri_solve, CsrMatrix, SolverConfig};
use crate::tmesh::{weight_row, TimeMesh, WeightCache, WeightRow};
use crate::varorder::{check_assumptions, Kinetic, VarOrder};

/// Right-hand side `f(x, t)`.
#[derive(Clone)]
pub enum SourceTerm {
    Zero,
    /// `f(x, t) = factor(t) * profile(x)`: the load vector of `profile` is
    /// assembled once and rescaled per step.
    Separable {
        factor: TimeFactor,
        profile: ScalarField,
    },
    /// Arbitrary space-time source; its load vector is assembled by
    /// quadrature at every step.
    General(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>),
}

/// Time factor of a separable source: a function, or values pre-tabulated at
/// the mesh nodes `t_0 .. t_N`.
#[derive(Clone)]
pub enum TimeFactor {
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Sampled(Vec<f64>),
}

/// Full problem description for one solve.
#[derive(Clone)]
pub struct ProblemSpec {
    pub vo: VarOrder,
    pub kinetic: Kinetic,
    pub diffusion: DiffusionTensor,
    pub initial: ScalarField,
    pub source: SourceTerm,
    pub mesh_t: TimeMesh,
    pub mesh_x: SpatialMesh,
}

/// Spatial realization of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialScheme {
    /// Exact P1 mass matrix and quadrature loads.
    Consistent,
    /// Row-sum lumped mass with collocated (nodal) loads: the classic
    /// finite-difference-like variant. With weak diffusion its nodal error
    /// is driven only by the stiffness consistency term, which is how
    /// published convergence tables for this problem family are produced.
    LumpedCollocation,
    /// Row-sum lumped mass with quadrature loads.
    LumpedQuadrature,
}

#[derive(Clone, Debug)]
pub struct StepperOptions {
    pub solver: SolverConfig,
    pub scheme: SpatialScheme,
    /// Precompute all weight rows instead of recomputing one per step.
    pub cache_weights: bool,
    /// Use the Thomas solver for the tridiagonal 1D systems.
    pub direct_1d: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions {
            solver: SolverConfig::default(),
            scheme: SpatialScheme::Consistent,
            cache_weights: false,
            direct_1d: false,
        }
    }
}

/// Mass operator in either realization.
pub enum MassOperator {
    Consistent(CsrMatrix),
    Lumped(Vec<f64>),
}

impl MassOperator {
    pub fn n_rows(&self) -> usize {
        match self {
            MassOperator::Consistent(m) => m.n_rows,
            MassOperator::Lumped(d) => d.len(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            MassOperator::Consistent(m) => m.matvec(x),
            MassOperator::Lumped(d) => d.iter().zip(x).map(|(m, v)| m * v).collect(),
        }
    }

    /// `stiffness + coef * M`.
    pub fn system_matrix(&self, stiffness: &CsrMatrix, coef: f64) -> CsrMatrix {
        match self {
            MassOperator::Consistent(m) => {
                CsrMatrix::linear_combination(&[(1.0, stiffness), (coef, m)])
            }
            MassOperator::Lumped(d) => stiffness.add_scaled_diagonal(d, coef),
        }
    }
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiag {
    pub iterations: usize,
    pub residual: f64,
}

/// Full time history with diagnostics.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    /// States `u_h^0 .. u_h^N`.
    pub states: Vec<FieldVector>,
    pub per_step: Vec<StepDiag>,
    pub wall_time: Duration,
}

/// Operators and cached loads for one [`ProblemSpec`].
pub struct Assembled {
    pub mass: MassOperator,
    pub stiffness: CsrMatrix,
    /// Ritz projection of the initial datum (the discrete initial state).
    pub u0_coeffs: FieldVector,
    /// Load of the initial datum: `(u_0, phi_i)` under the consistent
    /// scheme, `m_i u_0(x_i)` under lumped collocation.
    pub u0_load: FieldVector,
    source: SourceLoads,
    weights: Option<WeightCache>,
}

enum SourceLoads {
    Zero,
    Separable {
        base: Vec<f64>,
        factor: TimeFactor,
    },
    General {
        f: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
        scheme: SpatialScheme,
    },
}

/// Load vector of a spatial function under the chosen scheme: quadrature
/// pairing for the consistent realization, `m_i f(x_i)` for collocation.
fn scheme_load<F>(mesh: &SpatialMesh, scheme: SpatialScheme, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    match scheme {
        SpatialScheme::Consistent | SpatialScheme::LumpedQuadrature => load_vector(mesh, f),
        SpatialScheme::LumpedCollocation => {
            let lumped = assemble_lumped_mass(mesh);
            interpolate(mesh, f)
                .into_iter()
                .zip(lumped)
                .map(|(v, m)| m * v)
                .collect()
        }
    }
}

impl Assembled {
    /// Load vector of the source at node `t_n`.
    pub fn source_load(&self, spec: &ProblemSpec, n: usize) -> Result<Vec<f64>> {
        let dof = self.mass.n_rows();
        match &self.source {
            SourceLoads::Zero => Ok(vec![0.0; dof]),
            SourceLoads::Separable { base, factor } => {
                let c = match factor {
                    TimeFactor::Function(f) => f(spec.mesh_t.node(n)),
                    TimeFactor::Sampled(values) => {
                        if values.len() != spec.mesh_t.steps + 1 {
                            return Err(Error::HistoryLength {
                                got: values.len(),
                                expected: spec.mesh_t.steps + 1,
                            });
                        }
                        values[n]
                    }
                };
                Ok(base.iter().map(|&v| c * v).collect())
            }
            SourceLoads::General { f, scheme } => {
                let t = spec.mesh_t.node(n);
                Ok(scheme_load(&spec.mesh_x, *scheme, |x| f(x, t)))
            }
        }
    }

    pub fn weight_row_for(&self, spec: &ProblemSpec, n: usize) -> Result<WeightRow> {
        match &self.weights {
            Some(cache) => Ok(cache.row(n).clone()),
            None => weight_row(&spec.mesh_t, &spec.vo, n),
        }
    }
}

/// Validate a problem and assemble its operators and static load vectors.
pub fn assemble(spec: &ProblemSpec, opts: &StepperOptions) -> Result<Assembled> {
    let report = check_assumptions(&spec.vo, &spec.kinetic, spec.mesh_t.horizon, 64)?;
    if !report.passed {
        let first = &report.violations[0];
        return Err(Error::Config(format!(
            "order/kinetic assumptions violated: {} at t={:.3e} (value {:.3e})",
            first.condition, first.t, first.value
        )));
    }
    // Homogeneous Dirichlet data: the initial state must vanish on the
    // boundary vertices.
    for (v, idx) in spec.mesh_x.interior_index.iter().enumerate() {
        if idx.is_none() {
            let x = &spec.mesh_x.vertices[v][..spec.mesh_x.dim];
            let val = spec.initial.value(x);
            if val.abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "initial datum does not vanish on the boundary: u0({x:?}) = {val:.3e}"
                )));
            }
        }
    }

    let mass = match opts.scheme {
        SpatialScheme::Consistent => MassOperator::Consistent(assemble_mass(&spec.mesh_x)),
        SpatialScheme::LumpedCollocation | SpatialScheme::LumpedQuadrature => {
            MassOperator::Lumped(assemble_lumped_mass(&spec.mesh_x))
        }
    };
    let stiffness = assemble_stiffness(&spec.mesh_x, &spec.diffusion);
    let u0_coeffs = initial_state(spec)?;
    let u0_load = scheme_load(&spec.mesh_x, opts.scheme, |x| spec.initial.value(x));
    let source = match &spec.source {
        SourceTerm::Zero => SourceLoads::Zero,
        SourceTerm::Separable { factor, profile } => SourceLoads::Separable {
            base: scheme_load(&spec.mesh_x, opts.scheme, |x| profile.value(x)),
            factor: factor.clone(),
        },
        SourceTerm::General(f) => SourceLoads::General {
            f: f.clone(),
            scheme: opts.scheme,
        },
    };
    let weights = if opts.cache_weights {
        Some(WeightCache::build(&spec.mesh_t, &spec.vo)?)
    } else {
        None
    };
    Ok(Assembled {
        mass,
        stiffness,
        u0_coeffs,
        u0_load,
        source,
        weights,
    })
}

/// Discrete initial state: the Ritz projection of the initial datum.
pub fn initial_state(spec: &ProblemSpec) -> Result<FieldVector> {
    ritz_project(
        &spec.mesh_x,
        &spec.diffusion,
        &spec.initial,
        // The projection feeds every later step; keep it tighter than the
        // per-step tolerance.
        1e-13,
    )
}

/// One step of the scheme on explicit operators.
///
/// `states` must hold `u^0 .. u^{n-1}`; returns `u^n`. This operator-level
/// entry point is what [`solve_all`] loops over and what the spectral
/// reference solver is checked against.
#[allow(clippy::too_many_arguments)]
pub fn step_operators(
    mesh_t: &TimeMesh,
    kinetic: &Kinetic,
    mass: &MassOperator,
    stiffness: &CsrMatrix,
    u0_coeffs: &[f64],
    u0_load: &[f64],
    source_load: &[f64],
    states: &[FieldVector],
    row: &WeightRow,
    opts: &StepperOptions,
) -> Result<(FieldVector, StepDiag)> {
    let n = row.step;
    if states.len() != n {
        return Err(Error::HistoryLength {
            got: states.len(),
            expected: n,
        });
    }
    let dof = mass.n_rows();
    let t_n = mesh_t.node(n);
    let tau_n = mesh_t.tau(n);
    let k_n = kinetic.k(t_n);
    if !(k_n > 0.0) {
        return Err(Error::Config(format!(
            "kinetic coefficient must stay positive: k({t_n}) = {k_n}"
        )));
    }
    let alpha_n = row.alpha_n;
    let b_last = *row.weights.last().expect("weight row is non-empty");
    debug_assert!(b_last > 0.0);
    let a_n = k_n / gamma(1.0 + alpha_n);
    let inv_tau = 1.0 / tau_n;

    // System matrix: A + (1/tau_n + A_n b^n_n) M. Positive coefficients on
    // SPD terms keep the system SPD.
    let system = mass.system_matrix(stiffness, inv_tau + a_n * b_last);

    // Memory accumulation: z = (1/tau_n) u^{n-1} + A_n (b_1 u^0 + sum diffs u^k).
    let mut z = vec![0.0; dof];
    let b1 = row.weights[0];
    let u_prev = &states[n - 1];
    let u_zero = &states[0];
    let chunk = 4096.max(dof / (8 * rayon::current_num_threads().max(1)) + 1);
    z.par_chunks_mut(chunk).enumerate().for_each(|(ci, out)| {
        let lo = ci * chunk;
        let hi = lo + out.len();
        for (o, j) in out.iter_mut().zip(lo..hi) {
            *o = inv_tau * u_prev[j] + a_n * b1 * u_zero[j];
        }
        for k in 1..n {
            let w = a_n * (row.weights[k] - row.weights[k - 1]);
            let uk = &states[k][lo..hi];
            for (o, v) in out.iter_mut().zip(uk) {
                *o += w * v;
            }
        }
    });

    let mut rhs = mass.matvec(&z);
    let memory_source = k_n * t_n.powf(alpha_n - 1.0) / gamma(alpha_n);
    for i in 0..dof {
        rhs[i] += source_load[i] - memory_source * u0_load[i];
    }
    // Unused directly, but the discrete scheme is only meaningful with the
    // projected initial state present in `states[0]`.
    debug_assert_eq!(u0_coeffs.len(), dof);

    let (u_next, iterations) = if opts.direct_1d {
        if let Some(tri) = system.to_tridiagonal() {
            (tri_solve(&tri, &rhs)?, 0)
        } else {
            cg_solve(&system, &rhs, &opts.solver)?
        }
    } else {
        cg_solve(&system, &rhs, &opts.solver)?
    };

    let residual = {
        let ax = system.matvec(&u_next);
        let mut rr = 0.0;
        let mut bb = 0.0;
        for i in 0..dof {
            let d = rhs[i] - ax[i];
            rr += d * d;
            bb += rhs[i] * rhs[i];
        }
        if bb == 0.0 {
            0.0
        } else {
            (rr / bb).sqrt()
        }
    };
    Ok((
        u_next,
        StepDiag {
            iterations,
            residual,
        },
    ))
}

/// One step of the assembled problem: `states` holds `u^0 .. u^{n-1}`.
pub fn step(
    spec: &ProblemSpec,
    asm: &Assembled,
    states: &[FieldVector],
    n: usize,
    opts: &StepperOptions,
) -> Result<(FieldVector, StepDiag)> {
    if n < 1 || n > spec.mesh_t.steps {
        return Err(Error::StepIndex {
            index: n,
            max: spec.mesh_t.steps,
        });
    }
    let row = asm.weight_row_for(spec, n)?;
    let source_load = asm.source_load(spec, n)?;
    step_operators(
        &spec.mesh_t,
        &spec.kinetic,
        &asm.mass,
        &asm.stiffness,
        &asm.u0_coeffs,
        &asm.u0_load,
        &source_load,
        states,
        &row,
        opts,
    )
}

/// March the full scheme and record every state.
pub fn solve_all(spec: &ProblemSpec, opts: &StepperOptions) -> Result<SolveRecord> {
    let start = Instant::now();
    let asm = assemble(spec, opts)?;
    let n_steps = spec.mesh_t.steps;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(asm.u0_coeffs.clone());
    let mut per_step = Vec::with_capacity(n_steps);
    for n in 1..=n_steps {
        let (u, diag) = step(spec, &asm, &states, n, opts)?;
        states.push(u);
        per_step.push(diag);
    }
    Ok(SolveRecord {
        states,
        per_step,
        wall_time: start.elapsed(),
    })
}
