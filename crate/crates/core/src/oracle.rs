//! Spectral reference solver.
//!
//! For constant diagonal diffusion on the unit box the operator
//! `-div(K grad .)` has eigenfunctions `prod_j sqrt(2) sin(i_j pi x_j)` with
//! eigenvalues `lambda = sum_j K_jj (i_j pi)^2`. Expanding in that basis
//! turns the PDE into independent scalar problems
//!
//! ```text
//! c' + k(t) D_RL^{1-alpha(t)} c + lambda c = f_i(t),   c(0) = (u_0, phi_i),
//! ```
//!
//! which this module marches with the same temporal discretization at a much
//! finer resolution, providing a cross-check on the finite element path that
//! carries no spatial error.

use crate::error::{Error, Result};
use crate::femspace::{quadrature::rule_degree4, DiffusionTensor, SpatialMesh};
use crate::gamma::gamma;
use crate::tmesh::{weight_row, TimeMesh};
use crate::varorder::{Kinetic, VarOrder};

/// One tensor-product sine mode.
#[derive(Debug, Clone)]
pub struct Mode {
    /// Frequency index per axis.
    pub index: Vec<usize>,
    /// `sum_j K_jj (i_j pi)^2`.
    pub eigenvalue: f64,
}

impl Mode {
    /// Build a mode for a constant diagonal tensor; errors on variable or
    /// non-diagonal diffusion.
    pub fn new(index: &[usize], diffusion: &DiffusionTensor) -> Result<Mode> {
        let diag = diffusion
            .as_constant_diagonal()
            .ok_or(Error::OracleUnavailable)?;
        if index.is_empty() || index.len() > 3 || index.contains(&0) {
            return Err(Error::InvalidParam {
                name: "index",
                reason: format!("{index:?} must hold 1..=3 positive frequencies"),
            });
        }
        let pi = std::f64::consts::PI;
        let eigenvalue = index
            .iter()
            .zip(diag)
            .map(|(&i, k)| k * (i as f64 * pi).powi(2))
            .sum();
        Ok(Mode {
            index: index.to_vec(),
            eigenvalue,
        })
    }

    /// L2-normalized eigenfunction `prod_j sqrt(2) sin(i_j pi x_j)`.
    pub fn eigenfunction(&self, x: &[f64]) -> f64 {
        let pi = std::f64::consts::PI;
        self.index
            .iter()
            .zip(x)
            .map(|(&i, &xj)| 2.0f64.sqrt() * (i as f64 * pi * xj).sin())
            .product()
    }
}

/// Scalar coefficient history on a fine temporal mesh.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub mesh: TimeMesh,
    /// Coefficients `c(t_0) .. c(t_N)`; `c(t_0)` is the initial coefficient.
    pub coefficients: Vec<f64>,
}

/// March the scalar mode equation with sampled source values
/// (`f_values[n] = f_i(t_n)`, entry 0 unused).
pub fn mode_solve_sampled(
    mode: &Mode,
    vo: &VarOrder,
    kinetic: &Kinetic,
    u0_coeff: f64,
    f_values: &[f64],
    mesh: &TimeMesh,
) -> Result<ModeSolution> {
    if f_values.len() != mesh.steps + 1 {
        return Err(Error::HistoryLength {
            got: f_values.len(),
            expected: mesh.steps + 1,
        });
    }
    let lambda = mode.eigenvalue;
    let mut c = Vec::with_capacity(mesh.steps + 1);
    c.push(u0_coeff);
    for n in 1..=mesh.steps {
        let row = weight_row(mesh, vo, n)?;
        let t_n = mesh.node(n);
        let tau_n = mesh.tau(n);
        let k_n = kinetic.k(t_n);
        let a_n = k_n / gamma(1.0 + row.alpha_n);
        let b_last = row.weights[n - 1];
        // Memory: b_1 c^0 + sum_{k<n} (b_{k+1} - b_k) c^k.
        let mut hist = row.weights[0] * c[0];
        for k in 1..n {
            hist += (row.weights[k] - row.weights[k - 1]) * c[k];
        }
        let memory_source = k_n * t_n.powf(row.alpha_n - 1.0) / gamma(row.alpha_n) * u0_coeff;
        let rhs = c[n - 1] / tau_n + a_n * hist - memory_source + f_values[n];
        let denom = 1.0 / tau_n + lambda + a_n * b_last;
        c.push(rhs / denom);
    }
    Ok(ModeSolution {
        mesh: mesh.clone(),
        coefficients: c,
    })
}

/// March the scalar mode equation on a fine graded mesh.
///
/// `n_fine` must be at least 1024: the oracle referees coarser runs by
/// resolution, not by a different discretization.
pub fn mode_solve<F>(
    mode: &Mode,
    vo: &VarOrder,
    kinetic: &Kinetic,
    u0_coeff: f64,
    f_coeff: F,
    n_fine: usize,
    r_fine: f64,
    horizon: f64,
) -> Result<ModeSolution>
where
    F: Fn(f64) -> f64,
{
    if n_fine < 1024 {
        return Err(Error::InvalidParam {
            name: "n_fine",
            reason: format!("{n_fine} < 1024"),
        });
    }
    let mesh = TimeMesh::graded(horizon, n_fine, r_fine)?;
    let f_values: Vec<f64> = mesh.nodes.iter().map(|&t| f_coeff(t)).collect();
    mode_solve_sampled(mode, vo, kinetic, u0_coeff, &f_values, &mesh)
}

/// Quadrature of `integral u_h phi_mode` with the degree-4 simplex rule.
pub fn project_onto_mode(mesh: &SpatialMesh, u_h: &[f64], mode: &Mode) -> f64 {
    debug_assert_eq!(u_h.len(), mesh.n_interior());
    let d = mesh.dim;
    let rule = rule_degree4(d);
    let mut acc = 0.0;
    for e in 0..mesh.n_simplices() {
        let verts = mesh.simplex(e);
        let vol = mesh.geometry(e).volume;
        let mut local = [0.0f64; 4];
        for (i, &v) in verts.iter().enumerate() {
            if let Some(g) = mesh.interior_index[v] {
                local[i] = u_h[g];
            }
        }
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_from_barycentric(e, p);
            let mut uh = 0.0;
            for i in 0..=d {
                uh += local[i] * p[i];
            }
            acc += vol * w * uh * mode.eigenfunction(&x[..d]);
        }
    }
    acc
}
