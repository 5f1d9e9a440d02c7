//! P1 finite elements on the unit box: meshes, operators, Ritz projection,
//! and L2 error evaluation.

mod assembly;
mod mesh;
pub mod quadrature;

pub use assembly::{
    assemble_lumped_mass, assemble_mass, assemble_mass_full, assemble_stiffness,
    assemble_stiffness_full, assemble_stiffness_sampled, load_vector, CoefficientSampling,
};
pub use mesh::{build_box_mesh, ElementGeometry, SpatialMesh};

use std::sync::Arc;

use crate::error::Result;
use crate::sparsela::{cg_solve, SolverConfig};
use quadrature::rule_degree4;

/// Coefficients over interior unknowns; boundary values are implicitly 0.
pub type FieldVector = Vec<f64>;

/// Scalar field on the box, with an optional analytic gradient.
///
/// When no gradient is supplied, central differences with step 1e-6 stand
/// in; that is accurate enough for the degree-2 load quadrature but analytic
/// gradients are preferred for convergence studies.
#[derive(Clone)]
pub struct ScalarField {
    value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Option<Arc<dyn Fn(&[f64]) -> [f64; 3] + Send + Sync>>,
}

impl ScalarField {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient<F, G>(value: F, gradient: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> [f64; 3] + Send + Sync + 'static,
    {
        ScalarField {
            value: Arc::new(value),
            gradient: Some(Arc::new(gradient)),
        }
    }

    pub fn zero() -> Self {
        ScalarField::new(|_| 0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 3] {
        if let Some(g) = &self.gradient {
            return g(x);
        }
        let mut grad = [0.0; 3];
        let eps = 1e-6;
        let mut p = [0.0; 3];
        p[..x.len()].copy_from_slice(x);
        for c in 0..x.len() {
            let orig = p[c];
            p[c] = orig + eps;
            let up = (self.value)(&p[..x.len()]);
            p[c] = orig - eps;
            let dn = (self.value)(&p[..x.len()]);
            p[c] = orig;
            grad[c] = (up - dn) / (2.0 * eps);
        }
        grad
    }
}

/// Symmetric diffusion tensor `K(x)`.
#[derive(Clone)]
pub struct DiffusionTensor {
    kind: TensorKind,
}

#[derive(Clone)]
enum TensorKind {
    ConstDiag([f64; 3]),
    General(Arc<dyn Fn(&[f64]) -> [[f64; 3]; 3] + Send + Sync>),
}

impl DiffusionTensor {
    pub fn constant_diagonal(diag: [f64; 3]) -> Self {
        DiffusionTensor {
            kind: TensorKind::ConstDiag(diag),
        }
    }

    pub fn isotropic(k: f64) -> Self {
        DiffusionTensor::constant_diagonal([k, k, k])
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> [[f64; 3]; 3] + Send + Sync + 'static,
    {
        DiffusionTensor {
            kind: TensorKind::General(Arc::new(f)),
        }
    }

    pub fn eval(&self, x: &[f64]) -> [[f64; 3]; 3] {
        match &self.kind {
            TensorKind::ConstDiag(d) => {
                let mut k = [[0.0; 3]; 3];
                for i in 0..3 {
                    k[i][i] = d[i];
                }
                k
            }
            TensorKind::General(f) => f(x),
        }
    }

    /// The diagonal when the tensor is constant diagonal; `None` otherwise.
    pub fn as_constant_diagonal(&self) -> Option<[f64; 3]> {
        match &self.kind {
            TensorKind::ConstDiag(d) => Some(*d),
            TensorKind::General(_) => None,
        }
    }
}

/// Ritz projection of `g` onto the interior P1 space:
/// `(K grad(g - Pg), grad chi) = 0` for all discrete `chi`.
///
/// `g` must vanish on the box boundary. The load `(K grad g, grad phi_i)` is
/// evaluated with the degree-2 simplex rule and the system is solved by
/// conjugate gradients to `solver_tol`.
pub fn ritz_project(
    mesh: &SpatialMesh,
    tensor: &DiffusionTensor,
    g: &ScalarField,
    solver_tol: f64,
) -> Result<FieldVector> {
    let a = assemble_stiffness(mesh, tensor);
    let d = mesh.dim;
    let rule = quadrature::rule_degree2(d);
    let mut rhs = vec![0.0; mesh.n_interior()];
    for e in 0..mesh.n_simplices() {
        let verts = mesh.simplex(e);
        let geom = mesh.geometry(e);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_from_barycentric(e, p);
            let k = tensor.eval(&x[..d]);
            let grad_g = g.gradient(&x[..d]);
            // K grad g at the quadrature point.
            let mut kg = [0.0; 3];
            for r in 0..d {
                for c in 0..d {
                    kg[r] += k[r][c] * grad_g[c];
                }
            }
            for (i, &v) in verts.iter().enumerate() {
                if let Some(gid) = mesh.interior_index[v] {
                    let mut acc = 0.0;
                    for r in 0..d {
                        acc += kg[r] * geom.grads[i][r];
                    }
                    rhs[gid] += geom.volume * w * acc;
                }
            }
        }
    }
    let (x, _) = cg_solve(&a, &rhs, &SolverConfig::with_rel_tol(solver_tol))?;
    Ok(x)
}

/// Nodal interpolant of `f` on the interior unknowns.
pub fn interpolate<F>(mesh: &SpatialMesh, f: F) -> FieldVector
where
    F: Fn(&[f64]) -> f64,
{
    mesh.interior_vertices
        .iter()
        .map(|&v| f(&mesh.vertices[v][..mesh.dim]))
        .collect()
}

/// L2 distance between the discrete field and an exact function, by the
/// degree-4 simplex rule.
pub fn l2_error<F>(mesh: &SpatialMesh, u_h: &[f64], u_exact: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    debug_assert_eq!(u_h.len(), mesh.n_interior());
    let d = mesh.dim;
    let rule = rule_degree4(d);
    let mut acc = 0.0;
    for e in 0..mesh.n_simplices() {
        let verts = mesh.simplex(e);
        let vol = mesh.geometry(e).volume;
        // Local coefficients, zero on boundary vertices.
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
            let diff = uh - u_exact(&x[..d]);
            acc += vol * w * diff * diff;
        }
    }
    // The degree-4 tet rule carries negative weights; roundoff can push a
    // vanishing error integral a hair below zero.
    acc.max(0.0).sqrt()
}

/// L2 norm of the discrete field itself.
pub fn l2_norm(mesh: &SpatialMesh, u_h: &[f64]) -> f64 {
    l2_error(mesh, u_h, |_| 0.0)
}
