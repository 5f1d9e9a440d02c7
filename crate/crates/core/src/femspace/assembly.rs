//! Mass, stiffness, and load assembly over the simplicial mesh.
//!
//! Interior assembly eliminates the homogeneous Dirichlet boundary rows and
//! columns, keeping the operators symmetric positive definite. Row maps are
//! accumulated in simplex order, so assembly is deterministic.

use std::collections::BTreeMap;

use super::mesh::SpatialMesh;
use super::quadrature::{rule_degree2, rule_degree4};
use super::DiffusionTensor;
use crate::sparsela::CsrMatrix;

fn assemble<F>(mesh: &SpatialMesh, interior_only: bool, local: F) -> CsrMatrix
where
    F: Fn(usize) -> [[f64; 4]; 4],
{
    let n = if interior_only {
        mesh.n_interior()
    } else {
        mesh.n_vertices()
    };
    let map = |v: usize| -> Option<usize> {
        if interior_only {
            mesh.interior_index[v]
        } else {
            Some(v)
        }
    };
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let nv = mesh.dim + 1;
    for e in 0..mesh.n_simplices() {
        let verts = mesh.simplex(e);
        let m = local(e);
        for i in 0..nv {
            let Some(gi) = map(verts[i]) else { continue };
            let row = &mut rows[gi];
            for j in 0..nv {
                let Some(gj) = map(verts[j]) else { continue };
                *row.entry(gj).or_insert(0.0) += m[i][j];
            }
        }
    }
    CsrMatrix::from_row_maps(rows, n)
}

fn local_mass(mesh: &SpatialMesh, e: usize) -> [[f64; 4]; 4] {
    // Exact P1 simplex mass: vol (1 + delta_ij) / ((d+1)(d+2)).
    let d = mesh.dim;
    let vol = mesh.geometry(e).volume;
    let scale = vol / ((d + 1) as f64 * (d + 2) as f64);
    let mut m = [[0.0; 4]; 4];
    for i in 0..=d {
        for j in 0..=d {
            m[i][j] = if i == j { 2.0 * scale } else { scale };
        }
    }
    m
}

/// Interior mass matrix `M_ij = (phi_i, phi_j)`.
pub fn assemble_mass(mesh: &SpatialMesh) -> CsrMatrix {
    assemble(mesh, true, |e| local_mass(mesh, e))
}

/// Boundary-inclusive mass matrix; its entries sum to the box volume.
pub fn assemble_mass_full(mesh: &SpatialMesh) -> CsrMatrix {
    assemble(mesh, false, |e| local_mass(mesh, e))
}

/// Row-sum lumped mass over interior unknowns: `m_i = integral phi_i`.
pub fn assemble_lumped_mass(mesh: &SpatialMesh) -> Vec<f64> {
    let d = mesh.dim;
    let mut m = vec![0.0; mesh.n_interior()];
    for e in 0..mesh.n_simplices() {
        let share = mesh.geometry(e).volume / (d + 1) as f64;
        for &v in mesh.simplex(e) {
            if let Some(g) = mesh.interior_index[v] {
                m[g] += share;
            }
        }
    }
    m
}

/// Where the diffusion tensor is sampled during stiffness assembly.
///
/// Barycenter sampling is exact for constant tensors since P1 gradients are
/// constant per simplex; quadrature-point sampling averages a spatially
/// varying tensor with the degree-2 rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientSampling {
    Barycenter,
    QuadraturePoints,
}

fn local_stiffness(
    mesh: &SpatialMesh,
    tensor: &DiffusionTensor,
    sampling: CoefficientSampling,
    e: usize,
) -> [[f64; 4]; 4] {
    let d = mesh.dim;
    let geom = mesh.geometry(e);
    let k_avg: [[f64; 3]; 3] = match sampling {
        CoefficientSampling::Barycenter => tensor.eval(&mesh.barycenter(e)[..d]),
        CoefficientSampling::QuadraturePoints => {
            let rule = rule_degree2(d);
            let mut acc = [[0.0; 3]; 3];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.point_from_barycentric(e, p);
                let k = tensor.eval(&x[..d]);
                for r in 0..d {
                    for c in 0..d {
                        acc[r][c] += w * k[r][c];
                    }
                }
            }
            acc
        }
    };
    let mut m = [[0.0; 4]; 4];
    for i in 0..=d {
        // K grad(phi_i)
        let mut kg = [0.0; 3];
        for r in 0..d {
            for c in 0..d {
                kg[r] += k_avg[r][c] * geom.grads[i][c];
            }
        }
        for j in 0..=d {
            let mut acc = 0.0;
            for r in 0..d {
                acc += kg[r] * geom.grads[j][r];
            }
            m[i][j] = geom.volume * acc;
        }
    }
    m
}

/// Interior stiffness matrix `A_ij = (K grad phi_i, grad phi_j)` with
/// barycenter-sampled tensor.
pub fn assemble_stiffness(mesh: &SpatialMesh, tensor: &DiffusionTensor) -> CsrMatrix {
    assemble_stiffness_sampled(mesh, tensor, CoefficientSampling::Barycenter)
}

pub fn assemble_stiffness_sampled(
    mesh: &SpatialMesh,
    tensor: &DiffusionTensor,
    sampling: CoefficientSampling,
) -> CsrMatrix {
    assemble(mesh, true, |e| local_stiffness(mesh, tensor, sampling, e))
}

/// Boundary-inclusive stiffness; annihilates constant vectors.
pub fn assemble_stiffness_full(mesh: &SpatialMesh, tensor: &DiffusionTensor) -> CsrMatrix {
    assemble(mesh, false, |e| {
        local_stiffness(mesh, tensor, CoefficientSampling::Barycenter, e)
    })
}

/// Interior load vector `(f, phi_i)` by the degree-4 simplex rule.
pub fn load_vector<F>(mesh: &SpatialMesh, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let d = mesh.dim;
    let rule = rule_degree4(d);
    let mut b = vec![0.0; mesh.n_interior()];
    for e in 0..mesh.n_simplices() {
        let verts = mesh.simplex(e);
        let vol = mesh.geometry(e).volume;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.point_from_barycentric(e, p);
            let fx = f(&x[..d]);
            for (i, &v) in verts.iter().enumerate() {
                if let Some(g) = mesh.interior_index[v] {
                    b[g] += vol * w * fx * p[i];
                }
            }
        }
    }
    b
}
