//! Simplicial meshes of the unit box `(0,1)^d`, `d = 1, 2, 3`.
//!
//! Each of the `m^d` lattice cells splits into `d!` simplices sharing the
//! cell's main diagonal (Kuhn triangulation), so the partition is
//! quasi-uniform and deterministic. Vertices on the box boundary carry the
//! homogeneous Dirichlet condition and are excluded from the unknowns.

use crate::error::{Error, Result};

/// Simplicial partition of the unit box with interior-node numbering.
#[derive(Debug, Clone)]
pub struct SpatialMesh {
    /// Space dimension, 1..=3.
    pub dim: usize,
    /// Cells per axis `m`; the mesh parameter is `h = 1/m`.
    pub cells_per_axis: usize,
    pub h: f64,
    /// Vertex coordinates; entries beyond `dim` are zero.
    pub vertices: Vec<[f64; 3]>,
    /// Simplex corner indices; the first `dim + 1` entries are valid.
    pub simplices: Vec<[usize; 4]>,
    /// Vertex id -> interior unknown id, `None` on the boundary.
    pub interior_index: Vec<Option<usize>>,
    /// Interior unknown id -> vertex id.
    pub interior_vertices: Vec<usize>,
}

/// Per-simplex geometry: measure and constant P1 basis gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Gradient of the barycentric coordinate of each local vertex.
    pub grads: [[f64; 3]; 4],
}

impl SpatialMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_vertices.len()
    }

    pub fn n_simplices(&self) -> usize {
        self.simplices.len()
    }

    /// Corner vertex ids of simplex `e`.
    pub fn simplex(&self, e: usize) -> &[usize] {
        &self.simplices[e][..=self.dim]
    }

    pub fn barycenter(&self, e: usize) -> [f64; 3] {
        let verts = self.simplex(e);
        let mut c = [0.0; 3];
        for &v in verts {
            for (ci, vi) in c.iter_mut().zip(&self.vertices[v]) {
                *ci += vi;
            }
        }
        for ci in c.iter_mut() {
            *ci /= verts.len() as f64;
        }
        c
    }

    /// Physical coordinates of a barycentric point inside simplex `e`.
    pub fn point_from_barycentric(&self, e: usize, lambda: &[f64; 4]) -> [f64; 3] {
        let verts = self.simplex(e);
        let mut x = [0.0; 3];
        for (l, &v) in lambda.iter().zip(verts) {
            for (xi, vi) in x.iter_mut().zip(&self.vertices[v]) {
                *xi += l * vi;
            }
        }
        x
    }

    /// Volume and per-vertex basis gradients of simplex `e`.
    pub fn geometry(&self, e: usize) -> ElementGeometry {
        let verts = self.simplex(e);
        let p0 = self.vertices[verts[0]];
        let d = self.dim;
        // Columns of the edge matrix J.
        let mut j = [[0.0f64; 3]; 3];
        for c in 0..d {
            let p = self.vertices[verts[c + 1]];
            for r in 0..d {
                j[r][c] = p[r] - p0[r];
            }
        }
        let (det, inv) = match d {
            1 => {
                let det = j[0][0];
                let inv = [[1.0 / det, 0.0, 0.0], [0.0; 3], [0.0; 3]];
                (det, inv)
            }
            2 => {
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let inv = [
                    [j[1][1] / det, -j[0][1] / det, 0.0],
                    [-j[1][0] / det, j[0][0] / det, 0.0],
                    [0.0; 3],
                ];
                (det, inv)
            }
            3 => {
                let c00 = j[1][1] * j[2][2] - j[1][2] * j[2][1];
                let c01 = j[1][2] * j[2][0] - j[1][0] * j[2][2];
                let c02 = j[1][0] * j[2][1] - j[1][1] * j[2][0];
                let det = j[0][0] * c00 + j[0][1] * c01 + j[0][2] * c02;
                let inv = [
                    [
                        c00 / det,
                        (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
                        (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det,
                    ],
                    [
                        c01 / det,
                        (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
                        (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det,
                    ],
                    [
                        c02 / det,
                        (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
                        (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det,
                    ],
                ];
                (det, inv)
            }
            _ => unreachable!("dimension validated at construction"),
        };
        let factorial = [1.0, 1.0, 2.0, 6.0][d];
        let volume = det / factorial;
        debug_assert!(volume > 0.0, "negative simplex volume");
        // Row i of J^{-1} is the gradient of barycentric coordinate i+1.
        let mut grads = [[0.0f64; 3]; 4];
        for i in 0..d {
            for c in 0..d {
                grads[i + 1][c] = inv[i][c];
                grads[0][c] -= inv[i][c];
            }
        }
        ElementGeometry { volume, grads }
    }
}

/// Build the Kuhn-triangulated box mesh with `cells` cells per axis.
pub fn build_box_mesh(dim: usize, cells: usize) -> Result<SpatialMesh> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParam {
            name: "dim",
            reason: format!("{dim} not in 1..=3"),
        });
    }
    if cells < 2 {
        return Err(Error::InvalidParam {
            name: "cells",
            reason: format!("{cells} < 2"),
        });
    }
    let m = cells;
    let np = m + 1;
    let h = 1.0 / m as f64;

    let vid = |ix: usize, iy: usize, iz: usize| ix + np * (iy + np * iz);

    let (ny, nz) = match dim {
        1 => (1, 1),
        2 => (np, 1),
        _ => (np, np),
    };
    let mut vertices = Vec::with_capacity(np * ny * nz);
    let mut interior_index = Vec::with_capacity(np * ny * nz);
    let mut interior_vertices = Vec::new();
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..np {
                vertices.push([ix as f64 * h, iy as f64 * h, iz as f64 * h]);
                let on_boundary = ix == 0
                    || ix == m
                    || (dim >= 2 && (iy == 0 || iy == m))
                    || (dim >= 3 && (iz == 0 || iz == m));
                if on_boundary {
                    interior_index.push(None);
                } else {
                    interior_index.push(Some(interior_vertices.len()));
                    interior_vertices.push(vertices.len() - 1);
                }
            }
        }
    }

    let mut simplices = Vec::new();
    match dim {
        1 => {
            for ix in 0..m {
                simplices.push([vid(ix, 0, 0), vid(ix + 1, 0, 0), 0, 0]);
            }
        }
        2 => {
            for iy in 0..m {
                for ix in 0..m {
                    let a = vid(ix, iy, 0);
                    let b = vid(ix + 1, iy, 0);
                    let c = vid(ix + 1, iy + 1, 0);
                    let d = vid(ix, iy + 1, 0);
                    // Both triangles keep the main diagonal a-c.
                    simplices.push([a, b, c, 0]);
                    simplices.push([a, c, d, 0]);
                }
            }
        }
        _ => {
            // Paths from the cell origin to the far corner, one per axis
            // permutation; odd permutations get two vertices swapped to
            // keep volumes positive.
            const PERMS: [([usize; 3], bool); 6] = [
                ([0, 1, 2], true),
                ([0, 2, 1], false),
                ([1, 0, 2], false),
                ([1, 2, 0], true),
                ([2, 0, 1], true),
                ([2, 1, 0], false),
            ];
            for iz in 0..m {
                for iy in 0..m {
                    for ix in 0..m {
                        for (perm, even) in PERMS {
                            let mut idx = [ix, iy, iz];
                            let mut corners = [vid(ix, iy, iz), 0, 0, 0];
                            for (step, axis) in perm.iter().enumerate() {
                                idx[*axis] += 1;
                                corners[step + 1] = vid(idx[0], idx[1], idx[2]);
                            }
                            if !even {
                                corners.swap(1, 2);
                            }
                            simplices.push(corners);
                        }
                    }
                }
            }
        }
    }

    Ok(SpatialMesh {
        dim,
        cells_per_axis: m,
        h,
        vertices,
        simplices,
        interior_index,
        interior_vertices,
    })
}
