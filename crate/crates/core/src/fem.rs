//! First-order finite elements: cotangent stiffness, lumped mass and the
//! zero-mean Neumann solve.
//!
//! The homogeneous Neumann condition is natural in the weak form, so the
//! assembled operators need no boundary modification.

use std::sync::OnceLock;

use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg::conjugate_gradient;
use crate::mesh::{cross3, dot3, norm3, sub3, SurfaceMesh};

/// Relative compatibility tolerance for Neumann right-hand sides.
pub const TOL_COMPAT: f64 = 1e-8;
/// Relative residual demanded of the Neumann solve.
pub const NEUMANN_TOL: f64 = 1e-10;
/// Meshes up to this many vertices use a sparse LDLᵀ factorization.
pub const DIRECT_LIMIT: usize = 50_000;

#[derive(Debug, Clone)]
pub struct Operators {
    /// Cotangent stiffness `L`, with `½vᵀLv = ½∫|∇v|²` for P1 fields.
    pub stiffness: CsMat<f64>,
    /// Lumped (barycentric) vertex areas.
    pub mass: Vec<f64>,
    /// Total area `|M|`.
    pub area: f64,
    diag: Vec<f64>,
    /// Factorization of `L` with the row and column of vertex 0 removed.
    factor: OnceLock<Option<LdlNumeric<f64, usize>>>,
}

/// Cotangents of the angles opposite to edges (b,c), (c,a), (a,b).
pub(crate) fn triangle_cotangents(pa: [f64; 3], pb: [f64; 3], pc: [f64; 3]) -> [f64; 3] {
    let cot = |o: [f64; 3], p: [f64; 3], q: [f64; 3]| {
        let (u, v) = (sub3(p, o), sub3(q, o));
        dot3(u, v) / norm3(cross3(u, v))
    };
    [cot(pa, pb, pc), cot(pb, pc, pa), cot(pc, pa, pb)]
}

impl Operators {
    pub fn assemble(mesh: &SurfaceMesh) -> Result<Self> {
        let n = mesh.num_vertices();
        let areas: Vec<f64> = (0..mesh.num_triangles())
            .map(|t| mesh.triangle_area(t))
            .collect();
        let mean_area = areas.iter().sum::<f64>() / areas.len() as f64;
        if let Some((index, &area)) = areas
            .iter()
            .enumerate()
            .find(|(_, &a)| a < 1e-14 * mean_area)
        {
            return Err(Error::DegenerateTriangle { index, area });
        }
        let mut trip = TriMat::with_capacity((n, n), 9 * mesh.num_triangles());
        let mut mass = vec![0.0; n];
        let v = mesh.vertices();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let [a, b, c] = *tri;
            let cots = triangle_cotangents(v[a], v[b], v[c]);
            // cots[k] is opposite to the edge not containing vertex k
            for (k, &(i, j)) in [(b, c), (c, a), (a, b)].iter().enumerate() {
                let w = 0.5 * cots[k];
                trip.add_triplet(i, j, -w);
                trip.add_triplet(j, i, -w);
                trip.add_triplet(i, i, w);
                trip.add_triplet(j, j, w);
            }
            for &i in tri {
                mass[i] += areas[t] / 3.0;
            }
        }
        let stiffness: CsMat<f64> = trip.to_csr();
        let diag = (0..n)
            .map(|i| stiffness.get(i, i).copied().unwrap_or(0.0))
            .collect();
        let area = areas.iter().sum();
        Ok(Operators {
            stiffness,
            mass,
            area,
            diag,
            factor: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `out = L v`.
    pub fn apply_stiffness(&self, v: &[f64], out: &mut [f64]) {
        for (i, row) in self.stiffness.outer_iterator().enumerate() {
            out[i] = row.iter().map(|(j, &w)| w * v[j]).sum();
        }
    }

    pub fn stiffness_times(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_stiffness(v, &mut out);
        out
    }

    /// `½ vᵀ L v`.
    pub fn dirichlet_energy(&self, v: &[f64]) -> f64 {
        0.5 * crate::field::dot(v, &self.stiffness_times(v))
    }

    fn reduced_factor(&self) -> Option<&LdlNumeric<f64, usize>> {
        self.factor
            .get_or_init(|| {
                let n = self.len();
                if !(2..=DIRECT_LIMIT).contains(&n) {
                    return None;
                }
                let mut trip = TriMat::new((n - 1, n - 1));
                for (&w, (i, j)) in self.stiffness.iter() {
                    if i > 0 && j > 0 {
                        trip.add_triplet(i - 1, j - 1, w);
                    }
                }
                let reduced: CsMat<f64> = trip.to_csc();
                Ldl::new().numeric(reduced.view()).ok()
            })
            .as_ref()
    }

    /// `L x = b` through the factorization (pinning `x_0 = 0`); `b` must sum
    /// to zero. `None` when the mesh is too large to factor.
    fn direct_solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let ldl = self.reduced_factor()?;
        let tail: Vec<f64> = ldl.solve(&b[1..]);
        let mut x = Vec::with_capacity(b.len());
        x.push(0.0);
        x.extend(tail);
        Some(x)
    }

    /// `z = L⁺ r` restricted to zero-mean fields, after removing the sum of
    /// `r`; a fixed SPD preconditioner for systems dominated by `L`.
    pub fn pseudo_inverse(&self, r: &[f64], z: &mut [f64]) {
        let total: f64 = r.iter().sum();
        let rhs: Vec<f64> = r
            .iter()
            .zip(&self.mass)
            .map(|(ri, ai)| ri - total * ai / self.area)
            .collect();
        let x = match self.direct_solve(&rhs) {
            Some(x) => x,
            None => {
                let mut x = vec![0.0; rhs.len()];
                conjugate_gradient(
                    |v, o| self.apply_stiffness(v, o),
                    |r, z| self.jacobi(r, z),
                    &rhs,
                    &mut x,
                    1e-12,
                    20 * rhs.len() + 1000,
                );
                x
            }
        };
        let mean = Field(x.clone()).mean(&self.mass);
        for (zi, xi) in z.iter_mut().zip(x) {
            *zi = xi - mean;
        }
    }

    pub(crate) fn jacobi(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = if self.diag[i] > 0.0 { r[i] / self.diag[i] } else { r[i] };
        }
    }

    /// Solve `L v = b` for a load vector `b` with `Σ b = 0`; returns the
    /// zero-mean solution.
    pub fn solve_load(&self, b: &[f64]) -> Result<Vec<f64>> {
        let total: f64 = b.iter().sum();
        let scale: f64 = b.iter().map(|x| x.abs()).sum();
        if total.abs() > TOL_COMPAT * scale {
            return Err(Error::Incompatible {
                integral: total,
                bound: TOL_COMPAT * scale,
            });
        }
        let rhs: Vec<f64> = b
            .iter()
            .zip(&self.mass)
            .map(|(bi, ai)| bi - total * ai / self.area)
            .collect();
        let mut x = self.direct_solve(&rhs).unwrap_or_else(|| vec![0.0; rhs.len()]);
        let out = conjugate_gradient(
            |v, o| self.apply_stiffness(v, o),
            |r, z| self.jacobi(r, z),
            &rhs,
            &mut x,
            NEUMANN_TOL,
            20 * rhs.len() + 1000,
        );
        if !out.converged {
            return Err(Error::NotConverged {
                solver: "neumann cg",
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        let mean = Field(x.clone()).mean(&self.mass);
        Ok(x.into_iter().map(|v| v - mean).collect())
    }
}

/// Solve `-Δv = rhs` with natural Neumann condition and `∫v dA = 0`; in weak
/// form `L v = A·rhs`. The right-hand side must satisfy
/// `|∫rhs dA| ≤ TOL_COMPAT · ∫|rhs| dA`.
pub fn solve_neumann_zero_mean(ops: &Operators, rhs: &Field) -> Result<Field> {
    if rhs.len() != ops.len() {
        return Err(Error::InvalidInput(format!(
            "field has {} values, mesh has {} vertices",
            rhs.len(),
            ops.len()
        )));
    }
    if rhs.has_non_finite() {
        return Err(Error::InvalidInput("non-finite right-hand side".into()));
    }
    let load: Vec<f64> = rhs.iter().zip(&ops.mass).map(|(f, a)| f * a).collect();
    ops.solve_load(&load).map(Field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{cylinder, disk};
    use crate::mesh::SurfaceMesh;

    fn unit_square(n: usize) -> SurfaceMesh {
        let mut vertices = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, 0.0]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut tris = Vec::new();
        for j in 0..n {
            for i in 0..n {
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        SurfaceMesh::new(vertices, tris).unwrap()
    }

    #[test]
    fn linear_fields_have_exact_energy() {
        let mesh = unit_square(5);
        let ops = Operators::assemble(&mesh).unwrap();
        let v: Vec<f64> = mesh.vertices().iter().map(|p| 2.0 * p[0] - 3.0 * p[1]).collect();
        // ½∫|∇v|² = ½ (4 + 9) on the unit square
        assert!((ops.dirichlet_energy(&v) - 6.5).abs() < 1e-12);
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let mesh = cylinder(2);
        let ops = Operators::assemble(&mesh).unwrap();
        let lv = ops.stiffness_times(&vec![3.7; mesh.num_vertices()]);
        assert!(lv.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn cylinder_area_converges() {
        let ops = Operators::assemble(&cylinder(3)).unwrap();
        let exact = std::f64::consts::TAU;
        assert!((ops.area - exact).abs() < 0.01 * exact);
        assert!((ops.mass.iter().sum::<f64>() - ops.area).abs() < 1e-12);
        assert!(ops.mass.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let ops = Operators::assemble(&disk(2)).unwrap();
        let v = solve_neumann_zero_mean(&ops, &Field::zeros(ops.len())).unwrap();
        assert!(v.sup_norm() == 0.0);
    }

    #[test]
    fn incompatible_rhs_is_rejected() {
        let mesh = disk(2);
        let ops = Operators::assemble(&mesh).unwrap();
        // mean-free part plus a constant carrying 10% of the L1 mass
        let base: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
        let l1: f64 = base.iter().zip(&ops.mass).map(|(f, a)| f.abs() * a).sum();
        let c = 0.1 * l1 / ops.area / 0.9;
        let rhs = Field(base.iter().map(|f| f + c).collect());
        assert!(matches!(
            solve_neumann_zero_mean(&ops, &rhs),
            Err(Error::Incompatible { .. })
        ));
    }

    #[test]
    fn neumann_solution_is_zero_mean_and_solves() {
        let mesh = cylinder(3);
        let ops = Operators::assemble(&mesh).unwrap();
        let rhs = Field(mesh.vertices().iter().map(|p| p[0] + p[2] - 0.5).collect());
        let rhs = rhs.to_zero_mean(&ops.mass);
        let v = solve_neumann_zero_mean(&ops, &rhs).unwrap();
        assert!(v.integral(&ops.mass).abs() <= 1e-12 * ops.area * v.sup_norm());
        let lv = ops.stiffness_times(v.values());
        let load: Vec<f64> = rhs.iter().zip(&ops.mass).map(|(f, a)| f * a).collect();
        let err: f64 = lv.iter().zip(&load).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = load.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-9 * scale);
    }

    #[test]
    fn rayleigh_quotient_of_cos_approaches_one() {
        for r in 2..5 {
            let mesh = cylinder(r);
            let ops = Operators::assemble(&mesh).unwrap();
            let v: Vec<f64> = mesh.vertices().iter().map(|p| p[0]).collect();
            let num = 2.0 * ops.dirichlet_energy(&v);
            let den: f64 = v.iter().zip(&ops.mass).map(|(x, a)| x * x * a).sum();
            let err = (num / den - 1.0).abs();
            assert!(err < 5e-3, "level {r}: {err}");
        }
    }
}
