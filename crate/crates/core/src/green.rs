//! Neumann Green's functions with poles at cone points, and the
//! desingularised curvature weight `K_α = 2K·exp(-4π Σ α_j G_{p_j})`.
//!
//! In split mode `G = -(1/2π) η(d) log d + H`, with `η` a smoothstep cutoff
//! equal to one on `d ≤ R/2` and zero for `d ≥ R`. The regular part solves
//! `-ΔH = -1/|M| + Δ(η log d)/(2π)`; the source is supported in the cutoff
//! annulus and evaluated from the flat radial Laplacian.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Operators;
use crate::field::Field;
use crate::geodesic::{geodesic_distance, Location};
use crate::mesh::{dist3, ConeSet, SurfaceMesh};
use crate::quadrature::moments;

pub const SINGULAR_COEFFICIENT: f64 = -1.0 / (2.0 * PI);
/// Cutoff radius in units of the mean edge length.
pub const CUTOFF_EDGES: f64 = 5.0;
/// Subdivision depth of the near-cone quadrature.
pub const QUADRATURE_DEPTH: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GreenMode {
    #[default]
    Split,
    DiscreteDelta,
}

impl std::str::FromStr for GreenMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(GreenMode::Split),
            "discrete_delta" | "delta" => Ok(GreenMode::DiscreteDelta),
            other => Err(Error::InvalidInput(format!("unknown green mode '{other}'"))),
        }
    }
}

/// Smoothstep cutoff and its first two radial derivatives.
fn cutoff(d: f64, radius: f64) -> (f64, f64, f64) {
    let half = 0.5 * radius;
    if d <= half {
        (1.0, 0.0, 0.0)
    } else if d >= radius {
        (0.0, 0.0, 0.0)
    } else {
        let s = (d - half) / half;
        let eta = 1.0 - s * s * (3.0 - 2.0 * s);
        let deta = -6.0 * s * (1.0 - s) / half;
        let d2eta = -6.0 * (1.0 - 2.0 * s) / (half * half);
        (eta, deta, d2eta)
    }
}

#[derive(Debug, Clone)]
pub struct GreenFunction {
    pub pole: usize,
    pub mode: GreenMode,
    pub singular_coefficient: f64,
    pub cutoff_radius: f64,
    /// `H` in split mode, the whole of `G` in discrete-delta mode.
    pub regular_part: Field,
    /// Distance from the pole at each vertex.
    pub distance: Field,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenSidecar {
    pub pole: usize,
    pub mode: GreenMode,
    pub cutoff_radius: f64,
    pub singular_coefficient: f64,
}

impl GreenFunction {
    /// Singular part `-(1/2π) η(d) log d` at distance `d > 0`.
    pub fn singular_part(&self, d: f64) -> f64 {
        match self.mode {
            GreenMode::Split => {
                self.singular_coefficient * cutoff(d, self.cutoff_radius).0 * d.ln()
            }
            GreenMode::DiscreteDelta => 0.0,
        }
    }

    /// `G` at a vertex; `+∞` at the pole in split mode.
    pub fn value(&self, i: usize) -> f64 {
        match self.mode {
            GreenMode::Split if i == self.pole => f64::INFINITY,
            GreenMode::Split => self.singular_part(self.distance[i]) + self.regular_part[i],
            GreenMode::DiscreteDelta => self.regular_part[i],
        }
    }

    pub fn values(&self) -> Field {
        Field((0..self.regular_part.len()).map(|i| self.value(i)).collect())
    }

    pub fn sidecar(&self) -> GreenSidecar {
        GreenSidecar {
            pole: self.pole,
            mode: self.mode,
            cutoff_radius: self.cutoff_radius,
            singular_coefficient: self.singular_coefficient,
        }
    }

    /// `G` at a point of a triangle: exact singular part when the pole is a
    /// corner, linear interpolation otherwise.
    fn eval_in_triangle(&self, mesh: &SurfaceMesh, tri: [usize; 3], bary: [f64; 3], x: [f64; 3]) -> f64 {
        if self.mode == GreenMode::Split && tri.contains(&self.pole) {
            let d = dist3(x, mesh.vertices()[self.pole]);
            let h: f64 = (0..3).map(|k| bary[k] * self.regular_part[tri[k]]).sum();
            return self.singular_part(d) + h;
        }
        (0..3).map(|k| bary[k] * self.value(tri[k])).sum()
    }

    /// `∫ G dA` with singular quadrature on the triangles around the pole.
    pub fn integral(&self, mesh: &SurfaceMesh, ops: &Operators) -> f64 {
        match self.mode {
            GreenMode::DiscreteDelta => self.regular_part.integral(&ops.mass),
            GreenMode::Split => {
                let mut total = 0.0;
                for (t, &tri) in mesh.triangles().iter().enumerate() {
                    if let Some(c) = tri.iter().position(|&v| v == self.pole) {
                        let p = tri.map(|v| mesh.vertices()[v]);
                        let m = moments(&p, Some((c, 0.0)), QUADRATURE_DEPTH, &|b, x| {
                            self.eval_in_triangle(mesh, tri, b, x)
                        });
                        total += m.iter().sum::<f64>();
                    } else {
                        let a = mesh.triangle_area(t) / 3.0;
                        total += tri.iter().map(|&v| a * self.value(v)).sum::<f64>();
                    }
                }
                total
            }
        }
    }
}

/// Neumann Green's function with pole at an interior vertex, normalised to
/// zero mean.
pub fn compute_green(
    mesh: &SurfaceMesh,
    ops: &Operators,
    pole: usize,
    mode: GreenMode,
) -> Result<GreenFunction> {
    if pole >= mesh.num_vertices() {
        return Err(Error::InvalidInput(format!("pole {pole} out of range")));
    }
    if mesh.is_boundary_vertex(pole) {
        return Err(Error::Precondition(format!(
            "Green's function pole {pole} lies on the boundary"
        )));
    }
    let distance = geodesic_distance(mesh, &Location::Vertex(pole));
    let n = mesh.num_vertices();
    match mode {
        GreenMode::DiscreteDelta => {
            let load: Vec<f64> = (0..n)
                .map(|i| (i == pole) as u8 as f64 - ops.mass[i] / ops.area)
                .collect();
            let g = ops.solve_load(&load)?;
            Ok(GreenFunction {
                pole,
                mode,
                singular_coefficient: SINGULAR_COEFFICIENT,
                cutoff_radius: 0.0,
                regular_part: Field(g),
                distance,
            })
        }
        GreenMode::Split => {
            let to_boundary = mesh
                .boundary_loops()
                .iter()
                .flatten()
                .map(|&v| distance[v])
                .fold(f64::INFINITY, f64::min);
            let radius = (CUTOFF_EDGES * mesh.mean_edge_length()).min(0.9 * to_boundary);
            // L H = e_p - A/|M| - L S away from the pole, where S is the sampled
            // singular part; equivalently H = G_h - S with G_h the discrete
            // solution. At the pole S is infinite, so H there comes from its own
            // row with the (smooth) source -1/|M|.
            let load: Vec<f64> = (0..n)
                .map(|i| (i == pole) as u8 as f64 - ops.mass[i] / ops.area)
                .collect();
            let g = ops.solve_load(&load)?;
            let singular = |i: usize| {
                let (eta, _, _) = cutoff(distance[i], radius);
                if eta == 0.0 {
                    0.0
                } else {
                    SINGULAR_COEFFICIENT * eta * distance[i].ln()
                }
            };
            let mut h: Vec<f64> = (0..n)
                .map(|i| if i == pole { 0.0 } else { g[i] - singular(i) })
                .collect();
            let row = ops.stiffness.outer_view(pole).expect("pole row");
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, &w) in row.iter() {
                if j == pole {
                    diag = w;
                } else {
                    off += w * h[j];
                }
            }
            h[pole] = (-ops.mass[pole] / ops.area - off) / diag;
            let mut green = GreenFunction {
                pole,
                mode,
                singular_coefficient: SINGULAR_COEFFICIENT,
                cutoff_radius: radius,
                regular_part: Field(h),
                distance,
            };
            let shift = green.integral(mesh, ops) / ops.area;
            green.regular_part.0.iter_mut().for_each(|x| *x -= shift);
            Ok(green)
        }
    }
}

/// Green's functions for every cone, computed independently.
pub fn compute_greens(
    mesh: &SurfaceMesh,
    ops: &Operators,
    cones: &ConeSet,
    mode: GreenMode,
) -> Result<Vec<GreenFunction>> {
    use rayon::prelude::*;
    cones
        .entries()
        .par_iter()
        .map(|c| compute_green(mesh, ops, c.vertex, mode))
        .collect()
}

/// Curvature weight per vertex together with its quadrature weights.
#[derive(Debug, Clone)]
pub struct SingularWeight {
    /// `K_α` at vertices; at a split-mode cone vertex, the cell average.
    pub values: Field,
    /// `W_i ≈ ∫ K_α φ_i dA`, so that `∫K_α e^v ≈ Σ W_i e^{v_i}`.
    pub quadrature: Vec<f64>,
    pub mode: GreenMode,
    pub cone_vertices: Vec<usize>,
}

impl SingularWeight {
    /// `K_α ≡ 2K` on a surface without cones.
    pub fn uniform(ops: &Operators, k: f64) -> Self {
        SingularWeight {
            values: Field::constant(ops.len(), 2.0 * k),
            quadrature: ops.mass.iter().map(|a| 2.0 * k * a).collect(),
            mode: GreenMode::Split,
            cone_vertices: Vec::new(),
        }
    }

    pub fn total(&self) -> f64 {
        self.quadrature.iter().sum()
    }
}

/// `K_α = 2K·exp(-4π Σ α_j G_{p_j})`.
pub fn singular_weight(
    mesh: &SurfaceMesh,
    ops: &Operators,
    k: &Field,
    cones: &ConeSet,
    greens: &[GreenFunction],
) -> Result<SingularWeight> {
    singular_weight_with_depth(mesh, ops, k, cones, greens, QUADRATURE_DEPTH)
}

pub fn singular_weight_with_depth(
    mesh: &SurfaceMesh,
    ops: &Operators,
    k: &Field,
    cones: &ConeSet,
    greens: &[GreenFunction],
    depth: u32,
) -> Result<SingularWeight> {
    let n = mesh.num_vertices();
    if k.len() != n {
        return Err(Error::InvalidInput(format!(
            "curvature field has {} values, mesh has {n} vertices",
            k.len()
        )));
    }
    if let Some(i) = k.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "prescribed curvature must be positive; K[{i}] = {}",
            k[i]
        )));
    }
    let mut pairs = Vec::with_capacity(cones.len());
    for c in cones.entries() {
        let g = greens
            .iter()
            .find(|g| g.pole == c.vertex)
            .ok_or_else(|| Error::InvalidInput(format!("missing Green's function for cone {}", c.vertex)))?;
        pairs.push((c.alpha, g));
    }
    let mode = greens.first().map(|g| g.mode).unwrap_or_default();

    let mut values: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = pairs.iter().map(|(a, g)| a * g.value(i)).sum();
            2.0 * k[i] * (-4.0 * PI * e).exp()
        })
        .collect();
    let mut quadrature = vec![0.0; n];
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        let singular = if mode == GreenMode::Split {
            pairs
                .iter()
                .find_map(|(a, g)| tri.iter().position(|&v| v == g.pole).map(|c| (c, 2.0 * a)))
        } else {
            None
        };
        match singular {
            Some(s) => {
                let p = tri.map(|v| mesh.vertices()[v]);
                let f = |b: [f64; 3], x: [f64; 3]| {
                    let kx: f64 = (0..3).map(|m| b[m] * k[tri[m]]).sum();
                    let e: f64 = pairs
                        .iter()
                        .map(|(a, g)| a * g.eval_in_triangle(mesh, tri, b, x))
                        .sum();
                    2.0 * kx * (-4.0 * PI * e).exp()
                };
                let m = moments(&p, Some(s), depth, &f);
                for c in 0..3 {
                    quadrature[tri[c]] += m[c];
                }
            }
            None => {
                let a = mesh.triangle_area(t) / 3.0;
                for &v in &tri {
                    quadrature[v] += a * values[v];
                }
            }
        }
    }
    let cone_vertices: Vec<usize> = pairs.iter().map(|(_, g)| g.pole).collect();
    if mode == GreenMode::Split {
        for &p in &cone_vertices {
            values[p] = quadrature[p] / ops.mass[p];
        }
    }
    Ok(SingularWeight {
        values: Field(values),
        quadrature,
        mode,
        cone_vertices,
    })
}
