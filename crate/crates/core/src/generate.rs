//! Test surfaces: flat disk, flat cylinder and a planar pair of pants.
//!
//! Each refinement level quadruples the triangle count.

use std::f64::consts::{FRAC_PI_3, TAU};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mesh::{Chart, SurfaceMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Disk,
    Cylinder,
    PairOfPants,
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "disk" => Ok(Shape::Disk),
            "cylinder" => Ok(Shape::Cylinder),
            "pair_of_pants" | "pants" => Ok(Shape::PairOfPants),
            other => Err(Error::InvalidInput(format!("unknown shape '{other}'"))),
        }
    }
}

pub fn generate(shape: Shape, refinement: u32) -> SurfaceMesh {
    match shape {
        Shape::Disk => disk(refinement),
        Shape::Cylinder => cylinder(refinement),
        Shape::PairOfPants => pair_of_pants(refinement),
    }
}

/// Unit disk from `2^r` concentric rings; ring `k` carries `6k` equispaced vertices.
///
/// Vertex 0 is the centre; ring `k` starts at index `1 + 3k(k-1)`.
pub fn disk(refinement: u32) -> SurfaceMesh {
    let n = 1usize << refinement;
    let ring_start = |k: usize| if k == 0 { 0 } else { 1 + 3 * k * (k - 1) };
    let idx = |k: usize, m: usize| {
        if k == 0 {
            0
        } else {
            ring_start(k) + m % (6 * k)
        }
    };
    let mut vertices = vec![[0.0, 0.0, 0.0]];
    for k in 1..=n {
        let r = k as f64 / n as f64;
        for m in 0..6 * k {
            let theta = FRAC_PI_3 * m as f64 / k as f64;
            vertices.push([r * theta.cos(), r * theta.sin(), 0.0]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * n * n);
    for k in 1..=n {
        for s in 0..6 {
            for j in 0..k {
                let m = s * k + j;
                triangles.push([idx(k, m), idx(k, m + 1), idx(k - 1, s * (k - 1) + j)]);
                if j > 0 {
                    triangles.push([
                        idx(k - 1, s * (k - 1) + j - 1),
                        idx(k, m),
                        idx(k - 1, s * (k - 1) + j),
                    ]);
                }
            }
        }
    }
    SurfaceMesh::new(vertices, triangles)
        .expect("generated disk is valid")
        .with_chart(Chart::Disk { radius: 1.0 })
}

/// Flat cylinder `[0, 2π) × [0, 1]` embedded as the unit-radius round cylinder.
///
/// `6·2^r` columns and `2^r` rows; vertex `(i, l)` has index `l·n_θ + i`.
/// Loop 1 is the bottom circle `z = 0`.
pub fn cylinder(refinement: u32) -> SurfaceMesh {
    let nz = 1usize << refinement;
    let nt = 6 * nz;
    let mut vertices = Vec::with_capacity(nt * (nz + 1));
    for l in 0..=nz {
        let z = l as f64 / nz as f64;
        for i in 0..nt {
            let theta = TAU * i as f64 / nt as f64;
            vertices.push([theta.cos(), theta.sin(), z]);
        }
    }
    let id = |i: usize, l: usize| l * nt + i % nt;
    let mut triangles = Vec::with_capacity(2 * nt * nz);
    for l in 0..nz {
        for i in 0..nt {
            let (a, b, c, d) = (id(i, l), id(i + 1, l), id(i + 1, l + 1), id(i, l + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    SurfaceMesh::new(vertices, triangles)
        .expect("generated cylinder is valid")
        .with_chart(Chart::Cylinder { height: 1.0 })
}

/// Planar rectangle `[0,5] × [0,3]` with the unit squares `[1,2]×[1,2]` and
/// `[3,4]×[1,2]` removed: three boundary components, `χ = -1`.
pub fn pair_of_pants(refinement: u32) -> SurfaceMesh {
    let s = 1usize << refinement;
    let (nx, ny) = (5 * s, 3 * s);
    let h = 1.0 / s as f64;
    let hole = |cx: usize, cy: usize| cy / s == 1 && (cx / s == 1 || cx / s == 3);
    let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for cy in 0..ny {
        for cx in 0..nx {
            if !hole(cx, cy) {
                cells.push((cx, cy));
                for (x, y) in [(cx, cy), (cx + 1, cy), (cx + 1, cy + 1), (cx, cy + 1)] {
                    let g = y * (nx + 1) + x;
                    if index[g] == usize::MAX {
                        index[g] = usize::MAX - 1;
                    }
                }
            }
        }
    }
    for y in 0..=ny {
        for x in 0..=nx {
            let g = y * (nx + 1) + x;
            if index[g] != usize::MAX {
                index[g] = vertices.len();
                vertices.push([x as f64 * h, y as f64 * h, 0.0]);
            }
        }
    }
    let id = |x: usize, y: usize| index[y * (nx + 1) + x];
    let mut triangles = Vec::with_capacity(2 * cells.len());
    for (cx, cy) in cells {
        let (a, b, c, d) = (id(cx, cy), id(cx + 1, cy), id(cx + 1, cy + 1), id(cx, cy + 1));
        triangles.push([a, b, c]);
        triangles.push([a, c, d]);
    }
    SurfaceMesh::new(vertices, triangles).expect("generated pair of pants is valid")
}
