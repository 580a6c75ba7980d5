//! Approximate intrinsic distance fields.
//!
//! Generated surfaces carry a chart with an exact flat metric and use it
//! directly. Other meshes use Dijkstra on the edge graph, one sweep of
//! triangle-unfolding updates, and a final relaxation that restores the
//! 1-Lipschitz property along edges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::field::Field;
use crate::mesh::{dist3, SurfaceMesh};

/// A point of the closed surface: a vertex or a point on an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Vertex(usize),
    /// `(1 - t)·a + t·b`.
    Edge { a: usize, b: usize, t: f64 },
}

impl Location {
    pub fn position(&self, mesh: &SurfaceMesh) -> [f64; 3] {
        match *self {
            Location::Vertex(v) => mesh.vertices()[v],
            Location::Edge { a, b, t } => {
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                [
                    (1.0 - t) * pa[0] + t * pb[0],
                    (1.0 - t) * pa[1] + t * pb[1],
                    (1.0 - t) * pa[2] + t * pb[2],
                ]
            }
        }
    }

    /// Nearest vertex (ties go to the lower index).
    pub fn nearest_vertex(&self) -> usize {
        match *self {
            Location::Vertex(v) => v,
            Location::Edge { a, b, t } => {
                if t < 0.5 || (t == 0.5 && a < b) {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Dijkstra relaxation from the given tentative labels.
fn relax(mesh: &SurfaceMesh, dist: &mut [f64]) {
    let mut heap: BinaryHeap<Entry> = dist
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_finite())
        .map(|(i, &d)| Entry(d, i))
        .collect();
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &w in mesh.neighbors(v) {
            let nd = d + mesh.edge_length(v, w);
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Entry(nd, w));
            }
        }
    }
}

/// Distance at `k` from a virtual planar source consistent with the distances
/// `di`, `dj` at `i`, `j`; `None` if the straight ray misses the edge `ij`.
fn unfold(pi: [f64; 3], pj: [f64; 3], pk: [f64; 3], di: f64, dj: f64) -> Option<f64> {
    let e = dist3(pi, pj);
    let a = dist3(pi, pk);
    let b = dist3(pj, pk);
    // k in the edge frame: i = (0,0), j = (e,0), k above the edge
    let kx = (a * a - b * b + e * e) / (2.0 * e);
    let ky = (a * a - kx * kx).max(0.0).sqrt();
    // source below the edge
    let sx = (di * di - dj * dj + e * e) / (2.0 * e);
    let sy2 = di * di - sx * sx;
    if sy2 < 0.0 {
        return None;
    }
    let sy = -sy2.sqrt();
    // crossing of segment s-k with the x-axis
    let t = -sy / (ky - sy);
    let cx = sx + t * (kx - sx);
    if !(0.0..=e).contains(&cx) {
        return None;
    }
    Some(((kx - sx).powi(2) + (ky - sy).powi(2)).sqrt())
}

/// Approximate intrinsic distance from `q` to every vertex.
pub fn geodesic_distance(mesh: &SurfaceMesh, q: &Location) -> Field {
    if let Some(chart) = mesh.chart() {
        let cq = chart.coords(q.position(mesh));
        return Field(
            mesh.vertices()
                .iter()
                .map(|&p| chart.distance(chart.coords(p), cq))
                .collect(),
        );
    }
    graph_distance(mesh, q)
}

/// The mesh-only distance (no chart override).
pub fn graph_distance(mesh: &SurfaceMesh, q: &Location) -> Field {
    let n = mesh.num_vertices();
    let mut dist = vec![f64::INFINITY; n];
    match *q {
        Location::Vertex(v) => dist[v] = 0.0,
        Location::Edge { a, b, t } => {
            let len = mesh.edge_length(a, b);
            dist[a] = t * len;
            dist[b] = (1.0 - t) * len;
        }
    }
    relax(mesh, &mut dist);

    // one sweep of unfolding updates, triangles ordered by their nearest vertex
    let mut order: Vec<usize> = (0..mesh.num_triangles()).collect();
    let key = |t: usize| {
        let tri = mesh.triangles()[t];
        tri.iter().map(|&v| dist[v]).fold(f64::INFINITY, f64::min)
    };
    order.sort_by(|&x, &y| key(x).partial_cmp(&key(y)).unwrap().then(x.cmp(&y)));
    let v = mesh.vertices();
    for t in order {
        let tri = mesh.triangles()[t];
        for r in 0..3 {
            let (i, j, k) = (tri[r], tri[(r + 1) % 3], tri[(r + 2) % 3]);
            if dist[i] > dist[k] || dist[j] > dist[k] {
                continue;
            }
            if let Some(d) = unfold(v[i], v[j], v[k], dist[i], dist[j]) {
                if d < dist[k] {
                    dist[k] = d;
                }
            }
        }
    }
    if let Location::Vertex(v) = *q {
        dist[v] = 0.0;
    }
    relax(mesh, &mut dist);
    Field(dist)
}
