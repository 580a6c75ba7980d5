//! Triangulated surfaces with labelled boundary loops and cone markers.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic description of a generated surface, used for exact distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Chart {
    /// Flat disk of the given radius centred at the origin of the xy-plane.
    Disk { radius: f64 },
    /// Flat strip `[0, 2π) × [0, height]` rolled into the unit cylinder.
    Cylinder { height: f64 },
}

impl Chart {
    /// Chart coordinates of an embedded point.
    pub fn coords(&self, p: [f64; 3]) -> [f64; 2] {
        match self {
            Chart::Disk { .. } => [p[0], p[1]],
            Chart::Cylinder { .. } => {
                let t = p[1].atan2(p[0]);
                let t = if t < 0.0 { t + std::f64::consts::TAU } else { t };
                [t, p[2]]
            }
        }
    }

    /// Intrinsic distance between two chart points.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            Chart::Disk { .. } => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            Chart::Cylinder { .. } => {
                let mut dt = (a[0] - b[0]).abs() % std::f64::consts::TAU;
                if dt > std::f64::consts::PI {
                    dt = std::f64::consts::TAU - dt;
                }
                (dt * dt + (a[1] - b[1]).powi(2)).sqrt()
            }
        }
    }
}

/// A cone point: interior vertex and order `α > -1` (angle `2π(1+α)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub vertex: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConeSet {
    entries: Vec<Cone>,
}

impl ConeSet {
    pub fn new(entries: Vec<Cone>) -> Result<Self> {
        for (i, c) in entries.iter().enumerate() {
            if !(c.alpha > -1.0) || !c.alpha.is_finite() {
                return Err(Error::InvalidCones(format!(
                    "order {} at vertex {} must be finite and > -1",
                    c.alpha, c.vertex
                )));
            }
            if entries[..i].iter().any(|o| o.vertex == c.vertex) {
                return Err(Error::InvalidCones(format!(
                    "vertex {} listed twice",
                    c.vertex
                )));
            }
        }
        Ok(ConeSet { entries })
    }

    pub fn empty() -> Self {
        ConeSet::default()
    }

    pub fn entries(&self) -> &[Cone] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn orders(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.alpha).collect()
    }

    /// All orders satisfy `α ≥ -1/2`.
    pub fn orders_at_least_minus_half(&self) -> bool {
        self.entries.iter().all(|c| c.alpha >= -0.5)
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    cone_markers: Vec<usize>,
    chart: Option<Chart>,
    // derived
    edges: Vec<[usize; 2]>,
    neighbors: Vec<Vec<usize>>,
    on_boundary: Vec<bool>,
}

impl SurfaceMesh {
    /// Validate raw data and detect boundary loops.
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n == 0 || triangles.is_empty() {
            return Err(Error::InvalidMesh("empty mesh".into()));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mut used = vec![false; n];
        // undirected edge -> directed occurrences
        let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                used[a] = true;
                edge_map.entry((a.min(b), a.max(b))).or_default().push((a, b));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is isolated")));
        }

        let mut next_on_boundary: Vec<Option<usize>> = vec![None; n];
        let mut on_boundary = vec![false; n];
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut neighbors = vec![Vec::new(); n];
        for (&(a, b), occ) in &edge_map {
            match occ.len() {
                1 => {
                    let (s, e) = occ[0];
                    if next_on_boundary[s].is_some() {
                        return Err(Error::InvalidMesh(format!(
                            "boundary is pinched at vertex {s}"
                        )));
                    }
                    next_on_boundary[s] = Some(e);
                    on_boundary[s] = true;
                    on_boundary[e] = true;
                }
                2 => {
                    if occ[0] == occ[1] {
                        return Err(Error::InconsistentOrientation(a, b));
                    }
                }
                k => return Err(Error::NonManifoldEdge(a, b, k)),
            }
            edges.push([a, b]);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }

        // boundary loops, each started at its minimal vertex, labelled by that vertex
        let mut visited = vec![false; n];
        let mut loops = Vec::new();
        for start in 0..n {
            if !on_boundary[start] || visited[start] {
                continue;
            }
            let mut cycle = vec![start];
            visited[start] = true;
            let mut cur = start;
            loop {
                let nxt = next_on_boundary[cur].ok_or_else(|| {
                    Error::InvalidMesh(format!("boundary vertex {cur} has no successor"))
                })?;
                if nxt == start {
                    break;
                }
                if visited[nxt] {
                    return Err(Error::InvalidMesh(format!(
                        "boundary loops are not simple at vertex {nxt}"
                    )));
                }
                visited[nxt] = true;
                cycle.push(nxt);
                cur = nxt;
            }
            loops.push(cycle);
        }

        // connectivity
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        if count != n {
            return Err(Error::InvalidMesh("mesh is not connected".into()));
        }

        Ok(SurfaceMesh {
            vertices,
            triangles,
            boundary_loops: loops,
            cone_markers: Vec::new(),
            chart: None,
            edges,
            neighbors,
            on_boundary,
        })
    }

    pub fn with_chart(mut self, chart: Chart) -> Self {
        self.chart = Some(chart);
        self
    }

    /// Attach cone markers; cones must sit on interior vertices.
    pub fn with_cones(mut self, cones: &ConeSet) -> Result<Self> {
        for c in cones.entries() {
            if c.vertex >= self.num_vertices() {
                return Err(Error::InvalidCones(format!(
                    "cone vertex {} out of range",
                    c.vertex
                )));
            }
            if self.on_boundary[c.vertex] {
                return Err(Error::ConeOnBoundary(c.vertex));
            }
        }
        self.cone_markers = cones.entries().iter().map(|c| c.vertex).collect();
        Ok(self)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    /// Loop with the given 1-based label.
    pub fn boundary_loop(&self, label: usize) -> Option<&[usize]> {
        label
            .checked_sub(1)
            .and_then(|i| self.boundary_loops.get(i))
            .map(|v| v.as_slice())
    }

    pub fn cone_markers(&self) -> &[usize] {
        &self.cone_markers
    }

    pub fn chart(&self) -> Option<Chart> {
        self.chart
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        dist3(self.vertices[a], self.vertices[b])
    }

    pub fn mean_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| self.edge_length(e[0], e[1]))
            .sum::<f64>()
            / self.edges.len() as f64
    }

    /// Closest vertex to an embedded point, optionally restricted to interior vertices.
    pub fn nearest_vertex(&self, p: [f64; 3], interior_only: bool) -> Option<usize> {
        (0..self.num_vertices())
            .filter(|&v| !interior_only || !self.on_boundary[v])
            .min_by(|&a, &b| {
                dist3(self.vertices[a], p)
                    .partial_cmp(&dist3(self.vertices[b], p))
                    .unwrap()
                    .then(a.cmp(&b))
            })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * norm3(cross3(sub3(pb, pa), sub3(pc, pa)))
    }

    pub fn to_text(&self, cones: &ConeSet) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "VERTICES {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
        }
        let _ = writeln!(out, "TRIANGLES {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        if !cones.is_empty() {
            let _ = writeln!(out, "CONES {}", cones.len());
            for c in cones.entries() {
                let _ = writeln!(out, "{} {:.16e}", c.vertex, c.alpha);
            }
        }
        out
    }

    pub fn write(&self, cones: &ConeSet, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text(cones))?;
        Ok(())
    }
}

/// Parse the text mesh format into a validated mesh and its cone set.
pub fn parse_mesh(text: &str) -> Result<(SurfaceMesh, ConeSet)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    fn header(item: Option<(usize, &str)>, key: &str) -> Result<(usize, usize)> {
        let (ln, line) = item.ok_or(Error::Parse {
            line: 0,
            message: format!("missing '{key}' section"),
        })?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected '{key} n'"),
            });
        }
        let count = parts.next().and_then(|s| s.parse().ok()).ok_or(Error::Parse {
            line: ln,
            message: format!("bad count after '{key}'"),
        })?;
        Ok((ln, count))
    }

    fn fields<T: std::str::FromStr>(ln: usize, line: &str, want: usize) -> Result<Vec<T>> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != want {
            return Err(Error::Parse {
                line: ln,
                message: format!("expected {want} values, found {}", parts.len()),
            });
        }
        parts
            .iter()
            .map(|s| {
                s.parse().map_err(|_| Error::Parse {
                    line: ln,
                    message: format!("cannot parse '{s}'"),
                })
            })
            .collect()
    }

    let (_, nv) = header(lines.next(), "VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "unexpected end of file in VERTICES".into(),
        })?;
        let xyz: Vec<f64> = fields(ln, line, 3)?;
        vertices.push([xyz[0], xyz[1], xyz[2]]);
    }
    let (_, nt) = header(lines.next(), "TRIANGLES")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "unexpected end of file in TRIANGLES".into(),
        })?;
        let ijk: Vec<usize> = fields(ln, line, 3)?;
        triangles.push([ijk[0], ijk[1], ijk[2]]);
    }
    let mut cones = Vec::new();
    if lines.peek().is_some() {
        let (_, nc) = header(lines.next(), "CONES")?;
        for _ in 0..nc {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: 0,
                message: "unexpected end of file in CONES".into(),
            })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::Parse {
                    line: ln,
                    message: "expected 'vertex_index alpha'".into(),
                });
            }
            let vertex = parts[0].parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("cannot parse '{}'", parts[0]),
            })?;
            let alpha = parts[1].parse().map_err(|_| Error::Parse {
                line: ln,
                message: format!("cannot parse '{}'", parts[1]),
            })?;
            cones.push(Cone { vertex, alpha });
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Parse {
            line: ln,
            message: "trailing content".into(),
        });
    }
    let cones = ConeSet::new(cones)?;
    let mesh = SurfaceMesh::new(vertices, triangles)?.with_cones(&cones)?;
    Ok((mesh, cones))
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<(SurfaceMesh, ConeSet)> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
# unit square, two triangles
VERTICES 4
0 0 0
1 0 0
1 1 0
0 1 0
TRIANGLES 2
0 1 2
0 2 3
";

    #[test]
    fn square_has_one_boundary_loop() {
        let (mesh, cones) = parse_mesh(SQUARE).unwrap();
        assert_eq!(mesh.boundary_loops().len(), 1);
        assert_eq!(mesh.boundary_loop(1).unwrap(), &[0, 1, 2, 3]);
        assert_eq!(mesh.euler_characteristic(), 1);
        assert!(cones.is_empty());
    }

    #[test]
    fn edge_in_three_triangles_is_rejected() {
        let text = "VERTICES 5\n0 0 0\n1 0 0\n0 1 0\n0 -1 0\n0 0 1\nTRIANGLES 3\n0 1 2\n1 0 3\n0 1 4\n";
        assert!(matches!(
            parse_mesh(text),
            Err(Error::NonManifoldEdge(0, 1, 3))
        ));
    }

    #[test]
    fn flipped_triangle_is_rejected() {
        let text = "VERTICES 4\n0 0 0\n1 0 0\n1 1 0\n0 1 0\nTRIANGLES 2\n0 1 2\n0 3 2\n";
        assert!(matches!(
            parse_mesh(text),
            Err(Error::InconsistentOrientation(0, 2))
        ));
    }

    #[test]
    fn boundary_cone_is_rejected() {
        let text = format!("{SQUARE}CONES 1\n2 0.5\n");
        assert!(matches!(parse_mesh(&text), Err(Error::ConeOnBoundary(2))));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "VERTICES 2\n0 0 0\n1 zero 0\n";
        match parse_mesh(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cone_orders_must_exceed_minus_one() {
        assert!(ConeSet::new(vec![Cone { vertex: 0, alpha: -1.0 }]).is_err());
        assert!(ConeSet::new(vec![
            Cone { vertex: 0, alpha: 0.2 },
            Cone { vertex: 0, alpha: 0.3 }
        ])
        .is_err());
        let set = ConeSet::new(vec![Cone { vertex: 3, alpha: -0.6 }]).unwrap();
        assert!(!set.orders_at_least_minus_half());
    }

    #[test]
    fn cylinder_chart_distance_wraps() {
        let c = Chart::Cylinder { height: 1.0 };
        let d = c.distance([0.1, 0.0], [std::f64::consts::TAU - 0.1, 0.0]);
        assert!((d - 0.2).abs() < 1e-12);
    }
}
