//! Bubbles `φ_{Λ,σ} = log Σ t_i (Λ/(1+Λ²d(·,q_i)²))²`, their energy
//! asymptotics, formal barycenters and blow-up mass accounting.
//!
//! Nodal bubbles feed the solvers. Energies are evaluated on the continuous
//! bubble with graded quadrature, because a bubble with `Λ` far above
//! `1/h` is invisible to its own nodal interpolant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::functional::ProblemData;
use crate::geodesic::{geodesic_distance, Location};
use crate::mesh::{cross3, dot3, norm3, sub3, Chart, SurfaceMesh};

/// Bubble atoms must stay this many mean edge lengths away from cones.
pub const PROTECTED_EDGES: f64 = 10.0;
/// A density peak counts when `ρ·|M|` exceeds this.
pub const PEAK_RATIO: f64 = 10.0;
/// Beyond this many candidates the greedy projection only scans the heaviest.
const MAX_CANDIDATES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub location: Location,
}

/// A point of `M_k`: at most `order` weighted atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterConfig {
    pub atoms: Vec<Atom>,
    pub order: usize,
}

impl BarycenterConfig {
    pub fn new(atoms: Vec<Atom>, order: usize) -> Result<Self> {
        if atoms.len() > order {
            return Err(Error::InvalidInput(format!(
                "{} atoms exceed order {order}",
                atoms.len()
            )));
        }
        if atoms.iter().any(|a| !(a.weight >= 0.0) || !a.weight.is_finite()) {
            return Err(Error::InvalidInput("atom weights must be finite and ≥ 0".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !atoms.is_empty() && (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}, not 1")));
        }
        Ok(BarycenterConfig { atoms, order })
    }

    /// Equal weights on the given locations.
    pub fn uniform(locations: &[Location]) -> Result<Self> {
        let k = locations.len();
        let weights = normalized(&vec![1.0; k]);
        Self::new(
            locations
                .iter()
                .zip(weights)
                .map(|(&location, weight)| Atom { weight, location })
                .collect(),
            k,
        )
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }
}

/// Scale to unit sum, with the last entry absorbing rounding so that the
/// left-to-right sum is exactly 1 whenever that is representable.
fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|x| x / total).collect();
    if let Some((last, rest)) = out.split_last_mut() {
        *last = 1.0 - rest.iter().sum::<f64>();
        if *last < 0.0 {
            *last = 0.0;
        }
    }
    out
}

fn log_profile(scale: f64, d: f64) -> f64 {
    2.0 * scale.ln() - 2.0 * (scale * scale * d * d).ln_1p()
}

/// Nodal zero-mean representative of `φ_{Λ,σ} − φ̄`.
pub fn bubble_field(data: &ProblemData, sigma: &BarycenterConfig, scale: f64) -> Result<Field> {
    if sigma.atoms.is_empty() {
        return Err(Error::InvalidInput("bubble needs at least one atom".into()));
    }
    if !(scale >= 1.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("Λ = {scale} must be ≥ 1")));
    }
    let dists: Vec<Field> = sigma
        .atoms
        .iter()
        .map(|a| geodesic_distance(&data.mesh, &a.location))
        .collect();
    let n = data.len();
    let values = (0..n)
        .map(|i| {
            log_sum(sigma.atoms.iter().zip(&dists).map(|(a, d)| (a.weight, log_profile(scale, d[i]))))
        })
        .collect();
    Ok(Field(values).to_zero_mean(&data.ops.mass))
}

/// `log Σ t_i e^{x_i}` over pairs `(t_i, x_i)` with `t_i > 0`.
fn log_sum(terms: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let shift = terms
        .clone()
        .filter(|(t, _)| *t > 0.0)
        .map(|(_, x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms
        .filter(|(t, _)| *t > 0.0)
        .map(|(t, x)| t * (x - shift).exp())
        .sum();
    shift + s.ln()
}

/// A triangle laid out flat (chart coordinates where available) with the
/// image of every atom nearest to it.
struct Layout {
    corners: [[f64; 3]; 3],
    atoms: Vec<[f64; 3]>,
    /// Unit normal when the layout is embedded in 3-space.
    normal: Option<[f64; 3]>,
}

fn layout(mesh: &SurfaceMesh, tri: [usize; 3], atoms: &[[f64; 3]]) -> Layout {
    let v = mesh.vertices();
    match mesh.chart() {
        Some(chart @ Chart::Cylinder { .. }) => {
            let c: Vec<[f64; 2]> = tri.iter().map(|&i| chart.coords(v[i])).collect();
            let mut corners = [[0.0; 3]; 3];
            for k in 0..3 {
                let mut t = c[k][0];
                if t - c[0][0] > PI {
                    t -= 2.0 * PI;
                } else if t - c[0][0] < -PI {
                    t += 2.0 * PI;
                }
                corners[k] = [t, c[k][1], 0.0];
            }
            let centre = (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0;
            let images = atoms
                .iter()
                .map(|q| {
                    let q = chart.coords(*q);
                    let shift = ((centre - q[0]) / (2.0 * PI)).round() * 2.0 * PI;
                    [q[0] + shift, q[1], 0.0]
                })
                .collect();
            Layout {
                corners,
                atoms: images,
                normal: None,
            }
        }
        Some(Chart::Disk { .. }) => Layout {
            corners: tri.map(|i| [v[i][0], v[i][1], 0.0]),
            atoms: atoms.iter().map(|q| [q[0], q[1], 0.0]).collect(),
            normal: None,
        },
        None => {
            let corners = tri.map(|i| v[i]);
            let n = cross3(sub3(corners[1], corners[0]), sub3(corners[2], corners[0]));
            let len = norm3(n);
            Layout {
                corners,
                atoms: atoms.to_vec(),
                normal: Some([n[0] / len, n[1] / len, n[2] / len]),
            }
        }
    }
}

/// Continuous integrals of one bubble over the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleIntegrals {
    /// `½∫|∇φ|²`.
    pub dirichlet: f64,
    /// `∫φ / |M|`.
    pub mean: f64,
    /// `log∫K_α e^{φ − φ̄}`.
    pub log_mass: f64,
}

/// Degree-4 six-point rule on the reference triangle.
const RULE: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const B: f64 = 0.091_576_213_509_771;
    const WA: f64 = 0.223_381_589_678_011;
    const WB: f64 = 0.109_951_743_655_322;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

struct Integrator<'a> {
    weights: Vec<f64>,
    scale: f64,
    layout: &'a Layout,
    k: [f64; 3],
}

impl Integrator<'_> {
    fn position(&self, b: [f64; 3]) -> [f64; 3] {
        let c = &self.layout.corners;
        [0, 1, 2].map(|m| b[0] * c[0][m] + b[1] * c[1][m] + b[2] * c[2][m])
    }

    /// `(φ, |∇φ|²)` at `x`.
    fn eval(&self, x: [f64; 3]) -> (f64, f64) {
        let s2 = self.scale * self.scale;
        let logs: Vec<f64> = self
            .layout
            .atoms
            .iter()
            .map(|&q| {
                let d = norm3(sub3(x, q));
                log_profile(self.scale, d)
            })
            .collect();
        let phi = log_sum(self.weights.iter().copied().zip(logs.iter().copied()));
        let mut grad = [0.0; 3];
        for ((&q, &t), &l) in self.layout.atoms.iter().zip(&self.weights).zip(&logs) {
            if t <= 0.0 {
                continue;
            }
            let share = t * (l - phi).exp();
            let r = sub3(x, q);
            let d2 = dot3(r, r);
            let f = -4.0 * s2 / (1.0 + s2 * d2) * share;
            for m in 0..3 {
                grad[m] += f * r[m];
            }
        }
        if let Some(n) = self.layout.normal {
            let g = dot3(grad, n);
            for m in 0..3 {
                grad[m] -= g * n[m];
            }
        }
        (phi, dot3(grad, grad))
    }

    /// `[½∫|∇φ|², ∫φ, ∫K e^{φ − 2logΛ}]` over the sub-triangle `sub`.
    fn integrate(&self, sub: [[f64; 3]; 3], depth: u32) -> [f64; 3] {
        let p = sub.map(|b| self.position(b));
        let diam = norm3(sub3(p[0], p[1]))
            .max(norm3(sub3(p[1], p[2])))
            .max(norm3(sub3(p[2], p[0])));
        let centre = [0, 1, 2].map(|m| (p[0][m] + p[1][m] + p[2][m]) / 3.0);
        let near = self
            .layout
            .atoms
            .iter()
            .map(|&q| norm3(sub3(centre, q)))
            .fold(f64::INFINITY, f64::min);
        let resolve = (near - diam).max(0.0) + 1.0 / self.scale;
        if depth < 40 && diam > 0.25 * resolve {
            let mid = |i: usize, j: usize| [0, 1, 2].map(|m| 0.5 * (sub[i][m] + sub[j][m]));
            let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
            let mut out = [0.0; 3];
            for child in [
                [sub[0], m01, m20],
                [m01, sub[1], m12],
                [m20, m12, sub[2]],
                [m01, m12, m20],
            ] {
                let r = self.integrate(child, depth + 1);
                for m in 0..3 {
                    out[m] += r[m];
                }
            }
            return out;
        }
        let area = 0.5 * norm3(cross3(sub3(p[1], p[0]), sub3(p[2], p[0])));
        let top = 2.0 * self.scale.ln();
        let mut out = [0.0; 3];
        for (w, wt) in RULE {
            let b = [0, 1, 2].map(|m| w[0] * sub[0][m] + w[1] * sub[1][m] + w[2] * sub[2][m]);
            let (phi, g2) = self.eval(self.position(b));
            let k = b[0] * self.k[0] + b[1] * self.k[1] + b[2] * self.k[2];
            out[0] += 0.5 * g2 * wt * area;
            out[1] += phi * wt * area;
            out[2] += k * (phi - top).exp() * wt * area;
        }
        out
    }
}

/// `½∫|∇φ|²`, `φ̄` and `log∫K_α e^{φ−φ̄}` for the continuous bubble.
/// Triangles touching a cone use vertex lumping for the mass term.
pub fn bubble_integrals(data: &ProblemData, sigma: &BarycenterConfig, scale: f64) -> Result<BubbleIntegrals> {
    if sigma.atoms.is_empty() {
        return Err(Error::InvalidInput("bubble needs at least one atom".into()));
    }
    let mesh = &data.mesh;
    let positions: Vec<[f64; 3]> = sigma.atoms.iter().map(|a| a.location.position(mesh)).collect();
    let weights: Vec<f64> = sigma.atoms.iter().map(|a| a.weight).collect();
    let kv = &data.weight.values;
    let cones = &data.weight.cone_vertices;
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let (mut energy, mut phi_int, mut mass, mut area) = (0.0, 0.0, 0.0, 0.0);
    let top = 2.0 * scale.ln();
    for &tri in mesh.triangles() {
        let lay = layout(mesh, tri, &positions);
        let integ = Integrator {
            weights: weights.clone(),
            scale,
            layout: &lay,
            k: tri.map(|i| kv[i]),
        };
        let c = lay.corners;
        let tri_area = 0.5 * norm3(cross3(sub3(c[1], c[0]), sub3(c[2], c[0])));
        let r = integ.integrate(corners, 0);
        energy += r[0];
        phi_int += r[1];
        if tri.iter().any(|v| cones.contains(v)) {
            for (k, &v) in tri.iter().enumerate() {
                let (phi, _) = integ.eval(c[k]);
                mass += kv[v] * (phi - top).exp() * tri_area / 3.0;
            }
        } else {
            mass += r[2];
        }
        area += tri_area;
    }
    let mean = phi_int / area;
    Ok(BubbleIntegrals {
        dirichlet: energy,
        mean,
        log_mass: mass.ln() + top - mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub expected: f64,
}

impl SlopeFit {
    pub fn ratio(&self) -> f64 {
        self.slope / self.expected
    }
}

fn fit(x: &[f64], y: &[f64], expected: f64) -> SlopeFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    SlopeFit {
        slope,
        intercept,
        residual,
        expected,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleSample {
    pub scale: f64,
    pub dirichlet: f64,
    pub log_mass: f64,
    pub functional: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleEnergyReport {
    pub k: usize,
    pub lambda: f64,
    pub samples: Vec<BubbleSample>,
    pub dirichlet: SlopeFit,
    pub log_mass: SlopeFit,
    pub functional: SlopeFit,
}

/// Least-squares slopes of `½∫|∇φ|²`, `log∫K_αe^{φ−φ̄}` and `J_λ` against
/// `log Λ`. Atoms must sit on the boundary and away from cones.
pub fn bubble_energy_report(data: &ProblemData, sigma: &BarycenterConfig, scales: &[f64]) -> Result<BubbleEnergyReport> {
    if scales.len() < 3 {
        return Err(Error::InvalidInput("need at least three values of Λ".into()));
    }
    if scales.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("Λ values must be strictly increasing".into()));
    }
    let mesh = &data.mesh;
    let protect = PROTECTED_EDGES * mesh.mean_edge_length();
    for atom in &sigma.atoms {
        let on_boundary = match atom.location {
            Location::Vertex(v) => mesh.is_boundary_vertex(v),
            Location::Edge { a, b, .. } => mesh.is_boundary_vertex(a) && mesh.is_boundary_vertex(b),
        };
        if !on_boundary {
            return Err(Error::Precondition(format!("atom {:?} is not on the boundary", atom.location)));
        }
        for g in data.greens.iter() {
            let v = atom.location.nearest_vertex();
            if g.distance[v] < protect {
                return Err(Error::Precondition(format!(
                    "atom at vertex {v} lies within {protect:.3} of the cone at vertex {}",
                    g.pole
                )));
            }
        }
    }
    let samples: Vec<BubbleSample> = scales
        .iter()
        .map(|&s| {
            bubble_integrals(data, sigma, s).map(|b| BubbleSample {
                scale: s,
                dirichlet: b.dirichlet,
                log_mass: b.log_mass,
                functional: b.dirichlet - data.lambda * b.log_mass,
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let k = sigma.atoms.len();
    let col = |f: fn(&BubbleSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let eight_k_pi = 8.0 * k as f64 * PI;
    Ok(BubbleEnergyReport {
        k,
        lambda: data.lambda,
        dirichlet: fit(&x, &col(|s| s.dirichlet), eight_k_pi),
        log_mass: fit(&x, &col(|s| s.log_mass), 2.0),
        functional: fit(&x, &col(|s| s.functional), eight_k_pi - 2.0 * data.lambda),
        samples,
    })
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
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Vertices within distance `r` of `centre`: exact chart distance when the
/// mesh has one, edge-graph distance otherwise.
pub fn ball(mesh: &SurfaceMesh, centre: usize, r: f64) -> Vec<usize> {
    let reach = if mesh.chart().is_some() { 1.5 * r + mesh.mean_edge_length() } else { r };
    let mut dist = std::collections::HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(centre, 0.0);
    heap.push(Entry(0.0, centre));
    while let Some(Entry(d, v)) = heap.pop() {
        if d > dist[&v] {
            continue;
        }
        for &w in mesh.neighbors(v) {
            let nd = d + mesh.edge_length(v, w);
            if nd <= reach && dist.get(&w).is_none_or(|&old| nd < old) {
                dist.insert(w, nd);
                heap.push(Entry(nd, w));
            }
        }
    }
    let mut out: Vec<usize> = match mesh.chart() {
        Some(chart) => {
            let c = chart.coords(mesh.vertices()[centre]);
            dist.keys()
                .copied()
                .filter(|&v| chart.distance(chart.coords(mesh.vertices()[v]), c) <= r)
                .collect()
        }
        None => dist.iter().filter(|(_, &d)| d <= r).map(|(&v, _)| v).collect(),
    };
    out.sort_unstable();
    out
}

/// Result of the greedy projection onto `M_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub config: BarycenterConfig,
    /// Mass captured by each selected ball, before renormalization.
    pub captured: Vec<f64>,
    /// Mass left outside every ball.
    pub uncaptured: f64,
}

/// Greedy ball capture: `k` times, take the vertex whose radius-`r` ball
/// holds the most remaining mass, record it and remove it. `rho` is a
/// density, so vertex masses are `A_i ρ_i`.
pub fn barycenter_project(data: &ProblemData, rho: &Field, k: usize, r: f64) -> Result<Projection> {
    let mass: Vec<f64> = rho.iter().zip(&data.ops.mass).map(|(p, a)| p * a).collect();
    if rho.len() != data.len() || rho.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidInput("density must be nonnegative at every vertex".into()));
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("density integrates to {total}, not 1")));
    }
    project_masses(&data.mesh, mass, k, r)
}

pub(crate) fn project_masses(mesh: &SurfaceMesh, mut mass: Vec<f64>, k: usize, r: f64) -> Result<Projection> {
    let mut picks: Vec<(usize, f64)> = Vec::new();
    for _ in 0..k {
        let mut candidates: Vec<usize> = (0..mass.len()).filter(|&i| mass[i] > 0.0).collect();
        if candidates.is_empty() {
            break;
        }
        if candidates.len() > MAX_CANDIDATES {
            candidates.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
            candidates.truncate(MAX_CANDIDATES);
            candidates.sort_unstable();
        }
        let mut best = (usize::MAX, -1.0, Vec::new());
        for c in candidates {
            let members = ball(mesh, c, r);
            let m: f64 = members.iter().map(|&v| mass[v]).sum();
            if m > best.1 {
                best = (c, m, members);
            }
        }
        for v in best.2 {
            mass[v] = 0.0;
        }
        picks.push((best.0, best.1));
    }
    let captured: Vec<f64> = picks.iter().map(|p| p.1).collect();
    let uncaptured = mass.iter().sum::<f64>().max(0.0);
    let weights = normalized(&captured);
    let atoms = picks
        .iter()
        .zip(weights)
        .map(|(&(v, _), weight)| Atom {
            weight,
            location: Location::Vertex(v),
        })
        .collect();
    Ok(Projection {
        config: BarycenterConfig { atoms, order: k },
        captured,
        uncaptured,
    })
}

/// Move every atom to the nearest vertex of boundary loop `label`
/// (geodesic distance, ties to the lowest vertex index). Atoms already on
/// the loop, at a vertex or inside one of its edges, stay where they are.
pub fn boundary_pushforward(mesh: &SurfaceMesh, sigma: &BarycenterConfig, label: usize) -> Result<BarycenterConfig> {
    let lp = mesh
        .boundary_loop(label)
        .ok_or_else(|| Error::InvalidInput(format!("no boundary loop with label {label}")))?;
    let on_loop = |loc: &Location| match *loc {
        Location::Vertex(v) => lp.contains(&v),
        Location::Edge { a, b, .. } => {
            let n = lp.len();
            (0..n).any(|i| {
                let (x, y) = (lp[i], lp[(i + 1) % n]);
                (x, y) == (a, b) || (y, x) == (a, b)
            })
        }
    };
    let atoms = sigma
        .atoms
        .iter()
        .map(|atom| {
            if on_loop(&atom.location) {
                return *atom;
            }
            let d = geodesic_distance(mesh, &atom.location);
            let target = lp
                .iter()
                .copied()
                .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
                .expect("boundary loops are nonempty");
            Atom {
                weight: atom.weight,
                location: Location::Vertex(target),
            }
        })
        .collect();
    Ok(BarycenterConfig {
        atoms,
        order: sigma.order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassClass {
    Cone,
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakLocation {
    pub vertex: usize,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassPeak {
    pub location: PeakLocation,
    pub class: MassClass,
    pub mass_over_pi: f64,
    pub reference_over_pi: f64,
    pub relative_gap: f64,
}

/// Local maxima of `λρ_v` with `ρ·|M| ≥ PEAK_RATIO`, strongest first; each
/// reports `λ·∫_{B_r}ρ_v` over mass not claimed by a stronger peak. The
/// class comes from the location: within `r` of a cone, on the boundary, or
/// interior; the reference value is the one of that class.
pub fn mass_spectrum(data: &ProblemData, v: &Field, r: f64) -> Result<Vec<MassPeak>> {
    let q = data.density(v)?;
    let mesh = &data.mesh;
    let area = data.ops.area;
    let density: Vec<f64> = q.iter().zip(&data.ops.mass).map(|(m, a)| m / a).collect();
    let mut peaks: Vec<usize> = (0..data.len())
        .filter(|&i| density[i] * area >= PEAK_RATIO)
        .filter(|&i| mesh.neighbors(i).iter().all(|&j| density[j] <= density[i]))
        .collect();
    peaks.sort_by(|&a, &b| density[b].total_cmp(&density[a]).then(a.cmp(&b)));
    let mut remaining = q.clone();
    let mut claimed = vec![false; data.len()];
    let mut out = Vec::new();
    for p in peaks {
        if claimed[p] {
            continue;
        }
        let members = ball(mesh, p, r);
        let m: f64 = members.iter().map(|&i| remaining[i]).sum();
        for &i in &members {
            remaining[i] = 0.0;
            claimed[i] = true;
        }
        let cone = data
            .cones
            .entries()
            .iter()
            .zip(data.greens.iter())
            .filter(|(_, g)| g.distance[p] <= r)
            .min_by(|a, b| a.1.distance[p].total_cmp(&b.1.distance[p]));
        let (class, reference) = match cone {
            Some((c, _)) => (MassClass::Cone, 8.0 * (1.0 + c.alpha)),
            None if mesh.is_boundary_vertex(p) => (MassClass::Boundary, 4.0),
            None => (MassClass::Interior, 8.0),
        };
        let mass_over_pi = data.lambda * m / PI;
        out.push(MassPeak {
            location: PeakLocation {
                vertex: p,
                position: mesh.vertices()[p],
            },
            class,
            mass_over_pi,
            reference_over_pi: reference,
            relative_gap: (mass_over_pi - reference) / reference,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::cylinder;
    use crate::green::GreenMode;
    use crate::mesh::ConeSet;

    fn data(level: u32, lambda: f64) -> ProblemData {
        let mesh = cylinder(level);
        let n = mesh.num_vertices();
        ProblemData::new(mesh, ConeSet::empty(), Field::constant(n, 1.0), GreenMode::Split, lambda).unwrap()
    }

    #[test]
    fn single_atom_peaks_at_its_vertex() {
        let d = data(2, 1.0);
        let interior = 24 * 2 + 5;
        let s = BarycenterConfig::uniform(&[Location::Vertex(interior)]).unwrap();
        let f = bubble_field(&d, &s, 20.0).unwrap();
        assert_eq!(f[interior], f.max());
        assert!(f.is_zero_mean(&d.ops.mass));
    }

    #[test]
    fn unit_scale_is_bounded() {
        let d = data(2, 1.0);
        let s = BarycenterConfig::uniform(&[Location::Vertex(0)]).unwrap();
        let f = bubble_field(&d, &s, 1.0).unwrap();
        // log(1/(1+d²)²) with d ≤ π·1.05 stays above -2 log(1 + 11)
        assert!(f.max() - f.min() <= 2.0 * 12f64.ln());
    }

    #[test]
    fn empty_and_small_scale_rejected() {
        let d = data(1, 1.0);
        let empty = BarycenterConfig { atoms: vec![], order: 1 };
        assert!(bubble_field(&d, &empty, 10.0).is_err());
        let s = BarycenterConfig::uniform(&[Location::Vertex(0)]).unwrap();
        assert!(bubble_field(&d, &s, 0.5).is_err());
    }

    #[test]
    fn nodal_and_resolved_energy_agree_at_low_scale() {
        let d = data(4, 1.0);
        let s = BarycenterConfig::uniform(&[Location::Vertex(0)]).unwrap();
        let f = bubble_field(&d, &s, 2.0).unwrap();
        let nodal = d.ops.dirichlet_energy(f.values());
        let resolved = bubble_integrals(&d, &s, 2.0).unwrap().dirichlet;
        assert!((nodal - resolved).abs() < 0.02 * resolved, "{nodal} vs {resolved}");
    }

    #[test]
    fn normalized_sums_to_one() {
        for raw in [vec![0.6, 0.4], vec![1.0, 1.0, 1.0], vec![0.1, 0.7, 0.3, 0.9]] {
            assert_eq!(normalized(&raw).iter().sum::<f64>(), 1.0);
        }
    }
}
