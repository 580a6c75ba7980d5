//! Empirical boundedness of local Moser–Trudinger functionals under mesh
//! refinement. Every discrete space is bounded, so only the growth of the
//! maxima against `log(1/h)` is meaningful.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::bubbles::{bubble_field, BarycenterConfig};
use crate::error::{Error, Result};
use crate::fem::triangle_cotangents;
use crate::field::{dot, log_sum_exp, Field};
use crate::functional::ProblemData;
use crate::geodesic::{geodesic_distance, Location};

/// Ascent stops once the objective exceeds this.
pub const OBJECTIVE_CAP: f64 = 1e4;
/// Growth rate per unit `log(1/h)` above which maxima count as divergent.
pub const DIVERGENCE_SLOPE: f64 = 0.5;

/// `Ω` is the ball of `radius` around the vertex nearest `centre` (exact
/// chart distance on generated surfaces, heat-method distance otherwise),
/// `Ω̃` the ball of `radius + collar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRegion {
    pub centre: [f64; 3],
    pub radius: f64,
    pub collar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub c: f64,
    pub epsilon: f64,
    pub random_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            c: 4.0 * std::f64::consts::PI * 0.9,
            epsilon: 0.05,
            random_starts: 4,
            seed: 0,
            max_iterations: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Bounded,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub vertices: usize,
    pub mesh_size: f64,
    pub region_vertices: usize,
    pub maximum: f64,
    pub capped: bool,
    /// `"bubble:<Λ>"` or `"random:<i>"`.
    pub best_start: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub c: f64,
    pub epsilon: f64,
    pub levels: Vec<ProbeLevel>,
    /// Least-squares slope of the maxima against `log(1/h)`.
    pub slope: f64,
    pub growth: Growth,
}

struct Objective<'a> {
    data: &'a ProblemData,
    inside: Vec<usize>,
    weights: Vec<f64>,
    collar: CsMat<f64>,
    c: f64,
    epsilon: f64,
}

impl Objective<'_> {
    /// Value and Euclidean gradient.
    fn eval(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let local: Vec<f64> = self.inside.iter().map(|&i| v[i]).collect();
        let log_mass = log_sum_exp(&self.weights, &local);
        let lv = self.data.ops.stiffness_times(v);
        let cv: Vec<f64> = self
            .collar
            .outer_iterator()
            .map(|row| row.iter().map(|(j, &w)| w * v[j]).sum())
            .collect();
        let value = self.c * log_mass - 0.5 * dot(v, &cv) - self.epsilon * dot(v, &lv);
        let mut g: Vec<f64> = cv
            .iter()
            .zip(&lv)
            .map(|(a, b)| -a - 2.0 * self.epsilon * b)
            .collect();
        for (k, &i) in self.inside.iter().enumerate() {
            g[i] += self.c * (self.weights[k].ln() + local[k] - log_mass).exp();
        }
        (value, g)
    }
}

/// Sub-samples per triangle edge for the fraction of a triangle inside a ball.
const FRACTION_SAMPLES: usize = 8;

/// Area fraction of a triangle where the linear interpolant of `d` is at
/// most `r`.
fn inside_fraction(d: [f64; 3], r: f64) -> f64 {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= r {
        return 1.0;
    }
    if lo > r {
        return 0.0;
    }
    // centroids of the s² congruent sub-triangles
    let s = FRACTION_SAMPLES;
    let mut hits = 0usize;
    for i in 0..s {
        for j in 0..s - i {
            for (a, b, up) in [(i as f64, j as f64, true), (i as f64 + 1.0, j as f64 + 1.0, false)] {
                if !up && i + j + 2 > s {
                    continue;
                }
                let (x, y) = if up {
                    ((a + 1.0 / 3.0) / s as f64, (b + 1.0 / 3.0) / s as f64)
                } else {
                    ((a - 1.0 / 3.0) / s as f64, (b - 1.0 / 3.0) / s as f64)
                };
                let value = (1.0 - x - y) * d[0] + x * d[1] + y * d[2];
                if value <= r {
                    hits += 1;
                }
            }
        }
    }
    hits as f64 / (s * s) as f64
}

/// Lumped masses of `Ω` and the stiffness of `Ω̃`, both with fractional
/// triangles, so the region does not jump with the mesh.
fn region_operators(data: &ProblemData, dist: &Field, radius: f64, reach: f64) -> (Vec<f64>, CsMat<f64>) {
    let mesh = &data.mesh;
    let n = mesh.num_vertices();
    let p = mesh.vertices();
    let mut mass = vec![0.0; n];
    let mut trip = TriMat::new((n, n));
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let d = [dist[a], dist[b], dist[c]];
        let inner = inside_fraction(d, radius);
        if inner > 0.0 {
            let share = inner * mesh.triangle_area(t) / 3.0;
            for v in [a, b, c] {
                mass[v] += share;
            }
        }
        let outer = inside_fraction(d, reach);
        if outer == 0.0 {
            continue;
        }
        let cots = triangle_cotangents(p[a], p[b], p[c]);
        for (k, &(i, j)) in [(b, c), (c, a), (a, b)].iter().enumerate() {
            let w = 0.5 * outer * cots[k];
            trip.add_triplet(i, j, -w);
            trip.add_triplet(j, i, -w);
            trip.add_triplet(i, i, w);
            trip.add_triplet(j, j, w);
        }
    }
    (mass, trip.to_csr())
}

/// Sobolev ascent with backtracking; returns the best value and whether
/// the cap was hit.
fn ascend(obj: &Objective, start: Field, max_iterations: usize) -> (f64, bool) {
    let ops = &obj.data.ops;
    let mut v = start.to_zero_mean(&ops.mass).0;
    let (mut f, mut g) = obj.eval(&v);
    let mut step = 1.0;
    for _ in 0..max_iterations {
        if f > OBJECTIVE_CAP {
            return (f, true);
        }
        let total: f64 = g.iter().sum();
        let gp: Vec<f64> = g
            .iter()
            .zip(&ops.mass)
            .map(|(gi, a)| gi - total * a / ops.area)
            .collect();
        let mut d = vec![0.0; v.len()];
        ops.pseudo_inverse(&gp, &mut d);
        let slope = dot(&gp, &d);
        if !(slope > 1e-14 * (1.0 + f.abs())) {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let trial: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = obj.eval(&trial);
            if ft.is_finite() && ft >= f + 1e-4 * step * slope {
                let gain = ft - f;
                v = trial;
                f = ft;
                g = gt;
                accepted = true;
                step *= 2.0;
                if gain <= 1e-12 * (1.0 + f.abs()) {
                    return (f, f > OBJECTIVE_CAP);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f, f > OBJECTIVE_CAP)
}

/// The objective on one mesh, with the vertex the region is centred at.
fn build<'a>(data: &'a ProblemData, region: &ProbeRegion, c: f64, epsilon: f64) -> Result<(Objective<'a>, usize, Field)> {
    let mesh = &data.mesh;
    let centre = mesh
        .nearest_vertex(region.centre, false)
        .ok_or_else(|| Error::InvalidInput("empty mesh".into()))?;
    let dist = match mesh.chart() {
        Some(chart) => {
            let c = chart.coords(mesh.vertices()[centre]);
            Field(mesh.vertices().iter().map(|&p| chart.distance(chart.coords(p), c)).collect())
        }
        None => geodesic_distance(mesh, &Location::Vertex(centre)),
    };
    let reach = region.radius + region.collar;
    if dist.max() <= reach {
        return Err(Error::InvalidInput(format!(
            "collar radius {reach} covers the whole mesh"
        )));
    }
    let (omega, collar) = region_operators(data, &dist, region.radius, reach);
    let inside: Vec<usize> = (0..mesh.num_vertices()).filter(|&i| omega[i] > 0.0).collect();
    // K_α density times the lumped mass of Ω
    let weights: Vec<f64> = inside
        .iter()
        .map(|&i| data.weight.quadrature[i] / data.ops.mass[i] * omega[i])
        .collect();
    if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidInput("probe region needs positive weight".into()));
    }
    let obj = Objective {
        data,
        inside,
        weights,
        collar,
        c,
        epsilon,
    };
    Ok((obj, centre, dist))
}

/// `c log∫_Ω K_α e^v − ½∫_Ω̃ |∇v|² − ε∫_M |∇v|²` at the zero-mean
/// representative of `v`.
pub fn probe_objective(data: &ProblemData, region: &ProbeRegion, c: f64, epsilon: f64, v: &Field) -> Result<f64> {
    let (obj, _, _) = build(data, region, c, epsilon)?;
    Ok(obj.eval(data.project(v).values()).0)
}

fn probe_level(data: &ProblemData, region: &ProbeRegion, config: &ProbeConfig) -> Result<ProbeLevel> {
    let mesh = &data.mesh;
    let (obj, centre, _) = build(data, region, config.c, config.epsilon)?;
    let h = mesh.mean_edge_length();
    let sigma = BarycenterConfig::uniform(&[Location::Vertex(centre)])?;
    let mut starts: Vec<(String, Field)> = Vec::new();
    for scale in [1.0, 0.1 / h, 1.0 / h] {
        starts.push((format!("bubble:{scale:.6e}"), bubble_field(data, &sigma, scale.max(1.0))?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for s in 0..config.random_starts {
        let noise: Vec<f64> = data
            .ops
            .mass
            .iter()
            .map(|a| a * rng.gen_range(-1.0..1.0))
            .collect();
        let mut smooth = vec![0.0; noise.len()];
        data.ops.pseudo_inverse(&noise, &mut smooth);
        let top = Field(smooth.clone()).sup_norm().max(1e-300);
        starts.push((format!("random:{s}"), Field(smooth.iter().map(|x| x / top).collect())));
    }
    let results: Vec<(f64, bool)> = starts
        .par_iter()
        .map(|(_, f)| ascend(&obj, f.clone(), config.max_iterations))
        .collect();
    let (best, &(maximum, capped)) = results
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &(f64, bool))>, (i, r)| match acc {
            Some((_, b)) if b.0 >= r.0 => acc,
            _ => Some((i, r)),
        })
        .expect("at least one start");
    Ok(ProbeLevel {
        vertices: mesh.num_vertices(),
        mesh_size: h,
        region_vertices: obj.inside.len(),
        maximum,
        capped,
        best_start: starts[best].0.clone(),
    })
}

/// Maximizes `c log∫_Ω K_α e^v − ½∫_Ω̃ |∇v|² − ε∫_M |∇v|²` over zero-mean
/// `v` on each mesh in `levels` (coarse to fine) and classifies the growth.
pub fn mt_probe(levels: &[ProblemData], region: &ProbeRegion, config: &ProbeConfig) -> Result<ProbeReport> {
    if levels.len() < 2 {
        return Err(Error::InvalidInput("mt_probe needs at least two refinement levels".into()));
    }
    if !(region.radius > 0.0) || !(region.collar > 0.0) {
        return Err(Error::InvalidInput("probe radius and collar must be positive".into()));
    }
    let rows = levels
        .iter()
        .map(|d| probe_level(d, region, config))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| -r.mesh_size.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.maximum).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("refinement levels share one mesh size".into()));
    }
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let growth = if slope > DIVERGENCE_SLOPE || rows.iter().any(|r| r.capped) {
        Growth::Divergent
    } else {
        Growth::Bounded
    };
    Ok(ProbeReport {
        c: config.c,
        epsilon: config.epsilon,
        levels: rows,
        slope,
        growth,
    })
}
