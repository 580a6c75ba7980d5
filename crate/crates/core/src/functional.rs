//! The mean-field functional `J_λ(v) = ½∫|∇v|² − λ log∫K_α e^v` on the
//! zero-mean space, its derivatives, and the way back to a conformal metric.
//!
//! Every evaluation projects its argument to the zero-mean representative
//! first, so adding a constant to `v` never changes a result.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::Operators;
use crate::field::{dot, log_sum_exp, Field};
use crate::green::{compute_greens, singular_weight, GreenFunction, GreenMode, SingularWeight};
use crate::mesh::{norm3, sub3, ConeSet, SurfaceMesh};

/// Everything a solve needs. The heavy parts are shared, so changing `λ`
/// with [`ProblemData::with_lambda`] is cheap.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub mesh: Arc<SurfaceMesh>,
    pub ops: Arc<Operators>,
    pub cones: ConeSet,
    pub greens: Arc<Vec<GreenFunction>>,
    pub weight: Arc<SingularWeight>,
    /// Prescribed curvature `K` at vertices.
    pub curvature: Arc<Field>,
    pub lambda: f64,
}

impl ProblemData {
    pub fn new(
        mesh: SurfaceMesh,
        cones: ConeSet,
        curvature: Field,
        mode: GreenMode,
        lambda: f64,
    ) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("λ = {lambda} is not finite")));
        }
        let mesh = mesh.with_cones(&cones)?;
        let ops = Operators::assemble(&mesh)?;
        let greens = compute_greens(&mesh, &ops, &cones, mode)?;
        let weight = singular_weight(&mesh, &ops, &curvature, &cones, &greens)?;
        Ok(ProblemData {
            mesh: Arc::new(mesh),
            ops: Arc::new(ops),
            cones,
            greens: Arc::new(greens),
            weight: Arc::new(weight),
            curvature: Arc::new(curvature),
            lambda,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemData {
            lambda,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn project(&self, v: &Field) -> Field {
        v.to_zero_mean(&self.ops.mass)
    }

    fn check(&self, v: &Field) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, mesh has {} vertices",
                v.len(),
                self.len()
            )));
        }
        if v.has_non_finite() {
            return Err(Error::InvalidInput("field contains NaN or infinity".into()));
        }
        Ok(())
    }

    /// `log ∫K_α e^v`, quadrature `Σ W_i e^{v_i}`.
    pub fn log_mass(&self, v: &Field) -> Result<f64> {
        self.check(v)?;
        let v = self.project(v);
        Ok(log_sum_exp(&self.weight.quadrature, v.values()))
    }

    /// Discrete density masses `q_i = W_i e^{v_i} / Σ W e^v` (they sum to 1);
    /// `q_i / A_i` samples `ρ_v`.
    pub fn density(&self, v: &Field) -> Result<Vec<f64>> {
        let log_z = self.log_mass(v)?;
        let mean = v.mean(&self.ops.mass);
        Ok(self
            .weight
            .quadrature
            .iter()
            .zip(v.iter())
            .map(|(w, x)| w * (x - mean - log_z).exp())
            .collect())
    }

    pub fn functional(&self, v: &Field) -> Result<f64> {
        let log_z = self.log_mass(v)?;
        let v = self.project(v);
        Ok(self.ops.dirichlet_energy(v.values()) - self.lambda * log_z)
    }

    /// Weak-form gradient `Lv − λ(q − A/|M|)`; its entries sum to zero.
    pub fn gradient(&self, v: &Field) -> Result<Field> {
        let q = self.density(v)?;
        let v = self.project(v);
        let lv = self.ops.stiffness_times(v.values());
        let area = self.ops.area;
        Ok(Field(
            lv.iter()
                .zip(&q)
                .zip(&self.ops.mass)
                .map(|((l, qi), a)| l - self.lambda * (qi - a / area))
                .collect(),
        ))
    }

    /// Second variation `Lw − λ(q∘w − q⟨q, w⟩)`.
    pub fn hessian_apply(&self, v: &Field, w: &Field) -> Result<Field> {
        let q = self.density(v)?;
        Ok(Field(self.hessian_with_density(&q, w.values())))
    }

    pub(crate) fn hessian_with_density(&self, q: &[f64], w: &[f64]) -> Vec<f64> {
        let qw = dot(q, w);
        let lw = self.ops.stiffness_times(w);
        lw.iter()
            .zip(q)
            .zip(w)
            .map(|((l, qi), wi)| l - self.lambda * (qi * wi - qi * qw))
            .collect()
    }

    /// `(Σ_i g_i² / A_i)^{1/2}`: the mass-weighted L² norm of the nodal
    /// defect `g_i / A_i` of `−Δv + λ/|M| − λρ_v`.
    pub fn residual(&self, v: &Field) -> Result<f64> {
        let g = self.gradient(v)?;
        Ok(weighted_norm(g.values(), &self.ops.mass))
    }

    /// Undo the desingularization: shift `v` so that `∫K_α e^{v̂} = |λ|`,
    /// then `u = v̂ − 4π Σ α_j G_{p_j}`. The metric `e^u g_0` has curvature
    /// `sign(λ)·K`, so its total curvature is `λ` either way. At a cone
    /// vertex `u` is `±∞` in split mode.
    pub fn to_metric(&self, v: &Field) -> Result<Metric> {
        if self.lambda == 0.0 {
            return Err(Error::Precondition(
                "λ = 0: the total curvature fixes no normalisation".into(),
            ));
        }
        let log_z = self.log_mass(v)?;
        let v = self.project(v);
        let shift = self.lambda.abs().ln() - log_z;
        let v_hat = Field(v.iter().map(|x| x + shift).collect());
        let mut u = v_hat.clone();
        for (cone, green) in self.cones.entries().iter().zip(self.greens.iter()) {
            for (i, ui) in u.0.iter_mut().enumerate() {
                let g = green.value(i);
                if cone.alpha != 0.0 {
                    *ui -= 4.0 * PI * cone.alpha * g;
                }
            }
        }
        let conformal_factor = Field(u.iter().map(|x| x.exp()).collect());
        Ok(Metric {
            v_hat,
            u,
            conformal_factor,
            shift,
            curvature_sign: self.lambda.signum(),
        })
    }

    /// The constant `K_0` for which `u` from [`ProblemData::to_metric`]
    /// solves `−Δu + 2K_0 = 2 sign(λ) Ke^u` away from cones: `(λ − 4πΣα_j) / 2|M|`.
    pub fn background_curvature(&self) -> f64 {
        let sum: f64 = self.cones.orders().iter().sum();
        (self.lambda - 4.0 * PI * sum) / (2.0 * self.ops.area)
    }
}

/// `(Σ_i g_i² / w_i)^{1/2}` over entries with positive `w_i`.
pub fn weighted_norm(g: &[f64], w: &[f64]) -> f64 {
    g.iter()
        .zip(w)
        .filter(|(_, w)| **w > 0.0)
        .map(|(g, w)| g * g / w)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct Metric {
    /// `v` shifted so that `∫K_α e^{v̂} = |λ|`.
    pub v_hat: Field,
    pub u: Field,
    /// `e^u`.
    pub conformal_factor: Field,
    pub shift: f64,
    /// The metric has curvature `curvature_sign · K`.
    pub curvature_sign: f64,
}

/// Angle-defect curvature of the metric `e^u g_0`, interior vertices only.
#[derive(Debug, Clone)]
pub struct CurvatureCheck {
    /// Curvature at interior vertices; `NaN` on the boundary and wherever `u`
    /// is not finite.
    pub values: Field,
}

impl CurvatureCheck {
    /// Largest `|K_h − K| / |K|` over interior vertices farther than
    /// `rings` edge hops from every cone and from the boundary.
    pub fn max_relative_error(&self, mesh: &SurfaceMesh, k: &Field, cones: &ConeSet, rings: usize) -> f64 {
        let mut seeds: Vec<usize> = cones.entries().iter().map(|c| c.vertex).collect();
        seeds.extend(mesh.boundary_loops().iter().flatten());
        let hops = hop_distance(mesh, &seeds);
        (0..mesh.num_vertices())
            .filter(|&i| hops[i] > rings && self.values[i].is_finite())
            .map(|i| (self.values[i] - k[i]).abs() / k[i].abs())
            .fold(0.0, f64::max)
    }
}

fn hop_distance(mesh: &SurfaceMesh, seeds: &[usize]) -> Vec<usize> {
    let mut hops = vec![usize::MAX; mesh.num_vertices()];
    let mut queue = std::collections::VecDeque::new();
    for &s in seeds {
        hops[s] = 0;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        for &w in mesh.neighbors(v) {
            if hops[w] == usize::MAX {
                hops[w] = hops[v] + 1;
                queue.push_back(w);
            }
        }
    }
    hops
}

/// Discrete Gaussian curvature of `e^u g_0`: edge lengths scaled by
/// `exp((u_a + u_b)/4)`, angles from the law of cosines, curvature as angle
/// defect over one third of the incident scaled area.
pub fn curvature_check(mesh: &SurfaceMesh, u: &Field) -> CurvatureCheck {
    let n = mesh.num_vertices();
    let mut angle = vec![0.0; n];
    let mut area = vec![0.0; n];
    let v = mesh.vertices();
    for tri in mesh.triangles() {
        let len = |a: usize, b: usize| dist(v[a], v[b]) * ((u[a] + u[b]) / 4.0).exp();
        let (a, b, c) = (tri[0], tri[1], tri[2]);
        let (la, lb, lc) = (len(b, c), len(c, a), len(a, b));
        let corner = |opp: f64, s1: f64, s2: f64| {
            ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos()
        };
        angle[a] += corner(la, lb, lc);
        angle[b] += corner(lb, lc, la);
        angle[c] += corner(lc, la, lb);
        // Heron, in the stable ordering
        let mut s = [la, lb, lc];
        s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        let [x, y, z] = s;
        let prod = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
        let tri_area = 0.25 * prod.max(0.0).sqrt();
        for &i in tri {
            area[i] += tri_area / 3.0;
        }
    }
    let values = (0..n)
        .map(|i| {
            if mesh.is_boundary_vertex(i) || !u[i].is_finite() {
                f64::NAN
            } else {
                (2.0 * PI - angle[i]) / area[i]
            }
        })
        .collect();
    CurvatureCheck { values: Field(values) }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

/// Defects of the original-variable equations for a metric `e^u g_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricDefects {
    /// Mass-weighted L² norm of `−Δu + 2K_0 − 2Ke^u` at interior vertices.
    pub interior: f64,
    /// Length-weighted L² norm of `∂u/∂ν + 2h_0` on the boundary (`h = 0`).
    pub boundary: f64,
}

/// Discrete defects of `−Δu + 2K_0 = 2Ke^u` in the interior and of
/// `∂u/∂ν + 2h_0 = 0` on the boundary, with the normal derivative read off
/// the weak form at boundary vertices.
pub fn metric_defects(
    mesh: &SurfaceMesh,
    ops: &Operators,
    u: &Field,
    k: &Field,
    k0: f64,
    h0: f64,
) -> MetricDefects {
    let lu = ops.stiffness_times(u.values());
    let n = mesh.num_vertices();
    let mut boundary_length = vec![0.0; n];
    for lp in mesh.boundary_loops() {
        for w in 0..lp.len() {
            let (a, b) = (lp[w], lp[(w + 1) % lp.len()]);
            let l = mesh.edge_length(a, b);
            boundary_length[a] += 0.5 * l;
            boundary_length[b] += 0.5 * l;
        }
    }
    let (mut interior, mut boundary) = (0.0, 0.0);
    for i in 0..n {
        if !u[i].is_finite() {
            continue;
        }
        let defect = lu[i] + (2.0 * k0 - 2.0 * k[i] * u[i].exp()) * ops.mass[i];
        if mesh.is_boundary_vertex(i) {
            let d = defect / boundary_length[i] + 2.0 * h0;
            boundary += boundary_length[i] * d * d;
        } else {
            interior += defect * defect / ops.mass[i];
        }
    }
    MetricDefects {
        interior: interior.sqrt(),
        boundary: boundary.sqrt(),
    }
}
