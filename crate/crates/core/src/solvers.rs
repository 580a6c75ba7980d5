//! Critical points of `J_λ`: descent where the functional is coercive,
//! deflated Newton from bubble starts in supercritical windows, and
//! continuation in λ with blow-up detection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bubbles::{bubble_field, mass_spectrum, BarycenterConfig, MassPeak};
use crate::error::{Error, Result};
use crate::field::{dot, Field};
use crate::functional::{weighted_norm, ProblemData};
use crate::geodesic::Location;
use crate::linalg::{lowest_eigenpair, minres};
use crate::spectrum::{nearest_critical, GUARD_BAND};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 5000;
/// Descent hands over to Newton below this residual.
pub const NEWTON_SWITCH: f64 = 1e-3;
/// `J` below this means the functional is not bounded below.
pub const UNBOUNDED: f64 = -1e8;
pub const BLOWUP_MAX_V: f64 = 25.0;
pub const BLOWUP_FRACTION: f64 = 0.9;
pub const STEP_FLOOR: f64 = 1e-5;
/// Solutions closer than this relative distance count as the same.
pub const DISTINCT: f64 = 1e-3;
/// Newton iterations per start.
/// Bubble scale of the boundary restarts in [`continuation`].
pub const RESTART_SCALE: f64 = 20.0;
/// Iteration cap of one restart; slow restarts are dropped.
pub const RESTART_ITERATIONS: usize = 200;
pub const NEWTON_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Min,
    Minmax,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationCap,
    NonCoercive,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    #[serde(rename = "J_value")]
    pub j_value: f64,
    pub residual: f64,
    pub step: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub lambda: f64,
    #[serde(skip)]
    pub solution: Field,
    #[serde(rename = "J_value")]
    pub j_value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub max_v: f64,
    /// Largest share of `∫K_α e^v` held by one vertex; near 1 marks a
    /// spike the mesh cannot resolve.
    pub max_vertex_mass: f64,
    pub strategy: Strategy,
    pub status: Status,
    pub mass_summary: Vec<MassPeak>,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Radius used for the mass summary of every report.
pub fn default_mass_radius(data: &ProblemData) -> f64 {
    0.1 * data.ops.area.sqrt()
}

fn finish(
    data: &ProblemData,
    v: Field,
    iterations: usize,
    strategy: Strategy,
    status: Status,
    trace: Vec<TraceEntry>,
) -> Result<SolveReport> {
    let v = data.project(&v);
    let max_vertex_mass = data.density(&v)?.into_iter().fold(0.0, f64::max);
    Ok(SolveReport {
        lambda: data.lambda,
        j_value: data.functional(&v)?,
        residual: data.residual(&v)?,
        iterations,
        max_v: v.max(),
        max_vertex_mass,
        strategy,
        status,
        mass_summary: mass_spectrum(data, &v, default_mass_radius(data))?,
        trace,
        solution: v,
    })
}

/// `L⁺ g`: the Sobolev (H¹) representative of a load vector.
fn sobolev(data: &ProblemData, g: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; g.len()];
    data.ops.pseudo_inverse(g, &mut z);
    z
}

/// Newton direction `H δ = −g` by MINRES preconditioned with `L⁺`.
fn newton_direction(data: &ProblemData, q: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let b: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut x = vec![0.0; n];
    let out = minres(
        |w, o| o.copy_from_slice(&data.hessian_with_density(q, w)),
        |r, z| data.ops.pseudo_inverse(r, z),
        &b,
        &mut x,
        1e-10,
        400,
    );
    if !out.converged && out.relative_residual > 1e-4 {
        return None;
    }
    let x = Field(x).to_zero_mean(&data.ops.mass);
    if x.has_non_finite() {
        return None;
    }
    Some(x.0)
}

/// Gradient descent in the H¹ metric with Armijo backtracking, then Newton
/// (line search on `J`) once the residual drops below [`NEWTON_SWITCH`].
pub fn minimize(data: &ProblemData, init: &Field, tol: f64) -> Result<SolveReport> {
    minimize_with_cap(data, init, tol, MAX_ITERATIONS)
}

pub fn minimize_with_cap(data: &ProblemData, init: &Field, tol: f64, cap: usize) -> Result<SolveReport> {
    let mut v = data.project(init);
    let mut j = data.functional(&v)?;
    let mut trace = Vec::new();
    for it in 0..cap {
        let q = data.density(&v)?;
        let g = data.gradient(&v)?;
        let res = weighted_norm(g.values(), &data.ops.mass);
        if res <= tol {
            return finish(data, v, it, Strategy::Min, Status::Converged, trace);
        }
        if j < UNBOUNDED {
            return finish(data, v, it, Strategy::Min, Status::NonCoercive, trace);
        }
        let mut method = "descent";
        let mut direction: Option<Vec<f64>> = None;
        if res < NEWTON_SWITCH {
            if let Some(d) = newton_direction(data, &q, g.values()) {
                if dot(g.values(), &d) < 0.0 {
                    direction = Some(d);
                    method = "newton";
                }
            }
        }
        let d = match direction {
            Some(d) => d,
            None => sobolev(data, g.values()).into_iter().map(|x| -x).collect(),
        };
        let slope = dot(g.values(), &d);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let trial = Field(v.iter().zip(&d).map(|(a, b)| a + t * b).collect());
            if let Ok(jt) = data.functional(&trial) {
                if jt <= j + 1e-4 * t * slope {
                    accepted = Some((trial, jt));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, jt)) => {
                v = data.project(&trial);
                j = jt;
            }
            None => {
                // no decrease available: stationary to round-off
                return finish(data, v, it, Strategy::Min, Status::Stalled, trace);
            }
        }
        trace.push(TraceEntry {
            iteration: it,
            j_value: j,
            residual: res,
            step: t,
            method: method.into(),
        });
    }
    let status = if data.residual(&v)? <= tol { Status::Converged } else { Status::IterationCap };
    finish(data, v, cap, Strategy::Min, status, trace)
}

/// Deflation `m(v) = Π_j (‖v − v_j‖^{-2} + 1)` in the mass-weighted norm.
struct Deflation<'a> {
    found: &'a [Field],
    mass: &'a [f64],
}

impl Deflation<'_> {
    fn norm2(&self, e: &[f64]) -> f64 {
        e.iter().zip(self.mass).map(|(x, a)| a * x * x).sum()
    }

    fn log_factor(&self, v: &Field) -> f64 {
        self.found
            .iter()
            .map(|u| {
                let e: Vec<f64> = v.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
                (1.0 / self.norm2(&e) + 1.0).ln()
            })
            .sum()
    }

    /// `⟨∇ log m, δ⟩`.
    fn directional(&self, v: &Field, delta: &[f64]) -> f64 {
        self.found
            .iter()
            .map(|u| {
                let e: Vec<f64> = v.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
                let n2 = self.norm2(&e);
                let ed: f64 = e.iter().zip(delta).zip(self.mass).map(|((x, d), a)| a * x * d).sum();
                -2.0 * ed / (n2 * n2) / (1.0 / n2 + 1.0)
            })
            .sum()
    }
}

/// Damped Newton on the residual with deflation against `found`. Steps are
/// accepted on the deflated merit `m(v)·‖g‖`; when no Newton step helps,
/// a Levenberg–Marquardt step on `½ gᵀL⁺g` is tried with growing shift.
pub fn newton(data: &ProblemData, init: &Field, tol: f64, max_iter: usize, found: &[Field]) -> Result<SolveReport> {
    let defl = Deflation {
        found,
        mass: &data.ops.mass,
    };
    let mut v = data.project(init);
    let mut trace = Vec::new();
    let merit = |v: &Field| -> Result<f64> {
        let r = data.residual(v)?;
        Ok(r.ln() + defl.log_factor(v))
    };
    for it in 0..max_iter {
        let q = data.density(&v)?;
        let g = data.gradient(&v)?;
        let res = weighted_norm(g.values(), &data.ops.mass);
        if res <= tol {
            return finish(data, v, it, Strategy::Minmax, Status::Converged, trace);
        }
        if !found.is_empty() && defl.log_factor(&v) > 30.0 {
            // sitting on a known solution
            return finish(data, v, it, Strategy::Minmax, Status::Stalled, trace);
        }
        let current = merit(&v)?;
        let mut accepted: Option<(Field, f64, &str)> = None;
        if let Some(mut d) = newton_direction(data, &q, g.values()) {
            if !found.is_empty() {
                let tau = 1.0 / (1.0 - defl.directional(&v, &d));
                if tau.is_finite() && tau > 0.0 {
                    d.iter_mut().for_each(|x| *x *= tau);
                }
            }
            // cap the sup-norm of a step so bubbles are not overshot
            let big = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut t: f64 = if big > 5.0 { 5.0 / big } else { 1.0 };
            while t > 1.0 / 1024.0 {
                let trial = Field(v.iter().zip(&d).map(|(a, b)| a + t * b).collect());
                if let Ok(m) = merit(&trial) {
                    if m < current + (1.0 - 1e-4 * t).ln() {
                        accepted = Some((trial, t, "newton"));
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if accepted.is_none() {
            accepted = levenberg_marquardt(data, &q, &v, g.values(), &merit, current)?;
        }
        match accepted {
            Some((trial, t, method)) => {
                v = data.project(&trial);
                trace.push(TraceEntry {
                    iteration: it,
                    j_value: data.functional(&v)?,
                    residual: res,
                    step: t,
                    method: method.into(),
                });
            }
            None => return finish(data, v, it, Strategy::Minmax, Status::Stalled, trace),
        }
        if v.sup_norm() > 1e3 {
            return finish(data, v, it, Strategy::Minmax, Status::Stalled, trace);
        }
    }
    finish(data, v, max_iter, Strategy::Minmax, Status::IterationCap, trace)
}

fn levenberg_marquardt<'a>(
    data: &ProblemData,
    q: &[f64],
    v: &Field,
    g: &[f64],
    merit: &dyn Fn(&Field) -> Result<f64>,
    current: f64,
) -> Result<Option<(Field, f64, &'a str)>> {
    let n = g.len();
    let pg = sobolev(data, g);
    let rhs: Vec<f64> = data.hessian_with_density(q, &pg).iter().map(|x| -x).collect();
    let mut mu = 1e-2;
    for _ in 0..10 {
        // (H L⁺ H + μ L) δ = −H L⁺ g
        let apply = |w: &[f64], o: &mut [f64]| {
            let hw = data.hessian_with_density(q, w);
            let phw = sobolev(data, &hw);
            let hphw = data.hessian_with_density(q, &phw);
            let lw = data.ops.stiffness_times(w);
            for i in 0..n {
                o[i] = hphw[i] + mu * lw[i];
            }
        };
        let mut d = vec![0.0; n];
        let out = crate::linalg::conjugate_gradient(
            apply,
            |r, z| {
                data.ops.pseudo_inverse(r, z);
                z.iter_mut().for_each(|x| *x /= 1.0 + mu);
            },
            &rhs,
            &mut d,
            1e-8,
            200,
        );
        if out.relative_residual < 1e-3 {
            let d = Field(d).to_zero_mean(&data.ops.mass);
            let trial = Field(v.iter().zip(d.iter()).map(|(a, b)| a + b).collect());
            if let Ok(m) = merit(&trial) {
                if m < current {
                    return Ok(Some((trial, 1.0, "levenberg_marquardt")));
                }
            }
        }
        mu *= 10.0;
    }
    Ok(None)
}

/// Bubble starts: `positions` equispaced vertices of boundary loop `label`,
/// every `k`-subset of them, times every scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub positions: usize,
    pub scales: Vec<f64>,
    pub label: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            positions: 8,
            scales: vec![10.0, 1e2, 1e3],
            label: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub atoms: Vec<usize>,
    pub scale: f64,
    pub status: Status,
    pub residual: f64,
    pub iterations: usize,
    /// Index into the solution list when this start produced a new solution.
    pub solution: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinmaxOutcome {
    pub k: usize,
    pub solutions: Vec<SolveReport>,
    pub starts: Vec<StartRecord>,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Mass-weighted relative distance `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_distance(a: &Field, b: &Field, mass: &[f64]) -> f64 {
    let n2 = |f: &mut dyn Iterator<Item = f64>| f.zip(mass).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
    let diff = n2(&mut a.iter().zip(b.iter()).map(|(x, y)| x - y));
    let scale = n2(&mut a.iter().copied()).max(n2(&mut b.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Deflated Newton from every bubble start of the grid, in grid order.
pub fn solve_minmax(data: &ProblemData, k: usize, grid: &Grid, tol: f64) -> Result<MinmaxOutcome> {
    let lambda = data.lambda;
    let (lo, hi) = (4.0 * PI * k as f64, 4.0 * PI * (k + 1) as f64);
    if !(lambda > lo && lambda < hi) {
        return Err(Error::Precondition(format!(
            "λ = {lambda} is outside the window (4kπ, 4(k+1)π) = ({lo}, {hi}) for k = {k}"
        )));
    }
    let (nearest, distance) = nearest_critical(&data.cones, lambda)?;
    if distance < GUARD_BAND {
        return Err(Error::Precondition(format!(
            "λ = {lambda} lies within {GUARD_BAND:e} of the critical value {}π",
            nearest.value_over_pi
        )));
    }
    let lp = data
        .mesh
        .boundary_loop(grid.label)
        .ok_or_else(|| Error::InvalidInput(format!("no boundary loop with label {}", grid.label)))?
        .to_vec();
    if grid.positions < k || grid.positions > lp.len() {
        return Err(Error::InvalidInput(format!(
            "grid needs between {k} and {} positions, got {}",
            lp.len(),
            grid.positions
        )));
    }
    let sites: Vec<usize> = (0..grid.positions).map(|i| lp[i * lp.len() / grid.positions]).collect();
    let mut solutions: Vec<SolveReport> = Vec::new();
    let mut found: Vec<Field> = Vec::new();
    let mut starts = Vec::new();
    let mut index = 0;
    for subset in subsets(sites.len(), k) {
        for &scale in &grid.scales {
            let atoms: Vec<usize> = subset.iter().map(|&i| sites[i]).collect();
            let locations: Vec<Location> = atoms.iter().map(|&v| Location::Vertex(v)).collect();
            let sigma = BarycenterConfig::uniform(&locations)?;
            let init = bubble_field(data, &sigma, scale)?;
            let report = newton(data, &init, tol, NEWTON_ITERATIONS, &found)?;
            let mut record = StartRecord {
                index,
                atoms,
                scale,
                status: report.status,
                residual: report.residual,
                iterations: report.iterations,
                solution: None,
            };
            if report.converged()
                && found
                    .iter()
                    .all(|u| relative_distance(u, &report.solution, &data.ops.mass) > DISTINCT)
            {
                record.solution = Some(solutions.len());
                found.push(report.solution.clone());
                solutions.push(report);
            }
            starts.push(record);
            index += 1;
        }
    }
    Ok(MinmaxOutcome { k, solutions, starts })
}

/// Step control for [`continuation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial: f64,
    pub max: f64,
    pub min: f64,
    pub growth: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            initial: 0.25,
            max: 1.0,
            min: STEP_FLOOR,
            growth: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Reached,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOutcome {
    pub steps: Vec<SolveReport>,
    pub termination: Termination,
    /// λ values at which the branch left an unstable solution.
    pub branch_switches: Vec<f64>,
}

fn lowest_mode(data: &ProblemData, v: &Field) -> Result<(f64, Field)> {
    // generalized problem H w = μ A w through A^{-1/2} H A^{-1/2}
    let q = data.density(v)?;
    let mass = &data.ops.mass;
    let root: Vec<f64> = mass.iter().map(|a| a.sqrt()).collect();
    let total: f64 = mass.iter().sum::<f64>().sqrt();
    let exclude: Vec<f64> = root.iter().map(|r| r / total).collect();
    let n = data.len();
    let start: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
    let (mu, y) = lowest_eigenpair(
        |x, o| {
            let w: Vec<f64> = x.iter().zip(&root).map(|(a, r)| a / r).collect();
            let hw = data.hessian_with_density(&q, &w);
            for i in 0..n {
                o[i] = hw[i] / root[i];
            }
        },
        n,
        &exclude,
        &start,
        300.min(n),
        1e-8,
    );
    Ok((mu, Field(y.iter().zip(&root).map(|(a, r)| a / r).collect())))
}

/// Best descent result from a boundary bubble placed at the largest value
/// of `v` on each boundary loop. Catches minimizers that are not connected
/// to the current branch by a bifurcation.
fn boundary_restart(data: &ProblemData, v: &Field, tol: f64) -> Result<Option<SolveReport>> {
    let mut best: Option<SolveReport> = None;
    for lp in data.mesh.boundary_loops() {
        let Some(&top) = lp.iter().max_by(|&&a, &&b| v[a].total_cmp(&v[b])) else {
            continue;
        };
        let sigma = BarycenterConfig::uniform(&[Location::Vertex(top)])?;
        let init = bubble_field(data, &sigma, RESTART_SCALE)?;
        let r = minimize_with_cap(data, &init, tol, RESTART_ITERATIONS)?;
        if r.converged() && best.as_ref().is_none_or(|b| r.j_value < b.j_value) {
            best = Some(r);
        }
    }
    Ok(best)
}

/// Newton corrector, falling back to descent when λ is coercive.
fn correct(data: &ProblemData, guess: &Field, tol: f64, coercive: bool) -> Result<SolveReport> {
    let r = newton(data, guess, tol, NEWTON_ITERATIONS, &[])?;
    if r.converged() || !coercive {
        return Ok(r);
    }
    minimize(data, guess, tol)
}

/// Predictor–corrector continuation from `lambda_start` to `lambda_end`.
/// While `λ` is below the coercivity threshold, solutions with a negative
/// Hessian direction are pushed off along it and re-minimized, so the path
/// follows minimizers; boundary bubble restarts are compared as well. Stops early on blow-up: `max v > 25` or a single
/// peak holding more than `0.9λ`.
pub fn continuation(
    data: &ProblemData,
    lambda_start: f64,
    lambda_end: f64,
    policy: StepPolicy,
    tol: f64,
    init: Option<&Field>,
) -> Result<ContinuationOutcome> {
    let coercive_below = 4.0 * PI * crate::spectrum::trudinger_constant(&data.cones).min(1.0);
    let at = |l: f64| data.with_lambda(l);
    let zero = Field::zeros(data.len());
    let start_data = at(lambda_start);
    let first = if lambda_start < coercive_below {
        minimize(&start_data, init.unwrap_or(&zero), tol)?
    } else {
        newton(&start_data, init.unwrap_or(&zero), tol, NEWTON_ITERATIONS, &[])?
    };
    if !first.converged() {
        return Err(Error::NotConverged {
            solver: "continuation start",
            iterations: first.iterations,
            residual: first.residual,
        });
    }
    let mut steps = vec![first];
    let mut switches = Vec::new();
    let direction = (lambda_end - lambda_start).signum();
    let mut h = policy.initial.min(policy.max);
    let mut lambda = lambda_start;
    let blown = |r: &SolveReport| {
        r.max_v > BLOWUP_MAX_V
            || r.mass_summary
                .iter()
                .any(|p| p.mass_over_pi * PI > BLOWUP_FRACTION * r.lambda)
    };
    if blown(&steps[0]) {
        return Ok(ContinuationOutcome {
            steps,
            termination: Termination::BlowUp,
            branch_switches: switches,
        });
    }
    while direction * (lambda_end - lambda) > 0.0 {
        let next = if direction * (lambda + direction * h - lambda_end) > 0.0 {
            lambda_end
        } else {
            lambda + direction * h
        };
        let prev = steps.last().expect("nonempty");
        let data_next = at(next);
        // tangent predictor: H dv/dλ = q − A/|M|
        let pd = at(lambda);
        let q = pd.density(&prev.solution)?;
        let dlam: Vec<f64> = q
            .iter()
            .zip(&data.ops.mass)
            .map(|(qi, a)| -(qi - a / data.ops.area))
            .collect();
        let guess = match newton_direction(&pd, &q, &dlam) {
            Some(t) => Field(prev.solution.iter().zip(&t).map(|(a, b)| a + (next - lambda) * b).collect()),
            None => prev.solution.clone(),
        };
        let coercive = next < coercive_below;
        let mut report = correct(&data_next, &guess, tol, coercive)?;
        if !report.converged() {
            report = correct(&data_next, &prev.solution, tol, coercive)?;
        }
        if !report.converged() {
            h *= 0.5;
            if h < policy.min {
                return Err(Error::NotConverged {
                    solver: "continuation step floor",
                    iterations: report.iterations,
                    residual: report.residual,
                });
            }
            continue;
        }
        if coercive {
            if let Some(b) = boundary_restart(&data_next, &report.solution, tol)? {
                if b.j_value < report.j_value - DISTINCT {
                    switches.push(next);
                    report = b;
                }
            }
            let (mu, w) = lowest_mode(&data_next, &report.solution)?;
            if mu < -1e-8 {
                let s = 1.0 / w.sup_norm();
                let mut best: Option<SolveReport> = None;
                for sign in [1.0, -1.0] {
                    let kicked = report.solution.add_scaled(sign * s, &w);
                    let r = minimize(&data_next, &kicked, tol)?;
                    if r.converged() && best.as_ref().is_none_or(|b| r.j_value < b.j_value) {
                        best = Some(r);
                    }
                }
                if let Some(b) = best {
                    if b.j_value < report.j_value {
                        switches.push(next);
                        report = b;
                    }
                }
            }
        }
        report.strategy = Strategy::Continue;
        lambda = next;
        let stop = blown(&report);
        steps.push(report);
        if stop {
            return Ok(ContinuationOutcome {
                steps,
                termination: Termination::BlowUp,
                branch_switches: switches,
            });
        }
        h = (h * policy.growth).min(policy.max);
    }
    Ok(ContinuationOutcome {
        steps,
        termination: Termination::Reached,
        branch_switches: switches,
    })
}
