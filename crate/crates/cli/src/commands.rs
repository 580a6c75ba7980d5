use std::f64::consts::PI;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use liouville_core::bubbles::{bubble_energy_report, mass_spectrum, Atom, BarycenterConfig, MassClass};
use liouville_core::functional::{curvature_check, metric_defects, ProblemData};
use liouville_core::geodesic::{graph_distance, Location};
use liouville_core::green::compute_green;
use liouville_core::probe::mt_probe;
use liouville_core::solvers::{
    continuation, default_mass_radius, minimize, solve_minmax, ContinuationOutcome, SolveReport, Strategy, Termination,
};
use liouville_core::spectrum::{
    classify, critical_values, geometric_lambda, singular_euler, theorem_applicability, trudinger_constant,
    Applicability, Classification, CriticalSpectrum,
};
use liouville_core::{ConeSet, Field, SurfaceMesh};

use crate::config::RunConfig;
use crate::output::Run;

/// A run that finished but did not produce what was asked; exit code 2.
#[derive(Debug)]
pub struct SolverFailure {
    pub message: String,
    pub detail: serde_json::Value,
}

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for SolverFailure {}

fn fail(message: impl Into<String>, detail: impl Serialize) -> anyhow::Error {
    SolverFailure {
        message: message.into(),
        detail: serde_json::to_value(detail).unwrap_or(serde_json::Value::Null),
    }
    .into()
}

struct Setup {
    mesh: SurfaceMesh,
    cones: ConeSet,
    lambda: f64,
}

fn setup(config: &RunConfig) -> Result<Setup> {
    let (mesh, cones) = config.build_mesh()?;
    let mesh = mesh.with_cones(&cones)?;
    let lambda = config.lambda.unwrap_or_else(|| geometric_lambda(&mesh, &cones));
    if !lambda.is_finite() {
        bail!("lambda must be finite");
    }
    Ok(Setup { mesh, cones, lambda })
}

fn problem(config: &RunConfig, s: &Setup, lambda: f64) -> Result<ProblemData> {
    let k = config.build_curvature(s.mesh.num_vertices())?;
    Ok(ProblemData::new(s.mesh.clone(), s.cones.clone(), k, config.green_mode, lambda)?)
}

#[derive(Serialize)]
struct ClassifyReport {
    vertices: usize,
    triangles: usize,
    boundary_components: usize,
    euler_characteristic: i64,
    cone_orders: Vec<f64>,
    singular_euler: f64,
    trudinger_constant: f64,
    classification: Classification,
    geometric_lambda_over_pi: f64,
    lambda_over_pi: f64,
    spectrum: CriticalSpectrum,
    applicability: Applicability,
}

pub fn classify_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let s = setup(config)?;
    let geometric = geometric_lambda(&s.mesh, &s.cones);
    let spectrum = critical_values(&s.cones, config.lambda_max.unwrap_or(2.0 * s.lambda.max(0.0)))?;
    let report = ClassifyReport {
        vertices: s.mesh.num_vertices(),
        triangles: s.mesh.num_triangles(),
        boundary_components: s.mesh.boundary_loops().len(),
        euler_characteristic: s.mesh.euler_characteristic(),
        cone_orders: s.cones.orders(),
        singular_euler: singular_euler(&s.mesh, &s.cones),
        trudinger_constant: trudinger_constant(&s.cones),
        classification: classify(&s.mesh, &s.cones),
        geometric_lambda_over_pi: geometric / PI,
        lambda_over_pi: s.lambda / PI,
        spectrum,
        applicability: theorem_applicability(&s.mesh, &s.cones, s.lambda)?,
    };
    run.lap("classify");
    run.json("classify.json", &report)
}

pub fn spectrum_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let s = setup(config)?;
    let top = config.lambda_max.unwrap_or(2.0 * s.lambda.max(0.0));
    let spectrum = critical_values(&s.cones, top)?;
    run.lap("spectrum");
    run.json("spectrum.json", &spectrum)
}

pub fn green_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let s = setup(config)?;
    let poles: Vec<usize> = match config.pole {
        Some(p) => vec![s
            .mesh
            .nearest_vertex(p, true)
            .ok_or_else(|| anyhow!("pole: mesh has no interior vertex"))?],
        None if !s.cones.is_empty() => s.cones.entries().iter().map(|c| c.vertex).collect(),
        None => bail!("green needs cones or a 'pole' position"),
    };
    let ops = liouville_core::fem::Operators::assemble(&s.mesh)?;
    run.lap("assemble");
    for pole in poles {
        let g = compute_green(&s.mesh, &ops, pole, config.green_mode)?;
        run.field(&format!("green_{pole}.field"), &g.values())?;
        run.json(&format!("green_{pole}.json"), &g.sidecar())?;
    }
    run.lap("green");
    Ok(())
}

/// Solution fields next to a report: `v` and, when defined, the metric `u`.
fn write_solution(run: &mut Run, data: &ProblemData, stem: &str, r: &SolveReport) -> Result<()> {
    run.field(&format!("{stem}.field"), &r.solution)?;
    if data.lambda != 0.0 {
        let m = data.to_metric(&r.solution)?;
        run.field(&format!("{stem}_u.field"), &m.u)?;
    }
    Ok(())
}

pub fn solve_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    match config.strategy {
        Strategy::Continue => return continue_cmd(config, run),
        Strategy::Min => {
            let s = setup(config)?;
            let data = problem(config, &s, s.lambda)?;
            run.lap("setup");
            let r = minimize(&data, &Field::zeros(data.len()), config.tol)?;
            run.lap("minimize");
            run.json("report.json", &r)?;
            write_solution(run, &data, "solution", &r)?;
            if !r.converged() {
                return Err(fail(
                    format!("minimize stopped with status {:?}", r.status),
                    serde_json::json!({ "status": r.status, "residual": r.residual, "iterations": r.iterations }),
                ));
            }
        }
        Strategy::Minmax => {
            let s = setup(config)?;
            let data = problem(config, &s, s.lambda)?;
            run.lap("setup");
            let k = config.k.unwrap_or((s.lambda / (4.0 * PI)).floor().max(0.0) as usize);
            let out = solve_minmax(&data, k, &config.grid, config.tol)?;
            run.lap("minmax");
            run.json("report.json", &out)?;
            for (i, r) in out.solutions.iter().enumerate() {
                write_solution(run, &data, &format!("solution_{i}"), r)?;
            }
            let succeeded: Vec<_> = out
                .starts
                .iter()
                .filter(|st| st.solution.is_some())
                .map(|st| serde_json::json!({ "index": st.index, "atoms": st.atoms, "scale": st.scale, "solution": st.solution }))
                .collect();
            run.note("succeeded_starts", &succeeded)?;
            if out.solutions.is_empty() {
                return Err(fail("no grid start converged", &out.starts));
            }
        }
    }
    Ok(())
}

fn path(config: &RunConfig) -> Result<[f64; 2]> {
    config
        .lambda_path
        .ok_or_else(|| anyhow!("this command needs 'lambda_path' (or --lambda-path a:b)"))
}

fn run_continuation(config: &RunConfig, run: &mut Run) -> Result<(ProblemData, ContinuationOutcome)> {
    let [a, b] = path(config)?;
    let s = setup(config)?;
    let data = problem(config, &s, a)?;
    run.lap("setup");
    let out = continuation(&data, a, b, config.steps, config.tol, None).map_err(|e| match e {
        liouville_core::Error::NotConverged { .. } => fail(e.to_string(), serde_json::json!({ "lambda_path": [a, b] })),
        other => other.into(),
    })?;
    run.lap("continuation");
    Ok((data, out))
}

pub fn continue_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let (data, out) = run_continuation(config, run)?;
    run.json("continuation.json", &out)?;
    let last = out.steps.last().expect("continuation has a first step");
    write_solution(run, &data.with_lambda(last.lambda), "terminal", last)
}

#[derive(Serialize)]
struct BlowupReport {
    termination: Termination,
    lambda_over_pi: f64,
    max_v: f64,
    radius: f64,
    peaks: usize,
    /// Graph distance from the strongest peak to the nearest boundary loop.
    boundary_distance: Option<f64>,
    single_boundary_peak: bool,
    relative_gap: Option<f64>,
}

pub fn blowup_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let (data, out) = run_continuation(config, run)?;
    let last = out.steps.last().expect("continuation has a first step");
    let d = data.with_lambda(last.lambda);
    let radius = default_mass_radius(&d);
    let peaks = mass_spectrum(&d, &last.solution, radius)?;
    let boundary_distance = peaks.first().map(|p| {
        let dist = graph_distance(&d.mesh, &Location::Vertex(p.location.vertex));
        d.mesh.boundary_loops().iter().flatten().map(|&v| dist[v]).fold(f64::INFINITY, f64::min)
    });
    let report = BlowupReport {
        termination: out.termination,
        lambda_over_pi: last.lambda / PI,
        max_v: last.max_v,
        radius,
        peaks: peaks.len(),
        boundary_distance,
        single_boundary_peak: peaks.len() == 1 && peaks[0].class == MassClass::Boundary,
        relative_gap: peaks.first().map(|p| p.relative_gap),
    };
    run.lap("mass");
    run.json("blowup.json", &report)?;
    run.json("mass_report.json", &peaks)?;
    run.json("continuation.json", &out)?;
    write_solution(run, &d, "terminal", last)
}

pub fn bubble_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let s = setup(config)?;
    let data = problem(config, &s, s.lambda)?;
    run.lap("setup");
    let spec = &config.bubble;
    let vertices: Vec<usize> = if spec.vertices.is_empty() {
        let lp = s
            .mesh
            .boundary_loop(spec.label)
            .ok_or_else(|| anyhow!("bubble.label: no boundary loop {}", spec.label))?;
        if spec.count == 0 || spec.count > lp.len() {
            bail!("bubble.count must be between 1 and {}", lp.len());
        }
        (0..spec.count).map(|i| lp[i * lp.len() / spec.count]).collect()
    } else {
        spec.vertices.clone()
    };
    let t = 1.0 / vertices.len() as f64;
    let mut atoms: Vec<Atom> = vertices
        .iter()
        .map(|&v| Atom { weight: t, location: Location::Vertex(v) })
        .collect();
    let rest: f64 = atoms[1..].iter().map(|a| a.weight).sum();
    atoms[0].weight = 1.0 - rest;
    let sigma = BarycenterConfig::new(atoms, vertices.len())?;
    let report = bubble_energy_report(&data, &sigma, &spec.scales)?;
    run.lap("bubble");
    run.json("bubble.json", &report)
}

#[derive(Serialize)]
struct MeshCheck {
    vertices: usize,
    edges: usize,
    triangles: usize,
    euler_characteristic: i64,
    boundary_loop_lengths: Vec<usize>,
    area: f64,
    /// `max |L_ij − L_ji|`.
    stiffness_asymmetry: f64,
    /// `max |Σ_j L_ij|`.
    stiffness_row_sum: f64,
}

#[derive(Serialize)]
struct FieldCheck {
    lambda: f64,
    #[serde(rename = "J_value")]
    j_value: f64,
    residual: f64,
    zero_mean_offset: f64,
    total_curvature: Option<f64>,
    gauss_bonnet_relative_error: Option<f64>,
    interior_defect: Option<f64>,
    boundary_defect: Option<f64>,
    curvature_max_relative_error: Option<f64>,
}

pub fn check_cmd(config: &RunConfig, run: &mut Run) -> Result<()> {
    let s = setup(config)?;
    let data = problem(config, &s, s.lambda)?;
    run.lap("setup");
    let l = &data.ops.stiffness;
    let mut asym: f64 = 0.0;
    let mut rows: f64 = 0.0;
    for (i, row) in l.outer_iterator().enumerate() {
        rows = rows.max(row.iter().map(|(_, w)| w).sum::<f64>().abs());
        for (j, &w) in row.iter() {
            asym = asym.max((w - l.get(j, i).copied().unwrap_or(0.0)).abs());
        }
    }
    let mesh = MeshCheck {
        vertices: s.mesh.num_vertices(),
        edges: s.mesh.edges().len(),
        triangles: s.mesh.num_triangles(),
        euler_characteristic: s.mesh.euler_characteristic(),
        boundary_loop_lengths: s.mesh.boundary_loops().iter().map(Vec::len).collect(),
        area: data.ops.area,
        stiffness_asymmetry: asym,
        stiffness_row_sum: rows,
    };
    run.json("check.json", &mesh)?;
    if let Some(p) = &config.field {
        let v = Field::load(p).with_context(|| format!("field {}", p.display()))?;
        if v.len() != data.len() {
            bail!("field: {} values for {} vertices", v.len(), data.len());
        }
        let mut report = FieldCheck {
            lambda: data.lambda,
            j_value: data.functional(&v)?,
            residual: data.residual(&v)?,
            zero_mean_offset: v.mean(&data.ops.mass),
            total_curvature: None,
            gauss_bonnet_relative_error: None,
            interior_defect: None,
            boundary_defect: None,
            curvature_max_relative_error: None,
        };
        if data.lambda != 0.0 {
            let m = data.to_metric(&v)?;
            let total: f64 = data
                .weight
                .quadrature
                .iter()
                .zip(m.v_hat.iter())
                .map(|(w, x)| m.curvature_sign * w * x.exp())
                .sum();
            report.total_curvature = Some(total);
            report.gauss_bonnet_relative_error = Some((total - data.lambda).abs() / data.lambda.abs());
            if data.cones.is_empty() {
                let k = Field(data.curvature.iter().map(|k| m.curvature_sign * k).collect());
                let defects = metric_defects(&data.mesh, &data.ops, &m.u, &k, data.background_curvature(), 0.0);
                report.interior_defect = Some(defects.interior);
                report.boundary_defect = Some(defects.boundary);
                let c = curvature_check(&data.mesh, &m.u);
                report.curvature_max_relative_error = Some(c.max_relative_error(&data.mesh, &k, &data.cones, 3));
            }
        }
        run.lap("field");
        run.json("field_check.json", &report)?;
    }
    if let Some(spec) = &config.probe {
        let levels = spec
            .refinements
            .iter()
            .map(|&r| {
                let c = config.at_refinement(r)?;
                let s = setup(&c)?;
                problem(&c, &s, s.lambda)
            })
            .collect::<Result<Vec<_>>>()?;
        let report = mt_probe(&levels, &spec.region, &config.probe_config(spec))?;
        run.lap("probe");
        run.json("probe.json", &report)?;
    }
    Ok(())
}
