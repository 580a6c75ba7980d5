//! Run configuration: one JSON document, overridden by command-line flags.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use liouville_core::generate::{generate, Shape};
use liouville_core::green::GreenMode;
use liouville_core::mesh::load_mesh;
use liouville_core::probe::{ProbeConfig, ProbeRegion};
use liouville_core::solvers::{Grid, StepPolicy, Strategy, DEFAULT_TOL};
use liouville_core::{Cone, ConeSet, Field, SurfaceMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    File(PathBuf),
    Generate { shape: Shape, refinement: u32 },
}

/// A cone at a vertex, or at the interior vertex nearest a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureSpec {
    Constant(f64),
    File(PathBuf),
}

/// Atoms for `bubble`: boundary vertices, or `count` equispaced ones on
/// `label` when `vertices` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleSpec {
    pub vertices: Vec<usize>,
    pub count: usize,
    pub label: usize,
    pub scales: Vec<f64>,
}

impl Default for BubbleSpec {
    fn default() -> Self {
        BubbleSpec {
            vertices: Vec::new(),
            count: 1,
            label: 1,
            scales: vec![1e2, 1e3, 1e4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub refinements: Vec<u32>,
    pub region: ProbeRegion,
    /// `c` in units of π.
    pub c_over_pi: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_starts")]
    pub random_starts: usize,
    #[serde(default = "default_probe_iterations")]
    pub max_iterations: usize,
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_starts() -> usize {
    4
}

fn default_probe_iterations() -> usize {
    400
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub cones: Vec<ConeSpec>,
    pub curvature: CurvatureSpec,
    /// Defaults to the geometric value `4πχ(M,α)`.
    pub lambda: Option<f64>,
    pub lambda_path: Option<[f64; 2]>,
    pub lambda_max: Option<f64>,
    pub strategy: Strategy,
    pub k: Option<usize>,
    pub grid: Grid,
    pub tol: f64,
    pub green_mode: GreenMode,
    /// Pole for `green` when there are no cones.
    pub pole: Option<[f64; 3]>,
    pub steps: StepPolicy,
    pub bubble: BubbleSpec,
    pub probe: Option<ProbeSpec>,
    /// Field checked by `check`.
    pub field: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Generate {
                shape: Shape::Cylinder,
                refinement: 3,
            },
            cones: Vec::new(),
            curvature: CurvatureSpec::Constant(1.0),
            lambda: None,
            lambda_path: None,
            lambda_max: None,
            strategy: Strategy::Min,
            k: None,
            grid: Grid::default(),
            tol: DEFAULT_TOL,
            green_mode: GreenMode::Split,
            pole: None,
            steps: StepPolicy::default(),
            bubble: BubbleSpec::default(),
            probe: None,
            field: None,
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Flag values that replace config keys when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub lambda_path: Option<[f64; 2]>,
    pub k: Option<usize>,
    pub grid: Option<Grid>,
    pub tol: Option<f64>,
    pub strategy: Option<Strategy>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(l) = o.lambda {
            self.lambda = Some(l);
        }
        if let Some(p) = o.lambda_path {
            self.lambda_path = Some(p);
        }
        if let Some(k) = o.k {
            self.k = Some(k);
        }
        if let Some(g) = &o.grid {
            self.grid = g.clone();
        }
        if let Some(t) = o.tol {
            self.tol = t;
        }
        if let Some(s) = o.strategy {
            self.strategy = s;
        }
        if let Some(p) = &o.output {
            self.output = p.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    /// Relative paths in the config are taken from the config's directory.
    pub fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let MeshSource::File(p) = &mut self.mesh {
            fix(p);
        }
        if let CurvatureSpec::File(p) = &mut self.curvature {
            fix(p);
        }
        if let Some(p) = &mut self.field {
            fix(p);
        }
    }

    pub fn build_mesh(&self) -> Result<(SurfaceMesh, ConeSet)> {
        let (mesh, file_cones) = match &self.mesh {
            MeshSource::File(p) => load_mesh(p).with_context(|| format!("mesh {}", p.display()))?,
            MeshSource::Generate { shape, refinement } => (generate(*shape, *refinement), ConeSet::empty()),
        };
        let mut entries = file_cones.entries().to_vec();
        for (i, c) in self.cones.iter().enumerate() {
            let vertex = match (c.vertex, c.position) {
                (Some(v), None) => v,
                (None, Some(p)) => mesh
                    .nearest_vertex(p, true)
                    .ok_or_else(|| anyhow!("cones[{i}]: mesh has no interior vertex"))?,
                _ => bail!("cones[{i}]: give exactly one of 'vertex' or 'position'"),
            };
            entries.push(Cone { vertex, alpha: c.alpha });
        }
        let cones = ConeSet::new(entries).context("cones")?;
        Ok((mesh, cones))
    }

    pub fn build_curvature(&self, n: usize) -> Result<Field> {
        match &self.curvature {
            CurvatureSpec::Constant(k) => Ok(Field::constant(n, *k)),
            CurvatureSpec::File(p) => {
                let f = Field::load(p).with_context(|| format!("curvature {}", p.display()))?;
                if f.len() != n {
                    bail!("curvature: {} values for {n} vertices", f.len());
                }
                Ok(f)
            }
        }
    }

    pub fn probe_config(&self, spec: &ProbeSpec) -> ProbeConfig {
        ProbeConfig {
            c: spec.c_over_pi * PI,
            epsilon: spec.epsilon,
            random_starts: spec.random_starts,
            seed: self.seed,
            max_iterations: spec.max_iterations,
        }
    }

    /// Mesh source at another refinement level, for the probe.
    pub fn at_refinement(&self, refinement: u32) -> Result<RunConfig> {
        match self.mesh {
            MeshSource::Generate { shape, .. } => Ok(RunConfig {
                mesh: MeshSource::Generate { shape, refinement },
                ..self.clone()
            }),
            MeshSource::File(_) => bail!("probe: refinement levels need a generated mesh"),
        }
    }
}

pub fn parse_lambda_path(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok([a, b])
}

/// `positions:scale,scale,...[@label]`, e.g. `8:10,100,1000@1`.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let (body, label) = match s.split_once('@') {
        Some((b, l)) => (b, l.trim().parse::<usize>().map_err(|e| format!("label: {e}"))?),
        None => (s, Grid::default().label),
    };
    let (p, scales) = body.split_once(':').ok_or("expected positions:scales")?;
    let positions = p.trim().parse::<usize>().map_err(|e| format!("positions: {e}"))?;
    let scales = scales
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("scale {x}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grid { positions, scales, label })
}

pub fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "min" => Ok(Strategy::Min),
        "minmax" => Ok(Strategy::Minmax),
        "continue" => Ok(Strategy::Continue),
        other => Err(format!("unknown strategy '{other}' (min, minmax, continue)")),
    }
}
