//! End-to-end acceptance checks, one line per criterion.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use liouville_core::bubbles::{barycenter_project, boundary_pushforward, bubble_energy_report, BarycenterConfig};
use liouville_core::fem::Operators;
use liouville_core::functional::{metric_defects, ProblemData};
use liouville_core::generate::{cylinder, disk, pair_of_pants};
use liouville_core::geodesic::Location;
use liouville_core::green::{compute_green, GreenMode, CUTOFF_EDGES};
use liouville_core::solvers::minimize;
use liouville_core::spectrum::{classify, critical_values, geometric_lambda, theorem_applicability, Classification};
use liouville_core::{Cone, ConeSet, Field, SurfaceMesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cones_on(mesh: &SurfaceMesh, orders: &[f64]) -> ConeSet {
    let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)).collect();
    ConeSet::new(
        orders
            .iter()
            .enumerate()
            .map(|(i, &alpha)| Cone { vertex: interior[3 * i], alpha })
            .collect(),
    )
    .unwrap()
}

fn problem(mesh: SurfaceMesh, cones: ConeSet, lambda: f64) -> ProblemData {
    let n = mesh.num_vertices();
    ProblemData::new(mesh, cones, Field::constant(n, 1.0), GreenMode::Split, lambda).unwrap()
}

fn cylinder_cone(level: u32, alpha: f64, lambda: Option<f64>) -> ProblemData {
    let mesh = cylinder(level);
    let vertex = mesh.nearest_vertex([-1.0, 0.0, 0.5], true).unwrap();
    let cones = ConeSet::new(vec![Cone { vertex, alpha }]).unwrap();
    let lambda = lambda.unwrap_or_else(|| geometric_lambda(&mesh, &cones));
    problem(mesh, cones, lambda)
}

fn cli(dir: &Path, command: &str, config: &Value, extra: &[&str]) -> (std::process::Output, PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_liouville"))
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--output")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn spectrum_exactness() -> Outcome {
    let mesh = cylinder(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let count = rng.gen_range(0..=10);
        let orders: Vec<f64> = (0..count).map(|_| rng.gen_range(-0.99..3.0)).collect();
        let got = critical_values(&cones_on(&mesh, &orders), 40.0 * PI).unwrap().values_over_pi();
        let mut want = Vec::new();
        for mask in 0..(1usize << count) {
            let base: f64 = (0..count).filter(|j| mask >> j & 1 == 1).map(|j| 8.0 * (1.0 + orders[j])).sum();
            let mut n = 0.0;
            while 4.0 * n + base <= 40.0 + 1e-12 {
                want.push(4.0 * n + base);
                n += 1.0;
            }
        }
        want.sort_by(f64::total_cmp);
        want.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
        if got.len() != want.len() {
            return Err(format!("{orders:?}: {} values, enumeration gives {}", got.len(), want.len()));
        }
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    let half = critical_values(&cones_on(&mesh, &[-0.5]), 40.0 * PI).unwrap();
    let multiples = half.values_over_pi() == (0..=10).map(|n| 4.0 * n as f64).collect::<Vec<_>>();
    let dual = half.values[1].provenance.len() == 2;
    check(
        worst <= 1e-12 && multiples && dual,
        format!("50 sets, max deviation {worst:.1e}; α=-1/2 gives 4πn: {multiples}, two generators at 4π: {dual}"),
    )
}

fn classification() -> Outcome {
    let cyl = cylinder(2);
    let base = [
        (classify(&disk(2), &ConeSet::empty()), Classification::Critical),
        (classify(&cyl, &cones_on(&cyl, &[1.2])), Classification::Supercritical),
        (classify(&cyl, &cones_on(&cyl, &[-0.3])), Classification::Subcritical),
    ];
    if let Some((got, want)) = base.iter().find(|(g, w)| g != w) {
        return Err(format!("classified {got}, expected {want}"));
    }
    let pants = pair_of_pants(2);
    let dsk = disk(2);
    // (mesh, orders, λ/π, verdict)
    let cases: [(&SurfaceMesh, &[f64], f64, bool); 10] = [
        (&cyl, &[1.2], 4.8, true),
        (&cyl, &[1.2], 4.0, false),
        (&cyl, &[1.2], 4.0 + 1e-7 / PI, false),
        (&dsk, &[1.2], 4.8, false),
        (&cyl, &[], 6.0, false),
        (&cyl, &[-0.6, 2.0], 6.0, false),
        (&pants, &[2.5], 6.0, true),
        (&pants, &[0.5], 6.0, false),
        (&cyl, &[-0.5, 1.6], 5.0, true),
        (&cyl, &[0.5, 0.5], 6.0, false),
    ];
    for (i, (mesh, orders, l, want)) in cases.iter().enumerate() {
        let a = theorem_applicability(mesh, &cones_on(mesh, orders), l * PI).unwrap();
        if a.applicable != *want {
            return Err(format!("case {i}: applicable = {}, expected {want}", a.applicable));
        }
    }
    Ok("3 classifications and 10 applicability verdicts agree".into())
}

fn disk_green_error(level: u32) -> f64 {
    let exact = |r: f64| -r.ln() / (2.0 * PI) + r * r / (4.0 * PI) - 3.0 / (8.0 * PI);
    let mesh = disk(level);
    let ops = Operators::assemble(&mesh).unwrap();
    let g = compute_green(&mesh, &ops, 0, GreenMode::Split).unwrap();
    let keep = 2.0 * CUTOFF_EDGES * mesh.mean_edge_length();
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (i, p) in mesh.vertices().iter().enumerate() {
        let r = p[0].hypot(p[1]);
        if r > keep {
            err = err.max((g.value(i) - exact(r)).abs());
            scale = scale.max(exact(r).abs());
        }
    }
    err / scale
}

fn green_symmetry(level: u32) -> f64 {
    let mesh = disk(level);
    let ops = Operators::assemble(&mesh).unwrap();
    let p = mesh.nearest_vertex([0.3, 0.0, 0.0], true).unwrap();
    let q = mesh.nearest_vertex([-0.2, 0.35, 0.0], true).unwrap();
    let gp = compute_green(&mesh, &ops, p, GreenMode::Split).unwrap();
    let gq = compute_green(&mesh, &ops, q, GreenMode::Split).unwrap();
    (gp.value(q) - gq.value(p)).abs()
}

fn green_oracle() -> Outcome {
    let (e4, e5) = (disk_green_error(4), disk_green_error(5));
    let s: Vec<f64> = (3..=5).map(green_symmetry).collect();
    check(
        e4 <= 0.02 && e5 < e4 && s[1] < s[0] && s[2] < s[1],
        format!("error {e4:.2e} (r4) {e5:.2e} (r5); symmetry defect {:.1e} {:.1e} {:.1e}", s[0], s[1], s[2]),
    )
}

fn hemisphere_oracle() -> Outcome {
    let d: Vec<(f64, f64)> = (3..=5)
        .map(|level| {
            let mesh = disk(level);
            let ops = Operators::assemble(&mesh).unwrap();
            let n = mesh.num_vertices();
            let u = Field(mesh.vertices().iter().map(|p| (4.0 / (1.0 + p[0] * p[0] + p[1] * p[1]).powi(2)).ln()).collect());
            let m = metric_defects(&mesh, &ops, &u, &Field::constant(n, 1.0), 0.0, 1.0);
            (m.interior, m.boundary)
        })
        .collect();
    let ratios: Vec<(f64, f64)> = d.windows(2).map(|w| (w[0].0 / w[1].0, w[0].1 / w[1].1)).collect();
    check(
        ratios.iter().all(|&(a, b)| a >= 2.0 && b >= 2.0),
        format!("interior ratios {:.2} {:.2}, boundary ratios {:.2} {:.2}", ratios[0].0, ratios[1].0, ratios[0].1, ratios[1].1),
    )
}

fn derivative_consistency() -> Outcome {
    let data = cylinder_cone(3, 1.2, Some(15.0));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut field = |amp: f64| {
        let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        data.project(&Field(
            data.mesh
                .vertices()
                .iter()
                .map(|p| amp * (c[0] * p[0] + c[1] * p[1] * p[2] + c[2] * (2.0 * p[2]).cos() + c[3] * p[0] * p[1]))
                .collect(),
        ))
    };
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    let eps = 1e-5;
    for _ in 0..24 {
        let v = field(1.0);
        let w = field(1.0);
        let g = data.gradient(&v).unwrap();
        let exact: f64 = g.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        let fd = (data.functional(&v.add_scaled(eps, &w)).unwrap() - data.functional(&v.add_scaled(-eps, &w)).unwrap()) / (2.0 * eps);
        eg = eg.max((fd - exact).abs() / exact.abs().max(1e-8));
        let hw = data.hessian_apply(&v, &w).unwrap();
        let gp = data.gradient(&v.add_scaled(eps, &w)).unwrap();
        let gm = data.gradient(&v.add_scaled(-eps, &w)).unwrap();
        let num: f64 = (0..data.len()).map(|i| ((gp[i] - gm[i]) / (2.0 * eps) - hw[i]).powi(2)).sum();
        let den: f64 = hw.iter().map(|x| x * x).sum();
        eh = eh.max((num / den).sqrt());
    }
    check(eg <= 1e-6 && eh <= 1e-5, format!("24 probes, gradient {eg:.1e}, Hessian {eh:.1e}"))
}

fn coercive_solves() -> Outcome {
    let cases = [
        ("cylinder+{-0.3}", cylinder_cone(3, -0.3, None)),
        ("cylinder, λ=2π", problem(cylinder(3), ConeSet::empty(), 2.0 * PI)),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, data) in cases {
        let r = minimize(&data, &Field::zeros(data.len()), 1e-8).unwrap();
        let m = data.to_metric(&r.solution).unwrap();
        let total: f64 = data.weight.quadrature.iter().zip(m.v_hat.iter()).map(|(w, x)| m.curvature_sign * w * x.exp()).sum();
        let gb = (total - data.lambda).abs() / data.lambda.abs();
        ok &= r.converged() && r.residual <= 1e-8 && gb <= 1e-12;
        notes.push(format!("{name}: residual {:.1e}, Gauss-Bonnet {gb:.1e}", r.residual));
    }
    check(ok, notes.join("; "))
}

fn bubble_asymptotics() -> Outcome {
    let mesh = cylinder(4);
    let lp = mesh.boundary_loop(1).unwrap().to_vec();
    let mut notes = Vec::new();
    let mut ok = true;
    for (k, lambda) in [(1usize, 6.0 * PI), (2, 10.0 * PI)] {
        let data = problem(mesh.clone(), ConeSet::empty(), lambda);
        let atoms: Vec<Location> = (0..k).map(|i| Location::Vertex(lp[i * lp.len() / k])).collect();
        let sigma = BarycenterConfig::uniform(&atoms).unwrap();
        let r = bubble_energy_report(&data, &sigma, &[1e2, 1e3, 1e4]).unwrap();
        let fits = [r.dirichlet, r.log_mass, r.functional];
        ok &= fits.iter().all(|f| (0.85..=1.15).contains(&f.ratio()));
        notes.push(format!(
            "k={k}: slope ratios {:.5} {:.5} {:.5}",
            fits[0].ratio(),
            fits[1].ratio(),
            fits[2].ratio()
        ));
    }
    check(ok, notes.join("; "))
}

fn showcase_config() -> Value {
    json!({
        "mesh": { "generate": { "shape": "cylinder", "refinement": 3 } },
        "cones": [ { "position": [-1.0, 0.0, 0.5], "alpha": 1.2 } ],
        "curvature": { "constant": 1.0 },
        "lambda": 4.8 * PI,
    })
}

fn showcase(dir: &Path) -> Outcome {
    let (output, out) = cli(&dir.join("showcase"), "solve", &showcase_config(), &["--strategy", "minmax"]);
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    let report = read_json(&out.join("report.json"));
    let residuals: Vec<f64> = report["solutions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["residual"].as_f64().unwrap())
        .collect();
    let manifest = read_json(&out.join("manifest.json"));
    let starts = manifest["notes"]["succeeded_starts"].as_array().cloned().unwrap_or_default();
    let best = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        !residuals.is_empty() && best <= 1e-6 && !starts.is_empty(),
        format!(
            "{} solutions, best residual {best:.1e}, first successful start {}",
            residuals.len(),
            starts.first().map(|s| s["index"].to_string()).unwrap_or_else(|| "none".into())
        ),
    )
}

fn blowup(dir: &Path) -> Outcome {
    let config = json!({
        "mesh": { "generate": { "shape": "cylinder", "refinement": 3 } },
        "lambda_path": [2.0 * PI, 4.0 * PI - 0.1],
    });
    let (output, out) = cli(&dir.join("blowup"), "blowup", &config, &[]);
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    let b = read_json(&out.join("blowup.json"));
    let peaks = read_json(&out.join("mass_report.json"));
    let mass = peaks[0]["mass_over_pi"].as_f64().unwrap_or(f64::NAN);
    let single = b["single_boundary_peak"].as_bool() == Some(true);
    let on_boundary = b["boundary_distance"].as_f64() == Some(0.0);
    let gap = (mass - 4.0).abs() / 4.0;
    check(
        single && on_boundary && gap <= 0.15,
        format!(
            "stopped at λ = {:.4}π ({}), peak mass {mass:.3}π, single boundary peak {single}, on boundary {on_boundary}",
            b["lambda_over_pi"].as_f64().unwrap_or(f64::NAN),
            b["termination"].as_str().unwrap_or("?")
        ),
    )
}

fn barycenter() -> Outcome {
    let data = problem(cylinder(3), ConeSet::empty(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let mut sums_exact = true;
    for _ in 0..20 {
        let t = rng.gen_range(0.05..0.95);
        let a = rng.gen_range(0..data.len());
        let b = loop {
            let b = rng.gen_range(0..data.len());
            let (pa, pb) = (data.mesh.vertices()[a], data.mesh.vertices()[b]);
            if ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt() > 0.5 {
                break b;
            }
        };
        let mut rho = vec![0.0; data.len()];
        rho[a] = t / data.ops.mass[a];
        rho[b] = (1.0 - t) / data.ops.mass[b];
        let p = barycenter_project(&data, &Field(rho), 2, 0.1).unwrap();
        let weight_of = |v: usize| {
            p.config
                .atoms
                .iter()
                .find(|x| x.location == Location::Vertex(v))
                .map_or(f64::NAN, |x| x.weight)
        };
        worst = worst.max((weight_of(a) - t).abs()).max((weight_of(b) - (1.0 - t)).abs());
        sums_exact &= p.config.total_weight() == 1.0;
        let once = boundary_pushforward(&data.mesh, &p.config, 1).unwrap();
        let twice = boundary_pushforward(&data.mesh, &once, 1).unwrap();
        if once != twice {
            return Err("pushforward is not idempotent".into());
        }
        sums_exact &= once.total_weight() == 1.0;
    }
    check(
        worst <= 1e-6 && sums_exact,
        format!("20 two-spike densities, weight error {worst:.1e}, weights sum to 1 exactly: {sums_exact}"),
    )
}

fn json_reports(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn reproducibility(dir: &Path) -> Outcome {
    let cylinder_cfg = showcase_config();
    let plain = json!({
        "mesh": { "generate": { "shape": "cylinder", "refinement": 2 } },
        "lambda": 2.0 * PI,
        "lambda_path": [2.0 * PI, 3.0 * PI],
        "bubble": { "count": 2 },
        "probe": { "refinements": [2, 3], "region": { "centre": [1.0, 0.0, 0.0], "radius": 0.2, "collar": 0.2 }, "c_over_pi": 3.6, "random_starts": 2, "max_iterations": 50 },
    });
    let runs: [(&str, &Value, &[&str]); 9] = [
        ("classify", &cylinder_cfg, &[]),
        ("spectrum", &cylinder_cfg, &[]),
        ("green", &cylinder_cfg, &[]),
        ("solve", &plain, &[]),
        ("solve", &cylinder_cfg, &["--strategy", "minmax"]),
        ("continue", &plain, &[]),
        ("bubble", &plain, &[]),
        ("blowup", &plain, &[]),
        ("check", &plain, &[]),
    ];
    let mut compared = 0;
    for (i, (command, config, extra)) in runs.iter().enumerate() {
        let mut reports = Vec::new();
        for rep in 0..2 {
            let (output, out) = cli(&dir.join(format!("repro_{i}_{rep}")), command, config, extra);
            if !output.status.success() {
                return Err(format!("{command}: {}", String::from_utf8_lossy(&output.stderr)));
            }
            reports.push(json_reports(&out));
        }
        if reports[0].is_empty() || reports[0] != reports[1] {
            return Err(format!("{command} {extra:?}: reports differ between runs"));
        }
        compared += reports[0].len();
    }
    Ok(format!("{} commands, {compared} JSON reports byte-identical", runs.len()))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("spectrum exactness", Box::new(spectrum_exactness)),
        ("classification", Box::new(classification)),
        ("Green oracle", Box::new(green_oracle)),
        ("hemisphere oracle", Box::new(hemisphere_oracle)),
        ("derivative consistency", Box::new(derivative_consistency)),
        ("coercive solves", Box::new(coercive_solves)),
        ("bubble asymptotics", Box::new(bubble_asymptotics)),
        ("minmax showcase", Box::new(|| showcase(dir))),
        ("blow-up quantization", Box::new(|| blowup(dir))),
        ("barycenter properties", Box::new(barycenter)),
        ("reproducibility", Box::new(|| reproducibility(dir))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.1}s) {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
