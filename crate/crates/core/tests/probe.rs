use std::f64::consts::PI;

use liouville_core::functional::ProblemData;
use liouville_core::generate::cylinder;
use liouville_core::green::GreenMode;
use liouville_core::probe::{mt_probe, probe_objective, Growth, ProbeConfig, ProbeRegion};
use liouville_core::{ConeSet, Field};

fn level(r: u32) -> ProblemData {
    let mesh = cylinder(r);
    let n = mesh.num_vertices();
    ProblemData::new(mesh, ConeSet::empty(), Field::constant(n, 1.0), GreenMode::Split, 1.0).unwrap()
}

fn boundary_region() -> ProbeRegion {
    ProbeRegion { centre: [1.0, 0.0, 0.0], radius: 0.2, collar: 0.2 }
}

#[test]
fn objective_converges_for_a_fixed_field() {
    let values: Vec<f64> = (2..=5)
        .map(|r| {
            let data = level(r);
            let v = Field(data.mesh.vertices().iter().map(|p| (2.0 * p[0]).sin() * p[2]).collect());
            probe_objective(&data, &boundary_region(), 3.6 * PI, 0.05, &v).unwrap()
        })
        .collect();
    let d: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(d[2] < d[1] && d[1] < d[0], "{values:?}");
}

#[test]
fn large_constant_grows_with_refinement() {
    let levels: Vec<ProblemData> = (2..=4).map(level).collect();
    let config = ProbeConfig { c: 6.0 * PI, random_starts: 2, max_iterations: 200, ..ProbeConfig::default() };
    let report = mt_probe(&levels, &boundary_region(), &config).unwrap();
    assert_eq!(report.growth, Growth::Divergent);
    assert!(report.slope > 5.0, "{}", report.slope);
    let small = ProbeConfig { c: 3.6 * PI, ..config };
    let bounded = mt_probe(&levels, &boundary_region(), &small).unwrap();
    assert!(bounded.slope < 0.5 * report.slope, "{} {}", bounded.slope, report.slope);
}

#[test]
fn probe_is_reproducible() {
    let levels: Vec<ProblemData> = (2..=3).map(level).collect();
    let config = ProbeConfig { random_starts: 2, max_iterations: 100, ..ProbeConfig::default() };
    let a = mt_probe(&levels, &boundary_region(), &config).unwrap();
    let b = mt_probe(&levels, &boundary_region(), &config).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
