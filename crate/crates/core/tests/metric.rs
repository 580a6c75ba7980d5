use liouville_core::fem::Operators;
use liouville_core::functional::metric_defects;
use liouville_core::generate::disk;
use liouville_core::Field;

// The upper hemisphere, stereographically: K = 1 and a geodesic equator.
fn hemisphere_defects(level: u32) -> (f64, f64) {
    let mesh = disk(level);
    let ops = Operators::assemble(&mesh).unwrap();
    let n = mesh.num_vertices();
    let u = Field(
        mesh.vertices()
            .iter()
            .map(|p| (4.0 / (1.0 + p[0] * p[0] + p[1] * p[1]).powi(2)).ln())
            .collect(),
    );
    let d = metric_defects(&mesh, &ops, &u, &Field::constant(n, 1.0), 0.0, 1.0);
    (d.interior, d.boundary)
}

#[test]
fn hemisphere_defects_halve_per_level() {
    let d: Vec<(f64, f64)> = (3..=5).map(hemisphere_defects).collect();
    for w in d.windows(2) {
        assert!(w[0].0 / w[1].0 >= 2.0, "{d:?}");
        assert!(w[0].1 / w[1].1 >= 2.0, "{d:?}");
    }
}

#[test]
fn wrong_curvature_is_detected() {
    let mesh = disk(4);
    let ops = Operators::assemble(&mesh).unwrap();
    let n = mesh.num_vertices();
    let u = Field(mesh.vertices().iter().map(|p| (4.0 / (1.0 + p[0] * p[0] + p[1] * p[1]).powi(2)).ln()).collect());
    let good = metric_defects(&mesh, &ops, &u, &Field::constant(n, 1.0), 0.0, 1.0);
    let bad = metric_defects(&mesh, &ops, &u, &Field::constant(n, 1.5), 0.0, 1.0);
    assert!(bad.interior > 10.0 * good.interior);
}
