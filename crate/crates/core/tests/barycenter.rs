use liouville_core::bubbles::{barycenter_project, boundary_pushforward, Atom, BarycenterConfig};
use liouville_core::functional::ProblemData;
use liouville_core::generate::cylinder;
use liouville_core::geodesic::Location;
use liouville_core::green::GreenMode;
use liouville_core::{ConeSet, Field};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data() -> ProblemData {
    let mesh = cylinder(3);
    let n = mesh.num_vertices();
    ProblemData::new(mesh, ConeSet::empty(), Field::constant(n, 1.0), GreenMode::Split, 1.0).unwrap()
}

#[test]
fn two_spikes_are_recovered() {
    let data = data();
    let a = data.mesh.nearest_vertex([1.0, 0.0, 0.3], true).unwrap();
    let b = data.mesh.nearest_vertex([-1.0, 0.0, 0.7], true).unwrap();
    let mut rho = vec![0.0; data.len()];
    rho[a] = 0.7 / data.ops.mass[a];
    rho[b] = 0.3 / data.ops.mass[b];
    let p = barycenter_project(&data, &Field(rho), 2, 0.2).unwrap();
    assert_eq!(p.config.atoms.len(), 2);
    assert_eq!(p.config.atoms[0].location, Location::Vertex(a));
    assert_eq!(p.config.atoms[1].location, Location::Vertex(b));
    assert!((p.config.atoms[0].weight - 0.7).abs() < 1e-6);
    assert!((p.config.atoms[1].weight - 0.3).abs() < 1e-6);
    assert!(p.uncaptured.abs() < 1e-12);
}

#[test]
fn projected_weights_sum_to_one() {
    let data = data();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let raw: Vec<f64> = (0..data.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().zip(&data.ops.mass).map(|(r, m)| r * m).sum();
        let rho = Field(raw.iter().map(|r| r / total).collect());
        let k = rng.gen_range(1..5);
        let p = barycenter_project(&data, &rho, k, 0.3).unwrap();
        assert_eq!(p.config.total_weight(), 1.0);
    }
}

#[test]
fn pushforward_is_idempotent() {
    let mesh = cylinder(3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let atoms: Vec<Location> = (0..3).map(|_| Location::Vertex(rng.gen_range(0..mesh.num_vertices()))).collect();
        let sigma = BarycenterConfig::uniform(&atoms).unwrap();
        let once = boundary_pushforward(&mesh, &sigma, 1).unwrap();
        let twice = boundary_pushforward(&mesh, &once, 1).unwrap();
        assert_eq!(once, twice);
        let lp = mesh.boundary_loop(1).unwrap();
        for atom in &once.atoms {
            match atom.location {
                Location::Vertex(v) => assert!(lp.contains(&v)),
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(once.total_weight(), sigma.total_weight());
    }
}

#[test]
fn bad_configurations_are_rejected() {
    let atom = |w| Atom { weight: w, location: Location::Vertex(0) };
    assert!(BarycenterConfig::new(vec![atom(0.5), atom(0.5)], 1).is_err());
    assert!(BarycenterConfig::new(vec![atom(0.5), atom(0.6)], 2).is_err());
    assert!(BarycenterConfig::new(vec![atom(-0.5), atom(1.5)], 2).is_err());
}
