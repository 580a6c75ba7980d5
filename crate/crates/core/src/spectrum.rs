//! Singular Euler characteristic, Trudinger constant, the sub/critical/super
//! classification and the critical set
//! `Γ_α = {4πn + 8πΣ_{j∈J}(1+α_j)}`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{ConeSet, SurfaceMesh};

/// Absolute tolerance on values divided by π.
pub const DEDUP_TOL: f64 = 1e-12;
/// Tolerance of the χ vs τ comparison.
pub const CLASSIFY_TOL: f64 = 1e-12;
/// Smallest admissible distance from λ to Γ_α for the min-max solver.
pub const GUARD_BAND: f64 = 1e-6;
/// Largest cone count for exhaustive subset enumeration.
pub const MAX_CONES: usize = 24;

/// `1 + min_j min(α_j, 0)`; 1 for no cones.
pub fn trudinger_constant(cones: &ConeSet) -> f64 {
    1.0 + cones.orders().into_iter().fold(0.0, f64::min)
}

/// `χ(M) + Σ α_j` with `χ(M) = V − E + F`.
pub fn singular_euler(mesh: &SurfaceMesh, cones: &ConeSet) -> f64 {
    mesh.euler_characteristic() as f64 + cones.orders().iter().sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Subcritical => "subcritical",
            Classification::Critical => "critical",
            Classification::Supercritical => "supercritical",
        })
    }
}

pub fn classify(mesh: &SurfaceMesh, cones: &ConeSet) -> Classification {
    let chi = singular_euler(mesh, cones);
    let tau = trudinger_constant(cones);
    if (chi - tau).abs() <= CLASSIFY_TOL {
        Classification::Critical
    } else if chi < tau {
        Classification::Subcritical
    } else {
        Classification::Supercritical
    }
}

/// One `(n, J)` pair; `J` holds 1-based cone indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Generator {
    pub n: u32,
    #[serde(rename = "J")]
    pub subset: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value_over_pi: f64,
    pub provenance: Vec<Generator>,
}

impl CriticalValue {
    pub fn value(&self) -> f64 {
        self.value_over_pi * PI
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriticalSpectrum {
    pub values: Vec<CriticalValue>,
}

impl CriticalSpectrum {
    pub fn values_over_pi(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.value_over_pi).collect()
    }

    /// The critical value closest to `lambda` and `|λ − γ|`.
    pub fn nearest(&self, lambda: f64) -> Option<(&CriticalValue, f64)> {
        self.values
            .iter()
            .map(|c| (c, (c.value() - lambda).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Every element of `Γ_α` not exceeding `lambda_max`, ascending, merged
/// within [`DEDUP_TOL`] (on the `1/π` scale) with all generators kept.
pub fn critical_values(cones: &ConeSet, lambda_max: f64) -> Result<CriticalSpectrum> {
    if !(lambda_max >= 0.0) || !lambda_max.is_finite() {
        return Err(Error::InvalidInput(format!("λ_max = {lambda_max} must be finite and ≥ 0")));
    }
    let orders = cones.orders();
    let count = orders.len();
    if count > MAX_CONES {
        return Err(Error::InvalidCones(format!(
            "{count} cones exceed the enumeration limit of {MAX_CONES}"
        )));
    }
    let top = lambda_max / PI + DEDUP_TOL;
    let mut raw: Vec<(f64, Generator)> = Vec::new();
    for mask in 0u32..(1u32 << count) {
        let subset: Vec<usize> = (0..count).filter(|j| mask >> j & 1 == 1).collect();
        let base: f64 = subset.iter().map(|&j| 8.0 * (1.0 + orders[j])).sum();
        let mut n = 0u32;
        while 4.0 * n as f64 + base <= top {
            raw.push((
                4.0 * n as f64 + base,
                Generator {
                    n,
                    subset: subset.iter().map(|j| j + 1).collect(),
                },
            ));
            n += 1;
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut values: Vec<CriticalValue> = Vec::new();
    for (value, generator) in raw {
        match values.last_mut() {
            Some(last) if (value - last.value_over_pi).abs() <= DEDUP_TOL => {
                last.provenance.push(generator)
            }
            _ => values.push(CriticalValue {
                value_over_pi: value,
                provenance: vec![generator],
            }),
        }
    }
    for v in &mut values {
        v.provenance.sort();
    }
    Ok(CriticalSpectrum { values })
}

/// The critical value nearest to `lambda` together with the distance.
pub fn nearest_critical(cones: &ConeSet, lambda: f64) -> Result<(CriticalValue, f64)> {
    // Γ_α contains every 4πn, so a value lies within 4π above any λ ≥ 0
    let spectrum = critical_values(cones, lambda.max(0.0) + 4.0 * PI)?;
    let (c, d) = spectrum
        .nearest(lambda)
        .expect("spectrum always contains 0");
    Ok((c.clone(), d))
}

/// The hypotheses of the existence theorem, checked one by one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Applicability {
    pub orders_at_least_minus_half: bool,
    pub boundary_components: usize,
    pub at_least_two_boundary_components: bool,
    pub classification: Classification,
    pub supercritical: bool,
    pub lambda_over_pi: f64,
    pub nearest_critical_over_pi: f64,
    pub distance_over_pi: f64,
    pub off_spectrum: bool,
    pub applicable: bool,
}

pub fn theorem_applicability(mesh: &SurfaceMesh, cones: &ConeSet, lambda: f64) -> Result<Applicability> {
    let (nearest, distance) = nearest_critical(cones, lambda)?;
    let classification = classify(mesh, cones);
    let orders = cones.orders_at_least_minus_half();
    let boundary_components = mesh.boundary_loops().len();
    let two = boundary_components >= 2;
    let supercritical = classification == Classification::Supercritical;
    let off_spectrum = distance >= GUARD_BAND;
    Ok(Applicability {
        orders_at_least_minus_half: orders,
        boundary_components,
        at_least_two_boundary_components: two,
        classification,
        supercritical,
        lambda_over_pi: lambda / PI,
        nearest_critical_over_pi: nearest.value_over_pi,
        distance_over_pi: distance / PI,
        off_spectrum,
        applicable: orders && two && supercritical && off_spectrum,
    })
}

/// `4πχ(M,α)`, the value of λ fixed by Gauss–Bonnet.
pub fn geometric_lambda(mesh: &SurfaceMesh, cones: &ConeSet) -> f64 {
    4.0 * PI * singular_euler(mesh, cones)
}
