//! Triangle quadrature with an optional `d^{2α}` singularity at one corner.
//!
//! Moments are taken against the three barycentric hat functions so the
//! results feed directly into lumped vertex weights.

use crate::mesh::{cross3, dist3, norm3, sub3};

/// Degree-4 six-point rule: (barycentric, weight) with weights summing to 1.
const DUNAVANT4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_965;
    const B: f64 = 0.091_576_213_509_771;
    const WA: f64 = 0.223_381_589_678_011;
    const WB: f64 = 0.109_951_743_655_322;
    [
        ([A, A, 1.0 - 2.0 * A], WA),
        ([A, 1.0 - 2.0 * A, A], WA),
        ([1.0 - 2.0 * A, A, A], WA),
        ([B, B, 1.0 - 2.0 * B], WB),
        ([B, 1.0 - 2.0 * B, B], WB),
        ([1.0 - 2.0 * B, B, B], WB),
    ]
};

/// Eight-point Gauss–Legendre rule on [0, 1].
const GL8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 - 0.5 * X[3], 0.5 * W[3]),
        (0.5 - 0.5 * X[2], 0.5 * W[2]),
        (0.5 - 0.5 * X[1], 0.5 * W[1]),
        (0.5 - 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[1], 0.5 * W[1]),
        (0.5 + 0.5 * X[2], 0.5 * W[2]),
        (0.5 + 0.5 * X[3], 0.5 * W[3]),
    ]
};

fn lerp_bary(b: &[[f64; 3]; 3], w: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = w[0] * b[0][k] + w[1] * b[1][k] + w[2] * b[2][k];
    }
    out
}

fn to_position(p: &[[f64; 3]; 3], bary: [f64; 3]) -> [f64; 3] {
    lerp_bary(p, bary)
}

fn area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
}

/// A triangle integrand: receives barycentric coordinates in the parent
/// triangle and the embedded position.
pub trait Integrand: Fn([f64; 3], [f64; 3]) -> f64 {}
impl<F: Fn([f64; 3], [f64; 3]) -> f64> Integrand for F {}

/// `[∫ f λ_0, ∫ f λ_1, ∫ f λ_2]` over the flat triangle `p`, where
/// `f = d(x, p_c)^{exponent} · g(x)` when `singular = Some((c, exponent))`
/// and `f = g` otherwise. `g` must be evaluated as the *full* integrand; the
/// singular factor is divided out internally near the corner.
///
/// The triangle is split `depth` times into four; the sub-triangle holding
/// the singular corner uses a Duffy map with the radial weight integrated by
/// a power substitution, the rest a degree-4 rule.
pub fn moments(
    p: &[[f64; 3]; 3],
    singular: Option<(usize, f64)>,
    depth: u32,
    f: &dyn Fn([f64; 3], [f64; 3]) -> f64,
) -> [f64; 3] {
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut out = [0.0; 3];
    recurse(p, &corners, singular, depth, f, &mut out);
    out
}

fn recurse(
    p: &[[f64; 3]; 3],
    sub: &[[f64; 3]; 3],
    singular: Option<(usize, f64)>,
    depth: u32,
    f: &dyn Fn([f64; 3], [f64; 3]) -> f64,
    out: &mut [f64; 3],
) {
    // corner index of `sub` that coincides with the singular parent corner
    let hot = singular.and_then(|(c, e)| (0..3).find(|&k| sub[k][c] == 1.0).map(|k| (k, c, e)));
    if depth == 0 {
        match hot {
            Some((k, c, e)) => duffy(p, sub, k, c, e, f, out),
            None => {
                let (a, b, cc) = (
                    to_position(p, sub[0]),
                    to_position(p, sub[1]),
                    to_position(p, sub[2]),
                );
                let ar = area(a, b, cc);
                for (w, wt) in DUNAVANT4 {
                    let bary = lerp_bary(sub, w);
                    let val = f(bary, to_position(p, bary)) * wt * ar;
                    for k in 0..3 {
                        out[k] += val * bary[k];
                    }
                }
            }
        }
        return;
    }
    let mid = |i: usize, j: usize| {
        let mut m = [0.0; 3];
        for k in 0..3 {
            m[k] = 0.5 * (sub[i][k] + sub[j][k]);
        }
        m
    };
    let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
    for child in [
        [sub[0], m01, m20],
        [m01, sub[1], m12],
        [m20, m12, sub[2]],
        [m01, m12, m20],
    ] {
        recurse(p, &child, singular, depth - 1, f, out);
    }
}

fn duffy(
    p: &[[f64; 3]; 3],
    sub: &[[f64; 3]; 3],
    k: usize,
    c: usize,
    exponent: f64,
    f: &dyn Fn([f64; 3], [f64; 3]) -> f64,
    out: &mut [f64; 3],
) {
    let apex = sub[k];
    let q1 = sub[(k + 1) % 3];
    let q2 = sub[(k + 2) % 3];
    let pole = p[c];
    let ar = area(
        to_position(p, apex),
        to_position(p, q1),
        to_position(p, q2),
    );
    // ∫_0^1 s^{e+1} h(s) ds = γ ∫_0^1 h(σ^γ) dσ, γ = 1/(e+2)
    let gamma = 1.0 / (exponent + 2.0);
    for (t, wt) in GL8 {
        let mut edge = [0.0; 3];
        for m in 0..3 {
            edge[m] = q1[m] + t * (q2[m] - q1[m]) - apex[m];
        }
        let far = to_position(p, {
            let mut b = [0.0; 3];
            for m in 0..3 {
                b[m] = apex[m] + edge[m];
            }
            b
        });
        let rho = dist3(far, pole);
        for (sigma, ws) in GL8 {
            let s = sigma.powf(gamma);
            let mut bary = [0.0; 3];
            for m in 0..3 {
                bary[m] = apex[m] + s * edge[m];
            }
            let x = to_position(p, bary);
            let d = dist3(x, pole);
            let smooth = f(bary, x) / d.powf(exponent);
            let val = 2.0 * ar * gamma * wt * ws * rho.powf(exponent) * smooth;
            for m in 0..3 {
                out[m] += val * bary[m];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];

    #[test]
    fn polynomial_moments_are_exact() {
        let m = moments(&TRI, None, 0, &|_, x| 1.0 + x[0]);
        // ∫λ_0 = 1/6, ∫xλ_0 over the unit right triangle = 1/24
        assert!((m[0] - (1.0 / 6.0 + 1.0 / 24.0)).abs() < 1e-12);
        let total: f64 = m.iter().sum();
        assert!((total - (0.5 + 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn radial_power_singularity() {
        // ∫_T r^{2α} over the quarter-disk sector of radius 1 inside the unit right triangle
        // is checked through the exact polar formula for the full triangle.
        for alpha in [-0.75, -0.5, 0.3, 1.2] {
            let e = 2.0 * alpha;
            let f = |_: [f64; 3], x: [f64; 3]| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(e);
            let m = moments(&TRI, Some((0, e)), 3, &f);
            let total: f64 = m.iter().sum();
            // polar: ∫_0^{π/2} ρ(θ)^{e+2}/(e+2) dθ with ρ = 1/(cos θ + sin θ)
            let n = 20000;
            let mut exact = 0.0;
            for i in 0..n {
                let th = (i as f64 + 0.5) / n as f64 * std::f64::consts::FRAC_PI_2;
                let rho = 1.0 / (th.cos() + th.sin());
                exact += rho.powf(e + 2.0) / (e + 2.0);
            }
            exact *= std::f64::consts::FRAC_PI_2 / n as f64;
            assert!((total - exact).abs() < 1e-3 * exact, "α={alpha}: {total} vs {exact}");
        }
    }

    #[test]
    fn log_singularity_integrates() {
        let f = |_: [f64; 3], x: [f64; 3]| (x[0] * x[0] + x[1] * x[1]).sqrt().ln();
        let a = moments(&TRI, Some((0, 0.0)), 3, &f).iter().sum::<f64>();
        let b = moments(&TRI, Some((0, 0.0)), 4, &f).iter().sum::<f64>();
        assert!((a - b).abs() < 1e-4);
    }
}
