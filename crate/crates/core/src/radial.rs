//! Norms, Dirichlet energy and the functional `F_beta` for radial profiles.
//!
//! A profile is read as its piecewise-linear interpolant `I_h phi` and every
//! volume integral carries the spherical weight `4 pi r^2 dr`:
//!
//! * `l1_norm` and `l2_norm` integrate `|I_h phi|` and `(I_h phi)^2` against
//!   `r^2` exactly (the r^2 weight is folded into each cell's rule), so they
//!   are exact for profiles linear in `r`.
//! * `kinetic_energy` uses forward differences per cell with the trapezoid
//!   value of `r^2` over the cell as weight. Paired with the lumped nodal
//!   masses of [`nodal_weights`], this makes [`laplacian`] the exact gradient
//!   of the discrete energy, and gives the `-Delta phi(0) = -3 phi''(0)` limit
//!   at the origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result};
use crate::grid::{RadialGrid, RadialProfile};

const FOUR_PI: f64 = 4.0 * PI;

/// `∫_cell ((x - a)/h) x^2 dx` for a cell of width `h` and midpoint `m`.
fn hat_up(m: f64, h: f64) -> f64 {
    m * m * h / 2.0 + h * h * h / 24.0 + m * h * h / 6.0
}

/// `∫_cell ((b - x)/h) x^2 dx`.
fn hat_down(m: f64, h: f64) -> f64 {
    m * m * h / 2.0 + h * h * h / 24.0 - m * h * h / 6.0
}

/// `∫_a^b |linear|^2 x^2 dx` for the linear function through `(a, va)`, `(b, vb)`.
pub(crate) fn cell_square_integral(a: f64, b: f64, va: f64, vb: f64) -> f64 {
    let h = b - a;
    let m = 0.5 * (a + b);
    let c0 = 0.5 * (va + vb);
    let c1 = (vb - va) / h;
    let p = c0 * m;
    let q = c0 + c1 * m;
    let s = c1;
    p * p * h + (q * q + 2.0 * p * s) * h.powi(3) / 12.0 + s * s * h.powi(5) / 80.0
}

/// `∫_a^b |linear| x^2 dx`, splitting the cell at a sign change.
fn cell_abs_integral(a: f64, b: f64, va: f64, vb: f64) -> f64 {
    if va * vb >= 0.0 {
        let (h, m) = (b - a, 0.5 * (a + b));
        va.abs() * hat_down(m, h) + vb.abs() * hat_up(m, h)
    } else {
        let xc = a + (b - a) * va / (va - vb);
        let (h1, m1) = (xc - a, 0.5 * (a + xc));
        let (h2, m2) = (b - xc, 0.5 * (xc + b));
        va.abs() * hat_down(m1, h1) + vb.abs() * hat_up(m2, h2)
    }
}

/// Lumped nodal masses `4 pi ∫ hat_i(r) r^2 dr`.
///
/// They sum to the ball volume and define the discrete `L^2(r^2 dr)` pairing
/// used by [`inner_product`]; they stay positive at `r = 0`.
pub fn nodal_weights(grid: &RadialGrid) -> Vec<f64> {
    let nodes = grid.nodes();
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let (h, m) = (b - a, 0.5 * (a + b));
        w[k] += FOUR_PI * hat_down(m, h);
        w[k + 1] += FOUR_PI * hat_up(m, h);
    }
    w
}

/// Stiffness weight of each cell: `4 pi h (r_k^2 + r_{k+1}^2) / 2`.
pub fn cell_weights(grid: &RadialGrid) -> Vec<f64> {
    grid.nodes()
        .windows(2)
        .map(|c| FOUR_PI * (c[1] - c[0]) * 0.5 * (c[0] * c[0] + c[1] * c[1]))
        .collect()
}

/// `‖phi‖_2 = sqrt(4 pi ∫ phi^2 r^2 dr)`.
pub fn l2_norm(p: &RadialProfile) -> f64 {
    let nodes = p.grid().nodes();
    let v = p.values();
    let s: f64 = (0..nodes.len() - 1)
        .map(|k| cell_square_integral(nodes[k], nodes[k + 1], v[k], v[k + 1]))
        .sum();
    (FOUR_PI * s).sqrt()
}

/// `‖phi‖_1 = 4 pi ∫ |phi| r^2 dr`.
pub fn l1_norm(p: &RadialProfile) -> f64 {
    let nodes = p.grid().nodes();
    let v = p.values();
    let s: f64 = (0..nodes.len() - 1)
        .map(|k| cell_abs_integral(nodes[k], nodes[k + 1], v[k], v[k + 1]))
        .sum();
    FOUR_PI * s
}

/// `½‖∇phi‖_2^2`.
pub fn kinetic_energy(p: &RadialProfile) -> f64 {
    let h = p.grid().h();
    let v = p.values();
    let c = cell_weights(p.grid());
    0.5 * v
        .windows(2)
        .zip(&c)
        .map(|(d, ck)| {
            let slope = (d[1] - d[0]) / h;
            ck * slope * slope
        })
        .sum::<f64>()
}

/// Discrete `-Delta phi = -phi'' - (2/r) phi'`, the gradient of
/// [`kinetic_energy`] with respect to [`inner_product`].
pub fn laplacian(p: &RadialProfile) -> Vec<f64> {
    let h = p.grid().h();
    let v = p.values();
    let c = cell_weights(p.grid());
    let w = nodal_weights(p.grid());
    let mut g = vec![0.0; v.len()];
    for k in 0..v.len() - 1 {
        let flux = c[k] * (v[k + 1] - v[k]) / (h * h);
        g[k] -= flux;
        g[k + 1] += flux;
    }
    g.iter_mut().zip(&w).for_each(|(gi, wi)| *gi /= wi);
    g
}

/// Lumped `L^2(4 pi r^2 dr)` pairing `Σ w_i p_i q_i`.
pub fn inner_product(p: &RadialProfile, q: &[f64]) -> f64 {
    debug_assert_eq!(p.values().len(), q.len());
    nodal_weights(p.grid())
        .iter()
        .zip(p.values())
        .zip(q)
        .map(|((w, a), b)| w * a * b)
        .sum()
}

/// The terms of `F_beta` and the norms built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub beta: f64,
    /// `½‖∇phi‖_2^2`
    pub kinetic: f64,
    pub l1: f64,
    pub l2: f64,
    /// `sqrt(‖phi‖_2^2 + ‖∇phi‖_2^2)`
    pub h1: f64,
    /// `sqrt(‖phi‖_H1^2 + ‖phi‖_1^2)`
    pub composite: f64,
    /// `kinetic + beta * l1`
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_parts(beta: f64, kinetic: f64, l1: f64, l2: f64) -> Self {
        let h1 = (l2 * l2 + 2.0 * kinetic).sqrt();
        let composite = (h1 * h1 + l1 * l1).sqrt();
        Self {
            beta,
            kinetic,
            l1,
            l2,
            h1,
            composite,
            total: kinetic + beta * l1,
        }
    }

    /// `½‖phi‖_H1^2 + beta ‖phi‖_1`, equal to `total + ½` on the unit sphere.
    pub fn auxiliary(&self) -> f64 {
        0.5 * self.h1 * self.h1 + self.beta * self.l1
    }

    /// `‖∇phi‖_2^2`.
    pub fn grad_sq(&self) -> f64 {
        2.0 * self.kinetic
    }
}

pub fn evaluate_functional(p: &RadialProfile, beta: f64) -> Result<EnergyBreakdown> {
    require_positive("beta", beta)?;
    Ok(EnergyBreakdown::from_parts(
        beta,
        kinetic_energy(p),
        l1_norm(p),
        l2_norm(p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize, r_max: f64) -> RadialGrid {
        RadialGrid::new(n, r_max).unwrap()
    }

    #[test]
    fn constant_profile_norms_are_ball_volume() {
        let g = grid(257, 1.0);
        let one = RadialProfile::from_fn(&g, |_| 1.0).unwrap();
        let vol = 4.0 * PI / 3.0;
        assert_relative_eq!(l1_norm(&one), vol, max_relative = 1e-12);
        assert_relative_eq!(l2_norm(&one), vol.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(l2_norm(&one), 2.046_653_415_892_977, max_relative = 1e-12);
        let minus = one.scaled(-1.0).unwrap();
        assert_relative_eq!(l1_norm(&minus), vol, max_relative = 1e-12);
        assert_eq!(kinetic_energy(&one), 0.0);
    }

    #[test]
    fn zero_profile() {
        let z = RadialProfile::zeros(&grid(33, 2.0));
        assert_eq!(l1_norm(&z), 0.0);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(evaluate_functional(&z, 1.0).unwrap().total, 0.0);
    }

    #[test]
    fn weights_sum_to_ball_volume() {
        for (n, r) in [(2, 1.0), (3, 0.5), (1001, 3.3)] {
            let g = grid(n, r);
            let s: f64 = nodal_weights(&g).iter().sum();
            assert_relative_eq!(s, 4.0 * PI * r * r * r / 3.0, max_relative = 1e-13);
            assert!(nodal_weights(&g).iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn exact_for_linear_profiles() {
        // ∫ (1 + 2r) r^2 = 1/3 + 1/2, ∫ (1 + 2r)^2 r^2 = 1/3 + 1 + 4/5 on [0, 1]
        let g = grid(17, 1.0);
        let p = RadialProfile::from_fn(&g, |r| 1.0 + 2.0 * r).unwrap();
        assert_relative_eq!(
            l1_norm(&p),
            4.0 * PI * (1.0 / 3.0 + 0.5),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            l2_norm(&p).powi(2),
            4.0 * PI * (1.0 / 3.0 + 1.0 + 0.8),
            max_relative = 1e-12
        );
        // sign change inside a cell
        let q = RadialProfile::from_fn(&g, |r| r - 0.53).unwrap();
        let exact = {
            let c: f64 = 0.53;
            let left = c.powi(4) / 3.0 - c.powi(4) / 4.0;
            let right = (1.0 - c.powi(4)) / 4.0 - c * (1.0 - c.powi(3)) / 3.0;
            4.0 * PI * (left + right)
        };
        assert_relative_eq!(l1_norm(&q), exact, max_relative = 1e-12);
    }

    #[test]
    fn linear_ramp_kinetic_energy() {
        // p = r on [0, 1]: ½ 4π ∫ r^2 = 2π/3; the cell rule is O(h^2).
        for n in [1001, 4001] {
            let g = grid(n, 1.0);
            let p = RadialProfile::from_fn(&g, |r| r).unwrap();
            let h = g.h();
            let k = kinetic_energy(&p);
            assert_relative_eq!(k, 2.0 * PI / 3.0, max_relative = h * h);
        }
    }

    #[test]
    fn functional_on_constant() {
        let g = grid(101, 1.0);
        let one = RadialProfile::from_fn(&g, |_| 1.0).unwrap();
        let e = evaluate_functional(&one, 2.0).unwrap();
        assert_relative_eq!(e.total, 2.0 * 4.0 * PI / 3.0, max_relative = 1e-12);
        assert!(evaluate_functional(&one, 0.0).is_err());
        assert!(evaluate_functional(&one, -1.0).is_err());
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        // -Δ r^2 = -6 everywhere, including the origin node.
        let g = grid(50, 2.0);
        let p = RadialProfile::from_fn(&g, |r| r * r).unwrap();
        let lap = laplacian(&p);
        for &x in &lap[..lap.len() - 1] {
            assert_relative_eq!(x, -6.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn norms_converge_at_second_order() {
        // smooth even profile with Gaussian decay
        let f = |r: f64| (-r * r).exp() * (1.0 + 0.3 * r * r);
        let norms = |n: usize| {
            let g = grid(n, 4.0);
            let p = RadialProfile::from_fn(&g, f).unwrap();
            [l1_norm(&p), l2_norm(&p), kinetic_energy(&p)]
        };
        let (a, b, c) = (norms(201), norms(401), norms(801));
        for i in 0..3 {
            let order = ((a[i] - b[i]) / (b[i] - c[i])).abs().log2();
            assert!(order >= 1.9, "quantity {i}: order {order}");
        }
    }

    proptest! {
        #[test]
        fn homogeneity(values in prop::collection::vec(-5.0f64..5.0, 3..40), c in 0.0f64..10.0) {
            let g = grid(values.len(), 1.3);
            let p = RadialProfile::new(g, values).unwrap();
            let q = p.scaled(c).unwrap();
            prop_assert!((l1_norm(&q) - c * l1_norm(&p)).abs() <= 1e-12 * (1.0 + c * l1_norm(&p)));
            prop_assert!((l2_norm(&q) - c * l2_norm(&p)).abs() <= 1e-12 * (1.0 + c * l2_norm(&p)));
            prop_assert!((kinetic_energy(&q) - c * c * kinetic_energy(&p)).abs()
                <= 1e-12 * (1.0 + c * c * kinetic_energy(&p)));
        }

        #[test]
        fn breakdown_identities(values in prop::collection::vec(-5.0f64..5.0, 3..40), beta in 0.01f64..100.0) {
            let g = grid(values.len(), 2.0);
            let p = RadialProfile::new(g, values).unwrap();
            let e = evaluate_functional(&p, beta).unwrap();
            prop_assert_eq!(e.total, e.kinetic + beta * e.l1);
            let scale = e.composite * e.composite;
            prop_assert!((e.composite.powi(2) - e.h1.powi(2) - e.l1.powi(2)).abs() <= 1e-14 * scale.max(1e-300) + 1e-300);
            prop_assert!((e.h1.powi(2) - e.l2.powi(2) - 2.0 * e.kinetic).abs() <= 1e-14 * e.h1.powi(2).max(1e-300) + 1e-300);
        }

        #[test]
        fn laplacian_is_gradient_of_kinetic(values in prop::collection::vec(-1.0f64..1.0, 3..30),
                                            dir in prop::collection::vec(-1.0f64..1.0, 30)) {
            let n = values.len();
            let g = grid(n, 1.0);
            let p = RadialProfile::new(g, values.clone()).unwrap();
            let d = &dir[..n];
            // kinetic is quadratic: K(p + e d) - K(p - e d) = 2 e <∇K, d> exactly
            let e = 1e-3;
            let plus = RadialProfile::new(p.grid().clone(), values.iter().zip(d).map(|(v, x)| v + e * x).collect()).unwrap();
            let minus = RadialProfile::new(p.grid().clone(), values.iter().zip(d).map(|(v, x)| v - e * x).collect()).unwrap();
            let fd = (kinetic_energy(&plus) - kinetic_energy(&minus)) / (2.0 * e);
            let lap = laplacian(&p);
            let ip: f64 = nodal_weights(p.grid()).iter().zip(&lap).zip(d).map(|((w, a), b)| w * a * b).sum();
            prop_assert!((fd - ip).abs() <= 1e-8 * (1.0 + fd.abs()));
        }
    }
}
