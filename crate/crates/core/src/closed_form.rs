//! The explicit minimizer
//!
//! ```text
//! phi(r) = a sin(mu r)/(mu r) + beta/mu^2   for r <= R,   0 beyond,
//! ```
//!
//! with `mu R = t*` the first positive root of `tan t = t`. Both boundary
//! conditions at `R` fix the shape, `phi(R) = 0` fixes `a` relative to
//! `beta/mu^2`, and the unit L2 norm fixes the scale `mu`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analysis::virial_check;
use crate::error::{require_positive, Error, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::radial::{evaluate_functional, l2_norm};
use crate::roots::find_root;

/// Nodes used for the normalization integral.
pub const NORMALIZATION_NODES: usize = 8192;

/// Default outer radius of sampling grids, in units of the support radius.
pub const DEFAULT_BOX_FACTOR: f64 = 1.5;

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `d/dx sinc(x)`.
pub fn sinc_prime(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        -x / 3.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// `t* = mu R`, the smallest positive root of `tan t = t`.
pub fn geometry_constant() -> f64 {
    static T_STAR: OnceLock<f64> = OnceLock::new();
    *T_STAR.get_or_init(|| {
        // tan is continuous on (pi, 3pi/2) and runs from 0 to +inf there.
        let delta = 1e-3;
        find_root(|t| t.tan() - t, PI + delta, 1.5 * PI - delta, 1e-15)
            .expect("tan t - t changes sign on (pi, 3pi/2)")
    })
}

/// `S = 4 pi int_0^{t*} g(s)^2 s^2 ds` with `g(s) = 1 - sinc(s)/sinc(t*)`,
/// the normalization integral of the unit-scale shape.
pub fn shape_integral() -> f64 {
    static S: OnceLock<f64> = OnceLock::new();
    *S.get_or_init(|| {
        let t_star = geometry_constant();
        let s_t = sinc(t_star);
        let grid = RadialGrid::new(NORMALIZATION_NODES, t_star).expect("valid grid");
        let shape = RadialProfile::from_fn(&grid, |s| 1.0 - sinc(s) / s_t).expect("finite shape");
        l2_norm(&shape).powi(2)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerParams {
    pub beta: f64,
    pub a: f64,
    pub mu: f64,
    /// Support radius.
    #[serde(rename = "R")]
    pub radius: f64,
    /// Lagrange multiplier `-mu^2`.
    pub lambda: f64,
    pub t_star: f64,
}

impl MinimizerParams {
    /// Closed-form parameters for a given wavenumber.
    fn from_mu(beta: f64, mu: f64) -> Self {
        let t_star = geometry_constant();
        Self {
            beta,
            a: -beta / (mu * mu * sinc(t_star)),
            mu,
            radius: t_star / mu,
            lambda: -mu * mu,
            t_star,
        }
    }

    /// `phi(0) = a + beta/mu^2`.
    pub fn peak(&self) -> f64 {
        self.a + self.beta / (self.mu * self.mu)
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r > self.radius {
            0.0
        } else {
            self.a * sinc(self.mu * r) + self.beta / (self.mu * self.mu)
        }
    }

    /// `phi'(r)`, one-sided from the inside at `r = R`.
    pub fn derivative(&self, r: f64) -> f64 {
        if r > self.radius {
            0.0
        } else {
            self.a * self.mu * sinc_prime(self.mu * r)
        }
    }

    /// Uniform grid on `[0, DEFAULT_BOX_FACTOR * R]`.
    pub fn default_grid(&self, n: usize) -> Result<RadialGrid> {
        RadialGrid::new(n, DEFAULT_BOX_FACTOR * self.radius)
    }
}

pub fn solve_parameters(beta: f64, tol: f64) -> Result<MinimizerParams> {
    solve_parameters_from(beta, tol, 1.0)
}

/// As [`solve_parameters`], bracketing the normalization root outward from
/// `mu_seed`.
///
/// `N(mu) = ||phi||_2^2 = beta^2 S / mu^7` is solved in `x = ln mu`, where
/// `ln N` is linear and strictly decreasing.
pub fn solve_parameters_from(beta: f64, tol: f64, mu_seed: f64) -> Result<MinimizerParams> {
    require_positive("beta", beta)?;
    require_positive("tol", tol)?;
    require_positive("mu_seed", mu_seed)?;
    let s = shape_integral();
    let log_n = |x: f64| 2.0 * beta.ln() + s.ln() - 7.0 * x;
    let (mut lo, mut hi) = (mu_seed.ln() - 1.0, mu_seed.ln() + 1.0);
    for _ in 0..200 {
        if log_n(lo) > 0.0 {
            break;
        }
        lo -= hi - lo;
    }
    for _ in 0..200 {
        if log_n(hi) < 0.0 {
            break;
        }
        hi += hi - lo;
    }
    let x = find_root(log_n, lo, hi, tol)?;
    let params = MinimizerParams::from_mu(beta, x.exp());
    if !(params.t_star < 1.5 * PI && params.a > 0.0 && params.mu.is_finite()) {
        return Err(Error::Degenerate("closed-form parameters out of range"));
    }
    Ok(params)
}

pub fn eval_minimizer(params: &MinimizerParams, r: f64) -> f64 {
    params.eval(r)
}

pub fn sample(params: &MinimizerParams, grid: &RadialGrid) -> RadialProfile {
    let values = grid.nodes().iter().map(|&r| params.eval(r)).collect();
    RadialProfile::new(grid.clone(), values).expect("closed form is finite")
}

/// Weighted L2 norm of `p'' + (2/r) p' + mu^2 p - beta` over the nodes with
/// `0 < r < R - h`, using centered differences.
pub fn helmholtz_residual(p: &RadialProfile, params: &MinimizerParams) -> f64 {
    let g = p.grid();
    let (h, v) = (g.h(), p.values());
    let mu2 = params.mu * params.mu;
    let mut sum = 0.0;
    for i in 1..v.len().saturating_sub(1) {
        let r = g.nodes()[i];
        if r >= params.radius - h {
            break;
        }
        let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
        let res = d2 + 2.0 / r * d1 + mu2 * v[i] - params.beta;
        sum += 4.0 * PI * r * r * h * res * res;
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Sign::Negative
        } else if x > 0.0 {
            Sign::Positive
        } else {
            Sign::Zero
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    #[serde(rename = "phi_R")]
    pub phi_r: f64,
    #[serde(rename = "dphi_R")]
    pub dphi_r: f64,
    pub lambda_sign: Sign,
}

pub fn boundary_report(params: &MinimizerParams) -> BoundaryReport {
    BoundaryReport {
        phi_r: params.eval(params.radius),
        dphi_r: params.derivative(params.radius),
        lambda_sign: Sign::of(params.lambda),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub beta: f64,
    pub a: f64,
    pub mu: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub lambda: f64,
    pub t_star: f64,
    #[serde(rename = "F_total")]
    pub f_total: f64,
    pub kinetic: f64,
    pub l1: f64,
    pub l2: f64,
    pub virial_relerr: f64,
    pub helmholtz_residual: f64,
    #[serde(rename = "phi_R")]
    pub phi_r: f64,
    #[serde(rename = "dphi_R")]
    pub dphi_r: f64,
}

/// Solves for `beta`, samples on `grid` and collects the derived checks.
pub fn closed_form_report(params: &MinimizerParams, grid: &RadialGrid) -> Result<ClosedFormReport> {
    let p = sample(params, grid);
    let e = evaluate_functional(&p, params.beta)?;
    let bc = boundary_report(params);
    Ok(ClosedFormReport {
        beta: params.beta,
        a: params.a,
        mu: params.mu,
        radius: params.radius,
        lambda: params.lambda,
        t_star: params.t_star,
        f_total: e.total,
        kinetic: e.kinetic,
        l1: e.l1,
        l2: e.l2,
        virial_relerr: virial_check(&p, params.beta)?.relerr,
        helmholtz_residual: helmholtz_residual(&p, params),
        phi_r: bc.phi_r,
        dphi_r: bc.dphi_r,
    })
}
