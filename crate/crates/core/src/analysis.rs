//! Virial identity, beta-scaling fits and the Nash ratio.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{sample, solve_parameters, MinimizerParams};
use crate::direct::{minimize, SolverOptions};
use crate::error::{require_positive, Error, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::radial::{kinetic_energy, l1_norm, l2_norm};
use crate::rearrangement::rearrange;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialCheck {
    /// `‖∇phi‖_2^2 = 2 * kinetic`
    pub lhs: f64,
    /// `(3/2) beta ‖phi‖_1`
    pub rhs: f64,
    pub relerr: f64,
}

pub fn virial_check(p: &RadialProfile, beta: f64) -> Result<VirialCheck> {
    require_positive("beta", beta)?;
    let lhs = 2.0 * kinetic_energy(p);
    let rhs = 1.5 * beta * l1_norm(p);
    let scale = lhs.max(rhs);
    let relerr = if scale > 0.0 {
        (lhs - rhs).abs() / scale
    } else {
        0.0
    };
    Ok(VirialCheck { lhs, rhs, relerr })
}

/// `nu^{-3/2} phi(r / nu)` on the grid dilated by `nu`.
pub fn rescale_unitary(p: &RadialProfile, nu: f64) -> Result<RadialProfile> {
    require_positive("nu", nu)?;
    let grid = p.grid().dilated(nu)?;
    let c = nu.powf(-1.5);
    RadialProfile::new(grid, p.values().iter().map(|v| c * v).collect())
}

/// `‖phi‖_2^{10/3} / (‖∇phi‖_2^2 ‖phi‖_1^{4/3})`.
pub fn nash_ratio(p: &RadialProfile) -> Result<f64> {
    if p.is_zero() {
        return Err(Error::Degenerate("Nash ratio of the zero profile"));
    }
    let grad_sq = 2.0 * kinetic_energy(p);
    if grad_sq <= 0.0 {
        return Err(Error::Degenerate(
            "Nash ratio of a profile with zero gradient",
        ));
    }
    Ok(l2_norm(p).powf(10.0 / 3.0) / (grad_sq * l1_norm(p).powf(4.0 / 3.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Grid nodes per beta.
    pub n: usize,
    /// Grid outer radius in units of the support radius `R_beta`.
    pub box_factor: f64,
    /// Root tolerance for the closed-form solve.
    pub tol: f64,
    pub solver: SolverOptions,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            box_factor: crate::closed_form::DEFAULT_BOX_FACTOR,
            tol: 1e-13,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub beta: f64,
    pub a: f64,
    pub mu: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub mu_r: f64,
    pub virial_relerr: f64,
    /// Set when this beta failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl ScanRecord {
    fn failed(beta: f64, err: &Error) -> Self {
        Self {
            beta,
            a: f64::NAN,
            mu: f64::NAN,
            radius: f64::NAN,
            f: f64::NAN,
            mu_r: f64::NAN,
            virial_relerr: f64::NAN,
            error: Some(err.to_string()),
        }
    }
}

/// One value per fitted quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerQuantity {
    pub a: f64,
    pub mu: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRatio {
    pub name: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashSummary {
    /// Largest ratio over the family, attained by the minimizer.
    #[serde(rename = "C3_estimate")]
    pub c3_estimate: f64,
    pub family_ratios: Vec<FamilyRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub source: Source,
    pub betas: Vec<f64>,
    pub records: Vec<ScanRecord>,
    /// Log-log slopes; expected `(3/7, 2/7, -2/7, 4/7)`.
    pub exponents: PerQuantity,
    /// Fitted values at `beta = 1`.
    pub prefactors: PerQuantity,
    /// RMS residual of each log-log fit.
    pub fit_residuals: PerQuantity,
    /// `max - min` of `mu R` over the successful betas.
    pub mu_r_spread: f64,
    pub nash: NashSummary,
}

impl ScalingReport {
    /// One row per beta: `beta,a,mu,R,F,mu_R,virial_relerr,error`.
    pub fn write_records_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "beta",
            "a",
            "mu",
            "R",
            "F",
            "mu_R",
            "virial_relerr",
            "error",
        ])?;
        for r in &self.records {
            let mut row: Vec<String> = [r.beta, r.a, r.mu, r.radius, r.f, r.mu_r, r.virial_relerr]
                .iter()
                .map(|v| format!("{v:.16e}"))
                .collect();
            row.push(r.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_records_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.write_records_csv(std::fs::File::create(path)?)
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Least-squares line `y = slope x + intercept`; returns `(slope, intercept, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - slope * xi - intercept).powi(2))
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

fn closed_form_record(beta: f64, cfg: &ScanConfig) -> Result<ScanRecord> {
    let params = solve_parameters(beta, cfg.tol)?;
    let grid = RadialGrid::new(cfg.n, cfg.box_factor * params.radius)?;
    let p = sample(&params, &grid);
    let e = crate::radial::evaluate_functional(&p, beta)?;
    Ok(ScanRecord {
        beta,
        a: params.a,
        mu: params.mu,
        radius: params.radius,
        f: e.total,
        mu_r: params.mu * params.radius,
        virial_relerr: virial_check(&p, beta)?.relerr,
        error: None,
    })
}

/// Parameters read off a numerical minimizer: `mu^2 = 2K + beta ‖phi‖_1`
/// (the Euler-Lagrange equation tested against `phi` on the unit sphere),
/// `a = phi(0) - beta/mu^2`, and `R` the outermost node above
/// `1e-6 * max |phi|`.
pub fn estimate_parameters(p: &RadialProfile, beta: f64) -> Result<(f64, f64, f64)> {
    require_positive("beta", beta)?;
    let e = crate::radial::evaluate_functional(p, beta)?;
    let mu2 = 2.0 * e.kinetic + beta * e.l1;
    if !(mu2 > 0.0) {
        return Err(Error::Degenerate("cannot estimate mu from a zero profile"));
    }
    let a = p.values()[0] - beta / mu2;
    let cut = 1e-6 * p.max_abs();
    let last = p.values().iter().rposition(|v| v.abs() > cut).unwrap_or(0);
    Ok((a, mu2.sqrt(), p.grid().nodes()[last]))
}

fn direct_record(beta: f64, cfg: &ScanConfig) -> Result<ScanRecord> {
    // The box only needs the support scale, which the closed form supplies.
    let r_beta = solve_parameters(beta, cfg.tol)?.radius;
    let grid = RadialGrid::new(cfg.n, cfg.box_factor * r_beta)?;
    let out = minimize(beta, &grid, &cfg.solver)?;
    let (a, mu, radius) = estimate_parameters(&out.profile, beta)?;
    Ok(ScanRecord {
        beta,
        a,
        mu,
        radius,
        f: out.energy.total,
        mu_r: mu * radius,
        virial_relerr: virial_check(&out.profile, beta)?.relerr,
        error: None,
    })
}

/// Per-beta records and log-log fits. Betas are processed in parallel; a
/// failed beta is kept in the report with its error and left out of the fit.
pub fn scaling_scan(betas: &[f64], source: Source, cfg: &ScanConfig) -> Result<ScalingReport> {
    if betas.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 betas, got {}",
            betas.len()
        )));
    }
    for &b in betas {
        require_positive("beta", b)?;
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter {
            name: "betas",
            value: f64::NAN,
            reason: "must be strictly increasing",
        });
    }
    if betas[betas.len() - 1] / betas[0] < 10.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter {
            name: "betas",
            value: betas[betas.len() - 1] / betas[0],
            reason: "must span at least one decade",
        });
    }

    let records: Vec<ScanRecord> = betas
        .par_iter()
        .map(|&b| {
            let rec = match source {
                Source::ClosedForm => closed_form_record(b, cfg),
                Source::Direct => direct_record(b, cfg),
            };
            rec.unwrap_or_else(|e| ScanRecord::failed(b, &e))
        })
        .collect();

    let ok: Vec<&ScanRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    if ok.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} of {} betas succeeded",
            ok.len(),
            records.len()
        )));
    }
    let x: Vec<f64> = ok.iter().map(|r| r.beta.ln()).collect();
    let fit = |get: fn(&ScanRecord) -> f64| {
        let y: Vec<f64> = ok.iter().map(|r| get(r).ln()).collect();
        fit_line(&x, &y)
    };
    let (fa, fm, fr, ff) = (fit(|r| r.a), fit(|r| r.mu), fit(|r| r.radius), fit(|r| r.f));
    let pick = |g: fn((f64, f64, f64)) -> f64| PerQuantity {
        a: g(fa),
        mu: g(fm),
        r: g(fr),
        f: g(ff),
    };
    let (lo, hi) = ok
        .iter()
        .map(|r| r.mu_r)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });

    Ok(ScalingReport {
        source,
        betas: betas.to_vec(),
        records,
        exponents: pick(|f| f.0),
        prefactors: pick(|f| f.1.exp()),
        fit_residuals: pick(|f| f.2),
        mu_r_spread: hi - lo,
        nash: nash_summary(cfg.n, 7)?,
    })
}

/// The fixed comparison family for the Nash ratio, all sampled on
/// `[0, 1.5 R_1]` with `n` nodes: the closed-form minimizer, Gaussians,
/// truncated quadratics and their powers, and rearranged random profiles.
pub fn nash_family(n: usize, seed: u64) -> Result<Vec<(String, RadialProfile)>> {
    let params: MinimizerParams = solve_parameters(1.0, 1e-13)?;
    let grid = params.default_grid(n)?;
    let r_max = grid.r_max();
    let mut family = vec![("minimizer".to_string(), sample(&params, &grid))];
    for width in [0.15, 0.2, 0.25] {
        let s = width * r_max;
        family.push((
            format!("gaussian(sigma={s:.4})"),
            RadialProfile::from_fn(&grid, |r| (-(r / s).powi(2)).exp())?,
        ));
    }
    for power in [1, 2, 3] {
        for support in [0.6, 0.9] {
            let rho = support * r_max;
            family.push((
                format!("truncated_quadratic(rho={rho:.4},power={power})"),
                RadialProfile::from_fn(&grid, |r| (1.0 - (r / rho).powi(2)).max(0.0).powi(power))?,
            ));
        }
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for k in 0..5 {
        let knots: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let edge = 0.9 * r_max;
        let raw = RadialProfile::from_fn(&grid, |r| {
            if r >= edge {
                return 0.0;
            }
            let x = r / edge * (knots.len() - 1) as f64;
            let i = (x as usize).min(knots.len() - 2);
            let t = x - i as f64;
            (knots[i] * (1.0 - t) + knots[i + 1] * t) * (PI * r / edge).cos().max(0.0)
        })?;
        family.push((format!("rearranged_random({k})"), rearrange(&raw)));
    }
    Ok(family)
}

pub fn nash_summary(n: usize, seed: u64) -> Result<NashSummary> {
    let family_ratios = nash_family(n, seed)?
        .into_iter()
        .map(|(name, p)| {
            Ok(FamilyRatio {
                ratio: nash_ratio(&p)?,
                name,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let c3_estimate = family_ratios.iter().map(|f| f.ratio).fold(0.0, f64::max);
    Ok(NashSummary {
        c3_estimate,
        family_ratios,
    })
}
