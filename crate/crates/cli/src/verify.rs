use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use l1sphere::analysis::{nash_summary, rescale_unitary};
use l1sphere::{
    boundary_report, check_lemma1, evaluate_functional, helmholtz_residual, nash_ratio, sample,
    solve_parameters, virial_check, RadialProfile,
};

use crate::{out_dir, required, write_json, CmdResult, Failure};

#[derive(Args, Debug, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// Grid nodes for the sampled minimizer [default: 4096]
    #[arg(long)]
    n: Option<usize>,
    /// Profile CSV (`r,value`) to check instead of the sampled closed form
    #[arg(long)]
    profile: Option<PathBuf>,
    /// [default: 1e-6]
    #[arg(long)]
    l2_tol: Option<f64>,
    /// [default: 1e-6]
    #[arg(long)]
    virial_tol: Option<f64>,
    /// Bound on |phi(R)| [default: 1e-10]
    #[arg(long)]
    boundary_tol: Option<f64>,
    /// Bound on |phi'(R)| [default: 1e-8]
    #[arg(long)]
    slope_tol: Option<f64>,
    /// Minimum empirical order of the Helmholtz residual [default: 1.9]
    #[arg(long)]
    residual_order: Option<f64>,
    /// Allowed relative increase of F under rearrangement [default: 1e-6]
    #[arg(long)]
    rearrangement_slack: Option<f64>,
    /// Nash ratio invariance under scaling and dilation [default: 1e-8]
    #[arg(long)]
    nash_tol: Option<f64>,
    /// Relative gap between a supplied profile's energy and F_beta [default: 1e-3]
    #[arg(long)]
    energy_rtol: Option<f64>,
    /// Output directory [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    fn at_least(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    beta: f64,
    n: usize,
    profile: Option<PathBuf>,
    checks: Vec<Check>,
    all_pass: bool,
}

pub fn run(args: VerifyArgs) -> CmdResult {
    let beta = required(args.beta, "beta")?;
    let n = args.n.unwrap_or(4096);
    let params = solve_parameters(beta, 1e-13)?;
    let reference = sample(&params, &params.default_grid(n)?);
    let profile = match &args.profile {
        Some(path) => RadialProfile::load_csv(path)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => reference.clone(),
    };

    let mut checks = vec![];
    let l2 = evaluate_functional(&profile, beta)?.l2;
    checks.push(Check::at_most(
        "l2_norm",
        (l2 - 1.0).abs(),
        args.l2_tol.unwrap_or(1e-6),
    ));
    checks.push(Check::at_most(
        "virial",
        virial_check(&profile, beta)?.relerr,
        args.virial_tol.unwrap_or(1e-6),
    ));

    let bc = boundary_report(&params);
    checks.push(Check::at_most(
        "boundary_value",
        bc.phi_r.abs(),
        args.boundary_tol.unwrap_or(1e-10),
    ));
    checks.push(Check::at_most(
        "boundary_slope",
        bc.dphi_r.abs(),
        args.slope_tol.unwrap_or(1e-8),
    ));
    checks.push(Check::at_most("lambda_negative", params.lambda, 0.0));
    checks.last_mut().unwrap().pass = params.lambda < 0.0;

    let residuals = [n / 4, n / 2, n]
        .iter()
        .map(|&m| {
            Ok(helmholtz_residual(
                &sample(&params, &params.default_grid(m)?),
                &params,
            ))
        })
        .collect::<Result<Vec<f64>, l1sphere::Error>>()?;
    let order = (residuals[0] / residuals[1])
        .log2()
        .min((residuals[1] / residuals[2]).log2());
    checks.push(Check::at_least(
        "helmholtz_order",
        order,
        args.residual_order.unwrap_or(1.9),
    ));

    let lemma = check_lemma1(&profile, beta)?;
    checks.push(Check::at_most(
        "rearrangement",
        (lemma.f_after - lemma.f_before) / lemma.f_before.abs(),
        args.rearrangement_slack.unwrap_or(1e-6),
    ));

    let nash = nash_summary(n, 7)?;
    let best_other = nash.family_ratios[1..]
        .iter()
        .map(|f| f.ratio)
        .fold(0.0, f64::max);
    checks.push(Check::at_least(
        "nash_saturation",
        nash.family_ratios[0].ratio - best_other,
        0.0,
    ));
    checks.last_mut().unwrap().pass = nash.family_ratios[0].ratio > best_other;
    let base = nash_ratio(&profile)?;
    let mut drift = 0.0f64;
    for c in [0.5, 3.0] {
        drift = drift.max((nash_ratio(&profile.scaled(c)?)? - base).abs() / base);
    }
    for nu in [0.5, 2.0] {
        drift = drift.max((nash_ratio(&rescale_unitary(&profile, nu)?)? - base).abs() / base);
    }
    checks.push(Check::at_most(
        "nash_invariance",
        drift,
        args.nash_tol.unwrap_or(1e-8),
    ));

    if args.profile.is_some() {
        let f_ref = evaluate_functional(&reference, beta)?.total;
        let f = evaluate_functional(&profile, beta)?.total;
        checks.push(Check::at_most(
            "energy_vs_closed_form",
            (f - f_ref).abs() / f_ref,
            args.energy_rtol.unwrap_or(1e-3),
        ));
    }

    for c in &checks {
        println!(
            "{:<22} {} value {:.3e} tolerance {:.1e}",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.value,
            c.tolerance
        );
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        beta,
        n,
        profile: args.profile.clone(),
        checks,
        all_pass,
    };
    write_json(&out_dir(&args.out)?.join("verify.json"), &report)?;
    if all_pass {
        Ok(())
    } else {
        Err(Failure::Compute("verification failed".into()))
    }
}
