//! Iterative constrained minimizer: explicit gradient step on the Dirichlet
//! energy, L1 shrinkage restricted to `phi >= 0`, and renormalization onto
//! the unit L2 sphere, with an occasional symmetric decreasing rearrangement.

use std::io::Write;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::radial::{
    cell_square_integral, cell_weights, evaluate_functional, l1_norm, l2_norm, laplacian,
    nodal_weights, EnergyBreakdown,
};
use crate::rearrangement::rearrange;

/// Default step in units of `h^2`. The origin row of the discrete Laplacian
/// has eigenvalue close to `6.7 / h^2`, so explicit steps above `0.3 h^2`
/// blow up.
pub const DEFAULT_STEP_FACTOR: f64 = 0.25;

/// Relative energy increase between checkpoints that counts as a violation.
const INCREASE_SLACK: f64 = 1e-6;
/// Consecutive violations that abort the run.
const PERSISTENT_INCREASES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Gradient step `tau`; `None` means `DEFAULT_STEP_FACTOR * h^2`.
    pub step: Option<f64>,
    pub max_iters: usize,
    /// Stop once the relative energy decrease per unit of flow time
    /// (`iterations * tau`) between checkpoints drops below this.
    pub energy_tol: f64,
    /// Rearrange the iterate every this many iterations; 0 disables.
    pub rearrange_every: usize,
    pub seed: u64,
    /// Relative amplitude of the seeded multiplicative noise on the initial
    /// Gaussian; 0 keeps it exact.
    pub perturbation: f64,
    /// Iterations between energy evaluations, trace records and stop checks.
    pub check_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step: None,
            max_iters: 5_000_000,
            energy_tol: 1e-4,
            rearrange_every: 1000,
            seed: 0,
            perturbation: 0.0,
            check_every: 1000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(step) = self.step {
            require_positive("step", step)?;
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParameter {
                name: "check_every",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        require_positive("energy_tol", self.energy_tol)?;
        if !(self.perturbation >= 0.0 && self.perturbation < 1.0) {
            return Err(Error::InvalidParameter {
                name: "perturbation",
                value: self.perturbation,
                reason: "must lie in [0, 1)",
            });
        }
        Ok(())
    }

    pub fn step_for(&self, grid: &RadialGrid) -> f64 {
        self.step
            .unwrap_or(DEFAULT_STEP_FACTOR * grid.h() * grid.h())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub energy: EnergyBreakdown,
    /// `|‖phi‖_2 - 1|`
    pub l2err: f64,
    /// `‖phi 1_{r > 0.9 r_max}‖_1`
    pub tailmass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    /// Checkpoints whose energy exceeded the previous one by more than the
    /// projection slack.
    pub violations: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl SolverTrace {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iter", "total", "kinetic", "l1", "l2err", "tailmass"])?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                format!("{:.16e}", r.energy.total),
                format!("{:.16e}", r.energy.kinetic),
                format!("{:.16e}", r.energy.l1),
                format!("{:.16e}", r.l2err),
                format!("{:.16e}", r.tailmass),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutput {
    /// Best-energy checkpoint.
    pub profile: RadialProfile,
    pub energy: EnergyBreakdown,
    pub trace: SolverTrace,
}

/// Discrete `-Delta phi`; see [`laplacian`].
pub fn smooth_gradient(p: &RadialProfile) -> RadialProfile {
    RadialProfile::new(p.grid().clone(), laplacian(p)).expect("finite input gives finite gradient")
}

/// `max(p - threshold, 0)` node by node.
pub fn prox_l1(p: &RadialProfile, threshold: f64) -> Result<RadialProfile> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            value: threshold,
            reason: "must be finite and nonnegative",
        });
    }
    Ok(p.with_values(
        p.values()
            .iter()
            .map(|v| (v - threshold).max(0.0))
            .collect(),
    ))
}

pub fn project_sphere(p: &RadialProfile) -> Result<RadialProfile> {
    let norm = l2_norm(p);
    if !(norm > 0.0) {
        return Err(Error::Degenerate(
            "cannot project the zero profile onto the unit sphere",
        ));
    }
    p.scaled(1.0 / norm)
}

/// `exp(-r^2)`, optionally perturbed, normalized.
pub fn initial_profile(grid: &RadialGrid, opts: &SolverOptions) -> Result<RadialProfile> {
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let values = grid
        .nodes()
        .iter()
        .map(|&r| {
            let noise = if opts.perturbation > 0.0 {
                1.0 + opts.perturbation * rng.gen_range(-1.0..1.0)
            } else {
                1.0
            };
            (-r * r).exp() * noise
        })
        .collect();
    project_sphere(&RadialProfile::new(grid.clone(), values)?)
}

/// Precomputed three-point operators on a fixed grid.
struct Stencil {
    /// `-Delta v` at node `k` is `up[k] (v_k - v_{k+1}) + down[k] (v_k - v_{k-1})`.
    up: Vec<f64>,
    down: Vec<f64>,
    /// `‖v‖_2^2 = Σ diag_k v_k^2 + 2 Σ off_k v_k v_{k+1}`.
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Stencil {
    fn new(grid: &RadialGrid) -> Self {
        let n = grid.n();
        let h2 = grid.h() * grid.h();
        let c = cell_weights(grid);
        let w = nodal_weights(grid);
        let mut up = vec![0.0; n];
        let mut down = vec![0.0; n];
        for k in 0..n - 1 {
            up[k] = c[k] / (h2 * w[k]);
            down[k + 1] = c[k] / (h2 * w[k + 1]);
        }
        let four_pi = 4.0 * std::f64::consts::PI;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for k in 0..n - 1 {
            let (a, b) = (grid.nodes()[k], grid.nodes()[k + 1]);
            let qa = cell_square_integral(a, b, 1.0, 0.0);
            let qb = cell_square_integral(a, b, 0.0, 1.0);
            let qab = cell_square_integral(a, b, 1.0, 1.0);
            diag[k] += four_pi * qa;
            diag[k + 1] += four_pi * qb;
            off[k] = four_pi * 0.5 * (qab - qa - qb);
        }
        Self {
            up,
            down,
            diag,
            off,
        }
    }

    fn norm_sq(&self, v: &[f64]) -> f64 {
        let d: f64 = self.diag.iter().zip(v).map(|(d, x)| d * x * x).sum();
        let o: f64 = self
            .off
            .iter()
            .zip(v.windows(2))
            .map(|(o, x)| o * x[0] * x[1])
            .sum();
        d + 2.0 * o
    }

    /// `out = max(v - tau (-Delta v) - shrink, 0)`.
    fn step(&self, v: &[f64], tau: f64, shrink: f64, out: &mut [f64]) {
        let n = v.len();
        out[0] = (v[0] - tau * self.up[0] * (v[0] - v[1]) - shrink).max(0.0);
        for k in 1..n - 1 {
            let lap = self.up[k] * (v[k] - v[k + 1]) + self.down[k] * (v[k] - v[k - 1]);
            out[k] = (v[k] - tau * lap - shrink).max(0.0);
        }
        out[n - 1] = (v[n - 1] - tau * self.down[n - 1] * (v[n - 1] - v[n - 2]) - shrink).max(0.0);
    }
}

fn tail_mass(p: &RadialProfile) -> f64 {
    let edge = 0.9 * p.grid().r_max();
    let masked = p
        .grid()
        .nodes()
        .iter()
        .zip(p.values())
        .map(|(&r, &v)| if r > edge { v } else { 0.0 })
        .collect();
    l1_norm(&p.with_values(masked))
}

/// Runs the iteration from the default Gaussian start.
pub fn minimize(beta: f64, grid: &RadialGrid, opts: &SolverOptions) -> Result<MinimizeOutput> {
    opts.validate()?;
    minimize_from(beta, &initial_profile(grid, opts)?, opts)
}

/// Runs `phi <- P(max(phi - tau (-Delta phi) - tau beta, 0))`, `P` the
/// projection onto the unit sphere, starting from `initial` (made
/// nonnegative and normalized first).
pub fn minimize_from(
    beta: f64,
    initial: &RadialProfile,
    opts: &SolverOptions,
) -> Result<MinimizeOutput> {
    require_positive("beta", beta)?;
    opts.validate()?;
    let grid = initial.grid().clone();
    if grid.n() < 3 {
        return Err(Error::InvalidGrid(
            "the solver needs at least 3 nodes".into(),
        ));
    }
    let tau = opts.step_for(&grid);
    let stencil = Stencil::new(&grid);
    let start = initial.with_values(initial.values().iter().map(|v| v.abs()).collect());
    let mut v = project_sphere(&start)?.into_values();
    let mut next = vec![0.0; v.len()];

    let snapshot = |v: &[f64]| initial.with_values(v.to_vec());
    let first = evaluate_functional(&snapshot(&v), beta)?;
    let mut best = (first, v.clone());
    let mut last_energy = first.total;
    let mut last_iter = 0;
    let mut trace = SolverTrace::default();
    let mut increases = 0;

    for iter in 1..=opts.max_iters {
        stencil.step(&v, tau, tau * beta, &mut next);
        let norm_sq = stencil.norm_sq(&next);
        if !norm_sq.is_finite() {
            return Err(Error::Divergence {
                iteration: iter,
                energy: f64::NAN,
                step: tau,
            });
        }
        if norm_sq <= 0.0 {
            return Err(Error::DegenerateThreshold {
                iteration: iter,
                threshold: tau * beta,
            });
        }
        let scale = norm_sq.sqrt().recip();
        v.iter_mut().zip(&next).for_each(|(x, y)| *x = y * scale);

        if opts.rearrange_every > 0 && iter % opts.rearrange_every == 0 {
            v = rearrange(&snapshot(&v)).into_values();
            let norm = l2_norm(&snapshot(&v));
            v.iter_mut().for_each(|x| *x /= norm);
        }

        if iter % opts.check_every != 0 && iter != opts.max_iters {
            continue;
        }
        let p = snapshot(&v);
        let energy = evaluate_functional(&p, beta)?;
        // Projection keeps an unstable mode bounded, so a bad step shows up as
        // an iterate stuck far above where it started rather than as overflow.
        if !energy.total.is_finite() || energy.total > 10.0 * first.total.abs().max(1e-300) {
            return Err(Error::Divergence {
                iteration: iter,
                energy: energy.total,
                step: tau,
            });
        }
        trace.records.push(TraceRecord {
            iter,
            energy,
            l2err: (energy.l2 - 1.0).abs(),
            tailmass: tail_mass(&p),
        });
        trace.iterations = iter;

        let decrease = (last_energy - energy.total) / energy.total.abs().max(f64::MIN_POSITIVE);
        if decrease < -INCREASE_SLACK {
            trace.violations += 1;
            increases += 1;
            if increases >= PERSISTENT_INCREASES {
                return Err(Error::EnergyIncrease {
                    iteration: iter,
                    relative: -decrease,
                });
            }
        } else {
            increases = 0;
        }
        if energy.total < best.0.total {
            best = (energy, v.clone());
        }
        let flow_time = (iter - last_iter) as f64 * tau;
        last_energy = energy.total;
        last_iter = iter;
        if decrease >= 0.0 && decrease / flow_time < opts.energy_tol {
            trace.converged = true;
            break;
        }
    }

    Ok(MinimizeOutput {
        profile: snapshot(&best.1),
        energy: best.0,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{sample, solve_parameters};
    use crate::radial::{inner_product, kinetic_energy};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize, r_max: f64) -> RadialGrid {
        RadialGrid::new(n, r_max).unwrap()
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let p = RadialProfile::from_fn(&grid(50, 2.0), |_| 3.0).unwrap();
        assert!(smooth_gradient(&p).values().iter().all(|&g| g.abs() < 1e-9));
    }

    #[test]
    fn sinc_is_an_eigenfunction() {
        let mu = 2.3;
        let mut errs = vec![];
        for n in [401, 801] {
            let g = grid(n, 3.0);
            let p = RadialProfile::from_fn(&g, |r| crate::closed_form::sinc(mu * r)).unwrap();
            let lap = smooth_gradient(&p);
            let err = lap
                .values()
                .iter()
                .zip(p.values())
                .take(n - 1)
                .map(|(l, v)| (l - mu * mu * v).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < 1e-4);
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn stencil_matches_library_operators() {
        let g = grid(64, 1.7);
        let p = RadialProfile::from_fn(&g, |r| (3.0 * r).cos() + r * r).unwrap();
        let s = Stencil::new(&g);
        assert_relative_eq!(
            s.norm_sq(p.values()),
            l2_norm(&p).powi(2),
            max_relative = 1e-12
        );
        let mut out = vec![0.0; 64];
        s.step(p.values(), 1e-3, 0.0, &mut out);
        let lap = laplacian(&p);
        for ((o, v), l) in out.iter().zip(p.values()).zip(&lap) {
            assert!((o - (v - 1e-3 * l).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn prox_and_projection() {
        let g = grid(5, 1.0);
        let p = RadialProfile::new(g.clone(), vec![0.5, 0.2, 0.0, 1.0, 0.1]).unwrap();
        assert_eq!(prox_l1(&p, 0.0).unwrap(), p);
        let one = RadialProfile::from_fn(&g, |_| 1.0).unwrap();
        assert!(prox_l1(&one, 1.0).unwrap().is_zero());
        assert!(prox_l1(&p, -1.0).is_err());
        let q = p.scaled(2.0 / l2_norm(&p)).unwrap();
        let pq = project_sphere(&q).unwrap();
        for (a, b) in pq.values().iter().zip(q.values()) {
            assert_relative_eq!(*a, b / 2.0, max_relative = 1e-14);
        }
        assert!(project_sphere(&RadialProfile::zeros(&g)).is_err());
    }

    #[test]
    fn stationary_start_stays_put() {
        let params = solve_parameters(1.0, 1e-13).unwrap();
        let g = grid(1024, 2.0 * params.radius);
        let start = sample(&params, &g);
        let opts = SolverOptions {
            max_iters: 100,
            check_every: 10,
            rearrange_every: 0,
            ..SolverOptions::default()
        };
        let e0 = evaluate_functional(&project_sphere(&start).unwrap(), 1.0)
            .unwrap()
            .total;
        let out = minimize_from(1.0, &start, &opts).unwrap();
        for r in &out.trace.records {
            assert!(r.energy.total <= e0 * (1.0 + 1e-9));
            assert!(r.l2err <= 1e-10);
        }
    }

    #[test]
    fn oversized_step_is_reported() {
        let g = grid(256, 3.0);
        let opts = SolverOptions {
            step: Some(0.6 * g.h() * g.h()),
            max_iters: 20_000,
            check_every: 100,
            ..SolverOptions::default()
        };
        let err = minimize(1.0, &g, &opts).unwrap_err();
        assert!(
            matches!(err, Error::Divergence { .. } | Error::EnergyIncrease { .. }),
            "{err}"
        );
    }

    #[test]
    fn huge_threshold_is_degenerate() {
        let g = grid(64, 3.0);
        let opts = SolverOptions {
            step: Some(1.0),
            ..SolverOptions::default()
        };
        assert!(matches!(
            minimize(1e6, &g, &opts),
            Err(Error::DegenerateThreshold { .. })
        ));
    }

    #[test]
    fn rejects_bad_options() {
        let g = grid(64, 3.0);
        for opts in [
            SolverOptions {
                max_iters: 0,
                ..SolverOptions::default()
            },
            SolverOptions {
                energy_tol: 0.0,
                ..SolverOptions::default()
            },
            SolverOptions {
                step: Some(-1.0),
                ..SolverOptions::default()
            },
            SolverOptions {
                check_every: 0,
                ..SolverOptions::default()
            },
        ] {
            assert!(minimize(1.0, &g, &opts).is_err());
        }
        assert!(minimize(0.0, &g, &SolverOptions::default()).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = grid(128, 3.4);
        let opts = SolverOptions {
            max_iters: 3000,
            perturbation: 0.2,
            seed: 42,
            ..SolverOptions::default()
        };
        let a = minimize(1.0, &g, &opts).unwrap();
        let b = minimize(1.0, &g, &opts).unwrap();
        assert_eq!(a.profile, b.profile);
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.records.len() <= opts.max_iters);
    }

    #[test]
    fn trace_csv_header() {
        let g = grid(64, 3.4);
        let opts = SolverOptions {
            max_iters: 50,
            check_every: 10,
            ..SolverOptions::default()
        };
        let out = minimize(1.0, &g, &opts).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,total,kinetic,l1,l2err,tailmass\n"));
        assert_eq!(text.lines().count(), 6);
    }

    /// Minimizes `½(y - p)^2 + t|y|` over `y >= 0` on a fine scan.
    fn scalar_prox_oracle(p: f64, t: f64) -> f64 {
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=40_000 {
            let y = i as f64 * 1e-4;
            let f = 0.5 * (y - p).powi(2) + t * y;
            if f < best {
                best = f;
                arg = y;
            }
        }
        arg
    }

    proptest! {
        #[test]
        fn prox_matches_scalar_oracle(vals in prop::collection::vec(-2.0f64..2.0, 8), t in 0.0f64..1.5) {
            let p = RadialProfile::new(grid(8, 1.0), vals).unwrap();
            let q = prox_l1(&p, t).unwrap();
            for (a, &b) in q.values().iter().zip(p.values()) {
                prop_assert!((a - scalar_prox_oracle(b, t)).abs() <= 1e-4);
            }
        }

        #[test]
        fn projection_is_idempotent(vals in prop::collection::vec(0.01f64..5.0, 3..40)) {
            let n = vals.len();
            let p = RadialProfile::new(grid(n, 2.0), vals).unwrap();
            let once = project_sphere(&p).unwrap();
            let twice = project_sphere(&once).unwrap();
            prop_assert!((l2_norm(&once) - 1.0).abs() < 1e-12);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
            }
        }

        #[test]
        fn gradient_matches_energy_derivative(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let g = grid(200, 2.0);
            let p = RadialProfile::from_fn(&g, |r| (-r * r).exp() * (1.0 + 0.3 * (5.0 * r).sin())).unwrap();
            let d: Vec<f64> = (0..200).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
            let eps = 1e-5;
            let shift = |s: f64| p.with_values(p.values().iter().zip(&d).map(|(v, di)| v + s * di).collect());
            let fd = (kinetic_energy(&shift(eps)) - kinetic_energy(&shift(-eps))) / (2.0 * eps);
            let an = inner_product(&p.with_values(d.clone()), &laplacian(&p));
            prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-12));
        }
    }
}
