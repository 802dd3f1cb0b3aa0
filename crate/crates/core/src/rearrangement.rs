//! Symmetric decreasing rearrangement with respect to Lebesgue measure on R^3.
//!
//! The profile is read as its piecewise-linear interpolant, so each grid cell
//! is a spherical shell on which `|phi|` is linear in `r`. The distribution
//! function `V(t) = |{x : |phi|(x) > t}|` of that interpolant is evaluated
//! exactly shell by shell, and the rearranged profile at node `r_i` is
//! `phi*(r_i) = sup { t : V(t) > |B_{r_i}| }`. Sorted, nonnegative input is a
//! fixed point up to rounding.
//!
//! [`ShellDecomposition`] is the coarser piecewise-constant picture (one value
//! per cell) used for layer-cake bookkeeping and equimeasurability checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::grid::RadialProfile;
use crate::radial::{evaluate_functional, EnergyBreakdown};

/// `b^3 - a^3` without cancellation for nearby `a`, `b`.
fn cube_diff(a: f64, b: f64) -> f64 {
    (b - a) * (a * a + a * b + b * b)
}

fn ball_volume(r: f64) -> f64 {
    4.0 * PI / 3.0 * r * r * r
}

/// Piecewise-constant radial function: `values[k]` on the shell
/// `boundaries[k] <= r < boundaries[k + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellDecomposition {
    boundaries: Vec<f64>,
    values: Vec<f64>,
}

impl ShellDecomposition {
    pub fn new(boundaries: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if boundaries.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidProfile(format!(
                "{} boundaries for {} shells",
                boundaries.len(),
                values.len()
            )));
        }
        if boundaries[0] != 0.0 || boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(
                "shell boundaries must start at 0 and increase strictly".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite shell value".into()));
        }
        Ok(Self { boundaries, values })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.boundaries
            .windows(2)
            .map(|w| 4.0 * PI / 3.0 * cube_diff(w[0], w[1]))
            .collect()
    }

    pub fn total_volume(&self) -> f64 {
        ball_volume(*self.boundaries.last().unwrap())
    }

    /// Volume of `{|f| > t}`.
    pub fn distribution(&self, t: f64) -> f64 {
        self.volumes()
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.abs() > t)
            .map(|(vol, _)| vol)
            .sum()
    }

    pub fn l1(&self) -> f64 {
        self.volumes()
            .iter()
            .zip(&self.values)
            .map(|(vol, v)| vol * v.abs())
            .sum()
    }

    pub fn l2(&self) -> f64 {
        self.volumes()
            .iter()
            .zip(&self.values)
            .map(|(vol, v)| vol * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Layer-cake rearrangement: shells sorted by `|value|` descending and
    /// restacked outward from the origin, each keeping its volume.
    pub fn rearranged(&self) -> Self {
        let vols = self.volumes();
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&i, &j| self.values[j].abs().total_cmp(&self.values[i].abs()));
        let mut boundaries = Vec::with_capacity(self.boundaries.len());
        boundaries.push(0.0);
        let mut cum = 0.0;
        for &k in &order {
            cum += vols[k];
            boundaries.push((cum * 3.0 / (4.0 * PI)).cbrt());
        }
        // Restacking reproduces the outer radius up to rounding; keep it exact.
        *boundaries.last_mut().unwrap() = *self.boundaries.last().unwrap();
        let values = order.iter().map(|&k| self.values[k].abs()).collect();
        Self { boundaries, values }
    }
}

/// One shell per grid cell, valued at the cell midpoint of the interpolant.
pub fn to_shells(p: &RadialProfile) -> ShellDecomposition {
    let values = p.values().windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    ShellDecomposition {
        boundaries: p.grid().nodes().to_vec(),
        values,
    }
}

/// Shell `[a, b]` on which `|phi|` is linear from `fa` to `fb` (both >= 0).
#[derive(Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
}

impl Piece {
    fn lo(&self) -> f64 {
        self.fa.min(self.fb)
    }

    fn hi(&self) -> f64 {
        self.fa.max(self.fb)
    }

    fn full(&self) -> f64 {
        cube_diff(self.a, self.b)
    }

    /// `{|phi| > t}` restricted to this shell, in units of `4 pi / 3`, as a
    /// cubic in `s` for `t = t0 + s * width`. Valid while `t0` and
    /// `t0 + width` lie inside `[lo, hi]`; `width` may be negative.
    fn cubic(&self, t0: f64, width: f64) -> [f64; 4] {
        let len = self.b - self.a;
        let rise = self.fb - self.fa;
        let x0 = self.a + ((t0 - self.fa) / rise).clamp(0.0, 1.0) * len;
        // Distance the cut point moves over the whole interval.
        let w = len * (width / rise.abs());
        if rise > 0.0 {
            [
                cube_diff(x0, self.b),
                -3.0 * x0 * x0 * w,
                -3.0 * x0 * w * w,
                -w * w * w,
            ]
        } else {
            [
                cube_diff(self.a, x0),
                -3.0 * x0 * x0 * w,
                3.0 * x0 * w * w,
                -w * w * w,
            ]
        }
    }
}

fn pieces(p: &RadialProfile) -> Vec<Piece> {
    let nodes = p.grid().nodes();
    let v = p.values();
    let mut out = Vec::with_capacity(nodes.len() + 8);
    for k in 0..nodes.len() - 1 {
        let (a, b, va, vb) = (nodes[k], nodes[k + 1], v[k], v[k + 1]);
        if va * vb < 0.0 {
            let xc = a + (b - a) * va / (va - vb);
            out.push(Piece {
                a,
                b: xc,
                fa: va.abs(),
                fb: 0.0,
            });
            out.push(Piece {
                a: xc,
                b,
                fa: 0.0,
                fb: vb.abs(),
            });
        } else {
            out.push(Piece {
                a,
                b,
                fa: va.abs(),
                fb: vb.abs(),
            });
        }
    }
    out
}

/// Indices sorted by descending key. The stable sort merges the long
/// monotone runs typical of sampled profiles in close to linear time.
fn descending_order(keys: impl Iterator<Item = f64>) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = keys.zip(0..).collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    keyed.into_iter().map(|(_, k)| k).collect()
}

/// Sweeps the level sets of `|phi|` from the top down.
///
/// Between consecutive distinct nodal levels `L_j < t < L_{j-1}` the set of
/// shells cut by `t` is fixed, so `V` is continuous and monotone there.
struct LevelSweep {
    pieces: Vec<Piece>,
    levels: Vec<f64>,
    by_hi: Vec<usize>,
    by_lo: Vec<usize>,
    next_hi: usize,
    next_lo: usize,
    active_pos: Vec<Option<usize>>,
    active: Vec<usize>,
    full_volume: f64,
    j: usize,
    /// `V` on the current interval as cubics in `s` (from `L_j` up) and in
    /// `1 - s` (from `L_{j-1}` down). Each is accurate near its own base,
    /// where `V` may have a multiple zero.
    cubic: [f64; 4],
    cubic_top: [f64; 4],
    cubics_ready: bool,
    /// `V(L_j)`.
    volume_at_lo: f64,
    /// Previous solution `(t, target, dV/dt)`, used to seed Newton.
    last: (f64, f64, f64),
}

impl LevelSweep {
    fn new(pieces: Vec<Piece>) -> Self {
        let mut levels: Vec<f64> = pieces.iter().flat_map(|p| [p.fa, p.fb]).collect();
        levels.push(0.0);
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup();
        let by_hi = descending_order(pieces.iter().map(Piece::hi));
        let by_lo = descending_order(pieces.iter().map(Piece::lo));
        let n = pieces.len();
        let mut sweep = Self {
            pieces,
            levels,
            by_hi,
            by_lo,
            next_hi: 0,
            next_lo: 0,
            active_pos: vec![None; n],
            active: Vec::new(),
            full_volume: 0.0,
            j: 0,
            cubic: [0.0; 4],
            cubic_top: [0.0; 4],
            cubics_ready: false,
            volume_at_lo: 0.0,
            last: (f64::INFINITY, 0.0, 0.0),
        };
        sweep.enter_interval(1);
        sweep
    }

    fn bottom(&self) -> usize {
        self.levels.len() - 1
    }

    /// Moves to the interval `[L_j, L_{j-1})`, `j >= 1`.
    fn enter_interval(&mut self, j: usize) {
        let top = self.levels[j - 1];
        while self.next_hi < self.by_hi.len() && self.pieces[self.by_hi[self.next_hi]].hi() >= top {
            let k = self.by_hi[self.next_hi];
            if self.pieces[k].lo() < top {
                self.active_pos[k] = Some(self.active.len());
                self.active.push(k);
            }
            self.next_hi += 1;
        }
        while self.next_lo < self.by_lo.len() && self.pieces[self.by_lo[self.next_lo]].lo() >= top {
            let k = self.by_lo[self.next_lo];
            if let Some(pos) = self.active_pos[k].take() {
                self.active.swap_remove(pos);
                if let Some(&moved) = self.active.get(pos) {
                    self.active_pos[moved] = Some(pos);
                }
            }
            self.full_volume += self.pieces[k].full();
            self.next_lo += 1;
        }
        self.j = j;
        let lo = self.levels[j];
        self.volume_at_lo = self.full_volume
            + self
                .active
                .iter()
                .map(|&k| self.pieces[k].cubic(lo, 0.0)[0])
                .sum::<f64>();
        self.cubics_ready = false;
    }

    /// Builds both cubics for the current interval.
    fn prepare_cubics(&mut self) {
        let (lo, top) = (self.levels[self.j], self.levels[self.j - 1]);
        let width = top - lo;
        let mut cubic = [self.full_volume, 0.0, 0.0, 0.0];
        let mut cubic_top = cubic;
        for &k in &self.active {
            let piece = &self.pieces[k];
            for (c, d) in cubic.iter_mut().zip(piece.cubic(lo, width)) {
                *c += d;
            }
            for (c, d) in cubic_top.iter_mut().zip(piece.cubic(top, -width)) {
                *c += d;
            }
        }
        self.cubic = cubic;
        self.cubic_top = cubic_top;
        self.cubics_ready = true;
    }

    /// `V` and `dV/ds` at `s` in `[0, 1]` on the current interval.
    fn volume(&self, s: f64) -> (f64, f64) {
        let horner = |[c0, c1, c2, c3]: [f64; 4], x: f64| {
            (
                c0 + x * (c1 + x * (c2 + x * c3)),
                c1 + x * (2.0 * c2 + x * 3.0 * c3),
            )
        };
        if s <= 0.5 {
            horner(self.cubic, s)
        } else {
            let (v, dv) = horner(self.cubic_top, 1.0 - s);
            (v, -dv)
        }
    }

    /// `sup { t >= 0 : V(t) > target }`; targets must be visited in
    /// nondecreasing order.
    fn level_for(&mut self, target: f64) -> f64 {
        if self.levels.len() == 1 {
            return 0.0;
        }
        while self.volume_at_lo <= target {
            if self.j == self.bottom() {
                return 0.0;
            }
            self.enter_interval(self.j + 1);
        }
        let (base, top) = (self.levels[self.j], self.levels[self.j - 1]);
        if !self.cubics_ready {
            self.prepare_cubics();
        }
        if self.cubic_top[0] > target {
            return top;
        }
        let width = top - base;
        // V is continuous and strictly decreasing in s on (0, 1). Safeguarded
        // Newton, seeded by one step from the previous node's solution.
        let (t0, target0, dv0) = self.last;
        let guess = (t0 + (target - target0) / dv0 - base) / width;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut s = if guess > 0.0 && guess < 1.0 {
            guess
        } else {
            0.5
        };
        let mut dv_s = dv0 * width;
        for _ in 0..200 {
            let (v, dv) = self.volume(s);
            dv_s = dv;
            // Rounding in V is a few ulps of the enclosed volume; past that
            // Newton only chases noise.
            if (v - target).abs() <= 8.0 * f64::EPSILON * target {
                break;
            }
            if v > target {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - (v - target) / dv;
            let next = if dv < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let done = (next - s).abs() <= 4.0 * f64::EPSILON || hi - lo <= 4.0 * f64::EPSILON;
            s = next;
            if done {
                break;
            }
        }
        let t = base + s * width;
        self.last = (t, target, dv_s / width);
        t
    }
}

pub static ITERS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
/// Symmetric decreasing rearrangement `|phi|*` resampled on the input grid.
pub fn rearrange(p: &RadialProfile) -> RadialProfile {
    let mut sweep = LevelSweep::new(pieces(p));
    let mut out = Vec::with_capacity(p.values().len());
    let mut prev = f64::INFINITY;
    for &r in p.grid().nodes() {
        let t = sweep.level_for(r * r * r).max(0.0).min(prev);
        out.push(t);
        prev = t;
    }
    p.with_values(out)
}

/// Energies and norms of a profile and of its rearrangement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    pub f_before: f64,
    pub f_after: f64,
    pub l1_before: f64,
    pub l1_after: f64,
    pub l2_before: f64,
    pub l2_after: f64,
    pub kinetic_before: f64,
    pub kinetic_after: f64,
}

impl Lemma1Report {
    fn from_breakdowns(before: EnergyBreakdown, after: EnergyBreakdown) -> Self {
        Self {
            f_before: before.total,
            f_after: after.total,
            l1_before: before.l1,
            l1_after: after.l1,
            l2_before: before.l2,
            l2_after: after.l2,
            kinetic_before: before.kinetic,
            kinetic_after: after.kinetic,
        }
    }

    /// `F(phi*) <= F(phi) + slack * F(phi)`.
    pub fn functional_decreases(&self, slack: f64) -> bool {
        self.f_after <= self.f_before + slack * self.f_before.abs()
    }
}

pub fn check_lemma1(p: &RadialProfile, beta: f64) -> Result<Lemma1Report> {
    require_positive("beta", beta)?;
    let before = evaluate_functional(p, beta)?;
    let after = evaluate_functional(&rearrange(p), beta)?;
    Ok(Lemma1Report::from_breakdowns(before, after))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::radial::{kinetic_energy, l1_norm, l2_norm};
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_node_shell() {
        let g = RadialGrid::new(2, 1.0).unwrap();
        let p = RadialProfile::new(g, vec![1.0, 1.0]).unwrap();
        let s = to_shells(&p);
        assert_eq!(s.values(), &[1.0]);
        assert_relative_eq!(s.volumes()[0], 4.0 * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn shells_preserve_volume() {
        let g = RadialGrid::new(300, 2.5).unwrap();
        let p = RadialProfile::from_fn(&g, |r| r.sin()).unwrap();
        let s = to_shells(&p);
        assert!(s.volumes().iter().all(|&v| v > 0.0));
        let total: f64 = s.volumes().iter().sum();
        assert_relative_eq!(total, s.total_volume(), max_relative = 1e-13);
        let c = to_shells(&RadialProfile::from_fn(&g, |_| 0.7).unwrap());
        assert!(c.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn linear_profile_shells_decrease() {
        let g = RadialGrid::new(40, 1.0).unwrap();
        let s = to_shells(&RadialProfile::from_fn(&g, |r| 2.0 - r).unwrap());
        assert!(s.values().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn shell_rearrangement_is_equimeasurable() {
        let g = RadialGrid::new(200, 1.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| (7.0 * r).sin()).unwrap();
        let s = to_shells(&p);
        let t = s.rearranged();
        assert_relative_eq!(s.l1(), t.l1(), max_relative = 1e-13);
        assert_relative_eq!(s.l2(), t.l2(), max_relative = 1e-13);
        for level in [0.0, 0.1, 0.5, 0.9] {
            assert_relative_eq!(
                s.distribution(level),
                t.distribution(level),
                max_relative = 1e-12
            );
        }
        assert!(t.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn decreasing_input_is_fixed_point() {
        let g = RadialGrid::new(513, 2.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| (1.0 - r * r / 3.0).max(0.0).powi(2)).unwrap();
        let q = rearrange(&p);
        for (a, b) in p.values().iter().zip(q.values()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn sign_is_irrelevant() {
        let g = RadialGrid::new(101, 1.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| (1.0 - r) * (3.0 * r).cos()).unwrap();
        let neg = p.scaled(-1.0).unwrap();
        assert_eq!(rearrange(&p), rearrange(&neg));
    }

    #[test]
    fn increasing_ramp_matches_layer_cake() {
        // |phi| = r on [0, 1] has V(t) = 4π/3 (1 - t^3), so phi*(r) = (1 - r^3)^(1/3).
        let g = RadialGrid::new(2001, 1.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| r).unwrap();
        let q = rearrange(&p);
        for (&r, &v) in g.nodes().iter().zip(q.values()) {
            let exact = (1.0 - r * r * r).max(0.0).cbrt();
            assert!((v - exact).abs() <= 1e-12, "r={r}: {v} vs {exact}");
        }
        let s = to_shells(&p).rearranged();
        assert_relative_eq!(s.l1(), to_shells(&p).l1(), max_relative = 1e-13);
    }

    #[test]
    fn idempotent_and_monotone() {
        let mut rng = StdRng::seed_from_u64(11);
        let g = RadialGrid::new(257, 1.0).unwrap();
        for _ in 0..20 {
            let vals: Vec<f64> = (0..257)
                .map(|i| {
                    if i > 240 {
                        0.0
                    } else {
                        rng.gen_range(-1.0..1.0)
                    }
                })
                .collect();
            let p = RadialProfile::new(g.clone(), vals).unwrap();
            let q = rearrange(&p);
            assert!(q.values().windows(2).all(|w| w[1] <= w[0]));
            let qq = rearrange(&q);
            for (a, b) in q.values().iter().zip(qq.values()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lemma1_on_sorted_profile() {
        let g = RadialGrid::new(1025, 3.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| (-r * r).exp() - (-9.0f64).exp()).unwrap();
        let rep = check_lemma1(&p, 1.0).unwrap();
        assert!((rep.f_after - rep.f_before).abs() <= 1e-10 * rep.f_before);
        assert!(check_lemma1(&p, 0.0).is_err());
    }

    #[test]
    fn rough_profile_energy_drops() {
        let g = RadialGrid::new(801, 1.0).unwrap();
        let p = RadialProfile::from_fn(&g, |r| (1.0 - r) * (20.0 * r).sin()).unwrap();
        let q = rearrange(&p);
        assert!(kinetic_energy(&q) < kinetic_energy(&p));
        assert_relative_eq!(l1_norm(&q), l1_norm(&p), max_relative = 1e-5);
        assert_relative_eq!(l2_norm(&q), l2_norm(&p), max_relative = 1e-5);
    }
}
