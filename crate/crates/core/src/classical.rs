//! Classical limit: trajectories, alignment-index classification and the
//! regular fraction of phase space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GcmError, Result};
use crate::model::{accessible_boundary, gradient_xy, hessian_xy, potential_xy, ModelParams};
use crate::verner;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhasePoint {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    /// Rotation of both coordinates and momenta by `angle`.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, c * self.px - s * self.py, s * self.px + c * self.py)
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    }
}

pub fn hamiltonian_value(p: &PhasePoint, params: &ModelParams) -> f64 {
    (p.px * p.px + p.py * p.py) / (2.0 * params.k) + potential_xy(params, p.x, p.y)
}

/// Drift measure `|E - E0| / max(|E0|, 1)`.
pub fn relative_drift(e: f64, e0: f64) -> f64 {
    (e - e0).abs() / e0.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub t_max: f64,
    /// Local error tolerance of the adaptive integrator (relative and absolute).
    pub step_tol: f64,
    pub drift_tol: f64,
    pub chaos_threshold: f64,
    pub regular_threshold: f64,
    pub renorm_interval: f64,
    pub max_steps: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            t_max: 1e4,
            step_tol: 1e-13,
            drift_tol: 1e-9,
            chaos_threshold: 1e-8,
            regular_threshold: 1e-4,
            renorm_interval: 1.0,
            max_steps: 50_000_000,
        }
    }
}

/// Adaptive Verner 9(8) integrator for `dy/dt = f(y)` on a fixed-size state.
struct Verner98<const N: usize> {
    tol: f64,
    h: f64,
    steps: usize,
    max_steps: usize,
}

impl<const N: usize> Verner98<N> {
    fn new(tol: f64, h0: f64, max_steps: usize) -> Self {
        Self { tol, h: h0, steps: 0, max_steps }
    }

    fn try_step(&self, f: &impl Fn(&[f64; N], &mut [f64; N]), y: &[f64; N], h: f64) -> ([f64; N], f64) {
        let mut k = [[0.0; N]; verner::STAGES];
        for s in 0..verner::STAGES {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = verner::A[s][j];
                if a != 0.0 {
                    for i in 0..N {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            let mut out = [0.0; N];
            f(&ys, &mut out);
            k[s] = out;
        }
        let mut hi = *y;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut dh = 0.0;
            let mut dl = 0.0;
            for s in 0..verner::STAGES {
                dh += verner::B_HIGH[s] * k[s][i];
                dl += verner::B_LOW[s] * k[s][i];
            }
            hi[i] += h * dh;
            let scale = self.tol * (1.0 + y[i].abs().max(hi[i].abs()));
            err = err.max((h * (dh - dl)).abs() / scale);
        }
        (hi, err)
    }

    /// Advances `y` from `t` to exactly `t_end`.
    fn advance(&mut self, f: &impl Fn(&[f64; N], &mut [f64; N]), y: &mut [f64; N], t: f64, t_end: f64) -> Result<()> {
        let mut t = t;
        while t < t_end {
            if self.steps >= self.max_steps {
                return Err(GcmError::Integration { t, reason: "step budget exhausted".into() });
            }
            let last = self.h >= t_end - t;
            let h = if last { t_end - t } else { self.h };
            let (ynew, err) = self.try_step(f, y, h);
            self.steps += 1;
            if !err.is_finite() {
                self.h *= 0.1;
            } else if err <= 1.0 {
                *y = ynew;
                t = if last { t_end } else { t + h };
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 9.0)).clamp(0.2, 5.0) };
                if !last || h >= self.h {
                    self.h = h * grow;
                }
            } else {
                self.h = h * (0.9 * err.powf(-1.0 / 9.0)).clamp(0.2, 1.0);
            }
            if self.h < 1e-12 * t_end.abs().max(1.0) {
                return Err(GcmError::Integration { t, reason: "step size underflow".into() });
            }
        }
        Ok(())
    }
}

fn flow(params: &ModelParams) -> impl Fn(&[f64; 4], &mut [f64; 4]) + '_ {
    move |y, out| {
        let g = gradient_xy(params, y[0], y[1]);
        out[0] = y[2] / params.k;
        out[1] = y[3] / params.k;
        out[2] = -g[0];
        out[3] = -g[1];
    }
}

/// Trajectory together with two tangent vectors.
fn tangent_flow(params: &ModelParams) -> impl Fn(&[f64; 12], &mut [f64; 12]) + '_ {
    move |y, out| {
        let g = gradient_xy(params, y[0], y[1]);
        let h = hessian_xy(params, y[0], y[1]);
        out[0] = y[2] / params.k;
        out[1] = y[3] / params.k;
        out[2] = -g[0];
        out[3] = -g[1];
        for w in [4, 8] {
            out[w] = y[w + 2] / params.k;
            out[w + 1] = y[w + 3] / params.k;
            out[w + 2] = -(h[0][0] * y[w] + h[0][1] * y[w + 1]);
            out[w + 3] = -(h[1][0] * y[w] + h[1][1] * y[w + 1]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at unit time intervals, starting with the initial point.
    pub samples: Vec<(f64, PhasePoint)>,
    pub max_drift: f64,
    pub steps: usize,
}

/// Integrates Hamilton's equations to `t_max`; fails if the energy drift
/// exceeds `cfg.drift_tol`.
pub fn integrate(p0: &PhasePoint, params: &ModelParams, t_max: f64, cfg: &ClassicalConfig) -> Result<Trajectory> {
    if !(t_max > 0.0) {
        return Err(GcmError::InvalidParameter("t_max must be positive".into()));
    }
    let e0 = hamiltonian_value(p0, params);
    let f = flow(params);
    let mut rk = Verner98::<4>::new(cfg.step_tol, 0.01, cfg.max_steps);
    let mut y = p0.to_array();
    let mut t = 0.0;
    let mut samples = vec![(0.0, *p0)];
    let mut max_drift = 0.0f64;
    while t < t_max {
        let t_next = (t + cfg.renorm_interval).min(t_max);
        rk.advance(&f, &mut y, t, t_next)?;
        t = t_next;
        let p = PhasePoint::from_slice(&y);
        max_drift = max_drift.max(relative_drift(hamiltonian_value(&p, params), e0));
        if max_drift > cfg.drift_tol {
            return Err(GcmError::Integration { t, reason: format!("energy drift {max_drift:.3e}") });
        }
        samples.push((t, p));
    }
    Ok(Trajectory { samples, max_drift, steps: rk.steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Regular,
    Chaotic,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub classification: Classification,
    pub sali: f64,
    pub t_reached: f64,
    pub max_drift: f64,
    pub failure: Option<String>,
}

fn normalize4(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Smaller alignment index of two unit vectors.
pub fn sali(w1: &[f64], w2: &[f64]) -> f64 {
    let plus: f64 = w1.iter().zip(w2).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
    let minus: f64 = w1.iter().zip(w2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    plus.min(minus)
}

/// Classifies the orbit through `p0` by the alignment index of two tangent vectors.
pub fn sali_classify(p0: &PhasePoint, params: &ModelParams, cfg: &ClassicalConfig) -> TrajectoryResult {
    let e0 = hamiltonian_value(p0, params);
    let f = tangent_flow(params);
    let mut rk = Verner98::<12>::new(cfg.step_tol, 0.01, cfg.max_steps);
    let mut y = [0.0; 12];
    y[..4].copy_from_slice(&p0.to_array());
    y[4] = 1.0;
    y[9] = 1.0;
    let mut t = 0.0;
    let mut index = sali(&y[4..8], &y[8..12]);
    let mut max_drift = 0.0f64;
    let undecided = |t, index, max_drift, why: String| TrajectoryResult {
        classification: Classification::Undecided,
        sali: index,
        t_reached: t,
        max_drift,
        failure: Some(why),
    };
    while t < cfg.t_max {
        let t_next = (t + cfg.renorm_interval).min(cfg.t_max);
        if let Err(e) = rk.advance(&f, &mut y, t, t_next) {
            return undecided(t, index, max_drift, e.to_string());
        }
        t = t_next;
        normalize4(&mut y[4..8]);
        normalize4(&mut y[8..12]);
        index = sali(&y[4..8], &y[8..12]);
        max_drift = max_drift.max(relative_drift(hamiltonian_value(&PhasePoint::from_slice(&y[..4]), params), e0));
        if max_drift > cfg.drift_tol {
            return undecided(t, index, max_drift, format!("energy drift {max_drift:.3e}"));
        }
        if index < cfg.chaos_threshold {
            return TrajectoryResult { classification: Classification::Chaotic, sali: index, t_reached: t, max_drift, failure: None };
        }
    }
    let classification = if index >= cfg.regular_threshold { Classification::Regular } else { Classification::Undecided };
    TrajectoryResult { classification, sali: index, t_reached: t, max_drift, failure: None }
}

/// Points on the energy shell in the `y = 0` section with `py > 0`,
/// uniform in `(x, px)` over the allowed region.
pub fn sample_energy_shell(params: &ModelParams, energy: f64, count: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let (xmin, xmax, vmin) = section_extent(params, energy)?;
    if count == 0 {
        return Ok(vec![]);
    }
    let k2 = 2.0 * params.k;
    let pmax = (k2 * (energy - vmin)).max(0.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count + 1_000_000 {
            return Err(GcmError::InvalidParameter(format!("energy shell at E={energy} has negligible section area")));
        }
        let x = xmin + (xmax - xmin) * rng.random::<f64>();
        let px = pmax * (2.0 * rng.random::<f64>() - 1.0);
        let kin = k2 * (energy - potential_xy(params, x, 0.0)) - px * px;
        if kin >= 0.0 {
            out.push(PhasePoint::new(x, 0.0, px, kin.sqrt()));
        }
    }
    Ok(out)
}

/// Range of `x` on the `y = 0` line where `V(x, 0) <= E`, and the minimum of `V` there.
pub fn section_extent(params: &ModelParams, energy: f64) -> Result<(f64, f64, f64)> {
    let mut xs = vec![];
    for iv in accessible_boundary(params, energy, 0.0) {
        xs.push(iv.lo);
        xs.push(iv.hi);
    }
    for iv in accessible_boundary(params, energy, std::f64::consts::PI) {
        xs.push(-iv.lo);
        xs.push(-iv.hi);
    }
    if xs.is_empty() {
        return Err(GcmError::BelowMinimum { energy, minimum: crate::model::potential_minimum(params) });
    }
    let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // critical points of V(x,0): x = 0 and roots of 4C x^2 + 3B x + 2A = 0
    let mut vmin = potential_xy(params, xmin, 0.0).min(potential_xy(params, xmax, 0.0));
    let mut cands = vec![0.0];
    let (a, b, c) = (4.0 * params.c, 3.0 * params.b, 2.0 * params.a);
    if a != 0.0 {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            cands.push((-b + disc.sqrt()) / (2.0 * a));
            cands.push((-b - disc.sqrt()) / (2.0 * a));
        }
    }
    for x in cands {
        if x >= xmin && x <= xmax {
            vmin = vmin.min(potential_xy(params, x, 0.0));
        }
    }
    Ok((xmin, xmax, vmin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularFractionPoint {
    pub b: f64,
    pub energy: f64,
    pub f_reg: f64,
    pub sigma: f64,
    pub n_regular: usize,
    pub n_chaotic: usize,
    pub n_undecided: usize,
    pub n_total: usize,
}

impl RegularFractionPoint {
    pub fn from_counts(b: f64, energy: f64, n_regular: usize, n_chaotic: usize, n_undecided: usize) -> Self {
        let decided = n_regular + n_chaotic;
        let f_reg = if decided > 0 { n_regular as f64 / decided as f64 } else { f64::NAN };
        let sigma = if decided > 0 { (f_reg * (1.0 - f_reg) / decided as f64).sqrt() } else { f64::NAN };
        Self { b, energy, f_reg, sigma, n_regular, n_chaotic, n_undecided, n_total: decided + n_undecided }
    }
}

/// Samples the shell, classifies every orbit and counts.
pub fn regular_fraction(params: &ModelParams, energy: f64, count: usize, cfg: &ClassicalConfig, seed: u64) -> Result<RegularFractionPoint> {
    if count == 0 {
        return Err(GcmError::InvalidParameter("count must be at least 1".into()));
    }
    let points = sample_energy_shell(params, energy, count, seed)?;
    let classes: Vec<Classification> = points.par_iter().map(|p| sali_classify(p, params, cfg).classification).collect();
    let count_of = |c| classes.iter().filter(|&&x| x == c).count();
    Ok(RegularFractionPoint::from_counts(
        params.b,
        energy,
        count_of(Classification::Regular),
        count_of(Classification::Chaotic),
        count_of(Classification::Undecided),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FregCell {
    pub b: f64,
    pub energy: f64,
    pub point: Option<RegularFractionPoint>,
    pub error: Option<String>,
}

/// `regular_fraction` over a `B x E` grid; failing cells are recorded and skipped.
pub fn freg_map(
    template: &ModelParams,
    b_grid: &[f64],
    e_grid: &[f64],
    count: usize,
    cfg: &ClassicalConfig,
    seed: u64,
) -> Result<Vec<FregCell>> {
    if b_grid.is_empty() || e_grid.is_empty() {
        return Err(GcmError::InvalidParameter("empty B or E grid".into()));
    }
    let mut cells = Vec::with_capacity(b_grid.len() * e_grid.len());
    for (ib, &b) in b_grid.iter().enumerate() {
        for (ie, &e) in e_grid.iter().enumerate() {
            let cell_seed = seed ^ ((ib as u64) << 32) ^ (ie as u64);
            let result = ModelParams::new(template.a, b, template.c, template.k, template.hbar)
                .and_then(|p| regular_fraction(&p, e, count, cfg, cell_seed));
            cells.push(match result {
                Ok(p) => FregCell { b, energy: e, point: Some(p), error: None },
                Err(err) => FregCell { b, energy: e, point: None, error: Some(err.to_string()) },
            });
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fig() -> ModelParams {
        ModelParams::new(-1.0, 1.09, 1.0, 1.0, 0.05).unwrap()
    }

    #[test]
    fn tableau_is_consistent() {
        for s in 0..verner::STAGES {
            let row: f64 = verner::A[s].iter().sum();
            assert!((row - verner::C[s]).abs() < 1e-13, "row {s}");
        }
        assert!((verner::B_HIGH.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((verner::B_LOW.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ninth_order_convergence() {
        // y' = y on [0, 1] with fixed steps
        let rk = Verner98::<1>::new(1.0, 0.0, 0);
        let f = |y: &[f64; 1], out: &mut [f64; 1]| out[0] = y[0];
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0];
            for _ in 0..n {
                y = rk.try_step(&f, &y, h).0;
            }
            (y[0] - 1f64.exp()).abs()
        };
        let (e1, e2) = (err(2), err(4));
        let order = (e1 / e2).log2();
        assert!(order > 8.5, "observed order {order}");
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian_value(&PhasePoint::new(0.0, 0.0, 0.0, 0.0), &fig()), 0.0);
        let flat = ModelParams::new(-1.0, 0.0, 1.0, 1.0, 0.05).unwrap();
        assert_eq!(hamiltonian_value(&PhasePoint::new(1.0, 0.0, 0.0, 0.0), &flat), 0.0);
        let p = PhasePoint::new(0.3, -0.2, 0.4, 0.1);
        let q = p.rotated(2.0 * PI / 3.0);
        assert!((hamiltonian_value(&p, &fig()) - hamiltonian_value(&q, &fig())).abs() < 1e-14);
    }

    #[test]
    fn harmonic_ellipse() {
        let p = ModelParams::new(0.5, 0.0, 0.0, 2.0, 0.05).unwrap();
        let w = (2.0 * p.a / p.k).sqrt();
        let p0 = PhasePoint::new(0.7, -0.2, 0.3, 0.5);
        let periods = 100.0;
        let t_max = periods * 2.0 * PI / w;
        let traj = integrate(&p0, &p, t_max, &ClassicalConfig::default()).unwrap();
        for &(t, q) in traj.samples.iter().step_by(97) {
            let (s, c) = (w * t).sin_cos();
            let x = p0.x * c + p0.px / (p.k * w) * s;
            let y = p0.y * c + p0.py / (p.k * w) * s;
            assert!((q.x - x).abs() < 1e-8 && (q.y - y).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn time_reversal() {
        let p = fig();
        let p0 = PhasePoint::new(0.2, 0.1, 0.3, -0.2);
        let cfg = ClassicalConfig::default();
        let fwd = integrate(&p0, &p, 50.0, &cfg).unwrap();
        let end = fwd.samples.last().unwrap().1;
        let back = integrate(&PhasePoint::new(end.x, end.y, -end.px, -end.py), &p, 50.0, &cfg).unwrap();
        let q = back.samples.last().unwrap().1;
        assert!(q.distance(&PhasePoint::new(p0.x, p0.y, -p0.px, -p0.py)) < 1e-6);
        assert!(fwd.max_drift < 1e-9);
    }

    #[test]
    fn shell_points_have_the_energy() {
        let p = fig();
        let pts = sample_energy_shell(&p, 0.3, 500, 4).unwrap();
        assert_eq!(pts.len(), 500);
        for q in &pts {
            assert!((hamiltonian_value(q, &p) - 0.3).abs() < 1e-12);
            assert!(q.py >= 0.0 && q.y == 0.0);
        }
        assert!(sample_energy_shell(&p, 0.3, 0, 4).unwrap().is_empty());
        assert_eq!(sample_energy_shell(&p, 0.3, 20, 9).unwrap(), sample_energy_shell(&p, 0.3, 20, 9).unwrap());
        assert!(sample_energy_shell(&p, -5.0, 10, 1).is_err());
    }

    #[test]
    fn integrable_orbits_are_regular() {
        let p = ModelParams::new(-1.0, 0.0, 1.0, 1.0, 0.05).unwrap();
        let cfg = ClassicalConfig { t_max: 500.0, ..Default::default() };
        for q in sample_energy_shell(&p, 0.2, 5, 1).unwrap() {
            let r = sali_classify(&q, &p, &cfg);
            assert_eq!(r.classification, Classification::Regular, "{r:?}");
        }
    }

    #[test]
    fn counts_to_fraction() {
        let f = RegularFractionPoint::from_counts(0.5, 0.0, 30, 10, 5);
        assert_eq!(f.f_reg, 0.75);
        assert_eq!(f.n_total, 45);
        assert!((f.sigma - (0.75f64 * 0.25 / 40.0).sqrt()).abs() < 1e-15);
    }
}
