//! Hamiltonian parameters, the potential surface and its geometry.

use std::f64::consts::{FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};

use crate::error::{GcmError, Result};

/// Parameters of `H = p^2/(2K) + A b^2 + B b^3 cos 3g + C b^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub hbar: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, c: f64, k: f64, hbar: f64) -> Result<Self> {
        let p = Self { a, b, c, k, hbar };
        p.validate()?;
        Ok(p)
    }

    /// Unit mass with `hbar = sqrt(kappa)`.
    pub fn with_kappa(a: f64, b: f64, c: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(GcmError::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        Self::new(a, b, c, 1.0, kappa.sqrt())
    }

    /// Classicality `hbar^2 / K`.
    pub fn kappa(&self) -> f64 {
        self.hbar * self.hbar / self.k
    }

    /// The potential must confine: `C > 0`, or the pure oscillator `C = B = 0, A > 0`.
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.k, self.hbar];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GcmError::InvalidParameter("non-finite parameter".into()));
        }
        if !(self.k > 0.0) {
            return Err(GcmError::InvalidParameter(format!("K must be positive, got {}", self.k)));
        }
        if !(self.hbar > 0.0) {
            return Err(GcmError::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        let oscillator = self.c == 0.0 && self.b == 0.0 && self.a > 0.0;
        if !(self.c > 0.0 || oscillator) {
            return Err(GcmError::InvalidParameter(format!(
                "C must be positive (got {}) unless the potential is a pure oscillator",
                self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeCoords {
    pub beta: f64,
    pub gamma: f64,
}

impl ShapeCoords {
    pub fn new(beta: f64, gamma: f64) -> Self {
        debug_assert!(beta >= 0.0);
        Self { beta, gamma }
    }

    pub fn to_cartesian(self) -> CartesianCoords {
        CartesianCoords { x: self.beta * self.gamma.cos(), y: self.beta * self.gamma.sin() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianCoords {
    pub x: f64,
    pub y: f64,
}

impl CartesianCoords {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// `gamma = atan2(y, x)`; the origin maps to `gamma = 0`.
    pub fn to_polar(self) -> ShapeCoords {
        let beta = self.x.hypot(self.y);
        let gamma = if beta == 0.0 { 0.0 } else { self.y.atan2(self.x) };
        ShapeCoords { beta, gamma }
    }
}

pub fn potential(params: &ModelParams, c: ShapeCoords) -> f64 {
    let b2 = c.beta * c.beta;
    b2 * (params.a + c.beta * params.b * (3.0 * c.gamma).cos() + params.c * b2)
}

/// Potential in Cartesian form, `A r^2 + B (x^3 - 3 x y^2) + C r^4`.
pub fn potential_xy(params: &ModelParams, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    params.a * r2 + params.b * x * (x * x - 3.0 * y * y) + params.c * r2 * r2
}

pub fn gradient_xy(params: &ModelParams, x: f64, y: f64) -> [f64; 2] {
    let r2 = x * x + y * y;
    [
        2.0 * params.a * x + 3.0 * params.b * (x * x - y * y) + 4.0 * params.c * r2 * x,
        2.0 * params.a * y - 6.0 * params.b * x * y + 4.0 * params.c * r2 * y,
    ]
}

/// Hessian `[[Vxx, Vxy], [Vxy, Vyy]]`.
pub fn hessian_xy(params: &ModelParams, x: f64, y: f64) -> [[f64; 2]; 2] {
    let r2 = x * x + y * y;
    let (a, b, c) = (params.a, params.b, params.c);
    let xx = 2.0 * a + 6.0 * b * x + 4.0 * c * (r2 + 2.0 * x * x);
    let yy = 2.0 * a - 6.0 * b * x + 4.0 * c * (r2 + 2.0 * y * y);
    let xy = -6.0 * b * y + 8.0 * c * x * y;
    [[xx, xy], [xy, yy]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub coords: ShapeCoords,
    pub energy: f64,
    pub kind: CriticalKind,
}

/// Critical points of the potential.
///
/// `dV/dgamma` vanishes only on the rays `sin 3 gamma = 0`, so every critical
/// point is an image of one on the `y = 0` axis, where the radial condition is
/// `x (2A + 3B x + 4C x^2) = 0`. Points with `x < 0` are reported on the
/// equivalent `gamma = pi/3` ray. The origin is always included.
pub fn potential_extrema(params: &ModelParams) -> Vec<CriticalPoint> {
    let mut xs = vec![0.0];
    if params.c > 0.0 {
        for r in quadratic_roots(4.0 * params.c, 3.0 * params.b, 2.0 * params.a) {
            let r = newton_polish(r, |x| {
                let v = 2.0 * params.a + 3.0 * params.b * x + 4.0 * params.c * x * x;
                let d = 3.0 * params.b + 8.0 * params.c * x;
                (v, d)
            });
            if r != 0.0 && !xs.iter().any(|&q: &f64| (q - r).abs() <= 1e-14 * r.abs().max(1.0)) {
                xs.push(r);
            }
        }
    }
    let scale = params.a.abs() + params.b.abs() + params.c.abs();
    xs.into_iter()
        .map(|x| {
            let h = hessian_xy(params, x, 0.0);
            // Hessian is diagonal on the y = 0 axis.
            let tol = 1e-12 * scale.max(1e-300);
            let (h1, h2) = (h[0][0], h[1][1]);
            let kind = if h1 >= -tol && h2 >= -tol {
                CriticalKind::Minimum
            } else if h1 <= tol && h2 <= tol {
                CriticalKind::Maximum
            } else {
                CriticalKind::Saddle
            };
            let coords = if x >= 0.0 {
                ShapeCoords::new(x, 0.0)
            } else {
                ShapeCoords::new(-x, FRAC_PI_3)
            };
            CriticalPoint { coords, energy: potential_xy(params, x, 0.0), kind }
        })
        .collect()
}

/// Global minimum value of the potential.
pub fn potential_minimum(params: &ModelParams) -> f64 {
    potential_extrema(params)
        .iter()
        .map(|p| p.energy)
        .fold(f64::INFINITY, f64::min)
}

/// Real roots of `a x^2 + b x + c`, ascending.
pub(crate) fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / a, c / q]
    };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    if disc == 0.0 {
        roots.truncate(1);
    }
    roots
}

fn newton_polish(x: f64, f: impl Fn(f64) -> (f64, f64)) -> f64 {
    let (v, d) = f(x);
    if d != 0.0 && d.is_finite() {
        let step = v / d;
        if step.abs() <= 1e-6 * x.abs().max(1.0) {
            return x - step;
        }
    }
    x
}

/// Closed interval `[lo, hi]` of deformations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Intervals of `beta >= 0` along a fixed ray where `V(beta, gamma) <= E`.
///
/// `f(beta) = V - E` is monotone between the zeros of
/// `f' = beta (2A + 3Bc beta + 4C beta^2)`, which are available in closed form,
/// so every root is bracketed and refined by bisection with a Newton finish.
pub fn accessible_boundary(params: &ModelParams, energy: f64, gamma: f64) -> Vec<BetaInterval> {
    let bc = params.b * (3.0 * gamma).cos();
    let f = |beta: f64| {
        let b2 = beta * beta;
        b2 * (params.a + bc * beta + params.c * b2) - energy
    };
    let df = |beta: f64| beta * (2.0 * params.a + 3.0 * bc * beta + 4.0 * params.c * beta * beta);

    let mut knots = vec![0.0];
    for r in quadratic_roots(4.0 * params.c, 3.0 * bc, 2.0 * params.a) {
        if r > 0.0 {
            knots.push(r);
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    // Outer knot where the confining term dominates.
    let scale = params.a.abs() + bc.abs() + energy.abs();
    let mut outer = knots.last().copied().unwrap_or(0.0).max(1.0);
    while f(outer) <= 0.0 {
        outer *= 2.0;
        if outer > 1e150 || !scale.is_finite() {
            break;
        }
    }
    knots.push(outer);

    let e_scale = energy.abs().max(scale).max(1e-300);
    let touch_tol = 1e-13 * e_scale;

    let mut points: Vec<f64> = Vec::new();
    let mut touches: Vec<f64> = Vec::new();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.abs() <= touch_tol {
            touches.push(lo);
        }
        if flo * fhi < 0.0 {
            points.push(bracketed_root(&f, &df, lo, hi));
        }
    }
    points.extend(touches.iter().copied());
    points.push(0.0);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));

    let mut out: Vec<BetaInterval> = Vec::new();
    for w in points.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if f(mid) < 0.0 {
            match out.last_mut() {
                Some(last) if (last.hi - w[0]).abs() <= 1e-15 * w[0].max(1.0) => last.hi = w[1],
                _ => out.push(BetaInterval { lo: w[0], hi: w[1] }),
            }
        }
    }
    // isolated tangency points
    for &t in &touches {
        let covered = out.iter().any(|iv| t >= iv.lo - 1e-12 && t <= iv.hi + 1e-12);
        if !covered {
            out.push(BetaInterval { lo: t, hi: t });
        }
    }
    // a lone zero of f at beta = 0 (E = 0 with V rising) is a point interval too
    if out.is_empty() && f(0.0) <= touch_tol && f(0.0) >= -touch_tol {
        out.push(BetaInterval { lo: 0.0, hi: 0.0 });
    }
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    out
}

fn bracketed_root(f: &impl Fn(f64) -> f64, df: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let d = df(x);
    if d != 0.0 {
        let y = x - f(x) / d;
        if y >= lo && y <= hi {
            return y;
        }
    }
    x
}

/// Factors relating original quantities to canonical ones:
/// `E = energy * E'`, `beta = length * beta'`, `t = time * t'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFactors {
    pub energy: f64,
    pub length: f64,
    pub time: f64,
    /// `B' = b_factor * B` (includes the sign flip when `B < 0`).
    pub b_factor: f64,
    /// `kappa' = kappa_factor * kappa`.
    pub kappa_factor: f64,
    /// Shift of gamma applied by the `B -> -B` gauge, `0` or `pi/3`.
    pub gamma_shift: f64,
}

impl ScaleFactors {
    pub fn identity() -> Self {
        Self { energy: 1.0, length: 1.0, time: 1.0, b_factor: 1.0, kappa_factor: 1.0, gamma_shift: 0.0 }
    }

    pub fn energy_to_original(&self, e_canonical: f64) -> f64 {
        self.energy * e_canonical
    }

    pub fn energy_to_canonical(&self, e: f64) -> f64 {
        e / self.energy
    }
}

/// Map to `A = +-1, C = 1, K = 1, B >= 0` keeping the classicality in `hbar`.
///
/// With `beta = l beta'`, `E = e E'`: `l^2 = |A|/C`, `e = A^2/C`,
/// `B' = B / sqrt(|A| C)`, `kappa' = kappa C^2 / |A|^3`. `A = 0` passes
/// through unchanged (apart from the sign of `B`).
pub fn rescale_to_canonical(params: &ModelParams) -> (ModelParams, ScaleFactors) {
    let sign_flip = if params.b < 0.0 { -1.0 } else { 1.0 };
    let gamma_shift = if params.b < 0.0 { PI / 3.0 } else { 0.0 };
    if params.a == 0.0 || params.c == 0.0 {
        let mut p = *params;
        p.b *= sign_flip;
        let mut f = ScaleFactors::identity();
        f.b_factor = sign_flip;
        f.gamma_shift = gamma_shift;
        return (p, f);
    }
    let abs_a = params.a.abs();
    let length = (abs_a / params.c).sqrt();
    let energy = params.a * params.a / params.c;
    let b_factor = sign_flip / (abs_a * params.c).sqrt();
    let kappa_factor = params.c * params.c / (abs_a * abs_a * abs_a);
    let kappa = params.kappa() * kappa_factor;
    let time = length * (params.k / energy).sqrt();
    let p = ModelParams { a: params.a.signum(), b: params.b * b_factor, c: 1.0, k: 1.0, hbar: kappa.sqrt() };
    (p, ScaleFactors { energy, length, time, b_factor, kappa_factor, gamma_shift })
}
