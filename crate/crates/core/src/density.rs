//! Probability densities of eigenstates in the `(x, y)` plane.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{angular_values, enumerate_basis, radial_values, BasisSpec, BasisState, QuantScheme};
use crate::error::{GcmError, Result};
use crate::model::{accessible_boundary, CartesianCoords, ModelParams};

/// Evaluates `sum_q c_q psi_q` at many points; the basis layout is cached.
pub struct WaveEvaluator<'a> {
    spec: &'a BasisSpec,
    states: Vec<BasisState>,
    /// largest radial number present for each `m`
    n_max: Vec<Option<u32>>,
}

impl<'a> WaveEvaluator<'a> {
    pub fn new(spec: &'a BasisSpec) -> Self {
        let states = enumerate_basis(spec);
        let m_top = states.iter().map(|s| s.m_ang).max().unwrap_or(0);
        let mut n_max = vec![None; m_top as usize + 1];
        for s in &states {
            let e = &mut n_max[s.m_ang as usize];
            *e = Some(e.map_or(s.n_rad, |n: u32| n.max(s.n_rad)));
        }
        Self { spec, states, n_max }
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    /// Wave function at `(beta, gamma)` for coefficient vector `coeffs`.
    pub fn psi(&self, coeffs: &[f64], beta: f64, gamma: f64) -> f64 {
        let k = self.spec.k();
        let scheme = self.spec.scheme;
        let radial: Vec<Vec<f64>> = self
            .n_max
            .iter()
            .enumerate()
            .map(|(m, n)| n.map_or(vec![], |n| radial_values(scheme, m as u32, n, k, beta)))
            .collect();
        let ang = angular_values(scheme, self.n_max.len() as u32 - 1, gamma);
        self.states
            .iter()
            .zip(coeffs)
            .map(|(s, c)| c * radial[s.m_ang as usize][s.n_rad as usize] * ang[s.m_ang as usize])
            .sum()
    }

    /// Density per unit `dx dy`; 5D carries the factor `beta^3 |sin 3 gamma|`.
    pub fn density(&self, coeffs: &[f64], c: CartesianCoords) -> f64 {
        let p = c.to_polar();
        let psi = self.psi(coeffs, p.beta, p.gamma);
        let d = psi * psi;
        if self.spec.scheme == QuantScheme::FiveD {
            d * p.beta.powi(3) * (3.0 * p.gamma).sin().abs()
        } else {
            d
        }
    }
}

pub fn density_at(vec: &[f64], spec: &BasisSpec, c: CartesianCoords) -> Result<f64> {
    let ev = WaveEvaluator::new(spec);
    check_len(vec, &ev)?;
    Ok(ev.density(vec, c))
}

fn check_len(vec: &[f64], ev: &WaveEvaluator) -> Result<()> {
    if vec.len() != ev.dimension() {
        return Err(GcmError::InvalidParameter(format!(
            "eigenvector has {} components, basis has {}",
            vec.len(),
            ev.dimension()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step() * i as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub x: Axis,
    pub y: Axis,
    /// Row-major, `values[iy * x.count + ix]`.
    pub values: Vec<f64>,
    pub scheme: QuantScheme,
    pub level_index: usize,
    pub energy: f64,
    /// Endpoints of the allowed `beta` intervals on 360 rays, as `(x, y)`.
    pub boundary: Vec<[f64; 2]>,
}

impl DensityGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.count + ix]
    }

    pub fn riemann_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.x.step() * self.y.step()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Interior grid points strictly larger than their 8 neighbours and above
    /// `rel` times the peak.
    pub fn local_maxima(&self, rel: f64) -> Vec<(usize, usize)> {
        let floor = rel * self.peak();
        let mut out = vec![];
        for iy in 1..self.y.count.saturating_sub(1) {
            for ix in 1..self.x.count.saturating_sub(1) {
                let v = self.at(ix, iy);
                if v <= floor {
                    continue;
                }
                let is_max = (-1i64..=1).all(|dy| {
                    (-1i64..=1).all(|dx| {
                        (dx == 0 && dy == 0) || v > self.at((ix as i64 + dx) as usize, (iy as i64 + dy) as usize)
                    })
                });
                if is_max {
                    out.push((ix, iy));
                }
            }
        }
        out
    }
}

/// Points `(x, y)` where the kinematic boundary at `energy` crosses `rays` rays.
pub fn boundary_points(params: &ModelParams, energy: f64, rays: usize) -> Vec<[f64; 2]> {
    let mut out = vec![];
    for r in 0..rays {
        let g = 2.0 * std::f64::consts::PI * r as f64 / rays as f64;
        let (s, c) = g.sin_cos();
        for iv in accessible_boundary(params, energy, g) {
            for b in [iv.lo, iv.hi] {
                if b > 0.0 {
                    out.push([b * c, b * s]);
                }
            }
        }
    }
    out
}

pub fn density_grid(
    vec: &[f64],
    spec: &BasisSpec,
    params: &ModelParams,
    x: Axis,
    y: Axis,
    level_index: usize,
    energy: f64,
) -> Result<DensityGrid> {
    let ev = WaveEvaluator::new(spec);
    check_len(vec, &ev)?;
    let values: Vec<f64> = (0..y.count)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let yv = y.value(iy);
            let ev = &ev;
            (0..x.count).map(move |ix| ev.density(vec, CartesianCoords::new(x.value(ix), yv)))
        })
        .collect();
    Ok(DensityGrid { x, y, values, scheme: spec.scheme, level_index, energy, boundary: boundary_points(params, energy, 360) })
}
