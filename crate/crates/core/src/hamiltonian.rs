//! Analytic matrix elements of `V' = (A - A_osc) b^2 + B b^3 cos 3g + C b^4`
//! in the oscillator bases and assembly of the band Hamiltonian.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::band::BandedSymmetricMatrix;
use crate::basis::{enumerate_basis, oscillator_energy, BasisIndex, BasisSpec, BasisState, QuantScheme};
use crate::error::{GcmError, Result};
use crate::model::ModelParams;

/// Effective `3m` entering the radial formulas: `3m` in 2D, `3mu + 3/2` in 5D.
fn three_m(scheme: QuantScheme, m: u32) -> f64 {
    if scheme.is_5d() {
        3.0 * m as f64 + 1.5
    } else {
        3.0 * m as f64
    }
}

/// Dimensionless radial element `k^{p/2} <bra| beta^p |ket>`.
pub fn radial_coefficient(power: u32, bra: BasisState, ket: BasisState, scheme: QuantScheme) -> f64 {
    match power {
        2 | 4 => {
            if bra.m_ang != ket.m_ang {
                return 0.0;
            }
            let a = three_m(scheme, ket.m_ang);
            let (lo, hi) = if bra.n_rad <= ket.n_rad { (bra.n_rad, ket.n_rad) } else { (ket.n_rad, bra.n_rad) };
            let n = lo as f64;
            match (power, hi - lo) {
                (2, 0) => 2.0 * n + a + 1.0,
                (2, 1) => -((n + 1.0) * (n + a + 1.0)).sqrt(),
                (4, 0) => n * (n - 1.0) + (n + a + 1.0) * (5.0 * n + a + 2.0),
                (4, 1) => -2.0 * (2.0 * n + a + 2.0) * ((n + a + 1.0) * (n + 1.0)).sqrt(),
                (4, 2) => ((n + a + 2.0) * (n + a + 1.0) * (n + 2.0) * (n + 1.0)).sqrt(),
                _ => 0.0,
            }
        }
        3 => {
            let (upper, lower) = if bra.m_ang == ket.m_ang + 1 {
                (bra, ket)
            } else if ket.m_ang == bra.m_ang + 1 {
                (ket, bra)
            } else {
                return 0.0;
            };
            if upper.n_rad > lower.n_rad {
                return 0.0;
            }
            let a = three_m(scheme, lower.m_ang);
            let n = lower.n_rad as f64;
            match lower.n_rad - upper.n_rad {
                0 => ((n + a + 3.0) * (n + a + 2.0) * (n + a + 1.0)).sqrt(),
                1 => -3.0 * (n * (n + a + 2.0) * (n + a + 1.0)).sqrt(),
                2 => 3.0 * (n * (n - 1.0) * (n + a + 1.0)).sqrt(),
                3 => -(n * (n - 1.0) * (n - 2.0)).sqrt(),
                _ => 0.0,
            }
        }
        _ => 0.0,
    }
}

/// `<bra| beta^power |ket>` for `power` in {2, 3, 4}.
pub fn radial_element(power: u32, bra: BasisState, ket: BasisState, spec: &BasisSpec) -> f64 {
    radial_coefficient(power, bra, ket, spec.scheme) * spec.k().powf(-(power as f64) / 2.0)
}

/// `<m_bra| cos 3 gamma |m_ket>`.
pub fn angular_element(scheme: QuantScheme, m_bra: u32, m_ket: u32) -> f64 {
    let lo = m_bra.min(m_ket);
    if m_bra.max(m_ket) != lo + 1 {
        return 0.0;
    }
    match scheme {
        QuantScheme::TwoDEven => {
            if lo == 0 {
                FRAC_1_SQRT_2
            } else {
                0.5
            }
        }
        QuantScheme::TwoDOdd => {
            if lo == 0 {
                0.0
            } else {
                0.5
            }
        }
        QuantScheme::FiveD => {
            let mu = lo as f64;
            (mu + 1.0) / ((2.0 * mu + 1.0) * (2.0 * mu + 3.0)).sqrt()
        }
    }
}

/// Index partners of `s` that can carry a nonzero element of `V'`.
fn partners(s: BasisState) -> impl Iterator<Item = (i64, i64)> {
    let n = s.n_rad as i64;
    let m = s.m_ang as i64;
    let same = (-2..=2).map(move |d| (n + d, m));
    let up = (-3..=0).map(move |d| (n + d, m + 1));
    let down = (0..=3).map(move |d| (n + d, m - 1));
    same.chain(up).chain(down)
}

/// Structural half-bandwidth of an enumerated basis.
pub fn structural_bandwidth(states: &[BasisState]) -> usize {
    let index = BasisIndex::new(states);
    let mut kd = 0;
    for (i, s) in states.iter().enumerate() {
        for (n, m) in partners(*s) {
            if let Some(j) = index.get(n, m) {
                kd = kd.max(i.abs_diff(j));
            }
        }
    }
    kd
}

/// `<bra| V' |ket>` (no oscillator part).
pub fn perturbation_element(params: &ModelParams, spec: &BasisSpec, bra: BasisState, ket: BasisState) -> f64 {
    let k = spec.k();
    let scheme = spec.scheme;
    let mut v = 0.0;
    if bra.m_ang == ket.m_ang {
        v += (params.a - spec.a_osc) * radial_coefficient(2, bra, ket, scheme) / k;
        v += params.c * radial_coefficient(4, bra, ket, scheme) / (k * k);
    } else if params.b != 0.0 {
        let ang = angular_element(scheme, bra.m_ang, ket.m_ang);
        if ang != 0.0 {
            v += params.b * ang * radial_coefficient(3, bra, ket, scheme) / (k * k.sqrt());
        }
    }
    v
}

/// Hamiltonian `H_osc + V'` in the truncated basis.
pub fn assemble(params: &ModelParams, spec: &BasisSpec) -> Result<BandedSymmetricMatrix> {
    spec.validate()?;
    let states = enumerate_basis(spec);
    Ok(assemble_states(params, spec, &states))
}

/// Block of fixed angular number `m` over radial numbers `0..size`. At `B = 0`
/// the Hamiltonian is the direct sum of these blocks.
pub fn assemble_m_block(params: &ModelParams, spec: &BasisSpec, m: u32, size: usize) -> Result<BandedSymmetricMatrix> {
    spec.validate()?;
    if m < spec.scheme.min_m() || size == 0 {
        return Err(GcmError::InvalidParameter(format!("no {} block with m = {m} and size {size}", spec.scheme)));
    }
    let mut mat = BandedSymmetricMatrix::zeros(size, 2.min(size - 1));
    for i in 0..size {
        let ket = BasisState::new(i as u32, m);
        for j in i.saturating_sub(2)..=i {
            let bra = BasisState::new(j as u32, m);
            let mut v = perturbation_element(params, spec, bra, ket);
            if i == j {
                v += oscillator_energy(ket, spec);
            }
            mat.set(i, j, v);
        }
    }
    Ok(mat)
}

pub(crate) fn assemble_states(params: &ModelParams, spec: &BasisSpec, states: &[BasisState]) -> BandedSymmetricMatrix {
    let index = BasisIndex::new(states);
    let kd = structural_bandwidth(states);
    let mut mat = BandedSymmetricMatrix::zeros(states.len(), kd);
    for (i, &ket) in states.iter().enumerate() {
        for (n, m) in partners(ket) {
            let Some(j) = index.get(n, m) else { continue };
            if j > i {
                continue;
            }
            let bra = states[j];
            let mut v = perturbation_element(params, spec, bra, ket);
            if i == j {
                v += oscillator_energy(ket, spec);
            }
            if v != 0.0 {
                mat.set(i, j, v);
            }
        }
    }
    mat
}

/// Closed-form trace of the truncated Hamiltonian as a function of `A_osc`.
#[derive(Debug, Clone, Copy)]
pub struct TraceModel {
    /// `sum (2n + 3m + zero point)`
    sum_quanta: f64,
    /// `sum k <beta^2>_ii`
    sum_r2: f64,
    /// `sum k^2 <beta^4>_ii`
    sum_r4: f64,
    params: ModelParams,
}

impl TraceModel {
    pub fn new(params: &ModelParams, scheme: QuantScheme, dimension: usize) -> Self {
        let states = crate::basis::enumerate_states(scheme, dimension);
        let mut sum_quanta = 0.0;
        let mut sum_r2 = 0.0;
        let mut sum_r4 = 0.0;
        for s in &states {
            sum_quanta += s.quanta() as f64 + scheme.zero_point();
            sum_r2 += radial_coefficient(2, *s, *s, scheme);
            sum_r4 += radial_coefficient(4, *s, *s, scheme);
        }
        Self { sum_quanta, sum_r2, sum_r4, params: *params }
    }

    pub fn trace(&self, a_osc: f64) -> f64 {
        let p = &self.params;
        let hbar_omega = p.hbar * (2.0 * a_osc / p.k).sqrt();
        let k = (2.0 * a_osc * p.k).sqrt() / p.hbar;
        hbar_omega * self.sum_quanta + (p.a - a_osc) * self.sum_r2 / k + p.c * self.sum_r4 / (k * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoscChoice {
    /// Minimizer of the trace.
    pub trace_minimum: f64,
    /// `c_shift * trace_minimum`, the value to use.
    pub a_osc: f64,
    pub evaluations: usize,
}

pub const DEFAULT_C_SHIFT: f64 = 0.6;

/// Golden-section search for the trace minimum in `ln A_osc` over
/// `[1e-6, 1e6] * (|A| + |C|)`, deflated by `c_shift`.
pub fn optimize_a_osc(params: &ModelParams, scheme: QuantScheme, dimension: usize, c_shift: f64) -> Result<AoscChoice> {
    if !(c_shift > 0.0 && c_shift <= 1.0) {
        return Err(GcmError::InvalidParameter(format!("c_shift must lie in (0, 1], got {c_shift}")));
    }
    let model = TraceModel::new(params, scheme, dimension);
    let a_ref = params.a.abs() + params.c.abs();
    let (lo0, hi0) = ((1e-6 * a_ref).ln(), (1e6 * a_ref).ln());
    let f = |x: f64| model.trace(x.exp());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evaluations = 2;
    // relative 1e-4 in A_osc is 1e-4 in ln A_osc
    while hi - lo > 1e-5 && evaluations < 60 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        evaluations += 1;
    }
    let x = 0.5 * (lo + hi);
    let edge = 1e-3 * (hi0 - lo0);
    if x - lo0 < edge || hi0 - x < edge {
        return Err(GcmError::NoInteriorMinimum { lo: lo0.exp(), hi: hi0.exp() });
    }
    let trace_minimum = x.exp();
    Ok(AoscChoice { trace_minimum, a_osc: c_shift * trace_minimum, evaluations })
}
