//! 2D and 5D harmonic-oscillator eigenbases restricted to the three-fold
//! symmetric sector.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GcmError, Result};
use crate::model::ShapeCoords;
use crate::special::{laguerre_functions, legendre_all};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuantScheme {
    #[serde(rename = "2d-even")]
    TwoDEven,
    #[serde(rename = "2d-odd")]
    TwoDOdd,
    #[serde(rename = "5d")]
    FiveD,
}

impl QuantScheme {
    pub const ALL: [QuantScheme; 3] = [QuantScheme::TwoDEven, QuantScheme::TwoDOdd, QuantScheme::FiveD];

    pub fn is_5d(self) -> bool {
        matches!(self, QuantScheme::FiveD)
    }

    /// Smallest admissible angular quantum number.
    pub fn min_m(self) -> u32 {
        match self {
            QuantScheme::TwoDOdd => 1,
            _ => 0,
        }
    }

    /// Zero-point offset of the oscillator spectrum in units of `hbar Omega`.
    pub fn zero_point(self) -> f64 {
        if self.is_5d() {
            2.5
        } else {
            1.0
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QuantScheme::TwoDEven => "2d-even",
            QuantScheme::TwoDOdd => "2d-odd",
            QuantScheme::FiveD => "5d",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            QuantScheme::TwoDEven => 0,
            QuantScheme::TwoDOdd => 1,
            QuantScheme::FiveD => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(QuantScheme::TwoDEven),
            1 => Some(QuantScheme::TwoDOdd),
            2 => Some(QuantScheme::FiveD),
            _ => None,
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuantScheme {
    type Err = GcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2d-even" | "2de" | "even" => Ok(QuantScheme::TwoDEven),
            "2d-odd" | "2do" | "odd" => Ok(QuantScheme::TwoDOdd),
            "5d" => Ok(QuantScheme::FiveD),
            other => Err(GcmError::Parse(format!("unknown scheme '{other}' (expected 2d-even, 2d-odd or 5d)"))),
        }
    }
}

/// Oscillator state `|n m>` (2D) or `|nu mu>` (5D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    pub n_rad: u32,
    pub m_ang: u32,
}

impl BasisState {
    pub fn new(n_rad: u32, m_ang: u32) -> Self {
        Self { n_rad, m_ang }
    }

    /// `2n + 3m`, the oscillator excitation without zero point.
    pub fn quanta(self) -> u32 {
        2 * self.n_rad + 3 * self.m_ang
    }

    pub fn is_valid_for(self, scheme: QuantScheme) -> bool {
        self.m_ang >= scheme.min_m()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub scheme: QuantScheme,
    pub a_osc: f64,
    /// Mass parameter `K`.
    pub mass: f64,
    pub hbar: f64,
    pub dimension: usize,
}

impl BasisSpec {
    pub fn new(scheme: QuantScheme, a_osc: f64, mass: f64, hbar: f64, dimension: usize) -> Result<Self> {
        let s = Self { scheme, a_osc, mass, hbar, dimension };
        s.validate()?;
        Ok(s)
    }

    pub fn for_params(scheme: QuantScheme, a_osc: f64, params: &crate::model::ModelParams, dimension: usize) -> Result<Self> {
        Self::new(scheme, a_osc, params.k, params.hbar, dimension)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_osc > 0.0) || !self.a_osc.is_finite() {
            return Err(GcmError::InvalidParameter(format!("a_osc must be positive, got {}", self.a_osc)));
        }
        if self.dimension == 0 {
            return Err(GcmError::InvalidParameter("basis dimension must be at least 1".into()));
        }
        if !(self.mass > 0.0) || !(self.hbar > 0.0) {
            return Err(GcmError::InvalidParameter("mass and hbar must be positive".into()));
        }
        Ok(())
    }

    /// Length-scale parameter `k = sqrt(2 A_osc K) / hbar`.
    pub fn k(&self) -> f64 {
        (2.0 * self.a_osc * self.mass).sqrt() / self.hbar
    }

    /// Oscillator frequency `Omega = sqrt(2 A_osc / K)`.
    pub fn omega(&self) -> f64 {
        (2.0 * self.a_osc / self.mass).sqrt()
    }

    pub fn hbar_omega(&self) -> f64 {
        self.hbar * self.omega()
    }

    pub fn with_a_osc(&self, a_osc: f64) -> Self {
        Self { a_osc, ..*self }
    }

    pub fn with_dimension(&self, dimension: usize) -> Self {
        Self { dimension, ..*self }
    }
}

/// `hbar Omega (2n + 3m + 1)` in 2D, `hbar Omega (2nu + 3mu + 5/2)` in 5D.
pub fn oscillator_energy(state: BasisState, spec: &BasisSpec) -> f64 {
    spec.hbar_omega() * (state.quanta() as f64 + spec.scheme.zero_point())
}

/// The first `spec.dimension` states ordered by oscillator energy, ties by `m` then `n`.
pub fn enumerate_basis(spec: &BasisSpec) -> Vec<BasisState> {
    enumerate_states(spec.scheme, spec.dimension)
}

pub fn enumerate_states(scheme: QuantScheme, dimension: usize) -> Vec<BasisState> {
    let m0 = scheme.min_m();
    // Grow the quanta ceiling until the closed shells hold enough states.
    let mut ceiling = 3 * m0 + 8;
    loop {
        let mut states = Vec::new();
        let mut m = m0;
        while 3 * m <= ceiling {
            let mut n = 0;
            while 2 * n + 3 * m <= ceiling {
                states.push(BasisState::new(n, m));
                n += 1;
            }
            m += 1;
        }
        if states.len() >= dimension {
            states.sort_by_key(|s| (s.quanta(), s.m_ang, s.n_rad));
            states.truncate(dimension);
            return states;
        }
        ceiling = ceiling * 3 / 2 + 2;
    }
}

/// Dense `(n, m) -> index` lookup for an enumerated basis.
#[derive(Debug, Clone)]
pub struct BasisIndex {
    n_max: u32,
    m_max: u32,
    table: Vec<Option<usize>>,
}

impl BasisIndex {
    pub fn new(states: &[BasisState]) -> Self {
        let n_max = states.iter().map(|s| s.n_rad).max().unwrap_or(0);
        let m_max = states.iter().map(|s| s.m_ang).max().unwrap_or(0);
        let mut table = vec![None; ((n_max + 1) * (m_max + 1)) as usize];
        for (i, s) in states.iter().enumerate() {
            table[(s.m_ang * (n_max + 1) + s.n_rad) as usize] = Some(i);
        }
        Self { n_max, m_max, table }
    }

    pub fn get(&self, n: i64, m: i64) -> Option<usize> {
        if n < 0 || m < 0 || n > self.n_max as i64 || m > self.m_max as i64 {
            return None;
        }
        self.table[(m as u32 * (self.n_max + 1) + n as u32) as usize]
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }
}

/// Laguerre upper index and the `t = k beta^2` power carried by the radial
/// function of angular number `m`.
pub(crate) fn radial_alpha(scheme: QuantScheme, m: u32) -> f64 {
    if scheme.is_5d() {
        3.0 * m as f64 + 1.5
    } else {
        3.0 * m as f64
    }
}

/// Radial functions for `n = 0..=nmax` at fixed `m` and `beta`.
pub fn radial_values(scheme: QuantScheme, m: u32, nmax: u32, k: f64, beta: f64) -> Vec<f64> {
    let t = k * beta * beta;
    let alpha = radial_alpha(scheme, m);
    if scheme.is_5d() {
        // sqrt(2 nu!/Gamma(nu+alpha+1)) k^{5/4} t^{3mu/2} e^{-t/2} L
        let pref = 2f64.sqrt() * k.powf(1.25);
        laguerre_functions(nmax as usize, alpha, 1.5 * m as f64, t)
            .into_iter()
            .map(|v| v * pref)
            .collect()
    } else {
        let pref = (2.0 * k).sqrt();
        laguerre_functions(nmax as usize, alpha, alpha / 2.0, t)
            .into_iter()
            .map(|v| v * pref)
            .collect()
    }
}

pub fn radial_wavefunction(state: BasisState, spec: &BasisSpec, beta: f64) -> f64 {
    radial_values(spec.scheme, state.m_ang, state.n_rad, spec.k(), beta)[state.n_rad as usize]
}

/// Angular function of the scheme.
pub fn angular_wavefunction(m: u32, scheme: QuantScheme, gamma: f64) -> f64 {
    match scheme {
        QuantScheme::TwoDEven => {
            if m == 0 {
                1.0 / (2.0 * PI).sqrt()
            } else {
                (3.0 * m as f64 * gamma).cos() / PI.sqrt()
            }
        }
        QuantScheme::TwoDOdd => (3.0 * m as f64 * gamma).sin() / PI.sqrt(),
        QuantScheme::FiveD => {
            let p = legendre_all(m as usize, (3.0 * gamma).cos());
            ((2.0 * m as f64 + 1.0) / 4.0).sqrt() * p[m as usize]
        }
    }
}

/// Angular functions for `m = 0..=mmax` (entries below the scheme minimum are zero).
pub fn angular_values(scheme: QuantScheme, mmax: u32, gamma: f64) -> Vec<f64> {
    match scheme {
        QuantScheme::FiveD => legendre_all(mmax as usize, (3.0 * gamma).cos())
            .into_iter()
            .enumerate()
            .map(|(mu, p)| ((2.0 * mu as f64 + 1.0) / 4.0).sqrt() * p)
            .collect(),
        _ => (0..=mmax).map(|m| angular_wavefunction(m, scheme, gamma)).collect(),
    }
}

pub fn wavefunction(state: BasisState, spec: &BasisSpec, c: ShapeCoords) -> f64 {
    radial_wavefunction(state, spec, c.beta) * angular_wavefunction(state.m_ang, spec.scheme, c.gamma)
}
