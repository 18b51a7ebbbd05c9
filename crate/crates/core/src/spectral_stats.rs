//! Level binning, polynomial unfolding, nearest-neighbour spacing statistics
//! and Brody fits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::eigensolver::Spectrum;
use crate::error::{GcmError, Result};
use crate::special::gamma;

pub const DEFAULT_BIN_SIZE: usize = 1000;
pub const DEFAULT_SHIFT: usize = 100;
pub const DEFAULT_UNFOLD_DEGREE: usize = 5;
/// Largest acceptable condition number of the scaled unfolding design matrix.
pub const MAX_UNFOLD_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelBin {
    pub start: usize,
    pub energies: Vec<f64>,
    pub centroid: f64,
}

/// Overlapping windows `[k*shift, k*shift + bin_size)` over `levels`.
pub fn bin_slice(levels: &[f64], bin_size: usize, shift: usize) -> Vec<LevelBin> {
    if bin_size == 0 || shift == 0 || levels.len() < bin_size {
        log::warn!("{} levels cannot fill a bin of {bin_size}", levels.len());
        return vec![];
    }
    (0..=(levels.len() - bin_size) / shift)
        .map(|k| {
            let start = k * shift;
            let energies = levels[start..start + bin_size].to_vec();
            let centroid = energies.iter().sum::<f64>() / bin_size as f64;
            LevelBin { start, energies, centroid }
        })
        .collect()
}

/// Bins the converged prefix of a spectrum.
pub fn bin_levels(spec: &Spectrum, bin_size: usize, shift: usize) -> Vec<LevelBin> {
    bin_slice(spec.converged(), bin_size, shift)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedSpacings {
    pub spacings: Vec<f64>,
    /// Mean spacing before the final renormalization.
    pub raw_mean: f64,
    /// Non-positive spacings removed after a non-monotone fit.
    pub dropped: usize,
}

impl UnfoldedSpacings {
    /// Wraps spacings that are already unfolded, normalizing their mean to 1.
    pub fn from_spacings(mut spacings: Vec<f64>) -> Self {
        let n = spacings.len();
        spacings.retain(|&s| s > 0.0);
        let dropped = n - spacings.len();
        let raw_mean = spacings.iter().sum::<f64>() / spacings.len().max(1) as f64;
        if raw_mean > 0.0 {
            spacings.iter_mut().for_each(|s| *s /= raw_mean);
        }
        Self { spacings, raw_mean, dropped }
    }
}

/// Least-squares polynomial fit `y ~ sum c_j t^j` with `t` the energy mapped to `[-1, 1]`.
struct SmoothCount {
    center: f64,
    half_width: f64,
    coeffs: Vec<f64>,
}

impl SmoothCount {
    fn fit(energies: &[f64], degree: usize) -> Result<Self> {
        let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let half_width = 0.5 * (hi - lo);
        if !(half_width > 0.0) {
            return Err(GcmError::Degenerate("all levels in the bin coincide".into()));
        }
        let center = 0.5 * (hi + lo);
        let n = energies.len();
        let a = DMatrix::from_fn(n, degree + 1, |i, j| ((energies[i] - center) / half_width).powi(j as i32));
        let y = DVector::from_fn(n, |i, _| i as f64 + 0.5);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if condition > MAX_UNFOLD_CONDITION {
            return Err(GcmError::IllConditioned { condition });
        }
        let c = svd.solve(&y, 0.0).map_err(|e| GcmError::Degenerate(e.to_string()))?;
        Ok(Self { center, half_width, coeffs: c.iter().copied().collect() })
    }

    fn eval(&self, e: f64) -> f64 {
        let t = (e - self.center) / self.half_width;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Maps levels through a smooth fit of the staircase and returns the spacings
/// with mean renormalized to exactly 1.
pub fn unfold(bin: &LevelBin, degree: usize) -> Result<UnfoldedSpacings> {
    unfold_levels(&bin.energies, degree)
}

pub fn unfold_levels(energies: &[f64], degree: usize) -> Result<UnfoldedSpacings> {
    if energies.len() < degree + 2 {
        return Err(GcmError::NotEnoughData { needed: degree + 2, got: energies.len() });
    }
    let fit = SmoothCount::fit(energies, degree)?;
    let mapped: Vec<f64> = energies.iter().map(|&e| fit.eval(e)).collect();
    let raw: Vec<f64> = mapped.windows(2).map(|w| w[1] - w[0]).collect();
    let mut u = UnfoldedSpacings::from_spacings(raw);
    if u.spacings.is_empty() {
        return Err(GcmError::Degenerate("no positive unfolded spacings".into()));
    }
    // from_spacings already divided by the mean; make it exact to the last ulp
    let mean = u.spacings.iter().sum::<f64>() / u.spacings.len() as f64;
    u.spacings.iter_mut().for_each(|s| *s /= mean);
    Ok(u)
}

/// Normalization constant `Gamma((w+2)/(w+1))^(w+1)`.
pub fn brody_alpha(omega: f64) -> f64 {
    gamma((omega + 2.0) / (omega + 1.0)).powf(omega + 1.0)
}

pub fn brody_pdf(s: f64, omega: f64) -> f64 {
    let a = brody_alpha(omega);
    if s == 0.0 {
        return match omega {
            w if w == 0.0 => 1.0,
            w if w > 0.0 => 0.0,
            _ => f64::INFINITY,
        };
    }
    (omega + 1.0) * a * s.powf(omega) * (-a * s.powf(omega + 1.0)).exp()
}

pub fn brody_cdf(s: f64, omega: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    -(-brody_alpha(omega) * s.powf(omega + 1.0)).exp_m1()
}

/// Inverse-CDF sampler, deterministic under `seed`.
pub fn brody_sample(omega: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = brody_alpha(omega);
    let p = 1.0 / (omega + 1.0);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            (-(-u).ln_1p() / a).powf(p)
        })
        .collect()
}

pub const MIN_FIT_SPACINGS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrodyFit {
    pub omega: f64,
    pub alpha_omega: f64,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the linearized fit.
    pub residual: f64,
    pub n_points: usize,
    /// `|intercept - ln alpha(omega)|`
    pub intercept_gap: f64,
    pub syst_err: Option<f64>,
    pub stat_err: Option<f64>,
}

impl BrodyFit {
    pub fn in_range(&self) -> bool {
        (0.0..=1.0).contains(&self.omega)
    }
}

/// Linear fit of `ln(-ln(1 - I))` against `ln s` with plotting positions `i/(N+1)`.
pub fn fit_brody(u: &UnfoldedSpacings) -> Result<BrodyFit> {
    fit_brody_spacings(&u.spacings)
}

pub fn fit_brody_spacings(spacings: &[f64]) -> Result<BrodyFit> {
    let n = spacings.len();
    if n < MIN_FIT_SPACINGS {
        return Err(GcmError::NotEnoughData { needed: MIN_FIT_SPACINGS, got: n });
    }
    let mut s = spacings.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cut = 1.0 - 1.0 / (2.0 * n as f64);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for (i, &si) in s.iter().enumerate() {
        let ihat = (i + 1) as f64 / (n + 1) as f64;
        if si <= 0.0 || ihat >= cut {
            continue;
        }
        xs.push(si.ln());
        ys.push((-(-ihat).ln_1p()).ln());
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 1e-24 * m) {
        return Err(GcmError::Degenerate("all spacings equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    let omega = slope - 1.0;
    let alpha_omega = if omega > -1.0 { brody_alpha(omega) } else { f64::NAN };
    Ok(BrodyFit {
        omega,
        alpha_omega,
        slope,
        intercept,
        residual,
        n_points: xs.len(),
        intercept_gap: (intercept - alpha_omega.ln()).abs(),
        syst_err: None,
        stat_err: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub omega_true: f64,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl BiasRow {
    pub fn bias(&self) -> f64 {
        self.mean - self.omega_true
    }
}

fn trial_seed(seed: u64, k: usize, trial: usize) -> u64 {
    seed ^ ((k as u64) << 40) ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Monte-Carlo spread and bias of `fit_brody` on `bin_size` Brody samples.
pub fn bias_study(bin_size: usize, omegas: &[f64], trials: usize, seed: u64) -> Result<Vec<BiasRow>> {
    omegas
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let fits: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| fit_brody_spacings(&brody_sample(w, bin_size, trial_seed(seed, k, t))).map(|f| f.omega))
                .collect::<Result<_>>()?;
            let n = fits.len() as f64;
            let mean = fits.iter().sum::<f64>() / n;
            let var = fits.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Ok(BiasRow { omega_true: w, mean, std: var.sqrt(), trials })
        })
        .collect()
}

/// Bias-study table used to attach errors; linear interpolation in `omega_true`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    rows: Vec<BiasRow>,
}

impl ErrorModel {
    pub fn new(rows: Vec<BiasRow>) -> Self {
        Self { rows }
    }

    pub fn calibrate(bin_size: usize, trials: usize, seed: u64) -> Result<Self> {
        Ok(Self::new(bias_study(bin_size, &[0.0, 0.25, 0.5, 0.75, 1.0], trials, seed)?))
    }

    fn interp(&self, omega: f64, f: impl Fn(&BiasRow) -> f64) -> f64 {
        let r = &self.rows;
        if r.is_empty() || !omega.is_finite() {
            return f64::NAN;
        }
        if omega <= r[0].omega_true {
            return f(&r[0]);
        }
        for w in r.windows(2) {
            if omega <= w[1].omega_true {
                let t = (omega - w[0].omega_true) / (w[1].omega_true - w[0].omega_true);
                return f(&w[0]) * (1.0 - t) + f(&w[1]) * t;
            }
        }
        f(r.last().unwrap())
    }

    pub fn stat(&self, omega: f64) -> f64 {
        self.interp(omega, |r| r.std)
    }

    pub fn syst(&self, omega: f64) -> f64 {
        self.interp(omega, |r| r.bias())
    }
}

/// Flags attached to a Brody-curve point; serialized as `|`-joined names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PointFlags {
    pub degenerate: bool,
    pub out_of_range: bool,
    pub non_brody: bool,
    pub dropped_spacings: bool,
}

impl PointFlags {
    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

impl std::fmt::Display for PointFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names = vec![];
        if self.degenerate {
            names.push("degenerate");
        }
        if self.out_of_range {
            names.push("out_of_range");
        }
        if self.non_brody {
            names.push("non_brody");
        }
        if self.dropped_spacings {
            names.push("dropped_spacings");
        }
        if names.is_empty() {
            write!(f, "ok")
        } else {
            write!(f, "{}", names.join("|"))
        }
    }
}

/// Residual and intercept-gap limits beyond which a bin is flagged non-Brody.
pub const NON_BRODY_RESIDUAL: f64 = 0.15;
pub const NON_BRODY_INTERCEPT_GAP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrodyPoint {
    pub centroid_energy: f64,
    pub omega: f64,
    pub stat_err: f64,
    pub bin_start: usize,
    pub bin_size: usize,
    pub flags: PointFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BrodyCurve {
    pub points: Vec<BrodyPoint>,
    /// Free-form provenance such as scheme and parameters.
    pub provenance: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub bin_size: usize,
    pub shift: usize,
    pub degree: usize,
    pub seed: u64,
    pub error_trials: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { bin_size: DEFAULT_BIN_SIZE, shift: DEFAULT_SHIFT, degree: DEFAULT_UNFOLD_DEGREE, seed: 1, error_trials: 200 }
    }
}

/// Per-bin Brody parameter along a sorted level list.
pub fn omega_vs_energy_levels(levels: &[f64], cfg: &StatsConfig, errors: Option<&ErrorModel>) -> Result<BrodyCurve> {
    let bins = bin_slice(levels, cfg.bin_size, cfg.shift);
    let owned;
    let errors = match errors {
        Some(e) => e,
        None => {
            owned = ErrorModel::calibrate(cfg.bin_size.max(MIN_FIT_SPACINGS + 1) - 1, cfg.error_trials, cfg.seed)?;
            &owned
        }
    };
    let points = bins
        .par_iter()
        .map(|bin| {
            let mut flags = PointFlags::default();
            let fit = unfold(bin, cfg.degree).and_then(|u| {
                flags.dropped_spacings = u.dropped > 0;
                fit_brody(&u)
            });
            let (omega, stat_err) = match fit {
                Ok(f) => {
                    flags.out_of_range = !f.in_range();
                    flags.non_brody = f.residual > NON_BRODY_RESIDUAL || f.intercept_gap > NON_BRODY_INTERCEPT_GAP;
                    (f.omega, errors.stat(f.omega))
                }
                Err(GcmError::Degenerate(_)) => {
                    flags.degenerate = true;
                    (f64::NAN, f64::NAN)
                }
                Err(e) => return Err(e),
            };
            Ok(BrodyPoint { centroid_energy: bin.centroid, omega, stat_err, bin_start: bin.start, bin_size: bin.energies.len(), flags })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BrodyCurve { points, provenance: vec![] })
}

pub fn omega_vs_energy(spec: &Spectrum, cfg: &StatsConfig, errors: Option<&ErrorModel>) -> Result<BrodyCurve> {
    let mut curve = omega_vs_energy_levels(spec.converged(), cfg, errors)?;
    curve.provenance = vec![
        ("scheme".into(), spec.scheme.to_string()),
        ("A".into(), spec.params.a.to_string()),
        ("B".into(), spec.params.b.to_string()),
        ("C".into(), spec.params.c.to_string()),
        ("kappa".into(), spec.params.kappa().to_string()),
    ];
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub bin_width: f64,
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub poisson: Vec<f64>,
    pub wigner: Vec<f64>,
    pub brody: Vec<f64>,
    pub omega: f64,
}

/// Normalized spacing histogram with Poisson, Wigner and fitted Brody curves.
pub fn nns_histogram(u: &UnfoldedSpacings, bin_width: f64) -> Result<SpacingHistogram> {
    if !(bin_width > 0.0) {
        return Err(GcmError::InvalidParameter("bin width must be positive".into()));
    }
    let n = u.spacings.len();
    let max = u.spacings.iter().cloned().fold(0.0, f64::max);
    let nb = ((max / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; nb];
    for &s in &u.spacings {
        counts[((s / bin_width) as usize).min(nb - 1)] += 1;
    }
    let omega = fit_brody(u).map(|f| f.omega).unwrap_or(f64::NAN);
    let centers: Vec<f64> = (0..nb).map(|k| (k as f64 + 0.5) * bin_width).collect();
    Ok(SpacingHistogram {
        bin_width,
        density: counts.iter().map(|&c| c as f64 / (n.max(1) as f64 * bin_width)).collect(),
        poisson: centers.iter().map(|&s| brody_pdf(s, 0.0)).collect(),
        wigner: centers.iter().map(|&s| brody_pdf(s, 1.0)).collect(),
        brody: centers.iter().map(|&s| if omega > -1.0 { brody_pdf(s, omega) } else { f64::NAN }).collect(),
        centers,
        omega,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseExponent {
    pub alpha: f64,
    /// Standard error of the fitted slope.
    pub alpha_err: f64,
    pub n_frequencies: usize,
}

pub const MIN_NOISE_SPACINGS: usize = 256;

/// Power-law exponent of the `delta_q` fluctuation series.
///
/// The slope of log power against log frequency is fitted over the lowest
/// half of the positive frequencies (zero mode excluded).
pub fn one_over_f_alpha(u: &UnfoldedSpacings) -> Result<NoiseExponent> {
    let n = u.spacings.len();
    if n < MIN_NOISE_SPACINGS {
        return Err(GcmError::NotEnoughData { needed: MIN_NOISE_SPACINGS, got: n });
    }
    let mut acc = 0.0;
    let mut buf: Vec<Complex<f64>> = u
        .spacings
        .iter()
        .map(|s| {
            acc += s - 1.0;
            Complex::new(acc, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let kmax = (n / 4).max(2);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        (1..=kmax).map(|k| ((k as f64 / n as f64).ln(), (buf[k].norm_sqr() / n as f64).ln())).unzip();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let err = (rss / (m - 2.0) / sxx).sqrt();
    Ok(NoiseExponent { alpha: -slope, alpha_err: err, n_frequencies: xs.len() })
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
