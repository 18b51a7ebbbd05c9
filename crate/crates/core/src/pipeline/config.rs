//! Run configuration: a TOML file with `[model]`, `[basis]`, `[stats]`,
//! `[classical]`, `[density]` and `[output]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::QuantScheme;
use crate::classical::ClassicalConfig;
use crate::error::{GcmError, Result};
use crate::hamiltonian::DEFAULT_C_SHIFT;
use crate::model::ModelParams;
use crate::spectral_stats::StatsConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C", default = "one")]
    pub c: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
    /// Either `hbar` or `kappa` must be given; `hbar = sqrt(kappa K)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        let hbar = match (self.hbar, self.kappa) {
            (Some(h), None) => h,
            (None, Some(kappa)) if kappa > 0.0 => (kappa * self.k).sqrt(),
            (None, Some(kappa)) => return Err(GcmError::Config(format!("kappa must be positive, got {kappa}"))),
            (Some(_), Some(_)) => return Err(GcmError::Config("give either hbar or kappa, not both".into())),
            (None, None) => return Err(GcmError::Config("[model] needs hbar or kappa".into())),
        };
        ModelParams::new(self.a, self.b, self.c, self.k, hbar).map_err(|e| GcmError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    /// Compare with a spectrum in a basis larger by `growth_factor`.
    Dimension,
    /// Tail weight of every eigenvector (computes all vectors).
    Tail,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub schemes: Vec<QuantScheme>,
    pub dimension: usize,
    /// Fixed oscillator stiffness; optimized from the basis trace when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_osc: Option<f64>,
    pub c_shift: f64,
    pub certify: Certification,
    pub growth_factor: f64,
    pub de_tol: f64,
    pub tail_fraction: f64,
    pub tail_mass_tol: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            schemes: QuantScheme::ALL.to_vec(),
            dimension: 2000,
            a_osc: None,
            c_shift: DEFAULT_C_SHIFT,
            certify: Certification::Dimension,
            growth_factor: crate::eigensolver::DEFAULT_GROWTH_FACTOR,
            de_tol: crate::eigensolver::DEFAULT_DE_TOL,
            tail_fraction: crate::eigensolver::DEFAULT_TAIL_FRACTION,
            tail_mass_tol: crate::eigensolver::DEFAULT_TAIL_MASS_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub bin_size: usize,
    pub shift: usize,
    pub unfold_degree: usize,
    pub seed: u64,
    pub error_trials: usize,
    pub bias_omegas: Vec<f64>,
    pub bias_trials: usize,
    /// Emit the spacing histogram of the bin whose centroid is nearest to this energy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_energy: Option<f64>,
    pub histogram_width: f64,
}

impl Default for StatsSection {
    fn default() -> Self {
        let s = StatsConfig::default();
        Self {
            bin_size: s.bin_size,
            shift: s.shift,
            unfold_degree: s.degree,
            seed: s.seed,
            error_trials: s.error_trials,
            bias_omegas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            bias_trials: 500,
            histogram_energy: None,
            histogram_width: 0.1,
        }
    }
}

impl StatsSection {
    pub fn stats_config(&self) -> StatsConfig {
        StatsConfig { bin_size: self.bin_size, shift: self.shift, degree: self.unfold_degree, seed: self.seed, error_trials: self.error_trials }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub t_max: f64,
    pub count: usize,
    pub seed: u64,
    pub energies: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub chaos_threshold: f64,
    pub regular_threshold: f64,
    pub step_tol: f64,
    pub drift_tol: f64,
    pub renorm_interval: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        let c = ClassicalConfig::default();
        Self {
            t_max: c.t_max,
            count: 500,
            seed: 1,
            energies: vec![-0.2, 0.0, 0.5, 1.0, 1.5, 2.0],
            b_grid: vec![0.0, 0.3, 0.6, 0.9, 1.2],
            chaos_threshold: c.chaos_threshold,
            regular_threshold: c.regular_threshold,
            step_tol: c.step_tol,
            drift_tol: c.drift_tol,
            renorm_interval: c.renorm_interval,
        }
    }
}

impl ClassicalSection {
    pub fn classical_config(&self) -> ClassicalConfig {
        ClassicalConfig {
            t_max: self.t_max,
            step_tol: self.step_tol,
            drift_tol: self.drift_tol,
            chaos_threshold: self.chaos_threshold,
            regular_threshold: self.regular_threshold,
            renorm_interval: self.renorm_interval,
            ..ClassicalConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    pub levels: Vec<usize>,
    pub grid: usize,
    /// Fractional margin added around the classically allowed region.
    pub margin: f64,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self { levels: vec![0], grid: 201, margin: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CachePolicy {
    Use,
    Refresh,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub cache_dir: PathBuf,
    pub cache: CachePolicy,
    pub threads: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("gcm-out"), cache_dir: PathBuf::from("gcm-cache"), cache: CachePolicy::Use, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub density: DensitySection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| GcmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GcmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        self.model.params()?;
        let b = &self.basis;
        if b.schemes.is_empty() {
            return Err(GcmError::Config("[basis] schemes is empty".into()));
        }
        if b.dimension == 0 {
            return Err(GcmError::Config("[basis] dimension must be positive".into()));
        }
        if !(b.c_shift > 0.0) {
            return Err(GcmError::Config("[basis] c_shift must be positive".into()));
        }
        if let Some(a) = b.a_osc {
            if !(a > 0.0) {
                return Err(GcmError::Config("[basis] a_osc must be positive".into()));
            }
        }
        if !(b.growth_factor >= 1.0) {
            return Err(GcmError::Config("[basis] growth_factor must be >= 1".into()));
        }
        let s = &self.stats;
        if s.bin_size < 2 || s.shift == 0 {
            return Err(GcmError::Config("[stats] bin_size must be >= 2 and shift > 0".into()));
        }
        if !(self.classical.t_max > 0.0) {
            return Err(GcmError::Config("[classical] t_max must be positive".into()));
        }
        if self.density.grid < 3 {
            return Err(GcmError::Config("[density] grid must be at least 3".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form with `[output]` left out, so
    /// the same inputs hash alike wherever they are written.
    pub fn hash(&self) -> String {
        let inputs = RunConfig { output: OutputSection::default(), ..self.clone() };
        sha256_hex(serde_json::to_string(&inputs).expect("config serializes").as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
