//! The experiment commands behind the `gcm` CLI.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{CachePolicy, Certification, RunConfig};
use super::io::{self, fmt_f64, sha256_file, TOOL_VERSION};
use crate::basis::{BasisSpec, QuantScheme};
use crate::classical::{freg_map, regular_fraction, RegularFractionPoint};
use crate::density::{density_grid, Axis, DensityGrid};
use crate::eigensolver::{certify_convergence, eigenvalues, solve, stable_prefix, Spectrum, SpectrumMeta, VectorRequest};
use crate::error::{GcmError, Result};
use crate::hamiltonian::{assemble, optimize_a_osc};
use crate::model::{accessible_boundary, ModelParams};
use crate::pipeline::config::sha256_hex;
use crate::spectral_stats::{
    bias_study, bin_slice, MIN_FIT_SPACINGS, nns_histogram, omega_vs_energy, omega_vs_energy_levels, unfold, BrodyCurve, ErrorModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_hit: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_slice(&io::read_file(path)?).map_err(|e| GcmError::Parse(e.to_string()))
    }

    pub fn cache_hits(&self) -> usize {
        self.stages.iter().filter(|s| s.cache_hit == Some(true)).count()
    }
}

/// One command invocation: config, output directory and the manifest being built.
pub struct Run {
    pub cfg: RunConfig,
    pub hash: String,
    pub manifest: RunManifest,
}

impl Run {
    pub fn new(cfg: RunConfig, command: &str) -> Self {
        let hash = cfg.hash();
        let manifest = RunManifest {
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            config_hash: hash.clone(),
            config: cfg.clone(),
            stages: vec![],
            outputs: vec![],
        };
        Self { cfg, hash, manifest }
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output.dir
    }

    /// Writes `bytes` to `name` in the output directory and records its hash.
    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir().join(name);
        io::write_file(&path, bytes)?;
        self.manifest.outputs.push(OutputFile { path: name.into(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(path)
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<(T, Option<bool>)>) -> Result<T> {
        let t = Instant::now();
        let (v, cache_hit) = f().map_err(|e| e.in_stage(name))?;
        self.manifest.stages.push(StageTiming { name: name.into(), seconds: t.elapsed().as_secs_f64(), cache_hit });
        Ok(v)
    }

    /// Writes `manifest-<command>.json` and returns its path.
    pub fn finish(mut self) -> Result<PathBuf> {
        let name = format!("manifest-{}.json", self.manifest.command);
        self.manifest.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| GcmError::Parse(e.to_string()))?;
        let path = self.out_dir().join(name);
        io::write_file(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Hash of everything that influences a spectrum (not the stats settings).
pub fn spectrum_cache_key(cfg: &RunConfig, scheme: QuantScheme) -> Result<String> {
    let b = &cfg.basis;
    let subset = serde_json::json!({
        "version": io::CACHE_VERSION,
        "params": cfg.model.params()?,
        "scheme": scheme,
        "dimension": b.dimension,
        "a_osc": b.a_osc,
        "c_shift": b.c_shift,
        "certify": b.certify,
        "growth_factor": b.growth_factor,
        "de_tol": b.de_tol,
        "tail_fraction": b.tail_fraction,
        "tail_mass_tol": b.tail_mass_tol,
    });
    Ok(sha256_hex(subset.to_string().as_bytes()))
}

/// Oscillator stiffness from the config, or optimized from the basis trace.
pub fn resolve_basis(cfg: &RunConfig, params: &ModelParams, scheme: QuantScheme) -> Result<BasisSpec> {
    let b = &cfg.basis;
    let a_osc = match b.a_osc {
        Some(a) => a,
        None => optimize_a_osc(params, scheme, b.dimension, b.c_shift)?.a_osc,
    };
    BasisSpec::for_params(scheme, a_osc, params, b.dimension)
}

/// Assembles, diagonalizes and certifies one scheme.
pub fn compute_spectrum(cfg: &RunConfig, scheme: QuantScheme) -> Result<Spectrum> {
    let params = cfg.model.params()?;
    let spec = resolve_basis(cfg, &params, scheme)?;
    let m = assemble(&params, &spec)?;
    let b = &cfg.basis;
    let (levels, converged_count) = match b.certify {
        Certification::None => {
            let l = eigenvalues(&m)?;
            let n = l.len();
            (l, n)
        }
        Certification::Dimension => {
            let l = eigenvalues(&m)?;
            let big = ((b.dimension as f64) * b.growth_factor).ceil() as usize;
            let large = if big == b.dimension { l.clone() } else { eigenvalues(&assemble(&params, &spec.with_dimension(big))?)? };
            let n = stable_prefix(&l, &large, b.de_tol);
            (l, n)
        }
        Certification::Tail => {
            let (l, vecs) = solve(&m, VectorRequest::All)?;
            let n = certify_convergence(&vecs.expect("vectors requested"), b.tail_fraction, b.tail_mass_tol)?;
            (l, n)
        }
    };
    let near_ties = levels.windows(2).filter(|w| (w[1] - w[0]).abs() <= 1e-13 * w[1].abs().max(w[0].abs())).count();
    Ok(Spectrum {
        scheme,
        params,
        levels,
        converged_count,
        meta: SpectrumMeta {
            dimension: spec.dimension,
            a_osc: spec.a_osc,
            half_bandwidth: m.half_bandwidth(),
            near_ties,
            solver: "givens-band-tridiagonal+ql".into(),
        },
    })
}

fn cached_spectrum(cfg: &RunConfig, scheme: QuantScheme) -> Result<(Spectrum, Option<bool>)> {
    if cfg.output.cache == CachePolicy::Off {
        return Ok((compute_spectrum(cfg, scheme)?, None));
    }
    let path = cfg.output.cache_dir.join(format!("spectrum-{}.bin", spectrum_cache_key(cfg, scheme)?));
    if cfg.output.cache == CachePolicy::Use && path.exists() {
        match io::read_file(&path).and_then(|b| io::decode_spectrum(&b)) {
            Ok(s) => return Ok((s, Some(true))),
            Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
        }
    }
    let s = compute_spectrum(cfg, scheme)?;
    io::write_file(&path, &io::encode_spectrum(&s))?;
    Ok((s, Some(false)))
}

/// Spectra of all configured schemes, written as `spectrum_<scheme>.csv`.
pub fn cmd_spectrum(run: &mut Run) -> Result<Vec<Spectrum>> {
    let mut out = vec![];
    for scheme in run.cfg.basis.schemes.clone() {
        let cfg = run.cfg.clone();
        let s = run.stage(&format!("spectrum[{scheme}]"), || cached_spectrum(&cfg, scheme))?;
        if s.converged_count < s.levels.len() / 10 {
            log::warn!("{scheme}: only {} of {} levels certified", s.converged_count, s.levels.len());
        }
        let csv = io::spectrum_csv(&s, &run.hash);
        run.emit(&format!("spectrum_{scheme}.csv"), csv.as_bytes())?;
        out.push(s);
    }
    Ok(out)
}

/// Brody curves for the configured schemes, or for an external level list.
pub fn cmd_brody(run: &mut Run, input: Option<&Path>) -> Result<Vec<BrodyCurve>> {
    let stats = run.cfg.stats.stats_config();
    let errors = run.stage("error-model", || Ok((ErrorModel::calibrate(stats.bin_size.max(MIN_FIT_SPACINGS + 1) - 1, stats.error_trials, stats.seed)?, None)))?;
    let mut named: Vec<(String, BrodyCurve, Vec<f64>)> = vec![];
    if let Some(path) = input {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GcmError::Config(format!("cannot read {}: {e}", path.display())))?;
        let levels = io::read_levels(&text)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "levels".into());
        let mut curve = run.stage(&format!("brody[{name}]"), || Ok((omega_vs_energy_levels(&levels, &stats, Some(&errors))?, None)))?;
        curve.provenance = vec![("source".into(), path.display().to_string())];
        named.push((name, curve, levels));
    } else {
        for scheme in run.cfg.basis.schemes.clone() {
            let cfg = run.cfg.clone();
            let s = run.stage(&format!("spectrum[{scheme}]"), || cached_spectrum(&cfg, scheme))?;
            let curve = run.stage(&format!("brody[{scheme}]"), || Ok((omega_vs_energy(&s, &stats, Some(&errors))?, None)))?;
            named.push((scheme.to_string(), curve, s.converged().to_vec()));
        }
    }
    for (name, curve, levels) in &named {
        run.emit(&format!("brody_{name}.csv"), io::brody_csv(curve, &run.hash).as_bytes())?;
        if let Some(e) = run.cfg.stats.histogram_energy {
            let bins = bin_slice(levels, stats.bin_size, stats.shift);
            if let Some(bin) = bins.iter().min_by(|a, b| (a.centroid - e).abs().partial_cmp(&(b.centroid - e).abs()).unwrap()) {
                let h = nns_histogram(&unfold(bin, stats.degree)?, run.cfg.stats.histogram_width)?;
                let meta = vec![("bin_start".into(), bin.start.to_string()), ("centroid_energy".into(), fmt_f64(bin.centroid))];
                run.emit(&format!("nns_{name}.csv"), io::histogram_csv(&h, &run.hash, &meta).as_bytes())?;
            }
        }
    }
    Ok(named.into_iter().map(|(_, c, _)| c).collect())
}

/// Regular fraction at the configured `B` along the energy list.
pub fn cmd_classical(run: &mut Run) -> Result<Vec<RegularFractionPoint>> {
    let params = run.cfg.model.params()?;
    let c = run.cfg.classical.clone();
    let ccfg = c.classical_config();
    let mut points = vec![];
    for (i, &e) in c.energies.iter().enumerate() {
        let p = run.stage(&format!("f_reg[E={e}]"), || Ok((regular_fraction(&params, e, c.count, &ccfg, c.seed ^ ((i as u64) << 16))?, None)))?;
        points.push(p);
    }
    let meta = vec![("count".into(), c.count.to_string()), ("t_max".into(), fmt_f64(c.t_max))];
    let csv = io::freg_csv(&points, &run.hash, &meta);
    run.emit(&format!("freg_B{}.csv", fmt_f64(params.b)), csv.as_bytes())?;
    Ok(points)
}

pub fn cmd_freg_map(run: &mut Run) -> Result<Vec<crate::classical::FregCell>> {
    let params = run.cfg.model.params()?;
    let c = run.cfg.classical.clone();
    let cells = run.stage("freg-map", || Ok((freg_map(&params, &c.b_grid, &c.energies, c.count, &c.classical_config(), c.seed)?, None)))?;
    let meta = vec![("count".into(), c.count.to_string()), ("t_max".into(), fmt_f64(c.t_max))];
    run.emit("freg_map.csv", io::freg_map_csv(&cells, &run.hash, &meta).as_bytes())?;
    Ok(cells)
}

/// Pearson correlation; NaN for fewer than 3 points or zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 3 {
        return f64::NAN;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma).powi(2);
        sbb += (b[i] - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedPoint {
    pub energy: f64,
    pub f_reg: f64,
    pub one_minus_omega: f64,
    pub brody_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub points: Vec<JoinedPoint>,
    pub pearson: f64,
    pub overlap: (f64, f64),
}

/// Joins each f_reg point with the Brody point of nearest energy inside the
/// common energy range (and `window` if given), within `tolerance`.
pub fn join_curves(freg: &[(f64, f64)], brody: &[(f64, f64)], window: Option<(f64, f64)>, tolerance: Option<f64>) -> Result<Comparison> {
    let range = |v: &[(f64, f64)]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (flo, fhi) = range(freg);
    let (blo, bhi) = range(brody);
    let (mut lo, mut hi) = (flo.max(blo), fhi.min(bhi));
    if let Some((wl, wh)) = window {
        lo = lo.max(wl);
        hi = hi.min(wh);
    }
    if !(lo <= hi) {
        return Err(GcmError::Degenerate("f_reg and Brody curves have no overlapping energies".into()));
    }
    if flo < lo || fhi > hi || blo < lo || bhi > hi {
        log::warn!("join restricted to the overlap [{lo}, {hi}]");
    }
    let tol = tolerance.unwrap_or(f64::INFINITY);
    let mut points = vec![];
    for &(e, f) in freg.iter().filter(|p| p.0 >= lo && p.0 <= hi) {
        let near = brody.iter().min_by(|a, b| (a.0 - e).abs().partial_cmp(&(b.0 - e).abs()).unwrap());
        if let Some(&(be, v)) = near {
            if (be - e).abs() <= tol {
                points.push(JoinedPoint { energy: e, f_reg: f, one_minus_omega: v, brody_energy: be });
            }
        }
    }
    if points.is_empty() {
        return Err(GcmError::Degenerate("no f_reg point has a Brody partner within tolerance".into()));
    }
    let a: Vec<f64> = points.iter().map(|p| p.f_reg).collect();
    let b: Vec<f64> = points.iter().map(|p| p.one_minus_omega).collect();
    Ok(Comparison { pearson: pearson(&a, &b), points, overlap: (lo, hi) })
}

pub fn cmd_compare(run: &mut Run, brody_path: &Path, freg_path: &Path, window: Option<(f64, f64)>, tolerance: Option<f64>) -> Result<Comparison> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| GcmError::Config(format!("cannot read {}: {e}", p.display())));
    let brody = io::read_curve(&read(brody_path)?, "centroid_energy", "one_minus_omega")?;
    let freg = io::read_curve(&read(freg_path)?, "E", "f_reg")?;
    let cmp = run.stage("compare", || Ok((join_curves(&freg, &brody, window, tolerance)?, None)))?;
    let meta = vec![
        ("brody".into(), brody_path.display().to_string()),
        ("freg".into(), freg_path.display().to_string()),
        ("overlap".into(), format!("{} {}", fmt_f64(cmp.overlap.0), fmt_f64(cmp.overlap.1))),
        ("pearson".into(), fmt_f64(cmp.pearson)),
    ];
    let mut csv = io::header(&run.hash, &meta);
    csv.push_str("E,f_reg,one_minus_omega,brody_energy\n");
    for p in &cmp.points {
        csv.push_str(&format!("{},{},{},{}\n", fmt_f64(p.energy), fmt_f64(p.f_reg), fmt_f64(p.one_minus_omega), fmt_f64(p.brody_energy)));
    }
    run.emit("compare.csv", csv.as_bytes())?;
    Ok(cmp)
}

/// Square window centred on the origin covering the allowed region at `energy` plus `margin`.
pub fn density_extent(params: &ModelParams, energy: f64, margin: f64) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..360 {
        let g = 2.0 * std::f64::consts::PI * i as f64 / 360.0;
        for iv in accessible_boundary(params, energy, g) {
            r = r.max(iv.hi);
        }
    }
    if r == 0.0 {
        r = 1.0;
    }
    r * (1.0 + margin)
}

pub fn cmd_density(run: &mut Run, levels: &[usize]) -> Result<Vec<DensityGrid>> {
    if levels.is_empty() {
        return Err(GcmError::InvalidParameter("no level indices requested".into()));
    }
    let params = run.cfg.model.params()?;
    let dcfg = run.cfg.density.clone();
    let mut grids = vec![];
    for scheme in run.cfg.basis.schemes.clone() {
        let cfg = run.cfg.clone();
        let spec = resolve_basis(&cfg, &params, scheme).map_err(|e| e.in_stage(format!("density[{scheme}]")))?;
        let top = *levels.iter().max().unwrap();
        if top >= spec.dimension {
            return Err(GcmError::InvalidParameter(format!("level index {top} outside basis of dimension {}", spec.dimension)));
        }
        let lo = *levels.iter().min().unwrap();
        let (values, vecs) = run.stage(&format!("eigenvectors[{scheme}]"), || {
            let m = assemble(&params, &spec)?;
            let (v, vecs) = solve(&m, VectorRequest::Range(lo..top + 1))?;
            Ok(((v, vecs.expect("vectors requested")), None))
        })?;
        for &q in levels {
            let energy = values[q];
            let r = density_extent(&params, energy, dcfg.margin);
            let axis = Axis::new(-r, r, dcfg.grid);
            let v = vecs.level(q).expect("vector in range");
            let grid = run.stage(&format!("density[{scheme}#{q}]"), || Ok((density_grid(v, &spec, &params, axis, axis, q, energy)?, None)))?;
            let stem = format!("density_{scheme}_{q}");
            let meta = vec![
                ("scheme".into(), scheme.to_string()),
                ("level".into(), q.to_string()),
                ("energy".into(), fmt_f64(energy)),
                ("x".into(), format!("{} {} {}", fmt_f64(axis.min), fmt_f64(axis.max), axis.count)),
                ("y".into(), format!("{} {} {}", fmt_f64(axis.min), fmt_f64(axis.max), axis.count)),
                ("riemann_sum".into(), fmt_f64(grid.riemann_sum())),
            ];
            let mut csv = io::header(&run.hash, &meta);
            for iy in 0..axis.count {
                let row: Vec<String> = (0..axis.count).map(|ix| fmt_f64(grid.at(ix, iy))).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            run.emit(&format!("{stem}.csv"), csv.as_bytes())?;
            let side = serde_json::json!({
                "config_hash": run.hash,
                "tool_version": TOOL_VERSION,
                "scheme": scheme,
                "level": q,
                "energy": energy,
                "x": axis,
                "y": axis,
                "riemann_sum": grid.riemann_sum(),
                "boundary": grid.boundary,
            });
            run.emit(&format!("{stem}.json"), serde_json::to_string_pretty(&side).unwrap().as_bytes())?;
            run.emit(&format!("{stem}.pgm"), &io::pgm(&grid.values, axis.count, axis.count))?;
            grids.push(grid);
        }
    }
    Ok(grids)
}

pub fn cmd_bias_study(run: &mut Run) -> Result<Vec<crate::spectral_stats::BiasRow>> {
    let s = run.cfg.stats.clone();
    let rows = run.stage("bias-study", || Ok((bias_study(s.bin_size, &s.bias_omegas, s.bias_trials, s.seed)?, None)))?;
    run.emit("bias_study.csv", io::bias_csv(&rows, s.bin_size, &run.hash).as_bytes())?;
    Ok(rows)
}

/// Recomputes each listed output's hash; returns the paths that differ.
pub fn verify_manifest(manifest: &RunManifest, dir: &Path) -> Result<Vec<String>> {
    let mut bad = vec![];
    for f in &manifest.outputs {
        if sha256_file(&dir.join(&f.path))? != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_nan());
    }

    #[test]
    fn join_restricts_to_overlap() {
        let freg = vec![(0.0, 0.9), (1.0, 0.5), (2.0, 0.2), (5.0, 0.1)];
        let brody = vec![(0.1, 0.8), (0.9, 0.6), (2.1, 0.3)];
        let c = join_curves(&freg, &brody, None, None).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(c.points[0].brody_energy, 0.9);
        assert!(join_curves(&freg, &[(10.0, 1.0)], None, None).is_err());
    }
}
