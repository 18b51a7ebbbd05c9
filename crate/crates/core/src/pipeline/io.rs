//! CSV tables with `#` metadata headers, level-list readers and the binary
//! spectrum / matrix caches.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::band::BandedSymmetricMatrix;
use crate::basis::QuantScheme;
use crate::classical::{FregCell, RegularFractionPoint};
use crate::eigensolver::{Spectrum, SpectrumMeta};
use crate::error::{GcmError, Result};
use crate::model::ModelParams;
use crate::spectral_stats::{BiasRow, BrodyCurve, SpacingHistogram};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `#`-prefixed header lines: tool version, config hash, then extra pairs.
pub fn header(config_hash: &str, extra: &[(String, String)]) -> String {
    let mut h = format!("# tool = gcm {TOOL_VERSION}\n# config_hash = {config_hash}\n");
    for (k, v) in extra {
        let _ = writeln!(h, "# {k} = {v}");
    }
    h
}

/// Shortest round-trip representation, `nan` for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

pub fn spectrum_csv(spec: &Spectrum, config_hash: &str) -> String {
    let mut out = header(config_hash, &spectrum_meta_pairs(spec));
    out.push_str("index,energy,converged\n");
    for (i, e) in spec.levels.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{}", fmt_f64(*e), u8::from(i < spec.converged_count));
    }
    out
}

fn spectrum_meta_pairs(spec: &Spectrum) -> Vec<(String, String)> {
    vec![
        ("scheme".into(), spec.scheme.to_string()),
        ("A".into(), fmt_f64(spec.params.a)),
        ("B".into(), fmt_f64(spec.params.b)),
        ("C".into(), fmt_f64(spec.params.c)),
        ("K".into(), fmt_f64(spec.params.k)),
        ("hbar".into(), fmt_f64(spec.params.hbar)),
        ("kappa".into(), fmt_f64(spec.params.kappa())),
        ("dimension".into(), spec.meta.dimension.to_string()),
        ("a_osc".into(), fmt_f64(spec.meta.a_osc)),
        ("half_bandwidth".into(), spec.meta.half_bandwidth.to_string()),
        ("converged_count".into(), spec.converged_count.to_string()),
        ("near_ties".into(), spec.meta.near_ties.to_string()),
    ]
}

pub fn brody_csv(curve: &BrodyCurve, config_hash: &str) -> String {
    let mut out = header(config_hash, &curve.provenance);
    out.push_str("centroid_energy,omega,stat_err,bin_start,bin_size,flags,one_minus_omega\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.centroid_energy),
            fmt_f64(p.omega),
            fmt_f64(p.stat_err),
            p.bin_start,
            p.bin_size,
            p.flags,
            fmt_f64(1.0 - p.omega)
        );
    }
    out
}

pub const FREG_COLUMNS: &str = "B,E,f_reg,sigma,n_regular,n_chaotic,n_undecided";

fn freg_row(p: &RegularFractionPoint) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        fmt_f64(p.b),
        fmt_f64(p.energy),
        fmt_f64(p.f_reg),
        fmt_f64(p.sigma),
        p.n_regular,
        p.n_chaotic,
        p.n_undecided
    )
}

pub fn freg_csv(points: &[RegularFractionPoint], config_hash: &str, extra: &[(String, String)]) -> String {
    let mut out = header(config_hash, extra);
    out.push_str(FREG_COLUMNS);
    out.push('\n');
    for p in points {
        out.push_str(&freg_row(p));
        out.push('\n');
    }
    out
}

/// Failed cells are written as NaN rows and listed in the header.
pub fn freg_map_csv(cells: &[FregCell], config_hash: &str, extra: &[(String, String)]) -> String {
    let mut meta = extra.to_vec();
    for c in cells {
        if let Some(e) = &c.error {
            meta.push((format!("error B={} E={}", fmt_f64(c.b), fmt_f64(c.energy)), e.clone()));
        }
    }
    let mut out = header(config_hash, &meta);
    out.push_str(FREG_COLUMNS);
    out.push('\n');
    for c in cells {
        match &c.point {
            Some(p) => out.push_str(&freg_row(p)),
            None => out.push_str(&format!("{},{},nan,nan,0,0,0", fmt_f64(c.b), fmt_f64(c.energy))),
        }
        out.push('\n');
    }
    out
}

pub fn bias_csv(rows: &[BiasRow], bin_size: usize, config_hash: &str) -> String {
    let mut out = header(config_hash, &[("bin_size".into(), bin_size.to_string())]);
    out.push_str("omega_true,mean,std,bias,trials\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", fmt_f64(r.omega_true), fmt_f64(r.mean), fmt_f64(r.std), fmt_f64(r.bias()), r.trials);
    }
    out
}

pub fn histogram_csv(h: &SpacingHistogram, config_hash: &str, extra: &[(String, String)]) -> String {
    let mut meta = extra.to_vec();
    meta.push(("omega".into(), fmt_f64(h.omega)));
    let mut out = header(config_hash, &meta);
    out.push_str("s,density,poisson,wigner,brody\n");
    for i in 0..h.centers.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(h.centers[i]),
            fmt_f64(h.density[i]),
            fmt_f64(h.poisson[i]),
            fmt_f64(h.wigner[i]),
            fmt_f64(h.brody[i])
        );
    }
    out
}

/// Parsed CSV: header names and rows of raw fields; `#` lines skipped.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| GcmError::Parse("empty table".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != columns.len() {
                return Err(GcmError::Parse(format!("row {} has {} fields, expected {}", i + 1, r.len(), columns.len())));
            }
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| GcmError::Parse(format!("missing column '{name}'")))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column(name)?;
        self.rows.iter().map(|r| parse_f64(&r[j])).collect()
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| GcmError::Parse(format!("not a number: '{s}'")))
}

/// Reads either a spectrum CSV (`energy` column, optional `converged`) or a
/// plain list with one energy per line. Returns the sorted levels.
pub fn read_levels(text: &str) -> Result<Vec<f64>> {
    let body: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
    let mut levels = if body.first().is_some_and(|l| l.contains(',')) {
        let t = Table::parse(text)?;
        let e = t.f64_column("energy")?;
        match t.column("converged") {
            Ok(j) => e.into_iter().zip(&t.rows).filter(|(_, r)| r[j] != "0").map(|(e, _)| e).collect(),
            Err(_) => e,
        }
    } else {
        body.iter().map(|l| parse_f64(l)).collect::<Result<Vec<_>>>()?
    };
    if levels.iter().any(|e| !e.is_finite()) {
        return Err(GcmError::Parse("non-finite energy in level list".into()));
    }
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(levels)
}

/// `(energy, value)` pairs from a Brody CSV (`one_minus_omega`) or f_reg CSV (`f_reg`).
pub fn read_curve(text: &str, energy_col: &str, value_col: &str) -> Result<Vec<(f64, f64)>> {
    let t = Table::parse(text)?;
    let e = t.f64_column(energy_col)?;
    let v = t.f64_column(value_col)?;
    Ok(e.into_iter().zip(v).filter(|(e, v)| e.is_finite() && v.is_finite()).collect())
}

const SPECTRUM_MAGIC: &[u8; 8] = b"GCMSPEC\0";
const MATRIX_MAGIC: &[u8; 8] = b"GCMBAND\0";
pub const CACHE_VERSION: u32 = 1;

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_params(buf: &mut Vec<u8>, p: &ModelParams) {
    for v in [p.a, p.b, p.c, p.k, p.hbar] {
        put_f64(buf, v);
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(GcmError::Cache("truncated payload".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn params(&mut self) -> Result<ModelParams> {
        let v = [self.f64()?, self.f64()?, self.f64()?, self.f64()?, self.f64()?];
        ModelParams::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| GcmError::Cache(e.to_string()))
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(GcmError::Cache("bad magic".into()));
        }
        let v = self.u32()?;
        if v != CACHE_VERSION {
            return Err(GcmError::Cache(format!("unsupported cache version {v}")));
        }
        Ok(())
    }

    fn scheme(&mut self) -> Result<QuantScheme> {
        let c = self.u8()?;
        QuantScheme::from_code(c).ok_or_else(|| GcmError::Cache(format!("unknown scheme code {c}")))
    }
}

/// Layout: magic, version u32, scheme u8, dimension u64, half-bandwidth u64,
/// level count u64, converged u64, near ties u64, params 5 x f64, a_osc f64,
/// then the levels as little-endian f64.
pub fn encode_spectrum(spec: &Spectrum) -> Vec<u8> {
    let mut b = Vec::with_capacity(96 + 8 * spec.levels.len());
    b.extend_from_slice(SPECTRUM_MAGIC);
    b.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    b.push(spec.scheme.code());
    put_u64(&mut b, spec.meta.dimension as u64);
    put_u64(&mut b, spec.meta.half_bandwidth as u64);
    put_u64(&mut b, spec.levels.len() as u64);
    put_u64(&mut b, spec.converged_count as u64);
    put_u64(&mut b, spec.meta.near_ties as u64);
    put_params(&mut b, &spec.params);
    put_f64(&mut b, spec.meta.a_osc);
    for &e in &spec.levels {
        put_f64(&mut b, e);
    }
    b
}

pub fn decode_spectrum(data: &[u8]) -> Result<Spectrum> {
    let mut r = Reader { data, pos: 0 };
    r.header(SPECTRUM_MAGIC)?;
    let scheme = r.scheme()?;
    let dimension = r.u64()? as usize;
    let half_bandwidth = r.u64()? as usize;
    let n = r.u64()? as usize;
    let converged_count = r.u64()? as usize;
    let near_ties = r.u64()? as usize;
    let params = r.params()?;
    let a_osc = r.f64()?;
    if data.len() != r.pos + 8 * n {
        return Err(GcmError::Cache(format!("payload holds {} bytes, header promises {n} levels", data.len() - r.pos)));
    }
    let levels = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if converged_count > n {
        return Err(GcmError::Cache("converged count exceeds level count".into()));
    }
    Ok(Spectrum {
        scheme,
        params,
        levels,
        converged_count,
        meta: SpectrumMeta { dimension, a_osc, half_bandwidth, near_ties, solver: "cache".into() },
    })
}

/// Same header discipline as the spectrum cache, followed by the
/// diagonal-major band payload.
pub fn encode_matrix(m: &BandedSymmetricMatrix, scheme: QuantScheme, params: &ModelParams, a_osc: f64) -> Vec<u8> {
    let mut b = Vec::with_capacity(80 + 8 * m.raw().len());
    b.extend_from_slice(MATRIX_MAGIC);
    b.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    b.push(scheme.code());
    put_u64(&mut b, m.dim() as u64);
    put_u64(&mut b, m.half_bandwidth() as u64);
    put_params(&mut b, params);
    put_f64(&mut b, a_osc);
    for &v in m.raw() {
        put_f64(&mut b, v);
    }
    b
}

pub fn decode_matrix(data: &[u8]) -> Result<(BandedSymmetricMatrix, QuantScheme, ModelParams, f64)> {
    let mut r = Reader { data, pos: 0 };
    r.header(MATRIX_MAGIC)?;
    let scheme = r.scheme()?;
    let dim = r.u64()? as usize;
    let kd = r.u64()? as usize;
    let params = r.params()?;
    let a_osc = r.f64()?;
    let n = (kd + 1) * dim;
    if data.len() != r.pos + 8 * n {
        return Err(GcmError::Cache("matrix payload length does not match header".into()));
    }
    let raw = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let m = BandedSymmetricMatrix::from_raw(dim, kd, raw).map_err(|e| GcmError::Cache(e.to_string()))?;
    Ok((m, scheme, params, a_osc))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = vec![];
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(super::config::sha256_hex(&read_file(path)?))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Binary PGM (P5), scaled to the peak value.
pub fn pgm(values: &[f64], width: usize, height: usize) -> Vec<u8> {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    // row 0 of the image is the top (largest y)
    for iy in (0..height).rev() {
        for ix in 0..width {
            let v = values[iy * width + ix];
            let g = if peak > 0.0 { (255.0 * v / peak).round().clamp(0.0, 255.0) as u8 } else { 0 };
            out.push(g);
        }
    }
    out
}
