//! Symmetric band eigensolver: Givens band-to-tridiagonal reduction, implicit
//! QL for eigenvalues and inverse iteration on the band matrix for vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::band::BandedSymmetricMatrix;
use crate::basis::{BasisSpec, QuantScheme};
use crate::error::{GcmError, Result};
use crate::hamiltonian::assemble;
use crate::model::ModelParams;

/// Reduces `m` to tridiagonal form by an orthogonal similarity.
///
/// The bandwidth is lowered one diagonal at a time; each outermost element is
/// annihilated with a rotation in an adjacent plane and the resulting bulge is
/// chased off the bottom of the matrix. Returns `(diagonal, subdiagonal)`.
pub fn tridiagonalize(m: &BandedSymmetricMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    let kd = m.half_bandwidth();
    if n == 0 {
        return (vec![], vec![]);
    }
    if kd <= 1 {
        let d = m.diagonal().to_vec();
        let e = (0..n.saturating_sub(1)).map(|i| if kd == 1 { m.get(i + 1, i) } else { 0.0 }).collect();
        return (d, e);
    }
    let mut w = RowBand::new(m);
    for b in (2..=kd).rev() {
        for j in 0..n {
            if j + b >= n {
                break;
            }
            let mut q = j + b;
            let mut col = j;
            loop {
                let p = q - 1;
                let y = w.get(q, col);
                if y == 0.0 {
                    break;
                }
                let x = w.get(p, col);
                let r = x.hypot(y);
                let (c, s) = (x / r, y / r);
                w.set(p, col, r);
                w.set(q, col, 0.0);
                w.rotate(p, col + 1, c, s, b);
                let next = q + b;
                if next >= n {
                    break;
                }
                col = p;
                q = next;
            }
        }
    }
    let d = (0..n).map(|i| w.get(i, i)).collect();
    let e = (0..n - 1).map(|i| w.get(i + 1, i)).collect();
    (d, e)
}

/// Row-major lower band with one spare diagonal for the bulge.
struct RowBand {
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl RowBand {
    fn new(m: &BandedSymmetricMatrix) -> Self {
        let n = m.dim();
        let width = m.half_bandwidth() + 1;
        let mut data = vec![0.0; n * (width + 1)];
        for r in 0..n {
            for c in r.saturating_sub(m.half_bandwidth())..=r {
                data[r * (width + 1) + c + width - r] = m.get(r, c);
            }
        }
        Self { n, width, data }
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(r >= c && r - c <= self.width);
        r * (self.width + 1) + c + self.width - r
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.idx(r, c)]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        let i = self.idx(r, c);
        self.data[i] = v;
    }

    /// Applies `G = [[c, s], [-s, c]]` to rows and columns `p, p+1`,
    /// touching columns `first_col..p` on the left and rows up to `p+1+b` below.
    fn rotate(&mut self, p: usize, first_col: usize, c: f64, s: f64, b: usize) {
        let q = p + 1;
        // left part: rows p and q over columns first_col..p
        if first_col < p {
            let len = p - first_col;
            let ip = self.idx(p, first_col);
            let iq = self.idx(q, first_col);
            let (head, tail) = self.data.split_at_mut(iq);
            let rp = &mut head[ip..ip + len];
            let rq = &mut tail[..len];
            for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                let (a, bq) = (*x, *y);
                *x = c * a + s * bq;
                *y = -s * a + c * bq;
            }
        }
        // 2x2 block
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(q, p);
        let cs = c * s;
        self.set(p, p, c * c * app + 2.0 * cs * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * cs * apq + c * c * aqq);
        self.set(q, p, (c * c - s * s) * apq + cs * (aqq - app));
        // lower part: rows q+1 ..= q+b over columns p, q
        let last = (q + b).min(self.n - 1);
        for i in q + 1..=last {
            let ip = self.idx(i, p);
            let a = self.data[ip];
            let bq = self.data[ip + 1];
            self.data[ip] = c * a + s * bq;
            self.data[ip + 1] = -s * a + c * bq;
        }
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix by implicit QL with
/// Wilkinson-type shifts. Returned in ascending order.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(GcmError::NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// All eigenvalues of a band matrix, ascending.
pub fn eigenvalues(m: &BandedSymmetricMatrix) -> Result<Vec<f64>> {
    let (d, e) = tridiagonalize(m);
    tridiagonal_eigenvalues(&d, &e)
}

/// LU factorization of `M - shift I` with partial pivoting, band layout.
struct BandLu {
    n: usize,
    kd: usize,
    /// row `i` holds columns `i - kd ..= i + 2 kd`
    rows: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn new(m: &BandedSymmetricMatrix, shift: f64, tiny: f64) -> Self {
        let n = m.dim();
        let kd = m.half_bandwidth();
        let w = 3 * kd + 1;
        let mut rows = vec![0.0; n * w];
        let at = |i: usize, c: usize| i * w + c + kd - i;
        for i in 0..n {
            let lo = i.saturating_sub(kd);
            let hi = (i + kd).min(n - 1);
            for c in lo..=hi {
                let mut v = m.get(i, c);
                if c == i {
                    v -= shift;
                }
                rows[at(i, c)] = v;
            }
        }
        let mut mult = vec![0.0; n * kd.max(1)];
        let mut piv = vec![0; n];
        for i in 0..n {
            let last = (i + kd).min(n - 1);
            let mut r = i;
            let mut best = rows[at(i, i)].abs();
            for cand in i + 1..=last {
                let v = rows[at(cand, i)].abs();
                if v > best {
                    best = v;
                    r = cand;
                }
            }
            piv[i] = r;
            let cmax = (i + 2 * kd).min(n - 1);
            if r != i {
                for c in i..=cmax {
                    rows.swap(at(i, c), at(r, c));
                }
            }
            if rows[at(i, i)] == 0.0 {
                rows[at(i, i)] = tiny;
            }
            let pivot = rows[at(i, i)];
            for rr in i + 1..=last {
                let l = rows[at(rr, i)] / pivot;
                mult[i * kd.max(1) + rr - i - 1] = l;
                rows[at(rr, i)] = 0.0;
                if l != 0.0 {
                    for c in i + 1..=cmax {
                        let v = rows[at(i, c)];
                        rows[at(rr, c)] -= l * v;
                    }
                }
            }
        }
        Self { n, kd, rows, mult, piv }
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kd) = (self.n, self.kd);
        let w = 3 * kd + 1;
        let at = |i: usize, c: usize| i * w + c + kd - i;
        for i in 0..n {
            b.swap(i, self.piv[i]);
            let bi = b[i];
            if bi != 0.0 {
                for rr in i + 1..=(i + kd).min(n - 1) {
                    b[rr] -= self.mult[i * kd.max(1) + rr - i - 1] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + 2 * kd).min(n - 1) {
                s -= self.rows[at(i, c)] * b[c];
            }
            b[i] = s / self.rows[at(i, i)];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Eigenvectors for the given (ascending) eigenvalues by inverse iteration.
///
/// Eigenvalues closer than `1e-6 |M|` are treated as a cluster and their
/// vectors are kept orthogonal by modified Gram-Schmidt.
pub fn inverse_iteration(m: &BandedSymmetricMatrix, values: &[f64], first_index: usize) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let norm = m.norm_inf().max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-6 * norm;
    let resid_tol = 1e-10 * norm;
    let tiny = f64::EPSILON * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    for (q, &lambda) in values.iter().enumerate() {
        if q > 0 && lambda - values[q - 1] > cluster_tol {
            cluster_start = q;
        }
        let lu = BandLu::new(m, lambda, tiny);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + (first_index + q) as u64);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        normalize(&mut v);
        let mut ok = false;
        for _ in 0..8 {
            lu.solve(&mut v);
            for prev in &out[cluster_start..q] {
                let dot: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= dot * p);
            }
            if normalize(&mut v) == 0.0 {
                break;
            }
            let mv = m.matvec(&v);
            let res = mv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            if res <= resid_tol {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(GcmError::NoConvergence { index: first_index + q });
        }
        out.push(v);
    }
    Ok(out)
}

/// Which eigenvectors to compute alongside the eigenvalues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorRequest {
    None,
    Range(std::ops::Range<usize>),
    All,
}

/// Eigenvectors in the oscillator basis; `vectors[q]` belongs to level `start + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigvecSet {
    pub start: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl EigvecSet {
    pub fn level(&self, index: usize) -> Option<&[f64]> {
        index.checked_sub(self.start).and_then(|q| self.vectors.get(q)).map(|v| v.as_slice())
    }
}

/// Eigenvalues (ascending) and optionally eigenvectors of `m`.
pub fn solve(m: &BandedSymmetricMatrix, request: VectorRequest) -> Result<(Vec<f64>, Option<EigvecSet>)> {
    let values = eigenvalues(m)?;
    let range = match request {
        VectorRequest::None => return Ok((values, None)),
        VectorRequest::All => 0..values.len(),
        VectorRequest::Range(r) => r.start.min(values.len())..r.end.min(values.len()),
    };
    let vectors = inverse_iteration(m, &values[range.clone()], range.start)?;
    Ok((values, Some(EigvecSet { start: range.start, vectors })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub dimension: usize,
    pub a_osc: f64,
    pub half_bandwidth: usize,
    /// Adjacent pairs closer than `1e-13` relative.
    pub near_ties: usize,
    pub solver: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub scheme: QuantScheme,
    pub params: ModelParams,
    pub levels: Vec<f64>,
    pub converged_count: usize,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    /// Wraps an externally supplied level list (sorted here); all levels count as converged.
    pub fn from_levels(scheme: QuantScheme, params: ModelParams, mut levels: Vec<f64>) -> Self {
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = levels.len();
        let near_ties = count_ties(&levels);
        Spectrum {
            scheme,
            params,
            levels,
            converged_count: n,
            meta: SpectrumMeta { dimension: n, a_osc: f64::NAN, half_bandwidth: 0, near_ties, solver: "external".into() },
        }
    }

    pub fn converged(&self) -> &[f64] {
        &self.levels[..self.converged_count.min(self.levels.len())]
    }
}

fn count_ties(levels: &[f64]) -> usize {
    levels
        .windows(2)
        .filter(|w| (w[1] - w[0]).abs() <= 1e-13 * w[1].abs().max(w[0].abs()))
        .count()
}

/// Assembles and diagonalizes; `converged_count` is left at the full dimension
/// until a certification step lowers it.
pub fn diagonalize(params: &ModelParams, spec: &BasisSpec, request: VectorRequest) -> Result<(Spectrum, Option<EigvecSet>)> {
    let m = assemble(params, spec)?;
    let (levels, vecs) = solve(&m, request)?;
    let near_ties = count_ties(&levels);
    let spectrum = Spectrum {
        scheme: spec.scheme,
        params: *params,
        converged_count: levels.len(),
        levels,
        meta: SpectrumMeta {
            dimension: spec.dimension,
            a_osc: spec.a_osc,
            half_bandwidth: m.half_bandwidth(),
            near_ties,
            solver: "givens-band-tridiagonal+ql".into(),
        },
    };
    Ok((spectrum, vecs))
}

pub const DEFAULT_TAIL_FRACTION: f64 = 0.15;
pub const DEFAULT_TAIL_MASS_TOL: f64 = 1e-8;

/// Largest prefix of levels whose weight in the top `tail_fraction` of the
/// basis stays below `tail_mass_tol`. The vector set must start at level 0.
pub fn certify_convergence(vecs: &EigvecSet, tail_fraction: f64, tail_mass_tol: f64) -> Result<usize> {
    if vecs.start != 0 {
        return Err(GcmError::InvalidParameter("tail certification needs vectors from level 0".into()));
    }
    let mut count = 0;
    for v in &vecs.vectors {
        let dim = v.len();
        let tail = ((tail_fraction * dim as f64).ceil() as usize).min(dim);
        let mass: f64 = v[dim - tail..].iter().map(|x| x * x).sum();
        if mass < tail_mass_tol {
            count += 1;
        } else {
            break;
        }
    }
    Ok(count)
}

pub const DEFAULT_GROWTH_FACTOR: f64 = 1.5;
pub const DEFAULT_DE_TOL: f64 = 1e-3;

/// Outcome of the dimension-stability check.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionCertificate {
    pub converged_count: usize,
    pub small: Vec<f64>,
    pub large: Vec<f64>,
}

/// Local mean spacing around level `q` over a window of `+-half` levels.
pub fn local_mean_spacing(levels: &[f64], q: usize, half: usize) -> f64 {
    let n = levels.len();
    if n < 2 {
        return 0.0;
    }
    let lo = q.saturating_sub(half);
    let hi = (q + half).min(n - 1);
    let (lo, hi) = if hi == lo { (lo.saturating_sub(1), (hi + 1).min(n - 1)) } else { (lo, hi) };
    (levels[hi] - levels[lo]) / (hi - lo) as f64
}

/// Compares the spectrum at `spec.dimension` with one at `growth_factor` times
/// the dimension (same `A_osc`). Level `q` is stable when the shift is below
/// `de_tol` times the local mean spacing.
pub fn certify_by_dimension(params: &ModelParams, spec: &BasisSpec, growth_factor: f64, de_tol: f64) -> Result<DimensionCertificate> {
    let small = eigenvalues(&assemble(params, spec)?)?;
    let big_dim = ((spec.dimension as f64) * growth_factor).ceil() as usize;
    let large = if big_dim == spec.dimension {
        small.clone()
    } else {
        eigenvalues(&assemble(params, &spec.with_dimension(big_dim))?)?
    };
    let converged_count = stable_prefix(&small, &large, de_tol);
    Ok(DimensionCertificate { converged_count, small, large })
}

/// Longest prefix of `small` whose levels moved by less than `de_tol` local spacings.
pub fn stable_prefix(small: &[f64], large: &[f64], de_tol: f64) -> usize {
    let mut count = 0;
    for q in 0..small.len().min(large.len()) {
        let spacing = local_mean_spacing(small, q, 10);
        let shift = (small[q] - large[q]).abs();
        if shift <= de_tol * spacing || shift <= 1e-12 * small[q].abs().max(1e-300) {
            count += 1;
        } else {
            break;
        }
    }
    count
}
