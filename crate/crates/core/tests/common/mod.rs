//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use gcm_core::basis::{enumerate_basis, oscillator_energy, BasisSpec, BasisState, QuantScheme};
use gcm_core::model::ModelParams;
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

/// Nodes and weights from the Jacobi matrix of a three-term recurrence.
fn golub_welsch(diag: Vec<f64>, off: Vec<f64>, mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss rule for the weight `t^alpha e^{-t}` on `[0, inf)`: Golub–Welsch
/// nodes polished by Newton, weights from the derivative formula.
pub fn gauss_laguerre(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let diag = (0..n).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
    let off = (1..n).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
    let (mut x, _) = golub_welsch(diag, off, 1.0);
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(&mut w) {
        for _ in 0..3 {
            let d = -laguerre(n - 1, alpha + 1.0, *xi);
            *xi -= laguerre(n, alpha, *xi) / d;
        }
        let d = laguerre(n - 1, alpha + 1.0, *xi);
        *wi = (ln_gamma(n as f64 + alpha + 1.0) - ln_gamma(n as f64 + 1.0) - xi.ln() - 2.0 * d.abs().ln()).exp();
    }
    (x, w)
}

/// Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let off = (1..n).map(|i| i as f64 / ((4 * i * i - 1) as f64).sqrt()).collect();
    let (x, w) = golub_welsch(vec![0.0; n], off, 2.0);
    let h = 0.5 * (b - a);
    (x.iter().map(|x| a + h * (x + 1.0)).collect(), w.iter().map(|w| w * h).collect())
}

/// Generalized Laguerre polynomial by the textbook recurrence.
pub fn laguerre(n: usize, alpha: f64, t: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 + alpha - t);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 1.0 + alpha - t) * l1 - (k + alpha) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Laguerre index of the radial function: `3m` (2D) or `3mu + 3/2` (5D).
pub fn alpha_of(scheme: QuantScheme, m: u32) -> f64 {
    if scheme.is_5d() {
        3.0 * m as f64 + 1.5
    } else {
        3.0 * m as f64
    }
}

/// Radial function divided by `e^{-t/2}`, as a function of `t = k beta^2`.
/// 2D: normalized with `beta d beta`; 5D: with `beta^4 d beta`.
pub fn radial_no_exp(scheme: QuantScheme, n: u32, m: u32, k: f64, t: f64) -> f64 {
    let a = alpha_of(scheme, m);
    let lnorm = 0.5 * (ln_gamma(n as f64 + 1.0) - ln_gamma(n as f64 + a + 1.0));
    let (pref, power) = if scheme.is_5d() { (2f64.sqrt() * k.powf(1.25), 1.5 * m as f64) } else { ((2.0 * k).sqrt(), a / 2.0) };
    pref * lnorm.exp() * t.powf(power) * laguerre(n as usize, a, t)
}

/// Normalized Laguerre factor `sqrt(n!/Gamma(n+alpha+1)) L_n^alpha(t)`.
fn normalized_laguerre(n: u32, alpha: f64, t: f64) -> f64 {
    (0.5 * (ln_gamma(n as f64 + 1.0) - ln_gamma(n as f64 + alpha + 1.0))).exp() * laguerre(n as usize, alpha, t)
}

/// `<n' m'| beta^p |n m>` (radial part only) by Gauss–Laguerre in `t = k beta^2`,
/// with every power of `t` moved into the weight.
pub fn radial_quadrature(scheme: QuantScheme, p: u32, bra: BasisState, ket: BasisState, k: f64) -> f64 {
    // 2D: R = sqrt(2k) t^{3m/2} e^{-t/2} L, measure beta dbeta = dt/(2k)
    // 5D: R = sqrt(2) k^{5/4} t^{3mu/2} e^{-t/2} L, measure beta^4 dbeta = t^{3/2} dt/(2 k^{5/2})
    let base = if scheme.is_5d() { 1.5 } else { 0.0 };
    let weight_alpha = 1.5 * (bra.m_ang + ket.m_ang) as f64 + base + p as f64 / 2.0;
    let (t, w) = gauss_laguerre(32, weight_alpha);
    let (ab, ak) = (alpha_of(scheme, bra.m_ang), alpha_of(scheme, ket.m_ang));
    let s: f64 = t
        .iter()
        .zip(&w)
        .map(|(t, w)| w * normalized_laguerre(bra.n_rad, ab, *t) * normalized_laguerre(ket.n_rad, ak, *t))
        .sum();
    s * k.powf(-(p as f64) / 2.0)
}

/// Angular function of the scheme.
pub fn angular(scheme: QuantScheme, m: u32, g: f64) -> f64 {
    match scheme {
        QuantScheme::TwoDEven if m == 0 => 1.0 / (2.0 * PI).sqrt(),
        QuantScheme::TwoDEven => (3.0 * m as f64 * g).cos() / PI.sqrt(),
        QuantScheme::TwoDOdd => (3.0 * m as f64 * g).sin() / PI.sqrt(),
        QuantScheme::FiveD => ((2.0 * m as f64 + 1.0) / 4.0).sqrt() * legendre(m as usize, (3.0 * g).cos()),
    }
}

/// Angular nodes/weights including the measure: plain `d gamma` in 2D,
/// `|sin 3 gamma| d gamma` in 5D (Gauss–Legendre per lobe).
pub fn angular_rule(scheme: QuantScheme) -> (Vec<f64>, Vec<f64>) {
    if scheme.is_5d() {
        let (mut g, mut w) = (vec![], vec![]);
        for lobe in 0..6 {
            let (x, v) = gauss_legendre(48, lobe as f64 * PI / 3.0, (lobe + 1) as f64 * PI / 3.0);
            for (x, v) in x.iter().zip(&v) {
                g.push(*x);
                w.push(v * (3.0 * x).sin().abs());
            }
        }
        (g, w)
    } else {
        // trapezoid rule is exact for trigonometric polynomials of low degree
        let n = 256;
        ((0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect(), vec![2.0 * PI / n as f64; n])
    }
}

/// `<m'| f(gamma) |m>` by the angular rule.
pub fn angular_quadrature(scheme: QuantScheme, m_bra: u32, m_ket: u32, f: impl Fn(f64) -> f64) -> f64 {
    let (g, w) = angular_rule(scheme);
    g.iter().zip(&w).map(|(g, w)| w * angular(scheme, m_bra, *g) * angular(scheme, m_ket, *g) * f(*g)).sum()
}

/// Hamiltonian matrix built by brute-force 2D quadrature of `<i|V - A_osc beta^2|j>`
/// over a product grid, plus the oscillator energies on the diagonal.
pub fn dense_quadrature_hamiltonian(params: &ModelParams, spec: &BasisSpec) -> DMatrix<f64> {
    let states = enumerate_basis(spec);
    let scheme = spec.scheme;
    let k = spec.k();
    let n = states.len();
    // weight t^w e^{-t}: with w = 1/2 in 5D every integrand is a polynomial in t
    let w_exp = if scheme.is_5d() { 0.5 } else { 0.0 };
    let (tn, tw) = gauss_laguerre(48, w_exp);
    let (gn, gw) = angular_rule(scheme);
    let m_top = states.iter().map(|s| s.m_ang).max().unwrap();
    let mut h = DMatrix::zeros(n, n);
    for (t, wt) in tn.iter().zip(&tw) {
        let beta = (t / k).sqrt();
        let radial: Vec<f64> = states.iter().map(|s| radial_no_exp(scheme, s.n_rad, s.m_ang, k, *t)).collect();
        // radial measure over e^{-t} t^{w_exp} dt
        let jac = if scheme.is_5d() { t.powf(1.5 - w_exp) / (2.0 * k.powf(2.5)) } else { 1.0 / (2.0 * k) };
        for (g, wg) in gn.iter().zip(&gw) {
            let ang: Vec<f64> = (0..=m_top).map(|m| angular(scheme, m, *g)).collect();
            let v = (params.a - spec.a_osc) * beta.powi(2) + params.b * beta.powi(3) * (3.0 * g).cos() + params.c * beta.powi(4);
            let weight = wt * wg * jac * v;
            let psi: Vec<f64> = states.iter().zip(&radial).map(|(s, r)| r * ang[s.m_ang as usize]).collect();
            for i in 0..n {
                let wi = weight * psi[i];
                for j in 0..=i {
                    h[(i, j)] += wi * psi[j];
                }
            }
        }
    }
    for i in 0..n {
        h[(i, i)] += oscillator_energy(states[i], spec);
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    h
}

pub fn dense_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Right-hand side of the equations of motion and one tangent vector,
/// with the Hessian written out independently.
fn flow_with_tangent(p: &ModelParams, s: &[f64; 8]) -> [f64; 8] {
    let (x, y) = (s[0], s[1]);
    let (a, b, c) = (p.a, p.b, p.c);
    let r2 = x * x + y * y;
    // V = A r^2 + B (x^3 - 3 x y^2) + C r^4
    let vx = 2.0 * a * x + 3.0 * b * (x * x - y * y) + 4.0 * c * r2 * x;
    let vy = 2.0 * a * y - 6.0 * b * x * y + 4.0 * c * r2 * y;
    let vxx = 2.0 * a + 6.0 * b * x + 4.0 * c * (3.0 * x * x + y * y);
    let vyy = 2.0 * a - 6.0 * b * x + 4.0 * c * (x * x + 3.0 * y * y);
    let vxy = -6.0 * b * y + 8.0 * c * x * y;
    [
        s[2] / p.k,
        s[3] / p.k,
        -vx,
        -vy,
        s[6] / p.k,
        s[7] / p.k,
        -(vxx * s[4] + vxy * s[5]),
        -(vxy * s[4] + vyy * s[5]),
    ]
}

fn rk4(p: &ModelParams, s: &mut [f64; 8], h: f64) {
    let add = |s: &[f64; 8], k: &[f64; 8], f: f64| {
        let mut o = *s;
        for i in 0..8 {
            o[i] += f * k[i];
        }
        o
    };
    let k1 = flow_with_tangent(p, s);
    let k2 = flow_with_tangent(p, &add(s, &k1, h / 2.0));
    let k3 = flow_with_tangent(p, &add(s, &k2, h / 2.0));
    let k4 = flow_with_tangent(p, &add(s, &k3, h));
    for i in 0..8 {
        s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Lyapunov exponents at t = 2000 split regular (< 0.007) from chaotic (> 0.04) orbits.
pub const LYAPUNOV_THRESHOLD: f64 = 0.02;

/// Benettin estimate of the maximal Lyapunov exponent with fixed-step RK4.
pub fn lyapunov(p: &ModelParams, start: [f64; 4], t_max: f64, h: f64) -> f64 {
    let mut s = [start[0], start[1], start[2], start[3], 1.0, 0.3, 0.2, -0.1];
    let steps_per_unit = (1.0 / h).round() as usize;
    let units = t_max.round() as usize;
    let mut sum = 0.0;
    for _ in 0..units {
        for _ in 0..steps_per_unit {
            rk4(p, &mut s, h);
        }
        let norm = s[4..].iter().map(|v| v * v).sum::<f64>().sqrt();
        sum += norm.ln();
        for v in &mut s[4..] {
            *v /= norm;
        }
    }
    sum / units as f64
}

/// Sorted Poisson-process levels with density proportional to `2E` on `[0, 1]`.
pub fn inhomogeneous_poisson(count: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..count).map(|_| rng.random::<f64>().sqrt()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Cumulative sums of spacings with a smooth nonlinear energy map applied.
pub fn spectrum_from_spacings(spacings: &[f64]) -> Vec<f64> {
    let mut e = 0.0;
    spacings
        .iter()
        .map(|s| {
            e += s;
            // staircase N(E) = E + E^2 / 2000 gives a smoothly varying density
            let n = e;
            -1000.0 + (1000.0f64 * 1000.0 + 2000.0 * n).sqrt()
        })
        .collect()
}
