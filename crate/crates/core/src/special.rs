//! Orthogonal polynomials and the normalized Laguerre functions used by the
//! oscillator bases.

use statrs::function::gamma::ln_gamma;

/// Generalized Laguerre polynomial `L_n^alpha(x)` by upward recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomial `P_l(x)` by Bonnet's recurrence.
pub fn legendre(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Legendre polynomials `P_0(x) ..= P_lmax(x)`.
pub fn legendre_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(lmax + 1);
    out.push(1.0);
    if lmax >= 1 {
        out.push(x);
    }
    for k in 1..lmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

// Rescale threshold for the normalized recurrence.
const BIG: f64 = 1e150;

/// Normalized Laguerre functions
///
/// `f_n(t) = sqrt(n! / Gamma(n + alpha + 1)) * t^power * exp(-t/2) * L_n^alpha(t)`
///
/// for `n = 0..=nmax`. The recurrence runs on the normalized polynomials and
/// carries the prefactor as a separate logarithm, so the result neither
/// overflows for large `n` nor underflows prematurely for large `t`.
pub fn laguerre_functions(nmax: usize, alpha: f64, power: f64, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if t == 0.0 {
        if power == 0.0 {
            // L_n^alpha(0) = Gamma(n+alpha+1) / (n! Gamma(alpha+1))
            for (n, v) in out.iter_mut().enumerate() {
                let ln_fact = ln_gamma(n as f64 + 1.0);
                let ln_g = ln_gamma(n as f64 + alpha + 1.0);
                *v = (0.5 * (ln_g - ln_fact) - ln_gamma(alpha + 1.0)).exp();
            }
        }
        return out;
    }
    let mut log_scale = power * t.ln() - 0.5 * t - 0.5 * ln_gamma(alpha + 1.0);
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for k in 0..nmax {
        let kf = k as f64;
        let a = ((kf + 1.0) * (kf + 1.0 + alpha)).sqrt();
        let b = (kf * (kf + alpha)).sqrt();
        let next = ((2.0 * kf + 1.0 + alpha - t) * cur - b * prev) / a;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            log_scale += BIG.ln();
        }
        out[k + 1] = scaled(cur, log_scale);
    }
    out
}

fn scaled(value: f64, log_scale: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value.signum() * (value.abs().ln() + log_scale).exp()
    }
}

/// Single normalized Laguerre function, see [`laguerre_functions`].
pub fn laguerre_function(n: usize, alpha: f64, power: f64, t: f64) -> f64 {
    laguerre_functions(n, alpha, power, t)[n]
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn binomial(n: f64, k: usize) -> f64 {
        // generalized binomial (n choose k) for real n
        let mut r = 1.0;
        for i in 0..k {
            r *= (n - i as f64) / (i as f64 + 1.0);
        }
        r
    }

    /// Explicit sum and the magnitude of its largest term.
    fn laguerre_direct(n: usize, alpha: f64, x: f64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut big: f64 = 1.0;
        let mut fact = 1.0;
        for i in 0..=n {
            if i > 0 {
                fact *= i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let term = binomial(n as f64 + alpha, n - i) * x.powi(i as i32) / fact;
            big = big.max(term.abs());
            sum += sign * term;
        }
        (sum, big)
    }

    #[test]
    fn recurrence_matches_direct_sum() {
        for n in 0..=15 {
            for &alpha in &[0.0, 1.5, 3.0, 4.5, 9.0] {
                for &x in &[0.0, 0.3, 2.0, 7.5, 20.0, 50.0] {
                    let r = laguerre(n, alpha, x);
                    let (d, scale) = laguerre_direct(n, alpha, x);
                    assert!((r - d).abs() / scale < 1e-10, "n={n} a={alpha} x={x}: {r} vs {d}");
                }
            }
        }
    }

    #[test]
    fn legendre_low_orders() {
        let x = 0.37;
        assert_relative_eq!(legendre(2, x), 0.5 * (3.0 * x * x - 1.0), epsilon = 1e-15);
        assert_relative_eq!(legendre(3, x), 0.5 * (5.0 * x.powi(3) - 3.0 * x), epsilon = 1e-15);
        let all = legendre_all(6, x);
        for (l, v) in all.iter().enumerate() {
            assert_relative_eq!(*v, legendre(l, x), epsilon = 1e-15);
        }
    }

    #[test]
    fn normalized_functions_match_plain_evaluation() {
        for &alpha in &[0.0, 3.0, 4.5] {
            for &t in &[0.01, 1.0, 5.0, 30.0] {
                let f = laguerre_functions(12, alpha, alpha / 2.0, t);
                for (n, v) in f.iter().enumerate() {
                    let norm = (ln_gamma(n as f64 + 1.0) - ln_gamma(n as f64 + alpha + 1.0)).exp().sqrt();
                    let plain = norm * t.powf(alpha / 2.0) * (-t / 2.0).exp() * laguerre(n, alpha, t);
                    assert!((v - plain).abs() <= 1e-11 * plain.abs().max(1e-3), "{n} {alpha} {t}");
                }
            }
        }
    }

    #[test]
    fn large_argument_does_not_overflow() {
        let f = laguerre_functions(800, 3.0, 1.5, 1500.0);
        assert!(f.iter().all(|v| v.is_finite()));
        assert!(f[800].abs() < 10.0);
    }

    #[test]
    fn value_at_origin() {
        let f = laguerre_functions(4, 0.0, 0.0, 0.0);
        for v in f {
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
        let g = laguerre_functions(4, 3.0, 1.5, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
