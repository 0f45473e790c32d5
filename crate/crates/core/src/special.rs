//! Scalar special functions shared by the bound evaluators.

use std::f64::consts::PI;

/// `u - ln(1 + u)`, accurate for small `u`.
///
/// The wideband regime subtracts two nearly equal `ln(1 + u)` terms whose
/// linear parts cancel exactly; working with this deficit keeps the
/// cancellation out of floating point.
pub fn log1p_deficit(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        // u^2/2 - u^3/3 + u^4/4 - ...; 12 terms reach ~1e-24 relative at |u| = 1e-2
        let mut power = u * u;
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 2..=13 {
            sum += sign * power / k as f64;
            power *= u;
            sign = -sign;
        }
        sum
    } else {
        u - u.ln_1p()
    }
}

/// `∫₀ᵘ ln(1 + t) dt = (1 + u) ln(1 + u) − u`, for `u > −1`.
pub fn log1p_antiderivative(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // sum over k >= 2 of (-1)^k u^k / (k(k-1))
        series(u, 2, |k| if k % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

/// `∫₀ᵘ [t − ln(1 + t)] dt`, for `u > −1`.
pub fn log1p_deficit_antiderivative(u: f64) -> f64 {
    if u.abs() < 0.1 {
        series(u, 3, |k| if k % 2 == 1 { 1.0 } else { -1.0 })
    } else {
        0.5 * u * u - log1p_antiderivative(u)
    }
}

/// `Σ_{k ≥ first} sign(k) u^k / (k(k−1))`, truncated where `0.1^(k−first)` drops below 1e-17.
fn series(u: f64, first: i32, sign: impl Fn(i32) -> f64) -> f64 {
    let mut power = u.powi(first);
    let mut sum = 0.0;
    for k in first..first + 18 {
        sum += sign(k) * power / (k * (k - 1)) as f64;
        power *= u;
    }
    sum
}

/// Natural logarithm of the modified Bessel function `I0(z)`.
pub fn ln_bessel_i0(z: f64) -> f64 {
    let z = z.abs();
    if z < 20.0 {
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= q / (k * k);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum.ln()
    } else {
        // Hankel expansion e^z / sqrt(2 pi z) * sum_k ((2k-1)!!)^2 / (k! (8z)^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (8.0 * z * k as f64);
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
        }
        z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
    }
}

/// `ln(sum(exp(x)))` without overflow. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln(mean(exp(x)))`, accurate when the values are small and nearly equal.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mean = values.iter().map(|v| (v - max).exp_m1()).sum::<f64>() / values.len() as f64;
    max + mean.ln_1p()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = ((i as f64 + 0.75) / (n + 0.5) * PI).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(order, x);
            derivative = dp;
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                let (_, dp) = legendre_with_derivative(order, x);
                derivative = dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[order - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[order - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=order {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    let dp = n * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
///
/// Returns `(argmax, max, iterations)`. Stops once the bracket is narrower
/// than `tolerance`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tolerance: f64) -> (f64, f64, usize)
where
    F: FnMut(f64) -> f64,
{
    if hi <= lo {
        return (lo, f(lo), 0);
    }
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a) > tolerance && iterations < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    // the endpoints are candidates too: the objective may be monotone
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    (best.0, best.1, iterations)
}
