//! Upper bound on the noncoherent capacity under a peak constraint.
//!
//! For each receive eigenmode `r` the bound trades the AWGN-like term
//! `(B/TF)·ln(1 + α σ_r P TF/B)` against the channel-uncertainty penalty
//! `α ψ_r`, maximized over the transmit energy allocation `α ∈ [0, λ_max]`.
//!
//! In the wideband regime both terms are close to `α σ_r P` and their
//! difference is many orders of magnitude smaller than either. Rates are
//! therefore assembled from the deficits `u − ln(1+u)` rather than from the
//! two logarithms directly.

use serde::Serialize;

use crate::channel_model::{GridParams, ScatteringFunction};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::spatial::SpatialSpectrum;
use crate::special::log1p_deficit;

/// Receive power normalized by the noise spectral density, and the PAPR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkBudget {
    power: f64,
    papr: f64,
}

impl LinkBudget {
    /// `power` in 1/s, `papr` (β) dimensionless.
    pub fn new(power: f64, papr: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!("P must be positive, got {power}")));
        }
        if !(papr >= 1.0) || !papr.is_finite() {
            return Err(Error::InvalidParameter(format!("PAPR must be >= 1, got {papr}")));
        }
        Ok(Self { power, papr })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn papr(&self) -> f64 {
        self.papr
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(power, self.papr)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Bisection or golden-section steps.
    pub iterations: usize,
    /// Largest quadrature error estimate among the integrals used.
    pub quadrature_error: f64,
    /// The optimizer sits at the boundary of its feasible set.
    pub pinned: bool,
    /// `α* = λ_max` was taken from the sufficient condition without searching.
    pub short_circuit: bool,
    /// Monte Carlo half-width of `rate`, if the value is an estimate.
    pub mc_half_width: Option<f64>,
    /// The Monte Carlo half-width missed its target.
    pub mc_flag: bool,
    /// The exact Toeplitz penalty was replaced by the circulant one.
    pub circulant_fallback: bool,
}

/// A bound evaluation in nats/s: `rate = awgn_term − penalty_term`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub rate: f64,
    pub awgn_term: f64,
    pub penalty_term: f64,
    pub alpha_star: Option<f64>,
    pub gamma_star: Option<f64>,
    pub q_used: Option<usize>,
    pub diagnostics: Diagnostics,
}

fn check_bandwidth(bandwidth_hz: f64, grid: &GridParams) -> Result<()> {
    if !(bandwidth_hz >= grid.freq_hz() * (1.0 - 1e-12)) || !bandwidth_hz.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth {bandwidth_hz} Hz is below one tone spacing F = {} Hz",
            grid.freq_hz()
        )));
    }
    Ok(())
}

/// Per receive eigenmode: `σ_r P − ψ_r ≥ 0`, and the quadrature error behind it.
fn psi_slack(
    sf: &ScatteringFunction,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    quadrature: &QuadratureSpec,
) -> Result<(Vec<f64>, f64)> {
    let lam = spec.lambda_max();
    let beta = lb.papr();
    let mut error = 0.0f64;
    let mut slack = Vec::with_capacity(spec.num_rx());
    for &sigma in spec.rx_eigs() {
        let scale = lam * sigma * beta * lb.power() / bandwidth_hz;
        let d = sf.log_penalty_deficit_detailed(scale, quadrature)?;
        let factor = bandwidth_hz / (lam * beta);
        error = error.max(factor * d.error_estimate);
        slack.push(factor * d.value);
    }
    Ok((slack, error))
}

/// Penalty `ψ_r = (B/(λ_max β))·∬ ln(1 + λ_max σ_r β P C_H / B)` in nats/s.
pub fn penalty_psi(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    rx_index: usize,
    quadrature: &QuadratureSpec,
) -> Result<f64> {
    check_bandwidth(bandwidth_hz, grid)?;
    if rx_index >= spec.num_rx() {
        return Err(Error::InvalidParameter(format!(
            "receive index {rx_index} out of range for {} antennas",
            spec.num_rx()
        )));
    }
    let lam = spec.lambda_max();
    let scale = lam * spec.rx_eigs()[rx_index] * lb.papr() * lb.power() / bandwidth_hz;
    Ok(bandwidth_hz / (lam * lb.papr()) * sf.log_penalty_integral(scale, quadrature)?)
}

/// Terms of the α-objective, computed from the penalty slack.
struct AlphaObjective<'a> {
    slack: &'a [f64],
    sigma_p: Vec<f64>,
    /// `σ_r P TF / B`
    snr: Vec<f64>,
    dof: f64,
}

impl AlphaObjective<'_> {
    /// `(rate, awgn_term, penalty_term)` at `α`.
    fn evaluate(&self, alpha: f64) -> (f64, f64, f64) {
        let (mut rate, mut awgn, mut penalty) = (0.0, 0.0, 0.0);
        for r in 0..self.slack.len() {
            let d = self.dof * log1p_deficit(alpha * self.snr[r]);
            rate += alpha * self.slack[r] - d;
            awgn += alpha * self.sigma_p[r] - d;
            penalty += alpha * (self.sigma_p[r] - self.slack[r]);
        }
        (rate, awgn, penalty)
    }

    /// Derivative in α; decreasing because the objective is concave.
    fn derivative(&self, alpha: f64) -> f64 {
        (0..self.slack.len())
            .map(|r| {
                let x = alpha * self.snr[r];
                self.slack[r] - self.sigma_p[r] * x / (1.0 + x)
            })
            .sum()
    }
}

/// Sufficient condition for `α* = λ_max`, with the SNR threshold it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SufficientCondition {
    /// `Δ_H ≤ β/(3TF)`
    pub spread_ok: bool,
    /// `P/B` below the threshold.
    pub snr_ok: bool,
    pub holds: bool,
    /// Threshold on `P/B` in dB.
    pub threshold_db: f64,
    /// `P/B` in dB.
    pub snr_db: f64,
}

/// Threshold on `P/B` in dB: `(Δ_H/(λσβ))·[exp(β/(2TFΔ_H)) − 1]`, computed in
/// the log domain since the exponent is routinely in the hundreds.
pub fn snr_threshold_db(spread: f64, tf: f64, lambda_sigma: f64, papr: f64) -> f64 {
    let x = papr / (2.0 * tf * spread);
    // ln(e^x − 1) = x + ln(1 − e^{−x})
    let ln_expm1 = if x > 1.0 { x + (-(-x).exp()).ln_1p() } else { x.exp_m1().ln() };
    let ln_threshold = (spread / (lambda_sigma * papr)).ln() + ln_expm1;
    10.0 * ln_threshold / std::f64::consts::LN_10
}

pub fn sufficient_condition(
    spread: f64,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
) -> SufficientCondition {
    let tf = grid.tf();
    let spread_ok = spread <= lb.papr() / (3.0 * tf);
    let threshold_db = snr_threshold_db(spread, tf, spec.lambda_max() * spec.sigma_max(), lb.papr());
    let snr_db = 10.0 * (lb.power() / bandwidth_hz).log10();
    let snr_ok = snr_db < threshold_db;
    SufficientCondition {
        spread_ok,
        snr_ok,
        holds: spread_ok && snr_ok,
        threshold_db,
        snr_db,
    }
}

/// `U₁(B)`; takes `α* = λ_max` directly when the sufficient condition holds.
pub fn upper_bound_u1(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    quadrature: &QuadratureSpec,
) -> Result<BoundValue> {
    u1(sf, grid, spec, lb, bandwidth_hz, quadrature, true)
}

/// `U₁(B)` with α always located by bisection on the derivative.
pub fn upper_bound_u1_bisection(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    quadrature: &QuadratureSpec,
) -> Result<BoundValue> {
    u1(sf, grid, spec, lb, bandwidth_hz, quadrature, false)
}

/// The objective `Σ_r [(B/TF) ln(1 + α σ_r P TF/B) − α ψ_r]` maximized by `U₁`, at a given `α`.
pub fn u1_objective(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    alpha: f64,
    quadrature: &QuadratureSpec,
) -> Result<f64> {
    check_bandwidth(bandwidth_hz, grid)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let (slack, _) = psi_slack(sf, spec, lb, bandwidth_hz, quadrature)?;
    let dof = bandwidth_hz / grid.tf();
    let objective = AlphaObjective {
        slack: &slack,
        sigma_p: spec.rx_eigs().iter().map(|s| s * lb.power()).collect(),
        snr: spec.rx_eigs().iter().map(|s| s * lb.power() / dof).collect(),
        dof,
    };
    Ok(objective.evaluate(alpha).0)
}

fn u1(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    quadrature: &QuadratureSpec,
    allow_short_circuit: bool,
) -> Result<BoundValue> {
    check_bandwidth(bandwidth_hz, grid)?;
    let (slack, quadrature_error) = psi_slack(sf, spec, lb, bandwidth_hz, quadrature)?;
    let dof = bandwidth_hz / grid.tf();
    let objective = AlphaObjective {
        slack: &slack,
        sigma_p: spec.rx_eigs().iter().map(|s| s * lb.power()).collect(),
        snr: spec.rx_eigs().iter().map(|s| s * lb.power() / dof).collect(),
        dof,
    };
    let lam = spec.lambda_max();

    let mut diagnostics = Diagnostics {
        quadrature_error,
        ..Diagnostics::default()
    };
    let short_circuit =
        allow_short_circuit && sufficient_condition(sf.spread(), grid, spec, lb, bandwidth_hz).holds;
    let alpha = if short_circuit || objective.derivative(lam) >= 0.0 {
        diagnostics.short_circuit = short_circuit;
        diagnostics.pinned = true;
        lam
    } else if objective.derivative(0.0) <= 0.0 {
        diagnostics.pinned = true;
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, lam);
        while hi - lo >= 1e-9 * lam {
            let mid = 0.5 * (lo + hi);
            if objective.derivative(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            diagnostics.iterations += 1;
        }
        0.5 * (lo + hi)
    };
    let (rate, awgn_term, penalty_term) = objective.evaluate(alpha);
    Ok(BoundValue {
        rate,
        awgn_term,
        penalty_term,
        alpha_star: Some(alpha),
        gamma_star: None,
        q_used: None,
        diagnostics,
    })
}

/// Closed-form `U₁` for a brick scattering function of spread `Δ_H` with `α = λ_max`.
pub fn brick_upper_bound(
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    grid: &GridParams,
    spread: f64,
    bandwidth_hz: f64,
) -> Result<BoundValue> {
    check_bandwidth(bandwidth_hz, grid)?;
    if !(spread > 0.0 && spread < 1.0) {
        return Err(Error::InvalidParameter(format!("spread must lie in (0, 1), got {spread}")));
    }
    let lam = spec.lambda_max();
    let beta = lb.papr();
    let dof = bandwidth_hz / grid.tf();
    let (mut rate, mut awgn, mut penalty) = (0.0, 0.0, 0.0);
    for &sigma in spec.rx_eigs() {
        let received = lam * sigma * lb.power();
        let awgn_deficit = dof * log1p_deficit(received / dof);
        let penalty_deficit = bandwidth_hz * spread / beta * log1p_deficit(received * beta / (bandwidth_hz * spread));
        rate += penalty_deficit - awgn_deficit;
        awgn += received - awgn_deficit;
        penalty += received - penalty_deficit;
    }
    Ok(BoundValue {
        rate,
        awgn_term: awgn,
        penalty_term: penalty,
        alpha_star: Some(lam),
        gamma_star: None,
        q_used: None,
        diagnostics: Diagnostics {
            pinned: true,
            ..Diagnostics::default()
        },
    })
}

/// Coherent comparison curve `(B/TF)·Σ_r ln(1 + σ_r P TF/B)` in nats/s.
pub fn coherent_jensen_bound(spec: &SpatialSpectrum, lb: &LinkBudget, grid: &GridParams, bandwidth_hz: f64) -> f64 {
    let dof = bandwidth_hz / grid.tf();
    spec.rx_eigs()
        .iter()
        .map(|s| dof * (s * lb.power() / dof).ln_1p())
        .sum()
}
