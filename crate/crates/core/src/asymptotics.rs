//! First-order wideband behaviour: the coefficient `c₁` of `1/B` in the
//! capacity expansion, Schur-convexity checks on it, and the ratio between
//! the lower bound's first-order coefficient and `c₁`.

use serde::Serialize;

use crate::channel_model::{GridParams, ScatteringFunction};
use crate::error::{Error, Result};
use crate::lower_bound::lb_approx;
use crate::quadrature::QuadratureSpec;
use crate::spatial::{majorizes, SpatialSpectrum};
use crate::upper_bound::{upper_bound_u1, LinkBudget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorResult {
    /// Coefficient of `1/B`, in nats·Hz/s.
    pub c1: f64,
    pub kappa: f64,
    /// `2TF/κ`
    pub threshold_beta: f64,
    /// `β > 2TF/κ`
    pub valid: bool,
}

/// `c₁ = Σσ²·(λ_max P)²/2·(βκ − TF)`.
pub fn taylor_coefficient(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    quadrature: &QuadratureSpec,
) -> Result<TaylorResult> {
    let kappa = sf.kappa(quadrature)?;
    Ok(taylor_from_kappa(kappa, grid.tf(), spec, lb))
}

pub fn taylor_from_kappa(kappa: f64, tf: f64, spec: &SpatialSpectrum, lb: &LinkBudget) -> TaylorResult {
    let lp = spec.lambda_max() * lb.power();
    let threshold_beta = 2.0 * tf / kappa;
    TaylorResult {
        c1: spec.rx_square_sum() * lp * lp / 2.0 * (lb.papr() * kappa - tf),
        kappa,
        threshold_beta,
        valid: lb.papr() > threshold_beta,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// `a` is at least as correlated as `b` in both spectra.
    AMajorizesB,
    BMajorizesA,
    Incomparable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchurReport {
    pub c1_a: f64,
    pub c1_b: f64,
    pub tx_a_majorizes_b: bool,
    pub tx_b_majorizes_a: bool,
    pub rx_a_majorizes_b: bool,
    pub rx_b_majorizes_a: bool,
    pub ordering: Ordering,
    /// The `c₁` values respect `ordering` (vacuous when incomparable).
    pub consistent: bool,
}

/// Compares `c₁` for two spectra with the order majorization predicts.
pub fn schur_order_check(
    spec_a: &SpatialSpectrum,
    spec_b: &SpatialSpectrum,
    sf: &ScatteringFunction,
    grid: &GridParams,
    lb: &LinkBudget,
    quadrature: &QuadratureSpec,
) -> Result<SchurReport> {
    if spec_a.num_tx() != spec_b.num_tx() {
        return Err(Error::DimensionMismatch(spec_a.num_tx(), spec_b.num_tx()));
    }
    if spec_a.num_rx() != spec_b.num_rx() {
        return Err(Error::DimensionMismatch(spec_a.num_rx(), spec_b.num_rx()));
    }
    let kappa = sf.kappa(quadrature)?;
    let c1_a = taylor_from_kappa(kappa, grid.tf(), spec_a, lb).c1;
    let c1_b = taylor_from_kappa(kappa, grid.tf(), spec_b, lb).c1;
    let tx_ab = majorizes(spec_a.tx_eigs(), spec_b.tx_eigs())?;
    let tx_ba = majorizes(spec_b.tx_eigs(), spec_a.tx_eigs())?;
    let rx_ab = majorizes(spec_a.rx_eigs(), spec_b.rx_eigs())?;
    let rx_ba = majorizes(spec_b.rx_eigs(), spec_a.rx_eigs())?;
    let ordering = if tx_ab && rx_ab {
        Ordering::AMajorizesB
    } else if tx_ba && rx_ba {
        Ordering::BMajorizesA
    } else {
        Ordering::Incomparable
    };
    // relative slack for rounding in the Σσ² and λ² products
    let slack = 1e-12 * c1_a.abs().max(c1_b.abs());
    let consistent = match ordering {
        Ordering::AMajorizesB => c1_a >= c1_b - slack,
        Ordering::BMajorizesA => c1_b >= c1_a - slack,
        Ordering::Incomparable => true,
    };
    Ok(SchurReport {
        c1_a,
        c1_b,
        tx_a_majorizes_b: tx_ab,
        tx_b_majorizes_a: tx_ba,
        rx_a_majorizes_b: rx_ab,
        rx_b_majorizes_a: rx_ba,
        ordering,
        consistent,
    })
}

/// Geometric ladder `P κ·10^k`, `k = 2..=6`, far into the regime where the
/// per-slot SNR on the scattering support is small.
pub fn default_ratio_ladder(kappa: f64, lb: &LinkBudget) -> Vec<f64> {
    (2..=6).map(|k| lb.power() * kappa * 10f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderAnalysis {
    pub bandwidths_hz: Vec<f64>,
    /// `B·rate(B)/c₁` at each rung.
    pub ratios: Vec<f64>,
    /// Polynomial extrapolation of the ratios to `1/B = 0`.
    pub limit: f64,
    /// Ratios change monotonically along the ladder.
    pub monotone: bool,
    /// Distances to the limit shrink monotonically along the ladder.
    pub converging: bool,
    /// Non-monotone ladder or a limit outside `(0, 1]`.
    pub flagged: bool,
}

/// Neville extrapolation to `x = 0` through `(x_i, y_i)`.
pub fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    let n = x.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (x[i], x[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

fn analyse(bandwidths_hz: Vec<f64>, ratios: Vec<f64>) -> LadderAnalysis {
    // the last four rungs carry the extrapolation; far rungs only add noise
    let start = ratios.len().saturating_sub(4);
    let x: Vec<f64> = bandwidths_hz[start..].iter().map(|b| 1.0 / b).collect();
    let limit = extrapolate_to_zero(&x, &ratios[start..]);
    let increasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
    let monotone = increasing || decreasing;
    let converging = ratios
        .windows(2)
        .all(|w| (w[1] - limit).abs() <= (w[0] - limit).abs());
    LadderAnalysis {
        bandwidths_hz,
        ratios,
        limit,
        monotone,
        converging,
        flagged: !monotone || !(limit > 0.0 && limit <= 1.0),
    }
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 4 {
        return Err(Error::InvalidParameter(format!("ladder needs at least 4 rungs, got {}", ladder.len())));
    }
    if !ladder.windows(2).all(|w| w[1] > w[0]) || !(ladder[0] > 0.0) {
        return Err(Error::InvalidParameter("ladder must be positive and increasing".into()));
    }
    Ok(())
}

/// `B·lb_approx(B)/c₁` with one active eigenmode, extrapolated to `B → ∞`.
pub fn lb_ratio_analysis(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    ladder: &[f64],
    quadrature: &QuadratureSpec,
) -> Result<LadderAnalysis> {
    check_ladder(ladder)?;
    let c1 = taylor_coefficient(sf, grid, spec, lb, quadrature)?.c1;
    let ratios = ladder
        .iter()
        .map(|&b| Ok(b * lb_approx(sf, grid, spec, lb, b, 1, quadrature)?.rate / c1))
        .collect::<Result<Vec<_>>>()?;
    Ok(analyse(ladder.to_vec(), ratios))
}

/// `B·U₁(B)/c₁` along a ladder, extrapolated to `B → ∞`.
pub fn u1_ratio_analysis(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    ladder: &[f64],
    quadrature: &QuadratureSpec,
) -> Result<LadderAnalysis> {
    check_ladder(ladder)?;
    let c1 = taylor_coefficient(sf, grid, spec, lb, quadrature)?.c1;
    let ratios = ladder
        .iter()
        .map(|&b| Ok(b * upper_bound_u1(sf, grid, spec, lb, b, quadrature)?.rate / c1))
        .collect::<Result<Vec<_>>>()?;
    Ok(analyse(ladder.to_vec(), ratios))
}
