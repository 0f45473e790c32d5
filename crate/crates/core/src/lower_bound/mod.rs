//! Lower bound on the noncoherent capacity: a coherent constant-modulus
//! rate minus the channel-uncertainty penalty, with time sharing over `γ`
//! and a choice of the number `Q̃` of active transmit eigenmodes.
//!
//! The bound lives on the slot lattice: `K = round(B/F)` tones, so the
//! effective bandwidth is `K·F` and the per-slot energy of each active
//! entry is `γ P T/(Q̃ K)`.

mod mutual_info;
mod toeplitz;

use serde::{Deserialize, Serialize};

pub use mutual_info::{coherent_mi_cm, CmInputSpec, McSpec, MiEstimate, PhaseModel};
pub use toeplitz::{
    brick_kernel_column, toeplitz_penalty, FreqSpectralMatrix, PenaltyPath, ToeplitzPenalty, DEFAULT_EXACT_CAP,
};

use crate::channel_model::{GridParams, ScatteringFunction};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::spatial::SpatialSpectrum;
use crate::special::golden_section_max;
use crate::upper_bound::{BoundValue, Diagnostics, LinkBudget};

/// Settings shared by the lower-bound evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Options {
    pub mc: McSpec,
    pub phase: PhaseModel,
    /// Largest `K` evaluated with the exact Toeplitz penalty.
    pub exact_cap: usize,
    pub quadrature: QuadratureSpec,
    /// Bracket width, relative to `β − 1`, at which the γ search stops.
    pub gamma_tolerance: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            mc: McSpec::default(),
            phase: PhaseModel::Continuous,
            exact_cap: DEFAULT_EXACT_CAP,
            quadrature: QuadratureSpec::default(),
            gamma_tolerance: 1e-3,
        }
    }
}

/// Shared state for evaluating `L₁` at one bandwidth.
struct Evaluator<'a> {
    grid: &'a GridParams,
    spec: &'a SpatialSpectrum,
    lb: &'a LinkBudget,
    opts: &'a L1Options,
    k: usize,
    fsm: FreqSpectralMatrix,
}

impl<'a> Evaluator<'a> {
    fn new(
        sf: &ScatteringFunction,
        grid: &'a GridParams,
        spec: &'a SpatialSpectrum,
        lb: &'a LinkBudget,
        bandwidth_hz: f64,
        opts: &'a L1Options,
    ) -> Result<Self> {
        if !(bandwidth_hz >= grid.freq_hz() * (1.0 - 1e-12)) || !bandwidth_hz.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth {bandwidth_hz} Hz is below one tone spacing F = {} Hz",
                grid.freq_hz()
            )));
        }
        let k = grid.tones(bandwidth_hz);
        let fsm = FreqSpectralMatrix::build(sf, grid, k, opts.exact_cap, &opts.quadrature)?;
        Ok(Self { grid, spec, lb, opts, k, fsm })
    }

    fn check_q(&self, q: usize) -> Result<()> {
        if q == 0 || q > self.spec.num_tx() {
            return Err(Error::InvalidParameter(format!(
                "active eigenmodes must lie in [1, {}], got {q}",
                self.spec.num_tx()
            )));
        }
        Ok(())
    }

    /// Per-entry slot energy without time sharing, `P T/(Q̃ K)`.
    fn slot_energy(&self, q: usize) -> f64 {
        self.lb.power() * self.grid.time_s() / (q as f64 * self.k as f64)
    }

    fn at_gamma(&self, q: usize, gamma: f64) -> Result<BoundValue> {
        let energy = self.slot_energy(q);
        let cm = CmInputSpec::new(q, energy, self.opts.phase, self.spec.num_tx())?;
        let mi = coherent_mi_cm(self.spec, &cm, gamma, &self.opts.mc)?;
        let per_second = 1.0 / (gamma * self.grid.time_s());

        let mut penalty = 0.0;
        let mut fallback = self.fsm.fell_back();
        for &lambda in &self.spec.tx_eigs()[..q] {
            for &sigma in self.spec.rx_eigs() {
                let p = toeplitz_penalty(&self.fsm, lambda * sigma * gamma * energy)?;
                fallback |= p.fallback;
                penalty += p.value;
            }
        }
        let awgn_term = per_second * self.k as f64 * mi.value;
        let penalty_term = per_second * penalty;
        Ok(BoundValue {
            rate: awgn_term - penalty_term,
            awgn_term,
            penalty_term,
            alpha_star: None,
            gamma_star: Some(gamma),
            q_used: Some(q),
            diagnostics: Diagnostics {
                mc_half_width: Some(per_second * self.k as f64 * mi.half_width),
                mc_flag: mi.flagged,
                circulant_fallback: fallback,
                ..Diagnostics::default()
            },
        })
    }

    fn best_gamma(&self, q: usize) -> Result<BoundValue> {
        self.check_q(q)?;
        let beta = self.lb.papr();
        if beta == 1.0 {
            let mut v = self.at_gamma(q, 1.0)?;
            v.diagnostics.pinned = true;
            return Ok(v);
        }
        let mut failure = None;
        let (gamma, _, iterations) = golden_section_max(
            |g| match self.at_gamma(q, g) {
                Ok(v) => v.rate,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            1.0,
            beta,
            self.opts.gamma_tolerance * (beta - 1.0),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let mut v = self.at_gamma(q, gamma)?;
        v.diagnostics.iterations = iterations;
        v.diagnostics.pinned = gamma == 1.0 || gamma == beta;
        Ok(v)
    }
}

/// `L₁(B)` with `Q̃ = q` active eigenmodes, maximized over `γ ∈ [1, β]`.
pub fn lower_bound_l1_q(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q: usize,
    opts: &L1Options,
) -> Result<BoundValue> {
    Evaluator::new(sf, grid, spec, lb, bandwidth_hz, opts)?.best_gamma(q)
}

/// `L₁(B)` for every `Q̃` in `q_range`, in the order given.
pub fn lower_bound_l1_each(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q_range: &[usize],
    opts: &L1Options,
) -> Result<Vec<BoundValue>> {
    let eval = Evaluator::new(sf, grid, spec, lb, bandwidth_hz, opts)?;
    q_range.iter().map(|&q| eval.best_gamma(q)).collect()
}

/// `L₁(B)`: the best over `Q̃ ∈ q_range` and `γ ∈ [1, β]`.
pub fn lower_bound_l1(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q_range: &[usize],
    opts: &L1Options,
) -> Result<BoundValue> {
    if q_range.is_empty() {
        return Err(Error::InvalidParameter("empty range of active eigenmodes".into()));
    }
    let all = lower_bound_l1_each(sf, grid, spec, lb, bandwidth_hz, q_range, opts)?;
    Ok(all
        .into_iter()
        .reduce(|best, v| if v.rate > best.rate { v } else { best })
        .expect("nonempty"))
}

/// `L₁` at `points` equally spaced values of `γ` across `[1, β]`.
pub fn gamma_grid_scan(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q: usize,
    points: usize,
    opts: &L1Options,
) -> Result<Vec<BoundValue>> {
    let eval = Evaluator::new(sf, grid, spec, lb, bandwidth_hz, opts)?;
    eval.check_q(q)?;
    let beta = lb.papr();
    let points = points.max(1);
    (0..points)
        .map(|i| {
            let gamma = if points == 1 { 1.0 } else { 1.0 + (beta - 1.0) * i as f64 / (points - 1) as f64 };
            eval.at_gamma(q, gamma)
        })
        .collect()
}

/// The three terms of the wideband approximation at fixed `γ`, in nats/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LbApproxTerms {
    /// `(M_R P/Q̃)·Σ_{t<Q̃} λ_t`
    pub linear: f64,
    /// `−γP²(TF/B)·[(Σλ)²Σσ² + M_R²Σλ²]/(2Q̃²)`
    pub quadratic: f64,
    /// `(B/γ)·Σ_t Σ_r ∬ ln(1 + λ_t σ_r γ P C_H/(Q̃B))`, entered with a minus sign.
    pub penalty: f64,
    /// `linear + quadratic − penalty`, formed without cancellation.
    pub rate: f64,
}

pub fn lb_approx_terms(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q: usize,
    gamma: f64,
    quadrature: &QuadratureSpec,
) -> Result<LbApproxTerms> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    if q == 0 || q > spec.num_tx() {
        return Err(Error::InvalidParameter(format!(
            "active eigenmodes must lie in [1, {}], got {q}",
            spec.num_tx()
        )));
    }
    let p = lb.power();
    let qf = q as f64;
    let lambdas = &spec.tx_eigs()[..q];
    let m_r = spec.num_rx() as f64;
    let sum_l: f64 = lambdas.iter().sum();
    let sum_l2: f64 = lambdas.iter().map(|l| l * l).sum();

    let linear = m_r * p / qf * sum_l;
    let quadratic =
        -gamma * p * p * grid.tf() / bandwidth_hz * (sum_l * sum_l * spec.rx_square_sum() + m_r * m_r * sum_l2)
            / (2.0 * qf * qf);
    let mut deficit = 0.0;
    for &lambda in lambdas {
        for &sigma in spec.rx_eigs() {
            deficit += sf.log_penalty_deficit(lambda * sigma * gamma * p / (qf * bandwidth_hz), quadrature)?;
        }
    }
    let deficit = bandwidth_hz / gamma * deficit;
    Ok(LbApproxTerms {
        linear,
        quadratic,
        penalty: linear - deficit,
        rate: deficit + quadratic,
    })
}

/// Wideband approximation of `L₁` with `Q̃ = q`, maximized over `γ ∈ [1, β]`.
pub fn lb_approx(
    sf: &ScatteringFunction,
    grid: &GridParams,
    spec: &SpatialSpectrum,
    lb: &LinkBudget,
    bandwidth_hz: f64,
    q: usize,
    quadrature: &QuadratureSpec,
) -> Result<BoundValue> {
    let beta = lb.papr();
    let eval = |g: f64| lb_approx_terms(sf, grid, spec, lb, bandwidth_hz, q, g, quadrature);
    let (gamma, iterations) = if beta == 1.0 {
        (1.0, 0)
    } else {
        eval(1.0)?;
        let (g, _, it) = golden_section_max(
            |g| eval(g).map(|t| t.rate).unwrap_or(f64::NEG_INFINITY),
            1.0,
            beta,
            1e-9 * beta,
        );
        (g, it)
    };
    let t = eval(gamma)?;
    Ok(BoundValue {
        rate: t.rate,
        awgn_term: t.linear + t.quadratic,
        penalty_term: t.penalty,
        alpha_star: None,
        gamma_star: Some(gamma),
        q_used: Some(q),
        diagnostics: Diagnostics {
            iterations,
            pinned: gamma == 1.0 || gamma == beta,
            ..Diagnostics::default()
        },
    })
}
