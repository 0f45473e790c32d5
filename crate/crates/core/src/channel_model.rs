//! Scattering functions, time-frequency grid parameters and the integral
//! functionals of the scattering function that the bounds are built from.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_cells, integrate_cells_inner_exact, BilinearCell, Integral, QuadratureSpec};
use crate::special::{log1p_antiderivative, log1p_deficit, log1p_deficit_antiderivative};

/// Volume mismatch accepted before a sampled grid is considered unnormalizable.
const MIN_VOLUME: f64 = 1e-300;

/// Brick-shaped scattering function: flat `1/Δ_H` on `[-ν₀,ν₀]×[-τ₀,τ₀]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brick {
    max_doppler_hz: f64,
    max_delay_s: f64,
}

/// Scattering function sampled on a rectangular lattice and bilinearly
/// interpolated between lattice nodes. Zero outside the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    doppler_hz: Vec<f64>,
    delay_s: Vec<f64>,
    /// Doppler-major: `values[i * delay_s.len() + j]`.
    values: Vec<f64>,
    scale_applied: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScatteringFunction {
    Brick(Brick),
    Sampled(SampledGrid),
}

impl ScatteringFunction {
    pub fn brick(max_doppler_hz: f64, max_delay_s: f64) -> Result<Self> {
        if !(max_doppler_hz > 0.0 && max_delay_s > 0.0)
            || !max_doppler_hz.is_finite()
            || !max_delay_s.is_finite()
        {
            return Err(Error::InvalidScattering(format!(
                "brick extents must be positive, got nu0={max_doppler_hz}, tau0={max_delay_s}"
            )));
        }
        let spread = 4.0 * max_doppler_hz * max_delay_s;
        if spread >= 1.0 {
            return Err(Error::InvalidScattering(format!(
                "channel is not underspread: spread {spread} >= 1"
            )));
        }
        Ok(Self::Brick(Brick { max_doppler_hz, max_delay_s }))
    }

    /// Builds a sampled scattering function and normalizes it to unit volume.
    pub fn sampled(doppler_hz: Vec<f64>, delay_s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let strictly_increasing = |axis: &[f64]| axis.windows(2).all(|w| w[1] > w[0]);
        if doppler_hz.len() < 2 || delay_s.len() < 2 {
            return Err(Error::InvalidScattering("each axis needs at least two nodes".into()));
        }
        if !strictly_increasing(&doppler_hz) || !strictly_increasing(&delay_s) {
            return Err(Error::InvalidScattering("axes must be strictly increasing".into()));
        }
        if doppler_hz.iter().chain(&delay_s).any(|v| !v.is_finite()) {
            return Err(Error::InvalidScattering("axis values must be finite".into()));
        }
        if values.len() != doppler_hz.len() * delay_s.len() {
            return Err(Error::InvalidScattering(format!(
                "expected {} values, got {}",
                doppler_hz.len() * delay_s.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidScattering("values must be finite and nonnegative".into()));
        }
        let mut grid = SampledGrid {
            doppler_hz,
            delay_s,
            values,
            scale_applied: 1.0,
        };
        let spread = 4.0 * grid.max_doppler() * grid.max_delay();
        if spread >= 1.0 {
            return Err(Error::InvalidScattering(format!(
                "channel is not underspread: spread {spread} >= 1"
            )));
        }
        let volume = grid.volume();
        if !(volume > MIN_VOLUME) {
            return Err(Error::InvalidScattering("grid has zero volume".into()));
        }
        let scale = 1.0 / volume;
        grid.values.iter_mut().for_each(|v| *v *= scale);
        grid.scale_applied = scale;
        Ok(Self::Sampled(grid))
    }

    /// Reads a lattice from CSV with header `nu_hz,tau_s,value`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            nu_hz: f64,
            tau_s: f64,
            value: f64,
        }
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Io(e.to_string()))?
            .iter()
            .map(str::trim)
            .collect::<Vec<_>>();
        if headers != ["nu_hz", "tau_s", "value"] {
            return Err(Error::InvalidScattering(format!(
                "expected header nu_hz,tau_s,value, got {}",
                headers.join(",")
            )));
        }
        let mut rows = Vec::new();
        for record in reader.deserialize::<Row>() {
            rows.push(record.map_err(|e| Error::InvalidScattering(e.to_string()))?);
        }
        let axis = |pick: fn(&Row) -> f64| {
            let mut axis: Vec<f64> = rows.iter().map(pick).collect();
            axis.sort_by(f64::total_cmp);
            axis.dedup();
            axis
        };
        let doppler = axis(|r| r.nu_hz);
        let delay = axis(|r| r.tau_s);
        let mut values = vec![f64::NAN; doppler.len() * delay.len()];
        if rows.len() != values.len() {
            return Err(Error::InvalidScattering(format!(
                "{} rows do not form a {}x{} rectangular lattice",
                rows.len(),
                doppler.len(),
                delay.len()
            )));
        }
        for row in &rows {
            let i = doppler.partition_point(|v| *v < row.nu_hz);
            let j = delay.partition_point(|v| *v < row.tau_s);
            let slot = &mut values[i * delay.len() + j];
            if !slot.is_nan() {
                return Err(Error::InvalidScattering(format!(
                    "duplicate lattice node ({}, {})",
                    row.nu_hz, row.tau_s
                )));
            }
            *slot = row.value;
        }
        Self::sampled(doppler, delay, values)
    }

    /// Half-width ν₀ of the Doppler support.
    pub fn max_doppler(&self) -> f64 {
        match self {
            Self::Brick(b) => b.max_doppler_hz,
            Self::Sampled(g) => g.max_doppler(),
        }
    }

    /// Half-width τ₀ of the delay support.
    pub fn max_delay(&self) -> f64 {
        match self {
            Self::Brick(b) => b.max_delay_s,
            Self::Sampled(g) => g.max_delay(),
        }
    }

    /// Spread `Δ_H = 4ν₀τ₀`.
    pub fn spread(&self) -> f64 {
        4.0 * self.max_doppler() * self.max_delay()
    }

    pub fn is_brick(&self) -> bool {
        matches!(self, Self::Brick(_))
    }

    /// Scale factor applied to the raw samples to reach unit volume (1 for a brick).
    pub fn normalization_scale(&self) -> f64 {
        match self {
            Self::Brick(_) => 1.0,
            Self::Sampled(g) => g.scale_applied,
        }
    }

    /// `C_H(ν, τ)`.
    pub fn value(&self, doppler_hz: f64, delay_s: f64) -> f64 {
        match self {
            Self::Brick(b) => {
                if doppler_hz.abs() <= b.max_doppler_hz && delay_s.abs() <= b.max_delay_s {
                    1.0 / self.spread()
                } else {
                    0.0
                }
            }
            Self::Sampled(g) => g.value(doppler_hz, delay_s),
        }
    }

    /// The same function as a sampled lattice; a brick becomes a flat 2x2 lattice.
    pub fn to_sampled(&self) -> SampledGrid {
        match self {
            Self::Sampled(g) => g.clone(),
            Self::Brick(b) => {
                let level = 1.0 / self.spread();
                SampledGrid {
                    doppler_hz: vec![-b.max_doppler_hz, b.max_doppler_hz],
                    delay_s: vec![-b.max_delay_s, b.max_delay_s],
                    values: vec![level; 4],
                    scale_applied: 1.0,
                }
            }
        }
    }

    /// Peakiness `κ = ∬ C_H²`.
    pub fn kappa(&self, quadrature: &QuadratureSpec) -> Result<f64> {
        match self {
            Self::Brick(_) => Ok(1.0 / self.spread()),
            Self::Sampled(g) => Ok(g.integrate(quadrature, |v| v * v)?.value),
        }
    }

    /// `∬ ln(1 + c·C_H(ν,τ)) dν dτ`.
    pub fn log_penalty_integral(&self, scale: f64, quadrature: &QuadratureSpec) -> Result<f64> {
        check_scale(scale)?;
        match self {
            Self::Brick(_) => {
                let spread = self.spread();
                Ok(spread * (scale / spread).ln_1p())
            }
            Self::Sampled(g) => g.log_penalty_integral(scale, quadrature),
        }
    }

    /// `∬ [c·C_H − ln(1 + c·C_H)] dν dτ`, i.e. `c − log_penalty_integral(c)` for
    /// a unit-volume function, evaluated without cancellation.
    pub fn log_penalty_deficit(&self, scale: f64, quadrature: &QuadratureSpec) -> Result<f64> {
        Ok(self.log_penalty_deficit_detailed(scale, quadrature)?.value)
    }

    /// [`ScatteringFunction::log_penalty_deficit`] with its quadrature error estimate.
    pub fn log_penalty_deficit_detailed(&self, scale: f64, quadrature: &QuadratureSpec) -> Result<Integral> {
        check_scale(scale)?;
        let exact = |value| Integral { value, error_estimate: 0.0, refinements: 0 };
        match self {
            Self::Brick(_) => {
                let spread = self.spread();
                Ok(exact(spread * log1p_deficit(scale / spread)))
            }
            Self::Sampled(g) => {
                if scale == 0.0 {
                    return Ok(exact(0.0));
                }
                g.integrate_inner_exact(
                    quadrature,
                    |v| log1p_deficit(scale * v),
                    |v| log1p_deficit_antiderivative(scale * v) / scale,
                )
            }
        }
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty scale must be finite and nonnegative, got {scale}"
        )));
    }
    Ok(())
}

impl SampledGrid {
    pub fn doppler_axis(&self) -> &[f64] {
        &self.doppler_hz
    }

    pub fn delay_axis(&self) -> &[f64] {
        &self.delay_s
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn max_doppler(&self) -> f64 {
        self.doppler_hz[0].abs().max(self.doppler_hz[self.doppler_hz.len() - 1].abs())
    }

    fn max_delay(&self) -> f64 {
        self.delay_s[0].abs().max(self.delay_s[self.delay_s.len() - 1].abs())
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.delay_s.len() + j]
    }

    /// Exact volume of the bilinear interpolant.
    fn volume(&self) -> f64 {
        self.cells()
            .iter()
            .map(|c| c.area * c.corners.iter().sum::<f64>() / 4.0)
            .sum()
    }

    pub(crate) fn cells(&self) -> Vec<BilinearCell> {
        let mut cells = Vec::with_capacity((self.doppler_hz.len() - 1) * (self.delay_s.len() - 1));
        for i in 0..self.doppler_hz.len() - 1 {
            let dx = self.doppler_hz[i + 1] - self.doppler_hz[i];
            for j in 0..self.delay_s.len() - 1 {
                let dy = self.delay_s[j + 1] - self.delay_s[j];
                cells.push(BilinearCell {
                    area: dx * dy,
                    corners: [
                        self.node(i, j),
                        self.node(i + 1, j),
                        self.node(i, j + 1),
                        self.node(i + 1, j + 1),
                    ],
                });
            }
        }
        cells
    }

    pub(crate) fn integrate<G: Fn(f64) -> f64>(
        &self,
        quadrature: &QuadratureSpec,
        g: G,
    ) -> Result<Integral> {
        integrate_cells(&self.cells(), quadrature, g)
    }

    fn integrate_inner_exact<G: Fn(f64) -> f64, A: Fn(f64) -> f64>(
        &self,
        quadrature: &QuadratureSpec,
        g: G,
        big_g: A,
    ) -> Result<Integral> {
        integrate_cells_inner_exact(&self.cells(), quadrature, g, big_g)
    }

    fn log_penalty_integral(&self, scale: f64, quadrature: &QuadratureSpec) -> Result<f64> {
        if scale == 0.0 {
            return Ok(0.0);
        }
        let integral = self.integrate_inner_exact(
            quadrature,
            |v| (scale * v).ln_1p(),
            |v| log1p_antiderivative(scale * v) / scale,
        )?;
        Ok(integral.value)
    }

    fn value(&self, doppler_hz: f64, delay_s: f64) -> f64 {
        let (nu, tau) = (&self.doppler_hz, &self.delay_s);
        if doppler_hz < nu[0] || doppler_hz > nu[nu.len() - 1] || delay_s < tau[0] || delay_s > tau[tau.len() - 1] {
            return 0.0;
        }
        let i = nu.partition_point(|v| *v <= doppler_hz).clamp(1, nu.len() - 1) - 1;
        let j = tau.partition_point(|v| *v <= delay_s).clamp(1, tau.len() - 1) - 1;
        let x = (doppler_hz - nu[i]) / (nu[i + 1] - nu[i]);
        let y = (delay_s - tau[j]) / (tau[j + 1] - tau[j]);
        let lo = self.node(i, j) + (self.node(i + 1, j) - self.node(i, j)) * x;
        let hi = self.node(i, j + 1) + (self.node(i + 1, j + 1) - self.node(i, j + 1)) * x;
        lo + (hi - lo) * y
    }
}

/// Weyl–Heisenberg grid spacings: symbol period `T` and tone spacing `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    time_s: f64,
    freq_hz: f64,
}

/// Default time-frequency product used when matching the grid to a channel.
pub const DEFAULT_TF_PRODUCT: f64 = 1.25;

impl GridParams {
    /// Explicit grid; rejected unless `TF ≥ 1` and no aliasing occurs for `sf`.
    pub fn new(time_s: f64, freq_hz: f64, sf: &ScatteringFunction) -> Result<Self> {
        let grid = Self { time_s, freq_hz };
        grid.validate_for(sf)?;
        Ok(grid)
    }

    /// Grid matched to the scattering function: `T/F = τ₀/ν₀` at the given `TF`.
    pub fn matched(sf: &ScatteringFunction, tf_product: f64) -> Result<Self> {
        if !(tf_product >= 1.0) || !tf_product.is_finite() {
            return Err(Error::InvalidGrid(format!("TF must be >= 1, got {tf_product}")));
        }
        let time_s = (tf_product * sf.max_delay() / sf.max_doppler()).sqrt();
        Self::new(time_s, tf_product / time_s, sf)
    }

    pub fn validate_for(&self, sf: &ScatteringFunction) -> Result<()> {
        let (t, f) = (self.time_s, self.freq_hz);
        if !(t > 0.0 && f > 0.0) || !t.is_finite() || !f.is_finite() {
            return Err(Error::InvalidGrid(format!("T and F must be positive, got T={t}, F={f}")));
        }
        // a few ulps of slack: matched grids hit the product exactly in exact arithmetic
        if t * f < 1.0 - 1e-12 {
            return Err(Error::InvalidGrid(format!("TF = {} < 1", t * f)));
        }
        if t > 1.0 / (2.0 * sf.max_doppler()) * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "T = {t} exceeds 1/(2 nu0) = {}; Doppler aliasing",
                1.0 / (2.0 * sf.max_doppler())
            )));
        }
        if f > 1.0 / (2.0 * sf.max_delay()) * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "F = {f} exceeds 1/(2 tau0) = {}; delay aliasing",
                1.0 / (2.0 * sf.max_delay())
            )));
        }
        Ok(())
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn freq_hz(&self) -> f64 {
        self.freq_hz
    }

    pub fn tf(&self) -> f64 {
        self.time_s * self.freq_hz
    }

    /// Number of tones `K = round(B/F)`, at least one.
    pub fn tones(&self, bandwidth_hz: f64) -> usize {
        ((bandwidth_hz / self.freq_hz).round() as usize).max(1)
    }
}

/// Discrete-domain spectral density `c(θ, φ) = C_H(θ/T, φ/F) / (TF)` for
/// normalized Doppler `θ` and delay `φ` in `[-½, ½]`.
///
/// Only the zeroth aliasing term is evaluated; valid grids guarantee the
/// others vanish.
pub fn spectral_density(sf: &ScatteringFunction, grid: &GridParams, theta: f64, phi: f64) -> f64 {
    if theta.abs() > 0.5 || phi.abs() > 0.5 {
        return 0.0;
    }
    sf.value(theta / grid.time_s, phi / grid.freq_hz) / grid.tf()
}
