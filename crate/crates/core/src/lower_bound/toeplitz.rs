//! Matrix-valued spectral density `C(θ)` across `K` tones and the penalty
//! integral `∫ ln det(I_K + c·C(θ)) dθ`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::channel_model::{GridParams, SampledGrid, ScatteringFunction};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::special::gauss_legendre_unit;

/// Largest `K` for which the dense exact path is attempted by default.
pub const DEFAULT_EXACT_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPath {
    Exact,
    Circulant,
}

#[derive(Debug, Clone, PartialEq)]
enum Representation {
    /// `C(θ) = 1{|θ| ≤ ν₀T}·R`; stores the Doppler band width and `eig(R)`.
    BrickExact { band: f64, eigenvalues: Vec<f64> },
    /// Eigenvalues of `C(θ)` at quadrature nodes in θ, with their weights.
    SampledExact { nodes: Vec<(f64, Vec<f64>)> },
    CirculantApprox,
}

/// `C(θ)` for `K` tones, either diagonalized exactly or replaced by its
/// asymptotically equivalent circulant.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqSpectralMatrix {
    k: usize,
    sf: ScatteringFunction,
    grid: GridParams,
    quadrature: QuadratureSpec,
    repr: Representation,
    fallback: bool,
}

/// Penalty integral from a [`FreqSpectralMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToeplitzPenalty {
    /// Value along the path actually used.
    pub value: f64,
    pub path: PenaltyPath,
    pub circulant: f64,
    pub exact: Option<f64>,
    /// The exact path was requested but its eigendecomposition failed.
    pub fallback: bool,
}

/// First column `r_m`, `m = 0..K`, of the brick Toeplitz kernel.
pub fn brick_kernel_column(sf: &ScatteringFunction, grid: &GridParams, k: usize) -> Vec<f64> {
    let level = 1.0 / (grid.tf() * sf.spread());
    let half = sf.max_delay() * grid.freq_hz();
    (0..k)
        .map(|m| {
            if m == 0 {
                2.0 * half * level
            } else {
                let m = m as f64;
                level * (2.0 * std::f64::consts::PI * half * m).sin() / (std::f64::consts::PI * m)
            }
        })
        .collect()
}

fn real_toeplitz(column: &[f64]) -> DMatrix<f64> {
    let k = column.len();
    DMatrix::from_fn(k, k, |i, j| column[i.abs_diff(j)])
}

fn symmetric_eigenvalues_real(m: DMatrix<f64>) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)?;
    let v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.iter().all(|x| x.is_finite()).then(|| v.into_iter().map(|x| x.max(0.0)).collect())
}

fn hermitian_eigenvalues(m: DMatrix<Complex64>) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)?;
    let v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.iter().all(|x| x.is_finite()).then(|| v.into_iter().map(|x| x.max(0.0)).collect())
}

/// `∫ f(τ) e^{iωτ} dτ` for `f` piecewise linear through `(tau[j], values[j])`.
fn piecewise_linear_fourier(tau: &[f64], values: &[f64], omega: f64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..tau.len() - 1 {
        let h = tau[j + 1] - tau[j];
        let (fa, fb) = (values[j], values[j + 1]);
        if fa == 0.0 && fb == 0.0 {
            continue;
        }
        let z = Complex64::new(0.0, omega * h);
        // (e^z − 1)/z and (e^z(z − 1) + 1)/z², by series near the origin
        let (e0, e1) = if z.norm() < 0.5 {
            let mut e0 = Complex64::new(0.0, 0.0);
            let mut e1 = Complex64::new(0.0, 0.0);
            let mut power = Complex64::new(1.0, 0.0);
            let mut factorial = 1.0;
            for n in 0..24 {
                if n > 0 {
                    factorial *= n as f64;
                }
                e0 += power / (factorial * (n as f64 + 1.0));
                e1 += power / (factorial * (n as f64 + 2.0));
                power *= z;
            }
            (e0, e1)
        } else {
            let ez = z.exp();
            ((ez - 1.0) / z, (ez * (z - 1.0) + 1.0) / (z * z))
        };
        let phase = Complex64::new(0.0, omega * tau[j]).exp();
        total += phase * h * (e0 * fa + e1 * (fb - fa));
    }
    total
}

impl FreqSpectralMatrix {
    /// Exact representation; fails with [`Error::ExactPathCap`] when `K > cap`.
    pub fn exact(
        sf: &ScatteringFunction,
        grid: &GridParams,
        k: usize,
        cap: usize,
        quadrature: &QuadratureSpec,
    ) -> Result<Self> {
        Self::check(sf, grid, k)?;
        if k > cap {
            return Err(Error::ExactPathCap { k, cap });
        }
        quadrature.validate()?;
        let repr = match sf {
            ScatteringFunction::Brick(_) => {
                symmetric_eigenvalues_real(real_toeplitz(&brick_kernel_column(sf, grid, k))).map(|eigenvalues| {
                    Representation::BrickExact {
                        band: 2.0 * sf.max_doppler() * grid.time_s(),
                        eigenvalues,
                    }
                })
            }
            ScatteringFunction::Sampled(g) => sampled_nodes(g, grid, k, quadrature),
        };
        let (repr, fallback) = match repr {
            Some(r) => (r, false),
            None => (Representation::CirculantApprox, true),
        };
        Ok(Self {
            k,
            sf: sf.clone(),
            grid: *grid,
            quadrature: *quadrature,
            repr,
            fallback,
        })
    }

    /// Circulant representation, valid for any `K`.
    pub fn circulant(sf: &ScatteringFunction, grid: &GridParams, k: usize, quadrature: &QuadratureSpec) -> Result<Self> {
        Self::check(sf, grid, k)?;
        quadrature.validate()?;
        Ok(Self {
            k,
            sf: sf.clone(),
            grid: *grid,
            quadrature: *quadrature,
            repr: Representation::CirculantApprox,
            fallback: false,
        })
    }

    /// Exact up to `cap`, circulant beyond.
    pub fn build(
        sf: &ScatteringFunction,
        grid: &GridParams,
        k: usize,
        cap: usize,
        quadrature: &QuadratureSpec,
    ) -> Result<Self> {
        if k > cap {
            Self::circulant(sf, grid, k, quadrature)
        } else {
            Self::exact(sf, grid, k, cap, quadrature)
        }
    }

    fn check(sf: &ScatteringFunction, grid: &GridParams, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        grid.validate_for(sf)
    }

    pub fn tones(&self) -> usize {
        self.k
    }

    pub fn path(&self) -> PenaltyPath {
        match self.repr {
            Representation::CirculantApprox => PenaltyPath::Circulant,
            _ => PenaltyPath::Exact,
        }
    }

    pub fn fell_back(&self) -> bool {
        self.fallback
    }

    /// `C(θ)` as a dense matrix (entry `(k, k')` depends on `k − k'`).
    pub fn matrix_at(&self, theta: f64) -> DMatrix<Complex64> {
        let k = self.k;
        let column: Vec<Complex64> = match &self.sf {
            ScatteringFunction::Brick(_) => {
                if theta.abs() <= self.sf.max_doppler() * self.grid.time_s() {
                    brick_kernel_column(&self.sf, &self.grid, k)
                        .into_iter()
                        .map(|v| Complex64::new(v, 0.0))
                        .collect()
                } else {
                    vec![Complex64::new(0.0, 0.0); k]
                }
            }
            ScatteringFunction::Sampled(g) => slice_column(g, &self.grid, theta / self.grid.time_s(), k),
        };
        DMatrix::from_fn(k, k, |i, j| if i >= j { column[i - j] } else { column[j - i].conj() })
    }

    /// Circulant value `K·∬ ln(1 + c·c(θ,φ)) dθ dφ = K·TF·∬ ln(1 + (c/TF)·C_H)`.
    fn circulant_penalty(&self, c: f64) -> Result<f64> {
        let tf = self.grid.tf();
        Ok(self.k as f64 * tf * self.sf.log_penalty_integral(c / tf, &self.quadrature)?)
    }
}

/// First column of `C(θ)` at Doppler `ν = θ/T` for a sampled grid.
fn slice_column(g: &SampledGrid, grid: &GridParams, doppler_hz: f64, k: usize) -> Vec<Complex64> {
    let tau = g.delay_axis();
    let nu = g.doppler_axis();
    if doppler_hz < nu[0] || doppler_hz > nu[nu.len() - 1] {
        return vec![Complex64::new(0.0, 0.0); k];
    }
    let i = nu.partition_point(|v| *v <= doppler_hz).clamp(1, nu.len() - 1) - 1;
    let x = (doppler_hz - nu[i]) / (nu[i + 1] - nu[i]);
    let row = |i: usize| &g.values()[i * tau.len()..(i + 1) * tau.len()];
    let values: Vec<f64> = row(i).iter().zip(row(i + 1)).map(|(a, b)| a + (b - a) * x).collect();
    fourier_column(tau, &values, grid, k)
}

/// `r_m = (1/T)·∫ f(τ) e^{i2πmFτ} dτ`, `m = 0..K`.
fn fourier_column(tau: &[f64], values: &[f64], grid: &GridParams, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|m| {
            let omega = 2.0 * std::f64::consts::PI * m as f64 * grid.freq_hz();
            piecewise_linear_fourier(tau, values, omega) / grid.time_s()
        })
        .collect()
}

/// `C(θ)` is linear in θ across each Doppler cell of the lattice; its
/// eigenvalues are sampled at Gauss–Legendre nodes inside every cell.
fn sampled_nodes(g: &SampledGrid, grid: &GridParams, k: usize, quadrature: &QuadratureSpec) -> Option<Representation> {
    let (x, w) = gauss_legendre_unit(quadrature.nodes_per_axis);
    let nu = g.doppler_axis();
    let tau = g.delay_axis();
    let row = |i: usize| &g.values()[i * tau.len()..(i + 1) * tau.len()];
    let columns: Vec<Vec<Complex64>> = (0..nu.len()).map(|i| fourier_column(tau, row(i), grid, k)).collect();
    let mut nodes = Vec::new();
    for i in 0..nu.len() - 1 {
        if row(i).iter().chain(row(i + 1)).all(|v| *v == 0.0) {
            continue;
        }
        let width = (nu[i + 1] - nu[i]) * grid.time_s();
        for (xj, wj) in x.iter().zip(&w) {
            let column: Vec<Complex64> = columns[i]
                .iter()
                .zip(&columns[i + 1])
                .map(|(a, b)| a + (b - a) * *xj)
                .collect();
            let m = DMatrix::from_fn(k, k, |r, s| if r >= s { column[r - s] } else { column[s - r].conj() });
            nodes.push((wj * width, hermitian_eigenvalues(m)?));
        }
    }
    Some(Representation::SampledExact { nodes })
}

/// `∫_{−½}^{½} ln det(I_K + c·C(θ)) dθ`, per time slot and set of `K` tones.
pub fn toeplitz_penalty(fsm: &FreqSpectralMatrix, c: f64) -> Result<ToeplitzPenalty> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty scale must be finite and nonnegative, got {c}"
        )));
    }
    let circulant = fsm.circulant_penalty(c)?;
    let log_sum = |eigs: &[f64]| eigs.iter().map(|mu| (c * mu).ln_1p()).sum::<f64>();
    let exact = match &fsm.repr {
        Representation::BrickExact { band, eigenvalues } => Some(band * log_sum(eigenvalues)),
        Representation::SampledExact { nodes } => Some(nodes.iter().map(|(w, eigs)| w * log_sum(eigs)).sum()),
        Representation::CirculantApprox => None,
    };
    Ok(ToeplitzPenalty {
        value: exact.unwrap_or(circulant),
        path: fsm.path(),
        circulant,
        exact,
        fallback: fsm.fallback,
    })
}
