//! Spatial correlation spectra, majorization, and the Hadamard-product
//! determinant inequality used by the upper bound.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian symmetry tolerance (absolute, entrywise).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues down to this (negative) level are treated as rounding noise.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Slack on prefix-sum comparisons in [`majorizes`].
pub const MAJORIZATION_SLACK: f64 = 1e-9;
/// Relative trace mismatch that is silently renormalized.
pub const TRACE_TOL: f64 = 1e-6;

/// Descending eigenvalues of the transmit and receive correlation matrices,
/// normalized so that `Σλ = M_T` and `Σσ = M_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    tx: Vec<f64>,
    rx: Vec<f64>,
}

impl SpatialSpectrum {
    /// Validates trace normalization (1e-9 relative) and sorts both vectors descending.
    pub fn new(tx_eigs: Vec<f64>, rx_eigs: Vec<f64>) -> Result<Self> {
        Ok(Self {
            tx: checked_eigs(tx_eigs, "transmit")?,
            rx: checked_eigs(rx_eigs, "receive")?,
        })
    }

    /// Like [`SpatialSpectrum::new`] but rescales each vector to its trace target.
    pub fn normalized(tx_eigs: Vec<f64>, rx_eigs: Vec<f64>) -> Result<Self> {
        Self::new(rescale(tx_eigs, "transmit")?, rescale(rx_eigs, "receive")?)
    }

    pub fn uncorrelated(num_tx: usize, num_rx: usize) -> Self {
        Self {
            tx: vec![1.0; num_tx],
            rx: vec![1.0; num_rx],
        }
    }

    pub fn tx_eigs(&self) -> &[f64] {
        &self.tx
    }

    pub fn rx_eigs(&self) -> &[f64] {
        &self.rx
    }

    pub fn num_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn num_rx(&self) -> usize {
        self.rx.len()
    }

    /// `λ_max`
    pub fn lambda_max(&self) -> f64 {
        self.tx[0]
    }

    /// `σ_max`
    pub fn sigma_max(&self) -> f64 {
        self.rx[0]
    }

    /// `Σ_r σ_r²`
    pub fn rx_square_sum(&self) -> f64 {
        self.rx.iter().map(|s| s * s).sum()
    }
}

fn checked_eigs(mut eigs: Vec<f64>, side: &str) -> Result<Vec<f64>> {
    if eigs.is_empty() {
        return Err(Error::InvalidSpatial(format!("{side} spectrum is empty")));
    }
    if eigs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSpatial(format!(
            "{side} eigenvalues must be finite and nonnegative"
        )));
    }
    let n = eigs.len() as f64;
    let sum: f64 = eigs.iter().sum();
    if (sum - n).abs() > 1e-9 * n {
        return Err(Error::InvalidSpatial(format!(
            "{side} eigenvalues sum to {sum}, expected {n}"
        )));
    }
    eigs.sort_by(|a, b| b.total_cmp(a));
    Ok(eigs)
}

fn rescale(eigs: Vec<f64>, side: &str) -> Result<Vec<f64>> {
    let sum: f64 = eigs.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::InvalidSpatial(format!("{side} eigenvalues have no positive mass")));
    }
    let n = eigs.len() as f64;
    Ok(eigs.into_iter().map(|v| v * n / sum).collect())
}

/// Hermitian nonnegative-definite correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: DMatrix<Complex64>,
}

impl CorrelationMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidSpatial(format!(
                "correlation matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..n {
                let a = matrix[(i, j)];
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::InvalidSpatial("non-finite entry".into()));
                }
                if (a - matrix[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidSpatial(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        let m = Self { matrix };
        let floor = -EIGEN_CLAMP * m.trace().abs().max(1.0);
        if m.raw_eigenvalues().iter().any(|&e| e < floor) {
            return Err(Error::InvalidSpatial("matrix is not nonnegative definite".into()));
        }
        Ok(m)
    }

    /// Builds from separate real and imaginary parts (row-major nested arrays).
    pub fn from_parts(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = re.len();
        if re.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpatial("real part is not square".into()));
        }
        if let Some(im) = im {
            if im.len() != n || im.iter().any(|row| row.len() != n) {
                return Err(Error::InvalidSpatial("imaginary part shape differs from real part".into()));
            }
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(re[i][j], im.map_or(0.0, |im| im[i][j]))
        });
        Self::new(matrix)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    fn raw_eigenvalues(&self) -> Vec<f64> {
        self.matrix.clone().symmetric_eigenvalues().iter().copied().collect()
    }

    /// Eigenvalues in descending order, with rounding noise clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut eigs: Vec<f64> = self.raw_eigenvalues().into_iter().map(|e| e.max(0.0)).collect();
        eigs.sort_by(|a, b| b.total_cmp(a));
        eigs
    }
}

/// Spectrum extracted from correlation matrices, with notes on any rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSpectrum {
    pub spectrum: SpatialSpectrum,
    pub warnings: Vec<String>,
}

/// Eigenvalues of `m` rescaled to sum to its dimension, with a note when the
/// trace was off by more than [`TRACE_TOL`].
pub fn normalized_eigenvalues(m: &CorrelationMatrix, side: &str) -> Result<(Vec<f64>, Option<String>)> {
    let trace = m.trace();
    let raw: f64 = m.raw_eigenvalues().iter().sum();
    if (raw - trace).abs() > 1e-8 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidSpatial(format!(
            "{side} eigenvalues sum to {raw} but trace is {trace}"
        )));
    }
    let n = m.dim() as f64;
    let warning = ((trace - n).abs() > TRACE_TOL * n).then(|| format!("{side} correlation trace {trace} rescaled to {n}"));
    Ok((rescale(m.eigenvalues(), side)?, warning))
}

/// Eigendecomposes `R_T` and `R_R` into a trace-normalized [`SpatialSpectrum`].
pub fn spectrum_from_matrices(rt: &CorrelationMatrix, rr: &CorrelationMatrix) -> Result<ExtractedSpectrum> {
    let (tx, tx_warning) = normalized_eigenvalues(rt, "transmit")?;
    let (rx, rx_warning) = normalized_eigenvalues(rr, "receive")?;
    Ok(ExtractedSpectrum {
        spectrum: SpatialSpectrum::new(tx, rx)?,
        warnings: tx_warning.into_iter().chain(rx_warning).collect(),
    })
}

/// Whether `a` majorizes `b`: every prefix sum of descending `a` dominates
/// that of descending `b`, the totals being equal.
pub fn majorizes(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (sum_a, sum_b): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sum_a - sum_b).abs() > 1e-9 * sum_a.abs().max(sum_b.abs()) {
        return Err(Error::MajorizationUndefined(format!(
            "sums differ: {sum_a} vs {sum_b}"
        )));
    }
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|x, y| y.total_cmp(x));
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (mut pa, mut pb) = (0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        pa += x;
        pb += y;
        if pa < pb - MAJORIZATION_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Both sides of `det(I + A∘B) ≥ det(I + (I∘A)B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetInequality {
    pub hadamard_side: f64,
    pub diagonal_side: f64,
    pub holds: bool,
}

/// Evaluates the determinant inequality for two nonnegative-definite matrices.
///
/// The inequality holds for every valid input; this is a self-check.
pub fn hadamard_det_inequality(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<DetInequality> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let n = a.dim();
    let (am, bm) = (a.matrix(), b.matrix());
    let identity = DMatrix::<Complex64>::identity(n, n);
    let hadamard = &identity + am.component_mul(bm);
    let diag_a = DMatrix::from_diagonal(&am.diagonal());
    let product = &identity + diag_a * bm;
    let lhs = hadamard.determinant().re;
    let rhs = product.determinant().re;
    Ok(DetInequality {
        hadamard_side: lhs,
        diagonal_side: rhs,
        holds: lhs >= rhs - 1e-9 * rhs.abs(),
    })
}
