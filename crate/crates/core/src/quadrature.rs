//! Composite 2-D quadrature over bilinear lattice cells.
//!
//! A sampled scattering function is bilinear inside every lattice cell, so
//! any functional `∬ g(C(ν,τ)) dν dτ` reduces to a sum of per-cell
//! integrals of `g` applied to a bilinear interpolant. The engine refines by
//! doubling the number of panels per cell until two successive levels agree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gauss_legendre_unit;

/// Maximum number of panel doublings after the initial level.
pub const MAX_REFINEMENTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Midpoint,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Nodes per axis in every lattice cell at the coarsest level.
    pub nodes_per_axis: usize,
    pub rule: QuadratureRule,
    /// Relative change between successive refinements accepted as converged.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_axis: 8,
            rule: QuadratureRule::GaussLegendre,
            tolerance: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 8 {
            return Err(Error::InvalidQuadrature(format!(
                "nodes_per_axis must be >= 8, got {}",
                self.nodes_per_axis
            )));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidQuadrature(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Nodes and weights of one panel rule on `[0, 1]`.
    fn base_rule(&self) -> (Vec<f64>, Vec<f64>) {
        match self.rule {
            QuadratureRule::Midpoint => {
                let n = self.nodes_per_axis;
                let h = 1.0 / n as f64;
                ((0..n).map(|i| (i as f64 + 0.5) * h).collect(), vec![h; n])
            }
            QuadratureRule::GaussLegendre => gauss_legendre_unit(self.nodes_per_axis),
        }
    }

    /// Composite rule over the panels delimited by `edges`.
    fn composite(&self, edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (x, w) = self.base_rule();
        let mut nodes = Vec::with_capacity(x.len() * edges.len());
        let mut weights = Vec::with_capacity(x.len() * edges.len());
        for pair in edges.windows(2) {
            let h = pair[1] - pair[0];
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(pair[0] + xi * h);
                weights.push(wi * h);
            }
        }
        (nodes, weights)
    }

    /// 1-D nodes and weights on `[0, 1]` with `2^level` equal panels.
    fn unit_rule(&self, level: usize) -> (Vec<f64>, Vec<f64>) {
        let panels = 1usize << level;
        let edges: Vec<f64> = (0..=panels).map(|p| p as f64 / panels as f64).collect();
        self.composite(&edges)
    }

    /// Like [`QuadratureSpec::unit_rule`], with the two end panels split
    /// geometrically (ratio 1/2) into `20 + 5·level` layers each, so boundary
    /// layers down to about `2^-(20 + 5·level)` of a panel are resolved.
    fn graded_rule(&self, level: usize) -> (Vec<f64>, Vec<f64>) {
        let panels = 1usize << level;
        let h = 1.0 / panels as f64;
        let layers = 20 + 5 * level as i32;
        let mut edges = vec![0.0];
        edges.extend((0..layers).rev().map(|k| h * 0.5f64.powi(k + 1)));
        edges.extend((1..panels).map(|p| p as f64 * h));
        edges.extend((0..layers).map(|k| 1.0 - h * 0.5f64.powi(k + 1)));
        edges.push(1.0);
        self.composite(&edges)
    }
}

/// One lattice cell: its area and the corner values
/// `[f(x0,y0), f(x1,y0), f(x0,y1), f(x1,y1)]`.
#[derive(Debug, Clone, Copy)]
pub struct BilinearCell {
    pub area: f64,
    pub corners: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Absolute difference between the last two refinement levels.
    pub error_estimate: f64,
    pub refinements: usize,
}

/// Integrates `g(f(x, y))` over the union of `cells`, with `f` bilinear in each.
pub fn integrate_cells<G>(cells: &[BilinearCell], spec: &QuadratureSpec, g: G) -> Result<Integral>
where
    G: Fn(f64) -> f64,
{
    spec.validate()?;
    let g_zero = g(0.0);
    refine(spec, |level| {
        let (nodes, weights) = spec.unit_rule(level);
        let mut total = 0.0;
        for cell in cells {
            if g_zero == 0.0 && cell.corners == [0.0; 4] {
                continue;
            }
            let [f00, f10, f01, f11] = cell.corners;
            let mut sum = 0.0;
            for (y, wy) in nodes.iter().zip(&weights) {
                let lo = f00 + (f01 - f00) * y;
                let hi = f10 + (f11 - f10) * y;
                let mut row = 0.0;
                for (x, wx) in nodes.iter().zip(&weights) {
                    row += wx * g(lo + (hi - lo) * x);
                }
                sum += wy * row;
            }
            total += cell.area * sum;
        }
        total
    })
}

/// Like [`integrate_cells`], but integrates along `x` in closed form through
/// an antiderivative `big_g` of `g`; only the `y` axis is refined.
///
/// `f` is linear in `x` on every line of constant `y`, so the inner integral
/// is `(G(hi) − G(lo))/(hi − lo)`. This handles integrands with a sharp
/// feature near a zero of `f` far better than a tensor rule.
pub fn integrate_cells_inner_exact<G, A>(
    cells: &[BilinearCell],
    spec: &QuadratureSpec,
    g: G,
    big_g: A,
) -> Result<Integral>
where
    G: Fn(f64) -> f64,
    A: Fn(f64) -> f64,
{
    spec.validate()?;
    let g_zero = g(0.0);
    let (xs, xw) = gauss_legendre_unit(spec.nodes_per_axis);
    let line = |lo: f64, hi: f64| {
        let spread = (hi - lo).abs();
        if spread > 1e-3 * lo.abs().max(hi.abs()) {
            (big_g(hi) - big_g(lo)) / (hi - lo)
        } else {
            // nearly constant along the line: the tensor rule is exact to high order
            xs.iter().zip(&xw).map(|(x, w)| w * g(lo + (hi - lo) * x)).sum()
        }
    };
    refine(spec, |level| {
        let (nodes, weights) = spec.graded_rule(level);
        let mut total = 0.0;
        for cell in cells {
            if g_zero == 0.0 && cell.corners == [0.0; 4] {
                continue;
            }
            let [f00, f10, f01, f11] = cell.corners;
            let sum: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(y, wy)| wy * line(f00 + (f01 - f00) * y, f10 + (f11 - f10) * y))
                .sum();
            total += cell.area * sum;
        }
        total
    })
}

/// Doubles the panel count until two successive levels agree.
fn refine(spec: &QuadratureSpec, level_value: impl Fn(usize) -> f64) -> Result<Integral> {
    let mut previous = level_value(0);
    let mut last_change = f64::INFINITY;
    for level in 1..=MAX_REFINEMENTS {
        let current = level_value(level);
        let change = (current - previous).abs();
        if change <= spec.tolerance * current.abs() || change == 0.0 {
            return Ok(Integral {
                value: current,
                error_estimate: change,
                refinements: level,
            });
        }
        last_change = change / current.abs().max(f64::MIN_POSITIVE);
        previous = current;
    }
    Err(Error::QuadratureNonConvergence {
        relative_change: last_change,
        refinements: MAX_REFINEMENTS,
        tolerance: spec.tolerance,
    })
}
