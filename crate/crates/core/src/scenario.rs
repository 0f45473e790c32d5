//! JSON scenario configuration, figure presets, bandwidth sweeps and the
//! reports built on top of them.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    default_ratio_ladder, lb_ratio_analysis, taylor_coefficient, u1_ratio_analysis, LadderAnalysis, TaylorResult,
};
use crate::channel_model::{GridParams, ScatteringFunction, DEFAULT_TF_PRODUCT};
use crate::error::{Error, Result};
use crate::lower_bound::{lb_approx, lower_bound_l1_each, L1Options, McSpec, PhaseModel};
use crate::quadrature::QuadratureSpec;
use crate::spatial::{normalized_eigenvalues, CorrelationMatrix, SpatialSpectrum};
use crate::upper_bound::{
    coherent_jensen_bound, snr_threshold_db, sufficient_condition, upper_bound_u1, BoundValue, LinkBudget,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScatteringSpec {
    Brick { max_doppler_hz: f64, max_delay_s: f64 },
    /// Doppler-major values on a rectangular lattice.
    Grid { doppler_hz: Vec<f64>, delay_s: Vec<f64>, values: Vec<f64> },
    /// CSV with header `nu_hz,tau_s,value`; relative paths resolve against the config file.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Matched {
        #[serde(default = "default_tf")]
        tf: f64,
    },
    Explicit { time_s: f64, freq_hz: f64 },
}

fn default_tf() -> f64 {
    DEFAULT_TF_PRODUCT
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::Matched { tf: DEFAULT_TF_PRODUCT }
    }
}

/// One side of the spatial correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SideSpec {
    Eigenvalues { eigs: Vec<f64> },
    Matrix { re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>> },
    Uncorrelated { antennas: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSpec {
    pub tx: SideSpec,
    pub rx: SideSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    /// Receive power over noise spectral density, 1/s.
    pub power: f64,
    #[serde(default = "default_papr")]
    pub papr: f64,
}

fn default_papr() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub b_min: f64,
    pub b_max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            b_min: 1e6,
            b_max: 1e13,
            points: 40,
            spacing: Spacing::Log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Converts a rate in nats/s.
    pub fn convert(&self, nats: f64) -> f64 {
        match self {
            Self::Nats => nats,
            Self::Bits => nats / std::f64::consts::LN_2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Nats => "nats/s",
            Self::Bits => "bits/s",
        }
    }
}

fn default_exact_cap() -> usize {
    crate::lower_bound::DEFAULT_EXACT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub scattering: ScatteringSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub spatial: SpatialSpec,
    pub link: LinkSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Active transmit eigenmode counts; defaults to `1..=M_T`.
    #[serde(default)]
    pub q_range: Option<Vec<usize>>,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub phase: PhaseModel,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
    #[serde(default)]
    pub units: Units,
}

/// Figure presets: `fig1`, `fig2`, `fig3`.
pub const PRESETS: [&str; 3] = ["fig1", "fig2", "fig3"];

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Brick channel, `ν₀ = 50 Hz`, `τ₀ = 5 µs`, `P = 1.26·10⁸ s⁻¹`, `β = 1`,
    /// three transmit and three receive antennas.
    pub fn preset(name: &str) -> Result<Self> {
        let (tx, rx) = match name {
            "fig1" => (vec![1.0; 3], vec![1.0; 3]),
            "fig2" => (vec![1.0; 3], vec![2.6, 0.3, 0.1]),
            "fig3" => (vec![1.7, 1.0, 0.3], vec![1.0; 3]),
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            name: Some(name.to_string()),
            scattering: ScatteringSpec::Brick {
                max_doppler_hz: 50.0,
                max_delay_s: 5e-6,
            },
            grid: GridSpec::default(),
            spatial: SpatialSpec {
                tx: SideSpec::Eigenvalues { eigs: tx },
                rx: SideSpec::Eigenvalues { eigs: rx },
            },
            link: LinkSpec {
                power: 1.26e8,
                papr: 1.0,
            },
            sweep: SweepSpec::default(),
            q_range: None,
            mc: McSpec::default(),
            phase: PhaseModel::Continuous,
            quadrature: QuadratureSpec::default(),
            exact_cap: 512,
            units: Units::Nats,
        })
    }

    /// Validates and builds every component; relative CSV paths resolve against `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Resolved> {
        let sf = match &self.scattering {
            ScatteringSpec::Brick { max_doppler_hz, max_delay_s } => ScatteringFunction::brick(*max_doppler_hz, *max_delay_s),
            ScatteringSpec::Grid { doppler_hz, delay_s, values } => {
                ScatteringFunction::sampled(doppler_hz.clone(), delay_s.clone(), values.clone())
            }
            ScatteringSpec::Csv { path } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                ScatteringFunction::from_csv(&full)
            }
        }
        .map_err(scenario_error)?;
        let grid = match self.grid {
            GridSpec::Matched { tf } => GridParams::matched(&sf, tf),
            GridSpec::Explicit { time_s, freq_hz } => GridParams::new(time_s, freq_hz, &sf),
        }
        .map_err(scenario_error)?;

        let mut warnings = Vec::new();
        let mut side = |spec: &SideSpec, name: &str| -> Result<Vec<f64>> {
            match spec {
                SideSpec::Eigenvalues { eigs } => {
                    let n = eigs.len() as f64;
                    let sum: f64 = eigs.iter().sum();
                    if (sum - n).abs() > crate::spatial::TRACE_TOL * n {
                        warnings.push(format!("{name} eigenvalues sum {sum} rescaled to {n}"));
                    }
                    Ok(eigs.clone())
                }
                SideSpec::Matrix { re, im } => {
                    let m = CorrelationMatrix::from_parts(re, im.as_deref())?;
                    let (eigs, warning) = normalized_eigenvalues(&m, name)?;
                    warnings.extend(warning);
                    Ok(eigs)
                }
                SideSpec::Uncorrelated { antennas } => Ok(vec![1.0; *antennas]),
            }
        };
        let tx = side(&self.spatial.tx, "transmit").map_err(scenario_error)?;
        let rx = side(&self.spatial.rx, "receive").map_err(scenario_error)?;
        let spec = SpatialSpectrum::normalized(tx, rx).map_err(scenario_error)?;
        let lb = LinkBudget::new(self.link.power, self.link.papr).map_err(scenario_error)?;

        let q_range = self.q_range.clone().unwrap_or_else(|| (1..=spec.num_tx()).collect());
        if q_range.is_empty() || q_range.iter().any(|&q| q == 0 || q > spec.num_tx()) {
            return Err(Error::InvalidScenario(format!(
                "q_range entries must lie in [1, {}], got {q_range:?}",
                spec.num_tx()
            )));
        }
        self.mc.validate().map_err(scenario_error)?;
        self.quadrature.validate().map_err(scenario_error)?;
        if self.exact_cap == 0 {
            return Err(Error::InvalidScenario("exact_cap must be positive".into()));
        }
        let bandwidths = bandwidth_points(&self.sweep, &grid)?;

        Ok(Resolved {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            sf,
            grid,
            spec,
            lb,
            bandwidths,
            q_range,
            opts: L1Options {
                mc: self.mc,
                phase: self.phase,
                exact_cap: self.exact_cap,
                quadrature: self.quadrature,
                ..L1Options::default()
            },
            units: self.units,
            warnings,
        })
    }
}

/// Input problems surface as scenario errors; numerical failures pass through.
fn scenario_error(e: Error) -> Error {
    if e.is_numerical() {
        e
    } else {
        Error::InvalidScenario(e.to_string())
    }
}

fn bandwidth_points(sweep: &SweepSpec, grid: &GridParams) -> Result<Vec<f64>> {
    let SweepSpec { b_min, b_max, points, spacing } = *sweep;
    if points < 2 {
        return Err(Error::InvalidScenario(format!("sweep needs at least 2 points, got {points}")));
    }
    if !(b_min.is_finite() && b_max.is_finite()) || !(b_max > b_min) {
        return Err(Error::InvalidScenario(format!(
            "sweep needs b_min < b_max, got [{b_min}, {b_max}]"
        )));
    }
    if b_min < grid.freq_hz() * (1.0 - 1e-12) {
        return Err(Error::InvalidScenario(format!(
            "b_min = {b_min} Hz is below the tone spacing F = {} Hz",
            grid.freq_hz()
        )));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 / last;
            match spacing {
                Spacing::Log => 10f64.powf(b_min.log10() + t * (b_max.log10() - b_min.log10())),
                Spacing::Linear => b_min + t * (b_max - b_min),
            }
        })
        .collect())
}

/// A validated scenario, ready to evaluate.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub sf: ScatteringFunction,
    pub grid: GridParams,
    pub spec: SpatialSpectrum,
    pub lb: LinkBudget,
    pub bandwidths: Vec<f64>,
    pub q_range: Vec<usize>,
    pub opts: L1Options,
    pub units: Units,
    pub warnings: Vec<String>,
}

impl Resolved {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.opts.mc.seed = seed;
        self
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }
}

/// All curves at one bandwidth, in nats/s.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub bandwidth_hz: f64,
    pub u1: BoundValue,
    pub ucoh: f64,
    /// `(Q̃, L₁)` for every `Q̃` in the scenario's range.
    pub l1: Vec<(usize, BoundValue)>,
    /// `lb_approx` for `Q̃ = 1..=M_T`.
    pub lb_approx: Vec<BoundValue>,
    pub condition_ok: bool,
}

impl SweepRow {
    /// The best lower bound at this bandwidth.
    pub fn best_l1(&self) -> &BoundValue {
        &self
            .l1
            .iter()
            .max_by(|a, b| a.1.rate.total_cmp(&b.1.rate))
            .expect("q_range is nonempty")
            .1
    }

    pub fn l1_for(&self, q: usize) -> Option<&BoundValue> {
        self.l1.iter().find(|(qq, _)| *qq == q).map(|(_, v)| v)
    }

    /// Largest Monte Carlo half-width among the lower-bound curves.
    pub fn mc_half_width(&self) -> f64 {
        self.l1
            .iter()
            .filter_map(|(_, v)| v.diagnostics.mc_half_width)
            .fold(0.0, f64::max)
    }
}

/// Evaluates every curve at one bandwidth.
pub fn evaluate_point(r: &Resolved, bandwidth_hz: f64) -> Result<SweepRow> {
    let u1 = upper_bound_u1(&r.sf, &r.grid, &r.spec, &r.lb, bandwidth_hz, &r.opts.quadrature)?;
    let l1 = lower_bound_l1_each(&r.sf, &r.grid, &r.spec, &r.lb, bandwidth_hz, &r.q_range, &r.opts)?;
    let lb_approx = (1..=r.spec.num_tx())
        .map(|q| lb_approx(&r.sf, &r.grid, &r.spec, &r.lb, bandwidth_hz, q, &r.opts.quadrature))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepRow {
        bandwidth_hz,
        u1,
        ucoh: coherent_jensen_bound(&r.spec, &r.lb, &r.grid, bandwidth_hz),
        l1: r.q_range.iter().copied().zip(l1).collect(),
        lb_approx,
        condition_ok: sufficient_condition(r.sf.spread(), &r.grid, &r.spec, &r.lb, bandwidth_hz).holds,
    })
}

/// Peak of one curve over the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub curve: String,
    pub argmax_hz: f64,
    pub max: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub name: String,
    pub rows: Vec<SweepRow>,
    pub num_tx: usize,
    pub units: Units,
}

/// Evaluates the sweep; points run in parallel and come back in bandwidth order.
pub fn run_sweep(r: &Resolved) -> Result<SweepResult> {
    let rows = r
        .bandwidths
        .par_iter()
        .map(|&b| evaluate_point(r, b))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        name: r.name.clone(),
        rows,
        num_tx: r.spec.num_tx(),
        units: r.units,
    })
}

impl SweepResult {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["B_hz".to_string(), "U1".into(), "Ucoh".into()];
        h.extend((1..=self.num_tx).map(|q| format!("L1_q{q}")));
        h.extend((1..=self.num_tx).map(|q| format!("LBapprox_q{q}")));
        h.extend(["alpha_star", "gamma_star", "condition_ok", "mc_halfwidth"].map(String::from));
        h
    }

    /// Named curves as `(name, values per row)`, in output units.
    pub fn curves(&self) -> Vec<(String, Vec<Option<f64>>)> {
        let u = self.units;
        let mut out = vec![
            ("U1".to_string(), self.rows.iter().map(|r| Some(u.convert(r.u1.rate))).collect()),
            ("Ucoh".to_string(), self.rows.iter().map(|r| Some(u.convert(r.ucoh))).collect()),
        ];
        for q in 1..=self.num_tx {
            out.push((
                format!("L1_q{q}"),
                self.rows.iter().map(|r| r.l1_for(q).map(|v| u.convert(v.rate))).collect(),
            ));
        }
        for q in 1..=self.num_tx {
            out.push((
                format!("LBapprox_q{q}"),
                self.rows.iter().map(|r| Some(u.convert(r.lb_approx[q - 1].rate))).collect(),
            ));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(self.header()).map_err(io)?;
        let curves = self.curves();
        for (i, row) in self.rows.iter().enumerate() {
            let mut record = vec![row.bandwidth_hz.to_string()];
            record.extend(curves.iter().map(|(_, v)| v[i].map_or(String::new(), |x| x.to_string())));
            record.push(row.u1.alpha_star.map_or(String::new(), |a| a.to_string()));
            record.push(row.best_l1().gamma_star.map_or(String::new(), |g| g.to_string()));
            record.push(row.condition_ok.to_string());
            record.push(self.units.convert(row.mc_half_width()).to_string());
            w.write_record(&record).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Argmax bandwidth and peak value of every curve, over the sweep points.
    pub fn summary(&self) -> Vec<CurveSummary> {
        self.curves()
            .into_iter()
            .filter_map(|(name, values)| {
                let (i, max) = values
                    .iter()
                    .enumerate()
                    .filter_map(|(i, v)| v.map(|v| (i, v)))
                    .max_by(|a, b| a.1.total_cmp(&b.1))?;
                Some(CurveSummary {
                    curve: name,
                    argmax_hz: self.rows[i].bandwidth_hz,
                    max,
                    units: self.units.label().to_string(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub bandwidth_hz: f64,
    pub spread: f64,
    pub kappa: f64,
    pub tf: f64,
    /// `Δ_H ≤ β/(3TF)`
    pub spread_condition: bool,
    /// Threshold on `P/B` with the actual `λ_max σ_max`.
    pub snr_threshold_db: f64,
    /// Threshold with `λ_max σ_max` replaced by its bound `M_T M_R`.
    pub snr_threshold_db_antenna_bound: f64,
    pub snr_db: f64,
    pub snr_condition: bool,
    pub sufficient_condition: bool,
    pub taylor: TaylorResult,
    pub warnings: Vec<String>,
}

pub fn check_conditions(r: &Resolved, bandwidth_hz: f64) -> Result<ConditionReport> {
    let cond = sufficient_condition(r.sf.spread(), &r.grid, &r.spec, &r.lb, bandwidth_hz);
    let taylor = taylor_coefficient(&r.sf, &r.grid, &r.spec, &r.lb, &r.opts.quadrature)?;
    let antennas = (r.spec.num_tx() * r.spec.num_rx()) as f64;
    Ok(ConditionReport {
        bandwidth_hz,
        spread: r.sf.spread(),
        kappa: taylor.kappa,
        tf: r.grid.tf(),
        spread_condition: cond.spread_ok,
        snr_threshold_db: cond.threshold_db,
        snr_threshold_db_antenna_bound: snr_threshold_db(r.sf.spread(), r.grid.tf(), antennas, r.lb.papr()),
        snr_db: cond.snr_db,
        snr_condition: cond.snr_ok,
        sufficient_condition: cond.holds,
        taylor,
        warnings: r.warnings.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub taylor: TaylorResult,
    pub lb_ratio: LadderAnalysis,
    pub u1_ratio: LadderAnalysis,
}

/// Taylor coefficient and both ratio ladders, on the default ladder unless one is given.
pub fn asymptotics_report(r: &Resolved, ladder: Option<&[f64]>) -> Result<AsymptoticsReport> {
    let taylor = taylor_coefficient(&r.sf, &r.grid, &r.spec, &r.lb, &r.opts.quadrature)?;
    let default = default_ratio_ladder(taylor.kappa, &r.lb);
    let ladder = ladder.unwrap_or(&default);
    Ok(AsymptoticsReport {
        taylor,
        lb_ratio: lb_ratio_analysis(&r.sf, &r.grid, &r.spec, &r.lb, ladder, &r.opts.quadrature)?,
        u1_ratio: u1_ratio_analysis(&r.sf, &r.grid, &r.spec, &r.lb, ladder, &r.opts.quadrature)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UwbGain {
    pub bandwidth_hz: f64,
    /// `(Q̃, L₁, half-width)` in nats/s.
    pub l1: Vec<(usize, f64, f64)>,
    pub u1: f64,
    /// `Q̃ > 1` with the largest `L₁`, if any was evaluated.
    pub best_multi_q: Option<usize>,
    /// `(max_{Q̃>1} L₁ − L₁(Q̃=1))/L₁(Q̃=1)`; zero when no `Q̃ > 1` is in range.
    pub gain: f64,
    pub gain_half_width: f64,
    /// `(U₁ − L₁(Q̃=1))/L₁(Q̃=1)`: no input can gain more over single-eigenmode signalling.
    pub ceiling_gain: f64,
    pub ceiling_half_width: f64,
}

/// Relative gain of multi-eigenmode signalling over `Q̃ = 1` at one bandwidth.
pub fn uwb_gain_report(r: &Resolved, bandwidth_hz: f64) -> Result<UwbGain> {
    let (lo, hi) = (r.bandwidths[0], r.bandwidths[r.bandwidths.len() - 1]);
    if !(bandwidth_hz >= lo * (1.0 - 1e-12) && bandwidth_hz <= hi * (1.0 + 1e-12)) {
        return Err(Error::InvalidScenario(format!(
            "bandwidth {bandwidth_hz} Hz outside the sweep range [{lo}, {hi}]"
        )));
    }
    let mut qs = r.q_range.clone();
    if !qs.contains(&1) {
        qs.insert(0, 1);
    }
    let values = lower_bound_l1_each(&r.sf, &r.grid, &r.spec, &r.lb, bandwidth_hz, &qs, &r.opts)?;
    let l1: Vec<(usize, f64, f64)> = qs
        .iter()
        .zip(&values)
        .map(|(&q, v)| (q, v.rate, v.diagnostics.mc_half_width.unwrap_or(0.0)))
        .collect();
    let (_, base, base_hw) = *l1.iter().find(|(q, _, _)| *q == 1).expect("inserted above");
    let u1 = upper_bound_u1(&r.sf, &r.grid, &r.spec, &r.lb, bandwidth_hz, &r.opts.quadrature)?.rate;

    let best = l1
        .iter()
        .filter(|(q, _, _)| *q > 1 && r.q_range.contains(q))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let (best_multi_q, gain, gain_half_width) = match best {
        Some(&(q, v, hw)) => {
            let g = (v - base) / base;
            // first-order propagation through the ratio
            let hw_g = (hw * hw + (v / base * base_hw).powi(2)).sqrt() / base.abs();
            (Some(q), g, hw_g)
        }
        None => (None, 0.0, 0.0),
    };
    Ok(UwbGain {
        bandwidth_hz,
        l1,
        u1,
        best_multi_q,
        gain,
        gain_half_width,
        ceiling_gain: (u1 - base) / base,
        ceiling_half_width: u1 / (base * base) * base_hw,
    })
}
