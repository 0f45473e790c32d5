//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its PASS/FAIL line regardless of output capture.

use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wssus_capacity::asymptotics::{
    default_ratio_ladder, lb_ratio_analysis, schur_order_check, taylor_coefficient, Ordering,
};
use wssus_capacity::scenario::{run_sweep, uwb_gain_report, Resolved, Scenario, SweepResult};
use wssus_capacity::spatial::hadamard_det_inequality;
use wssus_capacity::special::golden_section_max;
use wssus_capacity::upper_bound::{snr_threshold_db, upper_bound_u1};
use wssus_capacity::{CorrelationMatrix, GridParams, LinkBudget, QuadratureSpec, ScatteringFunction, SpatialSpectrum};

const THRESHOLD_DB: f64 = 141.0;
const THRESHOLD_TOL_DB: f64 = 1.0;
const PENALTY_REL_TOL: f64 = 1e-9;
const GAP_AT_1E13: f64 = 0.01;
const RATIO_TARGET: f64 = 0.998;
const RATIO_TOL: f64 = 0.003;
const DET_REL_TOL: f64 = 1e-9;
const ORDERING_HALF_WIDTHS: f64 = 3.0;
const UWB_GAIN_CAP: f64 = 0.07;
const UWB_HALF_WIDTHS: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fig1_parts() -> (ScatteringFunction, GridParams, SpatialSpectrum, LinkBudget) {
    let sf = ScatteringFunction::brick(50.0, 5e-6).unwrap();
    let grid = GridParams::matched(&sf, 1.25).unwrap();
    (sf, grid, SpatialSpectrum::uncorrelated(3, 3), LinkBudget::new(1.26e8, 1.0).unwrap())
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo.log10() + (hi.log10() - lo.log10()) * i as f64 / (n - 1) as f64))
        .collect()
}

fn sufficient_condition_threshold() -> Outcome {
    let db = snr_threshold_db(1e-2, 1.25, 16.0, 1.0);
    outcome(
        (db - THRESHOLD_DB).abs() <= THRESHOLD_TOL_DB,
        format!("threshold {db:.3} dB, target {THRESHOLD_DB} ± {THRESHOLD_TOL_DB} dB"),
    )
}

fn brick_penalty_equivalence() -> Outcome {
    let q = QuadratureSpec::default();
    let (nu0, tau0) = (50.0, 5e-6);
    let spread = 4.0 * nu0 * tau0;
    let flat = ScatteringFunction::sampled(vec![-nu0, nu0], vec![-tau0, tau0], vec![1.0; 4]).unwrap();
    let mut worst = 0.0f64;
    for k in -3..=6 {
        let c = 10f64.powi(k);
        let closed = spread * (1.0 + c / spread).ln();
        let quad = flat.log_penalty_integral(c, &q).unwrap();
        worst = worst.max(((quad - closed) / closed).abs());
    }
    outcome(
        worst <= PENALTY_REL_TOL,
        format!("max relative error {worst:.2e} over c = 1e-3..1e6, tolerance {PENALTY_REL_TOL:.0e}"),
    )
}

fn random_grid(rng: &mut ChaCha8Rng, nu0: f64, tau0: f64) -> ScatteringFunction {
    let axis = |rng: &mut ChaCha8Rng, half: f64| {
        let n = rng.random_range(2..=7);
        let mut inner: Vec<f64> = (0..n - 2).map(|_| rng.random_range(-half..half)).collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        let mut out = vec![-half];
        out.extend(inner);
        out.push(half);
        out
    };
    let doppler = axis(rng, nu0);
    let delay = axis(rng, tau0);
    loop {
        let values: Vec<f64> = (0..doppler.len() * delay.len())
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
            .collect();
        if values.iter().any(|&v| v > 0.0) {
            return ScatteringFunction::sampled(doppler.clone(), delay.clone(), values).unwrap();
        }
    }
}

fn worst_case_dominance() -> Outcome {
    let (brick, grid, spec, lb) = fig1_parts();
    let q = QuadratureSpec::default();
    let bandwidths = log_points(1e6, 1e13, 20);
    let reference: Vec<f64> = bandwidths
        .iter()
        .map(|&b| upper_bound_u1(&brick, &grid, &spec, &lb, b, &q).unwrap().rate)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut violations, mut checks, mut min_margin) = (0, 0, f64::INFINITY);
    for _ in 0..200 {
        let sf = random_grid(&mut rng, 50.0, 5e-6);
        assert!((sf.spread() - brick.spread()).abs() < 1e-15);
        for (&b, &u_brick) in bandwidths.iter().zip(&reference) {
            let u = upper_bound_u1(&sf, &grid, &spec, &lb, b, &q).unwrap().rate;
            checks += 1;
            let margin = (u - u_brick) / u_brick;
            min_margin = min_margin.min(margin);
            if u < u_brick {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {checks} checks, smallest relative margin {min_margin:.3e}"),
    )
}

fn bound_ordering(sweeps: &[(Resolved, SweepResult)]) -> Outcome {
    let (mut violations, mut checks, mut worst) = (0, 0, f64::NEG_INFINITY);
    for (_, sweep) in sweeps {
        for row in &sweep.rows {
            for (_, l1) in &row.l1 {
                let hw = l1.diagnostics.mc_half_width.unwrap_or(0.0);
                checks += 1;
                // excess of L1 over U1 in half-widths
                let excess = (l1.rate - row.u1.rate) / hw.max(f64::MIN_POSITIVE);
                worst = worst.max(excess);
                if row.u1.rate < l1.rate - ORDERING_HALF_WIDTHS * hw {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in {checks} (preset, B, Q) checks, largest (L1 - U1)/hw = {worst:.2}"),
    )
}

fn asymptotic_tightness() -> Outcome {
    let (sf, grid, spec, lb) = fig1_parts();
    let q = QuadratureSpec::default();
    let c1 = taylor_coefficient(&sf, &grid, &spec, &lb, &q).unwrap().c1;
    let gaps: Vec<f64> = (9..=13)
        .map(|k| {
            let b = 10f64.powi(k);
            (b * upper_bound_u1(&sf, &grid, &spec, &lb, b, &q).unwrap().rate / c1 - 1.0).abs()
        })
        .collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = gaps[gaps.len() - 1];
    outcome(
        shrinking && last < GAP_AT_1E13,
        format!("gaps at 1e9..1e13 Hz: {:?}; at 1e13 {last:.4e} (< {GAP_AT_1E13}), shrinking = {shrinking}", gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>()),
    )
}

fn ratio_remark() -> Outcome {
    let q = QuadratureSpec::default();
    let (sf, grid, spec, lb) = fig1_parts();
    let kappa = sf.kappa(&q).unwrap();
    let fig1 = lb_ratio_analysis(&sf, &grid, &spec, &lb, &default_ratio_ladder(kappa, &lb), &q).unwrap();
    let near = (fig1.limit - RATIO_TARGET).abs() <= RATIO_TOL;

    let limits: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&spread| {
            let sf = ScatteringFunction::brick(50.0, spread / 200.0).unwrap();
            let grid = GridParams::matched(&sf, 1.25).unwrap();
            let kappa = sf.kappa(&q).unwrap();
            lb_ratio_analysis(&sf, &grid, &spec, &lb, &default_ratio_ladder(kappa, &lb), &q)
                .unwrap()
                .limit
        })
        .collect();
    let trend = limits.windows(2).all(|w| w[1] > w[0]) && limits.iter().all(|&l| l <= 1.0);
    outcome(
        near && trend && !fig1.flagged,
        format!(
            "fig1 limit {:.5} (target {RATIO_TARGET} ± {RATIO_TOL}); limits for spread 1e-3, 1e-4, 1e-5: {limits:.6?}",
            fig1.limit
        ),
    )
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CorrelationMatrix {
    let rank = rng.random_range(1..=n);
    let g = DMatrix::from_fn(n, rank, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut m = &g * g.adjoint();
    for i in 0..n {
        if rng.random_bool(0.15) {
            m.row_mut(i).fill(Complex64::new(0.0, 0.0));
            m.column_mut(i).fill(Complex64::new(0.0, 0.0));
        }
    }
    CorrelationMatrix::new((&m + m.adjoint()).unscale(2.0)).unwrap()
}

fn determinant_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut violations, mut zero_diag) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=8);
        let a = random_psd(&mut rng, n);
        let b = random_psd(&mut rng, n);
        if (0..n).any(|i| a.matrix()[(i, i)].re == 0.0 || b.matrix()[(i, i)].re == 0.0) {
            zero_diag += 1;
        }
        let d = hadamard_det_inequality(&a, &b).unwrap();
        let deficit = (d.diagonal_side - d.hadamard_side) / d.diagonal_side.abs();
        worst = worst.max(deficit);
        if deficit > DET_REL_TOL {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 10000 pairs ({zero_diag} with a zero diagonal), worst relative deficit {worst:.2e}"),
    )
}

/// A random spectrum summing to `n`, and a doubly-stochastic average of it.
fn majorizing_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3) + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let a: Vec<f64> = raw.iter().map(|x| x * n as f64 / total).collect();
    let weights: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
    let wsum: f64 = weights.iter().sum();
    let mut b = vec![0.0; n];
    for w in weights {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            b[i] += w / wsum * a[p];
        }
    }
    (a, b)
}

fn schur_and_beamforming() -> Outcome {
    let (sf, grid, _, lb) = fig1_parts();
    let q = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    for i in 0..1000 {
        let n = rng.random_range(2..=6);
        let (a, b) = majorizing_pair(&mut rng, n);
        let other = vec![1.0; rng.random_range(1..=4)];
        let (sa, sb) = if i % 2 == 0 {
            (
                SpatialSpectrum::normalized(a, other.clone()).unwrap(),
                SpatialSpectrum::normalized(b, other).unwrap(),
            )
        } else {
            (
                SpatialSpectrum::normalized(other.clone(), a).unwrap(),
                SpatialSpectrum::normalized(other, b).unwrap(),
            )
        };
        let report = schur_order_check(&sa, &sb, &sf, &grid, &lb, &q).unwrap();
        if report.ordering != Ordering::AMajorizesB || !report.consistent {
            failures += 1;
        }
    }

    let mut changed = 0;
    let bandwidths = log_points(1e6, 1e13, 8);
    let rx = vec![2.6, 0.3, 0.1];
    for _ in 0..50 {
        let lmax: f64 = rng.random_range(1.2..2.0);
        let rest = 3.0 - lmax;
        let x = rng.random_range(0.0..rest.min(lmax));
        let y = rest - x;
        if y > lmax {
            continue;
        }
        let base = SpatialSpectrum::new(vec![lmax, rest / 2.0, rest / 2.0], rx.clone()).unwrap();
        let moved = SpatialSpectrum::new(vec![lmax, x, y], rx.clone()).unwrap();
        let c1 = |s: &SpatialSpectrum| taylor_coefficient(&sf, &grid, s, &lb, &q).unwrap().c1;
        if c1(&base) != c1(&moved) {
            changed += 1;
        }
        for &bw in &bandwidths {
            let u = |s: &SpatialSpectrum| upper_bound_u1(&sf, &grid, s, &lb, bw, &q).unwrap().rate;
            if u(&base) != u(&moved) {
                changed += 1;
            }
        }
    }
    outcome(
        failures == 0 && changed == 0,
        format!("{failures} Schur-order failures in 1000 pairs; {changed} changes of U1 or c1 under sub-maximal transmit perturbations"),
    )
}

fn argmax_u1(r: &Resolved, sweep: &SweepResult) -> (f64, f64) {
    let rows = &sweep.rows;
    let i = (0..rows.len()).max_by(|&a, &b| rows[a].u1.rate.total_cmp(&rows[b].u1.rate)).unwrap();
    let lo = rows[i.saturating_sub(1)].bandwidth_hz.log10();
    let hi = rows[(i + 1).min(rows.len() - 1)].bandwidth_hz.log10();
    let (x, fx, _) = golden_section_max(
        |lb10| upper_bound_u1(&r.sf, &r.grid, &r.spec, &r.lb, 10f64.powf(lb10), &r.opts.quadrature).unwrap().rate,
        lo,
        hi,
        1e-6,
    );
    (10f64.powf(x), fx)
}

fn figure_properties(sweeps: &[(Resolved, SweepResult)]) -> Outcome {
    let (r1, s1) = &sweeps[0];
    let (r2, s2) = &sweeps[1];
    let (_, s3) = &sweeps[2];
    let (b1, m1) = argmax_u1(r1, s1);
    let (b2, m2) = argmax_u1(r2, s2);
    let shift = b2 > b1 && m2 < m1;

    // transmit correlation at large bandwidth, where the estimates are tight
    let mut fig3_wins = true;
    let mut compared = Vec::new();
    for (row1, row3) in s1.rows.iter().zip(&s3.rows) {
        let b = row1.bandwidth_hz;
        if !(1e10..=3.1e10).contains(&b) {
            continue;
        }
        let (l1, l3) = (row1.l1_for(1).unwrap(), row3.l1_for(1).unwrap());
        let margin = l1.diagnostics.mc_half_width.unwrap_or(0.0) + l3.diagnostics.mc_half_width.unwrap_or(0.0);
        fig3_wins &= l3.rate - l1.rate > margin;
        compared.push(format!("{b:.2e}: {:+.3}%", 100.0 * (l3.rate - l1.rate) / l1.rate));
    }

    let argmax_q1 = s1
        .rows
        .iter()
        .max_by(|a, b| a.l1_for(1).unwrap().rate.total_cmp(&b.l1_for(1).unwrap().rate))
        .unwrap()
        .bandwidth_hz;
    let mut single_beats_full = true;
    for row in s1.rows.iter().filter(|r| r.bandwidth_hz > argmax_q1) {
        let (one, three) = (row.l1_for(1).unwrap(), row.l1_for(3).unwrap());
        let hw = one.diagnostics.mc_half_width.unwrap_or(0.0) + three.diagnostics.mc_half_width.unwrap_or(0.0);
        single_beats_full &= one.rate >= three.rate - ORDERING_HALF_WIDTHS * hw;
    }
    outcome(
        shift && fig3_wins && !compared.is_empty() && single_beats_full,
        format!(
            "U1 argmax {b1:.3e} -> {b2:.3e} Hz, peak {m1:.4e} -> {m2:.4e}; fig3 vs fig1 L1(Q=1) [{}]; fig1 L1(1) >= L1(3) above {argmax_q1:.2e} Hz: {single_beats_full}",
            compared.join(", ")
        ),
    )
}

fn uwb_remark() -> Outcome {
    let r = Scenario::preset("fig1").unwrap().resolve(None).unwrap();
    let g = uwb_gain_report(&r, 7e9).unwrap();
    let limit = UWB_GAIN_CAP + UWB_HALF_WIDTHS * g.gain_half_width;
    outcome(
        g.gain <= limit,
        format!(
            "gain {:+.4} ± {:.4} (Q = {:?}), limit {limit:.4}; ceiling (U1 - L1(1))/L1(1) = {:.4}",
            g.gain, g.gain_half_width, g.best_multi_q, g.ceiling_gain
        ),
    )
}

fn report(results: &mut Vec<bool>, id: u32, name: &str, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let o = f();
    println!(
        "{} criterion {id:>2} {name}: {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    results.push(o.pass);
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results = Vec::new();
    report(&mut results, 1, "sufficient-condition threshold", sufficient_condition_threshold);
    report(&mut results, 2, "brick penalty equivalence", brick_penalty_equivalence);
    report(&mut results, 3, "worst-case dominance", worst_case_dominance);

    let start = Instant::now();
    let sweeps: Vec<(Resolved, SweepResult)> = ["fig1", "fig2", "fig3"]
        .iter()
        .map(|name| {
            let r = Scenario::preset(name).unwrap().resolve(None).unwrap();
            let s = run_sweep(&r).unwrap();
            (r, s)
        })
        .collect();
    println!("     figure sweeps evaluated [{:.1} s]", start.elapsed().as_secs_f64());
    report(&mut results, 4, "bound ordering", || bound_ordering(&sweeps));
    report(&mut results, 5, "asymptotic tightness", asymptotic_tightness);
    report(&mut results, 6, "ratio remark", ratio_remark);
    report(&mut results, 7, "determinant inequality", determinant_inequality);
    report(&mut results, 8, "Schur and beamforming", schur_and_beamforming);
    report(&mut results, 9, "figure properties", || figure_properties(&sweeps));
    report(&mut results, 10, "UWB gain", uwb_remark);

    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
