use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wssus_capacity::lower_bound::{
    coherent_mi_cm, gamma_grid_scan, lb_approx, lower_bound_l1_each, lower_bound_l1_q, toeplitz_penalty,
    CmInputSpec, FreqSpectralMatrix, L1Options, McSpec, PenaltyPath, PhaseModel,
};
use wssus_capacity::scenario::{Resolved, Scenario};
use wssus_capacity::{GridParams, LinkBudget, QuadratureSpec, ScatteringFunction, SpatialSpectrum};

fn fig1() -> Resolved {
    Scenario::preset("fig1").unwrap().resolve(None).unwrap()
}

fn light(outer: usize, inner: usize) -> L1Options {
    L1Options {
        mc: McSpec { outer, inner, seed: 11, confidence: 1.0 },
        exact_cap: 64,
        ..L1Options::default()
    }
}

fn assert_monotone_concave(fsm: &FreqSpectralMatrix, label: &str) {
    let cs: Vec<f64> = (0..=40).map(|i| 1e-3 * 10f64.powf(i as f64 / 5.0)).collect();
    let f = |c: f64| toeplitz_penalty(fsm, c).unwrap().value;
    for w in cs.windows(2) {
        assert!(f(w[1]) > f(w[0]), "{label}: not increasing at c = {}", w[1]);
        let mid = f(0.5 * (w[0] + w[1]));
        assert!(mid >= 0.5 * (f(w[0]) + f(w[1])) * (1.0 - 1e-12), "{label}: not concave near c = {}", w[0]);
    }
}

#[test]
fn penalty_is_monotone_and_concave_on_every_path() {
    let q = QuadratureSpec::default();
    let brick = ScatteringFunction::brick(50.0, 5e-6).unwrap();
    let grid = GridParams::matched(&brick, 1.25).unwrap();
    let exact = FreqSpectralMatrix::exact(&brick, &grid, 16, 64, &q).unwrap();
    assert_eq!(exact.path(), PenaltyPath::Exact);
    assert_monotone_concave(&exact, "brick exact");
    let circ = FreqSpectralMatrix::circulant(&brick, &grid, 16, &q).unwrap();
    assert_eq!(circ.path(), PenaltyPath::Circulant);
    assert_monotone_concave(&circ, "brick circulant");

    let sampled = ScatteringFunction::sampled(
        vec![-50.0, 0.0, 50.0],
        vec![-5e-6, 0.0, 5e-6],
        vec![0.2, 1.0, 0.3, 0.8, 2.0, 0.5, 0.1, 0.9, 0.4],
    )
    .unwrap();
    let grid = GridParams::matched(&sampled, 1.25).unwrap();
    let exact = FreqSpectralMatrix::exact(&sampled, &grid, 8, 64, &q).unwrap();
    assert!(!exact.fell_back());
    assert_monotone_concave(&exact, "sampled exact");
    assert_monotone_concave(&FreqSpectralMatrix::circulant(&sampled, &grid, 8, &q).unwrap(), "sampled circulant");
}

#[test]
fn estimate_does_not_depend_on_thread_count() {
    let spec = SpatialSpectrum::new(vec![1.5, 1.0, 0.5], vec![1.2, 0.8]).unwrap();
    let cm = CmInputSpec::new(3, 0.4, PhaseModel::Continuous, 3).unwrap();
    let mc = McSpec { outer: 400, inner: 32, seed: 5, confidence: 1.0 };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| coherent_mi_cm(&spec, &cm, 1.0, &mc).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}

#[test]
fn low_snr_rate_is_linear_in_energy() {
    let e = 1e-3;
    let mc = McSpec { outer: 4000, inner: 512, seed: 2, confidence: 1.0 };
    for (tx, rx) in [
        (vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]),
        (vec![2.0, 0.7, 0.3], vec![1.6, 0.4]),
    ] {
        let spec = SpatialSpectrum::new(tx.clone(), rx.clone()).unwrap();
        for q in 1..=tx.len() {
            let cm = CmInputSpec::new(q, e, PhaseModel::Continuous, tx.len()).unwrap();
            let est = coherent_mi_cm(&spec, &cm, 1.0, &mc).unwrap();
            let sum_l: f64 = tx[..q].iter().sum();
            let sum_l2: f64 = tx[..q].iter().map(|l| l * l).sum();
            let sum_s2: f64 = rx.iter().map(|s| s * s).sum();
            let m_r = rx.len() as f64;
            let linear = e * m_r * sum_l;
            let quadratic = -e * e * (sum_l * sum_l * sum_s2 + m_r * m_r * sum_l2) / 2.0;
            // averaging the other phases over `inner` draws undershoots by about I_tail/inner
            let inner_bias = e * m_r * (sum_l - tx[0]) / mc.inner as f64;
            let err = (est.value - linear).abs();
            assert!(
                err <= 3.0 * est.half_width + quadratic.abs() + inner_bias,
                "q = {q}: {} vs linear {linear} (hw {}, quadratic {quadratic})",
                est.value,
                est.half_width
            );
        }
    }
}

/// `E ln det(I + e Σ^{1/2} H Λ Hᴴ Σ^{1/2})` with its 95% half-width.
fn gaussian_input_rate(tx: &[f64], rx: &[f64], e: f64, draws: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (q, m) = (tx.len(), rx.len());
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let g = DMatrix::from_fn(m, q, |r, t| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * (0.5 * rx[r] * tx[t]).sqrt()
            });
            let k = DMatrix::identity(m, m) + (&g * g.adjoint()).scale(e);
            let chol = k.cholesky().expect("positive definite");
            chol.l().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum::<f64>()
        })
        .collect();
    let n = draws as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[test]
fn gaussian_input_dominates_constant_modulus() {
    let tx = vec![1.8, 0.9, 0.3];
    let rx = vec![1.5, 0.5];
    let spec = SpatialSpectrum::new(tx.clone(), rx.clone()).unwrap();
    let mc = McSpec { outer: 1000, inner: 128, seed: 8, confidence: 1.0 };
    for e in [0.05, 0.5, 3.0] {
        for q in 1..=3 {
            let cm = CmInputSpec::new(q, e, PhaseModel::Continuous, 3).unwrap();
            let est = coherent_mi_cm(&spec, &cm, 1.0, &mc).unwrap();
            let (gauss, gauss_hw) = gaussian_input_rate(&tx[..q], &rx, e, 20_000);
            assert!(
                est.value <= gauss + 3.0 * (est.half_width + gauss_hw),
                "e = {e}, q = {q}: {} above Gaussian {gauss}",
                est.value
            );
        }
    }
}

#[test]
fn golden_section_beats_gamma_grid() {
    let r = fig1();
    let lb = LinkBudget::new(r.lb.power(), 4.0).unwrap();
    let opts = light(600, 1);
    for b in [3e8, 1e10] {
        let scan = gamma_grid_scan(&r.sf, &r.grid, &r.spec, &lb, b, 1, 11, &opts).unwrap();
        let grid_max = scan.iter().map(|v| v.rate).fold(f64::NEG_INFINITY, f64::max);
        let best = lower_bound_l1_q(&r.sf, &r.grid, &r.spec, &lb, b, 1, &opts).unwrap();
        assert!(
            best.rate >= grid_max - 1e-4 * grid_max.abs(),
            "B = {b}: golden {} below grid {grid_max}",
            best.rate
        );
    }
}

#[test]
fn wideband_approximation_tracks_single_eigenmode_bound() {
    let r = fig1();
    let opts = light(2000, 1);
    for b in [1e10, 1e11] {
        let l1 = lower_bound_l1_q(&r.sf, &r.grid, &r.spec, &r.lb, b, 1, &opts).unwrap();
        let approx = lb_approx(&r.sf, &r.grid, &r.spec, &r.lb, b, 1, &opts.quadrature).unwrap();
        let rel = (approx.rate - l1.rate).abs() / l1.rate;
        assert!(rel < 0.03, "B = {b}: approx {} vs L1 {} ({rel:.4})", approx.rate, l1.rate);
    }
}

#[test]
fn spreading_energy_helps_at_medium_bandwidth_and_hurts_at_large() {
    let r = fig1();
    let opts = light(1500, 64);
    let q = QuadratureSpec::default();
    let at = |b: f64| {
        let v = lower_bound_l1_each(&r.sf, &r.grid, &r.spec, &r.lb, b, &[1, 3], &opts).unwrap();
        let hw = v[0].diagnostics.mc_half_width.unwrap() + v[1].diagnostics.mc_half_width.unwrap();
        let a1 = lb_approx(&r.sf, &r.grid, &r.spec, &r.lb, b, 1, &q).unwrap().rate;
        let a3 = lb_approx(&r.sf, &r.grid, &r.spec, &r.lb, b, 3, &q).unwrap().rate;
        (v[0].rate, v[1].rate, hw, a1, a3)
    };

    let (l1, l3, hw, a1, a3) = at(1e9);
    assert!(l3 > l1 - 3.0 * hw, "B = 1e9: L1(3) {l3} vs L1(1) {l1}");
    assert!(a3 > a1, "B = 1e9: approx(3) {a3} vs approx(1) {a1}");

    let (l1, l3, hw, a1, a3) = at(1e10);
    assert!(l1 > l3 + 3.0 * hw, "B = 1e10: L1(1) {l1} vs L1(3) {l3} (hw {hw})");
    assert!(a1 > a3, "B = 1e10: approx(1) {a1} vs approx(3) {a3}");
}
