//! Acceptance checks. Each test prints one PASS/FAIL line and then asserts.
//!
//! Run with `cargo test -p ldp-erm --test acceptance -- --nocapture` to see
//! the verdict lines.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ldp_erm::bernstein_erm::{
    laplace_grid_run, onebit_grid_run, Constraint, CubeDataset, GridMode, GridProtocolConfig,
};
use ldp_erm::data::{BinaryDataset, BoxDataset, Records};
use ldp_erm::glm::{
    general_linear_gradient_sample, general_poly, glm_erm_run, hinge_gradient_sample, hinge_poly,
    Flavor, GlmConfig, ReplicaEncoder, ScalarLoss, ShiftSampling,
};
use ldp_erm::harness::baseline::glm_baseline;
use ldp_erm::harness::datasets::{generate_dataset, Dataset};
use ldp_erm::harness::{run_experiment, write_outputs, ExperimentConfig, Family, Manifest};
use ldp_erm::polyapprox::{
    bernstein_deriv_coeffs_on, build_or_polynomial, hbeta_deriv, iterated_bernstein_eval_fn,
    kink_mixture_reconstruct, sample_q, Anchor, BernsteinOperatorSpec, IteratedOperator,
    SmoothedPlus,
};
use ldp_erm::primitives::{
    avg_1d_error_bound, laplace_privacy_loss, ldp_avg_1d, onebit_privacy_loss, PlayerValue,
    Privacy, PrivacyBudget,
};
use ldp_erm::query::{
    disjunction_queries, disjunction_truth, gaussian_kernel, marginals_release, smooth_release,
    MarginalEncoding, DEFAULT_TABLE_CAP,
};
use ldp_erm::rng::SeedStream;
use ldp_erm::sigm::{sigm_run, Ball, OracleContract, SigmSchedule};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {id:>2} ({name}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_in_ball<R: Rng>(p: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
    let norm = dot(&g, &g).sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / p as f64);
    g.iter().map(|v| v * r / norm).collect()
}

// ---------------------------------------------------------------------------

#[test]
fn c01_scalar_average_coverage() {
    let (n, eps, beta, trials) = (10_000, 1.0, 0.05, 200);
    let budget = PrivacyBudget::pure(eps).unwrap();
    let radius = avg_1d_error_bound(n, 1.0, eps, beta);
    let mut data_rng = ChaCha8Rng::seed_from_u64(11);
    let values: Vec<PlayerValue> = (0..n)
        .map(|_| PlayerValue::new(data_rng.random::<f64>(), 1.0).unwrap())
        .collect();
    let mean = values.iter().map(|v| v.value()).sum::<f64>() / n as f64;
    let exceed = (0..trials)
        .filter(|&t| {
            let mut rng = SeedStream::new(100 + t).rng(1, 0);
            (ldp_avg_1d(&values, &budget, &mut rng).unwrap() - mean).abs() > radius
        })
        .count();
    let frac = exceed as f64 / trials as f64;
    verdict(
        1,
        "scalar average coverage",
        frac <= 0.10,
        format!("{exceed}/{trials} trials outside {radius:.4}"),
    );
}

#[test]
fn c02_likelihood_ratio_grids() {
    // Dyadic grids keep every difference exact, so the inequality is tested
    // without rounding slack.
    let eps = 1.0;
    let values: Vec<f64> = (0..=46)
        .map(|i| i as f64 / 46.0)
        .map(|v| (v * 64.0).round() / 64.0)
        .collect();
    let outputs: Vec<f64> = (0..46).map(|j| -2.0 + j as f64 / 8.0).collect();
    let mut laplace_triples = 0usize;
    let mut laplace_bad = 0usize;
    for &v in &values {
        for &vp in &values {
            for &z in &outputs {
                laplace_triples += 1;
                if laplace_privacy_loss(z, v, vp, 1.0, eps) > eps {
                    laplace_bad += 1;
                }
            }
        }
    }

    let eps_bit = 0.5;
    let publics: Vec<f64> = (0..46).map(|j| -3.0 + j as f64 / 8.0).collect();
    let mut bit_triples = 0usize;
    let mut bit_bad = 0usize;
    for &v in &values {
        for &vp in &values {
            for &y in &publics {
                bit_triples += 1;
                if onebit_privacy_loss(y, v, vp, eps_bit) > eps_bit {
                    bit_bad += 1;
                }
            }
        }
    }
    let pass =
        laplace_triples >= 100_000 && bit_triples >= 100_000 && laplace_bad == 0 && bit_bad == 0;
    verdict(
        2,
        "likelihood ratios",
        pass,
        format!(
            "Laplace {laplace_bad} violations in {laplace_triples} triples, one-bit {bit_bad} in {bit_triples}"
        ),
    );
}

/// Plain univariate Bernstein operator, written out from the definition.
fn oracle_bernstein(f: &dyn Fn(f64) -> f64, k: usize, x: f64) -> f64 {
    let mut choose = 1.0;
    let mut s = 0.0;
    for v in 0..=k {
        if v > 0 {
            choose = choose * (k - v + 1) as f64 / v as f64;
        }
        s += f(v as f64 / k as f64) * choose * x.powi(v as i32) * (1.0 - x).powi((k - v) as i32);
    }
    s
}

fn bernstein_sup_error(k: usize) -> f64 {
    let spec = BernsteinOperatorSpec::new(k, 1, 2).unwrap();
    let f = |y: &[f64]| (-(y[0] * y[0] + y[1] * y[1])).exp();
    let mut worst = 0.0f64;
    for i in 0..=60 {
        for j in 0..=60 {
            let y = [i as f64 / 60.0, j as f64 / 60.0];
            let b = iterated_bernstein_eval_fn(f, spec, &y).unwrap();
            worst = worst.max((b - f(&y)).abs());
        }
    }
    worst
}

#[test]
fn c03_bernstein_machinery() {
    let mut affine_err = 0.0f64;
    for (k, h) in [(4, 1), (6, 2), (8, 3), (5, 4)] {
        let spec = BernsteinOperatorSpec::new(k, h, 3).unwrap();
        let f = |y: &[f64]| 0.3 - 1.2 * y[0] + 0.7 * y[1] + 2.5 * y[2];
        for i in 0..=10 {
            let y = [
                i as f64 / 10.0,
                1.0 - i as f64 / 13.0,
                (i as f64 * 0.37).fract(),
            ];
            let b = iterated_bernstein_eval_fn(f, spec, &y).unwrap();
            affine_err = affine_err.max((b - f(&y)).abs());
        }
    }

    let mut identity_err = 0.0f64;
    let op = IteratedOperator::new(9, 2).unwrap();
    let f = |x: f64| (3.0 * x).sin() + x * x;
    let bf = |x: f64| oracle_bernstein(&f, 9, x);
    for i in 0..=50 {
        let x = i as f64 / 50.0;
        let expected = 2.0 * bf(x) - oracle_bernstein(&bf, 9, x);
        identity_err = identity_err.max((op.eval_fn(f, x) - expected).abs());
    }

    let (e8, e16) = (bernstein_sup_error(8), bernstein_sup_error(16));
    let ratio = e8 / e16;
    let pass = affine_err <= 1e-10 && identity_err <= 1e-10 && ratio >= 1.8;
    verdict(
        3,
        "Bernstein machinery",
        pass,
        format!("affine {affine_err:.2e}, second-order identity {identity_err:.2e}, sup-error ratio k=8/16 {ratio:.3}"),
    );
}

fn quadratic_cube_data(n: usize, seed: u64) -> (CubeDataset, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let data = CubeDataset::new(Records::new(1, xs).unwrap(), 1, |w, x| {
        (w[0] - x[0]).powi(2)
    })
    .unwrap();
    (data, mean)
}

fn grid_errors(n: usize, eps: f64, mode: GridMode, trials: u64) -> Vec<f64> {
    let (data, mean) = quadratic_cube_data(n, 7 + n as u64);
    let best = data.empirical_risk(&[mean]);
    let cfg = GridProtocolConfig::new(
        8,
        1,
        Privacy::Private(PrivacyBudget::pure(eps).unwrap()),
        mode,
    );
    (0..trials)
        .map(|t| {
            let seeds = SeedStream::new(1000 * n as u64 + t);
            let run = match mode {
                GridMode::LaplacePerPoint => {
                    laplace_grid_run(&data, &cfg, &Constraint::unit_cube(1), &seeds)
                }
                GridMode::OneBit => onebit_grid_run(&data, &cfg, &Constraint::unit_cube(1), &seeds),
            }
            .unwrap();
            data.empirical_risk(&run.w_priv) - best
        })
        .collect()
}

#[test]
fn c04_laplace_grid_end_to_end() {
    let medians: Vec<f64> = [10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| median(grid_errors(n, 2.0, GridMode::LaplacePerPoint, 20)))
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    let pass = medians[2] <= 0.1 && monotone;
    verdict(
        4,
        "Laplace grid end to end",
        pass,
        format!(
            "median Err at n=1e4,1e5,1e6: {:.2e}, {:.2e}, {:.2e}",
            medians[0], medians[1], medians[2]
        ),
    );
}

#[test]
fn c05_onebit_grid() {
    // Transcript size.
    let (data, _) = quadratic_cube_data(5000, 3);
    let budget = PrivacyBudget::pure(0.5).unwrap();
    let cfg = GridProtocolConfig::new(8, 1, Privacy::Private(budget), GridMode::OneBit);
    let run = onebit_grid_run(&data, &cfg, &Constraint::unit_cube(1), &SeedStream::new(1)).unwrap();
    let one_bit = run.transcript.bits_per_player == 1 && run.transcript.total_bits == 5000;

    // Cell estimates average to the grid values over many runs.
    let (small, _) = quadratic_cube_data(1800, 4);
    let reps = 2000;
    let runs: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            onebit_grid_run(
                &small,
                &cfg,
                &Constraint::unit_cube(1),
                &SeedStream::new(50_000 + r),
            )
            .unwrap()
            .model
            .grid()
            .values()
            .to_vec()
        })
        .collect();
    let mut worst_z = 0.0f64;
    for j in 0..=8 {
        let truth = small.empirical_risk(&[j as f64 / 8.0]);
        let col: Vec<f64> = runs.iter().map(|r| r[j]).collect();
        let (m, sd) = mean_sd(&col);
        worst_z = worst_z.max((m - truth).abs() / (sd / (reps as f64).sqrt()));
    }
    let unbiased = worst_z <= 3.0;

    let onebit = median(grid_errors(1_000_000, 0.5, GridMode::OneBit, 20));
    let laplace = median(grid_errors(1_000_000, 0.5, GridMode::LaplacePerPoint, 20));
    let close = onebit <= 2.0 * laplace;
    verdict(
        5,
        "one-bit grid",
        one_bit && unbiased && close,
        format!(
            "1 bit/player: {one_bit}, worst cell z-score {worst_z:.2}, median Err one-bit {onebit:.2e} vs Laplace {laplace:.2e}"
        ),
    );
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[test]
fn c06_sigm() {
    let ball = Ball::new(1.0).unwrap();

    // Exact oracle on an anisotropic quadratic.
    let curv = [1.0, 0.6, 0.3, 0.1];
    let target = [0.3, -0.4, 0.2, 0.5];
    let f = |w: &[f64]| {
        0.5 * w
            .iter()
            .zip(&target)
            .zip(&curv)
            .map(|((x, t), c)| c * (x - t).powi(2))
            .sum::<f64>()
    };
    let mut exact = |w: &[f64]| -> ldp_erm::Result<Vec<f64>> {
        Ok(w.iter()
            .zip(&target)
            .zip(&curv)
            .map(|((x, t), c)| c * (x - t))
            .collect())
    };
    let schedule =
        SigmSchedule::tuned(2.0, OracleContract::new(0.0, 1.0, 0.0).unwrap(), 1.0).unwrap();
    let y = sigm_run(&mut exact, 4, &ball, &schedule, 500).unwrap();
    let exact_gap = f(&y);

    // Gaussian gradient noise: the distance to the minimizer falls like 1/sqrt(T).
    let sigma = 1.0;
    let w_star = [0.2, -0.1, 0.3, 0.1, 0.0];
    let noisy_dist = |t: usize, rep: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let mut oracle = |w: &[f64]| -> ldp_erm::Result<Vec<f64>> {
            Ok(w.iter()
                .zip(&w_star)
                .map(|(x, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x - s + sigma * z / 5f64.sqrt()
                })
                .collect())
        };
        let s =
            SigmSchedule::tuned(1.0, OracleContract::new(0.0, 1.0, sigma).unwrap(), 1.0).unwrap();
        sq_dist(&sigm_run(&mut oracle, 5, &ball, &s, t).unwrap(), &w_star).sqrt()
    };
    let reps = 200;
    let d_short: f64 = (0..reps).map(|r| noisy_dist(500, r)).sum::<f64>() / reps as f64;
    let d_long: f64 = (0..reps).map(|r| noisy_dist(2000, 10_000 + r)).sum::<f64>() / reps as f64;
    let ratio = d_short / d_long;

    // Biased oracle: a constant offset of length sqrt(gamma) makes the oracle
    // (gamma, 2, 0)-inexact for f = |w - w*|^2 / 2, and SIGM settles at
    // w* - offset with gap gamma / 2.
    let gamma = 0.01f64;
    let w_b = [0.3, 0.4, 0.0];
    let norm_b = dot(&w_b, &w_b).sqrt();
    let offset: Vec<f64> = w_b.iter().map(|v| gamma.sqrt() * v / norm_b).collect();
    let mut biased = |w: &[f64]| -> ldp_erm::Result<Vec<f64>> {
        Ok(w.iter()
            .zip(&w_b)
            .zip(&offset)
            .map(|((x, s), o)| x - s + o)
            .collect())
    };
    let s = SigmSchedule::tuned(2.0, OracleContract::new(gamma, 2.0, 0.0).unwrap(), 1.0).unwrap();
    let yb = sigm_run(&mut biased, 3, &ball, &s, 5000).unwrap();
    let floor = 0.5 * sq_dist(&yb, &w_b);
    let floor_ok = floor >= gamma / 2.0 && floor <= gamma + 1e-3;

    let pass = exact_gap <= 1e-3 && (1.6..=2.6).contains(&ratio) && floor_ok;
    verdict(
        6,
        "SIGM",
        pass,
        format!(
            "exact gap at T=500 {exact_gap:.2e}, distance ratio T=500/2000 {ratio:.3}, biased terminal gap {floor:.5} \
             in [{:.4}, {:.4}]",
            gamma / 2.0,
            gamma + 1e-3
        ),
    );
}

/// Simpson's rule on `[a, b]` with `m` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn c07_glm_oracles() {
    let p = 3;
    let d = 3;
    let beta = 0.5;
    let x = [0.5, -0.3, 0.4];
    let y = 1.0;
    let w = [0.4, 0.2, -0.3];
    let m = y * dot(&w, &x);
    let reps = 100_000;
    let enc = ReplicaEncoder::new(
        p,
        d,
        Privacy::Private(PrivacyBudget::new(50.0, 1e-2).unwrap()),
    )
    .unwrap();

    let z_score = |samples: &[Vec<f64>], expected: &[f64]| -> f64 {
        (0..p)
            .map(|j| {
                let col: Vec<f64> = samples.iter().map(|g| g[j]).collect();
                let (mu, sd) = mean_sd(&col);
                (mu - expected[j]).abs() / (sd / (col.len() as f64).sqrt())
            })
            .fold(0.0, f64::max)
    };

    // Hinge path: E[G] = P(y<w,x>) y x.
    let hp = hinge_poly(beta, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let hinge: Vec<Vec<f64>> = (0..reps)
        .map(|_| hinge_gradient_sample(&w, &enc.encode(&x, y, &mut rng).unwrap(), &hp).unwrap())
        .collect();
    let expected: Vec<f64> = x.iter().map(|v| hp.eval(m) * y * v).collect();
    let z_hinge = z_score(&hinge, &expected);

    // General path with f = x^2/2 (kinks uniform on [-1, 1]):
    // E[G] = [2 E_s P((m - s)/2) - 1] y x.
    let gp = general_poly(beta, d).unwrap();
    let sampler = ScalarLoss::HalfSquare.sampler().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let general: Vec<Vec<f64>> = (0..reps)
        .map(|_| {
            let msg = enc.encode(&x, y, &mut rng).unwrap();
            general_linear_gradient_sample(&w, &msg, &gp, &sampler, ShiftSampling::Shared, &mut rng)
                .unwrap()
        })
        .collect();
    let smoothed = simpson(|s| gp.eval((m - s) / 2.0), -1.0, 1.0, 2000) / 2.0;
    let expected: Vec<f64> = x.iter().map(|v| (2.0 * smoothed - 1.0) * y * v).collect();
    let z_general = z_score(&general, &expected);

    // Zero-noise bias of the hinge path against the smoothed gradient.
    let quiet = ReplicaEncoder::new(p, d, Privacy::Disabled).unwrap();
    let smooth = SmoothedPlus::new(beta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    let mut worst_bias = 0.0f64;
    for _ in 0..100 {
        let xi = random_in_ball(p, 1.0, &mut rng);
        let yi = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let wi = random_in_ball(p, 1.0, &mut rng);
        let g = hinge_gradient_sample(&wi, &quiet.encode(&xi, yi, &mut rng).unwrap(), &hp).unwrap();
        let mi = yi * dot(&wi, &xi);
        let truth: Vec<f64> = xi.iter().map(|v| smooth.deriv(mi) * yi * v).collect();
        worst_bias = worst_bias.max(sq_dist(&g, &truth).sqrt());
    }
    let bias_bound = 1.0 / (beta * beta * d as f64);

    // Hinge through the general path (kink at 1/2, smoothing b) against the
    // dedicated path with smoothing 2b fitted on [-3/2, 5/2].
    let b = 0.25;
    let general_hinge = general_poly(b, d).unwrap();
    let wide = SmoothedPlus::new(2.0 * b).unwrap();
    let dedicated = bernstein_deriv_coeffs_on(move |t| wide.deriv(t), d, -1.5, 2.5).unwrap();
    let hinge_sampler = ScalarLoss::Hinge.sampler().unwrap();
    let mut worst_gap = 0.0f64;
    for _ in 0..100 {
        let xi = random_in_ball(p, 1.0, &mut rng);
        let yi = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let wi = random_in_ball(p, 1.0, &mut rng);
        let msg = quiet.encode(&xi, yi, &mut rng).unwrap();
        let a = hinge_gradient_sample(&wi, &msg, &dedicated).unwrap();
        let g = general_linear_gradient_sample(
            &wi,
            &msg,
            &general_hinge,
            &hinge_sampler,
            ShiftSampling::Shared,
            &mut rng,
        )
        .unwrap();
        worst_gap = worst_gap.max(sq_dist(&a, &g).sqrt());
    }
    // Sanity on the matched fit: the general path's polynomial is h'_b on [-1, 1].
    debug_assert!((general_hinge.eval(0.0) - hbeta_deriv(b, 0.0)).abs() < 0.2);

    let pass = z_hinge <= 3.0 && z_general <= 3.0 && worst_bias <= bias_bound && worst_gap <= 1e-8;
    verdict(
        7,
        "GLM oracles",
        pass,
        format!(
            "z hinge {z_hinge:.2}, z general {z_general:.2}, zero-noise bias {worst_bias:.3} <= {bias_bound:.3}, \
             hinge vs general {worst_gap:.1e}"
        ),
    );
}

#[test]
fn c08_kink_mixture() {
    let thetas: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
    let cases: [(&str, ScalarLoss); 3] = [
        ("hinge", ScalarLoss::Hinge),
        ("abs", ScalarLoss::Absolute),
        ("x^2/2", ScalarLoss::HalfSquare),
    ];
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    for (_, loss) in cases {
        let sampler = loss.sampler().unwrap();
        let rec = kink_mixture_reconstruct(
            &sampler,
            Anchor::ValueAtZero(loss.value(0.0)),
            &thetas,
            100_000,
            &mut rng,
        )
        .unwrap();
        for (t, r) in thetas.iter().zip(&rec) {
            worst = worst.max((r - loss.value(*t)).abs());
        }
    }

    // For x^2/2 the kink law is uniform on [-1, 1].
    let sampler = ScalarLoss::HalfSquare.sampler().unwrap();
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| sample_q(&sampler, &mut rng).unwrap())
        .collect();
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let ks = draws
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let cdf = ((s + 1.0) / 2.0).clamp(0.0, 1.0);
            (cdf - i as f64 / n)
                .abs()
                .max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    verdict(
        8,
        "kink-mixture reconstruction",
        worst <= 0.01 && ks <= 0.01,
        format!("worst reconstruction error {worst:.4}, KS {ks:.4}"),
    );
}

#[test]
fn c09_glm_end_to_end() {
    let spec = ldp_erm::harness::config::DatasetSpec {
        p: 5,
        ..Default::default()
    };
    let Dataset::Ball(data) =
        generate_dataset(&spec, Family::SeparableTwoClass, 50_000, 90).unwrap()
    else {
        unreachable!()
    };
    let baseline = glm_baseline(&data, ScalarLoss::Hinge, 1.0).unwrap().value;
    let cfg = GlmConfig {
        flavor: Flavor::Hinge,
        beta_smoothing: 0.5,
        d: 3,
        privacy: Privacy::Private(PrivacyBudget::new(2.0, 1e-5).unwrap()),
        iterations: None,
        radius: 1.0,
    };
    let runs: Vec<(f64, f64, f64)> = (0..10)
        .map(|s| {
            let run = glm_erm_run(&data, &cfg, &SeedStream::new(900 + s)).unwrap();
            let excess = ldp_erm::glm::empirical_risk(&data, ScalarLoss::Hinge, &run.w) - baseline;
            (excess, run.sigma_estimate, dot(&run.w, &run.w).sqrt())
        })
        .collect();
    let good = runs.iter().filter(|r| r.0 <= 0.1).count();
    verdict(
        9,
        "GLM end to end",
        good >= 8,
        format!(
            "{good}/10 seeds with excess <= 0.1 (median excess {:.3}, baseline {baseline:.3}, median oracle noise \
             {:.3e}, median |w| {:.3})",
            median(runs.iter().map(|r| r.0).collect()),
            median(runs.iter().map(|r| r.1).collect()),
            median(runs.iter().map(|r| r.2).collect()),
        ),
    );
}

fn binary_data(n: usize, p: usize, seed: u64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..n * p)
        .map(|_| u8::from(rng.random_bool(0.15)))
        .collect();
    BinaryDataset::new(p, bits).unwrap()
}

#[test]
fn c10_marginals() {
    let (p, k, gamma) = (8, 2, 0.05);
    let poly = build_or_polynomial(k, gamma).unwrap();
    let poly_ok = poly.eval(0.0).abs() <= gamma
        && (1..=k).all(|j| (poly.eval(j as f64) - 1.0).abs() <= gamma);

    let queries = disjunction_queries(p, k).unwrap();
    let small = binary_data(2000, p, 100);
    let exact = marginals_release(
        &small,
        k,
        gamma,
        &Privacy::Disabled,
        MarginalEncoding::default(),
        &SeedStream::new(0),
        DEFAULT_TABLE_CAP,
    )
    .unwrap();
    let zero_noise = queries
        .iter()
        .map(|y| (exact.answer(y).unwrap().raw - disjunction_truth(&small, y)).abs())
        .fold(0.0, f64::max);

    let data = binary_data(100_000, p, 101);
    let truths: Vec<f64> = queries
        .iter()
        .map(|y| disjunction_truth(&data, y))
        .collect();
    let privacy = Privacy::Private(PrivacyBudget::pure(2.0).unwrap());
    let worst: Vec<f64> = (0..20)
        .map(|t| {
            let table = marginals_release(
                &data,
                k,
                gamma,
                &privacy,
                MarginalEncoding::default(),
                &SeedStream::new(1000 + t),
                DEFAULT_TABLE_CAP,
            )
            .unwrap();
            queries
                .iter()
                .zip(&truths)
                .map(|(y, truth)| (table.answer(y).unwrap().clamped - truth).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let good = worst.iter().filter(|&&e| e <= 0.2).count();
    verdict(
        10,
        "marginals",
        poly_ok && zero_noise <= gamma && good >= 18,
        format!(
            "OR-polynomial within gamma: {poly_ok}, zero-noise max error {zero_noise:.4}, private {good}/20 trials \
             with max error <= 0.2 (median {:.3})",
            median(worst)
        ),
    );
}

#[test]
fn c11_smooth_queries() {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut xs = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let v = random_in_ball(2, 1.0, &mut rng);
        xs.extend(v.iter().map(|c| c * 0.8));
    }
    let data = BoxDataset::new(Records::new(2, xs).unwrap()).unwrap();
    let release = smooth_release(
        &data,
        8,
        &Privacy::Disabled,
        &SeedStream::new(1),
        DEFAULT_TABLE_CAP,
    )
    .unwrap();
    let center = [0.2, -0.3];
    let mut worst = 0.0f64;
    for h in [1.0, 0.8] {
        let kernel = gaussian_kernel(&center, h);
        let truth = data.records().rows().map(&kernel).sum::<f64>() / n as f64;
        worst = worst.max((release.answer_fn(&kernel).unwrap() - truth).abs());
    }
    let single_message =
        release.transcript.reals_per_player == 1 && release.transcript.players == n;
    verdict(
        11,
        "smooth queries",
        worst <= 1e-2 && single_message,
        format!("worst kernel error {worst:.2e} over two bandwidths from one release, one real per player: {single_message}"),
    );
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) {
    let outcome = run_experiment(cfg).unwrap();
    write_outputs(cfg, &outcome, dir).unwrap();
}

#[test]
fn c12_manifest_reproducibility() {
    let configs = [
        "mechanism = \"avg-bench\"\nseed = 5\ntrials = 6\n[dataset]\nn = 2000\n[sweep]\nepsilon = [0.5, 1.0]\n",
        "mechanism = \"bernstein\"\nseed = 6\ntrials = 3\n[dataset]\nn = 5000\n[bernstein]\nk = 4\n",
        "mechanism = \"onebit\"\nseed = 7\ntrials = 3\n[dataset]\nn = 5000\n[privacy]\nepsilon = 0.5\n[bernstein]\nk = 4\n",
        "mechanism = \"hinge\"\nseed = 8\ntrials = 2\n[dataset]\nn = 600\np = 2\n[privacy]\nepsilon = 2\ndelta = 1e-5\n",
        "mechanism = \"marginals\"\nseed = 9\ntrials = 2\n[dataset]\nn = 3000\np = 5\n",
        "mechanism = \"smooth-queries\"\nseed = 10\ntrials = 2\n[dataset]\nn = 2000\np = 2\n[smooth]\nt = 4\n",
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for (i, text) in configs.iter().enumerate() {
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        let first = root.path().join(format!("{i}-first"));
        run_into(&cfg, &first);
        let manifest = Manifest::load(&first.join("manifest.json")).unwrap();
        let mut replay = manifest.config.clone();
        replay.workers = Some(1);
        let second = root.path().join(format!("{i}-replay"));
        run_into(&replay, &second);
        for file in ["report.csv", "transcript_summary.csv"] {
            let a = std::fs::read(first.join(file)).unwrap();
            let b = std::fs::read(second.join(file)).unwrap();
            if a != b {
                mismatched.push(format!("{}:{file}", cfg.mechanism().unwrap()));
            }
        }
    }
    verdict(
        12,
        "manifest reproducibility",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} mechanisms replayed byte for byte", configs.len())
        } else {
            format!("differences in {}", mismatched.join(", "))
        },
    );
}
