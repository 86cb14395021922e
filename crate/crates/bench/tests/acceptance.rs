//! Acceptance checks. Runs without the libtest harness and prints one
//! `PASS`/`FAIL`/`WARN` line per criterion; any `FAIL` makes the target fail.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfd_bench::similarity::grad_similarity;
use rfd_bench::{run_experiment, ExperimentConfig, ExperimentReport};
use rfd_core::blue::{conditional_variance, second_order_blue, stationary_blue_coeffs};
use rfd_core::covariance::cov_blocks;
use rfd_core::matern::matern_coeffs;
use rfd_core::optimizers::{
    run_regularized, run_rfd, GrfOracle, LossOracle, Observation, OptimizerConfig, Trajectory,
};
use rfd_core::step_size::{closed_form_step, numeric_step, NUMERIC_TOL};
use rfd_core::{GrfSampler, IsotropicModel, NoiseSpec};

const STEP_FIXED_POINT_TOL: f64 = 1e-12;
const CLOSED_VS_NUMERIC_TOL: f64 = 1e-6;
const RQ_LIMIT_TOL: f64 = 1e-3;
const BLUE_TOL: f64 = 1e-8;
const MC_SIGMAS: f64 = 3.0;
const MC_SEEDS: u64 = 2000;
const EQUIVARIANCE_TOL: f64 = 1e-8;
const REDUCTION_TOL: f64 = 1e-8;
const ZIGZAG_FRACTION: f64 = 0.6;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Warn,
    Fail,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn pass_if(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

fn sqexp(s: f64) -> IsotropicModel {
    IsotropicModel::squared_exponential(1.0, s).unwrap()
}

fn families(s: f64) -> Vec<(String, IsotropicModel)> {
    vec![
        ("sqexp".into(), sqexp(s)),
        ("matern32".into(), IsotropicModel::matern(1, 1.0, s).unwrap()),
        ("matern52".into(), IsotropicModel::matern(2, 1.0, s).unwrap()),
        ("rq(1)".into(), IsotropicModel::rational_quadratic(1.0, 1.0, s).unwrap()),
        ("rq(10)".into(), IsotropicModel::rational_quadratic(10.0, 1.0, s).unwrap()),
    ]
}

fn eta(model: &IsotropicModel, xi: f64) -> f64 {
    closed_form_step(model, xi).unwrap().eta
}

fn step_fixed_points() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for s in [0.05, 1.0, 3.0] {
        let sqrt5 = 5f64.sqrt();
        let mut cases = vec![
            (eta(&sqexp(s), 0.0), s),
            (eta(&IsotropicModel::matern(1, 1.0, s).unwrap(), 0.0), s / 3f64.sqrt()),
            (
                eta(&IsotropicModel::matern(2, 1.0, s).unwrap(), 0.0),
                s * (1.0 + sqrt5) / (2.0 * sqrt5),
            ),
        ];
        for beta in [0.5f64, 1.0, 2.0, 10.0] {
            let expect = s * (beta / (1.0 + beta)).sqrt();
            cases.push((eta(&IsotropicModel::rational_quadratic(beta, 1.0, s).unwrap(), 0.0), expect));
            // the intrinsic model is unscaled; its step times s*sqrt(beta) is the scaled one
            let grq = IsotropicModel::generalized_rational_quadratic(beta).unwrap();
            cases.push((eta(&grq, 0.0) * s * beta.sqrt(), expect));
        }
        for (got, expect) in cases {
            worst = worst.max((got - expect).abs() / expect.max(1.0));
        }
    }
    let elapsed = t.elapsed();
    pass_if(
        worst <= STEP_FIXED_POINT_TOL && within_budget(elapsed, Duration::from_secs(1)),
        format!("max rel err {worst:.2e}, {elapsed:.2?}"),
    )
}

fn closed_form_vs_numeric() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for s in [0.05, 1.0, 3.0] {
        for (_, model) in families(s) {
            for xi in [0.0, -0.1 * s, -s, -10.0 * s] {
                let c = eta(&model, xi);
                let n = numeric_step(&model, xi, NUMERIC_TOL).unwrap().eta;
                worst = worst.max((c - n).abs() / s.max(c));
                cases += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    pass_if(
        worst <= CLOSED_VS_NUMERIC_TOL && within_budget(elapsed, Duration::from_secs(5)),
        format!("{cases} cases, max err {worst:.2e} (scaled), {elapsed:.2?}"),
    )
}

fn limit_consistency() -> Outcome {
    let s = 0.7;
    let rq = IsotropicModel::rational_quadratic(1e4, 1.0, s).unwrap();
    let rq_gap = [0.0, -s]
        .iter()
        .map(|&xi| (eta(&rq, xi) - eta(&sqexp(s), xi)).abs())
        .fold(0.0, f64::max);
    let base = eta(&sqexp(s), 0.0);
    let gap1 = (eta(&IsotropicModel::matern(1, 1.0, s).unwrap(), 0.0) - base).abs();
    let gap2 = (eta(&IsotropicModel::matern(2, 1.0, s).unwrap(), 0.0) - base).abs();
    pass_if(
        rq_gap <= RQ_LIMIT_TOL * s && gap2 < gap1,
        format!("rq gap {:.2e} s, matern gaps {gap1:.4} > {gap2:.4}", rq_gap / s),
    )
}

/// Conditional mean and variance of `L(d)` given `(L(0), grad L(0))` from a
/// dense Cholesky solve of the joint covariance.
fn dense_condition(model: &IsotropicModel, noise: &NoiseSpec, d: &[f64], obs: &[f64]) -> (f64, f64) {
    let n = d.len();
    let origin = vec![0.0; n];
    let own = cov_blocks(model, &origin, &origin).unwrap();
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k[(0, 0)] = own.vv + noise.value_var;
    k.view_mut((1, 1), (n, n)).copy_from(&own.gg);
    for i in 1..=n {
        k[(i, i)] += noise.grad_var;
    }
    let c0 = model.cov(0.0);
    for i in 0..=n {
        k[(i, i)] += 1e-10 * c0;
    }
    let cross = cov_blocks(model, &origin, d).unwrap();
    let mut kv = DVector::zeros(n + 1);
    kv[0] = cross.vv;
    kv.rows_mut(1, n).copy_from(&cross.gv);
    let w = k.cholesky().unwrap().solve(&kv);
    (w.dot(&DVector::from_column_slice(obs)), c0 - kv.dot(&w))
}

fn random_displacement(rng: &mut ChaCha8Rng, dim: usize, s: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    let len = s * rng.random_range(0.5..2.0);
    dir.iter().map(|x| x * len / norm).collect()
}

fn blue_vs_dense() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    let noises = [NoiseSpec::exact(), NoiseSpec::new(1.0, 0.5).unwrap()];
    for (_, model) in families(0.8) {
        for noise in &noises {
            for dim in 1..=5 {
                for _ in 0..20 {
                    let d = random_displacement(&mut rng, dim, model.length_scale());
                    let obs: Vec<f64> = (0..=dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let (mean, var) = dense_condition(&model, noise, &d, &obs);
                    let c = stationary_blue_coeffs(&model, noise, &d).unwrap();
                    let pred = c.predict(obs[0], &obs[1..]);
                    let cv = conditional_variance(&model, noise, d.iter().map(|x| x * x).sum()).unwrap();
                    // the prediction is a sum that may cancel; compare against its terms
                    let scale = (c.a * obs[0]).abs()
                        + c.b.iter().zip(&obs[1..]).map(|(b, g)| (b * g).abs()).sum::<f64>();
                    worst_mean = worst_mean.max((pred - mean).abs() / scale);
                    worst_var = worst_var.max((cv - var).abs() / var);
                }
            }
        }
    }
    let elapsed = t.elapsed();
    pass_if(
        worst_mean <= BLUE_TOL && worst_var <= BLUE_TOL && within_budget(elapsed, Duration::from_secs(5)),
        format!("mean {worst_mean:.2e}, variance {worst_var:.2e}, {elapsed:.2?}"),
    )
}

fn matern_identity() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for p in 1..=8u32 {
        let d = matern_coeffs(p).unwrap().d;
        let prev = if p == 1 {
            vec![BigRational::from_integer(BigInt::from(1))]
        } else {
            matern_coeffs(p - 1).unwrap().c
        };
        let scale = BigRational::from_integer(BigInt::from(2 * p - 1));
        for (k, dk) in d.iter().enumerate() {
            checked += 1;
            if dk * &scale != prev[k] {
                bad.push(format!("p={p} k={k}"));
            }
        }
    }
    pass_if(bad.is_empty(), format!("{checked} exact identities, mismatches: {bad:?}"))
}

fn cov_and_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mean = prods.iter().sum::<f64>() / n;
    let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Value and gradient scalars at `points`, one row per seed.
fn grf_samples(model: &IsotropicModel, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..MC_SEEDS)
        .map(|seed| {
            let mut s = GrfSampler::new(model.clone(), points[0].len(), seed).unwrap();
            points
                .iter()
                .flat_map(|p| {
                    let r = s.eval(p).unwrap();
                    std::iter::once(r.value).chain(r.grad)
                })
                .collect()
        })
        .collect()
}

fn grf_law() -> Outcome {
    let t = Instant::now();
    let model = sqexp(1.0);
    let points = vec![vec![0.0, 0.0], vec![0.8, -0.3], vec![-0.4, 1.0]];
    let m = 3;
    let samples = grf_samples(&model, &points);
    let col = |i: usize| -> Vec<f64> { samples.iter().map(|s| s[i]).collect() };
    let mut worst: f64 = 0.0;
    for (pi, p) in points.iter().enumerate() {
        for (qi, q) in points.iter().enumerate() {
            let b = cov_blocks(&model, p, q).unwrap();
            for a in 0..m {
                for c in 0..m {
                    let expect = match (a, c) {
                        (0, 0) => b.vv,
                        (0, c) => -b.gv[c - 1],
                        (a, 0) => b.gv[a - 1],
                        (a, c) => b.gg[(a - 1, c - 1)],
                    };
                    let (got, se) = cov_and_se(&col(pi * m + a), &col(qi * m + c));
                    worst = worst.max((got - expect).abs() / se);
                }
            }
        }
    }

    let single = grf_samples(&model, &[vec![0.3, -0.6]]);
    let scol = |i: usize| -> Vec<f64> { single.iter().map(|s| s[i]).collect() };
    let grad_var = -2.0 * model.cov_d1(0.0);
    let mut worst_single: f64 = 0.0;
    for i in 1..=2 {
        for j in 1..=2 {
            let (got, se) = cov_and_se(&scol(i), &scol(j));
            let expect = if i == j { grad_var } else { 0.0 };
            worst_single = worst_single.max((got - expect).abs() / se);
        }
    }
    let elapsed = t.elapsed();
    pass_if(
        worst <= MC_SIGMAS && worst_single <= MC_SIGMAS && within_budget(elapsed, Duration::from_secs(60)),
        format!("9x9 worst {worst:.2} SE, single-point gradient worst {worst_single:.2} SE, {elapsed:.2?}"),
    )
}

fn conditional_variance_value() -> Outcome {
    let model = sqexp(1.0);
    let formula = conditional_variance(&model, &NoiseSpec::exact(), 1.0).unwrap();
    let expect = 1.0 - 2.0 / std::f64::consts::E;
    let coeffs = stationary_blue_coeffs(&model, &NoiseSpec::exact(), &[1.0]).unwrap();
    let residuals: Vec<f64> = (0..MC_SEEDS)
        .map(|seed| {
            let mut s = GrfSampler::new(model.clone(), 1, seed).unwrap();
            let at0 = s.eval(&[0.0]).unwrap();
            s.eval(&[1.0]).unwrap().value - coeffs.predict(at0.value, &at0.grad)
        })
        .collect();
    let (mc, se) = cov_and_se(&residuals, &residuals);
    pass_if(
        (formula - expect).abs() <= 1e-15 && (mc - formula).abs() <= MC_SIGMAS * se,
        format!("formula {formula:.6}, Monte-Carlo {mc:.5} ({:.2} SE)", (mc - formula).abs() / se),
    )
}

/// `a * L(c Q w + t) + b` with its chain-rule gradient, `Q` orthogonal.
struct Transformed {
    inner: GrfOracle,
    a: f64,
    b: f64,
    c: f64,
    q: DMatrix<f64>,
    t: DVector<f64>,
}

impl Transformed {
    fn map(&self, w: &[f64]) -> DVector<f64> {
        &self.q * DVector::from_column_slice(w) * self.c + &self.t
    }
}

impl LossOracle for Transformed {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, w: &[f64]) -> rfd_core::Result<Observation> {
        let x = self.map(w);
        let o = self.inner.evaluate(x.as_slice())?;
        let g = self.q.transpose() * DVector::from_vec(o.grad) * (self.a * self.c);
        Ok(Observation {
            loss_true: self.a * o.loss_true + self.b,
            loss: self.a * o.loss + self.b,
            grad: g.as_slice().to_vec(),
        })
    }
}

fn random_orthogonal(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

fn max_gap(a: &Trajectory, b: &Trajectory, map: impl Fn(&[f64]) -> DVector<f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    a.records
        .iter()
        .zip(&b.records)
        .map(|(ra, rb)| (map(&ra.w) - DVector::from_column_slice(&rb.w)).amax())
        .fold(0.0, f64::max)
}

fn scale_invariance() -> Outcome {
    let dim = 20;
    let s = 0.6;
    let seed = 5;
    let w0: Vec<f64> = (0..dim).map(|i| 0.05 * i as f64 - 0.4).collect();
    let grf = || GrfOracle::new(GrfSampler::new(sqexp(s), dim, seed).unwrap());
    let mut cfg = OptimizerConfig::new(sqexp(s), 10);
    cfg.mu = 0.2;
    let base = run_rfd(&mut grf(), &cfg, &w0).unwrap();

    // loss-affine: a L + b with matching variance and mean
    let (a, b) = (4.0, -3.0);
    let mut affine_cfg = cfg.clone();
    affine_cfg.model = IsotropicModel::squared_exponential(a * a, s).unwrap();
    affine_cfg.mu = a * cfg.mu + b;
    let mut oracle = Transformed {
        inner: grf(),
        a,
        b,
        c: 1.0,
        q: DMatrix::identity(dim, dim),
        t: DVector::zeros(dim),
    };
    let affine = run_rfd(&mut oracle, &affine_cfg, &w0).unwrap();
    let gap_affine = max_gap(&base, &affine, DVector::from_column_slice);

    // input bijection x = c Q w + t, started at the preimage of w0
    let c = 2.5;
    let mut oracle = Transformed {
        inner: grf(),
        a: 1.0,
        b: 0.0,
        c,
        q: random_orthogonal(dim, 3),
        t: DVector::from_fn(dim, |i, _| 0.01 * i as f64),
    };
    let pre = oracle.q.transpose() * (DVector::from_column_slice(&w0) - &oracle.t) / c;
    let mut input_cfg = cfg.clone();
    input_cfg.model = sqexp(s / c);
    let moved = run_rfd(&mut oracle, &input_cfg, pre.as_slice()).unwrap();
    let gap_input = max_gap(&moved, &base, |w| oracle.map(w));

    pass_if(
        gap_affine <= EQUIVARIANCE_TOL && gap_input <= EQUIVARIANCE_TOL,
        format!("affine {gap_affine:.2e}, input map {gap_input:.2e}"),
    )
}

fn brute_force_second_order(model: &IsotropicModel, d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let r: f64 = d.iter().map(|x| x * x).sum();
    let c2_0 = model.cov_d2(0.0);
    let m = pairs.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for (y, &(k, l)) in pairs.iter().enumerate() {
            gram[(x, y)] =
                4.0 * c2_0 * (delta(i, j) * delta(k, l) + delta(i, k) * delta(j, l) + delta(i, l) * delta(j, k));
        }
        rhs[x] = 4.0 * model.cov_d2(r) * d[i] * d[j] + 2.0 * (model.cov_d1(r) - model.cov_d1(0.0)) * delta(i, j);
    }
    let u = gram.lu().solve(&rhs).unwrap();
    let mut c = DMatrix::zeros(n, n);
    for (x, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            c[(i, i)] = u[x];
        } else {
            c[(i, j)] = u[x] / 2.0;
            c[(j, i)] = u[x] / 2.0;
        }
    }
    c
}

fn reductions() -> Outcome {
    let dim = 6;
    let s = 0.5;
    let w0: Vec<f64> = (0..dim).map(|i| 0.1 * i as f64 - 0.2).collect();
    let grf = |seed| GrfOracle::new(GrfSampler::new(sqexp(s), dim, seed).unwrap());
    let cfg = OptimizerConfig::new(sqexp(s), 10);

    let mut gap_reg: f64 = 0.0;
    let mut ema_equal = true;
    for seed in 0..3 {
        let plain = run_rfd(&mut grf(seed), &cfg, &w0).unwrap();
        let reg = run_regularized(&mut grf(seed), &cfg, 0.0, &w0).unwrap();
        gap_reg = gap_reg.max(max_gap(&plain, &reg, DVector::from_column_slice));
        let mut ema_cfg = cfg.clone();
        ema_cfg.xi_ema = Some(0.0);
        ema_equal &= run_rfd(&mut grf(seed), &ema_cfg, &w0).unwrap().records == plain.records;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut gap_second: f64 = 0.0;
    let models = [
        sqexp(1.0),
        IsotropicModel::matern(2, 1.3, 0.8).unwrap(),
        IsotropicModel::rational_quadratic(2.0, 1.0, 1.0).unwrap(),
    ];
    for model in &models {
        for dim in 1..=4 {
            for _ in 0..10 {
                let d = random_displacement(&mut rng, dim, model.length_scale());
                let brute = brute_force_second_order(model, &d);
                let got = second_order_blue(model, &d).unwrap();
                gap_second = gap_second.max((&got.c - &brute).amax() / brute.amax());
            }
        }
    }
    pass_if(
        gap_reg <= REDUCTION_TOL && ema_equal && gap_second <= REDUCTION_TOL,
        format!("regularized {gap_reg:.2e}, xi smoothing no-op {ema_equal}, second order {gap_second:.2e}"),
    )
}

fn desk_config(dir: &Path, s: f64, optimizers: &str) -> ExperimentConfig {
    let text = format!(
        "model = sqexp\nvariance = 1\nlength_scale = {s}\nmu = 0\ndim = 100\nseeds = 0,1,2,3,4\nsteps = 30\noptimizers = {optimizers}\noutput_dir = {}\n",
        dir.display()
    );
    ExperimentConfig::from_text(&text, &[]).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn finals(report: &ExperimentReport, optimizer: &str) -> Vec<(f64, f64)> {
    report
        .runs_of(optimizer)
        .map(|r| {
            let recs = &r.trajectory.records;
            (recs[0].loss_true, recs.last().unwrap().loss_true)
        })
        .collect()
}

fn desk_benchmark() -> Vec<(String, Outcome)> {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut out = Vec::new();
    let mut medians = BTreeMap::new();
    let mut hard_ok = true;
    let mut hard_detail = Vec::new();
    for (tag, s) in [("s1", 1.0), ("s0.1", 0.1)] {
        let report = run_experiment(&desk_config(&tmp.path().join(tag), s, "rfd,rfm_star")).unwrap();
        let rfd = finals(&report, "rfd");
        let improved = rfd.iter().filter(|(a, b)| b < a).count();
        let med = median(rfd.iter().map(|x| x.1).collect());
        let med_star = median(finals(&report, "rfm_star").iter().map(|x| x.1).collect());
        hard_ok &= improved >= 4 && med < 0.0;
        hard_detail.push(format!("s={s}: improved {improved}/5, median final {med:.3}"));
        medians.insert(tag, (med, med_star));
    }
    let (med, med_star) = medians["s0.1"];

    let report = run_experiment(&desk_config(&tmp.path().join("s0.05"), 0.05, "rfd")).unwrap();
    let (mut negative, mut total) = (0, 0);
    for r in report.runs_of("rfd") {
        for c in grad_similarity(&r.trajectory).first_off_diagonal().into_iter().flatten() {
            total += 1;
            negative += usize::from(c < 0.0);
        }
    }
    let frac = negative as f64 / total as f64;
    let elapsed = t.elapsed();

    out.push((
        "desk benchmark: descent below prior mean".into(),
        pass_if(
            hard_ok && within_budget(elapsed, Duration::from_secs(300)),
            format!("{}; {elapsed:.1?}", hard_detail.join("; ")),
        ),
    ));
    out.push((
        "desk benchmark: momentum median at s=0.1".into(),
        Outcome {
            status: if med_star <= med { Status::Pass } else { Status::Warn },
            detail: format!("rfm_star {med_star:.3} vs rfd {med:.3}"),
        },
    ));
    out.push((
        "desk benchmark: zig-zag at s=0.05".into(),
        Outcome {
            status: if frac >= ZIGZAG_FRACTION { Status::Pass } else { Status::Warn },
            detail: format!("{negative}/{total} consecutive gradient cosines negative ({:.0}%)", 100.0 * frac),
        },
    ));
    out
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "dim = 5\nlength_scale = 0.5\nseeds = 0,1,2\nsteps = 12\nnoise_value_var = 0.05\nnoise_grad_var = 0.02\noptimizers = rfd,rfm_star,conservative,adam\noutput_dir = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_rfd"))
            .args(["bench", "run", "--dump-iterates", "--config"])
            .arg(&cfg)
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        let files = read_all(&out);
        fs::remove_dir_all(&out).unwrap();
        files
    };
    let first = run();
    let second = run();
    let csvs = first.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    pass_if(
        first == second && csvs > 0,
        format!("{} files ({csvs} CSV) identical across two runs: {}", first.len(), first == second),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(String, Outcome)> = vec![
        ("step size fixed points".into(), step_fixed_points()),
        ("closed form vs numeric step".into(), closed_form_vs_numeric()),
        ("limit consistency".into(), limit_consistency()),
        ("prediction vs dense conditioning".into(), blue_vs_dense()),
        ("Matérn coefficient identity".into(), matern_identity()),
        ("random function law".into(), grf_law()),
        ("conditional variance".into(), conditional_variance_value()),
        ("scale invariance".into(), scale_invariance()),
        ("reductions".into(), reductions()),
    ];
    results.extend(desk_benchmark());
    results.push(("bench determinism".into(), determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        let tag = match o.status {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
        };
        println!("{tag}  {name}: {}", o.detail);
    }
    println!("{} criteria, {failed} failed", results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
