//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Replications come from `--reps N` (after `--`) or `DRMTEST_REPS`, default
//! 20000. Below 20000 the Monte Carlo tolerances widen by `sqrt(20000/N)`,
//! so `--reps 4000` is the fast profile with tolerances ×√5.

use std::time::{Duration, Instant};

use drmtest::config::StudyConfig;
use drmtest::harness::{alm_study, dist_study, klm_study, rvar_study, Harness};
use drmtest_core::backtest::{Seeding, StratifiedPlan};
use drmtest_core::math::{chi2_cdf, chi2_quantile, normal_cdf};
use drmtest_core::measure::PartitionRule;
use drmtest_core::partition::{cell_probabilities, mc_oracle_cell_probs};
use drmtest_core::skewt::SkewedTParams;
use drmtest_core::{
    decompose, lrt, nass, pearson, DistortionFunction, GLaw, Knot, Mode, RiskMeasure, RngStream,
    TestKind,
};

const FULL_REPS: u64 = 20_000;
const FAST_REPS: u64 = 4_000;
/// The ALM paths cost far more per replication than i.i.d. losses.
const ALM_REPS: u64 = 5_000;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn requested_reps() -> u64 {
    let args: Vec<String> = std::env::args().collect();
    if let Some(i) = args.iter().position(|a| a == "--reps") {
        return args
            .get(i + 1)
            .and_then(|v| v.parse().ok())
            .expect("--reps needs a count");
    }
    std::env::var("DRMTEST_REPS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(FULL_REPS)
}

fn inflation(reps: u64) -> f64 {
    (FULL_REPS as f64 / reps as f64).sqrt().max(1.0)
}

fn study(reps: u64) -> StudyConfig {
    StudyConfig {
        reps,
        seed: 20_240_601,
        ..StudyConfig::default()
    }
}

/// Random piecewise-linear `g` with jumps from both sides.
fn random_distortion(rng: &mut RngStream) -> DistortionFunction {
    let k = (rng.uniform() * 6.0) as usize;
    let mut us: Vec<f64> = (0..k).map(|_| 0.001 + 0.998 * rng.uniform()).collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    let mut inc: Vec<f64> = (0..3 * us.len() + 3)
        .map(|i| {
            let w = rng.uniform();
            if i % 3 == 1 || rng.uniform() < 0.5 {
                w
            } else {
                0.0
            }
        })
        .collect();
    inc[1] += 1e-3;
    let total: f64 = inc.iter().sum();
    let mut acc = 0.0;
    let mut next = |i: usize| {
        acc += inc[i] / total;
        acc.min(1.0)
    };
    let mut knots = vec![Knot::new(0.0, 0.0, 0.0, next(0))];
    for (i, &u) in us.iter().enumerate() {
        knots.push(Knot::new(
            u,
            next(3 * i + 1),
            next(3 * i + 2),
            next(3 * i + 3),
        ));
    }
    knots.push(Knot::new(1.0, next(3 * us.len() + 1), 1.0, 1.0));
    DistortionFunction::new(knots).expect("valid by construction")
}

fn reconstruction_error(g: &DistortionFunction) -> (f64, f64) {
    let d = decompose(g);
    let mut u: Vec<f64> = g.knots().iter().map(|k| k.u).collect();
    let mids: Vec<f64> = u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    u.extend(mids);
    let err = u
        .iter()
        .map(|&x| {
            (d.eval(x) - g.eval(x))
                .abs()
                .max((d.left_limit(x) - g.left_limit(x)).abs())
                .max((d.right_limit(x) - g.right_limit(x)).abs())
        })
        .fold(0.0, f64::max);
    (err, (d.c_r + d.c_l + d.c_c - 1.0).abs())
}

fn c1_decomposition() -> Outcome {
    let start = Instant::now();
    let mut rng = RngStream::from_seed(1);
    let named = ["avar:0.025", "gluevar", "rvar:0.001:0.025", "mixed"];
    let mut gs: Vec<DistortionFunction> = named
        .iter()
        .map(|m| m.parse::<RiskMeasure>().unwrap().distortion().unwrap())
        .collect();
    gs.extend((0..200).map(|_| random_distortion(&mut rng)));
    let (mut err, mut sum_err) = (0.0f64, 0.0f64);
    for g in &gs {
        let (e, s) = reconstruction_error(g);
        err = err.max(e);
        sum_err = sum_err.max(s);
    }
    let d = decompose(&RiskMeasure::STUDY_MIXED.distortion().unwrap());
    let weights_ok = (d.c_r - 1.0 / 3.0).abs() <= 1e-12
        && (d.c_l - 0.2).abs() <= 1e-12
        && (d.c_c - 7.0 / 15.0).abs() <= 1e-12;
    let elapsed = start.elapsed();
    Outcome::new(
        err <= 1e-12 && sum_err <= 1e-12 && weights_ok && elapsed < Duration::from_secs(5),
        format!(
            "{} functions, max reconstruction error {err:.1e}, weight-sum error {sum_err:.1e}, mixed ({:.6}, {:.6}, {:.6}), {:.2} s",
            gs.len(),
            d.c_r,
            d.c_l,
            d.c_c,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_cell_oracle() -> Outcome {
    const N: usize = 1_000_000;
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut sum_err = 0.0f64;
    for measure in [
        RiskMeasure::BASEL_AVAR,
        RiskMeasure::STUDY_GLUEVAR,
        RiskMeasure::STUDY_MIXED,
    ] {
        let g = measure.distortion().unwrap();
        let mode = measure.default_mode().unwrap();
        for m in [1usize, 2, 4, 8] {
            let part = measure.partition(m, PartitionRule::Equidistant).unwrap();
            let exact = cell_probabilities(&g, &part, mode).unwrap();
            let mc = mc_oracle_cell_probs(&g, &part, mode, N, 7 + m as u64).unwrap();
            sum_err = sum_err.max((exact.p.iter().sum::<f64>() - 1.0).abs());
            for (p, q) in exact.p.iter().zip(&mc.p) {
                let se = (p * (1.0 - p) / N as f64).sqrt().max(1e-12);
                worst = worst.max((p - q).abs() / se);
            }
        }
    }
    let avar = RiskMeasure::BASEL_AVAR;
    let cells = cell_probabilities(
        &avar.distortion().unwrap(),
        &avar.partition(1, PartitionRule::Equidistant).unwrap(),
        Mode::Left,
    )
    .unwrap();
    let exact_ok = cells
        .p
        .iter()
        .zip([0.98125, 0.0125, 0.00625])
        .all(|(a, b)| (a - b).abs() <= 1e-15);
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 4.0 && sum_err <= 1e-12 && exact_ok && elapsed < Duration::from_secs(120),
        format!(
            "12 cases, max deviation {worst:.2} s.e., sum error {sum_err:.1e}, AV@R m=1 {:?}, {:.1} s",
            cells.p,
            elapsed.as_secs_f64()
        ),
    )
}

fn c3_null(h: &Harness, reps: u64) -> Outcome {
    let f = inflation(reps);
    let cfg = StudyConfig {
        ns: vec![2000],
        ms: vec![4],
        alternatives: vec!["N".into()],
        ..study(reps)
    };
    let out = dist_study(h, &cfg).unwrap();
    let rate = out.find(TestKind::Nass, "N", 2000, 4).unwrap().estimate();
    let (lo, hi) = (0.05 - 0.0075 * f, 0.05 + 0.0075 * f);
    Outcome::new(
        (lo..=hi).contains(&rate),
        format!("AV@R n=2000 m=4 Nass size {rate:.4} in [{lo:.4}, {hi:.4}], N={reps}"),
    )
}

fn c4_power(h: &Harness, reps: u64) -> Outcome {
    let tol = 1.5 * inflation(reps);
    let base = StudyConfig {
        ns: vec![2000],
        ms: vec![4],
        ..study(reps)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut check = |label: &str, value: f64, target: f64| {
        let ok = (value - target).abs() <= tol;
        pass &= ok;
        parts.push(format!(
            "{label} {value:.2} vs {target}{}",
            if ok { "" } else { " (out)" }
        ));
    };
    for (measure, alt, target) in [
        ("avar:0.025", "T3", 96.78),
        ("gluevar", "T3", 99.89),
        ("mixed", "T5", 96.33),
    ] {
        let cfg = StudyConfig {
            measure: measure.into(),
            alternatives: vec![alt.into()],
            ..base.clone()
        };
        let out = dist_study(h, &cfg).unwrap();
        let value = 100.0 * out.find(TestKind::Nass, alt, 2000, 4).unwrap().estimate();
        check(&format!("{measure} {alt}"), value, target);
    }
    let mut cfg = StudyConfig {
        alternatives: vec!["ST".into()],
        ..base
    };
    cfg.rvar.betas = vec![0.001];
    let out = rvar_study(h, &cfg).unwrap();
    let value = 100.0 * out.find(TestKind::Nass, "ST", 2000, 4).unwrap().estimate();
    check("rvar:0.001 ST", value, 99.60);
    Outcome::new(
        pass,
        format!("Nass n=2000 m=4, ±{tol:.2} pp: {}", parts.join("; ")),
    )
}

fn c5_klm(h: &Harness, reps: u64) -> Outcome {
    let slack = -0.01 * inflation(reps);
    let cfg = StudyConfig {
        ns: vec![1000, 2000],
        ms: vec![2, 4, 8],
        alternatives: ["T3", "T5", "ST"].map(String::from).to_vec(),
        ..study(reps)
    };
    let rows = klm_study(h, &cfg).unwrap();
    let nass: Vec<_> = rows
        .iter()
        .filter(|c| c.randomized.test == TestKind::Nass)
        .collect();
    let worst = nass
        .iter()
        .min_by(|a, b| a.delta().total_cmp(&b.delta()))
        .expect("rows");
    Outcome::new(
        nass.len() == 18 && worst.delta() >= slack,
        format!(
            "{} Nass deltas, smallest {:+.2} pp ({} n={} m={}), floor {:+.2} pp",
            nass.len(),
            100.0 * worst.delta(),
            worst.randomized.alternative,
            worst.randomized.n,
            worst.randomized.m,
            100.0 * slack
        ),
    )
}

fn c6_alm(h: &Harness, reps: u64) -> Outcome {
    let f = inflation(reps);
    let alm_reps = reps.min(ALM_REPS);
    let tol = 3.0 * f;
    let (lo, hi) = (1.0 - 0.1 * f, 1.9 + 0.1 * (f - 1.0));
    let run = |claims: &str, ns: Vec<usize>, ms: Vec<usize>| {
        let mut cfg = StudyConfig {
            ns,
            ms,
            ..study(alm_reps)
        };
        cfg.alm.claims = vec![claims.into()];
        alm_study(h, &cfg).unwrap()
    };
    let par = 100.0
        * run("par", vec![250], vec![1])
            .find(TestKind::Nass, "par", 250, 1)
            .unwrap()
            .estimate();
    let nb = 100.0
        * run("nb", vec![1000], vec![1])
            .find(TestKind::Nass, "nb", 1000, 1)
            .unwrap()
            .estimate();
    let null = run("null", vec![250, 1000], vec![1, 2, 4, 8]);
    let sizes: Vec<String> = null
        .rows
        .iter()
        .filter(|r| r.test == TestKind::Nass)
        .map(|r| format!("n={} m={}: {:.2}", r.n, r.m, r.size_ratio().unwrap()))
        .collect();
    let sizes_ok = null
        .rows
        .iter()
        .filter(|r| r.test == TestKind::Nass)
        .all(|r| (lo..=hi).contains(&r.size_ratio().unwrap()));
    let par_ok = (par - 97.60).abs() <= tol;
    let nb_ok = (nb - 99.02).abs() <= tol;
    Outcome::new(
        par_ok && nb_ok && sizes_ok,
        format!(
            "PAR n=250 m=1 {par:.2} vs 97.60, NB n=1000 m=1 {nb:.2} vs 99.02 (±{tol:.2} pp); size ratios in [{lo:.2}, {hi:.2}]: {}; N={alm_reps}",
            sizes.join(", ")
        ),
    )
}

fn c7_statistics() -> Outcome {
    let p = pearson(&[60, 40], &[0.5, 0.5], 100, 0.05).unwrap();
    let n = nass(&[60, 40], &[0.5, 0.5], 100, 0.05).unwrap();
    let l = lrt(&[60, 40], &[0.5, 0.5], 100, 0.05).unwrap();
    let c = n.dof;
    let checks = [
        (p.statistic, 4.0),
        (p.p_value, 0.0455002639),
        (c, 2.0 / 1.98),
        (n.statistic / p.statistic, 2.0 / 1.98),
        (l.statistic, 4.0271027),
        (chi2_quantile(0.95, 1.0), 3.8414588),
        (chi2_quantile(0.95, 2.0), 2.0 * 20f64.ln()),
        (chi2_cdf(3.0, 1.0), 2.0 * normal_cdf(3f64.sqrt()) - 1.0),
        (chi2_cdf(3.0, 2.0), 1.0 - (-1.5f64).exp()),
    ];
    let worst = checks
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-6,
        format!(
            "Pearson S={:.6} p={:.6}, Nass (c, ν)=({c:.6}, {:.6}), LRT R={:.6}, max error {worst:.1e}",
            p.statistic, p.p_value, n.dof, l.statistic
        ),
    )
}

fn c8_samplers() -> Outcome {
    // skewed-t moments by acceptance-rejection
    let shape = SkewedTParams::new(5.0, 1.5).unwrap();
    let (mean, var) = shape.moments().unwrap();
    let mut rng = RngStream::from_seed(8);
    let n = 1_000_000;
    let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let x = shape.sample(&mut rng).unwrap();
        let d = x - mean;
        s1 += d;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    let nf = n as f64;
    let m_hat = mean + s1 / nf;
    let v_hat = s2 / nf - (s1 / nf).powi(2);
    let z_mean = (m_hat - mean) / (var / nf).sqrt();
    let z_var = (v_hat - var) / ((s4 / nf - (s2 / nf).powi(2)) / nf).sqrt();

    // stratified mixture against the law of G, for continuous g
    let mut ks_worst = 0.0f64;
    for measure in [RiskMeasure::BASEL_AVAR, "rvar:0.005:0.025".parse().unwrap()] {
        let g = measure.distortion().unwrap();
        let part = measure.partition(4, PartitionRule::Equidistant).unwrap();
        let plan = StratifiedPlan::new(&g, part.clone(), Mode::Left).unwrap();
        let law = GLaw::new(&g);
        let masses: Vec<f64> = part
            .strata()
            .map(|(a, b)| law.mass(a, b, drmtest_core::Closure::LeftClosed))
            .collect();
        let fam = Seeding::new(81).strata();
        let draws = 200_000;
        let mut pick = RngStream::from_seed(82);
        let mut xs: Vec<f64> = (0..draws as u64)
            .map(|t| {
                let mut v = pick.uniform();
                let mut j = 0;
                while j + 1 < masses.len() && v >= masses[j] {
                    v -= masses[j];
                    j += 1;
                }
                plan.draw(&fam, 0, t, j).0
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = g.right_limit(x);
                (f - i as f64 / draws as f64)
                    .abs()
                    .max(((i + 1) as f64 / draws as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        ks_worst = ks_worst.max(d * (draws as f64).sqrt());
    }

    // GlueV@R: V@R_α atom with mass 1 - h2 = 1/3
    let g = RiskMeasure::STUDY_GLUEVAR.distortion().unwrap();
    let law = GLaw::new(&g);
    let mut rng = RngStream::from_seed(83);
    let hits = (0..n).filter(|_| law.sample(&mut rng).0 == 0.05).count();
    let freq = hits as f64 / nf;
    let z_atom = (freq - 1.0 / 3.0) / (2.0 / 9.0 / nf).sqrt();

    // 1.95 is the 0.1% critical value of the Kolmogorov distribution
    Outcome::new(
        z_mean.abs() <= 4.0 && z_var.abs() <= 4.0 && ks_worst <= 1.95 && z_atom.abs() <= 4.0,
        format!(
            "skewed-t mean {z_mean:+.2} s.e., variance {z_var:+.2} s.e.; mixture KS √N·D = {ks_worst:.3}; GlueV@R atom {freq:.5} ({z_atom:+.2} s.e.)"
        ),
    )
}

fn report(id: u32, name: &str, outcome: &Outcome) {
    let flag = if outcome.pass { "PASS" } else { "FAIL" };
    println!("criterion {id} [{flag}] {name}: {}", outcome.detail);
}

fn main() {
    let reps = requested_reps();
    let h = Harness::new(None).expect("worker pool");
    println!(
        "acceptance suite: N = {reps}, tolerance factor {:.3}, {} worker(s)",
        inflation(reps),
        h.workers()
    );
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "decomposition", c1_decomposition()),
        (2, "cell probabilities vs oracle", c2_cell_oracle()),
        (3, "null calibration", c3_null(&h, reps)),
        (4, "power reproduction", c4_power(&h, reps)),
        (5, "baseline comparison", c5_klm(&h, reps)),
        (6, "ALM reproduction", c6_alm(&h, reps)),
        (7, "test statistics", c7_statistics()),
        (8, "samplers", c8_samplers()),
    ];
    for (id, name, o) in &results {
        report(*id, name, o);
    }

    // the fast profile: rerun the Monte Carlo criteria at N = 4000 unless
    // this run already was one
    let fast = if reps <= FAST_REPS {
        let elapsed = started.elapsed();
        let all = results.iter().all(|(_, _, o)| o.pass);
        Outcome::new(
            all && elapsed < Duration::from_secs(180),
            format!("this run, N={reps}: {:.1} s", elapsed.as_secs_f64()),
        )
    } else {
        let start = Instant::now();
        let runs = [
            c1_decomposition(),
            c2_cell_oracle(),
            c3_null(&h, FAST_REPS),
            c4_power(&h, FAST_REPS),
            c5_klm(&h, FAST_REPS),
            c6_alm(&h, FAST_REPS),
            c7_statistics(),
            c8_samplers(),
        ];
        let elapsed = start.elapsed();
        let failed: Vec<String> = runs
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.pass)
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        Outcome::new(
            failed.is_empty() && elapsed < Duration::from_secs(180),
            format!(
                "N={FAST_REPS}, tolerances ×{:.3}: {:.1} s, failing criteria [{}]",
                inflation(FAST_REPS),
                elapsed.as_secs_f64(),
                failed.join(", ")
            ),
        )
    };
    report(9, "fast profile", &fast);
    results.push((9, "fast profile", fast));

    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed, {:.1} s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
