//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p modelcmp-cli --test acceptance -- 2 5` runs a subset.
//! Verdicts are reported on stdout and the process exits 0 so the rest of a
//! workspace test run still executes; set `MODELCMP_ACCEPTANCE_STRICT=1` to
//! exit 1 when any criterion fails.

mod common;

use std::fs;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use modelcmp::bayes::model::cs_gaussian_logpdf;
use modelcmp::bayes::{bayes_family, compare_differences, pair_seed, BayesConfig, Theta};
use modelcmp::nhst::{friedman_statistic, nemenyi, nhst_family, studentized_range_quantile};
use modelcmp::rank::{naive_best, overall_means, rank_matrix};
use modelcmp::sim::{coverage_experiment, generate_null_table, null_calibration, GenSpec};
use modelcmp::special::chi_square_upper_tail;
use modelcmp::{
    pair_differences, DecisionMatrix, Error, FoldId, MetricSpec, PairDifferences, PerfTable, RankMatrix, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

struct Check {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Check {
    Check {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 10] = [
        (1, "CD reproduction", c1_cd),
        (2, "studentized range quantiles", c2_quantiles),
        (3, "Friedman statistic and chi-square tail", c3_friedman),
        (4, "Type-I calibration", c4_type_one),
        (5, "compound-symmetry algebra", c5_algebra),
        (6, "sampler validity", c6_sampler),
        (7, "ROPE behaviour", c7_rope),
        (8, "throughput", c8_throughput),
        (9, "determinism", c9_determinism),
        (10, "family-rule fidelity", c10_families),
    ];
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {} ({secs:.1} s)", v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of {ran} criteria passed; failed: {failed:?}", ran - failed.len());
    if !failed.is_empty() && std::env::var_os("MODELCMP_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn within_rel(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

/// A rank matrix with `n` identical rows; the critical difference only
/// depends on k and N.
fn flat_ranks(k: usize, n: usize) -> RankMatrix {
    RankMatrix::from_rows(vec![(1..=k).map(|j| j as f64).collect(); n])
}

fn c1_cd() -> Check {
    const WANT: f64 = 22.5936;
    let start = Instant::now();
    let out = match nemenyi(&flat_ranks(96, 48), 0.05) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let ok = within_rel(out.cd, WANT, 0.005) && secs < 1.0;
    // What the published value corresponds to: the quantile looked up with
    // the number of datasets in place of the number of models.
    let alt = studentized_range_quantile(48, 0.05).unwrap() * (96.0f64 * 97.0 / (6.0 * 48.0)).sqrt();
    verdict(
        ok,
        format!(
            "CD = {:.4} (q = {:.6}), want {WANT} ± 0.5%, off by {:+.2}%; q(k = 48)·sqrt(k(k+1)/6N) = {alt:.4}; {secs:.3} s",
            out.cd,
            out.q_alpha,
            100.0 * (out.cd / WANT - 1.0)
        ),
    )
}

/// P(range of k standard normals <= w) by composite Simpson in z.
fn range_cdf_simpson(w: f64, k: u32) -> f64 {
    let n = Normal::standard();
    let (a, b, m) = (-9.0, 9.0, 6000);
    let h = (b - a) / m as f64;
    let f = |z: f64| {
        let inner = (n.cdf(z + w) - n.cdf(z)).max(0.0);
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * inner.powi(k as i32 - 1)
    };
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (k as f64 * s * h / 3.0).min(1.0)
}

fn quantile_oracle(k: u32, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if range_cdf_simpson(mid, k) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / std::f64::consts::SQRT_2
}

fn c2_quantiles() -> Check {
    let q2 = studentized_range_quantile(2, 0.05).unwrap();
    let mut ok = (q2 - 1.95996).abs() <= 0.001;
    let mut worst: f64 = 0.0;
    let mut prev = q2;
    let mut monotone = true;
    for k in 3..=10 {
        let q = studentized_range_quantile(k, 0.05).unwrap();
        let oracle = quantile_oracle(k, 0.05);
        worst = worst.max((q - oracle).abs());
        monotone &= q > prev;
        prev = q;
    }
    ok &= worst <= 0.002 && monotone;
    verdict(
        ok,
        format!("q(2) = {q2:.6}; max |q − oracle| over k = 3..10 is {worst:.2e}; monotone in k: {monotone}; q(10) = {prev:.4}"),
    )
}

/// Upper tail of the chi-square law by adaptive Simpson on its density.
fn chi_square_tail_oracle(x: f64, dof: u32) -> f64 {
    let half = dof as f64 / 2.0;
    let norm = half * 2f64.ln() + ln_gamma(half);
    let f = move |t: f64| if t <= 0.0 { 0.0 } else { ((half - 1.0) * t.ln() - t / 2.0 - norm).exp() };
    let upper = x.max(dof as f64) + 500.0;
    // split at the mode region so the adaptive rule sees the bulk
    let mut edges = vec![x];
    let mut e = x;
    while e < upper {
        e = (e * 2.0).max(e + 1.0).min(upper);
        edges.push(e);
    }
    edges.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-15, 50)).sum()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, depth)
}

fn c3_friedman() -> Check {
    // (per-dataset scores, expected statistic by hand)
    let fixtures: Vec<(&str, Vec<Vec<f64>>, f64)> = vec![
        ("all tied", vec![vec![0.5; 4]; 3], 0.0),
        ("k = 2 perfect separation, N = 7", vec![vec![0.9, 0.1]; 7], 7.0),
        ("k = 3 identical orderings, N = 4", vec![vec![0.9, 0.8, 0.7]; 4], 8.0),
        ("k = 3 one swap, N = 2", vec![vec![0.9, 0.8, 0.7], vec![0.8, 0.9, 0.7]], 3.0),
        (
            "k = 4 with a tie, N = 3",
            vec![vec![0.9, 0.8, 0.8, 0.1], vec![0.9, 0.8, 0.7, 0.6], vec![0.6, 0.7, 0.8, 0.9]],
            0.9,
        ),
        (
            "k = 3 reversed pair, N = 2",
            vec![vec![0.9, 0.8, 0.7], vec![0.7, 0.8, 0.9]],
            0.0,
        ),
    ];
    let mut bad = Vec::new();
    for (name, scores, want) in &fixtures {
        let got = friedman_statistic(&rank_matrix(scores, true)).unwrap().statistic;
        if (got - want).abs() > 1e-12 {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    }
    let mut worst: f64 = 0.0;
    for dof in 1..=12 {
        for &x in &[0.01, 0.3, 1.0, 2.5, 5.0, 9.0, 15.0, 25.0, 40.0, 80.0] {
            worst = worst.max((chi_square_upper_tail(x, dof) - chi_square_tail_oracle(x, dof)).abs());
        }
    }
    let ok = bad.is_empty() && worst <= 1e-8;
    verdict(
        ok,
        format!(
            "{} statistic fixtures, mismatches: {bad:?}; max |tail − quadrature| over 120 points is {worst:.2e}",
            fixtures.len()
        ),
    )
}

fn c4_type_one() -> Check {
    let start = Instant::now();
    let c = match null_calibration(20, 5, 10, 1000, 0.05, 20_240_601) {
        Ok(c) => c,
        Err(e) => return verdict(false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let ok = (0.03..=0.07).contains(&c.friedman_rejection_rate) && c.naive_unique_best_rate > 0.99 && secs < 300.0;
    verdict(
        ok,
        format!(
            "Friedman rejects {:.3} of 1000 null tables (want [0.03, 0.07]); naive declares a unique best in {:.3} (want > 0.99)",
            c.friedman_rejection_rate, c.naive_unique_best_rate
        ),
    )
}

/// Dense log-density via Cholesky of the full covariance.
fn dense_cs_logpdf(x: &[f64], mu: f64, sigma2: f64, rho: f64) -> f64 {
    let r = x.len();
    let mut l = vec![vec![0.0; r]; r];
    let cov = |i: usize, j: usize| if i == j { sigma2 } else { rho * sigma2 };
    for i in 0..r {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                l[i][j] = (cov(i, i) - s).sqrt();
            } else {
                l[i][j] = (cov(i, j) - s) / l[j][j];
            }
        }
    }
    // forward solve L z = x − μ
    let mut z = vec![0.0; r];
    for i in 0..r {
        let s: f64 = (0..i).map(|p| l[i][p] * z[p]).sum();
        z[i] = (x[i] - mu - s) / l[i][i];
    }
    let log_det: f64 = 2.0 * (0..r).map(|i| l[i][i].ln()).sum::<f64>();
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (r as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}

fn c5_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.random_range(2..=20);
        let sigma2 = 10f64.powf(rng.random_range(-4.0..0.0));
        let rho = rng.random_range(0.01..0.95);
        let mu = rng.random_range(-0.1..0.1);
        let x: Vec<f64> = (0..r)
            .map(|_| mu + 1.5 * sigma2.sqrt() * gauss(&mut rng) + rng.random_range(-0.01..0.01))
            .collect();
        let closed = cs_gaussian_logpdf(&x, mu, sigma2, rho).unwrap();
        worst = worst.max((closed - dense_cs_logpdf(&x, mu, sigma2, rho)).abs());
    }
    verdict(worst <= 1e-10, format!("max |closed form − dense| over 1000 draws is {worst:.2e} (want ≤ 1e-10)"))
}

fn default_bayes(rho: f64) -> BayesConfig {
    BayesConfig::new(rho)
}

fn c6_sampler() -> Check {
    let spec = GenSpec {
        seed: 606,
        ..GenSpec::default()
    };
    let start = Instant::now();
    let s = match coverage_experiment(&spec, 200, &default_bayes(spec.rho)) {
        Ok(s) => s,
        Err(e) => return verdict(false, e.to_string()),
    };
    let secs = start.elapsed().as_secs_f64();
    let ok = (0.83..=0.97).contains(&s.coverage) && s.converged_fraction >= 0.95 && s.failures == 0 && secs < 1800.0;
    verdict(
        ok,
        format!(
            "90% interval covers μ₀ in {:.3} of 200 runs (want [0.83, 0.97]); all R-hat ≤ 1.05 in {:.3} (want ≥ 0.95); {} sampler failures",
            s.coverage, s.converged_fraction, s.failures
        ),
    )
}

fn c7_rope() -> Check {
    let zeros = PairDifferences {
        model_x: "x".into(),
        model_y: "y".into(),
        per_dataset: vec![vec![0.0; 10]; 20],
    };
    let zero_rope = match compare_differences(&zeros, &default_bayes(0.1), 77) {
        Ok(p) => p.theta.p_rope,
        Err(e) => return verdict(false, format!("zero fixture: {e}")),
    };
    let spec = GenSpec {
        mu_0: 0.05,
        sigma_0: 0.01,
        seed: 707,
        ..GenSpec::default()
    };
    let s = match coverage_experiment(&spec, 100, &default_bayes(spec.rho)) {
        Ok(s) => s,
        Err(e) => return verdict(false, e.to_string()),
    };
    let ok = zero_rope >= 0.95 && s.decided_fraction >= 0.9 && s.x_better_fraction >= 0.9;
    verdict(
        ok,
        format!(
            "all-zero differences: p_rope = {zero_rope:.4} (want ≥ 0.95); μ₀ = 0.05: decided in {:.2} of 100 runs, all for x in {:.2} (want ≥ 0.90)",
            s.decided_fraction, s.x_better_fraction
        ),
    )
}

fn synthetic_table(n: usize, k: usize, r: usize, seed: u64) -> PerfTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skill: Vec<f64> = (0..k).map(|_| rng.random_range(-0.05..0.05)).collect();
    let values = (0..n)
        .map(|_| {
            let base = rng.random_range(0.6..0.85);
            (0..k)
                .map(|j| {
                    let shift = skill[j] + 0.01 * gauss(&mut rng);
                    (0..r)
                        .map(|_| (base + shift + 0.02 * gauss(&mut rng)).clamp(0.0, 1.0))
                        .collect()
                })
                .collect()
        })
        .collect();
    PerfTable::from_grid(
        (1..=n).map(|i| format!("d{i}")).collect(),
        (1..=k).map(|j| format!("m{j:02}")).collect(),
        (1..=r as u32).map(|f| FoldId::new(f, 1).unwrap()).collect(),
        values,
        MetricSpec::auc(),
    )
    .unwrap()
}

fn c8_throughput() -> Check {
    const BUDGET: Duration = Duration::from_secs(600);
    let table = synthetic_table(48, 96, 10, 808);
    let config = default_bayes(1.0 / 9.0);
    let models = table.models().to_vec();

    let start = Instant::now();
    let diffs = pair_differences(&table, &models[0], &models[1]).unwrap();
    if let Err(e) = compare_differences(&diffs, &config, pair_seed(1, &models[0], &models[1])) {
        return verdict(false, e.to_string());
    }
    let single = start.elapsed().as_secs_f64();

    // The full run stops taking new pairs once the budget is spent: past
    // that point the criterion has failed and the rest only costs time.
    let pairs: Vec<(usize, usize)> = (0..96).flat_map(|i| (i + 1..96).map(move |j| (i, j))).collect();
    let expired = AtomicBool::new(false);
    let start = Instant::now();
    let done: usize = pairs
        .par_iter()
        .map(|&(i, j)| {
            if expired.load(Ordering::Relaxed) || start.elapsed() > BUDGET {
                expired.store(true, Ordering::Relaxed);
                return 0;
            }
            let d = pair_differences(&table, &models[i], &models[j]).unwrap();
            compare_differences(&d, &config, pair_seed(1, &models[i], &models[j])).map(|_| 1).unwrap_or(0)
        })
        .sum();
    let full = start.elapsed().as_secs_f64();
    let threads = rayon::current_num_threads();
    let complete = done == pairs.len();
    let ok = single <= 10.0 && complete && full <= 600.0;
    let full_part = if complete {
        format!("4560 pairs in {full:.0} s")
    } else {
        format!(
            "{done} of 4560 pairs in {full:.0} s, projected {:.0} s for all",
            full * pairs.len() as f64 / done.max(1) as f64
        )
    };
    verdict(
        ok,
        format!("one pair (N = 48, r = 10, 50,000 draws) in {single:.2} s (want ≤ 10); {full_part} on {threads} threads (want ≤ 600)"),
    )
}

fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let t = synthetic_table(12, 6, 10, 909);
    let input = dir.path().join("results.csv");
    t.write_csv(fs::File::create(&input).unwrap()).unwrap();
    let run = |jobs: &str, out: &str| {
        let o = std::process::Command::new(common::bin())
            .args(["report", "--seed", "99", "--simplex", "all", "--jobs", jobs, "--out"])
            .arg(dir.path().join(out))
            .arg("--input")
            .arg(&input)
            .output()
            .unwrap();
        o.status.success()
    };
    if !(run("1", "a") && run("4", "b")) {
        return verdict(false, "report run failed");
    }
    let mut names: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json") || n.ends_with(".svg"))
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(dir.path().join("a").join(n)).ok() != fs::read(dir.path().join("b").join(n)).ok())
        .collect();
    verdict(
        differing.is_empty() && names.len() == 1 + 3 + 15,
        format!("{} JSON/SVG files compared between --jobs 1 and --jobs 4; differing: {differing:?}", names.len()),
    )
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn c10_families() -> Check {
    let mut problems = Vec::new();

    // NHST: interval in rank around the top model.
    let models = names(&["m1", "m2", "m3", "m4", "m5", "m6"]);
    let ranks = RankMatrix::from_rows(vec![vec![1.5, 2.0, 2.8, 3.0, 5.7, 6.0]; 30]);
    let omni = friedman_statistic(&ranks).unwrap();
    let post = nemenyi(&ranks, 0.05).unwrap();
    match nhst_family(&models, &ranks, &omni, &post) {
        Ok(f) if f.members == names(&["m1", "m2", "m3"]) => {}
        other => problems.push(format!("nhst fixture A: {other:?}")),
    }
    let cd = post.cd;
    let (r2, r3) = (1.5 + cd - 0.01, 1.5 + cd + 0.01);
    let rest = 21.0 - 1.5 - r2 - r3;
    let row = vec![r3, 1.5, rest / 3.0 - 0.1, r2, rest / 3.0, rest / 3.0 + 0.1];
    let ranks = RankMatrix::from_rows(vec![row; 30]);
    let omni = friedman_statistic(&ranks).unwrap();
    let post = nemenyi(&ranks, 0.05).unwrap();
    match nhst_family(&models, &ranks, &omni, &post) {
        Ok(f) if f.members == names(&["m2", "m4"]) => {}
        other => problems.push(format!("nhst fixture B: {other:?}")),
    }
    let retained = RankMatrix::from_rows(vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0], vec![2.0, 1.0, 3.0]]);
    let omni = friedman_statistic(&retained).unwrap();
    let post = nemenyi(&retained, 0.05).unwrap();
    if !matches!(nhst_family(&models[..3], &retained, &omni, &post), Err(Error::OmnibusRetained { .. })) {
        problems.push("nhst fixture C: omnibus retention not reported".into());
    }

    // Bayes: the best-mean model plus every model with P(rope) > 0.95 against it.
    let k = 5;
    let models = names(&["a", "b", "c", "d", "e"]);
    let means = [0.80, 0.81, 0.79, 0.805, 0.70];
    let top = 1;
    let thetas = [
        Theta { p_left: 0.01, p_rope: 0.97, p_right: 0.02 },
        Theta { p_left: 0.0, p_rope: 1.0, p_right: 0.0 },
        Theta { p_left: 0.049, p_rope: 0.951, p_right: 0.0 },
        Theta { p_left: 0.051, p_rope: 0.949, p_right: 0.0 },
        Theta { p_left: 0.999, p_rope: 0.001, p_right: 0.0 },
    ];
    let mut cells = vec![vec![Verdict::NoDecision; k]; k];
    for i in 0..k {
        cells[i][i] = Verdict::Rope;
        if i != top {
            let v = thetas[i].verdict(0.95);
            cells[top][i] = v;
            cells[i][top] = v.transposed();
        }
    }
    // pairs not involving the top model must not matter
    cells[0][2] = Verdict::XBetter;
    cells[2][0] = Verdict::YBetter;
    let matrix = DecisionMatrix { models: models.clone(), cells, threshold: 0.95 };
    let fam = bayes_family(&matrix, &means, true);
    if fam.members != names(&["b", "a", "c"]) {
        problems.push(format!("bayes fixture A: {:?}", fam.members));
    }

    // Bayes end to end: b and c within 0.002 of a, d far behind.
    let offsets = [0.0, -0.001, -0.002, -0.05];
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let values = (0..12)
        .map(|_| {
            let base = rng.random_range(0.7..0.8);
            let noise: Vec<f64> = (0..10).map(|_| 0.002 * gauss(&mut rng)).collect();
            offsets.iter().map(|o| noise.iter().map(|e| base + o + e).collect()).collect()
        })
        .collect();
    let table = PerfTable::from_grid(
        (0..12).map(|i| format!("d{i}")).collect(),
        names(&["a", "b", "c", "d"]),
        (1..=10).map(|f| FoldId::new(f, 1).unwrap()).collect(),
        values,
        MetricSpec::auc(),
    )
    .unwrap();
    match modelcmp::bayes::bayes_decision_matrix(&table, &default_bayes(1.0 / 9.0), 3, None) {
        Ok(a) => {
            let fam = bayes_family(&a.matrix, &overall_means(&table), true);
            if fam.members != names(&["a", "b", "c"]) {
                problems.push(format!("bayes fixture B: {:?}", fam.members));
            }
        }
        Err(e) => problems.push(format!("bayes fixture B: {e}")),
    }

    // Naive: a singleton or a reported tie, never anything else.
    let mut rng = ChaCha8Rng::seed_from_u64(1011);
    let (mut singletons, mut ties) = (0, 0);
    for s in 0..500 {
        let k = rng.random_range(2..=6);
        let t = if s % 2 == 0 {
            generate_null_table(rng.random_range(1..=8), k, rng.random_range(2..=5), s).unwrap()
        } else {
            // coarse values so exact ties occur
            let n = rng.random_range(1..=3);
            let r = rng.random_range(2..=3);
            let values = (0..n)
                .map(|_| (0..k).map(|_| (0..r).map(|_| rng.random_range(0..4) as f64 / 4.0).collect()).collect())
                .collect();
            PerfTable::from_grid(
                (0..n).map(|i| format!("d{i}")).collect(),
                (0..k).map(|j| format!("m{j}")).collect(),
                (1..=r as u32).map(|f| FoldId::new(f, 1).unwrap()).collect(),
                values,
                MetricSpec::auc(),
            )
            .unwrap()
        };
        let means = overall_means(&t);
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmax: Vec<String> = (0..k).filter(|&j| means[j] == best).map(|j| t.models()[j].clone()).collect();
        match naive_best(&t) {
            Ok(f) if argmax.len() == 1 && f.members == argmax => singletons += 1,
            Err(Error::NaiveTie(tied)) if argmax.len() > 1 && tied == argmax => ties += 1,
            other => problems.push(format!("naive table {s}: {other:?} vs argmax {argmax:?}")),
        }
    }
    verdict(
        problems.is_empty(),
        format!("3 NHST and 2 Bayes fixtures, 500 naive tables ({singletons} singletons, {ties} ties); problems: {problems:?}"),
    )
}
