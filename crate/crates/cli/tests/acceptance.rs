//! Acceptance checks, one PASS/FAIL line each. Monte Carlo experiments run
//! through the command-line binary on the committed plans.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::Value;
use tar_aarch::baselines::{arch_variance, black_scholes_price};
use tar_aarch::estimation::{fit_alternating, qll_from_paths, theta_equation_residuals, variance_scores};
use tar_aarch::model::{news_impact, residuals, variance_path};
use tar_aarch::rng::{derive_seed, CounterRng};
use tar_aarch::simulate::{simulate_path, SimConfig};
use tar_aarch::{AarchParams, ModelSpec, TarParams, ThresholdPartition};

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn reference() -> ModelSpec {
    ModelSpec::new(
        ThresholdPartition::new(1, vec![0.0]).unwrap(),
        TarParams::new(vec![vec![0.2, 0.5], vec![-0.3, -0.4]]).unwrap(),
        AarchParams::new(0.1, vec![0.4], vec![0.2]).unwrap(),
    )
    .unwrap()
}

/// Sequential uniforms from a counter stream.
struct Draws {
    rng: CounterRng,
    next: u64,
}

impl Draws {
    fn new(seed: u64) -> Self {
        Self {
            rng: CounterRng::new(seed),
            next: 0,
        }
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.next += 1;
        lo + (hi - lo) * self.rng.uniform(self.next - 1)
    }

    fn normal(&mut self) -> f64 {
        self.next += 1;
        self.rng.standard_normal(self.next - 1)
    }
}

fn plan(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("plans").join(name)
}

fn cli(args: &[&str]) -> (i32, Vec<u8>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tar-aarch"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        out.stdout,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run_plan(name: &str) -> Result<Value, String> {
    let path = plan(name);
    let (code, stdout, stderr) = cli(&["mc", path.to_str().unwrap()]);
    if code != 0 {
        return Err(format!("mc {name} exited {code}: {stderr}"));
    }
    serde_json::from_slice(&stdout).map_err(|e| e.to_string())
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default()
}

fn names(doc: &Value) -> Vec<String> {
    doc["param_names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect()
}

fn model_algebra() -> Check {
    let started = Instant::now();
    let mut draws = Draws::new(101);
    let (mut worst, mut below) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let q = 1 + (draws.uniform(0.0, 3.0) as usize).min(2);
        let alpha0 = draws.uniform(0.01, 2.0);
        let a: Vec<f64> = (0..q).map(|_| draws.uniform(0.0, 0.7)).collect();
        let b: Vec<f64> = (0..q).map(|_| draws.uniform(-0.5, 0.5)).collect();
        let e: Vec<f64> = (0..200).map(|_| 3.0 * draws.normal()).collect();
        let sym = AarchParams::new(alpha0, a.clone(), vec![0.0; q]).unwrap();
        let squared: Vec<f64> = a.iter().map(|v| v * v).collect();
        let arch = arch_variance(alpha0, &squared, &e).unwrap();
        for (x, y) in variance_path(&sym, &e, 0.0).iter().zip(&arch) {
            worst = worst.max((x - y).abs());
        }
        let asym = AarchParams::new(alpha0, a, b).unwrap();
        below += variance_path(&asym, &e, 0.0).iter().filter(|h| **h < alpha0).count();
        below += variance_path(&sym, &e, 0.0).iter().filter(|h| **h < alpha0).count();
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && below == 0 && secs < 5.0,
        format!("max |AARCH(beta=0) - ARCH(alpha^2)| = {worst:.2e} over 1000 sequences, {below} values below alpha0, {secs:.2} s"),
    )
}

fn asymmetry() -> Check {
    let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
    let cases = [(0.4, 0.2), (0.3, -0.1), (0.9, 0.05), (0.2, -0.6)];
    let mut equal_when_asymmetric = 0;
    for (a, b) in cases {
        for lag_q in [1usize, 2] {
            let aarch = AarchParams::new(0.1, vec![a; lag_q], vec![b; lag_q]).unwrap();
            for &e in &grid {
                let lag = lag_q;
                if news_impact(&aarch, e, lag).unwrap() == news_impact(&aarch, -e, lag).unwrap() {
                    equal_when_asymmetric += 1;
                }
            }
        }
    }
    let mut worst_sym = 0.0f64;
    for a in [0.0, 0.1, 0.4, 0.9] {
        let aarch = AarchParams::new(0.1, vec![a, a / 2.0], vec![0.0, 0.0]).unwrap();
        for lag in [1, 2] {
            for &e in &grid {
                let d = news_impact(&aarch, e, lag).unwrap() - news_impact(&aarch, -e, lag).unwrap();
                worst_sym = worst_sym.max(d.abs());
            }
        }
    }
    check(
        equal_when_asymmetric == 0 && worst_sym <= 1e-15,
        format!("{equal_when_asymmetric} equal pairs with alpha*beta != 0 on a 100-point grid; max |difference| with beta = 0: {worst_sym:.1e}"),
    )
}

fn estimating_equations() -> Check {
    let spec = reference();
    let (mut theta_worst, mut alpha_worst, mut failures) = (0.0f64, 0.0f64, 0);
    for r in 0..50u64 {
        let path = simulate_path(&spec, &SimConfig::new(2000, derive_seed(3, 2000, r))).unwrap();
        match fit_alternating(&path.series, spec.partition(), 1, 1, None) {
            Ok(fit) => {
                let eq = theta_equation_residuals(&path.series, &fit.spec).unwrap();
                theta_worst = theta_worst.max(eq.max_abs());
                let e = residuals(&fit.spec, &path.series).unwrap();
                let skip = fit.spec.conditioning() - fit.spec.mean_lag();
                for g in variance_scores(&e[skip..], fit.spec.aarch()) {
                    alpha_worst = alpha_worst.max(g.abs());
                }
            }
            Err(_) => failures += 1,
        }
    }
    check(
        failures == 0 && theta_worst < 1e-6 && alpha_worst < 1e-6,
        format!("50 fits at n=2000: mean equations max {theta_worst:.2e}, variance equations max {alpha_worst:.2e}, {failures} failed"),
    )
}

fn consistency_and_normality(doc: &Result<Value, String>) -> (Check, Check) {
    let doc = match doc {
        Ok(d) => d,
        Err(e) => return (check(false, e.clone()), check(false, e.clone())),
    };
    let names = names(doc);
    let ratios = floats(&doc["diagnostics"]["rmse_ratios"][0]["ratios"]);
    let ratio_ok = ratios.len() == names.len() && ratios.iter().all(|r| (1.25..=1.60).contains(r));
    let listed = |v: &[f64]| {
        names
            .iter()
            .zip(v)
            .map(|(n, x)| format!("{n} {x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let c4 = check(ratio_ok, format!("RMSE(4000)/RMSE(8000): {}", listed(&ratios)));

    let large = doc["summaries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["n"] == 8000)
        .expect("n = 8000 in plan");
    let coverage = floats(&large["coverage"]);
    let normality = doc["diagnostics"]["normality"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["n"] == 8000);
    let skew: Vec<f64> = normality
        .map(|s| {
            s["coordinates"]
                .as_array()
                .unwrap()
                .iter()
                .map(|c| c["skewness"].as_f64().unwrap_or(f64::NAN))
                .collect()
        })
        .unwrap_or_default();
    let cover_ok = coverage.len() == names.len() && coverage.iter().all(|c| (0.90..=0.98).contains(c));
    let skew_ok = skew.len() == names.len() && skew.iter().all(|s| s.abs() < 0.2);
    let c5 = check(
        cover_ok && skew_ok,
        format!("n=8000 coverage: {}; skewness: {}", listed(&coverage), listed(&skew)),
    );
    (c4, c5)
}

fn efficiency(doc: Result<Value, String>) -> Check {
    let doc = match doc {
        Ok(d) => d,
        Err(e) => return check(false, e),
    };
    let rows = doc["diagnostics"]["efficiency"]["rows"].as_array().cloned().unwrap_or_default();
    let mut ok = !rows.is_empty();
    let mut parts = Vec::new();
    for r in &rows {
        let name = r["name"].as_str().unwrap();
        let ratio = r["ratio"].as_f64().unwrap_or(f64::NAN);
        let fine = if name.starts_with("phi") {
            ratio >= 0.9
        } else {
            (0.9..=1.1).contains(&ratio)
        };
        ok &= fine;
        parts.push(format!("{name} {ratio:.3}"));
    }
    check(
        ok,
        format!("var(concentrated)/var(full), n=4000, R=500: {}", parts.join(", ")),
    )
}

fn search(doc: Result<Value, String>) -> Check {
    let doc = match doc {
        Ok(d) => d,
        Err(e) => return check(false, e),
    };
    let s = &doc["summaries"][0];
    let truth_delay = doc["plan"]["true_spec"]["delay"].as_u64();
    let mode = s["delay_mode"].as_u64();
    let err = s["median_abs_threshold_error"].as_f64().unwrap_or(f64::NAN);
    check(
        mode.is_some() && mode == truth_delay && err < 0.3,
        format!("modal delay {mode:?} (truth {truth_delay:?}), median threshold error {err:.4}, {} replicates", s["replicates"]),
    )
}

/// Five-point central differences of `qll` in `(alpha0, alpha, beta)`.
fn numeric_scores(e: &[f64], aarch: &AarchParams) -> Vec<f64> {
    let q = aarch.order();
    let mut v = vec![aarch.alpha0()];
    v.extend_from_slice(aarch.alphas());
    v.extend_from_slice(aarch.betas());
    let f = |w: &[f64]| {
        let a = AarchParams::new(w[0], w[1..=q].to_vec(), w[q + 1..].to_vec()).unwrap();
        qll_from_paths(e, &variance_path(&a, e, 0.0))
    };
    (0..v.len())
        .map(|i| {
            let h = 1e-4 * if i == 0 { v[0] } else { v[i].abs().max(0.1) };
            let at = |k: f64| {
                let mut w = v.clone();
                w[i] += k * h;
                f(&w)
            };
            (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
        })
        .collect()
}

fn gradients() -> Check {
    let mut draws = Draws::new(808);
    let mut worst = 0.0f64;
    for point in 0..100u64 {
        let q = 1 + (point % 2) as usize;
        let alpha0 = draws.uniform(0.05, 1.0);
        let raw: Vec<f64> = (0..2 * q).map(|_| draws.uniform(-1.0, 1.0)).collect();
        let budget = draws.uniform(0.05, 0.95);
        let scale = (budget / raw.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let alphas = raw[..q].iter().map(|v| v.abs() * scale).collect();
        let betas = raw[q..].iter().map(|v| v * scale).collect();
        let aarch = AarchParams::new(alpha0, alphas, betas).unwrap();
        let spec = ModelSpec::new(
            ThresholdPartition::single(1).unwrap(),
            TarParams::new(vec![vec![0.0, 0.3]]).unwrap(),
            aarch.clone(),
        )
        .unwrap();
        let path = simulate_path(&spec, &SimConfig::new(1000, 5000 + point)).unwrap();
        let e = &path.innovations;
        for (g, f) in variance_scores(e, &aarch).iter().zip(numeric_scores(e, &aarch)) {
            worst = worst.max((g - f).abs() / g.abs().max(f.abs()).max(1.0));
        }
    }
    check(
        worst < 1e-6,
        format!("max relative gap between analytic and finite-difference scores at 100 points: {worst:.2e}"),
    )
}

/// Discounted risk-neutral expectation of the call payoff by composite Simpson.
fn integrated_call(s: f64, k: f64, r: f64, sigma: f64, tau: f64) -> f64 {
    let vol = sigma * tau.sqrt();
    let drift = (r - 0.5 * sigma * sigma) * tau;
    let boundary = ((k / s).ln() - drift) / vol;
    let (lo, hi) = (boundary.max(-12.0), 12.0f64.max(boundary + 1.0));
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let g = |z: f64| {
        let payoff = (s * (drift + vol * z).exp() - k).max(0.0);
        payoff * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut sum = g(lo) + g(hi);
    for i in 1..steps {
        sum += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (-r * tau).exp() * sum * h / 3.0
}

fn pricing() -> Check {
    let (k, r) = (100.0, 0.03);
    let mut worst = 0.0f64;
    for m in [0.8, 0.9, 1.0, 1.1, 1.2] {
        for sigma in [0.1, 0.2, 0.3, 0.4, 0.5] {
            for tau in [0.25, 1.0, 2.0] {
                let price = black_scholes_price(m * k, k, r, sigma, tau).unwrap();
                worst = worst.max((price - integrated_call(m * k, k, r, sigma, tau)).abs());
            }
        }
    }
    let mut limit = 0.0f64;
    for (s, strike, rate, tau) in [(100.0, 90.0, 0.0, 1.0), (100.0, 90.0, 0.05, 2.0), (80.0, 100.0, 0.03, 1.0)] {
        let exact = (s - strike * f64::exp(-rate * tau)).max(0.0);
        limit = limit.max((black_scholes_price(s, strike, rate, 1e-12, tau).unwrap() - exact).abs());
    }
    check(
        worst < 1e-6 && limit < 1e-6,
        format!("max |BS - quadrature| on 5x5x3 grid {worst:.2e}; sigma->0 limit gap {limit:.2e}"),
    )
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("tar-aarch-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let spec = plan("reference_spec.json");
    let sim = |threads: &str| {
        cli(&["simulate", "--spec", spec.to_str().unwrap(), "--n", "2000", "--seed", "17", "--threads", threads]).1
    };
    let small = dir.join("small.json");
    std::fs::write(
        &small,
        r#"{"true_spec":{"p":1,"q":1,"delay":1,"thresholds":[0.0],"tar":[[0.2,0.5],[-0.3,-0.4]],
            "alpha0":0.1,"alphas":[0.4],"betas":[0.2]},"sample_sizes":[300,600],"replicates":8,"base_seed":5}"#,
    )
    .unwrap();
    let mc = |plan: &Path, threads: &str| -> Vec<u8> {
        let rows = dir.join(format!("rows-{threads}.csv"));
        let (_, mut summary, _) = cli(&[
            "mc",
            plan.to_str().unwrap(),
            "--threads",
            threads,
            "--rows",
            rows.to_str().unwrap(),
        ]);
        summary.extend(std::fs::read(&rows).unwrap_or_default());
        summary
    };
    let s1 = sim("1");
    let sim_ok = !s1.is_empty() && s1 == sim("1") && s1 == sim("4");
    let trivial = plan("trivial.json");
    let mut mc_ok = true;
    for p in [trivial.as_path(), small.as_path()] {
        let first = mc(p, "1");
        mc_ok &= first.len() > 100 && first == mc(p, "1") && first == mc(p, "4");
    }
    let _ = std::fs::remove_dir_all(&dir);
    check(
        sim_ok && mc_ok,
        format!("simulate identical across runs and 1/4 threads: {sim_ok}; mc (R=1 and R=8 plans): {mc_ok}"),
    )
}

fn main() {
    let consistency = run_plan("consistency.json");
    let (c4, c5) = consistency_and_normality(&consistency);
    let checks = [
        ("model algebra", model_algebra()),
        ("asymmetry", asymmetry()),
        ("estimating equations", estimating_equations()),
        ("consistency", c4),
        ("asymptotic normality", c5),
        ("efficiency ordering", efficiency(run_plan("efficiency.json"))),
        ("threshold/delay search", search(run_plan("lynx_search.json"))),
        ("gradient correctness", gradients()),
        ("pricing utility", pricing()),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, c)) in checks.iter().enumerate() {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {name}: {}", i + 1, c.detail);
        failed += usize::from(!c.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
