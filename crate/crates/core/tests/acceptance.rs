//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xdiff::autodiff::{cross_partial, fd_oracle, Scalar, ScalarFn};
use xdiff::cam::{grad_cam, hessian_cam, taylor_cam, CamOptions, FeatureGrid};
use xdiff::eval::{mean_auc_across_orders, run_suite, AucReport, SuiteConfig, Trial};
use xdiff::model::{Mlp, MlpConfig};
use xdiff::synth::{FunctionId, SynthFunction, ARITY};
use xdiff::tnid::{aggregation_sweep, ModelOutput, Representative, Task};

type Outcome = (bool, String);

fn suite() -> &'static [Trial] {
    static TRIALS: OnceLock<Vec<Trial>> = OnceLock::new();
    TRIALS.get_or_init(|| run_suite(&SuiteConfig::default()).expect("suite runs"))
}

fn trials_of(id: FunctionId) -> Vec<&'static Trial> {
    suite().iter().filter(|t| t.function == id).collect()
}

/// 1-based variable sets as used in the function table.
fn zero_based(set: &[usize]) -> Vec<usize> {
    set.iter().map(|v| v - 1).collect()
}

fn random_subset(rng: &mut ChaCha8Rng, size: usize) -> Vec<usize> {
    let mut s = rand::seq::index::sample(rng, ARITY, size).into_vec();
    s.sort_unstable();
    s
}

fn autodiff_oracle_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut worst, mut redraws) = (0usize, 0.0f64, 0usize);
    let mut failures = Vec::new();
    for f in SynthFunction::all() {
        let plain = |x: &[f64]| f.eval_real(x);
        let mut points = 0;
        while points < 20 {
            let x = f.sample_point(&mut rng);
            let pairs: Vec<Vec<usize>> = (0..10).map(|_| random_subset(&mut rng, 2)).collect();
            let triples: Vec<Vec<usize>> = (0..5).map(|_| random_subset(&mut rng, 3)).collect();
            let mut results = Vec::new();
            let mut stencil_ok = true;
            for (set, h) in pairs.iter().map(|s| (s, 1e-4)).chain(triples.iter().map(|s| (s, 5e-3))) {
                match fd_oracle(plain, &x, set, h) {
                    Ok(fd) => results.push((set.clone(), fd)),
                    Err(_) => stencil_ok = false,
                }
            }
            if !stencil_ok {
                // the difference stencil left the domain
                redraws += 1;
                continue;
            }
            for (set, fd) in results {
                let ad = cross_partial(&f, &x, &set).expect("in-domain point");
                let err = (ad - fd).abs();
                let tol = if set.len() == 2 {
                    (1e-3 * fd.abs()).max(1e-3)
                } else {
                    1e-2 * fd.abs() + 1e-6
                };
                worst = worst.max(err / tol);
                if err > tol {
                    failures.push(format!("{} {set:?} ad {ad:e} fd {fd:e}", f.id));
                }
                checked += 1;
            }
            points += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(60);
    (
        pass,
        format!(
            "{checked} partials, worst error/tolerance {worst:.3}, {redraws} redrawn points, {:.1}s{}",
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!(", failures: {:?}", &failures[..failures.len().min(5)]) }
        ),
    )
}

fn closed_form_spot_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let f8 = SynthFunction::new(FunctionId::F8);
    let f5 = SynthFunction::new(FunctionId::F5);
    let ln2 = std::f64::consts::LN_2;
    let (mut worst8, mut worst5) = (0.0f64, 0.0f64);
    for _ in 0..10 {
        let x = f8.sample_point(&mut rng);
        let got = cross_partial(&f8, &x, &zero_based(&[3, 5, 6])).unwrap();
        let want = ln2.powi(3) * 2f64.powf(x[2] + x[4] + x[5]);
        worst8 = worst8.max((got - want).abs() / want.abs());
        let y = f5.sample_point(&mut rng);
        let got = cross_partial(&f5, &y, &zero_based(&[8, 9, 10])).unwrap();
        worst5 = worst5.max((got - 1.0).abs());
    }
    (
        worst8 <= 1e-9 && worst5 <= 1e-12,
        format!("F8 (ln 2)^3 2^(x3+x5+x6) max rel err {worst8:.2e}; F5 x8x9x10 max abs err {worst5:.2e}"),
    )
}

fn pairwise_benchmark() -> Outcome {
    let start = Instant::now();
    let report = AucReport::from_trials(suite());
    let avg = report.average();
    let strong = |id| report.row(id).map_or(0, |r| r.aucs.iter().filter(|&&a| a >= 0.95).count());
    let (f8, f10) = (strong(FunctionId::F8), strong(FunctionId::F10));
    let table: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {:.3}±{:.3}", r.function, r.mean, r.std))
        .collect();
    (
        avg >= 0.90 && f8 >= 2 && f10 >= 2,
        format!(
            "average AUC {avg:.4}; F8 >= 0.95 in {f8}/3, F10 in {f10}/3; [{}]; {:.0}s",
            table.join(", "),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn in_top(trial: &Trial, order: usize, set: &[usize]) -> bool {
    trial.ranking.top(order, 10).contains(&zero_based(set))
}

fn higher_order_property() -> Outcome {
    let count = |id, order, set: &[usize]| trials_of(id).into_iter().filter(|t| in_top(t, order, set)).count();
    let f8_3 = count(FunctionId::F8, 3, &[3, 5, 6]);
    let f8_4 = count(FunctionId::F8, 4, &[3, 4, 5, 7]);
    let f6_3 = count(FunctionId::F6, 3, &[8, 9, 10]);
    (
        f8_3 >= 2 && f8_4 >= 2 && f6_3 >= 2,
        format!("F8 {{3,5,6}} top-10 in {f8_3}/3, F8 {{3,4,5,7}} in {f8_4}/3, F6 {{8,9,10}} in {f6_3}/3"),
    )
}

fn structural_invariant() -> Outcome {
    let mut reported = 0;
    let mut orphans = 0;
    let mut violations = 0;
    for t in suite() {
        violations += t.subsampling_violations;
        let cfg = &t.ranking.config;
        for order in cfg.full_order + 1..=cfg.max_order {
            let top_prev = t.ranking.parents.iter().flat_map(|p| p.get(&order)).flatten().collect::<Vec<_>>();
            for r in t.ranking.order(order) {
                reported += 1;
                if !top_prev.iter().any(|p| p.iter().all(|v| r.set.contains(v))) {
                    orphans += 1;
                }
            }
        }
    }
    (
        violations == 0 && orphans == 0 && reported > 0,
        format!("{reported} subsets above the exhaustive order across {} runs; {orphans} without a top-k parent, {violations} per-sample violations", suite().len()),
    )
}

/// `Σ_p x_{0p} x_{1p}`.
struct Bilinear {
    n: usize,
    d: usize,
}

impl ScalarFn for Bilinear {
    fn input_dim(&self) -> usize {
        self.n * self.d
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> xdiff::Result<S> {
        let mut acc = x[0].lift(0.0);
        for p in 0..self.d {
            acc = acc + x[p].clone() * x[self.d + p].clone();
        }
        Ok(acc)
    }
}

/// `Σ_i g_i(x_i)` with a different smooth `g` per vector.
struct Additive {
    n: usize,
    d: usize,
}

impl ScalarFn for Additive {
    fn input_dim(&self) -> usize {
        self.n * self.d
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> xdiff::Result<S> {
        let mut acc = x[0].lift(0.0);
        for i in 0..self.n {
            let block = &x[i * self.d..(i + 1) * self.d];
            let mut inner = x[0].lift(0.0);
            for (p, v) in block.iter().enumerate() {
                inner = inner + v.scale(p as f64 + 1.0);
            }
            acc = acc + inner.sin()?.scale(i as f64 + 1.0) + inner.square();
        }
        Ok(acc)
    }
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureGrid {
    FeatureGrid::new(Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0))).unwrap()
}

fn hessian_cam_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let directed = CamOptions {
        symmetrize: false,
        ..CamOptions::default()
    };
    let mut worst = 0.0f64;
    let mut nonzero = 0;
    for _ in 0..50 {
        let (n, d) = (rng.gen_range(2..6), rng.gen_range(1..6));
        let grid = random_grid(&mut rng, n, d);
        let s = hessian_cam(&Bilinear { n, d }, &grid, &directed).unwrap();
        let want = grid.x.row(0).sum().powi(2);
        worst = worst.max((s.get(&[0, 1]) - want).abs() / want.max(1.0));
        let additive = hessian_cam(&Additive { n, d }, &grid, &CamOptions::default()).unwrap();
        nonzero += additive.values.iter().filter(|&&v| v != 0.0).count();
    }
    (
        worst <= 1e-12 && nonzero == 0,
        format!("bilinear S12^2 vs (sum_p x1p)^2 max err {worst:.2e} over 50 grids; {nonzero} nonzero additive saliences"),
    )
}

fn taylor_cam_reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let raw = CamOptions {
        square: false,
        symmetrize: false,
        ..CamOptions::default()
    };
    let (mut mismatches, mut worst) = (0, 0.0f64);
    for draw in 0..20u64 {
        let (n, d) = (rng.gen_range(2..5), rng.gen_range(1..4));
        let cfg = MlpConfig {
            hidden: vec![7, 5],
            seed: draw,
            ..MlpConfig::new(n * d, 1)
        };
        let model = Mlp::init(cfg).unwrap();
        let f = ModelOutput::new(&model, Task::Regression).unwrap();
        let grid = random_grid(&mut rng, n, d);
        for opts in [CamOptions::default(), raw] {
            let first = taylor_cam(&f, &grid, 1, &opts).unwrap();
            for i in 0..n {
                if first.values[i].to_bits() != grad_cam(&f, &grid, i, &opts).unwrap().to_bits() {
                    mismatches += 1;
                }
            }
            let second = taylor_cam(&f, &grid, 2, &opts).unwrap();
            let hess = hessian_cam(&f, &grid, &opts).unwrap();
            if second.values.iter().zip(&hess.values).any(|(a, b)| a.to_bits() != b.to_bits()) {
                mismatches += 1;
            }
        }
        // differentiate the importance of vector i along every coordinate of j
        let s = hessian_cam(&f, &grid, &raw).unwrap();
        let h = 1e-5;
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let mut fd = 0.0;
                for m in 0..d {
                    let shifted = |delta: f64| {
                        let mut g = grid.clone();
                        g.x[[j, m]] += delta;
                        grad_cam(&f, &g, i, &raw).unwrap()
                    };
                    fd += (shifted(h) - shifted(-h)) / (2.0 * h);
                }
                let direct = s.get(&[i, j]);
                worst = worst.max((direct - fd).abs() / (fd.abs() + 1e-9));
            }
        }
    }
    (
        mismatches == 0 && worst <= 1e-3,
        format!("{mismatches} bitwise mismatches over 20 draws; importance-derivative rel err max {worst:.2e}"),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_xdiff")
}

fn xdiff(dir: &Path, threads: usize, args: &[&str]) -> std::process::Output {
    Command::new(bin())
        .arg("--out-dir")
        .arg(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .env_remove("XDIFF_SEED")
        .output()
        .expect("binary runs")
}

fn planted_pair_experiment() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = xdiff(dir.path(), 1, &["cam-demo", "--seeds", "20"]);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return (false, String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("cam_demo.json")).unwrap()).unwrap();
    let rate = report["hit_rate"].as_f64().unwrap();
    let hits = report["hits"].as_u64().unwrap();
    (
        rate >= 0.8 && elapsed <= Duration::from_secs(300),
        format!("top-1 pair equals planted pair in {hits}/20 seeds (rate {rate:.2}), {:.0}s", elapsed.as_secs_f64()),
    )
}

fn sweep_mechanics() -> Outcome {
    let trial = trials_of(FunctionId::F8)[0];
    let f = SynthFunction::new(FunctionId::F8);
    let data = f.sample_dataset(10_000, trial.seed).unwrap().normalize(false).unwrap();
    let model = ModelOutput::new(&trial.model, Task::Regression).unwrap();
    let truth = f.ground_truth();
    let rows = aggregation_sweep(&model, &data, &trial.ranking.config, |r| mean_auc_across_orders(r, &truth, ARITY)).unwrap();
    let has_label = rows.iter().any(|r| r.label == "Mean Of Mean-Min-Mode-Rand");
    let singles_agree = Representative::ALL.iter().all(|rep| {
        let scores: Vec<Option<f64>> = rows.iter().filter(|r| r.representatives == [*rep]).map(|r| r.score).collect();
        scores.len() == 5 && scores.iter().all(|s| *s == scores[0])
    });
    let sorted = rows.windows(2).all(|w| w[0].score >= w[1].score);
    (
        rows.len() == 315 && has_label && singles_agree && sorted,
        format!(
            "{} rows, labeled row present: {has_label}, single-sample rows agree: {singles_agree}, best `{}` {:.4}",
            rows.len(),
            rows[0].label,
            rows[0].score.unwrap_or(f64::NAN)
        ),
    )
}

/// Every output file of a run, with `run.json` minus its execution block.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).unwrap().to_path_buf();
            let mut bytes = std::fs::read(&path).unwrap();
            if rel == Path::new("run.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
                v.as_object_mut().unwrap().remove("execution");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(rel, bytes);
        }
    }
    out
}

fn determinism() -> Outcome {
    let inputs = tempfile::tempdir().unwrap();
    let base = inputs.path();
    let setup = [
        xdiff(base, 1, &["--seed", "5", "gen-data", "--function", "F8", "--samples", "400"]),
        xdiff(base, 1, &["--seed", "5", "train", "--data", base.join("data.csv").to_str().unwrap(), "--hidden", "24,12", "--max-epochs", "15"]),
    ];
    if let Some(bad) = setup.iter().find(|o| !o.status.success()) {
        return (false, format!("setup failed: {}", String::from_utf8_lossy(&bad.stderr)));
    }
    std::fs::write(base.join("grid.csv"), "0.3,-0.2\n1.1,0.4\n-0.7,0.9\n0.05,-1.2\n0.6,0.6\n").unwrap();
    let data = base.join("data.csv");
    let model = base.join("model.json");
    let grid = base.join("grid.csv");
    let (data, model, grid) = (data.to_str().unwrap(), model.to_str().unwrap(), grid.to_str().unwrap());
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("gen-data", vec!["--seed", "7", "gen-data", "--function", "F3", "--samples", "200", "--out", "d.json"]),
        ("train", vec!["--seed", "7", "train", "--data", data, "--hidden", "16,8", "--max-epochs", "8", "--patience", "3"]),
        ("detect", vec!["--seed", "7", "detect", "--model", model, "--data", data, "--max-order", "4"]),
        ("sweep", vec!["--seed", "7", "sweep", "--function", "F8", "--model", model, "--data", data, "--max-order", "3"]),
        ("suite", vec!["--seed", "7", "suite", "--functions", "F8,F10", "--trials", "2", "--samples", "400", "--max-epochs", "6", "--patience", "3", "--hidden", "24,12"]),
        ("cam", vec!["--seed", "7", "cam", "--model", model, "--grid", grid, "--order", "3", "--top", "5"]),
        ("cam (svg)", vec!["--seed", "7", "cam", "--model", model, "--grid", grid, "--layout", "1x5", "--svg", "s.svg"]),
        ("cam-demo", vec!["--seed", "7", "cam-demo", "--seeds", "3", "--samples", "400", "--hidden", "16,8"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &commands {
        let mut snaps = Vec::new();
        for threads in [1, 1, 4] {
            let dir = tempfile::tempdir().unwrap();
            let out = xdiff(dir.path(), threads, args);
            if !out.status.success() {
                return (false, format!("{name} failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
            snaps.push(snapshot(dir.path()));
        }
        if snaps[0].len() < 2 || snaps[0] != snaps[1] || snaps[0] != snaps[2] {
            differing.push(*name);
        }
    }
    (
        differing.is_empty(),
        format!("{} invocations compared over repeated runs and --threads 1/4; differing: {differing:?}", commands.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("autodiff oracle suite", autodiff_oracle_suite),
        ("closed-form spot checks", closed_form_spot_checks),
        ("pairwise benchmark", pairwise_benchmark),
        ("higher-order property", higher_order_property),
        ("subsampling structure", structural_invariant),
        ("Hessian-CAM analytic identity", hessian_cam_identity),
        ("Taylor-CAM reductions", taylor_cam_reductions),
        ("planted-pair CAM experiment", planted_pair_experiment),
        ("sweep mechanics", sweep_mechanics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
