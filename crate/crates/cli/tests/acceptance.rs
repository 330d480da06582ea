//! End-to-end acceptance checks. Each criterion prints one line with its
//! verdict and the measured quantities; the process fails if any does.

#[path = "../../core/tests/support/fock_oracle.rs"]
mod fock_oracle;

use std::path::Path;
use std::time::{Duration, Instant};

use wfh_cli::run;
use wfh_core::analysis::{
    fit_exponential, fit_linear, scaling_analysis, threshold_crossing, transition_scan, DataSource, Reference,
    TransitionPoint, DEFAULT_LOWER_CUT, DEFAULT_THRESHOLD,
};
use wfh_core::calibration::lambda_from_mean;
use wfh_core::ingest::{read_diff_csv, read_photon_csv, read_tally_csv, RunConfig};
use wfh_core::nonclassicality::{sub_poissonian_witness, submultinomial_witness, EventTally};
use wfh_core::numerics::log_factorial;
use wfh_core::quantum::{diff_dist, heralded_joint, joint_ideal};
use wfh_core::states::{engineered_herald_dist, g2_of_dist, heralded_signal_dist};
use wfh_core::{ExperimentParams, TruncationPolicy};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<String, String> {
    let t = start.elapsed();
    if t <= limit {
        Ok(format!("{:.1}s", t.as_secs_f64()))
    } else {
        Err(format!("took {:.1}s, limit {}s", t.as_secs_f64(), limit.as_secs()))
    }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let trunc = TruncationPolicy::default();
    let mut worst: f64 = 0.0;
    for j in 0..=4 {
        for alpha_sq in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let oracle = fock_oracle::oracle_joint(j, alpha_sq, 40);
            let model = joint_ideal(j, alpha_sq, &trunc).map_err(|e| e.to_string())?;
            for (&(m, n), &p) in &oracle {
                worst = worst.max((p - model.get((m, n))).abs());
            }
        }
    }
    let time = within(Duration::from_secs(30), start)?;
    check(worst <= 1e-10, format!("max |difference| {worst:.2e}, {time}"))
}

fn variance_identity() -> Verdict {
    let trunc = TruncationPolicy::default();
    let (mut worst_mean, mut worst_var): (f64, f64) = (0.0, 0.0);
    for j in 0..=6u32 {
        for alpha_sq in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0] {
            let d = diff_dist(&joint_ideal(j, alpha_sq, &trunc).map_err(|e| e.to_string())?);
            let want = j as f64 + alpha_sq * (2.0 * j as f64 + 1.0);
            worst_mean = worst_mean.max(d.mean().abs());
            if want > 0.0 {
                worst_var = worst_var.max((d.variance() - want).abs() / want);
            } else {
                worst_var = worst_var.max(d.variance().abs());
            }
        }
    }
    check(
        worst_mean <= 1e-10 && worst_var <= 1e-8,
        format!("max |mean| {worst_mean:.2e}, max relative variance error {worst_var:.2e}"),
    )
}

fn lambda_round_trip() -> Verdict {
    let lambda = lambda_from_mean(0.689, 0.395).map_err(|e| e.to_string())?;
    check((lambda - 0.797).abs() <= 1e-3, format!("lambda = {lambda:.5}"))
}

fn signal_mean() -> Verdict {
    let p = ExperimentParams::table1(0.0);
    let mean = heralded_signal_dist(6, &p.source, &p.trunc).mean();
    check((mean - 10.37).abs() <= 0.05, format!("N = {mean:.4}"))
}

fn transition_reproduction() -> Verdict {
    let start = Instant::now();
    let params = ExperimentParams::table1(1.0);
    let grid: Vec<f64> = std::iter::once(6.52).chain((7..=30).map(f64::from)).chain([15.41]).collect();
    let scan = transition_scan(6, &grid, &params, &DataSource::Model, Reference::Classical).map_err(|e| e.to_string())?;
    let at = |a: f64| scan.iter().find(|p| p.alpha_sq == a).unwrap().s_classical;
    let (lo, hi) = (at(6.52), at(15.41));
    let crossing = threshold_crossing(&scan, DEFAULT_THRESHOLD);
    let time = within(Duration::from_secs(120), start)?;
    let crossing_text = match crossing {
        Some(c) if (10.0..=16.0).contains(&c) => format!("crossing at |alpha|^2 = {c:.2}"),
        Some(c) => format!("crossing at |alpha|^2 = {c:.2}, outside [10, 16]"),
        None => "no crossing on |alpha|^2 <= 30".into(),
    };
    let detail = format!(
        "S(6.52) = {lo:.3e}, S(15.41) = {hi:.3e}, ratio {:.2}, {crossing_text}, {time}",
        lo / hi
    );
    check(lo > DEFAULT_THRESHOLD && hi <= DEFAULT_THRESHOLD && lo / hi >= 10.0, detail)
}

fn exponential_fit() -> Verdict {
    let (a, b) = (2e-4, 0.5);
    let points: Vec<TransitionPoint> = [4.0, 8.0, 12.0]
        .iter()
        .map(|&x| TransitionPoint { alpha_sq: x, s_classical: a * f64::exp(-b * x), nu: 1 })
        .collect();
    let fit = fit_exponential(&points, DEFAULT_THRESHOLD, DEFAULT_LOWER_CUT).map_err(|e| e.to_string())?;
    let ea = (fit.a - a).abs() / a;
    let eb = (fit.b - b).abs() / b;
    let closed = (a / DEFAULT_THRESHOLD).ln() / b;
    let emin = (fit.alpha_sq_min - closed).abs() / closed;
    check(
        ea <= 1e-10 && eb <= 1e-10 && emin <= 1e-10,
        format!("relative errors A {ea:.1e}, B {eb:.1e}, alpha_sq_min {emin:.1e} ({:.3})", fit.alpha_sq_min),
    )
}

fn linear_scaling() -> Verdict {
    let start = Instant::now();
    let config = RunConfig::default();
    let params = ExperimentParams::table1(1.0);
    let result = scaling_analysis(&config.herald_outcomes, &config.alpha_sq_grid, &params, DEFAULT_THRESHOLD, DEFAULT_LOWER_CUT)
        .map_err(|e| e.to_string())?;
    let mut pts: Vec<(f64, f64)> = result.points.iter().map(|p| (p.n_mean, p.fit.alpha_sq_min)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = pts.windows(2).all(|w| w[1].1 >= w[0].1);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, intercept) = fit_linear(&xs, &ys).map_err(|e| e.to_string())?;
    let worst_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((y - slope * x - intercept) / (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    let time = within(Duration::from_secs(600), start)?;
    let values: Vec<String> = pts.iter().map(|(n, a)| format!("{n:.2}:{a:.2}")).collect();
    check(
        monotone && slope > 0.0,
        format!(
            "N:alpha_sq_min [{}], slope {slope:.3}, worst relative residual {worst_residual:.3}, {time}",
            values.join(" ")
        ),
    )
}

fn state_engineering() -> Verdict {
    let params = ExperimentParams::table1(15.41);
    let g_with = g2_of_dist(&engineered_herald_dist(6, 0, &params, true).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let g_without = g2_of_dist(&engineered_herald_dist(6, 0, &params, false).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    check(
        (1.08..=1.30).contains(&g_with) && (1.44..=1.74).contains(&g_without),
        format!("g2 interfering {g_with:.4}, non-interfering {g_without:.4}"),
    )
}

fn nonclassicality_suite() -> Verdict {
    let params = ExperimentParams::table1(0.0);
    let mut tally = EventTally::new(6);
    for j in 0..=6 {
        let joint = heralded_joint(j, &params).map_err(|e| e.to_string())?;
        tally.add_expected(j, &joint, 1e6).map_err(|e| e.to_string())?;
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 1..=6 {
        let mu = submultinomial_witness(&tally, j).map_err(|e| e.to_string())?;
        let g = sub_poissonian_witness(&tally, j).map_err(|e| e.to_string())?;
        ok &= mu < 0.0 && g < 1.0;
        parts.push(format!("j={j}: mu {mu:.3}, g2 {g:.3}"));
    }
    // classical nulls: thermal heralded vacuum and coherent light split on a beam splitter
    let mu0 = submultinomial_witness(&tally, 0).map_err(|e| e.to_string())?;
    let g0 = sub_poissonian_witness(&tally, 0).map_err(|e| e.to_string())?;
    ok &= mu0 >= -1e-10 && g0 >= 1.0;
    let mut coherent = EventTally::new(60);
    let half: f64 = 1.5;
    let pmf = |k: u32| (-half + k as f64 * half.ln() - log_factorial(k)).exp();
    for k in 0..=60 {
        for l in 0..=60 {
            coherent.add(0, k, l, 1e6 * pmf(k) * pmf(l)).map_err(|e| e.to_string())?;
        }
    }
    let mu_c = submultinomial_witness(&coherent, 0).map_err(|e| e.to_string())?;
    let g_c = sub_poissonian_witness(&coherent, 0).map_err(|e| e.to_string())?;
    // g2 of a Poisson distribution is 1; allow floating-point rounding only
    ok &= mu_c >= -1e-10 && g_c >= 1.0 - 1e-12;
    parts.push(format!("thermal null: mu {mu0:.1e}, g2 {g0:.3}"));
    parts.push(format!("coherent null: mu {mu_c:.1e}, g2 {g_c:.12}"));
    check(ok, parts.join("; "))
}

fn cli(args: &[String]) -> Result<(String, wfh_cli::Outcome), String> {
    let mut out = Vec::new();
    let mut full = vec!["wfh-sim".to_string()];
    full.extend_from_slice(args);
    let outcome = run(&full, &mut out).map_err(|e| format!("{full:?}: {e}"))?;
    Ok((String::from_utf8(out).map_err(|e| e.to_string())?, outcome))
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn normalization_sweep(dir: &Path) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut deficits = 0;
    let mut max_deficit: f64 = 0.0;
    let mut record = |total: f64, outcome: &wfh_cli::Outcome| {
        worst = worst.max((total - 1.0).abs());
        count += 1;
        for (_, d) in &outcome.deficits {
            deficits += 1;
            max_deficit = max_deficit.max(d.abs());
        }
    };
    for preset in ["ideal", "table1"] {
        for j in 0..=6u32 {
            for alpha_sq in ["0", "6.52", "15.41"] {
                let js = j.to_string();
                let file = dir.join(format!("{preset}_{j}_{alpha_sq}.csv"));
                let f = file.to_str().unwrap();
                let (_, o) = cli(&args(&["--preset", preset, "model-quantum", "--j", &js, "--alpha-sq", alpha_sq, "--out", f]))?;
                record(read_diff_csv(std::fs::File::open(&file).unwrap()).map_err(|e| e.to_string())?.total(), &o);
                if alpha_sq != "0" {
                    let (_, o) = cli(&args(&["--preset", preset, "model-classical", "--j", &js, "--alpha-sq", alpha_sq, "--out", f]))?;
                    record(read_diff_csv(std::fs::File::open(&file).unwrap()).map_err(|e| e.to_string())?.total(), &o);
                }
                match cli(&args(&["--preset", preset, "engineer", "--m", &js, "--n", "0", "--alpha-sq", alpha_sq, "--out", f])) {
                    Ok((_, o)) => record(read_photon_csv(std::fs::File::open(&file).unwrap()).map_err(|e| e.to_string())?.total(), &o),
                    // an ideal detector cannot register more photons than exist
                    Err(e) if e.contains("unreachable") => {}
                    Err(e) => return Err(e),
                }
                let (_, o) = cli(&args(&["--preset", preset, "model-tally", "--js", &js, "--alpha-sq", alpha_sq, "--max-outcome", "400", "--out", f]))?;
                let tally = read_tally_csv(std::fs::File::open(&file).unwrap(), 400).map_err(|e| e.to_string())?;
                let total: f64 = tally.iter().map(|(_, c)| c).sum::<f64>() / 1e6;
                record(total, &o);
            }
            let sub = dir.join(format!("states_{preset}_{j}"));
            let (_, o) = cli(&args(&["--preset", preset, "states", "--j", &j.to_string(), "--out-dir", sub.to_str().unwrap()]))?;
            record(read_photon_csv(std::fs::File::open(sub.join("photon_number.csv")).unwrap()).map_err(|e| e.to_string())?.total(), &o);
        }
    }
    check(
        worst <= 1e-9 && deficits >= count,
        format!("{count} distributions, max |sum - 1| {worst:.1e}, {deficits} deficits logged (max {max_deficit:.1e})"),
    )
}

fn determinism(dir: &Path) -> Verdict {
    let pulses = dir.join("pulses.csv");
    write_pulses(&pulses);
    let counts = dir.join("counts.json");
    std::fs::write(
        &counts,
        r#"{"herald_singles": 52000, "signal_singles_c": 9000, "signal_singles_d": 11000,
            "coincidences_hc": 2800, "coincidences_hd": 3600, "trials": 10000000,
            "mean_photons": {"herald": 0.689, "coherent_c": 2.11, "coherent_d": 2.71}}"#,
    )
    .unwrap();
    let config = dir.join("run.toml");
    let cfg = RunConfig { seed: 12345, alpha_sq_grid: vec![4.0, 6.0, 8.0, 10.0, 12.0], ..RunConfig::default() };
    std::fs::write(&config, cfg.to_toml()).unwrap();

    let mut compared = 0;
    for round in ["a", "b"] {
        let d = dir.join(format!("det_{round}"));
        std::fs::create_dir_all(&d).unwrap();
        let p = |name: &str| d.join(name).to_str().unwrap().to_string();
        let c = config.to_str().unwrap();
        let commands: Vec<Vec<String>> = vec![
            args(&["--config", c, "model-quantum", "--j", "3", "--alpha-sq", "6.52", "--out", &p("q.csv")]),
            args(&["--config", c, "model-classical", "--j", "3", "--alpha-sq", "6.52", "--out", &p("c.csv")]),
            args(&["--config", c, "transition-scan", "--j", "2", "--out", &p("scan.csv")]),
            args(&["--config", c, "fit-alpha-min", "--in", &p("scan.csv"), "--out", &p("fit.json")]),
            args(&["--config", c, "scaling", "--js", "1,3", "--out", &p("scaling.json")]),
            args(&["--config", c, "model-tally", "--js", "0,1,2", "--out", &p("tally.csv")]),
            args(&["--config", c, "nonclassicality", "--tally", &p("tally.csv"), "--out", &p("witness.json")]),
            args(&["--config", c, "engineer", "--m", "2", "--n", "1", "--alpha-sq", "4", "--out", &p("eng.csv")]),
            args(&["--config", c, "calibrate", "--counts", counts.to_str().unwrap(), "--out", &p("cal.json")]),
            args(&["--config", c, "states", "--j", "2", "--out-dir", &p("states")]),
            args(&["--config", c, "bin-pulses", "--in", pulses.to_str().unwrap(), "--out-dir", &p("pulses")]),
            args(&["--config", c, "residual-metric", "--observed", &p("q.csv"), "--model", &p("c.csv"), "--out", &p("res.json")]),
        ];
        for cmd in commands {
            cli(&cmd)?;
        }
        compared = 0;
        for entry in walk(&d) {
            let rel = entry.strip_prefix(&d).unwrap();
            if round == "b" {
                let a = std::fs::read(dir.join("det_a").join(rel)).map_err(|e| format!("{rel:?}: {e}"))?;
                let b = std::fs::read(&entry).unwrap();
                if a != b {
                    return Err(format!("{} differs between runs", rel.display()));
                }
            }
            compared += 1;
        }
    }
    check(compared >= 14, format!("{compared} output files byte-identical across two runs of 12 subcommands"))
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn write_pulses(path: &Path) {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let noise = Normal::new(0.0, 0.08).unwrap();
    let mut text = String::from("trial,channel,value\n");
    for trial in 0..3000 {
        for ch in ["herald", "c", "d"] {
            let k: u32 = rng.gen_range(0..3);
            text.push_str(&format!("{trial},{ch},{}\n", k as f64 + noise.sample(&mut rng)));
        }
    }
    std::fs::write(path, text).unwrap();
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("1 oracle equivalence", Box::new(oracle_equivalence)),
        ("2 variance identity", Box::new(variance_identity)),
        ("3 lambda round trip", Box::new(lambda_round_trip)),
        ("4 signal mean", Box::new(signal_mean)),
        ("5 transition reproduction", Box::new(transition_reproduction)),
        ("6 exponential fit", Box::new(exponential_fit)),
        ("7 linear scaling", Box::new(linear_scaling)),
        ("8 state engineering", Box::new(state_engineering)),
        ("9 nonclassicality suite", Box::new(nonclassicality_suite)),
        ("10 normalization sweep", Box::new({
            let d = dir.path().join("sweep");
            std::fs::create_dir_all(&d).unwrap();
            move || normalization_sweep(&d)
        })),
        ("11 determinism", Box::new({
            let d = dir.path().to_path_buf();
            move || determinism(&d)
        })),
    ];
    let mut failed = 0;
    for (name, criterion) in &criteria {
        match criterion() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
