//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use covbal_api::{CreateTrialRequest, EnrollRequest, Standardization, TrialStatus};
use covbal_client::Client;
use covbal_core::methods::{evaluate, kernel_density, run_subjects, Phase};
use covbal_core::metrics::energy_distance;
use covbal_core::simulator::{load_dataset, simulate, FiveNumber, ReplicateRecord, SimulationPlan};
use covbal_core::trial_core::{biased_coin_decide, Group, Method, MethodConfig, RngStream, Subject, TrialState};
use covbal_service::store::read_log;
use covbal_service::LiveTrial;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn normal(rng: &mut StdRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn run_plan(file: &str, methods: Vec<MethodConfig>, replicates: usize, seed: u64) -> Vec<ReplicateRecord> {
    let plan = SimulationPlan::new(load_dataset(data(file)).unwrap(), methods, replicates, seed);
    simulate(&plan).unwrap()
}

fn bkw_exact_balance() -> Outcome {
    let start = Instant::now();
    let mut worst = 0usize;
    let mut failed = 0usize;
    let mut total = 0usize;
    for (file, n) in [("oncology_18.csv", 18), ("neonatal_22.csv", 22)] {
        let records = run_plan(file, vec![MethodConfig::new(Method::Bkw, n)], 1000, 11);
        for r in &records {
            total += 1;
            match &r.report {
                Some(rep) => worst = worst.max(rep.abs_group_size_diff),
                None => failed += 1,
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst == 0 && failed == 0 && total == 2000 && secs < 60.0,
        format!(
            "{total} replicates (1000 on N=18, 1000 on N=22), max |N1-N2| = {worst}, failed = {failed}, {secs:.1} s"
        ),
    )
}

fn size_parity() -> Outcome {
    let records = run_plan(
        "oncology_18.csv",
        [Method::Ps, Method::Nt, Method::Mh]
            .map(|m| MethodConfig::new(m, 18))
            .to_vec(),
        1000,
        12,
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for m in ["ps", "nt", "mh"] {
        let diffs: Vec<f64> = records
            .iter()
            .filter(|r| r.method == m)
            .filter_map(|r| r.report.as_ref())
            .map(|r| r.abs_group_size_diff as f64)
            .collect();
        let odd = diffs.iter().filter(|&&d| d % 2.0 != 0.0).count();
        let median = FiveNumber::of(&diffs).map_or(f64::NAN, |s| s.median);
        pass &= diffs.len() == 1000 && odd == 0 && (median == 0.0 || median == 2.0);
        parts.push(format!("{m}: median {median}, odd {odd}"));
    }
    outcome(pass, parts.join("; "))
}

/// Independent evaluation of the robust objective for assigning the arriving
/// subject (`sign = +1` group one, `-1` group two). Returns infinity when the
/// candidate group already holds N/2 subjects.
fn oracle_objective(prior: &[(Vec<f64>, f64)], w: &[f64], sign: f64, n: usize, gamma: f64, rho: f64) -> f64 {
    let half = n / 2;
    let n1 = prior.iter().filter(|(_, s)| *s > 0.0).count();
    let n2 = prior.len() - n1;
    let (after1, after2) = if sign > 0.0 { (n1 + 1, n2) } else { (n1, n2 + 1) };
    if after1 > half || after2 > half {
        return f64::INFINITY;
    }
    let p = w.len();
    let t = prior.len() + 1;
    let all: Vec<&[f64]> = prior.iter().map(|(r, _)| r.as_slice()).chain([w]).collect();
    let mut total = 0.0;
    for j in 0..p {
        let mean = all.iter().map(|r| r[j]).sum::<f64>() / t as f64;
        // Row norm of the covariance square root equals sqrt of the diagonal entry.
        let var = all.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / t as f64;
        let norm = var.sqrt();
        let signs = prior.iter().map(|(_, s)| *s).chain([sign]);
        let (mut m, mut q) = (0.0, 0.0);
        for (r, s) in all.iter().zip(signs) {
            m += (r[j] - mean) * s;
            q += (r[j] - mean).powi(2) * s;
        }
        let rem = (n - t) as f64;
        let w_term = 2.0 / n as f64 * (m.abs() + gamma * norm * rem * (p as f64).sqrt());
        let spread = gamma * gamma * rem * p as f64 * var;
        let room1 = after1 < half;
        let room2 = after2 < half;
        let v = 2.0 / n as f64
            * f64::max(
                q + if room1 { spread } else { 0.0 },
                -q + if room2 { spread } else { 0.0 },
            );
        total += w_term + rho * v.sqrt();
    }
    total
}

fn bkw_argmin_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(31);
    let (mut checked, mut ties, mut mismatches) = (0usize, 0usize, 0usize);
    for trial in 0..200 {
        let n = [4, 6, 8, 10][rng.random_range(0..4)];
        let p = rng.random_range(1..=3);
        let mut config = MethodConfig::new(Method::Bkw, n);
        config.block_size = 2;
        config.n0 = if rng.random_bool(0.5) { 0 } else { 2 };
        let subjects: Vec<Subject> = (0..n)
            .map(|i| Subject::on_scale(i.to_string(), (0..p).map(|_| normal(&mut rng)).collect()))
            .collect();
        let records = run_subjects(subjects.clone(), &config, &RngStream::new(trial, 0)).unwrap();

        let mut prior: Vec<(Vec<f64>, f64)> = Vec::new();
        for (r, s) in records.iter().zip(&subjects) {
            if r.phase == Phase::Adaptive {
                let gamma = r.draws.gamma.unwrap();
                let one = oracle_objective(&prior, &s.standardized, 1.0, n, gamma, config.rho);
                let two = oracle_objective(&prior, &s.standardized, -1.0, n, gamma, config.rho);
                if (one - two).abs() <= 1e-9 * one.abs().max(1.0) {
                    ties += 1;
                } else {
                    checked += 1;
                    let best = if one < two { Group::One } else { Group::Two };
                    if best != r.group {
                        mismatches += 1;
                    }
                }
            }
            prior.push((s.standardized.clone(), if r.group == Group::One { 1.0 } else { -1.0 }));
        }
    }
    outcome(
        mismatches == 0 && checked > 0,
        format!("200 trials, {checked} adaptive choices compared, {mismatches} mismatches, {ties} ties excluded"),
    )
}

fn random_state(rng: &mut StdRng, method: Method) -> (TrialState, Subject, MethodConfig) {
    let p = rng.random_range(1..=4);
    let n = 2 * rng.random_range(3..=12);
    let mut config = MethodConfig::new(method, n);
    config.categories = rng.random_range(2..=4);
    let c = config.categories as u32;
    let allocated = rng.random_range(2..n);
    let subject = |rng: &mut StdRng, id: String| {
        let s = Subject::on_scale(id, (0..p).map(|_| normal(rng)).collect());
        if method == Method::Ps {
            s.with_categories((0..p).map(|_| rng.random_range(1..=c)).collect())
        } else {
            s
        }
    };
    let mut groups: Vec<Group> = (0..allocated)
        .map(|_| if rng.random_bool(0.5) { Group::One } else { Group::Two })
        .collect();
    groups[0] = Group::One;
    groups[1] = Group::Two;
    let categories = (method == Method::Ps).then_some(config.categories);
    let assignments: Vec<(Subject, Group)> = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| (subject(rng, i.to_string()), g))
        .collect();
    let state = TrialState::from_assignments(p, n, categories, assignments).unwrap();
    let arriving = subject(rng, "new".into());
    (state, arriving, config)
}

fn label_swap() -> Outcome {
    let mut rng = StdRng::seed_from_u64(41);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for method in Method::ALL {
        let mut m_worst = 0.0f64;
        for _ in 0..1000 {
            let (state, subject, config) = random_state(&mut rng, method);
            let gamma = (method == Method::Bkw).then(|| rng.random_range(0.5..4.0));
            let d = evaluate(&state, &subject, &config, gamma).unwrap().value();
            let ds = evaluate(&state.label_swapped(), &subject, &config, gamma)
                .unwrap()
                .value();
            m_worst = m_worst.max((d + ds).abs());
        }
        parts.push(format!("{method} {m_worst:.1e}"));
        worst = worst.max(m_worst);
    }
    outcome(
        worst < 1e-10,
        format!("1000 states per method, max |D + D_swapped|: {}", parts.join(", ")),
    )
}

fn naive_energy(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let mean_dist = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        let mut s = 0.0;
        for u in x {
            for v in y {
                s += dist(u, v);
            }
        }
        s / (x.len() * y.len()) as f64
    };
    2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b)
}

fn energy_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(51);
    let (mut max_err, mut min_e, mut max_ident) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..1000 {
        let p = rng.random_range(1..=4);
        let sample = |rng: &mut StdRng| -> Vec<Vec<f64>> {
            let k = rng.random_range(1..=15);
            (0..k).map(|_| (0..p).map(|_| normal(rng)).collect()).collect()
        };
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        let e = energy_distance(&a, &b).unwrap();
        max_err = max_err.max((e - naive_energy(&a, &b)).abs());
        min_e = min_e.min(e);

        let mut shuffled = a.clone();
        shuffled.shuffle(&mut rng);
        max_ident = max_ident.max(energy_distance(&a, &a).unwrap().abs());
        max_ident = max_ident.max(energy_distance(&a, &shuffled).unwrap().abs());
    }
    outcome(
        max_err <= 1e-12 && min_e >= -1e-12 && max_ident == 0.0,
        format!("1000 pairs, max |E - E_naive| = {max_err:.1e}, min E = {min_e:.3e}, max |E(A, A')| = {max_ident:.1e}"),
    )
}

fn cg_calibration() -> Outcome {
    let start = Instant::now();
    let mut config = MethodConfig::new(Method::Nt, 18);
    config.p0 = 0.5;
    let records = run_plan("oncology_18.csv", vec![config], 10_000, 61);
    let cgs: Vec<f64> = records.iter().filter_map(|r| r.report.as_ref()?.mean_cg).collect();
    let mean = cgs.iter().sum::<f64>() / cgs.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        cgs.len() == 10_000 && (mean - 0.5).abs() <= 0.01 && secs < 120.0,
        format!("10000 replicates, grand mean CG = {mean:.4}, {secs:.1} s"),
    )
}

fn coin_branches() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for p0 in [0.6, 0.8, 0.95] {
        for (label, d, expect) in [("D<0", -0.7f64, p0), ("D>0", 0.7, 1.0 - p0), ("D=0", 0.0, 0.5)] {
            let mut rng = RngStream::new((p0 * 100.0) as u64, d.to_bits());
            let ones = (0..100_000)
                .filter(|_| biased_coin_decide(d, p0, &mut rng).group == Group::One)
                .count();
            let freq = ones as f64 / 100_000.0;
            pass &= (freq - expect).abs() <= 0.005;
            parts.push(format!("P0={p0} {label}: {freq:.4} vs {expect:.2}"));
        }
    }
    outcome(pass, parts.join("; "))
}

fn kernel_normalization() -> Outcome {
    let mut rng = StdRng::seed_from_u64(71);
    let mut worst = 0.0f64;
    for size in 1..=20 {
        let sample: Vec<f64> = (0..size).map(|_| normal(&mut rng).clamp(-3.0, 3.0)).collect();
        let step = 1e-3;
        let steps = (20.0 / step) as usize;
        let mut integral = 0.0;
        for k in 0..=steps {
            let w = -10.0 + k as f64 * step;
            let weight = if k == 0 || k == steps { 0.5 } else { 1.0 };
            integral += weight * kernel_density(&sample, w);
        }
        worst = worst.max((integral * step - 1.0).abs());
    }
    outcome(
        worst <= 1e-4,
        format!("group sizes 1..20, max |integral - 1| = {worst:.1e}"),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_covbal")).args(args).output().unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = data("oncology_18.csv");
    let mut outputs = Vec::new();
    for (run, jobs) in [("a", None), ("b", None), ("c", Some("1")), ("d", Some("3"))] {
        let out = dir.path().join(run);
        let mut args = vec![
            "simulate",
            "--data",
            data.to_str().unwrap(),
            "--replicates",
            "300",
            "--seed",
            "99",
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(j) = jobs {
            args.extend(["--jobs", j]);
        }
        let status = run_cli(&args).status;
        if !status.success() {
            return outcome(false, format!("simulate exited with {status}"));
        }
        let records = std::fs::read(out.join("records.csv")).unwrap();
        let summary = std::fs::read(out.join("summary.json")).unwrap();
        outputs.push((records, summary));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!(
            "4 runs of 300 replicates x 4 methods (twice default jobs, --jobs 1, --jobs 3), records.csv {} bytes, identical = {same}",
            outputs[0].0.len()
        ),
    )
}

struct ServerProcess {
    child: Child,
    url: String,
}

fn spawn_server(data_dir: &Path) -> ServerProcess {
    let mut child = Command::new(env!("CARGO_BIN_EXE_covbal"))
        .args([
            "serve",
            "--listen",
            "127.0.0.1:0",
            "--seed-policy",
            "fixed:5",
            "--data-dir",
        ])
        .arg(data_dir)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected server banner {line:?}"))
        .to_string();
    ServerProcess { child, url }
}

fn crash_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let mut rng = StdRng::seed_from_u64(81);
    let mut lost = 0usize;
    let mut mismatched = 0usize;
    let mut acked_total = 0usize;
    let mut in_flight_kept = 0usize;
    let mut trials: Vec<String> = Vec::new();

    for point in 0..100 {
        let mut server = spawn_server(dir.path());
        let client = Client::new(server.url.clone());
        let (acked, in_flight, view_before, id) = rt.block_on(async {
            let recruiting = {
                let mut open = Vec::new();
                for t in &trials {
                    if client.trial(t).await.unwrap().status == TrialStatus::Recruiting {
                        open.push(t.clone());
                    }
                }
                open
            };
            let id = if recruiting.is_empty() || rng.random_bool(0.2) {
                let method = Method::ALL[rng.random_range(0..4)];
                let n = 2 * rng.random_range(6..=11);
                let p = rng.random_range(1..=3);
                let req = CreateTrialRequest {
                    config: MethodConfig::new(method, n),
                    covariate_names: (0..p).map(|j| format!("x{j}")).collect(),
                    seed: None,
                    standardization: if rng.random_bool(0.5) {
                        Standardization::Continuous
                    } else {
                        Standardization::FreezeAfterBlock
                    },
                };
                let id = client.create_trial(&req).await.unwrap().id;
                trials.push(id.clone());
                id
            } else {
                recruiting[rng.random_range(0..recruiting.len())].clone()
            };
            let p = client.trial(&id).await.unwrap().covariate_names.len();
            let mut acked = Vec::new();
            for _ in 0..rng.random_range(0..=6) {
                let req = EnrollRequest {
                    subject_id: None,
                    covariates: (0..p).map(|_| (normal(&mut rng) * 10.0).round() / 10.0).collect(),
                };
                match client.enroll(&id, &req).await {
                    Ok(e) => acked.push(e),
                    Err(e) if e.code() == Some("trial_full") => break,
                    Err(e) => panic!("crash point {point}: {e}"),
                }
            }
            let view = client.trial(&id).await.unwrap();
            // Half the time leave one request in flight when the process dies.
            let in_flight = if rng.random_bool(0.5) {
                let c = client.clone();
                let id2 = id.clone();
                let req = EnrollRequest {
                    subject_id: None,
                    covariates: vec![0.5; p],
                };
                Some(tokio::spawn(async move { c.enroll(&id2, &req).await }))
            } else {
                None
            };
            tokio::time::sleep(Duration::from_micros(rng.random_range(0..3000))).await;
            (acked, in_flight, view, id)
        });
        server.child.kill().unwrap();
        server.child.wait().unwrap();
        let in_flight_ack = in_flight.and_then(|h| rt.block_on(h).ok()).and_then(|r| r.ok());
        acked_total += acked.len();

        let server = spawn_server(dir.path());
        let client = Client::new(server.url.clone());
        let (events, view_after) = rt.block_on(async {
            (
                client.events(&id).await.unwrap().events,
                client.trial(&id).await.unwrap(),
            )
        });
        let mut server = server;
        server.child.kill().unwrap();
        server.child.wait().unwrap();

        // Every event acknowledged before the kill must be in the log, unchanged.
        let base = view_before.enrolled;
        let tail_ok = acked.iter().all(|a| events.get(a.seq - 1) == Some(a));
        let ack_ok = in_flight_ack.as_ref().is_none_or(|a| events.get(a.seq - 1) == Some(a));
        if !(tail_ok && ack_ok && events.len() >= base) {
            lost += 1;
        }
        if events.len() > base {
            in_flight_kept += 1;
        }

        // The restarted service, an offline replay of the log file, and the
        // pre-kill view must agree.
        let log = read_log(&dir.path().join("trials").join(format!("{id}.jsonl"))).unwrap();
        let offline = LiveTrial::replay(log.header, log.events).unwrap();
        let offline_view = offline.view().unwrap();
        let consistent = offline.events() == events.as_slice()
            && offline_view == view_after
            && (events.len() != base || view_after == view_before);
        if !consistent {
            mismatched += 1;
        }
    }
    outcome(
        lost == 0 && mismatched == 0,
        format!(
            "100 SIGKILL crash points over {} trials, {acked_total} acknowledged enrollments, {lost} lost, {mismatched} replay mismatches, {in_flight_kept} in-flight enrollments committed before the kill",
            trials.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("BKW exact size balance", bkw_exact_balance),
        ("PS/NT/MH size parity", size_parity),
        ("BKW argmin oracle", bkw_argmin_oracle),
        ("Label-swap antisymmetry", label_swap),
        ("Energy-distance oracle", energy_oracle),
        ("CG calibration", cg_calibration),
        ("Biased-coin branch probabilities", coin_branches),
        ("Kernel normalization", kernel_normalization),
        ("Determinism", determinism),
        ("Service crash-replay", crash_replay),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
