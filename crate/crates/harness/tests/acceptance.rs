//! Acceptance suite. Prints one PASS/FAIL line per criterion (plus `info`
//! lines) and exits nonzero if any criterion fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use eos_core::analysis::{self, VerificationReport};
use eos_core::constrained::{self, ConstrainedState};
use eos_core::dynamics::{self, GfOptions};
use eos_core::regions::{self, DEFAULT_PRODUCT_BOUND};
use eos_core::{model, ModelConfig, Params};
use eos_harness::config::{self, RunConfig};
use eos_harness::run::{self, RateRun};
use eos_harness::sweep;

const FIG1_STEPS: usize = 10_000;

struct Ledger {
    failed: Vec<u8>,
}

impl Ledger {
    fn record(&mut self, id: u8, title: &str, passed: bool, detail: impl AsRef<str>) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("C{id:<2} {verdict} {title}: {}", detail.as_ref());
        if !passed {
            self.failed.push(id);
        }
    }
}

fn info(id: u8, detail: impl AsRef<str>) {
    println!("C{id:<2} info {}", detail.as_ref());
}

fn summary(rep: &VerificationReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &n in names {
        match rep.get(n) {
            Some(c) => {
                ok &= c.passed && c.evaluated > 0;
                let v = match c.first_violation {
                    Some(t) => format!("violated at t={t}"),
                    None => format!("worst slack {:.3e}", c.worst_slack),
                };
                parts.push(format!("{n} {v} ({} evals)", c.evaluated));
            }
            None => {
                ok = false;
                parts.push(format!("{n} missing"));
            }
        }
    }
    (ok, parts.join("; "))
}

fn figure1_config() -> RunConfig {
    config::preset("figure1").expect("shipped preset parses")
}

fn figure1_start(cfg: &RunConfig) -> Params {
    run::initial_point(cfg).expect("figure1 start")
}

fn c1_c2_c4_c5_c8(ledger: &mut Ledger) {
    let cfg = figure1_config();
    let m = cfg.model().unwrap();
    let p0 = figure1_start(&cfg);

    let started = Instant::now();
    let traj = dynamics::simulate(&m, p0, FIG1_STEPS).expect("figure1 run stays finite");
    let lemma = analysis::verify_param_lemma(&traj).expect("figure1 start lies in X");
    let elapsed = started.elapsed();
    let (ok, detail) = summary(
        &lemma,
        &[
            "sharpness_lower",
            "sharpness_upper",
            "eigvec_alignment",
            "beta2_increasing",
        ],
    );
    let fast = elapsed < Duration::from_secs(2);
    ledger.record(
        1,
        "parameter lemma on the figure-1 run",
        ok && fast && traj.len() == FIG1_STEPS + 1,
        format!("{detail}; simulate+verify {elapsed:.2?} (< 2 s)"),
    );

    let phases = analysis::detect_phases(&traj).unwrap();
    let bands = analysis::verify_sharpness_bands(&traj, &phases).unwrap();
    let (ok, detail) = summary(&bands, &["pre_t1_band", "post_t1_band", "post_t1_alpha_scale"]);
    ledger.record(2, "sharpness bands", ok, format!("T1={:?}; {detail}", phases.t1));

    let conv = analysis::verify_convergence(&traj, run::CONVERGENCE_LOSS, run::CONVERGENCE_SHARPNESS).unwrap();
    let last = traj.last().unwrap();
    let (ok, _) = summary(&conv, &["final_loss", "final_sharpness"]);
    ledger.record(
        4,
        "global convergence within 10^4 steps",
        ok,
        format!(
            "final loss {:.3e} (<= 1e-4), final sharpness {:.3} (<= {:.1}), converged from t={:?}",
            last.parts.total,
            last.sharp.value,
            run::CONVERGENCE_SHARPNESS / m.eta(),
            analysis::convergence_time(&traj, run::CONVERGENCE_LOSS, run::CONVERGENCE_SHARPNESS / m.eta())
        ),
    );

    let lhat = analysis::verify_lhat(&traj, &phases).unwrap();
    let (ok, detail) = summary(&lhat, &["lhat_sandwich", "lhat_ratio", "lhat_slope"]);
    let slope = analysis::fit_decay_slope(&traj, 0..phases.t4.unwrap_or(0) + 1).ok();
    ledger.record(
        5,
        "surrogate loss for t <= T4",
        ok,
        format!("T4={:?}, fitted slope {slope:?}; {detail}", phases.t4),
    );

    let gfs = analysis::verify_gfs(&traj).unwrap();
    let (ok_path, detail) = summary(
        &gfs,
        &[
            "gfs_lower",
            "gfs_upper",
            "gfs_lower_nonincreasing",
            "gfs_upper_nonincreasing",
        ],
    );
    let floor = m.lambda1() - 1.0;
    let mut worst = f64::INFINITY;
    let mut balanced_ok = true;
    for seed in 0..100 {
        let p = regions::sample_x_balanced(&m, seed).expect("balanced X start");
        balanced_ok &= p.alpha == p.beta2;
        let phi = dynamics::gfs_analytic(&m, &p).unwrap().phi;
        worst = worst.min(phi);
        balanced_ok &= phi >= floor;
    }
    ledger.record(
        8,
        "GFS bounds along the figure-1 run",
        ok_path && balanced_ok,
        format!("{detail}; min phi(0) over 100 alpha=beta2 starts {worst:.4} (>= {floor})"),
    );
}

fn c1_c5_seed_survey() {
    let m = ModelConfig::new(100.0, 0.01, 0.05).unwrap();
    let mut lemma_ok = 0;
    let mut lhat_ok = 0;
    for seed in 0..100 {
        let p0 = regions::sample_x(&m, seed).unwrap();
        let Ok(traj) = dynamics::simulate(&m, p0, FIG1_STEPS) else {
            continue;
        };
        if analysis::verify_param_lemma(&traj).is_ok_and(|r| r.passed()) {
            lemma_ok += 1;
        }
        let phases = analysis::detect_phases(&traj).unwrap();
        if analysis::verify_lhat(&traj, &phases).is_ok_and(|r| r.passed()) {
            lhat_ok += 1;
        }
    }
    info(
        1,
        format!("parameter lemma holds for {lemma_ok}/100 seeded X(1/20) starts"),
    );
    info(
        5,
        format!("surrogate-loss checks hold for {lhat_ok}/100 seeded X(1/20) starts"),
    );
}

fn eos_pass_count(m: &ModelConfig, seeds: std::ops::Range<u64>) -> Result<(usize, usize, Vec<u64>), eos_core::Error> {
    let mut passed = 0;
    let mut total = 0;
    let mut failing = Vec::new();
    for seed in seeds {
        let p0 = regions::sample_x_tilde(m, seed)?;
        total += 1;
        let ok = match dynamics::simulate(m, p0, FIG1_STEPS) {
            Ok(traj) => {
                let phases = analysis::detect_phases(&traj).unwrap();
                analysis::verify_eos_phases(&traj, &phases).passed()
            }
            Err(_) => false,
        };
        if ok {
            passed += 1;
        } else {
            failing.push(seed);
        }
    }
    Ok((passed, total, failing))
}

fn c3(ledger: &mut Ledger) {
    let m = ModelConfig::new(100.0, 0.01, 1.0 / 20.0).unwrap();
    match eos_pass_count(&m, 0..100) {
        Ok((passed, total, failing)) => ledger.record(
            3,
            "EoS phases from 100 starts in X~(1/20)",
            passed == 100 && total == 100,
            format!("{passed}/{total} runs show T2 < T3, S(T2) > 47.4, S(T3) < 40.05; failing seeds {failing:?}"),
        ),
        Err(e) => ledger.record(
            3,
            "EoS phases from 100 starts in X~(1/20)",
            false,
            format!(
                "0/100 runs: {e} (X~ needs alpha^2 >= 1.1/(lambda1*eta) = 0.22 and alpha^2 <= 0.2; nonempty only for lambda1*eta >= 5.5)"
            ),
        ),
    }
    let m12 = ModelConfig::new(100.0, 0.01, 1.0 / 12.0).unwrap();
    if let Ok((passed, total, failing)) = eos_pass_count(&m12, 0..100) {
        let shown: Vec<u64> = failing.iter().copied().take(12).collect();
        info(
            3,
            format!(
                "same checks from X~(1/12): {passed}/{total} pass (S(T2) > {:.2}, S(T3) < {:.4}); first failing seeds {shown:?}",
                2.37 * 12.0,
                24.0 + 1.0 / 12.0
            ),
        );
    }
}

fn c6(ledger: &mut Ledger) {
    let cfg = figure1_config();
    let m = cfg.model().unwrap();
    let starts = [
        (
            "projected figure-1 start",
            ConstrainedState::project(&figure1_start(&cfg)),
        ),
        (
            "sampled M-dagger start",
            ConstrainedState::project(&regions::sample_m_dagger(&m, DEFAULT_PRODUCT_BOUND, 0).unwrap()),
        ),
    ];
    let mut all_ok = true;
    let mut details = Vec::new();
    for (label, s0) in starts {
        let started = Instant::now();
        let run = constrained::simulate_constrained(&m, s0, FIG1_STEPS, DEFAULT_PRODUCT_BOUND);
        let (ok, detail) = match run {
            Ok(r) => {
                let tt = r.t_tilde.unwrap_or(r.states.len());
                let rep = constrained::verify_constrained_decay(&m, &r.states, tt);
                let (ok, d) = summary(
                    &rep,
                    &[
                        "constrained_ratio",
                        "constrained_alpha_increasing",
                        "constrained_loss_decreasing",
                    ],
                );
                (r.t_tilde.is_some() && ok, format!("t~={:?}; {d}", r.t_tilde))
            }
            Err(e) => (false, e.to_string()),
        };
        let elapsed = started.elapsed();
        let fast = elapsed < Duration::from_secs(1);
        all_ok &= ok && fast;
        details.push(format!("{label}: {detail}; {elapsed:.2?} (< 1 s)"));
    }
    ledger.record(6, "constrained decay", all_ok, details.join(" | "));
}

fn gf_cell(m: &ModelConfig, seed: u64) -> (u64, Result<(f64, f64), String>) {
    let p0 = match regions::sample_x(m, seed) {
        Ok(p) => p,
        Err(e) => return (seed, Err(e.to_string())),
    };
    let est = dynamics::gfs_analytic(m, &p0).unwrap();
    let out = dynamics::gf_integrate(m, p0, &GfOptions::for_config(m))
        .map(|r| {
            let numeric = m.lambda1() * r.terminal.alpha * r.terminal.alpha;
            ((est.phi - numeric).abs() / est.phi, r.max_gap_drift)
        })
        .map_err(|e| e.to_string());
    (seed, out)
}

fn c7(ledger: &mut Ledger) {
    let m = ModelConfig::new(100.0, 0.01, 0.05).unwrap();
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let seeds: Vec<u64> = (0..100).collect();
    let mut results: Vec<(u64, Result<(f64, f64), String>)> = thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(seeds.len().div_ceil(workers))
            .map(|chunk| s.spawn(move || chunk.iter().map(|&seed| gf_cell(&m, seed)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    results.sort_by_key(|r| r.0);
    let mut worst_rel = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut errors = Vec::new();
    for (seed, r) in &results {
        match r {
            Ok((rel, drift)) => {
                worst_rel = worst_rel.max(*rel);
                worst_drift = worst_drift.max(*drift);
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    let ok = errors.is_empty()
        && results.len() == 100
        && worst_rel <= run::GF_PHI_TOLERANCE
        && worst_drift <= run::GF_DRIFT_TOLERANCE;
    ledger.record(
        7,
        "closed-form GFS sharpness vs RK4 gradient flow",
        ok,
        format!(
            "100 X(1/20) starts: max relative error {worst_rel:.3e} (<= 1e-5), max conserved drift {worst_drift:.3e} (<= 1e-8){}",
            if errors.is_empty() { String::new() } else { format!("; errors: {}", errors.join(", ")) }
        ),
    );
}

fn c9(ledger: &mut Ledger) {
    let m12 = ModelConfig::new(100.0, 0.01, 1.0 / 12.0).unwrap();
    let mut tilde_ok = 0;
    for seed in 0..10_000 {
        let p = regions::sample_x_tilde(&m12, seed).unwrap();
        if regions::in_x(&m12, &p).member {
            tilde_ok += 1;
        }
    }

    let m = ModelConfig::new(100.0, 0.01, 0.05).unwrap();
    let mut md_ok = 0;
    let mut worst_dot = 0.0f64;
    let mut worst_s = 0.0f64;
    for seed in 0..1000 {
        let p = regions::sample_m_dagger(&m, DEFAULT_PRODUCT_BOUND, seed).unwrap();
        let s = model::sharpness_info(&m, &p).unwrap();
        let g = model::gradient(&m, &p).unwrap();
        let dot: f64 = g.iter().zip(&s.eigvec).map(|(a, b)| a * b).sum();
        worst_dot = worst_dot.max(dot.abs());
        worst_s = worst_s.max(s.value);
        if s.value <= m.threshold() && dot.abs() <= 1e-10 {
            md_ok += 1;
        }
    }

    let grid: Vec<f64> = (0..10).map(|k| 0.55 + 0.45 * k as f64 / 9.0).collect();
    let mut prop_ok = 0;
    for seed in 0..1000 {
        let p = regions::sample_y(100.0, 0.01, seed).unwrap();
        if regions::proposition_c(&p, 100.0, 0.01, &grid).unwrap_or(false) {
            prop_ok += 1;
        }
    }
    ledger.record(
        9,
        "region properties",
        tilde_ok == 10_000 && md_ok == 1000 && prop_ok == 1000,
        format!(
            "X~(1/12) in X: {tilde_ok}/10000; M-dagger(1/20) stable: {md_ok}/1000 (max S {worst_s:.4} <= 40, max |grad.v| {worst_dot:.1e}); Y proposition over r-grid [0.55, 1]: {prop_ok}/1000"
        ),
    );
}

fn c10(ledger: &mut Ledger) {
    let cfg = support::figure1();
    let mut worst_g = 0.0f64;
    for p in support::box_points(101, 100) {
        let g = model::gradient(&cfg, &p).unwrap();
        let fd = support::fd_gradient(100.0, 0.01, p.to_array(), 1e-6);
        let scale = g.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        for i in 0..3 {
            worst_g = worst_g.max((g[i] - fd[i]).abs() / scale);
        }
    }
    let mut worst_h = 0.0f64;
    for p in support::box_points(102, 100) {
        let h = model::hessian(&cfg, &p).unwrap();
        let j = support::fd_jacobian(
            |v| model::gradient(&cfg, &Params::from_array(v)).unwrap(),
            p.to_array(),
            1e-6,
        );
        for r in 0..3 {
            for c in 0..3 {
                worst_h = worst_h.max((h[r][c] - j[r][c]).abs());
            }
        }
    }
    let mut worst_e = 0.0f64;
    for p in support::box_points(103, 1000) {
        let s = model::sharpness_info(&cfg, &p).unwrap().value;
        let (oracle, _) = support::power_iteration(&model::hessian(&cfg, &p).unwrap(), 10_000);
        worst_e = worst_e.max((s - oracle).abs() / oracle.abs());
    }
    ledger.record(
        10,
        "numerical consistency",
        worst_g <= 1e-6 && worst_h <= 1e-5 && worst_e <= 1e-9,
        format!(
            "gradient vs central differences {worst_g:.2e} rel (<= 1e-6, 100 pts); Hessian vs differentiated gradient {worst_h:.2e} abs (<= 1e-5, 100 pts); sharpness vs power iteration {worst_e:.2e} rel (<= 1e-9, 1000 pts)"
        ),
    );
}

fn c11(ledger: &mut Ledger) {
    let cfg = config::preset("figure7").unwrap();
    let p0 = run::initial_point(&cfg).unwrap();
    let in_y = regions::in_y(&p0, cfg.lambda1, cfg.lambda2).member;
    let runs: Vec<RateRun> = run::rate_runs(&cfg, p0, &[1.0 / 20.0, 1.0 / 12.0]).unwrap();
    let reference = analysis::reference_slope(&cfg.model().unwrap());
    let rep = run::slope_checks(reference, &runs);
    let slopes: Vec<String> = runs
        .iter()
        .map(|r| match r.slope {
            Some(s) => format!("eta={:.4}: {s:.4e} (ratio {:.3})", r.eta, s / reference),
            None => format!("eta={:.4}: no fit", r.eta),
        })
        .collect();
    ledger.record(
        11,
        "decay slope independent of eta",
        in_y && rep.passed(),
        format!(
            "p0 = ({}, {}, {}) in Y: {in_y}; reference {reference:.4e}; {}",
            p0.alpha,
            p0.beta1,
            p0.beta2,
            slopes.join("; ")
        ),
    );
}

fn c12(ledger: &mut Ledger) {
    let mut cfg = figure1_config();
    cfg.outputs = vec![config::Output::Csv];
    let a = run::run(&cfg).unwrap();
    let b = run::run(&cfg).unwrap();
    let (ca, cb) = (a.artifact("figure1.csv").unwrap(), b.artifact("figure1.csv").unwrap());
    let repeat = ca.as_bytes() == cb.as_bytes();

    let etas = [1.0 / 20.0, 1.0 / 12.0];
    let seeds = [1, 2, 3, 4];
    let serial = sweep::sweep(
        &RunConfig {
            threads: 1,
            ..cfg.clone()
        },
        &etas,
        &seeds,
        true,
    )
    .unwrap();
    let parallel = sweep::sweep(
        &RunConfig {
            threads: 8,
            ..cfg.clone()
        },
        &etas,
        &seeds,
        true,
    )
    .unwrap();
    let schedules = serial == parallel && sweep::summary_csv(&serial) == sweep::summary_csv(&parallel);
    let cell_matches = serial[0].csv.as_deref() == Some(ca);
    ledger.record(
        12,
        "byte-identical CSV",
        repeat && schedules && cell_matches,
        format!(
            "two executions identical: {repeat} ({} bytes); 8 sweep cells on 1 vs 8 threads identical: {schedules}; sweep cell (1/20, seed 1) equals the single run: {cell_matches}",
            ca.len()
        ),
    );
}

fn main() -> ExitCode {
    let mut ledger = Ledger { failed: Vec::new() };
    let started = Instant::now();
    c1_c2_c4_c5_c8(&mut ledger);
    c1_c5_seed_survey();
    c3(&mut ledger);
    c6(&mut ledger);
    c7(&mut ledger);
    c9(&mut ledger);
    c10(&mut ledger);
    c11(&mut ledger);
    c12(&mut ledger);
    ledger.failed.sort_unstable();
    println!(
        "acceptance: {}/12 criteria pass in {:.1?}; failing: {:?}",
        12 - ledger.failed.len(),
        started.elapsed(),
        ledger.failed
    );
    if ledger.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
