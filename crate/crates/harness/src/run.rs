//! One configured run: trajectory, verification suite and artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eos_core::analysis::{self, CheckResult, PhaseReport, VerificationReport};
use eos_core::constrained::{self, ConstrainedRun, ConstrainedState};
use eos_core::dynamics::{self, ClipVariant, GfOptions, GfRun, Trajectory, TrajectoryRecord, UpdateRule};
use eos_core::regions::{self, Region, RegionReport};
use eos_core::{Error, ModelConfig, Params};

use crate::config::{Figure, Init, Mode, Output, Profile, RunConfig, Sampler};
use crate::plot::{self, Panel, Series, PALETTE};
use crate::{csv, exit, report, HarnessError};

/// Final loss bound for the convergence check.
pub const CONVERGENCE_LOSS: f64 = 1e-4;
/// Final sharpness bound for the convergence check, as a multiple of `1/η`.
pub const CONVERGENCE_SHARPNESS: f64 = 2.1;
/// Largest allowed drift of `α² − β1² − β2²` along gradient flow.
pub const GF_DRIFT_TOLERANCE: f64 = 1e-8;
/// Relative agreement between closed-form and integrated limit sharpness.
pub const GF_PHI_TOLERANCE: f64 = 1e-5;
/// Relative agreement between fitted decay slopes and the reference slope.
pub const SLOPE_AGREEMENT: f64 = 0.2;

const EXEMPT_NOTE: &str = "exempt: the bounds assume the beta1 magnitude cap";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub mode: Mode,
    pub clip_variant: ClipVariant,
    pub profile: Profile,
    pub model: ModelConfig,
    pub p0: Params,
    /// Membership of `p0` in the profile region (`None` for `profile = none`).
    pub region: Option<RegionReport>,
    pub trajectory: Trajectory,
    pub diverged: Option<Error>,
    pub phases: Option<PhaseReport>,
    pub verification: VerificationReport,
    /// Free-form observations (abnormal events, fitted slopes, skipped extras).
    pub notes: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

impl RunOutcome {
    pub fn out_of_region(&self) -> bool {
        self.region.as_ref().is_some_and(|r| !r.member)
    }

    pub fn diverged_at(&self) -> Option<usize> {
        match self.diverged {
            Some(Error::Diverged { step, .. }) => Some(step),
            Some(_) => Some(self.trajectory.len()),
            None => None,
        }
    }

    pub fn status(&self) -> String {
        let mut s = match self.diverged_at() {
            Some(t) => format!("diverged at step {t}"),
            None => String::from("completed"),
        };
        if self.out_of_region() {
            s.push_str(", out-of-region");
        }
        s
    }

    pub fn exit_code(&self) -> i32 {
        if self.diverged.is_some() {
            exit::DIVERGED
        } else if !self.verification.passed() {
            exit::VERIFICATION_FAILED
        } else {
            exit::PASS
        }
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.contents.as_str())
    }

    /// Writes every artifact into `dir`, creating it if needed.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        write_all(dir, &self.artifacts)
    }
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| HarnessError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Resolves the configured initial point, sampling if needed.
pub fn initial_point(cfg: &RunConfig) -> Result<Params, HarnessError> {
    let m = cfg.model()?;
    let sampled = match cfg.init {
        Init::Explicit(p) => return Ok(p),
        Init::Sample { sampler, seed } => match sampler {
            Sampler::X => regions::sample_x(&m, seed),
            Sampler::XTilde => regions::sample_x_tilde(&m, seed),
            Sampler::XBalanced => regions::sample_x_balanced(&m, seed),
            Sampler::Y => regions::sample_y(cfg.lambda1, cfg.lambda2, seed),
            Sampler::MDagger => regions::sample_m_dagger(&m, cfg.product_bound, seed),
        },
    };
    sampled.map_err(HarnessError::Init)
}

fn profile_region(profile: Profile) -> Option<Region> {
    match profile {
        Profile::X => Some(Region::X),
        Profile::XTilde => Some(Region::XTilde),
        Profile::Y => Some(Region::Y),
        Profile::MDagger => Some(Region::MDagger),
        Profile::None => None,
    }
}

pub fn profile_membership(cfg: &RunConfig, m: &ModelConfig, p: &Params) -> Option<RegionReport> {
    Some(match cfg.profile {
        Profile::X => regions::in_x(m, p),
        Profile::XTilde => regions::in_x_tilde(m, p),
        Profile::Y => regions::in_y(p, cfg.lambda1, cfg.lambda2),
        Profile::MDagger => regions::in_m_dagger(m, p, cfg.product_bound),
        Profile::None => return None,
    })
}

fn region_check(region: Region, r: &RegionReport) -> CheckResult {
    let mut c = CheckResult::new("initial_region", format!("p0 in {region}"));
    if r.member {
        c.observe(0, 0.0, true);
    } else {
        let worst = r.violated.iter().map(|v| v.slack).fold(f64::INFINITY, f64::min);
        c.observe(0, worst, false);
        let names: Vec<&str> = r.violated.iter().map(|v| v.constraint).collect();
        c.note = Some(format!("out-of-region, violated: {}", names.join(", ")));
    }
    c
}

fn absorb(rep: &mut VerificationReport, name: &'static str, r: eos_core::Result<VerificationReport>) {
    match r {
        Ok(sub) => rep.extend(sub),
        Err(e) => {
            let mut c = CheckResult::new(name, "analysis ran");
            c.fail(0);
            c.note = Some(e.to_string());
            rep.checks.push(c);
        }
    }
}

fn exempt(rep: VerificationReport, why: &str) -> VerificationReport {
    rep.checks
        .into_iter()
        .map(|c| CheckResult::skipped(c.name, c.bound, why))
        .collect::<Vec<_>>()
        .into()
}

/// Theorem checks for a gradient-descent trajectory started in `X(η)`:
/// parameter lemma, sharpness bands, surrogate loss, GFS bounds and global
/// convergence, plus the edge-of-stability markers when `eos` is set.
pub fn gd_suite(traj: &Trajectory, eos: bool) -> (VerificationReport, Option<PhaseReport>) {
    let mut rep = VerificationReport::default();
    let phases = analysis::detect_phases(traj).ok();
    let Some(first) = traj.records.first() else {
        return (rep, phases);
    };
    if !regions::in_x(&traj.config, &first.params).member {
        rep.checks.push(CheckResult::skipped(
            "theorems",
            "p0 in X",
            "start outside X(eta), theorem checks not applicable",
        ));
        return (rep, phases);
    }
    let Some(ph) = phases.clone() else {
        return (rep, phases);
    };
    absorb(&mut rep, "param_lemma", analysis::verify_param_lemma(traj));
    absorb(&mut rep, "sharpness_bands", analysis::verify_sharpness_bands(traj, &ph));
    absorb(&mut rep, "lhat", analysis::verify_lhat(traj, &ph));
    absorb(&mut rep, "gfs", analysis::verify_gfs(traj));
    absorb(
        &mut rep,
        "convergence",
        analysis::verify_convergence(traj, CONVERGENCE_LOSS, CONVERGENCE_SHARPNESS),
    );
    if eos {
        rep.extend(analysis::verify_eos_phases(traj, &ph));
    }
    (rep, phases)
}

/// Projected gradient descent from `(α0, 0, β2_0)` and its decay checks.
pub fn projected_decay(
    m: &ModelConfig,
    p0: &Params,
    steps: usize,
    product_bound: f64,
) -> (VerificationReport, Option<ConstrainedRun>) {
    let s0 = ConstrainedState::project(p0);
    match constrained::simulate_constrained(m, s0, steps, product_bound) {
        Ok(run) => {
            let tt = run.t_tilde.unwrap_or(run.states.len());
            let mut rep = constrained::verify_constrained_decay(m, &run.states, tt);
            if run.t_tilde.is_none() {
                for c in &mut rep.checks {
                    if c.name == "constrained_ratio" || c.name == "constrained_alpha_at_cap" {
                        c.note = Some("alpha did not reach the cap within the horizon".into());
                    }
                }
            }
            (rep, Some(run))
        }
        Err(e) => {
            let c = CheckResult::skipped(
                "constrained_decay",
                "projected start in M-dagger",
                format!("projected start (alpha, 0, beta2): {e}"),
            );
            (vec![c].into(), None)
        }
    }
}

fn gf_options(m: &ModelConfig, every: u64) -> GfOptions {
    GfOptions {
        sample_every: every,
        ..GfOptions::for_config(m)
    }
}

fn phi_of_terminal(m: &ModelConfig, p: &Params) -> f64 {
    let a2 = p.alpha * p.alpha;
    (m.lambda1() * a2).max(m.lambda2() * a2 + m.lambda2() / a2)
}

/// Gradient-flow checks: convergence, conservation of `α² − β1² − β2²` and
/// agreement of the integrated limit sharpness with the closed form.
pub fn gf_checks(m: &ModelConfig, p0: &Params, run: &eos_core::Result<GfRun>) -> VerificationReport {
    let mut converged = CheckResult::new("gf_converged", "max |grad L| <= 1e-10 reached");
    let mut drift = CheckResult::new(
        "gf_conserved",
        format!("|gamma(t) - gamma(0)| <= {GF_DRIFT_TOLERANCE:e}"),
    );
    let mut phi = CheckResult::new("gf_phi", format!("|phi - phi_rk4| / phi <= {GF_PHI_TOLERANCE:e}"));
    match run {
        Ok(r) => {
            let t = r.steps as usize;
            converged.observe(t, 0.0, true);
            drift.at_most(t, r.max_gap_drift, GF_DRIFT_TOLERANCE);
            match dynamics::gfs_analytic(m, p0) {
                Ok(est) => {
                    let rel = (est.phi - phi_of_terminal(m, &r.terminal)).abs() / est.phi;
                    phi.at_most(t, rel, GF_PHI_TOLERANCE);
                }
                Err(e) => {
                    phi.fail(0);
                    phi.note = Some(e.to_string());
                }
            }
        }
        Err(e) => {
            converged.fail(0);
            converged.note = Some(e.to_string());
            drift = CheckResult::skipped(drift.name, drift.bound, "integration failed");
            phi = CheckResult::skipped(phi.name, phi.bound, "integration failed");
        }
    }
    vec![converged, drift, phi].into()
}

/// Slope of `ln L̂` over `[0, T4]`, or over the whole run when `T4` is absent or 0.
pub fn fitted_slope(traj: &Trajectory, phases: Option<&PhaseReport>) -> Option<f64> {
    let end = match phases.and_then(|p| p.t4) {
        Some(t4) if t4 >= 1 => t4 + 1,
        _ => traj.len(),
    };
    analysis::fit_decay_slope(traj, 0..end).ok()
}

fn gd_rule(mode: Mode, variant: ClipVariant) -> UpdateRule {
    match mode {
        Mode::GdUnclipped => UpdateRule::Unclipped,
        _ => UpdateRule::Clipped(variant),
    }
}

fn fmt_params(p: &Params) -> String {
    format!("({:.16e}, {:.16e}, {:.16e})", p.alpha, p.beta1, p.beta2)
}

fn fmt_opt(t: Option<usize>) -> String {
    t.map_or_else(|| "-".into(), |t| t.to_string())
}

fn gf_trajectory(m: &ModelConfig, h: f64, samples: &[(f64, Params)]) -> Trajectory {
    let records = samples
        .iter()
        .filter_map(|&(time, p)| TrajectoryRecord::new(m, (time / h).round() as usize, p, false).ok())
        .collect();
    Trajectory { config: *m, records }
}

fn constrained_trajectory(m: &ModelConfig, states: &[ConstrainedState]) -> Trajectory {
    Trajectory::from_params(*m, states.iter().map(ConstrainedState::params)).unwrap_or(Trajectory {
        config: *m,
        records: Vec::new(),
    })
}

fn csv_text(tags: &[String], traj: &Trajectory) -> String {
    let mut out = String::new();
    for t in tags {
        let _ = writeln!(out, "# {t}");
    }
    out.push_str(&csv::trajectory_to_string(traj));
    out
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    m: ModelConfig,
    p0: Params,
    svg: bool,
    csv: bool,
}

pub fn run(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let m = cfg.model()?;
    let p0 = initial_point(cfg)?;
    // constrained runs start from the projection (alpha0, 0, beta2_0)
    let start = match cfg.mode {
        Mode::Constrained => ConstrainedState::project(&p0).params(),
        _ => p0,
    };
    let region = profile_membership(cfg, &m, &start);
    let ctx = Ctx {
        cfg,
        m,
        p0,
        svg: cfg.wants(Output::Svg),
        csv: cfg.wants(Output::Csv),
    };

    let mut verification = VerificationReport::default();
    if let (Some(r), Some(reg)) = (&region, profile_region(cfg.profile)) {
        verification.checks.push(region_check(reg, r));
    }
    let mut notes = Vec::new();
    let mut artifacts = Vec::new();
    let mut phases = None;
    let mut diverged = None;

    let trajectory = match cfg.mode {
        Mode::Gd | Mode::GdUnclipped => {
            let rule = gd_rule(cfg.mode, cfg.clip_variant);
            let traj = match dynamics::simulate_with(&m, p0, cfg.steps, rule) {
                Ok(t) => t,
                Err(partial) => {
                    diverged = Some(partial.error);
                    partial.trajectory
                }
            };
            if let Some(e) = &diverged {
                let mut c = CheckResult::new("no_divergence", "all states finite and |alpha| <= 1e6");
                c.fail(traj.len());
                c.note = Some(e.to_string());
                verification.checks.push(c);
            } else {
                let eos = cfg.profile == Profile::XTilde;
                let (suite, ph) = gd_suite(&traj, eos);
                phases = ph;
                let exempt_run = rule != UpdateRule::Clipped(ClipVariant::Cap);
                if exempt_run {
                    verification.extend(exempt(suite, EXEMPT_NOTE));
                    let events = analysis::detect_abnormal(&traj, analysis::DEFAULT_COLLAPSE_THRESHOLD);
                    notes.push(abnormal_summary(&events));
                } else {
                    verification.extend(suite);
                }
                let (decay, crun) = projected_decay(&m, &p0, cfg.steps, cfg.product_bound);
                verification.extend(decay);
                figure_extras(
                    &ctx,
                    &traj,
                    phases.as_ref(),
                    crun.as_ref(),
                    &mut verification,
                    &mut notes,
                    &mut artifacts,
                );
            }
            traj
        }
        Mode::Gf => {
            let opts = gf_options(&m, cfg.gf_every);
            let gf = dynamics::gf_integrate(&m, p0, &opts);
            verification.extend(gf_checks(&m, &p0, &gf));
            match gf {
                Ok(r) => {
                    let est = dynamics::gfs_analytic(&m, &p0).ok();
                    if let Some(est) = est {
                        notes.push(format!(
                            "gf: {} RK4 steps (h = {}), time {:.6e}, phi = {:.16e}, numeric {:.16e}",
                            r.steps,
                            opts.h,
                            r.time,
                            est.phi,
                            phi_of_terminal(&m, &r.terminal)
                        ));
                    }
                    gf_trajectory(&m, opts.h, &r.samples)
                }
                Err(e) => {
                    if let Error::Diverged { .. } = e {
                        diverged = Some(e);
                    }
                    gf_trajectory(&m, opts.h, &[(0.0, p0)])
                }
            }
        }
        Mode::Constrained => {
            let s0 = ConstrainedState::project(&p0);
            match constrained::simulate_constrained(&m, s0, cfg.steps, cfg.product_bound) {
                Ok(run) => {
                    let tt = run.t_tilde.unwrap_or(run.states.len());
                    verification.extend(constrained::verify_constrained_decay(&m, &run.states, tt));
                    notes.push(format!("t~ = {}", fmt_opt(run.t_tilde)));
                    constrained_trajectory(&m, &run.states)
                }
                Err(e) => {
                    let mut c = CheckResult::new("constrained_start", "(alpha0, 0, beta2_0) in M-dagger");
                    c.fail(0);
                    c.note = Some(e.to_string());
                    verification.checks.push(c);
                    constrained_trajectory(&m, &[s0])
                }
            }
        }
    };

    let mut outcome = RunOutcome {
        name: cfg.name.clone(),
        mode: cfg.mode,
        clip_variant: cfg.clip_variant,
        profile: cfg.profile,
        model: m,
        p0,
        region,
        trajectory,
        diverged,
        phases,
        verification,
        notes,
        artifacts: Vec::new(),
    };

    let mut tags = Vec::new();
    if outcome.out_of_region() {
        tags.push(String::from("out-of-region"));
    }
    if let Some(t) = outcome.diverged_at() {
        tags.push(format!("diverged at step {t}"));
    }
    let name = &cfg.name;
    let mut main = Vec::new();
    if ctx.csv {
        main.push(Artifact {
            name: format!("{name}.csv"),
            contents: csv_text(&tags, &outcome.trajectory),
        });
    }
    if ctx.svg {
        main.push(Artifact {
            name: format!("{name}.svg"),
            contents: main_svg(&outcome, &tags),
        });
    }
    if cfg.wants(Output::Report) {
        main.push(Artifact {
            name: format!("{name}.report.txt"),
            contents: render_report(cfg, &outcome),
        });
    }
    main.extend(artifacts);
    outcome.artifacts = main;
    Ok(outcome)
}

fn abnormal_summary(events: &[analysis::AbnormalEvent]) -> String {
    let flips: Vec<usize> = events
        .iter()
        .filter_map(|e| match e {
            analysis::AbnormalEvent::SignFlip { t } => Some(*t),
            _ => None,
        })
        .collect();
    let collapse = events.iter().find_map(|e| match e {
        analysis::AbnormalEvent::Collapse { t, alpha_scale } => Some((*t, *alpha_scale)),
        _ => None,
    });
    let mut s = format!("abnormal events: {} alpha sign flips", flips.len());
    if let Some(t) = flips.first() {
        let _ = write!(s, " (first at t={t})");
    }
    match collapse {
        Some((t, a)) => {
            let _ = write!(s, ", collapse at t={t} (lambda1*eta*alpha^2 = {a:.6e})");
        }
        None => s.push_str(", no collapse"),
    }
    s
}

fn render_report(cfg: &RunConfig, o: &RunOutcome) -> String {
    let mut meta: Vec<(&str, String)> = vec![
        ("name", o.name.clone()),
        ("mode", o.mode.name().into()),
        ("lambda1", format!("{}", o.model.lambda1())),
        ("lambda2", format!("{}", o.model.lambda2())),
        ("eta", format!("{}", o.model.eta())),
        ("steps", cfg.steps.to_string()),
        (
            "init",
            match cfg.init {
                Init::Explicit(_) => "explicit".into(),
                Init::Sample { sampler, seed } => format!("{} (seed {seed})", sampler.name()),
            },
        ),
        ("p0", fmt_params(&o.p0)),
        (
            "clip_variant",
            match o.clip_variant {
                ClipVariant::Cap => "cap".into(),
                ClipVariant::PrintedMax => "printed-max".into(),
            },
        ),
        ("profile", o.profile.name().into()),
        ("status", o.status()),
    ];
    if let Some(ph) = &o.phases {
        meta.push((
            "phases",
            format!(
                "T1={} T2={} T3={} T4={} t~={} spikes={}",
                fmt_opt(ph.t1),
                fmt_opt(ph.t2),
                fmt_opt(ph.t3),
                fmt_opt(ph.t4),
                fmt_opt(ph.t_tilde),
                ph.spikes.len()
            ),
        ));
    }
    if let Some(last) = o.trajectory.last() {
        meta.push((
            "final",
            format!(
                "t={} loss={:.6e} sharpness={:.6e}",
                last.t, last.parts.total, last.sharp.value
            ),
        ));
    }
    for n in &o.notes {
        meta.push(("note", n.clone()));
    }
    report::render(&meta, &o.verification)
}

fn series_of(traj: &Trajectory, f: impl Fn(&TrajectoryRecord) -> f64) -> Vec<(f64, f64)> {
    traj.records.iter().map(|r| (r.t as f64, f(r))).collect()
}

fn main_svg(o: &RunOutcome, tags: &[String]) -> String {
    let eta = o.model.eta();
    let x_label = match o.mode {
        Mode::Gf => "t (RK4 steps)",
        _ => "t",
    };
    let mut title = format!("{} ({}, eta = {eta})", o.name, o.mode.name());
    if !tags.is_empty() {
        let _ = write!(title, " [{}]", tags.join(", "));
    }
    let loss = Panel::new(format!("{title}: loss"), x_label).log().with(Series::new(
        "L",
        PALETTE[0],
        series_of(&o.trajectory, |r| r.parts.total),
    ));
    let sharp = Panel::new("sharpness", x_label)
        .with(Series::new(
            "S",
            PALETTE[1],
            series_of(&o.trajectory, |r| r.sharp.value),
        ))
        .rule(2.0 / eta, "2/eta");
    plot::render(&title, &[loss, sharp])
}

fn figure_extras(
    ctx: &Ctx<'_>,
    traj: &Trajectory,
    phases: Option<&PhaseReport>,
    crun: Option<&ConstrainedRun>,
    verification: &mut VerificationReport,
    notes: &mut Vec<String>,
    artifacts: &mut Vec<Artifact>,
) {
    let name = &ctx.cfg.name;
    match ctx.cfg.figure {
        None | Some(Figure::LossSharpness) => {}
        Some(Figure::Decomposition) => {
            if let Some(s) = fitted_slope(traj, phases) {
                notes.push(format!(
                    "fitted slope of ln lhat: {s:.6e} (reference {:.6e})",
                    analysis::reference_slope(&ctx.m)
                ));
            }
            if ctx.svg {
                artifacts.push(Artifact {
                    name: format!("{name}_decomposition.svg"),
                    contents: decomposition_svg(ctx, traj),
                });
            }
        }
        Some(Figure::GfsBounds) => {
            if ctx.svg {
                artifacts.push(Artifact {
                    name: format!("{name}_gfs.svg"),
                    contents: gfs_svg(ctx, traj),
                });
            }
        }
        Some(Figure::GfFromPath) => {
            if ctx.svg || ctx.csv {
                let (svg, table) = gf_from_path(ctx, traj, notes);
                if ctx.svg {
                    artifacts.push(Artifact {
                        name: format!("{name}_gf_paths.svg"),
                        contents: svg,
                    });
                }
                if ctx.csv {
                    artifacts.push(Artifact {
                        name: format!("{name}_gf_paths.csv"),
                        contents: table,
                    });
                }
            }
        }
        Some(Figure::ThreeTrajectories) => three_trajectories(ctx, traj, crun, notes, artifacts),
        Some(Figure::LearningRates) => learning_rates(ctx, verification, notes, artifacts),
    }
}

fn decomposition_svg(ctx: &Ctx<'_>, traj: &Trajectory) -> String {
    let rho = analysis::reference_slope(&ctx.m);
    let lhat0 = traj.records.first().map_or(1.0, |r| r.parts.lhat);
    let end = traj.last().map_or(0.0, |r| r.t as f64);
    let reference: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let t = end * k as f64 / 200.0;
            (t, lhat0 * (rho * t).exp())
        })
        .collect();
    let top = Panel::new(format!("{}: L, L2 and lhat", ctx.cfg.name), "t")
        .log()
        .with(Series::new("L", PALETTE[0], series_of(traj, |r| r.parts.total)))
        .with(Series::new("L2", PALETTE[2], series_of(traj, |r| r.parts.l2)))
        .with(Series::new("lhat", PALETTE[3], series_of(traj, |r| r.parts.lhat)))
        .with(Series::new("2 log(1-2l2/l1) t", PALETTE[1], reference).dashed());
    let bottom = Panel::new("L1 and L2", "t")
        .log()
        .with(Series::new("L1", PALETTE[4], series_of(traj, |r| r.parts.l1)))
        .with(Series::new("L2", PALETTE[2], series_of(traj, |r| r.parts.l2)));
    plot::render(&format!("{} decomposition", ctx.cfg.name), &[top, bottom])
}

fn gfs_svg(ctx: &Ctx<'_>, traj: &Trajectory) -> String {
    let (mut phi, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    for r in &traj.records {
        let t = r.t as f64;
        if let Ok(est) = dynamics::gfs_analytic(&ctx.m, &r.params) {
            phi.push((t, est.phi));
        }
        let b = analysis::gfs_bounds(&ctx.m, &r.params);
        lo.push((t, b.lower));
        hi.push((t, b.upper));
    }
    let eta = ctx.m.eta();
    let p = Panel::new(format!("{}: GFS sharpness and bounds", ctx.cfg.name), "t")
        .with(Series::new("phi", PALETTE[0], phi))
        .with(Series::new("lower", PALETTE[2], lo).dashed())
        .with(Series::new("upper", PALETTE[1], hi).dashed())
        .rule(2.0 / eta, "2/eta");
    plot::render(&format!("{} GFS bounds", ctx.cfg.name), &[p])
}

fn plane(points: impl Iterator<Item = Params>) -> Vec<(f64, f64)> {
    points.map(|p| (p.alpha, p.beta2)).collect()
}

fn minimizer_curve(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    (0..=100)
        .map(|k| lo + (hi - lo) * k as f64 / 100.0)
        .filter(|a| *a > 0.0)
        .map(|a| (a, 1.0 / a))
        .collect()
}

fn gf_from_path(ctx: &Ctx<'_>, traj: &Trajectory, notes: &mut Vec<String>) -> (String, String) {
    const STARTS: usize = 6;
    let last = traj.len().saturating_sub(1);
    let opts = gf_options(&ctx.m, ctx.cfg.gf_every);
    let mut table = String::from("start_t,alpha,beta1,beta2,gamma,phi_analytic,phi_numeric,gf_time\n");
    let mut panel = Panel::new(format!("{}: gradient flow from GD iterates", ctx.cfg.name), "alpha").with(Series::new(
        "GD",
        "#777777",
        plane(traj.params()),
    ));
    let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..STARTS {
        let t = k * last / (STARTS - 1);
        let Some(rec) = traj.records.get(t) else { continue };
        let p = rec.params;
        let gf = match dynamics::gf_integrate(&ctx.m, p, &opts) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("gf from t={t}: {e}"));
                continue;
            }
        };
        let est = dynamics::gfs_analytic(&ctx.m, &p).ok();
        let _ = writeln!(
            table,
            "{t},{},{},{},{},{},{},{}",
            csv::fmt_f64(p.alpha),
            csv::fmt_f64(p.beta1),
            csv::fmt_f64(p.beta2),
            csv::fmt_f64(dynamics::layer_gap(&p)),
            csv::fmt_f64(est.map_or(f64::NAN, |e| e.phi)),
            csv::fmt_f64(phi_of_terminal(&ctx.m, &gf.terminal)),
            csv::fmt_f64(gf.time),
        );
        for (_, q) in &gf.samples {
            amin = amin.min(q.alpha);
            amax = amax.max(q.alpha);
        }
        panel = panel.with(Series::new(
            format!("GF from t={t}"),
            PALETTE[k % PALETTE.len()],
            plane(gf.samples.iter().map(|s| s.1)),
        ));
    }
    for p in traj.params() {
        amin = amin.min(p.alpha);
        amax = amax.max(p.alpha);
    }
    panel = panel.with(Series::new("alpha*beta2 = 1", "#000000", minimizer_curve(amin, amax)).dashed());
    let svg = plot::render(
        &format!("{} gradient flow paths (beta2 against alpha)", ctx.cfg.name),
        &[panel],
    );
    (svg, table)
}

fn three_trajectories(
    ctx: &Ctx<'_>,
    traj: &Trajectory,
    crun: Option<&ConstrainedRun>,
    notes: &mut Vec<String>,
    artifacts: &mut Vec<Artifact>,
) {
    if !(ctx.svg || ctx.csv) {
        return;
    }
    let name = &ctx.cfg.name;
    let eta = ctx.m.eta();
    let opts = gf_options(&ctx.m, ctx.cfg.gf_every);
    let gf = match dynamics::gf_integrate(&ctx.m, ctx.p0, &opts) {
        Ok(r) => Some(gf_trajectory(&ctx.m, opts.h, &r.samples)),
        Err(e) => {
            notes.push(format!("gradient flow from p0: {e}"));
            None
        }
    };
    let ctraj = crun.map(|c| constrained_trajectory(&ctx.m, &c.states));
    if ctx.csv {
        if let Some(g) = &gf {
            artifacts.push(Artifact {
                name: format!("{name}_gf.csv"),
                contents: csv::trajectory_to_string(g),
            });
        }
        if let Some(c) = &ctraj {
            artifacts.push(Artifact {
                name: format!("{name}_constrained.csv"),
                contents: csv::trajectory_to_string(c),
            });
        }
    }
    if !ctx.svg {
        return;
    }
    let mut path = Panel::new(format!("{name}: GD, GF and constrained (beta2 against alpha)"), "alpha")
        .with(Series::new("GD", PALETTE[0], plane(traj.params())));
    // gradient-flow time t corresponds to t/eta GD steps
    let mut loss = Panel::new("loss", "t (GD steps; GF time / eta)")
        .log()
        .with(Series::new("GD", PALETTE[0], series_of(traj, |r| r.parts.total)));
    if let Some(g) = &gf {
        path = path.with(Series::new("GF", PALETTE[1], plane(g.params())));
        let pts = g
            .records
            .iter()
            .map(|r| (r.t as f64 * opts.h / eta, r.parts.total))
            .filter(|(t, _)| *t <= ctx.cfg.steps as f64)
            .collect();
        loss = loss.with(Series::new("GF", PALETTE[1], pts));
    }
    if let Some(c) = &ctraj {
        path = path.with(Series::new("constrained", PALETTE[2], plane(c.params())));
        loss = loss.with(Series::new("constrained", PALETTE[2], series_of(c, |r| r.parts.total)));
    }
    artifacts.push(Artifact {
        name: format!("{name}_three.svg"),
        contents: plot::render(&format!("{name} three trajectories"), &[path, loss]),
    });
}

/// Result of one learning rate in a multi-rate comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRun {
    pub eta: f64,
    pub trajectory: Trajectory,
    pub phases: Option<PhaseReport>,
    pub slope: Option<f64>,
    pub diverged: bool,
}

/// Clipped GD from one shared `p0` at each learning rate.
pub fn rate_runs(cfg: &RunConfig, p0: Params, etas: &[f64]) -> Result<Vec<RateRun>, HarnessError> {
    etas.iter()
        .map(|&eta| {
            let m = cfg.model_at(eta)?;
            let (trajectory, diverged) =
                match dynamics::simulate_with(&m, p0, cfg.steps, gd_rule(cfg.mode, cfg.clip_variant)) {
                    Ok(t) => (t, false),
                    Err(p) => (p.trajectory, true),
                };
            let phases = analysis::detect_phases(&trajectory).ok();
            let slope = if diverged {
                None
            } else {
                fitted_slope(&trajectory, phases.as_ref())
            };
            Ok(RateRun {
                eta,
                trajectory,
                phases,
                slope,
                diverged,
            })
        })
        .collect()
}

/// Every fitted slope within [`SLOPE_AGREEMENT`] relative of the reference, and
/// every pair within the same fraction of the smaller magnitude.
pub fn slope_checks(reference: f64, runs: &[RateRun]) -> VerificationReport {
    let mut vs_ref = CheckResult::new(
        "rate_slope_reference",
        format!("|slope / {reference:.6e} - 1| <= {SLOPE_AGREEMENT}"),
    );
    let mut spread = CheckResult::new(
        "rate_slope_spread",
        format!("|s_i - s_j| <= {SLOPE_AGREEMENT} min(|s_i|, |s_j|)"),
    );
    for (i, r) in runs.iter().enumerate() {
        match r.slope {
            Some(s) => vs_ref.at_most(i, (s / reference - 1.0).abs(), SLOPE_AGREEMENT),
            None => vs_ref.fail(i),
        }
        for (j, q) in runs.iter().enumerate().skip(i + 1) {
            match (r.slope, q.slope) {
                (Some(a), Some(b)) => spread.at_most(j, (a - b).abs() / a.abs().min(b.abs()), SLOPE_AGREEMENT),
                _ => spread.fail(j),
            }
        }
    }
    vec![vs_ref, spread].into()
}

fn learning_rates(
    ctx: &Ctx<'_>,
    verification: &mut VerificationReport,
    notes: &mut Vec<String>,
    artifacts: &mut Vec<Artifact>,
) {
    let etas = if ctx.cfg.sweep_eta.is_empty() {
        vec![ctx.cfg.eta]
    } else {
        ctx.cfg.sweep_eta.clone()
    };
    let runs = match rate_runs(ctx.cfg, ctx.p0, &etas) {
        Ok(r) => r,
        Err(e) => {
            notes.push(format!("learning-rate comparison: {e}"));
            return;
        }
    };
    let reference = analysis::reference_slope(&ctx.m);
    for r in &runs {
        notes.push(format!(
            "eta = {}: T4 = {}, slope = {}",
            r.eta,
            fmt_opt(r.phases.as_ref().and_then(|p| p.t4)),
            r.slope.map_or_else(|| "-".into(), |s| format!("{s:.6e}"))
        ));
    }
    verification.extend(slope_checks(reference, &runs));
    let name = &ctx.cfg.name;
    if ctx.csv {
        for (k, r) in runs.iter().enumerate() {
            artifacts.push(Artifact {
                name: format!("{name}_eta{k}.csv"),
                contents: csv::trajectory_to_string(&r.trajectory),
            });
        }
    }
    if ctx.svg {
        let mut panel = Panel::new(format!("{name}: loss at each learning rate"), "t").log();
        for (k, r) in runs.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            panel = panel.with(Series::new(
                format!("eta = {:.4}", r.eta),
                color,
                series_of(&r.trajectory, |q| q.parts.total),
            ));
            if let Some(first) = r.trajectory.records.first() {
                let end = r.trajectory.last().map_or(0.0, |q| q.t as f64);
                let l0 = first.parts.total;
                let reference_line = vec![(0.0, l0), (end, l0 * (reference * end).exp())];
                panel = panel.with(Series::new(format!("reference ({:.4})", r.eta), color, reference_line).dashed());
            }
        }
        artifacts.push(Artifact {
            name: format!("{name}_rates.svg"),
            contents: plot::render(&format!("{name} learning rates"), &[panel]),
        });
    }
}
