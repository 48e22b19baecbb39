//! `eos`: simulate, verify and sweep the two-layer linear edge-of-stability model.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration error, 3 divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eos_core::analysis;
use eos_core::dynamics;
use eos_core::regions::{self, RegionReport};
use eos_harness::config::{self, ConfigError, Mode, RunConfig};
use eos_harness::run::{self, Artifact, RunOutcome};
use eos_harness::{exit, replay, report, sweep, HarnessError};

#[derive(Parser)]
#[command(
    name = "eos",
    version,
    about = "Edge-of-stability dynamics of a two-layer linear model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured mode and write CSV, SVG and report files.
    Simulate(Common),
    /// Integrate gradient flow from the initial point.
    Gf(Common),
    /// Print the closed-form gradient-flow solution and its bounds at the initial point.
    Gfs(Common),
    /// Projected gradient descent from the initial point with beta1 set to zero.
    Constrained(Common),
    /// Print the initial point and its region memberships.
    SampleInit(Common),
    /// Run the verification suite and exit nonzero on any failure.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Re-check a stored trajectory CSV instead of simulating.
        #[arg(long, value_name = "CSV")]
        replay: Option<PathBuf>,
    },
    /// Run a grid over learning rates and seeds.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "preset",
        required_unless_present = "preset"
    )]
    config: Option<PathBuf>,
    /// Shipped configuration: figure1, figure2, figure3, figure4, figure5 or figure7.
    #[arg(long)]
    preset: Option<String>,
    /// Learning rate; a comma-separated list for `sweep`. Fractions such as 1/12 are accepted.
    #[arg(long, value_delimiter = ',')]
    eta: Vec<String>,
    #[arg(long)]
    steps: Option<usize>,
    /// Sampler seed; a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Plain gradient descent without the beta1 cap.
    #[arg(long)]
    unclipped: bool,
    /// `cap` or `printed-max`.
    #[arg(long, value_name = "VARIANT")]
    clip_variant: Option<String>,
    /// Worker threads for `sweep` (0: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_eta(s: &str) -> Result<f64, ConfigError> {
    let v = match s.split_once('/') {
        Some((n, d)) => n
            .trim()
            .parse::<f64>()
            .and_then(|n| d.trim().parse::<f64>().map(|d| n / d)),
        None => s.trim().parse::<f64>(),
    };
    v.map_err(|e| ConfigError::InvalidValue {
        key: "eta",
        value: s.to_string(),
        reason: e.to_string(),
    })
}

fn single<T: Copy>(what: &'static str, v: &[T]) -> Result<Option<T>, ConfigError> {
    match v {
        [] => Ok(None),
        [x] => Ok(Some(*x)),
        _ => Err(ConfigError::Domain(format!("--{what} takes one value outside `sweep`"))),
    }
}

impl Common {
    fn base(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => config::load(path)?,
            (None, Some(name)) => config::preset(name)?,
            (None, None) => return Err(ConfigError::Domain("either --config or --preset is required".into())),
        };
        if let Some(steps) = self.steps {
            if steps == 0 {
                return Err(ConfigError::Domain("--steps must be positive".into()));
            }
            cfg.steps = steps;
        }
        if self.unclipped {
            cfg.mode = Mode::GdUnclipped;
        }
        if let Some(v) = &self.clip_variant {
            cfg.clip_variant = config::parse_clip_variant(v).map_err(|v| ConfigError::InvalidValue {
                key: "clip_variant",
                value: v,
                reason: "expected cap or printed-max".into(),
            })?;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        Ok(cfg)
    }

    /// Configuration for a single run, with `--eta` and `--seed` applied.
    fn single(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = self.base()?;
        let etas: Vec<f64> = self.eta.iter().map(|s| parse_eta(s)).collect::<Result<_, _>>()?;
        if let Some(eta) = single("eta", &etas)? {
            cfg = cfg.with_eta(eta)?;
        }
        if let Some(seed) = single("seed", &self.seed)? {
            cfg = cfg.with_seed(seed);
        }
        Ok(cfg)
    }
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("eos: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn write(out: Option<&Path>, artifacts: &[Artifact]) -> Result<(), HarnessError> {
    let dir = out.unwrap_or(Path::new("."));
    for p in run::write_all(dir, artifacts)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn summarize(o: &RunOutcome) {
    println!("{}: {} ({})", o.name, o.status(), o.mode.name());
    if let Some(last) = o.trajectory.last() {
        println!(
            "final t={} loss={:.6e} sharpness={:.6e} (2/eta = {})",
            last.t,
            last.parts.total,
            last.sharp.value,
            2.0 / o.model.eta()
        );
    }
    let failed: Vec<&str> = o.verification.failures().map(|c| c.name).collect();
    if !failed.is_empty() {
        println!("failed checks: {}", failed.join(", "));
    }
}

fn simulate(common: &Common, mode: Option<Mode>) -> Result<i32, HarnessError> {
    let mut cfg = common.single()?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    let o = run::run(&cfg)?;
    write(common.out.as_deref(), &o.artifacts)?;
    summarize(&o);
    Ok(if o.diverged.is_some() {
        exit::DIVERGED
    } else {
        exit::PASS
    })
}

fn membership(name: &str, r: &RegionReport) {
    if r.member {
        println!("{name:<10} member");
    } else {
        let v: Vec<String> = r
            .violated
            .iter()
            .map(|v| format!("{} ({:.3e})", v.constraint, v.slack))
            .collect();
        println!("{name:<10} outside: {}", v.join(", "));
    }
}

fn sample_init(common: &Common) -> Result<i32, HarnessError> {
    let cfg = common.single()?;
    let m = cfg.model()?;
    let p = run::initial_point(&cfg)?;
    println!("alpha  = {:.16e}", p.alpha);
    println!("beta1  = {:.16e}", p.beta1);
    println!("beta2  = {:.16e}", p.beta2);
    membership("X", &regions::in_x(&m, &p));
    membership("X~", &regions::in_x_tilde(&m, &p));
    membership("Y", &regions::in_y(&p, cfg.lambda1, cfg.lambda2));
    membership("M-dagger", &regions::in_m_dagger(&m, &p, cfg.product_bound));
    Ok(exit::PASS)
}

fn gfs(common: &Common) -> Result<i32, HarnessError> {
    let cfg = common.single()?;
    let m = cfg.model()?;
    let p = run::initial_point(&cfg)?;
    let est = dynamics::gfs_analytic(&m, &p).map_err(HarnessError::Init)?;
    let b = analysis::gfs_bounds(&m, &p);
    let limit = est.limit(&p);
    println!("gamma        = {:.16e}", est.gamma);
    println!("alpha_inf^2  = {:.16e}", est.alpha_inf_sq);
    println!("limit        = ({:.16e}, 0, {:.16e})", limit.alpha, limit.beta2);
    println!("phi          = {:.16e}", est.phi);
    println!("lower bound  = {:.16e}", b.lower);
    println!("upper bound  = {:.16e}", b.upper);
    println!("2/eta        = {}", 2.0 / m.eta());
    Ok(exit::PASS)
}

fn verify(common: &Common, replay_path: Option<&Path>) -> Result<i32, HarnessError> {
    let cfg = common.single()?;
    if let Some(path) = replay_path {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let rep = replay::replay(&cfg, &text)?;
        let meta = [("name", cfg.name.clone()), ("replay", path.display().to_string())];
        print!("{}", report::render(&meta, &rep));
        return Ok(if rep.passed() {
            exit::PASS
        } else {
            exit::VERIFICATION_FAILED
        });
    }
    let o = run::run(&cfg)?;
    if common.out.is_some() {
        write(common.out.as_deref(), &o.artifacts)?;
    }
    let name = format!("{}.report.txt", cfg.name);
    match o.artifact(&name) {
        Some(text) => print!("{text}"),
        None => print!("{}", report::render(&[("name", cfg.name.clone())], &o.verification)),
    }
    Ok(o.exit_code())
}

fn sweep_cmd(common: &Common) -> Result<i32, HarnessError> {
    let cfg = common.base()?;
    let etas: Vec<f64> = if common.eta.is_empty() {
        cfg.sweep_eta.clone()
    } else {
        common.eta.iter().map(|s| parse_eta(s)).collect::<Result<_, _>>()?
    };
    let seeds = if common.seed.is_empty() {
        cfg.sweep_seed.clone()
    } else {
        common.seed.clone()
    };
    let keep = common.out.is_some();
    let cells = sweep::sweep(&cfg, &etas, &seeds, keep)?;
    let summary = sweep::summary_csv(&cells);
    print!("{summary}");
    if keep {
        let mut artifacts = vec![Artifact {
            name: format!("{}_sweep.csv", cfg.name),
            contents: summary,
        }];
        for (i, c) in cells.into_iter().enumerate() {
            if let Some(csv) = c.csv {
                artifacts.push(Artifact {
                    name: sweep::cell_file_name(&cfg, i, &c.row),
                    contents: csv,
                });
            }
        }
        write(common.out.as_deref(), &artifacts)?;
    }
    Ok(exit::PASS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c, None),
        Command::Gf(c) => simulate(c, Some(Mode::Gf)),
        Command::Constrained(c) => simulate(c, Some(Mode::Constrained)),
        Command::Gfs(c) => gfs(c),
        Command::SampleInit(c) => sample_init(c),
        Command::Verify { common, replay } => verify(common, replay.as_deref()),
        Command::Sweep(c) => sweep_cmd(c),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => fail(&e),
    }
}
