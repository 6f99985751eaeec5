//! The `bolab` command line: sampling, evolution, conservation laws and the
//! verification experiments, each run leaving a self-describing record.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use bolab::claws;
use bolab::flows::{evolve_full, evolve_truncated_at, flow_invariants, FlowConfig};
use bolab::lab;
use bolab::measures::{self, GaussianSpec};
use bolab::FourierField;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

/// Overrides the seed of a config file; `--seed` overrides both.
pub const SEED_ENV: &str = "BOLAB_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "bolab", version, about = "Benjamin-Ono conservation laws, truncated flows and weighted Gaussian measures")]
struct Cli {
    /// Worker threads for the parallel parts; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Samples of μ_{k/2} with their weights F_{k/2,N,R}.
    Sample(SampleArgs),
    /// Evolve a field along the full or the truncated flow.
    Evolve(EvolveArgs),
    /// E_{j/2}(u) for j = 0..=k.
    Energies(EnergiesArgs),
    /// Matsuno densities and energies as expression trees.
    #[command(subcommand)]
    Claws(ClawsCommand),
    /// Run one experiment and write its report.
    Verify(VerifyArgs),
    /// Distance of Φ_t^N u0 from u0 and its running minimum.
    Recurrence(RecurrenceArgs),
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    k: usize,
    /// Highest sampled mode.
    #[arg(long, default_value_t = 256)]
    modes: usize,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation of the weights; default `--modes`.
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "R", default_value_t = 8.0)]
    r: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    /// Flow configuration; default `N` is the bandwidth of the input.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t: f64,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Use Φ_t^N instead of the resolved full flow.
    #[arg(long)]
    truncated: bool,
    /// CSV of t, ‖u‖_{H^σ} and the relative drift of E_0..E_k, next to `--out`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    stride: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 4)]
    k: usize,
}

#[derive(Args, Debug)]
struct EnergiesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Evaluate at π_N u.
    #[arg(long = "N")]
    n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum ClawsCommand {
    /// The Matsuno density w_n.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// The density of E_{k/2}.
    Energy {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Latex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    LemmaProd,
    GnDecay,
    OracleTriangle,
    FlowConvergence,
    Conservation,
    Liouville,
    Invariance,
    Sampler,
    DensityConvergence,
    Recurrence,
}

impl Experiment {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON object of parameters; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Comma-separated; replaces the experiment's `N`.
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct RecurrenceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code: 0 on success, 2 when a verdict failed, 1 on any error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_ERROR
                }
            };
        }
    };
    let result = match cli.workers {
        Some(0) => Err(anyhow!("--workers must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("building the worker pool")
            .and_then(|pool| pool.install(|| dispatch(&cli.command))),
        None => dispatch(&cli.command),
    };
    match result {
        Ok(done) => {
            let _ = out.write_all(done.stdout.as_bytes());
            let _ = err.write_all(done.stderr.as_bytes());
            if done.passed {
                EXIT_OK
            } else {
                EXIT_VERDICT_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

#[derive(Default)]
struct Done {
    stdout: String,
    stderr: String,
    passed: bool,
}

fn dispatch(cmd: &Command) -> anyhow::Result<Done> {
    let mut done = Done {
        passed: true,
        ..Done::default()
    };
    match cmd {
        Command::Sample(a) => sample(a, &mut done)?,
        Command::Evolve(a) => evolve(a, &mut done)?,
        Command::Energies(a) => energies(a, &mut done)?,
        Command::Claws(c) => generate(c, &mut done)?,
        Command::Verify(a) => verify(a.experiment, "verify", a.config.as_deref(), &a.out, a.n.as_deref(), a.seed, &mut done)?,
        Command::Recurrence(a) => verify(Experiment::Recurrence, "recurrence", a.config.as_deref(), &a.out, None, None, &mut done)?,
    }
    Ok(done)
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(s.trim().parse().with_context(|| format!("{SEED_ENV}={s} is not a 64-bit seed"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(anyhow!("{SEED_ENV}: {e}")),
    }
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let s = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

/// A bare field, or an object carrying one under `field`.
fn read_field(path: &Path) -> anyhow::Result<FourierField> {
    let v = read_json(path)?;
    let inner = match v.get("field") {
        Some(f) => f.clone(),
        None => v,
    };
    FourierField::from_json(&inner.to_string()).with_context(|| format!("field in {}", path.display()))
}

fn field_value(u: &FourierField) -> Value {
    serde_json::from_str(&u.to_json()).expect("field JSON is valid")
}

fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn with_hash(mut config: Value) -> (Value, String) {
    let hash = lab::config_hash(&config);
    config["config_hash"] = Value::String(hash.clone());
    (config, hash)
}

fn sample(a: &SampleArgs, done: &mut Done) -> anyhow::Result<()> {
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let n = a.n.unwrap_or(a.modes);
    let spec = GaussianSpec::new(a.k, a.modes, seed);
    let config = json!({
        "subcommand": "sample",
        "k": a.k,
        "mode_cutoff": a.modes,
        "N": n,
        "R": a.r,
        "count": a.count,
        "seed": seed,
        "variance_rule": spec.variance_rule,
        "alpha_constant": spec.alpha_constant(),
        "chi": measures::CHI_DEFINITION,
        "output_dir": a.out,
    });
    let ens = measures::weighted_ensemble(&spec, n, a.r, a.count).context("building the weighted ensemble")?;
    let (mut config, hash) = with_hash(config);
    config["summary"] = json!({ "ess": ens.ess, "clipped": ens.clipped });
    write_file(&a.out.join("config.json"), &(serde_json::to_string_pretty(&config)? + "\n"))?;
    let mut lines = json!({ "config_hash": hash }).to_string() + "\n";
    for u in &ens.samples {
        lines.push_str(&u.to_json());
        lines.push('\n');
    }
    write_file(&a.out.join("samples.jsonl"), &lines)?;
    let mut csv = format!("# config {hash}\nindex,weight\n");
    for (i, w) in ens.weights.iter().enumerate() {
        writeln!(csv, "{i},{w:e}")?;
    }
    write_file(&a.out.join("weights.csv"), &csv)?;
    writeln!(
        done.stdout,
        "{} samples in {}: ess {:.1}, clipped {}",
        ens.len(),
        a.out.display(),
        ens.ess,
        ens.clipped
    )?;
    Ok(())
}

fn time_grid(t: f64, stride: f64) -> anyhow::Result<Vec<f64>> {
    if !(stride > 0.0) {
        bail!("--stride must be positive");
    }
    let steps = (t.abs() / stride).ceil().max(1.0) as usize;
    Ok((1..=steps).map(|i| if i == steps { t } else { t.signum() * stride * i as f64 }).collect())
}

fn evolve(a: &EvolveArgs, done: &mut Done) -> anyhow::Result<()> {
    let u0 = read_field(&a.input)?;
    let cfg: FlowConfig = match &a.config {
        Some(p) => serde_json::from_value(read_json(p)?).with_context(|| format!("flow config {}", p.display()))?,
        None => FlowConfig::new(u0.effective_bandwidth().max(1)).with_horizon(a.t.abs().max(f64::MIN_POSITIVE)),
    };
    let times = if a.trajectory.is_some() { time_grid(a.t, a.stride)? } else { vec![a.t] };
    let config = json!({
        "subcommand": "evolve",
        "flow": cfg,
        "t": a.t,
        "truncated": a.truncated,
        "input": field_value(&u0),
        "stride": a.trajectory.as_ref().map(|_| a.stride),
        "sigma": a.sigma,
        "k": a.k,
    });
    let (_, hash) = with_hash(config);
    let c = cfg.nonlinearity;
    let fields: Vec<FourierField> = if a.truncated {
        evolve_truncated_at(&u0, &cfg, &times)?
    } else {
        let mut fs = Vec::with_capacity(times.len());
        for &t in &times {
            let sol = evolve_full(&u0, &cfg, t)?;
            if sol.saturated {
                writeln!(done.stderr, "warning: tail fraction {:.2e} at t = {t}", sol.tail_fraction)?;
            }
            fs.push(sol.field);
        }
        fs
    };
    let last = fields.last().expect("at least one time");
    let body = json!({ "config_hash": hash, "t": a.t, "field": field_value(last) });
    write_file(&a.out, &(serde_json::to_string_pretty(&body)? + "\n"))?;
    if let Some(tr) = &a.trajectory {
        let base = |u: &FourierField| if a.truncated { u.project_low(cfg.n) } else { u.clone() };
        let e0 = flow_invariants(&base(&u0), c, a.k)?;
        let mut csv = format!("# config {hash}\nt,hs_norm");
        for j in 0..=a.k {
            write!(csv, ",E{j}_drift")?;
        }
        csv.push('\n');
        let mut row = |t: f64, u: &FourierField| -> anyhow::Result<()> {
            let v = base(u);
            let e = flow_invariants(&v, c, a.k)?;
            write!(csv, "{t:e},{:e}", v.sobolev_norm(a.sigma, false))?;
            for (x, y) in e.iter().zip(&e0) {
                write!(csv, ",{:e}", (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))?;
            }
            csv.push('\n');
            Ok(())
        };
        row(0.0, &u0)?;
        for (t, u) in times.iter().zip(&fields) {
            row(*t, u)?;
        }
        let path = a.out.parent().map(|d| d.join(tr)).unwrap_or_else(|| tr.clone());
        write_file(&path, &csv)?;
    }
    writeln!(done.stdout, "t = {}: wrote {}", a.t, a.out.display())?;
    Ok(())
}

fn energies(a: &EnergiesArgs, done: &mut Done) -> anyhow::Result<()> {
    let u = read_field(&a.input)?;
    let v = match a.n {
        Some(n) => u.project_low(n),
        None => u,
    };
    let e = claws::energies(&v, a.k)?;
    let body = json!({ "k": a.k, "N": a.n, "energies": e });
    writeln!(done.stdout, "{}", serde_json::to_string_pretty(&body)?)?;
    Ok(())
}

fn generate(c: &ClawsCommand, done: &mut Done) -> anyhow::Result<()> {
    let (e, format) = match c {
        ClawsCommand::Generate { n, format } => (claws::matsuno_w(*n)?, *format),
        ClawsCommand::Energy { k, format } => (claws::energy(*k)?, *format),
    };
    match format {
        Format::Json => writeln!(done.stdout, "{}", serde_json::to_string_pretty(&e.to_json())?)?,
        Format::Latex => writeln!(done.stdout, "{}", e.to_latex())?,
    }
    Ok(())
}

/// Defaults, then the config file's keys, then `--N` and the seed.
fn resolve_params(
    defaults: Value,
    config: Option<&Path>,
    n: Option<&[usize]>,
    seed: Option<u64>,
) -> anyhow::Result<Value> {
    let mut params = defaults;
    if let Some(p) = config {
        match read_json(p)? {
            Value::Object(m) => {
                for (key, v) in m {
                    params[key.as_str()] = v;
                }
            }
            _ => bail!("{}: expected a JSON object of parameters", p.display()),
        }
    }
    if let Some(list) = n {
        match params.get("N") {
            Some(Value::Array(_)) => params["N"] = json!(list),
            Some(_) if list.len() == 1 => params["N"] = json!(list[0]),
            Some(_) => bail!("--N takes a single value for this experiment"),
            None => bail!("this experiment has no N parameter"),
        }
    }
    let seed = match seed {
        Some(s) => Some(s),
        None => env_seed()?,
    };
    if let Some(s) = seed {
        if params.get("seed").is_some() {
            params["seed"] = json!(s);
        }
    }
    Ok(params)
}

macro_rules! run_experiment {
    ($params:ty, $check:path, $config:expr, $n:expr, $seed:expr) => {{
        let defaults = serde_json::to_value(<$params>::default())?;
        let value = resolve_params(defaults, $config, $n, $seed)?;
        let p: $params = serde_json::from_value(value).context("invalid parameters")?;
        let report = $check(&p)?;
        (serde_json::to_value(&p)?, report)
    }};
}

fn verify(
    exp: Experiment,
    subcommand: &str,
    config: Option<&Path>,
    out: &Path,
    n: Option<&[usize]>,
    seed: Option<u64>,
    done: &mut Done,
) -> anyhow::Result<()> {
    use lab::*;
    let (params, report): (Value, Report) = match exp {
        Experiment::LemmaProd => run_experiment!(LemmaProdParams, check_lemma_prod, config, n, seed),
        Experiment::GnDecay => run_experiment!(GnDecayParams, check_gn_decay, config, n, seed),
        Experiment::OracleTriangle => run_experiment!(TriangleParams, check_oracle_triangle, config, n, seed),
        Experiment::FlowConvergence => run_experiment!(ConvergenceParams, check_flow_convergence, config, n, seed),
        Experiment::Conservation => run_experiment!(ConservationParams, check_conservation, config, n, seed),
        Experiment::Liouville => run_experiment!(LiouvilleParams, check_liouville, config, n, seed),
        Experiment::Invariance => run_experiment!(InvarianceParams, check_invariance, config, n, seed),
        Experiment::Sampler => run_experiment!(SamplerParams, check_sampler, config, n, seed),
        Experiment::DensityConvergence => run_experiment!(DensityProbeParams, check_density_convergence, config, n, seed),
        Experiment::Recurrence => run_experiment!(RecurrenceParams, recurrence_scan, config, n, seed),
    };
    let run_config = json!({
        "subcommand": subcommand,
        "experiment": exp.name(),
        "params": params,
        "seed": params.get("seed"),
        "output_dir": out,
    });
    let paths = emit_report_with_config(&report, out, &run_config)?;
    for v in &report.verdicts {
        writeln!(done.stdout, "{v}")?;
    }
    for w in &report.warnings {
        writeln!(done.stderr, "warning: {w}")?;
    }
    writeln!(
        done.stdout,
        "{}: {} files in {}, {:.2} s",
        report.experiment_id,
        paths.len(),
        out.display(),
        report.runtime
    )?;
    done.passed = report.passed();
    Ok(())
}
