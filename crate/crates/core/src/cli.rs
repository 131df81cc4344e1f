//! Command-line front end: `synth`, `train`, `eval`, `diff`, `gradcheck`.
//!
//! Exit codes: 0 ok, 1 I/O or malformed input file, 2 usage or invalid
//! configuration, 3 degenerate data (EDI undefined), 4 grid mismatch,
//! 5 gradient check failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::autodiff::Fault;
use crate::data::io::{load_dataset, write_dataset};
use crate::data::synth::{generate_synthetic, Scenario, SynthConfig, DEFAULT_SHIFTED_PARAMETER, DEFAULT_SHIFT_FACTOR};
use crate::data::{temporal_split, DateRange, Dataset};
use crate::error::{Error, Result};
use crate::eval::{diff_report, evaluate_region, render_diff, render_report, training_threshold, SkillReport};
use crate::gradcheck::{run_suite, SuiteConfig};
use crate::params::ParameterSet;
use crate::trainer::{train_with, write_history, Sgd, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_GRADCHECK: i32 = 5;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::DegenerateData(_) | Error::UndefinedScore(_) => EXIT_DEGENERATE,
        Error::GridMismatch(_) => EXIT_MISMATCH,
        _ => EXIT_IO,
    }
}

#[derive(Parser, Debug)]
#[command(name = "pyric", version, about = "Differentiable NFDRS Ignition Component: synthesize, train, evaluate")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "PYRIC_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Calibrate a parameter ledger by gradient descent.
    Train(TrainArgs),
    /// Score a ledger over a test period.
    Eval(EvalArgs),
    /// Trained-minus-untrained skill map.
    Diff(DiffArgs),
    /// Finite-difference check of the IC graph and the EDI loss.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Grid size as ROWSxCOLS.
    #[arg(long, default_value = "16x16", value_parser = parse_grid)]
    pub grid: (usize, usize),
    #[arg(long, default_value_t = 730)]
    pub days: usize,
    #[arg(long, default_value = "2019-01-01")]
    pub start: NaiveDate,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// parameter-shift, seasonal or random.
    #[arg(long, default_value = "parameter-shift")]
    pub scenario: Scenario,
    #[arg(long, default_value = DEFAULT_SHIFTED_PARAMETER)]
    pub shift_param: String,
    #[arg(long, default_value_t = DEFAULT_SHIFT_FACTOR)]
    pub shift_factor: f64,
    #[arg(long)]
    pub fire_rate: Option<f64>,
    #[arg(long)]
    pub fire_power: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Options shared by every command that reads a dataset and a JSON config.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest, dataset directory, or CSV fixture.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training period, `START..END` (dates or years). Default: all but the final calendar year.
    #[arg(long)]
    pub train_range: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Starting parameter ledger (default: built-in values).
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Cell-days per step (default: all fit cell-days).
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub clip_limit: Option<f64>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub beta_final: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Comma-separated parameters to learn; all others are frozen.
    #[arg(long, value_delimiter = ',')]
    pub learn: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct EvalOptions {
    /// Test period, `START..END`. Default: the final calendar year.
    #[arg(long)]
    pub test_range: Option<String>,
    #[arg(long)]
    pub quantile: Option<f64>,
    #[arg(long)]
    pub fuzzy_radius: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub eval: EvalOptions,
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiffArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub eval: EvalOptions,
    #[arg(long)]
    pub trained: Option<PathBuf>,
    /// Baseline ledger (default: built-in values).
    #[arg(long)]
    pub untrained: Option<PathBuf>,
    /// Dataset for the baseline (default: `--data`). Must share its grid.
    #[arg(long)]
    pub untrained_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Writes `gradcheck.json` here when given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scales the sigmoid derivative; a negative control.
    #[arg(long, hide = true)]
    pub fault: Option<f64>,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    let r: usize = r.parse().map_err(|_| format!("bad row count `{r}`"))?;
    let c: usize = c.parse().map_err(|_| format!("bad column count `{c}`"))?;
    if r < 2 || c < 2 {
        return Err("grid needs at least 2x2 cells".into());
    }
    Ok((r, c))
}

/// Parses `START..END` with ISO dates or bare years.
pub fn parse_range(s: &str) -> Result<DateRange> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("range `{s}` should look like START..END")))?;
    let date = |t: &str, end: bool| -> Result<NaiveDate> {
        if let Ok(y) = t.parse::<i32>() {
            return NaiveDate::from_ymd_opt(y, if end { 12 } else { 1 }, if end { 31 } else { 1 })
                .ok_or_else(|| Error::Config(format!("bad year `{t}`")));
        }
        t.parse().map_err(|_| Error::Config(format!("bad date `{t}`")))
    };
    DateRange::new(date(a.trim(), false)?, date(b.trim(), true)?)
}

/// Config-file values merged under command-line flags, with the origin of
/// each effective value.
struct Merged {
    file: BTreeMap<String, Value>,
    values: BTreeMap<String, Value>,
    sources: BTreeMap<String, &'static str>,
}

impl Merged {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let mut file: BTreeMap<String, Value> = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            file = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            // An echoed config.json from an earlier run is accepted as is.
            if let (Some(Value::Object(values)), Some(Value::String(_))) = (file.get("values"), file.get("command")) {
                file = values.clone().into_iter().collect();
            }
            if let Some(k) = file.keys().find(|k| !allowed.contains(&k.as_str())) {
                return Err(Error::Config(format!("{}: unknown key `{k}`", p.display())));
            }
        }
        Ok(Merged {
            file,
            values: BTreeMap::new(),
            sources: BTreeMap::new(),
        })
    }

    fn take<T: Serialize + for<'de> Deserialize<'de>>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<Option<T>> {
        let (v, src) = match (flag, self.file.get(key)) {
            (Some(v), _) => (Some(v), "flag"),
            (None, Some(Value::Null)) => (None, "file"),
            (None, Some(j)) => (
                Some(serde_json::from_value(j.clone()).map_err(|e| Error::Config(format!("config key `{key}`: {e}")))?),
                "file",
            ),
            (None, None) => (default, "default"),
        };
        self.values
            .insert(key.to_string(), serde_json::to_value(&v).expect("config value serializes"));
        self.sources.insert(key.to_string(), src);
        Ok(v)
    }

    fn required<T: Serialize + for<'de> Deserialize<'de>>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.take(key, flag, None)?
            .ok_or_else(|| Error::Config(format!("missing --{}", key.replace('_', "-"))))
    }

    fn write(&self, command: &str, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Echo<'a> {
            command: &'a str,
            values: &'a BTreeMap<String, Value>,
            sources: &'a BTreeMap<String, &'static str>,
        }
        let mut s = serde_json::to_string_pretty(&Echo {
            command,
            values: &self.values,
            sources: &self.sources,
        })
        .expect("config serializes");
        s.push('\n');
        let path = dir.join("config.json");
        fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}

fn load_ledger(path: Option<&PathBuf>) -> Result<ParameterSet> {
    match path {
        Some(p) => ParameterSet::load(p),
        None => Ok(ParameterSet::default()),
    }
}

fn full_range(data: &Dataset) -> Result<DateRange> {
    if data.n_days() == 0 {
        return Err(Error::Config("dataset has no days".into()));
    }
    DateRange::new(data.stack.start, data.stack.date(data.n_days() - 1))
}

fn slice(data: &Dataset, range: DateRange) -> Result<Dataset> {
    Ok(data.time_range(range.indices(data.stack.start, data.n_days())?))
}

fn make_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let grid = crate::data::synth::square_grid(a.grid.0, a.grid.1);
    let mut cfg = SynthConfig::new(grid, a.start, a.days, a.seed, a.scenario);
    cfg.shifted_parameter = a.shift_param.clone();
    cfg.shift_factor = a.shift_factor;
    if let Some(r) = a.fire_rate {
        cfg.fire_rate = r;
    }
    if let Some(p) = a.fire_power {
        cfg.fire_power = p;
    }
    let out = generate_synthetic(&cfg)?;
    write_dataset(&out.dataset, &a.out)?;
    out.truth.save(&a.out.join("truth.json"))?;
    let path = a.out.join("config.json");
    let mut s = serde_json::to_string_pretty(&cfg).expect("config serializes");
    s.push('\n');
    fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    println!(
        "wrote {} ({}x{} cells, {} days, scenario {}): {} fire cell-days, base rate {:.4}%",
        a.out.display(),
        a.grid.0,
        a.grid.1,
        a.days,
        a.scenario.name(),
        out.dataset.fires.total_fires(),
        100.0 * out.base_rate
    );
    if a.scenario == Scenario::ParameterShift {
        println!("generating ledger: {} ({} x {})", a.out.join("truth.json").display(), cfg.shifted_parameter, cfg.shift_factor);
    }
    Ok(())
}

const TRAIN_KEYS: &[&str] = &[
    "data", "out", "train_range", "seed", "ledger", "learning_rate", "epochs", "batch", "clip_limit", "quantile",
    "beta", "beta_final", "patience", "validation_fraction", "learn",
];

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let c = &a.common;
    let mut m = Merged::load(c.config.as_deref(), TRAIN_KEYS)?;
    let data_path: PathBuf = m.required("data", c.data.clone())?;
    let out: PathBuf = m.required("out", c.out.clone())?;
    let ledger: Option<PathBuf> = m.take("ledger", a.ledger.clone(), None)?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: m.take("learning_rate", a.learning_rate, Some(d.learning_rate))?.unwrap(),
        max_epochs: m.take("epochs", a.epochs, Some(d.max_epochs))?.unwrap(),
        batch: m.take("batch", a.batch, d.batch)?,
        clip_limit: m.take("clip_limit", a.clip_limit, Some(d.clip_limit))?.unwrap(),
        quantile_q: m.take("quantile", a.quantile, Some(d.quantile_q))?.unwrap(),
        beta: m.take("beta", a.beta, Some(d.beta))?.unwrap(),
        beta_final: m.take("beta_final", a.beta_final, d.beta_final)?,
        patience: m.take("patience", a.patience, Some(d.patience))?.unwrap(),
        validation_fraction: m.take("validation_fraction", a.validation_fraction, d.validation_fraction)?,
        epsilon: d.epsilon,
        seed: m.take("seed", c.seed, Some(d.seed))?.unwrap(),
    };
    cfg.validate()?;
    let learn: Option<Vec<String>> = m.take("learn", a.learn.clone(), None)?;
    let range: Option<String> = m.take("train_range", c.train_range.clone(), None)?;

    let mut params = load_ledger(ledger.as_ref())?;
    if let Some(names) = &learn {
        params.learn_only(names)?;
    }
    let data = load_dataset(&data_path)?;
    let range = match range {
        Some(r) => parse_range(&r)?,
        None => full_range(&data)?.split_final_year()?.0,
    };
    m.values.insert("train_range".into(), Value::String(range.to_string()));
    let train = slice(&data, range)?;

    make_out(&out)?;
    m.write("train", &out)?;
    let mut opt = Sgd {
        learning_rate: cfg.learning_rate,
    };
    let outcome = train_with(&train, &params, &cfg, &mut opt, &mut |r| {
        println!(
            "epoch {:>3}  loss {:>10}  validation EDI {:.6}  threshold {:.4}{}",
            r.epoch,
            r.train_loss.map_or("-".to_string(), |l| format!("{l:.6}")),
            r.validation_edi,
            r.threshold,
            if r.best { "  *" } else { "" }
        );
    })?;
    outcome.params.save(&out.join("ledger.json"))?;
    outcome.best.save(&out.join("checkpoint.json"))?;
    write_history(&out.join("history.csv"), &outcome.history)?;
    println!(
        "best epoch {} (validation EDI {:.6}); stopped: {:?}; wrote {}",
        outcome.best.epoch,
        outcome.best.validation_edi,
        outcome.stop,
        out.display()
    );
    Ok(())
}

const EVAL_KEYS: &[&str] = &[
    "data", "out", "train_range", "seed", "test_range", "quantile", "fuzzy_radius", "ledger", "trained", "untrained",
    "untrained_data",
];

struct EvalSetup {
    train: Dataset,
    test: Dataset,
    quantile: f64,
    radius: usize,
    out: PathBuf,
}

fn eval_setup(m: &mut Merged, c: &Common, e: &EvalOptions) -> Result<EvalSetup> {
    let data_path: PathBuf = m.required("data", c.data.clone())?;
    eval_setup_for(m, c, e, &data_path)
}

fn eval_setup_for(m: &mut Merged, c: &Common, e: &EvalOptions, data_path: &Path) -> Result<EvalSetup> {
    let out: PathBuf = m.required("out", c.out.clone())?;
    let quantile = m.take("quantile", e.quantile, Some(TrainConfig::default().quantile_q))?.unwrap();
    let radius = m.take("fuzzy_radius", e.fuzzy_radius, Some(crate::eval::DEFAULT_FUZZY_RADIUS))?.unwrap();
    let train_range: Option<String> = m.take("train_range", c.train_range.clone(), None)?;
    let test_range: Option<String> = m.take("test_range", e.test_range.clone(), None)?;
    let data = load_dataset(data_path)?;
    let (default_train, default_test) = full_range(&data)?.split_final_year()?;
    let train_range = train_range.map(|r| parse_range(&r)).transpose()?.unwrap_or(default_train);
    let test_range = test_range.map(|r| parse_range(&r)).transpose()?.unwrap_or(default_test);
    m.values.insert("train_range".into(), Value::String(train_range.to_string()));
    m.values.insert("test_range".into(), Value::String(test_range.to_string()));
    let (train, test) = temporal_split(&data, train_range, test_range)?;
    Ok(EvalSetup {
        train,
        test,
        quantile,
        radius,
        out,
    })
}

fn score(s: &EvalSetup, params: &ParameterSet) -> Result<SkillReport> {
    let prov = training_threshold(&s.train, params, s.quantile)?;
    evaluate_region(&s.test, params, prov.value, s.radius)?.with_provenance(prov)
}

fn describe(label: &str, r: &SkillReport) {
    println!(
        "{label}: aggregate EDI {}  threshold {:.4}  scored cells {}/{}",
        r.aggregate_edi().map_or("undefined".into(), |v| format!("{v:.6}")),
        r.metadata.threshold,
        r.scored_cells(),
        r.cells.len()
    );
}

/// Reports are written either way; an undefined aggregate still fails the run.
fn require_score(r: &SkillReport) -> Result<()> {
    match r.aggregate {
        Some(_) => Ok(()),
        None => Err(Error::DegenerateData(
            "the test period has no fire or no non-fire cell-days; EDI is undefined".into(),
        )),
    }
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut m = Merged::load(a.common.config.as_deref(), EVAL_KEYS)?;
    let ledger: Option<PathBuf> = m.take("ledger", a.ledger.clone(), None)?;
    let s = eval_setup(&mut m, &a.common, &a.eval)?;
    let params = load_ledger(ledger.as_ref())?;
    let report = score(&s, &params)?;
    make_out(&s.out)?;
    m.write("eval", &s.out)?;
    render_report(&report, &s.out)?;
    describe("eval", &report);
    require_score(&report)
}

fn cmd_diff(a: &DiffArgs) -> Result<()> {
    let mut m = Merged::load(a.common.config.as_deref(), EVAL_KEYS)?;
    let trained: PathBuf = m.required("trained", a.trained.clone())?;
    let untrained: Option<PathBuf> = m.take("untrained", a.untrained.clone(), None)?;
    let other: Option<PathBuf> = m.take("untrained_data", a.untrained_data.clone(), None)?;
    let s = eval_setup(&mut m, &a.common, &a.eval)?;
    let t = score(&s, &ParameterSet::load(&trained)?)?;
    let u = match &other {
        Some(path) => score(&eval_setup_for(&mut m, &a.common, &a.eval, path)?, &load_ledger(untrained.as_ref())?)?,
        None => score(&s, &load_ledger(untrained.as_ref())?)?,
    };
    let diff = diff_report(&t, &u)?;
    make_out(&s.out)?;
    m.write("diff", &s.out)?;
    render_diff(&diff, &s.out)?;
    render_report(&t, &s.out.join("trained"))?;
    render_report(&u, &s.out.join("untrained"))?;
    describe("trained", &t);
    describe("untrained", &u);
    println!(
        "difference: aggregate {}  improved {} / worsened {} / unchanged {}  flagged {}",
        diff.summary.aggregate_delta.map_or("undefined".into(), |v| format!("{v:+.6}")),
        diff.summary.improved,
        diff.summary.worsened,
        diff.summary.unchanged,
        diff.summary.flagged_cells
    );
    require_score(&t)?;
    require_score(&u)
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<bool> {
    let params = load_ledger(a.ledger.as_ref())?;
    let cfg = SuiteConfig {
        points: a.points,
        seed: a.seed,
        step: a.step,
        tolerance: a.tolerance,
        fault: a.fault.map(Fault::SigmoidGradScale),
        ..Default::default()
    };
    let report = run_suite(&params, &cfg)?;
    for p in &report.points {
        println!(
            "{:<10} point {:>3}  max rel err {:.3e}  checked {:>3}  {}",
            serde_json::to_value(p.graph).expect("graph name").as_str().unwrap_or_default(),
            p.point,
            p.max_relative_error,
            p.checked,
            if p.passed { "ok" } else { "FAIL" }
        );
        if p.excluded > 0 {
            eprintln!(
                "warning: point {} excluded {} input(s) whose perturbation crossed a branch boundary",
                p.point, p.excluded
            );
        }
    }
    if let Some(dir) = &a.out {
        make_out(dir)?;
        let path = dir.join("gradcheck.json");
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    }
    let ok = report.passed();
    println!(
        "gradcheck {}: {} points, tolerance {:.0e}, excluded inputs {}",
        if ok { "passed" } else { "FAILED" },
        report.points.len(),
        report.tolerance,
        report.excluded()
    );
    Ok(ok)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a).map(|_| EXIT_OK),
        Command::Train(a) => cmd_train(a).map(|_| EXIT_OK),
        Command::Eval(a) => cmd_eval(a).map(|_| EXIT_OK),
        Command::Diff(a) => cmd_diff(a).map(|_| EXIT_OK),
        Command::Gradcheck(a) => cmd_gradcheck(a).map(|ok| if ok { EXIT_OK } else { EXIT_GRADCHECK }),
    }
}

/// Usage line of the subcommand named in `args`, or of the whole program.
fn usage_for(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = args.iter().skip(1).find_map(|a| {
        let a = a.to_str()?;
        cmd.get_subcommands().any(|c| c.get_name() == a).then(|| a.to_string())
    });
    match name.and_then(|n| cmd.find_subcommand_mut(&n).cloned()) {
        Some(mut sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(&args));
            }
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_IO;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
