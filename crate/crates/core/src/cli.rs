//! The `divimark` command-line front end.
//!
//! Every subcommand writes CSV files (comma separated, `\n` line endings,
//! 12 significant digits) and a `manifest.txt` into `--out`, and prints a
//! short summary on standard output. Exit status: 0 on success, 1 on usage
//! or validation errors, 2 when an analysis fails (singular map, I/O).
//!
//! `--params` reads a sectioned `key = value` file:
//!
//! ```text
//! [model]
//! kind = phase_covariant
//! lambda_t = half_sine
//! lambda_z = exp_decay(rate=1)
//!
//! [grid]
//! t_start = 0
//! t_end = 5
//! steps = 1001
//!
//! [run]
//! seed = 7
//! out = results
//! ```
//!
//! Command-line flags take precedence over the file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Vector2, Vector3};
use rand::Rng;

use crate::bloch::{QubitEffect, QubitState};
use crate::dynmap::{
    cp_divisibility, p_divisibility, Criterion, DivisibilityVerdict, DynamicalModel, Grid,
    MapTrajectory, Picture, Side,
};
use crate::models::{
    builtin, classical_divisibility, classical_norm_monotonicity, classical_rates,
    model_from_table, phase_covariant_rates, ClassicalMap, DephRot, PhaseCovariant,
    PhaseCovariantParams, TimeFn,
};
use crate::povm::{incompat_p, resource_trajectory, sharpness, BinaryPovm, Resource};
use crate::witness::{
    dilation_bound_check, distance_trajectory, heisenberg_revival_pair, nm_measure, p_guess_effect,
    p_guess_effect_bruteforce, random_dilation, revival_intervals, DistancePair, EffectDifference,
    TrajectoryCurve,
};
use crate::{random, Error, Tolerances};

#[derive(Debug, Parser)]
#[command(
    name = "divimark",
    version,
    about = "Schrödinger and Heisenberg divisibility of qubit and classical dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the dynamical map on the grid.
    Traj(Common),
    /// Left and right phase-covariant rates.
    Rates(Common),
    /// P or CP divisibility verdict in one picture.
    Divisibility(Common),
    /// D1 or D∞ of a pair along the trajectory.
    Distance(Common),
    /// Non-Markovianity measure N_S or N_H.
    Measure(Common),
    /// Incompatibility and sharpness along the Heisenberg evolution.
    Povm {
        #[command(flatten)]
        common: Common,
        /// Evaluate the monotones on every n-th grid time.
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Rates, verdicts and norm monotonicity of a classical two-state scenario.
    Classical {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        scenario: u32,
    },
    /// Randomized revival bounds on two-qubit dilations.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Regenerate the data behind a figure.
    Reproduce {
        target: Target,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Fig2,
    Fig3,
    Figclass,
    Bounds,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PictureArg {
    S,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    P,
    Cp,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Built-in model: phcov, dephrot1, dephrot2, dephasing, depolarizing.
    #[arg(long)]
    model: Option<String>,
    /// Configuration file with [model], [grid], [run], [pair] sections.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    picture: Option<PictureArg>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Sectioned `key = value` configuration.
pub type ConfigFile = BTreeMap<String, BTreeMap<String, String>>;

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> crate::Result<ConfigFile> {
    let mut out = ConfigFile::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            out.entry(name.clone()).or_default();
            section = Some(name);
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("line {}: expected key = value", n + 1)))?;
        let sec = section
            .as_ref()
            .ok_or_else(|| Error::validation(format!("line {}: key outside a [section]", n + 1)))?;
        out.get_mut(sec)
            .expect("section exists")
            .insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Resolved settings for one invocation.
#[derive(Debug)]
pub struct RunConfig {
    model_name: Option<String>,
    model_table: Option<BTreeMap<String, String>>,
    grid: Option<Grid>,
    picture: Picture,
    criterion: Criterion,
    out: PathBuf,
    seed: u64,
    config: ConfigFile,
}

const KNOWN_SECTIONS: [&str; 5] = ["model", "grid", "run", "pair", "classical"];

impl RunConfig {
    fn resolve(c: &Common) -> crate::Result<Self> {
        let config = match &c.params {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::validation(format!("cannot read {}: {e}", path.display()))
                })?;
                parse_config(&text)?
            }
            None => ConfigFile::new(),
        };
        if let Some(s) = config
            .keys()
            .find(|s| !KNOWN_SECTIONS.contains(&s.as_str()))
        {
            return Err(Error::validation(format!("unknown config section [{s}]")));
        }
        let get = |sec: &str, key: &str| config.get(sec).and_then(|s| s.get(key)).cloned();
        let num = |sec: &str, key: &str| -> crate::Result<Option<f64>> {
            get(sec, key)
                .map(|v| crate::models::parse_number(&v))
                .transpose()
        };
        let t0 = c.t0.or(num("grid", "t_start")?);
        let t1 = c.t1.or(num("grid", "t_end")?);
        let steps = match c.steps {
            Some(s) => Some(s),
            None => get("grid", "steps")
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::validation(format!("bad steps `{s}`")))
                })
                .transpose()?,
        };
        let grid = if t0.is_some() || t1.is_some() || steps.is_some() {
            let d = Grid::default();
            Some(Grid::new(
                t0.unwrap_or(d.t_start),
                t1.unwrap_or(d.t_end),
                steps.unwrap_or(d.steps),
            )?)
        } else {
            None
        };
        let seed = match c.seed {
            Some(s) => s,
            None => get("run", "seed")
                .map(|s| {
                    s.parse::<u64>()
                        .map_err(|_| Error::validation(format!("bad seed `{s}`")))
                })
                .transpose()?
                .unwrap_or(0),
        };
        let out = c
            .out
            .clone()
            .or(get("run", "out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let picture = match c.picture {
            Some(PictureArg::H) => Picture::Heisenberg,
            _ => Picture::Schrodinger,
        };
        let criterion = match c.criterion {
            Some(CriterionArg::Cp) => Criterion::CP,
            _ => Criterion::P,
        };
        Ok(RunConfig {
            model_name: c.model.clone(),
            model_table: config.get("model").cloned(),
            grid,
            picture,
            criterion,
            out,
            seed,
            config,
        })
    }

    fn grid_or(&self, default: Grid) -> Grid {
        self.grid.unwrap_or(default)
    }

    fn model(&self) -> crate::Result<Box<dyn DynamicalModel>> {
        match (&self.model_name, &self.model_table) {
            (Some(name), _) => builtin(name),
            (None, Some(table)) => {
                let kind = table
                    .get("kind")
                    .ok_or_else(|| Error::validation("[model] needs a `kind`"))?;
                model_from_table(kind, table)
            }
            (None, None) => Err(Error::validation(
                "no model given: use --model or a [model] section",
            )),
        }
    }

    fn trajectory(&self, default: Grid) -> crate::Result<MapTrajectory> {
        MapTrajectory::from_model(self.model()?.as_ref(), &self.grid_or(default))
    }

    fn pair_entry(&self, key: &str) -> crate::Result<Option<Vec<f64>>> {
        self.config
            .get("pair")
            .and_then(|s| s.get(key))
            .map(|v| v.split(',').map(crate::models::parse_number).collect())
            .transpose()
    }
}

/// `%.12g`-style formatting.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| fmt_g(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Writes a table as CSV.
pub fn emit_csv(table: &Table, path: &Path) -> std::io::Result<()> {
    fs::write(path, table.render())
}

pub fn curve_table(curve: &TrajectoryCurve) -> Table {
    let mut t = Table::new(&["t", "value"]);
    for (x, y) in curve.times.iter().zip(&curve.values) {
        t.push_numbers(&[*x, *y]);
    }
    t
}

pub fn verdict_table(verdicts: &[DivisibilityVerdict]) -> Table {
    let mut t = Table::new(&[
        "picture",
        "criterion",
        "divisible",
        "first_violation_time",
        "worst_value",
    ]);
    for v in verdicts {
        t.push(vec![
            v.picture.to_string(),
            v.criterion.to_string(),
            v.divisible.to_string(),
            v.first_violation_time.map(fmt_g).unwrap_or_default(),
            fmt_g(v.worst_value),
        ]);
    }
    t
}

fn describe(v: &DivisibilityVerdict) -> String {
    match (v.divisible, v.first_violation_time) {
        (true, _) => format!(
            "{} {}-divisibility: divisible (worst value {})",
            v.picture,
            v.criterion,
            fmt_g(v.worst_value)
        ),
        (false, Some(t)) => format!(
            "{} {}-divisibility: violated, first violation at t = {} (worst value {})",
            v.picture,
            v.criterion,
            fmt_g(t),
            fmt_g(v.worst_value)
        ),
        (false, None) => format!("{} {}-divisibility: violated", v.picture, v.criterion),
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Output directory plus the list of files written, for the manifest.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
    log: String,
}

impl Output {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            log: String::new(),
        })
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        emit_csv(table, &self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        grid: Option<Grid>,
    ) -> Result<String, CliError> {
        let mut m = String::new();
        let _ = writeln!(m, "command = {command}");
        let _ = writeln!(m, "seed = {}", cfg.seed);
        let _ = writeln!(m, "rng = xoshiro256++ (SplitMix64 seeding)");
        if let Some(g) = grid {
            let _ = writeln!(
                m,
                "grid = [{}, {}] with {} points",
                fmt_g(g.t_start),
                fmt_g(g.t_end),
                g.steps
            );
        }
        let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
        self.files.sort();
        for f in &self.files {
            let _ = writeln!(m, "file = {f}");
        }
        fs::write(self.dir.join("manifest.txt"), m)?;
        Ok(self.log)
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// [`run`] with explicit standard output and error streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    let (code, message) = match execute(cli) {
        Ok(log) => {
            let _ = write!(stdout, "{log}");
            let _ = stdout.flush();
            return 0;
        }
        Err(CliError::Usage(msg)) | Err(CliError::Lib(Error::Validation(msg))) => (1, msg),
        Err(CliError::Lib(e)) => (2, e.to_string()),
        Err(CliError::Io(msg)) => (2, msg),
    };
    let _ = writeln!(stderr, "error: {message}");
    code
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Traj(c) => cmd_traj(&RunConfig::resolve(&c)?),
        Command::Rates(c) => cmd_rates(&RunConfig::resolve(&c)?),
        Command::Divisibility(c) => cmd_divisibility(&RunConfig::resolve(&c)?),
        Command::Distance(c) => cmd_distance(&RunConfig::resolve(&c)?),
        Command::Measure(c) => cmd_measure(&RunConfig::resolve(&c)?),
        Command::Povm { common, stride } => cmd_povm(&RunConfig::resolve(&common)?, stride),
        Command::Classical { common, scenario } => {
            cmd_classical(&RunConfig::resolve(&common)?, scenario)
        }
        Command::Bound { common, trials } => cmd_bound(&RunConfig::resolve(&common)?, trials),
        Command::Reproduce { target, common } => {
            cmd_reproduce(&RunConfig::resolve(&common)?, target)
        }
    }
}

fn cmd_traj(cfg: &RunConfig) -> Result<String, CliError> {
    let traj = cfg.trajectory(Grid::default())?;
    let mut out = Output::new(&cfg.out)?;
    let mut header = vec!["t".to_string(), "v_x".into(), "v_y".into(), "v_z".into()];
    for r in ["x", "y", "z"] {
        for c in ["x", "y", "z"] {
            header.push(format!("lambda_{r}{c}"));
        }
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (t, m) in traj.times().iter().zip(traj.samples()) {
        let mut row = vec![*t, m.v.x, m.v.y, m.v.z];
        for r in 0..3 {
            for c in 0..3 {
                row.push(m.lambda[(r, c)]);
            }
        }
        table.push_numbers(&row);
    }
    out.csv("traj.csv", &table)?;
    out.say(format!(
        "{}: {} samples written to traj.csv",
        traj.name(),
        traj.len()
    ));
    out.finish("traj", cfg, Some(cfg.grid_or(Grid::default())))
}

fn phase_covariant_params(cfg: &RunConfig) -> Result<PhaseCovariantParams, CliError> {
    match (&cfg.model_name, &cfg.model_table) {
        (Some(name), _) if name == "phcov" => Ok(PhaseCovariantParams::counterexample()),
        (None, Some(table))
            if matches!(
                table.get("kind").map(String::as_str),
                Some("phase_covariant" | "phcov")
            ) =>
        {
            let d = PhaseCovariantParams::counterexample();
            let get = |k: &str, def: TimeFn| -> crate::Result<TimeFn> {
                table
                    .get(k)
                    .map(|s| s.parse())
                    .transpose()
                    .map(|f| f.unwrap_or(def))
            };
            Ok(PhaseCovariantParams {
                lambda_t: get("lambda_t", d.lambda_t)?,
                lambda: get("lambda", d.lambda)?,
                lambda_z: get("lambda_z", d.lambda_z)?,
            })
        }
        (None, None) => Ok(PhaseCovariantParams::counterexample()),
        _ => Err(CliError::Usage(
            "rates are defined for the phase-covariant model only".into(),
        )),
    }
}

fn rates_table(p: &PhaseCovariantParams, grid: &Grid) -> crate::Result<Table> {
    let mut table = Table::new(&[
        "t",
        "gamma_plus",
        "gamma_minus",
        "gamma_z",
        "xi_plus",
        "xi_minus",
        "xi_z",
    ]);
    for t in grid.times() {
        let g = phase_covariant_rates(p, t, Side::Left)?;
        let x = phase_covariant_rates(p, t, Side::Right)?;
        table.push_numbers(&[t, g.plus, g.minus, g.z, x.plus, x.minus, x.z]);
    }
    Ok(table)
}

fn first_negative(table: &Table, column: usize) -> Option<String> {
    table
        .rows
        .iter()
        .find(|r| r[column].parse::<f64>().map(|v| v < 0.0).unwrap_or(false))
        .map(|r| r[0].clone())
}

fn cmd_rates(cfg: &RunConfig) -> Result<String, CliError> {
    let p = phase_covariant_params(cfg)?;
    let grid = cfg.grid_or(Grid::default());
    let table = rates_table(&p, &grid)?;
    let mut out = Output::new(&cfg.out)?;
    out.csv("rates.csv", &table)?;
    match first_negative(&table, 4) {
        Some(t) => out.say(format!("xi_plus first negative at t = {t}")),
        None => out.say("xi_plus nonnegative on the grid"),
    }
    out.finish("rates", cfg, Some(grid))
}

fn verdict(
    traj: &MapTrajectory,
    picture: Picture,
    criterion: Criterion,
) -> crate::Result<DivisibilityVerdict> {
    let tol = Tolerances::default();
    match criterion {
        Criterion::P => p_divisibility(traj, picture, &tol),
        Criterion::CP => cp_divisibility(traj, picture, &tol),
    }
}

fn cmd_divisibility(cfg: &RunConfig) -> Result<String, CliError> {
    let traj = cfg.trajectory(Grid::default())?;
    let v = verdict(&traj, cfg.picture, cfg.criterion)?;
    let mut out = Output::new(&cfg.out)?;
    out.csv("verdict.csv", &verdict_table(&[v]))?;
    out.say(format!("{}: {}", traj.name(), describe(&v)));
    out.finish("divisibility", cfg, Some(cfg.grid_or(Grid::default())))
}

/// The pair followed by `distance`: from `[pair] first/second` when given,
/// otherwise the optimizer's choice for the picture.
fn distance_pair(cfg: &RunConfig, traj: &MapTrajectory) -> Result<DistancePair, CliError> {
    let first = cfg.pair_entry("first")?;
    let second = cfg.pair_entry("second")?;
    match (cfg.picture, first, second) {
        (Picture::Schrodinger, Some(a), Some(b)) => {
            let s = |v: Vec<f64>| -> crate::Result<QubitState> {
                if v.len() != 3 {
                    return Err(Error::validation(
                        "state needs three Bloch components x, y, z",
                    ));
                }
                QubitState::new(Vector3::new(v[0], v[1], v[2]))
            };
            Ok(DistancePair::States(s(a)?, s(b)?))
        }
        (Picture::Heisenberg, Some(a), Some(b)) => {
            let e = |v: Vec<f64>| -> crate::Result<QubitEffect> {
                if v.len() != 4 {
                    return Err(Error::validation(
                        "effect needs four Bloch components a0, x, y, z",
                    ));
                }
                QubitEffect::new(v[0], Vector3::new(v[1], v[2], v[3]))
            };
            Ok(DistancePair::Effects(e(a)?, e(b)?))
        }
        (_, None, None) => Ok(optimal_pair(traj, cfg.picture)?),
        _ => Err(CliError::Usage(
            "[pair] needs both `first` and `second`".into(),
        )),
    }
}

fn optimal_pair(traj: &MapTrajectory, picture: Picture) -> crate::Result<DistancePair> {
    match picture {
        Picture::Schrodinger => {
            let w = nm_measure(traj, picture).witness;
            let n = Vector3::new(w[1], w[2], w[3]);
            Ok(DistancePair::States(
                QubitState::pure(n)?,
                QubitState::pure(-n)?,
            ))
        }
        Picture::Heisenberg => {
            if let Some((e, f)) = heisenberg_revival_pair(traj, &Tolerances::default())? {
                return Ok(DistancePair::Effects(e, f));
            }
            let w = nm_measure(traj, picture).witness;
            let (e, f) = EffectDifference::new(w[0], Vector3::new(w[1], w[2], w[3]))?.split();
            Ok(DistancePair::Effects(e, f))
        }
    }
}

fn cmd_distance(cfg: &RunConfig) -> Result<String, CliError> {
    let traj = cfg.trajectory(Grid::default())?;
    let pair = distance_pair(cfg, &traj)?;
    let curve = distance_trajectory(&traj, &pair);
    let mut out = Output::new(&cfg.out)?;
    out.csv("distance.csv", &curve_table(&curve))?;
    let revivals = revival_intervals(&curve, 1e-9);
    match revivals.first() {
        Some(r) => out.say(format!(
            "{} revives on {} interval(s); first from t = {}",
            curve.label,
            revivals.len(),
            fmt_g(r.t_start)
        )),
        None => out.say(format!("{} is monotone nonincreasing", curve.label)),
    }
    out.finish("distance", cfg, Some(cfg.grid_or(Grid::default())))
}

fn cmd_measure(cfg: &RunConfig) -> Result<String, CliError> {
    let traj = cfg.trajectory(Grid::default())?;
    let r = nm_measure(&traj, cfg.picture);
    let mut out = Output::new(&cfg.out)?;
    let mut t = Table::new(&["picture", "value", "w0", "w1", "w2", "w3"]);
    let mut row = vec![cfg.picture.to_string(), fmt_g(r.value)];
    row.extend(r.witness.iter().map(|&x| fmt_g(x)));
    t.push(row);
    out.csv("measure.csv", &t)?;
    let name = if cfg.picture == Picture::Schrodinger {
        "N_S"
    } else {
        "N_H"
    };
    out.say(format!("{}: {name} = {}", traj.name(), fmt_g(r.value)));
    out.finish("measure", cfg, Some(cfg.grid_or(Grid::default())))
}

fn povm_inputs(cfg: &RunConfig) -> Result<(BinaryPovm, BinaryPovm), CliError> {
    let parse = |key: &str, default: Vector3<f64>| -> Result<BinaryPovm, CliError> {
        match cfg.pair_entry(key)? {
            None => Ok(BinaryPovm::projective(default)?),
            Some(v) if v.len() == 4 => Ok(BinaryPovm::new(QubitEffect::new(
                v[0],
                Vector3::new(v[1], v[2], v[3]),
            )?)),
            Some(_) => Err(CliError::Usage(format!("[pair] {key} needs a0, x, y, z"))),
        }
    };
    Ok((
        parse("first", Vector3::y())?,
        parse("second", Vector3::x())?,
    ))
}

fn resource_table(
    traj: &MapTrajectory,
    m: &BinaryPovm,
    n: &BinaryPovm,
    stride: usize,
) -> crate::Result<Table> {
    let ip = resource_trajectory(
        traj,
        Resource::IncompatP { p: (0.5, 0.5) },
        m,
        Some(n),
        stride,
    )?;
    let is = resource_trajectory(traj, Resource::IncompatSteer, m, Some(n), stride)?;
    let sh = resource_trajectory(traj, Resource::Sharpness, m, None, stride)?;
    let mut t = Table::new(&["t", "incompat_p", "incompat_steer", "sharpness"]);
    for i in 0..ip.times.len() {
        t.push_numbers(&[ip.times[i], ip.values[i], is.values[i], sh.values[i]]);
    }
    Ok(t)
}

fn cmd_povm(cfg: &RunConfig, stride: usize) -> Result<String, CliError> {
    let traj = cfg.trajectory(Grid::default())?;
    let (m, n) = povm_inputs(cfg)?;
    let table = resource_table(&traj, &m, &n, stride)?;
    let mut out = Output::new(&cfg.out)?;
    out.csv("povm.csv", &table)?;
    out.say(format!(
        "{}: incompat_p(0) = {}, sharpness(0) = {}",
        traj.name(),
        fmt_g(incompat_p(&m, &n, (0.5, 0.5))?),
        fmt_g(sharpness(&m.e))
    ));
    out.finish("povm", cfg, Some(cfg.grid_or(Grid::default())))
}

fn classical_model(cfg: &RunConfig, scenario: u32) -> crate::Result<ClassicalMap> {
    match cfg.config.get("classical") {
        Some(sec) => {
            let f = |k: &str| -> crate::Result<TimeFn> {
                sec.get(k)
                    .ok_or_else(|| Error::validation(format!("[classical] needs `{k}`")))?
                    .parse()
            };
            ClassicalMap::new(f("a")?, f("b")?)
        }
        None => ClassicalMap::scenario(scenario),
    }
}

fn classical_tables(c: &ClassicalMap, grid: &Grid) -> crate::Result<(Table, Table)> {
    let mut ell = Table::new(&["t", "ell_1", "ell_2"]);
    let mut r = Table::new(&["t", "r_1", "r_2"]);
    for t in grid.times() {
        let k = classical_rates(c, t)?;
        ell.push_numbers(&[t, k.l1, k.l2]);
        r.push_numbers(&[t, k.r1, k.r2]);
    }
    Ok((ell, r))
}

fn cmd_classical(cfg: &RunConfig, scenario: u32) -> Result<String, CliError> {
    let c = classical_model(cfg, scenario)?;
    let grid = cfg.grid_or(Grid::default());
    let (ell, r) = classical_tables(&c, &grid)?;
    let mut out = Output::new(&cfg.out)?;
    out.csv("ell.csv", &ell)?;
    out.csv("r.csv", &r)?;
    let tol = 1e-9;
    let left = classical_divisibility(&c, Side::Left, &grid, tol)?;
    let right = classical_divisibility(&c, Side::Right, &grid, tol)?;
    out.csv("verdict.csv", &verdict_table(&[left, right]))?;
    let mut rng = random::seeded(cfg.seed);
    let mut mono = Table::new(&["x_1", "x_2", "max_d_norm1_left", "max_d_norminf_right"]);
    for _ in 0..100 {
        let x = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let max = |side| -> crate::Result<f64> {
            Ok(classical_norm_monotonicity(&c, side, &x, &grid)?
                .iter()
                .map(|p| p.1)
                .fold(f64::NEG_INFINITY, f64::max))
        };
        mono.push_numbers(&[x.x, x.y, max(Side::Left)?, max(Side::Right)?]);
    }
    out.csv("norms.csv", &mono)?;
    out.say(format!(
        "min ell = {}, min r = {}",
        fmt_g(left.worst_value),
        fmt_g(right.worst_value)
    ));
    out.say(describe(&left));
    out.say(describe(&right));
    out.finish("classical", cfg, Some(grid))
}

fn bound_table(seed: u64, trials: usize) -> crate::Result<(Table, usize)> {
    let mut rng = random::seeded(seed);
    let mut t = Table::new(&[
        "trial", "s", "t", "td_lhs", "td_rhs", "td_holds", "od_lhs", "od_rhs", "od_holds",
    ]);
    let mut failures = 0;
    for k in 0..trials {
        let m = random_dilation(&mut rng);
        let s = rng.random_range(0.0..3.0);
        let tt = s + rng.random_range(0.0..3.0);
        let b = dilation_bound_check(&m, s, tt)?;
        failures += usize::from(!b.schrodinger.holds) + usize::from(!b.heisenberg.holds);
        t.push(vec![
            k.to_string(),
            fmt_g(s),
            fmt_g(tt),
            fmt_g(b.schrodinger.lhs),
            fmt_g(b.schrodinger.rhs),
            b.schrodinger.holds.to_string(),
            fmt_g(b.heisenberg.lhs),
            fmt_g(b.heisenberg.rhs),
            b.heisenberg.holds.to_string(),
        ]);
    }
    Ok((t, failures))
}

fn cmd_bound(cfg: &RunConfig, trials: usize) -> Result<String, CliError> {
    let (table, failures) = bound_table(cfg.seed, trials)?;
    let mut out = Output::new(&cfg.out)?;
    out.csv("bounds.csv", &table)?;
    out.say(format!("{trials} dilations, {failures} bound violation(s)"));
    if failures > 0 {
        return Err(CliError::Lib(Error::Analysis(format!(
            "{failures} revival bound violation(s)"
        ))));
    }
    out.finish("bound", cfg, None)
}

fn cmd_reproduce(cfg: &RunConfig, target: Target) -> Result<String, CliError> {
    let mut out = Output::new(&cfg.out)?;
    let targets: &[Target] = match target {
        Target::All => &[Target::Fig2, Target::Fig3, Target::Figclass, Target::Bounds],
        _ => std::slice::from_ref(&target),
    };
    for t in targets {
        match t {
            Target::Fig2 => reproduce_fig2(cfg, &mut out)?,
            Target::Fig3 => reproduce_fig3(cfg, &mut out)?,
            Target::Figclass => reproduce_figclass(cfg, &mut out)?,
            Target::Bounds => reproduce_bounds(cfg, &mut out)?,
            Target::All => unreachable!("expanded above"),
        }
    }
    let name = format!(
        "reproduce {}",
        target.to_possible_value().expect("named").get_name()
    );
    out.finish(&name, cfg, None)
}

fn reproduce_fig2(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let grid = cfg.grid_or(Grid::new(0.0, 5.0, 1001)?);
    let model = PhaseCovariant::counterexample();
    let traj = MapTrajectory::from_model(&model, &grid)?;
    let rates = rates_table(&model.params, &grid)?;
    out.csv("rates.csv", &rates)?;
    let dinf = distance_trajectory(&traj, &optimal_pair(&traj, Picture::Heisenberg)?);
    out.csv("dinf.csv", &curve_table(&dinf))?;
    let d1 = distance_trajectory(&traj, &optimal_pair(&traj, Picture::Schrodinger)?);
    out.csv("d1.csv", &curve_table(&d1))?;
    let verdicts = [
        verdict(&traj, Picture::Schrodinger, Criterion::CP)?,
        verdict(&traj, Picture::Schrodinger, Criterion::P)?,
        verdict(&traj, Picture::Heisenberg, Criterion::CP)?,
        verdict(&traj, Picture::Heisenberg, Criterion::P)?,
    ];
    out.csv("fig2_verdicts.csv", &verdict_table(&verdicts))?;
    out.text("fig2.gp", FIG2_GP)?;
    if let Some(t) = first_negative(&rates, 4) {
        out.say(format!("fig2: xi_plus first negative at t = {t}"));
    }
    if let Some(r) = revival_intervals(&dinf, 1e-9).first() {
        out.say(format!(
            "fig2: Dinf revival starts at t = {}",
            fmt_g(r.t_start)
        ));
    }
    for v in &verdicts {
        out.say(format!("fig2: {}", describe(v)));
    }
    Ok(())
}

fn reproduce_fig3(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let grid = cfg.grid_or(Grid::new(0.0, 3.0, 601)?);
    let m1 = DephRot::variant1();
    let traj = MapTrajectory::from_model(&m1, &grid)?;
    let y = Vector3::y();
    let states = DistancePair::States(QubitState::pure(y)?, QubitState::pure(-y)?);
    let py = QubitEffect::projector(y)?;
    let effects = DistancePair::Effects(py, py.complement());
    let d1 = distance_trajectory(&traj, &states);
    let dinf = distance_trajectory(&traj, &effects);
    let mut dist = Table::new(&["t", "d1", "dinf", "lambda", "beta"]);
    for (i, &t) in traj.times().iter().enumerate() {
        dist.push_numbers(&[
            t,
            d1.values[i],
            dinf.values[i],
            m1.params.dephasing(t).0,
            m1.params.angle(t).0,
        ]);
    }
    out.csv("fig3_distances.csv", &dist)?;
    let (m, n) = (
        BinaryPovm::projective(y)?,
        BinaryPovm::projective(Vector3::x())?,
    );
    out.csv("fig3_resources.csv", &resource_table(&traj, &m, &n, 5)?)?;
    let t2 = MapTrajectory::from_model(&DephRot::variant2(), &grid)?;
    let mut measures = Table::new(&["model", "N_S", "N_H"]);
    for (name, tr) in [("dephrot1", &traj), ("dephrot2", &t2)] {
        let ns = nm_measure(tr, Picture::Schrodinger).value;
        let nh = nm_measure(tr, Picture::Heisenberg).value;
        measures.push(vec![name.into(), fmt_g(ns), fmt_g(nh)]);
        out.say(format!(
            "fig3: {name}: N_S = {}, N_H = {}",
            fmt_g(ns),
            fmt_g(nh)
        ));
    }
    out.csv("fig3_measures.csv", &measures)?;
    let v = verdict(&traj, Picture::Heisenberg, Criterion::P)?;
    out.say(format!("fig3: dephrot1 {}", describe(&v)));
    out.text("fig3.gp", FIG3_GP)?;
    Ok(())
}

fn reproduce_figclass(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let grid = cfg.grid_or(Grid::new(0.0, 10.0, 2001)?);
    for (k, c) in [
        (1, ClassicalMap::scenario1()),
        (2, ClassicalMap::scenario2()),
    ] {
        let mut t = Table::new(&["t", "ell_1", "ell_2", "r_1", "r_2"]);
        for time in grid.times() {
            let r = classical_rates(&c, time)?;
            t.push_numbers(&[time, r.l1, r.l2, r.r1, r.r2]);
        }
        out.csv(&format!("classical_ab{k}.csv"), &t)?;
        let l = classical_divisibility(&c, Side::Left, &grid, 1e-9)?;
        let r = classical_divisibility(&c, Side::Right, &grid, 1e-9)?;
        out.say(format!(
            "figclass: ab{k}: min ell = {}, min r = {}",
            fmt_g(l.worst_value),
            fmt_g(r.worst_value)
        ));
    }
    out.text("figclass.gp", FIGCLASS_GP)?;
    Ok(())
}

fn reproduce_bounds(cfg: &RunConfig, out: &mut Output) -> Result<(), CliError> {
    let (table, failures) = bound_table(cfg.seed, 200)?;
    out.csv("bounds.csv", &table)?;
    let mut rng = random::seeded(cfg.seed.wrapping_add(1));
    let mut guess = Table::new(&["trial", "closed_form", "bruteforce", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let (e, f) = (random::effect(&mut rng), random::effect(&mut rng));
        let (a, b) = (
            p_guess_effect(&e, &f),
            p_guess_effect_bruteforce(&e, &f, 200),
        );
        worst = worst.max((a - b).abs());
        guess.push(vec![
            k.to_string(),
            fmt_g(a),
            fmt_g(b),
            fmt_g((a - b).abs()),
        ]);
    }
    out.csv("guessing.csv", &guess)?;
    out.say(format!(
        "bounds: 200 dilations, {failures} violation(s); guessing oracle max deviation {}",
        fmt_g(worst)
    ));
    Ok(())
}

const FIG2_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set multiplot layout 1,2
plot 'rates.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:5 with lines dashtype 2, '' using 1:6 with lines dashtype 2
plot 'dinf.csv' using 1:2 with lines title 'D_inf', 'd1.csv' using 1:2 with lines title 'D_1'
unset multiplot
";

const FIG3_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set multiplot layout 1,2
plot 'fig3_distances.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines dashtype 2, '' using 1:5 with lines dashtype 2
plot 'fig3_resources.csv' using 1:2 with lines, '' using 1:4 with lines
unset multiplot
";

const FIGCLASS_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set multiplot layout 1,2
plot 'classical_ab1.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines dashtype 2, '' using 1:5 with lines dashtype 2
plot 'classical_ab2.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines dashtype 2, '' using 1:5 with lines dashtype 2
unset multiplot
";
