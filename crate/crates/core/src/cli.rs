//! Command-line front end: seeded scenario runs with tabular output.
//!
//! Every run is fully determined by (config, seed); repeating one yields
//! byte-identical CSV. Parameters resolve in three layers: built-in
//! defaults, then the TOML config file (`--config`), then command-line
//! flags. Sweeps run in parallel but output assembly is ordered by task
//! index, so parallel and serial runs agree.
//!
//! Exit codes: 0 success, 2 validation or usage error, 3 truncated run
//! (state explosion or grid aliasing; partial rows are still written,
//! followed by a `# truncated:` marker).

use crate::brems::{BremsError, BremsParams, GridDensityMatrix, iterated_entropies};
use crate::decoherence::{DecoherenceError, lemma_trial};
use crate::disorder::{self, DisorderError, DisorderSpec, fit_series};
use crate::mirrors::{MirrorsError, WavePacket, refocus_report};
use crate::seeding::derive_seed;
use crate::walk1d::{
    EntropySeries, ScattererSpec, SpinMode, WalkError, WalkScenario, entropy_bits,
    evolve_entropy, evolve_entropy_backward, half_space_scenario, reverse_complete,
    reverse_incomplete, step, sweep_transparency,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config schema {found} unsupported; this build reads schema 1")]
    ConfigSchema { found: u32 },
    #[error("config file has no [{0}] table")]
    MissingTable(&'static str),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Brems(#[from] BremsError),
    #[error(transparent)]
    Mirrors(#[from] MirrorsError),
    #[error(transparent)]
    Decoherence(#[from] DecoherenceError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[derive(Parser)]
#[command(
    name = "entlab",
    version,
    about = "Entropy growth and time reversal in scatterer-reservoir models"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice walk entropy series, optionally with a mid-run reversal.
    Walk(WalkArgs),
    /// First entropy-drop step as a function of transparency.
    #[command(name = "sweep-t")]
    SweepT(SweepTArgs),
    /// Disordered-array runs: component census, growth fits, entropy.
    Disorder(DisorderArgs),
    /// Iterated dephasing-kernel entropy on a coordinate-grid packet.
    Brems(BremsArgs),
    /// Mirror-array refocusing scan over times and phase budgets.
    Mirrors(MirrorsArgs),
    /// Batch of random Schur-product monotonicity trials.
    Lemma(LemmaArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed; per-task streams derive from (seed, tag, index).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output table format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML config file (schema = 1) with one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SpinModeArg {
    Persistent,
    Fresh,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DirectionArg {
    Forward,
    Backward,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ReversalArg {
    None,
    Complete,
    Incomplete,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DisorderKindArg {
    Positions,
    Amplitudes,
}

#[derive(Args)]
struct WalkArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Barrier transparency T in (0, 1).
    #[arg(long)]
    transparency: Option<f64>,
    /// Left-reflection phase chi_LL, radians.
    #[arg(long, allow_negative_numbers = true)]
    phase_ll: Option<f64>,
    /// Left-to-right transmission phase chi_LR, radians.
    #[arg(long, allow_negative_numbers = true)]
    phase_lr: Option<f64>,
    /// Spin rotation per transmission, radians; pi is a full flip.
    #[arg(long, allow_negative_numbers = true)]
    flip_angle: Option<f64>,
    #[arg(long, value_enum)]
    spin_mode: Option<SpinModeArg>,
    /// Number of scattering steps.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    #[arg(long, value_enum)]
    reversal: Option<ReversalArg>,
    /// Step at which the reversal is applied (requires --reversal).
    #[arg(long)]
    reversal_step: Option<i64>,
    /// Run the half-space emission scenario with this many scatterers.
    #[arg(long)]
    half_space_depth: Option<usize>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct WalkConfig {
    transparency: Option<f64>,
    phase_ll: Option<f64>,
    phase_lr: Option<f64>,
    flip_angle: Option<f64>,
    spin_mode: Option<SpinModeArg>,
    horizon: Option<usize>,
    direction: Option<DirectionArg>,
    reversal: Option<ReversalArg>,
    reversal_step: Option<i64>,
    half_space_depth: Option<usize>,
}

#[derive(Args)]
struct SweepTArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// First transparency of the grid.
    #[arg(long)]
    from: Option<f64>,
    /// Last transparency of the grid (inclusive).
    #[arg(long)]
    to: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    step: Option<f64>,
    /// Steps simulated per grid point.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct SweepTConfig {
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
    horizon: Option<usize>,
}

#[derive(Args)]
struct DisorderArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum)]
    kind: Option<DisorderKindArg>,
    /// Mean transparency.
    #[arg(long)]
    base_t: Option<f64>,
    /// Full width of the uniform transparency jitter.
    #[arg(long)]
    delta_t: Option<f64>,
    /// Full width of the reflection-phase jitter, radians.
    #[arg(long)]
    delta_chi_ll: Option<f64>,
    /// Full width of the transmission-phase jitter, radians.
    #[arg(long)]
    delta_chi_lr: Option<f64>,
    /// Position disorder strength.
    #[arg(long)]
    eta: Option<f64>,
    /// Simulated time span.
    #[arg(long)]
    horizon: Option<u32>,
    /// Scatterer window size for continuous runs.
    #[arg(long)]
    window: Option<usize>,
    /// Attach a tag spin to every scatterer (positions kind only).
    #[arg(long)]
    with_spins: Option<bool>,
    /// More than one seed switches to per-step lower medians across seeds.
    #[arg(long)]
    n_seeds: Option<usize>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct DisorderConfig {
    kind: Option<DisorderKindArg>,
    base_t: Option<f64>,
    delta_t: Option<f64>,
    delta_chi_ll: Option<f64>,
    delta_chi_lr: Option<f64>,
    eta: Option<f64>,
    horizon: Option<u32>,
    window: Option<usize>,
    with_spins: Option<bool>,
    n_seeds: Option<usize>,
}

#[derive(Args)]
struct BremsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Coordinate grid size.
    #[arg(long)]
    points: Option<usize>,
    /// Coordinate grid spacing.
    #[arg(long)]
    dx: Option<f64>,
    /// Width of the initial Gaussian packet.
    #[arg(long)]
    sigma: Option<f64>,
    /// Carrier wavenumber of the initial packet.
    #[arg(long, allow_negative_numbers = true)]
    k0: Option<f64>,
    /// Shorthand kernel strength; conflicts with the physical quartet.
    #[arg(long)]
    prefactor: Option<f64>,
    /// Coupling constant (quartet form).
    #[arg(long)]
    alpha0: Option<f64>,
    /// Velocity over light speed (quartet form).
    #[arg(long)]
    v_over_c: Option<f64>,
    /// Frequency cutoff (quartet form).
    #[arg(long)]
    omega_cutoff: Option<f64>,
    /// Fermi velocity (quartet form).
    #[arg(long)]
    v_fermi: Option<f64>,
    /// Number of kernel applications.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct BremsConfig {
    points: Option<usize>,
    dx: Option<f64>,
    sigma: Option<f64>,
    k0: Option<f64>,
    prefactor: Option<f64>,
    alpha0: Option<f64>,
    v_over_c: Option<f64>,
    omega_cutoff: Option<f64>,
    v_fermi: Option<f64>,
    iterations: Option<usize>,
}

#[derive(Args)]
struct MirrorsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid size (even, at least 4).
    #[arg(long)]
    points: Option<usize>,
    /// Position grid spacing.
    #[arg(long)]
    dx: Option<f64>,
    /// Width of the initial Gaussian packet.
    #[arg(long)]
    sigma_x: Option<f64>,
    /// Spreading times to scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Phase budgets to scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct MirrorsConfig {
    points: Option<usize>,
    dx: Option<f64>,
    sigma_x: Option<f64>,
    taus: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
}

#[derive(Args)]
struct LemmaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// State dimension, at least 2.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of randomized trials.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
struct LemmaConfig {
    dim: Option<usize>,
    trials: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: u32,
    seed: Option<u64>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
    walk: Option<WalkConfig>,
    #[serde(rename = "sweep-t")]
    sweep_t: Option<SweepTConfig>,
    disorder: Option<DisorderConfig>,
    brems: Option<BremsConfig>,
    mirrors: Option<MirrorsConfig>,
    lemma: Option<LemmaConfig>,
}

fn load_config(path: &PathBuf) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.clone(),
        source,
    })?;
    let file: ConfigFile = toml::from_str(&text)?;
    if file.schema != 1 {
        return Err(CliError::ConfigSchema { found: file.schema });
    }
    Ok(file)
}

/// Seed, format and output destination after the three resolution layers.
struct Resolved {
    seed: u64,
    format: OutputFormat,
    out: Option<PathBuf>,
}

fn resolve_common(c: &CommonArgs) -> Result<(Resolved, Option<ConfigFile>), CliError> {
    let file = c.config.as_ref().map(load_config).transpose()?;
    let resolved = Resolved {
        seed: c.seed.or(file.as_ref().and_then(|f| f.seed)).unwrap_or(0),
        format: c
            .format
            .or(file.as_ref().and_then(|f| f.format))
            .unwrap_or(OutputFormat::Csv),
        out: c.out.clone().or(file.as_ref().and_then(|f| f.out.clone())),
    };
    Ok((resolved, file))
}

/// The invoked subcommand's table; a config file without it is a mistake.
fn config_table<T: Default + Clone>(
    file: &Option<ConfigFile>,
    get: impl Fn(&ConfigFile) -> &Option<T>,
    name: &'static str,
) -> Result<T, CliError> {
    match file {
        None => Ok(T::default()),
        Some(f) => get(f)
            .clone()
            .ok_or(CliError::MissingTable(name)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Int(i128),
    Float(f64),
    Bool(bool),
    Empty,
}

struct Table {
    command: &'static str,
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
    meta: Vec<(&'static str, serde_json::Value)>,
    truncated: Option<String>,
}

impl Table {
    fn new(command: &'static str, columns: &'static [&'static str]) -> Self {
        Table {
            command,
            columns,
            rows: Vec::new(),
            meta: Vec::new(),
            truncated: None,
        }
    }
}

/// 12 significant digits, the pinned CSV float format.
fn csv_float(v: f64) -> String {
    format!("{v:.11e}")
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(v) => csv_float(*v),
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn render_csv(table: &Table) -> String {
    let mut out = String::new();
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some(reason) = &table.truncated {
        out.push_str(&format!("# truncated: {reason}\n"));
    }
    out
}

fn json_cell(c: &Cell) -> serde_json::Value {
    match c {
        Cell::Int(i) => serde_json::json!(*i as i64),
        Cell::Float(v) => serde_json::Number::from_f64(*v)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null),
        Cell::Bool(b) => serde_json::Value::Bool(*b),
        Cell::Empty => serde_json::Value::Null,
    }
}

fn render_json(table: &Table) -> String {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|r| serde_json::Value::Array(r.iter().map(json_cell).collect()))
        .collect();
    let meta: serde_json::Map<String, serde_json::Value> = table
        .meta
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    let doc = serde_json::json!({
        "schema": 1,
        "command": table.command,
        "columns": table.columns,
        "rows": rows,
        "meta": meta,
        "truncated": table.truncated,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("static document shape");
    text.push('\n');
    text
}

fn write_table(table: &Table, common: &Resolved) -> Result<(), CliError> {
    let text = match common.format {
        OutputFormat::Csv => render_csv(table),
        OutputFormat::Json => render_json(table),
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (common, table) = match &cli.cmd {
        Command::Walk(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.walk, "walk")?;
            (common, run_walk(a, &cfg)?)
        }
        Command::SweepT(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.sweep_t, "sweep-t")?;
            (common, run_sweep_t(a, &cfg)?)
        }
        Command::Disorder(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.disorder, "disorder")?;
            let seed = common.seed;
            (common, run_disorder(a, &cfg, seed)?)
        }
        Command::Brems(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.brems, "brems")?;
            (common, run_brems(a, &cfg)?)
        }
        Command::Mirrors(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.mirrors, "mirrors")?;
            (common, run_mirrors(a, &cfg)?)
        }
        Command::Lemma(a) => {
            let (common, file) = resolve_common(&a.common)?;
            let cfg = config_table(&file, |f| &f.lemma, "lemma")?;
            let seed = common.seed;
            (common, run_lemma(a, &cfg, seed)?)
        }
    };
    write_table(&table, &common)?;
    if let Some(reason) = &table.truncated {
        eprintln!("truncated: {reason}");
        Ok(3)
    } else {
        Ok(0)
    }
}

const WALK_COLUMNS: &[&str] = &["tau", "entropy_bits", "is_drop"];

fn series_rows(table: &mut Table, series: &EntropySeries, ascending: bool, skip_zero: bool) {
    let mut idx: Vec<usize> = (0..series.times.len()).collect();
    if ascending {
        idx.sort_by_key(|&i| series.times[i]);
    }
    for i in idx {
        let t = series.times[i];
        if skip_zero && t == 0 {
            continue;
        }
        table.rows.push(vec![
            Cell::Int(t as i128),
            Cell::Float(series.entropy_bits[i]),
            Cell::Bool(series.drop_steps.contains(&t)),
        ]);
    }
}

fn run_walk(args: &WalkArgs, cfg: &WalkConfig) -> Result<Table, CliError> {
    let transparency = args.transparency.or(cfg.transparency).unwrap_or(0.5);
    let phase_ll = args.phase_ll.or(cfg.phase_ll).unwrap_or(0.0);
    let phase_lr = args.phase_lr.or(cfg.phase_lr).unwrap_or(0.0);
    let flip_angle = args.flip_angle.or(cfg.flip_angle).unwrap_or(PI);
    let spin_mode = match args.spin_mode.or(cfg.spin_mode).unwrap_or(SpinModeArg::Persistent) {
        SpinModeArg::Persistent => SpinMode::Persistent,
        SpinModeArg::Fresh => SpinMode::FreshEachStep,
    };
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(6);
    let direction = args.direction.or(cfg.direction).unwrap_or(DirectionArg::Forward);
    let reversal = args.reversal.or(cfg.reversal).unwrap_or(ReversalArg::None);
    let reversal_step = args.reversal_step.or(cfg.reversal_step);
    let half_space_depth = args.half_space_depth.or(cfg.half_space_depth);

    let mut table = Table::new("walk", WALK_COLUMNS);

    if let Some(depth) = half_space_depth {
        if reversal != ReversalArg::None || direction != DirectionArg::Forward {
            return Err(CliError::Invalid(
                "half-space runs fix direction and reversal internally".into(),
            ));
        }
        let report = half_space_scenario(depth, horizon)?;
        series_rows(&mut table, &report.series, false, false);
        table.meta.push(("reversal_step", serde_json::json!(report.reversal_step)));
        table.meta.push((
            "pruned_weight",
            serde_json::json!(report.series.pruned_weight),
        ));
        return Ok(table);
    }

    let template = ScattererSpec::new(0.0, transparency, phase_ll, phase_lr)?
        .with_flip_angle(flip_angle);
    let scenario = WalkScenario::regular(&template, spin_mode, horizon)?;

    match reversal {
        ReversalArg::None => {
            let capture = |series: Result<EntropySeries, WalkError>| {
                match series {
                    Ok(s) => Ok((s, None)),
                    Err(WalkError::StateExplosion { reached_tau, partial }) => Ok((
                        partial,
                        Some(format!("state explosion at step {reached_tau}")),
                    )),
                    Err(e) => Err(CliError::from(e)),
                }
            };
            match direction {
                DirectionArg::Forward => {
                    let (series, trunc) = capture(evolve_entropy(&scenario))?;
                    series_rows(&mut table, &series, false, false);
                    table.truncated = trunc;
                }
                DirectionArg::Backward => {
                    let (series, trunc) = capture(evolve_entropy_backward(&scenario))?;
                    series_rows(&mut table, &series, true, false);
                    table.truncated = trunc;
                }
                DirectionArg::Both => {
                    let (back, tb) = capture(evolve_entropy_backward(&scenario))?;
                    series_rows(&mut table, &back, true, true);
                    let (fwd, tf) = capture(evolve_entropy(&scenario))?;
                    series_rows(&mut table, &fwd, false, false);
                    table.truncated = tb.or(tf);
                }
            }
        }
        kind => {
            if direction != DirectionArg::Forward {
                return Err(CliError::Invalid(
                    "reversal runs evolve forward; drop --direction".into(),
                ));
            }
            let rstep = reversal_step.ok_or_else(|| {
                CliError::Invalid("--reversal-step is required with --reversal".into())
            })?;
            if rstep < 0 || rstep > horizon as i64 {
                return Err(CliError::Invalid(format!(
                    "reversal step {rstep} outside 0..={horizon}"
                )));
            }
            let mut times = Vec::with_capacity(horizon + 1);
            let mut bits = Vec::with_capacity(horizon + 1);
            let mut state = scenario.initial.clone();
            for tau in 0..=horizon as i64 {
                times.push(tau);
                bits.push(entropy_bits(&state)?);
                if tau == rstep {
                    state = match kind {
                        ReversalArg::Complete => reverse_complete(&state, &scenario)?,
                        _ => reverse_incomplete(&state, &scenario)?,
                    };
                }
                if tau < horizon as i64 {
                    match step(&state, &scenario, tau) {
                        Ok(next) => state = next,
                        Err(WalkError::TooManyTerms { .. }) => {
                            table.truncated =
                                Some(format!("state explosion at step {}", tau + 1));
                            break;
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            let series =
                EntropySeries::from_points(times, bits, state.pruned_weight());
            series_rows(&mut table, &series, false, false);
            table.meta.push(("reversal_step", serde_json::json!(rstep)));
        }
    }
    Ok(table)
}

const SWEEP_COLUMNS: &[&str] = &["T", "first_drop_step"];

fn run_sweep_t(args: &SweepTArgs, cfg: &SweepTConfig) -> Result<Table, CliError> {
    let from = args.from.or(cfg.from).unwrap_or(0.3);
    let to = args.to.or(cfg.to).unwrap_or(0.85);
    let step = args.step.or(cfg.step).unwrap_or(0.01);
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(8);
    if !(step > 0.0) {
        return Err(CliError::Invalid(format!("step must be positive, got {step}")));
    }
    if to < from {
        return Err(CliError::Invalid(format!("empty sweep: from {from} > to {to}")));
    }
    let ts = sweep_grid(from, to, step);
    let points = sweep_transparency(&ts, horizon)?;
    let mut table = Table::new("sweep-t", SWEEP_COLUMNS);
    for p in points {
        table.rows.push(vec![
            Cell::Float(p.transparency),
            p.first_drop_step.map(|d| Cell::Int(d as i128)).unwrap_or(Cell::Empty),
        ]);
    }
    Ok(table)
}

fn sweep_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

const DISORDER_COLUMNS: &[&str] = &["tau", "N_t", "N_wf", "N_swf", "entropy_bits"];

/// Sorted element at index (len - 1) / 2: an actual sample, so integer
/// columns stay integers.
fn lower_median<T: Clone, K: PartialOrd>(values: &[T], key: impl Fn(&T) -> K) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("total order on finite values"));
    v[(v.len() - 1) / 2].clone()
}

fn run_disorder(args: &DisorderArgs, cfg: &DisorderConfig, seed: u64) -> Result<Table, CliError> {
    let kind = args.kind.or(cfg.kind).unwrap_or(DisorderKindArg::Positions);
    let base_t = args.base_t.or(cfg.base_t).unwrap_or(0.4);
    let delta_t = args.delta_t.or(cfg.delta_t).unwrap_or(0.0);
    let delta_chi_ll = args.delta_chi_ll.or(cfg.delta_chi_ll).unwrap_or(0.0);
    let delta_chi_lr = args.delta_chi_lr.or(cfg.delta_chi_lr).unwrap_or(0.0);
    let eta = args.eta.or(cfg.eta).unwrap_or(0.0);
    let horizon = args.horizon.or(cfg.horizon).unwrap_or(10);
    let window = args.window.or(cfg.window).unwrap_or(64);
    let with_spins = args.with_spins.or(cfg.with_spins).unwrap_or(false);
    let n_seeds = args.n_seeds.or(cfg.n_seeds).unwrap_or(1);
    if n_seeds == 0 {
        return Err(CliError::Invalid("n_seeds must be at least 1".into()));
    }

    let spec = DisorderSpec::new(
        base_t,
        delta_t,
        delta_chi_ll,
        delta_chi_lr,
        eta,
        seed,
        window,
    )?;
    let mut table = Table::new("disorder", DISORDER_COLUMNS);

    match kind {
        DisorderKindArg::Amplitudes => {
            if n_seeds != 1 {
                return Err(CliError::Invalid(
                    "amplitude-disorder runs take a single seed".into(),
                ));
            }
            let series = disorder::run_random_amplitudes(&spec, horizon as usize)?;
            for (k, &t) in series.times.iter().enumerate() {
                table.rows.push(vec![
                    Cell::Int(t as i128),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Float(series.entropy_bits[k]),
                ]);
            }
        }
        DisorderKindArg::Positions if n_seeds == 1 => {
            match disorder::run_random_positions(&spec, horizon as f64, with_spins) {
                Ok((series, census)) => {
                    for k in 0..census.times.len() {
                        table.rows.push(vec![
                            Cell::Int(census.times[k].round() as i128),
                            Cell::Int(census.n_trajectories[k] as i128),
                            Cell::Int(census.n_components[k] as i128),
                            Cell::Int(census.n_significant[k] as i128),
                            Cell::Float(series.entropy_bits[k]),
                        ]);
                    }
                }
                Err(DisorderError::StateExplosion { reached_time, cap }) => {
                    table.truncated = Some(format!(
                        "component explosion at time {reached_time} (cap {cap})"
                    ));
                }
                Err(e) => return Err(e.into()),
            }
        }
        DisorderKindArg::Positions => {
            let seeds: Vec<u64> = (0..n_seeds)
                .map(|i| derive_seed(seed, "ensemble", i as u64))
                .collect();
            let runs: Vec<_> = seeds
                .par_iter()
                .map(|&s| {
                    disorder::run_random_positions(&spec.with_seed(s), horizon as f64, with_spins)
                })
                .collect::<Result<_, _>>()?;
            let times = runs[0].1.times.clone();
            for k in 0..times.len() {
                let nt = lower_median(
                    &runs.iter().map(|(_, c)| c.n_trajectories[k]).collect::<Vec<_>>(),
                    |&v| v,
                );
                let nwf = lower_median(
                    &runs.iter().map(|(_, c)| c.n_components[k]).collect::<Vec<_>>(),
                    |&v| v,
                );
                let nswf = lower_median(
                    &runs.iter().map(|(_, c)| c.n_significant[k]).collect::<Vec<_>>(),
                    |&v| v,
                );
                let ent = lower_median(
                    &runs.iter().map(|(s, _)| s.entropy_bits[k]).collect::<Vec<_>>(),
                    |&v| v,
                );
                table.rows.push(vec![
                    Cell::Int(times[k].round() as i128),
                    Cell::Int(nt as i128),
                    Cell::Int(nwf as i128),
                    Cell::Int(nswf as i128),
                    Cell::Float(ent),
                ]);
            }
            let med: Vec<f64> = table.rows.iter().map(|r| match r[2] {
                Cell::Int(v) => v as f64,
                _ => unreachable!(),
            }).collect();
            if let Ok(fit) = fit_series(&times, &med) {
                table.meta.push((
                    "fit_n_wf",
                    serde_json::json!({"a": fit.a, "b": fit.b}),
                ));
            }
        }
    }
    Ok(table)
}

const BREMS_COLUMNS: &[&str] = &["iteration", "entropy_bits"];

fn run_brems(args: &BremsArgs, cfg: &BremsConfig) -> Result<Table, CliError> {
    let points = args.points.or(cfg.points).unwrap_or(256);
    let dx = args.dx.or(cfg.dx).unwrap_or(0.1);
    let sigma = args.sigma.or(cfg.sigma).unwrap_or(3.0);
    let k0 = args.k0.or(cfg.k0).unwrap_or(0.0);
    let iterations = args.iterations.or(cfg.iterations).unwrap_or(10);
    let prefactor = args.prefactor.or(cfg.prefactor);
    let quartet = [
        args.alpha0.or(cfg.alpha0),
        args.v_over_c.or(cfg.v_over_c),
        args.omega_cutoff.or(cfg.omega_cutoff),
        args.v_fermi.or(cfg.v_fermi),
    ];
    let params = match (prefactor, quartet.iter().any(Option::is_some)) {
        (Some(_), true) => {
            return Err(CliError::Invalid(
                "give either --prefactor or the physical quartet, not both".into(),
            ));
        }
        (Some(p), false) => BremsParams::with_prefactor(p)?,
        (None, true) => BremsParams::new(
            quartet[0].unwrap_or(BremsParams::DEFAULT_ALPHA0),
            quartet[1].unwrap_or(0.5),
            quartet[2].unwrap_or(1.0),
            quartet[3].unwrap_or(1.0),
        )?,
        (None, false) => BremsParams::with_prefactor(0.8)?,
    };
    let rho = GridDensityMatrix::gaussian(points, dx, sigma, k0)?;
    let entropies = iterated_entropies(&rho, &params, iterations)?;
    let mut table = Table::new("brems", BREMS_COLUMNS);
    for (k, &s) in entropies.iter().enumerate() {
        table.rows.push(vec![Cell::Int(k as i128), Cell::Float(s)]);
    }
    table
        .meta
        .push(("prefactor", serde_json::json!(params.prefactor())));
    Ok(table)
}

const MIRRORS_COLUMNS: &[&str] = &["tau", "epsilon", "N", "fidelity"];

fn run_mirrors(args: &MirrorsArgs, cfg: &MirrorsConfig) -> Result<Table, CliError> {
    let points = args.points.or(cfg.points).unwrap_or(16384);
    let dx = args.dx.or(cfg.dx).unwrap_or(0.4);
    let sigma_x = args.sigma_x.or(cfg.sigma_x).unwrap_or(1.0);
    let taus = args
        .taus
        .clone()
        .or(cfg.taus.clone())
        .unwrap_or_else(|| vec![50.0, 80.0, 125.0, 200.0, 320.0, 500.0]);
    let epsilons = args
        .epsilons
        .clone()
        .or(cfg.epsilons.clone())
        .unwrap_or_else(|| vec![0.1]);

    let packet = WavePacket::gaussian(points, dx, sigma_x)?;
    let cases: Vec<(f64, f64)> = taus
        .iter()
        .flat_map(|&t| epsilons.iter().map(move |&e| (t, e)))
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|&(tau, eps)| refocus_report(&packet, tau, eps))
        .collect();

    let mut table = Table::new("mirrors", MIRRORS_COLUMNS);
    let mut worst_c: f64 = 0.0;
    for (&(tau, eps), result) in cases.iter().zip(results.into_iter()) {
        match result {
            Ok(report) => {
                worst_c = worst_c.max((1.0 - report.fidelity) / (eps * eps));
                table.rows.push(vec![
                    Cell::Float(tau),
                    Cell::Float(eps),
                    Cell::Int(report.mirrors as i128),
                    Cell::Float(report.fidelity),
                ]);
            }
            Err(MirrorsError::GridAliasing {
                max_phase_step,
                suggested_points,
            }) => {
                table.truncated = Some(format!(
                    "grid aliasing at tau {tau} ({max_phase_step:.3} rad per cell); \
                     regrid to about {suggested_points} points"
                ));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    table.meta.push(("c_constant", serde_json::json!(worst_c)));
    Ok(table)
}

const LEMMA_COLUMNS: &[&str] = &["trial", "S_before", "S_after", "holds"];

fn run_lemma(args: &LemmaArgs, cfg: &LemmaConfig, seed: u64) -> Result<Table, CliError> {
    let dim = args.dim.or(cfg.dim).unwrap_or(8);
    let trials = args.trials.or(cfg.trials).unwrap_or(100);
    if dim < 2 {
        return Err(CliError::Invalid(format!("dim must be at least 2, got {dim}")));
    }
    let results: Vec<_> = (0..trials as u64)
        .into_par_iter()
        .map(|i| lemma_trial(dim, derive_seed(seed, "lemma", i)))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new("lemma", LEMMA_COLUMNS);
    for (i, trial) in results.iter().enumerate() {
        table.rows.push(vec![
            Cell::Int(i as i128),
            Cell::Float(trial.s_before_bits),
            Cell::Float(trial.s_after_bits),
            Cell::Bool(trial.holds()),
        ]);
    }
    Ok(table)
}
