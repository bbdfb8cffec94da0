//! `milnor-cycles` command line: parse, analyze, report, draw.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::analysis::{compare, morsification_invariance, AnalysisReport};
use crate::config::{Config, GRID_RANGE};
use crate::critfind::{find_critical_points, CriticalPoint};
use crate::cycledetect::{detect_limit_cycles, LimitCycle};
use crate::milnorfiber::{betti, extract_fiber, select_radii, FiberCurve};
use crate::polyalg::{load_vector_field, VectorField};
use crate::svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_BAD_ARGUMENT: i32 = 65;

#[derive(Debug, Parser)]
#[command(
    name = "milnor-cycles",
    version,
    about = "Vanishing-cycle bounds versus detected limit cycles for planar polynomial fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    show_config: bool,
    /// Start from a JSON configuration file (missing keys keep defaults).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Seed of the morsification generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest accepted ‖V‖ at a polished equilibrium.
    #[arg(long, global = true, value_parser = positive)]
    residual_tol: Option<f64>,
    /// |det ∇V| at or below this marks an equilibrium degenerate.
    #[arg(long, global = true, value_parser = positive)]
    degeneracy_tol: Option<f64>,
    /// Maximum subdivision depth of the equilibrium search.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..=60))]
    max_depth: Option<u32>,
    /// Boxes narrower than this are not split further.
    #[arg(long, global = true, value_parser = positive)]
    resolution_tol: Option<f64>,
    /// Initial marching-squares grid.
    #[arg(long, global = true, value_parser = grid_size)]
    grid: Option<usize>,
    /// Largest grid reached by refinement.
    #[arg(long, global = true, value_parser = grid_size)]
    max_grid: Option<usize>,
    /// Number of η values in the sweep.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    sweep_len: Option<u16>,
    /// Trailing sweep entries that must agree.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    stable_tail: Option<u16>,
    /// Upper bound on the Milnor ball radius δ.
    #[arg(long, global = true, value_parser = positive)]
    delta_cap: Option<f64>,
    /// Smallest admissible gradient norm on the swept annulus.
    #[arg(long, global = true, value_parser = positive)]
    submersion_tol: Option<f64>,
    /// Integrator relative tolerance.
    #[arg(long, global = true, value_parser = positive)]
    rtol: Option<f64>,
    /// Integrator absolute tolerance.
    #[arg(long, global = true, value_parser = positive)]
    atol: Option<f64>,
    /// Integration horizon of each cycle-search seed.
    #[arg(long, global = true, value_parser = positive)]
    t_horizon: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate and classify the equilibria.
    Critpoints {
        /// Field file (`P = …`, `Q = …`, optional `box` and `name`).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Extract the Milnor fiber at one equilibrium.
    Fiber {
        /// Field file (`P = …`, `Q = …`, optional `box` and `name`).
        input: PathBuf,
        /// Equilibrium id as printed by `critpoints`.
        #[arg(long = "point")]
        point_id: usize,
        /// Fiber level (default: the largest admissible η).
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Detect limit cycles.
    Cycles {
        /// Field file (`P = …`, `Q = …`, optional `box` and `name`).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
        /// Cycle orbits as `cycle,t,x,y` rows.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Full comparison of the bound with the detected cycles.
    Analyze {
        /// Field file (`P = …`, `Q = …`, optional `box` and `name`).
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
        /// Phase portrait with cycles and fibers.
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
    },
    /// Rerun the analysis on random Morse perturbations.
    Morsify {
        /// Field file (`P = …`, `Q = …`, optional `box` and `name`).
        input: PathBuf,
        /// Perturbation sizes, comma separated.
        #[arg(long = "s", value_delimiter = ',', default_value = "1e-3,1e-2", value_parser = positive)]
        s_values: Vec<f64>,
        /// Generator seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("expected a positive finite number, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn grid_size(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if GRID_RANGE.contains(&n) => Ok(n),
        Ok(n) => Err(format!(
            "grid must lie in [{}, {}], got {n}",
            GRID_RANGE.start(),
            GRID_RANGE.end()
        )),
        Err(e) => Err(e.to_string()),
    }
}

/// Failure carrying its exit code.
struct Exit(i32, String);

type CmdResult = Result<i32, Exit>;

fn usage(msg: impl Into<String>) -> Exit {
    Exit(EXIT_USAGE, msg.into())
}

fn bad_argument(msg: impl Into<String>) -> Exit {
    Exit(EXIT_BAD_ARGUMENT, msg.into())
}

impl Overrides {
    fn apply(&self, c: &mut Config) {
        fn set<T: Copy>(dst: &mut T, src: Option<T>) {
            if let Some(v) = src {
                *dst = v;
            }
        }
        set(&mut c.seed, self.seed);
        set(&mut c.solve.residual_tol, self.residual_tol);
        set(&mut c.solve.degeneracy_tol, self.degeneracy_tol);
        set(&mut c.solve.max_depth, self.max_depth);
        set(&mut c.solve.resolution_tol, self.resolution_tol);
        set(&mut c.fiber.grid, self.grid);
        set(&mut c.fiber.max_grid, self.max_grid);
        set(&mut c.fiber.sweep_len, self.sweep_len.map(usize::from));
        set(&mut c.fiber.stable_tail, self.stable_tail.map(usize::from));
        set(&mut c.fiber.delta_cap, self.delta_cap);
        set(&mut c.fiber.submersion_tol, self.submersion_tol);
        set(&mut c.flow.rtol, self.rtol);
        set(&mut c.flow.atol, self.atol);
        set(&mut c.cycles.t_horizon, self.t_horizon);
    }
}

fn resolve_config(cli: &Cli) -> Result<Config, Exit> {
    let mut c = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    cli.overrides.apply(&mut c);
    c.validate().map_err(|e| usage(e.0))?;
    Ok(c)
}

/// Entry point shared by the binary and the tests. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn run(cli: &Cli) -> CmdResult {
    let cfg = resolve_config(cli)?;
    if cli.show_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(EXIT_OK);
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global() {
            log::warn!("--threads ignored: {e}");
        }
    }
    match &cli.command {
        None => Err(usage("a subcommand is required (see --help)")),
        Some(Command::Critpoints { input, json }) => cmd_critpoints(&cfg, input, json.as_deref()),
        Some(Command::Fiber {
            input,
            point_id,
            eta,
            svg,
            json,
        }) => cmd_fiber(&cfg, input, *point_id, *eta, svg.as_deref(), json.as_deref()),
        Some(Command::Cycles { input, json, svg, csv }) => {
            cmd_cycles(&cfg, input, json.as_deref(), svg.as_deref(), csv.as_deref())
        }
        Some(Command::Analyze { input, json, svg }) => cmd_analyze(&cfg, input, json.as_deref(), svg.as_deref()),
        Some(Command::Morsify {
            input,
            s_values,
            seeds,
            json,
        }) => cmd_morsify(&cfg, input, s_values, seeds, json.as_deref()),
    }
}

fn load(input: &Path) -> Result<VectorField, Exit> {
    load_vector_field(input).map_err(|e| usage(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Exit> {
    if contents.is_empty() {
        return Err(bad_argument(format!(
            "{}: refusing to write an empty file",
            path.display()
        )));
    }
    std::fs::write(path, contents).map_err(|e| bad_argument(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn critical_points(v: &VectorField, cfg: &Config) -> Result<Vec<CriticalPoint>, Exit> {
    find_critical_points(v, &cfg.solve)
        .map_err(|e| Exit(EXIT_INCONCLUSIVE, format!("critical points: {}: {e}", e.kind())))
}

/// Fixed-width equilibrium table, one row per point in id order.
pub fn critpoint_table(cps: &[CriticalPoint]) -> String {
    let mut out = format!(
        "{:>3} {:>22} {:>22} {:>5} {:>12} {:>13} {:>9} {:>8}\n",
        "id", "x", "y", "index", "det", "nondegenerate", "certified", "boundary"
    );
    for c in cps {
        let _ = writeln!(
            out,
            "{:>3} {:>22.15e} {:>22.15e} {:>5} {:>12.4e} {:>13} {:>9} {:>8}",
            c.id, c.location.x, c.location.y, c.index, c.det, c.nondegenerate, c.certified, c.on_boundary
        );
    }
    out
}

fn cmd_critpoints(cfg: &Config, input: &Path, json: Option<&Path>) -> CmdResult {
    let v = load(input)?;
    let cps = critical_points(&v, cfg)?;
    print!("{}", critpoint_table(&cps));
    if let Some(p) = json {
        write_file(p, &to_json(&cps))?;
    }
    Ok(EXIT_OK)
}

fn cmd_fiber(
    cfg: &Config,
    input: &Path,
    point_id: usize,
    eta: Option<f64>,
    svg_out: Option<&Path>,
    json: Option<&Path>,
) -> CmdResult {
    let v = load(input)?;
    let cps = critical_points(&v, cfg)?;
    let Some(cp) = cps.iter().find(|c| c.id == point_id) else {
        return Err(bad_argument(format!(
            "no equilibrium with id {point_id} ({} found)",
            cps.len()
        )));
    };
    let radii = select_radii(&v, cp, &cps, &cfg.fiber)
        .map_err(|e| Exit(EXIT_INCONCLUSIVE, format!("point {point_id}: {e}")))?;
    let eta = eta.unwrap_or(radii.eta_max);
    if !(eta > 0.0 && eta <= radii.eta_max) {
        return Err(bad_argument(format!(
            "η = {eta} is out of range; η must lie in (0, η_max] with η_max = {:e} at δ = {:e}",
            radii.eta_max, radii.delta
        )));
    }
    let f = extract_fiber(&v, cp, radii.delta, eta, cfg.fiber.grid, cfg.fiber.max_grid)
        .map_err(|e| Exit(EXIT_INCONCLUSIVE, format!("point {point_id}: {e}")))?;
    let (b0, closed) = betti(&f);
    println!(
        "point {point_id} δ = {:e} η = {:e} grid = {}: {b0} components, {closed} closed, {} arcs",
        f.delta,
        f.eta,
        f.grid_resolution,
        b0 - closed
    );
    if let Some(p) = svg_out {
        write_file(p, &svg::fiber_svg(&f))?;
    }
    if let Some(p) = json {
        write_file(p, &to_json(&f))?;
    }
    Ok(EXIT_OK)
}

/// Fixed-width cycle table.
pub fn cycle_table(cycles: &[LimitCycle]) -> String {
    let mut out = format!(
        "{:>3} {:>18} {:>11} {:>14} {:>12} {:>10}\n",
        "#", "period", "stability", "multiplier", "mean radius", "encloses"
    );
    for (k, c) in cycles.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>3} {:>18.12} {:>11} {:>14.6e} {:>12.6} {:>10}",
            k,
            c.period,
            format!("{:?}", c.stability).to_lowercase(),
            c.return_derivative,
            c.mean_radius,
            format!("{:?}", c.enclosed_cp_ids)
        );
    }
    out
}

/// Cycle orbits as CSV, uniform in time over one period.
pub fn cycles_csv(cycles: &[LimitCycle]) -> String {
    let mut out = String::from("cycle,t,x,y\n");
    for (k, c) in cycles.iter().enumerate() {
        let n = c.points.len().saturating_sub(1).max(1);
        for (j, p) in c.points.iter().enumerate() {
            let t = c.period * j as f64 / n as f64;
            let _ = writeln!(out, "{k},{t:.17e},{:.17e},{:.17e}", p.x, p.y);
        }
    }
    out
}

fn cmd_cycles(
    cfg: &Config,
    input: &Path,
    json: Option<&Path>,
    svg_out: Option<&Path>,
    csv: Option<&Path>,
) -> CmdResult {
    let v = load(input)?;
    let (cps, code) = match critical_points(&v, cfg) {
        Ok(cps) => (cps, EXIT_OK),
        Err(Exit(_, msg)) => {
            eprintln!("warning: {msg}; seeding from the box grid only");
            (vec![], EXIT_INCONCLUSIVE)
        }
    };
    let cycles = detect_limit_cycles(&v, &cps, &cfg.flow, &cfg.cycles);
    print!("{}", cycle_table(&cycles));
    if let Some(p) = json {
        write_file(p, &to_json(&cycles))?;
    }
    if let Some(p) = svg_out {
        let locs: Vec<_> = cps.iter().map(|c| c.location).collect();
        write_file(p, &svg::cycles_svg(&v, &cycles, &locs))?;
    }
    if let Some(p) = csv {
        write_file(p, &cycles_csv(&cycles))?;
    }
    Ok(code)
}

/// One fiber per equilibrium at the top of its η sweep, for figures.
fn overlay_fibers(v: &VectorField, report: &AnalysisReport, cfg: &Config) -> Vec<FiberCurve> {
    report
        .milnor
        .iter()
        .filter_map(|m| {
            let cp = report.critical_points.iter().find(|c| c.id == m.point_id)?;
            let eta = *m.eta_sweep.last()?;
            extract_fiber(v, cp, m.delta, eta, cfg.fiber.grid, cfg.fiber.max_grid).ok()
        })
        .collect()
}

fn summary(r: &AnalysisReport) -> String {
    let mut out = format!(
        "{}: k = {}, bound = {}, detected = {}, verdict = {}\n",
        r.system_name,
        r.critical_points.len(),
        r.bound,
        r.detected.len(),
        serde_json::to_value(r.verdict)
            .expect("verdict serializes")
            .as_str()
            .unwrap_or("?")
    );
    for m in &r.milnor {
        let _ = writeln!(
            out,
            "  point {}: l = {}, stable = {}, submersion = {}",
            m.point_id, m.l, m.stable, m.submersion_ok
        );
    }
    for reason in &r.reasons {
        let _ = writeln!(out, "  note: {reason}");
    }
    out
}

fn cmd_analyze(cfg: &Config, input: &Path, json: Option<&Path>, svg_out: Option<&Path>) -> CmdResult {
    let v = load(input)?;
    let mut report = compare(&v, cfg);
    if let Some(p) = svg_out {
        let fibers = overlay_fibers(&v, &report, cfg);
        write_file(p, &svg::phase_portrait_svg(&v, &report, &fibers))?;
        report.figures.push(p.display().to_string());
    }
    print!("{}", summary(&report));
    if let Some(p) = json {
        write_file(p, &report.to_json())?;
    }
    Ok(report.verdict.exit_code())
}

fn cmd_morsify(cfg: &Config, input: &Path, s_values: &[f64], seeds: &[u64], json: Option<&Path>) -> CmdResult {
    if s_values.is_empty() {
        return Err(usage("--s needs at least one perturbation size"));
    }
    if seeds.is_empty() {
        return Err(usage("--seeds needs at least one seed"));
    }
    let v = load(input)?;
    let table = morsification_invariance(&v, s_values, seeds, cfg).map_err(|e| bad_argument(e.to_string()))?;
    print!("{}", table.render());
    if let Some(p) = json {
        write_file(p, &to_json(&table))?;
    }
    Ok(EXIT_OK)
}
