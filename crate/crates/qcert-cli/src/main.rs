use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcert::equivalents::classical_equivalent;
use qcert::machine_model::MachineSpec;
use qcert::machines::{Machine, MachineKind};
use qcert::montecarlo::{verify_machine, VerifyRow};
use qcert::sweep::{
    grid_header, grid_scan, histogram, run_sweep, sweep_header, write_csv, GridConfig, SweepConfig,
};
use qcert::thermo::{certify, certify_spec, CertificationReport};
use qcert::{ErrorCategory, QcertError};

/// Certify quantum-thermodynamic advantage of steady-state thermal machines
/// against their classical equivalents.
#[derive(Parser)]
#[command(name = "qcert", version)]
struct Cli {
    /// Seed for sweeps and trajectories (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MachineArgs {
    /// Machine file: a built-in (`{"machine": "amplifier", ...}`) or a full
    /// machine description (levels, baths, jumps, coupling).
    spec: Option<PathBuf>,
    /// Built-in machine: amplifier, fridge, nic, generic4.
    #[arg(long, conflicts_with = "spec")]
    builtin: Option<String>,
    /// Parameter override `key=value` for a built-in (repeatable).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Bath whose exchanged quanta are counted (machine descriptions only).
    #[arg(long)]
    monitor: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Full certification report of one machine (JSON).
    Analyze(MachineArgs),
    /// Classical equivalent and its feasibility (JSON).
    Equivalent(MachineArgs),
    /// Random parameter sweep (CSV).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the draw count of the config.
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Regular 2-D parameter grid (CSV).
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Also write a gnuplot script next to `--out`.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Compare counting statistics with trajectory simulations (CSV).
    Verify {
        #[arg(long)]
        machine: String,
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Independent trajectories per model.
        #[arg(long, default_value_t = 1)]
        trajectories: u64,
        /// Run length in units of the slowest relaxation time.
        #[arg(long, default_value_t = 3000.0)]
        relaxations: f64,
        /// Refuse runs expected to need more jumps than this.
        #[arg(long, default_value_t = 5e7)]
        max_jumps: f64,
    },
    /// Histogram of one column of a sweep table (CSV).
    Hist {
        /// Sweep table to read.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "R")]
        column: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, requires = "max")]
        min: Option<f64>,
        #[arg(long, requires = "min")]
        max: Option<f64>,
        /// Also write a gnuplot script next to `--out`.
        #[arg(long)]
        gnuplot: bool,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<QcertError> for Failure {
    fn from(e: QcertError) -> Self {
        let code = match e.category() {
            ErrorCategory::Validation => 2,
            ErrorCategory::Conditioning => 3,
            ErrorCategory::Infeasible => 4,
            ErrorCategory::Other => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure { code: 2, message: msg.into() }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut map = BTreeMap::new();
    for p in raw {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| config_error(format!("parameter '{p}' is not KEY=VALUE")))?;
        let v = match v.trim() {
            "true" => 1.0,
            "false" => 0.0,
            s => s
                .parse()
                .map_err(|_| config_error(format!("parameter '{k}': '{s}' is not a number")))?,
        };
        map.insert(k.trim().to_string(), v);
    }
    Ok(map)
}

enum Target {
    Builtin(Machine),
    Spec(MachineSpec, Option<String>),
}

fn load_target(a: &MachineArgs) -> Result<Target, Failure> {
    let params = parse_params(&a.params)?;
    if let Some(name) = &a.builtin {
        let kind = MachineKind::parse(name)?;
        return Ok(Target::Builtin(Machine::from_params(kind, &params)?));
    }
    let path = a
        .spec
        .as_ref()
        .ok_or_else(|| config_error("give a machine file or --builtin"))?;
    let text = read(path)?;
    if let Ok(m) = serde_json::from_str::<Machine>(&text) {
        if !params.is_empty() {
            return Err(config_error("--param only applies to --builtin"));
        }
        return Ok(Target::Builtin(m));
    }
    Ok(Target::Spec(MachineSpec::from_json(&text)?, a.monitor.clone()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn analyze(a: &MachineArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let report: CertificationReport = match load_target(a)? {
        Target::Builtin(m) => certify(&m)?,
        Target::Spec(spec, monitor) => {
            let bath = monitor.ok_or_else(|| config_error("--monitor is required for machine descriptions"))?;
            certify_spec(&spec, &bath)?
        }
    };
    emit(out, &(report.to_json() + "\n"))?;
    if !report.feasible {
        return Err(Failure {
            code: 4,
            message: format!(
                "no feasible classical equivalent: {}",
                report.violated_constraints.join("; ")
            ),
        });
    }
    Ok(())
}

fn equivalent(a: &MachineArgs, out: &Option<PathBuf>) -> Result<(), Failure> {
    let spec = match load_target(a)? {
        Target::Builtin(m) => m.spec()?,
        Target::Spec(s, _) => s,
    };
    let report = classical_equivalent(&spec)?;
    emit(out, &(report.to_json() + "\n"))
}

fn csv_bytes(header: &[String], rows: &[qcert::sweep::SweepRow]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, rows)?;
    Ok(buf)
}

fn emit_bytes(out: &Option<PathBuf>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn gnuplot_path(out: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    out.as_ref()
        .map(|p| p.with_extension("gp"))
        .ok_or_else(|| config_error("--gnuplot needs --out"))
}

fn verify(
    machine: &str,
    params: &[String],
    trajectories: u64,
    relaxations: f64,
    max_jumps: f64,
    seed: u64,
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let kind = MachineKind::parse(machine)?;
    let m = Machine::from_params(kind, &parse_params(params)?)?;
    let mut rows: Vec<VerifyRow> = Vec::new();
    for k in 0..trajectories {
        rows.extend(verify_machine(&m, relaxations, seed.wrapping_add(k), max_jumps)?);
    }
    let mut s = String::from(
        "machine,model,seed,duration,jumps,ics_c1,mc_c1,mc_c1_err,z_c1,ics_c2,mc_c2,mc_c2_err,z_c2,within_3sigma\n",
    );
    for r in &rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.machine,
            r.model,
            r.seed,
            r.mc.duration,
            r.mc.jumps,
            r.ics.c1,
            r.mc.c1,
            r.mc.c1_err,
            r.z_c1,
            r.ics.c2,
            r.mc.c2,
            r.mc.c2_err,
            r.z_c2,
            r.within(3.0)
        ));
    }
    emit(out, &s)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    match &cli.command {
        Command::Analyze(a) => analyze(a, &cli.out),
        Command::Equivalent(a) => equivalent(a, &cli.out),
        Command::Sweep { config, draws } => {
            let mut cfg = SweepConfig::from_json(&read(config)?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(d) = draws {
                cfg.draws = *d;
            }
            let out = cli.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
            let rows = run_sweep(&cfg)?;
            emit_bytes(&out, &csv_bytes(&sweep_header(&cfg), &rows)?)
        }
        Command::Grid { config, gnuplot } => {
            let cfg = GridConfig::from_json(&read(config)?)?;
            let out = cli.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
            let script_path = if *gnuplot { Some(gnuplot_path(&out)?) } else { None };
            let rows = grid_scan(&cfg)?;
            emit_bytes(&out, &csv_bytes(&grid_header(&cfg), &rows)?)?;
            if let Some(path) = script_path {
                let table = out.as_ref().expect("checked by gnuplot_path");
                let script = format!(
                    "set datafile separator ','\nset logscale xy\nset xlabel '{x}'\nset ylabel '{y}'\n\
                     set view map\nsplot '{t}' using 4:5:(column('R')) with points palette pt 5 title 'R'\n",
                    x = cfg.x.name,
                    y = cfg.y.name,
                    t = table.display()
                );
                fs::write(path, script)?;
            }
            Ok(())
        }
        Command::Verify { machine, params, trajectories, relaxations, max_jumps } => verify(
            machine,
            params,
            *trajectories,
            *relaxations,
            *max_jumps,
            cli.seed.unwrap_or(0),
            &cli.out,
        ),
        Command::Hist { input, column, bins, min, max, gnuplot } => {
            let table = read(input)?;
            if *gnuplot {
                gnuplot_path(&cli.out)?;
            }
            let range = min.zip(*max);
            let h = histogram(&table, column, *bins, range)?;
            emit(&cli.out, &h.to_csv())?;
            if *gnuplot {
                let path = gnuplot_path(&cli.out)?;
                let script = format!(
                    "set datafile separator ','\nset xlabel '{c}'\nset ylabel 'count'\nset style fill solid\n\
                     plot '{t}' using (($1+$2)/2):3 with boxes notitle\n",
                    c = column,
                    t = cli.out.as_ref().expect("checked by gnuplot_path").display()
                );
                fs::write(path, script)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qcert: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
