use std::path::PathBuf;
use std::process::ExitCode;

use mmcell_core::experiments::{
    self, fig3_config, fig4_config, fig5_config, parse_grid, FIG3_M_GRID, FIG3_P_GRID, FIG5_M_GRID,
};
use mmcell_core::{Error, ExperimentResult, ScenarioConfig};

const USAGE: &str = "\
usage: mmcell-sim <fig3|fig4|fig5|nmse|rate|selftest> [options]

options:
  --config FILE        key = value configuration applied over the preset
  --out DIR            output directory for <experiment>.csv (default .)
  --power-grid A:B:S   transmit-power grid in dBm (fig4, rate)
  --m-grid M1,M2,...   BS antenna grid
  --p-grid P1,P2,...   user antenna grid (fig3, nmse)
  --trials N           Monte-Carlo trials per point
  --seed S             master seed
  --KEY VALUE          override any configuration key (e.g. --xi-sq 0.2, --M 64)

environment:
  MMCELL_WORKERS       worker threads (default: all cores)

exit codes: 0 ok, 1 usage, 2 numeric or selftest failure";

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(_) | Error::IllConditioned(_) | Error::Domain(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

#[derive(Default)]
struct Args {
    command: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    power_grid: Option<Vec<f64>>,
    m_grid: Option<Vec<usize>>,
    p_grid: Option<Vec<usize>>,
    overrides: Vec<(String, String)>,
}

fn parse_list(flag: &str, v: &str) -> Result<Vec<usize>, Failure> {
    v.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .ok()
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Failure::Usage(format!("{flag}: expected a comma-separated list of integers, got `{v}`")))
}

fn parse_args(argv: &[String]) -> Result<Args, Failure> {
    let mut it = argv.iter();
    let command = it.next().ok_or_else(|| Failure::Usage("missing subcommand".into()))?.clone();
    let mut args = Args {
        command,
        ..Args::default()
    };
    while let Some(flag) = it.next() {
        let Some(name) = flag.strip_prefix("--") else {
            return Err(Failure::Usage(format!("unexpected argument `{flag}`")));
        };
        let value = it
            .next()
            .ok_or_else(|| Failure::Usage(format!("{flag} needs a value")))?
            .clone();
        match name {
            "config" => args.config = Some(value.into()),
            "out" => args.out = Some(value.into()),
            "power-grid" | "power_grid" => args.power_grid = Some(parse_grid(&value)?),
            "m-grid" | "m_grid" => args.m_grid = Some(parse_list(flag, &value)?),
            "p-grid" | "p_grid" => args.p_grid = Some(parse_list(flag, &value)?),
            key if ScenarioConfig::is_key(key) => args.overrides.push((key.to_string(), value)),
            _ => return Err(Failure::Usage(format!("unknown option {flag}"))),
        }
    }
    Ok(args)
}

fn build_config(preset: ScenarioConfig, args: &Args) -> Result<ScenarioConfig, Failure> {
    let mut cfg = preset;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_kv_str(&text)?;
    }
    for (k, v) in &args.overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(args: &Args) -> Result<ExperimentResult, Failure> {
    let r = match args.command.as_str() {
        "fig3" => {
            let cfg = build_config(fig3_config(), args)?;
            let m = args.m_grid.clone().unwrap_or(FIG3_M_GRID.to_vec());
            let p = args.p_grid.clone().unwrap_or(FIG3_P_GRID.to_vec());
            experiments::run_nmse_sweep(&cfg, "fig3", &m, &p)
        }
        "fig4" => {
            let cfg = build_config(fig4_config(), args)?;
            let powers = args.power_grid.clone().unwrap_or_else(experiments::fig4_power_grid);
            experiments::run_power_sweep(&cfg, "fig4", &powers)
        }
        "fig5" => {
            let cfg = build_config(fig5_config(), args)?;
            let m = args.m_grid.clone().unwrap_or(FIG5_M_GRID.to_vec());
            experiments::run_antenna_sweep(&cfg, "fig5", &m, true)
        }
        "nmse" => {
            let cfg = build_config(ScenarioConfig::default(), args)?;
            let m = args.m_grid.clone().unwrap_or(vec![cfg.bs_antennas]);
            let p = args.p_grid.clone().unwrap_or(vec![cfg.ue_antennas]);
            experiments::run_nmse_sweep(&cfg, "nmse", &m, &p)
        }
        "rate" => {
            let cfg = build_config(ScenarioConfig::default(), args)?;
            match &args.power_grid {
                Some(powers) => experiments::run_power_sweep(&cfg, "rate", powers),
                None => {
                    let m = args.m_grid.clone().unwrap_or(vec![cfg.bs_antennas]);
                    experiments::run_antenna_sweep(&cfg, "rate", &m, true)
                }
            }
        }
        other => return Err(Failure::Usage(format!("unknown subcommand `{other}`"))),
    };
    Ok(r?)
}

fn run(argv: &[String]) -> Result<(), Failure> {
    if argv.is_empty() || matches!(argv[0].as_str(), "-h" | "--help" | "help") {
        println!("{USAGE}");
        return Ok(());
    }
    let args = parse_args(argv)?;
    let workers = experiments::workers_from_env();

    if args.command == "selftest" {
        let checks = experiments::with_workers(workers, experiments::selftest)?;
        let mut ok = true;
        for c in &checks {
            println!("{} {:<24} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            ok &= c.passed;
        }
        return if ok {
            Ok(())
        } else {
            Err(Failure::Numeric("selftest failed".into()))
        };
    }

    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if !out_dir.is_dir() {
        return Err(Failure::Usage(format!("output directory {} does not exist", out_dir.display())));
    }
    let result = experiments::with_workers(workers, || run_experiment(&args))??;
    let path = out_dir.join(format!("{}.csv", result.experiment));
    experiments::emit_csv(&result, &path)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {} ({} rows)", path.display(), result.rows.len());
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
