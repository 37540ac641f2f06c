use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use firstloss::config::{RunConfig, CONFIG_ENV};
use firstloss::fee::FeeStructure;
use firstloss::Error;

mod commands;
mod output;

/// First-loss fee design: optimal fund value, value functions, Pareto
/// frontier and preferred fees.
#[derive(Debug, Parser)]
#[command(name = "firstloss", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML config file (default: $FIRSTLOSS_CONFIG, else the base case).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: <output_dir>/<command>.<csv|json>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    v0: Option<f64>,
    /// Manager's HARA shift.
    #[arg(long = "a-m", global = true, allow_hyphen_values = true)]
    a_m: Option<f64>,
    /// Manager's HARA exponent.
    #[arg(long = "b-m", global = true)]
    b_m: Option<f64>,
    #[arg(long = "a-i", global = true, allow_hyphen_values = true)]
    a_i: Option<f64>,
    #[arg(long = "b-i", global = true)]
    b_i: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo draws per check.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Lattice step in m (fraction).
    #[arg(long, global = true)]
    dm: Option<f64>,
    #[arg(long, global = true)]
    dalpha: Option<f64>,
    #[arg(long, global = true)]
    dc: Option<f64>,
    #[arg(long, global = true)]
    phi_steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Concave envelope of the manager's utility for one fee.
    Envelope(FeeArg),
    /// Optimal fund value: case, multiplier, thresholds, moments, Sharpe ratio.
    Wealth(FeeArg),
    /// Both parties' expected utilities for one fee.
    Value(FeeArg),
    /// Lattice of (m, alpha, c, phi_M, phi_I, SR) over the admissible box.
    Grid,
    /// First-best Pareto-optimal fees for a sweep of manager floors.
    Frontier,
    /// Sharpe-maximizing frontier fee.
    Preferred {
        /// Restrict to fees the manager likes at least as much as this
        /// traditional fee, e.g. `m=0,alpha=20` (percent).
        #[arg(long)]
        floor: Option<String>,
    },
    /// Preferred fee across a parameter grid.
    Sensitivity {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Grid values: `bM:bI` pairs for `ba`, percentages for `r` and `gamma`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<String>>,
    },
    /// Constant-mix funds against the optimal fund value at one fee.
    Benchmark {
        /// Risky fractions.
        #[arg(long, value_delimiter = ',', default_value = "1,0.75,0.5,0.25")]
        pi: Vec<f64>,
        /// Fee in percent (default: the preferred fee).
        #[arg(long)]
        fee: Option<String>,
    },
    /// Monte Carlo and brute-force checks of every closed form.
    Verify {
        /// Fees in percent, `;`-separated (default: a fixed set covering all cases).
        #[arg(long)]
        fees: Option<String>,
    },
}

#[derive(Debug, Args)]
struct FeeArg {
    /// Fee in percent: `m,alpha,c`.
    #[arg(long)]
    fee: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Risk aversions (b_M, b_I).
    Ba,
    R,
    Gamma,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::InadmissibleUtility { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("output: {e}"))
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn parse_fee(text: &str) -> Outcome<FeeStructure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Config(format!("--fee `{text}`: {e}")))?;
    match nums[..] {
        [m, a, c] => Ok(FeeStructure::from_percent(m, a, c)?),
        _ => Err(Failure::Config(format!(
            "--fee `{text}`: expected m,alpha,c in percent"
        ))),
    }
}

/// `m=..,alpha=..[,c=0]` in percent.
fn parse_floor(text: &str) -> Outcome<FeeStructure> {
    let mut vals = [None, None, Some(0.0)];
    for part in text.split(',') {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--floor `{text}`: expected key=value")))?;
        let v: f64 = val
            .trim()
            .parse()
            .map_err(|e| Failure::Config(format!("--floor `{part}`: {e}")))?;
        let slot = match key.trim() {
            "m" => 0,
            "alpha" => 1,
            "c" => 2,
            k => return Err(Failure::Config(format!("--floor: unknown key `{k}`"))),
        };
        vals[slot] = Some(v);
    }
    let [Some(m), Some(a), Some(c)] = vals else {
        return Err(Failure::Config(format!("--floor `{text}`: need m and alpha")));
    };
    if c != 0.0 {
        return Err(Failure::Config("--floor: the floor fee must have c = 0".into()));
    }
    Ok(FeeStructure::from_percent(m, a, c)?)
}

fn resolve_config(g: &Global) -> Outcome<RunConfig> {
    let path = g
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.market.r, g.r);
    set(&mut cfg.market.gamma, g.gamma);
    set(&mut cfg.market.horizon, g.horizon);
    set(&mut cfg.market.v0, g.v0);
    if g.sigma.is_some() {
        cfg.market.sigma = g.sigma;
    }
    set(&mut cfg.manager.a, g.a_m);
    set(&mut cfg.manager.b, g.b_m);
    set(&mut cfg.investor.a, g.a_i);
    set(&mut cfg.investor.b, g.b_i);
    set(&mut cfg.steps.dm, g.dm);
    set(&mut cfg.steps.dalpha, g.dalpha);
    set(&mut cfg.steps.dc, g.dc);
    if let Some(n) = g.phi_steps {
        cfg.steps.phi_steps = n;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(n) = g.draws {
        cfg.mc_draws = n;
    }
    if let Some(d) = &g.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Outcome<String> {
    let cfg = resolve_config(&cli.global)?;
    let out = |name: &str, ext: &str| {
        cli.global
            .out
            .clone()
            .unwrap_or_else(|| cfg.output_dir.join(format!("{name}.{ext}")))
    };
    match &cli.command {
        Command::Envelope(f) => commands::envelope(&cfg, &parse_fee(&f.fee)?, &out("envelope", "json")),
        Command::Wealth(f) => commands::wealth(&cfg, &parse_fee(&f.fee)?, &out("wealth", "json")),
        Command::Value(f) => commands::value(&cfg, &parse_fee(&f.fee)?, &out("value", "json")),
        Command::Grid => commands::grid(&cfg, &out("grid", "csv")),
        Command::Frontier => commands::frontier(&cfg, &out("frontier", "csv")),
        Command::Preferred { floor } => {
            let floor = floor.as_deref().map(parse_floor).transpose()?;
            commands::preferred(&cfg, floor.as_ref(), &out("preferred", "json"))
        }
        Command::Sensitivity { axis, values } => {
            let grid = commands::sensitivity_grid(*axis, values.as_deref())?;
            commands::sensitivity(&cfg, &grid, &out("sensitivity", "csv"))
        }
        Command::Benchmark { pi, fee } => {
            let fee = fee.as_deref().map(parse_fee).transpose()?;
            commands::benchmark(&cfg, pi, fee, &out("benchmark", "csv"))
        }
        Command::Verify { fees } => {
            let fees = match fees {
                Some(list) => list.split(';').map(parse_fee).collect::<Outcome<Vec<_>>>()?,
                None => commands::default_verify_fees(),
            };
            commands::verify(&cfg, &fees, &out("verify", "csv"))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
