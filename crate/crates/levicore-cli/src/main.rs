use clap::{Args, Parser, Subcommand};
use levicore_cli::config::{parse_param, RunConfig};
use levicore_cli::pipeline::{self, RunError, EXIT_ERROR};
use levicore_cli::output;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "levicore", version, about = "Levi core, D'Angelo norm and Diederich-Fornaess index estimates for example domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: sample, null distribution, core, norm, index routes, checks.
    Analyze(Flags),
    /// Null distribution and its core.
    Core(Flags),
    /// Norm of the D'Angelo class on the null distribution and its core.
    Norm(Flags),
    /// Index estimates by the plurisubharmonicity scan and the norm formula.
    DfScan(Flags),
    /// Radial annulus oracle, its mesh convergence and the appendix norms.
    Oracle(OracleFlags),
    /// Registered example domains.
    Examples {
        #[command(subcommand)]
        what: ExamplesCmd,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    /// Names and parameter schemas.
    List,
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    domain: Option<String>,
    /// Domain parameter as key=value (repeatable).
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    /// Boundary sample size.
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling strategy: grid, random or param.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Gauge basis: auto, poly:D, radial or radial-small.
    #[arg(long)]
    basis: Option<String>,
    /// Size bound on the gauged form ("inf" for none).
    #[arg(long = "K")]
    k: Option<f64>,
    /// Comma separated δ values in (0, 1].
    #[arg(long = "delta-grid", value_delimiter = ',')]
    delta_grid: Option<Vec<f64>>,
    /// Outer collar depth ε₀.
    #[arg(long)]
    collar: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV dumps.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit wall-clock timings.
    #[arg(long)]
    normalized: bool,
}

#[derive(Args, Clone)]
struct OracleFlags {
    #[command(flatten)]
    flags: Flags,
    /// Radial mesh size.
    #[arg(long)]
    m: Option<usize>,
    /// Laurent degree of the appendix norms.
    #[arg(long)]
    degree: Option<usize>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig, RunError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.domain {
            c.domain = v.clone();
        }
        for (k, v) in &self.params {
            c.params.insert(k.clone(), *v);
        }
        if let Some(v) = self.samples {
            c.sample.count = v;
        }
        if let Some(v) = &self.strategy {
            c.sample.strategy = v.parse().map_err(RunError::Other)?;
        }
        if let Some(v) = self.seed {
            c.sample.seed = v;
        }
        if let Some(v) = &self.basis {
            c.basis = v.clone();
        }
        if let Some(v) = self.k {
            c.k = v;
        }
        if let Some(v) = &self.delta_grid {
            c.delta_grid = v.clone();
        }
        if let Some(v) = self.collar {
            c.collar.eps0 = Some(v);
        }
        if let Some(v) = self.threads {
            c.threads = Some(v);
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        if let Some(v) = &self.csv {
            c.csv = Some(v.clone());
        }
        c.normalized |= self.normalized;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<i32, RunError> {
    let cfg = match &cli.command {
        Command::Analyze(f) | Command::Core(f) | Command::Norm(f) | Command::DfScan(f) => f.resolve()?,
        Command::Oracle(o) => {
            let mut flags = o.flags.clone();
            if flags.domain.is_none() && flags.config.is_none() {
                flags.domain = Some("worm".into());
            }
            let mut c = flags.resolve()?;
            if let Some(m) = o.m {
                c.oracle.m = m;
            }
            if let Some(d) = o.degree {
                c.oracle.appendix_degree = d;
            }
            c.validate()?;
            c
        }
        Command::Examples { what: ExamplesCmd::List } => {
            output::emit(&None, &levicore::examples::registry())?;
            return Ok(0);
        }
    };
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| RunError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Analyze(_) => {
            let r = pipeline::analyze(&cfg)?;
            if let (Some(dir), Some(df)) = (&cfg.csv, &r.df) {
                output::defect_csv(dir, &df.route_a.defect_curve)?;
            }
            output::emit(&cfg.out, &r)?;
            Ok(r.exit_code)
        }
        Command::Core(_) => {
            let r = pipeline::core(&cfg)?;
            output::emit(&cfg.out, &r)?;
            Ok(r.exit_code)
        }
        Command::Norm(_) => {
            let r = pipeline::norm(&cfg)?;
            output::emit(&cfg.out, &r)?;
            Ok(r.exit_code)
        }
        Command::DfScan(_) => {
            let r = pipeline::df_scan(&cfg)?;
            if let Some(dir) = &cfg.csv {
                output::defect_csv(dir, &r.df.route_a.defect_curve)?;
            }
            output::emit(&cfg.out, &r)?;
            Ok(r.exit_code)
        }
        Command::Oracle(_) => {
            let r = pipeline::oracle(&cfg)?;
            if let Some(dir) = &cfg.csv {
                output::convergence_csv(dir, &r.convergence)?;
            }
            output::emit(&cfg.out, &r)?;
            Ok(0)
        }
        Command::Examples { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string().trim_end(), "kind": "usage" }));
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string(), "kind": e.kind() }));
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
