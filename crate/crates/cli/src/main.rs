mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use commands::CliError;
use config::{Command, ConfigError, RunConfig};

macro_rules! flags {
    ($($field:ident => $key:literal : $help:literal),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        struct Flags {
            $(
                #[arg(long = $key, global = true, allow_hyphen_values = true,
                      value_name = "VALUE", help = $help)]
                $field: Option<String>,
            )*
        }

        impl Flags {
            fn pairs(&self) -> BTreeMap<String, String> {
                let mut m = BTreeMap::new();
                $( if let Some(v) = &self.$field { m.insert($key.to_string(), v.clone()); } )*
                m
            }
        }
    };
}

flags! {
    density => "density": "unimodal, bimodal, or weight:center:rate triples joined by commas",
    kernel => "kernel": "base abstention kernel (exp)",
    gamma => "gamma": "voter loyalty; a positive number or inf",
    alpha => "alpha": "opportunism of the left candidate",
    beta => "beta": "opportunism of the right candidate",
    l0 => "l0": "initial left position",
    r0 => "r0": "initial right position",
    r_fixed => "r-fixed": "fixed right position for curves and fixed points",
    step => "step": "RK4 time step",
    t_max => "t-max": "integration horizon",
    grad_tol => "grad-tol": "steady-state velocity threshold",
    event_tol => "event-tol": "meeting-time bracket width",
    sample_every => "sample-every": "keep every k-th step in trajectory output",
    abs_tol => "abs-tol": "quadrature absolute tolerance",
    rel_tol => "rel-tol": "quadrature relative tolerance",
    max_subdivisions => "max-subdivisions": "quadrature panel limit",
    out => "out": "output path prefix",
    x_min => "x-min": "density grid start",
    x_max => "x-max": "density grid end",
    points => "points": "number of grid points for density and curves",
    ell_min => "ell-min": "curve grid start",
    ell_max => "ell-max": "curve grid end (default r-fixed - 0.001)",
    gammas => "gammas": "comma-separated gamma list for curves",
    gamma_min => "gamma-min": "gamma grid start for bifurcation and sweep",
    gamma_max => "gamma-max": "gamma grid end",
    gamma_step => "gamma-step": "gamma grid spacing",
    beta_min => "beta-min": "sweep beta start",
    beta_max => "beta-max": "sweep beta end",
    beta_step => "beta-step": "sweep beta spacing",
    gamma_tol => "gamma-tol": "bisection width for the critical gamma",
    workers => "workers": "sweep worker threads (output does not depend on it)",
    jump_threshold => "jump-threshold": "minimum |delta q_inf| reported as a discontinuity",
    beta_tol => "beta-tol": "allowed q_inf spread across beta in a separated column",
}

#[derive(Parser, Debug)]
#[command(name = "candyn", version, about = "Two-candidate spatial competition with voter abstention")]
struct Cli {
    /// key = value file applied before flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(flatten)]
    flags: Flags,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Voter density, its derivative and CDF on a grid
    Density,
    /// Left share against its position for several loyalty values
    ShareCurve,
    /// Left share gradient against its position for several loyalty values
    ShareDerivative,
    /// Integrate the two-candidate dynamics
    Trajectory,
    /// Fixed points, critical loyalty and final left position against gamma
    Bifurcation,
    /// Final separation over a (beta, gamma) grid
    Sweep,
    /// Trajectory with full turnout, alpha = 1, beta = 0.5
    Fig2,
    /// Share curves, bimodal
    Fig3,
    /// Share gradients, bimodal
    Fig4,
    /// Bifurcation analysis, bimodal
    Fig5,
    /// Trajectory, bimodal, beta = 0.1, gamma = 3.78
    Fig6,
    /// Trajectory, bimodal, alpha = beta = 1, gamma = 8.1
    Fig7,
    /// Default sweep, bimodal
    Fig8,
}

impl Cmd {
    fn base(self) -> RunConfig {
        let preset = |name| RunConfig::preset(name).expect("known preset");
        match self {
            Cmd::Density => RunConfig::defaults(Command::Density),
            Cmd::ShareCurve => RunConfig::defaults(Command::ShareCurve),
            Cmd::ShareDerivative => RunConfig::defaults(Command::ShareDerivative),
            Cmd::Trajectory => RunConfig::defaults(Command::Trajectory),
            Cmd::Bifurcation => RunConfig::defaults(Command::Bifurcation),
            Cmd::Sweep => RunConfig::defaults(Command::Sweep),
            Cmd::Fig2 => preset("fig2"),
            Cmd::Fig3 => preset("fig3"),
            Cmd::Fig4 => preset("fig4"),
            Cmd::Fig5 => preset("fig5"),
            Cmd::Fig6 => preset("fig6"),
            Cmd::Fig7 => preset("fig7"),
            Cmd::Fig8 => preset("fig8"),
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = cli.command.base();
    if let Some(file) = &cli.config {
        cfg.apply_file(file)?;
    }
    config::apply_pairs(&mut cfg, &cli.flags.pairs())?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let io = |p: &Path, source| CliError::Io {
        path: p.display().to_string(),
        source,
    };
    for (p, bytes) in files {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| io(p, e))?;
        }
        std::fs::write(p, bytes).map_err(|e| io(p, e))?;
    }
    Ok(())
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
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("candyn: config error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.dump_config {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    let result = commands::run(&cfg).and_then(|out| {
        write_all(&out.files)?;
        for (p, _) in &out.files {
            eprintln!("wrote {}", p.display());
        }
        Ok(out.exit_code)
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => {
            eprintln!("candyn: some sweep cells failed; see the summary JSON");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("candyn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
