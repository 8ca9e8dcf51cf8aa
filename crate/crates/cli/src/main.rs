use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use critwalk_cli::{execute, CliError, ExperimentConfig, SideSpec};

#[derive(Parser)]
#[command(name = "critwalk", version, about = "Intersection local time experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Naive tail probability P[I_T >= b_T^q].
    Tail(Flags),
    /// Confinement lower bound on the tail probability.
    Confine(Flags),
    /// Exponential moment E[exp(theta I_T^{1/q})].
    Expmoment(Flags),
    /// Both sides of the isomorphism identity.
    Iso(Flags),
    /// rho1 and rho2 on the torus.
    Rho(Flags),
    /// Box Sobolev constant.
    Sobolev(Flags),
    /// Torus Green kernel at the origin along lambda = R^-2.
    Green(Flags),
    /// Run whatever kind the config file names.
    Run(Flags),
}

/// Inline flags mirror the config keys and override the config file.
#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long = "b_T")]
    b_t: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "A")]
    area: Option<f64>,
    /// Torus side or "auto".
    #[arg(long = "R")]
    side: Option<SideSpec>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    paired: Option<bool>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "box_L")]
    box_radius: Option<u64>,
    #[arg(long = "L")]
    sobolev_radius: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sides: Option<Vec<usize>>,
    #[arg(long)]
    tol: Option<f64>,
}

impl Flags {
    fn inline(&self) -> ExperimentConfig {
        ExperimentConfig {
            kind: None,
            d: self.d,
            q: self.q,
            horizon: self.horizon,
            b_t: self.b_t,
            theta: self.theta,
            alpha: self.alpha,
            area: self.area,
            side: self.side,
            lambda: self.lambda,
            s: self.s,
            a: self.a,
            paired: self.paired,
            n: self.n,
            seed: self.seed,
            out: self.out.clone(),
            box_radius: self.box_radius,
            sobolev_radius: self.sobolev_radius,
            sides: self.sides.clone(),
            tol: self.tol,
        }
    }
}

fn resolve(kind: Option<&str>, flags: &Flags) -> Result<ExperimentConfig, CliError> {
    let file = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = file.overlay(flags.inline());
    if let Some(kind) = kind {
        match cfg.kind.as_deref() {
            Some(k) if k != kind => {
                return Err(CliError::Config(format!(
                    "config kind {k:?} does not match the {kind:?} subcommand"
                )))
            }
            _ => cfg.kind = Some(kind.to_string()),
        }
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::Tail(f) => (Some("tail"), f),
        Command::Confine(f) => (Some("confinement"), f),
        Command::Expmoment(f) => (Some("exp_moment"), f),
        Command::Iso(f) => (Some("isomorphism"), f),
        Command::Rho(f) => (Some("variational"), f),
        Command::Sobolev(f) => (Some("sobolev"), f),
        Command::Green(f) => (Some("green_convergence"), f),
        Command::Run(f) => (None, f),
    };
    match resolve(kind, flags).and_then(|cfg| execute(&cfg)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("critwalk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
