use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cei_core::analysis;
use cei_core::verify::Suite;
use cei_sim::{cmd_run, cmd_sweep, cmd_verify, describe_outcome, list_scenarios, resolve_scenario};
use clap::{Parser, Subcommand};

/// Two-driver merging and car-following simulator with risk-gated re-planning.
#[derive(Debug, Parser)]
#[command(name = "cei-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a preset or config file and write trace, outcome and plots.
    Run {
        /// Preset name (see list-scenarios) or path to a config file.
        scenario: String,
        /// Config file whose keys override the named preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the four SVG panels.
        #[arg(long)]
        plot: bool,
    },
    /// Car-following gap sweep over follower velocities, e.g. 6..14:2.
    Sweep {
        #[arg(long, allow_hyphen_values = true)]
        velocities: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare a closed-form component against its brute-force oracle.
    Verify {
        /// bounds, posterior or risk
        suite: Suite,
    },
    /// Print the built-in scenarios.
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Ok(false) means the command ran but a check failed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            scenario,
            config,
            out,
            plot,
        } => {
            let cfg = resolve_scenario(&scenario, config.as_deref())?;
            let report = cmd_run(&cfg, &out, plot)?;
            println!("{}", describe_outcome(&report.outcome));
            println!("trace: {}", report.trace_path.display());
            println!("outcome: {}", report.outcome_path.display());
            for p in &report.plot_paths {
                println!("plot: {}", p.display());
            }
            println!("wall time: {:.2} s", report.wall_seconds);
            Ok(true)
        }
        Command::Sweep { velocities, out } => {
            let vs = analysis::parse_velocity_range(&velocities)?;
            let res = cmd_sweep(&vs, &out)?;
            println!("velocity  gap[m]  drift[m/s]  collided");
            for r in &res.report.rows {
                println!("{:8.2}  {:6.3}  {:10.4}  {}", r.velocity, r.steady_state_gap, r.gap_drift, r.collided);
            }
            match res.report.fit {
                Some(f) => println!(
                    "fit: gap = {:.4} + {:.4} * v   (R² = {:.4})",
                    f.intercept, f.slope, f.r_squared
                ),
                None => println!("fit: undefined (fewer than two usable velocities)"),
            }
            let flagged: Vec<String> = res.report.flagged().map(|v| format!("{v}")).collect();
            if !flagged.is_empty() {
                println!("excluded after collision: {}", flagged.join(", "));
            }
            println!("table: {}", res.csv_path.display());
            println!("plot: {}", res.plot_path.display());
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = cmd_verify(suite)?;
            println!("{report}");
            Ok(report.passed)
        }
        Command::ListScenarios => {
            for (name, about) in list_scenarios() {
                println!("{name:<14} {about}");
            }
            Ok(true)
        }
    }
}
