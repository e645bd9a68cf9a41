use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use posflow::cli::{self, CliError, TableFormat};
use posflow::convergence::StudyOptions;

#[derive(Parser)]
#[command(name = "posflow", version, about = "Positivity-preserving DG solver and interior-weight tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a JSON config; writes snapshots and diagnostics.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Print the interior-weight table of a cell.
    Weights {
        /// interval, square, cube, triangle, tetrahedron, sphere1..3, star1..3
        #[arg(long)]
        cell: String,
        #[arg(long)]
        degree_max: usize,
        #[arg(long, default_value = "text")]
        format: String,
        /// total or tensor
        #[arg(long, default_value = "total")]
        space: String,
    },
    /// Grid-refinement study with limiting on and off; CSV on stdout.
    Convergence {
        /// advection or euler_density_wave
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "1,2,3")]
        degrees: String,
        #[arg(long, default_value = "20,40,80,160")]
        grids: String,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the property suites; exit 0 iff all hold.
    Verify {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn dispatch(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::Run { config, threads } => {
            let d = cli::cmd_run(&config, threads)?;
            let s = &d.summary;
            println!("steps {} final time {}", s.steps, s.final_time);
            for (l, m) in s.functionals.iter().zip(&s.min_average) {
                println!("min {l} average {m:e}");
            }
            if let Some(why) = &s.stopped {
                eprintln!("unlimited run stopped: {why}");
            }
            Ok(true)
        }
        Command::Weights { cell, degree_max, format, space } => {
            let format: TableFormat = format.parse()?;
            print!("{}", cli::cmd_weights(&cell, degree_max, format, cli::parse_space(&space)?)?);
            Ok(true)
        }
        Command::Convergence { problem, degrees, grids, t_final, threads } => {
            if !(t_final > 0.0) {
                return Err(CliError::Usage("t_final must be positive".into()));
            }
            let opts = StudyOptions { t_final, threads: threads.max(1), ..Default::default() };
            let degrees = cli::parse_list(&degrees, "degrees")?;
            let grids = cli::parse_list(&grids, "grids")?;
            print!("{}", cli::cmd_convergence(&problem, &degrees, &grids, &opts)?);
            Ok(true)
        }
        Command::Verify { samples, seed } => {
            let (text, ok) = cli::cmd_verify(samples, seed)?;
            print!("{text}");
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match dispatch(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
