use std::process::ExitCode;

use clap::Parser;
use pdbfw_cli::{compare, run, Cli, Command, RunSpec};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => RunSpec::from_args(&args).and_then(|spec| {
            let rows = run(&spec)?;
            for r in rows {
                println!("{}\titer {}\tprimal {}\tgap {:e}", r.name, r.iterations, r.final_primal, r.final_gap);
            }
            Ok(())
        }),
        Command::Compare { dir } => compare(&dir).map(|c| print!("{}", c.render())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
