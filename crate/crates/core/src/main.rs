use std::process::ExitCode;

use clap::Parser;
use fpm::cli::{execute, Cli};

fn main() -> ExitCode {
    if let Some(threads) = std::env::var("FPM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if threads > 0 {
            // Reductions are ordered, so results do not depend on this.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
