use clap::Parser;

use vofem::cli::{execute, exit_code, init_threads, Cli};

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match execute(&cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}
