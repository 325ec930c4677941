use clap::Parser;
use summoning::cli::{run_cli, Cli};

fn main() {
    let cli = Cli::parse();
    let code = run_cli(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
