use clap::Parser;
use rgsel_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = rgsel_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
