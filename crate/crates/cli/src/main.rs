use clap::Parser;

fn main() {
    let cli = rstokes_cli::Cli::parse();
    std::process::exit(rstokes_cli::run(&cli));
}
